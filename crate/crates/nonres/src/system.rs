//! System description: phase law, frequency, and graded perturbation terms.

use crate::error::{Error, Result};
use crate::series::{EpsExpansion, RadialSeries};

/// Unbounded slow phase `S(t) = s_0 t + sum_{k=1}^{q-1} s_k t^(1-k/q) + s_q log t`.
#[derive(Debug, Clone)]
pub struct PhaseLaw {
    /// `s[k]` multiplies `t^(1-k/q)` for `k < q` and `log t` for `k = q`.
    pub s: Vec<f64>,
    pub q: u32,
}

impl PhaseLaw {
    pub fn new(s: Vec<f64>, q: u32) -> Self {
        assert_eq!(s.len(), q as usize + 1, "phase law needs q+1 coefficients");
        PhaseLaw { s, q }
    }

    /// Constant drift only: `S(t) = s_0 t`.
    pub fn linear(s0: f64, q: u32) -> Self {
        let mut s = vec![0.0; q as usize + 1];
        s[0] = s0;
        PhaseLaw { s, q }
    }

    pub fn s0(&self) -> f64 {
        self.s[0]
    }

    pub fn eval(&self, t: f64) -> f64 {
        let q = self.q as f64;
        let mut acc = self.s[0] * t;
        for k in 1..self.q as usize {
            if self.s[k] != 0.0 {
                acc += self.s[k] * t.powf(1.0 - k as f64 / q);
            }
        }
        if self.s[self.q as usize] != 0.0 {
            acc += self.s[self.q as usize] * t.ln();
        }
        acc
    }

    /// dS/dt.
    pub fn derivative(&self, t: f64) -> f64 {
        let q = self.q as f64;
        let mut acc = self.s[0];
        for k in 1..self.q as usize {
            if self.s[k] != 0.0 {
                acc += (1.0 - k as f64 / q) * self.s[k] * t.powf(-(k as f64) / q);
            }
        }
        acc + self.s[self.q as usize] / t
    }

    /// Coefficient of `t^(-i/q)` in dS/dt: `(1-i/q) s_i` for `0 < i < q`,
    /// `s_q` for `i = q` (the log term differentiates to `t^-1`), else 0.
    pub fn transport_weight(&self, i: usize) -> f64 {
        let q = self.q as usize;
        if i == 0 {
            self.s[0]
        } else if i < q {
            (1.0 - i as f64 / q as f64) * self.s[i]
        } else if i == q {
            self.s[q]
        } else {
            0.0
        }
    }
}

/// Planar oscillatory system in amplitude/phase form:
///
/// ```text
///   dr/dt   = sum_{k>=1} t^(-k/q) f_k(r, phi, S(t)),
///   dphi/dt = omega(r) + r^(-1) sum_{k>=1} t^(-k/q) g_k(r, phi, S(t)).
/// ```
///
/// `p` is the leading damping order: terms of order `k < p` must vanish at
/// `r = 0`, and the mean of `f_p` at `r = 0` (written `mu_p`) drives the
/// asymptotics.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub id: String,
    pub omega: RadialSeries,
    pub q: u32,
    pub p: u32,
    pub f_terms: EpsExpansion,
    pub g_terms: EpsExpansion,
    pub phase: PhaseLaw,
    /// Radius of the disc on which the series data is trusted.
    pub r0: f64,
}

impl SystemSpec {
    pub fn omega0(&self) -> f64 {
        self.omega.eval(0.0)
    }

    /// Mean of the order-`p` amplitude term at `r = 0`.
    pub fn mu_p(&self, zero_thr: f64) -> Result<f64> {
        match self.f_terms.get(self.p as usize) {
            None => Ok(0.0),
            Some(fp) => Ok(fp.average(zero_thr)?.coeffs[0]),
        }
    }

    /// Union of Fourier modes over all perturbation terms.
    pub fn input_modes(&self) -> Vec<(i32, i32)> {
        let mut keys = std::collections::BTreeSet::new();
        for term in self.f_terms.terms.values().chain(self.g_terms.terms.values()) {
            for k in term.mode_keys() {
                keys.insert(k);
            }
        }
        keys.into_iter().collect()
    }

    pub fn max_order(&self) -> usize {
        self.f_terms.max_order().max(self.g_terms.max_order())
    }

    /// Structural checks that do not depend on `mu_p`:
    /// positive frequency at the origin, consistent phase law, and terms of
    /// order below `p` vanishing at `r = 0`.
    pub fn validate_structure(&self, zero_thr: f64) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config { what: "q must be at least 1".into() });
        }
        if self.p == 0 {
            return Err(Error::Config { what: "p must be at least 1".into() });
        }
        if self.phase.q != self.q || self.phase.s.len() != self.q as usize + 1 {
            return Err(Error::Config {
                what: format!("phase law must carry q+1 = {} coefficients", self.q + 1),
            });
        }
        let w0 = self.omega0();
        if !(w0 > 0.0) {
            return Err(Error::NonPositiveValue { what: "omega(0)".into(), value: w0 });
        }
        if !(self.r0 > 0.0) {
            return Err(Error::NonPositiveValue { what: "r0".into(), value: self.r0 });
        }
        for (&k, term) in self.f_terms.terms.iter().chain(self.g_terms.terms.iter()) {
            if k == 0 {
                return Err(Error::Config { what: "perturbation orders start at 1".into() });
            }
            if k < self.p as usize {
                let c0 = term.max_const_coeff();
                if c0 > zero_thr {
                    return Err(Error::AssumptionViolated {
                        what: format!(
                            "perturbation of order {k} below the damping order {} must \
                             vanish at r = 0 (constant coefficient {c0:e})",
                            self.p
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Structural checks plus a nonzero leading mean `mu_p`.
    pub fn validate(&self, zero_thr: f64) -> Result<()> {
        self.validate_structure(zero_thr)?;
        let mu = self.mu_p(zero_thr)?;
        if mu.abs() <= zero_thr {
            return Err(Error::AssumptionViolated {
                what: format!("leading mean damping coefficient mu_p = {mu:e} vanishes"),
            });
        }
        Ok(())
    }

    /// Sum of the amplitude terms at a point and time.
    pub fn eval_f(&self, r: f64, phi: f64, s: f64, t: f64) -> f64 {
        self.f_terms.eval(r, phi, s, t)
    }

    /// Sum of the phase perturbation terms (before division by `r`).
    pub fn eval_g(&self, r: f64, phi: f64, s: f64, t: f64) -> f64 {
        self.g_terms.eval(r, phi, s, t)
    }
}
