//! Truncated asymptotic solutions of the averaged amplitude equation
//! `d rho / dt = sum_k t^(-k/q) Lambda_k(rho)`.
//!
//! All four solution families are built by one lattice engine. Substituting
//! `rho = t^(-nu) xi` and `xi = sum_F xi_F(log t) t^(-F/L)` turns the
//! equation into a triangular chain: collecting the power `t^(-A/L)` in
//!
//! `d xi / d log t = nu xi + t^(nu + 1) Lambda(t^(-nu) xi, t)`
//!
//! determines one new coefficient per order. `L` is the least common
//! denominator of `1/q` and `nu`, so every exponent is an exact lattice
//! point. The lowest populated order `E_lin` of the right-hand side decides
//! the anchor:
//!
//! - `E_lin < 0`: the anchor is a root of the balance polynomial
//!   `a_{E_lin}` and corrections divide by its slope (algebraic chain);
//! - `E_lin = 0`: corrections solve scalar linear ODEs in `log t`, which is
//!   where logarithm terms can enter (marginal case);
//! - `E_lin > 0`: the anchor is a free drift constant and corrections solve
//!   ODEs with coefficient `F/L` (drift chain).

use crate::averaging::AveragedSystem;
use crate::error::{Error, Result};
use crate::series::{lp_case_for, lp_solve_linear_ode, LogPolynomial, RadialSeries};
use crate::tol;

/// Solution family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// Decaying amplitude anchored at the root of a linear balance.
    Rho1,
    /// Amplitude attracted to a root of the leading average.
    Rho2,
    /// Slow drift around a free anchor amplitude.
    Rho3,
    /// Decaying amplitude anchored at a root of the nonlinear balance.
    RhoM,
}

impl SolutionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionKind::Rho1 => "rho1",
            SolutionKind::Rho2 => "rho2",
            SolutionKind::Rho3 => "rho3",
            SolutionKind::RhoM => "rhom",
        }
    }
}

/// Truncated series `rho(t) = t^-leading sum_F coefficients[F](log t) t^(-F step)`.
#[derive(Debug, Clone)]
pub struct AsymptoticSolution {
    pub kind: SolutionKind,
    /// Decay exponent `nu` of the leading factor.
    pub leading_power: f64,
    /// Lattice spacing `1/L` between consecutive coefficient exponents.
    pub step: f64,
    /// `coefficients[F]` multiplies `t^(-leading - F step)`; index 0 is the
    /// anchor.
    pub coefficients: Vec<LogPolynomial>,
    /// Number of correction orders solved.
    pub m_trunc: usize,
    pub anchor: f64,
    /// Leading angular frequency of the accompanying phase.
    pub phase_frequency: f64,
    pub t_valid: f64,
    /// Right-hand sides `b_F` of the correction chain, for diagnostics.
    pub rhs_terms: Vec<LogPolynomial>,
}

impl AsymptoticSolution {
    /// Value of the truncated series.
    pub fn eval(&self, t: f64) -> f64 {
        let tau = t.ln();
        let mut acc = 0.0;
        for (f, c) in self.coefficients.iter().enumerate() {
            acc += c.eval(tau) * t.powf(-self.leading_power - f as f64 * self.step);
        }
        acc
    }

    /// Exact time derivative of the truncated series.
    pub fn derivative(&self, t: f64) -> f64 {
        let tau = t.ln();
        let mut acc = 0.0;
        for (f, c) in self.coefficients.iter().enumerate() {
            let power = self.leading_power + f as f64 * self.step;
            let value = c.derivative().eval(tau) - power * c.eval(tau);
            acc += value * t.powf(-power - 1.0);
        }
        acc
    }
}

/// Defect of a truncated solution against the averaged equation.
pub fn residual(sol: &AsymptoticSolution, avg: &AveragedSystem, t: f64) -> f64 {
    sol.derivative(t) - avg.lambda_eval(sol.eval(t), t)
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a.max(1)
}

/// Exponent `nu` as an exact reduced fraction.
#[derive(Debug, Clone, Copy)]
struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    fn new(num: i64, den: i64) -> Self {
        assert!(den > 0 && num >= 0);
        let g = gcd(num, den);
        Rational { num: num / g, den: den / g }
    }

    fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// One monomial `c xi^j` of the graded right-hand side at lattice order `e`.
#[derive(Debug, Clone, Copy)]
struct LatticeTerm {
    e: i64,
    j: usize,
    c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AnchorKind {
    Root,
    Drift,
}

/// Graded powers `pows[j][o] = [u^o] xi(u)^j` of the partial solution.
fn graded_powers(
    xi: &[LogPolynomial],
    max_j: usize,
    max_o: usize,
) -> Result<Vec<Vec<LogPolynomial>>> {
    let mut pows: Vec<Vec<LogPolynomial>> = Vec::with_capacity(max_j + 1);
    let mut unit = vec![LogPolynomial::zero(); max_o + 1];
    unit[0] = LogPolynomial::constant(1.0);
    pows.push(unit);
    for j in 1..=max_j {
        let mut cur = vec![LogPolynomial::zero(); max_o + 1];
        for o in 0..=max_o {
            let mut acc = LogPolynomial::zero();
            for a in 0..=o {
                if xi[a].norm_inf() == 0.0 || pows[j - 1][o - a].norm_inf() == 0.0 {
                    continue;
                }
                acc = acc.add(&pows[j - 1][o - a].mul(&xi[a])?);
            }
            cur[o] = acc;
        }
        pows.push(cur);
    }
    Ok(pows)
}

/// Run the correction chain. `nu` and `xi0` come from the calling builder;
/// the engine checks that the anchor matches the lattice structure.
fn build_lattice_solution(
    avg: &AveragedSystem,
    kind: SolutionKind,
    expected: AnchorKind,
    nu: Rational,
    xi0: f64,
    m_trunc: usize,
) -> Result<AsymptoticSolution> {
    let q = avg.q as i64;
    let l = q / gcd(q, nu.den) * nu.den;
    let lq = l / q;
    let nu_l = nu.num * (l / nu.den);
    let thr = avg.zero_thr;

    let mut terms: Vec<LatticeTerm> = Vec::new();
    for (&k, lam) in &avg.lambda {
        for (j, &c) in lam.coeffs.iter().enumerate() {
            if c.abs() > thr {
                let e = k as i64 * lq + (j as i64 - 1) * nu_l - l;
                terms.push(LatticeTerm { e, j, c });
            }
        }
    }
    if nu.num != 0 {
        terms.push(LatticeTerm { e: 0, j: 1, c: nu.value() });
    }

    let e_lin = terms.iter().map(|t| t.e).min();
    let anchor_kind = match e_lin {
        Some(e) if e <= 0 => AnchorKind::Root,
        _ => AnchorKind::Drift,
    };
    if anchor_kind != expected {
        return Err(Error::AssumptionViolated {
            what: format!(
                "balance order {:?} does not match the requested {} construction",
                e_lin,
                kind.as_str()
            ),
        });
    }

    let mut mu_slope = 0.0;
    if anchor_kind == AnchorKind::Root {
        let e0 = e_lin.unwrap();
        let mut balance = 0.0;
        let mut scale = 0.0_f64;
        for t in terms.iter().filter(|t| t.e == e0) {
            balance += t.c * xi0.powi(t.j as i32);
            if t.j >= 1 {
                mu_slope += t.c * t.j as f64 * xi0.powi(t.j as i32 - 1);
            }
            scale = scale.max(t.c.abs());
        }
        if balance.abs() > 1e-8 * scale.max(1.0) {
            return Err(Error::AssumptionViolated {
                what: format!("anchor {xi0:.9} is not a root of the balance (value {balance:e})"),
            });
        }
        if e0 < 0 && mu_slope.abs() <= tol::ZERO_COEFF {
            return Err(Error::DegenerateCoefficient {
                what: format!("balance slope at the anchor {xi0:.9} vanishes"),
            });
        }
    }

    let max_j = terms.iter().map(|t| t.j).max().unwrap_or(0);
    let tau_star = avg.t_star.max(1.0).ln();
    let lf = l as f64;

    let mut xi = vec![LogPolynomial::zero(); m_trunc + 1];
    xi[0] = LogPolynomial::constant(xi0);
    let mut rhs_terms = Vec::with_capacity(m_trunc);

    for f in 1..=m_trunc {
        let a_order = match anchor_kind {
            AnchorKind::Root => e_lin.unwrap() + f as i64,
            AnchorKind::Drift => f as i64,
        };
        // xi[f] is still zero here, so the power table excludes the unknown.
        let pows = graded_powers(&xi, max_j, f)?;
        let mut rest = LogPolynomial::zero();
        for t in &terms {
            let idx = a_order - t.e;
            if idx < 0 || idx > f as i64 {
                continue;
            }
            let p = &pows[t.j][idx as usize];
            if p.norm_inf() != 0.0 {
                rest = rest.add(&p.scale(t.c));
            }
        }

        let (b, solution) = match anchor_kind {
            AnchorKind::Root if e_lin.unwrap() < 0 => {
                // Equation: lhs_known = mu_slope xi_f + rest, algebraic.
                let mut b = rest;
                if a_order >= 0 {
                    let a = a_order as usize;
                    let lhs = xi[a].derivative().sub(&xi[a].scale(a_order as f64 / lf));
                    b = b.sub(&lhs);
                }
                let sol = b.scale(-1.0 / mu_slope);
                (b, sol)
            }
            AnchorKind::Root => {
                // Marginal lattice: xi_f' - (mu_slope + f/L) xi_f = rest.
                let mu = mu_slope + f as f64 / lf;
                let case = lp_case_for(mu, thr);
                let sol = lp_solve_linear_ode(mu, &rest, case, tau_star)?;
                (rest, sol)
            }
            AnchorKind::Drift => {
                // xi_f' - (f/L) xi_f = rest.
                let mu = f as f64 / lf;
                let sol = lp_solve_linear_ode(mu, &rest, lp_case_for(mu, thr), tau_star)?;
                (rest, sol)
            }
        };
        rhs_terms.push(b.trimmed());
        xi[f] = solution.trimmed();
    }

    let phase_frequency =
        if nu.num != 0 { avg.omega.eval(0.0) } else { avg.omega.eval(xi0) };
    Ok(AsymptoticSolution {
        kind,
        leading_power: nu.value(),
        step: 1.0 / lf,
        coefficients: xi,
        m_trunc,
        anchor: xi0,
        phase_frequency,
        t_valid: avg.t_star.max(1.0),
        rhs_terms,
    })
}

/// Decaying branch anchored at the root of the linear balance:
/// `xi0 = -mu_p / (lambda_n + nu0)` when `n = q`, without the `nu0` shift
/// otherwise.
pub fn build_rho1(avg: &AveragedSystem, n: usize, m_trunc: usize) -> Result<AsymptoticSolution> {
    let p = avg.p as usize;
    let q = avg.q as usize;
    let lam_n = avg
        .lambda
        .get(&n)
        .ok_or_else(|| Error::AssumptionViolated { what: format!("order {n} average missing") })?;
    let lambda_n = lam_n.coeffs.get(1).copied().unwrap_or(0.0);
    if lambda_n.abs() <= avg.zero_thr {
        return Err(Error::AssumptionViolated {
            what: format!("order {n} average has no linear part"),
        });
    }
    let mu_p = avg.lambda.get(&p).map(|l| l.coeffs[0]).unwrap_or(0.0);
    let nu = Rational::new((p - n) as i64, q as i64);
    let denom = lambda_n + if n == q { nu.value() } else { 0.0 };
    if denom.abs() <= tol::ZERO_COEFF {
        return Err(Error::DegenerateCoefficient {
            what: "anchor denominator lambda_n + nu0 vanishes".into(),
        });
    }
    let xi0 = -mu_p / denom;
    build_lattice_solution(avg, SolutionKind::Rho1, AnchorKind::Root, nu, xi0, m_trunc)
}

/// Series about a root `rho0` of the leading average.
pub fn build_rho2(avg: &AveragedSystem, rho0: f64, m_trunc: usize) -> Result<AsymptoticSolution> {
    let p = avg.p as usize;
    let lam_p = avg
        .lambda
        .get(&p)
        .ok_or_else(|| Error::AssumptionViolated { what: format!("order {p} average missing") })?;
    let scale = lam_p.norm_inf().max(1.0);
    if lam_p.eval(rho0).abs() > 1e-8 * scale {
        return Err(Error::AssumptionViolated {
            what: format!("{rho0:.9} is not a root of the order-{p} average"),
        });
    }
    if lam_p.derivative().eval(rho0).abs() <= tol::NEAR_EQ_FACTOR * avg.zero_thr * scale {
        return Err(Error::DegenerateCoefficient {
            what: format!("order-{p} average has vanishing slope at {rho0:.9}"),
        });
    }
    build_lattice_solution(
        avg,
        SolutionKind::Rho2,
        AnchorKind::Root,
        Rational::new(0, 1),
        rho0,
        m_trunc,
    )
}

/// Drift series around a free anchor `rho0`; requires `n > q`.
pub fn build_rho3(
    avg: &AveragedSystem,
    rho0: f64,
    n: usize,
    m_trunc: usize,
) -> Result<AsymptoticSolution> {
    if rho0.abs() >= avg.r_star {
        return Err(Error::OutOfDomain { r: rho0, r_star: avg.r_star });
    }
    if let Some(lam_n) = avg.lambda.get(&n) {
        let scale = lam_n.norm_inf().max(1.0);
        if !lam_n.is_zero(avg.zero_thr)
            && lam_n.eval(rho0).abs() <= tol::NEAR_EQ_FACTOR * avg.zero_thr * scale
        {
            return Err(Error::AssumptionViolated {
                what: format!("order {n} average vanishes at the anchor {rho0:.9}"),
            });
        }
    }
    build_lattice_solution(
        avg,
        SolutionKind::Rho3,
        AnchorKind::Drift,
        Rational::new(0, 1),
        rho0,
        m_trunc,
    )
}

/// Decaying branch anchored at a root `z_m` of the nonlinear balance
/// polynomial, with exponent `theta_m` chosen by the branch comparison
/// `m <=> m_star`.
pub fn build_rhom(
    avg: &AveragedSystem,
    z_m: f64,
    n: usize,
    d: usize,
    m: usize,
    m_trunc: usize,
) -> Result<AsymptoticSolution> {
    let p = avg.p as usize;
    let q = avg.q as usize;
    if m < 2 || p <= n + d {
        return Err(Error::AssumptionViolated {
            what: format!("nonlinear branch needs m >= 2 and n + d < p, got m = {m}, d = {d}"),
        });
    }
    // m <= m_star exactly when m (p - n - d) <= p - n.
    let nu = if m * (p - n - d) <= p - n {
        Rational::new((p - n) as i64, (q * m) as i64)
    } else {
        Rational::new(d as i64, (q * (m - 1)) as i64)
    };
    build_lattice_solution(avg, SolutionKind::RhoM, AnchorKind::Root, nu, z_m, m_trunc)
}

/// Accumulated phase `int_{t_from}^{t_to} omega(rho(s)) ds` by adaptive
/// quadrature in `log s`.
pub fn phase_of(
    sol: &AsymptoticSolution,
    t_from: f64,
    t_to: f64,
    omega: &RadialSeries,
) -> f64 {
    assert!(t_from > 0.0 && t_to >= t_from);
    let g = |x: f64| {
        let s = x.exp();
        omega.eval(sol.eval(s)) * s
    };
    let (a, b) = (t_from.ln(), t_to.ln());
    let fa = g(a);
    let fb = g(b);
    let fm = g(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(&g, a, b, fa, fm, fb, whole, 40)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = g(lm);
    let frm = g(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 1e-12 * whole.abs().max(1e-9) {
        return left + right + err / 15.0;
    }
    adaptive_simpson(g, a, m, fa, flm, fm, left, depth - 1)
        + adaptive_simpson(g, m, b, fm, frm, fb, right, depth - 1)
}
