//! Builtin example systems.
//!
//! Three families, each available both in amplitude/phase form (a
//! [`SystemSpec`]) and as the Cartesian vector field it came from:
//!
//! - `ex0`: a linear oscillator with `t^-1` damping and a decaying
//!   oscillatory drive that does not vanish at the origin;
//! - `ex1`: its two-parameter generalization with independent decay orders
//!   for the linear part and the drive;
//! - `ex2`: a pendulum with cubic, linear, and normalized drives, reduced to
//!   amplitude/phase form through its action-angle chart.
//!
//! The pendulum chart is built by a Lindstedt-Poincare iteration and is the
//! only nontrivial reduction; `ex0`/`ex1` are exact trigonometric
//! decompositions.

use crate::error::{Error, Result};
use crate::series::{EpsExpansion, FtSeries, RadialSeries, Var};
use crate::sim::CartesianField;
use crate::system::{PhaseLaw, SystemSpec};
use crate::tol;

use std::f64::consts::SQRT_2;

/// `c0 + c1 sin S` as a Fourier series.
fn slow_coefficient(c0: f64, c1: f64, trunc: usize) -> FtSeries {
    let mut out = FtSeries::zero(trunc);
    if c0 != 0.0 {
        out.add_cos(0, 0, &RadialSeries::constant(c0, trunc));
    }
    if c1 != 0.0 {
        out.add_sin(0, 1, &RadialSeries::constant(c1, trunc));
    }
    out
}

fn ft_constant(value: f64, trunc: usize) -> FtSeries {
    let mut out = FtSeries::zero(trunc);
    out.add_cos(0, 0, &RadialSeries::constant(value, trunc));
    out
}

/// Oscillator with amplitude-proportional damping at order 2 and a drive of
/// order `p_half_exponent` that stays finite at the origin:
///
/// ```text
///   dx/dt = y,
///   dy/dt = -x + t^-1 lambda y + t^(-p/2) (g0 + g1 sin S) y / |(x, y)|,
/// ```
///
/// with `S(t) = sqrt(2) t`. The amplitude/phase terms are entered directly
/// from their product-to-sum decomposition.
pub fn make_ex0(lambda: f64, gamma0: f64, gamma1: f64, p_half_exponent: u32) -> SystemSpec {
    assert!(p_half_exponent >= 1);
    let q = 2u32;
    let p = p_half_exponent;
    let trunc = tol::RADIAL_TRUNC;
    let r1 = RadialSeries::monomial(1.0, 1, trunc);
    let c1 = RadialSeries::constant(1.0, trunc);

    let mut f_terms = EpsExpansion::new(q);
    let mut g_terms = EpsExpansion::new(q);

    // lambda r sin^2(phi) and lambda r sin(phi)cos(phi).
    if lambda != 0.0 {
        let mut f2 = FtSeries::zero(trunc);
        f2.add_cos(0, 0, &r1.scale(lambda / 2.0));
        f2.add_cos(2, 0, &r1.scale(-lambda / 2.0));
        f_terms.insert(2, f2);
        let mut g2 = FtSeries::zero(trunc);
        g2.add_sin(2, 0, &r1.scale(lambda / 2.0));
        g_terms.insert(2, g2);
    }

    // (g0 + g1 sin S) sin^2(phi) and (g0 + g1 sin S) sin(phi)cos(phi).
    if gamma0 != 0.0 || gamma1 != 0.0 {
        let mut fp = FtSeries::zero(trunc);
        fp.add_cos(0, 0, &c1.scale(gamma0 / 2.0));
        fp.add_cos(2, 0, &c1.scale(-gamma0 / 2.0));
        fp.add_sin(0, 1, &c1.scale(gamma1 / 2.0));
        fp.add_sin(2, 1, &c1.scale(-gamma1 / 4.0));
        fp.add_sin(2, -1, &c1.scale(gamma1 / 4.0));
        f_terms.insert(p as usize, fp);
        let mut gp = FtSeries::zero(trunc);
        gp.add_sin(2, 0, &c1.scale(gamma0 / 2.0));
        gp.add_cos(2, -1, &c1.scale(gamma1 / 4.0));
        gp.add_cos(2, 1, &c1.scale(-gamma1 / 4.0));
        g_terms.insert(p as usize, gp);
    }

    SystemSpec {
        id: "ex0".into(),
        omega: RadialSeries::constant(1.0, trunc),
        q,
        p,
        f_terms,
        g_terms,
        phase: PhaseLaw::linear(SQRT_2, q),
        r0: 1.0,
    }
}

/// Cartesian form of [`make_ex0`].
pub fn ex0_field(
    lambda: f64,
    gamma0: f64,
    gamma1: f64,
    p_half_exponent: u32,
) -> CartesianField<impl Fn(f64, f64, f64) -> (f64, f64)> {
    let p = p_half_exponent as f64;
    CartesianField {
        id: "ex0".into(),
        f: move |t: f64, x: f64, y: f64| {
            let s = SQRT_2 * t;
            let gamma = gamma0 + gamma1 * s.sin();
            let dy = -x + lambda * y / t + t.powf(-p / 2.0) * gamma * y / x.hypot(y);
            (y, dy)
        },
    }
}

/// Oscillator with a general linear perturbation of decay order `h` and a
/// normalized drive of order `p` (both on the `t^(-k/2)` scale):
///
/// ```text
///   dx/dt = y,
///   dy/dt = -x + t^(-h/2) (a(S) x + b(S) y) + t^(-p/2) c(S) y / |(x, y)|,
/// ```
///
/// with `S(t) = sqrt(2) t + s2 log t` and `a`, `b`, `c` of the form
/// `c0 + c1 sin S`. The amplitude/phase terms are assembled by series
/// products, so this doubles as an independent route to `ex0`.
#[allow(clippy::too_many_arguments)]
pub fn make_ex1(
    h: u32,
    p: u32,
    alpha0: f64,
    alpha1: f64,
    beta0: f64,
    beta1: f64,
    gamma0: f64,
    gamma1: f64,
    s2: f64,
) -> SystemSpec {
    assert!(h >= 1 && p >= 1);
    let q = 2u32;
    let trunc = tol::RADIAL_TRUNC;
    let clip = tol::K1_CLIP;
    let r1 = RadialSeries::monomial(1.0, 1, trunc);
    let c1 = RadialSeries::constant(1.0, trunc);

    let mut sin_phi = FtSeries::zero(trunc);
    sin_phi.add_sin(1, 0, &c1);
    let mut cos_phi = FtSeries::zero(trunc);
    cos_phi.add_cos(1, 0, &c1);

    let alpha = slow_coefficient(alpha0, alpha1, trunc);
    let beta = slow_coefficient(beta0, beta1, trunc);
    let gamma = slow_coefficient(gamma0, gamma1, trunc);

    let mut f_terms = EpsExpansion::new(q);
    let mut g_terms = EpsExpansion::new(q);

    // -(a cos - b sin) r sin for dr, -(a cos - b sin) r cos for dphi.
    let bracket = alpha.mul(&cos_phi, clip).sub(&beta.mul(&sin_phi, clip));
    f_terms.insert(h as usize, bracket.mul(&sin_phi, clip).mul_rs(&r1).scale(-1.0));
    g_terms.insert(h as usize, bracket.mul(&cos_phi, clip).mul_rs(&r1).scale(-1.0));

    // c(S) sin^2 for dr, c(S) sin cos for dphi.
    f_terms.insert(p as usize, gamma.mul(&sin_phi.mul(&sin_phi, clip), clip));
    g_terms.insert(p as usize, gamma.mul(&sin_phi.mul(&cos_phi, clip), clip));

    let mut s = vec![0.0; q as usize + 1];
    s[0] = SQRT_2;
    s[q as usize] = s2;
    SystemSpec {
        id: "ex1".into(),
        omega: RadialSeries::constant(1.0, trunc),
        q,
        p,
        f_terms,
        g_terms,
        phase: PhaseLaw::new(s, q),
        r0: 1.0,
    }
}

/// Cartesian form of [`make_ex1`].
#[allow(clippy::too_many_arguments)]
pub fn ex1_field(
    h: u32,
    p: u32,
    alpha0: f64,
    alpha1: f64,
    beta0: f64,
    beta1: f64,
    gamma0: f64,
    gamma1: f64,
    s2: f64,
) -> CartesianField<impl Fn(f64, f64, f64) -> (f64, f64)> {
    let (hf, pf) = (h as f64, p as f64);
    CartesianField {
        id: "ex1".into(),
        f: move |t: f64, x: f64, y: f64| {
            let s = SQRT_2 * t + s2 * t.ln();
            let alpha = alpha0 + alpha1 * s.sin();
            let beta = beta0 + beta1 * s.sin();
            let gamma = gamma0 + gamma1 * s.sin();
            let dy = -x
                + t.powf(-hf / 2.0) * (alpha * x + beta * y)
                + t.powf(-pf / 2.0) * gamma * y / x.hypot(y);
            (y, dy)
        },
    }
}

// ---------------------------------------------------------------------------
// Pendulum action-angle chart
// ---------------------------------------------------------------------------

/// Action-angle chart of the pendulum `H(x, y) = y^2/2 - cos x + 1` near the
/// origin: `x = X(phi, r)`, `y = Y(phi, r)` with `H = r^2/2` on the image
/// and angular frequency `w(r)`.
#[derive(Debug, Clone)]
pub struct PendulumChart {
    pub w: RadialSeries,
    pub x: FtSeries,
    pub y: FtSeries,
    pub order: usize,
}

/// Cosine-harmonic polynomial `sum_k h[k](r) cos(k phi)`, the working
/// representation inside the chart iteration. All slots share one
/// truncation order.
#[derive(Debug, Clone)]
struct CosPoly {
    h: Vec<RadialSeries>,
}

/// Sine-harmonic polynomial `sum_{k>=1} h[k](r) sin(k phi)`; slot 0 is kept
/// for index alignment and stays zero.
#[derive(Debug, Clone)]
struct SinPoly {
    h: Vec<RadialSeries>,
}

impl CosPoly {
    fn zero(kmax: usize, trunc: usize) -> Self {
        CosPoly { h: vec![RadialSeries::zero(trunc); kmax + 1] }
    }

    fn kmax(&self) -> usize {
        self.h.len() - 1
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in other.h.iter().enumerate() {
            out.h[k] = out.h[k].add(&c.padded(out.h[k].trunc()));
        }
        out
    }

    fn scale(&self, factor: f64) -> Self {
        CosPoly { h: self.h.iter().map(|c| c.scale(factor)).collect() }
    }

    fn mul_rs(&self, rs: &RadialSeries) -> Self {
        CosPoly { h: self.h.iter().map(|c| c.mul(rs)).collect() }
    }

    /// cos(a)cos(b) = (cos(a+b) + cos(a-b)) / 2; harmonics above the slot
    /// range carry only radial orders beyond the truncation and are dropped.
    fn mul(&self, other: &Self) -> Self {
        let mut out = CosPoly::zero(self.kmax(), self.h[0].trunc());
        for (k, a) in self.h.iter().enumerate() {
            if a.norm_inf() == 0.0 {
                continue;
            }
            for (l, b) in other.h.iter().enumerate() {
                if b.norm_inf() == 0.0 {
                    continue;
                }
                let prod = a.mul(b).scale(0.5);
                if k + l <= out.kmax() {
                    out.h[k + l] = out.h[k + l].add(&prod);
                }
                let d = k.abs_diff(l);
                out.h[d] = out.h[d].add(&prod);
            }
        }
        out
    }

    /// Second derivative in phi: cos(k phi) -> -k^2 cos(k phi).
    fn second_phi(&self) -> Self {
        let h = self
            .h
            .iter()
            .enumerate()
            .map(|(k, c)| c.scale(-((k * k) as f64)))
            .collect();
        CosPoly { h }
    }

    fn diff_phi(&self) -> SinPoly {
        let h = self
            .h
            .iter()
            .enumerate()
            .map(|(k, c)| c.scale(-(k as f64)))
            .collect();
        SinPoly { h }
    }

    /// Coefficients of `r^j`, one entry per harmonic.
    fn order_slice(&self, j: usize) -> Vec<f64> {
        self.h.iter().map(|c| c.coeffs.get(j).copied().unwrap_or(0.0)).collect()
    }

    fn norm_inf(&self) -> f64 {
        self.h.iter().fold(0.0, |m, c| m.max(c.norm_inf()))
    }
}

impl SinPoly {
    fn mul_rs(&self, rs: &RadialSeries) -> Self {
        SinPoly { h: self.h.iter().map(|c| c.mul(rs)).collect() }
    }

    /// sin(a)sin(b) = (cos(a-b) - cos(a+b)) / 2.
    fn mul_to_cos(&self, other: &Self) -> CosPoly {
        let kmax = self.h.len() - 1;
        let mut out = CosPoly::zero(kmax, self.h[0].trunc());
        for (k, a) in self.h.iter().enumerate().skip(1) {
            if a.norm_inf() == 0.0 {
                continue;
            }
            for (l, b) in other.h.iter().enumerate().skip(1) {
                if b.norm_inf() == 0.0 {
                    continue;
                }
                let prod = a.mul(b).scale(0.5);
                let d = k.abs_diff(l);
                out.h[d] = out.h[d].add(&prod);
                if k + l <= kmax {
                    out.h[k + l] = out.h[k + l].sub(&prod);
                }
            }
        }
        out
    }
}

/// Odd Taylor sum `x - x^3/6 + x^5/120 - ...` up to the truncation order.
fn sin_of(x: &CosPoly, order: usize) -> CosPoly {
    let x2 = x.mul(x);
    let mut acc = x.clone();
    let mut power = x.clone();
    let mut factorial = 1.0;
    let mut sign = 1.0;
    let mut i = 1usize;
    while i + 2 <= order {
        power = power.mul(&x2);
        factorial *= ((i + 1) * (i + 2)) as f64;
        sign = -sign;
        acc = acc.add(&power.scale(sign / factorial));
        i += 2;
    }
    acc
}

/// Even Taylor sum `x^2/2 - x^4/24 + ...` of `1 - cos(x)`.
fn one_minus_cos_of(x: &CosPoly, order: usize) -> CosPoly {
    let x2 = x.mul(x);
    let mut acc = x2.scale(0.5);
    let mut power = x2.clone();
    let mut factorial = 2.0;
    let mut sign = 1.0;
    let mut i = 2usize;
    while i + 2 <= order {
        power = power.mul(&x2);
        factorial *= ((i + 1) * (i + 2)) as f64;
        sign = -sign;
        acc = acc.add(&power.scale(sign / factorial));
        i += 2;
    }
    acc
}

/// `y^2/2 + 1 - cos(x)` in the harmonic representation.
fn energy_of(x: &CosPoly, y: &SinPoly, order: usize) -> CosPoly {
    y.mul_to_cos(y).scale(0.5).add(&one_minus_cos_of(x, order))
}

/// Action-angle chart by Lindstedt-Poincare iteration: posit
/// `X = sum_j r^j X_j(phi)`, `w = sum_j w_j r^j`, and enforce
/// `w^2 d^2X/dphi^2 = -sin(X)` order by order. Periodicity fixes each `w_j`
/// (the resonant harmonic must cancel) and the normalization
/// `H(X, Y) = r^2/2` fixes the free cosine amplitude at each order.
pub fn make_pendulum_chart(order: usize) -> Result<PendulumChart> {
    if order < 4 || order % 2 != 0 {
        return Err(Error::Config {
            what: format!("chart order must be even and at least 4, got {order}"),
        });
    }
    let trunc = order;
    let kmax = order;
    let mut x = CosPoly::zero(kmax, trunc);
    x.h[1] = RadialSeries::monomial(1.0, 1, trunc);
    let mut w = RadialSeries::zero(trunc);
    w.coeffs[0] = 1.0;

    let mut half_r2 = CosPoly::zero(kmax, trunc);
    half_r2.h[0] = RadialSeries::monomial(0.5, 2, trunc);

    for j in (3..order).step_by(2) {
        // Residual of the angular equation with the order-j unknowns at zero.
        let w2 = w.mul(&w);
        let e = x.second_phi().mul_rs(&w2).add(&sin_of(&x, order));
        let ej = e.order_slice(j);

        // Resonant harmonic: X'' + X annihilates cos(phi), so the equation
        // at this order is solvable only if the new frequency coefficient
        // absorbs it.
        w.coeffs[j - 1] = ej[1] / 2.0;
        for (k, &c) in ej.iter().enumerate() {
            if k == 1 || c == 0.0 {
                continue;
            }
            x.h[k].coeffs[j] = -c / (1.0 - (k * k) as f64);
        }

        // The energy defect at the next order is constant in phi and shifts
        // one-to-one with the free cos(phi) amplitude.
        let y = x.diff_phi().mul_rs(&w);
        let defect = energy_of(&x, &y, order).add(&half_r2.scale(-1.0));
        let dj = defect.order_slice(j + 1);
        for (k, &c) in dj.iter().enumerate().skip(1) {
            if c.abs() > 1e-11 {
                return Err(Error::NoConvergence {
                    what: format!(
                        "energy defect at order {} has a harmonic-{k} component {c:e}",
                        j + 1
                    ),
                });
            }
        }
        x.h[1].coeffs[j] -= dj[0];
    }

    let y = x.diff_phi().mul_rs(&w);
    let angular = x.second_phi().mul_rs(&w.mul(&w)).add(&sin_of(&x, order));
    if angular.norm_inf() > 1e-11 {
        return Err(Error::NoConvergence {
            what: format!("angular equation residual {:e}", angular.norm_inf()),
        });
    }
    let defect = energy_of(&x, &y, order).add(&half_r2.scale(-1.0));
    if defect.norm_inf() > 1e-11 {
        return Err(Error::NoConvergence {
            what: format!("energy normalization residual {:e}", defect.norm_inf()),
        });
    }

    let mut x_ft = FtSeries::zero(trunc);
    for (k, c) in x.h.iter().enumerate() {
        if c.norm_inf() != 0.0 {
            x_ft.add_cos(k as i32, 0, c);
        }
    }
    let mut y_ft = FtSeries::zero(trunc);
    for (k, c) in y.h.iter().enumerate().skip(1) {
        if c.norm_inf() != 0.0 {
            y_ft.add_sin(k as i32, 0, c);
        }
    }
    Ok(PendulumChart { w, x: x_ft, y: y_ft, order })
}

// ---------------------------------------------------------------------------
// Pendulum with damped drives
// ---------------------------------------------------------------------------

/// Pendulum with three damped drives on the `t^(-k/q)` scale:
///
/// ```text
///   dx/dt = y,
///   dy/dt = -sin x + t^(-n/q) a(S) x^2 y + t^(-(n+d)/q) b(S) y
///                  + t^(-p/q) c(S) y / |(x, y)|,
/// ```
///
/// with `S(t) = sqrt(2) t + log t`, pulled back to amplitude/phase form
/// through the action-angle chart: each drive `G` contributes
/// `Y G / r` to the amplitude equation and `-w dX/dr G` to the phase
/// equation. The normalized drive divides by `|(X, Y)| / r`, a series with
/// unit constant term.
#[allow(clippy::too_many_arguments)]
pub fn make_ex2(
    n: u32,
    d: u32,
    p: u32,
    q: u32,
    alpha0: f64,
    alpha1: f64,
    beta0: f64,
    beta1: f64,
    gamma0: f64,
    gamma1: f64,
    order: usize,
) -> Result<SystemSpec> {
    if n + d >= p {
        return Err(Error::Config {
            what: format!("drive orders must satisfy n + d < p, got n = {n}, d = {d}, p = {p}"),
        });
    }
    if q == 0 {
        return Err(Error::Config { what: "q must be at least 1".into() });
    }
    let chart = make_pendulum_chart(order)?;
    let clip = tol::K1_CLIP;
    let thr = tol::ZERO_COEFF;
    let trunc = chart.x.trunc();
    let (x, y, w) = (&chart.x, &chart.y, &chart.w);

    let alpha = slow_coefficient(alpha0, alpha1, trunc);
    let beta = slow_coefficient(beta0, beta1, trunc);
    let gamma = slow_coefficient(gamma0, gamma1, trunc);

    // |(X, Y)|^-1 = r^-1 (1 + V)^-1/2 with V = (X^2 + Y^2)/r^2 - 1.
    let sq = x.mul(x, clip).add(&y.mul(y, clip));
    let v = sq.div_r(thr)?.div_r(thr)?.sub(&ft_constant(1.0, trunc));
    let mut inv_sqrt = ft_constant(1.0, trunc);
    let mut v_power = ft_constant(1.0, trunc);
    let mut binom = 1.0;
    for j in 1..=order / 2 {
        binom *= (-0.5 - (j as f64 - 1.0)) / j as f64;
        v_power = v_power.mul(&v, clip);
        inv_sqrt = inv_sqrt.add(&v_power.scale(binom));
    }

    let y2 = y.mul(y, clip);
    let minus_w_dx = x.diff(Var::R).mul_rs(w).scale(-1.0);

    // Cubic drive a(S) X^2 Y.
    let x2 = x.mul(x, clip);
    let f1 = x2.mul(&y2, clip).mul(&alpha, clip).div_r(thr)?;
    let g1 = minus_w_dx.mul(&x2.mul(y, clip), clip).mul(&alpha, clip);

    // Linear drive b(S) Y.
    let f2 = y2.mul(&beta, clip).div_r(thr)?;
    let g2 = minus_w_dx.mul(y, clip).mul(&beta, clip);

    // Normalized drive c(S) Y / |(X, Y)|.
    let f3 = y2.mul(&inv_sqrt, clip).mul(&gamma, clip).div_r(thr)?.div_r(thr)?;
    let g3 = minus_w_dx.mul(y, clip).mul(&inv_sqrt, clip).mul(&gamma, clip).div_r(thr)?;

    let mut f_terms = EpsExpansion::new(q);
    let mut g_terms = EpsExpansion::new(q);
    f_terms.insert(n as usize, f1);
    f_terms.insert((n + d) as usize, f2);
    f_terms.insert(p as usize, f3);
    g_terms.insert(n as usize, g1);
    g_terms.insert((n + d) as usize, g2);
    g_terms.insert(p as usize, g3);

    let mut s = vec![0.0; q as usize + 1];
    s[0] = SQRT_2;
    s[q as usize] = 1.0;
    Ok(SystemSpec {
        id: "ex2".into(),
        omega: chart.w.clone(),
        q,
        p,
        f_terms,
        g_terms,
        phase: PhaseLaw::new(s, q),
        r0: 1.0,
    })
}

/// Cartesian form of [`make_ex2`].
#[allow(clippy::too_many_arguments)]
pub fn ex2_field(
    n: u32,
    d: u32,
    p: u32,
    q: u32,
    alpha0: f64,
    alpha1: f64,
    beta0: f64,
    beta1: f64,
    gamma0: f64,
    gamma1: f64,
) -> CartesianField<impl Fn(f64, f64, f64) -> (f64, f64)> {
    let qf = q as f64;
    let (nf, df, pf) = (n as f64, d as f64, p as f64);
    CartesianField {
        id: "ex2".into(),
        f: move |t: f64, x: f64, y: f64| {
            let s = SQRT_2 * t + t.ln();
            let alpha = alpha0 + alpha1 * s.sin();
            let beta = beta0 + beta1 * s.sin();
            let gamma = gamma0 + gamma1 * s.sin();
            let dy = -x.sin()
                + t.powf(-nf / qf) * alpha * x * x * y
                + t.powf(-(nf + df) / qf) * beta * y
                + t.powf(-pf / qf) * gamma * y / x.hypot(y);
            (y, dy)
        },
    }
}
