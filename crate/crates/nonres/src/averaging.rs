//! Near-identity averaging of the oscillatory amplitude equation.
//!
//! The change of variables `rho = r + sum_{k=1}^N t^(-k/q) v_k(r, phi, S)`
//! removes the oscillatory part of `dr/dt` order by order. Each order asks
//! for a corrector `v_k` solving the homological equation
//!
//! ```text
//!   (omega(r) d_phi + s_0 d_S) v_k = Lambda_k(r) - f_k + R_k,
//! ```
//!
//! where `R_k` collects Taylor re-expansion, drift, and transport
//! contributions of the lower-order correctors, and `Lambda_k` is the mean
//! that makes the right-hand side solvable. The averaged equation is then
//! `drho/dt ~ sum_k t^(-k/q) Lambda_k(rho)` up to a remainder of order
//! `t^(-(N+1)/q)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::series::{ft_mul, EpsExpansion, FtSeries, RadialSeries, Var};
use crate::sim::{fit_decay_exponent, Coordinates, ExponentFit, Trajectory};
use crate::system::{PhaseLaw, SystemSpec};
use crate::tol;

/// Result of the non-resonance scan.
#[derive(Debug, Clone)]
pub struct NonresonanceReport {
    /// Smallest `|k1 omega(0) + k2 s_0|` over the scanned modes.
    pub margin: f64,
    /// Mode attaining the margin.
    pub worst_mode: (i32, i32),
    /// Largest safe radius (after the safety factor) on which no scanned
    /// denominator vanishes.
    pub r_star: f64,
}

/// Scan denominators `k1 omega(r) + k2 s0` over `[0, r0]`.
///
/// Returns the margin at `r = 0`, the worst mode, and the first radius at
/// which any denominator crosses zero (None if none does).
fn denominator_scan(
    omega: &RadialSeries,
    s0: f64,
    modes: &[(i32, i32)],
    r0: f64,
) -> (f64, (i32, i32), Option<f64>) {
    let mut margin = f64::INFINITY;
    let mut worst = (0, 0);
    let mut first_crossing: Option<f64> = None;
    for &(k1, k2) in modes {
        if (k1, k2) == (0, 0) {
            continue;
        }
        let d0 = (k1 as f64 * omega.eval(0.0) + k2 as f64 * s0).abs();
        if d0 < margin {
            margin = d0;
            worst = (k1, k2);
        }
        if k1 == 0 {
            // Constant denominator; no radial crossing possible.
            continue;
        }
        let mut prev = k1 as f64 * omega.eval(0.0) + k2 as f64 * s0;
        for i in 1..=tol::SCAN_GRID {
            let r = r0 * i as f64 / tol::SCAN_GRID as f64;
            let d = k1 as f64 * omega.eval(r) + k2 as f64 * s0;
            if d == 0.0 || d.signum() != prev.signum() {
                let crossing = r0 * (i - 1) as f64 / tol::SCAN_GRID as f64;
                first_crossing = Some(match first_crossing {
                    Some(c) => c.min(crossing),
                    None => crossing,
                });
                break;
            }
            prev = d;
        }
    }
    if margin == f64::INFINITY {
        margin = 0.0;
    }
    (margin, worst, first_crossing)
}

/// Check the non-resonance condition `k1 omega(0) + k2 s_0 != 0` over the
/// band `|k1| <= k1_bound` combined with the slow-phase harmonics the
/// system can generate, and estimate the safe radius.
pub fn check_nonresonance(spec: &SystemSpec, k1_bound: i32) -> Result<NonresonanceReport> {
    let b2_input = spec
        .input_modes()
        .iter()
        .map(|&(_, k2)| k2.abs())
        .max()
        .unwrap_or(0);
    // Products of up to 2p-1 input factors bound the reachable S-harmonics.
    let b2 = b2_input * (2 * spec.p as i32 - 1).max(1);
    let mut modes = Vec::new();
    for k1 in -k1_bound..=k1_bound {
        for k2 in -b2..=b2 {
            if (k1, k2) != (0, 0) {
                modes.push((k1, k2));
            }
        }
    }
    let (margin, worst_mode, crossing) = denominator_scan(&spec.omega, spec.phase.s0(), &modes, spec.r0);
    if margin <= tol::ZERO_COEFF {
        return Err(Error::ResonanceDetected {
            k1: worst_mode.0,
            k2: worst_mode.1,
            denom: margin,
        });
    }
    let r_star = tol::RADIUS_SAFETY * crossing.unwrap_or(spec.r0);
    Ok(NonresonanceReport { margin, worst_mode, r_star })
}

/// Solve `(omega(r) d_phi + s0 d_S) v = F` for a mean-free `F`.
///
/// Mode by mode the solution is `v_{k1,k2} = F_{k1,k2} / (i (k1 omega + k2 s0))`;
/// the denominator must not vanish at `r = 0`.
pub fn solve_homological(
    forcing: &FtSeries,
    omega: &RadialSeries,
    s0: f64,
    zero_thr: f64,
) -> Result<FtSeries> {
    forcing.check_mean_free(zero_thr)?;
    let mut v = FtSeries::zero(forcing.trunc());
    for (&(k1, k2), c) in forcing.iter() {
        if (k1, k2) == (0, 0) {
            continue;
        }
        let mut denom = omega.scale(k1 as f64);
        denom.coeffs[0] += k2 as f64 * s0;
        if denom.coeffs[0].abs() <= zero_thr {
            return Err(Error::ResonanceDetected { k1, k2, denom: denom.coeffs[0] });
        }
        let inv = denom.reciprocal(zero_thr)?;
        // 1/(i d) = -i/d.
        let mode = c.scale_complex(0.0, -1.0).mul_rs(&inv);
        v.add_mode(k1, k2, &mode);
    }
    Ok(v.pruned())
}

/// Averaged normal form of a system: the coefficients `Lambda_k`, the
/// correctors `v_k`, and the domain data needed to evaluate them.
#[derive(Debug, Clone)]
pub struct AveragedSystem {
    pub id: String,
    pub n_order: usize,
    pub q: u32,
    pub p: u32,
    pub omega: RadialSeries,
    pub phase: PhaseLaw,
    /// Averaged coefficients `Lambda_k`, `k = 1..=N`.
    pub lambda: BTreeMap<usize, RadialSeries>,
    /// Correctors `v_k`, `k = 1..=N`.
    pub v: BTreeMap<usize, FtSeries>,
    /// Re-expansion terms `R_k` (kept for diagnostics and regression tests).
    pub residual_terms: BTreeMap<usize, FtSeries>,
    /// Mean-free right-hand sides of the homological equations.
    pub forcing: BTreeMap<usize, FtSeries>,
    /// Fourier modes appearing anywhere in the chain.
    pub mode_set: Vec<(i32, i32)>,
    /// Radius on which all denominators stay bounded away from zero.
    pub r_star: f64,
    /// Time from which the corrector sum is a small correction.
    pub t_star: f64,
    pub zero_thr: f64,
}

impl AveragedSystem {
    /// `sum_{k=1}^N t^(-k/q) Lambda_k(rho)`.
    pub fn lambda_eval(&self, rho: f64, t: f64) -> f64 {
        let u = t.powf(-1.0 / self.q as f64);
        let mut acc = 0.0;
        // Horner in u: after the k = 1 pass acc = sum_k Lambda_k(rho) u^k.
        for k in (1..=self.n_order).rev() {
            let l = self.lambda.get(&k).map(|s| s.eval(rho)).unwrap_or(0.0);
            acc = (acc + l) * u;
        }
        acc
    }

    /// Corrector sum `vtilde(r, phi, t) = sum_k t^(-k/q) v_k(r, phi, S(t))`.
    pub fn corrector_sum(&self, r: f64, phi: f64, t: f64) -> f64 {
        let s = self.phase.eval(t);
        let u = t.powf(-1.0 / self.q as f64);
        let mut acc = 0.0;
        for (&k, vk) in &self.v {
            acc += u.powi(k as i32) * vk.eval(r, phi, s);
        }
        acc
    }
}

/// Compute the averaged normal form to order `n_order`.
///
/// `n_order` must lie in `[p, 2p)`: below `2p` every division by `r` in the
/// chain is regular because at least one factor vanishes at the origin.
pub fn compute_normal_form(
    spec: &SystemSpec,
    n_order: usize,
    zero_thr: f64,
) -> Result<AveragedSystem> {
    spec.validate_structure(zero_thr)?;
    let p = spec.p as usize;
    if n_order < p || n_order >= 2 * p {
        return Err(Error::Config {
            what: format!("averaging order N = {n_order} must lie in [p, 2p) = [{p}, {})", 2 * p),
        });
    }
    let s0 = spec.phase.s0();
    let trunc = spec
        .f_terms
        .terms
        .values()
        .chain(spec.g_terms.terms.values())
        .map(|t| t.trunc())
        .min()
        .unwrap_or(spec.omega.trunc());

    let mut lambda: BTreeMap<usize, RadialSeries> = BTreeMap::new();
    let mut v: BTreeMap<usize, FtSeries> = BTreeMap::new();
    let mut residual_terms: BTreeMap<usize, FtSeries> = BTreeMap::new();
    let mut forcing: BTreeMap<usize, FtSeries> = BTreeMap::new();

    for k in 1..=n_order {
        let mut rk = FtSeries::zero(trunc);

        // Taylor re-expansion of Lambda_j(r + vtilde) about r: the power m
        // of the corrector sum pairs with the m-th radial derivative.
        if k >= 2 {
            let mut w = EpsExpansion::new(spec.q);
            for (&i, vi) in v.iter() {
                w.insert(i, vi.clone());
            }
            let mut w_pow = w.clone();
            for m in 1..k {
                if m >= 2 {
                    w_pow = w_pow.mul(&w, k - 1, tol::K1_CLIP);
                }
                let mut m_fact = 1.0;
                for i in 2..=m {
                    m_fact *= i as f64;
                }
                for j in 1..k {
                    let order = k - j;
                    if order < m {
                        continue;
                    }
                    let (Some(lam_j), Some(wm)) = (lambda.get(&j), w_pow.get(order)) else {
                        continue;
                    };
                    let mut deriv = lam_j.clone();
                    for _ in 0..m {
                        deriv = deriv.derivative();
                    }
                    if deriv.is_zero(0.0) {
                        continue;
                    }
                    rk = rk.add(&wm.mul_rs(&deriv.scale(1.0 / m_fact)));
                }
            }
        }

        // Drift of the explicit time factor: -(1 - k/q) v_{k-q}.
        let q = spec.q as usize;
        if k > q {
            if let Some(vkq) = v.get(&(k - q)) {
                let w = 1.0 - k as f64 / q as f64;
                rk = rk.add(&vkq.scale(-w));
            }
        } else if k == q {
            // Weight (1 - k/q) vanishes; nothing to add.
        }

        // Transport by the lower-order vector field:
        // (f_i d_r + r^-1 g_i d_phi + sigma_i d_S) v_j for i + j = k.
        for i in 1..k {
            let j = k - i;
            let Some(vj) = v.get(&j) else { continue };
            if let Some(fi) = spec.f_terms.get(i) {
                rk = rk.sub(&ft_mul(fi, &vj.diff(Var::R)));
            }
            if let Some(gi) = spec.g_terms.get(i) {
                let prod = ft_mul(gi, &vj.diff(Var::Phi));
                rk = rk.sub(&prod.div_r(zero_thr)?);
            }
            let sigma = spec.phase.transport_weight(i);
            if sigma != 0.0 {
                rk = rk.sub(&vj.diff(Var::S).scale(sigma));
            }
        }

        // G_k = f_k - R_k; its mean is Lambda_k, its oscillatory part feeds
        // the homological equation.
        let gk = match spec.f_terms.get(k) {
            Some(fk) => fk.sub(&rk),
            None => rk.scale(-1.0),
        };
        let lam_k = gk.average(zero_thr)?;
        let f_k = gk.zero_mean().scale(-1.0);
        let v_k = solve_homological(&f_k, &spec.omega, s0, zero_thr)?;

        lambda.insert(k, lam_k);
        forcing.insert(k, f_k);
        residual_terms.insert(k, rk);
        v.insert(k, v_k);
    }

    // Orders below p inherit the vanishing at r = 0 from the input terms.
    for k in 1..p.min(n_order + 1) {
        if let Some(l) = lambda.get(&k) {
            if l.coeffs[0].abs() > tol::NEAR_EQ_FACTOR * zero_thr {
                return Err(Error::AssumptionViolated {
                    what: format!(
                        "averaged coefficient of order {k} has constant term {:e} although \
                         every term below order p = {p} vanishes at r = 0",
                        l.coeffs[0]
                    ),
                });
            }
        }
    }

    let mut mode_keys = std::collections::BTreeSet::new();
    for key in spec.input_modes() {
        mode_keys.insert(key);
    }
    for ft in v.values().chain(forcing.values()) {
        for key in ft.mode_keys() {
            mode_keys.insert(key);
        }
    }
    let mode_set: Vec<(i32, i32)> = mode_keys.into_iter().collect();

    let (margin, worst, crossing) = denominator_scan(&spec.omega, s0, &mode_set, spec.r0);
    if !mode_set.is_empty() && margin <= zero_thr {
        return Err(Error::ResonanceDetected { k1: worst.0, k2: worst.1, denom: margin });
    }
    let r_star = tol::RADIUS_SAFETY * crossing.unwrap_or(spec.r0);

    let mut avg = AveragedSystem {
        id: spec.id.clone(),
        n_order,
        q: spec.q,
        p: spec.p,
        omega: spec.omega.clone(),
        phase: spec.phase.clone(),
        lambda,
        v,
        residual_terms,
        forcing,
        mode_set,
        r_star,
        t_star: 1.0,
        zero_thr,
    };
    avg.t_star = compute_t_star(&avg);
    Ok(avg)
}

/// Magnitude bound of a Fourier series on `[0, r_bound]`.
fn ft_magnitude_bound(ft: &FtSeries, r_bound: f64) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..=64 {
        let r = r_bound * i as f64 / 64.0;
        let mut acc = 0.0;
        for (&(k1, k2), c) in ft.iter() {
            let (re, im) = c.eval(r);
            let modulus = (re * re + im * im).sqrt();
            acc += if (k1, k2) == (0, 0) { modulus } else { 2.0 * modulus };
        }
        best = best.max(acc);
    }
    best
}

/// Smallest `t >= 1` at which the corrector sum is below a declared
/// fraction of the safe radius everywhere on the disc.
fn compute_t_star(avg: &AveragedSystem) -> f64 {
    let bounds: Vec<(usize, f64)> = avg
        .v
        .iter()
        .map(|(&k, vk)| (k, ft_magnitude_bound(vk, avg.r_star)))
        .collect();
    let target = tol::T_STAR_FRACTION * avg.r_star;
    let total = |t: f64| -> f64 {
        bounds
            .iter()
            .map(|&(k, b)| b * t.powf(-(k as f64) / avg.q as f64))
            .sum()
    };
    if total(1.0) <= target {
        return 1.0;
    }
    let mut hi = 1.0;
    while total(hi) > target {
        hi *= 2.0;
        if hi > 1e30 {
            return hi;
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Averaged amplitude `rho = r + sum_k t^(-k/q) v_k(r, phi, S(t))`.
pub fn transform_forward(avg: &AveragedSystem, r: f64, phi: f64, t: f64) -> f64 {
    r + avg.corrector_sum(r, phi, t)
}

/// Invert the averaging transform by fixed-point iteration.
pub fn transform_inverse(avg: &AveragedSystem, rho: f64, phi: f64, t: f64) -> Result<f64> {
    let mut r = rho;
    for _ in 0..50 {
        let next = rho - avg.corrector_sum(r, phi, t);
        if (next - r).abs() <= tol::INVERSE {
            return Ok(next);
        }
        r = next;
    }
    Err(Error::NoConvergence {
        what: format!("averaging transform inversion at t = {t}, rho = {rho}"),
    })
}

/// Residual of the averaged equation along a simulated trajectory.
///
/// At each sample the chain rule gives `d(rho)/dt` exactly (no finite
/// differences); the result fits `log |d(rho)/dt - Lambda_N(rho, t)|`
/// against `log t` over the window. The expected slope is at most
/// `-(N+1)/q` when the expansion is complete to order `N`.
pub fn residual_along_trajectory(
    spec: &SystemSpec,
    avg: &AveragedSystem,
    traj: &Trajectory,
    window: (f64, f64),
) -> Result<ExponentFit> {
    struct Derivs {
        k: usize,
        v: FtSeries,
        vr: FtSeries,
        vphi: FtSeries,
        vs: FtSeries,
    }
    let derivs: Vec<Derivs> = avg
        .v
        .iter()
        .map(|(&k, vk)| Derivs {
            k,
            v: vk.clone(),
            vr: vk.diff(Var::R),
            vphi: vk.diff(Var::Phi),
            vs: vk.diff(Var::S),
        })
        .collect();

    let qf = avg.q as f64;
    let mut times = Vec::new();
    let mut resids = Vec::new();
    for (i, &t) in traj.times.iter().enumerate() {
        let (r, phi) = match traj.coordinates {
            Coordinates::Polar => (traj.states[i][0], traj.states[i][1]),
            Coordinates::Cartesian => {
                let (x, y) = (traj.states[i][0], traj.states[i][1]);
                ((x * x + y * y).sqrt(), (-y).atan2(x))
            }
        };
        if r.abs() > avg.r_star || r.abs() < tol::R_MIN {
            continue;
        }
        let s = avg.phase.eval(t);
        let sdot = avg.phase.derivative(t);
        let f_val = spec.eval_f(r, phi, s, t);
        let g_val = spec.eval_g(r, phi, s, t);
        let rdot = f_val;
        let phidot = avg.omega.eval(r) + g_val / r;
        let u = t.powf(-1.0 / qf);

        let mut rho = r;
        let mut drho = rdot;
        for d in &derivs {
            let scale = u.powi(d.k as i32);
            rho += scale * d.v.eval(r, phi, s);
            drho += scale
                * (d.vr.eval(r, phi, s) * rdot
                    + d.vphi.eval(r, phi, s) * phidot
                    + d.vs.eval(r, phi, s) * sdot
                    - (d.k as f64 / qf) / t * d.v.eval(r, phi, s));
        }
        let lam = avg.lambda_eval(rho, t);
        times.push(t);
        resids.push((drho - lam).abs());
    }
    fit_decay_exponent(&times, &resids, window)
}

/// Norm of `(omega d_phi + s0 d_S) v_k - F_k`; diagnostic for tests.
pub fn homological_residual_norm(avg: &AveragedSystem, k: usize) -> f64 {
    let (Some(vk), Some(fk)) = (avg.v.get(&k), avg.forcing.get(&k)) else {
        return 0.0;
    };
    let applied = vk
        .diff(Var::Phi)
        .mul_rs(&avg.omega)
        .add(&vk.diff(Var::S).scale(avg.phase.s0()));
    applied.sub(fk).norm_inf()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol;

    fn rs(coeffs: &[f64]) -> RadialSeries {
        RadialSeries::from_coeffs(coeffs.to_vec())
    }

    /// Synthetic system with nontrivial low-order terms, used by the
    /// re-expansion regression tests.
    fn synthetic_spec(q: u32) -> SystemSpec {
        let t = 10;
        let r1 = RadialSeries::monomial(0.7, 1, t);
        let r1b = RadialSeries::monomial(-0.4, 1, t);
        let r2 = {
            let mut s = RadialSeries::zero(t);
            s.coeffs[0] = 0.35;
            s.coeffs[1] = -0.2;
            s.coeffs[2] = 0.15;
            s
        };

        let mut f1 = FtSeries::zero(t);
        f1.add_cos(1, 1, &r1);
        f1.add_sin(2, 0, &r1b);
        let mut g1 = FtSeries::zero(t);
        g1.add_sin(1, 0, &r1);
        g1.add_cos(1, -1, &r1b);
        let mut f2 = FtSeries::zero(t);
        f2.add_cos(0, 0, &RadialSeries::constant(-0.5, t));
        f2.add_cos(2, 1, &r2);
        let mut g2 = FtSeries::zero(t);
        g2.add_sin(2, -1, &r2);
        let mut f3 = FtSeries::zero(t);
        f3.add_cos(1, 0, &r2);

        let mut s = vec![0.0; q as usize + 1];
        s[0] = std::f64::consts::SQRT_2;
        s[1] = 0.4;
        if q >= 3 {
            s[2] = -0.3;
        }
        s[q as usize] = 0.7;

        let mut f_terms = EpsExpansion::new(q);
        f_terms.insert(1, f1);
        f_terms.insert(2, f2);
        f_terms.insert(3, f3);
        let mut g_terms = EpsExpansion::new(q);
        g_terms.insert(1, g1);
        g_terms.insert(2, g2);

        SystemSpec {
            id: format!("synthetic-q{q}"),
            omega: rs(&[1.0, 0.0, -0.125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            q,
            p: 2,
            f_terms,
            g_terms,
            phase: PhaseLaw::new(s, q),
            r0: 1.0,
        }
    }

    #[test]
    fn unperturbed_system_has_trivial_normal_form() {
        let spec = SystemSpec {
            id: "free".into(),
            omega: rs(&[1.0, 0.0, 0.5]),
            q: 2,
            p: 1,
            f_terms: EpsExpansion::new(2),
            g_terms: EpsExpansion::new(2),
            phase: PhaseLaw::linear(1.5, 2),
            r0: 1.0,
        };
        let avg = compute_normal_form(&spec, 1, tol::ZERO_COEFF).unwrap();
        assert!(avg.lambda[&1].norm_inf() == 0.0);
        assert!(avg.v[&1].is_empty());
        assert_eq!(avg.t_star, 1.0);
        let rho = transform_forward(&avg, 0.4, 1.0, 10.0);
        assert_eq!(rho, 0.4);
    }

    #[test]
    fn homological_solver_round_trip() {
        let omega = rs(&[1.0, 0.2, -0.1, 0.05]);
        let s0 = std::f64::consts::SQRT_2;
        let mut forcing = FtSeries::zero(3);
        forcing.add_cos(1, 0, &rs(&[0.3, 0.1, 0.0, -0.2]));
        forcing.add_sin(2, -1, &rs(&[0.0, 0.5, 0.25, 0.0]));
        forcing.add_cos(0, 2, &rs(&[0.1, 0.0, 0.4, 0.0]));
        let v = solve_homological(&forcing, &omega, s0, tol::ZERO_COEFF).unwrap();
        let applied = v.diff(Var::Phi).mul_rs(&omega).add(&v.diff(Var::S).scale(s0));
        assert!(applied.sub(&forcing).norm_inf() < 1e-12);
    }

    #[test]
    fn homological_solver_rejects_nonzero_mean() {
        let omega = rs(&[1.0]);
        let mut forcing = FtSeries::zero(0);
        forcing.add_cos(0, 0, &rs(&[0.5]));
        assert!(matches!(
            solve_homological(&forcing, &omega, 1.0, tol::ZERO_COEFF),
            Err(Error::NonzeroMean { .. })
        ));
    }

    #[test]
    fn homological_solver_detects_resonance() {
        let omega = rs(&[1.0]);
        let mut forcing = FtSeries::zero(0);
        forcing.add_cos(1, -1, &rs(&[0.5]));
        // s0 = omega(0) makes the (1,-1) denominator vanish.
        assert!(matches!(
            solve_homological(&forcing, &omega, 1.0, tol::ZERO_COEFF),
            Err(Error::ResonanceDetected { .. })
        ));
    }

    #[test]
    fn normal_form_solves_every_homological_equation() {
        for q in [2, 3] {
            let spec = synthetic_spec(q);
            let avg = compute_normal_form(&spec, 3, tol::ZERO_COEFF).unwrap();
            for k in 1..=3 {
                let res = homological_residual_norm(&avg, k);
                assert!(res < tol::RESIDUAL, "q = {q}, order {k}: residual {res}");
            }
        }
    }

    #[test]
    fn low_orders_vanish_at_origin() {
        for q in [2, 3] {
            let spec = synthetic_spec(q);
            let avg = compute_normal_form(&spec, 3, tol::ZERO_COEFF).unwrap();
            // p = 2: Lambda_1 must vanish at r = 0, Lambda_2(0) must equal
            // the mean of f_2 at r = 0.
            assert!(avg.lambda[&1].coeffs[0].abs() < tol::ZERO_COEFF);
            assert!((avg.lambda[&2].coeffs[0] - -0.5).abs() < 1e-12);
        }
    }

    /// Hand-coded second-order re-expansion term:
    /// `R_2 = v_1 Lambda_1' - (1 - 2/q) v_{2-q} - (f_1 d_r + r^-1 g_1 d_phi
    ///  + sigma_1 d_S) v_1` (the drift entry is absent for q > 1 since
    /// 2 - q < 1).
    fn r2_by_hand(spec: &SystemSpec, avg: &AveragedSystem) -> FtSeries {
        let v1 = &avg.v[&1];
        let lam1_prime = avg.lambda[&1].derivative();
        let mut out = v1.mul_rs(&lam1_prime);
        if let Some(f1) = spec.f_terms.get(1) {
            out = out.sub(&ft_mul(f1, &v1.diff(Var::R)));
        }
        if let Some(g1) = spec.g_terms.get(1) {
            out = out.sub(&ft_mul(g1, &v1.diff(Var::Phi)).div_r(tol::ZERO_COEFF).unwrap());
        }
        out.sub(&v1.diff(Var::S).scale(spec.phase.transport_weight(1)))
    }

    /// Hand-coded third-order re-expansion term:
    /// `R_3 = v_1 Lambda_2' + v_2 Lambda_1' + (v_1^2/2) Lambda_1''
    ///  - (1 - 3/q) v_{3-q} - sum_{i+j=3} (f_i d_r + r^-1 g_i d_phi
    ///  + sigma_i d_S) v_j`.
    fn r3_by_hand(spec: &SystemSpec, avg: &AveragedSystem) -> FtSeries {
        let v1 = &avg.v[&1];
        let v2 = &avg.v[&2];
        let mut out = v1.mul_rs(&avg.lambda[&2].derivative());
        out = out.add(&v2.mul_rs(&avg.lambda[&1].derivative()));
        let v1_sq = ft_mul(v1, v1);
        out = out.add(&v1_sq.mul_rs(&avg.lambda[&1].derivative().derivative().scale(0.5)));
        let q = spec.q as usize;
        if 3 > q {
            let w = 1.0 - 3.0 / q as f64;
            out = out.add(&avg.v[&(3 - q)].scale(-w));
        }
        for (i, j) in [(1usize, 2usize), (2, 1)] {
            let vj = &avg.v[&j];
            if let Some(fi) = spec.f_terms.get(i) {
                out = out.sub(&ft_mul(fi, &vj.diff(Var::R)));
            }
            if let Some(gi) = spec.g_terms.get(i) {
                out = out.sub(&ft_mul(gi, &vj.diff(Var::Phi)).div_r(tol::ZERO_COEFF).unwrap());
            }
            out = out.sub(&vj.diff(Var::S).scale(spec.phase.transport_weight(i)));
        }
        out
    }

    #[test]
    fn re_expansion_terms_match_hand_formulas() {
        for q in [2, 3] {
            let spec = synthetic_spec(q);
            let avg = compute_normal_form(&spec, 3, tol::ZERO_COEFF).unwrap();
            let r2 = r2_by_hand(&spec, &avg);
            let diff2 = avg.residual_terms[&2].sub(&r2).norm_inf();
            assert!(diff2 < 1e-10, "q = {q}: R_2 mismatch {diff2}");
            let r3 = r3_by_hand(&spec, &avg);
            let diff3 = avg.residual_terms[&3].sub(&r3).norm_inf();
            assert!(diff3 < 1e-10, "q = {q}: R_3 mismatch {diff3}");
        }
    }

    #[test]
    fn transform_round_trip() {
        let spec = synthetic_spec(2);
        let avg = compute_normal_form(&spec, 3, tol::ZERO_COEFF).unwrap();
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let r = rng.gen_range(0.05..0.5);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let t = rng.gen_range(5.0..1e4);
            let rho = transform_forward(&avg, r, phi, t);
            let back = transform_inverse(&avg, rho, phi, t).unwrap();
            assert!((back - r).abs() < 1e-10, "round trip error {}", (back - r).abs());
        }
    }

    #[test]
    fn nonresonance_scan_flags_vanishing_denominator() {
        let mut spec = synthetic_spec(2);
        // omega(0) = 1 and s0 = 1 collide on the (1,-1) mode.
        spec.phase = PhaseLaw::linear(1.0, 2);
        assert!(matches!(
            check_nonresonance(&spec, 4),
            Err(Error::ResonanceDetected { .. })
        ));
        let ok = synthetic_spec(2);
        let report = check_nonresonance(&ok, 8).unwrap();
        assert!(report.margin > 0.05);
        assert!(report.r_star > 0.0 && report.r_star <= ok.r0);
    }

    #[test]
    fn t_star_shrinks_corrector_sum() {
        let spec = synthetic_spec(2);
        let avg = compute_normal_form(&spec, 3, tol::ZERO_COEFF).unwrap();
        let t = avg.t_star;
        // At t_star the bound is met by construction; spot-check the value.
        let mut worst = 0.0_f64;
        for i in 0..40 {
            let r = avg.r_star * i as f64 / 39.0;
            for j in 0..16 {
                let phi = std::f64::consts::TAU * j as f64 / 16.0;
                worst = worst.max(avg.corrector_sum(r, phi, t).abs());
            }
        }
        assert!(worst <= tol::T_STAR_FRACTION * avg.r_star * 1.05);
    }

    #[test]
    fn normal_form_rejects_out_of_range_order() {
        let spec = synthetic_spec(2);
        assert!(matches!(
            compute_normal_form(&spec, 4, tol::ZERO_COEFF),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            compute_normal_form(&spec, 1, tol::ZERO_COEFF),
            Err(Error::Config { .. })
        ));
    }
}
