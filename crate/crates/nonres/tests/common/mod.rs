//! Checks shared between the property and acceptance suites. Each function
//! panics with a description on failure.

#![allow(dead_code)]

use nonres::asymptotics::{residual, AsymptoticSolution};
use nonres::averaging::{
    compute_normal_form, solve_homological, transform_forward, transform_inverse, AveragedSystem,
};
use nonres::series::{ft_mul, EpsExpansion, FtSeries, RadialSeries, Var};
use nonres::systems::{make_ex1, make_ex2};
use nonres::tol;
use nonres::{PhaseLaw, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_radial(rng: &mut ChaCha8Rng, trunc: usize) -> RadialSeries {
    RadialSeries::from_coeffs((0..=trunc).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

pub fn random_fourier(rng: &mut ChaCha8Rng, trunc: usize) -> FtSeries {
    let mut f = FtSeries::zero(trunc);
    for _ in 0..6 {
        let k1 = rng.gen_range(-2..=2);
        let k2 = rng.gen_range(-2..=2);
        f.add_cos(k1, k2, &random_radial(rng, trunc));
        f.add_sin(k1, k2, &random_radial(rng, trunc));
    }
    f
}

fn assert_close(label: &str, diff: f64, tol: f64) {
    assert!(diff <= tol, "{label}: deviation {diff:.3e} exceeds {tol:.1e}");
}

/// Addition and truncated multiplication of the series types obey the ring
/// axioms coefficient-wise.
pub fn ring_axioms_hold(triples: usize, tol: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..triples {
        let (a, b, c) = (
            random_radial(&mut rng, 6),
            random_radial(&mut rng, 6),
            random_radial(&mut rng, 6),
        );
        assert_close("radial add comm", a.add(&b).sub(&b.add(&a)).norm_inf(), tol);
        assert_close(
            "radial add assoc",
            a.add(&b).add(&c).sub(&a.add(&b.add(&c))).norm_inf(),
            tol,
        );
        assert_close("radial mul comm", a.mul(&b).sub(&b.mul(&a)).norm_inf(), tol);
        assert_close(
            "radial mul assoc",
            a.mul(&b).mul(&c).sub(&a.mul(&b.mul(&c))).norm_inf(),
            tol,
        );
        assert_close(
            "radial distributivity",
            a.mul(&b.add(&c)).sub(&a.mul(&b).add(&a.mul(&c))).norm_inf(),
            tol,
        );

        let (a, b, c) = (
            random_fourier(&mut rng, 6),
            random_fourier(&mut rng, 6),
            random_fourier(&mut rng, 6),
        );
        let clip = tol::K1_CLIP;
        assert_close("fourier add comm", a.add(&b).sub(&b.add(&a)).norm_inf(), tol);
        assert_close(
            "fourier add assoc",
            a.add(&b).add(&c).sub(&a.add(&b.add(&c))).norm_inf(),
            tol,
        );
        assert_close("fourier mul comm", a.mul(&b, clip).sub(&b.mul(&a, clip)).norm_inf(), tol);
        assert_close(
            "fourier mul assoc",
            a.mul(&b, clip).mul(&c, clip).sub(&a.mul(&b.mul(&c, clip), clip)).norm_inf(),
            tol,
        );
        assert_close(
            "fourier distributivity",
            a.mul(&b.add(&c), clip).sub(&a.mul(&b, clip).add(&a.mul(&c, clip))).norm_inf(),
            tol,
        );
    }
}

/// Solving the homological equation and substituting back reproduces the
/// forcing for random zero-mean series.
pub fn homological_solutions_substitute_back(cases: usize, tol_residual: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let omega = RadialSeries::from_coeffs(vec![1.0, 0.0, 0.3, 0.0, 0.1, 0.0, 0.0]);
    let s0 = std::f64::consts::SQRT_2;
    for _ in 0..cases {
        let f = random_fourier(&mut rng, 6).zero_mean();
        let v = solve_homological(&f, &omega, s0, tol::ZERO_COEFF).expect("nonresonant solve");
        let applied = v.diff(Var::Phi).mul_rs(&omega).add(&v.diff(Var::S).scale(s0));
        assert_close("homological residual", applied.sub(&f).norm_inf(), tol_residual);
    }
}

/// Re-derive the order-2 and order-3 re-expansion terms from their closed
/// forms and compare with the recursion.
pub fn reexpansions_match_the_explicit_formulas(spec: &SystemSpec, n_order: usize, tol_diff: f64) {
    let avg = compute_normal_form(spec, n_order, tol::ZERO_COEFF).expect("normal form");
    let q = spec.q as f64;
    let trunc = avg
        .v
        .values()
        .map(|f| f.trunc())
        .min()
        .unwrap_or(spec.omega.trunc());
    let zero = FtSeries::zero(trunc);
    let vk = |k: i64| -> FtSeries {
        if k >= 1 {
            avg.v.get(&(k as usize)).cloned().unwrap_or_else(|| zero.clone())
        } else {
            zero.clone()
        }
    };
    let term = |e: &EpsExpansion, k: usize| e.get(k).cloned().unwrap_or_else(|| zero.clone());
    let transport = |i: usize, vj: &FtSeries| -> FtSeries {
        let mut out = ft_mul(&term(&spec.f_terms, i), &vj.diff(Var::R));
        out = out.add(
            &ft_mul(&term(&spec.g_terms, i), &vj.diff(Var::Phi))
                .div_r(tol::ZERO_COEFF)
                .expect("g terms vanish at the origin"),
        );
        let sigma = spec.phase.transport_weight(i);
        if sigma != 0.0 {
            out = out.add(&vj.diff(Var::S).scale(sigma));
        }
        out
    };

    let v1 = vk(1);
    let lam = |j: usize| avg.lambda.get(&j).cloned().unwrap_or_else(|| RadialSeries::zero(trunc));

    // R_2 = v1 L1' - (1 - 2/q) v_{2-q} - (f1 d_r + g1 d_phi / r + s1 d_S) v1.
    let mut r2 = v1.mul_rs(&lam(1).derivative());
    r2 = r2.add(&vk(2 - spec.q as i64).scale(-(1.0 - 2.0 / q)));
    r2 = r2.sub(&transport(1, &v1));
    let stored = avg.residual_terms.get(&2).cloned().unwrap_or_else(|| zero.clone());
    assert_close("order-2 re-expansion", r2.sub(&stored).norm_inf(), tol_diff);

    // R_3 = sum_{i+j=3} v_i L_j' + v1^2 L1'' / 2 - (1 - 3/q) v_{3-q}
    //       - sum_{i+j=3} (f_i d_r + g_i d_phi / r + s_i d_S) v_j.
    let v2 = vk(2);
    let mut r3 = v1.mul_rs(&lam(2).derivative()).add(&v2.mul_rs(&lam(1).derivative()));
    r3 = r3.add(&ft_mul(&v1, &v1).mul_rs(&lam(1).derivative().derivative().scale(0.5)));
    r3 = r3.add(&vk(3 - spec.q as i64).scale(-(1.0 - 3.0 / q)));
    r3 = r3.sub(&transport(1, &v2)).sub(&transport(2, &v1));
    let stored = avg.residual_terms.get(&3).cloned().unwrap_or_else(|| zero.clone());
    assert_close("order-3 re-expansion", r3.sub(&stored).norm_inf(), tol_diff);
}

/// Forward then inverse averaging transform returns the starting amplitude,
/// and the other way round.
pub fn transform_round_trips(avg: &AveragedSystem, cases: usize, tol_rt: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..cases {
        let r = rng.gen_range(0.01..0.8) * avg.r_star;
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let t = 10f64.powf(rng.gen_range(2.0..6.0));
        let rho = transform_forward(avg, r, phi, t);
        let back = transform_inverse(avg, rho, phi, t).expect("inverse converges");
        assert_close("round trip r -> rho -> r", (back - r).abs(), tol_rt);
        let fwd = transform_forward(avg, back, phi, t);
        assert_close("round trip rho -> r -> rho", (fwd - rho).abs(), tol_rt);
    }
}

/// Defect decay exponent of a truncated expansion improves with the
/// truncation order: never worse, strictly better somewhere. Lattice slots
/// can be empty (no change) and a series can terminate (defect collapses
/// to rounding), so a uniform per-step gain is not required.
pub fn defect_exponent_improves(
    label: &str,
    avg: &AveragedSystem,
    build: &dyn Fn(usize) -> AsymptoticSolution,
    orders: &[usize],
    min_gain: f64,
) {
    let mut slopes = Vec::new();
    let mut values = Vec::new();
    for &m in orders {
        let sol = build(m);
        // Log-log slope of |defect| over two decades.
        let (t_lo, t_hi) = (1e3_f64, 1e5_f64);
        let n = 12;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let t = t_lo * (t_hi / t_lo).powf(i as f64 / (n - 1) as f64);
            let d = residual(&sol, avg, t).abs().max(1e-300);
            let (x, y) = (t.ln(), d.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let nf = n as f64;
        slopes.push((nf * sxy - sx * sy) / (nf * sxx - sx * sx));
        values.push(residual(&sol, avg, 1e4).abs());
    }
    for w in slopes.windows(2) {
        assert!(w[1] < w[0] + 1e-6, "{label}: defect exponent got worse: {slopes:?}");
    }
    for w in values.windows(2) {
        assert!(w[1] <= w[0] * 1.01, "{label}: defect value got worse: {values:?}");
    }
    let strict = slopes.windows(2).any(|w| w[1] < w[0] - min_gain);
    assert!(strict, "{label}: no strict defect improvement: {slopes:?}");
}

/// The symbolic average of the order-p amplitude term at the origin matches
/// a trapezoid quadrature over the torus.
pub fn drive_mean_matches_quadrature(spec: &SystemSpec, tol_quad: f64) {
    let fp = spec.f_terms.get(spec.p as usize).expect("drive term present");
    let n = 256;
    let mut acc = 0.0;
    for i in 0..n {
        let phi = std::f64::consts::TAU * i as f64 / n as f64;
        for j in 0..n {
            let s = std::f64::consts::TAU * j as f64 / n as f64;
            acc += fp.eval(0.0, phi, s);
        }
    }
    let quadrature = acc / (n * n) as f64;
    let symbolic = spec.mu_p(tol::ZERO_COEFF).expect("mean defined");
    assert_close("drive mean vs quadrature", (quadrature - symbolic).abs(), tol_quad);
}

/// Damping and drive on the integer decay scale (q = 1) with a dominant
/// contraction; exercises the corrector drift terms of the recursion.
pub fn integer_scale_system() -> SystemSpec {
    let trunc = 6;
    let r = RadialSeries::monomial(1.0, 1, trunc);
    let half = RadialSeries::constant(0.5, trunc);
    let mut f1 = FtSeries::zero(trunc);
    f1.add_cos(0, 0, &r.scale(-1.5));
    f1.add_cos(1, -1, &r);
    let mut f2 = FtSeries::zero(trunc);
    f2.add_cos(0, 0, &half);
    f2.add_sin(0, 1, &half);
    let mut g1 = FtSeries::zero(trunc);
    g1.add_sin(1, -1, &r.scale(0.5));
    let mut f_terms = EpsExpansion::new(1);
    f_terms.insert(1, f1);
    f_terms.insert(2, f2);
    let mut g_terms = EpsExpansion::new(1);
    g_terms.insert(1, g1);
    SystemSpec {
        id: "integer-scale".into(),
        omega: RadialSeries::constant(1.0, trunc),
        q: 1,
        p: 2,
        f_terms,
        g_terms,
        phase: PhaseLaw::linear(3f64.sqrt(), 1),
        r0: 1.0,
    }
}

/// Leading average above the drift threshold (n > q): the amplitude holds
/// near a free anchor instead of decaying.
pub fn drift_system() -> SystemSpec {
    let trunc = 6;
    let r = RadialSeries::monomial(1.0, 1, trunc);
    let mut f1 = FtSeries::zero(trunc);
    f1.add_cos(1, -1, &r);
    let mut f2 = FtSeries::zero(trunc);
    f2.add_cos(0, 0, &RadialSeries::from_coeffs(vec![0.5, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0]));
    f2.add_sin(0, 1, &RadialSeries::constant(0.5, trunc));
    let mut g1 = FtSeries::zero(trunc);
    g1.add_sin(1, -1, &r.scale(0.5));
    let mut f_terms = EpsExpansion::new(1);
    f_terms.insert(1, f1);
    f_terms.insert(2, f2);
    let mut g_terms = EpsExpansion::new(1);
    g_terms.insert(1, g1);
    SystemSpec {
        id: "drift".into(),
        omega: RadialSeries::from_coeffs(vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
        q: 1,
        p: 2,
        f_terms,
        g_terms,
        phase: PhaseLaw::linear(3f64.sqrt(), 1),
        r0: 1.0,
    }
}

/// Balance regime (n = p = q = 2) with a nonzero next-order average, so the
/// equilibrium expansion carries corrections past the anchor.
pub fn q2_system() -> SystemSpec {
    let trunc = 6;
    let r = RadialSeries::monomial(1.0, 1, trunc);
    let mut f2 = FtSeries::zero(trunc);
    f2.add_cos(0, 0, &RadialSeries::from_coeffs(vec![0.5, -0.75, 0.0, 0.0, 0.0, 0.0, 0.0]));
    f2.add_sin(0, 1, &r.scale(0.3));
    let mut f3 = FtSeries::zero(trunc);
    f3.add_cos(0, 0, &RadialSeries::monomial(0.2, 2, trunc));
    f3.add_cos(1, -1, &r.scale(0.4));
    let mut g2 = FtSeries::zero(trunc);
    g2.add_sin(1, -1, &r.scale(0.25));
    let mut f_terms = EpsExpansion::new(2);
    f_terms.insert(2, f2);
    f_terms.insert(3, f3);
    let mut g_terms = EpsExpansion::new(2);
    g_terms.insert(2, g2);
    SystemSpec {
        id: "balance-corrected".into(),
        omega: RadialSeries::from_coeffs(vec![1.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0]),
        q: 2,
        p: 2,
        f_terms,
        g_terms,
        phase: PhaseLaw::linear(2f64.sqrt(), 2),
        r0: 1.0,
    }
}

pub fn ex1_default() -> SystemSpec {
    make_ex1(2, 3, 1.0, 1.0, -2.0, 1.0, 1.0, 1.0, 1.0)
}

pub fn ex1_balance() -> SystemSpec {
    make_ex1(2, 2, 1.0, 1.0, -1.5, 1.0, 1.0, 1.0, 1.0)
}

pub fn ex2_default() -> SystemSpec {
    make_ex2(1, 1, 3, 3, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 8).expect("chart builds")
}
