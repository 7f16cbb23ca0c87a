//! Region classification and stability verdicts for an averaged system.
//!
//! The leading averaged order `n` (smallest `k` with a nonvanishing
//! `Lambda_k`) together with `(p, q)` fixes one of three regions:
//!
//! - `Q1` (`n < p`, `n <= q`): the decaying-amplitude region, split further
//!   into a linear branch (`Lambda_n` has a simple zero at the origin) and a
//!   strongly nonlinear branch (`Lambda_n` vanishes to order `m >= 2`);
//! - `Q2` (`n = p`, `n <= q`): amplitudes are attracted to or repelled from
//!   roots of `Lambda_p`, or escape when no root exists;
//! - `Q3` (`n <= p`, `n > q`): slow drift around an anchor amplitude.
//!
//! Every verdict reports the sign condition it rests on; near-equalities
//! produce a `Degenerate` verdict and no claim.

use crate::averaging::AveragedSystem;
use crate::error::{Error, Result};
use crate::series::RadialSeries;
use crate::tol;

/// Region of the `(n, p, q)` partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Q1,
    Q2,
    Q3,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Q1 => "Q1",
            Region::Q2 => "Q2",
            Region::Q3 => "Q3",
        }
    }
}

/// Stability class attached to a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    ExponentiallyStable,
    PolynomiallyStable,
    NeutrallyStable,
    Unstable,
    Escape,
    /// A hypothesis holds only up to threshold; no claim is made.
    Degenerate,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::ExponentiallyStable => "exponentially stable",
            Stability::PolynomiallyStable => "polynomially stable",
            Stability::NeutrallyStable => "neutrally stable",
            Stability::Unstable => "unstable",
            Stability::Escape => "escape",
            Stability::Degenerate => "degenerate",
        }
    }
}

/// One emitted claim with the quantity backing it.
#[derive(Debug, Clone)]
pub struct Verdict {
    /// Behavior-keyed tag, e.g. `q1_linear_stable`.
    pub theorem_tag: String,
    pub stability: Stability,
    /// Decay exponent of the amplitude (or of the deviation weight for
    /// equilibrium attraction), when the claim carries one.
    pub predicted_decay_exponent: Option<f64>,
    pub note: Option<String>,
}

/// Root of the rescaled balance polynomial.
#[derive(Debug, Clone, Copy)]
pub struct PolyRoot {
    pub z: f64,
    pub p_prime: f64,
}

/// Quantities of the strongly nonlinear branch of `Q1`.
#[derive(Debug, Clone)]
pub struct NonlinearReport {
    /// Vanishing order of `Lambda_n` at the origin.
    pub m: usize,
    /// Offset of the first order with a simple linear part.
    pub d: usize,
    pub lambda_nm: f64,
    pub lambda_nd: f64,
    pub m_star: f64,
    pub theta_m: f64,
    /// Balance polynomial in the rescaled amplitude `z`.
    pub poly: RadialSeries,
    pub roots: Vec<PolyRoot>,
}

/// Root of `Lambda_p` (for `Q2`) or drift anchor (for `Q3`).
#[derive(Debug, Clone, Copy)]
pub struct Equilibrium {
    pub rho0: f64,
    pub lambda_prime: f64,
}

/// Full classification of an averaged system.
#[derive(Debug, Clone)]
pub struct RegimeReport {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub region: Region,
    /// Linear coefficient of `Lambda_n`, present on the `Q1` linear branch.
    pub lambda_n: Option<f64>,
    /// Value of `Lambda_p` at the origin.
    pub mu_p: f64,
    /// `(p - n) / q`, present iff the region is `Q1`.
    pub nu0: Option<f64>,
    pub nonlinear: Option<NonlinearReport>,
    pub equilibria: Vec<Equilibrium>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
    /// Threshold under which a coefficient counts as zero.
    pub zero_threshold: f64,
}

/// Smallest order whose averaged coefficient is nonvanishing.
pub fn find_leading_index(avg: &AveragedSystem) -> Result<usize> {
    for k in 1..=avg.n_order {
        if let Some(lam) = avg.lambda.get(&k) {
            if !lam.is_zero(avg.zero_thr) {
                return Ok(k);
            }
        }
    }
    Err(Error::AssumptionViolated {
        what: format!("all averaged coefficients vanish up to order {}", avg.n_order),
    })
}

/// Total region assignment for `1 <= n <= p`.
pub fn classify(n: usize, p: usize, q: usize) -> Region {
    assert!(1 <= n && n <= p, "need 1 <= n <= p, got n = {n}, p = {p}");
    if n > q {
        Region::Q3
    } else if n < p {
        Region::Q1
    } else {
        Region::Q2
    }
}

/// Output of the `Q1` linear branch.
#[derive(Debug, Clone)]
pub struct Q1Linear {
    pub lambda_n: f64,
    pub nu0: f64,
    /// `lambda_n`, plus `nu0` when `n = q`; its sign decides stability.
    pub criterion: f64,
    pub verdicts: Vec<Verdict>,
}

/// Analyze the `Q1` linear branch: `Lambda_n = lambda_n rho + O(rho^2)`.
///
/// An `AssumptionViolated` error means the linear coefficient is absent and
/// the caller should try [`analyze_q1_nonlinear`].
pub fn analyze_q1_linear(avg: &AveragedSystem, n: usize) -> Result<Q1Linear> {
    let p = avg.p as usize;
    let q = avg.q as usize;
    let lam = avg
        .lambda
        .get(&n)
        .ok_or_else(|| Error::AssumptionViolated { what: format!("order {n} average missing") })?;
    if lam.coeffs[0].abs() > tol::NEAR_EQ_FACTOR * avg.zero_thr {
        return Err(Error::AssumptionViolated {
            what: format!("order {n} average does not vanish at the origin"),
        });
    }
    let lambda_n = lam.coeffs.get(1).copied().unwrap_or(0.0);
    if lambda_n.abs() <= avg.zero_thr {
        return Err(Error::AssumptionViolated {
            what: format!("order {n} average has no linear part at the origin"),
        });
    }
    let nu0 = (p - n) as f64 / q as f64;
    let criterion = lambda_n + if n == q { nu0 } else { 0.0 };
    let mut verdicts = Vec::new();
    if criterion.abs() < tol::NEAR_EQ_FACTOR * avg.zero_thr {
        verdicts.push(Verdict {
            theorem_tag: "q1_linear_degenerate".into(),
            stability: Stability::Degenerate,
            predicted_decay_exponent: None,
            note: Some("stability criterion vanishes to threshold; no claim".into()),
        });
    } else if criterion < 0.0 {
        verdicts.push(Verdict {
            theorem_tag: "q1_linear_stable".into(),
            stability: Stability::PolynomiallyStable,
            predicted_decay_exponent: Some(nu0),
            note: Some(format!("criterion {criterion:.6} < 0")),
        });
    } else {
        verdicts.push(Verdict {
            theorem_tag: "q1_linear_unstable".into(),
            stability: Stability::Unstable,
            predicted_decay_exponent: None,
            note: Some(format!("criterion {criterion:.6} > 0")),
        });
    }
    // A negative linear coefficient at n = q keeps small amplitudes small
    // even when the decaying branch itself is repelling.
    if n == q && lambda_n < -tol::NEAR_EQ_FACTOR * avg.zero_thr {
        verdicts.push(Verdict {
            theorem_tag: "q1_bounded_near_zero".into(),
            stability: Stability::NeutrallyStable,
            predicted_decay_exponent: None,
            note: Some("amplitudes starting near zero stay near zero".into()),
        });
    }
    Ok(Q1Linear { lambda_n, nu0, criterion, verdicts })
}

/// Analyze the strongly nonlinear branch of `Q1`.
///
/// Requires `Lambda_n` to vanish to some order `m >= 2` at the origin and a
/// later order `n + d` (with `n + d < p` and `n + d <= q`) carrying a simple
/// linear part; intermediate orders must vanish at least to order `m`.
pub fn analyze_q1_nonlinear(
    avg: &AveragedSystem,
    n: usize,
) -> Result<(NonlinearReport, Vec<Verdict>)> {
    let p = avg.p as usize;
    let q = avg.q as usize;
    let thr = avg.zero_thr;
    let lam_n = avg
        .lambda
        .get(&n)
        .ok_or_else(|| Error::AssumptionViolated { what: format!("order {n} average missing") })?;
    let (m, lambda_nm) = lam_n.leading_power(thr).ok_or_else(|| Error::AssumptionViolated {
        what: format!("order {n} average vanishes identically"),
    })?;
    if m < 2 {
        return Err(Error::AssumptionViolated {
            what: format!("order {n} average vanishes only to order {m}; not strongly nonlinear"),
        });
    }

    // d = smallest offset whose order has a simple linear part.
    let d_max = (p - 1).min(q).min(avg.n_order).saturating_sub(n);
    let mut found = None;
    for d in 1..=d_max {
        let lam = match avg.lambda.get(&(n + d)) {
            Some(l) => l,
            None => continue,
        };
        let linear = lam.coeffs.get(1).copied().unwrap_or(0.0);
        if linear.abs() > thr {
            found = Some((d, linear));
            break;
        }
        // Not the linear order: it must still vanish to order m.
        if let Some((lp, _)) = lam.leading_power(thr) {
            if lp < m {
                return Err(Error::AssumptionViolated {
                    what: format!(
                        "order {} average vanishes only to order {lp} < {m}",
                        n + d
                    ),
                });
            }
        }
    }
    let (d, lambda_nd) = found.ok_or_else(|| Error::AssumptionViolated {
        what: format!("no order in {}..={} has a simple linear part", n + 1, n + d_max.max(1)),
    })?;

    let mu_p = avg.lambda.get(&p).map(|l| l.coeffs[0]).unwrap_or(0.0);
    let m_star = (p - n) as f64 / (p - n - d) as f64;
    // Exact integer comparison m <=> m_star, i.e. m (p - n - d) <=> p - n.
    let lhs = m * (p - n - d);
    let rhs = p - n;
    let theta_m = if lhs <= rhs {
        (p - n) as f64 / (q * m) as f64
    } else {
        d as f64 / (q * (m - 1)) as f64
    };

    // Balance polynomial: the terms that share the leading graded order.
    let mut coeffs = vec![0.0; m + 1];
    coeffs[m] = lambda_nm;
    if lhs <= rhs {
        coeffs[0] = mu_p;
    }
    if lhs >= rhs {
        coeffs[1] = lambda_nd;
    }
    let poly = RadialSeries::from_coeffs(coeffs);

    let scale = poly.norm_inf().max(1.0);
    let bound = 1.0 + poly.coeffs[..m].iter().fold(0.0_f64, |a, c| a.max(c.abs())) / lambda_nm.abs();
    let mut zs = scan_roots(&poly, -bound, bound, tol::SCAN_GRID);
    // z = 0 solves the branches without constant term but describes the
    // trivial rest state, not a decaying amplitude.
    zs.retain(|z| z.abs() > 1e-9);

    let dpoly = poly.derivative();
    let mut roots = Vec::new();
    let mut verdicts = Vec::new();
    for z in zs {
        let p_prime = dpoly.eval(z);
        roots.push(PolyRoot { z, p_prime });
        if p_prime.abs() <= tol::NEAR_EQ_FACTOR * thr * scale {
            verdicts.push(Verdict {
                theorem_tag: "q1_nonlinear_degenerate".into(),
                stability: Stability::Degenerate,
                predicted_decay_exponent: None,
                note: Some(format!(
                    "possibly degenerate balance root {z:.9}: slope vanishes to threshold"
                )),
            });
        } else if p_prime < 0.0 {
            verdicts.push(Verdict {
                theorem_tag: "q1_nonlinear_stable".into(),
                stability: Stability::PolynomiallyStable,
                predicted_decay_exponent: Some(theta_m),
                note: Some(format!("anchored at rescaled amplitude {z:.9}")),
            });
        }
        // Positive slope: the hypotheses make no claim for this root.
    }
    for z in near_root_minima(&poly, -bound, bound, tol::SCAN_GRID, &roots_positions(&roots)) {
        verdicts.push(Verdict {
            theorem_tag: "q1_nonlinear_degenerate".into(),
            stability: Stability::Degenerate,
            predicted_decay_exponent: None,
            note: Some(format!("possible degenerate balance root near {z:.6}")),
        });
    }

    Ok((NonlinearReport { m, d, lambda_nm, lambda_nd, m_star, theta_m, poly, roots }, verdicts))
}

/// Output of the `Q2` analysis.
#[derive(Debug, Clone)]
pub struct Q2Analysis {
    pub equilibria: Vec<Equilibrium>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

/// Analyze `Q2`: roots of `Lambda_p` inside the validity radius.
pub fn analyze_q2(avg: &AveragedSystem) -> Q2Analysis {
    let p = avg.p as usize;
    let lam = match avg.lambda.get(&p) {
        Some(l) => l.clone(),
        None => RadialSeries::zero(0),
    };
    let roots = scan_roots(&lam, -avg.r_star, avg.r_star, tol::SCAN_GRID);
    let dlam = lam.derivative();
    let scale = lam.norm_inf().max(1.0);

    let mut equilibria = Vec::new();
    let mut verdicts = Vec::new();
    let mut notes = Vec::new();
    for &rho0 in &roots {
        let lambda_prime = dlam.eval(rho0);
        equilibria.push(Equilibrium { rho0, lambda_prime });
        if lambda_prime.abs() <= tol::NEAR_EQ_FACTOR * avg.zero_thr * scale {
            verdicts.push(Verdict {
                theorem_tag: "q2_degenerate".into(),
                stability: Stability::Degenerate,
                predicted_decay_exponent: None,
                note: Some(format!(
                    "possibly degenerate equilibrium {rho0:.9}: slope vanishes to threshold"
                )),
            });
        } else if lambda_prime < 0.0 {
            verdicts.push(Verdict {
                theorem_tag: "q2_stable".into(),
                stability: Stability::PolynomiallyStable,
                predicted_decay_exponent: Some(lambda_prime.abs()),
                note: Some(format!(
                    "amplitudes near {rho0:.9} are attracted; any deviation weight below \
                     the reported exponent is admissible"
                )),
            });
        } else {
            verdicts.push(Verdict {
                theorem_tag: "q2_unstable".into(),
                stability: Stability::Unstable,
                predicted_decay_exponent: None,
                note: Some(format!("amplitudes near {rho0:.9} are repelled")),
            });
        }
    }

    let degenerate = near_root_minima(&lam, -avg.r_star, avg.r_star, tol::SCAN_GRID, &roots);
    for x in &degenerate {
        verdicts.push(Verdict {
            theorem_tag: "q2_degenerate".into(),
            stability: Stability::Degenerate,
            predicted_decay_exponent: None,
            note: Some(format!("possible degenerate root near {x:.6}")),
        });
    }

    if roots.is_empty() && degenerate.is_empty() {
        verdicts.push(Verdict {
            theorem_tag: "q2_escape".into(),
            stability: Stability::Escape,
            predicted_decay_exponent: None,
            note: Some("leading average has no root; amplitudes leave the neighbourhood".into()),
        });
        notes.push(format!(
            "no equilibrium of the order-{p} average inside radius {:.3}",
            avg.r_star
        ));
    }

    Q2Analysis { equilibria, verdicts, notes }
}

/// Analyze `Q3` at a drift anchor `rho0`.
pub fn analyze_q3(
    avg: &AveragedSystem,
    n: usize,
    rho0: f64,
) -> Result<(Equilibrium, Option<Verdict>)> {
    if rho0.abs() >= avg.r_star {
        return Err(Error::OutOfDomain { r: rho0, r_star: avg.r_star });
    }
    let lam = avg
        .lambda
        .get(&n)
        .ok_or_else(|| Error::AssumptionViolated { what: format!("order {n} average missing") })?;
    let scale = lam.norm_inf().max(1.0);
    let value = lam.eval(rho0);
    if value.abs() <= tol::NEAR_EQ_FACTOR * avg.zero_thr * scale {
        return Err(Error::AssumptionViolated {
            what: format!("order {n} average vanishes at the anchor {rho0:.9}"),
        });
    }
    let lambda_prime = lam.derivative().eval(rho0);
    if lambda_prime.abs() <= tol::NEAR_EQ_FACTOR * avg.zero_thr * scale {
        return Err(Error::AssumptionViolated {
            what: format!("order {n} average has vanishing slope at the anchor {rho0:.9}"),
        });
    }
    let verdict = if lambda_prime < 0.0 {
        Some(Verdict {
            theorem_tag: "q3_neutral".into(),
            stability: Stability::NeutrallyStable,
            predicted_decay_exponent: None,
            note: Some(format!("slow drift anchored at amplitude {rho0:.9}")),
        })
    } else {
        None
    };
    Ok((Equilibrium { rho0, lambda_prime }, verdict))
}

/// Run the full classification.
///
/// `q3_anchor` supplies the drift anchor used in region `Q3` (typically the
/// initial amplitude); without one the `Q3` report carries no verdict.
pub fn classify_regimes(avg: &AveragedSystem, q3_anchor: Option<f64>) -> Result<RegimeReport> {
    let p = avg.p as usize;
    let q = avg.q as usize;
    let n = find_leading_index(avg)?;
    let region = classify(n, p, q);
    let mu_p = avg.lambda.get(&p).map(|l| l.coeffs[0]).unwrap_or(0.0);

    let mut report = RegimeReport {
        n,
        p,
        q,
        region,
        lambda_n: None,
        mu_p,
        nu0: None,
        nonlinear: None,
        equilibria: Vec::new(),
        verdicts: Vec::new(),
        notes: Vec::new(),
        zero_threshold: avg.zero_thr,
    };

    match region {
        Region::Q1 => {
            report.nu0 = Some((p - n) as f64 / q as f64);
            match analyze_q1_linear(avg, n) {
                Ok(linear) => {
                    report.lambda_n = Some(linear.lambda_n);
                    report.verdicts = linear.verdicts;
                }
                Err(Error::AssumptionViolated { .. }) => {
                    let (nonlinear, verdicts) = analyze_q1_nonlinear(avg, n)?;
                    report.notes.push(
                        "nonlinear branch requires the linear order n+d to sit strictly \
                         inside the decaying region; the boundary reading n+d = p is not used"
                            .into(),
                    );
                    report.nonlinear = Some(nonlinear);
                    report.verdicts = verdicts;
                }
                Err(e) => return Err(e),
            }
        }
        Region::Q2 => {
            let q2 = analyze_q2(avg);
            report.equilibria = q2.equilibria;
            report.verdicts = q2.verdicts;
            report.notes.extend(q2.notes);
        }
        Region::Q3 => match q3_anchor {
            Some(rho0) => {
                let (eq, verdict) = analyze_q3(avg, n, rho0)?;
                report.equilibria.push(eq);
                report.verdicts.extend(verdict);
            }
            None => {
                report.notes.push("no drift anchor supplied; no Q3 verdict".into());
            }
        },
    }
    Ok(report)
}

fn roots_positions(roots: &[PolyRoot]) -> Vec<f64> {
    roots.iter().map(|r| r.z).collect()
}

/// Sign-change scan plus bisection. Roots are refined to `tol::ROOT`
/// relative accuracy, independent of the scan granularity.
pub fn scan_roots(f: &RadialSeries, lo: f64, hi: f64, intervals: usize) -> Vec<f64> {
    let n = intervals.max(2);
    let h = (hi - lo) / n as f64;
    let values: Vec<f64> = (0..=n).map(|i| f.eval(lo + i as f64 * h)).collect();
    let mut roots = Vec::new();
    for i in 0..=n {
        let x = lo + i as f64 * h;
        if values[i] == 0.0 {
            roots.push(x);
        } else if i < n && values[i + 1] != 0.0 && values[i].signum() != values[i + 1].signum() {
            roots.push(bisect(f, x, x + h, values[i]));
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + b.abs()));
    roots
}

fn bisect(f: &RadialSeries, mut a: f64, mut b: f64, fa_in: f64) -> f64 {
    let mut fa = fa_in;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= tol::ROOT * mid.abs().max(1.0) {
            return mid;
        }
        let fm = f.eval(mid);
        if fm == 0.0 {
            return mid;
        }
        if fa.signum() == fm.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Local minima of `|f|` that dip to (near) zero without a sign change:
/// candidates for double roots. Positions within two grid cells of a found
/// root are skipped.
fn near_root_minima(
    f: &RadialSeries,
    lo: f64,
    hi: f64,
    intervals: usize,
    roots: &[f64],
) -> Vec<f64> {
    let n = intervals.max(2);
    let h = (hi - lo) / n as f64;
    let values: Vec<f64> = (0..=n).map(|i| f.eval(lo + i as f64 * h).abs()).collect();
    let scale = f.norm_inf().max(1.0);
    let mut out = Vec::new();
    for i in 1..n {
        if values[i] < values[i - 1] && values[i] < values[i + 1] {
            let x = lo + i as f64 * h;
            if roots.iter().any(|r| (r - x).abs() < 2.0 * h) {
                continue;
            }
            let xm = refine_abs_min(f, x - h, x + h);
            if f.eval(xm).abs() < 1e-9 * scale {
                out.push(xm);
            }
        }
    }
    out
}

fn refine_abs_min(f: &RadialSeries, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo < 1e-12 * hi.abs().max(1.0) {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f.eval(m1).abs() < f.eval(m2).abs() {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}
