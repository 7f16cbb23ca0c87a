//! Sweep the linear damping coefficient across the stability threshold and
//! check each side against simulation.
//!
//! Below the threshold the ensemble tracks the predicted decay profile in
//! the weighted norm; above it the weighted deviation grows past any fixed
//! bound. With weak negative damping the amplitude still cannot leave a
//! neighbourhood of zero even though the weighted deviation escapes.
//!
//! ```text
//! cargo run --example stability_threshold
//! ```

use nonres::asymptotics::build_rho1;
use nonres::averaging::{compute_normal_form, transform_inverse};
use nonres::regime::classify_regimes;
use nonres::sim::{ensemble_offsets, escape_probe, stability_probe, IntegratorConfig};
use nonres::systems::make_ex1;
use nonres::tol;

fn main() -> nonres::error::Result<()> {
    let icfg = IntegratorConfig::default();
    let (delta0, eps) = (0.02, 0.1);
    let (t0, t1) = (1e2, 1e6);

    println!("ex1 damping sweep, drive mean fixed at gamma0 = 1, threshold at beta0 = -1:");
    println!();
    for beta0 in [-2.0, -1.5, -0.5, 0.5] {
        let spec = make_ex1(2, 3, 1.0, 1.0, beta0, 1.0, 1.0, 1.0, 1.0);
        let avg = compute_normal_form(&spec, 5, tol::ZERO_COEFF)?;
        let report = classify_regimes(&avg, None)?;
        let verdict = &report.verdicts[0].theorem_tag;

        let sol = build_rho1(&avg, report.n, 6)?;
        let nu = report.nu0.unwrap_or(0.0);
        let reference = |t: f64| sol.eval(t);
        // Offsets placed in the averaged amplitude: the weighted deviation
        // starts at exactly delta0 u for every member.
        let ens: Vec<(f64, f64)> = ensemble_offsets(4, 7)
            .iter()
            .map(|&(u, phi)| {
                let rho = sol.eval(t0) + delta0 * u * t0.powf(-nu);
                transform_inverse(&avg, rho, phi, t0).map(|r| (r, phi))
            })
            .collect::<nonres::error::Result<_>>()?;

        if verdict == "q1_linear_stable" {
            let rep = stability_probe(&spec, &reference, None, &ens, nu, t0, t1, &icfg)?;
            println!(
                "  beta0 = {beta0:+.2}: {verdict}, sup t^{{{nu:.1}}}|r - rho| = {:.4} {} {eps}",
                rep.sup_weighted,
                if rep.sup_weighted < eps { "<" } else { ">=" }
            );
        } else {
            let rep = escape_probe(&spec, &reference, nu, eps, &ens, t0, 1e7, &icfg)?;
            let last = rep
                .members
                .iter()
                .filter_map(|m| m.crossing)
                .fold(0.0_f64, f64::max);
            println!(
                "  beta0 = {beta0:+.2}: {verdict}, weighted deviation crossed {eps} ({}/{} members, last at t = {last:.0})",
                rep.members.iter().filter(|m| m.crossing.is_some()).count(),
                rep.members.len()
            );
            // Weak negative damping: unstable in the weighted norm, yet the
            // plain amplitude stays small.
            if beta0 < 0.0 {
                let zero = |_: f64| 0.0;
                let near: Vec<(f64, f64)> =
                    ensemble_offsets(4, 7).iter().map(|&(u, phi)| (delta0 * u.abs(), phi)).collect();
                let rep = stability_probe(&spec, &zero, None, &near, 0.0, t0, 1e5, &icfg)?;
                println!("              ...but sup |r| = {:.4} stays below 0.2", rep.sup_amplitude);
            }
        }
    }

    println!();
    println!("the decay profile anchors at -gamma0/(beta0 + 1), which diverges");
    println!("at the threshold:");
    for beta0 in [-2.0, -1.5, -1.1, -1.01] {
        let spec = make_ex1(2, 3, 1.0, 1.0, beta0, 1.0, 1.0, 1.0, 1.0);
        let avg = compute_normal_form(&spec, 5, tol::ZERO_COEFF)?;
        let sol = build_rho1(&avg, 2, 4)?;
        println!("  beta0 = {beta0:+.2}: anchor {:+10.4}", sol.anchor);
    }
    Ok(())
}
