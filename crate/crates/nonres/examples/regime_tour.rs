//! Classify the built-in systems across parameter values and print the
//! stability verdicts.
//!
//! ```text
//! cargo run --example regime_tour
//! ```

use nonres::averaging::compute_normal_form;
use nonres::regime::classify_regimes;
use nonres::systems::{make_ex0, make_ex1, make_ex2};
use nonres::tol;
use nonres::SystemSpec;

fn show(label: &str, spec: &SystemSpec, anchor: Option<f64>) -> nonres::error::Result<()> {
    let n_order = 2 * spec.p as usize - 1;
    let avg = compute_normal_form(spec, n_order, tol::ZERO_COEFF)?;
    let report = classify_regimes(&avg, anchor)?;
    println!("{label}:");
    println!(
        "  leading order n = {}, drive order p = {}, region {}",
        report.n,
        report.p,
        report.region.as_str()
    );
    if let Some(l) = report.lambda_n {
        println!("  linear rate Lambda_n'(0) = {l:+.4}");
    }
    if let Some(nl) = &report.nonlinear {
        println!(
            "  nonlinear balance: vanishing order m = {}, exponent theta = {:.4}",
            nl.m, nl.theta_m
        );
        for root in &nl.roots {
            println!("    balance root z = {:+.4}, slope {:+.4}", root.z, root.p_prime);
        }
    }
    for eq in &report.equilibria {
        println!("  equilibrium rho0 = {:.4}, Lambda_p'(rho0) = {:+.4}", eq.rho0, eq.lambda_prime);
    }
    for v in &report.verdicts {
        let decay = v
            .predicted_decay_exponent
            .map(|e| format!(", decay exponent {e:.4}"))
            .unwrap_or_default();
        println!("  verdict {} [{}]{}", v.theorem_tag, v.stability.as_str(), decay);
    }
    println!();
    Ok(())
}

fn main() -> nonres::error::Result<()> {
    show("ex0 (damping with drive)", &make_ex0(-1.0, 1.0, 1.0, 3), None)?;

    for beta0 in [-2.0, -0.5, 0.5] {
        let spec = make_ex1(2, 3, 1.0, 1.0, beta0, 1.0, 1.0, 1.0, 1.0);
        show(&format!("ex1, beta0 = {beta0:+}"), &spec, None)?;
    }

    // Perturbation and drive at the same decay order: balance at a root of
    // Lambda_p instead of decay to zero.
    let spec = make_ex1(2, 2, 1.0, 1.0, -1.5, 1.0, 1.0, 1.0, 1.0);
    show("ex1, h = p = 2, beta0 = -1.5", &spec, None)?;

    let spec = make_ex2(1, 1, 3, 3, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 8)?;
    show("ex2 (pendulum, nonlinear balance)", &spec, None)?;
    Ok(())
}
