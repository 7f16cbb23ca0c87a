//! Build the action-angle chart of the pendulum and check it against the
//! exact elliptic-integral frequency.
//!
//! ```text
//! cargo run --example pendulum_chart
//! ```

use nonres::systems::make_pendulum_chart;
use std::f64::consts::PI;

/// Exact libration frequency at energy H = r^2/2: the period of
/// `x'' = -sin x` is `4 K(k)` with modulus `k = r/2`, via the
/// arithmetic-geometric mean.
fn exact_frequency(r: f64) -> f64 {
    let k = r / 2.0;
    let (mut a, mut b) = (1.0_f64, (1.0 - k * k).sqrt());
    while (a - b).abs() > 1e-15 {
        let m = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = m;
    }
    // K(k) = pi / (2 agm(1, sqrt(1 - k^2))), frequency = pi / (2 K).
    a
}

fn energy(x: f64, y: f64) -> f64 {
    y * y / 2.0 - x.cos() + 1.0
}

fn main() -> nonres::error::Result<()> {
    let chart = make_pendulum_chart(10)?;

    println!("frequency series w(r) coefficients (powers of r):");
    for (j, c) in chart.w.coeffs.iter().enumerate().take(11) {
        if c.abs() > 1e-14 {
            println!("  r^{j}: {c:+.12}{}", approx_fraction(*c));
        }
    }
    println!();

    println!("{:>6}  {:>16}  {:>16}  {:>10}", "r", "w(r)", "exact", "rel err");
    for r in [0.1, 0.3, 0.6, 0.9, 1.2] {
        let w = chart.w.eval(r);
        let exact = exact_frequency(r);
        println!("{r:>6.2}  {w:>16.12}  {exact:>16.12}  {:>10.2e}", (w / exact - 1.0).abs());
    }
    println!();

    // The chart promises H(X, Y) = r^2/2 on its image; the defect is pure
    // truncation and falls with the chart order.
    println!("energy closure |H(X, Y) - r^2/2| at r = 0.5:");
    for order in [4usize, 6, 8, 10] {
        let chart = make_pendulum_chart(order)?;
        let mut worst = 0.0_f64;
        for i in 0..24 {
            let phi = 2.0 * PI * i as f64 / 24.0;
            let x = chart.x.eval(0.5, phi, 0.0);
            let y = chart.y.eval(0.5, phi, 0.0);
            worst = worst.max((energy(x, y) - 0.125).abs());
        }
        println!("  order {order:>2}: {worst:.3e}");
    }
    Ok(())
}

/// Dyadic-fraction label for a coefficient, when an exact one exists.
fn approx_fraction(c: f64) -> String {
    for j in 0..=24u32 {
        let den = (1u64 << j) as f64;
        let num = (c * den).round();
        if (c - num / den).abs() < 1e-13 && num.abs() < 1e6 {
            return format!("  ({}/{})", num as i64, den as u64);
        }
    }
    String::new()
}
