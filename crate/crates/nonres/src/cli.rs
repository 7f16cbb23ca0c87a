//! Command-line front end.
//!
//! `analyze` writes the averaged tables and regime classification,
//! `simulate` writes per-member trajectory CSVs with decay fits,
//! `verify` builds the predicted expansions and checks them against
//! ensemble probes, and `examples` prints the builtin catalog.
//!
//! Exit codes: 0 success, 2 resonance, 3 invalid input or violated
//! hypothesis, 4 integration failure, 5 probe contradiction.

use crate::asymptotics::{self, AsymptoticSolution};
use crate::averaging::{self, AveragedSystem, NonresonanceReport};
use crate::config::{BuiltSystem, ProbeSettings, RunConfig};
use crate::error::{Error, Result};
use crate::regime::{self, RegimeReport};
use crate::report::{self, Json};
use crate::sim;
use crate::system::SystemSpec;
use crate::tol;
use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "nonres",
    version,
    about = "Averaging, regime classification, and long-time asymptotics \
             for slowly forced planar oscillators"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Builtin system shorthand (see `examples`).
    #[arg(long, global = true, value_name = "NAME")]
    pub system: Option<String>,
    /// Dotted-path configuration override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory for reports and trajectories.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Average the system and classify its long-time regime.
    Analyze,
    /// Integrate trajectories and fit decay exponents.
    Simulate,
    /// Check predicted expansions against ensemble probes.
    Verify,
    /// List builtin systems and their parameters.
    Examples,
}

/// Parse arguments and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    if cli.command == Some(Command::Examples) {
        print_examples();
        return Ok(0);
    }
    let cfg = RunConfig::load(cli.config.as_deref(), cli.system.as_deref(), &cli.set)?;
    let command = match cli.command {
        Some(c) => c,
        None => match cfg.command.as_deref() {
            Some("analyze") => Command::Analyze,
            Some("simulate") => Command::Simulate,
            Some("verify") => Command::Verify,
            Some("examples") => Command::Examples,
            Some(other) => {
                return Err(Error::Config {
                    what: format!("unknown command '{other}' in configuration"),
                })
            }
            None => {
                return Err(Error::Config {
                    what: "no command: pass analyze, simulate, verify, or examples".into(),
                })
            }
        },
    };
    if command == Command::Examples {
        print_examples();
        return Ok(0);
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    match command {
        Command::Analyze => cmd_analyze(&cfg, &out_dir),
        Command::Simulate => cmd_simulate(&cfg, &out_dir),
        Command::Verify => cmd_verify(&cfg, &out_dir),
        Command::Examples => unreachable!("handled above"),
    }
}

fn print_examples() {
    println!("builtin systems (select with --system NAME, tune with --set system.params.KEY=VALUE):");
    println!();
    println!("  ex0  linearly damped oscillator with a decaying, phase-modulated drive");
    println!("       params: lambda (-1), gamma0 (1), gamma1 (1), p (3)");
    println!("  ex1  oscillator forced at two decay orders with mixed angle harmonics");
    println!("       params: h (2), p (3), alpha0 (1), alpha1 (1), beta0 (-2), beta1 (1),");
    println!("               gamma0 (1), gamma1 (1), s2 (1)");
    println!("  ex2  pendulum in energy-angle coordinates with three decaying drives");
    println!("       params: n (1), d (1), p (3), q (3), alpha0 (-1), alpha1 (1),");
    println!("               beta0 (1), beta1 (1), gamma0 (1), gamma1 (1)");
    println!();
    println!("usage:");
    println!("  nonres --system ex1 --set system.params.beta0=-1.5 analyze --out results");
    println!("  nonres --config run.json simulate");
    println!("  nonres --system ex2 verify --out results");
    println!();
    println!("library walkthroughs live under examples/ (cargo run --example NAME).");
}

/// Shared front half of `analyze` and `verify`.
struct Analysis {
    built: BuiltSystem,
    nonres: NonresonanceReport,
    avg: AveragedSystem,
    regime: RegimeReport,
}

fn analyze_pipeline(cfg: &RunConfig) -> Result<Analysis> {
    let built = cfg.system.build(&cfg.orders)?;
    built.spec.validate(tol::ZERO_COEFF)?;
    let nonres = averaging::check_nonresonance(&built.spec, cfg.orders.k1_bound)?;
    let n_order = cfg.orders.n.unwrap_or(2 * built.spec.p as usize - 1);
    let avg = averaging::compute_normal_form(&built.spec, n_order, tol::ZERO_COEFF)?;
    let regime = regime::classify_regimes(&avg, cfg.anchor)?;
    Ok(Analysis { built, nonres, avg, regime })
}

fn system_json(spec: &SystemSpec) -> Json {
    let modes = spec
        .input_modes()
        .iter()
        .map(|&(k1, k2)| Json::Arr(vec![Json::Int(k1 as i64), Json::Int(k2 as i64)]))
        .collect();
    Json::Obj(vec![
        ("id".into(), Json::str(spec.id.clone())),
        ("q".into(), Json::Int(spec.q as i64)),
        ("p".into(), Json::Int(spec.p as i64)),
        ("omega".into(), Json::num_arr(&spec.omega.coeffs)),
        ("phase".into(), Json::num_arr(&spec.phase.s)),
        ("r0".into(), Json::Num(spec.r0)),
        ("max_order".into(), Json::Int(spec.max_order() as i64)),
        ("input_modes".into(), Json::Arr(modes)),
    ])
}

fn cmd_analyze(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let a = analyze_pipeline(cfg)?;
    let doc = Json::Obj(vec![
        ("command".into(), Json::str("analyze")),
        ("system".into(), system_json(&a.built.spec)),
        ("nonresonance".into(), report::nonresonance_json(&a.nonres)),
        ("averaged".into(), report::averaged_json(&a.avg)),
        ("regime".into(), report::regime_json(&a.regime)),
    ]);
    let path = out_dir.join("report.json");
    report::write_json(&path, &doc)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let built = cfg.system.build(&cfg.orders)?;
    built.spec.validate_structure(tol::ZERO_COEFF)?;
    let s = &cfg.simulate;
    let use_cartesian = match s.coordinates.as_deref() {
        None => built.cartesian.is_some(),
        Some("cartesian") => {
            if built.cartesian.is_none() {
                return Err(Error::Config {
                    what: "this system has no closed-form planar field; use coordinates = polar"
                        .into(),
                });
            }
            true
        }
        Some("polar") => false,
        Some(other) => {
            return Err(Error::Config {
                what: format!("coordinates must be polar or cartesian, got '{other}'"),
            })
        }
    };
    let ics: Vec<(f64, f64)> = if s.ensemble_size <= 1 {
        vec![(s.r_init, s.phi_init)]
    } else {
        sim::ensemble_offsets(s.ensemble_size, s.seed)
            .into_iter()
            .map(|(u, phi)| (s.r_init + s.delta0 * u, phi))
            .collect()
    };
    let icfg = cfg.integrator.to_config();
    let window = s.fit_window.unwrap_or((s.t0, s.t1));
    let mut member_entries = Vec::with_capacity(ics.len());
    for (i, &(r_init, phi_init)) in ics.iter().enumerate() {
        let traj = if use_cartesian {
            let field = built.cartesian.as_ref().expect("checked above");
            let (x, y) = sim::polar_to_cartesian(r_init, phi_init);
            sim::integrate(field.as_ref(), [x, y], s.t0, s.t1, &icfg)
        } else {
            sim::integrate_polar(&built.spec, (r_init, phi_init), s.t0, s.t1, &icfg)
        }
        .map_err(|e| {
            eprintln!("member {i} failed to integrate");
            e
        })?;
        let name = format!("traj_{i}.csv");
        let path = out_dir.join(&name);
        let mut file = std::fs::File::create(&path)?;
        writeln!(file, "t,r,phi,x,y,S")?;
        let mut radii = Vec::with_capacity(traj.len());
        for j in 0..traj.len() {
            let t = traj.times[j];
            let (r, phi) = traj.polar_state(j);
            let (x, y) = traj.cartesian_state(j);
            radii.push(r);
            writeln!(
                file,
                "{}",
                report::csv_line(&[t, r, phi, x, y, built.spec.phase.eval(t)])
            )?;
        }
        let fit = match sim::fit_decay_exponent(&traj.times, &radii, window) {
            Ok(f) => report::fit_json(&f),
            Err(e) => Json::Obj(vec![("error".into(), Json::str(e.to_string()))]),
        };
        let last = traj.len() - 1;
        let (r_final, phi_final) = traj.polar_state(last);
        member_entries.push(Json::Obj(vec![
            ("index".into(), Json::Int(i as i64)),
            ("r_init".into(), Json::Num(r_init)),
            ("phi_init".into(), Json::Num(phi_init)),
            ("csv".into(), Json::str(name)),
            (
                "final".into(),
                Json::Obj(vec![
                    ("t".into(), Json::Num(traj.times[last])),
                    ("r".into(), Json::Num(r_final)),
                    ("phi".into(), Json::Num(phi_final)),
                ]),
            ),
            ("amplitude_fit".into(), fit),
        ]));
    }
    let doc = Json::Obj(vec![
        ("command".into(), Json::str("simulate")),
        ("system".into(), system_json(&built.spec)),
        (
            "coordinates".into(),
            Json::str(if use_cartesian { "cartesian" } else { "polar" }),
        ),
        ("t0".into(), Json::Num(s.t0)),
        ("t1".into(), Json::Num(s.t1)),
        ("members".into(), Json::Arr(member_entries)),
    ]);
    let path = out_dir.join("report.json");
    report::write_json(&path, &doc)?;
    println!("wrote {}", path.display());
    Ok(0)
}

const PROBEABLE: [&str; 8] = [
    "q1_linear_stable",
    "q1_linear_unstable",
    "q1_bounded_near_zero",
    "q1_nonlinear_stable",
    "q2_stable",
    "q2_unstable",
    "q2_escape",
    "q3_neutral",
];

fn default_probes(regime: &RegimeReport) -> Vec<ProbeSettings> {
    regime
        .verdicts
        .iter()
        .filter(|v| PROBEABLE.contains(&v.theorem_tag.as_str()))
        .map(|v| ProbeSettings::for_tag(v.theorem_tag.clone()))
        .collect()
}

struct ProbeOutcome {
    pass: bool,
    entry: Json,
    solution: Option<Json>,
}

fn knobs(s: &ProbeSettings, eps: f64, delta0: f64, t0: f64, t1: f64) -> (f64, f64, f64, f64) {
    (
        s.eps.unwrap_or(eps),
        s.delta0.unwrap_or(delta0),
        s.t0.unwrap_or(t0),
        s.t1.unwrap_or(t1),
    )
}

/// Members whose averaged amplitude starts at `ref0 + delta0 u t0^-nu`,
/// matching the weighted smallness the stability claims assume at the
/// start time. Seeds are pulled back through the inverse transform so the
/// oscillatory corrector cannot cancel a member's nominal offset.
fn seeded(
    avg: &AveragedSystem,
    ref0: f64,
    delta0: f64,
    nu: f64,
    t0: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    sim::ensemble_offsets(count, seed)
        .into_iter()
        .map(|(u, phi)| {
            let rho = ref0 + delta0 * u * t0.powf(-nu);
            averaging::transform_inverse(avg, rho, phi, t0).map(|r| (r, phi))
        })
        .collect()
}

/// Members spread over `(0, delta0]`, for claims about a neighbourhood
/// of the origin.
fn near_zero(delta0: f64, count: usize, seed: u64) -> Vec<(f64, f64)> {
    sim::ensemble_offsets(count, seed)
        .into_iter()
        .map(|(u, phi)| (delta0 * u.abs(), phi))
        .collect()
}

fn stability_entry(
    tag: &str,
    pass: bool,
    eps: f64,
    delta0: f64,
    rep: &sim::ProbeReport,
) -> Json {
    Json::Obj(vec![
        ("tag".into(), Json::str(tag)),
        ("kind".into(), Json::str("stability")),
        ("pass".into(), Json::Bool(pass)),
        ("eps".into(), Json::Num(eps)),
        ("delta0".into(), Json::Num(delta0)),
        ("report".into(), report::probe_json(rep)),
    ])
}

fn escape_entry(tag: &str, pass: bool, delta0: f64, rep: &sim::EscapeReport) -> Json {
    Json::Obj(vec![
        ("tag".into(), Json::str(tag)),
        ("kind".into(), Json::str("escape")),
        ("pass".into(), Json::Bool(pass)),
        ("eps".into(), Json::Num(rep.eps)),
        ("delta0".into(), Json::Num(delta0)),
        ("report".into(), report::escape_json(rep)),
    ])
}

fn sol_entry(tag: &str, sol: &AsymptoticSolution, avg: &AveragedSystem, t: f64) -> Json {
    let Json::Obj(mut pairs) = report::solution_json(sol) else {
        unreachable!("solution_json returns an object");
    };
    pairs.push(("residual_t".into(), Json::Num(t)));
    pairs.push(("residual".into(), Json::Num(asymptotics::residual(sol, avg, t))));
    Json::Obj(vec![
        ("tag".into(), Json::str(tag)),
        ("solution".into(), Json::Obj(pairs)),
    ])
}

fn run_probe(a: &Analysis, cfg: &RunConfig, settings: &ProbeSettings) -> Result<ProbeOutcome> {
    let tag = settings.theorem_tag.as_str();
    if !a.regime.verdicts.iter().any(|v| v.theorem_tag == tag) {
        return Err(Error::Config {
            what: format!("probe tag '{tag}' does not match any verdict of this system"),
        });
    }
    let spec = &a.built.spec;
    let avg = &a.avg;
    let icfg = cfg.integrator.to_config();
    let m = cfg.orders.m;
    let count = settings.ensemble_size.max(1);
    let seed = settings.seed;
    match tag {
        "q1_linear_stable" => {
            let sol = asymptotics::build_rho1(avg, a.regime.n, m)?;
            let nu = settings.nu.or(a.regime.nu0).unwrap_or(0.0);
            let (eps, delta0, t0, t1) = knobs(settings, 0.1, 0.02, 1e2, 1e5);
            let ens = seeded(avg, sol.eval(t0), delta0, nu, t0, count, seed)?;
            let reference = |t: f64| sol.eval(t);
            let phase = |t: f64| asymptotics::phase_of(&sol, t0, t, &avg.omega);
            let rep = sim::stability_probe(spec, &reference, Some(&phase), &ens, nu, t0, t1, &icfg)?;
            let pass = rep.sup_weighted < eps;
            Ok(ProbeOutcome {
                pass,
                entry: stability_entry(tag, pass, eps, delta0, &rep),
                solution: Some(sol_entry(tag, &sol, avg, t1)),
            })
        }
        "q1_linear_unstable" => {
            let sol = asymptotics::build_rho1(avg, a.regime.n, m)?;
            let nu = settings.nu.or(a.regime.nu0).unwrap_or(0.0);
            let (eps, delta0, t0, t1) = knobs(settings, 0.1, 0.02, 1e2, 1e7);
            let ens = seeded(avg, sol.eval(t0), delta0, nu, t0, count, seed)?;
            let reference = |t: f64| sol.eval(t);
            let rep = sim::escape_probe(spec, &reference, nu, eps, &ens, t0, t1, &icfg)?;
            let pass = rep.all_crossed;
            Ok(ProbeOutcome {
                pass,
                entry: escape_entry(tag, pass, delta0, &rep),
                solution: Some(sol_entry(tag, &sol, avg, t1)),
            })
        }
        "q1_bounded_near_zero" => {
            let nu = settings.nu.unwrap_or(0.0);
            let (eps, delta0, t0, t1) = knobs(settings, 0.2, 0.02, 1e2, 1e5);
            let ens = near_zero(delta0, count, seed);
            let reference = |_: f64| 0.0;
            let rep = sim::stability_probe(spec, &reference, None, &ens, nu, t0, t1, &icfg)?;
            let pass = rep.sup_amplitude < eps;
            Ok(ProbeOutcome {
                pass,
                entry: stability_entry(tag, pass, eps, delta0, &rep),
                solution: None,
            })
        }
        "q1_nonlinear_stable" => {
            let nl = a.regime.nonlinear.as_ref().ok_or_else(|| Error::Config {
                what: "nonlinear probe requested without a nonlinear branch".into(),
            })?;
            let root = nl.roots.iter().find(|r| r.p_prime < 0.0).ok_or_else(|| {
                Error::Config { what: "no attracting balance root to probe".into() }
            })?;
            let sol = asymptotics::build_rhom(avg, root.z, a.regime.n, nl.d, nl.m, m)?;
            let nu = settings.nu.unwrap_or(nl.theta_m);
            let (eps, delta0, t0, t1) = knobs(settings, 0.1, 0.02, 1e4, 1e5);
            let ens = seeded(avg, sol.eval(t0), delta0, nu, t0, count, seed)?;
            let reference = |t: f64| sol.eval(t);
            let phase = |t: f64| asymptotics::phase_of(&sol, t0, t, &avg.omega);
            let rep = sim::stability_probe(spec, &reference, Some(&phase), &ens, nu, t0, t1, &icfg)?;
            let pass = rep.sup_weighted < eps;
            Ok(ProbeOutcome {
                pass,
                entry: stability_entry(tag, pass, eps, delta0, &rep),
                solution: Some(sol_entry(tag, &sol, avg, t1)),
            })
        }
        "q2_stable" => {
            let eq = a
                .regime
                .equilibria
                .iter()
                .find(|e| e.lambda_prime < 0.0)
                .ok_or_else(|| Error::Config {
                    what: "no attracting equilibrium to probe".into(),
                })?;
            let sol = asymptotics::build_rho2(avg, eq.rho0, m)?;
            // The deviation weight must stay below the contraction rate.
            let nu = settings.nu.unwrap_or_else(|| (0.9 * eq.lambda_prime.abs()).min(0.5));
            let (eps, delta0, t0, t1) = knobs(settings, 0.1, 0.02, 1e4, 1e5);
            let ens = seeded(avg, sol.eval(t0), delta0, nu, t0, count, seed)?;
            let reference = |t: f64| sol.eval(t);
            let phase = |t: f64| asymptotics::phase_of(&sol, t0, t, &avg.omega);
            let rep = sim::stability_probe(spec, &reference, Some(&phase), &ens, nu, t0, t1, &icfg)?;
            let pass = rep.sup_weighted < eps;
            Ok(ProbeOutcome {
                pass,
                entry: stability_entry(tag, pass, eps, delta0, &rep),
                solution: Some(sol_entry(tag, &sol, avg, t1)),
            })
        }
        "q2_unstable" => {
            let eq = a
                .regime
                .equilibria
                .iter()
                .find(|e| e.lambda_prime > 0.0)
                .ok_or_else(|| Error::Config {
                    what: "no repelling equilibrium to probe".into(),
                })?;
            let sol = asymptotics::build_rho2(avg, eq.rho0, m)?;
            let nu = settings.nu.unwrap_or(0.0);
            let (eps, delta0, t0, t1) = knobs(settings, 0.3, 0.02, 1e2, 1e7);
            let ens = seeded(avg, sol.eval(t0), delta0, nu, t0, count, seed)?;
            let reference = |t: f64| sol.eval(t);
            let rep = sim::escape_probe(spec, &reference, nu, eps, &ens, t0, t1, &icfg)?;
            let pass = rep.all_crossed;
            Ok(ProbeOutcome {
                pass,
                entry: escape_entry(tag, pass, delta0, &rep),
                solution: Some(sol_entry(tag, &sol, avg, t1)),
            })
        }
        "q2_escape" => {
            let nu = settings.nu.unwrap_or(0.0);
            let (eps, delta0, t0, t1) = knobs(settings, 0.5, 0.02, 1e2, 1e7);
            let ens = near_zero(delta0, count, seed);
            let reference = |_: f64| 0.0;
            let rep = sim::escape_probe(spec, &reference, nu, eps, &ens, t0, t1, &icfg)?;
            let pass = rep.all_crossed;
            Ok(ProbeOutcome {
                pass,
                entry: escape_entry(tag, pass, delta0, &rep),
                solution: None,
            })
        }
        "q3_neutral" => {
            let eq = a.regime.equilibria.first().ok_or_else(|| Error::Config {
                what: "drift probe needs an anchor amplitude; set anchor in the configuration"
                    .into(),
            })?;
            let sol = asymptotics::build_rho3(avg, eq.rho0, a.regime.n, m)?;
            let nu = settings.nu.unwrap_or(0.0);
            let (eps, delta0, t0, t1) = knobs(settings, 0.1, 0.02, 1e2, 1e5);
            let ens = seeded(avg, sol.eval(t0), delta0, nu, t0, count, seed)?;
            let reference = |t: f64| sol.eval(t);
            let phase = |t: f64| asymptotics::phase_of(&sol, t0, t, &avg.omega);
            let rep = sim::stability_probe(spec, &reference, Some(&phase), &ens, nu, t0, t1, &icfg)?;
            let pass = rep.sup_weighted < eps;
            Ok(ProbeOutcome {
                pass,
                entry: stability_entry(tag, pass, eps, delta0, &rep),
                solution: Some(sol_entry(tag, &sol, avg, t1)),
            })
        }
        other => Err(Error::Config {
            what: format!("no probe is defined for tag '{other}'"),
        }),
    }
}

fn cmd_verify(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let a = analyze_pipeline(cfg)?;
    let probes = if cfg.probes.is_empty() {
        default_probes(&a.regime)
    } else {
        cfg.probes.clone()
    };
    let mut probe_entries = Vec::with_capacity(probes.len());
    let mut solutions = Vec::new();
    let mut all_pass = true;
    for settings in &probes {
        let outcome = run_probe(&a, cfg, settings)?;
        all_pass &= outcome.pass;
        probe_entries.push(outcome.entry);
        if let Some(sol) = outcome.solution {
            solutions.push(sol);
        }
    }
    let doc = Json::Obj(vec![
        ("command".into(), Json::str("verify")),
        ("system".into(), system_json(&a.built.spec)),
        ("nonresonance".into(), report::nonresonance_json(&a.nonres)),
        ("regime".into(), report::regime_json(&a.regime)),
        ("asymptotics".into(), Json::Arr(solutions)),
        ("probe_results".into(), Json::Arr(probe_entries)),
        ("contradiction".into(), Json::Bool(!all_pass)),
    ]);
    let path = out_dir.join("verify.json");
    report::write_json(&path, &doc)?;
    println!("wrote {}", path.display());
    if all_pass {
        Ok(0)
    } else {
        eprintln!("probe contradiction: a measured deviation violates its predicted bound");
        Ok(5)
    }
}
