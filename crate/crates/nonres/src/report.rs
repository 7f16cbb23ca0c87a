//! Deterministic report serialization.
//!
//! Reports must be byte-identical across runs with the same inputs, so the
//! JSON emitter is written out by hand: object keys keep insertion order,
//! floats are printed with 17 significant digits (lossless for f64), and
//! non-finite values become JSON null.

use crate::asymptotics::AsymptoticSolution;
use crate::averaging::{AveragedSystem, NonresonanceReport};
use crate::error::Result;
use crate::regime::{NonlinearReport, RegimeReport, Verdict};
use crate::sim::{EscapeReport, ExponentFit, ProbeReport};
use std::io::Write;
use std::path::Path;

/// JSON value with deterministic rendering.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

/// `f64` formatted with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    format!("{x:.16e}")
}

impl Json {
    pub fn str(s: impl Into<String>) -> Json {
        Json::Str(s.into())
    }

    pub fn num_arr(values: &[f64]) -> Json {
        Json::Arr(values.iter().map(|&v| Json::Num(v)).collect())
    }

    pub fn opt_num(value: Option<f64>) -> Json {
        match value {
            Some(v) => Json::Num(v),
            None => Json::Null,
        }
    }

    pub fn opt_str(value: &Option<String>) -> Json {
        match value {
            Some(v) => Json::str(v.clone()),
            None => Json::Null,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_into(&mut out, 0);
        out.push('\n');
        out
    }

    fn write_into(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Num(x) => out.push_str(&fmt_f64(*x)),
            Json::Str(s) => write_escaped(out, s),
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write_into(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Obj(pairs) => {
                if pairs.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (key, value)) in pairs.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    write_escaped(out, key);
                    out.push_str(": ");
                    value.write_into(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Write a rendered JSON document.
pub fn write_json(path: &Path, value: &Json) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(value.render().as_bytes())?;
    Ok(())
}

/// One CSV line with 17-significant-digit floats.
pub fn csv_line(values: &[f64]) -> String {
    let mut parts = Vec::with_capacity(values.len());
    for &v in values {
        parts.push(fmt_f64(v));
    }
    parts.join(",")
}

fn mode_pair(k: (i32, i32)) -> Json {
    Json::Arr(vec![Json::Int(k.0 as i64), Json::Int(k.1 as i64)])
}

pub fn nonresonance_json(report: &NonresonanceReport) -> Json {
    Json::Obj(vec![
        ("margin".into(), Json::Num(report.margin)),
        ("worst_mode".into(), mode_pair(report.worst_mode)),
        ("r_star".into(), Json::Num(report.r_star)),
    ])
}

pub fn averaged_json(avg: &AveragedSystem) -> Json {
    let lambda = avg
        .lambda
        .iter()
        .map(|(k, series)| (k.to_string(), Json::num_arr(&series.coeffs)))
        .collect();
    let correctors = avg
        .v
        .iter()
        .map(|(k, term)| (k.to_string(), Json::Int(term.mode_keys().len() as i64)))
        .collect();
    Json::Obj(vec![
        ("id".into(), Json::str(avg.id.clone())),
        ("q".into(), Json::Int(avg.q as i64)),
        ("p".into(), Json::Int(avg.p as i64)),
        ("orders".into(), Json::Int(avg.n_order as i64)),
        ("omega".into(), Json::num_arr(&avg.omega.coeffs)),
        ("lambda".into(), Json::Obj(lambda)),
        ("corrector_modes".into(), Json::Obj(correctors)),
        ("mode_set".into(), Json::Arr(avg.mode_set.iter().map(|&k| mode_pair(k)).collect())),
        ("r_star".into(), Json::Num(avg.r_star)),
        ("t_star".into(), Json::Num(avg.t_star)),
    ])
}

fn verdict_json(v: &Verdict) -> Json {
    Json::Obj(vec![
        ("tag".into(), Json::str(v.theorem_tag.clone())),
        ("stability".into(), Json::str(v.stability.as_str())),
        ("predicted_decay_exponent".into(), Json::opt_num(v.predicted_decay_exponent)),
        ("note".into(), Json::opt_str(&v.note)),
    ])
}

fn nonlinear_json(n: &NonlinearReport) -> Json {
    Json::Obj(vec![
        ("m".into(), Json::Int(n.m as i64)),
        ("d".into(), Json::Int(n.d as i64)),
        ("lambda_nm".into(), Json::Num(n.lambda_nm)),
        ("lambda_nd".into(), Json::Num(n.lambda_nd)),
        ("m_star".into(), Json::Num(n.m_star)),
        ("theta_m".into(), Json::Num(n.theta_m)),
        ("balance_poly".into(), Json::num_arr(&n.poly.coeffs)),
        (
            "roots".into(),
            Json::Arr(
                n.roots
                    .iter()
                    .map(|r| {
                        Json::Obj(vec![
                            ("z".into(), Json::Num(r.z)),
                            ("slope".into(), Json::Num(r.p_prime)),
                        ])
                    })
                    .collect(),
            ),
        ),
    ])
}

pub fn regime_json(report: &RegimeReport) -> Json {
    Json::Obj(vec![
        ("n".into(), Json::Int(report.n as i64)),
        ("p".into(), Json::Int(report.p as i64)),
        ("q".into(), Json::Int(report.q as i64)),
        ("region".into(), Json::str(report.region.as_str())),
        ("lambda_n".into(), Json::opt_num(report.lambda_n)),
        ("mu_p".into(), Json::Num(report.mu_p)),
        ("nu0".into(), Json::opt_num(report.nu0)),
        (
            "nonlinear".into(),
            report.nonlinear.as_ref().map(nonlinear_json).unwrap_or(Json::Null),
        ),
        (
            "equilibria".into(),
            Json::Arr(
                report
                    .equilibria
                    .iter()
                    .map(|e| {
                        Json::Obj(vec![
                            ("rho0".into(), Json::Num(e.rho0)),
                            ("slope".into(), Json::Num(e.lambda_prime)),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("verdicts".into(), Json::Arr(report.verdicts.iter().map(verdict_json).collect())),
        (
            "notes".into(),
            Json::Arr(report.notes.iter().map(|n| Json::str(n.clone())).collect()),
        ),
        ("zero_threshold".into(), Json::Num(report.zero_threshold)),
    ])
}

pub fn solution_json(sol: &AsymptoticSolution) -> Json {
    let coefficients = sol.coefficients.iter().map(|c| Json::num_arr(&c.coeffs)).collect();
    let rhs = sol.rhs_terms.iter().map(|c| Json::num_arr(&c.coeffs)).collect();
    Json::Obj(vec![
        ("kind".into(), Json::str(sol.kind.as_str())),
        ("leading_power".into(), Json::Num(sol.leading_power)),
        ("step".into(), Json::Num(sol.step)),
        ("anchor".into(), Json::Num(sol.anchor)),
        ("orders".into(), Json::Int(sol.m_trunc as i64)),
        ("coefficients".into(), Json::Arr(coefficients)),
        ("rhs_terms".into(), Json::Arr(rhs)),
        ("phase_frequency".into(), Json::Num(sol.phase_frequency)),
        ("t_valid".into(), Json::Num(sol.t_valid)),
    ])
}

pub fn fit_json(fit: &ExponentFit) -> Json {
    Json::Obj(vec![
        ("slope".into(), Json::Num(fit.slope)),
        ("intercept".into(), Json::Num(fit.intercept)),
        ("r_squared".into(), Json::Num(fit.r_squared)),
        ("window".into(), Json::num_arr(&[fit.window.0, fit.window.1])),
        ("n_samples".into(), Json::Int(fit.n_samples as i64)),
    ])
}

pub fn probe_json(report: &ProbeReport) -> Json {
    let members = report
        .members
        .iter()
        .map(|m| {
            Json::Obj(vec![
                ("r_init".into(), Json::Num(m.r_init)),
                ("phi_init".into(), Json::Num(m.phi_init)),
                ("sup_weighted".into(), Json::Num(m.sup_weighted)),
                ("t_at_sup".into(), Json::Num(m.t_at_sup)),
                ("final_weighted".into(), Json::Num(m.final_weighted)),
                ("sup_amplitude".into(), Json::Num(m.sup_amplitude)),
                ("phase_ratio".into(), Json::opt_num(m.phase_ratio)),
            ])
        })
        .collect();
    Json::Obj(vec![
        ("nu".into(), Json::Num(report.nu)),
        ("t0".into(), Json::Num(report.t0)),
        ("t1".into(), Json::Num(report.t1)),
        ("sup_weighted".into(), Json::Num(report.sup_weighted)),
        ("sup_amplitude".into(), Json::Num(report.sup_amplitude)),
        ("members".into(), Json::Arr(members)),
    ])
}

pub fn escape_json(report: &EscapeReport) -> Json {
    let members = report
        .members
        .iter()
        .map(|m| {
            Json::Obj(vec![
                ("r_init".into(), Json::Num(m.r_init)),
                ("phi_init".into(), Json::Num(m.phi_init)),
                ("crossing".into(), Json::opt_num(m.crossing)),
                ("max_weighted".into(), Json::Num(m.max_weighted)),
            ])
        })
        .collect();
    Json::Obj(vec![
        ("nu".into(), Json::Num(report.nu)),
        ("eps".into(), Json::Num(report.eps)),
        ("t0".into(), Json::Num(report.t0)),
        ("t_max".into(), Json::Num(report.t_max)),
        ("all_crossed".into(), Json::Bool(report.all_crossed)),
        ("none_crossed".into(), Json::Bool(report.none_crossed)),
        ("members".into(), Json::Arr(members)),
    ])
}
