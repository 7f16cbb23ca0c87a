//! Run configuration: JSON schema, builtin system catalog, and
//! dotted-path overrides.
//!
//! A run is described by a single JSON document. The `system` section
//! selects either a builtin family (with a flat parameter map) or an
//! inline mode table; the remaining sections tune orders, the integrator,
//! probes, and simulation windows. `--set key=value` edits the document
//! before it is deserialized, so every field is reachable from the
//! command line.

use crate::error::{Error, Result};
use crate::series::{CSeries, EpsExpansion, FtSeries, RadialSeries};
use crate::sim::{IntegratorConfig, VectorField};
use crate::system::{PhaseLaw, SystemSpec};
use crate::systems;
use crate::tol;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemChoice,
    /// Fallback command when none is given on the command line.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub orders: Orders,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    /// Probes to run under `verify`; empty means one default probe per
    /// probeable verdict.
    #[serde(default)]
    pub probes: Vec<ProbeSettings>,
    #[serde(default)]
    pub simulate: SimulateSettings,
    /// Drift anchor (limit amplitude) for neutral regimes.
    #[serde(default)]
    pub anchor: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Orders {
    /// Averaging depth N; defaults to 2p - 1, the deepest admissible.
    #[serde(default)]
    pub n: Option<usize>,
    /// Truncation order of the long-time expansions.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Radial truncation degree for inline systems and the chart order
    /// for the pendulum family.
    #[serde(default = "default_radial_trunc")]
    pub radial_trunc: usize,
    /// Largest angular harmonic admitted in inline mode tables and
    /// scanned by the resonance check.
    #[serde(default = "default_k1_bound")]
    pub k1_bound: i32,
}

fn default_m() -> usize {
    2
}

fn default_radial_trunc() -> usize {
    tol::RADIAL_TRUNC
}

fn default_k1_bound() -> i32 {
    tol::K1_CLIP
}

impl Default for Orders {
    fn default() -> Self {
        Orders {
            n: None,
            m: default_m(),
            radial_trunc: default_radial_trunc(),
            k1_bound: default_k1_bound(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default = "default_step_fraction")]
    pub step_fraction: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
}

fn default_rel_tol() -> f64 {
    IntegratorConfig::default().rel_tol
}

fn default_abs_tol() -> f64 {
    IntegratorConfig::default().abs_tol
}

fn default_step_fraction() -> f64 {
    IntegratorConfig::default().step_fraction
}

fn default_n_samples() -> usize {
    IntegratorConfig::default().n_samples
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            max_step: None,
            step_fraction: default_step_fraction(),
            n_samples: default_n_samples(),
        }
    }
}

impl IntegratorSettings {
    pub fn to_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            step_fraction: self.step_fraction,
            n_samples: self.n_samples,
        }
    }
}

/// One requested probe; unset fields fall back to per-tag defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    /// Verdict tag to check, e.g. `q1_linear_stable`.
    pub theorem_tag: String,
    /// Pass threshold on the measured deviation (stability) or the
    /// crossing level (escape).
    #[serde(default)]
    pub eps: Option<f64>,
    /// Size of the seeded deviation at `t0`, before the time weight.
    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub t1: Option<f64>,
    /// Deviation weight exponent; defaults to the exponent the verdict
    /// itself predicts.
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_ensemble() -> usize {
    8
}

fn default_seed() -> u64 {
    7
}

impl ProbeSettings {
    /// Probe for a verdict tag with every knob at its per-tag default.
    pub fn for_tag(tag: impl Into<String>) -> Self {
        ProbeSettings {
            theorem_tag: tag.into(),
            eps: None,
            delta0: None,
            t0: None,
            t1: None,
            nu: None,
            ensemble_size: default_ensemble(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSettings {
    #[serde(default = "default_sim_t0")]
    pub t0: f64,
    #[serde(default = "default_sim_t1")]
    pub t1: f64,
    #[serde(default = "default_r_init")]
    pub r_init: f64,
    #[serde(default)]
    pub phi_init: f64,
    #[serde(default = "one")]
    pub ensemble_size: usize,
    /// Radial spread of the ensemble around `r_init`.
    #[serde(default)]
    pub delta0: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Window for the amplitude decay fit; defaults to `[t0, t1]`.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// `"polar"` integrates the mode-table form; `"cartesian"` the
    /// closed-form planar field (builtin systems only). Default: the
    /// planar field when one exists.
    #[serde(default)]
    pub coordinates: Option<String>,
}

fn default_sim_t0() -> f64 {
    1e2
}

fn default_sim_t1() -> f64 {
    1e6
}

fn default_r_init() -> f64 {
    0.5
}

fn one() -> usize {
    1
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            t0: default_sim_t0(),
            t1: default_sim_t1(),
            r_init: default_r_init(),
            phi_init: 0.0,
            ensemble_size: one(),
            delta0: 0.0,
            seed: default_seed(),
            fit_window: None,
            coordinates: None,
        }
    }
}

/// System selection: a named builtin with parameters, or an inline
/// mode table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemChoice {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub inline: Option<InlineSpec>,
}

/// Inline system: frequency and phase-law coefficients plus graded
/// mode tables.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub q: u32,
    pub p: u32,
    /// Radial polynomial coefficients of the frequency, constant first.
    pub omega: Vec<f64>,
    /// Phase-law coefficients `s_0..s_q`.
    pub s: Vec<f64>,
    #[serde(default)]
    pub r0: Option<f64>,
    pub terms: Vec<InlineTerm>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineTerm {
    /// Decay order: the term carries the prefactor `t^(-k/q)`.
    pub k: usize,
    #[serde(default)]
    pub f_modes: Vec<InlineMode>,
    #[serde(default)]
    pub g_modes: Vec<InlineMode>,
}

/// One Fourier mode `e^{i(k1 phi + k2 S)}` with radial polynomial
/// coefficients; the conjugate mode is implied.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineMode {
    pub k1: i32,
    pub k2: i32,
    #[serde(default)]
    pub re_coeffs: Vec<f64>,
    #[serde(default)]
    pub im_coeffs: Vec<f64>,
}

/// A buildable system plus, for builtins, the closed-form planar field
/// it was derived from.
pub struct BuiltSystem {
    pub spec: SystemSpec,
    pub cartesian: Option<Box<dyn VectorField>>,
}

impl SystemChoice {
    pub fn build(&self, orders: &Orders) -> Result<BuiltSystem> {
        match (&self.builtin, &self.inline) {
            (Some(_), Some(_)) => Err(Error::Config {
                what: "system: give either builtin or inline, not both".into(),
            }),
            (None, None) => Err(Error::Config {
                what: "system: missing builtin name or inline table".into(),
            }),
            (Some(name), None) => build_builtin(name, &self.params, orders),
            (None, Some(inline)) => {
                if !self.params.is_empty() {
                    return Err(Error::Config {
                        what: "system.params applies to builtin systems only".into(),
                    });
                }
                Ok(BuiltSystem { spec: inline.to_spec(orders)?, cartesian: None })
            }
        }
    }
}

fn take(params: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

fn take_order(params: &mut BTreeMap<String, f64>, key: &str, default: u32) -> Result<u32> {
    let Some(v) = params.remove(key) else {
        return Ok(default);
    };
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::Config { what: format!("parameter '{key}' must be a non-negative integer, got {v}") })
    }
}

fn reject_unused(params: &BTreeMap<String, f64>, builtin: &str) -> Result<()> {
    if let Some(key) = params.keys().next() {
        return Err(Error::Config {
            what: format!("unknown parameter '{key}' for builtin '{builtin}'"),
        });
    }
    Ok(())
}

fn build_builtin(
    name: &str,
    params: &BTreeMap<String, f64>,
    orders: &Orders,
) -> Result<BuiltSystem> {
    let mut p = params.clone();
    match name {
        "ex0" => {
            let lambda = take(&mut p, "lambda", -1.0);
            let gamma0 = take(&mut p, "gamma0", 1.0);
            let gamma1 = take(&mut p, "gamma1", 1.0);
            let pexp = take_order(&mut p, "p", 3)?;
            reject_unused(&p, name)?;
            Ok(BuiltSystem {
                spec: systems::make_ex0(lambda, gamma0, gamma1, pexp),
                cartesian: Some(Box::new(systems::ex0_field(lambda, gamma0, gamma1, pexp))),
            })
        }
        "ex1" => {
            let h = take_order(&mut p, "h", 2)?;
            let pord = take_order(&mut p, "p", 3)?;
            let alpha0 = take(&mut p, "alpha0", 1.0);
            let alpha1 = take(&mut p, "alpha1", 1.0);
            let beta0 = take(&mut p, "beta0", -2.0);
            let beta1 = take(&mut p, "beta1", 1.0);
            let gamma0 = take(&mut p, "gamma0", 1.0);
            let gamma1 = take(&mut p, "gamma1", 1.0);
            let s2 = take(&mut p, "s2", 1.0);
            reject_unused(&p, name)?;
            Ok(BuiltSystem {
                spec: systems::make_ex1(h, pord, alpha0, alpha1, beta0, beta1, gamma0, gamma1, s2),
                cartesian: Some(Box::new(systems::ex1_field(
                    h, pord, alpha0, alpha1, beta0, beta1, gamma0, gamma1, s2,
                ))),
            })
        }
        "ex2" => {
            let n = take_order(&mut p, "n", 1)?;
            let d = take_order(&mut p, "d", 1)?;
            let pord = take_order(&mut p, "p", 3)?;
            let q = take_order(&mut p, "q", 3)?;
            let alpha0 = take(&mut p, "alpha0", -1.0);
            let alpha1 = take(&mut p, "alpha1", 1.0);
            let beta0 = take(&mut p, "beta0", 1.0);
            let beta1 = take(&mut p, "beta1", 1.0);
            let gamma0 = take(&mut p, "gamma0", 1.0);
            let gamma1 = take(&mut p, "gamma1", 1.0);
            reject_unused(&p, name)?;
            let order = orders.radial_trunc.max(4);
            let order = order + order % 2;
            Ok(BuiltSystem {
                spec: systems::make_ex2(
                    n, d, pord, q, alpha0, alpha1, beta0, beta1, gamma0, gamma1, order,
                )?,
                cartesian: Some(Box::new(systems::ex2_field(
                    n, d, pord, q, alpha0, alpha1, beta0, beta1, gamma0, gamma1,
                ))),
            })
        }
        other => Err(Error::Config {
            what: format!("unknown builtin system '{other}' (available: ex0, ex1, ex2)"),
        }),
    }
}

fn padded(coeffs: &[f64], trunc: usize, what: &str) -> Result<RadialSeries> {
    if coeffs.len() > trunc + 1 {
        return Err(Error::Config {
            what: format!(
                "{what}: {} radial coefficients exceed radial_trunc + 1 = {}",
                coeffs.len(),
                trunc + 1
            ),
        });
    }
    let mut c = coeffs.to_vec();
    c.resize(trunc + 1, 0.0);
    Ok(RadialSeries::from_coeffs(c))
}

fn modes_to_series(modes: &[InlineMode], trunc: usize, k1_bound: i32) -> Result<FtSeries> {
    let mut series = FtSeries::zero(trunc);
    for mode in modes {
        if mode.k1.abs() > k1_bound {
            return Err(Error::Config {
                what: format!("mode ({}, {}): |k1| exceeds k1_bound = {k1_bound}", mode.k1, mode.k2),
            });
        }
        let c = CSeries {
            re: padded(&mode.re_coeffs, trunc, "re_coeffs")?,
            im: padded(&mode.im_coeffs, trunc, "im_coeffs")?,
        };
        series.add_mode(mode.k1, mode.k2, &c);
    }
    Ok(series)
}

impl InlineSpec {
    pub fn to_spec(&self, orders: &Orders) -> Result<SystemSpec> {
        if self.q == 0 {
            return Err(Error::Config { what: "inline system: q must be at least 1".into() });
        }
        if self.s.len() != self.q as usize + 1 {
            return Err(Error::Config {
                what: format!(
                    "inline system: the phase law needs q + 1 = {} coefficients s_0..s_q",
                    self.q + 1
                ),
            });
        }
        if self.omega.is_empty() {
            return Err(Error::Config {
                what: "inline system: omega needs at least a constant coefficient".into(),
            });
        }
        let trunc = orders.radial_trunc;
        let omega = padded(&self.omega, trunc, "omega")?;
        let mut f_terms = EpsExpansion::new(self.q);
        let mut g_terms = EpsExpansion::new(self.q);
        for term in &self.terms {
            if term.k == 0 {
                return Err(Error::Config {
                    what: "inline system: perturbation orders start at 1".into(),
                });
            }
            if !term.f_modes.is_empty() {
                f_terms.insert(term.k, modes_to_series(&term.f_modes, trunc, orders.k1_bound)?);
            }
            if !term.g_modes.is_empty() {
                g_terms.insert(term.k, modes_to_series(&term.g_modes, trunc, orders.k1_bound)?);
            }
        }
        Ok(SystemSpec {
            id: self.id.clone().unwrap_or_else(|| "inline".into()),
            omega,
            q: self.q,
            p: self.p,
            f_terms,
            g_terms,
            phase: PhaseLaw::new(self.s.clone(), self.q),
            r0: self.r0.unwrap_or(1.0),
        })
    }
}

/// Edit one dotted path of a JSON document. Numeric segments index
/// arrays (which must already exist at that length); other segments
/// create objects as needed. The value is parsed as JSON and falls
/// back to a plain string.
pub fn apply_override(root: &mut serde_json::Value, entry: &str) -> Result<()> {
    use serde_json::{Map, Value};
    let Some((path, raw)) = entry.split_once('=') else {
        return Err(Error::Config { what: format!("override '{entry}' must look like key=value") });
    };
    if path.is_empty() {
        return Err(Error::Config { what: format!("override '{entry}' has an empty key") });
    }
    let leaf: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if node.is_array() {
            if let Ok(idx) = seg.parse::<usize>() {
                let items = node.as_array_mut().expect("checked array");
                if idx >= items.len() {
                    return Err(Error::Config {
                        what: format!("override '{path}': index {idx} is out of range"),
                    });
                }
                if last {
                    items[idx] = leaf;
                    return Ok(());
                }
                node = &mut items[idx];
                continue;
            }
        }
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let map = node.as_object_mut().expect("node was just made an object");
        if last {
            map.insert(seg.to_string(), leaf);
            return Ok(());
        }
        node = map.entry(seg.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

impl RunConfig {
    /// Assemble a configuration from an optional file, an optional
    /// builtin shorthand, and override entries, in that order.
    pub fn load(path: Option<&Path>, builtin: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut value: serde_json::Value = match path {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => serde_json::Value::Object(serde_json::Map::new()),
        };
        if let Some(name) = builtin {
            apply_override(&mut value, &format!("system.builtin={name}"))?;
        }
        for entry in overrides {
            apply_override(&mut value, entry)?;
        }
        if value.get("system").is_none() {
            return Err(Error::Config {
                what: "no system selected: pass --config FILE or --system NAME".into(),
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn overrides_reach_nested_and_indexed_fields() {
        let mut v = value(r#"{"probes": [{"theorem_tag": "q2_stable"}]}"#);
        apply_override(&mut v, "system.builtin=ex1").unwrap();
        apply_override(&mut v, "system.params.beta0=-1.5").unwrap();
        apply_override(&mut v, "orders.m=3").unwrap();
        apply_override(&mut v, "probes.0.eps=0.05").unwrap();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.orders.m, 3);
        assert_eq!(cfg.probes[0].eps, Some(0.05));
        assert_eq!(cfg.system.params["beta0"], -1.5);
        let built = cfg.system.build(&cfg.orders).unwrap();
        assert_eq!(built.spec.id, "ex1");
        assert!(built.cartesian.is_some());
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        let mut v = value("{}");
        assert!(matches!(apply_override(&mut v, "no_equals"), Err(Error::Config { .. })));
        assert!(matches!(apply_override(&mut v, "=3"), Err(Error::Config { .. })));
        let mut v = value(r#"{"probes": []}"#);
        assert!(matches!(apply_override(&mut v, "probes.0.eps=0.1"), Err(Error::Config { .. })));
    }

    #[test]
    fn unknown_builtins_and_parameters_are_rejected() {
        let orders = Orders::default();
        let bad_name = SystemChoice {
            builtin: Some("ex9".into()),
            params: BTreeMap::new(),
            inline: None,
        };
        assert!(matches!(bad_name.build(&orders), Err(Error::Config { .. })));
        let bad_param = SystemChoice {
            builtin: Some("ex0".into()),
            params: [("sigma".to_string(), 1.0)].into_iter().collect(),
            inline: None,
        };
        assert!(matches!(bad_param.build(&orders), Err(Error::Config { .. })));
        let bad_order = SystemChoice {
            builtin: Some("ex1".into()),
            params: [("h".to_string(), 2.5)].into_iter().collect(),
            inline: None,
        };
        assert!(matches!(bad_order.build(&orders), Err(Error::Config { .. })));
    }

    #[test]
    fn inline_spec_builds_a_validating_system() {
        let cfg: RunConfig = serde_json::from_value(value(
            r#"{
              "system": {"inline": {
                "q": 2, "p": 2,
                "omega": [1.0],
                "s": [1.4142135623730951, 0.0, 0.0],
                "terms": [{"k": 2, "f_modes": [{"k1": 0, "k2": 0, "re_coeffs": [-0.5]}]}]
              }}
            }"#,
        ))
        .unwrap();
        let built = cfg.system.build(&cfg.orders).unwrap();
        assert!(built.cartesian.is_none());
        built.spec.validate(tol::ZERO_COEFF).unwrap();
        assert_eq!(built.spec.f_terms.get(2).unwrap().mode_keys(), vec![(0, 0)]);
        assert_eq!(built.spec.omega.coeffs.len(), tol::RADIAL_TRUNC + 1);
    }

    #[test]
    fn inline_modes_respect_the_bounds() {
        let inline = InlineSpec {
            id: None,
            q: 2,
            p: 1,
            omega: vec![1.0],
            s: vec![1.5, 0.0, 0.0],
            r0: None,
            terms: vec![InlineTerm {
                k: 1,
                f_modes: vec![InlineMode { k1: 40, k2: 0, re_coeffs: vec![0.0, 1.0], im_coeffs: vec![] }],
                g_modes: vec![],
            }],
        };
        assert!(matches!(inline.to_spec(&Orders::default()), Err(Error::Config { .. })));
        let too_long = InlineSpec {
            terms: vec![InlineTerm {
                k: 1,
                f_modes: vec![InlineMode {
                    k1: 1,
                    k2: 0,
                    re_coeffs: vec![0.0; 40],
                    im_coeffs: vec![],
                }],
                g_modes: vec![],
            }],
            ..inline
        };
        assert!(matches!(too_long.to_spec(&Orders::default()), Err(Error::Config { .. })));
    }

    #[test]
    fn shorthand_loading_fills_in_the_system() {
        let cfg = RunConfig::load(None, Some("ex0"), &["system.params.lambda=-2".to_string()])
            .unwrap();
        assert_eq!(cfg.system.builtin.as_deref(), Some("ex0"));
        assert_eq!(cfg.system.params["lambda"], -2.0);
        assert!(RunConfig::load(None, None, &[]).is_err());
    }
}
