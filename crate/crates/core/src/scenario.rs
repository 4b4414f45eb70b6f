//! Scenario files and table output.
//!
//! A scenario is a TOML document naming one quantity to compute. Validation
//! collects every problem before anything runs; execution is deterministic, so
//! the same scenario always renders to the same bytes.
//!
//! ```toml
//! quantity = "shutter-prob"
//! r = 0.1
//! s = 20
//! delta = 0
//! condition = "adt >= 120"
//!
//! [input]
//! kind = "uniform-fixed-sum"
//! si = 200
//!
//! [detector]
//! model = "gaussian"
//! sigma = 1.6666666667
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition::{Condition, EvalMode, Params};
use crate::detectors::{noisy_filtered_state, purity, DetectorModel};
use crate::distribution::{Distribution, Heralded};
use crate::filter::{condition_probability, FilterError, FilterSettings, MeasurementOutcome};
use crate::fock::{SumDiff, TwoModeState};
use crate::interference::{hom_distribution, threshold_probability};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    State(#[from] crate::fock::StateError),
}

impl ScenarioError {
    /// Validation problems (exit status 1) versus runtime failures (2).
    pub fn is_validation(&self) -> bool {
        matches!(self, ScenarioError::Io { .. } | ScenarioError::Invalid(_))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// `fock`, `uniform-fixed-sum`, `uniform-range` or `file`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub si: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub di: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_lo: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hi: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    /// `ideal`, `binomial` or `gaussian`.
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub si_min: i64,
    pub si_max: i64,
    pub points: i64,
    /// `fixed` (use `s`) or `proportional` (`S = r · S_i`, adjusted to parity).
    #[serde(default = "default_s_rule")]
    pub s_rule: String,
    /// For `uniform-range` inputs: the shell range is `[(1-range) S_i, (1+range) S_i]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    /// Detector models evaluated at every point; defaults to `[detector]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detectors: Vec<DetectorSpec>,
}

fn default_s_rule() -> String {
    "fixed".to_owned()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// `hom-dist`, `cond-dist`, `shutter-prob`, `purity` or `purity-sweep`.
    #[serde(default)]
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    /// `strict` (default) or `clamp`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shutter_threshold: Option<f64>,
    /// `hom-dist` only: also report `P(|Δ| ≥ threshold)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<i64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub condition_params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    HomDist,
    CondDist,
    ShutterProb,
    Purity,
    PuritySweep,
}

impl Quantity {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "hom-dist" => Quantity::HomDist,
            "cond-dist" => Quantity::CondDist,
            "shutter-prob" => Quantity::ShutterProb,
            "purity" => Quantity::Purity,
            "purity-sweep" => Quantity::PuritySweep,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Where a validated scenario takes its input from.
#[derive(Clone, Debug)]
enum InputSource {
    Fixed(TwoModeState),
    /// Rebuilt for each sweep point.
    Swept { kind: SweptKind },
}

#[derive(Clone, Copy, Debug)]
enum SweptKind {
    FixedSum,
    Range(f64),
}

/// A scenario that passed validation.
#[derive(Clone, Debug)]
pub struct Plan {
    scenario: Scenario,
    quantity: Quantity,
    format: Format,
    fock: Option<SumDiff>,
    input: Option<InputSource>,
    settings: Option<FilterSettings>,
    outcome: Option<MeasurementOutcome>,
    outcome_sum: Option<u32>,
    detectors: Vec<(String, DetectorModel)>,
    threshold: Option<u32>,
    sweep: Option<(Vec<u32>, bool)>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Invalid(vec![format!("scenario: {}", e.message())]))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let mut scenario = Self::from_toml(&text)?;
        // state files are resolved relative to the scenario
        if let Some(input) = scenario.input.as_mut() {
            if let Some(p) = input.path.as_mut() {
                let candidate = Path::new(p.as_str());
                if candidate.is_relative() {
                    if let Some(dir) = path.parent() {
                        *p = dir.join(candidate).to_string_lossy().into_owned();
                    }
                }
            }
        }
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    /// Every violated constraint, in a stable order.
    pub fn diagnostics(&self) -> Vec<String> {
        match self.plan() {
            Ok(_) => Vec::new(),
            Err(ScenarioError::Invalid(list)) => list,
            Err(other) => vec![other.to_string()],
        }
    }

    pub fn plan(&self) -> Result<Plan, ScenarioError> {
        let mut errors = Vec::new();
        let quantity = Quantity::parse(&self.quantity);
        if quantity.is_none() {
            errors.push(format!(
                "quantity: unknown quantity {:?} (expected hom-dist, cond-dist, shutter-prob, purity or purity-sweep)",
                self.quantity
            ));
        }
        let format = match self.format.as_deref() {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => {
                errors.push(format!("format: unknown format {other:?} (expected csv or json)"));
                Format::Csv
            }
        };

        let needs_filter = !matches!(quantity, Some(Quantity::HomDist) | None);
        let sweeping = quantity == Some(Quantity::PuritySweep);

        // reflectivity
        let r = match self.r {
            Some(r) if r > 0.0 && r < 1.0 => Some(r),
            Some(_) => {
                errors.push("r: reflectivity out of (0,1)".to_owned());
                None
            }
            None if needs_filter => {
                errors.push("r: reflectivity is required".to_owned());
                None
            }
            None => None,
        };

        // measured outcome
        let proportional = self.sweep.as_ref().is_some_and(|s| s.s_rule == "proportional");
        let mut outcome = None;
        let mut outcome_sum = None;
        if needs_filter {
            let delta = if sweeping { Some(self.delta.unwrap_or(0)) } else { self.delta };
            match (self.s, delta) {
                (Some(s), _) if s < 0 => errors.push("s: measured photon number must be non-negative".to_owned()),
                (Some(s), Some(d)) => match MeasurementOutcome::new(s, d) {
                    Ok(o) => outcome = Some(o),
                    Err(_) if d.abs() > s => errors.push(format!("delta: |Δ| = {} exceeds S = {s}", d.abs())),
                    Err(_) => errors.push(format!("s/delta: S and Δ parity mismatch ({s}, {d})")),
                },
                (Some(s), None) if quantity == Some(Quantity::ShutterProb) => outcome_sum = Some(s as u32),
                (Some(_), None) => errors.push("delta: measured difference Δ is required".to_owned()),
                (None, _) if sweeping && proportional => {}
                (None, _) => errors.push("s: measured photon number S is required".to_owned()),
            }
        }

        // condition
        let mut settings = None;
        let condition = match &self.condition {
            Some(text) => match Condition::parse(text) {
                Ok(c) => Some(c),
                Err(e) => {
                    errors.push(format!("condition: {e}"));
                    None
                }
            },
            None => Some(Condition::always_open()),
        };
        if let Some(c) = &condition {
            if let Err(e) = c.check_bound(&self.condition_params) {
                errors.push(format!("condition_params: {e}"));
            }
        }
        let mode = match self.condition_mode.as_deref() {
            None | Some("strict") => EvalMode::Strict,
            Some("clamp") => EvalMode::Clamp,
            Some(other) => {
                errors.push(format!("condition_mode: unknown mode {other:?} (expected strict or clamp)"));
                EvalMode::Strict
            }
        };
        let threshold = self.shutter_threshold.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&threshold) {
            errors.push("shutter_threshold: probability out of [0,1]".to_owned());
        }
        if let (Some(r), Some(c)) = (r, condition.clone()) {
            let params: Params = self.condition_params.clone();
            settings = FilterSettings::new(r)
                .and_then(|s| s.with_condition(c, params))
                .and_then(|s| s.with_shutter_threshold(threshold.clamp(0.0, 1.0)))
                .map(|s| s.with_eval_mode(mode))
                .ok();
        }

        // detectors
        let mut detectors = Vec::new();
        let specs: Vec<&DetectorSpec> = match &self.sweep {
            Some(sweep) if sweeping && !sweep.detectors.is_empty() => sweep.detectors.iter().collect(),
            _ => self.detector.iter().collect(),
        };
        if specs.is_empty() {
            detectors.push(("ideal".to_owned(), DetectorModel::Ideal));
        }
        for (i, spec) in specs.iter().enumerate() {
            let field = if sweeping && self.sweep.as_ref().is_some_and(|s| !s.detectors.is_empty()) {
                format!("sweep.detectors[{i}]")
            } else {
                "detector".to_owned()
            };
            match detector_model(spec) {
                Ok(m) => detectors.push((detector_label(&m), m)),
                Err(e) => errors.push(format!("{field}: {e}")),
            }
        }
        if quantity == Some(Quantity::HomDist) && self.detector.is_some() {
            errors.push("detector: hom-dist describes ideal interference; remove [detector]".to_owned());
        }

        // input
        let mut fock = None;
        let mut input = None;
        match &self.input {
            None => errors.push("input: [input] section is required".to_owned()),
            Some(spec) => {
                if quantity == Some(Quantity::HomDist) {
                    if spec.kind != "fock" {
                        errors.push("input.kind: hom-dist needs a fock input".to_owned());
                    }
                    fock = fock_label(spec, &mut errors);
                } else if sweeping {
                    input = swept_input(spec, self.sweep.as_ref(), &mut errors);
                } else {
                    input = fixed_input(spec, &mut errors).map(InputSource::Fixed);
                }
            }
        }

        let hom_threshold = match self.threshold {
            Some(t) if t < 0 => {
                errors.push("threshold: must be non-negative".to_owned());
                None
            }
            Some(t) => Some(t as u32),
            None => None,
        };

        // sweep
        let mut sweep = None;
        if sweeping {
            match &self.sweep {
                None => errors.push("sweep: [sweep] section is required for purity-sweep".to_owned()),
                Some(spec) => {
                    let mut ok = true;
                    if spec.si_min < 0 || spec.si_max < spec.si_min {
                        errors.push("sweep: need 0 ≤ si_min ≤ si_max".to_owned());
                        ok = false;
                    }
                    if spec.points < 1 {
                        errors.push("sweep.points: need at least one point".to_owned());
                        ok = false;
                    }
                    if spec.s_rule != "fixed" && spec.s_rule != "proportional" {
                        errors.push(format!(
                            "sweep.s_rule: unknown rule {:?} (expected fixed or proportional)",
                            spec.s_rule
                        ));
                        ok = false;
                    }
                    if proportional && self.s.is_some() {
                        errors.push("s: not used with s_rule = \"proportional\"; remove it".to_owned());
                    }
                    if ok {
                        sweep = Some((sweep_points(spec.si_min as u32, spec.si_max as u32, spec.points as u32), proportional));
                    }
                }
            }
        }

        if !errors.is_empty() {
            return Err(ScenarioError::Invalid(errors));
        }
        Ok(Plan {
            scenario: self.clone(),
            quantity: quantity.expect("validated"),
            format,
            fock,
            input,
            settings,
            outcome,
            outcome_sum,
            detectors,
            threshold: hom_threshold,
            sweep,
        })
    }
}

fn detector_model(spec: &DetectorSpec) -> Result<DetectorModel, String> {
    let model = match spec.model.as_str() {
        "ideal" => {
            if spec.eta.is_some() || spec.sigma.is_some() {
                return Err("ideal detectors take no eta or sigma".to_owned());
            }
            DetectorModel::Ideal
        }
        "binomial" => match (spec.eta, spec.sigma) {
            (Some(eta), None) => DetectorModel::Binomial { eta },
            (None, _) => return Err("binomial model needs eta".to_owned()),
            (Some(_), Some(_)) => return Err("binomial model takes eta, not sigma".to_owned()),
        },
        "gaussian" => match (spec.sigma, spec.eta) {
            (Some(sigma), None) => DetectorModel::Gaussian { sigma },
            (None, _) => return Err("gaussian model needs sigma".to_owned()),
            (Some(_), Some(_)) => return Err("gaussian model takes sigma, not eta".to_owned()),
        },
        other => return Err(format!("unknown detector model {other:?} (expected ideal, binomial or gaussian)")),
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

fn detector_label(model: &DetectorModel) -> String {
    match *model {
        DetectorModel::Ideal => "ideal".to_owned(),
        DetectorModel::Binomial { eta } => format!("binomial(eta={})", format_number(eta)),
        DetectorModel::Gaussian { sigma } => format!("gaussian(sigma={})", format_number(sigma)),
    }
}

fn fock_label(spec: &InputSpec, errors: &mut Vec<String>) -> Option<SumDiff> {
    match (spec.si, spec.di) {
        (Some(si), Some(di)) => match SumDiff::new(si, di) {
            Ok(label) => Some(label),
            Err(_) if si < 0 => {
                errors.push("input.si: photon number must be non-negative".to_owned());
                None
            }
            Err(_) if di.abs() > si => {
                errors.push(format!("input.di: |Δ_i| = {} exceeds S_i = {si}", di.abs()));
                None
            }
            Err(_) => {
                errors.push(format!("input: S_i and Δ_i parity mismatch ({si}, {di})"));
                None
            }
        },
        _ => {
            errors.push("input: fock input needs si and di".to_owned());
            None
        }
    }
}

fn fixed_input(spec: &InputSpec, errors: &mut Vec<String>) -> Option<TwoModeState> {
    match spec.kind.as_str() {
        "fock" => fock_label(spec, errors).map(|label| {
            let (n, m) = label.counts();
            TwoModeState::fock(n, m)
        }),
        "uniform-fixed-sum" => match spec.si {
            Some(si) if si >= 0 => Some(TwoModeState::uniform_fixed_sum(si as u32)),
            Some(_) => {
                errors.push("input.si: photon number must be non-negative".to_owned());
                None
            }
            None => {
                errors.push("input.si: required for uniform-fixed-sum".to_owned());
                None
            }
        },
        "uniform-range" => match (spec.s_lo, spec.s_hi) {
            (Some(lo), Some(hi)) if lo >= 0 && hi >= lo => {
                TwoModeState::uniform_range(lo as u32, hi as u32).ok()
            }
            (Some(_), Some(_)) => {
                errors.push("input: need 0 ≤ s_lo ≤ s_hi".to_owned());
                None
            }
            _ => {
                errors.push("input: uniform-range needs s_lo and s_hi".to_owned());
                None
            }
        },
        "file" => match &spec.path {
            Some(path) => match TwoModeState::read_json(Path::new(path)) {
                Ok(state) => match state.ensure_normalized() {
                    Ok(()) => Some(state),
                    Err(e) => {
                        errors.push(format!("input.path: {e}"));
                        None
                    }
                },
                Err(e) => {
                    errors.push(format!("input.path: {e}"));
                    None
                }
            },
            None => {
                errors.push("input.path: required for file input".to_owned());
                None
            }
        },
        other => {
            errors.push(format!(
                "input.kind: unknown kind {other:?} (expected fock, uniform-fixed-sum, uniform-range or file)"
            ));
            None
        }
    }
}

fn swept_input(spec: &InputSpec, sweep: Option<&SweepSpec>, errors: &mut Vec<String>) -> Option<InputSource> {
    match spec.kind.as_str() {
        "uniform-fixed-sum" => Some(InputSource::Swept { kind: SweptKind::FixedSum }),
        "uniform-range" => match sweep.and_then(|s| s.range) {
            Some(range) if (0.0..1.0).contains(&range) => Some(InputSource::Swept {
                kind: SweptKind::Range(range),
            }),
            Some(_) => {
                errors.push("sweep.range: fraction out of [0,1)".to_owned());
                None
            }
            None => {
                errors.push("sweep.range: required for uniform-range sweeps".to_owned());
                None
            }
        },
        other => {
            errors.push(format!(
                "input.kind: purity-sweep needs uniform-fixed-sum or uniform-range, got {other:?}"
            ));
            None
        }
    }
}

/// `points` integer photon numbers evenly spaced over `[lo, hi]`.
fn sweep_points(lo: u32, hi: u32, points: u32) -> Vec<u32> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| {
            let x = f64::from(lo) + f64::from(hi - lo) * f64::from(i) / f64::from(points - 1);
            x.round() as u32
        })
        .collect()
}

/// A single cell of an output table.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format_number(*v),
            Cell::Text(t) if t.contains([',', '"', '\n']) => format!("\"{}\"", t.replace('"', "\"\"")),
            Cell::Text(t) => t.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => (*v).into(),
            Cell::Num(v) => {
                let rounded: f64 = format_number(*v).parse().unwrap_or(*v);
                serde_json::Number::from_f64(rounded).map_or(serde_json::Value::Null, Into::into)
            }
            Cell::Text(t) => t.clone().into(),
            Cell::Bool(b) => (*b).into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

/// Result of running a scenario: a summary block and one table.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub summary: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|row| &row[idx]).collect())
    }

    pub fn summary_value(&self, key: &str) -> Option<&Cell> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

/// 12 significant digits; scientific notation outside `[1e-4, 1e6)`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".to_owned() } else if x > 0.0 { "inf".to_owned() } else { "-inf".to_owned() };
    }
    let magnitude = x.abs();
    if !(1e-4..1e6).contains(&magnitude) {
        let text = format!("{x:.11e}");
        let (mantissa, exponent) = text.split_once('e').expect("exponent present");
        return format!("{}e{exponent}", trim_fraction(mantissa));
    }
    let digits = 11 - magnitude.log10().floor() as i32;
    let text = format!("{x:.*}", digits.max(0) as usize);
    let trimmed = trim_fraction(&text);
    if trimmed.parse::<f64>().map_or(false, |v| v.abs() >= 1e6) {
        return format_number_scientific(x);
    }
    trimmed
}

fn format_number_scientific(x: f64) -> String {
    let text = format!("{x:.11e}");
    let (mantissa, exponent) = text.split_once('e').expect("exponent present");
    format!("{}e{exponent}", trim_fraction(mantissa))
}

fn trim_fraction(text: &str) -> String {
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        text.to_owned()
    }
}

fn outcome_status<T>(h: &Heralded<T>) -> Cell {
    Cell::Text(if h.is_impossible() { "impossible" } else { "observed" }.to_owned())
}

impl Plan {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn execute(&self) -> Result<Report, ScenarioError> {
        match self.quantity {
            Quantity::HomDist => self.hom_dist(),
            Quantity::CondDist => self.cond_dist(),
            Quantity::ShutterProb => self.shutter_prob(),
            Quantity::Purity => self.purity(),
            Quantity::PuritySweep => self.purity_sweep(),
        }
    }

    /// Runs and renders in the planned format.
    pub fn render(&self) -> Result<String, ScenarioError> {
        let report = self.execute()?;
        Ok(match self.format {
            Format::Csv => render_csv(&self.scenario, &report),
            Format::Json => render_json(&self.scenario, &report),
        })
    }

    fn fixed_state(&self) -> &TwoModeState {
        match &self.input {
            Some(InputSource::Fixed(state)) => state,
            _ => unreachable!("validated fixed input"),
        }
    }

    fn settings(&self) -> &FilterSettings {
        self.settings.as_ref().expect("validated settings")
    }

    fn single_detector(&self) -> &DetectorModel {
        &self.detectors[0].1
    }

    fn hom_dist(&self) -> Result<Report, ScenarioError> {
        let label = self.fock.expect("validated fock input");
        let dist = hom_distribution(label.sum, label.diff)?;
        let mut summary = vec![("total".to_owned(), Cell::Num(dist.total()))];
        if let Some(t) = self.threshold {
            summary.push((format!("p_abs_delta_ge_{t}"), Cell::Num(threshold_probability(&dist, t))));
        }
        Ok(Report {
            summary,
            columns: vec!["delta".into(), "probability".into()],
            rows: dist.iter().map(|(d, p)| vec![Cell::Int(d.into()), Cell::Num(p)]).collect(),
        })
    }

    /// Transmitted `(S_t, Δ_t)` distribution plus the pass probability, for a
    /// possibly noisy report.
    fn heralded_distribution(
        &self,
        outcome: MeasurementOutcome,
    ) -> Result<(Heralded<(Distribution<(u32, i32)>, f64)>, Option<f64>), ScenarioError> {
        let state = self.fixed_state();
        let settings = self.settings();
        let model = self.single_detector();
        let mixed = noisy_filtered_state(state, settings, outcome, model)?;
        let gamma = match mixed.value() {
            Some(m) if !matches!(model, DetectorModel::Ideal) => Some(purity(m)?),
            Some(_) => Some(1.0),
            None => None,
        };
        let result = match mixed {
            Heralded::Impossible => Heralded::Impossible,
            Heralded::Observed { probability, value } => {
                let pass = condition_probability(&value, settings)?;
                Heralded::Observed {
                    probability,
                    value: (value.sum_diff_distribution(), pass),
                }
            }
        };
        Ok((result, gamma))
    }

    fn cond_dist(&self) -> Result<Report, ScenarioError> {
        let outcome = self.outcome.expect("validated outcome");
        let (heralded, _) = self.heralded_distribution(outcome)?;
        let mut summary = vec![
            ("status".to_owned(), outcome_status(&heralded)),
            ("outcome_probability".to_owned(), Cell::Num(heralded.probability())),
        ];
        let mut rows = Vec::new();
        if let Some((dist, pass)) = heralded.value() {
            summary.push(("pass_probability".to_owned(), Cell::Num(*pass)));
            summary.push(("shutter_open".to_owned(), Cell::Bool(self.settings().shutter_opens(*pass))));
            for ((st, dt), p) in dist.iter() {
                let (n, m) = SumDiff { sum: st, diff: dt }.counts();
                let accepted = self
                    .settings()
                    .accepts(n, m)
                    .map_err(|e| ScenarioError::Filter(e.into()))?;
                rows.push(vec![Cell::Int(st.into()), Cell::Int(dt.into()), Cell::Num(p), Cell::Bool(accepted)]);
            }
        }
        Ok(Report {
            summary,
            columns: vec!["s_t".into(), "delta_t".into(), "probability".into(), "condition_met".into()],
            rows,
        })
    }

    fn shutter_prob(&self) -> Result<Report, ScenarioError> {
        let outcomes: Vec<MeasurementOutcome> = match (self.outcome, self.outcome_sum) {
            (Some(o), _) => vec![o],
            (None, Some(s)) => MeasurementOutcome::all_with_sum(s).collect(),
            (None, None) => unreachable!("validated outcome"),
        };
        let rows = outcomes
            .into_par_iter()
            .map(|o| {
                let (heralded, _) = self.heralded_distribution(o)?;
                let (pass, open) = match heralded.value() {
                    Some((_, pass)) => (Cell::Num(*pass), Cell::Bool(self.settings().shutter_opens(*pass))),
                    None => (Cell::Num(0.0), Cell::Bool(false)),
                };
                Ok(vec![
                    Cell::Int(o.sum().into()),
                    Cell::Int(o.diff().into()),
                    Cell::Num(heralded.probability()),
                    pass,
                    open,
                    outcome_status(&heralded),
                ])
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(Report {
            summary: vec![("detector".to_owned(), Cell::Text(self.detectors[0].0.clone()))],
            columns: ["s", "delta", "outcome_probability", "pass_probability", "shutter_open", "status"]
                .map(String::from)
                .to_vec(),
            rows,
        })
    }

    fn purity(&self) -> Result<Report, ScenarioError> {
        let outcome = self.outcome.expect("validated outcome");
        let (heralded, gamma) = self.heralded_distribution(outcome)?;
        Ok(Report {
            summary: Vec::new(),
            columns: ["s", "delta", "detector", "outcome_probability", "purity", "status"]
                .map(String::from)
                .to_vec(),
            rows: vec![vec![
                Cell::Int(outcome.sum().into()),
                Cell::Int(outcome.diff().into()),
                Cell::Text(self.detectors[0].0.clone()),
                Cell::Num(heralded.probability()),
                gamma.map_or(Cell::Empty, Cell::Num),
                outcome_status(&heralded),
            ]],
        })
    }

    fn purity_sweep(&self) -> Result<Report, ScenarioError> {
        let (points, proportional) = self.sweep.clone().expect("validated sweep");
        let kind = match &self.input {
            Some(InputSource::Swept { kind }) => *kind,
            _ => unreachable!("validated swept input"),
        };
        let settings = self.settings();
        let delta = self.scenario.delta.unwrap_or(0);
        let jobs: Vec<(usize, u32, usize)> = points
            .iter()
            .enumerate()
            .flat_map(|(i, &si)| (0..self.detectors.len()).map(move |d| (i, si, d)))
            .collect();
        let rows = jobs
            .into_par_iter()
            .map(|(index, si, d)| {
                let s = if proportional {
                    proportional_sum(settings.reflectivity(), si, delta)
                } else {
                    self.scenario.s.unwrap_or(0) as u32
                };
                let state = match kind {
                    SweptKind::FixedSum => TwoModeState::uniform_fixed_sum(si),
                    SweptKind::Range(range) => {
                        let lo = (f64::from(si) * (1.0 - range)).round() as u32;
                        let hi = (f64::from(si) * (1.0 + range)).round() as u32;
                        TwoModeState::uniform_range(lo, hi)?
                    }
                };
                let (label, model) = &self.detectors[d];
                let outcome = MeasurementOutcome::new(s.into(), delta)?;
                let mixed = noisy_filtered_state(&state, settings, outcome, model)?;
                let gamma = match mixed.value() {
                    Some(m) => Cell::Num(purity(m)?),
                    None => Cell::Empty,
                };
                Ok(vec![
                    Cell::Int(index as i64),
                    Cell::Int(si.into()),
                    Cell::Int(s.into()),
                    Cell::Int(delta),
                    Cell::Text(label.clone()),
                    Cell::Num(mixed.probability()),
                    gamma,
                    outcome_status(&mixed),
                ])
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(Report {
            summary: Vec::new(),
            columns: ["index", "si", "s", "delta", "detector", "outcome_probability", "purity", "status"]
                .map(String::from)
                .to_vec(),
            rows,
        })
    }
}

/// `round(r · S_i)`, moved up by one if needed to match the parity of `Δ`.
fn proportional_sum(r: f64, si: u32, delta: i64) -> u32 {
    let mut s = (r * f64::from(si)).round() as i64;
    if (s + delta).rem_euclid(2) != 0 {
        s += 1;
    }
    s.max(delta.abs()) as u32
}

fn metadata(scenario: &Scenario) -> String {
    scenario.to_toml()
}

pub fn render_csv(scenario: &Scenario, report: &Report) -> String {
    let mut out = String::new();
    for line in metadata(scenario).lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    for (key, value) in &report.summary {
        let _ = writeln!(out, "# result.{key} = {}", value.csv());
    }
    let _ = writeln!(out, "{}", report.columns.join(","));
    for row in &report.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn render_json(scenario: &Scenario, report: &Report) -> String {
    let summary: serde_json::Map<String, serde_json::Value> =
        report.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect();
    let rows: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|row| serde_json::Value::Array(row.iter().map(Cell::json).collect()))
        .collect();
    let doc = serde_json::json!({
        "scenario": scenario,
        "summary": summary,
        "columns": report.columns,
        "rows": rows,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    text
}
