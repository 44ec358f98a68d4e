//! Experiment configuration files.
//!
//! ```toml
//! [problem]
//! family = "lower_bound"   # lower_bound | piecewise | quadratic | perturbed_norm | power_quadratic | distillation
//! m = 16
//!
//! [[run]]
//! id = "pamoo"
//! algorithm = "PAMOO"
//! iterations = 256
//!
//! [output]
//! dir = "results/lower_bound"
//! ```

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use amoo_core::optimizers::{Algorithm, RunConfig};
use amoo_core::problems::{
    make_distillation_problem, make_power_quadratic_problem, DistillationConfig, LowerBoundProblem,
    PerturbedNormFamily, PiecewiseLinearFamily, PowerQuadraticConfig, Preset, QuadraticFamily,
};
use amoo_core::{Objective, ObjectiveSet, Point};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    LowerBound,
    Piecewise,
    Quadratic,
    PerturbedNorm,
    PowerQuadratic,
    Distillation,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::LowerBound,
        FamilyKind::Piecewise,
        FamilyKind::Quadratic,
        FamilyKind::PerturbedNorm,
        FamilyKind::PowerQuadratic,
        FamilyKind::Distillation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::LowerBound => "lower_bound",
            FamilyKind::Piecewise => "piecewise",
            FamilyKind::Quadratic => "quadratic",
            FamilyKind::PerturbedNorm => "perturbed_norm",
            FamilyKind::PowerQuadratic => "power_quadratic",
            FamilyKind::Distillation => "distillation",
        }
    }

    /// Parameter keys the family accepts, besides `family` and `fstar_offset`.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            FamilyKind::LowerBound => &["m", "n", "eps"],
            FamilyKind::Piecewise => &["n", "seed"],
            FamilyKind::Quadratic => &["m", "n", "null_dims", "seed"],
            FamilyKind::PerturbedNorm => &["m", "n", "eps", "seed"],
            FamilyKind::PowerQuadratic => &["preset", "output_dim", "seed"],
            FamilyKind::Distillation => &["preset", "seed"],
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FamilyKind::LowerBound => "f_i(x) = |x_i|, i < m, in R^n; equal-weight Polyak lower-bound instance",
            FamilyKind::Piecewise => "weighted L1, L-infinity and |a^T x| around a common center (m = 3)",
            FamilyKind::Quadratic => "aligned diagonal quadratics 1/2 x^T D_i x, last null_dims coordinates flat",
            FamilyKind::PerturbedNorm => "|x - c_i| with centers within eps of a common point",
            FamilyKind::PowerQuadratic => "power-quadratic losses of P1-P3 with d = x",
            FamilyKind::Distillation => "P1-P3 losses of a student network against a teacher, full data",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// At most `i64::MAX`, the largest TOML integer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_dims: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dim: Option<usize>,
    /// Added to every stored optimal value. For fault-injection tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fstar_offset: Option<f64>,
}

/// One `[[run]]` table: a run id, the algorithm options, and whether to
/// check the run against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub id: String,
    pub algorithm: Algorithm,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_on_epsilon: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ogd_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ew_optimal_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<bool>,
}

impl RunSpec {
    pub fn new(id: impl Into<String>, algorithm: Algorithm, iterations: usize) -> Self {
        RunSpec {
            id: id.into(),
            algorithm,
            iterations,
            epsilon: None,
            stop_on_epsilon: None,
            momentum: None,
            ogd_distance: None,
            gd_step: None,
            ew_optimal_value: None,
            learning_rate: None,
            check: None,
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            algorithm: self.algorithm,
            iterations: self.iterations,
            epsilon: self.epsilon.unwrap_or(0.0),
            momentum: self.momentum,
            ogd_distance: self.ogd_distance,
            gd_step: self.gd_step,
            stop_on_epsilon: self.stop_on_epsilon.unwrap_or(false),
            ew_optimal_value: self.ew_optimal_value,
            learning_rate: self.learning_rate.unwrap_or(1.0),
        }
    }

    pub fn checked(&self) -> bool {
        self.check.unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub json: bool,
    #[serde(default = "yes")]
    pub svg: bool,
    /// Worker threads for independent runs; `AMOO_THREADS` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir(), csv: true, json: true, svg: true, threads: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(rename = "run")]
    pub runs: Vec<RunSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A configuration error with a 1-based source position when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Position of the `nth` line whose trimmed text starts with `header`.
fn header_position(text: &str, header: &str, nth: usize) -> (usize, usize) {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with(header))
        .nth(nth)
        .map_or((1, 1), |(i, l)| (i + 1, l.len() - l.trim_start().len() + 1))
}

impl ExperimentConfig {
    /// Parses and validates a configuration.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| position(text, s.start));
            ConfigError { line, column, message: e.message().to_string() }
        })?;
        cfg.validate().map_err(|(header, nth, message)| {
            let (line, column) = header_position(text, header, nth);
            ConfigError { line, column, message }
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical serialization, in hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Errors carry the section header and its index for positioning.
    fn validate(&self) -> Result<(), (&'static str, usize, String)> {
        let p = &self.problem;
        let given: Vec<(&str, bool)> = vec![
            ("m", p.m.is_some()),
            ("n", p.n.is_some()),
            ("eps", p.eps.is_some()),
            ("seed", p.seed.is_some()),
            ("null_dims", p.null_dims.is_some()),
            ("preset", p.preset.is_some()),
            ("output_dim", p.output_dim.is_some()),
        ];
        for (key, present) in given {
            if present && !p.family.params().contains(&key) {
                return Err(("[problem]", 0, format!("`{key}` does not apply to family {}", p.family)));
            }
        }
        if let Some(o) = p.fstar_offset {
            if !o.is_finite() {
                return Err(("[problem]", 0, "fstar_offset must be finite".into()));
            }
        }
        if self.runs.is_empty() {
            return Err(("[problem]", 0, "at least one [[run]] is required".into()));
        }
        for (i, r) in self.runs.iter().enumerate() {
            if r.id.is_empty() || !r.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(("[[run]]", i, format!("run id {:?} must be nonempty [A-Za-z0-9_-]", r.id)));
            }
            if self.runs[..i].iter().any(|o| o.id == r.id) {
                return Err(("[[run]]", i, format!("duplicate run id {:?}", r.id)));
            }
            r.run_config().validate().map_err(|e| ("[[run]]", i, format!("run {:?}: {e}", r.id)))?;
        }
        if self.output.threads == Some(0) {
            return Err(("[output]", 0, "threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// An objective with its optimal value moved by a constant.
struct OffsetOptimum {
    inner: Arc<dyn Objective>,
    offset: f64,
}

impl Objective for OffsetOptimum {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.inner.gradient(x)
    }
    fn optimal_value(&self) -> f64 {
        self.inner.optimal_value() + self.offset
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        self.inner.lipschitz_bound()
    }
    fn smoothness_bound(&self) -> Option<f64> {
        self.inner.smoothness_bound()
    }
}

/// The objective set and start point a problem spec describes.
pub struct BuiltProblem {
    pub set: ObjectiveSet,
    pub x1: Point,
}

impl ProblemSpec {
    pub fn build(&self) -> amoo_core::Result<BuiltProblem> {
        let seed = self.seed.unwrap_or(0);
        let (set, x1) = match self.family {
            FamilyKind::LowerBound => {
                let m = self.m.unwrap_or(16);
                let p = LowerBoundProblem::new(m, self.n.unwrap_or(m), self.eps.unwrap_or(0.1))?;
                (p.objective_set(), p.start())
            }
            FamilyKind::Piecewise => {
                let n = self.n.unwrap_or(10);
                (PiecewiseLinearFamily::random(n, seed)?.objective_set(), Point::zeros(n))
            }
            FamilyKind::Quadratic => {
                let n = self.n.unwrap_or(10);
                let fam = QuadraticFamily::random_aligned(self.m.unwrap_or(3), n, self.null_dims.unwrap_or(2), seed)?;
                (fam.objective_set(), Point::new(vec![1.0; n])?)
            }
            FamilyKind::PerturbedNorm => {
                let n = self.n.unwrap_or(5);
                let fam = PerturbedNormFamily::random(self.m.unwrap_or(3), n, self.eps.unwrap_or(0.05), seed)?;
                (fam.objective_set(), Point::new(vec![2.0; n])?)
            }
            FamilyKind::PowerQuadratic => {
                let d_o = self.output_dim.unwrap_or(4);
                let cfg = PowerQuadraticConfig::preset(self.preset.unwrap_or(Preset::P1), d_o, seed);
                let common = common_shift(&cfg);
                let mut set = make_power_quadratic_problem(cfg)?;
                if let Some(s) = common {
                    let star = Point::new(vec![s; d_o])?;
                    set = set.with_witness(Arc::new(move |_| star.clone()));
                }
                (set, Point::new(vec![1.0; d_o])?)
            }
            FamilyKind::Distillation => {
                let preset = self.preset.unwrap_or(Preset::P1);
                let problem = make_distillation_problem(DistillationConfig::desk(seed))?;
                let d_o = problem.config.output_dim;
                let loss = PowerQuadraticConfig::preset(preset, d_o, seed);
                let mut set = problem.full_objectives(&loss, amoo_core::Exec::default())?;
                if common_shift(&loss) == Some(0.0) {
                    let teacher = Point::new(problem.teacher.clone())?;
                    set = set.with_witness(Arc::new(move |_| teacher.clone()));
                }
                (set, problem.start())
            }
        };
        let set = match self.fstar_offset {
            Some(offset) if offset != 0.0 => offset_optima(&set, offset)?,
            _ => set,
        };
        Ok(BuiltProblem { set, x1 })
    }
}

/// The shared shift when every loss is minimized at the same `d = s 1`.
fn common_shift(cfg: &PowerQuadraticConfig) -> Option<f64> {
    let s = *cfg.shifts.first()?;
    cfg.shifts.iter().all(|v| *v == s).then_some(s)
}

fn offset_optima(set: &ObjectiveSet, offset: f64) -> amoo_core::Result<ObjectiveSet> {
    let objectives = set
        .objectives()
        .iter()
        .map(|o| Arc::new(OffsetOptimum { inner: o.clone(), offset }) as Arc<dyn Objective>)
        .collect();
    let mut out = ObjectiveSet::new(objectives)?;
    if set.alignment_epsilon() > 0.0 {
        out = out.with_alignment_epsilon(set.alignment_epsilon())?;
    }
    if set.has_witness() {
        let orig = set.clone();
        out = out.with_witness(Arc::new(move |x| orig.witness(x).expect("witness present")));
    }
    Ok(out)
}
