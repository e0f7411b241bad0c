//! Run configuration: JSON schema, defaults and validation.

use serde::Deserialize;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hypotheses::GrowthBound;
use crate::piecewise::PiecewiseScalar;
use crate::setvalued::{filippov_envelope, IntervalMap, SelectionKind, DELTA_SCHEDULE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Check,
    Window,
    Solve,
    Sweep,
    Certify,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Check => "check",
            Mode::Window => "window",
            Mode::Solve => "solve",
            Mode::Sweep => "sweep",
            Mode::Certify => "certify",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "check" => Ok(Mode::Check),
            "window" => Ok(Mode::Window),
            "solve" => Ok(Mode::Solve),
            "sweep" => Ok(Mode::Sweep),
            "certify" => Ok(Mode::Certify),
            other => Err(Error::Config(format!(
                "mode: unknown mode {other:?} (expected check|window|solve|sweep|certify)"
            ))),
        }
    }
}

/// A single parameter value or a sweep range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Scalar(f64),
    Range { lo: f64, hi: f64, count: usize },
}

impl LambdaSpec {
    pub fn samples(&self) -> Vec<f64> {
        match *self {
            LambdaSpec::Scalar(x) => vec![x],
            LambdaSpec::Range { lo, hi, count } => {
                if count <= 1 {
                    vec![lo]
                } else {
                    (0..count)
                        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                        .collect()
                }
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            LambdaSpec::Scalar(x) => (x, x),
            LambdaSpec::Range { lo, hi, .. } => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
}

fn default_n() -> usize {
    256
}
fn default_quad_order() -> usize {
    4
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { n: default_n(), quad_order: default_quad_order() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol_stat")]
    pub tol_stat: f64,
    #[serde(default = "default_tol_stat")]
    pub tol_weak: f64,
    #[serde(default = "default_sep_tol")]
    pub sep_tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_path_points")]
    pub path_points: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_tol_stat() -> f64 {
    1e-8
}
fn default_sep_tol() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    42
}
fn default_budget() -> usize {
    50
}
fn default_path_points() -> usize {
    17
}
fn default_max_iters() -> usize {
    200
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_stat: default_tol_stat(),
            tol_weak: default_tol_stat(),
            sep_tol: default_sep_tol(),
            seed: default_seed(),
            budget: default_budget(),
            path_points: default_path_points(),
            max_iters: default_max_iters(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<String> {
    vec!["json".into(), "csv".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out_dir(), formats: default_formats() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawReaction {
    /// Explicit interval map `[lo(t), hi(t)]`.
    Interval { lo: PiecewiseScalar, hi: PiecewiseScalar },
    /// A single-valued discontinuous right-hand side; convexified into an
    /// interval map by its one-sided envelopes.
    Discontinuous(PiecewiseScalar),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawSelection {
    Named(String),
    Custom { custom: PiecewiseScalar },
}

fn default_selection() -> RawSelection {
    RawSelection::Named("min".into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub alpha: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    a: f64,
    b: f64,
    p: PiecewiseScalar,
    q: PiecewiseScalar,
    reaction: RawReaction,
    #[serde(default = "default_selection")]
    selection: RawSelection,
    growth: GrowthConfig,
    c: f64,
    d: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    lambda: Option<LambdaSpec>,
    #[serde(default)]
    mesh: MeshConfig,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    output: OutputConfig,
}

/// A validated problem description.
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: f64,
    pub b: f64,
    pub p: PiecewiseScalar,
    pub q: PiecewiseScalar,
    pub map: IntervalMap,
    /// The raw discontinuous right-hand side, when the reaction came in
    /// that form (switches the hypothesis check to the dedicated route).
    pub discontinuous: Option<PiecewiseScalar>,
    pub selection: SelectionKind,
    pub growth: GrowthBound,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub mode: Option<Mode>,
    pub lambda: Option<LambdaSpec>,
    pub mesh: MeshConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parse and validate a config document. Error messages carry the
    /// JSON path (or line/column for syntax errors) of the offending
    /// field.
    pub fn from_json(src: &str) -> Result<RunConfig> {
        let raw: RawConfig = serde_json::from_str(src).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        let rp = raw.problem;
        if !rp.a.is_finite() || !rp.b.is_finite() || rp.b <= rp.a {
            return Err(Error::Config(format!(
                "problem.a/problem.b: requires a < b, got a = {}, b = {}",
                rp.a, rp.b
            )));
        }
        if !(rp.c > 0.0 && rp.c < rp.d) {
            return Err(Error::Config(format!(
                "problem.c: requires 0 < c < d, got c = {}, d = {}",
                rp.c, rp.d
            )));
        }
        let growth = GrowthBound::new(rp.growth.alpha, rp.growth.s)
            .map_err(|e| Error::Config(format!("problem.growth: {e}")))?;
        let (map, discontinuous) = match rp.reaction {
            RawReaction::Interval { lo, hi } => (
                IntervalMap::new(lo, hi)
                    .map_err(|e| Error::Config(format!("problem.reaction.interval: {e}")))?,
                None,
            ),
            RawReaction::Discontinuous(g) => {
                let env = filippov_envelope(&g, &DELTA_SCHEDULE).map_err(|e| {
                    Error::Config(format!("problem.reaction.discontinuous: {e}"))
                })?;
                (env, Some(g))
            }
        };
        let selection = match rp.selection {
            RawSelection::Named(name) => match name.as_str() {
                "min" => SelectionKind::Min,
                "max" => SelectionKind::Max,
                "mid" => SelectionKind::Mid,
                "sign_switch" => SelectionKind::SignSwitch,
                other => {
                    return Err(Error::Config(format!(
                        "problem.selection: unknown selection {other:?} \
                         (expected min|max|mid|sign_switch or {{\"custom\": ...}})"
                    )))
                }
            },
            RawSelection::Custom { custom } => SelectionKind::Custom(custom),
        };
        if raw.mesh.n == 0 {
            return Err(Error::Config("mesh.n: requires at least one element".into()));
        }
        if !(1..=5).contains(&raw.mesh.quad_order) {
            return Err(Error::Config(format!(
                "mesh.quad_order: requires 1..=5, got {}",
                raw.mesh.quad_order
            )));
        }
        if let Some(LambdaSpec::Range { lo, hi, count }) = &raw.lambda {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || *count == 0 {
                return Err(Error::Config(format!(
                    "lambda: requires finite lo <= hi and count >= 1, got \
                     lo = {lo}, hi = {hi}, count = {count}"
                )));
            }
        }
        if let Some(LambdaSpec::Scalar(x)) = &raw.lambda {
            if !x.is_finite() || *x <= 0.0 {
                return Err(Error::Config(format!("lambda: requires lambda > 0, got {x}")));
            }
        }
        let mode = match raw.mode {
            Some(m) => Some(m.parse::<Mode>()?),
            None => None,
        };
        Ok(RunConfig {
            problem: Problem {
                a: rp.a,
                b: rp.b,
                p: rp.p,
                q: rp.q,
                map,
                discontinuous,
                selection,
                growth,
                c: rp.c,
                d: rp.d,
            },
            mode,
            lambda: raw.lambda,
            mesh: raw.mesh,
            solver: raw.solver,
            output: raw.output,
        })
    }
}
