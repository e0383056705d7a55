//! Batch jobs: a TOML description of paths, functions and tasks in, a JSON report out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::expr::{self, Expr, ParseError};
use crate::integrate::{self, IntegralResult, Integrand, IntegrationConfig, Method, QuadConfig, Tag};
use crate::intervals::DInterval;
use crate::numbers::{BiComplex, Complex, Hyperbolic};
use crate::paths::{ComponentPath, DPath};
use crate::props::{self, SuiteReport};

/// Default integration tolerance, overridable through `HYPERCURVE_TOL`.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_LEVELS: u32 = 24;
pub const DEFAULT_CASES: usize = 100;
/// Largest accepted `|∫ f - (F(β) - F(α))|` per component in an ftc-check.
pub const FTC_RESIDUAL_LIMIT: f64 = 1e-6;
/// Slack allowed above the bound in an ml-bound check.
pub const ML_SLACK: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum JobError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at `{key}`: {message}")]
    Schema { key: String, message: String },
    #[error("`{key}`: {source} in \"{text}\"")]
    Expr {
        key: String,
        text: String,
        #[source]
        source: ParseError,
    },
    #[error("`{key}` refers to undefined {what} '{name}'")]
    Undefined {
        key: String,
        what: &'static str,
        name: String,
    },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl ToString) -> JobError {
    JobError::Invalid {
        key: key.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<Tag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_center() -> String {
    "0".to_string()
}

fn default_turns() -> f64 {
    1.0
}

/// A named path. Bicomplex and hyperbolic constants are written in the expression language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PathDef {
    /// Straight segment over `[0, 1]_D`.
    Segment { from: String, to: String },
    /// Circle in each idempotent component over `[0, 2π turns]_D`.
    Bicircle {
        #[serde(default = "default_center")]
        center: String,
        radius: f64,
        #[serde(default = "default_turns")]
        turns: f64,
    },
    /// `gamma1` in the variable `t` and `gamma2` in `s`, on their own real domains.
    Expr {
        gamma1: String,
        gamma2: String,
        domain1: [f64; 2],
        domain2: [f64; 2],
    },
    /// Samples `[t, re, im]` for each component.
    Polyline {
        samples1: Vec<[f64; 3]>,
        samples2: Vec<[f64; 3]>,
    },
    /// `Γ(τ) = τ` on `[lo, hi]_D`.
    Identity { lo: String, hi: String },
}

impl PathDef {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PathDef::Segment { .. } => "segment",
            PathDef::Bicircle { .. } => "bicircle",
            PathDef::Expr { .. } => "expr",
            PathDef::Polyline { .. } => "polyline",
            PathDef::Identity { .. } => "identity",
        }
    }

    /// Expression-valued fields, keyed by field name.
    pub fn expressions(&self) -> Vec<(&'static str, &str)> {
        match self {
            PathDef::Segment { from, to } => vec![("from", from), ("to", to)],
            PathDef::Bicircle { center, .. } => vec![("center", center)],
            PathDef::Expr { gamma1, gamma2, .. } => vec![("gamma1", gamma1), ("gamma2", gamma2)],
            PathDef::Polyline { .. } => vec![],
            PathDef::Identity { lo, hi } => vec![("lo", lo), ("hi", hi)],
        }
    }

    /// Builds the path; `key` prefixes error locations.
    pub fn build(&self, key: &str) -> Result<DPath, JobError> {
        let field = |name: &str| format!("{key}.{name}");
        match self {
            PathDef::Segment { from, to } => Ok(DPath::segment(
                constant(&field("from"), from)?,
                constant(&field("to"), to)?,
            )),
            PathDef::Bicircle { center, radius, turns } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(invalid(field("radius"), "radius must be positive"));
                }
                if !(turns.is_finite() && *turns > 0.0) {
                    return Err(invalid(field("turns"), "turns must be positive"));
                }
                DPath::bicircle(constant(&field("center"), center)?, *radius, *turns)
                    .map_err(|e| invalid(key, e))
            }
            PathDef::Expr {
                gamma1,
                gamma2,
                domain1,
                domain2,
            } => {
                let g1 = ComponentPath::expression(
                    parse_at(&field("gamma1"), gamma1)?,
                    "t",
                    0,
                    (domain1[0], domain1[1]),
                )
                .map_err(|e| invalid(field("gamma1"), e))?;
                let g2 = ComponentPath::expression(
                    parse_at(&field("gamma2"), gamma2)?,
                    "s",
                    1,
                    (domain2[0], domain2[1]),
                )
                .map_err(|e| invalid(field("gamma2"), e))?;
                DPath::new(g1, g2).map_err(|e| invalid(key, e))
            }
            PathDef::Polyline { samples1, samples2 } => {
                let component = |name: &str, s: &[[f64; 3]]| {
                    ComponentPath::polyline(s.iter().map(|p| (p[0], Complex::new(p[1], p[2]))).collect())
                        .map_err(|e| invalid(field(name), e))
                };
                DPath::new(component("samples1", samples1)?, component("samples2", samples2)?)
                    .map_err(|e| invalid(key, e))
            }
            PathDef::Identity { lo, hi } => {
                let lo = hyperbolic(&field("lo"), lo)?;
                let hi = hyperbolic(&field("hi"), hi)?;
                let interval = DInterval::new(lo, hi).map_err(|e| invalid(key, e))?;
                Ok(DPath::identity(interval))
            }
        }
    }
}

/// A named product-type function of `z`: either one bicomplex expression `f`
/// or the two components `f1`, `f2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDef {
    #[serde(default, alias = "F", skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, alias = "F1", skip_serializing_if = "Option::is_none")]
    pub f1: Option<String>,
    #[serde(default, alias = "F2", skip_serializing_if = "Option::is_none")]
    pub f2: Option<String>,
}

impl FunctionDef {
    pub fn single(f: impl Into<String>) -> Self {
        Self {
            f: Some(f.into()),
            ..Self::default()
        }
    }

    pub fn expressions(&self) -> Vec<(&'static str, &str)> {
        let mut out = Vec::new();
        for (name, value) in [("f", &self.f), ("f1", &self.f1), ("f2", &self.f2)] {
            if let Some(v) = value {
                out.push((name, v.as_str()));
            }
        }
        out
    }

    pub fn build(&self, key: &str) -> Result<Integrand, JobError> {
        let field = |name: &str| format!("{key}.{name}");
        match (&self.f, &self.f1, &self.f2) {
            (Some(f), None, None) => {
                Integrand::from_expr(&parse_at(&field("f"), f)?, "z").map_err(|e| invalid(field("f"), e))
            }
            (None, Some(f1), Some(f2)) => {
                let e1 = parse_at(&field("f1"), f1)?;
                let e2 = parse_at(&field("f2"), f2)?;
                Integrand::from_component_exprs(&e1, &e2, "z").map_err(|e| invalid(key, e))
            }
            _ => Err(invalid(key, "give either `f` or both `f1` and `f2`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Variation,
    Length,
    Integrate,
    LineIntegral,
    ArclengthIntegral,
    FtcCheck,
    MlBound,
    PropsCheck,
}

impl TaskKind {
    fn name(self) -> &'static str {
        match self {
            TaskKind::Variation => "variation",
            TaskKind::Length => "length",
            TaskKind::Integrate => "integrate",
            TaskKind::LineIntegral => "line-integral",
            TaskKind::ArclengthIntegral => "arclength-integral",
            TaskKind::FtcCheck => "ftc-check",
            TaskKind::MlBound => "ml-bound",
            TaskKind::PropsCheck => "props-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Direct,
    Componentwise,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<Tag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    #[serde(default)]
    pub config: ConfigDef,
    #[serde(default)]
    pub paths: BTreeMap<String, PathDef>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionDef>,
    #[serde(default)]
    pub tasks: Vec<TaskDef>,
}

impl JobSpec {
    pub fn from_toml(text: &str) -> Result<Self, JobError> {
        let de = toml::Deserializer::parse(text).map_err(|e| JobError::Schema {
            key: "<document>".into(),
            message: e.to_string().trim_end().to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| JobError::Schema {
            key: e.path().to_string(),
            message: e.inner().to_string().trim_end().to_string(),
        })
    }
}

fn parse_at(key: &str, text: &str) -> Result<Expr, JobError> {
    expr::parse(text).map_err(|source| JobError::Expr {
        key: key.to_string(),
        text: text.to_string(),
        source,
    })
}

/// Evaluates a variable-free expression.
pub fn constant(key: &str, text: &str) -> Result<BiComplex, JobError> {
    let e = parse_at(key, text)?;
    if let Some(v) = e.variables().first() {
        return Err(invalid(key, format!("constant expected, found variable '{v}'")));
    }
    expr::eval_with(&e, &|_: &str| None).map_err(|err| invalid(key, err))
}

fn hyperbolic(key: &str, text: &str) -> Result<Hyperbolic, JobError> {
    let z = constant(key, text)?;
    if z.w1.im != 0.0 || z.w2.im != 0.0 {
        return Err(invalid(key, format!("'{text}' is not a hyperbolic number")));
    }
    Ok(Hyperbolic::new(z.w1.re, z.w2.re))
}

/// Options that come from the command line or the environment.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Seed for property checks; overrides `[config].seed`.
    pub seed: Option<u64>,
    /// Run independent tasks concurrently.
    pub parallel: bool,
    /// Default tolerance when neither the task nor `[config]` sets one.
    pub env_tol: Option<f64>,
}

impl RunOptions {
    /// Reads `HYPERCURVE_TOL`.
    pub fn from_env() -> Result<Self, JobError> {
        let env_tol = match std::env::var("HYPERCURVE_TOL") {
            Ok(v) => Some(
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|t| t.is_finite() && *t > 0.0)
                    .ok_or_else(|| invalid("HYPERCURVE_TOL", format!("'{v}' is not a positive number")))?,
            ),
            Err(_) => None,
        };
        Ok(Self {
            env_tol,
            ..Self::default()
        })
    }
}

struct Settings {
    cfg: IntegrationConfig,
    quad: QuadConfig,
    seed: u64,
    samples: Option<usize>,
    method: Option<MethodName>,
}

struct Compiled<'a> {
    def: &'a TaskDef,
    id: String,
    path: Option<(&'a str, &'a PathDef, DPath)>,
    function: Option<(&'a str, &'a FunctionDef, Integrand)>,
    primitive: Option<(&'a str, &'a FunctionDef, Integrand)>,
    settings: Settings,
}

fn compile<'a>(spec: &'a JobSpec, opts: &RunOptions) -> Result<Vec<Compiled<'a>>, JobError> {
    let mut paths = BTreeMap::new();
    for (name, def) in &spec.paths {
        paths.insert(name.as_str(), def.build(&format!("paths.{name}"))?);
    }
    let mut functions = BTreeMap::new();
    for (name, def) in &spec.functions {
        functions.insert(name.as_str(), def.build(&format!("functions.{name}"))?);
    }
    let c = &spec.config;
    let mut out = Vec::with_capacity(spec.tasks.len());
    for (index, task) in spec.tasks.iter().enumerate() {
        let key = format!("tasks[{index}]");
        let field = |name: &str| format!("{key}.{name}");
        let require = |name: &str, value: &'a Option<String>| -> Result<&'a str, JobError> {
            value
                .as_deref()
                .ok_or_else(|| invalid(field(name), format!("required by {} tasks", task.kind.name())))
        };
        let lookup_path = |name: &'a str| {
            let (stored, def) = spec.paths.get_key_value(name).ok_or_else(|| JobError::Undefined {
                key: field("path"),
                what: "path",
                name: name.to_string(),
            })?;
            Ok::<_, JobError>((stored.as_str(), def, paths[name].clone()))
        };
        let lookup_fn = |which: &str, name: &'a str| {
            let (stored, def) = spec.functions.get_key_value(name).ok_or_else(|| JobError::Undefined {
                key: field(which),
                what: "function",
                name: name.to_string(),
            })?;
            Ok::<_, JobError>((stored.as_str(), def, functions[name].clone()))
        };
        let needs_path = task.kind != TaskKind::PropsCheck;
        let needs_function = !matches!(
            task.kind,
            TaskKind::Variation | TaskKind::Length | TaskKind::PropsCheck
        );
        let path = if needs_path {
            Some(lookup_path(require("path", &task.path)?)?)
        } else {
            None
        };
        let function = if needs_function {
            Some(lookup_fn("function", require("function", &task.function)?)?)
        } else {
            None
        };
        let primitive = if task.kind == TaskKind::FtcCheck {
            Some(lookup_fn("primitive", require("primitive", &task.primitive)?)?)
        } else {
            None
        };
        if task.kind == TaskKind::PropsCheck {
            let suite = require("suite", &task.suite)?;
            props::check_suite_name(suite).map_err(|e| invalid(field("suite"), e))?;
        }
        match (task.kind, task.method) {
            (_, None) => {}
            (TaskKind::Integrate | TaskKind::ArclengthIntegral, Some(MethodName::Direct | MethodName::Componentwise)) => {}
            (TaskKind::LineIntegral, Some(_)) => {}
            (kind, Some(m)) => {
                return Err(invalid(field("method"), format!("{m:?} is not available for {} tasks", kind.name())))
            }
        }
        let tol = task.tol.or(c.tol).or(opts.env_tol).unwrap_or(DEFAULT_TOL);
        let quad_tol = task.quad_tol.or(c.quad_tol).unwrap_or(DEFAULT_QUAD_TOL);
        for (name, value) in [("tol", tol), ("quad_tol", quad_tol)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(field(name), "tolerance must be positive"));
            }
        }
        let max_levels = task.max_levels.or(c.max_levels).unwrap_or(DEFAULT_MAX_LEVELS);
        if max_levels == 0 || max_levels > 40 {
            return Err(invalid(field("max_levels"), "max_levels must lie in 1..=40"));
        }
        let settings = Settings {
            cfg: IntegrationConfig {
                tol: Hyperbolic::splat(tol),
                max_levels,
                tag: task.tag.or(c.tag).unwrap_or_default(),
                initial_partition: None,
            },
            quad: QuadConfig {
                tol: quad_tol,
                ..QuadConfig::default()
            },
            seed: task.seed.or(opts.seed).or(c.seed).unwrap_or(0),
            samples: task.samples,
            method: task.method,
        };
        out.push(Compiled {
            def: task,
            id: task.id.clone().unwrap_or_else(|| format!("{}-{}", task.kind.name(), index + 1)),
            path,
            function,
            primitive,
            settings,
        });
    }
    Ok(out)
}

/// A bicomplex value in every rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRecord {
    pub cartesian: String,
    pub idempotent: String,
    pub z1: [f64; 2],
    pub z2: [f64; 2],
    pub w1: [f64; 2],
    pub w2: [f64; 2],
}

fn complex_pair(z: Complex) -> [f64; 2] {
    // adding +0 turns -0 into 0
    [z.re + 0.0, z.im + 0.0]
}

impl From<BiComplex> for ValueRecord {
    fn from(z: BiComplex) -> Self {
        let (z1, z2) = z.to_cartesian();
        Self {
            cartesian: z.to_cartesian_string(),
            idempotent: z.to_idempotent_string(),
            z1: complex_pair(z1),
            z2: complex_pair(z2),
            w1: complex_pair(z.w1),
            w2: complex_pair(z.w2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

/// Echo of the task inputs; expressions are printed canonically.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    pub expressions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NotConverged,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub kind: TaskKind,
    pub inputs: Inputs,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ValueRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub est_error: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// The line integral an ftc-check or ml-bound task compares against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integral: Option<ValueRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<SuiteReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tasks: usize,
    pub ok: usize,
    pub not_converged: usize,
    pub failed: usize,
    pub errors: usize,
    pub exit_code: i32,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tasks: Vec<TaskRecord>,
    pub summary: Summary,
}

impl Report {
    /// 0 when every task is ok, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

fn echo(task: &Compiled<'_>) -> Inputs {
    let mut inputs = Inputs::default();
    let canonical = |text: &str| expr::parse(text).map(|e| e.to_string()).unwrap_or_else(|_| text.to_string());
    if let Some((name, def, path)) = &task.path {
        inputs.path = Some(name.to_string());
        inputs.path_kind = Some(def.kind_name().to_string());
        let iv = path.interval();
        inputs.interval = Some(IntervalRecord {
            lo: [iv.lo().v1, iv.lo().v2],
            hi: [iv.hi().v1, iv.hi().v2],
        });
        for (field, text) in def.expressions() {
            inputs.expressions.insert(format!("path.{field}"), canonical(text));
        }
    }
    for (role, entry) in [("function", &task.function), ("primitive", &task.primitive)] {
        if let Some((name, def, _)) = entry {
            match role {
                "function" => inputs.function = Some(name.to_string()),
                _ => inputs.primitive = Some(name.to_string()),
            }
            for (field, text) in def.expressions() {
                inputs.expressions.insert(format!("{role}.{field}"), canonical(text));
            }
        }
    }
    inputs.suite = task.def.suite.clone();
    inputs
}

fn pair(h: Hyperbolic) -> [f64; 2] {
    [h.v1 + 0.0, h.v2 + 0.0]
}

fn run_task(task: &Compiled<'_>) -> TaskRecord {
    let started = Instant::now();
    let mut record = TaskRecord {
        id: task.id.clone(),
        kind: task.def.kind,
        inputs: echo(task),
        status: Status::Ok,
        result: None,
        est_error: None,
        converged: None,
        levels: None,
        method: None,
        integral: None,
        residual: None,
        checks: None,
        error: None,
        wall_time_ms: 0.0,
    };
    if let Err(message) = execute(task, &mut record) {
        record.status = Status::Error;
        record.error = Some(message);
    }
    record.wall_time_ms = (started.elapsed().as_secs_f64() * 1e6).round() / 1e3;
    record
}

fn fill_integral(record: &mut TaskRecord, r: &IntegralResult) {
    record.result = Some(r.value.into());
    record.est_error = Some(pair(r.est_error));
    record.converged = Some(r.converged);
    record.levels = Some(r.levels_used);
    record.method = Some(r.method.to_string());
    if !r.converged {
        record.status = Status::NotConverged;
    }
}

fn execute(task: &Compiled<'_>, record: &mut TaskRecord) -> Result<(), String> {
    let s = &task.settings;
    let path = task.path.as_ref().map(|p| &p.2);
    let f = task.function.as_ref().map(|p| &p.2);
    let text = |e: integrate::IntegrateError| e.to_string();
    match task.def.kind {
        TaskKind::Variation => {
            let r = path
                .expect("compiled")
                .total_variation(s.cfg.tol.v1, s.cfg.max_levels)
                .map_err(|e| e.to_string())?;
            record.result = Some(r.total.to_bicomplex().into());
            record.converged = Some(r.converged);
            record.levels = Some(r.levels);
            if !r.converged {
                record.status = Status::NotConverged;
            }
        }
        TaskKind::Length => {
            let v = path.expect("compiled").length_smooth(s.quad.tol).map_err(|e| e.to_string())?;
            record.result = Some(v.to_bicomplex().into());
            record.converged = Some(true);
            record.method = Some(Method::SmoothReduction.to_string());
        }
        TaskKind::Integrate => {
            let (f, g) = (f.expect("compiled"), path.expect("compiled"));
            let r = match s.method {
                Some(MethodName::Componentwise) => integrate::rs_integral_componentwise(f, g, &s.cfg),
                _ => integrate::rs_integral(f, g, &s.cfg),
            }
            .map_err(text)?;
            fill_integral(record, &r);
        }
        TaskKind::LineIntegral => {
            let (f, g) = (f.expect("compiled"), path.expect("compiled"));
            let r = match s.method {
                Some(MethodName::Componentwise) => integrate::line_integral_componentwise(f, g, &s.cfg),
                Some(MethodName::Smooth) => integrate::line_integral_smooth(f, g, &s.quad),
                _ => integrate::line_integral(f, g, &s.cfg),
            }
            .map_err(text)?;
            fill_integral(record, &r);
        }
        TaskKind::ArclengthIntegral => {
            let (f, g) = (f.expect("compiled"), path.expect("compiled"));
            let r = match s.method {
                Some(MethodName::Componentwise) => integrate::line_integral_arclength_componentwise(f, g, &s.cfg),
                _ => integrate::line_integral_arclength(f, g, &s.cfg),
            }
            .map_err(text)?;
            fill_integral(record, &r);
        }
        TaskKind::FtcCheck => {
            let (f, g) = (f.expect("compiled"), path.expect("compiled"));
            let primitive = &task.primitive.as_ref().expect("compiled").2;
            let value = integrate::ftc_eval(primitive, f, g).map_err(text)?;
            let line = integrate::line_integral(f, g, &s.cfg).map_err(text)?;
            fill_integral(record, &line);
            let residual = (line.value - value).d_modulus();
            record.result = Some(value.into());
            record.integral = Some(line.value.into());
            record.residual = Some(pair(residual));
            if line.converged && !(residual.v1 < FTC_RESIDUAL_LIMIT && residual.v2 < FTC_RESIDUAL_LIMIT) {
                record.status = Status::Failed;
            }
        }
        TaskKind::MlBound => {
            let (f, g) = (f.expect("compiled"), path.expect("compiled"));
            let samples = s.samples.unwrap_or(integrate::DEFAULT_ML_SAMPLES);
            let bound = integrate::ml_bound(f, g, samples).map_err(text)?;
            let line = integrate::line_integral(f, g, &s.cfg).map_err(text)?;
            fill_integral(record, &line);
            record.result = Some(bound.to_bicomplex().into());
            record.integral = Some(line.value.into());
            if line.converged && !line.value.d_modulus().strictly_below(bound, ML_SLACK) {
                record.status = Status::Failed;
            }
        }
        TaskKind::PropsCheck => {
            let suite = task.def.suite.as_deref().expect("compiled");
            let cases = s.samples.unwrap_or(DEFAULT_CASES);
            let reports = props::run_suite(suite, s.seed, cases).map_err(|e| e.to_string())?;
            if reports.iter().any(|r| !r.passed()) {
                record.status = Status::Failed;
            }
            record.checks = Some(reports);
        }
    }
    Ok(())
}

/// Validates and runs every task; input errors abort before any task runs.
pub fn run_spec(spec: &JobSpec, opts: &RunOptions) -> Result<Report, JobError> {
    let started = Instant::now();
    let compiled = compile(spec, opts)?;
    let tasks: Vec<TaskRecord> = if opts.parallel {
        exec::map_collect(&compiled, run_task)
    } else {
        compiled.iter().map(run_task).collect()
    };
    let count = |s: Status| tasks.iter().filter(|t| t.status == s).count();
    let ok = count(Status::Ok);
    let summary = Summary {
        tasks: tasks.len(),
        ok,
        not_converged: count(Status::NotConverged),
        failed: count(Status::Failed),
        errors: count(Status::Error),
        exit_code: if ok == tasks.len() { 0 } else { 2 },
        wall_time_ms: (started.elapsed().as_secs_f64() * 1e6).round() / 1e3,
    };
    Ok(Report { tasks, summary })
}

pub fn run_str(text: &str, opts: &RunOptions) -> Result<Report, JobError> {
    run_spec(&JobSpec::from_toml(text)?, opts)
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<Report, JobError> {
    let text = std::fs::read_to_string(path).map_err(|source| JobError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    run_str(&text, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<Report, JobError> {
        run_str(text, &RunOptions::default())
    }

    #[test]
    fn identity_integral() {
        let report = run(r#"
            [paths.unit]
            kind = "identity"
            lo = "0"
            hi = "1"

            [functions.id]
            f = "z"

            [[tasks]]
            kind = "integrate"
            function = "id"
            path = "unit"
        "#)
        .unwrap();
        assert_eq!(report.exit_code(), 0);
        let t = &report.tasks[0];
        assert_eq!(t.id, "integrate-1");
        assert_eq!(t.converged, Some(true));
        let v = t.result.as_ref().unwrap();
        assert!((v.z1[0] - 0.5).abs() < 1e-9 && v.z1[1].abs() < 1e-12);
        assert!(v.z2[0].abs() < 1e-12 && v.z2[1].abs() < 1e-12);
        assert!(v.cartesian.starts_with("0.5"), "{}", v.cartesian);
    }

    #[test]
    fn undefined_path_is_an_input_error() {
        let err = run(r#"
            [functions.id]
            f = "z"
            [[tasks]]
            kind = "line-integral"
            function = "id"
            path = "nowhere"
        "#)
        .unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, JobError::Undefined { .. }));
        assert!(msg.contains("tasks[0].path") && msg.contains("nowhere"), "{msg}");
    }

    #[test]
    fn ftc_check_passes() {
        let report = run(r#"
            [paths.diag]
            kind = "segment"
            from = "0"
            to = "1 + j"
            [functions.f]
            f = "z"
            [functions.F]
            F = "z^2/2"
            [[tasks]]
            id = "ftc"
            kind = "ftc-check"
            function = "f"
            primitive = "F"
            path = "diag"
        "#)
        .unwrap();
        assert_eq!(report.exit_code(), 0);
        let t = &report.tasks[0];
        let r = t.residual.unwrap();
        assert!(r[0] < 1e-6 && r[1] < 1e-6);
        let v = t.result.as_ref().unwrap();
        assert!((v.z1[0] - 1.0).abs() < 1e-9 && v.z1[1].abs() < 1e-9);
        assert!(v.z2[0].abs() < 1e-9 && (v.z2[1] - 1.0).abs() < 1e-9);
        assert_eq!(t.inputs.expressions["primitive.f"], "z^2/2");
    }

    #[test]
    fn schema_errors_name_keys() {
        let err = run(r#"
            [paths.p]
            kind = "spiral"
        "#)
        .unwrap_err();
        assert!(err.to_string().contains("paths.p"), "{err}");
        let err = run(r#"
            [[tasks]]
            kind = "variation"
            path = "p"
            extra = 1
        "#)
        .unwrap_err();
        assert!(err.to_string().contains("tasks[0]"), "{err}");
        let err = run(r#"
            [functions.bad]
            f = "z +"
        "#)
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("functions.bad.f") && msg.contains("byte 3"), "{msg}");
    }

    #[test]
    fn task_errors_do_not_abort_later_tasks() {
        let report = run(r#"
            [paths.c]
            kind = "segment"
            from = "0"
            to = "2"
            [functions.inv]
            f = "1/(z - 1)"
            [functions.one]
            f = "1"
            [[tasks]]
            kind = "line-integral"
            function = "inv"
            path = "c"
            tag = "left"
            [[tasks]]
            kind = "length"
            path = "c"
        "#)
        .unwrap();
        assert_eq!(report.tasks[0].status, Status::Error);
        assert!(report.tasks[0].error.as_ref().unwrap().contains("division"));
        assert_eq!(report.tasks[1].status, Status::Ok);
        assert_eq!(report.exit_code(), 2);
        assert_eq!(report.summary.errors, 1);
    }

    #[test]
    fn overrides_and_methods() {
        let text = r#"
            [config]
            tol = 1e-6
            [paths.e]
            kind = "expr"
            gamma1 = "t^2 + i1*t"
            gamma2 = "exp(i1*s)"
            domain1 = [0.0, 1.0]
            domain2 = [0.0, 3.0]
            [functions.f]
            f1 = "z"
            f2 = "z^2"
            [[tasks]]
            kind = "line-integral"
            function = "f"
            path = "e"
            method = "smooth"
            [[tasks]]
            kind = "line-integral"
            function = "f"
            path = "e"
            method = "componentwise"
            max_levels = 2
            [[tasks]]
            kind = "variation"
            path = "e"
            method = "smooth"
        "#;
        let err = run(text).unwrap_err();
        assert!(err.to_string().contains("tasks[2].method"), "{err}");
        let trimmed = &text[..text.rfind("[[tasks]]").unwrap()];
        let report = run(trimmed).unwrap();
        assert_eq!(report.tasks[0].status, Status::Ok);
        assert_eq!(report.tasks[1].status, Status::NotConverged);
        assert_eq!(report.tasks[1].levels, Some(2));
        assert_eq!(report.exit_code(), 2);
    }

    #[test]
    fn env_tolerance_is_a_default_only() {
        let text = r#"
            [paths.u]
            kind = "identity"
            lo = "0"
            hi = "1 + j"
            [[tasks]]
            kind = "variation"
            path = "u"
        "#;
        let opts = RunOptions {
            env_tol: Some(-1.0),
            ..RunOptions::default()
        };
        assert!(run_str(text, &opts).is_err());
        let with_config = text.replace("[paths.u]", "[config]\ntol = 1e-6\n[paths.u]");
        assert!(run_str(&with_config, &opts).is_ok());
    }
}
