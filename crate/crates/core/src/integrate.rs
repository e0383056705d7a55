//! Riemann-Stieltjes D-integrals, line integrals and their companions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::expr::{self, EvalError, Expr};
use crate::intervals::{self, DInterval, DPartition};
use crate::numbers::{sup_d, BiComplex, Complex, DOrdering, Hyperbolic, Tolerance};
use crate::paths::{self, level_values, ComponentPath, DPath, PathError, RealMap, CACHE_STEPS, MIN_LEVELS};
use crate::quad::{self, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("invalid integrand: {0}")]
    InvalidIntegrand(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("initial partition does not cover the path interval")]
    DomainMismatch,
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("reparametrization component {component} decreases near x = {at}")]
    NotMonotone { component: usize, at: f64 },
    #[error("reparametrization component {component} maps [{from}, {to}] onto a single point")]
    DegenerateIncrement { component: usize, from: f64, to: f64 },
    #[error("reparametrization endpoints do not match the path interval")]
    EndpointMismatch,
    #[error("primitive derivative differs from the integrand by {deviation:e} at {at}")]
    PrimitiveMismatch { at: BiComplex, deviation: f64 },
    #[error("path variation did not converge")]
    NotRectifiable,
}

pub type ComponentFn = Arc<dyn Fn(Complex) -> Result<Complex, EvalError> + Send + Sync>;

/// A product-type function `f(w1 e1 + w2 e2) = f1(w1) e1 + f2(w2) e2`.
#[derive(Clone)]
pub struct Integrand {
    parts: [ComponentFn; 2],
    source: Option<String>,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some(s) => write!(f, "Integrand({s})"),
            None => f.write_str("Integrand(<callback>)"),
        }
    }
}

fn component_of(e: &Expr, var: &str, index: usize) -> Result<ComponentFn, IntegrateError> {
    let compiled = expr::Compiled::new(e, index, var).map_err(|err| IntegrateError::InvalidIntegrand(err.to_string()))?;
    Ok(Arc::new(move |w: Complex| compiled.eval(w)))
}

fn check_vars(e: &Expr, var: &str) -> Result<(), IntegrateError> {
    match e.variables().into_iter().find(|v| v != var) {
        Some(other) => Err(IntegrateError::InvalidIntegrand(format!(
            "'{e}' uses '{other}' but the variable is '{var}'"
        ))),
        None => Ok(()),
    }
}

impl Integrand {
    /// Both components of one bicomplex expression in `var`.
    pub fn from_expr(e: &Expr, var: &str) -> Result<Self, IntegrateError> {
        check_vars(e, var)?;
        Ok(Self {
            parts: [component_of(e, var, 0)?, component_of(e, var, 1)?],
            source: Some(e.to_string()),
        })
    }

    /// `f1` and `f2` given separately; constants take their value in the matching component.
    pub fn from_component_exprs(f1: &Expr, f2: &Expr, var: &str) -> Result<Self, IntegrateError> {
        check_vars(f1, var)?;
        check_vars(f2, var)?;
        Ok(Self {
            parts: [component_of(f1, var, 0)?, component_of(f2, var, 1)?],
            source: Some(format!("[{f1} | {f2}]")),
        })
    }

    pub fn from_fns<F1, F2>(f1: F1, f2: F2) -> Self
    where
        F1: Fn(Complex) -> Complex + Send + Sync + 'static,
        F2: Fn(Complex) -> Complex + Send + Sync + 'static,
    {
        Self {
            parts: [Arc::new(move |w| Ok(f1(w))), Arc::new(move |w| Ok(f2(w)))],
            source: None,
        }
    }

    pub fn constant(c: BiComplex) -> Self {
        Self::from_fns(move |_| c.w1, move |_| c.w2)
    }

    /// `a f + b g`.
    pub fn linear(a: BiComplex, f: &Integrand, b: BiComplex, g: &Integrand) -> Self {
        let part = |i: usize| -> ComponentFn {
            let (fi, gi) = (f.parts[i].clone(), g.parts[i].clone());
            let (ai, bi) = (a.component(i), b.component(i));
            Arc::new(move |w| Ok(ai * fi(w)? + bi * gi(w)?))
        };
        Self {
            parts: [part(0), part(1)],
            source: None,
        }
    }

    /// `z ↦ f(z - c)`.
    pub fn shifted(&self, c: BiComplex) -> Self {
        let part = |i: usize| -> ComponentFn {
            let fi = self.parts[i].clone();
            let ci = c.component(i);
            Arc::new(move |w| fi(w - ci))
        };
        Self {
            parts: [part(0), part(1)],
            source: None,
        }
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn component(&self, index: usize, w: Complex) -> Result<Complex, EvalError> {
        (self.parts[index])(w)
    }

    pub fn eval(&self, z: BiComplex) -> Result<BiComplex, EvalError> {
        Ok(BiComplex::from_idempotent(self.component(0, z.w1)?, self.component(1, z.w2)?))
    }
}

/// Sample point inside each partition step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Left,
    #[default]
    Midpoint,
    Right,
}

impl Tag {
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Tag::Left => a,
            Tag::Midpoint => 0.5 * (a + b),
            Tag::Right => b,
        }
    }

    fn pick_d(self, a: Hyperbolic, b: Hyperbolic) -> Hyperbolic {
        Hyperbolic::new(self.pick(a.v1, b.v1), self.pick(a.v2, b.v2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationConfig {
    pub tol: Hyperbolic,
    pub max_levels: u32,
    pub tag: Tag,
    pub initial_partition: Option<DPartition>,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            tol: Hyperbolic::splat(1e-9),
            max_levels: 24,
            tag: Tag::Midpoint,
            initial_partition: None,
        }
    }
}

impl IntegrationConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol: Hyperbolic::splat(tol),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.tol.v1 > 0.0 && self.tol.v2 > 0.0) {
            return Err(IntegrateError::InvalidConfig(format!("tolerance {} is not positive", self.tol)));
        }
        if self.max_levels == 0 {
            return Err(IntegrateError::InvalidConfig("max_levels must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_intervals: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    DirectRS,
    Componentwise,
    SmoothReduction,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::DirectRS => "direct",
            Method::Componentwise => "componentwise",
            Method::SmoothReduction => "smooth",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult {
    pub value: BiComplex,
    pub est_error: Hyperbolic,
    pub levels_used: u32,
    pub converged: bool,
    pub method: Method,
}

/// What is integrated against what.
#[derive(Clone, Copy)]
enum Sum {
    /// `Σ f(τ_k) [Γ(ζ_k) - Γ(ζ_{k-1})]`
    Stieltjes,
    /// `Σ f(Γ(τ_k)) [Γ(ζ_k) - Γ(ζ_{k-1})]`
    Line,
    /// `Σ f(Γ(τ_k)) |Γ(ζ_k) - Γ(ζ_{k-1})|_D`
    ArcLength,
}

fn base_chain(path: &DPath, cfg: &IntegrationConfig) -> Result<Vec<Hyperbolic>, IntegrateError> {
    cfg.validate()?;
    let interval = path.interval();
    match &cfg.initial_partition {
        None => Ok(path.breakpoint_chain()),
        Some(p) => {
            let span = p.interval();
            let tol = Tolerance::default();
            if span.lo().try_cmp_d(interval.lo(), tol) != DOrdering::Equal
                || span.hi().try_cmp_d(interval.hi(), tol) != DOrdering::Equal
            {
                return Err(IntegrateError::DomainMismatch);
            }
            Ok(p.points().to_vec())
        }
    }
}

fn scalar_chain_point(base: &[f64], level: u32, k: usize) -> f64 {
    let (j, r) = intervals::dyadic_step(k, level);
    if j + 1 >= base.len() {
        return base[base.len() - 1];
    }
    intervals::dyadic_point(base[j], base[j + 1], r, level)
}

/// Value of the path at the tag, when the tag is a partition point.
fn tag_value<V: Copy>(tag: Tag, ga: V, gb: V) -> Option<V> {
    match tag {
        Tag::Left => Some(ga),
        Tag::Right => Some(gb),
        Tag::Midpoint => None,
    }
}

/// Refines `base` dyadically until successive sums agree within `tol` per component.
///
/// `term` receives the tag, the path value there when already known, and the
/// path values at both ends of the step.
fn refine_direct<T>(
    base: &[Hyperbolic],
    cfg: &IntegrationConfig,
    path: &DPath,
    term: T,
) -> Result<IntegralResult, IntegrateError>
where
    T: Fn(Hyperbolic, Option<BiComplex>, BiComplex, BiComplex) -> Result<BiComplex, EvalError> + Sync,
{
    let mut prev: Option<BiComplex> = None;
    let mut cache: Option<Vec<BiComplex>> = None;
    let mut level = 0;
    loop {
        let steps = (base.len() - 1) << level;
        let point = |k: usize| paths::chain_point(base, level, k);
        let sum: BiComplex = if steps <= CACHE_STEPS {
            let values = level_values(cache.take(), steps, |k| path.eval_unchecked(point(k)))?;
            let sum = exec::try_sum(steps, |k| {
                let (ga, gb) = (values[k], values[k + 1]);
                term(cfg.tag.pick_d(point(k), point(k + 1)), tag_value(cfg.tag, ga, gb), ga, gb)
            })?;
            cache = Some(values);
            sum
        } else {
            exec::try_sum(steps, |k| {
                let (a, b) = (point(k), point(k + 1));
                let (ga, gb) = (path.eval_unchecked(a)?, path.eval_unchecked(b)?);
                term(cfg.tag.pick_d(a, b), tag_value(cfg.tag, ga, gb), ga, gb)
            })?
        };
        let diff = prev.map(|p| (sum - p).d_modulus());
        if let Some(d) = diff {
            if level >= MIN_LEVELS && d.v1 < cfg.tol.v1 && d.v2 < cfg.tol.v2 {
                return Ok(IntegralResult {
                    value: sum,
                    est_error: d,
                    levels_used: level,
                    converged: true,
                    method: Method::DirectRS,
                });
            }
        }
        if level >= cfg.max_levels {
            return Ok(IntegralResult {
                value: sum,
                est_error: diff.unwrap_or(Hyperbolic::splat(f64::INFINITY)),
                levels_used: level,
                converged: false,
                method: Method::DirectRS,
            });
        }
        prev = Some(sum);
        level += 1;
    }
}

struct Scalar {
    value: Complex,
    error: f64,
    levels: u32,
    converged: bool,
}

fn refine_scalar<T>(
    base: &[f64],
    tol: f64,
    cfg: &IntegrationConfig,
    gamma: &ComponentPath,
    term: T,
) -> Result<Scalar, IntegrateError>
where
    T: Fn(f64, Option<Complex>, Complex, Complex) -> Result<Complex, EvalError> + Sync,
{
    let mut prev: Option<Complex> = None;
    let mut cache: Option<Vec<Complex>> = None;
    let mut level = 0;
    loop {
        let steps = (base.len() - 1) << level;
        let point = |k: usize| scalar_chain_point(base, level, k);
        let sum: Complex = if steps <= CACHE_STEPS {
            let values = level_values(cache.take(), steps, |k| gamma.eval(point(k)))?;
            let sum = exec::try_sum(steps, |k| {
                let (ga, gb) = (values[k], values[k + 1]);
                term(cfg.tag.pick(point(k), point(k + 1)), tag_value(cfg.tag, ga, gb), ga, gb)
            })?;
            cache = Some(values);
            sum
        } else {
            exec::try_sum(steps, |k| {
                let (a, b) = (point(k), point(k + 1));
                let (ga, gb) = (gamma.eval(a)?, gamma.eval(b)?);
                term(cfg.tag.pick(a, b), tag_value(cfg.tag, ga, gb), ga, gb)
            })?
        };
        let diff = prev.map(|p| (sum - p).norm());
        if let Some(d) = diff {
            if level >= MIN_LEVELS && d < tol {
                return Ok(Scalar {
                    value: sum,
                    error: d,
                    levels: level,
                    converged: true,
                });
            }
        }
        if level >= cfg.max_levels {
            return Ok(Scalar {
                value: sum,
                error: diff.unwrap_or(f64::INFINITY),
                levels: level,
                converged: false,
            });
        }
        prev = Some(sum);
        level += 1;
    }
}

fn direct(kind: Sum, f: &Integrand, path: &DPath, cfg: &IntegrationConfig) -> Result<IntegralResult, IntegrateError> {
    let base = base_chain(path, cfg)?;
    refine_direct(&base, cfg, path, |tau, known, ga, gb| {
        let at = match (kind, known) {
            (Sum::Stieltjes, _) => tau.to_bicomplex(),
            (_, Some(g)) => g,
            (_, None) => path.eval_unchecked(tau)?,
        };
        let weight = match kind {
            Sum::ArcLength => (gb - ga).d_modulus().to_bicomplex(),
            _ => gb - ga,
        };
        Ok(f.eval(at)? * weight)
    })
}

fn componentwise(kind: Sum, f: &Integrand, path: &DPath, cfg: &IntegrationConfig) -> Result<IntegralResult, IntegrateError> {
    let base = base_chain(path, cfg)?;
    let mut parts = Vec::with_capacity(2);
    for i in 0..2 {
        let gamma = path.component(i);
        let chain: Vec<f64> = base.iter().map(|p| p.component(i)).collect();
        parts.push(refine_scalar(&chain, cfg.tol.component(i), cfg, gamma, |x, known, ga, gb| {
            let at = match (kind, known) {
                (Sum::Stieltjes, _) => Complex::new(x, 0.0),
                (_, Some(g)) => g,
                (_, None) => gamma.eval(x)?,
            };
            let weight = match kind {
                Sum::ArcLength => Complex::new((gb - ga).norm(), 0.0),
                _ => gb - ga,
            };
            Ok(f.component(i, at)? * weight)
        })?);
    }
    Ok(IntegralResult {
        value: BiComplex::from_idempotent(parts[0].value, parts[1].value),
        est_error: Hyperbolic::new(parts[0].error, parts[1].error),
        levels_used: parts[0].levels.max(parts[1].levels),
        converged: parts[0].converged && parts[1].converged,
        method: Method::Componentwise,
    })
}

/// `∫ f(τ) dΓ(τ)` over the path interval by refining D-partitions.
///
/// On an interval whose length has one vanishing component, every increment of
/// that component is zero, so it contributes nothing.
pub fn rs_integral(f: &Integrand, integrator: &DPath, cfg: &IntegrationConfig) -> Result<IntegralResult, IntegrateError> {
    direct(Sum::Stieltjes, f, integrator, cfg)
}

/// `(∫ f1(t) dγ1(t)) e1 + (∫ f2(s) dγ2(s)) e2`, each on its own real partitions.
pub fn rs_integral_componentwise(
    f: &Integrand,
    integrator: &DPath,
    cfg: &IntegrationConfig,
) -> Result<IntegralResult, IntegrateError> {
    componentwise(Sum::Stieltjes, f, integrator, cfg)
}

/// `∫_Γ f(z) dz = ∫ f(Γ(τ)) dΓ(τ)`.
pub fn line_integral(f: &Integrand, path: &DPath, cfg: &IntegrationConfig) -> Result<IntegralResult, IntegrateError> {
    direct(Sum::Line, f, path, cfg)
}

/// `(∫_{γ1} f1) e1 + (∫_{γ2} f2) e2`.
pub fn line_integral_componentwise(
    f: &Integrand,
    path: &DPath,
    cfg: &IntegrationConfig,
) -> Result<IntegralResult, IntegrateError> {
    componentwise(Sum::Line, f, path, cfg)
}

/// `∫_Γ f |dz|_D`, integrating against the arc-length function through chord lengths.
pub fn line_integral_arclength(f: &Integrand, path: &DPath, cfg: &IntegrationConfig) -> Result<IntegralResult, IntegrateError> {
    direct(Sum::ArcLength, f, path, cfg)
}

/// `(∫ f1 |dz1|) e1 + (∫ f2 |dz2|) e2`.
pub fn line_integral_arclength_componentwise(
    f: &Integrand,
    path: &DPath,
    cfg: &IntegrationConfig,
) -> Result<IntegralResult, IntegrateError> {
    componentwise(Sum::ArcLength, f, path, cfg)
}

/// `∫ f(Γ(τ)) Γ'(τ) dτ` by adaptive quadrature in each component, split at breakpoints.
pub fn line_integral_smooth(f: &Integrand, path: &DPath, quad_cfg: &QuadConfig) -> Result<IntegralResult, IntegrateError> {
    let h = path.fd_step();
    let mut value = [Complex::new(0.0, 0.0); 2];
    let mut error = [0.0; 2];
    for i in 0..2 {
        let gamma = path.component(i);
        let (a, b) = gamma.domain();
        let mut knots = vec![a];
        knots.extend(gamma.breakpoints());
        knots.push(b);
        let piece_tol = quad_cfg.tol / (knots.len() - 1) as f64;
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let integrand = |x: f64| {
                let x = x.clamp(lo, hi);
                Ok::<_, EvalError>(f.component(i, gamma.eval(x)?)? * gamma.derivative_or_fd(x, h)?)
            };
            let r = quad::integrate(integrand, lo, hi, piece_tol, quad_cfg.max_intervals).map_err(|e| match e {
                QuadError::Eval(e) => IntegrateError::Eval(e),
                other => IntegrateError::Quadrature(other.to_string()),
            })?;
            value[i] += r.value;
            error[i] += r.error;
        }
    }
    Ok(IntegralResult {
        value: BiComplex::from_idempotent(value[0], value[1]),
        est_error: Hyperbolic::new(error[0], error[1]),
        levels_used: 0,
        converged: true,
        method: Method::SmoothReduction,
    })
}

/// A product-type map `Φ(t e1 + s e2) = φ1(t) e1 + φ2(s) e2` on `[λ, μ]_D`.
#[derive(Clone)]
pub struct DMap {
    pub components: [RealMap; 2],
    pub domain: DInterval,
}

impl fmt::Debug for DMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DMap on [{}, {}]", self.domain.lo(), self.domain.hi())
    }
}

impl DMap {
    pub fn new(phi1: RealMap, phi2: RealMap, domain: DInterval) -> Self {
        Self {
            components: [phi1, phi2],
            domain,
        }
    }

    pub fn identity(domain: DInterval) -> Self {
        let id = || RealMap::new(|x| x).with_derivative(|_| 1.0);
        Self::new(id(), id(), domain)
    }

    pub fn eval(&self, tau: Hyperbolic) -> Hyperbolic {
        Hyperbolic::new((self.components[0].eval)(tau.v1), (self.components[1].eval)(tau.v2))
    }
}

const REPARAM_SAMPLES: usize = 1024;

/// `Γ ∘ Φ`, after checking on sampled points that `Φ` maps `[λ, μ]_D`
/// increasingly onto the path interval with nondegenerate increments.
pub fn reparametrize(path: &DPath, phi: &DMap) -> Result<DPath, IntegrateError> {
    let target = path.interval();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + y.abs());
    let mut parts = Vec::with_capacity(2);
    for i in 0..2 {
        let map = &phi.components[i];
        let (lam, mu) = phi.domain.projection(i);
        let (alpha, beta) = target.projection(i);
        if !close((map.eval)(lam), alpha) || !close((map.eval)(mu), beta) {
            return Err(IntegrateError::EndpointMismatch);
        }
        if alpha < beta {
            let mut prev = (lam, (map.eval)(lam));
            for k in 1..=REPARAM_SAMPLES {
                let x = intervals::dyadic_point(lam, mu, k, 10);
                let y = (map.eval)(x);
                if y < prev.1 {
                    return Err(IntegrateError::NotMonotone { component: i, at: x });
                }
                if y == prev.1 {
                    return Err(IntegrateError::DegenerateIncrement {
                        component: i,
                        from: prev.0,
                        to: x,
                    });
                }
                prev = (x, y);
            }
        }
        parts.push(path.component(i).reparametrized(map.clone(), (lam, mu))?);
    }
    let second = parts.pop().expect("two components");
    let first = parts.pop().expect("two components");
    Ok(DPath::new(first, second)?)
}

const FTC_GUARD_POINTS: usize = 32;
const FTC_GUARD_LIMIT: f64 = 1e-4;

/// `F(Γ(β)) - F(Γ(α))`, after checking `F' = f` by central differences at sampled trace points.
pub fn ftc_eval(primitive: &Integrand, f: &Integrand, path: &DPath) -> Result<BiComplex, IntegrateError> {
    for (_, z) in path.trace(FTC_GUARD_POINTS)? {
        let mut deviation: f64 = 0.0;
        for i in 0..2 {
            let w = z.component(i);
            let h = 1e-5 * w.norm().max(1.0);
            let fd = (primitive.component(i, w + h)? - primitive.component(i, w - h)?) / (2.0 * h);
            deviation = deviation.max((fd - f.component(i, w)?).norm());
        }
        if deviation > FTC_GUARD_LIMIT {
            return Err(IntegrateError::PrimitiveMismatch { at: z, deviation });
        }
    }
    Ok(primitive.eval(path.end()?)? - primitive.eval(path.start()?)?)
}

pub const DEFAULT_ML_SAMPLES: usize = 4096;

/// `V(Γ) · sup_D |f(z)|_D` with the supremum taken over `samples` trace points.
pub fn ml_bound(f: &Integrand, path: &DPath, samples: usize) -> Result<Hyperbolic, IntegrateError> {
    let variation = path.total_variation(1e-10, paths::DEFAULT_MAX_LEVELS)?;
    if !variation.converged {
        return Err(IntegrateError::NotRectifiable);
    }
    let trace = path.trace(samples.max(1))?;
    let moduli = trace
        .iter()
        .map(|(_, z)| f.eval(*z).map(BiComplex::d_modulus))
        .collect::<Result<Vec<_>, _>>()?;
    let sup = sup_d(moduli).unwrap_or(Hyperbolic::ZERO);
    Ok(variation.total * sup)
}
