//! Product-type hyperbolic paths `Γ(t e1 + s e2) = γ1(t) e1 + γ2(s) e2`.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::exec;
use crate::expr::{self, Compiled, EvalError, Expr};
use crate::intervals::{self, DInterval, DPartition, IntervalError};
use crate::numbers::{BiComplex, Complex, Hyperbolic, Tolerance};
use crate::quad::{self, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("parameter {0} lies outside the path domain")]
    OutOfDomain(Hyperbolic),
    #[error("finite differences do not stabilise at {0}")]
    NotDifferentiable(Hyperbolic),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("invalid component path: {0}")]
    InvalidComponent(String),
    #[error("paths or partitions live on different intervals")]
    DomainMismatch,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// Levels always computed before the dyadic refinement may stop.
pub(crate) const MIN_LEVELS: u32 = 3;

/// Default refinement budget of [`DPath::arc_length_function`].
pub const DEFAULT_MAX_LEVELS: u32 = 24;

pub type ParamFn = Arc<dyn Fn(f64) -> Complex + Send + Sync>;
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real reparametrization map with an optional derivative.
#[derive(Clone)]
pub struct RealMap {
    pub eval: RealFn,
    pub deriv: Option<RealFn>,
}

impl RealMap {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            deriv: None,
        }
    }

    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(d));
        self
    }
}

#[derive(Clone)]
pub enum ComponentKind {
    /// Linear interpolation between samples with strictly increasing parameters.
    Polyline(Arc<[(f64, Complex)]>),
    /// Affine map of `[t0, t1]` onto `start → end`.
    Segment {
        start: Complex,
        end: Complex,
        t0: f64,
        t1: f64,
    },
    /// `center + radius * exp(i1 θ)`, the parameter being the angle.
    Arc { center: Complex, radius: f64 },
    /// Idempotent component `index` of an expression in one real variable.
    Expression {
        expr: Arc<Expr>,
        derivative: Arc<Expr>,
        var: String,
        index: usize,
        compiled: Arc<[Compiled; 2]>,
    },
    Callback {
        eval: ParamFn,
        deriv: Option<ParamFn>,
    },
    /// `Σ c_k γ_k(x) + offset`.
    Combination {
        terms: Arc<[(Complex, ComponentPath)]>,
        offset: Complex,
    },
    /// `x ↦ γ(-x)`.
    Reversed(Arc<ComponentPath>),
    /// Pieces on consecutive domains, joined continuously.
    Piecewise(Arc<[ComponentPath]>),
    /// `x ↦ γ(φ(x))`.
    Reparametrized { path: Arc<ComponentPath>, map: RealMap },
}

/// One idempotent component `γ_i : [a_i, b_i] → C` of a D-path.
#[derive(Clone)]
pub struct ComponentPath {
    domain: (f64, f64),
    kind: ComponentKind,
}

impl fmt::Debug for ComponentPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            ComponentKind::Polyline(s) => format!("Polyline({} samples)", s.len()),
            ComponentKind::Segment { start, end, .. } => format!("Segment({start} -> {end})"),
            ComponentKind::Arc { center, radius } => format!("Arc({center}, r={radius})"),
            ComponentKind::Expression { expr, index, .. } => format!("Expression({expr})[{index}]"),
            ComponentKind::Callback { .. } => "Callback".to_string(),
            ComponentKind::Combination { terms, .. } => format!("Combination({} terms)", terms.len()),
            ComponentKind::Reversed(_) => "Reversed".to_string(),
            ComponentKind::Piecewise(p) => format!("Piecewise({} pieces)", p.len()),
            ComponentKind::Reparametrized { .. } => "Reparametrized".to_string(),
        };
        write!(f, "ComponentPath[{}, {}] {kind}", self.domain.0, self.domain.1)
    }
}

fn check_domain(a: f64, b: f64) -> Result<(), PathError> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(PathError::InvalidComponent(format!("bad domain [{a}, {b}]")));
    }
    Ok(())
}

impl ComponentPath {
    pub fn segment(start: Complex, end: Complex, domain: (f64, f64)) -> Result<Self, PathError> {
        check_domain(domain.0, domain.1)?;
        Ok(Self {
            domain,
            kind: ComponentKind::Segment {
                start,
                end,
                t0: domain.0,
                t1: domain.1,
            },
        })
    }

    /// Circle arc over the angle range `[theta0, theta1]`.
    pub fn arc(center: Complex, radius: f64, theta0: f64, theta1: f64) -> Result<Self, PathError> {
        check_domain(theta0, theta1)?;
        if !radius.is_finite() {
            return Err(PathError::InvalidComponent("non-finite radius".into()));
        }
        Ok(Self {
            domain: (theta0, theta1),
            kind: ComponentKind::Arc { center, radius },
        })
    }

    pub fn polyline(samples: Vec<(f64, Complex)>) -> Result<Self, PathError> {
        if samples.len() < 2 {
            return Err(PathError::InvalidComponent("a polyline needs two samples".into()));
        }
        if samples.windows(2).any(|w| w[0].0.partial_cmp(&w[1].0) != Some(std::cmp::Ordering::Less)) {
            return Err(PathError::InvalidComponent(
                "polyline parameters must be strictly increasing".into(),
            ));
        }
        if samples.iter().any(|(t, z)| !t.is_finite() || !z.is_finite()) {
            return Err(PathError::InvalidComponent("non-finite polyline sample".into()));
        }
        let domain = (samples[0].0, samples[samples.len() - 1].0);
        Ok(Self {
            domain,
            kind: ComponentKind::Polyline(samples.into()),
        })
    }

    /// Idempotent component `index` of `expr`, a function of the real variable `var`.
    pub fn expression(expr: Expr, var: &str, index: usize, domain: (f64, f64)) -> Result<Self, PathError> {
        check_domain(domain.0, domain.1)?;
        if index > 1 {
            return Err(PathError::InvalidComponent(format!("component index {index}")));
        }
        if let Some(other) = expr.variables().into_iter().find(|v| v != var) {
            return Err(PathError::InvalidComponent(format!(
                "expression uses '{other}' but the parameter is '{var}'"
            )));
        }
        let derivative = expr::derivative(&expr, var);
        let compile = |e: &Expr| Compiled::new(e, index, var).map_err(PathError::from);
        let compiled = Arc::new([compile(&expr)?, compile(&derivative)?]);
        Ok(Self {
            domain,
            kind: ComponentKind::Expression {
                expr: Arc::new(expr),
                derivative: Arc::new(derivative),
                var: var.to_string(),
                index,
                compiled,
            },
        })
    }

    pub fn callback<F>(domain: (f64, f64), f: F) -> Result<Self, PathError>
    where
        F: Fn(f64) -> Complex + Send + Sync + 'static,
    {
        check_domain(domain.0, domain.1)?;
        Ok(Self {
            domain,
            kind: ComponentKind::Callback {
                eval: Arc::new(f),
                deriv: None,
            },
        })
    }

    pub fn callback_with_derivative<F, D>(domain: (f64, f64), f: F, d: D) -> Result<Self, PathError>
    where
        F: Fn(f64) -> Complex + Send + Sync + 'static,
        D: Fn(f64) -> Complex + Send + Sync + 'static,
    {
        check_domain(domain.0, domain.1)?;
        Ok(Self {
            domain,
            kind: ComponentKind::Callback {
                eval: Arc::new(f),
                deriv: Some(Arc::new(d)),
            },
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn kind(&self) -> &ComponentKind {
        &self.kind
    }

    /// Same map on a different parameter range.
    pub fn with_domain(&self, domain: (f64, f64)) -> Result<Self, PathError> {
        check_domain(domain.0, domain.1)?;
        Ok(Self {
            domain,
            kind: self.kind.clone(),
        })
    }

    pub fn reversed(&self) -> Self {
        Self {
            domain: (-self.domain.1, -self.domain.0),
            kind: ComponentKind::Reversed(Arc::new(self.clone())),
        }
    }

    pub fn combination(terms: Vec<(Complex, ComponentPath)>, offset: Complex) -> Result<Self, PathError> {
        let domain = terms
            .first()
            .map(|(_, p)| p.domain)
            .ok_or_else(|| PathError::InvalidComponent("empty combination".into()))?;
        if terms.iter().any(|(_, p)| p.domain != domain) {
            return Err(PathError::DomainMismatch);
        }
        Ok(Self {
            domain,
            kind: ComponentKind::Combination {
                terms: terms.into(),
                offset,
            },
        })
    }

    /// Concatenation of pieces whose domains meet end to end and whose values
    /// agree at the joints.
    pub fn piecewise(pieces: Vec<ComponentPath>) -> Result<Self, PathError> {
        let (first, last) = match (pieces.first(), pieces.last()) {
            (Some(f), Some(l)) => (f.domain.0, l.domain.1),
            _ => return Err(PathError::InvalidComponent("no pieces".into())),
        };
        for w in pieces.windows(2) {
            let joint = w[0].domain.1;
            if w[1].domain.0 != joint {
                return Err(PathError::DomainMismatch);
            }
            let (a, b) = (w[0].eval(joint)?, w[1].eval(joint)?);
            if (a - b).norm() > 1e-9 * (1.0 + a.norm()) {
                return Err(PathError::InvalidComponent(format!("pieces do not meet at {joint}")));
            }
        }
        Ok(Self {
            domain: (first, last),
            kind: ComponentKind::Piecewise(pieces.into()),
        })
    }

    pub fn reparametrized(&self, map: RealMap, domain: (f64, f64)) -> Result<Self, PathError> {
        check_domain(domain.0, domain.1)?;
        Ok(Self {
            domain,
            kind: ComponentKind::Reparametrized {
                path: Arc::new(self.clone()),
                map,
            },
        })
    }

    pub fn eval(&self, x: f64) -> Result<Complex, EvalError> {
        Ok(match &self.kind {
            ComponentKind::Polyline(s) => polyline_eval(s, x),
            ComponentKind::Segment { start, end, t0, t1 } => {
                if t1 == t0 {
                    *start
                } else {
                    *start + (*end - *start) * ((x - t0) / (t1 - t0))
                }
            }
            ComponentKind::Arc { center, radius } => *center + Complex::from_polar(*radius, x),
            ComponentKind::Expression { compiled, .. } => compiled[0].eval(Complex::new(x, 0.0))?,
            ComponentKind::Callback { eval, .. } => eval(x),
            ComponentKind::Combination { terms, offset } => {
                let mut acc = *offset;
                for (c, p) in terms.iter() {
                    acc += *c * p.eval(x)?;
                }
                acc
            }
            ComponentKind::Reversed(p) => p.eval(-x)?,
            ComponentKind::Piecewise(p) => piece_at(p, x).eval(x)?,
            ComponentKind::Reparametrized { path, map } => path.eval((map.eval)(x))?,
        })
    }

    /// Analytic derivative, when the kind carries one.
    pub fn derivative(&self, x: f64) -> Option<Result<Complex, EvalError>> {
        match &self.kind {
            ComponentKind::Polyline(s) => Some(Ok(polyline_slope(s, x))),
            ComponentKind::Segment { start, end, t0, t1 } => Some(Ok(if t1 == t0 {
                Complex::new(0.0, 0.0)
            } else {
                (*end - *start) / (t1 - t0)
            })),
            ComponentKind::Arc { radius, .. } => {
                Some(Ok(Complex::new(0.0, 1.0) * Complex::from_polar(*radius, x)))
            }
            ComponentKind::Expression { compiled, .. } => Some(compiled[1].eval(Complex::new(x, 0.0))),
            ComponentKind::Callback { deriv, .. } => deriv.as_ref().map(|d| Ok(d(x))),
            ComponentKind::Combination { terms, .. } => {
                let mut acc = Complex::new(0.0, 0.0);
                for (c, p) in terms.iter() {
                    match p.derivative(x)? {
                        Ok(d) => acc += *c * d,
                        Err(e) => return Some(Err(e)),
                    }
                }
                Some(Ok(acc))
            }
            ComponentKind::Reversed(p) => p.derivative(-x).map(|r| r.map(|d| -d)),
            ComponentKind::Piecewise(p) => piece_at(p, x).derivative(x),
            ComponentKind::Reparametrized { path, map } => {
                let dphi = map.deriv.as_ref()?;
                let y = (map.eval)(x);
                path.derivative(y).map(|r| r.map(|d| d * dphi(x)))
            }
        }
    }

    /// Derivative, falling back to second-order finite differences with step `h`.
    pub fn derivative_or_fd(&self, x: f64, h: f64) -> Result<Complex, EvalError> {
        match self.derivative(x) {
            Some(d) => d,
            None => self.finite_difference(x, h),
        }
    }

    /// Central difference in the interior, one-sided second-order formulas near the ends.
    pub fn finite_difference(&self, x: f64, h: f64) -> Result<Complex, EvalError> {
        let (a, b) = self.domain;
        let f = |y: f64| self.eval(y);
        if a < b && x - h < a {
            Ok((f(x)? * -3.0 + f(x + h)? * 4.0 - f(x + 2.0 * h)?) / (2.0 * h))
        } else if a < b && x + h > b {
            Ok((f(x)? * 3.0 - f(x - h)? * 4.0 + f(x - 2.0 * h)?) / (2.0 * h))
        } else {
            Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
        }
    }

    /// Interior parameters where the derivative may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (a, b) = self.domain;
        let mut out: Vec<f64> = match &self.kind {
            ComponentKind::Polyline(s) => s.iter().map(|(t, _)| *t).collect(),
            ComponentKind::Combination { terms, .. } => {
                terms.iter().flat_map(|(_, p)| p.breakpoints()).collect()
            }
            ComponentKind::Reversed(p) => p.breakpoints().into_iter().map(|t| -t).collect(),
            ComponentKind::Piecewise(p) => p.iter().flat_map(|q| [q.domain.0].into_iter().chain(q.breakpoints())).collect(),
            _ => Vec::new(),
        };
        out.retain(|t| *t > a && *t < b);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Exact variation over `[lo, hi]` for kinds where it is a finite sum.
    pub fn exact_variation(&self, lo: f64, hi: f64) -> Option<f64> {
        if let ComponentKind::Piecewise(pieces) = &self.kind {
            let mut total = 0.0;
            for p in pieces.iter() {
                let (a, b) = (lo.max(p.domain.0), hi.min(p.domain.1));
                if a < b {
                    total += p.exact_variation(a, b)?;
                }
            }
            return Some(total);
        }
        let ComponentKind::Polyline(s) = &self.kind else {
            return None;
        };
        if lo >= hi {
            return Some(0.0);
        }
        let mut prev = polyline_eval(s, lo);
        let mut total = 0.0;
        for &(_, z) in s.iter().filter(|(t, _)| *t > lo && *t < hi) {
            total += (z - prev).norm();
            prev = z;
        }
        Some(total + (polyline_eval(s, hi) - prev).norm())
    }
}

fn piece_at(pieces: &[ComponentPath], x: f64) -> &ComponentPath {
    let k = pieces.partition_point(|p| p.domain.1 <= x);
    &pieces[k.min(pieces.len() - 1)]
}

fn polyline_segment(s: &[(f64, Complex)], x: f64) -> usize {
    // index of the segment [s[k], s[k+1]] containing x, clamped to the ends
    let k = s.partition_point(|(t, _)| *t <= x);
    k.clamp(1, s.len() - 1) - 1
}

fn polyline_eval(s: &[(f64, Complex)], x: f64) -> Complex {
    let k = polyline_segment(s, x);
    let ((t0, z0), (t1, z1)) = (s[k], s[k + 1]);
    if x <= t0 {
        return z0;
    }
    if x >= t1 {
        return z1;
    }
    z0 + (z1 - z0) * ((x - t0) / (t1 - t0))
}

fn polyline_slope(s: &[(f64, Complex)], x: f64) -> Complex {
    let k = polyline_segment(s, x);
    let ((t0, z0), (t1, z1)) = (s[k], s[k + 1]);
    (z1 - z0) / (t1 - t0)
}

/// Result of [`DPath::total_variation`].
#[derive(Debug, Clone, PartialEq)]
pub struct VariationReport {
    /// `V(Γ) = V(γ1) e1 + V(γ2) e2`.
    pub total: Hyperbolic,
    pub per_component: (f64, f64),
    /// Finest partition evaluated; `None` for degenerate intervals or exact polylines.
    pub partition_used: Option<DPartition>,
    pub converged: bool,
    pub levels: u32,
}

/// A product-type D-path.
#[derive(Debug, Clone)]
pub struct DPath {
    gamma: [ComponentPath; 2],
    interval: DInterval,
}

impl DPath {
    pub fn new(gamma1: ComponentPath, gamma2: ComponentPath) -> Result<Self, PathError> {
        let interval = DInterval::from_projections(gamma1.domain, gamma2.domain)?;
        Ok(Self {
            gamma: [gamma1, gamma2],
            interval,
        })
    }

    /// `Γ(τ) = τ` on `interval`.
    pub fn identity(interval: DInterval) -> Self {
        let component = |i: usize| {
            let (a, b) = interval.projection(i);
            ComponentPath::segment(Complex::new(a, 0.0), Complex::new(b, 0.0), (a, b))
                .expect("interval projections are ordered")
        };
        Self {
            gamma: [component(0), component(1)],
            interval,
        }
    }

    /// Straight segment from `start` to `end` over `[0, 1]_D`.
    pub fn segment(start: BiComplex, end: BiComplex) -> Self {
        let component = |i: usize| {
            ComponentPath::segment(start.component(i), end.component(i), (0.0, 1.0))
                .expect("unit domain")
        };
        Self::new(component(0), component(1)).expect("unit domain")
    }

    /// Circle of the given center and radius in each component, traversed `turns` times.
    pub fn bicircle(center: BiComplex, radius: f64, turns: f64) -> Result<Self, PathError> {
        let end = std::f64::consts::TAU * turns;
        Self::new(
            ComponentPath::arc(center.w1, radius, 0.0, end)?,
            ComponentPath::arc(center.w2, radius, 0.0, end)?,
        )
    }

    pub fn interval(&self) -> DInterval {
        self.interval
    }

    /// A chain from `lo` to `hi` through the breakpoints of both components.
    /// Each breakpoint keeps its exact value in its own component; the other
    /// coordinate is placed at the same relative position.
    pub(crate) fn breakpoint_chain(&self) -> Vec<Hyperbolic> {
        let (lo, hi) = (self.interval.lo(), self.interval.hi());
        let len = self.interval.length();
        let mut marks: Vec<(f64, [Option<f64>; 2])> = Vec::new();
        for i in 0..2 {
            let span = len.component(i);
            if span <= 0.0 {
                continue;
            }
            for t in self.gamma[i].breakpoints() {
                let mut exact = [None, None];
                exact[i] = Some(t);
                marks.push(((t - lo.component(i)) / span, exact));
            }
        }
        marks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, [Option<f64>; 2])> = Vec::new();
        for (u, exact) in marks {
            match merged.last_mut() {
                Some(last) if u - last.0 < 1e-9 => {
                    for (slot, e) in last.1.iter_mut().zip(exact) {
                        *slot = slot.or(e);
                    }
                }
                _ => merged.push((u, exact)),
            }
        }
        let mut chain = vec![lo];
        for (u, exact) in merged {
            let at = |i: usize| exact[i].unwrap_or(lo.component(i) + u * len.component(i));
            chain.push(Hyperbolic::new(at(0), at(1)));
        }
        chain.push(hi);
        chain
    }

    pub fn component(&self, index: usize) -> &ComponentPath {
        &self.gamma[index]
    }

    pub fn components(&self) -> &[ComponentPath; 2] {
        &self.gamma
    }

    pub fn eval(&self, tau: Hyperbolic) -> Result<BiComplex, PathError> {
        if !self.interval.contains(tau, Tolerance::default()) {
            return Err(PathError::OutOfDomain(tau));
        }
        Ok(self.eval_unchecked(tau)?)
    }

    pub(crate) fn eval_unchecked(&self, tau: Hyperbolic) -> Result<BiComplex, EvalError> {
        Ok(BiComplex::from_idempotent(
            self.gamma[0].eval(tau.v1)?,
            self.gamma[1].eval(tau.v2)?,
        ))
    }

    /// `Γ(α)`.
    pub fn start(&self) -> Result<BiComplex, PathError> {
        self.eval(self.interval.lo())
    }

    /// `Γ(β)`.
    pub fn end(&self) -> Result<BiComplex, PathError> {
        self.eval(self.interval.hi())
    }

    /// Finite-difference step `ε (e1 + e2)` with `ε = eps^(1/3)` times the domain size.
    pub(crate) fn fd_step(&self) -> f64 {
        let len = self.interval.length();
        let scale = len.v1.max(len.v2);
        f64::EPSILON.cbrt() * if scale > 0.0 { scale } else { 1.0 }
    }

    /// The D-derivative `Γ'(τ)`.
    pub fn derivative(&self, tau: Hyperbolic) -> Result<BiComplex, PathError> {
        if !self.interval.contains(tau, Tolerance::default()) {
            return Err(PathError::OutOfDomain(tau));
        }
        let analytic = [self.gamma[0].derivative(tau.v1), self.gamma[1].derivative(tau.v2)];
        if let [Some(d1), Some(d2)] = analytic {
            return Ok(BiComplex::from_idempotent(d1?, d2?));
        }
        let h = self.fd_step();
        let mut out = [Complex::new(0.0, 0.0); 2];
        for (i, slot) in out.iter_mut().enumerate() {
            let x = tau.component(i);
            let coarse = self.gamma[i].finite_difference(x, h)?;
            let fine = self.gamma[i].finite_difference(x, 0.5 * h)?;
            if (coarse - fine).norm() > 1e-6 {
                return Err(PathError::NotDifferentiable(tau));
            }
            *slot = fine;
        }
        Ok(BiComplex::from_idempotent(out[0], out[1]))
    }

    /// `v(Γ; P) = Σ |Γ(ζ_k) - Γ(ζ_{k-1})|_D`.
    pub fn variation_sum(&self, partition: &DPartition) -> Result<Hyperbolic, PathError> {
        let tol = Tolerance::default();
        let span = partition.interval();
        if span.lo().try_cmp_d(self.interval.lo(), tol) != crate::numbers::DOrdering::Equal
            || span.hi().try_cmp_d(self.interval.hi(), tol) != crate::numbers::DOrdering::Equal
        {
            return Err(PathError::DomainMismatch);
        }
        let pts = partition.points();
        Ok(exec::try_sum(pts.len() - 1, |k| {
            Ok::<_, EvalError>(
                (self.eval_unchecked(pts[k + 1])? - self.eval_unchecked(pts[k])?).d_modulus(),
            )
        })?)
    }

    /// Variation sums over dyadic refinements of the chain through the component
    /// breakpoints (the trivial partition for smooth paths) until two successive
    /// levels agree within `tol` in both components.
    pub fn total_variation(&self, tol: f64, max_levels: u32) -> Result<VariationReport, PathError> {
        let (lo, hi) = (self.interval.lo(), self.interval.hi());
        let exact: Vec<Option<f64>> = (0..2)
            .map(|i| self.gamma[i].exact_variation(lo.component(i), hi.component(i)))
            .collect();
        if let [Some(v1), Some(v2)] = exact[..] {
            return Ok(VariationReport {
                total: Hyperbolic::new(v1, v2),
                per_component: (v1, v2),
                partition_used: None,
                converged: true,
                levels: 0,
            });
        }
        let base = self.breakpoint_chain();
        let mut prev: Option<Hyperbolic> = None;
        let mut cache: Option<Vec<BiComplex>> = None;
        let mut level = 0;
        let (total, converged) = loop {
            let steps = (base.len() - 1) << level;
            let point = |k: usize| chain_point(&base, level, k);
            let mut sum: Hyperbolic = if steps <= CACHE_STEPS {
                let values = level_values(cache.take(), steps, |k| self.eval_unchecked(point(k)))?;
                let sum = exec::try_sum(steps, |k| Ok::<_, EvalError>((values[k + 1] - values[k]).d_modulus()))?;
                cache = Some(values);
                sum
            } else {
                exec::try_sum(steps, |k| {
                    Ok::<_, EvalError>((self.eval_unchecked(point(k + 1))? - self.eval_unchecked(point(k))?).d_modulus())
                })?
            };
            if let Some(v) = exact[0] {
                sum.v1 = v;
            }
            if let Some(v) = exact[1] {
                sum.v2 = v;
            }
            if let Some(p) = prev {
                let diff = (sum - p).d_modulus();
                if level >= MIN_LEVELS && diff.v1 < tol && diff.v2 < tol {
                    break (sum, true);
                }
            }
            if level >= max_levels {
                break (sum, false);
            }
            prev = Some(sum);
            level += 1;
        };
        let partition_used = (!self.interval.is_degenerate(Tolerance::default()))
            .then(|| DPartition::from_chain(intervals::dyadic_points(&base, level)));
        Ok(VariationReport {
            total,
            per_component: (total.v1, total.v2),
            partition_used,
            converged,
            levels: level,
        })
    }

    /// `∫ |Γ'(τ)|_D dτ`, componentwise adaptive quadrature split at breakpoints.
    pub fn length_smooth(&self, quad_tol: f64) -> Result<Hyperbolic, PathError> {
        let h = self.fd_step();
        let mut out = [0.0; 2];
        for (i, slot) in out.iter_mut().enumerate() {
            let gamma = &self.gamma[i];
            let (a, b) = gamma.domain();
            let mut knots = vec![a];
            knots.extend(gamma.breakpoints());
            knots.push(b);
            let piece_tol = quad_tol / (knots.len() - 1) as f64;
            for w in knots.windows(2) {
                // stay inside the piece so one-sided slopes are used at breakpoints
                let (lo, hi) = (w[0], w[1]);
                let speed = |x: f64| {
                    let x = x.clamp(lo, hi);
                    gamma
                        .derivative_or_fd(x, h)
                        .map(|d| Complex::new(d.norm(), 0.0))
                };
                let r = quad::integrate(speed, lo, hi, piece_tol, 20_000).map_err(|e| match e {
                    QuadError::Eval(e) => PathError::Eval(e),
                    other => PathError::Quadrature(other.to_string()),
                })?;
                *slot += r.value.re;
            }
        }
        Ok(Hyperbolic::new(out[0], out[1]))
    }

    /// `(Γ)_τ = V(Γ; [α, τ]_D)`, the best estimate after at most
    /// [`DEFAULT_MAX_LEVELS`] refinements.
    pub fn arc_length_function(&self, tau: Hyperbolic, tol: f64) -> Result<Hyperbolic, PathError> {
        let sub = DInterval::new(self.interval.lo(), tau).map_err(|_| PathError::OutOfDomain(tau))?;
        if !self.interval.contains(tau, Tolerance::default()) {
            return Err(PathError::OutOfDomain(tau));
        }
        Ok(self.restrict(sub)?.total_variation(tol, DEFAULT_MAX_LEVELS)?.total)
    }

    /// The same map on a sub-interval.
    pub fn restrict(&self, sub: DInterval) -> Result<Self, PathError> {
        let tol = Tolerance::default();
        if !self.interval.contains(sub.lo(), tol) || !self.interval.contains(sub.hi(), tol) {
            return Err(PathError::DomainMismatch);
        }
        Ok(Self {
            gamma: [
                self.gamma[0].with_domain(sub.projection(0))?,
                self.gamma[1].with_domain(sub.projection(1))?,
            ],
            interval: sub,
        })
    }

    /// `(-Γ)(τ) = Γ(-τ)` on `[-β, -α]_D`.
    pub fn reverse(&self) -> Self {
        Self {
            gamma: [self.gamma[0].reversed(), self.gamma[1].reversed()],
            interval: self.interval.negated(),
        }
    }

    /// `(Γ + c)(τ) = Γ(τ) + c`.
    pub fn translate(&self, c: BiComplex) -> Self {
        let shift = |i: usize| {
            ComponentPath::combination(vec![(Complex::new(1.0, 0.0), self.gamma[i].clone())], c.component(i))
                .expect("single term")
        };
        Self {
            gamma: [shift(0), shift(1)],
            interval: self.interval,
        }
    }

    /// `aΓ + bΛ` for paths on the same interval.
    pub fn combine(a: BiComplex, gamma: &DPath, b: BiComplex, lambda: &DPath) -> Result<Self, PathError> {
        if gamma.interval != lambda.interval {
            return Err(PathError::DomainMismatch);
        }
        let component = |i: usize| {
            ComponentPath::combination(
                vec![
                    (a.component(i), gamma.gamma[i].clone()),
                    (b.component(i), lambda.gamma[i].clone()),
                ],
                Complex::new(0.0, 0.0),
            )
        };
        Ok(Self {
            gamma: [component(0)?, component(1)?],
            interval: gamma.interval,
        })
    }

    /// `Γ(β)` and `Γ(α)` agree within `tol` in both components.
    pub fn is_closed(&self, tol: f64) -> Result<bool, PathError> {
        let gap = (self.end()? - self.start()?).d_modulus();
        Ok(gap.v1 < tol && gap.v2 < tol)
    }

    /// `n + 1` points `(τ, Γ(τ))` along the diagonal chain from `α` to `β`.
    pub fn trace(&self, n: usize) -> Result<Vec<(Hyperbolic, BiComplex)>, PathError> {
        let n = n.max(1);
        let (lo, len) = (self.interval.lo(), self.interval.length());
        (0..=n)
            .map(|k| {
                let tau = if k == n {
                    self.interval.hi()
                } else {
                    lo + len.scale(k as f64 / n as f64)
                };
                Ok((tau, self.eval_unchecked(tau)?))
            })
            .collect()
    }
}

/// Largest level size whose path values are kept for the next level.
pub(crate) const CACHE_STEPS: usize = 1 << 20;

/// Path values at the `steps + 1` points of a level. Points of the previous
/// level are exactly the even points of this one, so their values are reused.
pub(crate) fn level_values<V, E, G>(prev: Option<Vec<V>>, steps: usize, value: G) -> Result<Vec<V>, E>
where
    V: Copy + Send + Sync,
    E: Send,
    G: Fn(usize) -> Result<V, E> + Sync + Send,
{
    match prev {
        Some(prev) if 2 * (prev.len() - 1) == steps => {
            let odd: Vec<usize> = (0..steps / 2).map(|k| 2 * k + 1).collect();
            let fresh = exec::map_collect(&odd, |&k| value(k)).into_iter().collect::<Result<Vec<V>, E>>()?;
            let mut out = Vec::with_capacity(steps + 1);
            for (k, v) in prev.iter().enumerate() {
                out.push(*v);
                if let Some(f) = fresh.get(k) {
                    out.push(*f);
                }
            }
            Ok(out)
        }
        _ => {
            let all: Vec<usize> = (0..=steps).collect();
            exec::map_collect(&all, |&k| value(k)).into_iter().collect()
        }
    }
}

/// Writes trace samples as CSV rows `tau_v1,tau_v2,w1_re,w1_im,w2_re,w2_im`.
pub fn write_trace_csv<W: Write>(mut out: W, samples: &[(Hyperbolic, BiComplex)]) -> io::Result<()> {
    writeln!(out, "tau_v1,tau_v2,w1_re,w1_im,w2_re,w2_im")?;
    for (tau, z) in samples {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            tau.v1, tau.v2, z.w1.re, z.w1.im, z.w2.re, z.w2.im
        )?;
    }
    Ok(())
}

/// Point `k` of the `level`-fold dyadic refinement of the chain `base`.
#[inline]
pub(crate) fn chain_point(base: &[Hyperbolic], level: u32, k: usize) -> Hyperbolic {
    let (j, r) = intervals::dyadic_step(k, level);
    if j + 1 >= base.len() {
        return base[base.len() - 1];
    }
    let (a, b) = (base[j], base[j + 1]);
    Hyperbolic::new(
        intervals::dyadic_point(a.v1, b.v1, r, level),
        intervals::dyadic_point(a.v2, b.v2, r, level),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn unit() -> DInterval {
        DInterval::new(Hyperbolic::ZERO, Hyperbolic::ONE).unwrap()
    }

    fn power_path(p1: i32, d1: (f64, f64), p2: i32, d2: (f64, f64)) -> DPath {
        let comp = |p: i32, d| {
            ComponentPath::callback_with_derivative(
                d,
                move |x| c(x.powi(p), 0.0),
                move |x| c(p as f64 * x.powi(p - 1), 0.0),
            )
            .unwrap()
        };
        DPath::new(comp(p1, d1), comp(p2, d2)).unwrap()
    }

    fn bicircle() -> DPath {
        DPath::bicircle(BiComplex::ZERO, 1.0, 1.0).unwrap()
    }

    fn constant() -> DPath {
        let k = |_: f64| c(0.5, -2.0);
        DPath::new(
            ComponentPath::callback((0.0, 1.0), k).unwrap(),
            ComponentPath::callback((0.0, 1.0), k).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let id = DPath::identity(unit());
        assert_eq!(id.eval(Hyperbolic::splat(0.5)).unwrap(), BiComplex::from_real(0.5));
        let g = power_path(2, (0.0, 3.0), 3, (0.0, 3.0));
        assert_eq!(
            g.eval(Hyperbolic::new(2.0, 3.0)).unwrap(),
            Hyperbolic::new(4.0, 27.0).to_bicomplex()
        );
        assert_eq!(g.eval(Hyperbolic::ZERO).unwrap(), g.start().unwrap());
        assert!(matches!(
            id.eval(Hyperbolic::new(0.5, 1.5)),
            Err(PathError::OutOfDomain(_))
        ));
    }

    #[test]
    fn derivative_examples() {
        let g = power_path(2, (0.0, 3.0), 2, (0.0, 3.0));
        let d = g.derivative(Hyperbolic::new(1.0, 2.0)).unwrap();
        assert_eq!(d, Hyperbolic::new(2.0, 4.0).to_bicomplex());
        let d = constant().derivative(Hyperbolic::splat(0.3)).unwrap();
        assert!(d.d_modulus().v1 < 1e-9 && d.d_modulus().v2 < 1e-9);
        let d = DPath::identity(unit()).derivative(Hyperbolic::splat(0.7)).unwrap();
        assert_eq!(d, BiComplex::ONE);
    }

    #[test]
    fn finite_difference_fallback() {
        let sq = |x: f64| c(x * x, x);
        let g = DPath::new(
            ComponentPath::callback((0.0, 1.0), sq).unwrap(),
            ComponentPath::callback((0.0, 2.0), sq).unwrap(),
        )
        .unwrap();
        for tau in [Hyperbolic::new(0.0, 2.0), Hyperbolic::new(0.5, 1.0), Hyperbolic::new(1.0, 0.0)] {
            let d = g.derivative(tau).unwrap();
            assert!((d.w1 - c(2.0 * tau.v1, 1.0)).norm() < 1e-8);
            assert!((d.w2 - c(2.0 * tau.v2, 1.0)).norm() < 1e-8);
        }
        let jumpy = |x: f64| c(if x < 0.5 { 0.0 } else { 1.0 }, 0.0);
        let g = DPath::new(
            ComponentPath::callback((0.0, 1.0), jumpy).unwrap(),
            ComponentPath::callback((0.0, 1.0), jumpy).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            g.derivative(Hyperbolic::splat(0.5)),
            Err(PathError::NotDifferentiable(_))
        ));
    }

    #[test]
    fn variation_sum_examples() {
        let p = DPartition::uniform(&unit(), 2, Tolerance::default()).unwrap();
        let v = DPath::identity(unit()).variation_sum(&p).unwrap();
        assert!((v - Hyperbolic::ONE).d_modulus().v1 < 1e-15);
        let sq = power_path(2, (0.0, 1.0), 2, (0.0, 1.0));
        let v = sq.variation_sum(&p).unwrap();
        assert!((v.v1 - 1.0).abs() < 1e-15 && (v.v2 - 1.0).abs() < 1e-15);
        assert_eq!(constant().variation_sum(&p).unwrap(), Hyperbolic::ZERO);
        let other = DInterval::new(Hyperbolic::ZERO, Hyperbolic::splat(2.0)).unwrap();
        let q = DPartition::trivial(&other, Tolerance::default()).unwrap();
        assert_eq!(sq.variation_sum(&q), Err(PathError::DomainMismatch));
    }

    #[test]
    fn total_variation_examples() {
        let big = DInterval::new(Hyperbolic::ZERO, Hyperbolic::new(2.0, 3.0)).unwrap();
        let r = DPath::identity(big).total_variation(1e-12, 20).unwrap();
        assert!(r.converged);
        assert!((r.total.v1 - 2.0).abs() < 1e-14 && (r.total.v2 - 3.0).abs() < 1e-14);
        let r = power_path(2, (0.0, 1.0), 2, (0.0, 2.0)).total_variation(1e-10, 24).unwrap();
        assert!(r.converged);
        assert!((r.total.v1 - 1.0).abs() < 1e-6 && (r.total.v2 - 4.0).abs() < 1e-6);
        let r = constant().total_variation(1e-12, 10).unwrap();
        assert_eq!(r.total, Hyperbolic::ZERO);
        assert!(r.converged);
        let p = r.partition_used.unwrap();
        assert_eq!(p.steps(), 1 << r.levels);
    }

    #[test]
    fn bicircle_variation_and_length() {
        let g = bicircle();
        let r = g.total_variation(1e-10, 24).unwrap();
        assert!(r.converged);
        assert!((r.total.v1 - TAU).abs() < 1e-9 && (r.total.v2 - TAU).abs() < 1e-9);
        let l = g.length_smooth(1e-12).unwrap();
        assert!((l.v1 - TAU).abs() < 1e-10 && (l.v2 - TAU).abs() < 1e-10);
        let l = DPath::identity(unit()).length_smooth(1e-12).unwrap();
        assert!((l.v1 - 1.0).abs() < 1e-14);
        let l = power_path(2, (0.0, 1.0), 2, (0.0, 1.0)).length_smooth(1e-12).unwrap();
        assert!((l.v1 - 1.0).abs() < 1e-12 && (l.v2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_variation_is_reported() {
        // x sin(1/x) near 0 has infinite variation
        let wild = |x: f64| {
            if x == 0.0 {
                c(0.0, 0.0)
            } else {
                c(x * (1.0 / x).sin(), 0.0)
            }
        };
        let g = DPath::new(
            ComponentPath::callback((0.0, 1.0), wild).unwrap(),
            ComponentPath::callback((0.0, 1.0), wild).unwrap(),
        )
        .unwrap();
        let r = g.total_variation(1e-9, 12).unwrap();
        assert!(!r.converged);
        assert_eq!(r.levels, 12);
    }

    #[test]
    fn arc_length_examples() {
        let id = DPath::identity(unit());
        let a = id.arc_length_function(Hyperbolic::splat(0.5), 1e-12).unwrap();
        assert!((a.v1 - 0.5).abs() < 1e-14 && (a.v2 - 0.5).abs() < 1e-14);
        assert_eq!(id.arc_length_function(Hyperbolic::ZERO, 1e-12).unwrap(), Hyperbolic::ZERO);
        let half = bicircle().arc_length_function(Hyperbolic::splat(PI), 1e-11).unwrap();
        assert!((half.v1 - PI).abs() < 1e-9 && (half.v2 - PI).abs() < 1e-9);
        // one component pinned at the start
        let part = bicircle().arc_length_function(Hyperbolic::new(PI, 0.0), 1e-11).unwrap();
        assert!((part.v1 - PI).abs() < 1e-9 && part.v2 == 0.0);
        assert!(matches!(
            id.arc_length_function(Hyperbolic::splat(2.0), 1e-9),
            Err(PathError::OutOfDomain(_))
        ));
    }

    #[test]
    fn reverse_examples() {
        let id = DPath::identity(unit());
        let rev = id.reverse();
        assert_eq!(rev.interval().lo(), -Hyperbolic::ONE);
        assert_eq!(rev.eval(-Hyperbolic::ONE).unwrap(), BiComplex::ONE);
        let g = power_path(3, (-1.0, 2.0), 2, (0.5, 1.5));
        let back = g.reverse().reverse();
        for k in 0..10 {
            let tau = Hyperbolic::new(-1.0 + 0.3 * k as f64, 0.5 + 0.1 * k as f64);
            assert_eq!(back.eval(tau).unwrap(), g.eval(tau).unwrap());
        }
        let circle = DPath::bicircle(BiComplex::J, 2.0, 0.25).unwrap();
        assert_eq!(circle.reverse().start().unwrap(), circle.end().unwrap());
        let v = circle.total_variation(1e-10, 24).unwrap().total;
        let rv = circle.reverse().total_variation(1e-10, 24).unwrap().total;
        assert!((v - rv).d_modulus().v1 < 1e-12 && (v - rv).d_modulus().v2 < 1e-12);
    }

    #[test]
    fn translate_examples() {
        let id = DPath::identity(unit());
        assert_eq!(id.translate(BiComplex::ONE).eval(Hyperbolic::ZERO).unwrap(), BiComplex::ONE);
        let same = id.translate(BiComplex::ZERO);
        for k in 0..=4 {
            let tau = Hyperbolic::new(0.25 * k as f64, 0.2 * k as f64);
            assert_eq!(same.eval(tau).unwrap(), id.eval(tau).unwrap());
        }
        let moved = bicircle().translate(BiComplex::J);
        let opposite = Hyperbolic::splat(PI);
        let mid = (moved.start().unwrap() + moved.eval(opposite).unwrap()).scale(0.5);
        assert!((mid - BiComplex::J).d_modulus().v1 < 1e-15 && (mid - BiComplex::J).d_modulus().v2 < 1e-15);
    }

    #[test]
    fn closedness() {
        assert!(bicircle().is_closed(1e-12).unwrap());
        assert!(!DPath::identity(unit()).is_closed(1e-12).unwrap());
        assert!(constant().is_closed(1e-12).unwrap());
    }

    #[test]
    fn polyline_is_exact() {
        let samples = vec![(0.0, c(0.0, 0.0)), (1.0, c(3.0, 4.0)), (3.0, c(3.0, 0.0))];
        let poly = ComponentPath::polyline(samples).unwrap();
        let g = DPath::new(poly.clone(), poly.clone()).unwrap();
        let r = g.total_variation(1e-12, 10).unwrap();
        assert_eq!(r.total, Hyperbolic::splat(9.0));
        assert_eq!(r.levels, 0);
        assert_eq!(poly.exact_variation(0.5, 2.0), Some(2.5 + 2.0));
        let l = g.length_smooth(1e-12).unwrap();
        assert!((l.v1 - 9.0).abs() < 1e-12);
        assert!(ComponentPath::polyline(vec![(0.0, c(0.0, 0.0)), (0.0, c(1.0, 0.0))]).is_err());
        // mixed: one exact polyline, one refined arc
        let mixed = DPath::new(poly, ComponentPath::arc(c(0.0, 0.0), 1.0, 0.0, 3.0).unwrap()).unwrap();
        let r = mixed.total_variation(1e-10, 24).unwrap();
        assert_eq!(r.total.v1, 9.0);
        assert!((r.total.v2 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn expression_components() {
        let g1 = ComponentPath::expression(crate::expr::parse("exp(i1*t)").unwrap(), "t", 0, (0.0, TAU)).unwrap();
        assert!((g1.eval(PI).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((g1.derivative(0.0).unwrap().unwrap() - c(0.0, 1.0)).norm() < 1e-15);
        let bad = ComponentPath::expression(crate::expr::parse("t + s").unwrap(), "t", 0, (0.0, 1.0));
        assert!(matches!(bad, Err(PathError::InvalidComponent(_))));
        // component index selects the idempotent part
        let g2 = ComponentPath::expression(crate::expr::parse("[t | 2*t]").unwrap(), "s", 1, (0.0, 1.0));
        assert!(g2.is_err());
        let g2 = ComponentPath::expression(crate::expr::parse("[s | 2*s]").unwrap(), "s", 1, (0.0, 1.0)).unwrap();
        assert_eq!(g2.eval(0.5).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn trace_is_componentwise() {
        let g = DPath::bicircle(BiComplex::I1, 0.5, 1.0).unwrap();
        let samples = g.trace(16).unwrap();
        assert_eq!(samples.len(), 17);
        for (tau, z) in &samples {
            assert_eq!(z.w1, g.component(0).eval(tau.v1).unwrap());
            assert_eq!(z.w2, g.component(1).eval(tau.v2).unwrap());
        }
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &samples[..2]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("tau_v1,tau_v2,w1_re,w1_im,w2_re,w2_im"));
        assert_eq!(lines.next(), Some("0,0,0.5,1,0.5,1"));
    }

    #[test]
    fn piecewise_components() {
        // a unit segment followed by a half circle of radius 1 traversed over [1, 1 + π]
        let seg = ComponentPath::segment(c(-1.0, -1.0), c(1.0, -1.0), (-1.0, 1.0)).unwrap();
        let arc = ComponentPath::callback_with_derivative(
            (1.0, 1.0 + PI),
            |x: f64| c(1.0, 0.0) + Complex::from_polar(1.0, x - 1.0 - PI / 2.0),
            |x: f64| Complex::new(0.0, 1.0) * Complex::from_polar(1.0, x - 1.0 - PI / 2.0),
        )
        .unwrap();
        let g1 = ComponentPath::piecewise(vec![seg.clone(), arc]).unwrap();
        assert_eq!(g1.domain(), (-1.0, 1.0 + PI));
        assert_eq!(g1.breakpoints(), vec![1.0]);
        assert!((g1.eval(1.0 + PI).unwrap() - c(1.0, 1.0)).norm() < 1e-15);
        assert_eq!(g1.derivative(0.0).unwrap().unwrap(), c(1.0, 0.0));
        let g2 = ComponentPath::segment(c(0.0, 0.0), c(3.0, 4.0), (0.0, 1.0)).unwrap();
        let path = DPath::new(g1, g2).unwrap();
        let v = path.total_variation(1e-12, 24).unwrap();
        assert!(v.converged);
        assert!((v.total.v1 - (2.0 + PI)).abs() < 1e-10, "{}", v.total);
        assert!((v.total.v2 - 5.0).abs() < 1e-12);

        let gap = ComponentPath::segment(c(5.0, 0.0), c(6.0, 0.0), (1.0, 2.0)).unwrap();
        assert!(matches!(
            ComponentPath::piecewise(vec![seg.clone(), gap]),
            Err(PathError::InvalidComponent(_))
        ));
        let apart = ComponentPath::segment(c(1.0, -1.0), c(2.0, 0.0), (3.0, 4.0)).unwrap();
        assert!(matches!(ComponentPath::piecewise(vec![seg, apart]), Err(PathError::DomainMismatch)));
    }

    #[test]
    fn piecewise_polylines_are_exact() {
        let a = ComponentPath::polyline(vec![(0.0, c(0.0, 0.0)), (1.0, c(3.0, 4.0))]).unwrap();
        let b = ComponentPath::polyline(vec![(1.0, c(3.0, 4.0)), (2.0, c(3.0, 5.0)), (3.0, c(3.0, 7.0))]).unwrap();
        let g = ComponentPath::piecewise(vec![a, b]).unwrap();
        assert_eq!(g.exact_variation(0.0, 3.0), Some(8.0));
        assert_eq!(g.exact_variation(0.5, 2.5), Some(2.5 + 2.0));
        assert_eq!(g.breakpoints(), vec![1.0, 2.0]);
    }
}
