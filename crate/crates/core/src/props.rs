//! Seeded property suites over random paths, integrands and bicomplex numbers.
//!
//! Every random instance is built from job-file definitions, so a failing case
//! is reported as a TOML fragment that can be pasted into a job.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::expr::{BinOp, Constant, Expr};
use crate::integrate::{self, DMap, Integrand, IntegrationConfig, QuadConfig, Tag};
use crate::intervals::{DInterval, DPartition};
use crate::job::{FunctionDef, PathDef};
use crate::numbers::{self, BiComplex, Complex, DOrdering, Hyperbolic, Tolerance};
use crate::paths::{ComponentPath, DPath, RealMap};

pub const SUITES: &[&str] = &[
    "algebra",
    "refinement",
    "subadditivity",
    "variation-decomposition",
    "smooth-length",
    "tag-independence",
    "oracle-equality",
    "linearity",
    "additivity",
    "orientation",
    "translation",
    "reparametrization",
    "ml-bound",
    "ftc",
    "closed-curve",
    "smooth-reduction",
];

/// Tolerance for the ring axioms, per idempotent component.
pub const RING_TOL: f64 = 1e-12;
/// Tolerance used by the Left/Midpoint/Right comparison.
pub const TAG_TOL: f64 = 1e-5;
/// Tolerance of the integrals in the remaining integration suites.
pub const SUITE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropsError {
    #[error("unknown suite '{0}'; known suites are {list}, all", list = SUITES.join(", "))]
    UnknownSuite(String),
}

pub fn check_suite_name(name: &str) -> Result<(), PropsError> {
    if name == "all" || SUITES.contains(&name) {
        Ok(())
    } else {
        Err(PropsError::UnknownSuite(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub case: usize,
    pub property: String,
    pub detail: String,
    /// The instance as a job-file fragment.
    pub fragment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub failures: Vec<Failure>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `cases` instances of a suite (or of every suite for `"all"`).
pub fn run_suite(name: &str, seed: u64, cases: usize) -> Result<Vec<SuiteReport>, PropsError> {
    check_suite_name(name)?;
    let names: Vec<&str> = if name == "all" { SUITES.to_vec() } else { vec![name] };
    Ok(names.into_iter().map(|n| run_one(n, seed, cases)).collect())
}

fn run_one(name: &str, seed: u64, cases: usize) -> SuiteReport {
    let check = suite_fn(name);
    let indices: Vec<usize> = (0..cases).collect();
    let failures = exec::map_collect(&indices, |&k| {
        let mut case = Case::new(seed, k);
        check(&mut case).err().map(|fail| Failure {
            case: k,
            property: fail.property,
            detail: fail.detail,
            fragment: case.fragment(),
        })
    });
    SuiteReport {
        suite: name.to_string(),
        seed,
        cases,
        failures: failures.into_iter().flatten().collect(),
    }
}

type Check = fn(&mut Case) -> Result<(), Fail>;

fn suite_fn(name: &str) -> Check {
    match name {
        "algebra" => algebra,
        "refinement" => refinement,
        "subadditivity" => subadditivity,
        "variation-decomposition" => variation_decomposition,
        "smooth-length" => smooth_length,
        "tag-independence" => tag_independence,
        "oracle-equality" => oracle_equality,
        "linearity" => linearity,
        "additivity" => additivity,
        "orientation" => orientation,
        "translation" => translation,
        "reparametrization" => reparametrization,
        "ml-bound" => ml_bound,
        "ftc" => ftc,
        "closed-curve" => closed_curve,
        "smooth-reduction" => smooth_reduction,
        _ => unreachable!("suite names are checked first"),
    }
}

#[derive(Debug)]
pub struct Fail {
    property: String,
    detail: String,
}

fn fail(property: &str, detail: impl Into<String>) -> Fail {
    Fail {
        property: property.to_string(),
        detail: detail.into(),
    }
}

fn ensure(ok: bool, property: &str, detail: impl FnOnce() -> String) -> Result<(), Fail> {
    if ok {
        Ok(())
    } else {
        Err(fail(property, detail()))
    }
}

impl<E: std::error::Error> From<E> for Fail {
    fn from(e: E) -> Self {
        fail("evaluation", e.to_string())
    }
}

#[derive(Default, Serialize)]
struct Fragment {
    params: BTreeMap<String, String>,
    paths: BTreeMap<String, PathDef>,
    functions: BTreeMap<String, FunctionDef>,
}

/// One random instance: the generator plus everything it produced.
pub struct Case {
    rng: ChaCha8Rng,
    record: Fragment,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn complex_expr(z: Complex) -> Expr {
    let imag = || Expr::binary(BinOp::Mul, Expr::Num(z.im), Expr::Const(Constant::I1));
    match (z.re == 0.0, z.im == 0.0) {
        (_, true) => Expr::Num(z.re),
        (true, false) => imag(),
        (false, false) => Expr::binary(BinOp::Add, Expr::Num(z.re), imag()),
    }
}

fn bicomplex_expr(z: BiComplex) -> Expr {
    Expr::Idem(Box::new(complex_expr(z.w1)), Box::new(complex_expr(z.w2)))
}

fn power(var: &str, k: i32) -> Expr {
    match k {
        0 => Expr::Num(1.0),
        1 => Expr::Var(var.to_string()),
        _ => Expr::pow(Expr::Var(var.to_string()), k),
    }
}

fn sum(terms: Vec<Expr>) -> Expr {
    terms
        .into_iter()
        .reduce(|a, b| Expr::binary(BinOp::Add, a, b))
        .unwrap_or(Expr::Num(0.0))
}

fn near(a: BiComplex, b: BiComplex, tol: f64) -> bool {
    let d = (a - b).d_modulus();
    d.v1 < tol && d.v2 < tol
}

fn gap(a: BiComplex, b: BiComplex) -> String {
    format!("{} vs {} (gap {})", a.to_idempotent_string(), b.to_idempotent_string(), (a - b).d_modulus())
}

impl Case {
    fn new(seed: u64, case: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(case as u64);
        Self {
            rng,
            record: Fragment::default(),
        }
    }

    fn fragment(&self) -> String {
        toml::to_string(&self.record).unwrap_or_else(|e| format!("# unserializable instance: {e}"))
    }

    fn real(&mut self, lo: f64, hi: f64) -> f64 {
        round3(self.rng.random_range(lo..hi))
    }

    fn complex(&mut self, r: f64) -> Complex {
        Complex::new(self.real(-r, r), self.real(-r, r))
    }

    fn bicomplex(&mut self, name: &str, r: f64) -> BiComplex {
        let z = BiComplex::from_idempotent(self.complex(r), self.complex(r));
        self.record.params.insert(name.to_string(), z.to_idempotent_string());
        z
    }

    fn param(&mut self, name: &str, value: impl ToString) {
        self.record.params.insert(name.to_string(), value.to_string());
    }

    fn domain(&mut self) -> [f64; 2] {
        let a = self.real(-1.0, 1.0);
        [a, a + self.real(0.5, 1.5)]
    }

    /// A smooth component: polynomial, circular arc or both, scaled by `r`.
    fn component_expr(&mut self, var: &str, r: f64) -> Expr {
        let poly = |c: &mut Case, degree: i32| {
            sum((0..=degree)
                .map(|k| Expr::binary(BinOp::Mul, complex_expr(c.complex(r)), power(var, k)))
                .collect())
        };
        let arc = |c: &mut Case| {
            let radius = c.real(0.3 * r, r);
            let speed = c.real(0.5, 2.0);
            let phase = c.real(-3.0, 3.0);
            let angle = Expr::binary(
                BinOp::Add,
                Expr::binary(BinOp::Mul, Expr::Num(speed), Expr::Var(var.to_string())),
                Expr::Num(phase),
            );
            Expr::binary(
                BinOp::Mul,
                Expr::Num(radius),
                Expr::call(crate::expr::Func::Exp, Expr::binary(BinOp::Mul, Expr::Const(Constant::I1), angle)),
            )
        };
        match self.rng.random_range(0..3) {
            0 => {
                let degree = self.rng.random_range(1..=3);
                poly(self, degree)
            }
            1 => {
                let center = complex_expr(self.complex(r));
                Expr::binary(BinOp::Add, center, arc(self))
            }
            _ => {
                let p = poly(self, 1);
                Expr::binary(BinOp::Add, p, arc(self))
            }
        }
    }

    fn add_path(&mut self, name: &str, def: PathDef) -> Result<DPath, Fail> {
        let path = def.build(&format!("paths.{name}"))?;
        self.record.paths.insert(name.to_string(), def);
        Ok(path)
    }

    fn smooth_path_on(&mut self, name: &str, domains: [[f64; 2]; 2], r: f64) -> Result<DPath, Fail> {
        let def = PathDef::Expr {
            gamma1: self.component_expr("t", r).to_string(),
            gamma2: self.component_expr("s", r).to_string(),
            domain1: domains[0],
            domain2: domains[1],
        };
        self.add_path(name, def)
    }

    fn smooth_path(&mut self, name: &str) -> Result<DPath, Fail> {
        let domains = [self.domain(), self.domain()];
        self.smooth_path_on(name, domains, 1.0)
    }

    fn polyline_samples(&mut self) -> Vec<[f64; 3]> {
        let n = self.rng.random_range(2..=6);
        let mut t = self.real(-1.0, 1.0);
        (0..n)
            .map(|_| {
                let z = self.complex(1.0);
                let row = [t, z.re, z.im];
                t = round3(t + self.real(0.1, 0.8));
                row
            })
            .collect()
    }

    /// Smooth, polyline, or a mix of both per component.
    fn rectifiable_path(&mut self, name: &str) -> Result<DPath, Fail> {
        if self.rng.random_bool(0.7) {
            return self.smooth_path(name);
        }
        let def = PathDef::Polyline {
            samples1: self.polyline_samples(),
            samples2: self.polyline_samples(),
        };
        self.add_path(name, def)
    }

    fn closed_path(&mut self, name: &str) -> Result<DPath, Fail> {
        if self.rng.random_bool(0.5) {
            let center = BiComplex::from_idempotent(self.complex(1.0), self.complex(1.0));
            let def = PathDef::Bicircle {
                center: bicomplex_expr(center).to_string(),
                radius: self.real(0.3, 2.0),
                turns: self.rng.random_range(1..=2) as f64,
            };
            return self.add_path(name, def);
        }
        // trigonometric loops c + a exp(i1 t) + b exp(2 i1 t) over a full period
        let loop_expr = |c: &mut Case, var: &str| {
            let terms = (0..3)
                .map(|k| {
                    let coeff = complex_expr(c.complex(1.0));
                    if k == 0 {
                        return coeff;
                    }
                    let angle = Expr::binary(BinOp::Mul, Expr::Num(k as f64), Expr::Var(var.to_string()));
                    let wave = Expr::call(
                        crate::expr::Func::Exp,
                        Expr::binary(BinOp::Mul, Expr::Const(Constant::I1), angle),
                    );
                    Expr::binary(BinOp::Mul, coeff, wave)
                })
                .collect();
            sum(terms).to_string()
        };
        let def = PathDef::Expr {
            gamma1: loop_expr(self, "t"),
            gamma2: loop_expr(self, "s"),
            domain1: [0.0, TAU],
            domain2: [0.0, TAU],
        };
        self.add_path(name, def)
    }

    /// Random polynomial `Σ c_k z^k` with bicomplex coefficients; returns it and a primitive.
    fn polynomial(&mut self, name: &str, max_degree: i32, r: f64) -> Result<(Integrand, Integrand), Fail> {
        let degree = self.rng.random_range(0..=max_degree);
        let coeffs: Vec<BiComplex> = (0..=degree)
            .map(|_| BiComplex::from_idempotent(self.complex(r), self.complex(r)))
            .collect();
        let f = sum(coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| Expr::binary(BinOp::Mul, bicomplex_expr(*c), power("z", k as i32)))
            .collect());
        let primitive = sum(coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let k = k as i32;
                Expr::binary(
                    BinOp::Div,
                    Expr::binary(BinOp::Mul, bicomplex_expr(*c), power("z", k + 1)),
                    Expr::Num((k + 1) as f64),
                )
            })
            .collect());
        let f_def = FunctionDef::single(f.to_string());
        let p_def = FunctionDef::single(primitive.to_string());
        let out = (f_def.build(name)?, p_def.build(name)?);
        self.record.functions.insert(name.to_string(), f_def);
        self.record.functions.insert(format!("{name}_primitive"), p_def);
        Ok(out)
    }

    /// Random chain `α = ζ_0 ≺ ... ≺ ζ_n = β` with `n` steps.
    fn chain(&mut self, interval: &DInterval, n: usize) -> Result<DPartition, Fail> {
        let weights: Vec<(f64, f64)> = (0..n).map(|_| (self.real(0.2, 1.0), self.real(0.2, 1.0))).collect();
        let total = weights.iter().fold((0.0, 0.0), |acc, w| (acc.0 + w.0, acc.1 + w.1));
        let (lo, len) = (interval.lo(), interval.length());
        let mut acc = (0.0, 0.0);
        let mut points = vec![lo];
        for (k, w) in weights.iter().enumerate() {
            acc = (acc.0 + w.0, acc.1 + w.1);
            points.push(if k + 1 == n {
                interval.hi()
            } else {
                lo + Hyperbolic::new(len.v1 * acc.0 / total.0, len.v2 * acc.1 / total.1)
            });
        }
        Ok(DPartition::new(interval, points, Tolerance::default())?)
    }

    /// Increasing map of `[λ, μ]_D` onto `interval`.
    fn monotone_map(&mut self, interval: &DInterval) -> Result<DMap, Fail> {
        let lam = Hyperbolic::new(self.real(-2.0, 2.0), self.real(-2.0, 2.0));
        let mu = lam + Hyperbolic::new(self.real(0.5, 3.0), self.real(0.5, 3.0));
        let domain = DInterval::new(lam, mu)?;
        let mut shapes = Vec::new();
        let mut maps = Vec::new();
        for i in 0..2 {
            let (a, b) = interval.projection(i);
            let (l, m) = domain.projection(i);
            let kind = self.rng.random_range(0..3);
            let p = self.real(0.05, 0.95);
            let shape: fn(f64, f64) -> f64 = match kind {
                0 => |u, p| u.powi(1 + (3.0 * p) as i32),
                1 => |u, p| (u + 2.0 * p * u * u) / (1.0 + 2.0 * p),
                _ => |u, p| u + p * (TAU * u).sin() / TAU,
            };
            shapes.push(format!("{}:{p}", ["power", "quadratic", "wave"][kind]));
            maps.push(RealMap::new(move |x| {
                let u = (x - l) / (m - l);
                if u >= 1.0 {
                    b
                } else {
                    a + (b - a) * shape(u, p)
                }
            }));
        }
        self.param("phi.shapes", shapes.join(", "));
        self.param("phi.domain", format!("[{lam}, {mu}]"));
        let second = maps.pop().expect("two maps");
        let first = maps.pop().expect("two maps");
        Ok(DMap::new(first, second, domain))
    }
}

fn cfg(tol: f64) -> IntegrationConfig {
    IntegrationConfig::with_tol(tol)
}

fn converged(r: &integrate::IntegralResult, what: &str) -> Result<BiComplex, Fail> {
    ensure(r.converged, "convergence", || format!("{what} did not converge ({} levels)", r.levels_used))?;
    Ok(r.value)
}

/// Scalar bounded variation of one component: uniform grids on each smooth
/// piece, doubling until stable.
fn scalar_variation(p: &ComponentPath, tol: f64) -> Result<f64, Fail> {
    let (a, b) = p.domain();
    if a == b {
        return Ok(0.0);
    }
    let mut knots = vec![a];
    knots.extend(p.breakpoints());
    knots.push(b);
    let mut prev = None;
    for level in 0..=22u32 {
        let n = 1usize << level;
        let mut total = 0.0;
        for piece in knots.windows(2) {
            let (lo, hi) = (piece[0], piece[1]);
            let mut z0 = p.eval(lo)?;
            for k in 1..=n {
                let x = if k == n { hi } else { lo + (hi - lo) * (k as f64 / n as f64) };
                let z1 = p.eval(x)?;
                total += (z1 - z0).norm();
                z0 = z1;
            }
        }
        if let Some(q) = prev {
            if level >= 3 && f64::abs(total - q) < tol {
                return Ok(total);
            }
        }
        prev = Some(total);
    }
    Err(fail("convergence", "scalar variation did not settle"))
}

fn algebra(c: &mut Case) -> Result<(), Fail> {
    let a = c.bicomplex("a", 10.0);
    let b = c.bicomplex("b", 10.0);
    let z = c.bicomplex("c", 10.0);
    let within = |x: BiComplex, y: BiComplex| near(x, y, RING_TOL);
    ensure(within(a + b, b + a), "commutativity", || gap(a + b, b + a))?;
    ensure(within(a * b, b * a), "commutativity", || gap(a * b, b * a))?;
    ensure(within((a + b) + z, a + (b + z)), "associativity", || gap((a + b) + z, a + (b + z)))?;
    ensure(within((a * b) * z, a * (b * z)), "associativity", || gap((a * b) * z, a * (b * z)))?;
    ensure(within(a * (b + z), a * b + a * z), "distributivity", || gap(a * (b + z), a * b + a * z))?;

    let (z1, z2) = a.to_cartesian();
    let back = BiComplex::from_cartesian(z1, z2)?;
    let scale = [a.w1.re, a.w1.im, a.w2.re, a.w2.im].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let ulp = scale.next_up() - scale;
    let coords = |x: BiComplex| [x.w1.re, x.w1.im, x.w2.re, x.w2.im];
    let worst = coords(back).iter().zip(coords(a)).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    ensure(worst <= 2.0 * ulp, "round-trip", || format!("{worst:e} exceeds 2 ulp of {scale}"))?;

    ensure(BiComplex::E1 + BiComplex::E2 == BiComplex::ONE, "idempotents", || "e1 + e2 != 1".into())?;
    ensure(BiComplex::E1 * BiComplex::E2 == BiComplex::ZERO, "idempotents", || "e1 e2 != 0".into())?;
    ensure(BiComplex::J * BiComplex::J == BiComplex::ONE, "idempotents", || "j^2 != 1".into())?;

    let (lhs, rhs) = ((a * b).d_modulus(), a.d_modulus() * b.d_modulus());
    let d = (lhs - rhs).d_modulus();
    ensure(d.v1 < 1e-10 && d.v2 < 1e-10, "multiplicativity", || format!("{lhs} vs {rhs}"))?;

    let tol = Tolerance::default();
    let order = (a + b).d_modulus().try_cmp_d(a.d_modulus() + b.d_modulus(), tol);
    ensure(order.is_le(), "triangle", || format!("{order:?}"))?;

    // order laws on comparable hyperbolic triples
    let x = Hyperbolic::new(c.real(-10.0, 10.0), c.real(-10.0, 10.0));
    let y = x + Hyperbolic::new(c.real(0.0, 5.0), c.real(0.0, 5.0));
    let w = y + Hyperbolic::new(c.real(0.0, 5.0), c.real(0.0, 5.0));
    let shift = Hyperbolic::new(c.real(-10.0, 10.0), c.real(-10.0, 10.0));
    c.param("order", format!("{x}; {y}; {w}; {shift}"));
    ensure(x.try_cmp_d(x, tol) == DOrdering::Equal, "reflexive", || x.to_string())?;
    let (xy, yx) = (x.try_cmp_d(y, tol), y.try_cmp_d(x, tol));
    ensure(xy.is_le() && yx.is_ge(), "comparable", || format!("{xy:?} {yx:?}"))?;
    ensure(!(xy == DOrdering::Less && yx == DOrdering::Less), "antisymmetric", || format!("{x} {y}"))?;
    ensure(x.try_cmp_d(w, tol).is_le(), "transitive", || format!("{x} {w}"))?;
    ensure((x + shift).try_cmp_d(y + shift, tol).is_le(), "translation", || format!("{x} {y} {shift}"))?;

    // sup_d against brute force
    let set: Vec<Hyperbolic> = (0..5).map(|_| Hyperbolic::new(c.real(-10.0, 10.0), c.real(-10.0, 10.0))).collect();
    let sup = numbers::sup_d(set.iter().copied())?;
    ensure(set.iter().all(|s| s.try_cmp_d(sup, tol).is_le()), "sup upper bound", || format!("{sup}"))?;
    for i in 0..2 {
        let attained = set.iter().any(|s| s.component(i) == sup.component(i));
        ensure(attained, "sup least", || format!("component {i} of {sup} is not attained"))?;
    }
    Ok(())
}

fn refinement(c: &mut Case) -> Result<(), Fail> {
    let g = c.rectifiable_path("gamma")?;
    let steps = c.rng.random_range(1..=4);
    let p = c.chain(&g.interval(), steps)?;
    let levels = c.rng.random_range(1..=3u32);
    c.param("partition", format!("{:?}", p.points()));
    c.param("levels", levels);
    let q = p.refine_dyadic(levels)?;
    ensure(q.is_refinement_of(&p), "refinement structure", || "not a refinement".into())?;
    let (coarse, fine) = (g.variation_sum(&p)?, g.variation_sum(&q)?);
    let order = coarse.try_cmp_d(fine, Tolerance::default());
    ensure(order.is_le(), "refinement monotonicity", || format!("{coarse} vs {fine}: {order:?}"))?;
    let (m, mq) = (p.mesh(), q.mesh());
    let factor = (1u64 << levels) as f64;
    let interval = g.interval();
    for i in 0..2 {
        let expect = m.component(i) / factor;
        // points are rounded at the scale of the interval endpoints
        let (lo, hi) = interval.projection(i);
        let scale = lo.abs().max(hi.abs());
        let ulp = scale.next_up() - scale;
        let err = (mq.component(i) - expect).abs();
        ensure(err <= 2.0 * ulp, "dyadic mesh", || format!("component {i}: {} vs {expect}", mq.component(i)))?;
        let proj = q.projection(i);
        ensure(proj.windows(2).all(|w| w[0] < w[1]), "projection", || format!("component {i} not increasing"))?;
    }
    Ok(())
}

fn subadditivity(c: &mut Case) -> Result<(), Fail> {
    let domains = [c.domain(), c.domain()];
    let g = c.smooth_path_on("gamma", domains, 1.0)?;
    let l = c.smooth_path_on("lambda", domains, 1.0)?;
    let a = c.bicomplex("a", 2.0);
    let b = c.bicomplex("b", 2.0);
    let combo = DPath::combine(a, &g, b, &l)?;
    let v = |p: &DPath| -> Result<Hyperbolic, Fail> {
        let r = p.total_variation(1e-10, 24)?;
        ensure(r.converged, "convergence", || "variation did not converge".into())?;
        Ok(r.total)
    };
    let lhs = v(&combo)?;
    let rhs = a.d_modulus() * v(&g)? + b.d_modulus() * v(&l)?;
    ensure(lhs.strictly_below(rhs, 1e-8), "subadditivity", || format!("{lhs} vs {rhs}"))
}

fn variation_decomposition(c: &mut Case) -> Result<(), Fail> {
    let g = c.rectifiable_path("gamma")?;
    let r = g.total_variation(1e-10, 24)?;
    ensure(r.converged, "convergence", || "variation did not converge".into())?;
    for i in 0..2 {
        let scalar = scalar_variation(g.component(i), 1e-10)?;
        let got = r.total.component(i);
        ensure((got - scalar).abs() < 1e-8, "decomposition", || format!("component {i}: {got} vs {scalar}"))?;
    }
    Ok(())
}

fn smooth_length(c: &mut Case) -> Result<(), Fail> {
    let g = c.rectifiable_path("gamma")?;
    let v = g.total_variation(1e-10, 24)?;
    ensure(v.converged, "convergence", || "variation did not converge".into())?;
    let l = g.length_smooth(1e-12)?;
    let d = (v.total - l).d_modulus();
    ensure(d.v1 < 1e-6 && d.v2 < 1e-6, "smooth length", || format!("{} vs {l}", v.total))?;
    let arc = g.arc_length_function(g.interval().hi(), 1e-10)?;
    let d = (arc - v.total).d_modulus();
    ensure(d.v1 < 1e-8 && d.v2 < 1e-8, "arc length at end", || format!("{arc} vs {}", v.total))?;
    for (tau, z) in g.trace(16)? {
        let expect = BiComplex::E1 * BiComplex::from(g.component(0).eval(tau.v1)?)
            + BiComplex::E2 * BiComplex::from(g.component(1).eval(tau.v2)?);
        ensure(z == expect, "trace decomposition", || gap(z, expect))?;
    }
    Ok(())
}

fn tag_independence(c: &mut Case) -> Result<(), Fail> {
    let domains = [c.domain(), c.domain()];
    let g = c.smooth_path_on("gamma", domains, 0.5)?;
    let (f, _) = c.polynomial("f", 2, 0.5)?;
    let mut values = Vec::new();
    for tag in [Tag::Left, Tag::Midpoint, Tag::Right] {
        let config = IntegrationConfig {
            tag,
            ..cfg(TAG_TOL)
        };
        let direct = converged(&integrate::line_integral(&f, &g, &config)?, "direct sum")?;
        let oracle = converged(&integrate::line_integral_componentwise(&f, &g, &config)?, "componentwise sum")?;
        ensure(near(direct, oracle, 2.0 * TAG_TOL), "componentwise oracle", || format!("{tag:?}: {}", gap(direct, oracle)))?;
        values.push((tag, direct));
    }
    for (i, (ta, a)) in values.iter().enumerate() {
        for (tb, b) in &values[i + 1..] {
            ensure(near(*a, *b, 3.0 * TAG_TOL), "tag independence", || format!("{ta:?}/{tb:?}: {}", gap(*a, *b)))?;
        }
    }
    Ok(())
}

fn oracle_equality(c: &mut Case) -> Result<(), Fail> {
    let g = c.smooth_path("gamma")?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let config = cfg(SUITE_TOL);
    let pairs = [
        (integrate::rs_integral(&f, &g, &config)?, integrate::rs_integral_componentwise(&f, &g, &config)?),
        (integrate::line_integral(&f, &g, &config)?, integrate::line_integral_componentwise(&f, &g, &config)?),
    ];
    for (direct, oracle) in pairs {
        let (a, b) = (converged(&direct, "direct sum")?, converged(&oracle, "componentwise sum")?);
        ensure(near(a, b, 2.0 * SUITE_TOL), "oracle equality", || gap(a, b))?;
    }
    Ok(())
}

fn linearity(c: &mut Case) -> Result<(), Fail> {
    let domains = [c.domain(), c.domain()];
    let g = c.smooth_path_on("gamma", domains, 1.0)?;
    let l = c.smooth_path_on("lambda", domains, 1.0)?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let (h, _) = c.polynomial("g", 3, 1.0)?;
    let a = c.bicomplex("a", 1.0);
    let b = c.bicomplex("b", 1.0);
    let config = cfg(SUITE_TOL);
    let line = |f: &Integrand, p: &DPath| converged(&integrate::line_integral(f, p, &config)?, "line integral");
    let rs = |f: &Integrand, p: &DPath| converged(&integrate::rs_integral(f, p, &config)?, "RS integral");

    let lhs = line(&Integrand::linear(a, &f, b, &h), &g)?;
    let rhs = a * line(&f, &g)? + b * line(&h, &g)?;
    ensure(near(lhs, rhs, 1e-7), "linearity in f", || gap(lhs, rhs))?;

    let lhs = rs(&f, &DPath::combine(a, &g, b, &l)?)?;
    let rhs = a * rs(&f, &g)? + b * rs(&f, &l)?;
    ensure(near(lhs, rhs, 1e-7), "linearity in the integrator", || gap(lhs, rhs))
}

fn additivity(c: &mut Case) -> Result<(), Fail> {
    let g = c.smooth_path("gamma")?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let steps = c.rng.random_range(2..=4);
    let chain = c.chain(&g.interval(), steps)?;
    c.param("chain", format!("{:?}", chain.points()));
    let config = cfg(SUITE_TOL);
    let whole = converged(&integrate::line_integral(&f, &g, &config)?, "whole integral")?;
    let mut parts = BiComplex::ZERO;
    for w in chain.points().windows(2) {
        let piece = g.restrict(DInterval::new(w[0], w[1])?)?;
        parts += converged(&integrate::line_integral(&f, &piece, &config)?, "piece integral")?;
    }
    ensure(near(whole, parts, 1e-7), "additivity", || gap(whole, parts))
}

fn orientation(c: &mut Case) -> Result<(), Fail> {
    let g = c.rectifiable_path("gamma")?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let config = cfg(SUITE_TOL);
    let forward = converged(&integrate::line_integral(&f, &g, &config)?, "forward integral")?;
    let backward = converged(&integrate::line_integral(&f, &g.reverse(), &config)?, "reversed integral")?;
    ensure(near(forward, -backward, 1e-7), "orientation", || gap(forward, -backward))
}

fn translation(c: &mut Case) -> Result<(), Fail> {
    let g = c.rectifiable_path("gamma")?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let shift = c.bicomplex("c", 2.0);
    let config = cfg(SUITE_TOL);
    let base = converged(&integrate::line_integral(&f, &g, &config)?, "integral")?;
    let moved = converged(
        &integrate::line_integral(&f.shifted(shift), &g.translate(shift), &config)?,
        "translated integral",
    )?;
    ensure(near(base, moved, 1e-7), "translation", || gap(base, moved))
}

fn reparametrization(c: &mut Case) -> Result<(), Fail> {
    let g = c.smooth_path("gamma")?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let phi = c.monotone_map(&g.interval())?;
    let composed = integrate::reparametrize(&g, &phi)?;
    let config = cfg(SUITE_TOL);
    let a = converged(&integrate::line_integral(&f, &g, &config)?, "integral")?;
    let b = converged(&integrate::line_integral(&f, &composed, &config)?, "reparametrized integral")?;
    ensure(near(a, b, 2.0 * SUITE_TOL), "reparametrization", || gap(a, b))?;
    let (va, vb) = (g.total_variation(1e-10, 24)?.total, composed.total_variation(1e-10, 24)?.total);
    ensure(vb.strictly_below(va, 1e-8), "variation", || format!("{vb} vs {va}"))
}

fn ml_bound(c: &mut Case) -> Result<(), Fail> {
    let g = c.rectifiable_path("gamma")?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let integral = converged(&integrate::line_integral(&f, &g, &cfg(SUITE_TOL))?, "integral")?;
    let bound = integrate::ml_bound(&f, &g, integrate::DEFAULT_ML_SAMPLES)?;
    let m = integral.d_modulus();
    ensure(m.strictly_below(bound, 1e-7), "ML inequality", || format!("{m} vs {bound}"))
}

fn ftc(c: &mut Case) -> Result<(), Fail> {
    let g = c.rectifiable_path("gamma")?;
    let (f, primitive) = c.polynomial("f", 3, 1.0)?;
    let integral = converged(&integrate::line_integral(&f, &g, &cfg(SUITE_TOL))?, "integral")?;
    let value = integrate::ftc_eval(&primitive, &f, &g)?;
    ensure(near(integral, value, 1e-6), "fundamental theorem", || gap(integral, value))
}

fn closed_curve(c: &mut Case) -> Result<(), Fail> {
    let g = c.closed_path("gamma")?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let integral = converged(&integrate::line_integral(&f, &g, &cfg(SUITE_TOL))?, "integral")?;
    ensure(near(integral, BiComplex::ZERO, 1e-6), "closed curve", || gap(integral, BiComplex::ZERO))
}

fn smooth_reduction(c: &mut Case) -> Result<(), Fail> {
    let g = c.rectifiable_path("gamma")?;
    let (f, _) = c.polynomial("f", 3, 1.0)?;
    let quad = QuadConfig::default();
    let sums = converged(&integrate::line_integral(&f, &g, &cfg(SUITE_TOL))?, "integral")?;
    let smooth = integrate::line_integral_smooth(&f, &g, &quad)?.value;
    ensure(near(sums, smooth, 2.0 * (SUITE_TOL + quad.tol)), "smooth reduction", || gap(sums, smooth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        assert_eq!(run_suite("bogus", 1, 1), Err(PropsError::UnknownSuite("bogus".into())));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = Case::new(5, 3).component_expr("t", 1.0);
        let b = Case::new(5, 3).component_expr("t", 1.0);
        let other = Case::new(6, 3).component_expr("t", 1.0);
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn fragments_are_jobs() {
        let mut c = Case::new(11, 0);
        c.rectifiable_path("gamma").unwrap();
        c.polynomial("f", 3, 1.0).unwrap();
        c.bicomplex("a", 1.0);
        let text = c.fragment();
        let spec = crate::job::JobSpec::from_toml(&text.replace("[params]", "[config]\n[params]"));
        // params are informational and live outside the job schema
        assert!(spec.is_err());
        let without: String = {
            let doc: toml::Table = toml::from_str(&text).unwrap();
            let mut doc = doc;
            doc.remove("params");
            toml::to_string(&doc).unwrap()
        };
        let spec = crate::job::JobSpec::from_toml(&without).unwrap();
        assert!(spec.paths.contains_key("gamma"));
        assert!(spec.functions.contains_key("f_primitive"));
    }

    #[test]
    fn small_runs_pass() {
        for name in ["algebra", "refinement", "orientation", "closed-curve"] {
            let r = run_suite(name, 3, 4).unwrap();
            assert!(r[0].passed(), "{:?}", r[0].failures);
        }
    }

    #[test]
    fn failures_carry_fragments() {
        let mut c = Case::new(1, 0);
        let g = c.smooth_path("gamma").unwrap();
        let err = ensure(false, "demo", || "forced".into()).unwrap_err();
        assert_eq!(err.property, "demo");
        assert!(c.fragment().contains("[paths.gamma]"));
        assert!(g.interval().length().v1 > 0.0);
    }
}
