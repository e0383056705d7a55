//! Closed hyperbolic intervals `[α, β]_D` and their partitions.

use thiserror::Error;

use crate::numbers::{sup_d, DOrdering, Hyperbolic, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("endpoints {0} and {1} are not comparable")]
    NotComparable(Hyperbolic, Hyperbolic),
    #[error("endpoints reversed: {0} is above {1}")]
    Reversed(Hyperbolic, Hyperbolic),
    #[error("interval [{0}, {1}] is degenerate")]
    Degenerate(Hyperbolic, Hyperbolic),
    #[error("partition step {index} is a zero divisor")]
    StepDegenerate { index: usize },
    #[error("partition step {index} is not increasing")]
    NotChain { index: usize },
    #[error("partition endpoints do not match the interval")]
    EndpointMismatch,
    #[error("a partition needs at least two points")]
    TooFewPoints,
    #[error("refinement level must be at least 1")]
    ZeroLevels,
    #[error("non-finite endpoint")]
    NonFinite,
}

/// `[lo, hi]_D` with `lo ⪯_D hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DInterval {
    lo: Hyperbolic,
    hi: Hyperbolic,
}

impl DInterval {
    pub fn new(lo: Hyperbolic, hi: Hyperbolic) -> Result<Self, IntervalError> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(IntervalError::NonFinite);
        }
        match lo.try_cmp_d(hi, Tolerance::default()) {
            DOrdering::Less | DOrdering::Equal => Ok(Self { lo, hi }),
            DOrdering::Greater => Err(IntervalError::Reversed(lo, hi)),
            DOrdering::Incomparable => Err(IntervalError::NotComparable(lo, hi)),
        }
    }

    /// The interval whose idempotent projections are `[a1, b1]` and `[a2, b2]`.
    pub fn from_projections(a: (f64, f64), b: (f64, f64)) -> Result<Self, IntervalError> {
        Self::new(Hyperbolic::new(a.0, b.0), Hyperbolic::new(a.1, b.1))
    }

    pub fn lo(&self) -> Hyperbolic {
        self.lo
    }

    pub fn hi(&self) -> Hyperbolic {
        self.hi
    }

    /// `l_D = hi - lo`.
    pub fn length(&self) -> Hyperbolic {
        self.hi - self.lo
    }

    /// Real interval of idempotent component `index`.
    pub fn projection(&self, index: usize) -> (f64, f64) {
        (self.lo.component(index), self.hi.component(index))
    }

    /// Degenerate when the length lies in `O_0`: some component vanishes.
    pub fn is_degenerate(&self, tol: Tolerance) -> bool {
        let l = self.length();
        l.v1 <= tol.eps() || l.v2 <= tol.eps()
    }

    pub fn contains(&self, tau: Hyperbolic, tol: Tolerance) -> bool {
        self.lo.try_cmp_d(tau, tol).is_le() && tau.try_cmp_d(self.hi, tol).is_le()
    }

    /// `[-hi, -lo]_D`.
    pub fn negated(&self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

/// Point `r / 2^level` of the way along `[a, b]`; `r = 0` reproduces `a` exactly.
#[inline]
pub(crate) fn dyadic_point(a: f64, b: f64, r: usize, level: u32) -> f64 {
    if r == 0 {
        a
    } else {
        let frac = r as f64 / (1u64 << level) as f64;
        if frac == 1.0 {
            b
        } else {
            a + (b - a) * frac
        }
    }
}

/// Locates step `k` of the `level`-fold dyadic refinement of a chain:
/// `(base step, offset inside it)`.
#[inline]
pub(crate) fn dyadic_step(k: usize, level: u32) -> (usize, usize) {
    (k >> level, k & ((1usize << level) - 1))
}

/// A validated chain `α = ζ_0 ≺ ζ_1 ≺ ... ≺ ζ_n = β` with nondegenerate steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DPartition {
    points: Vec<Hyperbolic>,
}

impl DPartition {
    /// Wraps points already known to form a valid chain.
    pub(crate) fn from_chain(points: Vec<Hyperbolic>) -> Self {
        Self { points }
    }

    pub fn new(
        interval: &DInterval,
        points: Vec<Hyperbolic>,
        tol: Tolerance,
    ) -> Result<Self, IntervalError> {
        if interval.is_degenerate(tol) {
            return Err(IntervalError::Degenerate(interval.lo, interval.hi));
        }
        if points.len() < 2 {
            return Err(IntervalError::TooFewPoints);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(IntervalError::NonFinite);
        }
        let first = points[0];
        let last = points[points.len() - 1];
        if first.try_cmp_d(interval.lo, tol) != DOrdering::Equal
            || last.try_cmp_d(interval.hi, tol) != DOrdering::Equal
        {
            return Err(IntervalError::EndpointMismatch);
        }
        for (index, w) in points.windows(2).enumerate().map(|(i, w)| (i + 1, w)) {
            match w[0].try_cmp_d(w[1], tol) {
                DOrdering::Less | DOrdering::Equal => {}
                DOrdering::Greater | DOrdering::Incomparable => {
                    return Err(IntervalError::NotChain { index })
                }
            }
            let step = w[1] - w[0];
            if step.v1 <= tol.eps() || step.v2 <= tol.eps() {
                return Err(IntervalError::StepDegenerate { index });
            }
        }
        Ok(Self { points })
    }

    /// `{α, β}`.
    pub fn trivial(interval: &DInterval, tol: Tolerance) -> Result<Self, IntervalError> {
        Self::new(interval, vec![interval.lo, interval.hi], tol)
    }

    /// `n` equal steps.
    pub fn uniform(interval: &DInterval, n: usize, tol: Tolerance) -> Result<Self, IntervalError> {
        if n == 0 {
            return Err(IntervalError::TooFewPoints);
        }
        let (lo, len) = (interval.lo, interval.length());
        let mut points: Vec<_> = (0..n).map(|k| lo + len.scale(k as f64 / n as f64)).collect();
        points.push(interval.hi);
        Self::new(interval, points, tol)
    }

    /// Pairs two real partitions with the same number of steps.
    pub fn from_projections(
        interval: &DInterval,
        first: &[f64],
        second: &[f64],
        tol: Tolerance,
    ) -> Result<Self, IntervalError> {
        if first.len() != second.len() {
            return Err(IntervalError::NotChain {
                index: first.len().min(second.len()),
            });
        }
        let points = first
            .iter()
            .zip(second)
            .map(|(&a, &b)| Hyperbolic::new(a, b))
            .collect();
        Self::new(interval, points, tol)
    }

    pub fn points(&self) -> &[Hyperbolic] {
        &self.points
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn interval(&self) -> DInterval {
        DInterval {
            lo: self.points[0],
            hi: self.points[self.points.len() - 1],
        }
    }

    /// Idempotent projection onto a real partition.
    pub fn projection(&self, index: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.component(index)).collect()
    }

    /// `‖P‖_D`, the supremum of step lengths.
    pub fn mesh(&self) -> Hyperbolic {
        sup_d(self.points.windows(2).map(|w| w[1] - w[0])).expect("partition has a step")
    }

    /// Inserts componentwise midpoints `levels` times.
    pub fn refine_dyadic(&self, levels: u32) -> Result<Self, IntervalError> {
        if levels == 0 {
            return Err(IntervalError::ZeroLevels);
        }
        Ok(Self {
            points: dyadic_points(&self.points, levels),
        })
    }

    /// Whether every point of `coarse` occurs in `self`, in order.
    pub fn is_refinement_of(&self, coarse: &DPartition) -> bool {
        let mut fine = self.points.iter();
        coarse
            .points
            .iter()
            .all(|p| fine.by_ref().any(|q| q == p))
            && self.points.first() == coarse.points.first()
            && self.points.last() == coarse.points.last()
    }
}

/// Every point of the `level`-fold dyadic refinement of `base`.
pub(crate) fn dyadic_points(base: &[Hyperbolic], level: u32) -> Vec<Hyperbolic> {
    let per = 1usize << level;
    let steps = (base.len() - 1) * per;
    (0..=steps)
        .map(|k| {
            if k == steps {
                return base[base.len() - 1];
            }
            let (j, r) = dyadic_step(k, level);
            let (a, b) = (base[j], base[j + 1]);
            Hyperbolic::new(
                dyadic_point(a.v1, b.v1, r, level),
                dyadic_point(a.v2, b.v2, r, level),
            )
        })
        .collect()
}
