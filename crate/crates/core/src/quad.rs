//! Globally adaptive 7/15-point Gauss–Kronrod quadrature of complex-valued
//! functions on a real interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::numbers::Complex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError<E> {
    #[error("quadrature did not reach {tol:e} within {max_intervals} subintervals (error estimate {estimate:e})")]
    Budget {
        tol: f64,
        max_intervals: usize,
        estimate: f64,
    },
    #[error("non-finite integrand value at x = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Eval(E),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex,
    pub error: f64,
    pub intervals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: Complex,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F, E>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError<E>>
where
    F: Fn(f64) -> Result<Complex, E>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<Complex, QuadError<E>> {
        let v = f(x).map_err(QuadError::Eval)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite(x))
        }
    };
    let fc = eval(center)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = eval(center - dx)? + eval(center + dx)?;
        kron += pair * WGK[i];
        if i % 2 == 1 {
            gauss += pair * WG[i / 2];
        }
    }
    Ok(Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).norm(),
    })
}

/// Integrates `f` over `[a, b]` to absolute accuracy `tol`, bisecting the
/// subinterval with the largest error estimate first.
pub fn integrate<F, E>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<QuadResult, QuadError<E>>
where
    F: Fn(f64) -> Result<Complex, E>,
{
    if a == b {
        return Ok(QuadResult {
            value: Complex::new(0.0, 0.0),
            error: 0.0,
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, a, b)?;
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    while error > tol {
        if heap.len() >= max_intervals {
            return Err(QuadError::Budget {
                tol,
                max_intervals,
                estimate: error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further in floating point
            heap.push(worst);
            return Err(QuadError::Budget {
                tol,
                max_intervals,
                estimate: error,
            });
        }
        let left = kronrod(&f, worst.a, mid)?;
        let right = kronrod(&f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // the running sums drift; resum when close to done
        if error <= tol {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(QuadResult {
        value,
        error,
        intervals: heap.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> Result<Complex, Infallible> {
        move |x| Ok(Complex::new(f(x), 0.0))
    }

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(ok(|x| x * x), 0.0, 1.0, 1e-14, 10).unwrap();
        assert!((r.value.re - 1.0 / 3.0).abs() < 1e-15);
        let r = integrate(ok(|x| x.powi(21)), -1.0, 2.0, 1e-10, 50).unwrap();
        let exact = (2f64.powi(22) - 1.0) / 22.0;
        assert!((r.value.re - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn kink_needs_subdivision() {
        let r = integrate(ok(|x: f64| (x - 0.3).abs()), 0.0, 1.0, 1e-12, 200).unwrap();
        assert!((r.value.re - (0.045 + 0.245)).abs() < 1e-12);
        assert!(r.intervals > 1);
    }

    #[test]
    fn complex_integrand() {
        let r = integrate(
            |t: f64| Ok::<_, Infallible>(Complex::new(0.0, t).exp()),
            0.0,
            std::f64::consts::PI,
            1e-13,
            100,
        )
        .unwrap();
        assert!((r.value - Complex::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn budget_exhaustion() {
        let r = integrate(ok(|x: f64| 1.0 / x.sqrt()), 0.0, 1.0, 1e-14, 5);
        assert!(matches!(r, Err(QuadError::Budget { .. })));
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(ok(|x| x), 1.0, 0.0, 1e-14, 10).unwrap();
        assert!((r.value.re + 0.5).abs() < 1e-15);
    }
}
