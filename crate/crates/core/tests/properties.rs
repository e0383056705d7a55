use proptest::prelude::*;

use hypercurve::exec;
use hypercurve::expr::{self, BinOp, Compiled, Constant, Expr, Func};
use hypercurve::numbers::{sup_d, BiComplex, Complex, DOrdering, Hyperbolic, Tolerance};
use hypercurve::{ComponentPath, DInterval, DPartition, DPath};

fn real() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn complex() -> impl Strategy<Value = Complex> {
    (real(), real()).prop_map(|(re, im)| Complex::new(re, im))
}

fn bicomplex() -> impl Strategy<Value = BiComplex> {
    (complex(), complex()).prop_map(|(a, b)| BiComplex::from_idempotent(a, b))
}

fn hyperbolic() -> impl Strategy<Value = Hyperbolic> {
    (real(), real()).prop_map(|(a, b)| Hyperbolic::new(a, b))
}

fn close(a: BiComplex, b: BiComplex, scale: f64) -> bool {
    let d = (a - b).d_modulus();
    let tol = 1e-12 * (1.0 + scale);
    d.v1 <= tol && d.v2 <= tol
}

fn ulp(x: f64) -> f64 {
    let a = x.abs();
    a.next_up() - a
}

fn expr_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0..10.0f64).prop_map(Expr::Num),
        Just(Expr::Var("z".into())),
        prop_oneof![
            Just(Constant::I1),
            Just(Constant::I2),
            Just(Constant::J),
            Just(Constant::E1),
            Just(Constant::E2),
            Just(Constant::Pi)
        ]
        .prop_map(Expr::Const),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (
                prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
            inner.clone().prop_map(Expr::neg),
            (inner.clone(), -3i32..4).prop_map(|(a, n)| Expr::pow(a, n)),
            (prop_oneof![Just(Func::Exp), Just(Func::Sin), Just(Func::Conj)], inner.clone())
                .prop_map(|(f, a)| Expr::call(f, a)),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Idem(Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #[test]
    fn ring_axioms(a in bicomplex(), b in bicomplex(), c in bicomplex()) {
        let scale = [a, b, c].iter().map(|x| x.d_modulus().v1.max(x.d_modulus().v2)).fold(1.0, f64::max);
        prop_assert!(close(a + b, b + a, scale));
        prop_assert!(close(a * b, b * a, scale * scale));
        prop_assert!(close((a * b) * c, a * (b * c), scale.powi(3)));
        prop_assert!(close(a * (b + c), a * b + a * c, scale * scale));
    }

    #[test]
    fn cartesian_round_trip(a in bicomplex()) {
        let (z1, z2) = a.to_cartesian();
        let back = BiComplex::from_cartesian(z1, z2).unwrap();
        let scale = [a.w1.re, a.w1.im, a.w2.re, a.w2.im].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in [(back.w1.re, a.w1.re), (back.w1.im, a.w1.im), (back.w2.re, a.w2.re), (back.w2.im, a.w2.im)] {
            prop_assert!((x - y).abs() <= 2.0 * ulp(scale));
        }
    }

    #[test]
    fn d_modulus_is_multiplicative_and_subadditive(a in bicomplex(), b in bicomplex()) {
        let (lhs, rhs) = ((a * b).d_modulus(), a.d_modulus() * b.d_modulus());
        prop_assert!((lhs.v1 - rhs.v1).abs() <= 1e-12 * (1.0 + rhs.v1));
        prop_assert!((lhs.v2 - rhs.v2).abs() <= 1e-12 * (1.0 + rhs.v2));
        let order = (a + b).d_modulus().try_cmp_d(a.d_modulus() + b.d_modulus(), Tolerance::default());
        prop_assert!(order.is_le());
    }

    #[test]
    fn order_is_antisymmetric(x in hyperbolic(), y in hyperbolic()) {
        let tol = Tolerance::default();
        let (xy, yx) = (x.try_cmp_d(y, tol), y.try_cmp_d(x, tol));
        let flipped = match xy {
            DOrdering::Less => DOrdering::Greater,
            DOrdering::Greater => DOrdering::Less,
            other => other,
        };
        prop_assert_eq!(yx, flipped);
    }

    #[test]
    fn sup_is_the_least_upper_bound(xs in prop::collection::vec(hyperbolic(), 1..8)) {
        let s = sup_d(xs.iter().copied()).unwrap();
        prop_assert!(xs.iter().all(|x| x.try_cmp_d(s, Tolerance::default()).is_le()));
        prop_assert!(xs.iter().any(|x| x.v1 == s.v1));
        prop_assert!(xs.iter().any(|x| x.v2 == s.v2));
    }

    #[test]
    fn printing_round_trips(e in expr_tree()) {
        let text = e.to_string();
        let back = expr::parse(&text).unwrap();
        prop_assert_eq!(&back, &e, "{}", text);
    }

    #[test]
    fn evaluation_decomposes(e in expr_tree(), w in complex()) {
        let z = BiComplex::from_idempotent(w, w * Complex::new(0.5, -0.25));
        let whole = expr::eval_with(&e, &|_: &str| Some(z));
        for index in 0..2 {
            let part = expr::eval_component(&e, index, &|_: &str| Some(z.component(index)));
            let compiled = Compiled::new(&e, index, "z").unwrap().eval(z.component(index));
            let bits = |r: &Result<Complex, expr::EvalError>| r.clone().map(|z| (z.re.to_bits(), z.im.to_bits()));
            prop_assert_eq!(bits(&compiled), bits(&part));
            if let (Ok(whole), Ok(part)) = (&whole, &part) {
                let expect = whole.component(index);
                if expect.is_finite() && part.is_finite() {
                    prop_assert!((expect - part).norm() <= 1e-9 * (1.0 + part.norm()), "{} vs {}", expect, part);
                }
            }
        }
    }

    #[test]
    fn dyadic_refinement(
        lo in hyperbolic(),
        len in (0.1..10.0f64, 0.1..10.0f64),
        n in 1usize..6,
        levels in 1u32..5,
    ) {
        let interval = DInterval::new(lo, lo + Hyperbolic::new(len.0, len.1)).unwrap();
        let p = DPartition::uniform(&interval, n, Tolerance::default()).unwrap();
        let q = p.refine_dyadic(levels).unwrap();
        prop_assert!(q.is_refinement_of(&p));
        prop_assert_eq!(q.steps(), p.steps() << levels);
        for i in 0..2 {
            let (a, b) = interval.projection(i);
            let scale = a.abs().max(b.abs());
            let expect = p.mesh().component(i) / (1u64 << levels) as f64;
            prop_assert!((q.mesh().component(i) - expect).abs() <= 2.0 * ulp(scale));
        }
    }

    #[test]
    fn segment_variation_is_the_chord(a in bicomplex(), b in bicomplex()) {
        let g = DPath::segment(a, b);
        let v = g.total_variation(1e-12, 24).unwrap();
        let chord = (b - a).d_modulus();
        prop_assert!((v.total.v1 - chord.v1).abs() <= 1e-12 * (1.0 + chord.v1));
        prop_assert!((v.total.v2 - chord.v2).abs() <= 1e-12 * (1.0 + chord.v2));
    }

    #[test]
    fn polyline_variation_splits(
        pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..8),
        cut in 0.05..0.95f64,
    ) {
        let samples: Vec<(f64, Complex)> =
            pts.iter().enumerate().map(|(k, (re, im))| (k as f64, Complex::new(*re, *im))).collect();
        let last = (samples.len() - 1) as f64;
        let g = ComponentPath::polyline(samples).unwrap();
        let path = DPath::new(g.clone(), g).unwrap();
        let whole = path.total_variation(1e-12, 24).unwrap().total;
        let mid = Hyperbolic::splat(cut * last);
        let left = path.restrict(DInterval::new(path.interval().lo(), mid).unwrap()).unwrap();
        let right = path.restrict(DInterval::new(mid, path.interval().hi()).unwrap()).unwrap();
        let parts = left.total_variation(1e-12, 24).unwrap().total + right.total_variation(1e-12, 24).unwrap().total;
        prop_assert!((whole - parts).d_modulus().v1 <= 1e-12 * (1.0 + whole.v1));
        let reversed = path.reverse().total_variation(1e-12, 24).unwrap().total;
        prop_assert!((whole - reversed).d_modulus().v1 <= 1e-12 * (1.0 + whole.v1));
    }

    #[test]
    fn reduction_is_order_independent_of_threads(xs in prop::collection::vec(-1e6..1e6f64, 0..3000)) {
        let seq = exec::try_sum_sequential(xs.len(), |k| Ok::<_, ()>(xs[k])).unwrap();
        let chosen = exec::try_sum(xs.len(), |k| Ok::<_, ()>(xs[k])).unwrap();
        prop_assert_eq!(seq.to_bits(), chosen.to_bits());
        let doubled = exec::map_collect(&xs, |x| 2.0 * x);
        prop_assert!(doubled.iter().zip(&xs).all(|(d, x)| *d == 2.0 * x));
    }
}

#[cfg(feature = "parallel")]
proptest! {
    #[test]
    fn parallel_sum_is_bitwise_sequential(xs in prop::collection::vec(-1e6..1e6f64, 0..5000)) {
        let seq = exec::try_sum_sequential(xs.len(), |k| Ok::<_, ()>(xs[k])).unwrap();
        let par = exec::try_sum_parallel(xs.len(), |k| Ok::<_, ()>(xs[k])).unwrap();
        prop_assert_eq!(seq.to_bits(), par.to_bits());
    }
}
