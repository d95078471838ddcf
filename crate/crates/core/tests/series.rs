mod common;

use common::{naive_eval, random_series, rng};
use proptest::prelude::*;
use rand::Rng;
use twistren::series::{grid, Axis, BivariateSeries};
use twistren::Series64;

const DOM: [f64; 2] = [-1.2, 1.2];

fn poly(terms: &[(usize, usize, f64)], deg: usize) -> Series64 {
    BivariateSeries::from_terms(deg, DOM, terms)
}

#[test]
fn eval_trivial_cases() {
    assert_eq!(poly(&[(1, 0, 1.0), (0, 1, 1.0)], 1).eval(1.0, 0.0), 1.0);
    assert_eq!(poly(&[(1, 0, -1.0), (0, 1, 1.0)], 1).eval(0.3, 0.3), 0.0);
}

#[test]
fn eval_matches_naive_sum() {
    let mut r = rng(10);
    for _ in 0..20 {
        let f = random_series(&mut r, 6, 6, DOM);
        let (a, b) = (f.eval(0.2, -0.4), naive_eval(&f, 0.2, -0.4));
        assert!((a - b).abs() <= 1e-14, "{a} vs {b}");
    }
}

#[test]
fn partial_trivial_cases() {
    let xy = poly(&[(1, 1, 1.0)], 2);
    let d = xy.partial(Axis::First);
    for q in grid(DOM, 5) {
        assert_eq!(d.eval(q[0], q[1]), q[1]);
    }
    let d = poly(&[(1, 0, -1.0), (0, 1, 1.0)], 1).partial(Axis::Second);
    assert_eq!(d.eval(0.7, -0.1), 1.0);
    assert_eq!(d.eval(-1.0, 1.0), 1.0);
}

#[test]
fn mixed_partials_agree_coefficientwise() {
    let mut r = rng(11);
    for _ in 0..10 {
        let f = random_series(&mut r, 7, 7, DOM);
        let a = f.partial(Axis::First).partial(Axis::Second);
        let b = f.partial(Axis::Second).partial(Axis::First);
        assert_eq!(a, b);
    }
}

#[test]
fn ring_trivial_cases() {
    let x = poly(&[(1, 0, 1.0)], 2);
    let xx = poly(&[(0, 1, 1.0)], 2);
    assert_eq!(&x * &xx, poly(&[(1, 1, 1.0)], 2));
    let f = random_series(&mut rng(12), 4, 4, DOM);
    assert_eq!((&f + &f.scale(-1.0)).sup_norm(), 0.0);
}

#[test]
fn mul_matches_pointwise_on_grid() {
    let mut r = rng(13);
    let f = random_series(&mut r, 3, 7, DOM);
    let g = random_series(&mut r, 4, 7, DOM);
    let p = f.mul(&g);
    assert_eq!(p.dropped, 0.0);
    for q in grid(DOM, 10) {
        let want = f.eval(q[0], q[1]) * g.eval(q[0], q[1]);
        assert!((p.value.eval(q[0], q[1]) - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn substitute_trivial_cases() {
    let mut r = rng(14);
    let z = random_series(&mut r, 4, 4, DOM).scale(0.05);
    let x = poly(&[(1, 0, 1.0)], 4);
    assert_eq!(x.substitute_first(&z, -0.25).unwrap().value, z);
    let big_x = poly(&[(0, 1, 1.0)], 4);
    let out = big_x.substitute_first(&z, -0.25).unwrap().value;
    assert_eq!(out, poly(&[(0, 1, -0.25)], 4));
}

/// Coefficientwise equality up to rounding of one multiplication per term.
fn close(a: &Series64, b: &Series64) -> bool {
    (a - b).sup_norm() <= 4.0 * f64::EPSILON * a.sup_norm().max(b.sup_norm()).max(1.0)
}

#[test]
fn substitute_matches_pointwise_composition() {
    let mut r = rng(15);
    for _ in 0..5 {
        let f = random_series(&mut r, 4, 4, DOM);
        // Small inner series so its range stays in the domain; degree 8 holds
        // the exact composition of degree 4 in degree 2.
        let z = random_series(&mut r, 2, 8, DOM).scale(0.25);
        let a = r.gen_range(-0.9..-0.1);
        let out = f.resize(8).substitute_first(&z, a).unwrap();
        for q in grid([-1.0, 1.0], 9) {
            let want = f.eval(z.eval(q[0], q[1]), a * q[1]);
            assert!((out.value.eval(q[0], q[1]) - want).abs() <= 1e-10);
        }
    }
}

#[test]
fn substitute_reports_domain_escape() {
    let f = poly(&[(1, 0, 1.0)], 2);
    let z = poly(&[(0, 0, 2.0)], 2);
    assert_eq!(
        f.substitute_first(&z, 0.5).unwrap_err().code(),
        "DomainEscape"
    );
}

fn series(deg: usize) -> impl Strategy<Value = Series64> {
    let n = (deg + 1) * (deg + 2) / 2;
    prop::collection::vec(-2.0f64..2.0, n)
        .prop_map(move |c| BivariateSeries::from_packed(deg, DOM, &c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn add_commutes_with_eval_and_partial(f in series(5), g in series(5), x in -1.2f64..1.2, y in -1.2f64..1.2) {
        let sum = &f + &g;
        prop_assert!((sum.eval(x, y) - (f.eval(x, y) + g.eval(x, y))).abs() <= 1e-12);
        for axis in [Axis::First, Axis::Second] {
            prop_assert!(close(&sum.partial(axis), &(&f.partial(axis) + &g.partial(axis))));
        }
    }

    #[test]
    fn scale_commutes_with_partial(f in series(5), a in -3.0f64..3.0) {
        for axis in [Axis::First, Axis::Second] {
            prop_assert!(close(&f.scale(a).partial(axis), &f.partial(axis).scale(a)));
        }
    }

    #[test]
    fn substitute_is_linear_in_outer(f in series(4), g in series(4), c in -2.0f64..2.0) {
        let z = BivariateSeries::from_terms(4, DOM, &[(1, 0, 0.3), (0, 1, 0.3), (1, 1, 0.1)]);
        let lhs = (&f + &g.scale(c)).substitute_first(&z, -0.25).unwrap().value;
        let rhs = &f.substitute_first(&z, -0.25).unwrap().value + &g.substitute_first(&z, -0.25).unwrap().value.scale(c);
        prop_assert!((&lhs - &rhs).sup_norm() <= 1e-12);
    }

    #[test]
    fn row_major_round_trip(f in series(6)) {
        let back = BivariateSeries::from_row_major(6, DOM, f.row_major().to_vec()).unwrap();
        prop_assert_eq!(back, f);
    }
}
