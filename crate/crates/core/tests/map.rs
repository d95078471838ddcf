mod common;

use common::{fixture, phase_samples};
use twistren::map::{ImplicitMap, ImplicitSolver};
use twistren::series::BivariateSeries;
use twistren::Map64;

const W: f64 = 1.2 * 0.9;

fn shear() -> Map64 {
    let s = BivariateSeries::from_terms(1, [-1.2, 1.2], &[(1, 0, -1.0), (0, 1, 1.0)]);
    ImplicitMap::from_series(s, ImplicitSolver::default())
}

fn max_diff(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

#[test]
fn shear_by_hand() {
    let m = shear();
    for p in [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]] {
        let f = m.forward(p).unwrap().point;
        assert!(max_diff(f, [p[0] + p[1], p[1]]) <= 1e-14, "{p:?} -> {f:?}");
        let b = m.backward(p).unwrap().point;
        assert!(max_diff(b, [p[0] - p[1], p[1]]) <= 1e-14);
        assert_eq!(m.differential(p).unwrap(), [[1.0, 1.0], [0.0, 1.0]]);
    }
}

#[test]
fn tip_column_image() {
    let g = fixture().g();
    let f = fixture().map().forward([0.0, 0.0]).unwrap().point;
    assert!(max_diff(f, [1.0, g.s.eval(0.0, 1.0)]) <= 1e-10, "{f:?}");
}

#[test]
fn round_trip_and_reversibility() {
    let m = fixture().map();
    for p in phase_samples(100, W, 30) {
        let q = m.forward(p).unwrap().point;
        assert!(max_diff(m.backward(q).unwrap().point, p) <= 1e-10);
        // T F T F = id with T(x, y) = (x, -y).
        let r = m.forward([q[0], -q[1]]).unwrap().point;
        assert!(max_diff([r[0], -r[1]], p) <= 1e-10);
    }
}

#[test]
fn differential_matches_central_differences() {
    let m = fixture().map();
    let h = 1e-6;
    for p in phase_samples(50, W, 31) {
        let d = m.differential(p).unwrap();
        for col in 0..2 {
            let (mut a, mut b) = (p, p);
            a[col] += h;
            b[col] -= h;
            let (fa, fb) = (m.forward(a).unwrap().point, m.forward(b).unwrap().point);
            for row in 0..2 {
                let fd = (fa[row] - fb[row]) / (2.0 * h);
                let tol = 1e-5 * d[row][col].abs().max(1.0);
                assert!(
                    (fd - d[row][col]).abs() <= tol,
                    "{p:?} [{row}][{col}]: {fd} vs {}",
                    d[row][col]
                );
            }
        }
    }
}

#[test]
fn area_preservation() {
    let m = fixture().map();
    for p in phase_samples(200, W, 32) {
        let d = m.differential(p).unwrap();
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        assert!((det - 1.0).abs() <= 1e-9, "{p:?}: {det}");
    }
}

#[test]
fn negative_twist() {
    let m = fixture().map();
    assert!((m.twist([0.0, 0.0]).unwrap() + 1.0).abs() <= 1e-9);
    for p in phase_samples(200, W, 33) {
        assert!(m.twist(p).unwrap() < 0.0, "{p:?}");
    }
}
