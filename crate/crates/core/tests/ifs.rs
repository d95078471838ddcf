mod common;

use common::{fixture, rng, scope};
use rand::Rng;
use twistren::geometry::{contains, convex_disjoint, convex_hull, Metric};
use twistren::ifs::{cycle_lengths, derive_translation, DyadicWord, Scalings};
use twistren::map::{ImplicitMap, ImplicitSolver};
use twistren::series::BivariateSeries;
use twistren::Point;

const THETA: f64 = 0.272;

fn slack() -> f64 {
    fixture().cfg.ifs.containment_slack
}

#[test]
fn scalings_by_hand() {
    let s = Scalings::from_translation(-0.25f64, 0.06, 1.0);
    assert_eq!(s.psi0([0.0, 0.0]), [1.0, 0.0]);
    assert!((s.c - 0.8).abs() <= 1e-15);
    let t = s.psi0(s.tip());
    assert!((t[0] - s.c).abs() <= 1e-15 && t[1] == 0.0);
}

#[test]
fn shear_has_no_isolated_fixed_point() {
    let s = BivariateSeries::from_terms(1, [-1.2, 1.2], &[(1, 0, -1.0), (0, 1, 1.0)]);
    let m = ImplicitMap::from_series(s, ImplicitSolver::default());
    assert_eq!(
        derive_translation(&m, 1e-9).unwrap_err().code(),
        "AmbiguousFixedPoint"
    );
}

#[test]
fn translation_conjugates_to_an_origin_fixing_map() {
    let sc = scope();
    let o = sc.forward([0.0, 0.0]).unwrap();
    assert!(o[0].abs() <= 1e-9 && o[1].abs() <= 1e-9, "{o:?}");
    // The tip is the origin of the generating-function coordinates.
    assert_eq!(sc.scal.h(sc.tip()), [0.0, 0.0]);
    assert_eq!(sc.scal.h_inverse([0.0, 0.0]), sc.tip());
    assert!((sc.scal.c - sc.scal.p / (1.0 - sc.scal.lambda)).abs() <= 1e-15);
}

#[test]
fn linear_branch_norm() {
    let sc = scope();
    let d = sc.psi_differential(0, sc.tip()).unwrap();
    let norm = Metric::euclidean().op_norm(&d);
    assert!((norm - sc.scal.lambda.abs().max(sc.scal.mu)).abs() <= 1e-15);
    assert!(norm <= THETA);
}

#[test]
fn contraction_within_theta() {
    let c = scope().contraction().unwrap();
    assert!(c.psi0 <= THETA + 1e-3 && c.psi1 <= THETA + 1e-3, "{c:?}");
}

#[test]
fn zero_words_fix_the_tip() {
    let sc = scope();
    let p = [sc.tip()[0] + 0.01, 0.002];
    let w0: DyadicWord = "0".parse().unwrap();
    assert_eq!(sc.word_image(&w0, p).unwrap(), sc.psi(0, p).unwrap());
    for n in 0..=12 {
        let w = DyadicWord::from_index(0, n);
        let q = sc.word_image(&w, sc.tip()).unwrap();
        assert!((q[0] - sc.tip()[0]).abs() <= 1e-14 && q[1] == 0.0);
    }
}

#[test]
fn word_images_shrink() {
    let sc = scope();
    let base = &sc.base.samples;
    let diam = sc.metric.diameter(base);
    let mut r = rng(40);
    for n in 1..=8 {
        for _ in 0..4 {
            let w = DyadicWord::from_index(r.gen_range(0..1usize << n), n);
            let img: Vec<Point<f64>> = base
                .iter()
                .map(|&p| sc.word_image(&w, p).unwrap())
                .collect();
            let d = sc.metric.diameter(&img);
            assert!(d <= THETA.powi(n as i32) * diam, "word {w}: {d}");
        }
    }
}

#[test]
fn low_level_pieces() {
    let sc = scope();
    let levels = sc.boxes_by_level(1, slack()).unwrap();
    assert_eq!(levels[0].len(), 1);
    assert_eq!(levels[0][0].hull, convex_hull(&sc.base.samples));
    let [b0, b1] = [&levels[1][0], &levels[1][1]];
    assert!(convex_disjoint(&b0.hull, &b1.hull));
    let image: Vec<Point<f64>> = b1.hull.iter().map(|&p| sc.forward(p).unwrap()).collect();
    assert!(!convex_disjoint(&convex_hull(&image), &b0.hull));
}

#[test]
fn level_eight_pieces() {
    let sc = scope();
    let boxes = sc.boxes(8, slack()).unwrap();
    assert_eq!(boxes.len(), 256);
    let bound = THETA.powi(8) * sc.base_diameter();
    for b in &boxes {
        assert!(sc.metric.diameter(&b.hull) <= bound, "{}", b.word);
        assert!(contains(&b.hull, b.center, slack()));
    }
}

/// Add one with carry, the first letter least significant.
fn odometer(w: &DyadicWord) -> DyadicWord {
    let mut bits = w.bits().to_vec();
    for b in bits.iter_mut() {
        if *b == 0 {
            *b = 1;
            break;
        }
        *b = 0;
    }
    DyadicWord::new(bits, usize::MAX).unwrap()
}

#[test]
fn dynamics_is_the_adding_machine() {
    let sc = scope();
    let levels = sc.boxes_by_level(6, slack()).unwrap();
    assert_eq!(sc.odometer_check(&levels[1], slack()).unwrap(), vec![1, 0]);
    for n in 1..=6 {
        let sigma = sc.odometer_check(&levels[n], slack()).unwrap();
        assert_eq!(cycle_lengths(&sigma), vec![1 << n]);
        for (i, &j) in sigma.iter().enumerate() {
            assert_eq!(levels[n][j].word, odometer(&levels[n][i].word));
        }
        let mut k: Vec<usize> = (0..sigma.len()).collect();
        for _ in 0..1 << n {
            k = k.iter().map(|&i| sigma[i]).collect();
        }
        assert!(k.iter().enumerate().all(|(i, &j)| i == j));
    }
}

#[test]
fn eight_cycle_by_brute_force_membership() {
    let sc = scope();
    let boxes = sc.boxes(3, slack()).unwrap();
    let mut i = 0;
    let mut visited = [false; 8];
    for _ in 0..8 {
        visited[i] = true;
        let q = sc.forward(boxes[i].center).unwrap();
        let hits: Vec<usize> = (0..8)
            .filter(|&j| contains(&boxes[j].hull, q, slack()))
            .collect();
        assert_eq!(hits.len(), 1);
        i = hits[0];
    }
    assert_eq!(i, 0);
    assert!(visited.iter().all(|&v| v));
}

fn cloud(n: usize) -> Vec<Point<f64>> {
    scope()
        .cantor_cloud(n)
        .unwrap()
        .into_iter()
        .map(|(_, q)| q)
        .collect()
}

#[test]
fn cloud_levels() {
    let sc = scope();
    assert_eq!(
        sc.cantor_cloud(0).unwrap(),
        vec![(DyadicWord::from_index(0, 0), sc.tip())]
    );
    let c = sc.cantor_cloud(5).unwrap();
    assert_eq!(c.len(), 32);
    assert_eq!(c[0].1, sc.tip());
    let mut prev = sc.metric.hausdorff(&cloud(2), &cloud(3));
    for n in 3..10 {
        let d = sc.metric.hausdorff(&cloud(n), &cloud(n + 1));
        assert!(d <= THETA * prev, "level {n}: {d} vs {prev}");
        prev = d;
    }
}

#[test]
fn cloud_is_almost_invariant() {
    let sc = scope();
    for n in [4, 8] {
        let c = cloud(n);
        let img: Vec<Point<f64>> = c.iter().map(|&p| sc.forward(p).unwrap()).collect();
        let d = sc.metric.hausdorff(&img, &c);
        assert!(
            d <= THETA.powi(n as i32) * sc.base_diameter(),
            "level {n}: {d}"
        );
    }
}
