#![allow(dead_code)]

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistren::config::RunConfig;
use twistren::ifs::Microscope;
use twistren::map::ImplicitMap;
use twistren::renorm::{degree_continuation, SolveReport};
use twistren::series::BivariateSeries;
use twistren::{Map64, Microscope64, Point, System64};

pub struct Fixture {
    pub cfg: RunConfig,
    pub path: Vec<(System64, SolveReport)>,
}

impl Fixture {
    pub fn g(&self) -> &System64 {
        &self.path.last().unwrap().0
    }

    pub fn report(&self) -> &SolveReport {
        &self.path.last().unwrap().1
    }

    pub fn map(&self) -> Map64 {
        ImplicitMap::new(self.g().clone(), self.cfg.map)
    }
}

/// Fixed point along the default schedule, solved once per test binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = RunConfig::default();
        let path = degree_continuation(&cfg.degree_schedule, &cfg.solver, &cfg.seeds)
            .expect("fixed point");
        Fixture { cfg, path }
    })
}

pub fn scope() -> &'static Microscope64 {
    static S: OnceLock<Microscope64> = OnceLock::new();
    S.get_or_init(|| {
        let f = fixture();
        Microscope::build(f.map(), &f.cfg.ifs).expect("microscope")
    })
}

pub fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(0x7457_6973);
    r.set_stream(stream);
    r
}

/// Phase-space points `(x, −s(X, x))` for uniform `(x, X)` in `[-w, w]²`.
pub fn phase_samples(n: usize, w: f64, stream: u64) -> Vec<Point<f64>> {
    let g = fixture().g();
    let mut r = rng(stream);
    (0..n)
        .map(|_| {
            let (x, xx) = (r.gen_range(-w..=w), r.gen_range(-w..=w));
            [x, -g.s.eval(xx, x)]
        })
        .collect()
}

pub fn random_series(
    r: &mut ChaCha8Rng,
    degree: usize,
    container: usize,
    dom: [f64; 2],
) -> BivariateSeries<f64> {
    let mut terms = Vec::new();
    for i in 0..=degree {
        for j in 0..=degree - i {
            terms.push((i, j, r.gen_range(-1.0..=1.0)));
        }
    }
    BivariateSeries::from_terms(container, dom, &terms)
}

/// `Σ c_ij xⁱ Xʲ` term by term.
pub fn naive_eval(f: &BivariateSeries<f64>, x: f64, xx: f64) -> f64 {
    let d = f.degree();
    let mut acc = 0.0;
    for i in 0..=d {
        for j in 0..=d - i {
            acc += f.coeff(i, j) * x.powi(i as i32) * xx.powi(j as i32);
        }
    }
    acc
}
