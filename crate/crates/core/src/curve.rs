//! Polyline curves through the Cantor set by iterated refinement.
//!
//! One refinement places, in order on `[0, 1]`: a connector on an interval of
//! length `a`, the `ψ₀`-copy of the curve on length `θ`, a connector, the
//! `ψ₁`-copy on length `θ`, and a last connector, with `3a + 2θ = 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::CurveConfig;
use crate::error::{Error, Result};
use crate::geometry::{Metric, PolylineIndex};
use crate::ifs::Microscope;
use crate::scalar::{Point, Scalar};

/// Piecewise-linear curve `γ : [0, 1] → ℝ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolylineCurve<T> {
    params: Vec<T>,
    points: Vec<Point<T>>,
    metric: Metric<T>,
    lip: T,
}

impl<T: Scalar> PolylineCurve<T> {
    /// Checks that the breakpoints run strictly increasing from 0 to 1.
    pub fn new(params: Vec<T>, points: Vec<Point<T>>, metric: Metric<T>) -> Result<Self> {
        if params.len() != points.len() || params.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints for {} vertices (need at least 2)",
                params.len(),
                points.len()
            )));
        }
        if params[0] != T::zero() || *params.last().expect("non-empty") != T::one() {
            return Err(Error::InvalidInput(
                "parameters must start at 0 and end at 1".into(),
            ));
        }
        if points
            .iter()
            .any(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(Error::InvalidInput("non-finite vertex".into()));
        }
        let lip = compute_lipschitz(&params, &points, &metric)?;
        Ok(Self {
            params,
            points,
            metric,
            lip,
        })
    }

    /// Segment from `a` to `b` on `[0, 1]`.
    pub fn segment(a: Point<T>, b: Point<T>, metric: Metric<T>) -> Self {
        Self::new(vec![T::zero(), T::one()], vec![a, b], metric).expect("valid segment")
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn metric(&self) -> Metric<T> {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest chord-to-parameter ratio over the segments.
    pub fn lipschitz_constant(&self) -> T {
        self.lip
    }

    /// Lipschitz constant of the restriction to `[lo, hi]`.
    pub fn lipschitz_on(&self, lo: T, hi: T) -> T {
        let mut l = T::zero();
        for k in 0..self.params.len() - 1 {
            let (t0, t1) = (self.params[k], self.params[k + 1]);
            if t0 >= lo && t1 <= hi {
                l = l.max(self.metric.dist(self.points[k], self.points[k + 1]) / (t1 - t0));
            }
        }
        l
    }

    pub fn eval(&self, t: T) -> Point<T> {
        let t = t.max(T::zero()).min(T::one());
        let k = match self
            .params
            .binary_search_by(|p| p.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(k) => return self.points[k],
            Err(k) => k.clamp(1, self.params.len() - 1),
        };
        let (t0, t1) = (self.params[k - 1], self.params[k]);
        let u = (t - t0) / (t1 - t0);
        let (a, b) = (self.points[k - 1], self.points[k]);
        [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
    }

    /// `sup_t |self(t) − other(t)|`, attained at a breakpoint of either curve.
    pub fn sup_distance(&self, other: &Self) -> T {
        let d1 = self
            .params
            .iter()
            .zip(&self.points)
            .map(|(&t, &p)| self.metric.dist(p, other.eval(t)))
            .fold(T::zero(), T::max);
        let d2 = other
            .params
            .iter()
            .zip(&other.points)
            .map(|(&t, &p)| self.metric.dist(p, self.eval(t)))
            .fold(T::zero(), T::max);
        d1.max(d2)
    }

    /// One-sided Hausdorff distance from `cloud` to the curve.
    pub fn hausdorff_to_cloud(&self, cloud: &[Point<T>]) -> T {
        hausdorff_to_cloud(&self.points, cloud, &self.metric)
    }
}

fn compute_lipschitz<T: Scalar>(
    params: &[T],
    points: &[Point<T>],
    metric: &Metric<T>,
) -> Result<T> {
    let mut l = T::zero();
    for k in 0..params.len() - 1 {
        let dt = params[k + 1] - params[k];
        if !(dt > T::zero()) {
            return Err(Error::DegenerateParam(k));
        }
        l = l.max(metric.dist(points[k], points[k + 1]) / dt);
    }
    Ok(l)
}

/// `max_{q ∈ cloud} dist(q, polyline)`.
pub fn hausdorff_to_cloud<T: Scalar>(
    vertices: &[Point<T>],
    cloud: &[Point<T>],
    metric: &Metric<T>,
) -> T {
    let index = PolylineIndex::new(vertices, cloud, *metric);
    cloud
        .par_iter()
        .map(|&q| index.distance(q))
        .reduce(|| T::zero(), T::max)
}

/// Lengths `(a, θ)` of the connector and copy intervals.
pub fn partition<T: Scalar>(theta: T) -> (T, T) {
    ((T::one() - theta - theta) / T::lit(3.0), theta)
}

/// One refinement step `γ_k ↦ γ_{k+1}`.
pub fn refine<T: Scalar>(
    gamma: &PolylineCurve<T>,
    scope: &Microscope<T>,
    cfg: &CurveConfig,
) -> Result<PolylineCurve<T>> {
    let (a, theta) = partition(T::lit(cfg.theta));
    let t1 = a;
    let t3 = a + theta + a;
    let metric = gamma.metric;
    let n = gamma.len();

    // Split long segments so the image under the nonlinear branch stays
    // close to its chords.
    let limit = T::lit(cfg.subdivide_above);
    let pieces = T::from_usize_exact(cfg.subdivisions.max(1));
    let mut sub_params = Vec::with_capacity(n);
    let mut sub_points = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 && cfg.subdivisions > 1 {
            let (p, q) = (gamma.points[k - 1], gamma.points[k]);
            if metric.dist(p, q) > limit {
                let (s0, s1) = (gamma.params[k - 1], gamma.params[k]);
                for j in 1..cfg.subdivisions {
                    let u = T::from_usize_exact(j) / pieces;
                    sub_params.push(s0 + u * (s1 - s0));
                    sub_points.push([p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1])]);
                }
            }
        }
        sub_params.push(gamma.params[k]);
        sub_points.push(gamma.points[k]);
    }
    let image1: Vec<Point<T>> = sub_points
        .par_iter()
        .map(|&p| {
            let q = scope.psi(1, p).ok().filter(|q| scope.in_domain(*q));
            q.ok_or_else(|| Error::DomainEscape {
                context: "ψ₁ image of a curve vertex".into(),
                range: [p[0].to_f64_lossy(), p[1].to_f64_lossy()],
                domain: [scope.map.solver.bracket[0], scope.map.solver.bracket[1]],
            })
        })
        .collect::<Result<_>>()?;

    let mut params = Vec::with_capacity(2 + n + image1.len());
    let mut points = Vec::with_capacity(params.capacity());
    params.push(T::zero());
    points.push(gamma.points[0]);
    for (s, p) in gamma.params.iter().zip(&gamma.points) {
        params.push(t1 + theta * *s);
        points.push(scope.scal.psi0(*p));
    }
    for (s, p) in sub_params.iter().zip(image1) {
        params.push(t3 + theta * *s);
        points.push(p);
    }
    params.push(T::one());
    points.push(gamma.points[n - 1]);
    PolylineCurve::new(params, points, metric)
}

/// Measurements along a refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSummary {
    /// `L_k` for `k = 0..=K`.
    pub lipschitz: Vec<f64>,
    /// `d_k = sup_t |γ_{k+1}(t) − γ_k(t)|` for `k = 0..K`.
    pub sup_distances: Vec<f64>,
    pub vertices: Vec<usize>,
}

/// `γ₀, γ₁, …, γ_K`.
pub fn curve_sequence<T: Scalar>(
    gamma0: PolylineCurve<T>,
    scope: &Microscope<T>,
    cfg: &CurveConfig,
    iters: usize,
) -> Result<Vec<PolylineCurve<T>>> {
    if iters > cfg.max_iters {
        return Err(Error::InvalidInput(format!(
            "{iters} refinements exceed the maximum {}",
            cfg.max_iters
        )));
    }
    let mut out = vec![gamma0];
    for _ in 0..iters {
        let next = refine(out.last().expect("non-empty"), scope, cfg)?;
        out.push(next);
    }
    Ok(out)
}

pub fn summarize<T: Scalar>(curves: &[PolylineCurve<T>]) -> SequenceSummary {
    SequenceSummary {
        lipschitz: curves
            .iter()
            .map(|c| c.lipschitz_constant().to_f64_lossy())
            .collect(),
        sup_distances: curves
            .windows(2)
            .map(|w| w[1].sup_distance(&w[0]).to_f64_lossy())
            .collect(),
        vertices: curves.iter().map(PolylineCurve::len).collect(),
    }
}
