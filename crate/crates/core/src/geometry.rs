//! Planar geometry on small point sets: a weighted Euclidean metric, convex
//! hulls, containment and separation tests, and point-to-polyline distances.

use serde::{Deserialize, Serialize};

use crate::scalar::{op_norm, Mat2, Point, Scalar};

/// Euclidean norm after dividing the second coordinate by `y_weight`:
/// `‖(u, v)‖ = √(u² + (v / y_weight)²)`.
///
/// `y_weight = 1` is the plain Euclidean metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric<T> {
    pub y_weight: T,
}

impl<T: Scalar> Metric<T> {
    pub fn euclidean() -> Self {
        Self { y_weight: T::one() }
    }

    pub fn new(y_weight: T) -> Self {
        assert!(y_weight > T::zero(), "metric weight must be positive");
        Self { y_weight }
    }

    /// Maps a point into coordinates where this metric is Euclidean.
    #[inline]
    pub fn chart(&self, p: Point<T>) -> Point<T> {
        [p[0], p[1] / self.y_weight]
    }

    #[inline]
    pub fn norm(&self, v: Point<T>) -> T {
        v[0].hypot(v[1] / self.y_weight)
    }

    #[inline]
    pub fn dist(&self, a: Point<T>, b: Point<T>) -> T {
        self.norm([a[0] - b[0], a[1] - b[1]])
    }

    /// Operator norm of a linear map measured in this metric.
    pub fn op_norm(&self, m: &Mat2<T>) -> T {
        let w = self.y_weight;
        op_norm(&[[m[0][0], m[0][1] * w], [m[1][0] / w, m[1][1]]])
    }

    /// Largest pairwise distance.
    pub fn diameter(&self, pts: &[Point<T>]) -> T {
        let mut d = T::zero();
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                d = d.max(self.dist(*a, *b));
            }
        }
        d
    }

    /// Distance from `p` to the segment `[a, b]`.
    pub fn point_segment(&self, p: Point<T>, a: Point<T>, b: Point<T>) -> T {
        let (p, a, b) = (self.chart(p), self.chart(a), self.chart(b));
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > T::zero() {
            (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2)
                .max(T::zero())
                .min(T::one())
        } else {
            T::zero()
        };
        (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
    }

    /// Distance from `p` to the polyline through `vertices`.
    pub fn point_polyline(&self, p: Point<T>, vertices: &[Point<T>]) -> T {
        match vertices {
            [] => T::infinity(),
            [v] => self.dist(p, *v),
            _ => vertices
                .windows(2)
                .map(|s| self.point_segment(p, s[0], s[1]))
                .fold(T::infinity(), T::min),
        }
    }

    /// One-sided Hausdorff distance `sup_{a ∈ from} inf_{b ∈ to} |a − b|`.
    pub fn directed_hausdorff(&self, from: &[Point<T>], to: &[Point<T>]) -> T {
        from.iter()
            .map(|a| {
                to.iter()
                    .map(|b| self.dist(*a, *b))
                    .fold(T::infinity(), T::min)
            })
            .fold(T::zero(), T::max)
    }

    pub fn hausdorff(&self, a: &[Point<T>], b: &[Point<T>]) -> T {
        self.directed_hausdorff(a, b)
            .max(self.directed_hausdorff(b, a))
    }
}

#[inline]
fn cross<T: Scalar>(o: Point<T>, a: Point<T>, b: Point<T>) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// repeated or collinear vertices.
pub fn convex_hull<T: Scalar>(pts: &[Point<T>]) -> Vec<Point<T>> {
    let mut p: Vec<Point<T>> = pts.to_vec();
    p.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a[1].partial_cmp(&b[1]).unwrap_or(std::cmp::Ordering::Equal))
    });
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<Point<T>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point<T>>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= T::zero()
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Signed area of a polygon (positive when counter-clockwise).
pub fn polygon_area<T: Scalar>(poly: &[Point<T>]) -> T {
    let Some(&o) = poly.first() else {
        return T::zero();
    };
    // Fan from the first vertex: tiny polygons far from the origin keep
    // their area.
    let mut a = T::zero();
    for w in poly[1..].windows(2) {
        a += cross(o, w[0], w[1]);
    }
    a * T::lit(0.5)
}

/// Whether `p` lies in the counter-clockwise convex polygon `hull` enlarged
/// by `slack` (Euclidean distance).
pub fn contains<T: Scalar>(hull: &[Point<T>], p: Point<T>, slack: T) -> bool {
    match hull.len() {
        0 => false,
        1 => (p[0] - hull[0][0]).hypot(p[1] - hull[0][1]) <= slack,
        2 => Metric::euclidean().point_segment(p, hull[0], hull[1]) <= slack,
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            cross(a, b, p) >= -slack * len
        }),
    }
}

/// Axis-aligned bounding box `[xmin, ymin, xmax, ymax]`.
pub fn bounding_box<T: Scalar>(pts: &[Point<T>]) -> [T; 4] {
    let mut b = [
        T::infinity(),
        T::infinity(),
        T::neg_infinity(),
        T::neg_infinity(),
    ];
    for p in pts {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].min(p[1]);
        b[2] = b[2].max(p[0]);
        b[3] = b[3].max(p[1]);
    }
    b
}

/// Separating-axis test for two convex polygons; touching counts as
/// intersecting.
pub fn convex_disjoint<T: Scalar>(a: &[Point<T>], b: &[Point<T>]) -> bool {
    let (ba, bb) = (bounding_box(a), bounding_box(b));
    if ba[2] < bb[0] || bb[2] < ba[0] || ba[3] < bb[1] || bb[3] < ba[1] {
        return true;
    }
    separated_along_edges(a, b) || separated_along_edges(b, a)
}

fn separated_along_edges<T: Scalar>(a: &[Point<T>], b: &[Point<T>]) -> bool {
    let n = a.len();
    if n < 2 {
        return false;
    }
    (0..n).any(|i| {
        let (p, q) = (a[i], a[(i + 1) % n]);
        let normal = [q[1] - p[1], p[0] - q[0]];
        if normal == [T::zero(), T::zero()] {
            return false;
        }
        let proj = |v: &Point<T>| v[0] * normal[0] + v[1] * normal[1];
        let (amin, amax) = a
            .iter()
            .map(proj)
            .fold((T::infinity(), T::neg_infinity()), |(l, h), x| {
                (l.min(x), h.max(x))
            });
        let (bmin, bmax) = b
            .iter()
            .map(proj)
            .fold((T::infinity(), T::neg_infinity()), |(l, h), x| {
                (l.min(x), h.max(x))
            });
        amax < bmin || bmax < amin
    })
}

/// Uniform bucket grid over the segments of a polyline, for nearest-segment
/// queries in a given metric.
#[derive(Debug, Clone)]
pub struct PolylineIndex<T> {
    metric: Metric<T>,
    chart: Vec<Point<T>>,
    origin: Point<T>,
    cell: T,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl<T: Scalar> PolylineIndex<T> {
    /// `extra` points widen the grid so that later queries fall inside it.
    pub fn new(vertices: &[Point<T>], extra: &[Point<T>], metric: Metric<T>) -> Self {
        let chart: Vec<Point<T>> = vertices.iter().map(|&p| metric.chart(p)).collect();
        let all: Vec<Point<T>> = chart
            .iter()
            .copied()
            .chain(extra.iter().map(|&p| metric.chart(p)))
            .collect();
        let b = bounding_box(&all);
        let (w, h) = (
            (b[2] - b[0]).max(T::min_positive_value()),
            (b[3] - b[1]).max(T::min_positive_value()),
        );
        let target = T::from_usize_exact(chart.len().clamp(1, 1 << 22));
        let mut cell = (w * h / target).sqrt().max(w.max(h) / T::lit(4096.0));
        if !(cell > T::zero()) {
            cell = T::one();
        }
        let nx = ((w / cell).to_f64_lossy().floor() as usize + 1).max(1);
        let ny = ((h / cell).to_f64_lossy().floor() as usize + 1).max(1);
        let mut idx = Self {
            metric,
            chart,
            origin: [b[0], b[1]],
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for k in 0..idx.chart.len().saturating_sub(1) {
            let (p, q) = (idx.chart[k], idx.chart[k + 1]);
            let (i0, j0) = idx.cell_of([p[0].min(q[0]), p[1].min(q[1])]);
            let (i1, j1) = idx.cell_of([p[0].max(q[0]), p[1].max(q[1])]);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    idx.buckets[j * nx + i].push(k as u32);
                }
            }
        }
        idx
    }

    fn cell_of(&self, p: Point<T>) -> (usize, usize) {
        let f = |v: T, o: T, n: usize| {
            let c = ((v - o) / self.cell).to_f64_lossy().floor();
            (c.max(0.0) as usize).min(n - 1)
        };
        (
            f(p[0], self.origin[0], self.nx),
            f(p[1], self.origin[1], self.ny),
        )
    }

    fn segment_dist(&self, p: Point<T>, k: usize) -> T {
        // Both already in chart coordinates.
        Metric::euclidean().point_segment(p, self.chart[k], self.chart[k + 1])
    }

    /// Distance from `q` to the polyline. Rings of cells are scanned outward
    /// until no unseen segment can be closer.
    pub fn distance(&self, q: Point<T>) -> T {
        if self.chart.len() == 1 {
            return self.metric.dist(
                q,
                [self.chart[0][0], self.chart[0][1] * self.metric.y_weight],
            );
        }
        let p = self.metric.chart(q);
        let (ci, cj) = self.cell_of(p);
        let inside = p[0] >= self.origin[0]
            && p[1] >= self.origin[1]
            && p[0] <= self.origin[0] + self.cell * T::from_usize_exact(self.nx)
            && p[1] <= self.origin[1] + self.cell * T::from_usize_exact(self.ny);
        if !inside {
            return (0..self.chart.len() - 1)
                .map(|k| self.segment_dist(p, k))
                .fold(T::infinity(), T::min);
        }
        let mut best = T::infinity();
        let rmax = self.nx.max(self.ny);
        for r in 0..=rmax {
            let (i0, i1) = (ci.saturating_sub(r), (ci + r).min(self.nx - 1));
            let (j0, j1) = (cj.saturating_sub(r), (cj + r).min(self.ny - 1));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    let on_ring = i + r == ci || i == ci + r || j + r == cj || j == cj + r;
                    if !on_ring {
                        continue;
                    }
                    for &k in &self.buckets[j * self.nx + i] {
                        best = best.min(self.segment_dist(p, k as usize));
                    }
                }
            }
            if best <= self.cell * T::from_usize_exact(r) {
                break;
            }
        }
        best
    }
}
