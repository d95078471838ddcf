//! The renormalization microscope at the fixed point.
//!
//! Coordinates here are the translated ones in which `F` fixes the origin
//! and `ψ₀(x, y) = (λx + p, μy)`; they are related to the coordinates of the
//! generating function by `h(x, y) = (x − c, y)` with `c = p / (1 − λ)`, so the
//! tip `(c, 0)` corresponds to the origin there. The pieces are
//! `B^n_w = ψ_{w₁} ∘ … ∘ ψ_{wₙ}(B)` with the first letter applied last.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::IfsConfig;
use crate::error::{Error, Result};
use crate::geometry::{bounding_box, contains, convex_disjoint, convex_hull, polygon_area, Metric};
use crate::map::ImplicitMap;
use crate::scalar::{Mat2, Point, Scalar};
use crate::series::grid;

/// Rescaling parameters of `ψ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalings<T> {
    pub lambda: T,
    pub mu: T,
    pub p: T,
    /// Abscissa of the tip, `p / (1 − λ)`.
    pub c: T,
}

impl<T: Scalar> Scalings<T> {
    /// From the tip abscissa; `p` is stored as `c (1 − λ)`.
    pub fn from_tip(lambda: T, mu: T, c: T) -> Self {
        Self {
            lambda,
            mu,
            p: c * (T::one() - lambda),
            c,
        }
    }

    pub fn from_translation(lambda: T, mu: T, p: T) -> Self {
        Self::from_tip(lambda, mu, p / (T::one() - lambda))
    }

    #[inline]
    pub fn psi0(&self, q: Point<T>) -> Point<T> {
        [self.lambda * q[0] + self.p, self.mu * q[1]]
    }

    #[inline]
    pub fn psi0_inverse(&self, q: Point<T>) -> Point<T> {
        [(q[0] - self.p) / self.lambda, q[1] / self.mu]
    }

    pub fn tip(&self) -> Point<T> {
        [self.c, T::zero()]
    }

    /// Into generating-function coordinates.
    #[inline]
    pub fn h(&self, q: Point<T>) -> Point<T> {
        [q[0] - self.c, q[1]]
    }

    #[inline]
    pub fn h_inverse(&self, q: Point<T>) -> Point<T> {
        [q[0] + self.c, q[1]]
    }
}

/// Finds the fixed point `(x*, 0)` of the map on the symmetry line and the
/// translation that moves it to the origin.
///
/// Candidates are the roots of `x ↦ s(x, x)` in the solver bracket; a
/// candidate is kept when the implicit solve at `(x*, 0)` returns `X = x*`.
pub fn derive_translation<T: Scalar>(m: &ImplicitMap<T>, tol: T) -> Result<Scalings<T>> {
    let s = m.s();
    let lo = T::lit(m.solver.bracket[0]);
    let hi = T::lit(m.solver.bracket[1]);
    let cells = 10 * m.solver.cells.max(1);
    let g = |x: T| s.eval(x, x);
    let mut roots = Vec::new();
    let h = (hi - lo) / T::from_usize_exact(cells);
    let mut a = lo;
    let mut ga = g(a);
    for k in 1..=cells {
        let b = if k == cells {
            hi
        } else {
            lo + h * T::from_usize_exact(k)
        };
        let gb = g(b);
        if ga == T::zero() {
            roots.push(a);
        } else if ga * gb < T::zero() {
            let (mut l, mut r, mut gl) = (a, b, ga);
            for _ in 0..200 {
                let mid = (l + r) * T::lit(0.5);
                if mid <= l || mid >= r {
                    break;
                }
                let gm = g(mid);
                if gl * gm <= T::zero() {
                    r = mid;
                } else {
                    l = mid;
                    gl = gm;
                }
            }
            roots.push((l + r) * T::lit(0.5));
        }
        if k == cells && gb == T::zero() {
            roots.push(b);
        }
        a = b;
        ga = gb;
    }
    let accepted: Vec<T> = roots
        .iter()
        .copied()
        .filter(|&x| match m.forward([x, T::zero()]) {
            Ok(img) => (img.point[0] - x).abs() <= tol && img.point[1].abs() <= tol,
            Err(_) => false,
        })
        .collect();
    match accepted.len() {
        0 => Err(Error::NoSymmetricFixedPoint),
        1 => Ok(Scalings::from_tip(m.gen.lambda, m.gen.mu, -accepted[0])),
        _ => Err(Error::AmbiguousFixedPoint {
            candidates: accepted.iter().take(8).map(|x| x.to_f64_lossy()).collect(),
        }),
    }
}

/// Address `w₁ w₂ … wₙ` of a piece.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicWord {
    bits: Vec<u8>,
}

impl DyadicWord {
    pub fn new(bits: Vec<u8>, max_len: usize) -> Result<Self> {
        if bits.len() > max_len {
            return Err(Error::InvalidInput(format!(
                "word length {} exceeds {max_len}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("word letters must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    /// Word of length `len` whose letters are the binary digits of `index`,
    /// `w₁` most significant.
    pub fn from_index(index: usize, len: usize) -> Self {
        Self {
            bits: (0..len)
                .map(|k| ((index >> (len - 1 - k)) & 1) as u8)
                .collect(),
        }
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl fmt::Display for DyadicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for DyadicWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidInput(format!(
                    "bad letter {c:?} in word {s:?}"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits, usize::MAX)
    }
}

/// One piece `B^n_w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion<T> {
    pub word: DyadicWord,
    /// Counter-clockwise convex hull of the images of the base sample.
    pub hull: Vec<Point<T>>,
    /// Image of the tip, the Cantor-set point with this address.
    pub center: Point<T>,
}

/// Base region `B`: an axis-aligned box and its sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseRegion<T> {
    /// `[xmin, ymin, xmax, ymax]`.
    pub bounds: [T; 4],
    pub samples: Vec<Point<T>>,
}

impl<T: Scalar> BaseRegion<T> {
    pub fn new(bounds: [T; 4], side: usize) -> Self {
        let side = side.max(2);
        let n = T::from_usize_exact(side - 1);
        let mut samples = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                let u = T::from_usize_exact(i) / n;
                let v = T::from_usize_exact(j) / n;
                samples.push([
                    bounds[0] + u * (bounds[2] - bounds[0]),
                    bounds[1] + v * (bounds[3] - bounds[1]),
                ]);
            }
        }
        Self { bounds, samples }
    }

    pub fn corners(&self) -> Vec<Point<T>> {
        let b = self.bounds;
        vec![[b[0], b[1]], [b[2], b[1]], [b[2], b[3]], [b[0], b[3]]]
    }

    /// Diagonal from the lower-left to the upper-right corner.
    pub fn diagonal(&self) -> [Point<T>; 2] {
        let b = self.bounds;
        [[b[0], b[1]], [b[2], b[3]]]
    }
}

/// Measured norms of the two branch differentials over the base sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    pub psi0: f64,
    pub psi1: f64,
    pub metric_weight: f64,
}

/// The map at the fixed point together with its scalings, base region and
/// the metric in which the branches contract.
#[derive(Debug, Clone)]
pub struct Microscope<T> {
    pub map: ImplicitMap<T>,
    pub scal: Scalings<T>,
    pub base: BaseRegion<T>,
    pub metric: Metric<T>,
    pub max_level: usize,
}

impl<T: Scalar> Microscope<T> {
    /// Derives the translation, bootstraps the base region from the tip cloud
    /// and fits the metric weight.
    pub fn build(map: ImplicitMap<T>, cfg: &IfsConfig) -> Result<Self> {
        let scal = derive_translation(&map, T::lit(cfg.origin_tol))?;
        let mut scope = Self {
            map,
            scal,
            base: BaseRegion::new([T::zero(); 4], 2),
            metric: Metric::euclidean(),
            max_level: cfg.max_level,
        };
        let cloud = scope.level_images(cfg.bootstrap_level, &[scope.scal.tip()])?;
        let pts: Vec<Point<T>> = cloud.into_iter().flatten().collect();
        let b = bounding_box(&pts);
        let (dx, dy) = (b[2] - b[0], b[3] - b[1]);
        let kx = T::lit(0.5 * cfg.inflate);
        let margin = T::lit(cfg.invariance_margin);
        // Grow the box vertically until both branches map it into itself.
        let mut ky = kx;
        loop {
            let bounds = [
                b[0] - kx * dx,
                b[1] - ky * dy,
                b[2] + kx * dx,
                b[3] + ky * dy,
            ];
            scope.base = BaseRegion::new(bounds, cfg.hull_grid);
            if scope.base_is_invariant(margin)? {
                break;
            }
            ky += kx;
            if ky > T::lit(0.5 * cfg.max_vertical_inflate) {
                return Err(Error::NestingViolation(format!(
                    "no base box up to vertical inflation {} maps into itself",
                    cfg.max_vertical_inflate
                )));
            }
        }
        scope.metric = match cfg.metric_weight {
            Some(w) => Metric::new(T::lit(w)),
            None => scope.fit_metric(cfg.metric_weight_range)?,
        };
        Ok(scope)
    }

    /// Whether `ψ₀` and `ψ₁` map the base sample into the base box shrunk by
    /// `margin` times its width and height.
    pub fn base_is_invariant(&self, margin: T) -> Result<bool> {
        let b = self.base.bounds;
        let (mx, my) = (margin * (b[2] - b[0]), margin * (b[3] - b[1]));
        for i in 0..2 {
            for &q in &self.base.samples {
                let p = self.psi(i, q)?;
                if p[0] < b[0] + mx || p[0] > b[2] - mx || p[1] < b[1] + my || p[1] > b[3] - my {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Assembles a microscope from known parts.
    pub fn from_parts(
        map: ImplicitMap<T>,
        scal: Scalings<T>,
        base: BaseRegion<T>,
        metric: Metric<T>,
        max_level: usize,
    ) -> Self {
        Self {
            map,
            scal,
            base,
            metric,
            max_level,
        }
    }

    pub fn tip(&self) -> Point<T> {
        self.scal.tip()
    }

    /// The map in these coordinates, `h⁻¹ ∘ F ∘ h`.
    pub fn forward(&self, q: Point<T>) -> Result<Point<T>> {
        let img = self.map.forward(self.scal.h(q))?;
        Ok(self.scal.h_inverse(img.point))
    }

    pub fn backward(&self, q: Point<T>) -> Result<Point<T>> {
        let img = self.map.backward(self.scal.h(q))?;
        Ok(self.scal.h_inverse(img.point))
    }

    pub fn differential(&self, q: Point<T>) -> Result<Mat2<T>> {
        self.map.differential(self.scal.h(q))
    }

    pub fn psi(&self, i: u8, q: Point<T>) -> Result<Point<T>> {
        let a = self.scal.psi0(q);
        if i == 0 {
            Ok(a)
        } else {
            self.forward(a)
        }
    }

    /// `Dψᵢ(q)`.
    pub fn psi_differential(&self, i: u8, q: Point<T>) -> Result<Mat2<T>> {
        let (l, m) = (self.scal.lambda, self.scal.mu);
        if i == 0 {
            return Ok([[l, T::zero()], [T::zero(), m]]);
        }
        let d = self.differential(self.scal.psi0(q))?;
        Ok([[d[0][0] * l, d[0][1] * m], [d[1][0] * l, d[1][1] * m]])
    }

    /// Whether `q` maps into the trusted square of the generating function.
    pub fn in_domain(&self, q: Point<T>) -> bool {
        let dom = self.map.s().domain();
        let e = self.scal.h(q);
        e.iter()
            .all(|v| v.is_finite() && *v >= dom[0] && *v <= dom[1])
    }

    /// `ψ_{w₁} ∘ … ∘ ψ_{wₙ}(q)`.
    pub fn word_image(&self, w: &DyadicWord, q: Point<T>) -> Result<Point<T>> {
        let mut p = q;
        for (depth, &b) in w.bits().iter().rev().enumerate() {
            p = self.psi(b, p).map_err(|_| self.escape(w, depth + 1))?;
            if !self.in_domain(p) {
                return Err(self.escape(w, depth + 1));
            }
        }
        Ok(p)
    }

    fn escape(&self, w: &DyadicWord, depth: usize) -> Error {
        Error::WordEscape {
            word: w.to_string(),
            depth,
        }
    }

    /// Images of `pts` under every word of length `n`, in word-index order.
    ///
    /// Built level by level: the images for `w₁ w'` are `ψ_{w₁}` of those
    /// for `w'`.
    pub fn level_images(&self, n: usize, pts: &[Point<T>]) -> Result<Vec<Vec<Point<T>>>> {
        self.check_level(n)?;
        let mut level = vec![pts.to_vec()];
        for k in 1..=n {
            let half = level.len();
            level = (0..2 * half)
                .into_par_iter()
                .map(|idx| {
                    let first = (idx / half) as u8;
                    level[idx % half]
                        .iter()
                        .map(|&q| {
                            let p = self.psi(first, q).ok().filter(|p| self.in_domain(*p));
                            p.ok_or_else(|| self.escape(&DyadicWord::from_index(idx, k), k))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
        }
        Ok(level)
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n > self.max_level {
            return Err(Error::InvalidInput(format!(
                "level {n} exceeds the maximum {}",
                self.max_level
            )));
        }
        Ok(())
    }

    /// The `2ⁿ` points `ψ_w(tip)`, in lexicographic word order.
    pub fn cantor_cloud(&self, n: usize) -> Result<Vec<(DyadicWord, Point<T>)>> {
        let imgs = self.level_images(n, &[self.tip()])?;
        Ok(imgs
            .into_iter()
            .enumerate()
            .map(|(i, v)| (DyadicWord::from_index(i, n), v[0]))
            .collect())
    }

    /// Pieces of every level up to `n`; checks that each hull is
    /// non-degenerate, lies in its parent and misses the other hulls of its
    /// level.
    pub fn boxes_by_level(&self, n: usize, slack: T) -> Result<Vec<Vec<BoxRegion<T>>>> {
        self.check_level(n)?;
        let mut pts = self.base.samples.clone();
        pts.push(self.tip());
        let tip_idx = pts.len() - 1;
        let mut levels: Vec<Vec<BoxRegion<T>>> = Vec::with_capacity(n + 1);
        let mut images = vec![pts];
        for k in 0..=n {
            if k > 0 {
                let half = images.len();
                images = (0..2 * half)
                    .into_par_iter()
                    .map(|idx| {
                        let first = (idx / half) as u8;
                        images[idx % half]
                            .iter()
                            .map(|&q| {
                                let p = self.psi(first, q).ok().filter(|p| self.in_domain(*p));
                                p.ok_or_else(|| self.escape(&DyadicWord::from_index(idx, k), k))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            let regions: Vec<BoxRegion<T>> = images
                .par_iter()
                .enumerate()
                .map(|(idx, img)| BoxRegion {
                    word: DyadicWord::from_index(idx, k),
                    hull: convex_hull(&img[..tip_idx]),
                    center: img[tip_idx],
                })
                .collect();
            for r in &regions {
                if r.hull.len() < 3 || !(polygon_area(&r.hull) > T::zero()) {
                    return Err(Error::NestingViolation(format!(
                        "degenerate hull for word {}",
                        r.word
                    )));
                }
            }
            if let Some(parents) = levels.last() {
                check_nesting(parents, &regions, slack)?;
            }
            check_disjoint(&regions)?;
            levels.push(regions);
        }
        Ok(levels)
    }

    /// Pieces of level `n`.
    pub fn boxes(&self, n: usize, slack: T) -> Result<Vec<BoxRegion<T>>> {
        Ok(self.boxes_by_level(n, slack)?.pop().unwrap_or_default())
    }

    /// For each piece, the piece containing the image of its center; checks
    /// that this is a permutation consisting of one cycle.
    pub fn odometer_check(&self, boxes: &[BoxRegion<T>], slack: T) -> Result<Vec<usize>> {
        let sigma: Vec<usize> = boxes
            .par_iter()
            .map(|b| {
                let q = self.forward(b.center)?;
                let hits: Vec<usize> = boxes
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| contains(&c.hull, q, slack))
                    .map(|(j, _)| j)
                    .collect();
                match hits.as_slice() {
                    [j] => Ok(*j),
                    _ => Err(Error::NotPermutation(format!(
                        "image of the center of {} lies in {} pieces",
                        b.word,
                        hits.len()
                    ))),
                }
            })
            .collect::<Result<_>>()?;
        let mut seen = vec![false; sigma.len()];
        for &j in &sigma {
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::NotPermutation(format!("piece {j} is hit twice")));
            }
        }
        let cycles = cycle_lengths(&sigma);
        if cycles.len() != 1 {
            return Err(Error::NotSingleCycle(cycles));
        }
        Ok(sigma)
    }

    /// `(‖Dψ₀‖, max ‖Dψ₁‖)` over the base sample, in the microscope metric.
    pub fn contraction(&self) -> Result<Contraction> {
        let d0 = self.metric.op_norm(&self.psi_differential(0, self.tip())?);
        let d1 = self
            .base
            .samples
            .par_iter()
            .map(|&q| Ok(self.metric.op_norm(&self.psi_differential(1, q)?)))
            .collect::<Result<Vec<T>>>()?
            .into_iter()
            .fold(T::zero(), T::max);
        Ok(Contraction {
            psi0: d0.to_f64_lossy(),
            psi1: d1.to_f64_lossy(),
            metric_weight: self.metric.y_weight.to_f64_lossy(),
        })
    }

    /// Diameter of the base region in the microscope metric.
    pub fn base_diameter(&self) -> T {
        self.metric.diameter(&self.base.corners())
    }

    /// Weight of the second coordinate minimizing the largest `‖Dψ₁‖` over
    /// the base sample (golden-section search in `log w`).
    fn fit_metric(&self, range: [f64; 2]) -> Result<Metric<T>> {
        let ds = self
            .base
            .samples
            .par_iter()
            .map(|&q| self.psi_differential(1, q))
            .collect::<Result<Vec<Mat2<T>>>>()?;
        let cost = |lw: f64| {
            let m = Metric::new(T::lit(lw.exp()));
            ds.iter()
                .map(|d| m.op_norm(d))
                .fold(T::zero(), T::max)
                .to_f64_lossy()
        };
        let (mut a, mut b) = (range[0].ln(), range[1].ln());
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (cost(c), cost(d));
        for _ in 0..80 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = cost(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = cost(d);
            }
        }
        Ok(Metric::new(T::lit((0.5 * (a + b)).exp())))
    }
}

fn check_nesting<T: Scalar>(
    parents: &[BoxRegion<T>],
    children: &[BoxRegion<T>],
    slack: T,
) -> Result<()> {
    let bad = children.par_iter().enumerate().find_first(|(idx, c)| {
        let parent = &parents[idx >> 1];
        !c.hull.iter().all(|&v| contains(&parent.hull, v, slack))
    });
    match bad {
        Some((idx, c)) => Err(Error::NestingViolation(format!(
            "piece {} is not inside piece {}",
            c.word,
            parents[idx >> 1].word
        ))),
        None => Ok(()),
    }
}

/// Sweep over hulls sorted by their leftmost abscissa.
fn check_disjoint<T: Scalar>(regions: &[BoxRegion<T>]) -> Result<()> {
    let bb: Vec<[T; 4]> = regions.iter().map(|r| bounding_box(&r.hull)).collect();
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&i, &j| {
        bb[i][0]
            .partial_cmp(&bb[j][0])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let clash = order.par_iter().enumerate().find_map_first(|(k, &i)| {
        order[k + 1..]
            .iter()
            .take_while(|&&j| bb[j][0] <= bb[i][2])
            .find(|&&j| !convex_disjoint(&regions[i].hull, &regions[j].hull))
            .map(|&j| (i, j))
    });
    match clash {
        Some((i, j)) => Err(Error::NestingViolation(format!(
            "pieces {} and {} overlap",
            regions[i].word, regions[j].word
        ))),
        None => Ok(()),
    }
}

/// Cycle lengths of a permutation, in order of their smallest element.
pub fn cycle_lengths(sigma: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; sigma.len()];
    let mut out = Vec::new();
    for start in 0..sigma.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = sigma[k];
            len += 1;
        }
        out.push(len);
    }
    out
}

/// Sample grid of the trusted square, used by map-level checks.
pub fn square_samples<T: Scalar>(half_width: T, n: usize) -> Vec<Point<T>> {
    grid([-half_width, half_width], n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi0_fixes_the_tip() {
        let s = Scalings::from_translation(-0.25f64, 0.06, 1.0);
        assert_eq!(s.psi0([0.0, 0.0]), [1.0, 0.0]);
        assert!((s.c - 0.8).abs() < 1e-15);
        let t = s.psi0(s.tip());
        assert!((t[0] - s.c).abs() < 1e-15 && t[1] == 0.0);
        assert_eq!(s.c * (1.0 - s.lambda), s.p);
    }

    #[test]
    fn words_round_trip() {
        let w = DyadicWord::from_index(6, 4);
        assert_eq!(w.to_string(), "0110");
        assert_eq!(w.index(), 6);
        assert_eq!("0110".parse::<DyadicWord>().unwrap(), w);
        assert!(DyadicWord::new(vec![0; 25], 24).is_err());
        assert!("012".parse::<DyadicWord>().is_err());
    }

    #[test]
    fn cycles() {
        assert_eq!(cycle_lengths(&[1, 2, 0, 3]), vec![3, 1]);
        assert_eq!(cycle_lengths(&[1, 0]), vec![2]);
    }
}
