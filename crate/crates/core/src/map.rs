//! The area-preserving map defined implicitly by a generating function:
//! `(x, −s(X, x)) ↦ (X, s(x, X))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renorm::GeneratingSystem;
use crate::scalar::{det, Mat2, Point, Scalar};
use crate::series::{Axis, BivariateSeries};

/// Settings of the implicit `X`-solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitSolver {
    pub bracket: [f64; 2],
    /// Number of cells the bracket is split into for root isolation.
    pub cells: usize,
    /// Bisection stops once the bracket is this narrow; Newton polishes.
    pub bisect_width: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    /// `|s₁|` below this makes the differential singular.
    pub singular_twist: f64,
}

impl Default for ImplicitSolver {
    fn default() -> Self {
        Self {
            bracket: [-1.2, 1.2],
            cells: 24,
            bisect_width: 1e-3,
            newton_tol: 1e-12,
            max_iter: 60,
            singular_twist: 1e-10,
        }
    }
}

/// Image of a point; `ambiguous` is set when the bracket held more than one
/// root and the one of smallest `|X|` was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Image<T> {
    pub point: Point<T>,
    pub ambiguous: bool,
}

#[derive(Debug, Clone)]
pub struct ImplicitMap<T> {
    pub gen: GeneratingSystem<T>,
    pub solver: ImplicitSolver,
    s1: BivariateSeries<T>,
    s2: BivariateSeries<T>,
}

impl<T: Scalar> ImplicitMap<T> {
    pub fn new(gen: GeneratingSystem<T>, solver: ImplicitSolver) -> Self {
        let s1 = gen.s.partial(Axis::First);
        let s2 = gen.s.partial(Axis::Second);
        Self {
            gen,
            solver,
            s1,
            s2,
        }
    }

    pub fn from_series(s: BivariateSeries<T>, solver: ImplicitSolver) -> Self {
        Self::new(GeneratingSystem::new(s, T::nan()), solver)
    }

    pub fn s(&self) -> &BivariateSeries<T> {
        &self.gen.s
    }

    pub fn s1(&self) -> &BivariateSeries<T> {
        &self.s1
    }

    pub fn s2(&self) -> &BivariateSeries<T> {
        &self.s2
    }

    /// Solves `y + s(X, x) = 0` for `X` in the bracket.
    pub fn solve_x(&self, x: T, y: T) -> Result<(T, bool)> {
        let s = &self.gen.s;
        let f = |xx: T| y + s.eval(xx, x);
        let lo = T::lit(self.solver.bracket[0]);
        let hi = T::lit(self.solver.bracket[1]);
        let cells = self.solver.cells.max(1);
        let h = (hi - lo) / T::from_usize_exact(cells);
        let mut brackets: Vec<(T, T, T)> = Vec::new();
        let mut a = lo;
        let mut fa = f(a);
        for k in 1..=cells {
            let b = if k == cells {
                hi
            } else {
                lo + h * T::from_usize_exact(k)
            };
            let fb = f(b);
            if fa == T::zero() {
                brackets.push((a, a, fa));
            } else if fa * fb < T::zero() || (k == cells && fb == T::zero()) {
                brackets.push((a, b, fa));
            }
            a = b;
            fa = fb;
        }
        if brackets.is_empty() {
            return Err(Error::NoRoot {
                x: x.to_f64_lossy(),
                y: y.to_f64_lossy(),
                lo: self.solver.bracket[0],
                hi: self.solver.bracket[1],
            });
        }
        let ambiguous = brackets.len() > 1;
        let mut roots = Vec::with_capacity(brackets.len());
        for (l, r, fl) in brackets {
            roots.push(self.polish(&f, l, r, fl, x)?);
        }
        let best = roots
            .into_iter()
            .fold(None, |acc: Option<T>, r| match acc {
                Some(b) if b.abs() <= r.abs() => Some(b),
                _ => Some(r),
            })
            .expect("at least one root");
        Ok((best, ambiguous))
    }

    fn polish(&self, f: &impl Fn(T) -> T, mut l: T, mut r: T, mut fl: T, x: T) -> Result<T> {
        let width = T::lit(self.solver.bisect_width);
        while r - l > width {
            let m = (l + r) * T::lit(0.5);
            let fm = f(m);
            if fl * fm <= T::zero() {
                r = m;
            } else {
                l = m;
                fl = fm;
            }
        }
        let tol = T::lit(self.solver.newton_tol);
        let mut xx = (l + r) * T::lit(0.5);
        for _ in 0..self.solver.max_iter {
            let fx = f(xx);
            if fx.abs() <= tol {
                return Ok(xx);
            }
            let d = self.s1.eval(xx, x);
            let next = xx - fx / d;
            // Fall back to bisection if Newton leaves the bracket.
            xx = if d != T::zero() && next >= l && next <= r {
                next
            } else {
                (l + r) * T::lit(0.5)
            };
            let fx = f(xx);
            if fl * fx <= T::zero() {
                r = xx;
            } else {
                l = xx;
                fl = fx;
            }
        }
        if f(xx).abs() <= tol * T::lit(16.0) {
            Ok(xx)
        } else {
            Err(Error::NoConvergence(format!(
                "implicit X-solve: residual {} at X = {xx}",
                f(xx)
            )))
        }
    }

    pub fn forward(&self, p: Point<T>) -> Result<Image<T>> {
        let (xx, ambiguous) = self.solve_x(p[0], p[1])?;
        Ok(Image {
            point: [xx, self.gen.s.eval(p[0], xx)],
            ambiguous,
        })
    }

    /// `F⁻¹ = T ∘ F ∘ T` with `T(x, y) = (x, −y)`.
    pub fn backward(&self, p: Point<T>) -> Result<Image<T>> {
        let img = self.forward([p[0], -p[1]])?;
        Ok(Image {
            point: [img.point[0], -img.point[1]],
            ambiguous: img.ambiguous,
        })
    }

    /// Differential of `F` at `p` from the generating function.
    pub fn differential(&self, p: Point<T>) -> Result<Mat2<T>> {
        let (xx, _) = self.solve_x(p[0], p[1])?;
        self.differential_at(p[0], xx)
    }

    /// Differential given both `x` and the solved `X`.
    pub fn differential_at(&self, x: T, xx: T) -> Result<Mat2<T>> {
        let a = self.s1.eval(xx, x);
        if a.abs() < T::lit(self.solver.singular_twist) {
            return Err(Error::SingularTwist {
                x: x.to_f64_lossy(),
                xx: xx.to_f64_lossy(),
                value: a.to_f64_lossy(),
            });
        }
        let b = self.s2.eval(xx, x);
        let c = self.s1.eval(x, xx);
        let e = self.s2.eval(x, xx);
        Ok([[-b / a, -a.recip()], [c - e * b / a, -e / a]])
    }

    /// `∂X/∂y = −1 / s₁(X, x)` at `p`.
    pub fn twist(&self, p: Point<T>) -> Result<T> {
        let (xx, _) = self.solve_x(p[0], p[1])?;
        Ok(-self.s1.eval(xx, p[0]).recip())
    }

    /// Determinant of the differential at `p`.
    pub fn jacobian_det(&self, p: Point<T>) -> Result<T> {
        Ok(det(&self.differential(p)?))
    }

    /// Differential of `F⁻¹` at `p`, through reversibility.
    pub fn differential_inverse(&self, p: Point<T>) -> Result<Mat2<T>> {
        let m = self.differential([p[0], -p[1]])?;
        // D(TFT) = T · DF(Tp) · T
        Ok([[m[0][0], -m[0][1]], [-m[1][0], m[1][1]]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shear() -> ImplicitMap<f64> {
        let s = BivariateSeries::from_terms(1, [-1.2, 1.2], &[(1, 0, -1.0), (0, 1, 1.0)]);
        ImplicitMap::from_series(s, ImplicitSolver::default())
    }

    #[test]
    fn shear_forward_backward() {
        let m = shear();
        let img = m.forward([0.1, 0.3]).unwrap();
        assert!((img.point[0] - 0.4).abs() < 1e-12 && (img.point[1] - 0.3).abs() < 1e-12);
        assert!(!img.ambiguous);
        let back = m.backward([0.4, 0.3]).unwrap();
        assert!((back.point[0] - 0.1).abs() < 1e-12 && (back.point[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn shear_differential_is_exact() {
        let m = shear();
        let d = m.differential([0.2, -0.1]).unwrap();
        assert_eq!(d, [[1.0, 1.0], [0.0, 1.0]]);
        assert_eq!(m.twist([0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn no_root_outside_bracket() {
        let m = shear();
        assert!(matches!(m.forward([1.0, 1.0]), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn multiple_roots_are_flagged() {
        // y + s(X, x) = X² − 0.25 has roots ±0.5.
        let s = BivariateSeries::from_terms(2, [-1.2, 1.2], &[(2, 0, 1.0f64)]);
        let m = ImplicitMap::from_series(s, ImplicitSolver::default());
        let img = m.forward([0.3, -0.25]).unwrap();
        assert!(img.ambiguous);
        assert!((img.point[0].abs() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_twist_is_reported() {
        let s = BivariateSeries::from_terms(2, [-1.2, 1.2], &[(0, 1, 1.0)]);
        let m = ImplicitMap::from_series(s, ImplicitSolver::default());
        assert!(matches!(
            m.differential_at(0.0, 0.0),
            Err(Error::SingularTwist { .. })
        ));
    }
}
