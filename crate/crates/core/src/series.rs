//! Truncated bivariate polynomial series.
//!
//! A [`BivariateSeries`] stores the coefficients `c[i][j]` of `x^i X^j` for
//! all `i + j <= degree` in a dense `(degree + 1)²` row-major block; entries
//! above the anti-diagonal are kept at zero. Products and compositions are
//! truncated back to the working degree; the diagnostic variants report the
//! magnitude of what was dropped.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which argument to differentiate in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
}

/// Result of a truncating operation together with the sum of the absolute
/// values of the coefficients that were discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated<S, T> {
    pub value: S,
    pub dropped: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSeries<T> {
    degree: usize,
    domain: [T; 2],
    coeffs: Vec<T>,
}

impl<T: Scalar> BivariateSeries<T> {
    pub fn zeros(degree: usize, domain: [T; 2]) -> Self {
        let n = degree + 1;
        Self {
            degree,
            domain,
            coeffs: vec![T::zero(); n * n],
        }
    }

    pub fn constant(value: T, degree: usize, domain: [T; 2]) -> Self {
        let mut s = Self::zeros(degree, domain);
        s.coeffs[0] = value;
        s
    }

    /// Builds a series from `(i, j, c)` triples meaning `c · x^i X^j`.
    /// Terms above `degree` are ignored.
    pub fn from_terms(degree: usize, domain: [T; 2], terms: &[(usize, usize, T)]) -> Self {
        let mut s = Self::zeros(degree, domain);
        for &(i, j, c) in terms {
            if i + j <= degree {
                let k = s.idx(i, j);
                s.coeffs[k] += c;
            }
        }
        s
    }

    /// Builds a series from a row-major `(degree + 1)²` coefficient block.
    pub fn from_row_major(degree: usize, domain: [T; 2], coeffs: Vec<T>) -> Result<Self> {
        let n = degree + 1;
        if coeffs.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients for degree {degree}, got {}",
                n * n,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if i + j > degree && coeffs[i * n + j] != T::zero() {
                    return Err(Error::InvalidInput(format!(
                        "nonzero coefficient at ({i}, {j}) above degree {degree}"
                    )));
                }
            }
        }
        if !(domain[0] < domain[1]) {
            return Err(Error::InvalidInput("empty domain".into()));
        }
        Ok(Self {
            degree,
            domain,
            coeffs,
        })
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.degree + 1) + j
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn domain(&self) -> [T; 2] {
        self.domain
    }

    pub fn with_domain(mut self, domain: [T; 2]) -> Self {
        self.domain = domain;
        self
    }

    /// Coefficient of `x^i X^j` (zero beyond the degree).
    pub fn coeff(&self, i: usize, j: usize) -> T {
        if i + j > self.degree {
            T::zero()
        } else {
            self.coeffs[self.idx(i, j)]
        }
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, c: T) {
        assert!(i + j <= self.degree, "term ({i}, {j}) above degree");
        let k = self.idx(i, j);
        self.coeffs[k] = c;
    }

    /// Full row-major block, including the structural zeros.
    pub fn row_major(&self) -> &[T] {
        &self.coeffs
    }

    /// Number of free coefficients (`i + j <= degree`).
    pub fn n_terms(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    /// Free coefficients in `(i, j)` lexicographic order.
    pub fn packed(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_terms());
        for i in 0..=self.degree {
            for j in 0..=self.degree - i {
                out.push(self.coeffs[self.idx(i, j)]);
            }
        }
        out
    }

    /// Inverse of [`BivariateSeries::packed`].
    pub fn from_packed(degree: usize, domain: [T; 2], packed: &[T]) -> Self {
        let mut s = Self::zeros(degree, domain);
        let mut k = 0;
        for i in 0..=degree {
            for j in 0..=degree - i {
                let at = s.idx(i, j);
                s.coeffs[at] = packed[k];
                k += 1;
            }
        }
        s
    }

    /// `(i, j)` exponents in packed order.
    pub fn packed_exponents(degree: usize) -> Vec<(usize, usize)> {
        (0..=degree)
            .flat_map(|i| (0..=degree - i).map(move |j| (i, j)))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Largest coefficient magnitude.
    pub fn sup_norm(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    /// Sum of coefficient magnitudes; bounds `|f|` on `[-1, 1]²`.
    pub fn l1_norm(&self) -> T {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Nested (Horner) evaluation: outer in `x`, inner in `X`.
    pub fn eval(&self, x: T, xx: T) -> T {
        let d = self.degree;
        let mut acc = T::zero();
        for i in (0..=d).rev() {
            let row = &self.coeffs[i * (d + 1)..i * (d + 1) + (d - i) + 1];
            let mut inner = T::zero();
            for &c in row.iter().rev() {
                inner = inner * xx + c;
            }
            acc = acc * x + inner;
        }
        acc
    }

    /// Exact coefficient-level derivative; the result has degree `degree - 1`
    /// (a constant differentiates to the zero series of degree 0).
    pub fn partial(&self, axis: Axis) -> Self {
        let d = self.degree;
        let nd = d.saturating_sub(1);
        let mut out = Self::zeros(nd, self.domain);
        if d == 0 {
            return out;
        }
        for i in 0..=nd {
            for j in 0..=nd - i {
                let c = match axis {
                    Axis::First => self.coeff(i + 1, j) * T::from_usize_exact(i + 1),
                    Axis::Second => self.coeff(i, j + 1) * T::from_usize_exact(j + 1),
                };
                let k = out.idx(i, j);
                out.coeffs[k] = c;
            }
        }
        out
    }

    /// `(x, X) ↦ f(X, x)`.
    pub fn swap(&self) -> Self {
        let mut out = Self::zeros(self.degree, self.domain);
        for i in 0..=self.degree {
            for j in 0..=self.degree - i {
                let k = out.idx(j, i);
                out.coeffs[k] = self.coeffs[self.idx(i, j)];
            }
        }
        out
    }

    /// Average of `f` and its swap; the result is symmetric.
    pub fn symmetrize(&self) -> Self {
        let t = self.swap();
        let half = T::lit(0.5);
        let mut out = self.clone();
        for (o, b) in out.coeffs.iter_mut().zip(&t.coeffs) {
            *o = (*o + *b) * half;
        }
        out
    }

    /// Re-embeds at another degree: zero-pads upward, truncates downward.
    pub fn resize(&self, degree: usize) -> Self {
        let mut out = Self::zeros(degree, self.domain);
        let m = degree.min(self.degree);
        for i in 0..=m {
            for j in 0..=m - i {
                let k = out.idx(i, j);
                out.coeffs[k] = self.coeff(i, j);
            }
        }
        out
    }

    pub fn scale(&self, a: T) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// `(x, X) ↦ f(a x, b X)`.
    pub fn scale_args(&self, a: T, b: T) -> Self {
        let mut out = self.clone();
        let mut ai = T::one();
        for i in 0..=self.degree {
            let mut bj = T::one();
            for j in 0..=self.degree - i {
                let k = out.idx(i, j);
                out.coeffs[k] = out.coeffs[k] * ai * bj;
                bj *= b;
            }
            ai *= a;
        }
        out
    }

    fn combine(&self, other: &Self, sign: T) -> Self {
        let degree = self.degree.max(other.degree);
        let mut out = self.resize(degree);
        for i in 0..=other.degree {
            for j in 0..=other.degree - i {
                let k = out.idx(i, j);
                out.coeffs[k] += sign * other.coeff(i, j);
            }
        }
        out
    }

    /// Truncated product at degree `max(deg f, deg g)` without diagnostics.
    pub fn mul_trunc(&self, other: &Self) -> Self {
        let d = self.degree.max(other.degree);
        let mut out = Self::zeros(d, self.domain);
        let n = d + 1;
        for i1 in 0..=self.degree {
            for j1 in 0..=self.degree - i1 {
                let a = self.coeffs[self.idx(i1, j1)];
                if a == T::zero() {
                    continue;
                }
                let used = i1 + j1;
                if used > d {
                    continue;
                }
                let rest = d - used;
                for i2 in 0..=other.degree.min(rest) {
                    let jmax = (other.degree - i2).min(rest - i2);
                    let src = other.idx(i2, 0);
                    let dst = (i1 + i2) * n + j1;
                    for j2 in 0..=jmax {
                        out.coeffs[dst + j2] += a * other.coeffs[src + j2];
                    }
                }
            }
        }
        out
    }

    /// Truncated product with the magnitude of the discarded coefficients.
    pub fn mul(&self, other: &Self) -> Truncated<Self, T> {
        let d = self.degree.max(other.degree);
        let full_deg = self.degree + other.degree;
        let n = full_deg + 1;
        let mut full = vec![T::zero(); n * n];
        for i1 in 0..=self.degree {
            for j1 in 0..=self.degree - i1 {
                let a = self.coeffs[self.idx(i1, j1)];
                for i2 in 0..=other.degree {
                    for j2 in 0..=other.degree - i2 {
                        full[(i1 + i2) * n + j1 + j2] += a * other.coeffs[other.idx(i2, j2)];
                    }
                }
            }
        }
        let mut out = Self::zeros(d, self.domain);
        let mut dropped = T::zero();
        for i in 0..n {
            for j in 0..n - i {
                let c = full[i * n + j];
                if i + j <= d {
                    let k = out.idx(i, j);
                    out.coeffs[k] = c;
                } else {
                    dropped += c.abs();
                }
            }
        }
        Truncated {
            value: out,
            dropped,
        }
    }

    /// Multiplicative inverse as a truncated power series at the origin.
    /// Requires a nonzero constant term.
    pub fn reciprocal(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0.abs() <= T::epsilon() * self.sup_norm().max(T::one()) {
            return Err(Error::SingularJacobian(
                "series reciprocal of a function vanishing at the origin".into(),
            ));
        }
        let mut r = Self::constant(c0.recip(), self.degree, self.domain);
        // Newton r <- r (2 - f r); the number of correct degrees doubles per step.
        let mut correct = 1usize;
        while correct <= self.degree {
            let mut t = self.mul_trunc(&r).neg();
            t.coeffs[0] += T::lit(2.0);
            r = r.mul_trunc(&t);
            correct *= 2;
        }
        Ok(r)
    }

    /// Single-variable row `X ↦ Σ_j c_ij (a X)^j` as a series.
    fn row_in_second(&self, i: usize, a: T, degree: usize) -> Self {
        let mut p = Self::zeros(degree, self.domain);
        let mut aj = T::one();
        for j in 0..=(self.degree - i).min(degree) {
            p.coeffs[j] = self.coeff(i, j) * aj;
            aj *= a;
        }
        p
    }

    /// `(x, X) ↦ f(z(x, X), a X)` truncated to `deg z`, no checks.
    ///
    /// Nested in the first argument: `Σ_i z^i P_i(a X)` evaluated by Horner
    /// with truncated series products, which is the exact degree-`deg z`
    /// truncation of the polynomial composition.
    pub fn compose_first(&self, z: &Self, a: T) -> Self {
        let d = z.degree;
        let mut acc = Self::zeros(d, z.domain);
        for i in (0..=self.degree).rev() {
            acc = acc.mul_trunc(z);
            let row = self.row_in_second(i, a, d);
            for j in 0..=d {
                acc.coeffs[j] += row.coeffs[j];
            }
        }
        acc
    }

    /// Checked composition `(x, X) ↦ f(z(x, X), a X)`.
    ///
    /// The range of `z` over its domain is sampled on a 16×16 grid and must
    /// stay inside `f`'s domain, as must `a X` for `X` in `z`'s domain. The
    /// reported `dropped` magnitude is the sum of `|c|` over total degrees
    /// `deg z + 1 ..= 2 deg z` of the composition.
    pub fn substitute_first(&self, z: &Self, a: T) -> Result<Truncated<Self, T>> {
        let [lo, hi] = self.domain;
        let (zmin, zmax) = z.sampled_range(16);
        let slack = T::lit(1e-12) * (hi - lo);
        if zmin < lo - slack || zmax > hi + slack {
            return Err(Error::DomainEscape {
                context: "substitute_first: range of inner series".into(),
                range: [zmin.to_f64_lossy(), zmax.to_f64_lossy()],
                domain: [lo.to_f64_lossy(), hi.to_f64_lossy()],
            });
        }
        let [zlo, zhi] = z.domain;
        let (s1, s2) = (a * zlo, a * zhi);
        let (smin, smax) = (s1.min(s2), s1.max(s2));
        if smin < lo - slack || smax > hi + slack {
            return Err(Error::DomainEscape {
                context: "substitute_first: scaled second argument".into(),
                range: [smin.to_f64_lossy(), smax.to_f64_lossy()],
                domain: [lo.to_f64_lossy(), hi.to_f64_lossy()],
            });
        }
        let d = z.degree;
        let wide = self.compose_first(&z.resize(2 * d), a);
        let mut dropped = T::zero();
        for i in 0..=2 * d {
            for j in 0..=2 * d - i {
                if i + j > d {
                    dropped += wide.coeff(i, j).abs();
                }
            }
        }
        Ok(Truncated {
            value: wide.resize(d),
            dropped,
        })
    }

    /// Min and max of the series on an `n × n` grid over its domain.
    pub fn sampled_range(&self, n: usize) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for p in grid(self.domain, n) {
            let v = self.eval(p[0], p[1]);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// `n × n` tensor grid of points covering `[lo, hi]²` including the edges.
pub fn grid<T: Scalar>(domain: [T; 2], n: usize) -> Vec<[T; 2]> {
    let [lo, hi] = domain;
    let step = if n > 1 {
        (hi - lo) / T::from_usize_exact(n - 1)
    } else {
        T::zero()
    };
    let mut pts = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            pts.push([
                lo + step * T::from_usize_exact(a),
                lo + step * T::from_usize_exact(b),
            ]);
        }
    }
    pts
}

impl<T: Scalar> Add for &BivariateSeries<T> {
    type Output = BivariateSeries<T>;
    fn add(self, rhs: Self) -> BivariateSeries<T> {
        self.combine(rhs, T::one())
    }
}

impl<T: Scalar> Sub for &BivariateSeries<T> {
    type Output = BivariateSeries<T>;
    fn sub(self, rhs: Self) -> BivariateSeries<T> {
        self.combine(rhs, -T::one())
    }
}

impl<T: Scalar> Neg for BivariateSeries<T> {
    type Output = BivariateSeries<T>;
    fn neg(mut self) -> BivariateSeries<T> {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl<T: Scalar> Mul for &BivariateSeries<T> {
    type Output = BivariateSeries<T>;
    fn mul(self, rhs: Self) -> BivariateSeries<T> {
        self.mul_trunc(rhs)
    }
}
