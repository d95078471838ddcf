//! Dense least squares by Householder QR.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column-major dense matrix, just enough for the Gauss–Newton solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Builds a matrix from its columns (all of equal length).
    pub fn from_columns(cols: Vec<Vec<T>>) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        let n = cols.len();
        let mut data = Vec::with_capacity(rows * n);
        for c in cols {
            assert_eq!(c.len(), rows, "ragged columns");
            data.extend(c);
        }
        Self {
            rows,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[c * self.rows + r] = v;
    }

    pub fn column(&self, c: usize) -> &[T] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (c, &xc) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.column(c)) {
                *o += a * xc;
            }
        }
        out
    }
}

/// Solves `min ‖A x − b‖₂ + ridge² ‖x‖₂` for `rows ≥ cols`.
///
/// A positive `ridge` appends `ridge · I` below `A` (Levenberg–Marquardt
/// style regularization).
pub fn least_squares<T: Scalar>(a: &Matrix<T>, b: &[T], ridge: T) -> Result<Vec<T>> {
    let n = a.cols;
    let extra = if ridge > T::zero() { n } else { 0 };
    let m = a.rows + extra;
    if m < n {
        return Err(Error::InvalidInput(format!(
            "underdetermined least squares ({} x {n})",
            a.rows
        )));
    }
    // Work on a copy with the ridge block appended.
    let mut w = vec![T::zero(); m * n];
    for c in 0..n {
        w[c * m..c * m + a.rows].copy_from_slice(a.column(c));
        if extra > 0 {
            w[c * m + a.rows + c] = ridge;
        }
    }
    let mut rhs = b.to_vec();
    rhs.resize(m, T::zero());

    let scale = (0..n)
        .map(|c| {
            w[c * m..(c + 1) * m]
                .iter()
                .fold(T::zero(), |s, v| s.max(v.abs()))
        })
        .fold(T::zero(), T::max);
    let mut diag = vec![T::zero(); n];
    for k in 0..n {
        let col = k * m;
        let norm = w[col + k..col + m]
            .iter()
            .map(|v| *v * *v)
            .sum::<T>()
            .sqrt();
        if norm <= T::epsilon() * T::lit(16.0) * scale.max(T::min_positive_value()) {
            return Err(Error::SingularJacobian(format!(
                "rank deficient at column {k} of {n}"
            )));
        }
        let alpha = if w[col + k] > T::zero() { -norm } else { norm };
        // v = x - alpha e1, stored in place.
        w[col + k] -= alpha;
        let vnorm2 = w[col + k..col + m].iter().map(|v| *v * *v).sum::<T>();
        diag[k] = alpha;
        if vnorm2 == T::zero() {
            continue;
        }
        for c in k + 1..n {
            let cc = c * m;
            let dot: T = (k..m).map(|r| w[col + r] * w[cc + r]).sum();
            let f = (dot + dot) / vnorm2;
            for r in k..m {
                let vr = w[col + r];
                w[cc + r] -= f * vr;
            }
        }
        let dot: T = (k..m).map(|r| w[col + r] * rhs[r]).sum();
        let f = (dot + dot) / vnorm2;
        for r in k..m {
            rhs[r] -= f * w[col + r];
        }
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for c in k + 1..n {
            acc -= w[c * m + k] * x[c];
        }
        x[k] = acc / diag[k];
    }
    Ok(x)
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

pub fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
