use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar the numerical code is generic over.
///
/// Implemented for `f32` and `f64`. The fixed-point tolerances in
/// [`crate::config::Tolerances`] assume `f64`; `f32` is useful for the
/// geometric parts (curves, clouds) and for quick experiments.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only on non-representable values
    /// (which cannot happen for `f32`/`f64`).
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion from f64")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("scalar conversion from usize")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// A point in the plane.
pub type Point<T> = [T; 2];

/// Row-major 2×2 matrix.
pub type Mat2<T> = [[T; 2]; 2];

pub(crate) fn mat_vec<T: Scalar>(m: &Mat2<T>, v: Point<T>) -> Point<T> {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub(crate) fn det<T: Scalar>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Spectral norm of a 2×2 matrix (largest singular value).
pub fn op_norm<T: Scalar>(m: &Mat2<T>) -> T {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let frob2 = a * a + b * b + c * c + d * d;
    let dt = a * d - b * c;
    let two = T::lit(2.0);
    let disc = (frob2 * frob2 - T::lit(4.0) * dt * dt).max(T::zero());
    ((frob2 + disc.sqrt()) / two).sqrt()
}
