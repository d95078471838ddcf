// Negated comparisons are deliberate: NaN has to fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use scalar::{Point, Scalar};
pub mod config;
pub mod curve;
pub mod geometry;
pub mod ifs;
pub mod io;
pub mod linalg;
pub mod map;
pub mod obstruction;
pub mod renorm;
pub mod verify;

pub type Series64 = series::BivariateSeries<f64>;
pub type Series32 = series::BivariateSeries<f32>;
pub type System64 = renorm::GeneratingSystem<f64>;
pub type Map64 = map::ImplicitMap<f64>;
pub type Microscope64 = ifs::Microscope<f64>;
pub type Curve64 = curve::PolylineCurve<f64>;
