//! JSON and CSV artifacts.
//!
//! Floats are written by `serde_json`, whose shortest round-trip formatting
//! reads back to the identical `f64` (never more than 17 significant digits).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ifs::{BoxRegion, DyadicWord};
use crate::renorm::{GeneratingSystem, SolveReport};
use crate::scalar::{Point, Scalar};
use crate::series::BivariateSeries;

pub const FIXED_POINT_SCHEMA: &str = "twistren/fixed-point/1";

/// `{max_degree, domain, coeffs}` with `coeffs` row-major, `(deg+1)²` entries,
/// entry `i·(deg+1) + j` holding the coefficient of `xⁱ Xʲ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub max_degree: usize,
    pub domain: [f64; 2],
    pub coeffs: Vec<f64>,
}

impl SeriesJson {
    pub fn from_series<T: Scalar>(s: &BivariateSeries<T>) -> Self {
        let [lo, hi] = s.domain();
        Self {
            max_degree: s.degree(),
            domain: [lo.to_f64_lossy(), hi.to_f64_lossy()],
            coeffs: s.row_major().iter().map(|c| c.to_f64_lossy()).collect(),
        }
    }

    pub fn to_series<T: Scalar>(&self) -> Result<BivariateSeries<T>> {
        BivariateSeries::from_row_major(
            self.max_degree,
            [T::lit(self.domain[0]), T::lit(self.domain[1])],
            self.coeffs.iter().map(|&c| T::lit(c)).collect(),
        )
    }
}

/// Output of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointFile {
    pub schema: String,
    pub lambda: f64,
    pub mu: f64,
    pub s: SeriesJson,
    /// Midpoint series; absent for hand-written generating functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<SeriesJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SolveReport>,
    /// Reports along the degree continuation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<SolveReport>,
}

impl FixedPointFile {
    pub fn new<T: Scalar>(
        g: &GeneratingSystem<T>,
        report: Option<SolveReport>,
        path: Vec<SolveReport>,
    ) -> Self {
        Self {
            schema: FIXED_POINT_SCHEMA.into(),
            lambda: g.lambda.to_f64_lossy(),
            mu: g.mu.to_f64_lossy(),
            s: SeriesJson::from_series(&g.s),
            z: g.z_cache.as_ref().map(SeriesJson::from_series),
            report,
            path,
        }
    }

    pub fn system<T: Scalar>(&self) -> Result<GeneratingSystem<T>> {
        Ok(GeneratingSystem {
            s: self.s.to_series()?,
            lambda: T::lit(self.lambda),
            mu: T::lit(self.mu),
            z_cache: self.z.as_ref().map(SeriesJson::to_series).transpose()?,
        })
    }
}

pub fn to_json<V: Serialize>(v: &V) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)
        .map_err(|e| Error::InvalidInput(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<V: DeserializeOwned>(text: &str, what: &str) -> Result<V> {
    serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("malformed JSON in {what}: {e}")))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    from_json(&read_text(path)?, &path.display().to_string())
}

pub fn write_json<V: Serialize>(path: &Path, v: &V) -> Result<()> {
    write_text(path, &to_json(v)?)
}

/// Reads a run configuration; missing keys take their defaults.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_f64(out: &mut String, v: f64) {
    // `{}` on f64 is the shortest round-trip representation, with `.` decimal.
    let _ = write!(out, "{v}");
}

/// `word,x,y` rows; the empty word is written as an empty field.
pub fn cloud_csv<T: Scalar>(rows: &[(DyadicWord, Point<T>)]) -> String {
    let mut out = String::from("word,x,y\n");
    for (w, p) in rows {
        let _ = write!(out, "{w},");
        fmt_f64(&mut out, p[0].to_f64_lossy());
        out.push(',');
        fmt_f64(&mut out, p[1].to_f64_lossy());
        out.push('\n');
    }
    out
}

/// `t,x,y` rows of a polyline.
pub fn curve_csv<T: Scalar>(params: &[T], points: &[Point<T>]) -> String {
    let mut out = String::from("t,x,y\n");
    for (t, p) in params.iter().zip(points) {
        fmt_f64(&mut out, t.to_f64_lossy());
        out.push(',');
        fmt_f64(&mut out, p[0].to_f64_lossy());
        out.push(',');
        fmt_f64(&mut out, p[1].to_f64_lossy());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxJson {
    pub word: String,
    pub center: [f64; 2],
    pub hull: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxesFile {
    pub level: usize,
    /// The tip; hulls and centers share its coordinate system.
    pub tip: [f64; 2],
    pub boxes: Vec<BoxJson>,
}

impl BoxJson {
    pub fn from_box<T: Scalar>(b: &BoxRegion<T>) -> Self {
        Self {
            word: b.word.to_string(),
            center: [b.center[0].to_f64_lossy(), b.center[1].to_f64_lossy()],
            hull: b
                .hull
                .iter()
                .map(|p| [p[0].to_f64_lossy(), p[1].to_f64_lossy()])
                .collect(),
        }
    }
}
