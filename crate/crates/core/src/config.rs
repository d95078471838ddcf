//! Run configuration: every tolerance and size knob in one place.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::ImplicitSolver;
use crate::renorm::validate_schedule;

/// Settings of the fixed-point solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Half-width of the trusted square `[-w, w]²`.
    pub trusted_half_width: f64,
    /// Sup-norm target for `R(s) − s`.
    pub residual_tol: f64,
    /// Tolerance on `s(1,0)` and `s₁(1,0) − 1`.
    pub gauge_tol: f64,
    /// Tolerance on `z(1,0) − 1`.
    pub z_norm_tol: f64,
    /// Upper bound on the truncation diagnostic of `s(z, λX)`.
    pub truncation_tol: f64,
    pub fd_step: f64,
    pub max_newton_steps: usize,
    pub max_halvings: usize,
    pub midpoint_max_steps: usize,
    pub singular_tol: f64,
    /// Side of the grid used for pointwise residual and singularity checks.
    pub residual_grid: usize,
    /// Treat `μ` as an unknown instead of deriving it as `z₁(1, 0)`.
    pub mu_unknown: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            trusted_half_width: 1.2,
            residual_tol: 1e-10,
            gauge_tol: 1e-12,
            z_norm_tol: 1e-6,
            truncation_tol: 1e-10,
            fd_step: 1e-7,
            max_newton_steps: 40,
            max_halvings: 20,
            midpoint_max_steps: 60,
            singular_tol: 1e-8,
            residual_grid: 20,
            mu_unknown: true,
        }
    }
}

impl SolverConfig {
    pub fn domain(&self) -> [f64; 2] {
        [-self.trusted_half_width, self.trusted_half_width]
    }
}

/// Seed family scanned at the lowest degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    pub lambda: f64,
    /// Range of the `xX` coefficient.
    pub c_range: [f64; 2],
    pub c_count: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            lambda: -0.25,
            c_range: [-2.0, 2.0],
            c_count: 9,
        }
    }
}

/// Settings of the renormalization microscope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IfsConfig {
    /// Contraction bound `θ`.
    pub theta: f64,
    pub max_level: usize,
    /// Side of the sample grid whose images give box hulls.
    pub hull_grid: usize,
    /// Level of the tip cloud whose bounding box defines the base region.
    pub bootstrap_level: usize,
    /// Relative inflation of that bounding box.
    pub inflate: f64,
    /// Cap on the vertical inflation tried when the inflated box is not
    /// mapped into itself.
    pub max_vertical_inflate: f64,
    /// Relative interior margin the branch images must keep from the edges
    /// of the base box.
    pub invariance_margin: f64,
    pub containment_slack: f64,
    /// Search interval for the metric weight on the second coordinate.
    pub metric_weight_range: [f64; 2],
    /// Fixed weight; `None` fits it over the base sample.
    pub metric_weight: Option<f64>,
    /// Tolerance on the conjugated map fixing the origin.
    pub origin_tol: f64,
}

impl Default for IfsConfig {
    fn default() -> Self {
        Self {
            theta: 0.272,
            max_level: 24,
            hull_grid: 12,
            bootstrap_level: 6,
            inflate: 0.2,
            max_vertical_inflate: 4.0,
            invariance_margin: 0.05,
            containment_slack: 1e-9,
            metric_weight_range: [1.0, 8.0],
            metric_weight: None,
            origin_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    pub theta: f64,
    pub max_iters: usize,
    /// Pieces each long segment is split into before mapping by `ψ₁`.
    pub subdivisions: usize,
    /// Segments shorter than this (in the microscope metric) are mapped
    /// without splitting.
    pub subdivide_above: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            theta: 0.272,
            max_iters: 14,
            subdivisions: 8,
            subdivide_above: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObstructionConfig {
    pub max_depth: usize,
    /// Relative margin of the cone fit.
    pub cone_margin: f64,
    /// Number of candidate half-angles tried in `(0, π/2)`.
    pub cone_steps: usize,
    /// Largest admissible distance from horizontal, in degrees.
    pub horizontal_tol_deg: f64,
    pub chain_rel_tol: f64,
    pub sign_margin: f64,
    /// Level of the Cantor cloud on which the twist bound and cones are fitted.
    pub twist_level: usize,
}

impl Default for ObstructionConfig {
    fn default() -> Self {
        Self {
            max_depth: 20,
            cone_margin: 0.1,
            cone_steps: 900,
            horizontal_tol_deg: 5.0,
            chain_rel_tol: 1e-6,
            sign_margin: 1e-3,
            twist_level: 8,
        }
    }
}

/// Tolerances of the invariant checks run by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub lambda: f64,
    pub mu: f64,
    pub lambda_target: f64,
    pub mu_target: f64,
    pub midpoint_residual: f64,
    pub mu_identity: f64,
    pub det: f64,
    pub reversibility: f64,
    pub tip_twist: f64,
    pub fd_relative: f64,
    pub fd_step: f64,
    pub contraction_slack: f64,
    pub lipschitz_slack: f64,
    pub sup_distance_ratio: f64,
    pub hausdorff_oracle: f64,
    pub series_oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lambda: 2e-3,
            mu: 2e-3,
            lambda_target: -0.249,
            mu_target: 0.061,
            midpoint_residual: 1e-11,
            mu_identity: 1e-9,
            det: 1e-9,
            reversibility: 1e-9,
            tip_twist: 1e-9,
            fd_relative: 1e-5,
            fd_step: 1e-6,
            contraction_slack: 1e-3,
            lipschitz_slack: 1e-9,
            sup_distance_ratio: 0.33,
            hausdorff_oracle: 1e-12,
            series_oracle: 1e-10,
        }
    }
}

/// Sample sizes and levels of the `verify` suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    /// Random points for the determinant, reversibility and twist checks.
    pub map_samples: usize,
    /// Points at which the differential is compared with finite differences.
    pub fd_samples: usize,
    /// Fraction of the trusted square the map samples are drawn from.
    pub sample_fraction: f64,
    pub box_level: usize,
    pub odometer_level: usize,
    pub curve_iters: usize,
    /// Level of the cloud and curve used by the Hausdorff oracle.
    pub oracle_level: usize,
    pub oracle_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            map_samples: 200,
            fd_samples: 20,
            sample_fraction: 0.9,
            box_level: 10,
            odometer_level: 6,
            curve_iters: 12,
            oracle_level: 6,
            oracle_samples: 50,
        }
    }
}

/// Complete run configuration as read from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub degree_schedule: Vec<usize>,
    pub solver: SolverConfig,
    pub seeds: SeedConfig,
    pub map: ImplicitSolver,
    pub ifs: IfsConfig,
    pub curve: CurveConfig,
    pub obstruction: ObstructionConfig,
    pub tolerances: Tolerances,
    pub verify: VerifyConfig,
    /// Seed of the random sample points used by checks.
    pub sample_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            degree_schedule: vec![6, 10, 14, 20],
            solver: SolverConfig::default(),
            seeds: SeedConfig::default(),
            map: ImplicitSolver::default(),
            ifs: IfsConfig::default(),
            curve: CurveConfig::default(),
            obstruction: ObstructionConfig::default(),
            tolerances: Tolerances::default(),
            verify: VerifyConfig::default(),
            sample_seed: 20240601,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        validate_schedule(&self.degree_schedule)?;
        let s = &self.solver;
        let positive = [
            ("solver.trusted_half_width", s.trusted_half_width),
            ("solver.residual_tol", s.residual_tol),
            ("solver.gauge_tol", s.gauge_tol),
            ("solver.z_norm_tol", s.z_norm_tol),
            ("solver.truncation_tol", s.truncation_tol),
            ("solver.fd_step", s.fd_step),
            ("solver.singular_tol", s.singular_tol),
            ("map.newton_tol", self.map.newton_tol),
            ("map.bisect_width", self.map.bisect_width),
            ("ifs.theta", self.ifs.theta),
            ("ifs.containment_slack", self.ifs.containment_slack),
            ("curve.theta", self.curve.theta),
            ("obstruction.cone_margin", self.obstruction.cone_margin),
            (
                "obstruction.horizontal_tol_deg",
                self.obstruction.horizontal_tol_deg,
            ),
            ("obstruction.chain_rel_tol", self.obstruction.chain_rel_tol),
            ("obstruction.sign_margin", self.obstruction.sign_margin),
            ("verify.sample_fraction", self.verify.sample_fraction),
        ];
        let t = &self.tolerances;
        let tols = [
            ("tolerances.lambda", t.lambda),
            ("tolerances.mu", t.mu),
            ("tolerances.midpoint_residual", t.midpoint_residual),
            ("tolerances.mu_identity", t.mu_identity),
            ("tolerances.det", t.det),
            ("tolerances.reversibility", t.reversibility),
            ("tolerances.tip_twist", t.tip_twist),
            ("tolerances.fd_relative", t.fd_relative),
            ("tolerances.fd_step", t.fd_step),
            ("tolerances.contraction_slack", t.contraction_slack),
            ("tolerances.lipschitz_slack", t.lipschitz_slack),
            ("tolerances.sup_distance_ratio", t.sup_distance_ratio),
            ("tolerances.hausdorff_oracle", t.hausdorff_oracle),
            ("tolerances.series_oracle", t.series_oracle),
        ];
        for (name, v) in positive.into_iter().chain(tols) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.curve.theta < 0.5) {
            return Err(Error::InvalidInput("curve.theta must be below 1/2".into()));
        }
        if self.map.bracket[0] >= self.map.bracket[1] {
            return Err(Error::InvalidInput("map.bracket must be increasing".into()));
        }
        Ok(())
    }
}
