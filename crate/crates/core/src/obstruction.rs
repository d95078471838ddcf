//! Tip derivatives, twist cones, and transport of directions along the
//! orbit of the tip.
//!
//! Unless stated otherwise, points are in the coordinates of the generating
//! function, where the tip is the origin.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::config::ObstructionConfig;
use crate::error::{Error, Result};
use crate::ifs::Microscope;
use crate::map::ImplicitMap;
use crate::renorm::GeneratingSystem;
use crate::scalar::{mat_vec, Mat2, Point, Scalar};
use crate::series::Axis;

/// Side of the vertical axis on which a line lies, read off the line's
/// direction vector normalized to a positive second component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Vertical,
}

/// Unoriented line through the origin, by its angle in `(−π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction<T> {
    pub angle: T,
}

impl<T: Scalar> Direction<T> {
    pub fn new(angle: T) -> Self {
        let pi = T::lit(std::f64::consts::PI);
        let half = T::lit(FRAC_PI_2);
        let mut a = angle % pi;
        if a > half {
            a -= pi;
        } else if a <= -half {
            a += pi;
        }
        Self { angle: a }
    }

    pub fn from_degrees(deg: T) -> Self {
        Self::new(deg.to_radians())
    }

    pub fn horizontal() -> Self {
        Self { angle: T::zero() }
    }

    pub fn vertical() -> Self {
        Self {
            angle: T::lit(FRAC_PI_2),
        }
    }

    pub fn from_vector(v: Point<T>) -> Self {
        if v[0] == T::zero() {
            return Self::vertical();
        }
        Self::new((v[1] / v[0]).atan())
    }

    /// Unit vector along the line with non-negative first component.
    pub fn vector(&self) -> Point<T> {
        [self.angle.cos(), self.angle.sin()]
    }

    pub fn side(&self) -> Side {
        if self.angle == T::lit(FRAC_PI_2) {
            Side::Vertical
        } else if self.angle >= T::zero() {
            Side::Right
        } else {
            Side::Left
        }
    }

    /// Angle to the horizontal axis, in `[0, π/2]`.
    pub fn from_horizontal(&self) -> T {
        self.angle.abs()
    }

    /// Angle to the vertical axis, in `[0, π/2]`.
    pub fn from_vertical(&self) -> T {
        T::lit(FRAC_PI_2) - self.angle.abs()
    }

    pub fn transform(&self, m: &Mat2<T>) -> Self {
        Self::from_vector(mat_vec(m, self.vector()))
    }

    /// Image under `diag(a, b)` given only the ratio `b / a`, without forming
    /// the (possibly huge) factors: the tangent is used for lines within 45°
    /// of horizontal, the cotangent otherwise.
    pub fn scale_diagonal(&self, ratio: T) -> Self {
        let quarter = T::lit(std::f64::consts::FRAC_PI_4);
        if self.angle.abs() <= quarter {
            Self::new((self.angle.tan() * ratio).atan())
        } else {
            let cot = self.angle.cos() / self.angle.sin() / ratio;
            if cot == T::zero() {
                return Self::vertical();
            }
            Self::from_vector([cot, T::one()])
        }
    }
}

/// One identity of the chain, both sides and their relative gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainIdentity {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// Derivatives at and around the tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TipChain {
    /// `∂X/∂x` at the tip.
    pub dxdx_tip: f64,
    /// `s₂(1, 0)`.
    pub s2_10: f64,
    /// `z₂(1, 0)`.
    pub z2_10: f64,
    /// `s₂(λ, 1) + s₂(0, 1)`.
    pub s2_sum: f64,
    /// `s₁(λ, 1)`.
    pub s1_lambda1: f64,
    pub identities: Vec<ChainIdentity>,
    /// All five signs hold with the configured margin.
    pub signs_ok: bool,
}

fn rel_gap<T: Scalar>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}

/// Evaluates the tip derivative chain at a fixed point. Each identity
/// compares a quantity computed directly from the series with its
/// expression through the functional equations.
pub fn tip_derivative_chain<T: Scalar>(
    g: &GeneratingSystem<T>,
    m: &ImplicitMap<T>,
    cfg: &ObstructionConfig,
) -> Result<TipChain> {
    let z = g
        .z_cache
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("fixed point carries no midpoint series".into()))?;
    let (l, mu) = (g.lambda, g.mu);
    let (zero, one) = (T::zero(), T::one());
    let s1 = g.s.partial(Axis::First);
    let s2 = g.s.partial(Axis::Second);
    let z2 = z.partial(Axis::Second);

    let dxdx_direct = m.differential([zero, zero])?[0][0];
    // Central difference of the forward map, independent of the formula for DF.
    let h = T::lit(1e-5);
    let fd = (m.forward([h, zero])?.point[0] - m.forward([-h, zero])?.point[0]) / (h + h);
    let dxdx_chain = -s2.eval(one, zero) / s1.eval(one, zero);
    let s2_direct = s2.eval(one, zero);
    let z2_direct = z2.eval(one, zero);
    let s2_chain = z2_direct / (mu - l);
    let sum_direct = s2.eval(l, one) + s2.eval(zero, one);
    let z2_chain = -l * s1.eval(zero, one) / sum_direct;
    let s1_l1 = s1.eval(l, one);
    let sum_chain = -(l / mu) * s1_l1;

    let pairs = [
        ("dX/dx(tip) = -s2(1,0)/s1(1,0)", fd, dxdx_chain),
        ("s2(1,0) = z2(1,0)/(mu - lambda)", s2_direct, s2_chain),
        (
            "z2(1,0) = -lambda s1(0,1)/(s2(lambda,1) + s2(0,1))",
            z2_direct,
            z2_chain,
        ),
        (
            "s2(lambda,1) + s2(0,1) = -(lambda/mu) s1(lambda,1)",
            sum_direct,
            sum_chain,
        ),
    ];
    let tol = T::lit(cfg.chain_rel_tol);
    let mut identities = Vec::with_capacity(pairs.len());
    for (name, lhs, rhs) in pairs {
        let e = rel_gap(lhs, rhs);
        if !(e <= tol) {
            return Err(Error::ChainViolation {
                name: name.into(),
                lhs: lhs.to_f64_lossy(),
                rhs: rhs.to_f64_lossy(),
            });
        }
        identities.push(ChainIdentity {
            name: name.into(),
            lhs: lhs.to_f64_lossy(),
            rhs: rhs.to_f64_lossy(),
            rel_err: e.to_f64_lossy(),
        });
    }
    let margin = T::lit(cfg.sign_margin);
    let signs_ok = s1_l1 >= margin
        && sum_direct >= margin
        && z2_direct >= margin
        && s2_direct >= margin
        && dxdx_direct <= -margin;
    Ok(TipChain {
        dxdx_tip: dxdx_direct.to_f64_lossy(),
        s2_10: s2_direct.to_f64_lossy(),
        z2_10: z2_direct.to_f64_lossy(),
        s2_sum: sum_direct.to_f64_lossy(),
        s1_lambda1: s1_l1.to_f64_lossy(),
        identities,
        signs_ok,
    })
}

/// Twist bound and cone opening.
///
/// The vertical cone holds the lines within `half_angle` of the vertical;
/// the horizontal cone is its complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams<T> {
    pub twist_bound: T,
    pub half_angle: T,
}

/// Smallest angle to the vertical among images of the vertical cone of
/// half-angle `alpha` under `d`.
fn min_image_from_vertical<T: Scalar>(d: &Mat2<T>, alpha: T) -> T {
    // Preimage of the vertical line: the kernel of the first row.
    let pre = Direction::from_vector([-d[0][1], d[0][0]]);
    if pre.from_vertical() <= alpha {
        return T::zero();
    }
    let half = T::lit(FRAC_PI_2);
    let a = Direction::new(half - alpha).transform(d).from_vertical();
    let b = Direction::new(half + alpha).transform(d).from_vertical();
    a.min(b)
}

/// Largest half-angle `α` on a uniform grid in `(0, π/2)` such that every
/// line within `α` of the vertical is mapped at least `(1 + margin) α` away
/// from it at every sample.
pub fn fit_half_angle<T: Scalar>(differentials: &[Mat2<T>], margin: T, steps: usize) -> Option<T> {
    let steps = steps.max(2);
    (1..steps).rev().find_map(|k| {
        let alpha = T::lit(FRAC_PI_2) * T::from_usize_exact(k) / T::from_usize_exact(steps);
        let ok = differentials
            .iter()
            .all(|d| min_image_from_vertical(d, alpha) >= (T::one() + margin) * alpha);
        ok.then_some(alpha)
    })
}

/// `a = max ∂X/∂y` over the samples (required negative) and the fitted cone.
pub fn twist_bound<T: Scalar>(
    m: &ImplicitMap<T>,
    samples: &[Point<T>],
    cfg: &ObstructionConfig,
) -> Result<ConeParams<T>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples for the twist bound".into()));
    }
    let mut a = T::neg_infinity();
    let mut diffs = Vec::with_capacity(samples.len());
    for &p in samples {
        let t = m.twist(p)?;
        if !(t < T::zero()) {
            return Err(Error::TwistViolation {
                x: p[0].to_f64_lossy(),
                y: p[1].to_f64_lossy(),
                value: t.to_f64_lossy(),
            });
        }
        a = a.max(t);
        diffs.push(m.differential(p)?);
    }
    let half_angle = fit_half_angle(&diffs, T::lit(cfg.cone_margin), cfg.cone_steps).ok_or(
        Error::ConeEscape {
            angle: 0.0,
            half_angle: FRAC_PI_2 / cfg.cone_steps.max(2) as f64,
        },
    )?;
    Ok(ConeParams {
        twist_bound: a,
        half_angle,
    })
}

/// Half of a cone: the vectors whose relevant component is positive (`Plus`)
/// or negative (`Minus`); the second component for vertical cones, the first
/// for horizontal ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Half {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatchetImage<T> {
    pub point: Point<T>,
    pub direction: Direction<T>,
    pub half: Half,
}

fn mirror(s: Side) -> Side {
    match s {
        Side::Left => Side::Right,
        Side::Right => Side::Left,
        Side::Vertical => Side::Vertical,
    }
}

fn oriented<T: Scalar>(d: &Direction<T>, half: Half) -> Point<T> {
    let v = d.vector();
    let flip = (v[1] < T::zero()) ^ (half == Half::Minus);
    if flip {
        [-v[0], -v[1]]
    } else {
        v
    }
}

fn push_half<T: Scalar>(
    p: Point<T>,
    image: Point<T>,
    jac: &Mat2<T>,
    cone: &ConeParams<T>,
    d: &Direction<T>,
    half: Half,
    expect_flip: bool,
) -> Result<RatchetImage<T>> {
    if d.from_vertical() > cone.half_angle {
        return Err(Error::InvalidInput(format!(
            "direction at {} rad from vertical is outside the vertical cone",
            d.from_vertical().to_f64_lossy()
        )));
    }
    let v = oriented(d, half);
    let w = mat_vec(jac, v);
    let dir = Direction::from_vector(w);
    if dir.from_vertical() < cone.half_angle {
        return Err(Error::ConeEscape {
            angle: dir.from_horizontal().to_f64_lossy(),
            half_angle: cone.half_angle.to_f64_lossy(),
        });
    }
    let out = if w[0] > T::zero() {
        Half::Plus
    } else {
        Half::Minus
    };
    if (out != half) != expect_flip {
        return Err(Error::TwistViolation {
            x: p[0].to_f64_lossy(),
            y: p[1].to_f64_lossy(),
            value: w[0].to_f64_lossy(),
        });
    }
    Ok(RatchetImage {
        point: image,
        direction: dir,
        half: out,
    })
}

/// Pushes a line of the vertical half-cone at `p` forward. A negative twist
/// sends the upper half to the left half of the horizontal cone.
pub fn ratchet_step<T: Scalar>(
    m: &ImplicitMap<T>,
    cone: &ConeParams<T>,
    p: Point<T>,
    d: Direction<T>,
    half: Half,
) -> Result<RatchetImage<T>> {
    let jac = m.differential(p)?;
    let image = m.forward(p)?.point;
    push_half(p, image, &jac, cone, &d, half, true)
}

/// Same through the inverse map, which keeps the half: it is the forward map
/// conjugated by the reflection `(x, y) ↦ (x, −y)`.
pub fn ratchet_step_inverse<T: Scalar>(
    m: &ImplicitMap<T>,
    cone: &ConeParams<T>,
    p: Point<T>,
    d: Direction<T>,
    half: Half,
) -> Result<RatchetImage<T>> {
    let jac = m.differential_inverse(p)?;
    let image = m.backward(p)?.point;
    push_half(p, image, &jac, cone, &d, half, false)
}

/// Directions and orbit points at one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClashStep {
    pub n: usize,
    /// Image under `D(F^{2ⁿ})` at the tip.
    pub forward: Direction<f64>,
    /// Image under `D(F^{−2ⁿ})` at the tip.
    pub backward: Direction<f64>,
    pub forward_side: Side,
    pub backward_side: Side,
    /// Angles to the horizontal, in degrees.
    pub forward_deg: f64,
    pub backward_deg: f64,
    /// `|F^{±2ⁿ}(τ) − τ|` in the microscope metric.
    pub forward_orbit: f64,
    pub backward_orbit: f64,
    /// `θⁿ · diam(B)`.
    pub orbit_bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClashReport {
    pub seed_angle_deg: f64,
    pub steps: Vec<ClashStep>,
    /// Smallest `N` such that every depth from `N` to the maximum passes.
    pub n_star: Option<usize>,
    /// Smallest depth from which both side labels agree with those at the
    /// maximum depth, swapped at depths of the other parity when `λ < 0`.
    pub sides_stable_from: Option<usize>,
    /// Whether both angles to the horizontal decrease strictly from `N` on.
    pub monotone_after_n_star: bool,
}

/// Transports `d_tip` through `Dψ₀⁻ⁿ`, then `DF` and `DF⁻¹` at the tip, then
/// `Dψ₀ⁿ`, for every `n ≤ max_depth`. The orbit points are
/// `ψ₀ⁿ ∘ F^{±1} ∘ ψ₀⁻ⁿ(τ)`.
pub fn clash_experiment<T: Scalar>(
    scope: &Microscope<T>,
    d_tip: Direction<T>,
    max_depth: usize,
    theta: T,
    cfg: &ObstructionConfig,
) -> Result<ClashReport> {
    let origin = [T::zero(), T::zero()];
    let df = scope.map.differential(origin)?;
    let dfi = scope.map.differential_inverse(origin)?;
    let (l, mu) = (scope.scal.lambda, scope.scal.mu);
    let tip = scope.tip();
    let diam = scope.base_diameter();
    let tol = T::lit(cfg.horizontal_tol_deg).to_radians();
    let mut steps = Vec::with_capacity(max_depth + 1);
    for n in 0..=max_depth {
        let ratio = (mu / l).powi(n as i32);
        let v = d_tip.scale_diagonal(ratio.recip());
        let fwd = v.transform(&df).scale_diagonal(ratio);
        let bwd = v.transform(&dfi).scale_diagonal(ratio);

        let mut q = tip;
        for _ in 0..n {
            q = scope.scal.psi0_inverse(q);
        }
        let (mut qf, mut qb) = (scope.forward(q)?, scope.backward(q)?);
        for _ in 0..n {
            qf = scope.scal.psi0(qf);
            qb = scope.scal.psi0(qb);
        }
        let of = scope.metric.dist(qf, tip);
        let ob = scope.metric.dist(qb, tip);
        let bound = theta.powi(n as i32) * diam;
        let sides_differ = matches!(
            (fwd.side(), bwd.side()),
            (Side::Left, Side::Right) | (Side::Right, Side::Left)
        );
        let ok = sides_differ
            && fwd.from_horizontal() <= tol
            && bwd.from_horizontal() <= tol
            && of <= bound
            && ob <= bound;
        steps.push(ClashStep {
            n,
            forward: Direction {
                angle: fwd.angle.to_f64_lossy(),
            },
            backward: Direction {
                angle: bwd.angle.to_f64_lossy(),
            },
            forward_side: fwd.side(),
            backward_side: bwd.side(),
            forward_deg: fwd.from_horizontal().to_degrees().to_f64_lossy(),
            backward_deg: bwd.from_horizontal().to_degrees().to_f64_lossy(),
            forward_orbit: of.to_f64_lossy(),
            backward_orbit: ob.to_f64_lossy(),
            orbit_bound: bound.to_f64_lossy(),
            ok,
        });
    }
    let n_star = (0..steps.len()).rev().take_while(|&k| steps[k].ok).last();
    // Dψ₀ reverses the horizontal when λ < 0, so the side pattern is compared
    // with that of the last depth up to this parity swap.
    let flips = l < T::zero();
    let last = steps.last().map(|s| (s.n, s.forward_side, s.backward_side));
    let sides_stable_from = last.and_then(|(n_last, f, b)| {
        (0..steps.len())
            .rev()
            .take_while(|&k| {
                let swap = flips && (n_last - steps[k].n) % 2 == 1;
                let want = if swap { (mirror(f), mirror(b)) } else { (f, b) };
                (steps[k].forward_side, steps[k].backward_side) == want
            })
            .last()
    });
    let monotone_after_n_star = n_star.is_some_and(|n0| {
        steps[n0..]
            .windows(2)
            .all(|w| w[1].forward_deg < w[0].forward_deg && w[1].backward_deg < w[0].backward_deg)
    });
    Ok(ClashReport {
        seed_angle_deg: d_tip.angle.to_degrees().to_f64_lossy(),
        steps,
        n_star,
        sides_stable_from,
        monotone_after_n_star,
    })
}
