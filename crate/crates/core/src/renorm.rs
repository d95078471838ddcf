//! The period-doubling renormalization operator on generating functions and
//! its Gauss–Newton fixed-point solver.
//!
//! For a generating function `s` and scaling `λ`, the midpoint series `z` is
//! the symmetric solution of `s(λx, z) + s(λX, z) = 0`, and the renormalized
//! generating function is `μ⁻¹ s(z(x, X), λX)` with `μ = z₁(1, 0)`.
//! Everything is computed in truncated power series at the origin, so the
//! discrete operator keeps the exact scaling symmetries of the continuous
//! one and the gauge `s(1, 0) = 0`, `s₁(1, 0) = 1` selects an isolated
//! solution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{SeedConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, norm2, norm_inf, Matrix};
use crate::scalar::Scalar;
use crate::series::{grid, Axis, BivariateSeries};

/// Generating function together with its rescalings.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingSystem<T> {
    pub s: BivariateSeries<T>,
    pub lambda: T,
    pub mu: T,
    pub z_cache: Option<BivariateSeries<T>>,
}

impl<T: Scalar> GeneratingSystem<T> {
    pub fn new(s: BivariateSeries<T>, lambda: T) -> Self {
        Self {
            s,
            lambda,
            mu: T::nan(),
            z_cache: None,
        }
    }

    pub fn degree(&self) -> usize {
        self.s.degree()
    }

    /// Gauge defects `(s(1, 0), s₁(1, 0) − 1)`.
    pub fn gauge_defects(&self) -> (T, T) {
        let one = T::one();
        (
            self.s.eval(one, T::zero()),
            self.s.partial(Axis::First).eval(one, T::zero()) - one,
        )
    }

    /// Zero-pads (or truncates) `s` and the cached midpoint to `degree`.
    pub fn resized(&self, degree: usize) -> Self {
        Self {
            s: self.s.resize(degree),
            lambda: self.lambda,
            mu: self.mu,
            z_cache: self.z_cache.as_ref().map(|z| z.resize(degree)),
        }
    }
}

/// Diagnostics of a converged fixed-point solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub residual_norm: f64,
    pub newton_steps: usize,
    pub truncation_diag: f64,
    pub lambda: f64,
    pub mu: f64,
    pub degree: usize,
}

/// Initial midpoint guess: solve the midpoint equation pointwise by bisection
/// on a 3×3 grid and fit `a + b (x + X)` by least squares.
pub fn midpoint_initial_guess<T: Scalar>(
    s: &BivariateSeries<T>,
    lambda: T,
    degree: usize,
) -> Result<BivariateSeries<T>> {
    let dom = s.domain();
    let mut rows_c = Vec::new();
    let mut rows_u = Vec::new();
    let mut rhs = Vec::new();
    for p in grid(dom, 3) {
        let g = |z: T| s.eval(lambda * p[0], z) + s.eval(lambda * p[1], z);
        if let Some(root) = bracketed_root(&g, dom[0], dom[1], 48) {
            rows_c.push(T::one());
            rows_u.push(p[0] + p[1]);
            rhs.push(root);
        }
    }
    if rhs.len() < 2 {
        return Err(Error::NoConvergence(
            "midpoint equation has no sign change on the initial grid".into(),
        ));
    }
    let a = Matrix::from_columns(vec![rows_c, rows_u]);
    let coef = least_squares(&a, &rhs, T::zero())?;
    Ok(BivariateSeries::from_terms(
        degree,
        dom,
        &[(0, 0, coef[0]), (1, 0, coef[1]), (0, 1, coef[1])],
    ))
}

/// Root of `g` in `[lo, hi]` closest to the middle of the first bracketing
/// cell found, by subdivision into `cells` pieces followed by bisection.
fn bracketed_root<T: Scalar>(g: &impl Fn(T) -> T, lo: T, hi: T, cells: usize) -> Option<T> {
    let h = (hi - lo) / T::from_usize_exact(cells);
    let mid = (lo + hi) * T::lit(0.5);
    let mut best: Option<T> = None;
    let mut a = lo;
    let mut ga = g(a);
    for k in 1..=cells {
        let b = lo + h * T::from_usize_exact(k);
        let gb = g(b);
        if ga == T::zero() || ga * gb < T::zero() {
            let (mut l, mut r, mut gl) = (a, b, ga);
            for _ in 0..200 {
                let m = (l + r) * T::lit(0.5);
                let gm = g(m);
                if gl * gm <= T::zero() {
                    r = m;
                } else {
                    l = m;
                    gl = gm;
                }
                if (r - l).abs() <= T::epsilon() * (T::one() + m.abs()) {
                    break;
                }
            }
            let root = (l + r) * T::lit(0.5);
            if best.is_none_or(|b0| (root - mid).abs() < (b0 - mid).abs()) {
                best = Some(root);
            }
        }
        a = b;
        ga = gb;
    }
    best
}

/// Newton iteration in truncated power series for the symmetric midpoint
/// `z` with `s(λx, z) + s(λX, z) = 0`.
///
/// Returns `(z, steps)`.
pub fn midpoint_newton<T: Scalar>(
    s: &BivariateSeries<T>,
    lambda: T,
    z0: &BivariateSeries<T>,
    max_steps: usize,
    singular_tol: T,
) -> Result<(BivariateSeries<T>, usize)> {
    let d = s.degree();
    let s_t = s.swap();
    let s2_t = s.partial(Axis::Second).resize(d).swap();
    let mut z = z0.resize(d).symmetrize();
    let tol = T::lit(4.0) * T::epsilon();
    for step in 1..=max_steps {
        let h = s_t.compose_first(&z, lambda);
        let g = &h + &h.swap();
        let k = s2_t.compose_first(&z, lambda);
        let dg = &k + &k.swap();
        if dg.coeff(0, 0).abs() < singular_tol {
            return Err(Error::SingularJacobian(format!(
                "midpoint derivative {} at the origin",
                dg.coeff(0, 0)
            )));
        }
        let dz = g.mul_trunc(&dg.reciprocal()?).symmetrize().scale(-T::one());
        if !dz.is_finite() {
            return Err(Error::NoConvergence(
                "midpoint Newton produced non-finite values".into(),
            ));
        }
        z = &z + &dz;
        if dz.sup_norm() <= tol * z.sup_norm().max(T::one()) {
            return Ok((z, step));
        }
    }
    Err(Error::NoConvergence(format!(
        "midpoint Newton exceeded {max_steps} steps"
    )))
}

/// Sup-norm over an `n × n` grid of the pointwise midpoint residual.
pub fn midpoint_residual<T: Scalar>(
    s: &BivariateSeries<T>,
    lambda: T,
    z: &BivariateSeries<T>,
    n: usize,
    domain: [T; 2],
) -> T {
    grid(domain, n)
        .into_iter()
        .map(|p| {
            let zv = z.eval(p[0], p[1]);
            (s.eval(lambda * p[0], zv) + s.eval(lambda * p[1], zv)).abs()
        })
        .fold(T::zero(), T::max)
}

/// Midpoint series for `(s, λ)`, starting from the bisection fit.
pub fn solve_midpoint<T: Scalar>(
    s: &BivariateSeries<T>,
    lambda: T,
    degree: usize,
    cfg: &SolverConfig,
) -> Result<BivariateSeries<T>> {
    let s = s.resize(degree);
    let z0 = midpoint_initial_guess(&s, lambda, degree)?;
    let (z, _) = midpoint_newton(
        &s,
        lambda,
        &z0,
        cfg.midpoint_max_steps,
        T::lit(cfg.singular_tol),
    )?;
    check_midpoint_singularity(&s, lambda, &z, cfg)?;
    Ok(z)
}

fn check_midpoint_singularity<T: Scalar>(
    s: &BivariateSeries<T>,
    lambda: T,
    z: &BivariateSeries<T>,
    cfg: &SolverConfig,
) -> Result<()> {
    let s2 = s.partial(Axis::Second);
    for p in grid(z.domain(), cfg.residual_grid) {
        let zv = z.eval(p[0], p[1]);
        let dv = s2.eval(lambda * p[0], zv) + s2.eval(lambda * p[1], zv);
        if dv.abs() < T::lit(cfg.singular_tol) {
            return Err(Error::SingularJacobian(format!(
                "midpoint derivative {dv} at ({}, {})",
                p[0], p[1]
            )));
        }
    }
    Ok(())
}

/// One application of the operator. Returns `(R(s), z, μ)`.
fn apply_operator<T: Scalar>(
    s: &BivariateSeries<T>,
    lambda: T,
    z_start: &BivariateSeries<T>,
    cfg: &SolverConfig,
) -> Result<(BivariateSeries<T>, BivariateSeries<T>, T)> {
    let (z, _) = midpoint_newton(
        s,
        lambda,
        z_start,
        cfg.midpoint_max_steps,
        T::lit(cfg.singular_tol),
    )?;
    let mu = z.partial(Axis::First).eval(T::one(), T::zero());
    if !(mu > T::zero() && mu < T::one()) {
        return Err(Error::DegenerateScaling {
            mu: mu.to_f64_lossy(),
        });
    }
    let rs = s.compose_first(&z, lambda).scale(mu.recip());
    Ok((rs, z, mu))
}

/// `(R(s), z)` for a generating system, with `μ = z₁(1, 0)`.
pub fn renormalize<T: Scalar>(
    g: &GeneratingSystem<T>,
    cfg: &SolverConfig,
) -> Result<(BivariateSeries<T>, BivariateSeries<T>)> {
    let z_start = match &g.z_cache {
        Some(z) => z.resize(g.degree()),
        None => midpoint_initial_guess(&g.s, g.lambda, g.degree())?,
    };
    let (rs, z, _) = apply_operator(&g.s, g.lambda, &z_start, cfg)?;
    Ok((rs, z))
}

/// Residual vector `[R(s) − s (packed), s(1,0), s₁(1,0) − 1]` and the midpoint.
///
/// The unknowns are the packed coefficients of `s`, then `λ`, then (when
/// `cfg.mu_unknown`) `μ`; otherwise `μ` is taken as `z₁(1, 0)`.
fn residual<T: Scalar>(
    unknowns: &[T],
    degree: usize,
    domain: [T; 2],
    z_start: &BivariateSeries<T>,
    cfg: &SolverConfig,
) -> Result<(Vec<T>, BivariateSeries<T>, T)> {
    let n = n_unknowns(degree) - 1;
    let s = BivariateSeries::from_packed(degree, domain, &unknowns[..n]);
    let lambda = unknowns[n];
    let (z, _) = midpoint_newton(
        &s,
        lambda,
        z_start,
        cfg.midpoint_max_steps,
        T::lit(cfg.singular_tol),
    )?;
    let mu = if cfg.mu_unknown {
        unknowns[n + 1]
    } else {
        z.partial(Axis::First).eval(T::one(), T::zero())
    };
    if !(mu > T::zero() && mu < T::one()) {
        return Err(Error::DegenerateScaling {
            mu: mu.to_f64_lossy(),
        });
    }
    let rs = s.compose_first(&z, lambda).scale(mu.recip());
    let mut r = (&rs - &s).packed();
    let one = T::one();
    r.push(s.eval(one, T::zero()));
    r.push(s.partial(Axis::First).eval(one, T::zero()) - one);
    Ok((r, z, mu))
}

/// Forward-difference Jacobian of the residual, columns in parallel.
fn jacobian<T: Scalar>(
    unknowns: &[T],
    r0: &[T],
    degree: usize,
    domain: [T; 2],
    z: &BivariateSeries<T>,
    cfg: &SolverConfig,
) -> Result<Matrix<T>> {
    let cols: Result<Vec<Vec<T>>> = (0..unknowns.len())
        .into_par_iter()
        .map(|k| {
            let h = T::lit(cfg.fd_step) * unknowns[k].abs().max(T::one());
            let mut v = unknowns.to_vec();
            v[k] += h;
            let (r, _, _) = residual(&v, degree, domain, z, cfg)?;
            Ok(r.iter().zip(r0).map(|(a, b)| (*a - *b) / h).collect())
        })
        .collect();
    Ok(Matrix::from_columns(cols?))
}

/// Directional derivative of the residual by central differences; used to
/// validate the assembled Jacobian.
pub fn residual_directional_derivative<T: Scalar>(
    g: &GeneratingSystem<T>,
    direction: &[T],
    step: T,
    cfg: &SolverConfig,
) -> Result<Vec<T>> {
    let (v, z) = unknown_vector(g, cfg)?;
    let plus: Vec<T> = v
        .iter()
        .zip(direction)
        .map(|(a, d)| *a + step * *d)
        .collect();
    let minus: Vec<T> = v
        .iter()
        .zip(direction)
        .map(|(a, d)| *a - step * *d)
        .collect();
    let dom = g.s.domain();
    let (rp, _, _) = residual(&plus, g.degree(), dom, &z, cfg)?;
    let (rm, _, _) = residual(&minus, g.degree(), dom, &z, cfg)?;
    Ok(rp
        .iter()
        .zip(&rm)
        .map(|(a, b)| (*a - *b) / (step + step))
        .collect())
}

/// Forward-difference Jacobian of the fixed-point residual at `g` applied to
/// `direction`.
pub fn jacobian_times<T: Scalar>(
    g: &GeneratingSystem<T>,
    direction: &[T],
    cfg: &SolverConfig,
) -> Result<Vec<T>> {
    let (v, z) = unknown_vector(g, cfg)?;
    let dom = g.s.domain();
    let (r0, z, _) = residual(&v, g.degree(), dom, &z, cfg)?;
    let j = jacobian(&v, &r0, g.degree(), dom, &z, cfg)?;
    Ok(j.mul_vec(direction))
}

fn unknown_vector<T: Scalar>(
    g: &GeneratingSystem<T>,
    cfg: &SolverConfig,
) -> Result<(Vec<T>, BivariateSeries<T>)> {
    let mut v = g.s.packed();
    v.push(g.lambda);
    if cfg.mu_unknown {
        let mu = if g.mu.is_finite() && g.mu > T::zero() {
            g.mu
        } else {
            T::lit(0.06)
        };
        v.push(mu);
    }
    let z = match &g.z_cache {
        Some(z) => z.resize(g.degree()),
        None => midpoint_initial_guess(&g.s, g.lambda, g.degree())?,
    };
    Ok((v, z))
}

/// Number of unknowns for a given degree (coefficients plus `λ`).
pub fn n_unknowns(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2 + 1
}

/// Damped Gauss–Newton solve of `R(s) = s` with the gauge `s(1,0) = 0`,
/// `s₁(1,0) = 1`, at the given degree.
///
/// The truncation diagnostic is reported but not gated here; see
/// [`check_truncation`].
pub fn fixed_point_solve<T: Scalar>(
    initial: &GeneratingSystem<T>,
    degree: usize,
    cfg: &SolverConfig,
) -> Result<(GeneratingSystem<T>, SolveReport)> {
    let start = initial.resized(degree);
    let dom = start.s.domain();
    let (mut v, mut z) = unknown_vector(&start, cfg)?;
    let (mut r, zz, _) = residual(&v, degree, dom, &z, cfg)?;
    z = zz;
    let mut rnorm = norm2(&r);
    let mut steps = 0usize;
    let target = T::lit(cfg.residual_tol);
    while norm_inf(&r) > target * T::lit(0.01) {
        if steps >= cfg.max_newton_steps {
            if norm_inf(&r) <= target {
                break;
            }
            return Err(Error::NoConvergence(format!(
                "Gauss-Newton: residual {} after {steps} steps at degree {degree}",
                norm_inf(&r)
            )));
        }
        steps += 1;
        let j = jacobian(&v, &r, degree, dom, &z, cfg)?;
        let neg_r: Vec<T> = r.iter().map(|x| -*x).collect();
        let dv = least_squares(&j, &neg_r, T::zero())?;
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<T> = v.iter().zip(&dv).map(|(a, b)| *a + t * *b).collect();
            if let Ok((rt, zt, _)) = residual(&trial, degree, dom, &z, cfg) {
                let nt = norm2(&rt);
                if nt.is_finite() && nt < rnorm {
                    accepted = Some((trial, rt, zt, nt));
                    break;
                }
            }
            t *= T::lit(0.5);
        }
        match accepted {
            Some((nv, nr, nz, nn)) => {
                let stalled = nn > rnorm * T::lit(0.999);
                v = nv;
                r = nr;
                z = nz;
                rnorm = nn;
                if stalled && norm_inf(&r) <= target {
                    break;
                }
            }
            None => {
                if norm_inf(&r) <= target {
                    break;
                }
                return Err(Error::NoConvergence(format!(
                    "line search failed at step {steps}, residual {}",
                    norm_inf(&r)
                )));
            }
        }
    }
    finish(v, z, steps, degree, dom, cfg)
}

fn finish<T: Scalar>(
    v: Vec<T>,
    z: BivariateSeries<T>,
    steps: usize,
    degree: usize,
    dom: [T; 2],
    cfg: &SolverConfig,
) -> Result<(GeneratingSystem<T>, SolveReport)> {
    let n = n_unknowns(degree) - 1;
    let s = BivariateSeries::from_packed(degree, dom, &v[..n]);
    let lambda = v[n];
    let (r, z, mu) = residual(&v, degree, dom, &z, cfg)?;
    let m = r.len();
    let fp_res = norm_inf(&r[..m - 2]);
    let g = GeneratingSystem {
        s,
        lambda,
        mu,
        z_cache: Some(z.clone()),
    };
    let (d0, d1) = g.gauge_defects();
    if d0.abs() > T::lit(cfg.gauge_tol) || d1.abs() > T::lit(cfg.gauge_tol) {
        return Err(Error::NormalizationFailure(format!(
            "s(1,0) = {d0}, s_1(1,0) - 1 = {d1}"
        )));
    }
    if !(lambda > -T::one() && lambda < T::zero()) {
        return Err(Error::NormalizationFailure(format!(
            "lambda = {lambda} outside (-1, 0)"
        )));
    }
    let z10 = z.eval(T::one(), T::zero());
    if (z10 - T::one()).abs() > T::lit(cfg.z_norm_tol) {
        return Err(Error::NormalizationFailure(format!("z(1,0) = {z10}")));
    }
    if fp_res > T::lit(cfg.residual_tol) {
        return Err(Error::NoConvergence(format!(
            "fixed-point residual {fp_res} above {}",
            cfg.residual_tol
        )));
    }
    let trunc = g.s.substitute_first(&z, lambda)?.dropped / mu;
    let report = SolveReport {
        residual_norm: fp_res.to_f64_lossy(),
        newton_steps: steps,
        truncation_diag: trunc.to_f64_lossy(),
        lambda: lambda.to_f64_lossy(),
        mu: mu.to_f64_lossy(),
        degree,
    };
    Ok((g, report))
}

/// Refuses a solution whose truncation diagnostic exceeds the configured bound.
pub fn check_truncation(report: &SolveReport, cfg: &SolverConfig) -> Result<()> {
    if report.truncation_diag > cfg.truncation_tol {
        return Err(Error::NoConvergence(format!(
            "truncation diagnostic {:e} above {:e} at degree {}",
            report.truncation_diag, cfg.truncation_tol, report.degree
        )));
    }
    Ok(())
}

/// Lowest-degree seed `s₀ = x − 1 + X + X² + c·xX`; every member satisfies
/// the gauge `s(1, 0) = 0`, `s₁(1, 0) = 1`.
pub fn seed<T: Scalar>(c: T, degree: usize, domain: [T; 2]) -> BivariateSeries<T> {
    BivariateSeries::from_terms(
        degree.max(2),
        domain,
        &[
            (0, 0, -T::one()),
            (1, 0, T::one()),
            (0, 1, T::one()),
            (0, 2, T::one()),
            (1, 1, c),
        ],
    )
}

/// Seed parameters tried in order, nearest to `c = 0` first.
pub fn seed_scan(range: [f64; 2], count: usize) -> Vec<f64> {
    let count = count.max(1);
    let mut cs: Vec<f64> = if count == 1 {
        vec![0.5 * (range[0] + range[1])]
    } else {
        (0..count)
            .map(|k| range[0] + (range[1] - range[0]) * k as f64 / (count - 1) as f64)
            .collect()
    };
    cs.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    cs
}

/// Solves at each degree of `schedule`, starting from the built-in seed and
/// lifting each solution as the next initial guess.
pub fn degree_continuation<T: Scalar>(
    schedule: &[usize],
    cfg: &SolverConfig,
    seeds: &SeedConfig,
) -> Result<Vec<(GeneratingSystem<T>, SolveReport)>> {
    validate_schedule(schedule)?;
    let dom = [T::lit(cfg.domain()[0]), T::lit(cfg.domain()[1])];
    let d0 = schedule[0];
    let mut first = None;
    let mut last_err = None;
    for c in seed_scan(seeds.c_range, seeds.c_count) {
        let g = GeneratingSystem::new(seed(T::lit(c), d0, dom), T::lit(seeds.lambda));
        match fixed_point_solve(&g, d0, cfg) {
            Ok(sol) => {
                first = Some(sol);
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let first = first.ok_or_else(|| Error::AtDegree {
        degree: d0,
        source: Box::new(last_err.unwrap_or_else(|| Error::NoConvergence("no seed tried".into()))),
    })?;
    let mut path = vec![first];
    for &d in &schedule[1..] {
        let prev = &path.last().expect("non-empty path").0;
        let next = fixed_point_solve(prev, d, cfg).map_err(|e| Error::AtDegree {
            degree: d,
            source: Box::new(e),
        })?;
        path.push(next);
    }
    Ok(path)
}

pub fn validate_schedule(schedule: &[usize]) -> Result<()> {
    match schedule.first() {
        None => return Err(Error::InvalidSchedule("empty schedule".into())),
        Some(&d) if d > 6 => {
            return Err(Error::InvalidSchedule(format!(
                "first degree {d} exceeds 6"
            )))
        }
        Some(&d) if d < 2 => {
            return Err(Error::InvalidSchedule(format!("first degree {d} below 2")))
        }
        _ => {}
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSchedule(format!(
            "{schedule:?} is not strictly increasing"
        )));
    }
    Ok(())
}

/// `|λ_{k+1} − λ_k|` along a continuation path.
pub fn lambda_increments<T: Scalar>(path: &[(GeneratingSystem<T>, SolveReport)]) -> Vec<f64> {
    path.windows(2)
        .map(|w| (w[1].0.lambda - w[0].0.lambda).abs().to_f64_lossy())
        .collect()
}
