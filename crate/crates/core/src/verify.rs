//! The invariant suite behind `verify`: every check is named, grouped, and
//! reported with its measured value and tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::curve::{curve_sequence, summarize, PolylineCurve};
use crate::error::{Error, Result};
use crate::geometry::Metric;
use crate::ifs::Microscope;
use crate::map::ImplicitMap;
use crate::obstruction::{clash_experiment, tip_derivative_chain, twist_bound, Direction, Side};
use crate::renorm::{midpoint_residual, solve_midpoint, GeneratingSystem};
use crate::scalar::Point;
use crate::series::{Axis, BivariateSeries};

pub const GROUPS: &[&str] = &[
    "scaling",
    "residual",
    "normalization",
    "map",
    "twist",
    "contraction",
    "microscope",
    "curve",
    "chain",
    "clash",
    "oracle",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub group: String,
    pub name: String,
    /// Measured value; `null` when the computation itself failed.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Error code of a failed computation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub groups: Vec<String>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, group: &str, name: &str) -> Option<&Check> {
        self.checks
            .iter()
            .find(|c| c.group == group && c.name == name)
    }
}

#[derive(Clone, Copy)]
enum Cmp {
    /// `value ≤ tolerance`
    AtMost,
    /// `value < tolerance`
    Below,
    /// `value ≥ tolerance`
    AtLeast,
}

struct Suite<'a> {
    cfg: &'a RunConfig,
    g: &'a GeneratingSystem<f64>,
    map: ImplicitMap<f64>,
    group: &'static str,
    checks: Vec<Check>,
    scope: Option<Result<Microscope<f64>>>,
    z: Option<Result<BivariateSeries<f64>>>,
}

impl<'a> Suite<'a> {
    fn push(
        &mut self,
        name: &str,
        value: Result<f64>,
        tolerance: f64,
        cmp: Cmp,
        message: Option<String>,
    ) {
        let check = match value {
            Ok(v) => Check {
                group: self.group.into(),
                name: name.into(),
                value: Some(v),
                tolerance,
                pass: match cmp {
                    Cmp::AtMost => v <= tolerance,
                    Cmp::Below => v < tolerance,
                    Cmp::AtLeast => v >= tolerance,
                },
                error: None,
                message,
            },
            Err(e) => Check {
                group: self.group.into(),
                name: name.into(),
                value: None,
                tolerance,
                pass: false,
                error: Some(e.code().into()),
                message: Some(e.to_string()),
            },
        };
        self.checks.push(check);
    }

    fn flag(&mut self, name: &str, ok: Result<bool>, message: Option<String>) {
        self.push(
            name,
            ok.map(|b| if b { 1.0 } else { 0.0 }),
            1.0,
            Cmp::AtLeast,
            message,
        );
    }

    fn scope(&mut self) -> Result<&Microscope<f64>> {
        if self.scope.is_none() {
            self.scope = Some(Microscope::build(self.map.clone(), &self.cfg.ifs));
        }
        self.scope
            .as_ref()
            .expect("set above")
            .as_ref()
            .map_err(Clone::clone)
    }

    fn midpoint(&mut self) -> Result<BivariateSeries<f64>> {
        if self.z.is_none() {
            self.z = Some(solve_midpoint(
                &self.g.s,
                self.g.lambda,
                self.g.degree(),
                &self.cfg.solver,
            ));
        }
        self.z.clone().expect("set above")
    }

    /// `(x, X)` pairs drawn uniformly from the scaled trusted square.
    fn pair_samples(&self, n: usize, stream: u64) -> Vec<Point<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.sample_seed);
        rng.set_stream(stream);
        let w = self.cfg.solver.trusted_half_width * self.cfg.verify.sample_fraction;
        (0..n)
            .map(|_| [rng.gen_range(-w..=w), rng.gen_range(-w..=w)])
            .collect()
    }

    /// Phase-space points `(x, −s(X, x))` for the sampled pairs.
    fn map_samples(&self) -> Vec<Point<f64>> {
        self.pair_samples(self.cfg.verify.map_samples, 1)
            .into_iter()
            .map(|[x, xx]| [x, -self.g.s.eval(xx, x)])
            .collect()
    }
}

fn max_over<I: IntoIterator<Item = Result<f64>>>(it: I) -> Result<f64> {
    let mut m = 0.0f64;
    for v in it {
        let v = v?;
        if !v.is_finite() {
            return Err(Error::InvalidInput("non-finite value".into()));
        }
        m = m.max(v);
    }
    Ok(m)
}

/// Runs the selected groups (all when `only` is empty) against a fixed point.
pub fn run(g: &GeneratingSystem<f64>, cfg: &RunConfig, only: &[String]) -> Result<VerifyReport> {
    for name in only {
        if !GROUPS.contains(&name.as_str()) {
            return Err(Error::InvalidInput(format!(
                "unknown check group '{name}' (expected one of {})",
                GROUPS.join(", ")
            )));
        }
    }
    let selected: Vec<&'static str> = GROUPS
        .iter()
        .copied()
        .filter(|g| only.is_empty() || only.iter().any(|o| o == g))
        .collect();
    let mut suite = Suite {
        cfg,
        g,
        map: ImplicitMap::new(g.clone(), cfg.map),
        group: "",
        checks: Vec::new(),
        scope: None,
        z: None,
    };
    for &group in &selected {
        suite.group = group;
        match group {
            "scaling" => scaling(&mut suite),
            "residual" => residual(&mut suite),
            "normalization" => normalization(&mut suite),
            "map" => map_checks(&mut suite),
            "twist" => twist(&mut suite),
            "contraction" => contraction(&mut suite),
            "microscope" => microscope(&mut suite),
            "curve" => curve(&mut suite),
            "chain" => chain(&mut suite),
            "clash" => clash(&mut suite),
            "oracle" => oracle(&mut suite),
            _ => unreachable!("validated above"),
        }
    }
    Ok(VerifyReport {
        pass: suite.checks.iter().all(|c| c.pass),
        groups: selected.iter().map(|s| s.to_string()).collect(),
        checks: suite.checks,
    })
}

fn scaling(s: &mut Suite) {
    let t = &s.cfg.tolerances;
    let (l, m) = (s.g.lambda, s.g.mu);
    let (dl, dm) = ((l - t.lambda_target).abs(), (m - t.mu_target).abs());
    let (tl, tm) = (t.lambda, t.mu);
    s.push(
        "lambda",
        Ok(dl),
        tl,
        Cmp::AtMost,
        Some(format!("lambda = {l}")),
    );
    s.push("mu", Ok(dm), tm, Cmp::AtMost, Some(format!("mu = {m}")));
}

fn residual(s: &mut Suite) {
    let (lambda, mu) = (s.g.lambda, s.g.mu);
    let z = s.midpoint();
    let fp = z.clone().map(|z| {
        let rs = s.g.s.compose_first(&z, lambda).scale(mu.recip());
        (&rs - &s.g.s).sup_norm()
    });
    s.push(
        "fixed_point",
        fp,
        s.cfg.solver.residual_tol,
        Cmp::AtMost,
        None,
    );
    let n = s.cfg.solver.residual_grid;
    let mid = z
        .clone()
        .map(|z| midpoint_residual(&s.g.s, lambda, &z, n, s.g.s.domain()));
    s.push(
        "midpoint_grid",
        mid,
        s.cfg.tolerances.midpoint_residual,
        Cmp::AtMost,
        Some(format!("{n}x{n} grid")),
    );
    let trunc = z.and_then(|z| Ok(s.g.s.substitute_first(&z, lambda)?.dropped / mu));
    s.push(
        "truncation",
        trunc,
        s.cfg.solver.truncation_tol,
        Cmp::AtMost,
        None,
    );
}

fn normalization(s: &mut Suite) {
    let (d0, d1) = s.g.gauge_defects();
    let gt = s.cfg.solver.gauge_tol;
    s.push("s(1,0)", Ok(d0.abs()), gt, Cmp::AtMost, None);
    s.push("s1(1,0)-1", Ok(d1.abs()), gt, Cmp::AtMost, None);
    let z = s.midpoint();
    let zt = s.cfg.solver.z_norm_tol;
    let z10 = z.clone().map(|z| (z.eval(1.0, 0.0) - 1.0).abs());
    s.push("z(1,0)-1", z10, zt, Cmp::AtMost, None);
    let z01 = z.clone().map(|z| (z.eval(0.0, 1.0) - 1.0).abs());
    s.push("z(0,1)-1", z01, zt, Cmp::AtMost, None);
    let mu = s.g.mu;
    let id = z.map(|z| (mu - z.partial(Axis::First).eval(1.0, 0.0)).abs());
    s.push(
        "mu-z1(1,0)",
        id,
        s.cfg.tolerances.mu_identity,
        Cmp::AtMost,
        None,
    );
}

fn map_checks(s: &mut Suite) {
    let t = s.cfg.tolerances.clone();
    let pts = s.map_samples();
    let m = &s.map;
    let det = max_over(pts.iter().map(|&p| Ok((m.jacobian_det(p)? - 1.0).abs())));
    let n = pts.len();
    s.push(
        "det",
        det,
        t.det,
        Cmp::AtMost,
        Some(format!("{n} random points")),
    );
    let m = &s.map;
    let rev = max_over(pts.iter().map(|&p| {
        let a = m.forward(p)?.point;
        let b = m.forward([a[0], -a[1]])?.point;
        Ok((b[0] - p[0]).abs().max((-b[1] - p[1]).abs()))
    }));
    s.push(
        "reversibility",
        rev,
        t.reversibility,
        Cmp::AtMost,
        Some("T F T F = id".into()),
    );
    let m = &s.map;
    let inv = max_over(pts.iter().map(|&p| {
        let q = m.backward(m.forward(p)?.point)?.point;
        Ok((q[0] - p[0]).abs().max((q[1] - p[1]).abs()))
    }));
    s.push("round_trip", inv, t.reversibility, Cmp::AtMost, None);
    let h = t.fd_step;
    let m = &s.map;
    let fd = max_over(pts.iter().take(s.cfg.verify.fd_samples).map(|&p| {
        let d = m.differential(p)?;
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for col in 0..2 {
            let mut a = p;
            let mut b = p;
            a[col] += h;
            b[col] -= h;
            let (fa, fb) = (m.forward(a)?.point, m.forward(b)?.point);
            for row in 0..2 {
                let c = (fa[row] - fb[row]) / (2.0 * h);
                err = err.max((c - d[row][col]).abs());
                scale = scale.max(d[row][col].abs());
            }
        }
        Ok(err / scale)
    }));
    s.push(
        "differential_fd",
        fd,
        t.fd_relative,
        Cmp::AtMost,
        Some("relative to max |DF| entry".into()),
    );
}

fn twist(s: &mut Suite) {
    let pts = s.map_samples();
    let ocfg = s.cfg.obstruction.clone();
    let a = twist_bound(&s.map, &pts, &ocfg).map(|c| c.twist_bound);
    s.push(
        "sign",
        a,
        0.0,
        Cmp::Below,
        Some("max dX/dy over random points".into()),
    );
    let tip = s.map.twist([0.0, 0.0]).map(|v| (v + 1.0).abs());
    s.push(
        "tip_column",
        tip,
        s.cfg.tolerances.tip_twist,
        Cmp::AtMost,
        Some("|dX/dy(tip) + 1|".into()),
    );
    let lvl = ocfg.twist_level;
    let clouds = s.scope().and_then(|sc| {
        let c0: Vec<_> = sc
            .cantor_cloud(lvl)?
            .into_iter()
            .map(|(_, q)| sc.scal.h(q))
            .collect();
        let c1: Vec<_> = sc
            .cantor_cloud(lvl + 4)?
            .into_iter()
            .map(|(_, q)| sc.scal.h(q))
            .collect();
        Ok((c0, c1))
    });
    let cones = clouds.and_then(|(c0, c1)| {
        Ok((
            twist_bound(&s.map, &c0, &ocfg)?,
            twist_bound(&s.map, &c1, &ocfg)?,
        ))
    });
    let cone = cones.clone().map(|(c, _)| c.twist_bound);
    s.push(
        "cantor_bound",
        cone,
        0.0,
        Cmp::Below,
        Some(format!("level {lvl} cloud")),
    );
    let stab = cones
        .clone()
        .map(|(c, d)| ((c.twist_bound - d.twist_bound) / c.twist_bound).abs());
    s.push(
        "sampling_stability",
        stab,
        0.05,
        Cmp::Below,
        Some(format!("levels {lvl} and {}", lvl + 4)),
    );
    let half = cones.map(|(c, _)| c.half_angle.to_degrees());
    s.push("cone_half_angle_deg", half, 0.0, Cmp::AtLeast, None);
}

fn contraction(s: &mut Suite) {
    let bound = s.cfg.ifs.theta + s.cfg.tolerances.contraction_slack;
    let c = s.scope().and_then(|sc| sc.contraction());
    let w = c
        .as_ref()
        .map(|c| format!("metric weight {}", c.metric_weight))
        .ok();
    s.push(
        "psi0",
        c.clone().map(|c| c.psi0),
        bound,
        Cmp::AtMost,
        w.clone(),
    );
    s.push("psi1", c.map(|c| c.psi1), bound, Cmp::AtMost, w);
}

fn microscope(s: &mut Suite) {
    let (n, k) = (s.cfg.verify.box_level, s.cfg.verify.odometer_level);
    let slack = s.cfg.ifs.containment_slack;
    let levels = s.scope().and_then(|sc| sc.boxes_by_level(n.max(k), slack));
    s.flag(
        "nested_disjoint",
        levels.as_ref().map(|_| true).map_err(Clone::clone),
        Some(format!("levels 1..={n}")),
    );
    for lvl in 1..=k {
        let r = match (&levels, s.scope()) {
            (Ok(ls), Ok(sc)) => sc.odometer_check(&ls[lvl], slack).map(|_| true),
            (Err(e), _) => Err(e.clone()),
            (_, Err(e)) => Err(e),
        };
        s.flag(
            &format!("odometer_{lvl}"),
            r,
            Some(format!("single {}-cycle", 1usize << lvl)),
        );
    }
}

fn curve(s: &mut Suite) {
    let k = s.cfg.verify.curve_iters;
    let t = s.cfg.tolerances.clone();
    let theta = s.cfg.ifs.theta;
    let ccfg = s.cfg.curve.clone();
    let out = s.scope().and_then(|sc| {
        let [a, b] = sc.base.diagonal();
        let seq = curve_sequence(PolylineCurve::segment(a, b, sc.metric), sc, &ccfg, k)?;
        let cloud: Vec<_> = sc.cantor_cloud(k)?.into_iter().map(|(_, q)| q).collect();
        let hd = seq[k].hausdorff_to_cloud(&cloud);
        Ok((
            summarize(&seq),
            hd,
            theta.powi(k as i32) * sc.base_diameter(),
        ))
    });
    let lip = out.clone().and_then(|(sum, _, _)| {
        let l1 = *sum
            .lipschitz
            .get(1)
            .ok_or_else(|| Error::InvalidInput("need one refinement".into()))?;
        Ok(sum.lipschitz[1..]
            .iter()
            .map(|l| l - l1)
            .fold(0.0, f64::max))
    });
    s.push(
        "lipschitz_uniform",
        lip,
        t.lipschitz_slack,
        Cmp::AtMost,
        Some("max_k L_k - L_1".into()),
    );
    let ratio = out.clone().map(|(sum, _, _)| {
        sum.sup_distances
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    });
    s.push(
        "sup_distance_ratio",
        ratio,
        t.sup_distance_ratio,
        Cmp::AtMost,
        None,
    );
    match out {
        Ok((_, hd, bound)) => s.push(
            "hausdorff_cloud",
            Ok(hd),
            bound,
            Cmp::AtMost,
            Some(format!("level {k}")),
        ),
        Err(e) => s.push("hausdorff_cloud", Err(e), f64::NAN, Cmp::AtMost, None),
    }
}

fn chain(s: &mut Suite) {
    let ocfg = s.cfg.obstruction.clone();
    let c = s.midpoint().and_then(|z| {
        let mut g = s.g.clone();
        g.z_cache = Some(z);
        tip_derivative_chain(&g, &s.map, &ocfg)
    });
    match c {
        Ok(c) => {
            for id in &c.identities {
                s.push(
                    &id.name,
                    Ok(id.rel_err),
                    ocfg.chain_rel_tol,
                    Cmp::AtMost,
                    None,
                );
            }
            s.flag("signs", Ok(c.signs_ok), None);
            s.push(
                "dX/dx(tip)",
                Ok(c.dxdx_tip),
                -ocfg.sign_margin,
                Cmp::AtMost,
                None,
            );
        }
        Err(e) => s.push("identities", Err(e), ocfg.chain_rel_tol, Cmp::AtMost, None),
    }
}

fn clash(s: &mut Suite) {
    let ocfg = s.cfg.obstruction.clone();
    let theta = s.cfg.ifs.theta;
    let depth = ocfg.max_depth;
    let r = s
        .scope()
        .and_then(|sc| clash_experiment(sc, Direction::from_degrees(45.0), depth, theta, &ocfg));
    let n = r.clone().and_then(|r| {
        r.n_star.map(|n| n as f64).ok_or_else(|| {
            Error::InvalidInput("clash pattern does not hold at the maximum depth".into())
        })
    });
    s.push(
        "n_star",
        n,
        depth as f64,
        Cmp::AtMost,
        Some("seed angle 45 deg".into()),
    );
    s.flag("monotone", r.map(|r| r.monotone_after_n_star), None);
    let h = s
        .scope()
        .and_then(|sc| clash_experiment(sc, Direction::horizontal(), 0, theta, &ocfg));
    s.flag(
        "horizontal_seed_flips",
        h.map(|r| r.steps[0].forward_side == Side::Left),
        Some("DF(tip) sends the horizontal to the left side".into()),
    );
}

fn random_series(
    rng: &mut ChaCha8Rng,
    degree: usize,
    container: usize,
    dom: [f64; 2],
) -> BivariateSeries<f64> {
    let mut terms = Vec::new();
    for i in 0..=degree {
        for j in 0..=degree - i {
            terms.push((i, j, rng.gen_range(-1.0..=1.0)));
        }
    }
    BivariateSeries::from_terms(container, dom, &terms)
}

fn oracle(s: &mut Suite) {
    let tol = s.cfg.tolerances.series_oracle;
    let dom = s.g.s.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.sample_seed);
    rng.set_stream(2);
    let a = random_series(&mut rng, 4, 8, dom);
    let b = random_series(&mut rng, 4, 8, dom);
    let zz = random_series(&mut rng, 2, 6, dom);
    let f = random_series(&mut rng, 3, 6, dom);
    let c = 0.3;
    let pts: Vec<Point<f64>> = (0..s.cfg.verify.oracle_samples)
        .map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)])
        .collect();
    let ab = a.mul_trunc(&b);
    let da = a.partial(Axis::Second);
    let fz = f.compose_first(&zz, c);
    let (mut e_mul, mut e_der, mut e_cmp) = (0.0f64, 0.0f64, 0.0f64);
    for &[x, y] in &pts {
        let prod = a.eval(x, y) * b.eval(x, y);
        e_mul = e_mul.max((ab.eval(x, y) - prod).abs() / prod.abs().max(1.0));
        // Term-by-term derivative in X.
        let mut d = 0.0;
        for i in 0..=a.degree() {
            for j in 1..=a.degree() - i {
                d += a.coeff(i, j) * j as f64 * x.powi(i as i32) * y.powi(j as i32 - 1);
            }
        }
        e_der = e_der.max((da.eval(x, y) - d).abs() / d.abs().max(1.0));
        let want = f.eval(zz.eval(x, y), c * y);
        e_cmp = e_cmp.max((fz.eval(x, y) - want).abs() / want.abs().max(1.0));
    }
    s.push("series_mul", Ok(e_mul), tol, Cmp::AtMost, None);
    s.push("series_partial", Ok(e_der), tol, Cmp::AtMost, None);
    s.push("series_compose", Ok(e_cmp), tol, Cmp::AtMost, None);

    let lvl = s.cfg.verify.oracle_level;
    let ccfg = s.cfg.curve.clone();
    let hd = s.scope().and_then(|sc| {
        let [p, q] = sc.base.diagonal();
        let seq = curve_sequence(PolylineCurve::segment(p, q, sc.metric), sc, &ccfg, lvl)?;
        let cloud: Vec<_> = sc.cantor_cloud(lvl)?.into_iter().map(|(_, q)| q).collect();
        let fast = seq[lvl].hausdorff_to_cloud(&cloud);
        let metric: Metric<f64> = sc.metric;
        let brute = cloud
            .iter()
            .map(|&q| metric.point_polyline(q, seq[lvl].points()))
            .fold(0.0, f64::max);
        Ok((fast - brute).abs())
    });
    s.push(
        "hausdorff_bruteforce",
        hd,
        s.cfg.tolerances.hausdorff_oracle,
        Cmp::AtMost,
        Some(format!("level {lvl}")),
    );
}
