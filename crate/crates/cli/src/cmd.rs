use std::path::{Path, PathBuf};

use serde::Serialize;
use twistren::config::RunConfig;
use twistren::curve::{curve_sequence, summarize, PolylineCurve};
use twistren::ifs::Microscope;
use twistren::io::{self, BoxJson, BoxesFile, FixedPointFile};
use twistren::map::ImplicitMap;
use twistren::obstruction::{
    clash_experiment, tip_derivative_chain, twist_bound, ClashReport, Direction, TipChain,
};
use twistren::renorm::{check_truncation, degree_continuation, solve_midpoint};
use twistren::{verify, Error, System64};

use crate::{Cli, Command, Input};

/// Failure with a stable code and the process exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: u8,
}

impl CliError {
    pub fn usage(code: &str, message: String) -> Self {
        Self {
            code: code.into(),
            message,
            exit: 1,
        }
    }

    pub fn report(&self, module: &str) {
        let line = serde_json::json!({
            "error": self.code,
            "module": module,
            "message": self.message,
        });
        eprintln!("{line}");
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let exit = match e {
            Error::InvalidInput(_) | Error::InvalidSchedule(_) => 1,
            _ => 2,
        };
        Self {
            code: e.code().into(),
            message: e.to_string(),
            exit,
        }
    }
}

type Res<T> = std::result::Result<T, CliError>;

pub fn module_of(c: &Command) -> &'static str {
    match c {
        Command::Solve { .. } => "renorm",
        Command::Map { .. } => "map",
        Command::Cantor { .. } => "ifs",
        Command::Curve { .. } => "curve",
        Command::Obstruct { .. } => "obstruction",
        Command::Verify { .. } => "verify",
    }
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn write_json<V: Serialize>(&self, path: &Path, v: &V) -> Res<()> {
        io::write_json(path, v)?;
        self.note(format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_text(&self, path: &Path, text: &str) -> Res<()> {
        io::write_text(path, text)?;
        self.note(format!("wrote {}", path.display()));
        Ok(())
    }

    fn load_system(&self, input: &Input) -> Res<System64> {
        let p = &input.path;
        if !p.exists() {
            return Err(CliError::usage(
                "MissingInput",
                format!("{} not found; run `twistren solve` first", p.display()),
            ));
        }
        let text = io::read_text(p)?;
        let file: FixedPointFile = serde_json::from_str(&text)
            .map_err(|e| CliError::usage("MalformedJson", format!("{}: {e}", p.display())))?;
        Ok(file.system()?)
    }

    fn microscope(&self, g: System64) -> Res<Microscope<f64>> {
        let m = ImplicitMap::new(g, self.cfg.map);
        Ok(Microscope::build(m, &self.cfg.ifs)?)
    }
}

pub fn run(cli: &Cli) -> Res<u8> {
    let cfg = match &cli.config {
        Some(p) if !p.exists() => {
            return Err(CliError::usage(
                "MissingInput",
                format!("config {} not found", p.display()),
            ));
        }
        Some(p) => {
            let text = io::read_text(p)?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::usage("MalformedJson", format!("{}: {e}", p.display())))?;
            cfg
        }
        None => RunConfig::default(),
    };
    let mut ctx = Ctx {
        cfg,
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    if let Command::Solve {
        degree_schedule: Some(s),
    } = &cli.command
    {
        ctx.cfg.degree_schedule = s.clone();
    }
    ctx.cfg.validate()?;
    match &cli.command {
        Command::Solve { .. } => solve(&ctx),
        Command::Map { points, input } => map(&ctx, points, input),
        Command::Cantor {
            level,
            boxes,
            input,
        } => cantor(&ctx, *level, *boxes, input),
        Command::Curve { iters, input } => curve(&ctx, *iters, input),
        Command::Obstruct {
            max_depth,
            seed_angle,
            chain,
            input,
        } => obstruct(&ctx, *max_depth, *seed_angle, *chain, input),
        Command::Verify { only, input } => verify_cmd(&ctx, only, input),
    }
}

fn solve_system(ctx: &Ctx) -> Res<FixedPointFile> {
    let cfg = &ctx.cfg;
    let path = degree_continuation::<f64>(&cfg.degree_schedule, &cfg.solver, &cfg.seeds)?;
    for (_, r) in &path {
        ctx.note(format!(
            "degree {:>2}: lambda = {:.12}, mu = {:.12}, residual = {:.2e}, truncation = {:.2e}",
            r.degree, r.lambda, r.mu, r.residual_norm, r.truncation_diag
        ));
    }
    let (g, report) = path.last().expect("schedule is non-empty");
    check_truncation(report, &cfg.solver)?;
    let reports = path.iter().map(|(_, r)| r.clone()).collect();
    Ok(FixedPointFile::new(g, Some(report.clone()), reports))
}

fn solve(ctx: &Ctx) -> Res<u8> {
    let file = solve_system(ctx)?;
    ctx.write_json(&ctx.out_or("fixed_point.json"), &file)?;
    Ok(0)
}

fn parse_point(s: &str) -> Res<[f64; 2]> {
    let bad = || CliError::usage("UsageError", format!("point '{s}' is not of the form x,y"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let x: f64 = a.trim().parse().map_err(|_| bad())?;
    let y: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(bad());
    }
    Ok([x, y])
}

#[derive(Serialize)]
struct MapLine {
    point: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    image: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    differential: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    det: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    twist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ambiguous: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

fn map(ctx: &Ctx, points: &[String], input: &Input) -> Res<u8> {
    let pts = points
        .iter()
        .map(|s| parse_point(s))
        .collect::<Res<Vec<_>>>()?;
    let m = ImplicitMap::new(ctx.load_system(input)?, ctx.cfg.map);
    let mut text = String::new();
    let mut failed = false;
    for p in pts {
        let r = (|| -> twistren::Result<MapLine> {
            let img = m.forward(p)?;
            let d = m.differential(p)?;
            Ok(MapLine {
                point: p,
                image: Some(img.point),
                differential: Some(d),
                det: Some(d[0][0] * d[1][1] - d[0][1] * d[1][0]),
                twist: Some(d[0][1]),
                ambiguous: Some(img.ambiguous),
                error: None,
                message: None,
            })
        })();
        let line = r.unwrap_or_else(|e| {
            failed = true;
            MapLine {
                point: p,
                image: None,
                differential: None,
                det: None,
                twist: None,
                ambiguous: None,
                error: Some(e.code().into()),
                message: Some(e.to_string()),
            }
        });
        text.push_str(&serde_json::to_string(&line).expect("serializable"));
        text.push('\n');
    }
    print!("{text}");
    if let Some(out) = &ctx.out {
        ctx.write_text(out, &text)?;
    }
    Ok(if failed { 2 } else { 0 })
}

fn cantor(ctx: &Ctx, level: usize, boxes: bool, input: &Input) -> Res<u8> {
    let scope = ctx.microscope(ctx.load_system(input)?)?;
    let h = |q: [f64; 2]| scope.scal.h(q);
    if boxes {
        let list = scope.boxes(level, ctx.cfg.ifs.containment_slack)?;
        let file = BoxesFile {
            level,
            tip: h(scope.tip()),
            boxes: list
                .iter()
                .map(|b| {
                    let mut j = BoxJson::from_box(b);
                    j.center = h(j.center);
                    j.hull.iter_mut().for_each(|p| *p = h(*p));
                    j
                })
                .collect(),
        };
        ctx.write_json(&ctx.out_or("boxes.json"), &file)?;
    } else {
        let rows: Vec<_> = scope
            .cantor_cloud(level)?
            .into_iter()
            .map(|(w, q)| (w, h(q)))
            .collect();
        ctx.write_text(&ctx.out_or("cloud.csv"), &io::cloud_csv(&rows))?;
    }
    Ok(0)
}

/// `dir/curve_k.csv` → `dir/curve_3.csv`; a stem without the `_k` suffix
/// gets `_3` appended.
fn numbered(template: &Path, k: usize) -> PathBuf {
    let stem = template
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("curve");
    let base = stem.strip_suffix("_k").unwrap_or(stem);
    let ext = template
        .extension()
        .and_then(|s| s.to_str())
        .unwrap_or("csv");
    template.with_file_name(format!("{base}_{k}.{ext}"))
}

fn summary_path(template: &Path) -> PathBuf {
    let stem = template
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("curve");
    let base = stem.strip_suffix("_k").unwrap_or(stem);
    template.with_file_name(format!("{base}_summary.json"))
}

#[derive(Serialize)]
struct HausdorffEntry {
    level: usize,
    value: f64,
    bound: f64,
}

#[derive(Serialize)]
struct CurveSummaryFile {
    iters: usize,
    theta: f64,
    metric_weight: f64,
    base_diameter: f64,
    lipschitz: Vec<f64>,
    sup_distances: Vec<f64>,
    sup_distance_ratios: Vec<f64>,
    vertices: Vec<usize>,
    hausdorff: Vec<HausdorffEntry>,
    files: Vec<String>,
}

fn curve(ctx: &Ctx, iters: usize, input: &Input) -> Res<u8> {
    let scope = ctx.microscope(ctx.load_system(input)?)?;
    let [a, b] = scope.base.diagonal();
    let seq = curve_sequence(
        PolylineCurve::segment(a, b, scope.metric),
        &scope,
        &ctx.cfg.curve,
        iters,
    )?;
    let template = ctx.out_or("curve_k.csv");
    let mut files = Vec::new();
    let mut hausdorff = Vec::new();
    let diam = scope.base_diameter();
    for (k, c) in seq.iter().enumerate() {
        let pts: Vec<_> = c.points().iter().map(|&q| scope.scal.h(q)).collect();
        let path = numbered(&template, k);
        ctx.write_text(&path, &io::curve_csv(c.params(), &pts))?;
        files.push(
            path.file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
        let cloud: Vec<_> = scope.cantor_cloud(k)?.into_iter().map(|(_, q)| q).collect();
        hausdorff.push(HausdorffEntry {
            level: k,
            value: c.hausdorff_to_cloud(&cloud),
            bound: ctx.cfg.curve.theta.powi(k as i32) * diam,
        });
    }
    let sum = summarize(&seq);
    let ratios = sum.sup_distances.windows(2).map(|w| w[1] / w[0]).collect();
    let file = CurveSummaryFile {
        iters,
        theta: ctx.cfg.curve.theta,
        metric_weight: scope.metric.y_weight,
        base_diameter: diam,
        lipschitz: sum.lipschitz,
        sup_distances: sum.sup_distances,
        sup_distance_ratios: ratios,
        vertices: sum.vertices,
        hausdorff,
        files,
    };
    ctx.write_json(&summary_path(&template), &file)?;
    Ok(0)
}

fn chain_record(ctx: &Ctx, g: &System64) -> Res<TipChain> {
    let mut g = g.clone();
    if g.z_cache.is_none() {
        g.z_cache = Some(solve_midpoint(&g.s, g.lambda, g.degree(), &ctx.cfg.solver)?);
    }
    let m = ImplicitMap::new(g.clone(), ctx.cfg.map);
    Ok(tip_derivative_chain(&g, &m, &ctx.cfg.obstruction)?)
}

#[derive(Serialize)]
struct ConeJson {
    twist_bound: f64,
    half_angle_deg: f64,
    samples: usize,
}

#[derive(Serialize)]
struct ClashFile {
    seed_angle_deg: f64,
    max_depth: usize,
    theta: f64,
    base_diameter: f64,
    chain: TipChain,
    cone: ConeJson,
    report: ClashReport,
}

fn obstruct(
    ctx: &Ctx,
    max_depth: Option<usize>,
    seed_angle: f64,
    chain_only: bool,
    input: &Input,
) -> Res<u8> {
    let g = ctx.load_system(input)?;
    let chain = chain_record(ctx, &g)?;
    if chain_only {
        println!(
            "{}",
            serde_json::to_string_pretty(&chain).expect("serializable")
        );
        if let Some(out) = &ctx.out {
            ctx.write_json(out, &chain)?;
        }
        return Ok(if chain.signs_ok { 0 } else { 2 });
    }
    if !seed_angle.is_finite() {
        return Err(CliError::usage(
            "UsageError",
            "seed angle must be finite".into(),
        ));
    }
    let ocfg = &ctx.cfg.obstruction;
    let depth = max_depth.unwrap_or(ocfg.max_depth);
    let scope = ctx.microscope(g)?;
    let samples: Vec<_> = scope
        .cantor_cloud(ocfg.twist_level)?
        .into_iter()
        .map(|(_, q)| scope.scal.h(q))
        .collect();
    let cone = twist_bound(&scope.map, &samples, ocfg)?;
    let theta = ctx.cfg.ifs.theta;
    let report = clash_experiment(
        &scope,
        Direction::from_degrees(seed_angle),
        depth,
        theta,
        ocfg,
    )?;
    let ok = report.n_star.is_some();
    match report.n_star {
        Some(n) => ctx.note(format!("clash pattern holds for n = {n}..={depth}")),
        None => ctx.note(format!("clash pattern does not hold at depth {depth}")),
    }
    let file = ClashFile {
        seed_angle_deg: seed_angle,
        max_depth: depth,
        theta,
        base_diameter: scope.base_diameter(),
        chain,
        cone: ConeJson {
            twist_bound: cone.twist_bound,
            half_angle_deg: cone.half_angle.to_degrees(),
            samples: samples.len(),
        },
        report,
    };
    ctx.write_json(&ctx.out_or("clash.json"), &file)?;
    if !ok {
        CliError {
            code: "ClashNotObserved".into(),
            message: format!("no depth N <= {depth} from which the clash pattern holds"),
            exit: 2,
        }
        .report("obstruction");
        return Ok(2);
    }
    Ok(0)
}

fn verify_cmd(ctx: &Ctx, only: &[String], input: &Input) -> Res<u8> {
    let g = if input.path.exists() {
        ctx.load_system(input)?
    } else {
        ctx.note(format!("{} not found; solving", input.path.display()));
        solve_system(ctx)?.system()?
    };
    let report = verify::run(&g, &ctx.cfg, only)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("serializable")
    );
    if let Some(out) = &ctx.out {
        ctx.write_json(out, &report)?;
    }
    let failed: Vec<_> = report.failures().collect();
    ctx.note(format!(
        "{} of {} checks passed",
        report.checks.len() - failed.len(),
        report.checks.len()
    ));
    for c in &failed {
        CliError {
            code: c.error.clone().unwrap_or_else(|| "CheckFailed".into()),
            message: format!(
                "{}/{}: value {:?}, tolerance {}{}",
                c.group,
                c.name,
                c.value,
                c.tolerance,
                c.message
                    .as_deref()
                    .map(|m| format!(" ({m})"))
                    .unwrap_or_default()
            ),
            exit: 2,
        }
        .report("verify");
    }
    Ok(if report.pass { 0 } else { 2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_paths() {
        assert_eq!(
            numbered(Path::new("out/curve_k.csv"), 3),
            PathBuf::from("out/curve_3.csv")
        );
        assert_eq!(
            numbered(Path::new("gamma.csv"), 0),
            PathBuf::from("gamma_0.csv")
        );
        assert_eq!(
            summary_path(Path::new("out/curve_k.csv")),
            PathBuf::from("out/curve_summary.json")
        );
    }

    #[test]
    fn point_parsing() {
        assert_eq!(parse_point("0.5,-1").unwrap(), [0.5, -1.0]);
        assert!(parse_point("0.5").is_err());
        assert!(parse_point("a,b").is_err());
    }
}
