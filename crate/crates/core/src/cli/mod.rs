//! The `sharpcontour` command line.
//!
//! Exit codes: 0 success, 2 parse errors (including bad flags), 3 invalid
//! configuration, 4 everything else. Output files are written atomically.

mod document;
mod svg;

pub use document::{group_instances, image_bbox, polygon_from_ring, ring_from_polygon, InstanceRecord, PolygonDocument, Ring, IMAGE_CONVENTION};
pub use svg::{render_svg, SvgInstance};

use clap::{ArgGroup, Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::evolution::{evolve_rings, EvolutionConfig, EvolutionTrace};
use crate::fields::{synthetic_features, AnalyticOracle, FeatureGrid, GridField, InstanceContext, InstanceField, IpcParams, ProbabilityField, SyntheticFeatureConfig};
use crate::geometry::{Point2, Polygon, Region};
use crate::harness::{run_sweep, rows_to_csv, timings_to_csv, SweepConfig};
use crate::io::{read_json, write_atomic, write_json};
use crate::metrics::{evaluate, EvalInput};
use crate::raster::{encode_pgm, mask_to_contours, rasterize, read_pgm, MaskGrid, PgmFormat};
use crate::training::{fit_instance, sample_boundary_points, TrainConfig, TrainingLog};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "sharpcontour", version, about = "Contour refinement by per-vertex discrete evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Refine coarse contours against a probability field.
    Refine(RefineArgs),
    /// Fit a point classifier to one instance of a ground-truth mask.
    Train(TrainArgs),
    /// Run a parameter sweep over a synthetic corpus with the analytic oracle.
    Bench(BenchArgs),
    /// Score predicted contours or masks against ground truth.
    Eval(EvalArgs),
    /// Convert between PGM masks and polygon JSON (by file extension).
    Convert(ConvertArgs),
    /// Render polygon JSON to SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["mask", "polygons"])))]
#[command(group(ArgGroup::new("field_source").required(true).args(["field", "oracle", "ipc"])))]
struct RefineArgs {
    /// Coarse mask (PGM); its contours are the initial contours.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Initial contours as polygon JSON.
    #[arg(long)]
    polygons: Option<PathBuf>,
    /// Foreground probability raster (PGM); the field is one minus its value.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Analytic oracle: "circle:cx,cy,r[,tau]" or "poly:FILE[,tau]", image coordinates.
    #[arg(long)]
    oracle: Option<String>,
    /// Classifier weights (JSON) applied to every instance with its own box.
    #[arg(long, requires = "features")]
    ipc: Option<PathBuf>,
    /// Feature grid (JSON) for --ipc.
    #[arg(long, requires = "ipc")]
    features: Option<PathBuf>,
    /// Evolution config (JSON); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output polygon JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write an SVG overlay.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Ground truth (polygon JSON or PGM) drawn in the SVG.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Store every intermediate contour in the output.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Ground-truth mask (PGM).
    #[arg(long)]
    mask: PathBuf,
    /// Feature grid (JSON); synthesized from the mask when omitted.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Write the synthesized feature grid here.
    #[arg(long, conflicts_with = "features")]
    write_features: Option<PathBuf>,
    /// Instance index among the mask's connected regions, top-left first.
    #[arg(long, default_value_t = 0)]
    instance: usize,
    /// Training config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output classifier weights (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Sweep config (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus: "standard" or "stars".
    #[arg(long)]
    suite: Option<String>,
    /// Swept axis, e.g. iterations=1,2,3,4. Repeatable.
    #[arg(long)]
    sweep: Vec<String>,
    /// Corpus seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Oracle sharpness in px (0 = hard indicator).
    #[arg(long)]
    tau: Option<f64>,
    /// Report CSV, one row per (shape, config).
    #[arg(long)]
    out: PathBuf,
    /// Wall-clock per config (CSV).
    #[arg(long)]
    timing: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Prediction: polygon JSON or PGM.
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth: polygon JSON or PGM.
    #[arg(long)]
    gt: PathBuf,
    /// Metrics CSV, one row per instance.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// .pgm or .json input.
    #[arg(long)]
    input: PathBuf,
    /// .json or .pgm output.
    #[arg(long)]
    output: PathBuf,
    /// Resample every extracted ring to this many vertices.
    #[arg(long)]
    resample: Option<usize>,
    /// Write plain (P2) instead of binary (P5) PGM.
    #[arg(long)]
    plain: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Polygon JSON; its traces are drawn when present.
    #[arg(long)]
    polygons: PathBuf,
    /// Ground truth (polygon JSON or PGM).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Output SVG.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Errors go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Refine(a) => cmd_refine(a),
        Command::Train(a) => cmd_train(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Render(a) => cmd_render(a),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn load_pgm(path: &Path) -> Result<MaskGrid> {
    read_pgm(path).map_err(|e| match e {
        crate::raster::PgmError::Io(source) => Error::Io { path: path.display().to_string(), source },
        other => Error::Parse(format!("{}: {other}", path.display())),
    })
}

fn load_document(path: &Path) -> Result<PolygonDocument> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    PolygonDocument::parse(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(io_err(path))
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Runtime(e.to_string()))
}

/// An instance id with its region and detector box.
struct LoadedInstance {
    id: u64,
    region: Region,
    bbox: crate::geometry::BBox,
}

/// Instances of a mask (connected regions, top-left first) or a document,
/// plus the canvas size.
fn load_instances(path: &Path) -> Result<(Vec<LoadedInstance>, (usize, usize))> {
    if is_pgm(path) {
        let m = load_pgm(path)?;
        let inst = group_instances(mask_to_contours(&m))
            .into_iter()
            .enumerate()
            .map(|(i, rings)| {
                let region = Region::new(rings);
                LoadedInstance { id: i as u64, bbox: region.bbox(), region }
            })
            .collect();
        Ok((inst, (m.width(), m.height())))
    } else {
        let doc = load_document(path)?;
        let inst = doc
            .instances
            .iter()
            .map(|r| Ok(LoadedInstance { id: r.id, region: r.region()?, bbox: r.math_bbox() }))
            .collect::<Result<Vec<_>>>()?;
        Ok((inst, doc.canvas()))
    }
}

/// Parses the `--oracle` mini-language.
pub fn parse_oracle(spec: &str) -> Result<AnalyticOracle> {
    let bad = |m: &str| Error::Parse(format!("oracle {spec:?}: {m}"));
    let (kind, rest) = spec.split_once(':').ok_or_else(|| bad("expected circle:... or poly:..."))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
    let tau_of = |t: Option<&str>| -> Result<f64> {
        match t {
            None => Ok(0.0),
            Some(t) => {
                let v = num(t)?;
                if v >= 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Config(format!("oracle tau must be >= 0, got {v}")))
                }
            }
        }
    };
    let region = |shape: Region, tau: f64| if tau > 0.0 { AnalyticOracle::new(shape, tau) } else { AnalyticOracle::hard(shape) };
    match kind {
        "circle" => {
            let parts: Vec<&str> = rest.split(',').collect();
            if !(3..=4).contains(&parts.len()) {
                return Err(bad("circle takes cx,cy,r[,tau]"));
            }
            let (cx, cy, r) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("oracle radius must be > 0, got {r}")));
            }
            let tau = tau_of(parts.get(3).copied())?;
            // Dense enough that the sagitta r (1 - cos(pi / n)) stays below 1e-4 px.
            let half_angle = (1.0 - (1e-4 / r).min(1.0)).acos();
            let n = ((std::f64::consts::PI / half_angle).ceil() as usize).clamp(64, 1 << 16);
            Ok(region(Region::from(crate::geometry::regular_polygon(Point2::from_image(cx, cy), r, n, 0.0)), tau))
        }
        "poly" => {
            let (file, tau) = match rest.rsplit_once(',') {
                Some((f, t)) if t.trim().parse::<f64>().is_ok() => (f, tau_of(Some(t))?),
                _ => (rest, 0.0),
            };
            let doc = load_document(Path::new(file))?;
            let rings = doc.instances.iter().map(|i| i.region().map(Region::into_rings)).collect::<Result<Vec<_>>>()?;
            let rings: Vec<Polygon> = rings.into_iter().flatten().collect();
            if rings.is_empty() {
                return Err(bad("polygon file has no instances"));
            }
            Ok(region(Region::new(rings), tau))
        }
        _ => Err(bad("unknown oracle kind")),
    }
}

enum FieldSource {
    Grid(MaskGrid),
    Oracle(AnalyticOracle),
    Ipc { params: IpcParams, grid: FeatureGrid },
}

impl FieldSource {
    fn evolve(&self, rings: &[Polygon], bbox: crate::geometry::BBox, cfg: &EvolutionConfig) -> Result<Vec<EvolutionTrace>> {
        Ok(match self {
            FieldSource::Grid(m) => evolve_rings(rings, &GridField::foreground(m), cfg)?,
            FieldSource::Oracle(o) => evolve_rings(rings, o, cfg)?,
            FieldSource::Ipc { params, grid } => {
                let ctx = InstanceContext::new(bbox, params.clone())?;
                let field: InstanceField<'_> = InstanceField::new(grid, &ctx)?;
                evolve_rings(rings, &field as &dyn ProbabilityField, cfg)?
            }
        })
    }
}

fn load_evolution_config(path: Option<&Path>) -> Result<EvolutionConfig> {
    let cfg: EvolutionConfig = match path {
        Some(p) => read_json(p)?,
        None => EvolutionConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn svg_gt(path: Option<&Path>) -> Result<Vec<Vec<Ring>>> {
    let Some(p) = path else { return Ok(Vec::new()) };
    let (inst, _) = load_instances(p)?;
    Ok(inst.iter().map(|i| i.region.rings().iter().map(ring_from_polygon).collect()).collect())
}

fn svg_instances(doc: &PolygonDocument, gt: Vec<Vec<Ring>>) -> Vec<SvgInstance> {
    let mut out: Vec<SvgInstance> = doc
        .instances
        .iter()
        .map(|r| SvgInstance { gt: Vec::new(), stages: r.trace.clone().unwrap_or_else(|| vec![r.contours.clone()]) })
        .collect();
    for g in gt {
        out.push(SvgInstance { gt: g, stages: Vec::new() });
    }
    out
}

fn cmd_refine(a: RefineArgs) -> Result<()> {
    let cfg = load_evolution_config(a.config.as_deref())?;
    let (initial, canvas) = load_instances(a.mask.as_deref().or(a.polygons.as_deref()).expect("clap enforces one source"))?;
    let field = if let Some(p) = &a.field {
        FieldSource::Grid(load_pgm(p)?)
    } else if let Some(spec) = &a.oracle {
        FieldSource::Oracle(parse_oracle(spec)?)
    } else {
        let params: IpcParams = read_json(a.ipc.as_deref().expect("clap enforces one field"))?;
        let grid: FeatureGrid = read_json(a.features.as_deref().expect("clap requires features with ipc"))?;
        FieldSource::Ipc { params, grid }
    };
    let mut records = Vec::with_capacity(initial.len());
    for inst in &initial {
        let traces = field.evolve(inst.region.rings(), inst.bbox, &cfg)?;
        let finals: Vec<Polygon> = traces.iter().map(|t| t.final_contour().clone()).collect();
        let mut rec = InstanceRecord::from_rings(inst.id, &finals);
        if a.trace {
            let steps = traces.first().map_or(0, |t| t.contours.len());
            rec.trace = Some((0..steps).map(|k| traces.iter().map(|t| ring_from_polygon(&t.contours[k])).collect()).collect());
        }
        records.push(rec);
    }
    let doc = PolygonDocument::new(Some(canvas.0), Some(canvas.1), records);
    write_json(&a.out, &doc)?;
    if let Some(svg) = &a.svg {
        // Without --trace the SVG still shows initial and final contours.
        let mut shown = doc.clone();
        if !a.trace {
            for (rec, inst) in shown.instances.iter_mut().zip(&initial) {
                rec.trace = Some(vec![inst.region.rings().iter().map(ring_from_polygon).collect(), rec.contours.clone()]);
            }
        }
        let body = render_svg(canvas.0, canvas.1, &svg_instances(&shown, svg_gt(a.gt.as_deref())?));
        write_bytes(svg, body.as_bytes())?;
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let mask = load_pgm(&a.mask)?;
    let groups = group_instances(mask_to_contours(&mask));
    let rings = groups
        .get(a.instance)
        .ok_or_else(|| Error::Config(format!("instance {} out of range, mask has {}", a.instance, groups.len())))?;
    let gt = Region::new(rings.clone());
    let bbox = gt.bbox();
    let grid: FeatureGrid = match &a.features {
        Some(p) => read_json(p)?,
        None => {
            let g = synthetic_features(&mask, &SyntheticFeatureConfig::default(), cfg.seed);
            if let Some(p) = &a.write_features {
                write_json(p, &g)?;
            }
            g
        }
    };
    if (grid.width(), grid.height()) != (mask.width(), mask.height()) {
        return Err(Error::Config(format!(
            "feature grid is {}x{}, mask is {}x{}",
            grid.width(),
            grid.height(),
            mask.width(),
            mask.height()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = sample_boundary_points(&gt, &grid, &bbox, &cfg, a.instance, &mut rng)?;
    let p0 = IpcParams::random(grid.channels(), cfg.hidden, &mut rng);
    let (params, log): (IpcParams, TrainingLog) = fit_instance(&p0, &samples, &cfg)?;
    write_json(&a.out, &params)?;
    if let Some(p) = &a.log {
        write_bytes(p, &to_csv(&log)?)?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut sweep: SweepConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SweepConfig::default(),
    };
    if let Some(s) = a.suite {
        sweep.suite = s;
    }
    if let Some(s) = a.seed {
        sweep.corpus_seed = s;
        sweep.perturb.seed = s;
    }
    if let Some(t) = a.tau {
        sweep.oracle_tau = t;
    }
    for axis in &a.sweep {
        sweep.set_axis(axis)?;
    }
    let corpus = sweep.corpus()?;
    let report = run_sweep(&corpus, &sweep)?;
    write_bytes(&a.out, &rows_to_csv(&report.rows))?;
    if let Some(p) = &a.timing {
        write_bytes(p, &timings_to_csv(&report.timings))?;
    }
    Ok(())
}

/// One row of `eval` output.
#[derive(Debug, Serialize)]
struct EvalRow {
    id: u64,
    mask_iou: f64,
    boundary_iou: f64,
    mean_distance: f64,
    median_distance: f64,
    max_distance: f64,
    hausdorff: f64,
    self_intersections: usize,
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let (pred, pc) = load_instances(&a.pred)?;
    let (gt, gc) = load_instances(&a.gt)?;
    let (w, h) = (pc.0.max(gc.0), pc.1.max(gc.1));
    let mut rows = Vec::with_capacity(gt.len());
    for g in &gt {
        let p = pred
            .iter()
            .find(|p| p.id == g.id)
            .ok_or_else(|| Error::Runtime(format!("no prediction for ground-truth instance {}", g.id)))?;
        let r = evaluate(EvalInput { pred: p.region.rings(), gt: g.region.rings(), corners: &[], width: w, height: h, frozen_fraction: 0.0, runtime_ms: 0.0 })?;
        rows.push(EvalRow {
            id: g.id,
            mask_iou: r.mask_iou,
            boundary_iou: r.boundary_iou,
            mean_distance: r.mean_distance,
            median_distance: r.median_distance,
            max_distance: r.max_distance,
            hausdorff: r.hausdorff,
            self_intersections: r.self_intersections,
        });
    }
    write_bytes(&a.out, &to_csv(&rows)?)
}

fn cmd_convert(a: ConvertArgs) -> Result<()> {
    match (is_pgm(&a.input), is_pgm(&a.output)) {
        (true, false) => {
            let m = load_pgm(&a.input)?;
            let mut records = Vec::new();
            for (i, rings) in group_instances(mask_to_contours(&m)).into_iter().enumerate() {
                let rings = match a.resample {
                    Some(n) => rings.iter().map(|r| r.resample(n)).collect::<Result<Vec<_>, _>>()?,
                    None => rings,
                };
                records.push(InstanceRecord::from_rings(i as u64, &rings));
            }
            write_json(&a.output, &PolygonDocument::new(Some(m.width()), Some(m.height()), records))
        }
        (false, true) => {
            let doc = load_document(&a.input)?;
            let (w, h) = doc.canvas();
            let mut rings = Vec::new();
            for inst in &doc.instances {
                rings.extend(inst.region()?.into_rings());
            }
            let m = rasterize(&rings, w, h);
            write_bytes(&a.output, &encode_pgm(&m, if a.plain { PgmFormat::Plain } else { PgmFormat::Binary }))
        }
        _ => Err(Error::Config("convert needs one .pgm and one .json path".into())),
    }
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let doc = load_document(&a.polygons)?;
    let (w, h) = doc.canvas();
    let body = render_svg(w, h, &svg_instances(&doc, svg_gt(a.gt.as_deref())?));
    write_bytes(&a.out, body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_specs() {
        let o = parse_oracle("circle:32,32,10").unwrap();
        assert_eq!(o.tau(), 0.0);
        assert_eq!(o.evaluate(Point2::from_image(32.0, 32.0)), 0.0);
        assert_eq!(o.evaluate(Point2::from_image(32.0, 20.0)), 1.0);
        assert!((o.shape().signed_distance(Point2::from_image(45.0, 32.0)) - 3.0).abs() < 1e-4);
        assert_eq!(parse_oracle("circle:1,2,3,0.5").unwrap().tau(), 0.5);
        for bad in ["circle:1,2", "square:1,2,3", "circle:a,2,3", "nocolon"] {
            assert!(matches!(parse_oracle(bad), Err(Error::Parse(_))), "{bad}");
        }
        assert!(matches!(parse_oracle("circle:1,2,-3"), Err(Error::Config(_))));
        assert!(matches!(parse_oracle("poly:/nonexistent.json"), Err(Error::Io { .. })));
    }

    #[test]
    fn flag_errors_exit_2() {
        assert_eq!(run(["sharpcontour", "refine", "--bogus"]), 2);
        assert_eq!(run(["sharpcontour", "refine", "--out", "x.json", "--oracle", "circle:1,1,1"]), 2);
        assert_eq!(run(["sharpcontour", "--help"]), 0);
    }
}
