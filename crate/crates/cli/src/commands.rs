//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use masknav::argmax::{bench, ScoreVolume};
use masknav::error::{Error, Result};
use masknav::fusion::{run_loop, FusionParams, LidarConfig, ObstacleInjection, Pose, SimScenario};
use masknav::geometry::QuadCorrespondence;
use masknav::mask::{to_category_mask, ClassSchema, LabelMask};
use masknav::metrics::{
    confusion, object_level_accuracy, pixel_metrics, ConfusionMatrix, MetricMode, MetricsReport,
    ObjectStat,
};
use masknav::pipeline::{run_pipeline, PipelineConfig};
use masknav::planner::{ApfParams, Trajectory};
use masknav::render::{render_svg, write_field_pgm};
use masknav::scenario::{write_scenarios, ScenarioSpec};

use crate::{EvalMode, HeatField};

fn load_schema(path: Option<PathBuf>) -> Result<ClassSchema> {
    match path {
        Some(path) => ClassSchema::load(path),
        None => Ok(ClassSchema::earthquake_demo()),
    }
}

fn emit(json: &impl Serialize, out: Option<&Path>, pretty: bool) -> Result<()> {
    let text = if pretty {
        serde_json::to_string_pretty(json).expect("report serializes")
    } else {
        serde_json::to_string(json).expect("report serializes")
    };
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| Error::io(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PlanSummary {
    planning_size: [usize; 2],
    start: [f64; 2],
    destination: [usize; 2],
    points: usize,
    smoothed: bool,
    fallback_used: bool,
    steering: masknav::fusion::SteeringCommand,
    trajectory_file: Option<String>,
    overlay_file: Option<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn plan(
    mask: PathBuf,
    schema: Option<PathBuf>,
    calib: Option<PathBuf>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    dump_fields: Option<PathBuf>,
    overlay: bool,
    pretty: bool,
) -> Result<()> {
    let schema = load_schema(schema)?;
    let mask = LabelMask::load(&mask, &schema)?;
    let mut pipeline_config: PipelineConfig = match config {
        Some(path) => {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(calib) = calib {
        pipeline_config.calibration = Some(QuadCorrespondence::load(calib)?);
    }

    let output = run_pipeline(&mask, &schema, &pipeline_config)?;

    let mut trajectory_file = None;
    let mut overlay_file = None;
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let traj_path = dir.join("trajectory.json");
        let text = serde_json::to_string_pretty(&output.trajectory).expect("trajectory serializes");
        fs::write(&traj_path, text).map_err(|e| Error::io(&traj_path, e))?;
        trajectory_file = Some(traj_path.display().to_string());
        if overlay {
            let svg = render_svg(
                &output.planning_mask,
                &schema,
                Some(&output.trajectory),
                None,
            );
            let svg_path = dir.join("overlay.svg");
            fs::write(&svg_path, svg).map_err(|e| Error::io(&svg_path, e))?;
            overlay_file = Some(svg_path.display().to_string());
        }
    }
    if let Some(dir) = &dump_fields {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (w, h) = (output.category.width(), output.category.height());
        write_field_pgm(dir.join("distance.pgm"), output.fields.dist.values(), w, h)?;
        write_field_pgm(dir.join("wavefront.pgm"), output.fields.wave.values(), w, h)?;
        let codes: Vec<u32> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| match output.fields.grad.get(x, y) {
                Some(code) => code as u32,
                None => masknav::fields::INF,
            })
            .collect();
        write_field_pgm(dir.join("gradient.pgm"), &codes, w, h)?;
    }

    let summary = PlanSummary {
        planning_size: [output.category.width(), output.category.height()],
        start: [output.start.x, output.start.y],
        destination: [output.destination.0, output.destination.1],
        points: output.trajectory.points.len(),
        smoothed: output.trajectory.smoothed,
        fallback_used: output.trajectory.fallback_used,
        steering: output.steering,
        trajectory_file,
        overlay_file,
    };
    emit(&summary, None, pretty)
}

#[derive(Serialize)]
#[serde(untagged)]
enum EvalReport {
    Pixel {
        mode: String,
        pairs: usize,
        report: MetricsReport,
    },
    Object {
        mode: String,
        pairs: usize,
        objects: Vec<ObjectStat>,
        detection_rate: Option<f64>,
    },
}

/// Collect evaluation pairs: two files, or two directories matched by
/// filename.
fn collect_pairs(pred: &Path, truth: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    if pred.is_file() {
        return Ok(vec![(pred.to_path_buf(), truth.to_path_buf())]);
    }
    let mut names: Vec<String> = fs::read_dir(pred)
        .map_err(|e| Error::io(pred, e))?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.file_name().to_string_lossy().into_owned())
        .filter(|name| name.ends_with(".pgm") || name.ends_with(".png"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::InvalidParams(format!(
            "no .pgm/.png masks under {}",
            pred.display()
        )));
    }
    names
        .into_iter()
        .map(|name| {
            let t = truth.join(&name);
            if !t.exists() {
                return Err(Error::InvalidParams(format!(
                    "no ground truth for {name} under {}",
                    truth.display()
                )));
            }
            Ok((pred.join(&name), t))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn eval(
    pred: PathBuf,
    truth: PathBuf,
    schema: Option<PathBuf>,
    mode: EvalMode,
    workers: usize,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    pretty: bool,
) -> Result<()> {
    let schema = load_schema(schema)?;
    let pairs = collect_pairs(&pred, &truth)?;
    let workers = workers.max(1);

    // Evaluate pairs across workers into an index-addressed buffer, so the
    // merged result is identical to a serial pass regardless of scheduling.
    enum PairResult {
        Confusion(ConfusionMatrix),
        Objects(Vec<ObjectStat>),
    }
    let evaluate_one = |(pred_path, truth_path): &(PathBuf, PathBuf)| -> Result<PairResult> {
        let pred = LabelMask::load(pred_path, &schema)?;
        let truth = LabelMask::load(truth_path, &schema)?;
        match mode {
            EvalMode::Class | EvalMode::Category => {
                Ok(PairResult::Confusion(confusion(&pred, &truth, &schema)?))
            }
            EvalMode::Object => Ok(PairResult::Objects(
                object_level_accuracy(&pred, &truth, &schema)?.objects,
            )),
        }
    };

    let mut results: Vec<Option<Result<PairResult>>> = Vec::with_capacity(pairs.len());
    results.resize_with(pairs.len(), || None);
    let chunk = pairs.len().div_ceil(workers);
    std::thread::scope(|scope| {
        for (pair_chunk, result_chunk) in pairs.chunks(chunk).zip(results.chunks_mut(chunk)) {
            scope.spawn(|| {
                for (pair, slot) in pair_chunk.iter().zip(result_chunk.iter_mut()) {
                    *slot = Some(evaluate_one(pair));
                }
            });
        }
    });

    let report = match mode {
        EvalMode::Class | EvalMode::Category => {
            let mut total = ConfusionMatrix::zeros(schema.len());
            for result in results {
                match result.expect("every pair evaluated")? {
                    PairResult::Confusion(cm) => total.merge(&cm),
                    PairResult::Objects(_) => unreachable!(),
                }
            }
            let metric_mode = match mode {
                EvalMode::Class => MetricMode::Class,
                _ => MetricMode::Category,
            };
            let report = pixel_metrics(&total, metric_mode, &schema);
            if let Some(path) = &csv {
                write_pixel_csv(path, &report)?;
            }
            EvalReport::Pixel {
                mode: mode_name(mode).into(),
                pairs: pairs.len(),
                report,
            }
        }
        EvalMode::Object => {
            let mut objects = Vec::new();
            for result in results {
                match result.expect("every pair evaluated")? {
                    PairResult::Objects(mut list) => {
                        for (offset, object) in list.iter_mut().enumerate() {
                            object.id = objects.len() + offset;
                        }
                        objects.append(&mut list);
                    }
                    PairResult::Confusion(_) => unreachable!(),
                }
            }
            let detection_rate = (!objects.is_empty()).then(|| {
                objects.iter().filter(|o| o.detected).count() as f64 / objects.len() as f64
            });
            if let Some(path) = &csv {
                write_object_csv(path, &objects, detection_rate)?;
            }
            EvalReport::Object {
                mode: "object".into(),
                pairs: pairs.len(),
                objects,
                detection_rate,
            }
        }
    };
    emit(&report, out.as_deref(), pretty)
}

fn mode_name(mode: EvalMode) -> &'static str {
    match mode {
        EvalMode::Class => "class",
        EvalMode::Category => "category",
        EvalMode::Object => "object",
    }
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or(String::new(), |v| format!("{v:.6}"))
}

fn write_pixel_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut text = String::from("name,tp,fp,fn,tn,iou,global,precision,recall,f1\n");
    for row in &report.per_class {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.name,
            row.tp,
            row.fp,
            row.fn_,
            row.tn,
            fmt_opt(row.iou),
            fmt_opt(row.global),
            fmt_opt(row.precision),
            fmt_opt(row.recall),
            fmt_opt(row.f1),
        ));
    }
    text.push_str(&format!(
        "mean,,,,,{},{},,,\n",
        fmt_opt(report.mean_iou),
        fmt_opt(report.mean_global)
    ));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_object_csv(path: &Path, objects: &[ObjectStat], rate: Option<f64>) -> Result<()> {
    let mut text = String::from("object,size,coverage,detected\n");
    for object in objects {
        text.push_str(&format!(
            "{},{},{:.6},{}\n",
            object.id, object.size, object.coverage, object.detected
        ));
    }
    text.push_str(&format!("detection_rate,,{},\n", fmt_opt(rate)));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn bench_argmax(
    width: usize,
    height: usize,
    channels: usize,
    reps: usize,
    workers: usize,
    seed: u64,
    pretty: bool,
) -> Result<()> {
    let volume = ScoreVolume::random(width, height, channels, seed);
    let report = bench(&volume, reps, workers);
    emit(&report, None, pretty)
}

/// Scenario file: mask and schema by path, everything else inline.
#[derive(Deserialize)]
struct ScenarioFile {
    mask: PathBuf,
    schema: Option<PathBuf>,
    pose: Pose,
    #[serde(default)]
    lidar: LidarConfig,
    lidar_rate: f64,
    mask_rate: f64,
    duration: f64,
    #[serde(default)]
    apf: ApfParams,
    #[serde(default)]
    fusion: FusionParams,
    #[serde(default)]
    injections: Vec<ObstacleInjection>,
}

pub fn simulate(scenario: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(&scenario).map_err(|e| Error::io(&scenario, e))?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", scenario.display())))?;
    let base = scenario.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let schema = load_schema(file.schema.as_deref().map(resolve))?;
    let mask = LabelMask::load(resolve(&file.mask), &schema)?;
    let sim = SimScenario {
        mask,
        schema,
        pose: file.pose,
        lidar: file.lidar,
        lidar_rate: file.lidar_rate,
        mask_rate: file.mask_rate,
        duration: file.duration,
        apf: file.apf,
        fusion: file.fusion,
        injections: file.injections,
    };
    let events = run_loop(&sim)?;

    let mut log = String::new();
    for event in &events {
        log.push_str(&serde_json::to_string(event).expect("event serializes"));
        log.push('\n');
    }
    match out {
        Some(path) => fs::write(&path, log).map_err(|e| Error::io(&path, e)),
        None => std::io::stdout()
            .write_all(log.as_bytes())
            .map_err(|e| Error::io("stdout", e)),
    }
}

pub fn gen_scenarios(spec: ScenarioSpec, count: usize, out: PathBuf) -> Result<()> {
    let manifest = write_scenarios(&spec, count, &out)?;
    println!(
        "{}",
        serde_json::json!({
            "out": out.display().to_string(),
            "count": manifest.count,
            "masks": manifest.masks.iter().map(|m| m.file.clone()).collect::<Vec<_>>(),
        })
    );
    Ok(())
}

pub fn render(
    mask: PathBuf,
    schema: Option<PathBuf>,
    traj: Option<PathBuf>,
    heat: Option<HeatField>,
    out: PathBuf,
) -> Result<()> {
    let schema = load_schema(schema)?;
    let mask = LabelMask::load(&mask, &schema)?;
    let trajectory: Option<Trajectory> = match traj {
        Some(path) => {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let heat_values = heat.map(|field| {
        let cat = to_category_mask(&mask, &schema);
        match field {
            HeatField::Distance => masknav::fields::brushfire(&cat).values().to_vec(),
            HeatField::Wavefront => {
                let dest = masknav::planner::find_local_destination(&cat, &ApfParams::default());
                match dest.map(|d| masknav::fields::wavefront(&cat, d)) {
                    Some(Ok(wave)) => wave.values().to_vec(),
                    _ => vec![masknav::fields::INF; mask.width() * mask.height()],
                }
            }
        }
    });
    let svg = render_svg(&mask, &schema, trajectory.as_ref(), heat_values.as_deref());
    fs::write(&out, svg).map_err(|e| Error::io(&out, e))
}
