//! Command implementations behind the `mrlayout` binary.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mrlayout::evalstats::{analyze, read_ratings_csv};
use mrlayout::objectives::{ObjectiveConfig, Term, WeightConfig};
use mrlayout::perception::{
    load_camera, load_detections, merge_detection, read_point_cloud, segment_box, SegmentParams, DEFAULT_MERGE_IOU,
};
use mrlayout::presets::Preset;
use mrlayout::reasoning::{
    aggregate_ratings, parse_response, ratings_to_entity, ratings_to_json, run_instances, AreaAnnotation,
    FewShotExample, HttpConfig, HttpProvider, MockProvider, RatingMode, RatingProvider, RatingQuery,
};
use mrlayout::render::{render_svg, View};
use mrlayout::scene::{load_entities, load_layout, load_scene, save_entities, save_layout, EntityRecord, Layout, Scene};
use mrlayout::solver::{optimize, SolverConfig, SolverError};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 1,
    Input = 2,
    Provider = 3,
    Infeasible = 4,
}

/// An error tagged with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn fail(exit: Exit) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { exit, error }
}

trait Tag<T> {
    fn tag(self, exit: Exit) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn tag(self, exit: Exit) -> Result<T, Failure> {
        self.map_err(|e| Failure { exit, error: e.into() })
    }
}

type Outcome = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "mrlayout", version, about = "Situation-aware layout optimization for mixed-reality UIs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize element positions for a scene.
    Optimize(OptimizeArgs),
    /// Turn a point cloud and 2D detections into entity boxes.
    Segment(SegmentArgs),
    /// Query a rating model for highlighted image areas and aggregate the answers.
    Rate(RateArgs),
    /// Compare model and participant ratings.
    Analyze(AnalyzeArgs),
    /// Draw a scene and layout as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub scene: PathBuf,
    /// Named weight preset.
    #[arg(long, conflicts_with = "weights_file", required_unless_present = "weights_file")]
    pub preset: Option<Preset>,
    /// JSON weights file (`{"weights": {...}, "overrides": {...}}`).
    #[arg(long)]
    pub weights_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rays per element side.
    #[arg(long, default_value_t = mrlayout::geometry::DEFAULT_GRID_N)]
    pub grid: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    /// Replace the scene's entities with this entities file (unset ratings become 0.5).
    #[arg(long)]
    pub entities: Option<PathBuf>,
    /// Previous layout to start from.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Squared-displacement weight relative to the warm start.
    #[arg(long, default_value_t = 0.0)]
    pub displacement_weight: f64,
    /// Layout output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cost report output (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-iteration best objective, JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Top-view SVG of the result.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Point cloud (.xyz text or ASCII .ply).
    pub cloud: PathBuf,
    /// Camera intrinsics and pose (JSON).
    pub camera: PathBuf,
    /// 2D detections (JSON list).
    pub detections: PathBuf,
    /// Existing entities to merge into.
    #[arg(long)]
    pub entities: Option<PathBuf>,
    /// Entities output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MERGE_IOU)]
    pub iou: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 10)]
    pub min_pts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProviderKind {
    Mock,
    Live,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Image reference passed to the provider.
    pub image: String,
    /// JSON file `{"areas": [{index, box, entity_id?}, ...]}`.
    pub areas: PathBuf,
    #[arg(long, default_value = "overlay")]
    pub mode: RatingMode,
    #[arg(long, default_value_t = 1)]
    pub instances: usize,
    /// Seed of the first instance; instance k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "mock")]
    pub provider: ProviderKind,
    /// Mock responses (`{"responses": [{image, mode, seed, text}]}`).
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Few-shot examples (`{"examples": [{image, areas: [{median, sd}]}]}`).
    #[arg(long)]
    pub few_shot: Option<PathBuf>,
    /// Append the note about monitors showing content.
    #[arg(long)]
    pub monitor_refinement: bool,
    /// Area-to-entity links (`{"1": "monitor-1", ...}`); overrides `entity_id` in the areas file.
    #[arg(long)]
    pub links: Option<PathBuf>,
    /// Entities file whose linked ratings are updated.
    #[arg(long, requires = "entities_out")]
    pub entities: Option<PathBuf>,
    #[arg(long, requires = "entities")]
    pub entities_out: Option<PathBuf>,
    /// Concurrent provider requests.
    #[arg(long, default_value_t = 4)]
    pub in_flight: usize,
    /// Aggregated ratings output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Ratings CSV: rater_id, population, scenario, area, score[, category][, question].
    pub csv: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub scene: PathBuf,
    pub layout: Option<PathBuf>,
    /// Replace the scene's entities with this entities file.
    #[arg(long)]
    pub entities: Option<PathBuf>,
    #[arg(long, default_value = "top")]
    pub view: View,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Segment(a) => cmd_segment(&a),
        Command::Rate(a) => cmd_rate(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Render(a) => cmd_render(&a),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).tag(Exit::Input)
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).tag(Exit::Input),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scene_with(scene: &Path, entities: Option<&Path>) -> Result<Scene, Failure> {
    let s: Scene = load_scene(&read(scene)?).with_context(|| format!("loading {}", scene.display())).tag(Exit::Input)?;
    let Some(path) = entities else { return Ok(s) };
    let records: Vec<EntityRecord> =
        load_entities(&read(path)?).with_context(|| format!("loading {}", path.display())).tag(Exit::Input)?;
    let ents = records.iter().map(|r| r.to_entity_or(0.5)).collect::<Result<Vec<_>, _>>().tag(Exit::Input)?;
    s.with_entities(ents).tag(Exit::Input)
}

pub fn cmd_optimize(a: &OptimizeArgs) -> Outcome {
    let scene = load_scene_with(&a.scene, a.entities.as_deref())?;
    let weights: WeightConfig = match (&a.preset, &a.weights_file) {
        (Some(p), _) => p.weights(),
        (None, Some(path)) => {
            WeightConfig::from_json(&read(path)?).with_context(|| format!("loading {}", path.display())).tag(Exit::Input)?
        }
        (None, None) => return Err(fail(Exit::Usage)(anyhow!("either --preset or --weights-file is required"))),
    };
    if a.grid == 0 {
        return Err(fail(Exit::Usage)(anyhow!("--grid must be at least 1")));
    }
    let warm_start = match &a.warm_start {
        Some(p) => Some(load_layout(&read(p)?, &scene).with_context(|| format!("loading {}", p.display())).tag(Exit::Input)?),
        None => None,
    };
    let objective = ObjectiveConfig::new(weights).with_grid(a.grid);
    let config = SolverConfig {
        seed: a.seed,
        restarts: a.restarts,
        iterations: a.iterations,
        warm_start,
        displacement_weight: a.displacement_weight,
        ..SolverConfig::default()
    };
    let sol = optimize(&scene, &objective, &config).map_err(|e| {
        let exit = match e {
            SolverError::InfeasibleBounds => Exit::Infeasible,
            SolverError::InvalidConfig(_) => Exit::Usage,
            _ => Exit::Input,
        };
        fail(exit)(anyhow::Error::new(e).context("optimization failed"))
    })?;
    emit(a.out.as_deref(), &save_layout(&sol.layout, &scene).tag(Exit::Input)?)?;
    if let Some(p) = &a.report {
        emit(Some(p), &sol.report.to_json())?;
    }
    if let Some(p) = &a.trace {
        emit(Some(p), &sol.trace_jsonl())?;
    }
    if let Some(p) = &a.svg {
        emit(Some(p), &render_svg(&scene, Some(&sol.layout), View::Top).tag(Exit::Input)?)?;
    }
    if a.out.is_some() {
        eprintln!(
            "Q = {:.6} (overlay {:.6}, interaction {:.6}), best restart {}",
            sol.report.total,
            sol.report.term_total(Term::OverlaySuitability),
            sol.report.term_total(Term::InteractionSuitability),
            sol.best_restart
        );
    }
    Ok(())
}

pub fn cmd_segment(a: &SegmentArgs) -> Outcome {
    let cloud = read_point_cloud::<f64>(&a.cloud).tag(Exit::Input)?;
    let cam = load_camera::<f64>(&read(&a.camera)?, &a.camera.display().to_string()).tag(Exit::Input)?;
    let dets = load_detections::<f64>(&read(&a.detections)?, &a.detections.display().to_string()).tag(Exit::Input)?;
    let params = SegmentParams { eps: a.eps, min_pts: a.min_pts, ..SegmentParams::default() };
    if !(0.0..=1.0).contains(&a.iou) {
        return Err(fail(Exit::Usage)(anyhow!("--iou must lie in [0, 1]")));
    }
    let existing: Vec<EntityRecord> = match &a.entities {
        Some(p) => load_entities(&read(p)?).with_context(|| format!("loading {}", p.display())).tag(Exit::Input)?,
        None => Vec::new(),
    };
    let mut entities = existing.iter().map(|r| r.to_entity_or(0.5)).collect::<Result<Vec<_>, _>>().tag(Exit::Input)?;
    for det in &dets {
        match segment_box(&cloud, &cam, det, &params).tag(Exit::Input)? {
            Some(cand) => entities = merge_detection(&entities, &cand, a.iou),
            None => eprintln!("warning: no cluster found for detection `{}`", det.label()),
        }
    }
    // Ratings come from the reasoning step; only carried-over entities keep theirs.
    let prior: BTreeMap<&str, &EntityRecord> = existing.iter().map(|r| (r.id.as_str(), r)).collect();
    let records: Vec<EntityRecord> = entities
        .iter()
        .map(|e| {
            let mut r = EntityRecord::from_entity(e);
            match prior.get(e.id()) {
                Some(old) => {
                    r.overlay_rating = old.overlay_rating;
                    r.interaction_rating = old.interaction_rating;
                }
                None => {
                    r.overlay_rating = None;
                    r.interaction_rating = None;
                }
            }
            r
        })
        .collect();
    emit(a.out.as_deref(), &save_entities(&records))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AreasDoc {
    areas: Vec<AreaAnnotation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FewShotDoc {
    examples: Vec<FewShotExample>,
}

fn parse_json<D: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<D, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).with_context(|| format!("parsing {}", path.display())).tag(Exit::Input)
}

pub fn cmd_rate(a: &RateArgs) -> Outcome {
    if a.instances == 0 {
        return Err(fail(Exit::Usage)(anyhow!("--instances must be at least 1")));
    }
    let areas: AreasDoc = parse_json(&read(&a.areas)?, &a.areas)?;
    let few_shot = match &a.few_shot {
        Some(p) => parse_json::<FewShotDoc>(&read(p)?, p)?.examples,
        None => Vec::new(),
    };
    let query = RatingQuery {
        mode: a.mode,
        image: a.image.clone(),
        areas: areas.areas,
        few_shot,
        monitor_refinement: a.monitor_refinement,
    };
    query.validate().tag(Exit::Input)?;
    let provider: Box<dyn RatingProvider> = match a.provider {
        ProviderKind::Mock => {
            let path = a.fixtures.as_ref().ok_or_else(|| fail(Exit::Usage)(anyhow!("--provider mock needs --fixtures")))?;
            Box::new(MockProvider::from_json(&read(path)?).tag(Exit::Input)?)
        }
        ProviderKind::Live => Box::new(HttpProvider::new(HttpConfig::from_env().tag(Exit::Provider)?)),
    };
    let requests: Vec<_> = (0..a.instances as u64).map(|k| query.request(a.seed + k)).collect();
    let answers = run_instances(provider.as_ref(), &requests, a.in_flight).tag(Exit::Provider)?;
    let mut parsed = Vec::new();
    for (req, answer) in requests.iter().zip(answers) {
        let text = answer.with_context(|| format!("instance with seed {}", req.seed)).tag(Exit::Provider)?;
        match parse_response(&text) {
            Ok(out) => {
                for d in &out.diagnostics {
                    eprintln!("seed {}: {d}", req.seed);
                }
                parsed.push(out.responses);
            }
            Err(e) => eprintln!("seed {}: discarded: {e}", req.seed),
        }
    }
    if parsed.is_empty() {
        return Err(fail(Exit::Provider)(anyhow!("no instance returned a usable answer")));
    }
    let aggregates = aggregate_ratings(&parsed);
    emit(a.out.as_deref(), &ratings_to_json(a.mode, &aggregates))?;

    if let (Some(inp), Some(out)) = (&a.entities, &a.entities_out) {
        let mut links: BTreeMap<u32, String> =
            query.areas.iter().filter_map(|ar| ar.entity_id.clone().map(|id| (ar.index, id))).collect();
        if let Some(p) = &a.links {
            let extra: BTreeMap<u32, String> = parse_json(&read(p)?, p)?;
            links.extend(extra);
        }
        let records: Vec<EntityRecord> =
            load_entities(&read(inp)?).with_context(|| format!("loading {}", inp.display())).tag(Exit::Input)?;
        let ents = records.iter().map(|r| r.to_entity_or(0.5)).collect::<Result<Vec<_>, _>>().tag(Exit::Input)?;
        let update = ratings_to_entity(&aggregates, &links, a.mode, &ents).tag(Exit::Input)?;
        for msg in &update.unlinked {
            eprintln!("warning: {msg}");
        }
        let rated: std::collections::BTreeSet<&str> =
            aggregates.iter().filter_map(|g| links.get(&g.area).map(String::as_str)).collect();
        // Ratings this run did not produce stay as they were, including unset ones.
        let out_records: Vec<EntityRecord> = records
            .iter()
            .zip(&update.entities)
            .map(|(old, e)| {
                let mut r = EntityRecord::from_entity(e);
                let fresh = rated.contains(e.id());
                if a.mode != RatingMode::Overlay || !fresh {
                    r.overlay_rating = old.overlay_rating;
                }
                if a.mode != RatingMode::Interaction || !fresh {
                    r.interaction_rating = old.interaction_rating;
                }
                r
            })
            .collect();
        emit(Some(out), &save_entities(&out_records))?;
    }
    Ok(())
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Outcome {
    let records = read_ratings_csv(&read(&a.csv)?).with_context(|| format!("reading {}", a.csv.display())).tag(Exit::Input)?;
    if a.iterations == 0 {
        return Err(fail(Exit::Usage)(anyhow!("--iterations must be at least 1")));
    }
    let report = analyze(&records, a.iterations, a.seed).tag(Exit::Input)?;
    emit(a.out.as_deref(), &report.to_json())
}

pub fn cmd_render(a: &RenderArgs) -> Outcome {
    let scene = load_scene_with(&a.scene, a.entities.as_deref())?;
    let layout: Option<Layout> = match &a.layout {
        Some(p) => Some(load_layout(&read(p)?, &scene).with_context(|| format!("loading {}", p.display())).tag(Exit::Input)?),
        None => None,
    };
    emit(a.out.as_deref(), &render_svg(&scene, layout.as_ref(), a.view).tag(Exit::Input)?)
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Usage as i32 } else { Exit::Ok as i32 };
        }
    };
    match run(cli) {
        Ok(()) => Exit::Ok as i32,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit as i32
        }
    }
}
