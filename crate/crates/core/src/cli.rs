//! The `amflow` command line.
//!
//! Exit codes: 0 on success, 1 for internal or environment failures, 2 for
//! usage errors and malformed input.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;

use crate::baselines::{InfillInput, InfillMethod};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::io;
use crate::metrics::{accumulate_frame, aggregate_reports, level_weights, DEFAULT_K, DEFAULT_NUM_LEVELS, DEFAULT_W_LAST};
use crate::stats::{flow_statistics, FlowStatistics};
use crate::stratify::{stratify, InstanceMaskSet, OcclusionEvidence};
use crate::synthgen::{generate, SceneSpec, ID_MAP_NAME, MODAL_FLOW_NAME};
use crate::tracking::{detections_from_instances, track_and_score, FlowSource, TrackMode, DEFAULT_MIN_IOU};
use crate::viz::composite_visualization;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Environment variable holding the log filter (error, warn, info, debug).
pub const LOG_ENV: &str = "AMFLOW_LOG";

#[derive(Debug, Parser)]
#[command(name = "amflow", version, about = "Amodal optical flow toolkit")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predicted flow stacks against ground truth.
    Eval(EvalArgs),
    /// Render ground truth for a scene file.
    Gen(GenArgs),
    /// Run a non-learned infilling baseline.
    Baseline(BaselineArgs),
    /// Track instances by flow-warping their masks.
    Track(TrackArgs),
    /// Direction and du/dx histograms of modal flow.
    Stats(StatsArgs),
    /// Color-code a layered flow stack.
    Viz(VizArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth root (frame_NNNNNN directories) or a single stack.
    #[arg(long)]
    pub gt: PathBuf,
    /// Prediction root laid out like the ground truth.
    #[arg(long)]
    pub pred: PathBuf,
    /// Number of levels N of the weight schedule.
    #[arg(long, default_value_t = DEFAULT_NUM_LEVELS)]
    pub levels: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_W_LAST)]
    pub w_last: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Render only the first K frames.
    #[arg(long)]
    pub frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// near-boundary, mean or zero.
    #[arg(long)]
    pub method: String,
    /// Root with frame_NNNNNN/modal.flo.
    #[arg(long)]
    pub flow: PathBuf,
    /// Root with frame_NNNNNN/ids.png and inst_<id>_amodal.png.
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// File name inside each flow frame directory holding the level-0 flow,
    /// e.g. level_0.flo; the modal flow is used otherwise.
    #[arg(long)]
    pub background: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Root with frame_NNNNNN/ids.png (and amodal masks for --amodal).
    #[arg(long)]
    pub seg: PathBuf,
    /// Root with frame_NNNNNN/modal.flo, or flow stacks for --amodal.
    #[arg(long)]
    pub flow: PathBuf,
    /// Warp amodal masks with layered flow instead of visible masks with modal flow.
    #[arg(long)]
    pub amodal: bool,
    #[arg(long, default_value_t = DEFAULT_MIN_IOU)]
    pub min_iou: f64,
    /// Track file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Root with frame_NNNNNN/modal.flo, a directory of .flo files, or one .flo file.
    #[arg(long)]
    pub flow: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Root with frame_NNNNNN stack directories.
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub frame: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Parameter("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Io {
            path: PathBuf::new(),
            source: std::io::Error::other(e),
        })?;
    pool.install(|| match cli.command {
        Command::Eval(a) => cmd_eval(&a),
        Command::Gen(a) => cmd_gen(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Track(a) => cmd_track(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Viz(a) => cmd_viz(&a),
    })
}

fn require_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{what} {} does not exist", path.display())))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    io::write_atomic(path, text.as_bytes())
}

fn is_single_stack(path: &Path) -> bool {
    path.is_file() || path.join(io::level_flow_name(0)).is_file()
}

/// Frame directories of `root` that hold a flow stack.
fn stack_frames(root: &Path) -> Result<Vec<(usize, PathBuf)>> {
    Ok(io::list_frame_dirs(root)?
        .into_iter()
        .filter(|(_, dir)| dir.join(io::level_flow_name(0)).is_file())
        .collect())
}

fn format_frames(frames: &[usize]) -> String {
    frames.iter().map(|f| io::frame_dir_name(*f)).collect::<Vec<_>>().join(", ")
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    require_exists(&a.gt, "ground truth")?;
    require_exists(&a.pred, "prediction")?;
    let weights = level_weights(a.levels, a.k, a.w_last)?;

    let pairs: Vec<(PathBuf, PathBuf)> = if is_single_stack(&a.gt) {
        vec![(a.gt.clone(), a.pred.clone())]
    } else {
        let gt = stack_frames(&a.gt)?;
        if gt.is_empty() {
            return Err(Error::Format(format!("{}: no ground-truth frames", a.gt.display())));
        }
        let missing: Vec<usize> = gt
            .iter()
            .filter(|(f, _)| !a.pred.join(io::frame_dir_name(*f)).join(io::level_flow_name(0)).is_file())
            .map(|(f, _)| *f)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Format(format!(
                "{}: missing predicted frames: {}",
                a.pred.display(),
                format_frames(&missing)
            )));
        }
        gt.into_iter()
            .map(|(f, dir)| (dir, a.pred.join(io::frame_dir_name(f))))
            .collect()
    };
    info!("evaluating {} frame(s)", pairs.len());
    let accs = pairs
        .par_iter()
        .map(|(g, p)| accumulate_frame(&io::read_stack(p)?, &io::read_stack(g)?))
        .collect::<Result<Vec<_>>>()?;
    let report = aggregate_reports(&accs, &weights)?;
    print!("{}", report.to_table());
    if let Some(path) = &a.json {
        write_text(path, &report.to_json())?;
    }
    Ok(())
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    require_exists(&a.scene, "scene file")?;
    let mut scene = SceneSpec::load(&a.scene)?;
    if let Some(k) = a.frames {
        scene = scene.truncated(k)?;
    }
    let manifest = generate(&scene, &a.out)?;
    let pairs = manifest.frames.iter().filter(|f| f.has_flow).count();
    println!(
        "wrote {} frames ({} flow pairs) to {}",
        manifest.frame_count,
        pairs,
        a.out.display()
    );
    Ok(())
}

fn read_instances(dir: &Path) -> Result<(crate::raster::IdMap, InstanceMaskSet)> {
    let ids = io::read_id_png(dir.join(ID_MAP_NAME))?;
    let amodal = io::read_amodal_masks(dir)?;
    let set = InstanceMaskSet::from_id_map(&ids, &amodal)?;
    Ok((ids, set))
}

pub fn cmd_baseline(a: &BaselineArgs) -> Result<()> {
    let method: InfillMethod = a.method.parse()?;
    require_exists(&a.flow, "flow root")?;
    require_exists(&a.masks, "mask root")?;
    let frames: Vec<(usize, PathBuf)> = io::list_frame_dirs(&a.flow)?
        .into_iter()
        .filter(|(_, d)| d.join(MODAL_FLOW_NAME).is_file())
        .collect();
    if frames.is_empty() {
        return Err(Error::Format(format!("{}: no frames with {MODAL_FLOW_NAME}", a.flow.display())));
    }
    frames.par_iter().try_for_each(|(f, flow_dir)| -> Result<()> {
        let mask_dir = a.masks.join(io::frame_dir_name(*f));
        let modal = io::read_flo(flow_dir.join(MODAL_FLOW_NAME))?;
        let background: Option<FlowField> = a
            .background
            .as_ref()
            .map(|name| io::read_flo(flow_dir.join(name)))
            .transpose()?;
        let (ids, set) = read_instances(&mask_dir)?;
        let graph = stratify(&set, OcclusionEvidence::Winner(&ids))?;
        let input = InfillInput::new(&modal, background.as_ref(), &set, &graph)?;
        let stack = method.run(&input)?;
        io::write_stack_dir(&stack, a.out.join(io::frame_dir_name(*f)))
    })?;
    println!("{}: wrote {} frame(s) to {}", method.name(), frames.len(), a.out.display());
    Ok(())
}

enum LoadedFlow {
    Modal(FlowField),
    Amodal(crate::flow::LayeredFlowStack),
}

pub fn cmd_track(a: &TrackArgs) -> Result<()> {
    require_exists(&a.seg, "segmentation root")?;
    require_exists(&a.flow, "flow root")?;
    let mode = if a.amodal { TrackMode::Amodal } else { TrackMode::Modal };
    let seg_frames: Vec<(usize, PathBuf)> = io::list_frame_dirs(&a.seg)?
        .into_iter()
        .filter(|(_, d)| d.join(ID_MAP_NAME).is_file())
        .collect();
    if seg_frames.is_empty() {
        return Err(Error::Format(format!("{}: no segmentation frames", a.seg.display())));
    }
    for w in seg_frames.windows(2) {
        if w[1].0 != w[0].0 + 1 {
            return Err(Error::Format(format!(
                "segmentation frames are not consecutive: {} follows {}",
                io::frame_dir_name(w[1].0),
                io::frame_dir_name(w[0].0)
            )));
        }
    }
    let flow_file = |f: usize| {
        let dir = a.flow.join(io::frame_dir_name(f));
        match mode {
            TrackMode::Modal => dir.join(MODAL_FLOW_NAME),
            TrackMode::Amodal => dir.join(io::level_flow_name(0)),
        }
    };
    let missing: Vec<usize> = seg_frames[..seg_frames.len() - 1]
        .iter()
        .map(|(f, _)| *f)
        .filter(|&f| !flow_file(f).is_file())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Format(format!(
            "{}: missing flow for frames {}",
            a.flow.display(),
            format_frames(&missing)
        )));
    }

    let detections = seg_frames
        .par_iter()
        .map(|(f, dir)| {
            let ids = io::read_id_png(dir.join(ID_MAP_NAME))?;
            let amodal = io::read_amodal_masks(dir)?;
            if mode == TrackMode::Amodal && amodal.is_empty() && ids.data().iter().any(|&id| id != 0) {
                return Err(Error::Format(format!(
                    "{}: amodal tracking needs inst_<id>_amodal.png masks",
                    io::frame_dir_name(*f)
                )));
            }
            let set = InstanceMaskSet::from_id_map(&ids, &amodal)?;
            Ok(detections_from_instances(&set, mode))
        })
        .collect::<Result<Vec<_>>>()?;
    let flows = seg_frames[..seg_frames.len() - 1]
        .par_iter()
        .map(|(f, _)| match mode {
            TrackMode::Modal => io::read_flo(flow_file(*f)).map(LoadedFlow::Modal),
            TrackMode::Amodal => io::read_stack_dir(a.flow.join(io::frame_dir_name(*f))).map(LoadedFlow::Amodal),
        })
        .collect::<Result<Vec<_>>>()?;
    let sources: Vec<FlowSource<'_>> = flows
        .iter()
        .map(|f| match f {
            LoadedFlow::Modal(m) => FlowSource::Modal(m),
            LoadedFlow::Amodal(s) => FlowSource::Amodal(s),
        })
        .collect();
    let mut report = track_and_score(&detections, &sources, mode, a.min_iou)?;
    for (frame, (f, _)) in report.frames.iter_mut().zip(&seg_frames) {
        frame.frame = *f;
    }
    let mut json = serde_json::to_string_pretty(&report).expect("track report serializes");
    json.push('\n');
    write_text(&a.out, &json)?;
    println!(
        "association_accuracy {:.6}\nid_switches {}\nchecks {}",
        report.score.association_accuracy, report.score.id_switches, report.score.checks
    );
    Ok(())
}

fn flo_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "flo") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn cmd_stats(a: &StatsArgs) -> Result<()> {
    require_exists(&a.flow, "flow path")?;
    let files = if a.flow.is_file() {
        vec![a.flow.clone()]
    } else {
        let frames: Vec<PathBuf> = io::list_frame_dirs(&a.flow)?
            .into_iter()
            .map(|(_, d)| d.join(MODAL_FLOW_NAME))
            .filter(|p| p.is_file())
            .collect();
        if frames.is_empty() {
            flo_files(&a.flow)?
        } else {
            frames
        }
    };
    if files.is_empty() {
        return Err(Error::Format(format!("{}: no flow files", a.flow.display())));
    }
    let parts = files
        .par_iter()
        .map(|p| io::read_flo(p).map(|f| flow_statistics(&f)))
        .collect::<Result<Vec<_>>>()?;
    let mut stats = FlowStatistics::default();
    for p in &parts {
        stats.merge(p);
    }
    write_text(&a.out, &stats.to_csv())?;
    println!("{} field(s), {} vectors", files.len(), stats.du_dx.total());
    Ok(())
}

pub fn cmd_viz(a: &VizArgs) -> Result<()> {
    require_exists(&a.stack, "stack root")?;
    let dir = a.stack.join(io::frame_dir_name(a.frame));
    if !dir.join(io::level_flow_name(0)).is_file() {
        let available: Vec<usize> = stack_frames(&a.stack)?.into_iter().map(|(f, _)| f).collect();
        return Err(Error::Parameter(format!(
            "frame {} not found in {} ({} frame(s) available)",
            a.frame,
            a.stack.display(),
            available.len()
        )));
    }
    let stack = io::read_stack_dir(&dir)?;
    let img = composite_visualization(&stack);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    io::write_rgb_png(&img, &a.out)
}
