use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seamtrack_core::assignment::{ConstraintSet, CostMatrix, Gate};
use seamtrack_core::geometry::straighten_frame;
use seamtrack_core::graphs::{score_hypotheses, GraphKind};
use seamtrack_core::io::{
    read_nuclei, read_truth, track_rows, write_atomic, write_nuclei, write_seams,
    write_straightened, write_tracks, write_truth, Config, IoError, Sequence, StraightenedRow,
};
use seamtrack_core::metrics::{
    evaluate_detections, format_accuracy_table, format_detection_report, frame_accuracy, gate_label, summarize,
    AccuracyRow,
};
use seamtrack_core::synth::{generate, TruthRow};
use seamtrack_core::tracking::{
    gate_serde, space_position, straighten_sequence, track_frame_pair, track_sequence, CoordinateSpace, Method,
    TrackConfig, TrackError,
};
use seamtrack_core::{NucleusRecord, Vec3};
use seamtrack_service::{Defaults, SessionManager};

use crate::bench;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<TrackError> for CliError {
    fn from(e: TrackError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpaceArg {
    Raw,
    Straightened,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Gnn,
    Murty,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GraphArg {
    Radius,
    Delaunay,
}

fn parse_gate(s: &str) -> Result<f64, String> {
    gate_serde::parse(s)
}

/// Options shared by every subcommand; they override the config file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Gate in μm, or `inf` for no gate.
    #[arg(long, global = true, value_parser = parse_gate)]
    pub gate: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub space: Option<SpaceArg>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// Number of LAP hypotheses to rank.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub graph: Option<GraphArg>,
    /// Radius-graph edge length limit (μm).
    #[arg(long = "radius-um", global = true)]
    pub radius_um: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Parser)]
#[command(name = "seamtrack", version, about = "Seam-cell untwisting and nucleus tracking")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Straighten nuclei against their frame's seam cells.
    Untwist {
        #[arg(long)]
        nuclei: PathBuf,
        #[arg(long)]
        seams: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a sequence; the first frame's ids seed the tracks.
    Track {
        #[arg(long)]
        nuclei: PathBuf,
        /// Seam table; required in straightened space.
        #[arg(long)]
        seams: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Truth table; prints per-pair accuracy when given.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Name unmatched detections automatically.
        #[arg(long)]
        auto_name: bool,
        /// Also write the accuracy report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank the K best assignments of one frame pair.
    Kbest {
        #[arg(long)]
        nuclei: PathBuf,
        #[arg(long)]
        seams: Option<PathBuf>,
        /// Previous frame number; its records must carry ids. Defaults to the first frame.
        #[arg(long)]
        from: Option<usize>,
        /// Current frame number. Defaults to the frame after `--from`.
        #[arg(long)]
        to: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score detections against true centroids.
    Evaluate {
        #[arg(long)]
        detections: PathBuf,
        /// Nuclei table of true centroids.
        #[arg(long)]
        truth: PathBuf,
        /// Matching radius (μm); defaults to the config's metrics radius.
        #[arg(long = "match-radius-um")]
        match_radius_um: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a simulated dataset: nuclei.csv, seams.csv, truth.csv.
    Simulate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Run the session service.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Run the simulator scenarios and print their measurements.
    Bench {
        /// Smaller scenarios.
        #[arg(long)]
        quick: bool,
    },
}

/// The config file (or defaults) with command-line overrides applied.
pub fn resolve_config(common: &Common) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let t = &mut cfg.tracking;
    if let Some(g) = common.gate {
        t.gate_um = g;
    }
    if let Some(s) = common.space {
        t.coordinate_space = match s {
            SpaceArg::Raw => CoordinateSpace::Raw,
            SpaceArg::Straightened => CoordinateSpace::Straightened,
        };
    }
    if let Some(m) = common.method {
        t.method = match m {
            MethodArg::Gnn => Method::Gnn,
            MethodArg::Murty => Method::MurtyRescore,
        };
    }
    if let Some(k) = common.k {
        t.k = k;
    }
    if let Some(g) = common.graph {
        t.graph.kind = match g {
            GraphArg::Radius => GraphKind::Radius,
            GraphArg::Delaunay => GraphKind::Delaunay,
        };
    }
    if let Some(r) = common.radius_um {
        t.graph.radius_um = r;
    }
    if let Some(seed) = common.seed {
        cfg.synth.seed = seed;
    }
    cfg.tracking.validate().map_err(CliError::Validation)?;
    Ok(cfg)
}

fn load_sequence(nuclei: &Path, seams: Option<&Path>, space: CoordinateSpace) -> Result<Sequence, CliError> {
    if space == CoordinateSpace::Straightened && seams.is_none() {
        return Err(CliError::Validation(
            "tracking in straightened space needs a seam table (--seams), or use --space raw".into(),
        ));
    }
    Ok(Sequence::load(nuclei, seams)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => Ok(write_atomic(path, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn untwist(nuclei: &Path, seams: &Path, out: &Path, cfg: &Config) -> Result<(), CliError> {
    let seq = Sequence::load(nuclei, Some(seams))?;
    let seams = seq.seams.as_ref().expect("loaded with seams");
    let mut rows = Vec::new();
    for (frame, seam) in seq.frames.iter().zip(seams) {
        for (j, (record, coord)) in straighten_frame(frame, seam, &cfg.geometry)
            .map_err(|e| CliError::Validation(e.to_string()))?
            .into_iter()
            .enumerate()
        {
            rows.push(StraightenedRow {
                record,
                detection_index: j,
                coord,
            });
        }
    }
    Ok(write_straightened(out, &rows)?)
}

/// Truth ids per frame number, in detection order.
fn truth_by_frame(rows: &[TruthRow]) -> BTreeMap<usize, Vec<String>> {
    let mut by_frame: BTreeMap<usize, BTreeMap<usize, String>> = BTreeMap::new();
    for r in rows {
        by_frame.entry(r.frame).or_default().insert(r.detection_index, r.id.clone());
    }
    by_frame
        .into_iter()
        .map(|(f, ids)| (f, ids.into_values().collect()))
        .collect()
}

fn method_label(cfg: &TrackConfig) -> String {
    match cfg.method {
        Method::Gnn => "gnn".into(),
        Method::MurtyRescore => format!("murty k={}", cfg.k),
    }
}

#[allow(clippy::too_many_arguments)]
fn track(
    nuclei: &Path,
    seams: Option<&Path>,
    out: &Path,
    truth: Option<&Path>,
    auto_name: bool,
    report: Option<&Path>,
    cfg: &Config,
) -> Result<(), CliError> {
    let mut tcfg = cfg.tracking.clone();
    tcfg.auto_name |= auto_name;
    let seq = load_sequence(nuclei, seams, tcfg.coordinate_space)?;
    let result = track_sequence(&seq.frames, seq.seams.as_deref(), &tcfg, &cfg.geometry)?;
    write_tracks(out, &track_rows(&result.frames, &seq.frame_numbers, &result.track_set))?;
    let Some(truth) = truth else { return Ok(()) };
    let truth = truth_by_frame(&read_truth(truth)?);
    let mut accuracies = Vec::new();
    for t in 1..seq.frames.len() {
        let (fp, fc) = (seq.frame_numbers[t - 1], seq.frame_numbers[t]);
        let (Some(prev), Some(curr)) = (truth.get(&fp), truth.get(&fc)) else {
            return Err(CliError::Validation(format!("truth table lacks frame {fp} or {fc}")));
        };
        if curr.len() != result.frames[t].len() {
            return Err(CliError::Validation(format!(
                "frame {fc}: truth has {} rows, nuclei table {}",
                curr.len(),
                result.frames[t].len()
            )));
        }
        let predicted: Vec<Option<String>> = result.frames[t].iter().map(|r| r.id.clone()).collect();
        let prev_ids: HashSet<String> = prev.iter().cloned().collect();
        accuracies.push(frame_accuracy(&predicted, curr, &prev_ids));
    }
    let Some(summary) = summarize(&accuracies) else {
        return Err(CliError::Validation("accuracy needs at least two frames".into()));
    };
    let mut text = format_accuracy_table(&[AccuracyRow {
        method: method_label(&tcfg),
        gate: gate_label(tcfg.gate_um),
        summary: summary.clone(),
    }]);
    text.push_str("pair accuracies:");
    for (t, a) in summary.per_pair_accuracies.iter().enumerate() {
        let _ = write!(text, " {}->{}:{a:.3}", seq.frame_numbers[t], seq.frame_numbers[t + 1]);
    }
    text.push('\n');
    print!("{text}");
    if let Some(path) = report {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn kbest(
    nuclei: &Path,
    seams: Option<&Path>,
    from: Option<usize>,
    to: Option<usize>,
    out: Option<&Path>,
    cfg: &Config,
) -> Result<(), CliError> {
    let tcfg = &cfg.tracking;
    let seq = load_sequence(nuclei, seams, tcfg.coordinate_space)?;
    let position = |f: usize| {
        seq.frame_numbers
            .iter()
            .position(|&n| n == f)
            .ok_or_else(|| CliError::Validation(format!("{}: no frame {f}", nuclei.display())))
    };
    let a = match from {
        Some(f) => position(f)?,
        None => 0,
    };
    let b = match to {
        Some(f) => position(f)?,
        None => a + 1,
    };
    if b >= seq.len() {
        return Err(CliError::Validation(format!("{}: no frame after {}", nuclei.display(), seq.frame_numbers[a])));
    }
    let frames = match &seq.seams {
        Some(s) if tcfg.coordinate_space == CoordinateSpace::Straightened => {
            straighten_sequence(&[seq.frames[a].clone(), seq.frames[b].clone()], &[s[a].clone(), s[b].clone()], &cfg.geometry)?
        }
        _ => vec![seq.frames[a].clone(), seq.frames[b].clone()],
    };
    let (prev, curr) = (&frames[0], &frames[1]);
    // validates ids and coordinates the same way tracking does
    track_frame_pair(prev, curr, &TrackConfig { method: Method::Gnn, ..tcfg.clone() }, &ConstraintSet::new())?;
    let pos = |records: &[NucleusRecord]| -> Result<Vec<Vec3>, CliError> {
        records
            .iter()
            .enumerate()
            .map(|(i, r)| Ok(space_position(r, tcfg.coordinate_space, i)?))
            .collect()
    };
    let (p, c) = (pos(prev)?, pos(curr)?);
    let cost = CostMatrix::from_positions(&p, &c, &Gate::Uniform(tcfg.gate_um))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let (gp, _) = tcfg.graph.build(&p).map_err(|e| CliError::Validation(e.to_string()))?;
    let (gc, _) = tcfg.graph.build(&c).map_err(|e| CliError::Validation(e.to_string()))?;
    let hyps = score_hypotheses(&cost, &ConstraintSet::new(), tcfg.k, &gp, &gc, tcfg.graph.lambda)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let mut text = String::from("rank,lap_cost,quadratic,score,id,detection_index\n");
    for h in &hyps {
        for (i, j) in h.assignment.track_to_detection.iter().enumerate() {
            let id = prev[i].id().unwrap_or_default();
            let det = j.map(|j| j.to_string()).unwrap_or_default();
            let _ = writeln!(
                text,
                "{},{},{},{},{id},{det}",
                h.rank + 1,
                fmt_cost(h.lap_cost),
                fmt_cost(h.quadratic),
                fmt_cost(h.score)
            );
        }
    }
    emit(out, &text)
}

fn fmt_cost(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        "inf".into()
    }
}

fn evaluate(detections: &Path, truth: &Path, radius: Option<f64>, out: Option<&Path>, cfg: &Config) -> Result<(), CliError> {
    let radius = radius.unwrap_or(cfg.metrics.radius_um);
    if !(radius.is_finite() && radius > 0.0) {
        return Err(CliError::Validation(format!("matching radius must be positive, got {radius}")));
    }
    let group = |records: Vec<NucleusRecord>| {
        let mut by: BTreeMap<usize, Vec<Vec3>> = BTreeMap::new();
        for r in records {
            by.entry(r.frame).or_default().push(r.position);
        }
        by
    };
    let mut dets = group(read_nuclei(detections)?);
    let truth_frames = group(read_nuclei(truth)?);
    let images: Vec<(Vec<Vec3>, Vec<Vec3>)> = truth_frames
        .into_iter()
        .map(|(f, t)| (dets.remove(&f).unwrap_or_default(), t))
        .collect();
    if let Some(f) = dets.keys().next() {
        return Err(CliError::Validation(format!(
            "{}: frame {f} is absent from {}",
            detections.display(),
            truth.display()
        )));
    }
    emit(out, &format_detection_report(&evaluate_detections(&images, radius)))
}

fn simulate(out_dir: &Path, frames: Option<usize>, cfg: &Config) -> Result<(), CliError> {
    let mut scfg = cfg.synth.clone();
    if let Some(n) = frames {
        scfg.n_frames = n;
    }
    let data = generate(&scfg).map_err(|e| CliError::Validation(e.to_string()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    let nuclei: Vec<NucleusRecord> = data.frames.iter().flatten().cloned().collect();
    write_nuclei(&out_dir.join("nuclei.csv"), &nuclei)?;
    write_seams(&out_dir.join("seams.csv"), &data.seams)?;
    write_truth(&out_dir.join("truth.csv"), &data.truth)?;
    println!(
        "wrote {} frames, {} detections, {} dropouts to {}",
        data.frames.len(),
        nuclei.len(),
        data.total_dropouts(),
        out_dir.display()
    );
    Ok(())
}

fn serve(host: Option<String>, port: Option<u16>, data_dir: Option<PathBuf>, cfg: &Config) -> Result<(), CliError> {
    let host = host.unwrap_or_else(|| cfg.service.host.clone());
    let ip: IpAddr = host
        .parse()
        .map_err(|_| CliError::Validation(format!("invalid host address {host:?}")))?;
    let addr = SocketAddr::new(ip, port.unwrap_or(cfg.service.port));
    let defaults = Defaults {
        config: cfg.tracking.clone(),
        geometry: cfg.geometry,
    };
    let manager = Arc::new(SessionManager::new(data_dir.or_else(|| cfg.service.data_dir.clone()), defaults));
    let loaded = manager.load_all().map_err(|e| CliError::Runtime(e.to_string()))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("serving on http://{addr} ({loaded} sessions restored)");
    rt.block_on(seamtrack_service::serve(addr, manager))
        .map_err(|e| CliError::Runtime(format!("{addr}: {e}")))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common)?;
    match cli.command {
        Command::Untwist { nuclei, seams, out } => untwist(&nuclei, &seams, &out, &cfg),
        Command::Track {
            nuclei,
            seams,
            out,
            truth,
            auto_name,
            report,
        } => track(&nuclei, seams.as_deref(), &out, truth.as_deref(), auto_name, report.as_deref(), &cfg),
        Command::Kbest {
            nuclei,
            seams,
            from,
            to,
            out,
        } => kbest(&nuclei, seams.as_deref(), from, to, out.as_deref(), &cfg),
        Command::Evaluate {
            detections,
            truth,
            match_radius_um,
            out,
        } => evaluate(&detections, &truth, match_radius_um, out.as_deref(), &cfg),
        Command::Simulate { out_dir, frames } => simulate(&out_dir, frames, &cfg),
        Command::Serve { host, port, data_dir } => serve(host, port, data_dir, &cfg),
        Command::Bench { quick } => {
            print!("{}", bench::report(quick, cli.common.seed.unwrap_or(0)));
            Ok(())
        }
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
