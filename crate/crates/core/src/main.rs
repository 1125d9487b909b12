use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use expressdyn::basis::{build_basis_matrix, write_basis_csv};
use expressdyn::beat::{parse_beat, Beat};
use expressdyn::config::{load_score, score_target, PieceSpec, ProjectConfig};
use expressdyn::eval::{format_table, loo_cross_validation, write_report_csv, FoldOutcome};
use expressdyn::loudness::{
    momentary_loudness, normalize_curve, read_alignment_csv, read_loudness_csv, read_wav, write_loudness_csv,
    write_target_csv, DEFAULT_BLOCK,
};
use expressdyn::models::{fit_to_performance, train, write_training_log, Model, PieceRef};
use expressdyn::score::write_dump;
use expressdyn::sensitivity::{render_heatmap, sd_graph, sensitivity_graph, write_graph_csv, HeatmapOptions, SensitivityGraph};
use expressdyn::Error;

/// Score-based models of loudness in recorded performances.
#[derive(Parser)]
#[command(name = "expressdyn", version, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Project file (TOML); its values are defaults for every command.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for training and fitting; overrides the project file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override a project setting, e.g. `--set train.learning_rate=0.05`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a MusicXML score and print its normalized content.
    Parse {
        score: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write the basis-function matrix of a score as CSV plus vocabulary side-car.
    Basis {
        score: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Block-wise K-weighted loudness of a WAV recording.
    Loudness {
        audio: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BLOCK)]
        block: usize,
        #[arg(long, default_value_t = DEFAULT_BLOCK)]
        hop: usize,
        /// Z-normalize the curve.
        #[arg(long)]
        normalize: bool,
    },
    /// Sample normalized loudness at the score's onsets through an alignment.
    Target {
        loudness: PathBuf,
        alignment: PathBuf,
        score: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train the project's model on all its pieces.
    Train {
        /// Project file; defaults to --config.
        project: Option<PathBuf>,
        /// Model file to write; defaults to `<output_dir>/model.json`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Leave-one-out evaluation of the project's models.
    Loo {
        project: Option<PathBuf>,
        /// Report CSV; defaults to `<output_dir>/loo.csv`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Fine-tune a trained model to one performance.
    Fit {
        model: PathBuf,
        /// Piece description (TOML) naming the score or basis and the target.
        piece: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sensitivity graph of a model on a score (CSV and SVG).
    Sens {
        model: PathBuf,
        score: PathBuf,
        /// Output prefix; `.csv` and `.svg` are appended.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        view: View,
    },
    /// Sensitivity difference of two fitted models on one score (CSV and SVG).
    Compare {
        model_a: PathBuf,
        model_b: PathBuf,
        score: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        label_a: Option<String>,
        #[arg(long)]
        label_b: Option<String>,
        #[command(flatten)]
        view: View,
    },
}

#[derive(Args)]
struct View {
    /// Rows in the heatmap.
    #[arg(long)]
    top_k: Option<usize>,
    /// Heatmap window start in beats (`n` or `n/d`).
    #[arg(long, value_parser = beat_arg)]
    from: Option<Beat>,
    /// Heatmap window end in beats, exclusive.
    #[arg(long, value_parser = beat_arg)]
    to: Option<Beat>,
}

fn beat_arg(s: &str) -> Result<Beat, String> {
    parse_beat(s).ok_or_else(|| format!("{s:?} is not a beat (use n or n/d)"))
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, kind: "usage", message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Config(_) => (1, "config"),
            Error::Divergence { .. } => (3, "numerical"),
            _ => (2, "input"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let project_arg = match &cli.command {
        Command::Train { project, .. } | Command::Loo { project, .. } => project.clone(),
        _ => None,
    };
    let config = load_config(project_arg.as_deref().or(cli.global.config.as_deref()), &cli.global)?;
    let jobs = config.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| dispatch(cli.command, &config))
}

fn load_config(path: Option<&Path>, global: &Global) -> Outcome<ProjectConfig> {
    let mut config = match path {
        Some(p) => ProjectConfig::load(p)?,
        None => ProjectConfig::default(),
    };
    if !global.overrides.is_empty() {
        let base = config.base_dir().to_path_buf();
        let mut table = toml::Table::try_from(&config).map_err(|e| Failure::usage(e.to_string()))?;
        for item in &global.overrides {
            apply_override(&mut table, item)?;
        }
        config = table.try_into().map_err(|e: toml::de::Error| Failure::usage(format!("--set: {e}")))?;
        config.set_base_dir(base);
    }
    if let Some(seed) = global.seed {
        config.train.seed = seed;
        config.fit.seed = seed;
    }
    if let Some(jobs) = global.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        config.jobs = Some(jobs);
    }
    Ok(config)
}

fn apply_override(table: &mut toml::Table, item: &str) -> Outcome {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Failure::usage("--set with empty key"))?;
    let mut node = table;
    for part in parts {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Failure::usage(format!("--set: {part:?} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn dispatch(command: Command, config: &ProjectConfig) -> Outcome {
    match command {
        Command::Parse { score, out } => {
            let dump = write_dump(&load_score(&score)?);
            match out {
                Some(path) => write_text(&path, &dump),
                None => {
                    print!("{dump}");
                    Ok(())
                }
            }
        }
        Command::Basis { score, out } => {
            let matrix = build_basis_matrix(&load_score(&score)?, &config.fusion_spec()?)?;
            create_parent(&out)?;
            write_basis_csv(&matrix, &out)?;
            log::info!("{} steps, {} basis functions", matrix.rows(), matrix.columns().len());
            Ok(())
        }
        Command::Loudness { audio, out, block, hop, normalize } => {
            let mut curve = momentary_loudness(&read_wav(&audio)?, block, hop)?;
            if normalize {
                curve = normalize_curve(&curve)?;
            }
            create_parent(&out)?;
            write_loudness_csv(&curve, &out)?;
            Ok(())
        }
        Command::Target { loudness, alignment, score, out } => {
            let target =
                score_target(&read_loudness_csv(&loudness)?, &read_alignment_csv(&alignment)?, &load_score(&score)?)?;
            create_parent(&out)?;
            write_target_csv(&target, &out)?;
            Ok(())
        }
        Command::Train { out, .. } => cmd_train(config, out),
        Command::Loo { out, .. } => cmd_loo(config, out),
        Command::Fit { model, piece, out } => cmd_fit(config, &model, &piece, out),
        Command::Sens { model, score, out, view } => {
            let model = Model::load(&model)?;
            let parsed = load_score(&score)?;
            let matrix = build_basis_matrix(&parsed, &model.fusion)?;
            let graph = sensitivity_graph(&model, &matrix)?;
            let prefix = out.unwrap_or_else(|| with_suffix(&score, "sens"));
            let title = format!("sensitivity: {}", parsed.title);
            write_graph_outputs(&graph, &prefix, heatmap_options(config, &view, title, None, parsed.bar_lines())?)
        }
        Command::Compare { model_a, model_b, score, out, label_a, label_b, view } => {
            let label_a = label_a.unwrap_or_else(|| stem(&model_a));
            let label_b = label_b.unwrap_or_else(|| stem(&model_b));
            let a = Model::load(&model_a)?;
            let b = Model::load(&model_b)?;
            let parsed = load_score(&score)?;
            let matrix = build_basis_matrix(&parsed, &a.fusion)?;
            let sd = sd_graph(&a, &b, &matrix, label_a.clone(), label_b.clone())?;
            let prefix = out.unwrap_or_else(|| with_suffix(&score, "sd"));
            let title = format!("sensitivity difference: {} vs {} ({})", label_a, label_b, parsed.title);
            let options = heatmap_options(config, &view, title, Some((label_a, label_b)), parsed.bar_lines())?;
            write_graph_outputs(&sd.graph, &prefix, options)
        }
    }
}

fn require_pieces(config: &ProjectConfig) -> Outcome<Vec<expressdyn::eval::LooPiece>> {
    if config.pieces.is_empty() {
        return Err(Failure::usage("the project lists no pieces (give a project file)"));
    }
    config.check_paths()?;
    Ok(config.load_pieces()?)
}

fn cmd_train(config: &ProjectConfig, out: Option<PathBuf>) -> Outcome {
    let mut pieces = require_pieces(config)?;
    pieces.sort_by(|a, b| a.id.cmp(&b.id));
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.train.seed));
    let n_val = if config.validation_count < pieces.len() { config.validation_count } else { 0 };
    if n_val < config.validation_count {
        log::warn!("too few pieces for {} validation pieces; training without validation", config.validation_count);
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let refs = |idx: &[usize]| -> Vec<PieceRef<'_>> {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.iter().map(|&i| PieceRef::new(&pieces[i].matrix, &pieces[i].target)).collect()
    };
    let (model, log) = train(config.model, &refs(train_idx), &refs(val_idx), &config.train)?;
    let out = out.unwrap_or_else(|| config.output_path("model.json"));
    create_parent(&out)?;
    model.save(&out)?;
    write_training_log(&log, &with_suffix(&out, "log.csv"))?;
    println!(
        "{}: best epoch {} of {} (monitored loss {:.6})",
        out.display(),
        log.best_epoch,
        log.stopped_epoch,
        expressdyn::models::TrainingLog::monitored(log.best())
    );
    Ok(())
}

fn cmd_loo(config: &ProjectConfig, out: Option<PathBuf>) -> Outcome {
    let pieces = require_pieces(config)?;
    if config.models.is_empty() {
        return Err(Failure::usage("no models to evaluate"));
    }
    let mut outcomes: Vec<FoldOutcome> = Vec::new();
    for &kind in &config.models {
        outcomes.extend(loo_cross_validation(&pieces, kind, &config.train, config.validation_count)?);
    }
    outcomes.sort_by(|a, b| (a.piece_id(), a.model()).cmp(&(b.piece_id(), b.model())));
    let out = out.unwrap_or_else(|| config.output_path("loo.csv"));
    create_parent(&out)?;
    write_report_csv(&out, &outcomes)?;
    print!("{}", format_table(&outcomes));
    let failed: Vec<String> = outcomes
        .iter()
        .filter_map(|o| match o {
            FoldOutcome::Failed { piece_id, model, reason } => Some(format!("{piece_id}/{model}: {reason}")),
            FoldOutcome::Done(_) => None,
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: 3, kind: "numerical", message: format!("{} fold(s) failed: {}", failed.len(), failed.join("; ")) })
    }
}

fn cmd_fit(config: &ProjectConfig, model_path: &Path, piece_path: &Path, out: Option<PathBuf>) -> Outcome {
    let model = Model::load(model_path)?;
    let text = fs::read_to_string(piece_path).map_err(|e| Failure::from(Error::Io { path: piece_path.into(), source: e }))?;
    let spec = PieceSpec::from_toml(&text).map_err(|e| Failure::from(Error::Format { path: piece_path.into(), message: e.to_string() }))?;
    let base = piece_path.parent().unwrap_or(Path::new("."));
    let piece = spec.load(base, &model.fusion)?;
    let (fitted, log) = fit_to_performance(&model, PieceRef::new(&piece.matrix, &piece.target), &config.fit)?;
    let out = out.unwrap_or_else(|| model_path.with_file_name(format!("{}-{}.json", stem(model_path), piece.id)));
    create_parent(&out)?;
    fitted.save(&out)?;
    println!(
        "{}: fit loss {:.6} -> {:.6} after {} epochs",
        out.display(),
        log.epochs[0].train_loss,
        log.best().train_loss,
        log.stopped_epoch
    );
    Ok(())
}

fn heatmap_options(
    config: &ProjectConfig,
    view: &View,
    title: String,
    labels: Option<(String, String)>,
    bar_lines: Vec<Beat>,
) -> Outcome<HeatmapOptions> {
    let from_config = |s: &Option<String>| -> Outcome<Option<Beat>> {
        s.as_deref()
            .map(|v| beat_arg(v).map_err(|e| Failure { code: 1, kind: "config", message: format!("sensitivity window: {e}") }))
            .transpose()
    };
    let start = view.from.or(from_config(&config.sensitivity.window_start)?);
    let end = view.to.or(from_config(&config.sensitivity.window_end)?);
    let window = match (start, end) {
        (None, None) => None,
        (Some(s), Some(e)) if s < e => Some((s, e)),
        (Some(_), Some(_)) => return Err(Failure::usage("window start must precede its end")),
        _ => return Err(Failure::usage("give both ends of the window")),
    };
    Ok(HeatmapOptions {
        top_k: view.top_k.unwrap_or(config.sensitivity.top_k),
        window,
        bar_lines,
        title,
        labels,
        ..HeatmapOptions::default()
    })
}

fn write_graph_outputs(graph: &SensitivityGraph, prefix: &Path, options: HeatmapOptions) -> Outcome {
    let csv = append_extension(prefix, "csv");
    let svg = append_extension(prefix, "svg");
    create_parent(&csv)?;
    write_graph_csv(graph, &csv)?;
    let heatmap = render_heatmap(graph, &options)?;
    write_text(&svg, &heatmap.svg)?;
    for (id, score) in &heatmap.rows {
        println!("{id}\t{score:.6}");
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned())
}

/// `dir/name.ext` → `dir/name.suffix`; appends when there is no extension.
fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let name = format!("{}.{suffix}", stem(p));
    p.with_file_name(name)
}

fn append_extension(p: &Path, ext: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn create_parent(path: &Path) -> Outcome {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Failure::from(Error::Io { path: dir.into(), source: e }))
        }
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Outcome {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Failure::from(Error::Io { path: path.into(), source: e }))
}
