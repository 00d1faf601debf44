//! Command-line front end: `synth`, `preprocess`, `augment`, `split`,
//! `train`, `eval`, `predict`, `plot` and `version`.
//!
//! Exit codes: 0 success, 1 usage error (including out-of-range flag values), 2 data error (malformed manifest,
//! image or checkpoint), 3 runtime error (non-finite loss, failed writes).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use honeyscan::augment::{augment_dataset, AugmentScope, FluctuationMode, FluctuationSpec, DEFAULT_AMPLITUDE};
use honeyscan::dataset::{
    generate_synthetic, load_manifest, save_manifest, split_manifest, DatasetError, Manifest, Split,
};
use honeyscan::imaging::{self, read_image, write_image, ImageError};
use honeyscan::optim::MetricsReport;
use honeyscan::trainkit::{
    evaluate, export_history, image_tensor, load_checkpoint, parse_history_csv, render_history_svg,
    save_checkpoint, train_observed, Checkpoint, CheckpointError, ImageSet, ModelDef, Optimizer, TrainConfig,
    TrainError, CHECKPOINT_VERSION, EVAL_BATCH,
};
use honeyscan::tensor::Mode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Name of the manifest written into output directories.
pub const MANIFEST_NAME: &str = "manifest.csv";

#[derive(Debug, Parser)]
#[command(name = "honeyscan", version, about = "Thermal-image honey adulteration screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    /// Unassigned and training records only.
    Train,
    /// Every record, validation included.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FoldArg {
    Train,
    Val,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic thermal dataset.
    Synth {
        /// Images per class.
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; receives the images and manifest.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Crop every image to its region of interest and resize to 300x300.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; receives the processed images and manifest.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Append one temperature-fluctuated copy of each eligible image.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_AMPLITUDE)]
        amplitude: u8,
        /// per-pixel or per-image.
        #[arg(long, default_value = "per-pixel")]
        mode: FluctuationMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Which records are augmented.
        #[arg(long, value_enum, default_value = "train")]
        scope: ScopeArg,
        /// Output directory; receives originals, augmented copies and manifest.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign records to train/val folds, grouped by sample id. Updates the manifest in place.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        val_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the CNN on the manifest's train fold, validating on its val fold.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: u32,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        #[arg(long, default_value_t = 15)]
        steps: u32,
        #[arg(long, default_value = "adam")]
        optimizer: Optimizer,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Record wall-clock seconds in the history (makes it non-reproducible).
        #[arg(long)]
        timing: bool,
        /// Checkpoint path; the history is written next to it as
        /// <stem>.history.csv and <stem>.history.svg.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a manifest.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Which records to evaluate.
        #[arg(long, value_enum, default_value = "all")]
        split: FoldArg,
        /// Metrics CSV path [default: <model stem>.metrics.csv next to the model].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print JSON instead of key=value lines.
        #[arg(long)]
        json: bool,
    },
    /// Classify a single image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Run the region-of-interest preprocessing first.
        #[arg(long)]
        preprocess: bool,
        #[arg(long)]
        json: bool,
    },
    /// Render a history CSV as an SVG chart.
    Plot {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the tool version, PRNG and checkpoint format.
    Version,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Runtime(m) => m,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidArgument(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        if matches!(e, TrainError::InvalidConfig(_)) {
            Self::Usage(e.to_string())
        } else if e.is_data_error() {
            Self::Data(e.to_string())
        } else {
            Self::Runtime(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn write_file(path: &Path, contents: &[u8]) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn manifest_root(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Version block shared by `version` and the train run header.
pub fn version_text() -> String {
    format!(
        "honeyscan {}\nprng={}\ncheckpoint={}/{}\n",
        honeyscan::VERSION,
        honeyscan::rng::PRNG_NAME,
        String::from_utf8_lossy(honeyscan::trainkit::CHECKPOINT_MAGIC),
        CHECKPOINT_VERSION
    )
}

/// Fixed-order key=value rendering of a metrics report.
pub fn metrics_block(m: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "records={}", m.total());
    let _ = writeln!(s, "tp={}\ntn={}\nfp={}\nfn={}", m.tp, m.tn, m.fp, m.fn_);
    let _ = writeln!(s, "accuracy={:.6}", m.accuracy);
    let _ = writeln!(s, "precision={:.6}", m.precision);
    let _ = writeln!(s, "recall={:.6}", m.recall);
    let _ = writeln!(s, "loss={:.6}", m.loss);
    s
}

fn metrics_csv(m: &MetricsReport) -> String {
    format!(
        "records,tp,tn,fp,fn,accuracy,precision,recall,loss\n{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
        m.total(),
        m.tp,
        m.tn,
        m.fp,
        m.fn_,
        m.accuracy,
        m.precision,
        m.recall,
        m.loss
    )
}

fn cmd_synth(per_class: usize, seed: u64, out_dir: &Path, out: &mut dyn Write) -> CliResult {
    let manifest = generate_synthetic(per_class, seed, out_dir)?;
    let path = out_dir.join(MANIFEST_NAME);
    save_manifest(&path, &manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    let _ = writeln!(out, "wrote {} images and {}", manifest.len(), path.display());
    Ok(())
}

fn cmd_preprocess(manifest_path: &Path, out_dir: &Path, out: &mut dyn Write) -> CliResult {
    let manifest = load_manifest(manifest_path)?;
    let root = manifest_root(manifest_path);
    manifest
        .records
        .par_iter()
        .map(|r| -> CliResult {
            let image = read_image(&root.join(&r.path)).map_err(|e| CliError::Data(format!("{}: {e}", r.path)))?;
            let processed = imaging::preprocess(&image).map_err(|e| CliError::Data(format!("{}: {e}", r.path)))?;
            let dst = out_dir.join(&r.path);
            if let Some(parent) = dst.parent() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", parent.display())))?;
            }
            write_image(&dst, &processed).map_err(|e| CliError::Runtime(e.to_string()))
        })
        .collect::<CliResult<Vec<()>>>()?;
    let mut result = manifest.clone();
    result
        .provenance
        .push(format!("preprocess roi=sobel-otsu size={0}x{0}", imaging::TARGET_SIZE));
    let path = out_dir.join(MANIFEST_NAME);
    save_manifest(&path, &result).map_err(|e| CliError::Runtime(e.to_string()))?;
    let _ = writeln!(out, "preprocessed {} images into {}", result.len(), out_dir.display());
    Ok(())
}

fn cmd_augment(
    manifest_path: &Path,
    spec: FluctuationSpec,
    scope: ScopeArg,
    out_dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let manifest = load_manifest(manifest_path)?;
    let scope = match scope {
        ScopeArg::Train => AugmentScope::TrainOnly,
        ScopeArg::All => AugmentScope::All,
    };
    let report = augment_dataset(&manifest, &manifest_root(manifest_path), out_dir, &spec, scope)?;
    let path = out_dir.join(MANIFEST_NAME);
    save_manifest(&path, &report.manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    let (neg, pos) = report.manifest.class_counts();
    let _ = writeln!(
        out,
        "wrote {} records ({neg} unadulterated, {pos} adulterated) to {}",
        report.manifest.len(),
        path.display()
    );
    if !report.errors.is_empty() {
        for e in &report.errors {
            let _ = writeln!(err, "record {} ({}): {}", e.index + 1, e.path, e.message);
        }
        return Err(CliError::Data(format!("{} records could not be augmented", report.errors.len())));
    }
    Ok(())
}

fn cmd_split(manifest_path: &Path, val_fraction: f64, seed: u64, out: &mut dyn Write) -> CliResult {
    let manifest = load_manifest(manifest_path)?;
    let split = split_manifest(&manifest, val_fraction, seed)?;
    save_manifest(manifest_path, &split).map_err(|e| CliError::Runtime(e.to_string()))?;
    let train = split.fold(Split::Train);
    let val = split.fold(Split::Val);
    let _ = writeln!(out, "train={} val={}", train.len(), val.len());
    Ok(())
}

fn load_fold(manifest: &Manifest, root: &Path, fold: Split, def: &ModelDef, name: &'static str) -> CliResult<ImageSet> {
    let records = manifest.fold(fold);
    if records.is_empty() {
        return Err(CliError::Data(format!(
            "the manifest has no {name} records; run `honeyscan split` first"
        )));
    }
    Ok(ImageSet::load(&records, root, def)?)
}

fn cmd_train(manifest_path: &Path, config: TrainConfig, timing: bool, model_out: &Path, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let manifest = load_manifest(manifest_path)?;
    let root = manifest_root(manifest_path);
    let def = ModelDef::proposed();
    config.validate()?;
    let _ = writeln!(out, "{} seed={}", config.header(), config.seed);
    let _ = writeln!(out, "parameters={}", def.parameter_count());
    let train_set = load_fold(&manifest, &root, Split::Train, &def, "train")?;
    let val_set = load_fold(&manifest, &root, Split::Val, &def, "validation")?;
    let _ = writeln!(out, "train_records={} val_records={}", train_set.len(), val_set.len());
    let started = Instant::now();
    let mut epoch_started = Instant::now();
    let (params, history) = train_observed(&def, &config, &train_set, &val_set, timing, |r| {
        let _ = writeln!(
            out,
            "epoch {}/{} train_loss={:.6} train_acc={:.6} val_loss={:.6} val_acc={:.6} val_precision={:.6} val_recall={:.6}",
            r.epoch, config.epochs, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.val_precision, r.val_recall
        );
        let _ = writeln!(err, "epoch {} took {:.1}s", r.epoch, epoch_started.elapsed().as_secs_f64());
        epoch_started = Instant::now();
    })?;
    let ckpt = Checkpoint { def, config, params };
    if let Some(parent) = model_out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    save_checkpoint(model_out, &ckpt).map_err(|e| CliError::Runtime(e.to_string()))?;
    let _ = writeln!(out, "checkpoint={}", model_out.display());
    if history.is_empty() {
        let _ = writeln!(out, "no epochs run; history not written");
    } else {
        let csv = sibling(model_out, ".history.csv");
        let svg = sibling(model_out, ".history.svg");
        export_history(&history, &csv, &svg).map_err(|e| CliError::Runtime(e.to_string()))?;
        let _ = writeln!(out, "history={} chart={}", csv.display(), svg.display());
    }
    let _ = writeln!(err, "training took {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_eval(
    model: &Path,
    manifest_path: &Path,
    threshold: f64,
    fold: FoldArg,
    csv_out: Option<PathBuf>,
    as_json: bool,
    out: &mut dyn Write,
) -> CliResult {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Usage(format!("threshold {threshold} is outside [0, 1]")));
    }
    let ckpt = load_checkpoint(model)?;
    let manifest = load_manifest(manifest_path)?;
    let records = match fold {
        FoldArg::Train => manifest.fold(Split::Train),
        FoldArg::Val => manifest.fold(Split::Val),
        FoldArg::All => manifest,
    };
    if records.is_empty() {
        return Err(CliError::Data("no records to evaluate".into()));
    }
    let set = ImageSet::load(&records, &manifest_root(manifest_path), &ckpt.def)?;
    let m = evaluate(&ckpt.def, &ckpt.params, &set, threshold, EVAL_BATCH)?;
    let csv_path = csv_out.unwrap_or_else(|| sibling(model, ".metrics.csv"));
    write_file(&csv_path, metrics_csv(&m).as_bytes())?;
    if as_json {
        let v = json!({
            "records": m.total(), "tp": m.tp, "tn": m.tn, "fp": m.fp, "fn": m.fn_,
            "accuracy": m.accuracy, "precision": m.precision, "recall": m.recall, "loss": m.loss,
        });
        let _ = writeln!(out, "{v}");
    } else {
        let _ = write!(out, "{}", metrics_block(&m));
    }
    Ok(())
}

fn cmd_predict(model: &Path, image: &Path, threshold: f64, preprocess: bool, as_json: bool, out: &mut dyn Write) -> CliResult {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Usage(format!("threshold {threshold} is outside [0, 1]")));
    }
    let ckpt = load_checkpoint(model)?;
    let mut img = read_image(image)?;
    if preprocess {
        img = imaging::preprocess(&img)?;
    }
    let x = image_tensor::<f32>(&img, &ckpt.def)?;
    let p = f64::from(honeyscan::trainkit::forward(&ckpt.def, &ckpt.params, &x, Mode::Inference)?.data()[0]);
    let verdict = if p >= threshold { "adulterated" } else { "unadulterated" };
    if as_json {
        let _ = writeln!(out, "{}", json!({ "probability": p, "verdict": verdict, "threshold": threshold }));
    } else {
        let _ = writeln!(out, "probability={p:.6}\nverdict={verdict}");
    }
    Ok(())
}

fn cmd_plot(history: &Path, svg: &Path, out: &mut dyn Write) -> CliResult {
    let text = std::fs::read_to_string(history)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", history.display())))?;
    let parsed = parse_history_csv(&text)?;
    write_file(svg, render_history_svg(&parsed)?.as_bytes())?;
    let _ = writeln!(out, "wrote {}", svg.display());
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth { per_class, seed, out: dir } => cmd_synth(per_class, seed, &dir, out),
        Command::Preprocess { manifest, out: dir } => cmd_preprocess(&manifest, &dir, out),
        Command::Augment { manifest, amplitude, mode, seed, scope, out: dir } => {
            cmd_augment(&manifest, FluctuationSpec { amplitude, mode, seed }, scope, &dir, out, err)
        }
        Command::Split { manifest, val_fraction, seed } => cmd_split(&manifest, val_fraction, seed, out),
        Command::Train { manifest, epochs, batch_size, lr, steps, optimizer, seed, threshold, timing, out: model } => {
            let config = TrainConfig {
                learning_rate: lr,
                batch_size,
                epochs,
                steps_per_epoch: steps,
                optimizer,
                seed,
                threshold,
            };
            cmd_train(&manifest, config, timing, &model, out, err)
        }
        Command::Eval { model, manifest, threshold, split, out: csv, json } => {
            cmd_eval(&model, &manifest, threshold, split, csv, json, out)
        }
        Command::Predict { model, image, threshold, preprocess, json } => {
            cmd_predict(&model, &image, threshold, preprocess, json, out)
        }
        Command::Plot { history, out: svg } => cmd_plot(&history, &svg, out),
        Command::Version => {
            let _ = write!(out, "{}", version_text());
            Ok(())
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
