//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 1 for bad usage or unusable input, 2 when an internal invariant
//! fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{
    assemble, cap_per_class, load, read_corpus, save, split, AssembleConfig, ClassLabel, DatasetError,
    DatasetSplit,
};
use crate::eval::{ablation_suite, evaluate, AblationConfig, EvalError};
use crate::model::{
    count_parameters, load_model, save_model, train, ArchConfig, GrModel, ModelError, Variant,
};
use crate::nn::NnError;
use crate::relations::{build_vectors, RelationCountVector};
use crate::step::parse;
use crate::synthetic::{SyntheticConfig, SyntheticCorpus};

/// Caps the worker threads used for corpus processing and ablations.
pub const THREADS_ENV: &str = "IFC_GRL_THREADS";
pub const RELATIONS_FILE: &str = "relations.txt";
pub const RELATIONS_TAG: &str = "ifc-grl-relations/1";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Stratification { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::Io(_) | ModelError::InvalidArch(_) | ModelError::EmptyDataset | ModelError::VariantMismatch { .. } => {
                CliError::Input(e.to_string())
            }
            ModelError::Nn(NnError::Checkpoint(_)) => CliError::Input(e.to_string()),
            ModelError::Nn(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Io(_) | EvalError::Config(_) | EvalError::EmptyMatrix => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

#[derive(Debug, Parser)]
#[command(name = "ifc-grl", version, about = "Geometric-relational classification of BIM objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse IFC files and write per-object relation vectors.
    Extract {
        #[arg(required = true)]
        ifc: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble, cap, split and save a dataset from IFC files and OBJ meshes.
    BuildDataset {
        #[arg(long)]
        ifc_dir: PathBuf,
        /// Meshes at `<obj-dir>/<ifc stem>/<instance id>.obj`.
        #[arg(long)]
        obj_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = crate::dataset::DEFAULT_CAP)]
        cap: usize,
        #[arg(long, default_value_t = crate::dataset::DEFAULT_TRAIN_FRACTION)]
        split: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = crate::geometry::DEFAULT_POINTS)]
        points: usize,
        /// Keep shape duplicates.
        #[arg(long)]
        no_dedup: bool,
    },
    /// Train one model variant on a saved dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "full")]
        variant: String,
        #[command(flatten)]
        hyper: TrainArgs,
        /// Checkpoint path; the architecture is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test part of a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// Key=value report; a text table is written alongside with `.txt`.
        #[arg(long)]
        report: PathBuf,
    },
    /// Train and compare the full model and its three ablations.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        /// Key=value settings file.
        #[arg(long)]
        config: PathBuf,
        /// Directory for checkpoints and reports; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print parameter and multiply-accumulate counts of a checkpoint.
    Report {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = crate::geometry::DEFAULT_POINTS)]
        points: usize,
    },
    /// Write the synthetic corpus as IFC and OBJ files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Key=value settings file (same keys as for `ablate`); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn read_config(path: &Path) -> Result<AblationConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(AblationConfig::parse(&text)?)
}

fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Input(format!("{THREADS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parses `args` (program name first) and runs the command, writing
/// progress to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let result = thread_count().and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        pool.install(|| dispatch(cli.command, out, err))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match command {
        Command::Extract { ifc, out: dir } => extract(&ifc, &dir, out, err),
        Command::BuildDataset {
            ifc_dir,
            obj_dir,
            out: dir,
            cap,
            split: fraction,
            seed,
            points,
            no_dedup,
        } => {
            let config = AssembleConfig {
                points,
                seed,
                deduplicate: !no_dedup,
                ..AssembleConfig::default()
            };
            build_dataset(&ifc_dir, &obj_dir, &dir, cap, fraction, &config, out, err)
        }
        Command::Train {
            dataset,
            variant,
            hyper,
            out: ckpt,
        } => train_command(&dataset, &variant, &hyper, &ckpt, out),
        Command::Evaluate { dataset, ckpt, report } => {
            let split = load(&dataset)?;
            let mut model = load_model(&ckpt)?;
            let result = evaluate(&mut model, &split)?;
            write_file(&report, result.to_kv())?;
            write_file(&report.with_extension("txt"), result.to_table())?;
            let _ = write!(out, "{}", result.to_table());
            Ok(())
        }
        Command::Ablate { dataset, config, out: dir } => {
            let split = load(&dataset)?;
            let mut config = read_config(&config)?;
            if dir.is_some() {
                config.checkpoint_dir = dir;
            }
            let report = ablation_suite(&split, &config)?;
            if let Some(dir) = &config.checkpoint_dir {
                write_file(&dir.join("ablation.kv"), report.to_kv())?;
                write_file(&dir.join("ablation.txt"), report.to_table())?;
                for run in &report.runs {
                    write_file(&dir.join(format!("{}.kv", run.report.variant)), run.report.to_kv())?;
                }
            }
            let _ = write!(out, "{}", report.to_table());
            Ok(())
        }
        Command::Report { ckpt, points } => {
            let model = load_model(&ckpt)?;
            let report = count_parameters(&model, points);
            let _ = writeln!(out, "variant={}", report.variant);
            for (module, n) in &report.modules {
                let _ = writeln!(out, "params.{module}={n}");
            }
            let _ = writeln!(out, "params.total={}", report.total);
            let _ = writeln!(out, "macs.points={}", report.points);
            let _ = writeln!(out, "macs.total={}", report.macs);
            Ok(())
        }
        Command::Synth { out: dir, per_class, seed } => {
            let corpus = SyntheticCorpus::generate(&SyntheticConfig { per_class, seed });
            let (ifc, obj) = corpus.write(&dir).map_err(|e| io_err(&dir, e))?;
            let _ = writeln!(out, "wrote {} objects: {} and {}", corpus.meshes.len(), ifc.display(), obj.display());
            Ok(())
        }
    }
}

/// `(id, type, vector)` rows and dangling `(from, to)` references.
type FileVectors = (Vec<(u64, String, RelationCountVector)>, Vec<(u64, u64)>);

/// Relation vectors of one file: every labeled object plus anything else
/// quoted by a monitored relationship.
fn file_vectors(text: &str) -> Result<FileVectors, CliError> {
    let model = parse(text).map_err(|e| CliError::Input(e.to_string()))?;
    let ids: Vec<u64> = model
        .instances()
        .filter(|i| !i.type_name.to_ascii_uppercase().starts_with("IFCREL"))
        .map(|i| i.id)
        .collect();
    let vectors = build_vectors(&model, &ids).map_err(|e| CliError::Input(e.to_string()))?;
    let rows = ids
        .into_iter()
        .filter_map(|id| {
            let inst = model.get(id)?;
            let v = vectors[&id];
            (ClassLabel::from_ifc_type(&inst.type_name).is_some() || !v.is_zero())
                .then(|| (id, inst.type_name.clone(), v))
        })
        .collect();
    Ok((rows, model.validate_references()))
}

fn extract(files: &[PathBuf], dir: &Path, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut manifest = format!("{RELATIONS_TAG}\n");
    let mut failed = 0;
    for path in files {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let result = fs::read(path)
            .map_err(|e| io_err(path, e))
            .and_then(|bytes| file_vectors(&String::from_utf8_lossy(&bytes)));
        let (rows, dangling) = match result {
            Ok(r) => r,
            Err(e) => {
                let _ = writeln!(err, "{name}: {e}");
                failed += 1;
                continue;
            }
        };
        let _ = writeln!(manifest, "file {name}");
        for (id, type_name, v) in &rows {
            let _ = writeln!(manifest, "object #{id} {type_name} {v}");
        }
        for (from, to) in &dangling {
            let _ = writeln!(manifest, "dangling #{from} -> #{to}");
            let _ = writeln!(err, "{name}: #{from} refers to missing #{to}");
        }
        let _ = writeln!(out, "{name}: {} objects, {} dangling references", rows.len(), dangling.len());
    }
    write_file(&dir.join(RELATIONS_FILE), manifest)?;
    if failed > 0 {
        return Err(CliError::Input(format!("{failed} of {} files could not be read", files.len())));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_dataset(
    ifc_dir: &Path,
    obj_dir: &Path,
    dir: &Path,
    cap: usize,
    fraction: f64,
    config: &AssembleConfig,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(fraction).into());
    }
    let corpus = read_corpus(ifc_dir, obj_dir)?;
    let assembly = assemble(&corpus.sources, config);
    for (name, e) in corpus.failures.iter().chain(&assembly.failures) {
        let _ = writeln!(err, "skipped {name}: {e}");
    }
    let objects = cap_per_class(assembly.objects, cap, config.seed)?;
    let split = split(objects, fraction, config.seed)?;
    split.check_stratification(fraction)?;
    if !split.uids_unique() {
        return Err(CliError::Internal("duplicate object ids after splitting".into()));
    }
    save(&split, dir)?;
    let _ = writeln!(
        out,
        "{} objects ({} train, {} test); {} duplicates removed, {} unlabeled meshes skipped",
        split.len(),
        split.train.len(),
        split.test.len(),
        assembly.duplicates_removed,
        assembly.skipped_unlabeled
    );
    let _ = write!(out, "{}", class_summary(&split));
    Ok(())
}

fn class_summary(split: &DatasetSplit) -> String {
    let mut s = String::new();
    for (label, (train, test)) in ClassLabel::ALL.iter().zip(split.class_counts()) {
        if train + test > 0 {
            let _ = writeln!(s, "  {:<16} {train:>6} {test:>6}", label.name());
        }
    }
    s
}

fn train_command(dataset: &Path, variant: &str, hyper: &TrainArgs, ckpt: &Path, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let variant = Variant::from_name(variant).ok_or_else(|| {
        CliError::Input(format!("unknown variant {variant:?} (expected full, geo, rel or nofusion)"))
    })?;
    let mut config = match &hyper.config {
        Some(path) => read_config(path)?,
        None => AblationConfig::default(),
    };
    let t = &mut config.train;
    t.lr = hyper.lr.unwrap_or(t.lr);
    t.epochs = hyper.epochs.unwrap_or(t.epochs);
    t.seed = hyper.seed.unwrap_or(t.seed);
    t.batch_size = hyper.batch_size.unwrap_or(t.batch_size);
    if !(t.lr > 0.0 && t.lr.is_finite()) {
        return Err(CliError::Input(format!("--lr must be positive, got {}", t.lr)));
    }
    let split = load(dataset)?;
    let arch = ArchConfig {
        variant,
        ..config.arch
    };
    let mut model = GrModel::new(arch, config.train.seed)?;
    let outcome = train(&mut model, &split, &config.train)?;
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    save_model(&model, ckpt)?;
    for r in &outcome.history {
        let acc = r.test_accuracy.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(out, "epoch {:>3} loss {:.6} test accuracy {acc}", r.epoch, r.train_loss);
    }
    if let (Some(epoch), Some(acc)) = (outcome.best_epoch, outcome.best_test_accuracy) {
        let _ = writeln!(out, "kept epoch {epoch} (test accuracy {acc:.4})");
    }
    Ok(())
}
