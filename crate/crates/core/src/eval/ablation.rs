use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{evaluate, EvalError, EvaluationReport};
use crate::dataset::DatasetSplit;
use crate::model::{save_model, train, ArchConfig, GrModel, RelationTransform, TrainConfig, TrainOutcome, Variant};

/// Shared settings for every variant of an ablation. The variant field of
/// `arch` is ignored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationConfig {
    pub arch: ArchConfig,
    pub train: TrainConfig,
    /// Where `<variant>.ckpt` files are written, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
}


fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>, EvalError> {
    value
        .split(',')
        .map(|v| v.trim().parse::<usize>().ok().filter(|&w| w > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| EvalError::Config(format!("{key}={value}")))
}

impl AblationConfig {
    /// Reads `key=value` lines; `#` starts a comment. Keys: `lr`, `epochs`,
    /// `seed`, `batch_size`, `weight_decay`, `encoder`, `relational`,
    /// `taps`, `fusion`, `transform`, `out`. Missing keys keep defaults.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut config = Self::default();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| EvalError::Config(line.to_string()))?;
            let bad = || EvalError::Config(line.to_string());
            match key {
                "lr" => config.train.lr = value.parse().map_err(|_| bad())?,
                "epochs" => config.train.epochs = value.parse().map_err(|_| bad())?,
                "seed" => config.train.seed = value.parse().map_err(|_| bad())?,
                "batch_size" => config.train.batch_size = value.parse().map_err(|_| bad())?,
                "weight_decay" => config.train.weight_decay = value.parse().map_err(|_| bad())?,
                "encoder" => config.arch.encoder_widths = parse_widths(key, value)?,
                "relational" => config.arch.relational_widths = parse_widths(key, value)?,
                "taps" => config.arch.taps = parse_widths(key, value)?,
                "fusion" => config.arch.fusion_widths = parse_widths(key, value)?,
                "transform" => config.arch.transform = RelationTransform::from_name(value).ok_or_else(bad)?,
                "out" => config.checkpoint_dir = Some(PathBuf::from(value)),
                _ => return Err(EvalError::Config(format!("unknown key {key}"))),
            }
        }
        if !(config.train.lr > 0.0 && config.train.lr.is_finite()) {
            return Err(EvalError::Config(format!("lr={}", config.train.lr)));
        }
        config.arch.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRun {
    pub report: EvaluationReport,
    pub outcome: TrainOutcome,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    /// In `Variant::ALL` order.
    pub runs: Vec<AblationRun>,
}

impl AblationReport {
    pub fn get(&self, variant: Variant) -> Option<&AblationRun> {
        self.runs.iter().find(|r| r.report.variant == variant)
    }

    fn accuracy(&self, variant: Variant) -> f64 {
        self.get(variant).map_or(f64::NAN, |r| r.report.metrics.accuracy)
    }

    /// Whether full ≥ without fusion ≥ without the relational branch.
    pub fn ordering_holds(&self) -> bool {
        let full = self.accuracy(Variant::Full);
        let no_fusion = self.accuracy(Variant::NoFusion);
        let geo = self.accuracy(Variant::GeometricOnly);
        full >= no_fusion && no_fusion >= geo
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10}",
            "model", "accuracy", "balanced", "precision", "recall", "f1", "max-conf"
        );
        for run in &self.runs {
            let m = &run.report.metrics;
            let _ = writeln!(
                out,
                "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>10.4}",
                row_name(run.report.variant),
                m.accuracy,
                m.balanced_accuracy,
                m.precision,
                m.recall,
                m.f1,
                run.report.rates.max_rate()
            );
        }
        let _ = writeln!(
            out,
            "ordering full >= w/o fusion >= w/o relational: {}",
            if self.ordering_holds() { "holds" } else { "does not hold" }
        );
        out
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for run in &self.runs {
            let m = &run.report.metrics;
            let v = run.report.variant;
            let _ = writeln!(out, "{v}.accuracy={}", m.accuracy);
            let _ = writeln!(out, "{v}.balanced_accuracy={}", m.balanced_accuracy);
            let _ = writeln!(out, "{v}.precision={}", m.precision);
            let _ = writeln!(out, "{v}.recall={}", m.recall);
            let _ = writeln!(out, "{v}.f1={}", m.f1);
            let _ = writeln!(out, "{v}.max_confusion_rate={}", run.report.rates.max_rate());
            if let Some(epoch) = run.outcome.best_epoch {
                let _ = writeln!(out, "{v}.best_epoch={epoch}");
            }
        }
        let _ = writeln!(out, "ordering_holds={}", self.ordering_holds());
        out
    }
}

fn row_name(variant: Variant) -> &'static str {
    match variant {
        Variant::Full => "full",
        Variant::GeometricOnly => "w/o rel",
        Variant::RelationalOnly => "w/o geo",
        Variant::NoFusion => "w/o fusion",
    }
}

fn run_variant(split: &DatasetSplit, config: &AblationConfig, variant: Variant) -> Result<AblationRun, EvalError> {
    let arch = ArchConfig {
        variant,
        ..config.arch.clone()
    };
    let mut model = GrModel::new(arch, config.train.seed)?;
    let outcome = train(&mut model, split, &config.train)?;
    let report = evaluate(&mut model, split)?;
    let checkpoint = match &config.checkpoint_dir {
        Some(dir) => {
            let path = checkpoint_path(dir, variant);
            save_model(&model, &path)?;
            Some(path)
        }
        None => None,
    };
    Ok(AblationRun {
        report,
        outcome,
        checkpoint,
    })
}

pub fn checkpoint_path(dir: &Path, variant: Variant) -> PathBuf {
    dir.join(format!("{variant}.ckpt"))
}

/// Trains and evaluates the full model and its three ablations with the
/// same seed and settings. Variants run concurrently; each is
/// deterministic on its own, so the result does not depend on scheduling.
pub fn ablation_suite(split: &DatasetSplit, config: &AblationConfig) -> Result<AblationReport, EvalError> {
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::Io(format!("{}: {e}", dir.display())))?;
    }
    let runs = Variant::ALL
        .par_iter()
        .map(|&v| run_variant(split, config, v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AblationReport { runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config() {
        let c = AblationConfig::parse("# small run\nlr=0.01\nepochs=3\nseed=7\nencoder=8,16\nfusion=32, 16\nout=/tmp/x\n").unwrap();
        assert_eq!(c.train.lr, 0.01);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.arch.encoder_widths, vec![8, 16]);
        assert_eq!(c.arch.fusion_widths, vec![32, 16]);
        assert_eq!(c.checkpoint_dir, Some(PathBuf::from("/tmp/x")));
        assert!(AblationConfig::parse("speed=3").is_err());
        assert!(AblationConfig::parse("lr=-1").is_err());
        assert!(AblationConfig::parse("taps=1,2").is_err());
    }
}
