use std::fmt::Write as _;

use super::{class_name, confusion_matrix, metrics, ConfusionMatrix, ConfusionRateTable, EvalError, MetricsReport};
use crate::dataset::DatasetSplit;
use crate::model::{predict_objects, GeometricBackbone, GrModel, Variant};

const PREDICT_BATCH: usize = 64;

/// Everything measured on a test set for one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub variant: Variant,
    pub metrics: MetricsReport,
    pub matrix: ConfusionMatrix,
    pub rates: ConfusionRateTable,
}

/// Eval-mode predictions over the test part of `split`.
pub fn evaluate<B: GeometricBackbone>(model: &mut GrModel<B>, split: &DatasetSplit) -> Result<EvaluationReport, EvalError> {
    let predictions = predict_objects(model, &split.test, PREDICT_BATCH)?;
    let labels: Vec<usize> = split.test.iter().map(|o| o.label.code()).collect();
    EvaluationReport::new(model.variant(), confusion_matrix(&predictions, &labels)?)
}

impl EvaluationReport {
    pub fn new(variant: Variant, matrix: ConfusionMatrix) -> Result<Self, EvalError> {
        Ok(Self {
            variant,
            metrics: metrics(&matrix)?,
            rates: ConfusionRateTable::from_matrix(&matrix),
            matrix,
        })
    }

    /// Line-oriented `key=value` form; floats use shortest round-trip
    /// formatting so reports can be compared byte for byte.
    pub fn to_kv(&self) -> String {
        let m = &self.metrics;
        let mut out = String::new();
        let _ = writeln!(out, "variant={}", self.variant);
        let _ = writeln!(out, "test_objects={}", self.matrix.total());
        for (key, value) in [
            ("accuracy", m.accuracy),
            ("balanced_accuracy", m.balanced_accuracy),
            ("precision", m.precision),
            ("recall", m.recall),
            ("f1", m.f1),
        ] {
            let _ = writeln!(out, "{key}={value}");
        }
        let n = self.matrix.classes();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| self.matrix.get(i, j).to_string()).collect();
            let _ = writeln!(out, "confusion.{}={}", class_name(i), row.join(","));
        }
        for e in &self.rates.entries {
            let _ = writeln!(
                out,
                "rate.{}.{}={}/{} {}",
                class_name(e.a),
                class_name(e.b),
                e.mistakes,
                e.support,
                e.rate
            );
        }
        out
    }

    /// Human-readable summary: headline metrics, per-class recall and the
    /// pairwise confusion rates.
    pub fn to_table(&self) -> String {
        let m = &self.metrics;
        let mut out = String::new();
        let _ = writeln!(out, "model: {}  test objects: {}", self.variant, self.matrix.total());
        let _ = writeln!(
            out,
            "{:<10} {:<10} {:<10} {:<10} f1",
            "accuracy", "balanced", "precision", "recall"
        );
        let _ = writeln!(
            out,
            "{:<10.4} {:<10.4} {:<10.4} {:<10.4} {:.4}",
            m.accuracy, m.balanced_accuracy, m.precision, m.recall, m.f1
        );
        let _ = writeln!(out, "\n{:<20} {:>8} {:>8}", "class", "support", "recall");
        for i in 0..self.matrix.classes() {
            if let Some(r) = self.matrix.class_recall(i) {
                let _ = writeln!(out, "{:<20} {:>8} {:>8.4}", class_name(i), self.matrix.support(i), r);
            }
        }
        let _ = writeln!(out, "\n{:<40} {:>10} {:>8}", "pair", "errors", "rate");
        for e in &self.rates.entries {
            let pair = format!("{} / {}", class_name(e.a), class_name(e.b));
            let ratio = format!("{}/{}", e.mistakes, e.support);
            let _ = writeln!(out, "{pair:<40} {ratio:>10} {:>8.4}", e.rate);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_and_table_layout() {
        let cm = confusion_matrix(&[2, 2, 10, 2], &[2, 2, 10, 10]).unwrap();
        let report = EvaluationReport::new(Variant::Full, cm).unwrap();
        let kv = report.to_kv();
        assert!(kv.starts_with("variant=full\ntest_objects=4\naccuracy=0.75\n"));
        assert!(kv.contains("confusion.IfcWindow=0,0,1,0,0,0,0,0,0,0,1\n"));
        assert!(kv.contains("rate.IfcDoor.IfcWindow=1/4 0.25\n"));
        // Only pairs touching one of the two populated classes.
        assert_eq!(kv.lines().filter(|l| l.starts_with("rate.")).count(), 19);
        let table = report.to_table();
        assert!(table.contains("IfcDoor / IfcWindow"));
        assert!(table.contains("IfcWindow"));
    }
}
