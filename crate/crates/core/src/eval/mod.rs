//! Classification metrics, pairwise confusion rates and the ablation driver.

mod ablation;
mod report;

pub use ablation::{ablation_suite, checkpoint_path, AblationConfig, AblationReport, AblationRun};
pub use report::{evaluate, EvaluationReport};

use crate::dataset::ClassLabel;
use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("class index {value} outside 0..{classes}")]
    LabelOutOfRange { value: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("classes {a} and {b} have no test samples")]
    EmptyPair { a: usize, b: usize },
    #[error("confusion rate needs two distinct classes, got {a} and {b}")]
    InvalidPair { a: usize, b: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Square count matrix; entry `(i, j)` counts objects of true class `i`
/// predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(classes: usize, predictions: &[usize], labels: &[usize]) -> Result<Self, EvalError> {
        if predictions.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                predictions: predictions.len(),
                labels: labels.len(),
            });
        }
        let mut cm = Self::new(classes);
        for (&p, &l) in predictions.iter().zip(labels) {
            cm.record(l, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<(), EvalError> {
        for value in [truth, predicted] {
            if value >= self.classes {
                return Err(EvalError::LabelOutOfRange {
                    value,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    /// Test samples of class `i`.
    pub fn support(&self, i: usize) -> u64 {
        (0..self.classes).map(|j| self.get(i, j)).sum()
    }

    /// Samples predicted as class `j`.
    pub fn predicted(&self, j: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, j)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    /// Fraction of class `i` predicted correctly, `None` without support.
    pub fn class_recall(&self, i: usize) -> Option<f64> {
        let n = self.support(i);
        (n > 0).then(|| self.get(i, i) as f64 / n as f64)
    }
}

/// Confusion matrix over the eleven object classes.
pub fn confusion_matrix(predictions: &[usize], labels: &[usize]) -> Result<ConfusionMatrix, EvalError> {
    ConfusionMatrix::from_predictions(ClassLabel::COUNT, predictions, labels)
}

/// Precision, recall and F1 are computed per class and averaged with
/// class support as weights; balanced accuracy is the plain mean of
/// per-class recall over classes that have test samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let total = total as f64;
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    let (mut recall_sum, mut present) = (0.0, 0usize);
    for i in 0..cm.classes() {
        let support = cm.support(i);
        if support == 0 {
            continue;
        }
        let hits = cm.get(i, i) as f64;
        let predicted = cm.predicted(i);
        let p = if predicted == 0 { 0.0 } else { hits / predicted as f64 };
        let r = hits / support as f64;
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let w = support as f64 / total;
        precision += w * p;
        recall += w * r;
        f1 += w * f;
        recall_sum += r;
        present += 1;
    }
    Ok(MetricsReport {
        accuracy: cm.trace() as f64 / total,
        balanced_accuracy: recall_sum / present as f64,
        precision,
        recall,
        f1,
    })
}

fn check_pair(cm: &ConfusionMatrix, a: usize, b: usize) -> Result<(), EvalError> {
    for value in [a, b] {
        if value >= cm.classes() {
            return Err(EvalError::LabelOutOfRange {
                value,
                classes: cm.classes(),
            });
        }
    }
    if a == b {
        return Err(EvalError::InvalidPair { a, b });
    }
    Ok(())
}

/// Confusion rate as an integer ratio: cross-errors between `a` and `b`
/// over the test samples of both classes.
pub fn confusion_rate_parts(cm: &ConfusionMatrix, a: usize, b: usize) -> Result<(u64, u64), EvalError> {
    check_pair(cm, a, b)?;
    let support = cm.support(a) + cm.support(b);
    if support == 0 {
        return Err(EvalError::EmptyPair { a, b });
    }
    Ok((cm.get(a, b) + cm.get(b, a), support))
}

/// `(m_ab + m_ba) / (n_a + n_b)`: how often the two classes are mistaken
/// for each other, symmetric in `a` and `b`.
pub fn confusion_rate(cm: &ConfusionMatrix, a: usize, b: usize) -> Result<f64, EvalError> {
    let (mistakes, support) = confusion_rate_parts(cm, a, b)?;
    Ok(mistakes as f64 / support as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRate {
    /// Smaller class index.
    pub a: usize,
    pub b: usize,
    pub mistakes: u64,
    pub support: u64,
    pub rate: f64,
}

/// Every unordered class pair with test samples, highest rate first and
/// ties ordered by `(a, b)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfusionRateTable {
    pub entries: Vec<PairRate>,
}

impl ConfusionRateTable {
    pub fn from_matrix(cm: &ConfusionMatrix) -> Self {
        let mut entries = Vec::new();
        for a in 0..cm.classes() {
            for b in a + 1..cm.classes() {
                if let Ok((mistakes, support)) = confusion_rate_parts(cm, a, b) {
                    entries.push(PairRate {
                        a,
                        b,
                        mistakes,
                        support,
                        rate: mistakes as f64 / support as f64,
                    });
                }
            }
        }
        entries.sort_by(|x, y| y.rate.total_cmp(&x.rate).then((x.a, x.b).cmp(&(y.a, y.b))));
        Self { entries }
    }

    /// Highest pairwise rate, 0 when there are no pairs.
    pub fn max_rate(&self) -> f64 {
        self.entries.first().map_or(0.0, |e| e.rate)
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&PairRate> {
        let (a, b) = (a.min(b), a.max(b));
        self.entries.iter().find(|e| e.a == a && e.b == b)
    }
}

/// Display name for a class index.
pub fn class_name(index: usize) -> String {
    ClassLabel::from_code(index).map_or_else(|| format!("class{index}"), |c| c.name().to_string())
}
