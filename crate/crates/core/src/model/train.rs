use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GeometricBackbone, GrModel, ModelError, ModelInput};
use crate::dataset::{BimObject, DatasetSplit};
use crate::nn::{read_checkpoint, restore, write_checkpoint, Adam, AdamConfig, Module};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 50,
            seed: 0,
            weight_decay: 0.0,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub train_loss: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights the model holds after training, when a test set
    /// was available to pick it.
    pub best_epoch: Option<usize>,
    pub best_test_accuracy: Option<f64>,
}

/// Eval-mode predictions for `objects`, in batches of `batch_size`.
pub fn predict_objects<B: GeometricBackbone>(
    model: &mut GrModel<B>,
    objects: &[BimObject],
    batch_size: usize,
) -> Result<Vec<usize>, ModelError> {
    let mut out = Vec::with_capacity(objects.len());
    for chunk in objects.chunks(batch_size.max(1)) {
        let refs: Vec<&BimObject> = chunk.iter().collect();
        let input = ModelInput::from_objects(&refs, model.arch().transform)?;
        out.extend(model.predict(&input)?);
    }
    Ok(out)
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

fn snapshot(model: &dyn Module) -> Result<Vec<u8>, ModelError> {
    let mut bytes = Vec::new();
    write_checkpoint(model, &mut bytes)?;
    Ok(bytes)
}

/// Mini-batch Adam training. The training order is reshuffled every epoch
/// from `config.seed`; a trailing batch of one object is skipped because
/// batch statistics need two rows. When a test set exists the weights of
/// the epoch with the best test accuracy (earliest on ties) are kept.
pub fn train<B: GeometricBackbone>(
    model: &mut GrModel<B>,
    split: &DatasetSplit,
    config: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    let mut outcome = TrainOutcome::default();
    if config.epochs == 0 {
        return Ok(outcome);
    }
    if split.train.len() < 2 {
        return Err(ModelError::EmptyDataset);
    }
    let batch_size = config.batch_size.max(2);
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let test_labels: Vec<usize> = split.test.iter().map(|o| o.label.code()).collect();
    let mut best: Option<Vec<u8>> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0;
        for chunk in order.chunks(batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let refs: Vec<&BimObject> = chunk.iter().map(|&i| &split.train[i]).collect();
            let input = ModelInput::from_objects(&refs, model.arch().transform)?;
            model.zero_grad();
            let loss = model.loss_and_backward(&input)?;
            adam.step(model)?;
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }

        let test_accuracy = if split.test.is_empty() {
            None
        } else {
            let predictions = predict_objects(model, &split.test, batch_size)?;
            Some(accuracy(&predictions, &test_labels))
        };
        if let Some(acc) = test_accuracy {
            if outcome.best_test_accuracy.is_none_or(|b| acc > b) {
                outcome.best_test_accuracy = Some(acc);
                outcome.best_epoch = Some(epoch);
                best = Some(snapshot(model)?);
            }
        }
        outcome.history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            test_accuracy,
        });
    }

    if let Some(bytes) = best {
        restore(model, &read_checkpoint(bytes.as_slice())?)?;
    }
    Ok(outcome)
}
