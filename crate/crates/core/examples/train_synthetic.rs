//! Train the full model on the synthetic corpus, save it, reload it and
//! evaluate the checkpoint.

use ifc_grl::eval::evaluate;
use ifc_grl::model::{load_model, save_model, train, ArchConfig, GrModel, TrainConfig};
use ifc_grl::synthetic::{synthetic_split, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = synthetic_split(&SyntheticConfig { per_class: 100, seed: 0 }, 32, 0.7)?;
    let arch = ArchConfig {
        encoder_widths: vec![32, 64, 128],
        fusion_widths: vec![128, 64, 32],
        ..ArchConfig::default()
    };
    let config = TrainConfig { epochs: 10, batch_size: 32, ..TrainConfig::default() };
    let mut model = GrModel::new(arch, config.seed)?;
    let outcome = train(&mut model, &dataset, &config)?;
    for record in &outcome.history {
        println!("epoch {:>2}  loss {:.4}  test accuracy {:.4}", record.epoch, record.train_loss, record.test_accuracy.unwrap_or(f64::NAN));
    }
    println!("kept epoch {:?}", outcome.best_epoch);

    let dir = tempfile::tempdir()?;
    let ckpt = dir.path().join("full.ckpt");
    save_model(&model, &ckpt)?;
    let mut restored = load_model(&ckpt)?;
    print!("{}", evaluate(&mut restored, &dataset)?.to_table());
    Ok(())
}
