//! Train all four variants on the synthetic corpus and compare them. Shapes
//! alone confuse doors with windows and columns with flow segments.

use ifc_grl::eval::{ablation_suite, class_name, AblationConfig};
use ifc_grl::model::TrainConfig;
use ifc_grl::synthetic::{synthetic_split, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = synthetic_split(&SyntheticConfig { per_class: 100, seed: 0 }, 32, 0.7)?;
    let config = AblationConfig::parse(
        "# small desk-scale run
         encoder=32,64,128
         fusion=128,64,32
         epochs=10
         batch_size=32
         lr=0.001",
    )?;
    let config = AblationConfig {
        train: TrainConfig { seed: 1, ..config.train },
        ..config
    };
    let report = ablation_suite(&dataset, &config)?;
    print!("{}", report.to_table());
    for run in &report.runs {
        if let Some(worst) = run.report.rates.entries.first() {
            println!("{:<10} worst pair {} / {}: {:.4}", run.report.variant, class_name(worst.a), class_name(worst.b), worst.rate);
        }
    }
    Ok(())
}
