//! Metrics and pairwise confusion rates from predictions.

use ifc_grl::dataset::ClassLabel;
use ifc_grl::eval::{confusion_matrix, metrics, ConfusionRateTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (door, window, wall) = (ClassLabel::IfcDoor.code(), ClassLabel::IfcWindow.code(), ClassLabel::IfcWall.code());
    let mut labels = Vec::new();
    let mut predictions = Vec::new();
    for (truth, predicted, count) in [
        (door, door, 40),
        (door, window, 6),
        (window, window, 45),
        (window, door, 3),
        (wall, wall, 60),
        (wall, window, 1),
    ] {
        labels.extend(std::iter::repeat_n(truth, count));
        predictions.extend(std::iter::repeat_n(predicted, count));
    }

    let cm = confusion_matrix(&predictions, &labels)?;
    let m = metrics(&cm)?;
    println!(
        "accuracy {:.4}  balanced {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
        m.accuracy, m.balanced_accuracy, m.precision, m.recall, m.f1
    );
    for pair in ConfusionRateTable::from_matrix(&cm).entries.iter().filter(|p| p.mistakes > 0) {
        println!(
            "{:<12} <-> {:<12} {}/{} = {:.4}",
            ClassLabel::from_code(pair.a).unwrap().name(),
            ClassLabel::from_code(pair.b).unwrap().name(),
            pair.mistakes,
            pair.support,
            pair.rate
        );
    }
    Ok(())
}
