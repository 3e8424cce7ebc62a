//! Build the default model and its ablations, then report widths,
//! parameter counts and the cost of the relational branch.

use ifc_grl::model::{count_parameters, variant_delta, ArchConfig, GrModel, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for variant in Variant::ALL {
        let model = GrModel::new(ArchConfig::with_variant(variant), 0)?;
        let report = count_parameters(&model, 1024);
        println!(
            "{:<10} geometric {:>3}  relational {:>3}  parameters {:>9}  MACs/object {:>11}",
            variant.name(),
            model.geometric_width(),
            model.relational_width(),
            report.total,
            report.macs
        );
        for (module, n) in &report.modules {
            println!("    {module:<12}{n:>9}");
        }
    }
    let (params, macs) = variant_delta(&ArchConfig::default(), 1024)?;
    println!("relational branch adds {params} parameters and {macs} MACs per object");
    Ok(())
}
