use super::{ArchConfig, GeometricBackbone, GrModel, ModelError, Variant};
use crate::nn::Module;

/// Trainable scalars per module and linear-layer multiply-accumulates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterReport {
    pub variant: Variant,
    /// `(module, parameters)` in registry order; absent modules are omitted.
    pub modules: Vec<(&'static str, usize)>,
    pub total: usize,
    /// Linear-layer MACs for one object with `points` points.
    pub macs: usize,
    pub points: usize,
}

pub fn count_parameters<B: GeometricBackbone>(model: &GrModel<B>, points: usize) -> ParameterReport {
    let mut modules = Vec::new();
    let mut macs = 0;
    if let Some(b) = &model.backbone {
        modules.push(("backbone", b.parameter_count()));
        macs += b.macs(points);
    }
    if let Some(r) = &model.relational {
        modules.push(("relational", r.parameter_count()));
        macs += r.mlp.macs();
    }
    if let Some(f) = &model.fusion {
        modules.push(("fusion", f.parameter_count()));
        macs += f.macs();
    }
    modules.push(("classifier", model.classifier.parameter_count()));
    macs += model.classifier.macs();
    ParameterReport {
        variant: model.variant(),
        total: modules.iter().map(|(_, n)| n).sum(),
        modules,
        macs,
        points,
    }
}

impl ParameterReport {
    pub fn get(&self, module: &str) -> usize {
        self.modules
            .iter()
            .find(|(m, _)| *m == module)
            .map_or(0, |(_, n)| *n)
    }
}

/// Parameter and MAC cost of adding the relational branch: the full model
/// minus the geometric-only model with the same widths.
pub fn variant_delta(arch: &ArchConfig, points: usize) -> Result<(i64, i64), ModelError> {
    let build = |variant| {
        let arch = ArchConfig {
            variant,
            ..arch.clone()
        };
        GrModel::new(arch, 0).map(|m| count_parameters(&m, points))
    };
    let full = build(Variant::Full)?;
    let geo = build(Variant::GeometricOnly)?;
    Ok((
        full.total as i64 - geo.total as i64,
        full.macs as i64 - geo.macs as i64,
    ))
}
