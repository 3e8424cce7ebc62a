//! The two-branch classifier: a geometric backbone and a relational
//! extractor whose descriptors are fused by an MLP and classified.

mod backbone;
mod count;
mod mlp;
mod relational;
mod train;

use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use backbone::{GeometricBackbone, MiniPointEncoder, DEFAULT_ENCODER_WIDTHS};
pub use count::{count_parameters, variant_delta, ParameterReport};
pub use mlp::Mlp;
pub use relational::{
    RelationTransform, RelationalExtractor, DEFAULT_RELATIONAL_WIDTHS, DEFAULT_TAPS,
    RELATIONAL_DESCRIPTOR, RELATION_INPUTS,
};
pub use train::{accuracy, predict_objects, train, EpochRecord, TrainConfig, TrainOutcome};

use crate::dataset::{BimObject, ClassLabel};
use crate::nn::{
    join, load_checkpoint, Conditioning, save_checkpoint, softmax_cross_entropy, Linear, Mode, Module, NnError,
    Slot, SlotMut, Tensor,
};

pub const ARCH_TAG: &str = "ifc-grl-arch/1";
pub const DEFAULT_FUSION_WIDTHS: [usize; 3] = [512, 256, 128];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("the {variant} variant needs {missing} input")]
    VariantMismatch {
        variant: Variant,
        missing: &'static str,
    },
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("nothing to train on")]
    EmptyDataset,
}

/// Which branches and modules are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Full,
    /// Relational branch removed.
    GeometricOnly,
    /// Geometric branch removed.
    RelationalOnly,
    /// Descriptors go straight to the classifier.
    NoFusion,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::GeometricOnly,
        Variant::RelationalOnly,
        Variant::NoFusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::GeometricOnly => "geo",
            Variant::RelationalOnly => "rel",
            Variant::NoFusion => "nofusion",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "full" => Some(Variant::Full),
            "geo" | "geometric_only" => Some(Variant::GeometricOnly),
            "rel" | "relational_only" => Some(Variant::RelationalOnly),
            "nofusion" | "no_fusion" => Some(Variant::NoFusion),
            _ => None,
        }
    }

    pub fn uses_geometry(self) -> bool {
        self != Variant::RelationalOnly
    }

    pub fn uses_relations(self) -> bool {
        self != Variant::GeometricOnly
    }

    pub fn uses_fusion(self) -> bool {
        self != Variant::NoFusion
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Layer widths and wiring. Serialized as `key=value` lines after the
/// `ifc-grl-arch/1` tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub variant: Variant,
    pub encoder_widths: Vec<usize>,
    pub relational_widths: Vec<usize>,
    pub taps: Vec<usize>,
    /// Fusion stages after the first, which keeps its input width.
    pub fusion_widths: Vec<usize>,
    pub classes: usize,
    pub transform: RelationTransform,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            encoder_widths: DEFAULT_ENCODER_WIDTHS.to_vec(),
            relational_widths: DEFAULT_RELATIONAL_WIDTHS.to_vec(),
            taps: DEFAULT_TAPS.to_vec(),
            fusion_widths: DEFAULT_FUSION_WIDTHS.to_vec(),
            classes: ClassLabel::COUNT,
            transform: RelationTransform::Log1p,
        }
    }
}

fn list(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, ModelError> {
    value
        .split(',')
        .map(|v| v.trim().parse::<usize>().ok().filter(|&w| w > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| ModelError::InvalidArch(format!("{key}={value}")))
}

impl ArchConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidArch(m.to_string()));
        if self.encoder_widths.is_empty() || self.relational_widths.is_empty() || self.fusion_widths.is_empty() {
            return bad("every stage list needs at least one width");
        }
        if self.taps.is_empty()
            || self.taps[0] == 0
            || !self.taps.windows(2).all(|w| w[0] < w[1])
            || self.taps.last() != Some(&self.relational_widths.len())
        {
            return bad("taps must ascend from 1 and end at the last relational stage");
        }
        if self.classes < 2 {
            return bad("at least two classes are needed");
        }
        let zero = |v: &[usize]| v.contains(&0);
        if zero(&self.encoder_widths) || zero(&self.relational_widths) || zero(&self.fusion_widths) {
            return bad("widths must be positive");
        }
        Ok(())
    }

    pub fn relational_descriptor(&self) -> usize {
        self.taps.iter().map(|&t| self.relational_widths[t - 1]).sum()
    }

    pub fn to_text(&self) -> String {
        format!(
            "{ARCH_TAG}\nvariant={}\nencoder={}\nrelational={}\ntaps={}\nfusion={}\nclasses={}\ntransform={}\n",
            self.variant,
            list(&self.encoder_widths),
            list(&self.relational_widths),
            list(&self.taps),
            list(&self.fusion_widths),
            self.classes,
            self.transform.name()
        )
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut lines = text.lines();
        if lines.next() != Some(ARCH_TAG) {
            return Err(ModelError::InvalidArch(format!("missing {ARCH_TAG} tag")));
        }
        let mut arch = ArchConfig::default();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ModelError::InvalidArch(line.to_string()))?;
            match key {
                "variant" => {
                    arch.variant = Variant::from_name(value)
                        .ok_or_else(|| ModelError::InvalidArch(line.to_string()))?
                }
                "encoder" => arch.encoder_widths = parse_list(key, value)?,
                "relational" => arch.relational_widths = parse_list(key, value)?,
                "taps" => arch.taps = parse_list(key, value)?,
                "fusion" => arch.fusion_widths = parse_list(key, value)?,
                "classes" => {
                    arch.classes = value
                        .parse()
                        .map_err(|_| ModelError::InvalidArch(line.to_string()))?
                }
                "transform" => {
                    arch.transform = RelationTransform::from_name(value)
                        .ok_or_else(|| ModelError::InvalidArch(line.to_string()))?
                }
                _ => return Err(ModelError::InvalidArch(format!("unknown key {key}"))),
            }
        }
        arch.validate()?;
        Ok(arch)
    }
}

/// A batch prepared for the model. Either part may be absent; variants that
/// need a missing part refuse the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    /// `batch × points × 3`.
    pub clouds: Option<Tensor>,
    /// `batch × 6`, already transformed.
    pub relations: Option<Tensor>,
    pub labels: Vec<usize>,
}

impl ModelInput {
    pub fn from_objects(objects: &[&BimObject], transform: RelationTransform) -> Result<Self, ModelError> {
        let points = objects.first().map_or(0, |o| o.cloud.len());
        let mut clouds = Vec::with_capacity(objects.len() * points * 3);
        let mut relations = Vec::with_capacity(objects.len() * RELATION_INPUTS);
        for o in objects {
            if o.cloud.len() != points {
                return Err(NnError::ShapeMismatch {
                    expected: vec![points, 3],
                    found: vec![o.cloud.len(), 3],
                }
                .into());
            }
            clouds.extend(o.cloud.points.iter().flatten().map(|&c| f64::from(c)));
            relations.extend(transform.apply(&o.relation));
        }
        let batch = objects.len();
        Ok(Self {
            clouds: Some(Tensor::from_vec(&[batch, points, 3], clouds)?),
            relations: Some(Tensor::from_vec(&[batch, RELATION_INPUTS], relations)?),
            labels: objects.iter().map(|o| o.label.code()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// The classifier. `B` is the geometric backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct GrModel<B: GeometricBackbone = MiniPointEncoder> {
    arch: ArchConfig,
    pub backbone: Option<B>,
    pub relational: Option<RelationalExtractor>,
    pub fusion: Option<Mlp>,
    pub classifier: Linear,
}

impl GrModel<MiniPointEncoder> {
    /// Builds the variant in `arch` with weights drawn from `seed`. Models
    /// of different variants built from the same seed share the initial
    /// weights of the modules they have in common.
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self, ModelError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Always drawn so the relational stream does not depend on the variant.
        let encoder = MiniPointEncoder::new(&arch.encoder_widths, &mut rng);
        let backbone = arch.variant.uses_geometry().then_some(encoder);
        Self::assemble(arch, backbone, &mut rng)
    }
}

impl<B: GeometricBackbone> GrModel<B> {
    /// Builds a model around a caller-supplied backbone; `backbone` must be
    /// `None` exactly for the relational-only variant.
    pub fn with_backbone(arch: ArchConfig, backbone: Option<B>, seed: u64) -> Result<Self, ModelError> {
        arch.validate()?;
        if backbone.is_some() != arch.variant.uses_geometry() {
            return Err(ModelError::InvalidArch(format!(
                "the {} variant {} a geometric backbone",
                arch.variant,
                if arch.variant.uses_geometry() { "needs" } else { "takes no" }
            )));
        }
        Self::assemble(arch, backbone, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn assemble(arch: ArchConfig, backbone: Option<B>, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        let variant = arch.variant;
        let relational = RelationalExtractor::new(&arch.relational_widths, &arch.taps, rng);
        let relational = variant.uses_relations().then_some(relational);
        let geo = backbone.as_ref().map_or(0, |b| b.descriptor_size());
        let rel = relational.as_ref().map_or(0, |r| r.descriptor_size());
        let fused = geo + rel;
        let fusion = variant.uses_fusion().then(|| {
            let mut widths = vec![fused];
            widths.extend(&arch.fusion_widths);
            Mlp::new(fused, &widths, rng)
        });
        let head_in = fusion.as_ref().map_or(fused, Mlp::outputs);
        let classifier = Linear::new(head_in, arch.classes, rng);
        Ok(Self {
            arch,
            backbone,
            relational,
            fusion,
            classifier,
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn variant(&self) -> Variant {
        self.arch.variant
    }

    pub fn geometric_width(&self) -> usize {
        self.backbone.as_ref().map_or(0, |b| b.descriptor_size())
    }

    pub fn relational_width(&self) -> usize {
        self.relational.as_ref().map_or(0, |r| r.descriptor_size())
    }

    /// Finite-difference conditioning of the last forward pass; gradient
    /// checks are only meaningful when both margins are well above the step.
    pub fn conditioning(&self) -> Conditioning {
        let none = Conditioning::UNCONSTRAINED;
        let backbone = self.backbone.as_ref().map_or(none, |b| b.conditioning());
        let relational = self.relational.as_ref().map_or(none, |r| r.conditioning());
        let fusion = self.fusion.as_ref().map_or(none, Mlp::conditioning);
        backbone.min(relational).min(fusion)
    }

    /// Descriptor entering the classifier (after fusion when present).
    pub fn descriptor(&mut self, input: &ModelInput, mode: Mode) -> Result<Tensor, ModelError> {
        let variant = self.variant();
        let mut parts = Vec::with_capacity(2);
        if let Some(backbone) = &mut self.backbone {
            let clouds = input.clouds.as_ref().ok_or(ModelError::VariantMismatch {
                variant,
                missing: "point cloud",
            })?;
            parts.push(backbone.forward(clouds, mode)?);
        }
        if let Some(relational) = &mut self.relational {
            let relations = input.relations.as_ref().ok_or(ModelError::VariantMismatch {
                variant,
                missing: "relation vector",
            })?;
            parts.push(relational.forward(relations, mode)?);
        }
        let joined = if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Tensor::concat_cols(&parts.iter().collect::<Vec<_>>())?
        };
        match &mut self.fusion {
            Some(fusion) => Ok(fusion.forward(&joined, mode)?),
            None => Ok(joined),
        }
    }

    pub fn forward(&mut self, input: &ModelInput, mode: Mode) -> Result<Tensor, ModelError> {
        let d = self.descriptor(input, mode)?;
        Ok(self.classifier.forward(&d)?)
    }

    /// Accumulates gradients of every parameter for the last forward pass.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<(), ModelError> {
        let mut g = self.classifier.backward(grad_logits)?;
        if let Some(fusion) = &mut self.fusion {
            g = fusion.backward(&g)?;
        }
        let widths = [self.geometric_width(), self.relational_width()];
        let mut parts = g.split_cols(&widths)?.into_iter();
        let (g_geo, g_rel) = (parts.next().expect("two parts"), parts.next().expect("two parts"));
        if let Some(backbone) = &mut self.backbone {
            backbone.backward(&g_geo)?;
        }
        if let Some(relational) = &mut self.relational {
            relational.backward(&g_rel)?;
        }
        Ok(())
    }

    /// Training-mode loss for `input`, with gradients accumulated.
    pub fn loss_and_backward(&mut self, input: &ModelInput) -> Result<f64, ModelError> {
        let logits = self.forward(input, Mode::Train)?;
        let (loss, grad) = softmax_cross_entropy(&logits, &input.labels)?;
        self.backward(&grad)?;
        Ok(loss)
    }

    /// Evaluation-mode class predictions (first maximum on ties).
    pub fn predict(&mut self, input: &ModelInput) -> Result<Vec<usize>, ModelError> {
        let logits = self.forward(input, Mode::Eval)?;
        Ok((0..logits.rows())
            .map(|r| {
                let row = logits.row(r);
                (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best })
            })
            .collect())
    }
}

impl<B: GeometricBackbone> Module for GrModel<B> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        if let Some(b) = &self.backbone {
            b.visit(&join(prefix, "backbone"), f);
        }
        if let Some(r) = &self.relational {
            r.visit(&join(prefix, "relational"), f);
        }
        if let Some(m) = &self.fusion {
            m.visit(&join(prefix, "fusion"), f);
        }
        self.classifier.visit(&join(prefix, "classifier"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        if let Some(b) = &mut self.backbone {
            b.visit_mut(&join(prefix, "backbone"), f);
        }
        if let Some(r) = &mut self.relational {
            r.visit_mut(&join(prefix, "relational"), f);
        }
        if let Some(m) = &mut self.fusion {
            m.visit_mut(&join(prefix, "fusion"), f);
        }
        self.classifier.visit_mut(&join(prefix, "classifier"), f);
    }
}

/// Architecture file stored next to a checkpoint.
pub fn arch_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("arch")
}

/// Writes the checkpoint and its architecture file.
pub fn save_model(model: &GrModel, checkpoint: &Path) -> Result<(), ModelError> {
    save_checkpoint(model, checkpoint)?;
    std::fs::write(arch_path(checkpoint), model.arch().to_text()).map_err(|e| ModelError::Io(e.to_string()))
}

pub fn load_model(checkpoint: &Path) -> Result<GrModel, ModelError> {
    let path = arch_path(checkpoint);
    let text = std::fs::read_to_string(&path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    let mut model = GrModel::new(ArchConfig::parse(&text)?, 0)?;
    load_checkpoint(&mut model, checkpoint)?;
    Ok(model)
}
