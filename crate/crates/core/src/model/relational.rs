use rand::Rng;

use super::Mlp;
use crate::nn::{Conditioning, Mode, Module, NnError, Slot, SlotMut, Tensor};
use crate::relations::RelationCountVector;

pub const RELATION_INPUTS: usize = 6;
pub const DEFAULT_RELATIONAL_WIDTHS: [usize; 6] = [16, 32, 64, 64, 96, 128];
/// 1-based stages whose outputs form the descriptor.
pub const DEFAULT_TAPS: [usize; 3] = [2, 4, 6];
pub const RELATIONAL_DESCRIPTOR: usize = 224;

/// How raw relation counts are fed to the extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelationTransform {
    /// `x ↦ ln(1 + x)`, compressing unbounded counts.
    #[default]
    Log1p,
    Raw,
}

impl RelationTransform {
    pub fn apply(self, v: &RelationCountVector) -> [f64; 6] {
        v.0.map(|c| match self {
            RelationTransform::Log1p => (c as f64).ln_1p(),
            RelationTransform::Raw => c as f64,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationTransform::Log1p => "log1p",
            RelationTransform::Raw => "raw",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "log1p" => Some(RelationTransform::Log1p),
            "raw" => Some(RelationTransform::Raw),
            _ => None,
        }
    }
}

/// Stacked stages over the relation vector whose tapped outputs are
/// concatenated into a multi-scale descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalExtractor {
    pub mlp: Mlp,
    taps: Vec<usize>,
}

impl RelationalExtractor {
    /// `taps` are 1-based stage indices in ascending order; the last stage
    /// must be tapped.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], taps: &[usize], rng: &mut R) -> Self {
        assert!(
            taps.windows(2).all(|w| w[0] < w[1]) && taps.last() == Some(&widths.len()) && taps[0] >= 1,
            "taps {taps:?} invalid for {} stages",
            widths.len()
        );
        let extractor = Self {
            mlp: Mlp::new(RELATION_INPUTS, widths, rng),
            taps: taps.to_vec(),
        };
        let width: usize = taps.iter().map(|&t| widths[t - 1]).sum();
        assert_eq!(extractor.descriptor_size(), width);
        extractor
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    fn tap_widths(&self) -> Vec<usize> {
        self.taps.iter().map(|&t| self.mlp.stages[t - 1].outputs()).collect()
    }

    pub fn descriptor_size(&self) -> usize {
        self.tap_widths().iter().sum()
    }

    pub fn conditioning(&self) -> Conditioning {
        self.mlp.conditioning()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        x.expect_2d(RELATION_INPUTS)?;
        let mut outputs = Vec::with_capacity(self.taps.len());
        let mut h = x.clone();
        for (i, stage) in self.mlp.stages.iter_mut().enumerate() {
            h = stage.forward(&h, mode)?;
            if self.taps.contains(&(i + 1)) {
                outputs.push(h.clone());
            }
        }
        Tensor::concat_cols(&outputs.iter().collect::<Vec<_>>())
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let mut parts = grad_out.split_cols(&self.tap_widths())?;
        let last = self.mlp.stages.len();
        let mut g = Tensor::zeros(&[grad_out.rows(), self.mlp.outputs()]);
        for i in (0..last).rev() {
            if let Some(k) = self.taps.iter().position(|&t| t == i + 1) {
                g.add_assign(&parts[k])?;
                parts[k] = Tensor::zeros(&[0]);
            }
            g = self.mlp.stages[i].backward(&g)?;
        }
        Ok(g)
    }
}

impl Module for RelationalExtractor {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.mlp.visit(prefix, f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        self.mlp.visit_mut(prefix, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::fd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_descriptor_is_224_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ex = RelationalExtractor::new(&DEFAULT_RELATIONAL_WIDTHS, &DEFAULT_TAPS, &mut rng);
        assert_eq!(ex.mlp.stages.len(), 6);
        assert_eq!(ex.descriptor_size(), RELATIONAL_DESCRIPTOR);
        let y = ex.forward(&Tensor::zeros(&[5, 6]), Mode::Train).unwrap();
        assert_eq!(y.shape(), &[5, 224]);
        assert!(y.all_finite());
    }

    #[test]
    fn identical_rows_identical_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ex = RelationalExtractor::new(&DEFAULT_RELATIONAL_WIDTHS, &DEFAULT_TAPS, &mut rng);
        let row = vec![0.0, 1.0, 0.0, 0.7, 0.0, 2.0];
        let x = Tensor::from_rows(&[row.clone(), vec![1.0; 6], row]).unwrap();
        let y = ex.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.row(0), y.row(2));
    }

    #[test]
    fn taps_are_stage_outputs_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ex = RelationalExtractor::new(&DEFAULT_RELATIONAL_WIDTHS, &DEFAULT_TAPS, &mut rng);
        let x = Tensor::from_rows(&[vec![1.0, 0.0, 2.0, 0.0, 1.0, 0.0], vec![0.0, 3.0, 0.0, 1.0, 0.0, 1.0]]).unwrap();
        let y = ex.forward(&x, Mode::Eval).unwrap();
        let mut h = x;
        let mut stages = Vec::new();
        for s in &mut ex.mlp.stages {
            h = s.forward(&h, Mode::Eval).unwrap();
            stages.push(h.clone());
        }
        let expected = Tensor::concat_cols(&[&stages[1], &stages[3], &stages[5]]).unwrap();
        assert_eq!(y, expected);
    }

    #[test]
    fn gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ex = RelationalExtractor::new(&[4, 3, 5, 2], &[1, 3, 4], &mut rng);
        let x = Tensor::from_vec(&[4, 6], (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let r = Tensor::from_vec(&[4, 11], (0..44).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        ex.forward(&x, Mode::Train).unwrap();
        let gx = ex.backward(&r).unwrap();
        let num = fd::gradient(&x, 1e-5, |x| fd::project(&ex.clone().forward(x, Mode::Train).unwrap(), &r));
        assert!(fd::rel_error(&gx, &num) < 1e-5);
    }

    #[test]
    fn transforms() {
        let v = RelationCountVector([0, 1, 3, 0, 0, 0]);
        assert_eq!(RelationTransform::Raw.apply(&v), [0.0, 1.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(RelationTransform::Log1p.apply(&v)[1], 2f64.ln());
        assert_eq!(RelationTransform::from_name("log1p"), Some(RelationTransform::Log1p));
    }
}
