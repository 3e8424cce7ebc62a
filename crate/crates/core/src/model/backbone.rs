use rand::Rng;

use super::Mlp;
use crate::nn::{Conditioning, MaxPoolSet, Mode, Module, NnError, Slot, SlotMut, Tensor};

pub const DEFAULT_ENCODER_WIDTHS: [usize; 3] = [64, 128, 256];

/// Anything that maps a batch of point clouds (`batch × points × 3`) to a
/// fixed-length geometric descriptor (`batch × descriptor_size`).
pub trait GeometricBackbone: Module {
    fn descriptor_size(&self) -> usize;
    fn forward(&mut self, clouds: &Tensor, mode: Mode) -> Result<Tensor, NnError>;
    /// Accumulates parameter gradients for the last forward pass.
    fn backward(&mut self, grad_out: &Tensor) -> Result<(), NnError>;
    /// Multiply-accumulates of linear layers for one cloud of `points` points.
    fn macs(&self, points: usize) -> usize;
    /// Finite-difference conditioning of the last forward pass.
    fn conditioning(&self) -> Conditioning {
        Conditioning::UNCONSTRAINED
    }
}

/// Shared per-point MLP followed by a max over the points, so the
/// descriptor does not depend on point order.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniPointEncoder {
    pub mlp: Mlp,
    pool: MaxPoolSet,
    points: usize,
}

impl MiniPointEncoder {
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(!widths.is_empty(), "encoder needs at least one stage");
        Self {
            mlp: Mlp::new(3, widths, rng),
            pool: MaxPoolSet::default(),
            points: 0,
        }
    }
}

impl GeometricBackbone for MiniPointEncoder {
    fn descriptor_size(&self) -> usize {
        self.mlp.outputs()
    }

    fn forward(&mut self, clouds: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let &[batch, points, 3] = clouds.shape() else {
            return Err(NnError::ShapeMismatch {
                expected: vec![clouds.rows(), 0, 3],
                found: clouds.shape().to_vec(),
            });
        };
        let flat = clouds.clone().reshape(&[batch * points, 3])?;
        let features = self.mlp.forward(&flat, mode)?;
        let g = self.descriptor_size();
        self.points = points;
        self.pool.forward(&features.reshape(&[batch, points, g])?)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<(), NnError> {
        let g = self.pool.backward(grad_out)?;
        let rows = grad_out.rows() * self.points;
        self.mlp.backward(&g.reshape(&[rows, self.descriptor_size()])?)?;
        Ok(())
    }

    fn macs(&self, points: usize) -> usize {
        self.mlp.macs() * points
    }

    fn conditioning(&self) -> Conditioning {
        self.mlp.conditioning().min(self.pool.conditioning())
    }
}

impl Module for MiniPointEncoder {
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
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn descriptor_width_and_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut enc = MiniPointEncoder::new(&DEFAULT_ENCODER_WIDTHS, &mut rng);
        assert_eq!(enc.descriptor_size(), 256);
        let data: Vec<f64> = (0..2 * 5 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor::from_vec(&[2, 5, 3], data.clone()).unwrap();
        let y = enc.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[2, 256]);

        // Reverse the point order within each cloud.
        let mut permuted = Vec::new();
        for b in 0..2 {
            for p in (0..5).rev() {
                permuted.extend_from_slice(&data[(b * 5 + p) * 3..(b * 5 + p + 1) * 3]);
            }
        }
        let yp = enc.forward(&Tensor::from_vec(&[2, 5, 3], permuted).unwrap(), Mode::Eval).unwrap();
        assert_eq!(y, yp);
    }

    #[test]
    fn rejects_wrong_rank() {
        let mut enc = MiniPointEncoder::new(&[4], &mut ChaCha8Rng::seed_from_u64(0));
        assert!(enc.forward(&Tensor::zeros(&[2, 3]), Mode::Eval).is_err());
        assert_eq!(enc.macs(10), 12 * 10);
    }
}
