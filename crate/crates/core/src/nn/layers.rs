use rand::Rng;

use super::{join, BatchNorm, Conditioning, Linear, Mode, Module, NnError, Slot, SlotMut, Tensor};

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient mask is `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor, NnError> {
    grad_out.expect_shape(x.shape())?;
    let mut g = grad_out.clone();
    for (gi, &xi) in g.data_mut().iter_mut().zip(x.data()) {
        if xi <= 0.0 {
            *gi = 0.0;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Relu {
    input: Option<Tensor>,
}

impl Relu {
    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input = Some(x.clone());
        relu(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let x = self.input.as_ref().ok_or(NnError::NoForwardCache)?;
        relu_backward(x, grad_out)
    }

    /// The kink margin is the smallest `|x|` seen by the last forward pass.
    pub fn conditioning(&self) -> Conditioning {
        let kink_margin = self
            .input
            .as_ref()
            .map_or(f64::INFINITY, |x| x.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
        Conditioning {
            kink_margin,
            ..Conditioning::UNCONSTRAINED
        }
    }
}

/// Smallest gap between the largest and second-largest distinct value of
/// any pooled column; exact ties (such as several zeros after a ReLU) are
/// stable under small perturbations and are skipped.
fn pool_margin(x: &Tensor, argmax: &[usize]) -> f64 {
    let (k, f) = (x.shape()[1], x.shape()[2]);
    let data = x.data();
    let mut margin = f64::INFINITY;
    for (i, &j) in argmax.iter().enumerate() {
        let (b, c) = (i / f, i % f);
        let best = data[(b * k + j) * f + c];
        for p in 0..k {
            let v = data[(b * k + p) * f + c];
            if v != best {
                margin = margin.min(best - v);
            }
        }
    }
    margin
}

/// Max over the middle axis of a `batch × k × features` tensor. Returns the
/// pooled `batch × features` tensor and, per output entry, the index along
/// `k` of the first maximum.
pub fn maxpool_set(x: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
    let &[batch, k, f] = x.shape() else {
        return Err(NnError::ShapeMismatch {
            expected: vec![0, 0, 0],
            found: x.shape().to_vec(),
        });
    };
    if k == 0 {
        return Err(NnError::ShapeMismatch {
            expected: vec![batch, 1, f],
            found: x.shape().to_vec(),
        });
    }
    let data = x.data();
    let mut out = Tensor::zeros(&[batch, f]);
    let mut argmax = vec![0usize; batch * f];
    for b in 0..batch {
        let base = b * k * f;
        let (best, idx) = (out.row_mut(b), &mut argmax[b * f..(b + 1) * f]);
        best.copy_from_slice(&data[base..base + f]);
        for j in 1..k {
            let row = &data[base + j * f..base + (j + 1) * f];
            for c in 0..f {
                if row[c] > best[c] {
                    best[c] = row[c];
                    idx[c] = j;
                }
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each pooled gradient back to its recorded argmax.
pub fn maxpool_set_backward(
    grad_out: &Tensor,
    argmax: &[usize],
    k: usize,
) -> Result<Tensor, NnError> {
    let (batch, f) = (grad_out.rows(), grad_out.cols());
    if grad_out.shape().len() != 2 || argmax.len() != batch * f {
        return Err(NnError::ShapeMismatch {
            expected: vec![batch, f],
            found: grad_out.shape().to_vec(),
        });
    }
    let mut g = Tensor::zeros(&[batch, k, f]);
    let data = g.data_mut();
    for b in 0..batch {
        for c in 0..f {
            let j = argmax[b * f + c];
            data[(b * k + j) * f + c] = grad_out.row(b)[c];
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaxPoolSet {
    cache: Option<(Vec<usize>, usize)>,
    margin: f64,
}

impl MaxPoolSet {
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor, NnError> {
        let (y, argmax) = maxpool_set(x)?;
        self.margin = pool_margin(x, &argmax);
        self.cache = Some((argmax, x.shape()[1]));
        Ok(y)
    }

    /// The kink margin is the gap between winning and runner-up values.
    pub fn conditioning(&self) -> Conditioning {
        Conditioning {
            kink_margin: if self.cache.is_some() { self.margin } else { f64::INFINITY },
            ..Conditioning::UNCONSTRAINED
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let (argmax, k) = self.cache.as_ref().ok_or(NnError::NoForwardCache)?;
        maxpool_set_backward(grad_out, argmax, *k)
    }
}

/// Linear → batch norm → ReLU, the building block of every MLP in the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub linear: Linear,
    pub norm: BatchNorm,
    relu: Relu,
}

impl Stage {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            linear: Linear::new(inputs, outputs, rng),
            norm: BatchNorm::new(outputs),
            relu: Relu::default(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.linear.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.linear.outputs()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let h = self.linear.forward(x)?;
        let h = self.norm.forward(&h, mode)?;
        Ok(self.relu.forward(&h))
    }

    pub fn conditioning(&self) -> Conditioning {
        self.relu.conditioning().min(self.norm.conditioning())
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let g = self.relu.backward(grad_out)?;
        let g = self.norm.backward(&g)?;
        self.linear.backward(&g)
    }
}

impl Module for Stage {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.linear.visit(&join(prefix, "linear"), f);
        self.norm.visit(&join(prefix, "norm"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        self.linear.visit_mut(&join(prefix, "linear"), f);
        self.norm.visit_mut(&join(prefix, "norm"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::fd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_values_and_mask() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let pos = Tensor::from_vec(&[2], vec![0.5, 3.0]).unwrap();
        assert_eq!(relu(&pos), pos);
        let g = relu_backward(&x, &Tensor::filled(&[3], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn maxpool_single_element_is_identity() {
        let x = Tensor::from_vec(&[2, 1, 3], vec![1.0, -2.0, 3.0, 4.0, 5.0, -6.0]).unwrap();
        let (y, _) = maxpool_set(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn maxpool_routes_to_strict_max() {
        let x = Tensor::from_vec(&[1, 3, 2], vec![0.0, 9.0, 5.0, 1.0, 2.0, 3.0]).unwrap();
        let mut pool = MaxPoolSet::default();
        let y = pool.forward(&x).unwrap();
        assert_eq!(y.data(), &[5.0, 9.0]);
        let g = pool.backward(&Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 2.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_ties_pick_first() {
        let x = Tensor::from_vec(&[1, 3, 1], vec![4.0, 4.0, 1.0]).unwrap();
        let (_, argmax) = maxpool_set(&x).unwrap();
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn maxpool_permutation_invariant() {
        let data: Vec<f64> = (0..24).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let x = Tensor::from_vec(&[2, 4, 3], data.clone()).unwrap();
        let perm = [2, 0, 3, 1];
        let mut permuted = Vec::new();
        for b in 0..2 {
            for &j in &perm {
                permuted.extend_from_slice(&data[(b * 4 + j) * 3..(b * 4 + j + 1) * 3]);
            }
        }
        let xp = Tensor::from_vec(&[2, 4, 3], permuted).unwrap();
        assert_eq!(maxpool_set(&x).unwrap().0, maxpool_set(&xp).unwrap().0);
    }

    #[test]
    fn stage_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let stage = Stage::new(3, 5, &mut rng);
        let x = Tensor::from_vec(&[7, 3], (0..21).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let r = Tensor::from_vec(&[7, 5], (0..35).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut s = stage.clone();
        s.forward(&x, Mode::Train).unwrap();
        let dx = s.backward(&r).unwrap();
        let nx = fd::gradient(&x, 1e-5, |x| fd::project(&stage.clone().forward(x, Mode::Train).unwrap(), &r));
        assert!(fd::rel_error(&dx, &nx) < 1e-5);
    }
}
