use rand::Rng;

use super::{axpy, dot, join, Module, NnError, Param, Slot, SlotMut, Tensor};

/// `y = x Wᵀ + b` with `W: out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

/// Gradients of a linear layer with respect to its three inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub x: Tensor,
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    /// Weights uniform in `±sqrt(1/fan_in)`, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (1.0 / inputs as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let weight = Tensor::from_vec(&[outputs, inputs], data).expect("sizes agree");
        Self {
            weight: Param::new(weight),
            bias: Param::new(Tensor::zeros(&[outputs])),
            input: None,
        }
    }

    pub fn from_weights(weight: Tensor, bias: Tensor) -> Result<Self, NnError> {
        if weight.shape().len() != 2 {
            return Err(NnError::ShapeMismatch {
                expected: vec![bias.len(), weight.cols()],
                found: weight.shape().to_vec(),
            });
        }
        bias.expect_shape(&[weight.rows()])?;
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.rows()
    }

    /// Multiply-accumulates per input row.
    pub fn macs(&self) -> usize {
        self.inputs() * self.outputs()
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor, NnError> {
        let y = linear_forward(x, &self.weight.value, &self.bias.value)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the gradient for the input.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let x = self.input.as_ref().ok_or(NnError::NoForwardCache)?;
        let grads = linear_backward(x, &self.weight.value, grad_out)?;
        self.weight.grad.add_assign(&grads.w)?;
        self.bias.grad.add_assign(&grads.b)?;
        Ok(grads.x)
    }
}

impl Module for Linear {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "weight"), Slot::Param(&self.weight));
        f(&join(prefix, "bias"), Slot::Param(&self.bias));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        f(&join(prefix, "weight"), SlotMut::Param(&mut self.weight));
        f(&join(prefix, "bias"), SlotMut::Param(&mut self.bias));
    }
}

pub fn linear_forward(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let (outputs, inputs) = (weight.rows(), weight.cols());
    x.expect_2d(inputs)?;
    bias.expect_shape(&[outputs])?;
    let batch = x.rows();
    let mut y = Tensor::zeros(&[batch, outputs]);
    for r in 0..batch {
        let xr = x.row(r);
        let yr = y.row_mut(r);
        for (o, out) in yr.iter_mut().enumerate() {
            *out = dot(xr, weight.row(o)) + bias.data()[o];
        }
    }
    Ok(y)
}

pub fn linear_backward(
    x: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> Result<LinearGrads, NnError> {
    let (outputs, inputs) = (weight.rows(), weight.cols());
    x.expect_2d(inputs)?;
    grad_out.expect_shape(&[x.rows(), outputs])?;
    let batch = x.rows();

    let mut gx = Tensor::zeros(&[batch, inputs]);
    for r in 0..batch {
        let g = grad_out.row(r);
        let gxr = gx.row_mut(r);
        for (o, &go) in g.iter().enumerate() {
            if go != 0.0 {
                axpy(go, weight.row(o), gxr);
            }
        }
    }

    let mut gw = Tensor::zeros(&[outputs, inputs]);
    let mut gb = Tensor::zeros(&[outputs]);
    for r in 0..batch {
        let g = grad_out.row(r);
        let xr = x.row(r);
        for (o, &go) in g.iter().enumerate() {
            if go != 0.0 {
                axpy(go, xr, gw.row_mut(o));
                gb.data_mut()[o] += go;
            }
        }
    }
    Ok(LinearGrads {
        x: gx,
        w: gw,
        b: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::fd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity() {
        let x = Tensor::from_rows(&[vec![1.5, -2.0], vec![0.0, 3.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = linear_forward(&x, &w, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn hand_arithmetic() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let b = Tensor::from_vec(&[3], vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(linear_forward(&x, &w, &b).unwrap().data(), &[1.0, 2.0, 4.0]);
    }

    #[test]
    fn shape_mismatch() {
        let x = Tensor::zeros(&[2, 3]);
        let w = Tensor::zeros(&[4, 2]);
        assert!(matches!(
            linear_forward(&x, &w, &Tensor::zeros(&[4])),
            Err(NnError::ShapeMismatch { .. })
        ));
        let mut layer = Linear::from_weights(w, Tensor::zeros(&[4])).unwrap();
        assert_eq!(layer.backward(&Tensor::zeros(&[2, 4])), Err(NnError::NoForwardCache));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, w, b) = (random(&[5, 4], &mut rng), random(&[3, 4], &mut rng), random(&[3], &mut rng));
        let r = random(&[5, 3], &mut rng);
        let grads = linear_backward(&x, &w, &r).unwrap();
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| fd::project(&linear_forward(x, w, b).unwrap(), &r);
        let nx = fd::gradient(&x, 1e-5, |x| loss(x, &w, &b));
        let nw = fd::gradient(&w, 1e-5, |w| loss(&x, w, &b));
        let nb = fd::gradient(&b, 1e-5, |b| loss(&x, &w, b));
        assert!(fd::rel_error(&grads.x, &nx) < 1e-6);
        assert!(fd::rel_error(&grads.w, &nw) < 1e-6);
        assert!(fd::rel_error(&grads.b, &nb) < 1e-6);
    }

    #[test]
    fn init_bounds_and_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = Linear::new(6, 16, &mut rng);
        assert_eq!(layer.parameter_count(), 112);
        let bound = (1.0f64 / 6.0).sqrt();
        assert!(layer.weight.value.data().iter().all(|w| w.abs() <= bound));
        assert!(layer.bias.value.data().iter().all(|&b| b == 0.0));
    }
}
