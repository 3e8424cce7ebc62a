use super::{join, Conditioning, Mode, Module, NnError, Param, Slot, SlotMut, Tensor};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;

/// Per-feature batch normalisation over the rows of a `batch × features` input.
///
/// Training normalises with the biased batch variance and folds the unbiased
/// variance into the running estimate; evaluation uses the running estimates
/// and never changes them.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<Cache>,
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    xhat: Tensor,
    mean: Vec<f64>,
    inv_std: Vec<f64>,
    mode: Mode,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::filled(&[features], 1.0)),
            beta: Param::new(Tensor::zeros(&[features])),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::filled(&[features], 1.0),
            momentum: BN_MOMENTUM,
            eps: BN_EPSILON,
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.value.len()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let f = self.features();
        x.expect_2d(f)?;
        let n = x.rows();

        let (mean, inv_std) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(NnError::BatchTooSmall(n));
                }
                let mut mean = vec![0.0; f];
                for r in 0..n {
                    for (m, v) in mean.iter_mut().zip(x.row(r)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; f];
                for r in 0..n {
                    for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= n as f64);

                let unbias = n as f64 / (n as f64 - 1.0);
                let m = self.momentum;
                for k in 0..f {
                    let rm = &mut self.running_mean.data_mut()[k];
                    *rm = (1.0 - m) * *rm + m * mean[k];
                    let rv = &mut self.running_var.data_mut()[k];
                    *rv = (1.0 - m) * *rv + m * var[k] * unbias;
                }
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                (mean, inv_std)
            }
            Mode::Eval => {
                let mean = self.running_mean.data().to_vec();
                let inv_std = self
                    .running_var
                    .data()
                    .iter()
                    .map(|v| 1.0 / (v + self.eps).sqrt())
                    .collect();
                (mean, inv_std)
            }
        };

        let mut xhat = x.clone();
        let mut y = Tensor::zeros(&[n, f]);
        let (gamma, beta) = (self.gamma.value.data(), self.beta.value.data());
        for r in 0..n {
            let xr = xhat.row_mut(r);
            for k in 0..f {
                xr[k] = (xr[k] - mean[k]) * inv_std[k];
            }
            let yr = y.row_mut(r);
            let xr = xhat.row(r);
            for k in 0..f {
                yr[k] = gamma[k] * xr[k] + beta[k];
            }
        }
        self.cache = Some(Cache { xhat, mean, inv_std, mode });
        Ok(y)
    }

    /// Smallest per-feature relative spread `std / sqrt(mean² + std²)` of
    /// the last training-mode pass. Near 0 the feature is almost constant
    /// over the batch and normalisation amplifies tiny input changes.
    pub fn conditioning(&self) -> Conditioning {
        let min_relative_spread = match &self.cache {
            Some(c) if c.mode == Mode::Train => c
                .inv_std
                .iter()
                .zip(&c.mean)
                .map(|(s, m)| {
                    let std = 1.0 / s;
                    std / (m * m + std * std).sqrt()
                })
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        };
        Conditioning {
            min_relative_spread,
            ..Conditioning::UNCONSTRAINED
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardCache)?;
        let f = self.features();
        grad_out.expect_shape(cache.xhat.shape())?;
        let n = grad_out.rows();

        let mut sum_g = vec![0.0; f];
        let mut sum_gx = vec![0.0; f];
        for r in 0..n {
            let (g, xh) = (grad_out.row(r), cache.xhat.row(r));
            for k in 0..f {
                sum_g[k] += g[k];
                sum_gx[k] += g[k] * xh[k];
            }
        }
        for k in 0..f {
            self.gamma.grad.data_mut()[k] += sum_gx[k];
            self.beta.grad.data_mut()[k] += sum_g[k];
        }

        let gamma = self.gamma.value.data();
        let mut dx = Tensor::zeros(&[n, f]);
        match cache.mode {
            Mode::Train => {
                let nf = n as f64;
                for r in 0..n {
                    let (g, xh) = (grad_out.row(r), cache.xhat.row(r));
                    let out = dx.row_mut(r);
                    for k in 0..f {
                        // dxhat = g·γ; dx = inv_std/N · (N·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
                        out[k] = gamma[k] * cache.inv_std[k] / nf
                            * (nf * g[k] - sum_g[k] - xh[k] * sum_gx[k]);
                    }
                }
            }
            Mode::Eval => {
                for r in 0..n {
                    let g = grad_out.row(r);
                    let out = dx.row_mut(r);
                    for k in 0..f {
                        out[k] = g[k] * gamma[k] * cache.inv_std[k];
                    }
                }
            }
        }
        Ok(dx)
    }
}

impl Module for BatchNorm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "gamma"), Slot::Param(&self.gamma));
        f(&join(prefix, "beta"), Slot::Param(&self.beta));
        f(&join(prefix, "running_mean"), Slot::Buffer(&self.running_mean));
        f(&join(prefix, "running_var"), Slot::Buffer(&self.running_var));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        f(&join(prefix, "gamma"), SlotMut::Param(&mut self.gamma));
        f(&join(prefix, "beta"), SlotMut::Param(&mut self.beta));
        f(&join(prefix, "running_mean"), SlotMut::Buffer(&mut self.running_mean));
        f(&join(prefix, "running_var"), SlotMut::Buffer(&mut self.running_var));
    }
}
