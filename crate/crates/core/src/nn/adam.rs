use super::{Module, NnError, SlotMut};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Moment estimates of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<(), NnError> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(NnError::ShapeMismatch {
            expected: vec![params.len()],
            found: vec![grads.len()],
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i] + config.weight_decay * params[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
    }
    Ok(())
}

/// Adam over every parameter a [`Module`] registers, in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            states: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.states.first().map_or(0, |s| s.t)
    }

    pub fn step(&mut self, module: &mut dyn Module) -> Result<(), NnError> {
        let config = self.config;
        let states = &mut self.states;
        let mut index = 0;
        let mut result = Ok(());
        module.visit_mut("", &mut |_, slot| {
            let SlotMut::Param(p) = slot else { return };
            if result.is_err() {
                return;
            }
            if states.len() == index {
                states.push(AdamState::new(p.value.len()));
            }
            let grad = p.grad.data().to_vec();
            result = adam_step(p.value.data_mut(), &grad, &mut states[index], &config);
            index += 1;
        });
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let config = AdamConfig::with_lr(0.01);
        for g in [0.5, -3.0, 1e-3] {
            let mut w = [1.0];
            let mut state = AdamState::new(1);
            adam_step(&mut w, &[g], &mut state, &config).unwrap();
            let moved = 1.0 - w[0];
            let expected = config.lr * g / (g.abs() + config.eps);
            assert!((moved - expected).abs() < 1e-15);
            assert!((moved.abs() - config.lr).abs() < config.lr * 1e-5);
        }
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut w = [0.3, -2.0];
        let mut state = AdamState::new(2);
        for _ in 0..100 {
            adam_step(&mut w, &[0.0, 0.0], &mut state, &AdamConfig::default()).unwrap();
        }
        assert_eq!(w, [0.3, -2.0]);
        assert_eq!(state.t, 100);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut w = [0.0];
        let mut state = AdamState::new(1);
        let config = AdamConfig::with_lr(0.1);
        for _ in 0..200 {
            let g = 2.0 * (w[0] - 3.0);
            adam_step(&mut w, &[g], &mut state, &config).unwrap();
            assert!(state.v[0] >= 0.0);
        }
        assert!((w[0] - 3.0).abs() < 0.05, "{}", w[0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut w = [0.0; 2];
        assert!(adam_step(&mut w, &[1.0], &mut AdamState::new(2), &AdamConfig::default()).is_err());
    }
}
