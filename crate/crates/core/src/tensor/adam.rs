use super::params::{ParamGrads, ParamStore};
use super::{Real, Tensor, TensorError};

/// Adam hyperparameters with a staircase exponential learning-rate decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplier applied once every `decay_interval` steps.
    pub decay: f64,
    pub decay_interval: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay: 0.98,
            decay_interval: 400,
        }
    }
}

impl AdamConfig {
    /// `lr · decay^⌊step / interval⌋`.
    pub fn learning_rate_at(&self, step: u64) -> f64 {
        let k = step / self.decay_interval.max(1);
        self.learning_rate * self.decay.powi(k as i32)
    }
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, params: &ParamStore<T>) -> Self {
        let zeros = || params.iter().map(|(_, _, p)| Tensor::zeros(p.shape())).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    /// Restores moment estimates, e.g. from a checkpoint.
    pub fn from_state(
        config: AdamConfig,
        m: Vec<Tensor<T>>,
        v: Vec<Tensor<T>>,
        step: u64,
    ) -> Self {
        Self { config, m, v, step }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor<T>], &[Tensor<T>]) {
        (&self.m, &self.v)
    }

    /// Learning rate the next call to [`Adam::step`] will use.
    pub fn current_learning_rate(&self) -> f64 {
        self.config.learning_rate_at(self.step)
    }

    /// One bias-corrected Adam update of every parameter.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamGrads<T>) -> Result<(), TensorError> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                lhs: vec![params.len()],
                rhs: vec![grads.len()],
            });
        }
        for (id, g) in grads.iter() {
            if params.get(id).shape() != g.shape() || self.m[id.index()].shape() != g.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    lhs: params.get(id).shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }

        let lr = self.current_learning_rate();
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let (inv_bc1, inv_bc2) = (T::of(1.0 / bc1), T::of(1.0 / bc2));
        let (lr, eps) = (T::of(lr), T::of(c.eps));

        for (id, g) in grads.iter() {
            let i = id.index();
            let p = params.get_mut(id).data_mut();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for j in 0..p.len() {
                let gj = g.data()[j];
                m[j] = b1 * m[j] + one_b1 * gj;
                v[j] = b2 * v[j] + one_b2 * gj * gj;
                let m_hat = m[j] * inv_bc1;
                let v_hat = v[j] * inv_bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> (ParamStore<f64>, super::super::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::full(&[2, 3], v));
        (s, id)
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let (mut s, id) = store(0.7);
        let mut adam = Adam::new(AdamConfig::default(), &s);
        let g = ParamGrads::zeros_like(&s);
        for _ in 0..5 {
            adam.step(&mut s, &g).unwrap();
        }
        assert_eq!(s.get(id).data(), &[0.7; 6]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = 1, v̂ = 1 after one step with g = 1, so Δ = -lr / (1 + ε).
        let (mut s, id) = store(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &s);
        let mut g = ParamGrads::zeros_like(&s);
        g.get_mut(id).data_mut().fill(1.0);
        adam.step(&mut s, &g).unwrap();
        let expected = -0.002 / (1.0 + 1e-8);
        for &x in s.get(id).data() {
            assert!((x - expected).abs() < 1e-15, "{x}");
        }
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn staircase_decay() {
        let c = AdamConfig::default();
        assert_eq!(c.learning_rate_at(0), 0.002);
        assert_eq!(c.learning_rate_at(399), 0.002);
        assert!((c.learning_rate_at(400) - 0.00196).abs() < 1e-15);
        assert!((c.learning_rate_at(800) - 0.0019208).abs() < 1e-15);
    }

    #[test]
    fn mismatched_gradients_are_rejected() {
        let (mut s, _) = store(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &s);
        let mut other = ParamStore::new();
        other.add("w", Tensor::<f64>::zeros(&[3, 2]));
        let g = ParamGrads::zeros_like(&other);
        assert!(adam.step(&mut s, &g).is_err());
    }
}
