use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam with a staircase learning-rate schedule
/// `lr = base_lr * decay_rate ^ floor(step / decay_steps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub base_lr: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>, base_lr: f64, decay_rate: f64, decay_steps: u64) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            base_lr,
            decay_rate,
            decay_steps: decay_steps.max(1),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            v: m.clone(),
            m,
        }
    }

    /// Learning rate applied by the next update.
    pub fn learning_rate(&self) -> f64 {
        self.base_lr * self.decay_rate.powf((self.step / self.decay_steps) as f64)
    }

    pub fn update(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Shape {
                expected: format!("{} tensors", self.m.len()),
                got: format!("{} params, {} grads", params.len(), grads.len()),
            });
        }
        if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("non-finite gradient in tensor {k} at step {}", self.step)));
        }
        let lr = self.learning_rate();
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.shape() != g.shape() {
                return Err(Error::Shape { expected: format!("{:?}", p.shape()), got: format!("{:?}", g.shape()) });
            }
            for (((w, &g), m), v) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Tensor {
        Tensor::from_vec(&[1], vec![x]).unwrap()
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut p = vec![scalar(0.7), Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap()];
        let before = p.clone();
        let mut adam = AdamState::new(&p, 1e-2, 0.95, 10_000);
        let grads: Vec<Tensor> = p.iter().map(|t| Tensor::zeros(t.shape())).collect();
        for _ in 0..5 {
            adam.update(p.iter_mut().collect(), &grads).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.step, 5);
    }

    #[test]
    fn staircase_decay() {
        let p = [scalar(0.0)];
        let mut adam = AdamState::new(&p, 1e-3, 0.95, 10_000);
        assert_eq!(adam.learning_rate(), 1e-3);
        adam.step = 9_999;
        assert_eq!(adam.learning_rate(), 1e-3);
        adam.step = 10_000;
        assert!((adam.learning_rate() - 0.95e-3).abs() < 1e-18);
        adam.step = 25_000;
        assert!((adam.learning_rate() - 0.95f64.powi(2) * 1e-3).abs() < 1e-18);
    }

    #[test]
    fn nan_gradient_signals_divergence() {
        let mut p = vec![scalar(1.0)];
        let mut adam = AdamState::new(&p, 1e-3, 0.95, 10);
        let err = adam.update(p.iter_mut().collect(), &[scalar(f64::NAN)]);
        assert!(matches!(err, Err(Error::Divergence(_))));
    }

    #[test]
    fn minimizes_a_parabola() {
        // f(w) = w^2 from w = 1 at lr 1e-2: |w| falls below 1e-3 within 2000
        // steps and the path is monotone until it first gets there
        let mut p = vec![scalar(1.0)];
        let mut adam = AdamState::new(&p, 1e-2, 1.0, 10_000);
        let mut prev = 1.0f64;
        let mut reached = None;
        for k in 0..2000 {
            let g = scalar(2.0 * p[0].as_slice()[0]);
            adam.update(p.iter_mut().collect(), &[g]).unwrap();
            let w = p[0].as_slice()[0].abs();
            if reached.is_none() {
                assert!(w < prev, "step {k}: {w} >= {prev}");
                if w < 1e-3 {
                    reached = Some(k);
                }
            }
            prev = w;
        }
        assert!(reached.is_some(), "final |w| = {prev}");
    }
}
