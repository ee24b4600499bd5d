// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    /// Decoupled decay: `w -= lr * weight_decay * w` before the adaptive step.
    pub weight_decay: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Moment estimates for a fixed list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState {
            config,
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Apply one bias-corrected Adam update in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::dim(
            "adam_step",
            &[params.len()],
            &[grads.len(), state.first.len()],
        ));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first) {
        if p.shape() != g.shape() {
            return Err(Error::dim("adam_step", p.shape(), g.shape()));
        }
        if p.shape() != m.shape() {
            return Err(Error::dim("adam_step", p.shape(), m.shape()));
        }
    }

    state.step += 1;
    let AdamConfig {
        learning_rate: lr,
        beta1,
        beta2,
        eps,
        weight_decay,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let decay = 1.0 - lr * weight_decay;

    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        for (((w, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w = *w * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f32, wd: f32) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            weight_decay: wd,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![Tensor::new(&[3], vec![1.0, 1.0, 1.0]).unwrap()];
        let g = vec![Tensor::new(&[3], vec![0.5, -2.0, 1e-3]).unwrap()];
        let mut st = AdamState::new(cfg(0.1, 0.0), &p);
        adam_step(&mut p, &g, &mut st).unwrap();
        let expected = [0.9, 1.1, 0.9];
        for (w, e) in p[0].data().iter().zip(expected) {
            assert!((w - e).abs() < 1e-4, "{w} vs {e}");
        }
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let init = Tensor::new(&[2], vec![0.3, -0.7]).unwrap();
        let mut p = vec![init.clone()];
        let g = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::new(cfg(0.1, 0.0), &p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut st).unwrap();
        }
        assert_eq!(p[0], init);
    }

    #[test]
    fn decay_shrinks_weights_without_gradient() {
        let mut p = vec![Tensor::new(&[1], vec![2.0]).unwrap()];
        let g = vec![Tensor::zeros(&[1])];
        let mut st = AdamState::new(cfg(0.1, 1e-1), &p);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert!((p[0].item() - 2.0 * (1.0 - 0.01)).abs() < 1e-6);
    }

    #[test]
    fn quadratic_descent_is_monotone() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(cfg(0.01, 0.0), &p);
        let mut prev = p[0].item().abs();
        for _ in 0..100 {
            let g = vec![Tensor::scalar(2.0 * p[0].item())];
            adam_step(&mut p, &g, &mut st).unwrap();
            let now = p[0].item().abs();
            assert!(now < prev, "{now} !< {prev}");
            prev = now;
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::new(AdamConfig::default(), &p);
        let g = vec![Tensor::zeros(&[3])];
        assert!(adam_step(&mut p, &g, &mut st).is_err());
    }
}
