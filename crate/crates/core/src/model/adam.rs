//! Bias-corrected Adam with a linear warm-up learning-rate schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer and loop settings for [`train`](super::train).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of all optimizer steps spent ramping the learning rate up
    /// from zero.
    pub warmup_ratio: f64,
    /// Half-width of the uniform weight initialization.
    pub init_scale: f64,
    pub seed: u64,
}

/// Learning rate used with transformer fine-tuning; far too small for a
/// linear model trained for a few epochs.
pub const TRANSFORMER_LEARNING_RATE: f64 = 4e-5;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 16,
            epochs: 4,
            warmup_ratio: 0.06,
            init_scale: 1e-2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
            ("adam_epsilon", self.adam_epsilon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.adam_beta1 >= 1.0 || self.adam_beta2 >= 1.0 {
            return Err(Error::Config("Adam betas must be below 1".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "batch_size and epochs must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(Error::Config(format!(
                "warmup_ratio must be in [0, 1), got {}",
                self.warmup_ratio
            )));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config(format!(
                "init_scale must be non-negative, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }

    /// Learning rate for 1-based optimizer step `step` out of `total_steps`:
    /// linear ramp over the warm-up steps, then constant.
    pub fn learning_rate_at(&self, step: usize, total_steps: usize) -> f64 {
        let warmup = (self.warmup_ratio * total_steps as f64).ceil() as usize;
        if warmup == 0 || step >= warmup {
            self.learning_rate
        } else {
            self.learning_rate * step as f64 / warmup as f64
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

const PAR_THRESHOLD: usize = 1 << 15;
const CHUNK: usize = 1 << 12;

/// One Adam update of `params` in place, with learning rate `lr`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    tc: &TrainConfig,
    lr: f64,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Shape(format!(
            "params {n}, grads {}, m {}, v {}",
            grads.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    state.t += 1;
    let (b1, b2, eps) = (tc.adam_beta1, tc.adam_beta2, tc.adam_epsilon);
    let t = state.t as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    let run = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            update(&mut p[i], g[i], &mut m[i], &mut v[i]);
        }
    };
    if n >= PAR_THRESHOLD {
        params
            .par_chunks_mut(CHUNK)
            .zip(grads.par_chunks(CHUNK))
            .zip(state.m.par_chunks_mut(CHUNK))
            .zip(state.v.par_chunks_mut(CHUNK))
            .for_each(|(((p, g), m), v)| run(p, g, m, v));
    } else {
        run(params, grads, &mut state.m, &mut state.v);
    }
    if let Some(p) = params.iter().find(|p| !p.is_finite()) {
        return Err(Error::NonFinite(format!("parameter became {p}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.5, -2.0, 0.0];
        let mut s = AdamState::new(3);
        let tc = TrainConfig::default();
        for _ in 0..5 {
            adam_step(&mut p, &[0.0; 3], &mut s, &tc, 0.1).unwrap();
        }
        assert_eq!(p, [1.5, -2.0, 0.0]);
        assert_eq!(s.t, 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // After bias correction m_hat = v_hat = g^2 = 1 on the first step.
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let tc = TrainConfig::default();
        adam_step(&mut p, &[1.0], &mut s, &tc, TRANSFORMER_LEARNING_RATE).unwrap();
        assert_abs_diff_eq!(p[0], -4e-5 / (1.0 + 1e-8), epsilon = 1e-18);
    }

    #[test]
    fn descends_a_quadratic() {
        let f = |x: f64| x * x;
        let mut x = vec![3.0];
        let mut s = AdamState::new(1);
        let tc = TrainConfig::default();
        let before = f(x[0]);
        for _ in 0..2 {
            let g = [2.0 * x[0]];
            adam_step(&mut x, &g, &mut s, &tc, 0.1).unwrap();
        }
        assert!(f(x[0]) < before);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(2);
        let err = adam_step(
            &mut [0.0; 2],
            &[0.0; 3],
            &mut s,
            &TrainConfig::default(),
            0.1,
        );
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn parallel_path_matches_serial() {
        let n = PAR_THRESHOLD + 17;
        let grads: Vec<f64> = (0..n)
            .map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0)
            .collect();
        let tc = TrainConfig::default();
        let mut big = vec![0.25; n];
        let mut sb = AdamState::new(n);
        adam_step(&mut big, &grads, &mut sb, &tc, 0.01).unwrap();
        for i in [0, 1, n / 2, n - 1] {
            let mut one = [0.25];
            let mut s1 = AdamState::new(1);
            adam_step(&mut one, &grads[i..=i], &mut s1, &tc, 0.01).unwrap();
            assert_eq!(one[0], big[i]);
        }
    }

    #[test]
    fn warmup_schedule() {
        let tc = TrainConfig {
            learning_rate: 1.0,
            warmup_ratio: 0.1,
            ..Default::default()
        };
        assert_abs_diff_eq!(tc.learning_rate_at(1, 100), 0.1);
        assert_abs_diff_eq!(tc.learning_rate_at(5, 100), 0.5);
        assert_eq!(tc.learning_rate_at(10, 100), 1.0);
        assert_eq!(tc.learning_rate_at(90, 100), 1.0);
        let flat = TrainConfig {
            warmup_ratio: 0.0,
            ..tc
        };
        assert_eq!(flat.learning_rate_at(1, 100), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            warmup_ratio: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            learning_rate: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
