//! Binary cross-entropy on logits.
//!
//! Per element, with logit `z` and target `y`:
//!
//! ```text
//! l(z, y) = max(z, 0) - z*y + ln(1 + exp(-|z|))
//! ```
//!
//! which equals `-[y ln σ(z) + (1-y) ln(1-σ(z))]` without ever evaluating
//! `exp` of a large positive number. The reduction is a mean over elements;
//! per-element weights scale each term before the mean.

use crate::error::{Error, Result};

/// Logistic function, evaluated on the side that cannot overflow.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-element loss weights. Defaults to 1 everywhere.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossConfig {
    weights: Option<Vec<f64>>,
}

impl LossConfig {
    pub fn uniform() -> Self {
        LossConfig::default()
    }

    pub fn with_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Config(format!(
                "loss weights must be positive, got {w}"
            )));
        }
        Ok(LossConfig {
            weights: Some(weights),
        })
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    fn check(&self, logits: &[f64], targets: &[f64]) -> Result<()> {
        if logits.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} logits vs {} targets",
                logits.len(),
                targets.len()
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != logits.len() {
                return Err(Error::Shape(format!(
                    "{} weights vs {} logits",
                    w.len(),
                    logits.len()
                )));
            }
        }
        if let Some(z) = logits.iter().find(|z| !z.is_finite()) {
            return Err(Error::NonFinite(format!("logit {z}")));
        }
        if let Some(y) = targets.iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(Error::NonFinite(format!("target {y} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Stable per-element loss.
pub fn bce_with_logits_elem(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Mean (weighted) binary cross-entropy over all elements.
pub fn bce_with_logits(logits: &[f64], targets: &[f64], lc: &LossConfig) -> Result<f64> {
    lc.check(logits, targets)?;
    if logits.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = logits
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (&z, &y))| lc.weight(i) * bce_with_logits_elem(z, y))
        .sum();
    Ok(sum / logits.len() as f64)
}

/// Gradient of [`bce_with_logits`] with respect to the logits:
/// `w_i (σ(z_i) - y_i) / n`.
pub fn bce_gradient(logits: &[f64], targets: &[f64], lc: &LossConfig) -> Result<Vec<f64>> {
    lc.check(logits, targets)?;
    let n = logits.len() as f64;
    Ok(logits
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (&z, &y))| lc.weight(i) * (sigmoid(z) - y) / n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_logit_costs_ln2() {
        let l = bce_with_logits(&[0.0], &[1.0], &LossConfig::uniform()).unwrap();
        assert_abs_diff_eq!(l, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn large_logits_stay_finite() {
        let l = bce_with_logits(&[100.0], &[1.0], &LossConfig::uniform()).unwrap();
        assert!((0.0..1e-43).contains(&l));
        let l = bce_with_logits(&[1e4, -1e4], &[0.0, 1.0], &LossConfig::uniform()).unwrap();
        assert_abs_diff_eq!(l, 1e4, epsilon = 1e-9);
    }

    #[test]
    fn known_value_at_two() {
        // ln(1 + e^2), evaluated with mpmath at 50 digits: 2.1269280110429725...
        let l = bce_with_logits(&[2.0], &[0.0], &LossConfig::uniform()).unwrap();
        assert_abs_diff_eq!(l, 2.126_928_011_042_972_5, epsilon = 1e-14);
    }

    #[test]
    fn gradient_signs() {
        let g = bce_gradient(&[0.0], &[1.0], &LossConfig::uniform()).unwrap();
        assert_eq!(g, [-0.5]);
        let g = bce_gradient(&[0.0], &[0.0], &LossConfig::uniform()).unwrap();
        assert_eq!(g, [0.5]);
    }

    #[test]
    fn weights_scale_terms() {
        let lc = LossConfig::with_weights(vec![2.0, 1.0]).unwrap();
        let plain = bce_with_logits(&[0.3, -0.7], &[1.0, 0.0], &LossConfig::uniform()).unwrap();
        let weighted = bce_with_logits(&[0.3, -0.7], &[1.0, 0.0], &lc).unwrap();
        let first = bce_with_logits_elem(0.3, 1.0);
        assert_abs_diff_eq!(weighted, plain + first / 2.0, epsilon = 1e-15);
        assert!(LossConfig::with_weights(vec![0.0]).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let lc = LossConfig::uniform();
        assert!(matches!(
            bce_with_logits(&[f64::NAN], &[1.0], &lc),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            bce_with_logits(&[f64::INFINITY], &[1.0], &lc),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            bce_gradient(&[0.0, 1.0], &[1.0], &lc),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for z in [-800.0, -3.0, 0.0, 0.25, 40.0, 800.0] {
            assert_abs_diff_eq!(sigmoid(z) + sigmoid(-z), 1.0, epsilon = 1e-15);
        }
    }
}
