//! Finite-difference verification of the analytic gradients.

use super::model::LstmModel;
use crate::Result;

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor so that parameters with vanishing gradients compare on
/// an absolute rather than relative scale.
pub const REL_FLOOR: f64 = 1e-6;

/// Gradient of `(y - target)^2` by backpropagation.
pub fn analytic_gradient(model: &LstmModel, window: &[Vec<f64>], target: f64) -> Result<Vec<f64>> {
    let trace = model.trace(window, None)?;
    let mut grad = vec![0.0; model.param_count()];
    model.backward(window, &trace, 2.0 * (trace.output - target), &mut grad);
    Ok(grad)
}

/// Central differences of `(y - target)^2` with step [`FD_STEP`].
pub fn numeric_gradient(model: &LstmModel, window: &[Vec<f64>], target: f64) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    let mut grad = Vec::with_capacity(model.param_count());
    for p in 0..model.param_count() {
        let orig = probe.params[p];
        probe.params[p] = orig + FD_STEP;
        let up = probe.forward(window)? - target;
        probe.params[p] = orig - FD_STEP;
        let down = probe.forward(window)? - target;
        probe.params[p] = orig;
        grad.push((up * up - down * down) / (2.0 * FD_STEP));
    }
    Ok(grad)
}

/// Largest `|a - n| / max(|a| + |n|, REL_FLOOR)`; two exact zeros count as 0.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            if a == 0.0 && n == 0.0 {
                0.0
            } else {
                (a - n).abs() / (a.abs() + n.abs()).max(REL_FLOOR)
            }
        })
        .fold(0.0, f64::max)
}

pub fn gradient_check(model: &LstmModel, window: &[Vec<f64>], target: f64) -> Result<f64> {
    Ok(compare_gradients(
        &analytic_gradient(model, window, target)?,
        &numeric_gradient(model, window, target)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecaster::{Activation, Architecture};

    #[test]
    fn zero_model_zero_window_is_exact() {
        let m = LstmModel::zeros(Architecture::plain(3, 2)).unwrap();
        let w = vec![vec![0.0; 3]; 4];
        assert_eq!(gradient_check(&m, &w, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn dense_stacks_pass() {
        for (seed, act) in Activation::ALL.into_iter().enumerate() {
            let arch = Architecture {
                dense_layers: vec![5, 3],
                activation: act,
                ..Architecture::plain(3, 4)
            };
            let m = LstmModel::new(arch, seed as u64).unwrap();
            let w: Vec<Vec<f64>> = (0..5)
                .map(|t| vec![0.3 * t as f64 - 0.5, 0.2, -0.1 * t as f64])
                .collect();
            let err = gradient_check(&m, &w, 0.7).unwrap();
            assert!(err < 1e-5, "{act:?}: {err}");
        }
    }
}
