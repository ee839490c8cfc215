//! Central finite-difference gradient verification.
//!
//! The checker perturbs every parameter component in turn, so it is only
//! meant for toy configurations. The error measure divides |analytic -
//! numeric| by max(|analytic|, |numeric|, floor); the floor turns the
//! relative test into an absolute one for near-zero gradients, where
//! central differences bottom out at cancellation noise.

use crate::linalg::Matrix;
use crate::model::params::ModelParams;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_err: f64,
    pub worst: String,
}

/// Compare analytic gradients against central finite differences of
/// `loss_fn` with the given step. Returns the worst error over every
/// component of every tensor.
pub fn check_gradients<F>(
    params: &mut ModelParams<f64>,
    analytic: &ModelParams<f64>,
    mut loss_fn: F,
    step: f64,
    floor: f64,
) -> GradCheckReport
where
    F: FnMut(&ModelParams<f64>) -> f64,
{
    let mut checked = 0usize;
    let mut max_err = 0.0f64;
    let mut worst = String::new();

    let tensor_names: Vec<String> = params
        .named_tensors()
        .into_iter()
        .map(|(n, _)| n)
        .collect();

    for (tensor_idx, name) in tensor_names.iter().enumerate() {
        let (rows, cols) = {
            let tensors = params.named_tensors();
            tensors[tensor_idx].1.shape()
        };
        for i in 0..rows {
            for j in 0..cols {
                let original = get_at(params, tensor_idx, i, j);
                set_at(params, tensor_idx, i, j, original + step);
                let plus = loss_fn(params);
                set_at(params, tensor_idx, i, j, original - step);
                let minus = loss_fn(params);
                set_at(params, tensor_idx, i, j, original);

                let numeric = (plus - minus) / (2.0 * step);
                let a = analytic_at(analytic, tensor_idx, i, j);
                let denom = a.abs().max(numeric.abs()).max(floor);
                let err = (a - numeric).abs() / denom;
                checked += 1;
                if err > max_err {
                    max_err = err;
                    worst = format!("{name}[{i},{j}] analytic {a:.3e} numeric {numeric:.3e}");
                }
            }
        }
    }

    GradCheckReport {
        checked,
        max_err,
        worst,
    }
}

fn get_at(params: &mut ModelParams<f64>, tensor_idx: usize, i: usize, j: usize) -> f64 {
    let tensors = params.named_tensors();
    tensors[tensor_idx].1.get(i, j)
}

fn set_at(params: &mut ModelParams<f64>, tensor_idx: usize, i: usize, j: usize, v: f64) {
    let mut tensors = params.named_tensors_mut();
    tensors[tensor_idx].1.set(i, j, v);
}

fn analytic_at(grads: &ModelParams<f64>, tensor_idx: usize, i: usize, j: usize) -> f64 {
    let tensors: Vec<(String, &Matrix<f64>)> = grads.named_tensors();
    tensors[tensor_idx].1.get(i, j)
}
