//! Decoupled-weight-decay Adam with linear warmup.

use crate::model::config::ModelConfig;
use crate::model::params::ModelParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            peak_lr: 1e-3,
            warmup_steps: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamW {
    /// Linear warmup to the peak rate, then constant. Step 1 of a
    /// 1000-step warmup runs at peak/1000.
    pub fn lr_at(&self, step: u64) -> f64 {
        if self.warmup_steps == 0 || step >= self.warmup_steps {
            self.peak_lr
        } else {
            self.peak_lr * step as f64 / self.warmup_steps as f64
        }
    }
}

/// First/second moment estimates plus the applied-step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState<S> {
    pub m: ModelParams<S>,
    pub v: ModelParams<S>,
    pub step: u64,
    pub skipped: u64,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            m: ModelParams::zeros(config),
            v: ModelParams::zeros(config),
            step: 0,
            skipped: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// Gradients contained a non-finite value; parameters untouched.
    SkippedNonFinite,
}

/// One optimizer step. Weight decay applies only to genuinely 2-D
/// tensors (projection matrices and embeddings), not to 1-by-n gains and
/// biases. Deterministic given inputs and iteration order.
pub fn train_step<S: Scalar>(
    params: &mut ModelParams<S>,
    grads: &ModelParams<S>,
    state: &mut OptimizerState<S>,
    settings: &AdamW,
) -> StepOutcome {
    if !grads.all_finite() {
        state.skipped += 1;
        return StepOutcome::SkippedNonFinite;
    }
    state.step += 1;
    let t = state.step;
    let lr = S::of(settings.lr_at(t));
    let beta1 = S::of(settings.beta1);
    let beta2 = S::of(settings.beta2);
    let eps = S::of(settings.epsilon);
    let one = S::one();
    let bias1 = one - S::of(settings.beta1.powi(t as i32));
    let bias2 = one - S::of(settings.beta2.powi(t as i32));
    let decay_factor = S::of(1.0 - settings.lr_at(t) * settings.weight_decay);

    let mut m_tensors = state.m.named_tensors_mut();
    let mut v_tensors = state.v.named_tensors_mut();
    let grad_tensors = grads.named_tensors();
    for (idx, (name, tensor)) in params.named_tensors_mut().into_iter().enumerate() {
        let (g_name, grad) = &grad_tensors[idx];
        debug_assert_eq!(&name, g_name, "tensor walk order");
        let m = &mut m_tensors[idx].1;
        let v = &mut v_tensors[idx].1;
        let decays = tensor.rows() > 1 && tensor.cols() > 1;
        for (((p, &g), m), v) in tensor
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            if decays {
                *p *= decay_factor;
            }
            *m = beta1 * *m + (one - beta1) * g;
            *v = beta2 * *v + (one - beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    StepOutcome::Applied
}
