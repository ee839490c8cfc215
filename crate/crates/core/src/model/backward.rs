//! Loss and the full backward pass: cross-entropy heads, layer-norm,
//! feed-forward, multi-head attention, injection, and both embedding
//! tables.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::batch::{Batch, Labels};
use crate::model::config::ModelConfig;
use crate::model::forward::{gelu_prime, ForwardTrace, LayerTrace, LnTrace};
use crate::model::params::{LayerParams, ModelParams};
use crate::scalar::Scalar;

#[derive(Debug)]
pub struct LossOutput<S> {
    /// Mean cross-entropy over labeled positions (zero when none).
    pub loss: S,
    pub labeled: usize,
    pub correct: usize,
    pub grads: ModelParams<S>,
}

/// Softmax cross-entropy for one logit row; returns (loss, correct) and
/// writes (softmax - onehot) into `d_logits`.
fn cross_entropy_row<S: Scalar>(logits: &[S], target: usize, d_logits: &mut [S]) -> (S, bool) {
    let max = logits
        .iter()
        .copied()
        .fold(S::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut denom = S::zero();
    for (&l, d) in logits.iter().zip(d_logits.iter_mut()) {
        let e = (l - max).exp();
        *d = e;
        denom += e;
    }
    let mut argmax = 0usize;
    for (j, d) in d_logits.iter_mut().enumerate() {
        *d /= denom;
        if logits[j] > logits[argmax] {
            argmax = j;
        }
    }
    let p_target = d_logits[target];
    d_logits[target] -= S::one();
    // -ln softmax(target), clamped away from ln(0).
    let loss = -(p_target.max(S::of(1e-300))).ln();
    (loss, argmax == target)
}

/// Mean cross-entropy over the batch's labeled positions plus gradients
/// for every parameter. A batch with no labeled positions yields zero
/// loss and zero gradients.
pub fn loss_and_backward<S: Scalar>(
    trace: &ForwardTrace<S>,
    batch: &Batch<S>,
    params: &ModelParams<S>,
    config: &ModelConfig,
) -> Result<LossOutput<S>> {
    let mut grads = ModelParams::zeros(config);
    let n = trace.final_hidden.rows();
    let d = config.hidden_dim;
    let mut d_final = Matrix::zeros(n, d);
    let mut loss_sum = S::zero();
    let labeled: usize;
    let mut correct = 0usize;

    match &batch.labels {
        Labels::None => {
            return Err(Error::Config(
                "loss_and_backward needs a labeled batch".into(),
            ))
        }
        Labels::Mlm(targets) => {
            let positions: Vec<(usize, u32)> = targets
                .iter()
                .enumerate()
                .filter_map(|(i, t)| t.map(|id| (i, id)))
                .collect();
            labeled = positions.len();
            if labeled > 0 {
                let inv = S::one() / S::of(labeled as f64);
                for (i, target) in positions {
                    let hidden = trace.final_hidden.row(i);
                    let mut logits = vec![S::zero(); config.vocab_size];
                    for (c, logit) in logits.iter_mut().enumerate() {
                        let mut acc = params.mlm_bias.get(0, c);
                        for (r, &x) in hidden.iter().enumerate() {
                            acc += x * params.mlm_weight.get(r, c);
                        }
                        *logit = acc;
                    }
                    let mut d_logits = vec![S::zero(); config.vocab_size];
                    let (loss, hit) = cross_entropy_row(&logits, target as usize, &mut d_logits);
                    loss_sum += loss;
                    correct += hit as usize;
                    // Scale by 1/labeled and push through the mlm head.
                    for (c, &dl) in d_logits.iter().enumerate() {
                        let dl = dl * inv;
                        grads.mlm_bias.row_mut(0)[c] += dl;
                        for r in 0..d {
                            grads.mlm_weight.row_mut(r)[c] += hidden[r] * dl;
                            d_final.row_mut(i)[r] += params.mlm_weight.get(r, c) * dl;
                        }
                    }
                }
            }
        }
        Labels::SeqClass(target) => {
            if !trace.has_cls {
                return Err(Error::Structure(
                    "sequence classification needs a [CLS] position".into(),
                ));
            }
            let head = params
                .seq_head
                .as_ref()
                .ok_or_else(|| Error::Config("no sequence head configured".into()))?;
            let head_grads = grads.seq_head.as_mut().expect("zeros built the head");
            let classes = head.weight.cols();
            if (*target as usize) >= classes {
                return Err(Error::IdOutOfRange {
                    id: *target,
                    size: classes,
                    context: format!("sequence label in {}", batch.source_id),
                });
            }
            labeled = 1;
            let hidden = trace.final_hidden.row(0);
            let mut logits = vec![S::zero(); classes];
            for (c, logit) in logits.iter_mut().enumerate() {
                let mut acc = head.bias.get(0, c);
                for (r, &x) in hidden.iter().enumerate() {
                    acc += x * head.weight.get(r, c);
                }
                *logit = acc;
            }
            let mut d_logits = vec![S::zero(); classes];
            let (loss, hit) = cross_entropy_row(&logits, *target as usize, &mut d_logits);
            loss_sum += loss;
            correct += hit as usize;
            for (c, &dl) in d_logits.iter().enumerate() {
                head_grads.bias.row_mut(0)[c] += dl;
                for r in 0..d {
                    head_grads.weight.row_mut(r)[c] += hidden[r] * dl;
                    d_final.row_mut(0)[r] += head.weight.get(r, c) * dl;
                }
            }
        }
        Labels::TokClass(targets) => {
            let head = params
                .tok_head
                .as_ref()
                .ok_or_else(|| Error::Config("no token head configured".into()))?;
            let classes = head.weight.cols();
            let positions: Vec<(usize, u32)> = targets
                .iter()
                .enumerate()
                .filter_map(|(i, t)| t.map(|id| (i, id)))
                .collect();
            labeled = positions.len();
            if labeled > 0 {
                let inv = S::one() / S::of(labeled as f64);
                let head_grads = grads.tok_head.as_mut().expect("zeros built the head");
                for (i, target) in positions {
                    if (target as usize) >= classes {
                        return Err(Error::IdOutOfRange {
                            id: target,
                            size: classes,
                            context: format!("token label in {}", batch.source_id),
                        });
                    }
                    let hidden = trace.final_hidden.row(i);
                    let mut logits = vec![S::zero(); classes];
                    for (c, logit) in logits.iter_mut().enumerate() {
                        let mut acc = head.bias.get(0, c);
                        for (r, &x) in hidden.iter().enumerate() {
                            acc += x * head.weight.get(r, c);
                        }
                        *logit = acc;
                    }
                    let mut d_logits = vec![S::zero(); classes];
                    let (loss, hit) = cross_entropy_row(&logits, target as usize, &mut d_logits);
                    loss_sum += loss;
                    correct += hit as usize;
                    for (c, &dl) in d_logits.iter().enumerate() {
                        let dl = dl * inv;
                        head_grads.bias.row_mut(0)[c] += dl;
                        for r in 0..d {
                            head_grads.weight.row_mut(r)[c] += hidden[r] * dl;
                            d_final.row_mut(i)[r] += head.weight.get(r, c) * dl;
                        }
                    }
                }
            }
        }
    }

    let loss = if labeled > 0 {
        loss_sum / S::of(labeled as f64)
    } else {
        S::zero()
    };

    if labeled > 0 {
        backward_stacks(trace, batch, params, config, d_final, &mut grads);
    }

    Ok(LossOutput {
        loss,
        labeled,
        correct,
        grads,
    })
}

/// Backprop from d(final hidden) through both stacks into `grads`.
fn backward_stacks<S: Scalar>(
    trace: &ForwardTrace<S>,
    batch: &Batch<S>,
    params: &ModelParams<S>,
    config: &ModelConfig,
    d_final: Matrix<S>,
    grads: &mut ModelParams<S>,
) {
    let has_grams = !trace.gram.is_empty();
    let mut gram_output_grads: Vec<Option<Matrix<S>>> = vec![None; trace.gram.len()];

    let mut d = d_final;
    for l in (0..config.layers_main).rev() {
        if l < config.layers_ngram && has_grams {
            // Injection: identity into the main path, P^T into the gram path.
            gram_output_grads[l] = Some(batch.position_matrix.matmul_at(&d));
        }
        d = layer_backward(
            &params.main_layers[l],
            &trace.main[l],
            &d,
            &mut grads.main_layers[l],
        );
    }
    // d now holds dH0: scatter into token and position tables.
    for (i, &id) in batch.token_ids.iter().enumerate() {
        let row = d.row(i);
        for (c, &g) in row.iter().enumerate() {
            grads.token_embedding.row_mut(id as usize)[c] += g;
            grads.position_embedding.row_mut(i)[c] += g;
        }
    }

    if has_grams {
        let m = batch.gram_ids.len();
        let mut d_g = Matrix::zeros(m, config.hidden_dim);
        for l in (0..trace.gram.len()).rev() {
            if let Some(inj) = &gram_output_grads[l] {
                d_g.add_assign(inj);
            }
            d_g = layer_backward(
                &params.gram_layers[l],
                &trace.gram[l],
                &d_g,
                &mut grads.gram_layers[l],
            );
        }
        for (j, &gid) in batch.gram_ids.iter().enumerate() {
            let row = d_g.row(j);
            for (c, &g) in row.iter().enumerate() {
                grads.ngram_embedding.row_mut(gid as usize)[c] += g;
                grads.position_embedding.row_mut(j)[c] += g;
            }
        }
    }
}

fn layer_norm_backward<S: Scalar>(
    d_out: &Matrix<S>,
    ln: &LnTrace<S>,
    gain: &Matrix<S>,
    d_gain: &mut Matrix<S>,
    d_bias: &mut Matrix<S>,
) -> Matrix<S> {
    let n = d_out.rows();
    let d = d_out.cols();
    let inv_d = S::one() / S::of(d as f64);
    let mut dx = Matrix::zeros(n, d);
    for i in 0..n {
        let dy = d_out.row(i);
        let xhat = ln.normalized.row(i);
        let mut mean_dxhat = S::zero();
        let mut mean_dxhat_xhat = S::zero();
        for j in 0..d {
            d_gain.row_mut(0)[j] += dy[j] * xhat[j];
            d_bias.row_mut(0)[j] += dy[j];
            let dxh = dy[j] * gain.get(0, j);
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[j];
        }
        mean_dxhat *= inv_d;
        mean_dxhat_xhat *= inv_d;
        let inv_std = ln.inv_std[i];
        for j in 0..d {
            let dxh = dy[j] * gain.get(0, j);
            dx.set(i, j, inv_std * (dxh - mean_dxhat - xhat[j] * mean_dxhat_xhat));
        }
    }
    dx
}

/// Backward through one post-norm encoder layer; returns d(input).
fn layer_backward<S: Scalar>(
    layer: &LayerParams<S>,
    trace: &LayerTrace<S>,
    d_out: &Matrix<S>,
    grads: &mut LayerParams<S>,
) -> Matrix<S> {
    let n = d_out.rows();
    let d = d_out.cols();
    let heads = trace.attn.len();
    let dk = d / heads;
    let scale = S::one() / S::of((dk as f64).sqrt());

    // LN2 -> d(sum2) = d(h1) + d(ffn_out).
    let d_sum2 = layer_norm_backward(
        d_out,
        &trace.ln2,
        &layer.ln2_gain,
        &mut grads.ln2_gain,
        &mut grads.ln2_bias,
    );

    // FFN backward.
    let d_act = d_sum2.matmul_bt(&layer.ffn_w2);
    grads.ffn_w2.add_assign(&trace.ffn_act.matmul_at(&d_sum2));
    for i in 0..n {
        for (c, &g) in d_sum2.row(i).iter().enumerate() {
            grads.ffn_b2.row_mut(0)[c] += g;
        }
    }
    let mut d_pre = d_act;
    for (dp, &pre) in d_pre.data_mut().iter_mut().zip(trace.ffn_pre.data()) {
        *dp *= gelu_prime(pre);
    }
    grads.ffn_w1.add_assign(&trace.h1.matmul_at(&d_pre));
    for i in 0..n {
        for (c, &g) in d_pre.row(i).iter().enumerate() {
            grads.ffn_b1.row_mut(0)[c] += g;
        }
    }

    let mut d_h1 = d_sum2; // residual path
    d_h1.add_assign(&d_pre.matmul_bt(&layer.ffn_w1));

    // LN1 -> d(sum1) = d(input) + d(attention output).
    let d_sum1 = layer_norm_backward(
        &d_h1,
        &trace.ln1,
        &layer.ln1_gain,
        &mut grads.ln1_gain,
        &mut grads.ln1_bias,
    );

    // Output projection.
    let d_ctx = d_sum1.matmul_bt(&layer.wo);
    grads.wo.add_assign(&trace.ctx.matmul_at(&d_sum1));

    // Per-head attention backward.
    let mut d_q = Matrix::zeros(n, d);
    let mut d_k = Matrix::zeros(n, d);
    let mut d_v = Matrix::zeros(n, d);
    for h in 0..heads {
        let lo = h * dk;
        let attn = &trace.attn[h];
        // dA = d_ctx_h . V_h^T ; dV_h = A^T . d_ctx_h. Entries with zero
        // attention weight drop out of both the softmax backward and dV.
        for i in 0..n {
            let dci = &d_ctx.row(i)[lo..lo + dk];
            let mut da_row = vec![S::zero(); n];
            let mut dot = S::zero();
            for j in 0..n {
                let a = attn.get(i, j);
                if a == S::zero() {
                    continue;
                }
                let vj = &trace.v.row(j)[lo..lo + dk];
                let mut acc = S::zero();
                for (&x, &y) in dci.iter().zip(vj) {
                    acc += x * y;
                }
                da_row[j] = acc;
                dot += acc * a;
                let dvj = &mut d_v.row_mut(j)[lo..lo + dk];
                for (dv, &x) in dvj.iter_mut().zip(dci) {
                    *dv += a * x;
                }
            }
            // ds = A o (dA - sum_j dA[j] * A[j])
            for j in 0..n {
                let a = attn.get(i, j);
                if a == S::zero() {
                    continue;
                }
                let ds = a * (da_row[j] - dot) * scale;
                // dQ_h[i] += ds * K_h[j]; dK_h[j] += ds * Q_h[i]
                let kj = &trace.k.row(j)[lo..lo + dk];
                let qi = &trace.q.row(i)[lo..lo + dk];
                let dqi = &mut d_q.row_mut(i)[lo..lo + dk];
                for (dq, &kk) in dqi.iter_mut().zip(kj) {
                    *dq += ds * kk;
                }
                let dkj = &mut d_k.row_mut(j)[lo..lo + dk];
                for (dkv, &qq) in dkj.iter_mut().zip(qi) {
                    *dkv += ds * qq;
                }
            }
        }
    }

    grads.wq.add_assign(&trace.input.matmul_at(&d_q));
    grads.wk.add_assign(&trace.input.matmul_at(&d_k));
    grads.wv.add_assign(&trace.input.matmul_at(&d_v));

    let mut d_input = d_sum1; // residual path
    d_input.add_assign(&d_q.matmul_bt(&layer.wq));
    d_input.add_assign(&d_k.matmul_bt(&layer.wk));
    d_input.add_assign(&d_v.matmul_bt(&layer.wv));
    d_input
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::batch::Labels;
    use crate::model::forward::forward;

    fn config() -> ModelConfig {
        let mut c = ModelConfig::desk();
        c.hidden_dim = 8;
        c.heads = 2;
        c.ffn_dim = 16;
        c.max_seq_len = 12;
        c.max_ngrams = 4;
        c.vocab_size = 9;
        c.ngram_vocab_size = 3;
        c
    }

    fn mlm_batch(_config: &ModelConfig) -> Batch<f64> {
        let mut labels = vec![None; 5];
        labels[2] = Some(4);
        labels[4] = Some(7);
        let mut p = Matrix::zeros(5, 2);
        p.set(1, 0, 0.75);
        p.set(1, 1, 0.25);
        p.set(3, 1, 1.0);
        Batch {
            token_ids: vec![2, 3, 1, 5, 1],
            gram_ids: vec![0, 2],
            position_matrix: p,
            attn_mask: vec![true; 5],
            labels: Labels::Mlm(labels),
            has_cls: true,
            source_id: "t".into(),
        }
    }

    #[test]
    fn uniform_logits_lose_ln_v() {
        // Zero parameters give identical logits for every class.
        let config = config();
        let params: ModelParams<f64> = ModelParams::zeros(&config);
        let batch = mlm_batch(&config);
        let trace = forward(&batch, &params, &config).unwrap();
        let out = loss_and_backward(&trace, &batch, &params, &config).unwrap();
        let expect = (config.vocab_size as f64).ln();
        assert!(
            (out.loss - expect).abs() < 1e-12,
            "loss {} vs ln V {}",
            out.loss,
            expect
        );
    }

    #[test]
    fn confident_correct_logit_drives_loss_to_zero() {
        let config = config();
        let mut params: ModelParams<f64> = ModelParams::zeros(&config);
        // Push the target column's bias sky high: the high-margin limit.
        params.mlm_bias.row_mut(0)[4] = 50.0;
        let mut batch = mlm_batch(&config);
        batch.labels = Labels::Mlm({
            let mut l = vec![None; 5];
            l[2] = Some(4);
            l
        });
        let trace = forward(&batch, &params, &config).unwrap();
        let out = loss_and_backward(&trace, &batch, &params, &config).unwrap();
        assert!(out.loss < 1e-12, "loss {}", out.loss);
        assert_eq!(out.correct, 1);
    }

    #[test]
    fn no_labels_mean_zero_loss_and_zero_grads() {
        let config = config();
        let params: ModelParams<f64> = ModelParams::init(&config, 5);
        let mut batch = mlm_batch(&config);
        batch.labels = Labels::Mlm(vec![None; 5]);
        let trace = forward(&batch, &params, &config).unwrap();
        let out = loss_and_backward(&trace, &batch, &params, &config).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.labeled, 0);
        for (name, g) in out.grads.named_tensors() {
            assert!(g.data().iter().all(|&x| x == 0.0), "{name} non-zero");
        }
    }
}
