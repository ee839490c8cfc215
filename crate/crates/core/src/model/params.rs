//! Parameter storage, initialization, and uniform named-tensor access.
//!
//! All parameters live in [`Matrix`] form (vectors as 1-by-n), so the
//! optimizer, the checkpoint writer and the gradient checker can walk
//! one flat, deterministically ordered list. Main-stack tensors come
//! before gram-stack tensors in both the list and the init RNG stream,
//! which keeps main-stack initialization identical whether or not a gram
//! stack exists.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;
use crate::model::config::ModelConfig;
use crate::scalar::Scalar;

/// Standard deviation for weight initialization.
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<S> {
    pub wq: Matrix<S>,
    pub wk: Matrix<S>,
    pub wv: Matrix<S>,
    pub wo: Matrix<S>,
    pub ln1_gain: Matrix<S>,
    pub ln1_bias: Matrix<S>,
    pub ffn_w1: Matrix<S>,
    pub ffn_b1: Matrix<S>,
    pub ffn_w2: Matrix<S>,
    pub ffn_b2: Matrix<S>,
    pub ln2_gain: Matrix<S>,
    pub ln2_bias: Matrix<S>,
}

impl<S: Scalar> LayerParams<S> {
    fn zeros(config: &ModelConfig) -> Self {
        let d = config.hidden_dim;
        let f = config.ffn_dim;
        Self {
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            ln1_gain: Matrix::zeros(1, d),
            ln1_bias: Matrix::zeros(1, d),
            ffn_w1: Matrix::zeros(d, f),
            ffn_b1: Matrix::zeros(1, f),
            ffn_w2: Matrix::zeros(f, d),
            ffn_b2: Matrix::zeros(1, d),
            ln2_gain: Matrix::zeros(1, d),
            ln2_bias: Matrix::zeros(1, d),
        }
    }

    fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Self::zeros(config);
        for w in [
            &mut layer.wq,
            &mut layer.wk,
            &mut layer.wv,
            &mut layer.wo,
            &mut layer.ffn_w1,
            &mut layer.ffn_w2,
        ] {
            fill_normal(w, rng);
        }
        layer.ln1_gain.fill(S::one());
        layer.ln2_gain.fill(S::one());
        layer
    }
}

/// Optional linear head (weight d-by-classes, bias 1-by-classes).
#[derive(Debug, Clone, PartialEq)]
pub struct Head<S> {
    pub weight: Matrix<S>,
    pub bias: Matrix<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    pub token_embedding: Matrix<S>,
    pub position_embedding: Matrix<S>,
    pub main_layers: Vec<LayerParams<S>>,
    pub mlm_weight: Matrix<S>,
    pub mlm_bias: Matrix<S>,
    pub seq_head: Option<Head<S>>,
    pub tok_head: Option<Head<S>>,
    pub ngram_embedding: Matrix<S>,
    pub gram_layers: Vec<LayerParams<S>>,
}

fn fill_normal<S: Scalar>(m: &mut Matrix<S>, rng: &mut ChaCha8Rng) {
    for v in m.data_mut() {
        let sample: f64 = StandardNormal.sample(rng);
        *v = S::of(sample * INIT_STD);
    }
}

impl<S: Scalar> ModelParams<S> {
    /// All-zero parameters with the shapes `config` dictates; used for
    /// gradients and optimizer moments.
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.hidden_dim;
        Self {
            token_embedding: Matrix::zeros(config.vocab_size, d),
            position_embedding: Matrix::zeros(config.max_seq_len, d),
            main_layers: (0..config.layers_main)
                .map(|_| LayerParams::zeros(config))
                .collect(),
            mlm_weight: Matrix::zeros(d, config.vocab_size),
            mlm_bias: Matrix::zeros(1, config.vocab_size),
            seq_head: (config.seq_classes > 0).then(|| Head {
                weight: Matrix::zeros(d, config.seq_classes),
                bias: Matrix::zeros(1, config.seq_classes),
            }),
            tok_head: (config.tok_classes > 0).then(|| Head {
                weight: Matrix::zeros(d, config.tok_classes),
                bias: Matrix::zeros(1, config.tok_classes),
            }),
            ngram_embedding: Matrix::zeros(config.ngram_vocab_size.max(1), d),
            gram_layers: (0..config.layers_ngram)
                .map(|_| LayerParams::zeros(config))
                .collect(),
        }
    }

    /// Seeded random initialization.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(config);
        fill_normal(&mut params.token_embedding, &mut rng);
        fill_normal(&mut params.position_embedding, &mut rng);
        for layer in &mut params.main_layers {
            *layer = LayerParams::init(config, &mut rng);
        }
        fill_normal(&mut params.mlm_weight, &mut rng);
        if let Some(head) = &mut params.seq_head {
            fill_normal(&mut head.weight, &mut rng);
        }
        if let Some(head) = &mut params.tok_head {
            fill_normal(&mut head.weight, &mut rng);
        }
        fill_normal(&mut params.ngram_embedding, &mut rng);
        for layer in &mut params.gram_layers {
            *layer = LayerParams::init(config, &mut rng);
        }
        params
    }

    /// Attach freshly initialized classification heads (leaves every
    /// other tensor untouched).
    pub fn init_heads(&mut self, config: &ModelConfig, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.hidden_dim;
        if config.seq_classes > 0 {
            let mut weight = Matrix::zeros(d, config.seq_classes);
            fill_normal(&mut weight, &mut rng);
            self.seq_head = Some(Head {
                weight,
                bias: Matrix::zeros(1, config.seq_classes),
            });
        }
        if config.tok_classes > 0 {
            let mut weight = Matrix::zeros(d, config.tok_classes);
            fill_normal(&mut weight, &mut rng);
            self.tok_head = Some(Head {
                weight,
                bias: Matrix::zeros(1, config.tok_classes),
            });
        }
    }

    /// Named tensors in a fixed order shared by every walker.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix<S>)> {
        let mut out: Vec<(String, &Matrix<S>)> = vec![
            ("token_embedding".into(), &self.token_embedding),
            ("position_embedding".into(), &self.position_embedding),
        ];
        for (l, layer) in self.main_layers.iter().enumerate() {
            push_layer_refs(&mut out, "main", l, layer);
        }
        out.push(("mlm_weight".into(), &self.mlm_weight));
        out.push(("mlm_bias".into(), &self.mlm_bias));
        if let Some(head) = &self.seq_head {
            out.push(("seq_head.weight".into(), &head.weight));
            out.push(("seq_head.bias".into(), &head.bias));
        }
        if let Some(head) = &self.tok_head {
            out.push(("tok_head.weight".into(), &head.weight));
            out.push(("tok_head.bias".into(), &head.bias));
        }
        out.push(("ngram_embedding".into(), &self.ngram_embedding));
        for (l, layer) in self.gram_layers.iter().enumerate() {
            push_layer_refs(&mut out, "gram", l, layer);
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Matrix<S>)> {
        let mut out: Vec<(String, &mut Matrix<S>)> = vec![
            ("token_embedding".into(), &mut self.token_embedding),
            ("position_embedding".into(), &mut self.position_embedding),
        ];
        for (l, layer) in self.main_layers.iter_mut().enumerate() {
            push_layer_refs_mut(&mut out, "main", l, layer);
        }
        out.push(("mlm_weight".into(), &mut self.mlm_weight));
        out.push(("mlm_bias".into(), &mut self.mlm_bias));
        if let Some(head) = &mut self.seq_head {
            out.push(("seq_head.weight".into(), &mut head.weight));
            out.push(("seq_head.bias".into(), &mut head.bias));
        }
        if let Some(head) = &mut self.tok_head {
            out.push(("tok_head.weight".into(), &mut head.weight));
            out.push(("tok_head.bias".into(), &mut head.bias));
        }
        out.push(("ngram_embedding".into(), &mut self.ngram_embedding));
        for (l, layer) in self.gram_layers.iter_mut().enumerate() {
            push_layer_refs_mut(&mut out, "gram", l, layer);
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.all_finite())
    }

    /// Elementwise conversion between scalar types.
    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        ModelParams {
            token_embedding: self.token_embedding.cast(),
            position_embedding: self.position_embedding.cast(),
            main_layers: self.main_layers.iter().map(cast_layer).collect(),
            mlm_weight: self.mlm_weight.cast(),
            mlm_bias: self.mlm_bias.cast(),
            seq_head: self.seq_head.as_ref().map(|h| Head {
                weight: h.weight.cast(),
                bias: h.bias.cast(),
            }),
            tok_head: self.tok_head.as_ref().map(|h| Head {
                weight: h.weight.cast(),
                bias: h.bias.cast(),
            }),
            ngram_embedding: self.ngram_embedding.cast(),
            gram_layers: self.gram_layers.iter().map(cast_layer).collect(),
        }
    }
}

fn cast_layer<S: Scalar, T: Scalar>(layer: &LayerParams<S>) -> LayerParams<T> {
    LayerParams {
        wq: layer.wq.cast(),
        wk: layer.wk.cast(),
        wv: layer.wv.cast(),
        wo: layer.wo.cast(),
        ln1_gain: layer.ln1_gain.cast(),
        ln1_bias: layer.ln1_bias.cast(),
        ffn_w1: layer.ffn_w1.cast(),
        ffn_b1: layer.ffn_b1.cast(),
        ffn_w2: layer.ffn_w2.cast(),
        ffn_b2: layer.ffn_b2.cast(),
        ln2_gain: layer.ln2_gain.cast(),
        ln2_bias: layer.ln2_bias.cast(),
    }
}

fn push_layer_refs<'a, S>(
    out: &mut Vec<(String, &'a Matrix<S>)>,
    stack: &str,
    index: usize,
    layer: &'a LayerParams<S>,
) {
    let fields: [(&str, &'a Matrix<S>); 12] = [
        ("wq", &layer.wq),
        ("wk", &layer.wk),
        ("wv", &layer.wv),
        ("wo", &layer.wo),
        ("ln1_gain", &layer.ln1_gain),
        ("ln1_bias", &layer.ln1_bias),
        ("ffn_w1", &layer.ffn_w1),
        ("ffn_b1", &layer.ffn_b1),
        ("ffn_w2", &layer.ffn_w2),
        ("ffn_b2", &layer.ffn_b2),
        ("ln2_gain", &layer.ln2_gain),
        ("ln2_bias", &layer.ln2_bias),
    ];
    for (name, tensor) in fields {
        out.push((format!("{stack}.{index}.{name}"), tensor));
    }
}

fn push_layer_refs_mut<'a, S>(
    out: &mut Vec<(String, &'a mut Matrix<S>)>,
    stack: &str,
    index: usize,
    layer: &'a mut LayerParams<S>,
) {
    let LayerParams {
        wq,
        wk,
        wv,
        wo,
        ln1_gain,
        ln1_bias,
        ffn_w1,
        ffn_b1,
        ffn_w2,
        ffn_b2,
        ln2_gain,
        ln2_bias,
    } = layer;
    let fields: [(&str, &'a mut Matrix<S>); 12] = [
        ("wq", wq),
        ("wk", wk),
        ("wv", wv),
        ("wo", wo),
        ("ln1_gain", ln1_gain),
        ("ln1_bias", ln1_bias),
        ("ffn_w1", ffn_w1),
        ("ffn_b1", ffn_b1),
        ("ffn_w2", ffn_w2),
        ("ffn_b2", ffn_b2),
        ("ln2_gain", ln2_gain),
        ("ln2_bias", ln2_bias),
    ];
    for (name, tensor) in fields {
        out.push((format!("{stack}.{index}.{name}"), tensor));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_config() -> ModelConfig {
        let mut config = ModelConfig::desk();
        config.vocab_size = 20;
        config.ngram_vocab_size = 5;
        config
    }

    #[test]
    fn init_is_deterministic() {
        let config = test_config();
        let a: ModelParams<f64> = ModelParams::init(&config, 11);
        let b: ModelParams<f64> = ModelParams::init(&config, 11);
        assert_eq!(a, b);
        let c: ModelParams<f64> = ModelParams::init(&config, 12);
        assert_ne!(a, c);
    }

    #[test]
    fn main_stack_init_ignores_gram_stack_presence() {
        let config = test_config();
        let mut baseline_config = config.clone();
        baseline_config.layers_ngram = 0;
        let full: ModelParams<f64> = ModelParams::init(&config, 5);
        let baseline: ModelParams<f64> = ModelParams::init(&baseline_config, 5);
        assert_eq!(full.token_embedding, baseline.token_embedding);
        assert_eq!(full.main_layers, baseline.main_layers);
        assert_eq!(full.mlm_weight, baseline.mlm_weight);
    }

    #[test]
    fn named_tensor_orders_agree() {
        let config = test_config();
        let mut params: ModelParams<f64> = ModelParams::init(&config, 1);
        let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = params
            .named_tensors_mut()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        assert_eq!(names, names_mut);
        assert!(names.contains(&"main.1.ffn_w2".to_string()));
        assert!(names.contains(&"gram.0.wq".to_string()));
    }
}
