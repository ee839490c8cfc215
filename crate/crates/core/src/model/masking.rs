//! Masked-language-model corruption.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::batch::{Batch, Labels, TokenTable, MASK_ID};
use crate::scalar::Scalar;

/// Masking policy: selection rate plus the replacement split. Selected
/// positions become `[MASK]` with `mask_prob`, a uniform random
/// non-special id with `random_prob`, and stay unchanged otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlmPolicy {
    pub mask_rate: f64,
    pub mask_prob: f64,
    pub random_prob: f64,
}

impl MlmPolicy {
    /// The standard 15% rate with the 80/10/10 replacement split.
    pub fn standard() -> Self {
        Self {
            mask_rate: 0.15,
            mask_prob: 0.8,
            random_prob: 0.1,
        }
    }

    pub fn with_rate(mask_rate: f64) -> Self {
        Self {
            mask_rate,
            ..Self::standard()
        }
    }

    /// Every selected position becomes `[MASK]` (replacement split off).
    pub fn all_mask(mask_rate: f64) -> Self {
        Self {
            mask_rate,
            mask_prob: 1.0,
            random_prob: 0.0,
        }
    }
}

/// Corrupt token ids in place on a copy of `batch` and attach MLM labels.
/// Special positions (`[PAD]`/`[MASK]`/`[CLS]`) are never selected. Selection
/// is Bernoulli per position, deterministic given the RNG state.
pub fn mlm_mask<S: Scalar>(
    batch: &Batch<S>,
    policy: &MlmPolicy,
    vocab_size: usize,
    rng: &mut ChaCha8Rng,
) -> Batch<S> {
    let mut corrupted = batch.clone();
    let mut labels = vec![None; batch.token_ids.len()];
    let specials = crate::model::batch::SPECIAL_TOKENS.len() as u32;
    for (i, id) in corrupted.token_ids.iter_mut().enumerate() {
        if TokenTable::is_special(*id) {
            continue;
        }
        if !rng.random_bool(policy.mask_rate.clamp(0.0, 1.0)) {
            continue;
        }
        labels[i] = Some(*id);
        let roll: f64 = rng.random();
        if roll < policy.mask_prob {
            *id = MASK_ID;
        } else if roll < policy.mask_prob + policy.random_prob {
            *id = rng.random_range(specials..vocab_size as u32);
        }
        // else: keep the original token, still predicted.
    }
    corrupted.labels = Labels::Mlm(labels);
    corrupted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use rand::SeedableRng;

    fn batch(ids: Vec<u32>) -> Batch<f64> {
        let n = ids.len();
        Batch {
            token_ids: ids,
            gram_ids: vec![],
            position_matrix: Matrix::zeros(n, 0),
            attn_mask: vec![true; n],
            labels: Labels::None,
            has_cls: true,
            source_id: "t".into(),
        }
    }

    #[test]
    fn zero_rate_leaves_everything_alone() {
        let b = batch(vec![2, 5, 6, 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let masked = mlm_mask(&b, &MlmPolicy::with_rate(0.0), 10, &mut rng);
        assert_eq!(masked.token_ids, b.token_ids);
        assert_eq!(masked.labels, Labels::Mlm(vec![None; 4]));
    }

    #[test]
    fn full_rate_all_mask_hits_every_non_special() {
        let b = batch(vec![2, 5, 6, 7, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let masked = mlm_mask(&b, &MlmPolicy::all_mask(1.0), 10, &mut rng);
        // CLS (2) and PAD (0) untouched, the rest all [MASK].
        assert_eq!(masked.token_ids, vec![2, MASK_ID, MASK_ID, MASK_ID, 0]);
        match masked.labels {
            Labels::Mlm(l) => {
                assert_eq!(l, vec![None, Some(5), Some(6), Some(7), None]);
            }
            _ => panic!("wrong label kind"),
        }
    }

    #[test]
    fn selected_fraction_tracks_the_rate() {
        // Statistical count over 10k positions.
        let ids: Vec<u32> = (0..10_000).map(|i| 3 + (i % 7) as u32).collect();
        let b = batch(ids);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let masked = mlm_mask(&b, &MlmPolicy::standard(), 12, &mut rng);
        let selected = match &masked.labels {
            Labels::Mlm(l) => l.iter().filter(|x| x.is_some()).count(),
            _ => unreachable!(),
        };
        let fraction = selected as f64 / 10_000.0;
        assert!(
            (fraction - 0.15).abs() < 0.01,
            "fraction {fraction} outside 15% +/- 1%"
        );
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let b = batch((0..64).map(|i| 3 + (i % 9) as u32).collect());
        let m1 = mlm_mask(&b, &MlmPolicy::standard(), 15, &mut ChaCha8Rng::seed_from_u64(3));
        let m2 = mlm_mask(&b, &MlmPolicy::standard(), 15, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(m1, m2);
    }
}
