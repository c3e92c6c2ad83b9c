//! OOD evaluation: AUROC, FPR at 95% TPR, and ID classification accuracy.
//!
//! ID samples are the positive class throughout; a higher score means "more ID".

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::numeric::Embedding;
use crate::textual::PositiveTextQueue;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub is_id: bool,
    /// Meaningful only when `is_id`.
    pub class_index: Option<usize>,
}

impl GroundTruth {
    pub fn id(class_index: usize) -> Self {
        GroundTruth {
            is_id: true,
            class_index: Some(class_index),
        }
    }

    pub fn ood() -> Self {
        GroundTruth {
            is_id: false,
            class_index: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub auroc: f64,
    pub fpr95: f64,
    pub id_acc: Option<f64>,
    pub n_id: usize,
    pub n_ood: usize,
}

fn split(scores: &[f64], labels: &[GroundTruth]) -> Result<(Vec<f64>, Vec<f64>)> {
    if scores.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::contract("NaN score"));
    }
    let (mut id, mut ood) = (Vec::new(), Vec::new());
    for (&s, l) in scores.iter().zip(labels) {
        if l.is_id {
            id.push(s);
        } else {
            ood.push(s);
        }
    }
    if id.is_empty() || ood.is_empty() {
        return Err(Error::contract(format!(
            "need both ID and OOD samples, got {} ID and {} OOD",
            id.len(),
            ood.len()
        )));
    }
    Ok((id, ood))
}

/// Probability that a random ID score beats a random OOD score, ties counting one half.
///
/// Mann-Whitney rank sum with mid-ranks for tied groups.
pub fn auroc(scores: &[f64], labels: &[GroundTruth]) -> Result<f64> {
    let (id, ood) = split(scores, labels)?;
    let mut all: Vec<(f64, bool)> = id
        .iter()
        .map(|&s| (s, true))
        .chain(ood.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    let mut rank_sum_id = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their mean.
        let mid_rank = (i + j + 2) as f64 / 2.0;
        let ids_in_group = all[i..=j].iter().filter(|x| x.1).count();
        rank_sum_id += mid_rank * ids_in_group as f64;
        i = j + 1;
    }
    let n_id = id.len() as f64;
    let n_ood = ood.len() as f64;
    Ok((rank_sum_id - n_id * (n_id + 1.0) / 2.0) / (n_id * n_ood))
}

/// Fraction of OOD scores at or above the largest threshold that still accepts
/// at least 95% of ID scores.
pub fn fpr95(scores: &[f64], labels: &[GroundTruth]) -> Result<f64> {
    let (mut id, ood) = split(scores, labels)?;
    id.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    // Smallest k with k / n >= 95 / 100.
    let needed = (95 * id.len()).div_ceil(100);
    let threshold = id[needed - 1];
    let false_positives = ood.iter().filter(|&&s| s >= threshold).count();
    Ok(false_positives as f64 / ood.len() as f64)
}

/// How the predicted ID class is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IdAccMode {
    /// Nearest positive text row.
    #[default]
    TextArgmax,
    /// Nearest aggregated positive visual proxy at prediction time.
    VisualArgmax,
}

/// Text-argmax predictions for every sample.
pub fn text_argmax_predictions(
    samples: &[Embedding],
    t_p: &PositiveTextQueue,
) -> Result<Vec<Option<usize>>> {
    samples
        .iter()
        .map(|f| t_p.nearest_class(f).map(Some))
        .collect()
}

/// Share of ID samples whose prediction equals their class. OOD entries are ignored.
pub fn id_acc(predictions: &[Option<usize>], labels: &[GroundTruth]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut total = 0usize;
    let mut correct = 0usize;
    for (p, l) in predictions.iter().zip(labels) {
        if l.is_id {
            total += 1;
            if p.is_some() && *p == l.class_index {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::contract("ID accuracy needs at least one ID sample"));
    }
    Ok(correct as f64 / total as f64)
}

pub fn summarize(
    scores: &[f64],
    labels: &[GroundTruth],
    predictions: Option<&[Option<usize>]>,
) -> Result<EvalSummary> {
    let n_id = labels.iter().filter(|l| l.is_id).count();
    Ok(EvalSummary {
        auroc: auroc(scores, labels)?,
        fpr95: fpr95(scores, labels)?,
        id_acc: predictions.map(|p| id_acc(p, labels)).transpose()?,
        n_id,
        n_ood: labels.len() - n_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textual::{init_positive, LabeledEmbedding};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(n_id: usize, n_ood: usize) -> Vec<GroundTruth> {
        std::iter::repeat_n(GroundTruth::id(0), n_id)
            .chain(std::iter::repeat_n(GroundTruth::ood(), n_ood))
            .collect()
    }

    fn pairwise_auroc(scores: &[f64], labels: &[GroundTruth]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (a, la) in scores.iter().zip(labels) {
            for (b, lb) in scores.iter().zip(labels) {
                if la.is_id && !lb.is_id {
                    pairs += 1.0;
                    if a > b {
                        wins += 1.0;
                    } else if a == b {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    fn sweep_fpr95(scores: &[f64], labels: &[GroundTruth]) -> f64 {
        let n_id = labels.iter().filter(|l| l.is_id).count() as f64;
        let n_ood = labels.len() as f64 - n_id;
        let mut best_t = f64::NEG_INFINITY;
        for &t in scores {
            let tp = scores.iter().zip(labels).filter(|(s, l)| l.is_id && **s >= t).count() as f64;
            if tp / n_id >= 0.95 && t > best_t {
                best_t = t;
            }
        }
        scores.iter().zip(labels).filter(|(s, l)| !l.is_id && **s >= best_t).count() as f64 / n_ood
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8, 0.2, 0.1], &labels(2, 2)).unwrap(), 1.0);
        assert_eq!(auroc(&[0.4; 6], &labels(3, 3)).unwrap(), 0.5);
        assert!(auroc(&[0.1, 0.2], &labels(2, 0)).is_err());
        assert!(auroc(&[0.1], &labels(1, 1)).is_err());
    }

    #[test]
    fn fpr95_examples() {
        let mut scores = vec![0.9; 20];
        scores.extend([0.1; 10]);
        assert_eq!(fpr95(&scores, &labels(20, 10)).unwrap(), 0.0);
        let mut scores = vec![0.9; 20];
        scores.extend([1.0; 10]);
        assert_eq!(fpr95(&scores, &labels(20, 10)).unwrap(), 1.0);
    }

    #[test]
    fn fuzzed_metrics_match_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 500;
        // Coarse grid so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..40) as f64) / 40.0).collect();
        let lab: Vec<GroundTruth> = (0..n)
            .map(|i| if rng.gen_bool(0.4) || i == 0 { GroundTruth::id(0) } else { GroundTruth::ood() })
            .collect();
        assert!((auroc(&scores, &lab).unwrap() - pairwise_auroc(&scores, &lab)).abs() < 1e-12);
        assert_eq!(fpr95(&scores, &lab).unwrap(), sweep_fpr95(&scores, &lab));
    }

    #[test]
    fn id_acc_modes() {
        let t_p = init_positive(vec![
            LabeledEmbedding::new("a", Embedding::new(vec![1.0, 0.0]).unwrap()).unwrap(),
            LabeledEmbedding::new("b", Embedding::new(vec![-1.0, 0.0]).unwrap()).unwrap(),
        ])
        .unwrap();
        let samples = vec![t_p.entries()[0].embedding.clone(), t_p.entries()[1].embedding.clone()];
        let truth = vec![GroundTruth::id(0), GroundTruth::id(1)];
        let preds = text_argmax_predictions(&samples, &t_p).unwrap();
        assert_eq!(id_acc(&preds, &truth).unwrap(), 1.0);

        let wrong_side = vec![Embedding::new(vec![-0.9, 0.1]).unwrap()];
        let preds = text_argmax_predictions(&wrong_side, &t_p).unwrap();
        assert_eq!(id_acc(&preds, &[GroundTruth::id(0)]).unwrap(), 0.0);
        assert!(id_acc(&[None], &[GroundTruth::ood()]).is_err());
    }

    #[test]
    fn id_acc_matches_naive_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let t_p = init_positive(
            rows.iter()
                .enumerate()
                .map(|(i, r)| LabeledEmbedding::new(format!("c{i}"), Embedding::new(r.clone()).unwrap()).unwrap())
                .collect(),
        )
        .unwrap();
        let samples: Vec<Embedding> = (0..50)
            .map(|_| Embedding::new((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let truth: Vec<GroundTruth> = (0..50).map(|i| GroundTruth::id(i % 4)).collect();
        let mut correct = 0;
        for (s, t) in samples.iter().zip(&truth) {
            let mut best = (f64::MIN, 0);
            for (k, row) in t_p.entries().iter().enumerate() {
                let c: f64 = row.embedding.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
                if c > best.0 {
                    best = (c, k);
                }
            }
            correct += usize::from(Some(best.1) == t.class_index);
        }
        let preds = text_argmax_predictions(&samples, &t_p).unwrap();
        assert_eq!(id_acc(&preds, &truth).unwrap(), correct as f64 / 50.0);
    }

    proptest! {
        #[test]
        fn auroc_invariant_under_monotone_transform(raw in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..120)) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let lab: Vec<GroundTruth> = raw.iter().map(|r| if r.1 { GroundTruth::id(0) } else { GroundTruth::ood() }).collect();
            prop_assume!(lab.iter().any(|l| l.is_id) && lab.iter().any(|l| !l.is_id));
            let a = auroc(&scores, &lab).unwrap();
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + s).collect();
            prop_assert!((a - auroc(&warped, &lab).unwrap()).abs() < 1e-12);

            let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
            let swapped: Vec<GroundTruth> = lab.iter().map(|l| if l.is_id { GroundTruth::ood() } else { GroundTruth::id(0) }).collect();
            prop_assert!((a + auroc(&flipped, &lab).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((a + auroc(&scores, &swapped).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((a - auroc(&flipped, &swapped).unwrap()).abs() < 1e-12);
            prop_assert!((a - pairwise_auroc(&scores, &lab)).abs() < 1e-12);
        }

        #[test]
        fn fpr95_non_increasing_as_ood_drops(raw in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..120), drop in 0.0f64..0.5) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let lab: Vec<GroundTruth> = raw.iter().map(|r| if r.1 { GroundTruth::id(0) } else { GroundTruth::ood() }).collect();
            prop_assume!(lab.iter().any(|l| l.is_id) && lab.iter().any(|l| !l.is_id));
            let lowered: Vec<f64> = scores.iter().zip(&lab).map(|(s, l)| if l.is_id { *s } else { s - drop }).collect();
            prop_assert!(fpr95(&lowered, &lab).unwrap() <= fpr95(&scores, &lab).unwrap());
            prop_assert_eq!(fpr95(&scores, &lab).unwrap(), sweep_fpr95(&scores, &lab));
        }
    }
}
