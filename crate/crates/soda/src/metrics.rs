//! Threshold-free OOD evaluation: AUC, FPR at fixed recall, and the
//! source-similarity-binned accuracy analysis.
//!
//! ID is the positive class throughout: a good scorer assigns higher
//! scores to ID samples than to OOD samples.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub auc: f64,
    pub fpr95: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

fn count_labels(scores: &[f64], is_ood: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != is_ood.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: is_ood.len(),
        });
    }
    for (index, v) in scores.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteScore { index });
        }
    }
    let n_ood = is_ood.iter().filter(|&&o| o).count();
    let n_id = is_ood.len() - n_ood;
    if n_id == 0 || n_ood == 0 {
        return Err(Error::DegenerateLabels { n_id, n_ood });
    }
    Ok((n_id, n_ood))
}

/// Probability that a uniformly random (ID, OOD) pair is ordered with the
/// ID score strictly higher; ties count one half. Computed with midranks,
/// which agrees exactly with brute-force pair counting: both reduce to
/// the same sum of halves, exact in f64 at any feasible N.
pub fn auc(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    let (n_id, n_ood) = count_labels(scores, is_ood)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_id = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie block [i, j].
        let midrank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if !is_ood[idx] {
                rank_sum_id += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_id - (n_id as f64 * (n_id as f64 + 1.0)) / 2.0;
    Ok(u / (n_id as f64 * n_ood as f64))
}

/// False positive rate at the threshold that retains at least
/// ceil(recall * n_id) ID samples. The threshold is the m-th largest ID
/// score (an attained value), and OOD samples at or above it count as
/// false positives. A 1e-9 slack keeps ceil from overshooting when
/// recall * n_id is an exact integer blurred by floating point.
pub fn fpr_at_recall(scores: &[f64], is_ood: &[bool], recall: f64) -> Result<f64> {
    if !(recall > 0.0 && recall <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "recall must lie in (0, 1], got {recall}"
        )));
    }
    let (n_id, n_ood) = count_labels(scores, is_ood)?;
    let mut id_scores: Vec<f64> = scores
        .iter()
        .zip(is_ood)
        .filter(|(_, &o)| !o)
        .map(|(&s, _)| s)
        .collect();
    id_scores.sort_by(|a, b| b.total_cmp(a));
    let m = ((recall * n_id as f64 - 1e-9).ceil().max(1.0)).min(n_id as f64) as usize;
    let tau = id_scores[m - 1];
    let fp = scores
        .iter()
        .zip(is_ood)
        .filter(|(s, &o)| o && **s >= tau)
        .count();
    Ok(fp as f64 / n_ood as f64)
}

/// AUC plus FPR at 95% recall in one report.
pub fn evaluate(scores: &[f64], is_ood: &[bool]) -> Result<EvalResult> {
    let (n_id, n_ood) = count_labels(scores, is_ood)?;
    Ok(EvalResult {
        auc: auc(scores, is_ood)?,
        fpr95: fpr_at_recall(scores, is_ood, 0.95)?,
        n_id,
        n_ood,
    })
}

/// One equal-count bin of samples sorted by source similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct BinAccuracy {
    pub d_src_min: f64,
    pub d_src_max: f64,
    pub accuracy: f64,
    pub count: usize,
}

/// Sorts samples by d_src ascending (index breaks ties, so the split is
/// deterministic), slices them into `n_bins` equal-count bins with the
/// remainder spread over the earliest bins, and reports classification
/// accuracy per bin. Bins that would be empty (n < n_bins) are omitted.
pub fn binned_accuracy<T: PartialEq>(
    predictions: &[T],
    true_classes: &[T],
    d_src: &[f64],
    n_bins: usize,
) -> Result<Vec<BinAccuracy>> {
    if predictions.len() != true_classes.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: true_classes.len(),
        });
    }
    if predictions.len() != d_src.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: d_src.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::InvalidConfig("n_bins must be positive".into()));
    }
    let n = d_src.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d_src[a].total_cmp(&d_src[b]).then(a.cmp(&b)));
    let base = n / n_bins;
    let rem = n % n_bins;
    let mut out = Vec::new();
    let mut start = 0;
    for b in 0..n_bins {
        let size = base + usize::from(b < rem);
        if size == 0 {
            continue;
        }
        let slice = &order[start..start + size];
        let correct = slice
            .iter()
            .filter(|&&i| predictions[i] == true_classes[i])
            .count();
        out.push(BinAccuracy {
            d_src_min: d_src[slice[0]],
            d_src_max: d_src[*slice.last().unwrap()],
            accuracy: correct as f64 / size as f64,
            count: size,
        });
        start += size;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ID: bool = false;
    const OOD: bool = true;

    fn brute_auc(scores: &[f64], is_ood: &[bool]) -> f64 {
        let mut num = 0.0f64;
        let mut pairs = 0u64;
        for (si, &oi) in scores.iter().zip(is_ood) {
            if oi {
                continue;
            }
            for (sj, &oj) in scores.iter().zip(is_ood) {
                if !oj {
                    continue;
                }
                pairs += 1;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
        num / pairs as f64
    }

    #[test]
    fn perfect_separation() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [ID, ID, OOD, OOD];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
        assert_eq!(fpr_at_recall(&scores, &labels, 0.95).unwrap(), 0.0);
    }

    #[test]
    fn three_of_four_pairs_ordered() {
        let scores = [0.9, 0.7, 0.8, 0.2];
        let labels = [ID, ID, OOD, OOD];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.75);
    }

    #[test]
    fn all_ties_give_half() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let labels = [ID, ID, OOD, OOD];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
        assert_eq!(auc(&[1.0, 1.0], &[ID, OOD]).unwrap(), 0.5);
    }

    #[test]
    fn matches_brute_force_with_injected_ties() {
        // Deterministic pseudo-random scores quantized to force ties.
        for seed in 0..5u64 {
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next = move || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state
            };
            let n = 40 + (seed as usize) * 13;
            let scores: Vec<f64> = (0..n).map(|_| (next() % 17) as f64 / 16.0).collect();
            let labels: Vec<bool> = (0..n).map(|_| next() % 3 == 0).collect();
            if !labels.iter().any(|&o| o) || labels.iter().all(|&o| o) {
                continue;
            }
            let fast = auc(&scores, &labels).unwrap();
            let slow = brute_auc(&scores, &labels);
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn fpr_enumerated_example() {
        // 19 ID at 0.9 and one at 0.1; recall 0.95 keeps the 19th-largest
        // ID score 0.9 as threshold, and neither OOD sample reaches it.
        let mut scores = vec![0.9f64; 19];
        scores.push(0.1);
        scores.extend_from_slice(&[0.5, 0.05]);
        let mut labels = vec![ID; 20];
        labels.extend_from_slice(&[OOD, OOD]);
        assert_eq!(fpr_at_recall(&scores, &labels, 0.95).unwrap(), 0.0);
        // At full recall the threshold drops to 0.1 and one OOD clears it.
        assert_eq!(fpr_at_recall(&scores, &labels, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn total_inversion_gives_full_fpr() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [ID, ID, OOD, OOD];
        assert_eq!(fpr_at_recall(&scores, &labels, 0.95).unwrap(), 1.0);
        assert_eq!(auc(&scores, &labels).unwrap(), 0.0);
    }

    #[test]
    fn fpr_monotone_in_recall() {
        let scores = [0.9, 0.8, 0.75, 0.6, 0.4, 0.85, 0.7, 0.3];
        let labels = [ID, ID, ID, ID, ID, OOD, OOD, OOD];
        let mut prev = 0.0;
        for recall in [0.2, 0.4, 0.6, 0.8, 0.95, 1.0] {
            let fpr = fpr_at_recall(&scores, &labels, recall).unwrap();
            assert!(fpr >= prev, "recall {recall}");
            prev = fpr;
        }
    }

    #[test]
    fn degenerate_labels_rejected() {
        assert!(matches!(
            auc(&[1.0, 0.5], &[ID, ID]),
            Err(Error::DegenerateLabels { n_id: 2, n_ood: 0 })
        ));
        assert!(matches!(
            fpr_at_recall(&[1.0], &[OOD], 0.95),
            Err(Error::DegenerateLabels { n_id: 0, n_ood: 1 })
        ));
        assert!(fpr_at_recall(&[1.0, 0.0], &[ID, OOD], 0.0).is_err());
        assert!(auc(&[1.0, f64::NAN], &[ID, OOD]).is_err());
    }

    #[test]
    fn evaluate_bundles_counts() {
        let r = evaluate(&[0.9, 0.8, 0.1], &[ID, ID, OOD]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.fpr95, 0.0);
        assert_eq!((r.n_id, r.n_ood), (2, 1));
    }

    #[test]
    fn binned_accuracy_cases() {
        // All correct: every bin reports 1.0.
        let preds = [0, 1, 0, 1];
        let truth = [0, 1, 0, 1];
        let d_src = [0.1, 0.2, 0.3, 0.4];
        for bin in binned_accuracy(&preds, &truth, &d_src, 2).unwrap() {
            assert_eq!(bin.accuracy, 1.0);
        }

        // Single bin: overall accuracy.
        let truth2 = [0, 1, 1, 1];
        let bins = binned_accuracy(&preds, &truth2, &d_src, 1).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].accuracy, 0.75);
        assert_eq!(bins[0].count, 4);
        assert_eq!((bins[0].d_src_min, bins[0].d_src_max), (0.1, 0.4));

        // Bottom half wrong, top half right.
        let preds3: Vec<usize> = vec![9, 9, 9, 9, 9, 1, 1, 1, 1, 1];
        let truth3: Vec<usize> = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let d3: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let bins = binned_accuracy(&preds3, &truth3, &d3, 2).unwrap();
        assert_eq!(bins[0].accuracy, 0.0);
        assert_eq!(bins[1].accuracy, 1.0);
    }

    #[test]
    fn binned_accuracy_remainder_and_empty_bins() {
        let preds = ["a", "a", "b", "b", "a"];
        let truth = ["a", "b", "b", "b", "a"];
        let d_src = [0.5, 0.1, 0.9, 0.2, 0.7];
        let bins = binned_accuracy(&preds, &truth, &d_src, 2).unwrap();
        // 5 samples in 2 bins: sizes 3 and 2.
        assert_eq!(bins[0].count, 3);
        assert_eq!(bins[1].count, 2);
        // More bins than samples: only non-empty bins are emitted.
        let bins = binned_accuracy(&preds, &truth, &d_src, 9).unwrap();
        assert_eq!(bins.len(), 5);
        assert!(bins.iter().all(|b| b.count == 1));
        assert!(binned_accuracy(&preds, &truth, &d_src, 0).is_err());
    }
}
