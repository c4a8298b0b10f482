//! Initial OOD scores from text prototypes and reference samples, plus
//! baseline scorers over the same embeddings.

use rayon::prelude::*;

use crate::embedding::{cosine_sim, EmbeddingMatrix, ZERO_NORM_EPS};
use crate::error::{Error, Result};
use crate::score::ScoreVector;

/// One prototype vector per class. Prototypes are means of unit-norm
/// prompt embeddings, so their norms lie in (0, 1]; they are compared by
/// cosine similarity, which self-normalizes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    prototypes: EmbeddingMatrix,
    class_names: Vec<String>,
}

impl PrototypeSet {
    pub fn new(prototypes: EmbeddingMatrix, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() != prototypes.n() {
            return Err(Error::LengthMismatch {
                left: class_names.len(),
                right: prototypes.n(),
            });
        }
        for c in 0..prototypes.n() {
            if prototypes.row_norm(c) < ZERO_NORM_EPS {
                return Err(Error::ZeroNormRow { row: c });
            }
        }
        Ok(PrototypeSet {
            prototypes,
            class_names,
        })
    }

    pub fn prototypes(&self) -> &EmbeddingMatrix {
        &self.prototypes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.prototypes.n()
    }

    pub fn d(&self) -> usize {
        self.prototypes.d()
    }
}

/// Encoded prompt vectors with a class assignment per row. Every class
/// owns at least one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptEmbeddingGroups {
    embeddings: EmbeddingMatrix,
    class_index: Vec<usize>,
    class_names: Vec<String>,
}

impl PromptEmbeddingGroups {
    pub fn new(
        embeddings: EmbeddingMatrix,
        class_index: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if class_index.len() != embeddings.n() {
            return Err(Error::LengthMismatch {
                left: class_index.len(),
                right: embeddings.n(),
            });
        }
        let n_classes = class_names.len();
        let mut counts = vec![0usize; n_classes];
        for &c in &class_index {
            if c >= n_classes {
                return Err(Error::InvalidFormat {
                    detail: format!("class index {c} out of range for {n_classes} classes"),
                });
            }
            counts[c] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass { class: empty });
        }
        Ok(PromptEmbeddingGroups {
            embeddings,
            class_index,
            class_names,
        })
    }

    /// Builds groups from a per-row class-name list (classes ordered by
    /// first appearance).
    pub fn from_row_classes(embeddings: EmbeddingMatrix, row_classes: &[String]) -> Result<Self> {
        let (class_index, class_names) = crate::io::class_indices(row_classes);
        Self::new(embeddings, class_index, class_names)
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn class_index(&self) -> &[usize] {
        &self.class_index
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }
}

/// Per-class arithmetic means of the rows of `m`, accumulated in f64.
/// Every class in 0..n_classes must own at least one row.
fn class_means(m: &EmbeddingMatrix, class_index: &[usize], n_classes: usize) -> Result<Vec<Vec<f64>>> {
    let d = m.d();
    let mut sums = vec![vec![0.0f64; d]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (row, &c) in m.rows().zip(class_index) {
        counts[c] += 1;
        for (acc, &v) in sums[c].iter_mut().zip(row) {
            *acc += v as f64;
        }
    }
    for (c, count) in counts.iter().enumerate() {
        if *count == 0 {
            return Err(Error::EmptyClass { class: c });
        }
        for v in sums[c].iter_mut() {
            *v /= *count as f64;
        }
    }
    Ok(sums)
}

fn means_to_matrix(means: &[Vec<f64>], d: usize) -> Result<EmbeddingMatrix> {
    let mut data = Vec::with_capacity(means.len() * d);
    for mean in means {
        data.extend(mean.iter().map(|&v| v as f32));
    }
    EmbeddingMatrix::new(data, means.len(), d)
}

/// Normalizes each prompt row, then averages rows per class. Prototypes
/// are intentionally NOT re-normalized after averaging.
pub fn build_prototypes(groups: &PromptEmbeddingGroups) -> Result<PrototypeSet> {
    let normed = groups.embeddings().normalize_rows()?;
    let means = class_means(&normed, groups.class_index(), groups.class_names().len())?;
    let prototypes = means_to_matrix(&means, normed.d())?;
    PrototypeSet::new(prototypes, groups.class_names().to_vec())
}

fn check_proto_dims(test: &EmbeddingMatrix, protos: &PrototypeSet) -> Result<()> {
    if test.d() != protos.d() {
        return Err(Error::DimensionMismatch {
            expected: protos.d(),
            actual: test.d(),
        });
    }
    Ok(())
}

/// Cosine similarities of test row `i` against every prototype.
fn proto_sims(test: &EmbeddingMatrix, protos: &PrototypeSet, i: usize) -> Result<Vec<f64>> {
    let row = test.row(i);
    (0..protos.n_classes())
        .map(|c| {
            cosine_sim(row, protos.prototypes().row(c)).map_err(|e| match e {
                Error::ZeroNormRow { row: 0 } => Error::ZeroNormRow { row: i },
                other => other,
            })
        })
        .collect()
}

/// Maximum cosine similarity to any text prototype, per test sample.
pub fn text_score(test: &EmbeddingMatrix, protos: &PrototypeSet) -> Result<ScoreVector> {
    check_proto_dims(test, protos)?;
    let values = (0..test.n())
        .into_par_iter()
        .map(|i| {
            let sims = proto_sims(test, protos, i)?;
            Ok(sims.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    ScoreVector::new(values, 0)
}

/// Maximum-logit baseline. With cosine logits this is definitionally the
/// same statistic as [`text_score`]; kept as a named alias so baseline
/// tables read naturally.
pub fn mls_score(test: &EmbeddingMatrix, protos: &PrototypeSet) -> Result<ScoreVector> {
    text_score(test, protos)
}

/// Argmax class per test sample; ties break to the lowest class index.
pub fn classify(test: &EmbeddingMatrix, protos: &PrototypeSet) -> Result<Vec<usize>> {
    check_proto_dims(test, protos)?;
    (0..test.n())
        .into_par_iter()
        .map(|i| {
            let sims = proto_sims(test, protos, i)?;
            let mut best = 0usize;
            for (c, &s) in sims.iter().enumerate().skip(1) {
                if s > sims[best] {
                    best = c;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Max softmax probability of the per-class cosine similarities at the
/// given temperature. Shifted by the max logit for stability; exact for
/// the degenerate one-class and all-equal cases.
fn softmax_max(sims: &[f64], temperature: f64) -> f64 {
    let m = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = sims.iter().map(|s| ((s - m) / temperature).exp()).sum();
    1.0 / denom
}

/// Maximum softmax probability baseline over cosine logits.
pub fn msp_score(test: &EmbeddingMatrix, protos: &PrototypeSet, temperature: f64) -> Result<ScoreVector> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    check_proto_dims(test, protos)?;
    let values = (0..test.n())
        .into_par_iter()
        .map(|i| Ok(softmax_max(&proto_sims(test, protos, i)?, temperature)))
        .collect::<Result<Vec<f64>>>()?;
    ScoreVector::new(values, 0)
}

/// Mean of the k largest cosine similarities between each test sample and
/// the reference rows.
pub fn source_similarity(test: &EmbeddingMatrix, reference: &EmbeddingMatrix, k: usize) -> Result<ScoreVector> {
    if test.d() != reference.d() {
        return Err(Error::DimensionMismatch {
            expected: reference.d(),
            actual: test.d(),
        });
    }
    if k == 0 || k > reference.n() {
        return Err(Error::KTooLarge {
            k,
            available: reference.n(),
        });
    }
    let r = reference.n();
    let values = (0..test.n())
        .into_par_iter()
        .map(|i| {
            let mut sims = (0..r)
                .map(|j| {
                    cosine_sim(test.row(i), reference.row(j)).map_err(|e| match e {
                        Error::ZeroNormRow { row: 0 } => Error::ZeroNormRow { row: i },
                        other => other,
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            // Partition the k largest to the tail, then sum them in sorted
            // order so the result is independent of partition internals.
            sims.select_nth_unstable_by(r - k, |a, b| a.total_cmp(b));
            let top = &mut sims[r - k..];
            top.sort_unstable_by(|a, b| b.total_cmp(a));
            Ok(top.iter().sum::<f64>() / k as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    ScoreVector::new(values, 0)
}

/// Max cosine similarity to per-class reference prototypes (class means of
/// normalized reference rows, not re-normalized).
pub fn cosine_proto_score(
    test: &EmbeddingMatrix,
    reference: &EmbeddingMatrix,
    ref_class_index: &[usize],
) -> Result<ScoreVector> {
    if ref_class_index.len() != reference.n() {
        return Err(Error::LengthMismatch {
            left: ref_class_index.len(),
            right: reference.n(),
        });
    }
    let n_classes = ref_class_index.iter().max().map_or(0, |&m| m + 1);
    let normed = reference.normalize_rows()?;
    let means = class_means(&normed, ref_class_index, n_classes)?;
    let prototypes = means_to_matrix(&means, normed.d())?;
    let names = (0..n_classes).map(|c| c.to_string()).collect();
    let protos = PrototypeSet::new(prototypes, names)?;
    text_score(test, &protos)
}

/// Dense lower-triangular Cholesky factor of a symmetric matrix; fails if
/// any pivot is non-positive.
fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::SingularCovariance);
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Ok(l)
}

fn forward_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * d + k] * b[k];
        }
        b[i] = sum / l[i * d + i];
    }
}

/// Negated minimum squared Mahalanobis distance to any class mean, under a
/// single covariance tied across classes (class-centered scatter / R) plus
/// `ridge` on the diagonal. Operates on raw features, not normalized rows.
pub fn mahalanobis_score(
    test: &EmbeddingMatrix,
    reference: &EmbeddingMatrix,
    ref_class_index: &[usize],
    ridge: f64,
) -> Result<ScoreVector> {
    if test.d() != reference.d() {
        return Err(Error::DimensionMismatch {
            expected: reference.d(),
            actual: test.d(),
        });
    }
    if ref_class_index.len() != reference.n() {
        return Err(Error::LengthMismatch {
            left: ref_class_index.len(),
            right: reference.n(),
        });
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    let d = reference.d();
    let n_classes = ref_class_index.iter().max().map_or(0, |&m| m + 1);
    let means = class_means(reference, ref_class_index, n_classes)?;

    let mut cov = vec![0.0f64; d * d];
    let mut centered = vec![0.0f64; d];
    for (row, &c) in reference.rows().zip(ref_class_index) {
        for ((out, &v), mu) in centered.iter_mut().zip(row).zip(&means[c]) {
            *out = v as f64 - mu;
        }
        for a in 0..d {
            for b in a..d {
                cov[a * d + b] += centered[a] * centered[b];
            }
        }
    }
    let r = reference.n() as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / r + if a == b { ridge } else { 0.0 };
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    let l = cholesky(&cov, d)?;

    let values = (0..test.n())
        .into_par_iter()
        .map(|i| {
            let row = test.row(i);
            let mut best = f64::INFINITY;
            let mut buf = vec![0.0f64; d];
            for mean in &means {
                for ((out, &v), mu) in buf.iter_mut().zip(row).zip(mean) {
                    *out = v as f64 - mu;
                }
                forward_solve(&l, d, &mut buf);
                let dist2: f64 = buf.iter().map(|v| v * v).sum();
                best = best.min(dist2);
            }
            -best
        })
        .collect::<Vec<f64>>();
    ScoreVector::new(values, 0)
}
