//! Reproducible synthetic embedding scenarios on the unit sphere.
//!
//! Samples cluster around per-class mean directions; a per-sample angular
//! rotation emulates domain shift on the test split, and rotated prompt
//! vectors emulate degraded text alignment. Everything is drawn from one
//! sequential SplitMix64 stream, so a scenario is a pure function of its
//! seed across platforms.

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::io::{LabelEntry, LabelTable};
use crate::scoring::PromptEmbeddingGroups;

/// SplitMix64: golden-ratio counter with a two-round xor-multiply
/// finalizer. Chosen because it is tiny, fast, and defined identically in
/// every language, which keeps generated artifacts portable.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals (Box-Muller).
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let mut u1 = self.next_f64();
        if u1 == 0.0 {
            u1 = f64::MIN_POSITIVE;
        }
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }
}

fn gaussian_vec(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    while out.len() < len {
        let (a, b) = rng.next_gaussian_pair();
        out.push(a);
        out.push(b);
    }
    out.truncate(len);
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm(&v);
    if n < 1e-9 {
        return None;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Some(v)
}

/// Uniform random unit direction (normalized isotropic Gaussian).
fn unit_gaussian(rng: &mut SplitMix64, dim: usize) -> Vec<f64> {
    loop {
        if let Some(u) = normalized(gaussian_vec(rng, dim)) {
            return u;
        }
    }
}

/// Point on the sphere near `mean`: a unit Gaussian offset scaled by
/// 1/concentration, re-normalized. Large concentrations collapse onto the
/// mean direction.
fn sample_around(mean: &[f64], concentration: f64, rng: &mut SplitMix64) -> Vec<f64> {
    loop {
        let offset = unit_gaussian(rng, mean.len());
        let v: Vec<f64> = mean
            .iter()
            .zip(&offset)
            .map(|(m, o)| m + o / concentration)
            .collect();
        if let Some(u) = normalized(v) {
            return u;
        }
    }
}

/// Rotates the unit vector `x` by `angle` radians inside the plane spanned
/// by `x` and a random orthogonal direction. Always consumes the random
/// draw, so scenarios that differ only in angles share all other draws;
/// angle 0 returns `x` bit-exactly.
fn rotate_random_plane(x: &[f64], angle: f64, rng: &mut SplitMix64) -> Vec<f64> {
    let u = loop {
        let g = gaussian_vec(rng, x.len());
        let dot: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        let ortho: Vec<f64> = g.iter().zip(x).map(|(a, b)| a - dot * b).collect();
        if let Some(u) = normalized(ortho) {
            break u;
        }
    };
    let (c, s) = (angle.cos(), angle.sin());
    x.iter().zip(&u).map(|(a, b)| c * a + s * b).collect()
}

/// One ID class: unit mean direction plus cluster tightness.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub mean: Vec<f32>,
    pub concentration: f64,
}

/// Full description of a synthetic experiment; `generate` is a pure
/// function of this value.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScenario {
    pub dim: usize,
    /// ID classes; reference, prompt, and ID test rows cluster here.
    pub classes: Vec<ClassSpec>,
    pub n_ood_classes: usize,
    pub ood_concentration: f64,
    /// Reference rows per ID class.
    pub n_reference: usize,
    /// Test rows per ID class.
    pub n_id_test: usize,
    /// Test rows per OOD class.
    pub n_ood_test: usize,
    pub prompts_per_class: usize,
    /// Angular perturbation of every ID test row, radians.
    pub shift: f64,
    /// Angular perturbation of every prompt row, radians.
    pub prototype_noise: f64,
    /// OOD mean directions: rotate ID means by this angle, or draw fresh
    /// random directions when absent.
    pub ood_offset: Option<f64>,
    pub seed: u64,
}

/// Everything `generate` produces; ready to score directly or to write to
/// disk via the io module.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub reference: EmbeddingMatrix,
    /// Class name per reference row.
    pub reference_classes: Vec<String>,
    pub prompts: PromptEmbeddingGroups,
    pub test: EmbeddingMatrix,
    pub labels: LabelTable,
}

impl SynthScenario {
    /// Random unit mean directions for `n_id_classes`, shared
    /// concentration, and desk-scale default counts. The generation seed
    /// is re-derived from the stream so it never overlaps the draws used
    /// for the means.
    pub fn sampled(
        dim: usize,
        n_id_classes: usize,
        n_ood_classes: usize,
        concentration: f64,
        seed: u64,
    ) -> Result<SynthScenario> {
        if n_id_classes == 0 {
            return Err(Error::InvalidScenario("need at least one ID class".into()));
        }
        if dim < 2 {
            return Err(Error::InvalidScenario(format!(
                "dim must be at least 2, got {dim}"
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let classes = (0..n_id_classes)
            .map(|_| ClassSpec {
                mean: unit_gaussian(&mut rng, dim)
                    .into_iter()
                    .map(|v| v as f32)
                    .collect(),
                concentration,
            })
            .collect();
        let scenario = SynthScenario {
            dim,
            classes,
            n_ood_classes,
            ood_concentration: concentration,
            n_reference: 100,
            n_id_test: 60,
            n_ood_test: 60,
            prompts_per_class: 3,
            shift: 0.0,
            prototype_noise: 0.0,
            ood_offset: None,
            seed: rng.next_u64(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// The fixed desk-scale scenario used by the directional experiments:
    /// moderate clusters, shifted test split, noisy prompts, and OOD
    /// classes at a fixed angle from ID means so the initial separation
    /// is imperfect but propagation has structure to exploit.
    pub fn standard() -> SynthScenario {
        let mut s = Self::sampled(64, 5, 3, 6.0, 42).expect("static scenario is valid");
        s.shift = 0.3;
        s.prototype_noise = 0.9;
        s.ood_offset = Some(0.35);
        s.ood_concentration = 3.0;
        s
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(Error::InvalidScenario(detail));
        if self.dim < 2 {
            return fail(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.classes.is_empty() {
            return fail("need at least one ID class".into());
        }
        for (i, spec) in self.classes.iter().enumerate() {
            if spec.mean.len() != self.dim {
                return fail(format!(
                    "class {i} mean has length {}, expected {}",
                    spec.mean.len(),
                    self.dim
                ));
            }
            let n = spec.mean.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-3 {
                return fail(format!("class {i} mean is not unit norm (norm {n})"));
            }
            if !(spec.concentration > 0.0 && spec.concentration.is_finite()) {
                return fail(format!("class {i} concentration must be positive and finite"));
            }
        }
        if self.n_reference == 0 || self.n_id_test == 0 || self.prompts_per_class == 0 {
            return fail("per-class counts must be positive".into());
        }
        if self.n_ood_classes > 0 {
            if self.n_ood_test == 0 {
                return fail("n_ood_test must be positive when OOD classes exist".into());
            }
            if !(self.ood_concentration > 0.0 && self.ood_concentration.is_finite()) {
                return fail("ood_concentration must be positive and finite".into());
            }
        }
        for (name, angle) in [("shift", self.shift), ("prototype_noise", self.prototype_noise)] {
            if !(0.0..=std::f64::consts::PI).contains(&angle) {
                return fail(format!("{name} must lie in [0, pi], got {angle}"));
            }
        }
        if let Some(theta) = self.ood_offset {
            if !(theta > 0.0 && theta <= std::f64::consts::PI) {
                return fail(format!("ood_offset must lie in (0, pi], got {theta}"));
            }
        }
        Ok(())
    }

    /// Draws the full scenario. Stream order: OOD mean directions, then
    /// reference rows, prompt rows, ID test rows, OOD test rows.
    pub fn generate(&self) -> Result<SynthOutput> {
        self.validate()?;
        let mut rng = SplitMix64::new(self.seed);
        let dim = self.dim;
        let id_means: Vec<Vec<f64>> = self
            .classes
            .iter()
            .map(|c| c.mean.iter().map(|&v| v as f64).collect())
            .collect();

        let ood_means: Vec<Vec<f64>> = (0..self.n_ood_classes)
            .map(|c| match self.ood_offset {
                Some(theta) => {
                    rotate_random_plane(&id_means[c % id_means.len()], theta, &mut rng)
                }
                None => unit_gaussian(&mut rng, dim),
            })
            .collect();

        let to_f32 = |v: &[f64]| -> Vec<f32> { v.iter().map(|&x| x as f32).collect() };

        let mut reference_rows = Vec::new();
        let mut reference_classes = Vec::new();
        for (i, spec) in self.classes.iter().enumerate() {
            for _ in 0..self.n_reference {
                reference_rows.push(to_f32(&sample_around(
                    &id_means[i],
                    spec.concentration,
                    &mut rng,
                )));
                reference_classes.push(format!("id_{i}"));
            }
        }

        let mut prompt_rows = Vec::new();
        let mut prompt_class_index = Vec::new();
        for (i, _) in self.classes.iter().enumerate() {
            for _ in 0..self.prompts_per_class {
                let p = rotate_random_plane(&id_means[i], self.prototype_noise, &mut rng);
                prompt_rows.push(to_f32(&p));
                prompt_class_index.push(i);
            }
        }

        let mut test_rows = Vec::new();
        let mut label_entries = Vec::new();
        for (i, spec) in self.classes.iter().enumerate() {
            for _ in 0..self.n_id_test {
                let s = sample_around(&id_means[i], spec.concentration, &mut rng);
                let s = rotate_random_plane(&s, self.shift, &mut rng);
                label_entries.push(LabelEntry {
                    index: test_rows.len(),
                    is_ood: false,
                    class_label: Some(format!("id_{i}")),
                });
                test_rows.push(to_f32(&s));
            }
        }
        for (c, mean) in ood_means.iter().enumerate() {
            for _ in 0..self.n_ood_test {
                let s = sample_around(mean, self.ood_concentration, &mut rng);
                label_entries.push(LabelEntry {
                    index: test_rows.len(),
                    is_ood: true,
                    class_label: Some(format!("ood_{c}")),
                });
                test_rows.push(to_f32(&s));
            }
        }

        let class_names: Vec<String> = (0..self.classes.len()).map(|i| format!("id_{i}")).collect();
        Ok(SynthOutput {
            reference: EmbeddingMatrix::from_rows(&reference_rows)?,
            reference_classes,
            prompts: PromptEmbeddingGroups::new(
                EmbeddingMatrix::from_rows(&prompt_rows)?,
                prompt_class_index,
                class_names,
            )?,
            test: EmbeddingMatrix::from_rows(&test_rows)?,
            labels: LabelTable::new(label_entries)?,
        })
    }
}
