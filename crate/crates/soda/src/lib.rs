//! Out-of-distribution scoring for embedding vectors.
//!
//! The pipeline works on pre-computed feature embeddings and never touches
//! the models that produced them:
//!
//! 1. Score each test sample by its maximum cosine similarity to per-class
//!    text prototypes ([`scoring::text_score`]).
//! 2. Connect test samples whose pairwise similarity clears a percentile
//!    threshold, keeping self-loops ([`graph::build_graph`]).
//! 3. Smooth the scores over that graph: each iteration blends a sample's
//!    initial score with the mean of its neighbors' previous scores
//!    ([`propagation::propagate`]).
//! 4. Optionally weight by similarity to labeled reference embeddings
//!    ([`scoring::source_similarity`]) and combine the two propagated
//!    components by elementwise product ([`propagation::combine`]).
//!
//! [`metrics`] evaluates any score vector with AUC and FPR at fixed recall,
//! [`synth`] generates reproducible synthetic scenarios on the unit sphere,
//! and [`pipeline`] ties the stages together behind a [`SodaConfig`].
//!
//! Embeddings are `f32`; all reductions accumulate in `f64`, and every
//! stage is deterministic for a fixed input regardless of thread count.
//!
//! ```
//! use soda::metrics::evaluate;
//! use soda::pipeline::{run, PipelineInputs, PipelineOptions};
//! use soda::synth::SynthScenario;
//!
//! let data = SynthScenario::standard().generate()?;
//! let mut opts = PipelineOptions::default();
//! opts.config.mode = soda::Mode::Full;
//! let result = run(
//!     &PipelineInputs {
//!         test: &data.test,
//!         prompts: &data.prompts,
//!         reference: Some(&data.reference),
//!         reference_classes: None,
//!     },
//!     &opts,
//! )?;
//! let m = evaluate(result.final_score.values(), &data.labels.ood_flags())?;
//! assert!(m.auc > 0.95);
//! # Ok::<(), soda::Error>(())
//! ```

pub mod config;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod propagation;
pub mod score;
pub mod scoring;
pub mod synth;

pub use config::{Mode, SodaConfig};
pub use embedding::{cosine_sim, pairwise_similarity, EmbeddingMatrix, SimilarityMatrix};
pub use error::{Error, Result};
pub use score::ScoreVector;
