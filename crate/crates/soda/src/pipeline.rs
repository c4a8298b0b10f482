//! End-to-end scoring: prototypes, initial scores, graph, propagation,
//! and the optional reference-weighted combination, behind one config.

use std::time::Instant;

use crate::config::{Mode, SodaConfig};
use crate::embedding::{pairwise_similarity, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::{build_graph, SimilarityGraph};
use crate::propagation::{combine, propagate, solve_fixed_point, PropagationTrace};
use crate::score::ScoreVector;
use crate::scoring::{
    build_prototypes, cosine_proto_score, mahalanobis_score, msp_score, source_similarity,
    text_score, PromptEmbeddingGroups, PrototypeSet,
};

/// Which scorer seeds propagation in zero-shot runs. `Mls` is the
/// documented alias of the default text score; the others replace it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Baseline {
    #[default]
    None,
    Msp,
    Mls,
    CosineProto,
    Mahalanobis,
    SourceSim,
}

impl Baseline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Baseline::None => "none",
            Baseline::Msp => "msp",
            Baseline::Mls => "mls",
            Baseline::CosineProto => "cosine_proto",
            Baseline::Mahalanobis => "mahalanobis",
            Baseline::SourceSim => "source_sim",
        }
    }

    pub fn parse(s: &str) -> Result<Baseline> {
        Ok(match s {
            "none" => Baseline::None,
            "msp" => Baseline::Msp,
            "mls" => Baseline::Mls,
            "cosine_proto" => Baseline::CosineProto,
            "mahalanobis" => Baseline::Mahalanobis,
            "source_sim" => Baseline::SourceSim,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown baseline {other:?}: expected none, msp, mls, cosine_proto, mahalanobis, or source_sim"
                )))
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub config: SodaConfig,
    pub baseline: Baseline,
    pub msp_temperature: f64,
    pub mahalanobis_ridge: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            config: SodaConfig::default(),
            baseline: Baseline::None,
            msp_temperature: 1.0,
            mahalanobis_ridge: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineInputs<'a> {
    pub test: &'a EmbeddingMatrix,
    pub prompts: &'a PromptEmbeddingGroups,
    pub reference: Option<&'a EmbeddingMatrix>,
    /// Class index per reference row; needed only by the cosine_proto and
    /// mahalanobis baselines.
    pub reference_classes: Option<&'a [usize]>,
}

/// Wall-clock milliseconds per stage, for the run manifest.
#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub prototypes_ms: f64,
    pub initial_scores_ms: f64,
    pub similarity_ms: f64,
    pub graph_ms: f64,
    pub propagation_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// Raw max-similarity text scores, before any baseline substitution.
    pub s_text: ScoreVector,
    /// Initial source similarities; absent in zero-shot mode.
    pub d_src: Option<ScoreVector>,
    /// The score vector that seeded propagation (product of components in
    /// full mode).
    pub initial: ScoreVector,
    /// The score after T propagation steps (and combination in full mode).
    pub final_score: ScoreVector,
    /// Propagation of the primary component (text score or baseline).
    pub primary_trace: PropagationTrace,
    /// Propagation of the source-similarity component, full mode only.
    pub src_trace: Option<PropagationTrace>,
    pub prototypes: PrototypeSet,
    pub graph: SimilarityGraph,
    pub timings: StageTimings,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn run(inputs: &PipelineInputs, opts: &PipelineOptions) -> Result<PipelineResult> {
    let cfg = &opts.config;
    cfg.validate()?;
    if cfg.mode == Mode::Full && opts.baseline != Baseline::None {
        return Err(Error::ConflictingFlags(
            "baselines replace the zero-shot score; use mode zs with a baseline".into(),
        ));
    }
    let need_reference = cfg.mode == Mode::Full
        || matches!(
            opts.baseline,
            Baseline::CosineProto | Baseline::Mahalanobis | Baseline::SourceSim
        );
    if need_reference && inputs.reference.is_none() {
        return Err(Error::ConflictingFlags(format!(
            "{} requires reference embeddings",
            if cfg.mode == Mode::Full {
                "mode full".to_string()
            } else {
                format!("baseline {}", opts.baseline.as_str())
            }
        )));
    }
    let need_classes = matches!(opts.baseline, Baseline::CosineProto | Baseline::Mahalanobis);
    if need_classes && inputs.reference_classes.is_none() {
        return Err(Error::ConflictingFlags(format!(
            "baseline {} requires reference class assignments",
            opts.baseline.as_str()
        )));
    }

    let mut timings = StageTimings::default();

    let t = Instant::now();
    let prototypes = build_prototypes(inputs.prompts)?;
    timings.prototypes_ms = ms(t);

    let t = Instant::now();
    let s_text = text_score(inputs.test, &prototypes)?;
    timings.initial_scores_ms = ms(t);

    let n = inputs.test.n();
    let graph = if n >= 2 {
        let t = Instant::now();
        let sims = pairwise_similarity(inputs.test)?;
        timings.similarity_ms = ms(t);
        let t = Instant::now();
        let g = build_graph(&sims, cfg.eta)?;
        timings.graph_ms = ms(t);
        g
    } else {
        SimilarityGraph::self_loops_only(n)?
    };

    let result = match cfg.mode {
        Mode::ZeroShot => {
            let t = Instant::now();
            let seed = match opts.baseline {
                Baseline::None | Baseline::Mls => s_text.clone(),
                Baseline::Msp => msp_score(inputs.test, &prototypes, opts.msp_temperature)?,
                Baseline::CosineProto => cosine_proto_score(
                    inputs.test,
                    inputs.reference.unwrap(),
                    inputs.reference_classes.unwrap(),
                )?,
                Baseline::Mahalanobis => mahalanobis_score(
                    inputs.test,
                    inputs.reference.unwrap(),
                    inputs.reference_classes.unwrap(),
                    opts.mahalanobis_ridge,
                )?,
                Baseline::SourceSim => {
                    source_similarity(inputs.test, inputs.reference.unwrap(), cfg.topk)?
                }
            };
            timings.initial_scores_ms += ms(t);

            let t = Instant::now();
            let primary_trace = propagate(&seed, &graph, cfg.alpha, cfg.iters)?;
            timings.propagation_ms = ms(t);
            PipelineResult {
                initial: primary_trace.iterates()[0].clone(),
                final_score: primary_trace.last().clone(),
                s_text,
                d_src: None,
                primary_trace,
                src_trace: None,
                prototypes,
                graph,
                timings,
            }
        }
        Mode::Full => {
            let t = Instant::now();
            let d_src = source_similarity(inputs.test, inputs.reference.unwrap(), cfg.topk)?;
            timings.initial_scores_ms += ms(t);

            let t = Instant::now();
            let primary_trace = propagate(&s_text, &graph, cfg.alpha, cfg.iters)?;
            let src_trace = propagate(&d_src, &graph, cfg.alpha, cfg.iters)?;
            let final_score = combine(&primary_trace, &src_trace)?;
            timings.propagation_ms = ms(t);

            let initial_values: Vec<f64> = s_text
                .values()
                .iter()
                .zip(d_src.values())
                .map(|(a, b)| a * b)
                .collect();
            PipelineResult {
                initial: ScoreVector::new(initial_values, 0)?,
                final_score,
                s_text,
                d_src: Some(d_src),
                primary_trace,
                src_trace: Some(src_trace),
                prototypes,
                graph,
                timings,
            }
        }
    };
    Ok(result)
}

/// Max absolute gap between each branch's final iterate and its exact
/// fixed point; diagnostic backing for the `--oracle` flag.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub primary_gap: f64,
    pub src_gap: Option<f64>,
}

pub fn oracle_report(r: &PipelineResult, alpha: f64) -> Result<OracleReport> {
    let fp = solve_fixed_point(&r.primary_trace.iterates()[0], &r.graph, alpha)?;
    let primary_gap = r.primary_trace.last().max_abs_diff(&fp)?;
    let src_gap = match &r.src_trace {
        Some(trace) => {
            let fp = solve_fixed_point(&trace.iterates()[0], &r.graph, alpha)?;
            Some(trace.last().max_abs_diff(&fp)?)
        }
        None => None,
    };
    Ok(OracleReport {
        primary_gap,
        src_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SynthScenario;

    fn scenario() -> crate::synth::SynthOutput {
        let mut s = SynthScenario::sampled(8, 2, 1, 10.0, 17).unwrap();
        s.n_reference = 15;
        s.n_id_test = 8;
        s.n_ood_test = 6;
        s.generate().unwrap()
    }

    #[test]
    fn zero_iterations_returns_raw_text_scores() {
        let data = scenario();
        let mut opts = PipelineOptions::default();
        opts.config.iters = 0;
        let inputs = PipelineInputs {
            test: &data.test,
            prompts: &data.prompts,
            reference: None,
            reference_classes: None,
        };
        let r = run(&inputs, &opts).unwrap();
        assert_eq!(r.final_score.values(), r.s_text.values());
        assert_eq!(r.initial.values(), r.s_text.values());
        assert!(r.d_src.is_none());
        assert_eq!(r.primary_trace.iteration_count(), 0);
    }

    #[test]
    fn alpha_one_final_is_bitwise_initial_in_both_modes() {
        let data = scenario();
        for mode in [Mode::ZeroShot, Mode::Full] {
            let mut opts = PipelineOptions::default();
            opts.config.alpha = 1.0;
            opts.config.iters = 6;
            opts.config.mode = mode;
            let inputs = PipelineInputs {
                test: &data.test,
                prompts: &data.prompts,
                reference: Some(&data.reference),
                reference_classes: None,
            };
            let r = run(&inputs, &opts).unwrap();
            for (a, b) in r.final_score.values().iter().zip(r.initial.values()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn full_mode_matches_manual_composition() {
        let data = scenario();
        let mut opts = PipelineOptions::default();
        opts.config.mode = Mode::Full;
        opts.config.topk = 5;
        let inputs = PipelineInputs {
            test: &data.test,
            prompts: &data.prompts,
            reference: Some(&data.reference),
            reference_classes: None,
        };
        let r = run(&inputs, &opts).unwrap();

        let protos = build_prototypes(&data.prompts).unwrap();
        let s_text = text_score(&data.test, &protos).unwrap();
        let d_src = source_similarity(&data.test, &data.reference, 5).unwrap();
        let sims = pairwise_similarity(&data.test).unwrap();
        let graph = build_graph(&sims, opts.config.eta).unwrap();
        let tt = propagate(&s_text, &graph, opts.config.alpha, opts.config.iters).unwrap();
        let st = propagate(&d_src, &graph, opts.config.alpha, opts.config.iters).unwrap();
        let want = combine(&tt, &st).unwrap();
        assert_eq!(r.final_score.values(), want.values());
        assert_eq!(r.d_src.unwrap().values(), d_src.values());
        assert_eq!(r.graph.epsilon(), graph.epsilon());
    }

    #[test]
    fn conflicting_inputs_are_rejected() {
        let data = scenario();
        let inputs_no_ref = PipelineInputs {
            test: &data.test,
            prompts: &data.prompts,
            reference: None,
            reference_classes: None,
        };

        let mut opts = PipelineOptions::default();
        opts.config.mode = Mode::Full;
        assert!(matches!(
            run(&inputs_no_ref, &opts),
            Err(Error::ConflictingFlags(_))
        ));

        let mut opts = PipelineOptions::default();
        opts.config.mode = Mode::Full;
        opts.baseline = Baseline::Mls;
        let inputs_ref = PipelineInputs {
            reference: Some(&data.reference),
            ..inputs_no_ref
        };
        assert!(matches!(
            run(&inputs_ref, &opts),
            Err(Error::ConflictingFlags(_))
        ));

        let mut opts = PipelineOptions::default();
        opts.baseline = Baseline::Mahalanobis;
        assert!(matches!(
            run(&inputs_no_ref, &opts),
            Err(Error::ConflictingFlags(_))
        ));
        // Reference present but class assignments missing.
        assert!(matches!(
            run(&inputs_ref, &opts),
            Err(Error::ConflictingFlags(_))
        ));

        let mut opts = PipelineOptions::default();
        opts.baseline = Baseline::SourceSim;
        assert!(matches!(
            run(&inputs_no_ref, &opts),
            Err(Error::ConflictingFlags(_))
        ));
    }

    #[test]
    fn baseline_seeds_replace_initial_scores() {
        let data = scenario();
        let (class_index, _) = crate::io::class_indices(&data.reference_classes);
        let mut opts = PipelineOptions::default();
        opts.config.iters = 3;
        opts.baseline = Baseline::SourceSim;
        let inputs = PipelineInputs {
            test: &data.test,
            prompts: &data.prompts,
            reference: Some(&data.reference),
            reference_classes: Some(&class_index),
        };
        let r = run(&inputs, &opts).unwrap();
        let want = source_similarity(&data.test, &data.reference, opts.config.topk).unwrap();
        assert_eq!(r.initial.values(), want.values());
        // Zero-shot runs never fill the d_src column, baseline or not.
        assert!(r.d_src.is_none());
        // s_text still reports the raw text score, not the baseline.
        let protos = build_prototypes(&data.prompts).unwrap();
        let text = text_score(&data.test, &protos).unwrap();
        assert_eq!(r.s_text.values(), text.values());
    }

    #[test]
    fn single_sample_falls_back_to_self_loop_graph() {
        let data = scenario();
        let one = EmbeddingMatrix::from_rows(&[data.test.row(0).to_vec()]).unwrap();
        let inputs = PipelineInputs {
            test: &one,
            prompts: &data.prompts,
            reference: None,
            reference_classes: None,
        };
        let r = run(&inputs, &PipelineOptions::default()).unwrap();
        assert_eq!(r.graph.n(), 1);
        assert!(r.graph.epsilon().is_infinite());
        assert_eq!(r.final_score.len(), 1);
        // Self-loop-only propagation keeps the score at its fixed point.
        assert!((r.final_score.values()[0] - r.initial.values()[0]).abs() < 1e-12);
    }

    #[test]
    fn oracle_gap_shrinks_with_iterations() {
        let data = scenario();
        let inputs = PipelineInputs {
            test: &data.test,
            prompts: &data.prompts,
            reference: None,
            reference_classes: None,
        };
        let mut opts = PipelineOptions::default();
        opts.config.iters = 2;
        let r2 = run(&inputs, &opts).unwrap();
        let g2 = oracle_report(&r2, opts.config.alpha).unwrap();
        opts.config.iters = 40;
        let r40 = run(&inputs, &opts).unwrap();
        let g40 = oracle_report(&r40, opts.config.alpha).unwrap();
        assert!(g40.primary_gap < g2.primary_gap);
        assert!(g40.primary_gap < 1e-3);
        assert!(g2.src_gap.is_none());
    }
}
