//! `soda score`: load embeddings, run the pipeline, write the scores CSV
//! and its manifest, plus optional trace/graph/prediction dumps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;

use soda::config::{Mode, SodaConfig};
use soda::io;
use soda::pipeline::{self, Baseline, PipelineInputs, PipelineOptions, PipelineResult};
use soda::scoring::{classify, PromptEmbeddingGroups};
use soda::{Error, Result};

use crate::config_file::{required, resolve, ConfigFile};
use crate::manifest::{ms, sibling_path, Manifest};

const CONFIG_KEYS: &[&str] = &[
    "test",
    "prompts",
    "prompt_classes",
    "reference",
    "reference_classes",
    "out",
    "alpha",
    "eta",
    "iters",
    "topk",
    "mode",
    "baseline",
    "msp_temperature",
    "mahalanobis_ridge",
    "seed",
    "threads",
    "oracle",
    "trace",
    "dump_graph",
    "predictions",
];

#[derive(Args)]
pub struct ScoreArgs {
    /// key=value config file; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Test embeddings (EMB file)
    #[arg(long)]
    test: Option<PathBuf>,
    /// Prompt embeddings (EMB file)
    #[arg(long)]
    prompts: Option<PathBuf>,
    /// row,class_name CSV grouping prompt rows into classes
    #[arg(long)]
    prompt_classes: Option<PathBuf>,
    /// Reference embeddings (EMB file); required by mode full and the
    /// reference-based baselines
    #[arg(long)]
    reference: Option<PathBuf>,
    /// row,class_name CSV for reference rows (cosine_proto / mahalanobis)
    #[arg(long)]
    reference_classes: Option<PathBuf>,
    /// Output scores CSV; the manifest lands at <out>.manifest
    #[arg(long)]
    out: Option<PathBuf>,
    /// Anchor weight on the initial score, in (0,1] [default 0.2]
    #[arg(long)]
    alpha: Option<f64>,
    /// Graph density: edges keep the top eta fraction of similarities [default 0.02]
    #[arg(long)]
    eta: Option<f64>,
    /// Propagation iterations [default 5]
    #[arg(long)]
    iters: Option<usize>,
    /// Neighbors averaged for source similarity [default 10]
    #[arg(long)]
    topk: Option<usize>,
    /// zs (prompts only) or full (also re-weight by reference similarity)
    #[arg(long)]
    mode: Option<String>,
    /// Replace the initial score: none, msp, mls, cosine_proto,
    /// mahalanobis, source_sim
    #[arg(long)]
    baseline: Option<String>,
    /// Softmax temperature for the msp baseline [default 1]
    #[arg(long)]
    msp_temperature: Option<f64>,
    /// Covariance ridge for the mahalanobis baseline [default 1e-3]
    #[arg(long)]
    mahalanobis_ridge: Option<f64>,
    /// Recorded in the manifest; scoring itself is deterministic
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap; 0 or absent uses all cores
    #[arg(long)]
    threads: Option<usize>,
    /// Also solve for the exact propagation fixed point and report the gap
    #[arg(long)]
    oracle: bool,
    /// Dump every propagation iterate as CSV (component,iter,index,value)
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Dump the graph edge list as CSV (i,j) plus an epsilon sidecar
    #[arg(long)]
    dump_graph: Option<PathBuf>,
    /// Write predicted classes as a row,class_name CSV
    #[arg(long)]
    predictions: Option<PathBuf>,
}

struct Resolved {
    test: PathBuf,
    prompts: PathBuf,
    prompt_classes: PathBuf,
    reference: Option<PathBuf>,
    reference_classes: Option<PathBuf>,
    out: PathBuf,
    config: SodaConfig,
    baseline: Baseline,
    msp_temperature: f64,
    mahalanobis_ridge: f64,
    threads: usize,
    oracle: bool,
    trace: Option<PathBuf>,
    dump_graph: Option<PathBuf>,
    predictions: Option<PathBuf>,
}

fn resolve_args(args: ScoreArgs) -> Result<Resolved> {
    let cfg = ConfigFile::load(args.config.as_deref(), "score", CONFIG_KEYS)?;
    let defaults = SodaConfig::default();
    Ok(Resolved {
        test: required(resolve(args.test, &cfg, "test")?, "test")?,
        prompts: required(resolve(args.prompts, &cfg, "prompts")?, "prompts")?,
        prompt_classes: required(
            resolve(args.prompt_classes, &cfg, "prompt_classes")?,
            "prompt_classes",
        )?,
        reference: resolve(args.reference, &cfg, "reference")?,
        reference_classes: resolve(args.reference_classes, &cfg, "reference_classes")?,
        out: required(resolve(args.out, &cfg, "out")?, "out")?,
        config: SodaConfig {
            alpha: resolve(args.alpha, &cfg, "alpha")?.unwrap_or(defaults.alpha),
            eta: resolve(args.eta, &cfg, "eta")?.unwrap_or(defaults.eta),
            iters: resolve(args.iters, &cfg, "iters")?.unwrap_or(defaults.iters),
            topk: resolve(args.topk, &cfg, "topk")?.unwrap_or(defaults.topk),
            mode: match resolve(args.mode, &cfg, "mode")? {
                Some(s) => Mode::parse(&s)?,
                None => defaults.mode,
            },
            seed: resolve(args.seed, &cfg, "seed")?.unwrap_or(defaults.seed),
        },
        baseline: match resolve(args.baseline, &cfg, "baseline")? {
            Some(s) => Baseline::parse(&s)?,
            None => Baseline::None,
        },
        msp_temperature: resolve(args.msp_temperature, &cfg, "msp_temperature")?.unwrap_or(1.0),
        mahalanobis_ridge: resolve(args.mahalanobis_ridge, &cfg, "mahalanobis_ridge")?
            .unwrap_or(1e-3),
        threads: resolve(args.threads, &cfg, "threads")?.unwrap_or(0),
        oracle: args.oracle || cfg.get_parsed::<bool>("oracle")?.unwrap_or(false),
        trace: resolve(args.trace, &cfg, "trace")?,
        dump_graph: resolve(args.dump_graph, &cfg, "dump_graph")?,
        predictions: resolve(args.predictions, &cfg, "predictions")?,
    })
}

fn write_trace(path: &Path, result: &PipelineResult) -> Result<()> {
    let mut text = String::from("component,iter,index,value\n");
    let mut dump = |name: &str, trace: &soda::propagation::PropagationTrace| {
        for (t, iterate) in trace.iterates().iter().enumerate() {
            for (i, v) in iterate.values().iter().enumerate() {
                text.push_str(&format!("{name},{t},{i},{v:?}\n"));
            }
        }
    };
    dump("primary", &result.primary_trace);
    if let Some(src) = &result.src_trace {
        dump("source", src);
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_graph_dump(path: &Path, graph: &soda::graph::SimilarityGraph) -> Result<()> {
    let mut text = String::from("i,j\n");
    for (i, j) in graph.edges() {
        text.push_str(&format!("{i},{j}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let sidecar = sibling_epsilon_path(path);
    std::fs::write(&sidecar, format!("epsilon={:?}\n", graph.epsilon()))
        .map_err(|e| Error::io(&sidecar, e))
}

fn sibling_epsilon_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".epsilon");
    PathBuf::from(s)
}

pub fn run(args: ScoreArgs) -> Result<()> {
    let r = resolve_args(args)?;
    if r.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(r.threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("cannot size thread pool: {e}")))?;
    }

    let total = Instant::now();
    let load_start = Instant::now();
    let test = io::load_embeddings(&r.test)?;
    let prompt_rows = io::load_embeddings(&r.prompts)?;
    let prompt_class_names = io::load_class_assignments(&r.prompt_classes)?;
    let prompts = PromptEmbeddingGroups::from_row_classes(prompt_rows, &prompt_class_names)?;
    let reference = match &r.reference {
        Some(path) => Some(io::load_embeddings(path)?),
        None => None,
    };
    let reference_class_index = match &r.reference_classes {
        Some(path) => {
            let names = io::load_class_assignments(path)?;
            Some(io::class_indices(&names).0)
        }
        None => None,
    };
    let load_ms = ms(load_start);

    let opts = PipelineOptions {
        config: r.config,
        baseline: r.baseline,
        msp_temperature: r.msp_temperature,
        mahalanobis_ridge: r.mahalanobis_ridge,
    };
    let inputs = PipelineInputs {
        test: &test,
        prompts: &prompts,
        reference: reference.as_ref(),
        reference_classes: reference_class_index.as_deref(),
    };
    let result = pipeline::run(&inputs, &opts)?;

    let write_start = Instant::now();
    let table = io::ScoreTable {
        s_text: result.s_text.values().to_vec(),
        d_src: result.d_src.as_ref().map(|v| v.values().to_vec()),
        score_initial: result.initial.values().to_vec(),
        score_final: result.final_score.values().to_vec(),
    };
    io::save_scores(&r.out, &table)?;
    if let Some(path) = &r.trace {
        write_trace(path, &result)?;
    }
    if let Some(path) = &r.dump_graph {
        write_graph_dump(path, &result.graph)?;
    }
    if let Some(path) = &r.predictions {
        let predicted = classify(&test, &result.prototypes)?;
        let names: Vec<String> = predicted
            .iter()
            .map(|&c| result.prototypes.class_names()[c].clone())
            .collect();
        io::save_class_assignments(path, &names)?;
    }
    let oracle = if r.oracle {
        Some(pipeline::oracle_report(&result, opts.config.alpha)?)
    } else {
        None
    };
    let write_ms = ms(write_start);

    let mut man = Manifest::new("score");
    man.set("test", r.test.display());
    man.set("prompts", r.prompts.display());
    man.set("prompt_classes", r.prompt_classes.display());
    if let Some(p) = &r.reference {
        man.set("reference", p.display());
    }
    if let Some(p) = &r.reference_classes {
        man.set("reference_classes", p.display());
    }
    man.set("out", r.out.display());
    man.set_f64("alpha", opts.config.alpha);
    man.set_f64("eta", opts.config.eta);
    man.set("iters", opts.config.iters);
    man.set("topk", opts.config.topk);
    man.set("mode", opts.config.mode.as_str());
    man.set("baseline", opts.baseline.as_str());
    man.set_f64("msp_temperature", opts.msp_temperature);
    man.set_f64("mahalanobis_ridge", opts.mahalanobis_ridge);
    man.set("seed", opts.config.seed);
    man.set("threads", r.threads);
    if r.oracle {
        man.set("oracle", "true");
    }
    if let Some(p) = &r.trace {
        man.set("trace", p.display());
    }
    if let Some(p) = &r.dump_graph {
        man.set("dump_graph", p.display());
    }
    if let Some(p) = &r.predictions {
        man.set("predictions", p.display());
    }

    man.set("input.test.sha256", io::sha256_hex(&r.test)?);
    man.set("input.prompts.sha256", io::sha256_hex(&r.prompts)?);
    man.set(
        "input.prompt_classes.sha256",
        io::sha256_hex(&r.prompt_classes)?,
    );
    if let Some(p) = &r.reference {
        man.set("input.reference.sha256", io::sha256_hex(p)?);
    }
    if let Some(p) = &r.reference_classes {
        man.set("input.reference_classes.sha256", io::sha256_hex(p)?);
    }
    man.set("graph.nodes", result.graph.n());
    man.set("graph.edges", result.graph.edge_count());
    man.set("graph.epsilon", format!("{:?}", result.graph.epsilon()));
    if let Some(o) = &oracle {
        man.set("oracle.primary_gap", format!("{:e}", o.primary_gap));
        if let Some(gap) = o.src_gap {
            man.set("oracle.src_gap", format!("{gap:e}"));
        }
    }
    man.set_f64("timing.load_ms", load_ms);
    man.set_f64("timing.prototypes_ms", result.timings.prototypes_ms);
    man.set_f64("timing.initial_scores_ms", result.timings.initial_scores_ms);
    man.set_f64("timing.similarity_ms", result.timings.similarity_ms);
    man.set_f64("timing.graph_ms", result.timings.graph_ms);
    man.set_f64("timing.propagation_ms", result.timings.propagation_ms);
    man.set_f64("timing.write_ms", write_ms);
    man.set_f64("timing.total_ms", ms(total));
    man.set("output.scores.sha256", io::sha256_hex(&r.out)?);
    man.write(&sibling_path(&r.out))?;

    println!(
        "scored {} rows: mode={} baseline={} iters={} epsilon={:?} edges={} -> {}",
        test.n(),
        opts.config.mode.as_str(),
        opts.baseline.as_str(),
        opts.config.iters,
        result.graph.epsilon(),
        result.graph.edge_count(),
        r.out.display()
    );
    if let Some(o) = &oracle {
        match o.src_gap {
            Some(src) => println!(
                "oracle: primary_gap={:e} src_gap={src:e}",
                o.primary_gap
            ),
            None => println!("oracle: primary_gap={:e}", o.primary_gap),
        }
    }
    Ok(())
}
