//! `soda synth`: write a generated scenario (reference + classes, prompts
//! + classes, test, labels) and its manifest into a directory. Defaults
//! reproduce the fixed desk-scale scenario.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use soda::io;
use soda::synth::SynthScenario;
use soda::{Error, Result};

use crate::config_file::{required, resolve, ConfigFile};
use crate::manifest::{ms, Manifest};

const CONFIG_KEYS: &[&str] = &[
    "out_dir",
    "dim",
    "id_classes",
    "ood_classes",
    "concentration",
    "ood_concentration",
    "n_reference",
    "n_id_test",
    "n_ood_test",
    "prompts_per_class",
    "shift",
    "prototype_noise",
    "ood_offset",
    "seed",
];

#[derive(Args)]
pub struct SynthArgs {
    /// key=value config file; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the six output files plus manifest.txt
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Embedding dimension [default 64]
    #[arg(long)]
    dim: Option<usize>,
    /// Number of ID classes [default 5]
    #[arg(long)]
    id_classes: Option<usize>,
    /// Number of OOD classes [default 3]
    #[arg(long)]
    ood_classes: Option<usize>,
    /// Cluster tightness of ID classes [default 6]
    #[arg(long)]
    concentration: Option<f64>,
    /// Cluster tightness of OOD classes [default 3]
    #[arg(long)]
    ood_concentration: Option<f64>,
    /// Reference rows per ID class [default 100]
    #[arg(long)]
    n_reference: Option<usize>,
    /// Test rows per ID class [default 60]
    #[arg(long)]
    n_id_test: Option<usize>,
    /// Test rows per OOD class [default 60]
    #[arg(long)]
    n_ood_test: Option<usize>,
    /// Prompt rows per ID class [default 3]
    #[arg(long)]
    prompts_per_class: Option<usize>,
    /// Angle (radians) rotating each ID test row off its cluster [default 0.3]
    #[arg(long)]
    shift: Option<f64>,
    /// Angle (radians) rotating prompts off the class means [default 0.9]
    #[arg(long)]
    prototype_noise: Option<f64>,
    /// Angle from an ID mean to its paired OOD mean [default 0.35];
    /// negative draws OOD directions uniformly at random instead
    #[arg(long)]
    ood_offset: Option<f64>,
    /// Generator seed [default 42]
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref(), "synth", CONFIG_KEYS)?;
    let out_dir = required(resolve(args.out_dir, &cfg, "out_dir")?, "out_dir")?;
    let dim = resolve(args.dim, &cfg, "dim")?.unwrap_or(64);
    let id_classes = resolve(args.id_classes, &cfg, "id_classes")?.unwrap_or(5);
    let ood_classes = resolve(args.ood_classes, &cfg, "ood_classes")?.unwrap_or(3);
    let concentration = resolve(args.concentration, &cfg, "concentration")?.unwrap_or(6.0);
    let ood_concentration =
        resolve(args.ood_concentration, &cfg, "ood_concentration")?.unwrap_or(3.0);
    let n_reference = resolve(args.n_reference, &cfg, "n_reference")?.unwrap_or(100);
    let n_id_test = resolve(args.n_id_test, &cfg, "n_id_test")?.unwrap_or(60);
    let n_ood_test = resolve(args.n_ood_test, &cfg, "n_ood_test")?.unwrap_or(60);
    let prompts_per_class =
        resolve(args.prompts_per_class, &cfg, "prompts_per_class")?.unwrap_or(3);
    let shift = resolve(args.shift, &cfg, "shift")?.unwrap_or(0.3);
    let prototype_noise = resolve(args.prototype_noise, &cfg, "prototype_noise")?.unwrap_or(0.9);
    let ood_offset_raw = resolve(args.ood_offset, &cfg, "ood_offset")?.unwrap_or(0.35);
    let seed = resolve(args.seed, &cfg, "seed")?.unwrap_or(42);

    let mut scenario = SynthScenario::sampled(dim, id_classes, ood_classes, concentration, seed)?;
    scenario.ood_concentration = ood_concentration;
    scenario.n_reference = n_reference;
    scenario.n_id_test = n_id_test;
    scenario.n_ood_test = n_ood_test;
    scenario.prompts_per_class = prompts_per_class;
    scenario.shift = shift;
    scenario.prototype_noise = prototype_noise;
    scenario.ood_offset = if ood_offset_raw < 0.0 {
        None
    } else {
        Some(ood_offset_raw)
    };
    scenario.validate()?;

    let generate_start = Instant::now();
    let data = scenario.generate()?;
    let generate_ms = ms(generate_start);

    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let path = |name: &str| out_dir.join(name);
    io::save_embeddings(path("reference.emb"), &data.reference)?;
    io::save_class_assignments(path("reference_classes.csv"), &data.reference_classes)?;
    io::save_embeddings(path("prompts.emb"), data.prompts.embeddings())?;
    let prompt_classes: Vec<String> = data
        .prompts
        .class_index()
        .iter()
        .map(|&c| data.prompts.class_names()[c].clone())
        .collect();
    io::save_class_assignments(path("prompt_classes.csv"), &prompt_classes)?;
    io::save_embeddings(path("test.emb"), &data.test)?;
    io::save_labels(path("labels.csv"), &data.labels)?;

    let mut man = Manifest::new("synth");
    man.set("out_dir", out_dir.display());
    man.set("dim", dim);
    man.set("id_classes", id_classes);
    man.set("ood_classes", ood_classes);
    man.set_f64("concentration", concentration);
    man.set_f64("ood_concentration", ood_concentration);
    man.set("n_reference", n_reference);
    man.set("n_id_test", n_id_test);
    man.set("n_ood_test", n_ood_test);
    man.set("prompts_per_class", prompts_per_class);
    man.set_f64("shift", shift);
    man.set_f64("prototype_noise", prototype_noise);
    man.set_f64("ood_offset", ood_offset_raw);
    man.set("seed", seed);
    man.set("data.reference_rows", data.reference.n());
    man.set("data.prompt_rows", data.prompts.embeddings().n());
    man.set("data.test_rows", data.test.n());
    for name in [
        "reference.emb",
        "reference_classes.csv",
        "prompts.emb",
        "prompt_classes.csv",
        "test.emb",
        "labels.csv",
    ] {
        man.set(
            &format!("output.{name}.sha256"),
            io::sha256_hex(path(name))?,
        );
    }
    man.set_f64("timing.generate_ms", generate_ms);
    man.write(&path("manifest.txt"))?;

    println!(
        "synthesized {} test rows ({} reference, {} prompts) -> {}",
        data.test.n(),
        data.reference.n(),
        data.prompts.embeddings().n(),
        out_dir.display()
    );
    Ok(())
}
