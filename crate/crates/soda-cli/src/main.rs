//! `soda` command-line tool: `score` runs the pipeline on embedding files,
//! `eval` computes AUC/FPR95 from a scores file, `synth` generates
//! clustered unit-sphere scenarios for desk-scale experiments.
//!
//! Exit codes: 0 success, 2 input or flag validation failure, 3 numeric
//! failure. Errors print one machine-parseable line: `ERROR <code>: <detail>`.

mod config_file;
mod eval_cmd;
mod manifest;
mod score_cmd;
mod synth_cmd;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "soda", version, about = "Out-of-distribution scoring for embedding vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score test embeddings against class prompts, with optional
    /// reference-based re-weighting and graph propagation.
    Score(score_cmd::ScoreArgs),
    /// Evaluate a scores file against labels: AUC, FPR95, and optional
    /// source-similarity-binned accuracy.
    Eval(eval_cmd::EvalArgs),
    /// Generate a synthetic clustered scenario (reference, prompts, test,
    /// labels) into a directory.
    Synth(synth_cmd::SynthArgs),
}

fn exit_code(err: &soda::Error) -> i32 {
    use soda::Error::*;
    match err {
        NonFiniteEntry { .. } | NonFiniteScore { .. } | ZeroNormRow { .. }
        | SingularCovariance | EmptyNeighborhood { .. } => 3,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => score_cmd::run(args),
        Command::Eval(args) => eval_cmd::run(args),
        Command::Synth(args) => synth_cmd::run(args),
    };
    if let Err(err) = result {
        let code = exit_code(&err);
        eprintln!("ERROR {code}: {err}");
        std::process::exit(code);
    }
}
