//! Run configuration shared by the pipeline and the CLI.

use crate::error::{Error, Result};

/// Which scoring pipeline to run.
///
/// `ZeroShot` uses only the text-prototype scores; `Full` additionally
/// computes source similarity against reference embeddings and multiplies
/// the two propagated components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    ZeroShot,
    Full,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::ZeroShot => "zs",
            Mode::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "zs" | "zero_shot" => Ok(Mode::ZeroShot),
            "full" => Ok(Mode::Full),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?}: expected \"zs\" or \"full\""
            ))),
        }
    }
}

/// Hyper-parameters of the scoring pipeline.
///
/// Defaults: `alpha = 0.2`, `eta = 0.02`, `iters = 5`, `topk = 10`.
#[derive(Debug, Clone, PartialEq)]
pub struct SodaConfig {
    /// Anchor weight of the initial score in each propagation update, in (0, 1].
    pub alpha: f64,
    /// Graph density parameter in (0, 1); smaller values give sparser graphs.
    pub eta: f64,
    /// Number of propagation iterations T.
    pub iters: usize,
    /// Number of closest reference samples averaged into the source similarity.
    pub topk: usize,
    pub mode: Mode,
    /// Seed for any stochastic component (synthetic data generation).
    pub seed: u64,
}

impl Default for SodaConfig {
    fn default() -> Self {
        SodaConfig {
            alpha: 0.2,
            eta: 0.02,
            iters: 5,
            topk: 10,
            mode: Mode::ZeroShot,
            seed: 0,
        }
    }
}

impl SodaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if self.topk == 0 {
            return Err(Error::InvalidConfig("topk must be positive".into()));
        }
        Ok(())
    }
}
