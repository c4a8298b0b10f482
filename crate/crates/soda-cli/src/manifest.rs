//! Run manifests: ordered key=value lines holding the resolved config,
//! input digests, realized graph threshold, and stage timings. Bare keys
//! reuse config names so `--config <manifest>` reproduces the run; dotted
//! keys are metadata and are skipped by the config parser.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use soda::{Error, Result};

pub struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            lines: vec![("command".to_string(), command.to_string())],
        }
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    /// Shortest round-trip float encoding, so reparsing is bit-exact.
    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.lines.push((key.to_string(), format!("{value:?}")));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.lines {
            text.push_str(k);
            text.push('=');
            text.push_str(v);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `<out>.manifest`, next to the file it describes.
pub fn sibling_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

pub fn ms(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
