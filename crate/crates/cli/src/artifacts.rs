//! Output directory handling. Everything except `metadata.json` is a pure
//! function of the configuration.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path, e))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    /// Writes a CSV file from a header and rows of already formatted fields.
    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
        w.write_record(header).map_err(|e| CliError::io(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }
}

/// Wall-clock facts, kept apart from the reproducible results.
pub struct Clock {
    started: SystemTime,
    timer: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Self {
            started: SystemTime::now(),
            timer: Instant::now(),
        }
    }

    pub fn write(&self, out: &OutDir, command: &str, jobs: usize) -> CliResult<()> {
        #[derive(Serialize)]
        struct Metadata<'a> {
            toolkit: &'a str,
            version: &'a str,
            command: &'a str,
            started_unix_s: f64,
            wall_clock_s: f64,
            jobs: usize,
        }
        out.write_json(
            "metadata.json",
            &Metadata {
                toolkit: "qsim",
                version: VERSION,
                command,
                started_unix_s: self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
                wall_clock_s: self.timer.elapsed().as_secs_f64(),
                jobs,
            },
        )
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}
