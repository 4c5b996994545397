//! Per-run bookkeeping: output directory policy, sidecars, summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{EffcodeError, Result};

use super::config::ExperimentConfig;
use super::report;
use super::RunArgs;

/// State threaded through one CLI invocation.
///
/// Owns the output directory and accumulates summary metrics; [`finish`]
/// writes `resolved_config.json` (the config after defaults and the `--seed`
/// override) and `summary.json`. Each CSV written through [`write_csv`] gets
/// a `<name>.meta.json` sidecar recording the config checksum and the
/// wall-clock seconds elapsed when the file was produced.
///
/// [`finish`]: RunContext::finish
/// [`write_csv`]: RunContext::write_csv
pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub config_crc: u32,
    pub out: PathBuf,
    started: Instant,
    summary: Map<String, Value>,
}

impl RunContext {
    pub fn prepare(args: &RunArgs) -> Result<Self> {
        let (mut cfg, config_crc) = ExperimentConfig::load(&args.config)?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        prepare_out_dir(&args.out, args.force)?;
        Ok(RunContext {
            cfg,
            config_crc,
            out: args.out.clone(),
            started: Instant::now(),
            summary: Map::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Records a metric for `summary.json`.
    pub fn put(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("summary values are plain data");
        self.summary.insert(key.to_string(), value);
    }

    /// Writes `<name>` as CSV plus its `<name>.meta.json` sidecar.
    pub fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let path = self.path(name);
        report::write_csv(&path, header, rows)?;
        let sidecar = json!({
            "config_crc32": self.config_crc,
            "rows": rows.len(),
            "runtime_seconds": self.started.elapsed().as_secs_f64(),
        });
        write_json(self.path(&format!("{name}.meta.json")), &sidecar)?;
        Ok(path)
    }

    /// Seals the run: resolved config, then the summary with total runtime.
    pub fn finish(mut self, command: &str) -> Result<()> {
        write_json(self.path("resolved_config.json"), &self.cfg)?;
        self.summary
            .insert("command".into(), Value::String(command.into()));
        self.summary.insert("seed".into(), json!(self.cfg.seed));
        self.summary
            .insert("config_crc32".into(), json!(self.config_crc));
        self.summary.insert(
            "runtime_seconds".into(),
            json!(self.started.elapsed().as_secs_f64()),
        );
        write_json(self.path("summary.json"), &Value::Object(self.summary))
    }
}

/// Creates `out` if needed. An existing non-empty directory is refused
/// unless `force` is set; with `force`, files are overwritten by name and
/// anything else in the directory is left alone.
fn prepare_out_dir(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        if !out.is_dir() {
            return Err(EffcodeError::invalid(
                "out",
                format!("{} exists and is not a directory", out.display()),
            ));
        }
        let mut entries = fs::read_dir(out).map_err(|e| EffcodeError::io(out, e))?;
        if entries.next().is_some() && !force {
            return Err(EffcodeError::WouldOverwrite {
                path: out.to_path_buf(),
            });
        }
        return Ok(());
    }
    fs::create_dir_all(out).map_err(|e| EffcodeError::io(out, e))
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| EffcodeError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_nonempty_dir_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        fs::create_dir(&out).unwrap();
        fs::write(out.join("old.csv"), "x\n").unwrap();
        let err = prepare_out_dir(&out, false).unwrap_err();
        assert!(matches!(err, EffcodeError::WouldOverwrite { .. }));
        prepare_out_dir(&out, true).unwrap();
    }

    #[test]
    fn creates_missing_dir() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a/b/run");
        prepare_out_dir(&out, false).unwrap();
        assert!(out.is_dir());
    }
}
