//! Solve reports and run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tfm_core::inversion::SolveReport;

use crate::io::fmt_f64;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default)]
pub struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }
}

/// Flat key-value view of a solve report.
pub fn report_values(report: &SolveReport, delta: f64, tau: f64) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.push("stop_reason", report.stop_reason.name())
        .push("outer_iterations", report.outer_iterations)
        .push(
            "inner_iterations",
            report.inner_iterations_per_outer.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        )
        .push("delta", fmt_f64(delta))
        .push("tau", fmt_f64(tau))
        .push("final_residual", fmt_f64(report.final_residual()))
        .push("breakdown", report.breakdown);
    if let Some(e) = report.final_relative_error {
        kv.push("relative_error_percent", fmt_f64(e));
        if let Some(b) = report.best_iteration() {
            kv.push("best_iteration", b).push("best_error_percent", fmt_f64(report.error_history[b]));
        }
    }
    if let Some(f) = &report.failure {
        kv.push("failure", f);
    }
    if let Some(t) = report.wall_time_seconds {
        kv.push("wall_time_seconds", format!("{t:.3}"));
    }
    kv
}

/// `iteration,residual,error` rows; the error column is empty without a
/// ground truth.
pub fn write_history_csv(path: &Path, report: &SolveReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(["iteration", "residual", "error"]).map_err(|e| CliError::io(path, e))?;
    for (k, r) in report.residual_history.iter().enumerate() {
        let err = report.error_history.get(k).map_or(String::new(), |e| fmt_f64(*e));
        w.write_record([k.to_string(), fmt_f64(*r), err]).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Provenance written next to every set of outputs. Wall times are left out
/// so that repeated runs give identical manifests.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub values: KeyValues,
    files: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str, config_text: &str) -> Self {
        let mut values = KeyValues::default();
        values
            .push("tool", concat!("tfm ", env!("CARGO_PKG_VERSION")))
            .push("command", command)
            .push("config_sha256", sha256_hex(config_text.as_bytes()));
        Self { values, files: Vec::new() }
    }

    pub fn add_file(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut kv = self.values.clone();
        for f in &self.files {
            let bytes = std::fs::read(f).map_err(|e| CliError::io(f, e))?;
            let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            kv.push(&format!("file.{name}"), sha256_hex(&bytes));
        }
        kv.write(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tfm_core::inversion::StopReason;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn report_lines() {
        let report = SolveReport {
            outer_iterations: 2,
            inner_iterations_per_outer: vec![1, 1],
            residual_history: vec![3.0, 2.0, 1.0],
            error_history: vec![100.0, 40.0, 50.0],
            stop_reason: StopReason::Discrepancy,
            breakdown: false,
            failure: None,
            wall_time_seconds: None,
            final_relative_error: Some(50.0),
        };
        let kv = report_values(&report, 0.5, 2.0);
        assert_eq!(kv.get("stop_reason"), Some("DISCREPANCY"));
        assert_eq!(kv.get("inner_iterations"), Some("1,1"));
        assert_eq!(kv.get("best_iteration"), Some("1"));
        assert!(kv.render().contains("final_residual = 1\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_history_csv(&p, &report).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "iteration,residual,error\n0,3,100\n1,2,40\n2,1,50\n");
    }
}
