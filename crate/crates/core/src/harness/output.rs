//! CSV emission. Files are written to a temporary sibling and renamed into
//! place, so a failed run never leaves a partial file behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::Result;

use super::config::ExperimentConfig;
use super::runner::ExperimentOutput;

pub const AGGREGATE_HEADER: [&str; 7] = [
    "method",
    "snr_db",
    "trials",
    "e_theta",
    "nmse_alpha_db",
    "e_phi",
    "nmse_h_db",
];

pub const TRIAL_HEADER: [&str; 10] = [
    "method",
    "snr_db",
    "trial",
    "e_theta",
    "e_phi",
    "nmse_alpha_num",
    "nmse_alpha_den",
    "nmse_h_num",
    "nmse_h_den",
    "snapped_aoa",
];

/// Shortest representation that round-trips; never locale dependent.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn metadata(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Vec<String> {
    let mut lines = vec![format!("# sdmimo {}", env!("CARGO_PKG_VERSION"))];
    if !cfg.description.is_empty() {
        for line in cfg.description.lines() {
            lines.push(format!("# {line}"));
        }
    }
    let methods: Vec<String> = cfg.methods.iter().map(|m| m.label()).collect();
    lines.push(format!(
        "# mode={} seed={} trials={} n_bs={} d_bs={} n_ue={} methods={}",
        cfg.mode.name(),
        cfg.seed,
        cfg.trials,
        cfg.geometry.n_bs,
        num(cfg.geometry.d_bs),
        cfg.geometry.n_ue,
        methods.join("|"),
    ));
    if out.snapped_aoa_trials > 0 {
        lines.push(format!(
            "# e_theta: true AoAs snapped to the nearest grid point in {} of {} trials",
            out.snapped_aoa_trials,
            cfg.trials * cfg.snr_db.len()
        ));
    }
    lines.push("# nmse: ratio of summed squared errors to summed squared norms".to_string());
    lines
}

/// Aggregate table, preceded by `#` metadata lines.
pub fn aggregate_csv(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for line in metadata(cfg, out) {
        writeln!(buf, "{line}")?;
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(AGGREGATE_HEADER)?;
    for r in &out.rows {
        w.write_record([
            r.method.clone(),
            num(r.snr_db),
            r.sums.trials.to_string(),
            num(r.e_theta()),
            num(r.nmse_alpha_db()),
            r.e_phi().map(num).unwrap_or_default(),
            num(r.nmse_h_db()),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn trial_csv(out: &ExperimentOutput) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIAL_HEADER)?;
    for t in &out.trials {
        let m = &t.metrics;
        w.write_record([
            t.method.clone(),
            num(t.snr_db),
            t.trial.to_string(),
            u8::from(m.e_theta).to_string(),
            m.e_phi.map(|e| u8::from(e).to_string()).unwrap_or_default(),
            num(m.alpha_num),
            num(m.alpha_den),
            num(m.h_num),
            num(m.h_den),
            u8::from(t.snapped_aoa).to_string(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Plain table with a header row, optionally preceded by `#` comment lines.
pub fn table_csv<R, I>(comments: &[String], header: &[&str], rows: R) -> Result<Vec<u8>>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = String>,
{
    let mut buf = Vec::new();
    for c in comments {
        writeln!(buf, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Path of the per-trial companion file: `results.csv` → `results.trials.csv`.
pub fn trial_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.trials.csv"))
}
