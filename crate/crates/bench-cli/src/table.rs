//! Result rows and their on-disk forms: a flat CSV table (gnuplot-friendly,
//! one row per grid point and provenance) plus a JSON manifest carrying the
//! seed, configuration hash, tool version, wall time, and per-experiment
//! summary values.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

/// One output record.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub detector: String,
    /// Name of the swept quantity (tau_sq, snr_db, n, ...).
    pub grid: String,
    pub grid_value: f64,
    /// Detection threshold (statistic scale) the row refers to.
    pub tau_sq: f64,
    pub p_f: f64,
    pub p_m: f64,
    pub p_e: f64,
    pub provenance: String,
    /// Standard error of p_e for sampled rows, empty otherwise.
    pub stderr: Option<f64>,
    /// Wrong decisions behind a simulated p_e, empty otherwise.
    pub error_events: Option<u64>,
    /// Simulated point with fewer than 100 error events.
    pub low_confidence: bool,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub trials: usize,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub wall_ms: f64,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub manifest: Manifest,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("csv to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes")
    }

    /// Write `results.csv` and `manifest.json` under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv_file = std::fs::File::create(dir.join("results.csv"))?;
        self.write_csv(&mut csv_file)
            .map_err(std::io::Error::other)?;
        csv_file.flush()?;
        std::fs::write(dir.join("manifest.json"), self.manifest_json())?;
        Ok(())
    }
}

/// Decision records of individual sessions (oracle runs), exported for
/// cross-checking: one row per (session, node).
#[derive(Debug, Clone, Serialize)]
pub struct DecisionRow {
    pub session: u64,
    pub node: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub decision: bool,
    pub truth: bool,
}

pub fn write_decisions_csv<W: Write>(rows: &[DecisionRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
