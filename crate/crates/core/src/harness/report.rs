use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Method};
use super::plot::Series;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Reconstruction,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub frames_per_sequence: usize,
    pub frame_dim: usize,
    pub frame_shape: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub m: usize,
    /// Test-set codec round-trip MSE.
    pub recon_mse: f64,
    /// Test-set pixel-space free-run MSE (prediction runs only).
    pub pred_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ae_loss: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lstm_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub config_hash: String,
    pub wall_time_secs: f64,
    pub dataset: DatasetSummary,
    /// One row per configured (method, m), methods outermost.
    pub rows: Vec<ReportRow>,
    pub config: ExperimentConfig,
}

/// SHA-256 of the compact JSON form of `config`.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    format!("{:x}", Sha256::digest(bytes))
}

impl Report {
    pub fn row(&self, method: Method, m: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.m == m)
    }

    /// `method,m,recon_mse,pred_mse`; missing prediction values are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,m,recon_mse,pred_mse\n");
        for r in &self.rows {
            let pred = r.pred_mse.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", r.method, r.m, r.recon_mse, pred));
        }
        out
    }

    /// Per-method `(m, value)` curves over the configured dims.
    pub fn curves(&self, value: impl Fn(&ReportRow) -> Option<f64>) -> Vec<Series> {
        self.config
            .methods
            .iter()
            .filter_map(|&method| {
                let points: Vec<(f64, f64)> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == method)
                    .filter_map(|r| value(r).map(|v| (r.m as f64, v)))
                    .collect();
                (!points.is_empty()).then(|| Series {
                    label: method.to_string(),
                    points,
                })
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `report.json` and `results.csv` into `dir` (created if missing)
/// and returns their paths.
pub fn emit_report(report: &Report, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let csv = dir.join("results.csv");
    fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(vec![json, csv])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> Report {
        let config = ExperimentConfig::from_json(
            r#"{"dataset": {"kind": "moving_sprite", "canvas": 8, "sprite": 3, "frames": 6, "count": 10},
                "methods": ["gft-grid", "raw"], "latent_dims": [4, 8]}"#,
        )
        .unwrap();
        let rows = [Method::GftGrid, Method::Raw]
            .into_iter()
            .flat_map(|method| {
                [4usize, 8].into_iter().map(move |m| ReportRow {
                    method,
                    m,
                    recon_mse: 0.1 / m as f64,
                    pred_mse: Some(1.0 / 3.0),
                    ae_loss: vec![],
                    lstm_loss: vec![0.5, 0.25],
                })
            })
            .collect();
        Report {
            kind: ExperimentKind::Prediction,
            seed: 3,
            config_hash: config_hash(&config),
            wall_time_secs: 0.5,
            dataset: DatasetSummary {
                train_sequences: 7,
                test_sequences: 3,
                frames_per_sequence: 6,
                frame_dim: 64,
                frame_shape: Some((8, 8)),
            },
            rows,
            config,
        }
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let r = sample_report();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,m,recon_mse,pred_mse");
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert_eq!(lines[1], "gft-grid,4,0.025,0.3333333333333333");
    }

    #[test]
    fn csv_parses_back() {
        let r = sample_report();
        let text = r.to_csv();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for (rec, row) in reader.records().zip(&r.rows) {
            let rec = rec.unwrap();
            assert_eq!(&rec[0], row.method.name());
            assert_eq!(rec[2].parse::<f64>().unwrap(), row.recon_mse);
        }
    }

    #[test]
    fn json_round_trip() {
        let r = sample_report();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&r, dir.path().join("nested")).unwrap();
        let back = Report::from_json(&fs::read_to_string(&paths[0]).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(fs::read_to_string(&paths[1]).unwrap(), r.to_csv());
    }

    #[test]
    fn hash_tracks_config() {
        let r = sample_report();
        let mut other = r.config.clone();
        assert_eq!(config_hash(&other), r.config_hash);
        other.seed += 1;
        assert_ne!(config_hash(&other), r.config_hash);
        assert_eq!(r.config_hash.len(), 64);
    }

    #[test]
    fn curves_follow_method_order() {
        let r = sample_report();
        let c = r.curves(|row| Some(row.recon_mse));
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].label, "gft-grid");
        assert_eq!(c[0].points, vec![(4.0, 0.025), (8.0, 0.0125)]);
        assert!(r.curves(|_| None).is_empty());
    }
}
