//! Per-run records and the study report written as JSON and CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Result;

/// One cell of a study. Missing measurements (failed stages) are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub method: String,
    /// Requested interior count.
    pub interior: usize,
    /// Unknowns, including boundary rows.
    pub n: Option<usize>,
    /// Nominal spacing `(measure / interior)^(1/d)`.
    pub h: f64,
    pub nnz: Option<usize>,
    pub nnz_per_interior_row: Option<f64>,
    pub mean_pivots: Option<f64>,
    pub lsq_flops: Option<u64>,
    pub enlarged_points: Option<usize>,
    pub solver: String,
    pub iterations: Option<usize>,
    pub relres: Option<f64>,
    pub converged: bool,
    /// `max |u_h - u*|` over interior points.
    pub max_error: Option<f64>,
    /// `max |(A u*)_i - f_i|` over interior rows.
    pub truncation_error: Option<f64>,
    pub assembly_time: Option<f64>,
    pub setup_time: Option<f64>,
    pub solve_time: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityRatio {
    pub numerator: String,
    pub denominator: String,
    /// Total nonzeros, boundary rows included.
    pub nnz_ratio: f64,
    /// Mean nonzeros per interior row.
    pub interior_row_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub study: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    pub records: Vec<RunRecord>,
    /// Fitted max-norm error order per method (at least three resolutions).
    pub orders: BTreeMap<String, f64>,
    pub sparsity_ratios: Vec<SparsityRatio>,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Least-squares slope of `log(error)` against `log(h)`. Needs at least three
/// points with positive finite `h` and error.
pub fn fit_order(h: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(h, e)| h.is_finite() && e.is_finite() && **h > 0.0 && **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl BenchReport {
    pub fn new(study: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            study: study.into(),
            seed,
            config_hash: config_hash(&config),
            config,
            records: vec![],
            orders: BTreeMap::new(),
            sparsity_ratios: vec![],
        }
    }

    /// Fits an order for every method with at least three error values.
    pub fn fit_orders(&mut self) {
        let mut by_method: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in &self.records {
            if let Some(e) = r.max_error {
                let entry = by_method.entry(&r.method).or_default();
                entry.0.push(r.h);
                entry.1.push(e);
            }
        }
        self.orders = by_method
            .into_iter()
            .filter_map(|(m, (h, e))| fit_order(&h, &e).map(|o| (m.to_string(), o)))
            .collect();
    }

    pub fn records_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.records.iter().filter(move |r| r.method == method)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| r.failure.is_some())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.study, self.seed)
    }

    /// Writes `<study>_<seed>.json` and `<study>_<seed>.csv` into `dir`.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.file_stem()));
        let csv = dir.join(format!("{}.csv", self.file_stem()));
        std::fs::write(&json, self.to_json())?;
        self.write_csv(std::fs::File::create(&csv)?)?;
        Ok((json, csv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_exact_power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert!((fit_order(&h, &e).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn order_needs_three_points() {
        assert_eq!(fit_order(&[0.1, 0.05], &[1e-2, 2.5e-3]), None);
        assert_eq!(fit_order(&[0.1, 0.05, 0.02], &[1e-2, 0.0, 1e-3]), None);
    }

    #[test]
    fn hash_depends_on_config_only() {
        let a = BenchReport::new("x", 1, serde_json::json!({"k": 1}));
        let b = BenchReport::new("y", 2, serde_json::json!({"k": 1}));
        let c = BenchReport::new("x", 1, serde_json::json!({"k": 2}));
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, c.config_hash);
        assert_eq!(a.config_hash.len(), 64);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rep = BenchReport::new("demo", 7, serde_json::json!({}));
        rep.records.push(RunRecord {
            method: "L1".into(),
            max_error: Some(1e-3),
            failure: Some("x, y".into()),
            ..RunRecord::default()
        });
        let (json, csv) = rep.write_files(dir.path()).unwrap();
        assert!(json.ends_with("demo_7.json") && csv.ends_with("demo_7.csv"));
        let back: BenchReport = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(back, rep);
        let mut rd = csv::Reader::from_path(csv).unwrap();
        let rows: Vec<RunRecord> = rd.deserialize().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(rows, rep.records);
    }
}
