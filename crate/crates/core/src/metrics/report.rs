use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores of one method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub instance: String,
    pub acd_sum: f64,
    pub acd_mean: f64,
    pub recall: f64,
    pub cd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub instances: usize,
    #[serde(rename = "ACD_mean")]
    pub acd_mean: f64,
    #[serde(rename = "ACD_median")]
    pub acd_median: f64,
    #[serde(rename = "Recall")]
    pub recall: f64,
}

/// Rows in insertion order; summaries follow first appearance of each method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

const HEADER: [&str; 6] = ["method", "instance", "acd_sum", "acd_mean", "recall", "cd"];

impl EvalReport {
    pub fn push(&mut self, row: EvalRow) {
        self.rows.push(row);
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a EvalRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Mean over instances of the per-point ACD (the comparison metric).
    pub fn mean_acd(&self, method: &str) -> Option<f64> {
        self.summary_for(method).map(|s| s.acd_mean)
    }

    pub fn summary_for(&self, method: &str) -> Option<MethodSummary> {
        let mut acds: Vec<f64> = self.rows_for(method).map(|r| r.acd_mean).collect();
        if acds.is_empty() {
            return None;
        }
        let n = acds.len();
        let recall = self.rows_for(method).map(|r| r.recall).sum::<f64>() / n as f64;
        let mean = acds.iter().sum::<f64>() / n as f64;
        acds.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            acds[n / 2]
        } else {
            0.5 * (acds[n / 2 - 1] + acds[n / 2])
        };
        Some(MethodSummary {
            method: method.to_string(),
            instances: n,
            acd_mean: mean,
            acd_median: median,
            recall,
        })
    }

    pub fn summary(&self) -> Vec<MethodSummary> {
        self.methods().iter().filter_map(|m| self.summary_for(m)).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record(HEADER)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .clone();
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(Error::parse(path, 1, "unexpected CSV header"));
        }
        let mut rows = Vec::new();
        for rec in r.deserialize::<EvalRow>() {
            let row = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::parse(path, line, e.to_string())
            })?;
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` (the summary).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv()?)?;
        fs::write(dir.join(format!("{stem}.json")), self.summary_json()?)?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?, path)
    }
}
