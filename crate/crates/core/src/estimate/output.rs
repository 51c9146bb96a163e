use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::Estimate;
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// One row of the estimate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub detector: String,
    pub params_json: String,
    pub level: f64,
    #[serde(rename = "R")]
    pub scale: f64,
    /// Truncation radius; empty when untruncated.
    pub r: Option<f64>,
    pub h: f64,
    pub n: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
    pub wall_ms: u64,
}

impl CsvRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        detector: &str,
        params_json: String,
        level: f64,
        scale: f64,
        r: Option<f64>,
        h: f64,
        est: &Estimate,
        wall_ms: u64,
    ) -> Self {
        Self {
            detector: detector.to_string(),
            params_json,
            level,
            scale,
            r,
            h,
            n: est.n,
            p_hat: est.p_hat,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            seed: est.seed,
            wall_ms,
        }
    }
}

pub fn csv_bytes(rows: &[CsvRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "detector",
            "params_json",
            "level",
            "R",
            "r",
            "h",
            "n",
            "p_hat",
            "ci_lo",
            "ci_hi",
            "seed",
            "wall_ms",
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// Writes the table atomically.
pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    write_atomic(path, &csv_bytes(rows)?)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let est = Estimate {
            p_hat: 0.5,
            n: 10,
            ci_lo: 0.2,
            ci_hi: 0.8,
            seed: 7,
            std_err: 0.15,
        };
        let row = CsvRow::new(
            "crossing",
            r#"{"lo":[0,0],"hi":[1,1]}"#.into(),
            0.0,
            10.0,
            None,
            0.25,
            &est,
            3,
        );
        let text = String::from_utf8(csv_bytes(std::slice::from_ref(&row)).unwrap()).unwrap();
        assert!(
            text.starts_with("detector,params_json,level,R,r,h,n,p_hat,ci_lo,ci_hi,seed,wall_ms\n")
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, std::slice::from_ref(&row)).unwrap();
        assert_eq!(read_csv(&p).unwrap(), vec![row]);
    }
}
