//! CSV persistence of averaged results.
//!
//! Floats are written with 17 significant digits in scientific notation,
//! which round-trips every `f64` exactly; `-inf` marks a zero e-value.

use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["predictor_id", "parameter", "mean_quality", "std_error", "iterations", "seed"];

/// One averaged data point of a figure.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub predictor_id: String,
    pub parameter: f64,
    pub mean_quality: f64,
    pub std_error: f64,
    pub iterations: u64,
    pub seed: u64,
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Write `records` to `path`, replacing any existing file.
pub fn write_results(records: &[ResultRecord], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.predictor_id.clone(),
            format_float(r.parameter),
            format_float(r.mean_quality),
            format_float(r.std_error),
            r.iterations.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let malformed = |reason: String| Error::Malformed { path: path.to_path_buf(), reason };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(malformed(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let float = |i: usize| {
            field(i).parse::<f64>().map_err(|_| malformed(format!("row {}: bad number {:?}", line + 1, field(i))))
        };
        let int = |i: usize| {
            field(i).parse::<u64>().map_err(|_| malformed(format!("row {}: bad integer {:?}", line + 1, field(i))))
        };
        out.push(ResultRecord {
            predictor_id: field(0).to_string(),
            parameter: float(1)?,
            mean_quality: float(2)?,
            std_error: float(3)?,
            iterations: int(4)?,
            seed: int(5)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, q: f64) -> ResultRecord {
        ResultRecord {
            predictor_id: id.into(),
            parameter: 0.1,
            mean_quality: q,
            std_error: 1e-3,
            iterations: 10,
            seed: u64::MAX,
        }
    }

    #[test]
    fn round_trip_and_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records = vec![record("RICEP 10", 2.0 / 3.0), record("suboptimal CEP, σ", f64::NEG_INFINITY)];
        write_results(&records, &path).unwrap();
        write_results(&records, &path).unwrap();
        assert_eq!(read_results(&path).unwrap(), records);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("predictor_id,parameter,mean_quality,std_error,iterations,seed\n"));
        assert!(text.contains("6.6666666666666663e-1"));
        assert!(text.contains(",-inf,"));
    }

    #[test]
    fn empty_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_results(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
        assert!(read_results(&path).unwrap().is_empty());
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = write_results(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn decimal_point_is_always_a_dot() {
        assert_eq!(format_float(1234.5), "1.2345000000000000e3");
        assert_eq!(format_float(-0.001), "-1.0000000000000000e-3");
    }
}
