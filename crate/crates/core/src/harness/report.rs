use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// One aggregated measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub param: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

impl ResultRow {
    /// Mean and sample standard deviation of `values`.
    pub fn from_samples(experiment: &str, param: &str, metric: &str, values: &[f64]) -> Self {
        let n = values.len();
        let mean = if n == 0 { 0.0 } else { values.iter().sum::<f64>() / n as f64 };
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        ResultRow {
            experiment: experiment.to_string(),
            param: param.to_string(),
            metric: metric.to_string(),
            mean,
            std,
            trials: n,
        }
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["experiment", "param", "metric", "mean", "std", "trials"])
            .map_err(|e| HarnessError::Csv(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Csv(e.to_string()))
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<(), HarnessError> {
    let text = rows_to_csv(rows)?;
    std::fs::write(path, text).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_columns() {
        let row = ResultRow::from_samples("defense", "optimal", "average_defense", &[0.5, 0.7]);
        let text = rows_to_csv(&[row]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("experiment,param,metric,mean,std,trials"));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[..3], ["defense", "optimal", "average_defense"]);
        assert!((fields[3].parse::<f64>().unwrap() - 0.6).abs() < 1e-12);
        assert!((fields[4].parse::<f64>().unwrap() - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(fields[5], "2");
    }

    #[test]
    fn empty_rows_still_have_header() {
        assert_eq!(rows_to_csv(&[]).unwrap(), "experiment,param,metric,mean,std,trials\n");
    }

    #[test]
    fn single_sample_has_zero_std() {
        let row = ResultRow::from_samples("x", "p", "m", &[3.0]);
        assert_eq!((row.mean, row.std, row.trials), (3.0, 0.0, 1));
    }
}
