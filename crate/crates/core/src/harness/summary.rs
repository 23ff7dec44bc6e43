use serde::{Deserialize, Serialize};

use super::run::ResultTable;
use super::HarnessError;

/// Per-(method, budget) aggregate over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: String,
    pub budget: usize,
    pub trials: usize,
    pub mean_snr_db: f64,
    /// Sample standard deviation over `sqrt(trials)`; zero for one trial.
    pub stderr_snr_db: f64,
    pub mean_power: f64,
    pub mean_queries: f64,
}

/// Aggregate a result table. Groups appear in the table's row order.
pub fn summarize(table: &ResultTable) -> Result<Vec<SummaryRow>, HarnessError> {
    if table.is_empty() {
        return Err(HarnessError::EmptyTable);
    }
    let mut keys: Vec<(&str, usize)> = Vec::new();
    for r in &table.rows {
        let k = (r.method.as_str(), r.budget);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    Ok(keys
        .into_iter()
        .map(|(method, budget)| {
            let rows: Vec<_> = table.select(method, budget).collect();
            let n = rows.len() as f64;
            let snr: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
            let mean = snr.iter().sum::<f64>() / n;
            let stderr = if rows.len() > 1 {
                let var = snr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                scenario: rows[0].scenario.clone(),
                method: method.to_string(),
                budget,
                trials: rows.len(),
                mean_snr_db: mean,
                stderr_snr_db: stderr,
                mean_power: rows.iter().map(|r| r.achieved_power).sum::<f64>() / n,
                mean_queries: rows.iter().map(|r| r.queries_used as f64).sum::<f64>() / n,
            }
        })
        .collect())
}
