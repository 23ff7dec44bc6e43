use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::run::{ResultRow, ResultTable};
use super::summary::SummaryRow;
use super::HarnessError;

pub const RESULTS_HEADER: &str =
    "scenario,method,budget,trial,achieved_power,snr_db,queries_used,wall_time_ms";
pub const SUMMARY_HEADER: &str =
    "scenario,method,budget,trials,mean_snr_db,stderr_snr_db,mean_power,mean_queries";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Config(format!(
                "unknown output format {other}"
            ))),
        }
    }
}

fn to_csv<T: Serialize>(header: &str, rows: &[T]) -> Result<String, HarnessError> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| HarnessError::Format(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Format(e.to_string()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is UTF-8"));
    Ok(out)
}

fn from_csv<T: for<'de> Deserialize<'de>>(
    header: &str,
    text: &str,
) -> Result<Vec<T>, HarnessError> {
    let first = text.lines().next().unwrap_or("");
    if first != header {
        return Err(HarnessError::Format(format!("unexpected header {first:?}")));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Format(e.to_string()))
}

/// Header line plus one `\n`-terminated line per row.
pub fn results_to_csv(table: &ResultTable) -> Result<String, HarnessError> {
    to_csv(RESULTS_HEADER, &table.rows)
}

pub fn results_from_csv(text: &str) -> Result<ResultTable, HarnessError> {
    Ok(ResultTable {
        rows: from_csv::<ResultRow>(RESULTS_HEADER, text)?,
    })
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<String, HarnessError> {
    to_csv(SUMMARY_HEADER, rows)
}

pub fn summary_from_csv(text: &str) -> Result<Vec<SummaryRow>, HarnessError> {
    from_csv(SUMMARY_HEADER, text)
}

pub fn results_to_json(table: &ResultTable) -> Result<String, HarnessError> {
    serde_json::to_string_pretty(&table.rows).map_err(|e| HarnessError::Format(e.to_string()))
}

pub fn results_from_json(text: &str) -> Result<ResultTable, HarnessError> {
    Ok(ResultTable {
        rows: serde_json::from_str(text).map_err(|e| HarnessError::Format(e.to_string()))?,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `results.<ext>` and `summary.<ext>` into `dir`, creating it if
/// needed. Returns the written paths.
pub fn write_outputs(
    table: &ResultTable,
    summary: &[SummaryRow],
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let ext = format.extension();
    let results_path = dir.join(format!("results.{ext}"));
    let summary_path = dir.join(format!("summary.{ext}"));
    let (results, summary_text) = match format {
        OutputFormat::Csv => (results_to_csv(table)?, summary_to_csv(summary)?),
        OutputFormat::Json => (
            results_to_json(table)?,
            serde_json::to_string_pretty(summary)
                .map_err(|e| HarnessError::Format(e.to_string()))?,
        ),
    };
    write_file(&results_path, &results)?;
    write_file(&summary_path, &summary_text)?;
    Ok(vec![results_path, summary_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        ResultTable {
            rows: vec![
                ResultRow {
                    scenario: "ma".into(),
                    method: "zo".into(),
                    budget: 16,
                    trial: 0,
                    achieved_power: 2.718_281_9e3,
                    snr_db: 34.343_097_2,
                    queries_used: 16,
                    wall_time_ms: 0.0,
                },
                ResultRow {
                    scenario: "ma".into(),
                    method: "rms".into(),
                    budget: 16,
                    trial: 1,
                    achieved_power: 1e-7,
                    snr_db: -70.0,
                    queries_used: 15,
                    wall_time_ms: 1.25,
                },
            ],
        }
    }

    #[test]
    fn empty_table_writes_header_only() {
        let csv = results_to_csv(&ResultTable::default()).unwrap();
        assert_eq!(csv, format!("{RESULTS_HEADER}\n"));
        assert!(results_from_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let text = results_to_csv(&t).unwrap();
        assert!(text.starts_with(RESULTS_HEADER));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(results_from_csv(&text).unwrap(), t);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let t = sample();
        assert_eq!(results_from_json(&results_to_json(&t).unwrap()).unwrap(), t);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(results_from_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn io_error_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err =
            write_outputs(&sample(), &[], &blocker.join("sub"), OutputFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn writes_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let summary = crate::harness::summarize(&sample()).unwrap();
        for f in [OutputFormat::Csv, OutputFormat::Json] {
            let paths = write_outputs(&sample(), &summary, dir.path(), f).unwrap();
            assert_eq!(paths.len(), 2);
            assert!(paths.iter().all(|p| p.exists()));
        }
        let s = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary_from_csv(&s).unwrap(), summary);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
