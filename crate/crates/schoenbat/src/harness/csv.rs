//! Result records and their CSV/JSON encodings.
//!
//! Determinism contract: with a fixed seed, every column except `wall_time_s`
//! is a pure function of the config, so two runs of the same config differ at
//! most in that one column. `strip_wall_times` removes it for byte-level
//! comparison of runs.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::kernels::KernelId;

pub const CSV_HEADER: &str = "experiment,kernel,n,d,D,trial,metric,value,wall_time_s,degeneracies";

/// One measured quantity. `value` is deterministic given the config;
/// `wall_time_s` is the only clock-dependent field and is zero for rows that
/// time nothing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment: Experiment,
    pub kernel: KernelId,
    pub n: usize,
    pub d: usize,
    /// Random-feature dimension D.
    pub feature_dims: usize,
    /// Trial index, or a metric-specific index (grid point, pair id) where a
    /// runner says so.
    pub trial: usize,
    pub metric: String,
    pub value: f64,
    pub wall_time_s: f64,
    pub degeneracies: usize,
}

/// Renders records as CSV with `#`-prefixed metadata comments above the
/// header. The metadata is derived from the config only (no timestamps, no
/// output paths), keeping the emitted text reproducible.
pub fn emit_csv(cfg: &ExperimentConfig, records: &[ResultRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# schoenbat experiment results");
    let _ = writeln!(out, "# experiment: {}", cfg.experiment);
    let _ = writeln!(
        out,
        "# kernels: {}",
        cfg.kernels.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(out, "# n: {}", join_usize(&cfg.n_values));
    let _ = writeln!(out, "# d: {}", join_usize(&cfg.d_values));
    let _ = writeln!(out, "# D: {}", join_usize(&cfg.feature_dims));
    let _ = writeln!(
        out,
        "# p: {:?} trials: {} seed: {} epsilon: {:?}",
        cfg.p, cfg.trials, cfg.seed, cfg.epsilon
    );
    let _ = writeln!(
        out,
        "# protocol: attention error metrics normalize Q and K first, so kernels \
         with a finite domain radius stay inside it"
    );
    let _ = writeln!(out, "# wall_time_s is the only clock-dependent column");
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:?},{:?},{}",
            r.experiment,
            r.kernel,
            r.n,
            r.d,
            r.feature_dims,
            r.trial,
            r.metric,
            r.value,
            r.wall_time_s,
            r.degeneracies
        );
    }
    out
}

pub fn write_csv(cfg: &ExperimentConfig, records: &[ResultRecord], path: &Path) -> Result<()> {
    std::fs::write(path, emit_csv(cfg, records))?;
    Ok(())
}

/// JSON mirror of the same data: the config followed by the record list.
pub fn emit_json(cfg: &ExperimentConfig, records: &[ResultRecord]) -> String {
    #[derive(Serialize)]
    struct Document<'a> {
        config: &'a ExperimentConfig,
        records: &'a [ResultRecord],
    }
    serde_json::to_string_pretty(&Document { config: cfg, records })
        .expect("result records always serialize")
}

/// Parses text produced by `emit_csv` back into records. Comment lines are
/// skipped; the header must match exactly.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let mut records = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(Error::CsvParse {
                    line: lineno,
                    message: format!("expected header {CSV_HEADER:?}, got {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::CsvParse {
                line: lineno,
                message: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str, raw: &str| Error::CsvParse {
            line: lineno,
            message: format!("bad {what} value {raw:?}"),
        };
        records.push(ResultRecord {
            experiment: Experiment::from_str(fields[0])
                .map_err(|_| parse_err("experiment", fields[0]))?,
            kernel: KernelId::from_str(fields[1]).map_err(|_| parse_err("kernel", fields[1]))?,
            n: fields[2].parse().map_err(|_| parse_err("n", fields[2]))?,
            d: fields[3].parse().map_err(|_| parse_err("d", fields[3]))?,
            feature_dims: fields[4].parse().map_err(|_| parse_err("D", fields[4]))?,
            trial: fields[5].parse().map_err(|_| parse_err("trial", fields[5]))?,
            metric: fields[6].to_string(),
            value: fields[7].parse().map_err(|_| parse_err("value", fields[7]))?,
            wall_time_s: fields[8].parse().map_err(|_| parse_err("wall_time_s", fields[8]))?,
            degeneracies: fields[9].parse().map_err(|_| parse_err("degeneracies", fields[9]))?,
        });
    }
    if !saw_header {
        return Err(Error::CsvParse { line: 0, message: "missing header".into() });
    }
    Ok(records)
}

/// Removes the `wall_time_s` column from header and data rows; comments pass
/// through. The result is the determinism-comparable view of a CSV.
pub fn strip_wall_times(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            out.push_str(line);
        } else {
            let mut fields: Vec<&str> = line.split(',').collect();
            if fields.len() == 10 {
                fields.remove(8);
            }
            out.push_str(&fields.join(","));
        }
        out.push('\n');
    }
    out
}

fn join_usize(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> (ExperimentConfig, Vec<ResultRecord>) {
        let cfg = ExperimentConfig::new(Experiment::Demo);
        let records = vec![
            ResultRecord {
                experiment: Experiment::Demo,
                kernel: KernelId::Exp,
                n: 8,
                d: 6,
                feature_dims: 16,
                trial: 0,
                metric: "mean_abs_error".into(),
                value: 0.0625,
                wall_time_s: 0.0,
                degeneracies: 0,
            },
            ResultRecord {
                experiment: Experiment::Demo,
                kernel: KernelId::Sqrt,
                n: 8,
                d: 6,
                feature_dims: 16,
                trial: 3,
                metric: "mean_abs_error".into(),
                value: 1e-300,
                wall_time_s: 1.25e-4,
                degeneracies: 2,
            },
        ];
        (cfg, records)
    }

    #[test]
    fn csv_round_trips_exactly() {
        let (cfg, records) = sample_records();
        let text = emit_csv(&cfg, &records);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, records, "records must survive a write/read cycle unchanged");
    }

    #[test]
    fn empty_record_list_is_header_only() {
        let (cfg, _) = sample_records();
        let text = emit_csv(&cfg, &[]);
        let data_lines: Vec<&str> =
            text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).collect();
        assert_eq!(data_lines, vec![CSV_HEADER]);
        assert_eq!(parse_csv(&text).unwrap(), Vec::<ResultRecord>::new());
    }

    #[test]
    fn stripping_wall_times_removes_exactly_one_column() {
        let (cfg, records) = sample_records();
        let stripped = strip_wall_times(&emit_csv(&cfg, &records));
        for line in stripped.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
            assert_eq!(line.split(',').count(), 9, "line should have 9 fields: {line}");
            assert!(!line.contains("wall_time_s"));
        }
    }

    #[test]
    fn stripped_output_is_insensitive_to_wall_times() {
        let (cfg, mut records) = sample_records();
        let a = strip_wall_times(&emit_csv(&cfg, &records));
        records[1].wall_time_s = 9.5;
        let b = strip_wall_times(&emit_csv(&cfg, &records));
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_rows_report_the_line() {
        let (cfg, records) = sample_records();
        let mut text = emit_csv(&cfg, &records);
        text.push_str("demo,exp,8,6,16,0,broken_row,not_a_number,0.0,0\n");
        let err = parse_csv(&text).unwrap_err();
        match err {
            Error::CsvParse { line, message } => {
                assert!(message.contains("value"), "message should name the field: {message}");
                assert!(line >= 12, "line number should point into the file, got {line}");
            }
            other => panic!("expected a CSV parse error, got {other:?}"),
        }
    }

    #[test]
    fn json_mirror_contains_config_and_records() {
        let (cfg, records) = sample_records();
        let json = emit_json(&cfg, &records);
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(doc["config"]["experiment"], "demo");
        assert_eq!(doc["records"].as_array().unwrap().len(), 2);
        assert_eq!(doc["records"][1]["degeneracies"], 2);
    }
}
