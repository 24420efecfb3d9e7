//! Result files: per-seed CSV rows, JSON summaries, per-run curve files,
//! and re-bundling a finished run directory. Writers emit no timestamps or
//! machine identifiers, so a (config, seed) pair determines every byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::harness::metrics::RunResult;
use crate::harness::runner::{ComparisonReport, SweepReport};
use crate::{Error, Result};

/// One per-run row of the results table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub algorithm: String,
    pub domain: String,
    pub final_value: f64,
    pub auc: f64,
    pub norm_auc: f64,
    pub advice_to_first: usize,
    pub advice_to_second: usize,
    pub requests_by_first: usize,
    pub requests_by_second: usize,
    pub advice_per_episode: f64,
    pub train_return_mean: f64,
}

impl ResultRow {
    pub fn from_result(r: &RunResult) -> Self {
        ResultRow {
            seed: r.seed,
            algorithm: r.algorithm.clone(),
            domain: r.domain.clone(),
            final_value: r.final_value,
            auc: r.auc,
            norm_auc: r.norm_auc,
            advice_to_first: r.advice_counts[0],
            advice_to_second: r.advice_counts[1],
            requests_by_first: r.request_counts[0],
            requests_by_second: r.request_counts[1],
            advice_per_episode: r.advice_per_episode,
            train_return_mean: r.train_return_mean,
        }
    }
}

/// One per-episode row of a curve file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub eval_return: f64,
    pub train_return: f64,
    pub advice_to_first: usize,
    pub advice_to_second: usize,
    pub requests_by_first: usize,
    pub requests_by_second: usize,
    pub steps: usize,
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    ensure_parent(path)?;
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Per-seed rows, one line per (algorithm, seed) run.
pub fn write_results_csv(path: &Path, rows: &[RunResult]) -> Result<()> {
    write_csv(path, rows.iter().map(ResultRow::from_result))
}

pub fn write_summary_json(path: &Path, report: &ComparisonReport) -> Result<()> {
    write_json(path, report)
}

pub fn write_run_json(path: &Path, result: &RunResult) -> Result<()> {
    write_json(path, result)
}

/// File stem identifying one run inside a results directory.
pub fn run_stem(result: &RunResult) -> String {
    format!("{}_seed{}", result.algorithm, result.seed)
}

/// Greedy return, training return, and advising traffic per episode.
pub fn write_curve_csv(path: &Path, result: &RunResult) -> Result<()> {
    write_csv(
        path,
        result.curve.iter().map(|c| CurveRow {
            episode: c.episode,
            eval_return: c.eval_return,
            train_return: c.train_return,
            advice_to_first: c.advice[0],
            advice_to_second: c.advice[1],
            requests_by_first: c.requests[0],
            requests_by_second: c.requests[1],
            steps: c.steps,
        }),
    )
}

/// Standard layout for a finished run: curve plus full JSON record.
pub fn write_train_outputs(dir: &Path, result: &RunResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_run_json(&dir.join("run.json"), result)?;
    write_curve_csv(&dir.join("curve.csv"), result)
}

/// Standard layout for a comparison: `results.csv`, `summary.json`, and one
/// curve file per run under `curves/`.
pub fn write_comparison(dir: &Path, report: &ComparisonReport, rows: &[RunResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(&dir.join("results.csv"), rows)?;
    write_summary_json(&dir.join("summary.json"), report)?;
    for row in rows {
        write_curve_csv(&dir.join("curves").join(format!("{}.csv", run_stem(row))), row)?;
    }
    Ok(())
}

fn sanitize(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// One flat row per (swept value, algorithm) with summary statistics.
#[derive(Debug, Clone, Serialize)]
struct SweepRow<'a> {
    key: &'a str,
    value: &'a str,
    algorithm: &'a str,
    final_value_mean: f64,
    final_value_std: f64,
    auc_mean: f64,
    auc_std: f64,
    norm_auc_mean: f64,
    norm_auc_std: f64,
    advice_per_episode_mean: f64,
    runs: usize,
}

/// Standard layout for a sweep: `sweep.csv`, `sweep.json`, and one full
/// comparison directory per swept value.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut flat = Vec::new();
    for point in &report.points {
        for alg in &point.report.algorithms {
            flat.push(SweepRow {
                key: &report.key,
                value: &point.value,
                algorithm: &alg.algorithm,
                final_value_mean: alg.final_value.mean,
                final_value_std: alg.final_value.std,
                auc_mean: alg.auc.mean,
                auc_std: alg.auc.std,
                norm_auc_mean: alg.norm_auc.mean,
                norm_auc_std: alg.norm_auc.std,
                advice_per_episode_mean: alg.advice_per_episode.mean,
                runs: alg.final_value.n,
            });
        }
    }
    write_csv(&dir.join("sweep.csv"), flat)?;
    write_json(&dir.join("sweep.json"), report)?;
    for point in &report.points {
        let sub = dir.join(format!("{}_{}", sanitize(&report.key), sanitize(&point.value)));
        write_comparison(&sub, &point.report, &point.rows)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::Config(format!("unknown export format '{other}'"))),
        }
    }
}

/// Reads one CSV file into ordered records, re-typing numeric fields.
fn read_csv_records(path: &Path) -> Result<Vec<BTreeMap<String, serde_json::Value>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let mut record = BTreeMap::new();
        for (name, field) in headers.iter().zip(row.iter()) {
            let value = if let Ok(n) = field.parse::<u64>() {
                serde_json::Value::from(n)
            } else if let Ok(f) = field.parse::<f64>() {
                serde_json::Value::from(f)
            } else {
                serde_json::Value::from(field)
            };
            record.insert(name.to_string(), value);
        }
        records.push(record);
    }
    Ok(records)
}

/// Re-bundles a finished results directory into one document: everything as
/// JSON, or every curve file merged into one long CSV keyed by run.
pub fn export_directory(dir: &Path, format: ExportFormat) -> Result<String> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a results directory", dir.display())));
    }
    // Curve files sorted by name, so output order never depends on readdir.
    let curves_dir = dir.join("curves");
    let mut curve_files: Vec<std::path::PathBuf> = if curves_dir.is_dir() {
        fs::read_dir(&curves_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect()
    } else if dir.join("curve.csv").is_file() {
        vec![dir.join("curve.csv")]
    } else {
        Vec::new()
    };
    curve_files.sort();

    match format {
        ExportFormat::Json => {
            let mut bundle = BTreeMap::new();
            for name in ["summary.json", "sweep.json", "run.json"] {
                let path = dir.join(name);
                if path.is_file() {
                    let value: serde_json::Value =
                        serde_json::from_str(&fs::read_to_string(&path)?)?;
                    bundle.insert(name.trim_end_matches(".json").to_string(), value);
                }
            }
            for name in ["results.csv", "sweep.csv"] {
                let path = dir.join(name);
                if path.is_file() {
                    let records = read_csv_records(&path)?;
                    bundle.insert(
                        name.trim_end_matches(".csv").to_string() + "_rows",
                        serde_json::to_value(records)?,
                    );
                }
            }
            let mut curves = BTreeMap::new();
            for path in &curve_files {
                let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
                curves.insert(stem, read_csv_records(path)?);
            }
            if !curves.is_empty() {
                bundle.insert("curves".into(), serde_json::to_value(curves)?);
            }
            if bundle.is_empty() {
                return Err(Error::Config(format!(
                    "{} holds no recognized result files",
                    dir.display()
                )));
            }
            Ok(serde_json::to_string_pretty(&bundle)? + "\n")
        }
        ExportFormat::Csv => {
            if curve_files.is_empty() {
                // No curves: pass the per-seed table through unchanged.
                for name in ["results.csv", "sweep.csv"] {
                    let path = dir.join(name);
                    if path.is_file() {
                        return Ok(fs::read_to_string(&path)?);
                    }
                }
                return Err(Error::Config(format!(
                    "{} holds no curve or results files",
                    dir.display()
                )));
            }
            let mut out = String::from("run,episode,eval_return,train_return,advice_to_first,advice_to_second,requests_by_first,requests_by_second,steps\n");
            for path in &curve_files {
                let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
                let mut reader = csv::Reader::from_path(path)?;
                for row in reader.records() {
                    let row = row?;
                    out.push_str(&stem);
                    for field in row.iter() {
                        out.push(',');
                        out.push_str(field);
                    }
                    out.push('\n');
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::runner::compare;
    use crate::protocol::CurvePoint;

    fn toy_result(algorithm: &str, seed: u64) -> RunResult {
        let curve = vec![
            CurvePoint {
                episode: 0,
                eval_return: 0.5,
                train_return: 0.25,
                advice: [1, 2],
                requests: [3, 4],
                steps: 5,
            },
            CurvePoint {
                episode: 1,
                eval_return: 1.0,
                train_return: 0.75,
                advice: [0, 1],
                requests: [1, 1],
                steps: 5,
            },
        ];
        RunResult::from_curve(algorithm.into(), "repeated".into(), seed, curve, 1.0, 4.0)
    }

    #[test]
    fn results_csv_has_one_row_per_run_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows = [toy_result("none", 1), toy_result("lectr_veg", 2)];
        write_results_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("seed,algorithm,domain,final_value,auc,norm_auc"));
        assert!(lines[1].starts_with("1,none,repeated,1.0,1.5,"));
        assert!(lines[2].starts_with("2,lectr_veg,repeated,"));
    }

    #[test]
    fn curve_csv_lists_every_episode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve_csv(&path, &toy_result("none", 1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3, "header plus two episodes");
        assert_eq!(lines[1], "0,0.5,0.25,1,2,3,4,5");
    }

    #[test]
    fn comparison_directories_are_byte_reproducible() {
        let mut cfg = crate::harness::config::ExperimentConfig::default();
        cfg.domain = "repeated".into();
        cfg.episodes = 3;
        cfg.generations = 1;
        let algorithms = ["none".to_string(), "adhoc_visit".to_string()];
        let seeds = [1, 2];

        let mut bytes = Vec::new();
        for _ in 0..2 {
            let (report, rows) = compare(&cfg, &algorithms, &seeds).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_comparison(dir.path(), &report, &rows).unwrap();
            let mut all = Vec::new();
            let mut names: Vec<_> = ["results.csv", "summary.json"]
                .iter()
                .map(|n| dir.path().join(n))
                .collect();
            for row in &rows {
                names.push(dir.path().join("curves").join(format!("{}.csv", run_stem(row))));
            }
            for name in names {
                all.extend(std::fs::read(&name).unwrap());
            }
            bytes.push(all);
        }
        assert_eq!(bytes[0], bytes[1], "same config and seeds, same files");
    }

    #[test]
    fn export_bundles_a_comparison_directory() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [toy_result("none", 1), toy_result("none", 2)];
        write_results_csv(&dir.path().join("results.csv"), &rows).unwrap();
        for row in &rows {
            write_curve_csv(
                &dir.path().join("curves").join(format!("{}.csv", run_stem(row))),
                row,
            )
            .unwrap();
        }

        let json = export_directory(dir.path(), ExportFormat::Json).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["results_rows"][0]["seed"], 1);
        assert_eq!(value["curves"]["none_seed1"][1]["eval_return"], 1.0);

        let csv_text = export_directory(dir.path(), ExportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv_text.lines().collect();
        assert_eq!(lines.len(), 5, "header plus two episodes per run");
        assert!(lines[1].starts_with("none_seed1,0,"));
        assert!(lines[3].starts_with("none_seed2,0,"));
    }

    #[test]
    fn export_rejects_unrecognized_directories() {
        let dir = tempfile::tempdir().unwrap();
        assert!(export_directory(dir.path(), ExportFormat::Json).is_err());
        assert!(export_directory(&dir.path().join("missing"), ExportFormat::Csv).is_err());
    }
}
