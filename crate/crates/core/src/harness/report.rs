use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::explore::{RoundRecord, RunRecord};
use super::{ExperimentConfig, Method};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "v1";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RUN_MANIFEST_FILE: &str = "manifest.json";

/// Mean and standard error (sample std over `sqrt(n)`) of the finite values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub standard_error: f64,
    pub n: usize,
}

impl Stat {
    /// `None` when no value is finite. A single value has standard error 0.
    pub fn from_values(values: &[f64]) -> Option<Stat> {
        let xs: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let standard_error = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Some(Stat {
            mean,
            standard_error,
            n: xs.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub config_hash: String,
    pub method: Method,
    pub ensemble_size: usize,
    pub seeds: Vec<u64>,
    pub versions: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub schema: String,
    pub config_hash: String,
    pub method: Method,
    pub ensemble_size: usize,
    pub seeds: Vec<u64>,
    pub final_round: BTreeMap<String, Stat>,
    pub per_round: Vec<RoundSummary>,
}

/// Creates `out` and proves it writable before any compute starts.
pub fn preflight(out: &Path) -> Result<()> {
    let probe = out.join(".write-probe");
    fs::create_dir_all(out)
        .and_then(|_| fs::write(&probe, b""))
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", out.display())))
}

pub fn run_dir(out: &Path, config_hash: &str) -> PathBuf {
    out.join("runs").join(config_hash)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_round_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(RoundRecord::COLUMNS).map_err(csv_err)?;
    for r in &record.rounds {
        w.write_record([
            r.round.to_string(),
            r.episodes.to_string(),
            r.transitions.to_string(),
            fmt(r.coverage),
            fmt(r.plan_cost),
            fmt(r.prediction_error),
            fmt(r.model_nll),
            fmt(r.disc_accuracy),
            fmt(r.disc_skip_rate),
            record.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_step_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if let Some(first) = record.steps.first() {
        let mut header = vec!["round".to_string(), "episode".to_string(), "step".to_string()];
        header.extend((0..first.state.len()).map(|i| format!("s{i}")));
        header.extend((0..first.action.len()).map(|i| format!("a{i}")));
        header.extend((0..first.next_state.len()).map(|i| format!("next_s{i}")));
        w.write_record(&header).map_err(csv_err)?;
    }
    for s in &record.steps {
        let mut row = vec![s.round.to_string(), s.episode.to_string(), s.step.to_string()];
        row.extend(s.state.iter().chain(&s.action).chain(&s.next_state).map(|v| fmt(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

/// Reads the per-round metric columns of one `<seed>.csv`.
pub fn read_round_csv(path: &Path) -> Result<Vec<BTreeMap<String, f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let mut row = BTreeMap::new();
        for (h, v) in headers.iter().zip(rec.iter()) {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::Invalid(format!("{}: bad value {v:?} in column {h}", path.display())))?;
            row.insert(h.to_string(), x);
        }
        rows.push(row);
    }
    Ok(rows)
}

const SUMMARY_SKIP: [&str; 2] = ["round", "seed"];

fn summarize_rows(rows: &[&BTreeMap<String, f64>]) -> BTreeMap<String, Stat> {
    let mut out = BTreeMap::new();
    if let Some(first) = rows.first() {
        for key in first.keys().filter(|k| !SUMMARY_SKIP.contains(&k.as_str())) {
            let values: Vec<f64> = rows.iter().map(|r| r.get(key).copied().unwrap_or(f64::NAN)).collect();
            if let Some(s) = Stat::from_values(&values) {
                out.insert(key.clone(), s);
            }
        }
    }
    out
}

/// Rebuilds a condition summary from its manifest and per-seed CSVs alone.
pub fn summarize_run_dir(dir: &Path) -> Result<ConditionSummary> {
    let manifest: RunManifest = serde_json::from_slice(&fs::read(dir.join(RUN_MANIFEST_FILE))?)?;
    let per_seed = manifest
        .seeds
        .iter()
        .map(|s| read_round_csv(&dir.join(format!("{s}.csv"))))
        .collect::<Result<Vec<_>>>()?;
    let n_rounds = per_seed.iter().map(Vec::len).min().unwrap_or(0);
    let per_round = (0..n_rounds)
        .map(|i| {
            let rows: Vec<_> = per_seed.iter().map(|s| &s[i]).collect();
            RoundSummary {
                round: i,
                metrics: summarize_rows(&rows),
            }
        })
        .collect();
    let finals: Vec<_> = per_seed.iter().filter_map(|s| s.last()).collect();
    Ok(ConditionSummary {
        schema: REPORT_SCHEMA.to_string(),
        config_hash: manifest.config_hash,
        method: manifest.method,
        ensemble_size: manifest.ensemble_size,
        seeds: manifest.seeds,
        final_round: summarize_rows(&finals),
        per_round,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn manifest_for(config: &ExperimentConfig, seeds: Vec<u64>) -> RunManifest {
    let mut versions = BTreeMap::new();
    versions.insert("advcur".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("report_schema".to_string(), REPORT_SCHEMA.to_string());
    let mut notes = vec![
        "exploration rounds continue training the same model and discriminator without reset".to_string(),
        "domain-transfer fine-tuning warm-starts from the domain-A model".to_string(),
        "wall-clock time is kept out of the CSV files".to_string(),
    ];
    if config.method.kind().uses_ensemble() && config.ensemble_size < 2 {
        notes.push(format!("{} with a single member has an identically zero utility", config.method.name()));
    }
    RunManifest {
        schema: REPORT_SCHEMA.to_string(),
        config_hash: config.hash(),
        method: config.method,
        ensemble_size: config.ensemble_size,
        seeds,
        versions,
        notes,
        config: config.clone(),
    }
}

/// Writes `runs/<hash>/{<seed>.csv, <seed>.steps.csv, manifest.json,
/// summary.json, timing.json}` under `out` and returns the summary.
pub fn emit_report(out: &Path, config: &ExperimentConfig, records: &[RunRecord]) -> Result<ConditionSummary> {
    let dir = run_dir(out, &config.hash());
    fs::create_dir_all(&dir)?;
    let seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
    write_json(&dir.join(RUN_MANIFEST_FILE), &manifest_for(config, seeds))?;
    let mut timing = BTreeMap::new();
    for r in records {
        write_round_csv(&dir.join(format!("{}.csv", r.seed)), r)?;
        write_step_csv(&dir.join(format!("{}.steps.csv", r.seed)), r)?;
        timing.insert(r.seed.to_string(), r.wall_clock_secs);
    }
    write_json(&dir.join("timing.json"), &timing)?;
    let summary = summarize_run_dir(&dir)?;
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Regenerates `summary.json` for every run directory under `out/runs`.
pub fn rebuild_summaries(out: &Path) -> Result<Vec<ConditionSummary>> {
    let runs = out.join("runs");
    let mut dirs: Vec<PathBuf> = fs::read_dir(&runs)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(RUN_MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|d| {
            let s = summarize_run_dir(d)?;
            write_json(&d.join(SUMMARY_FILE), &s)?;
            Ok(s)
        })
        .collect()
}

/// Writes a table of string cells with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_cell(v: f64) -> String {
    fmt(v)
}
