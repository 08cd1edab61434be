use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advcur::envs::{EnvConfig, Task};
use advcur::harness::{
    domain_transfer_pipeline, emit_report, ensemble_size_sweep, exploit_ceiling, exploit_floor, explore_loop,
    explore_then_exploit, format_cell, manifest_for, preflight, rebuild_summaries, run_dir, run_jobs, write_json,
    write_table, ConditionSummary, ExperimentConfig, Stat, TaskScores, TransferRow, RUN_MANIFEST_FILE, SUMMARY_FILE,
};
use advcur::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "advcur", version, about = "Adversarial-curiosity exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the explore/update loop for every seed and write per-seed CSVs.
    Explore(Common),
    /// Explore on the locomotion system, then plan the downstream tasks.
    Exploit(Common),
    /// Run every sweep method at every ensemble size.
    Sweep(Common),
    /// Run the domain-transfer pipeline.
    Transfer(Common),
    /// Rebuild summary.json for every run under the output directory.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used for anything missing.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the config's seed list. Repeatable.
    #[arg(long)]
    seed: Vec<u64>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("advcur: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Explore(c) => explore(&c),
        Command::Exploit(c) => exploit(&c),
        Command::Sweep(c) => sweep(&c),
        Command::Transfer(c) => transfer(&c),
        Command::Report(c) => report(&c),
    }
}

/// Loads and validates the config and proves the output directory is
/// writable, so no compute starts on a bad setup.
fn setup(args: &Common) -> Result<ExperimentConfig> {
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default().resolve()?,
    };
    if !args.seed.is_empty() {
        cfg.seeds = args.seed.clone();
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    preflight(&cfg.out_dir)?;
    Ok(cfg)
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

fn stat_text(s: Option<&Stat>) -> String {
    s.map(|s| format!("{:.4} ± {:.4}", s.mean, s.standard_error)).unwrap_or_else(|| "-".into())
}

fn print_condition(s: &ConditionSummary, dir: &Path) {
    println!(
        "{} K={} seeds={:?} final coverage {} -> {}",
        s.method.name(),
        s.ensemble_size,
        s.seeds,
        stat_text(s.final_round.get("coverage")),
        dir.display()
    );
}

fn explore(args: &Common) -> Result<()> {
    let cfg = setup(args)?;
    let records = collect(run_jobs(args.jobs, cfg.seeds.clone(), |s| explore_loop(&cfg, s).map(|o| o.record)))?;
    let summary = emit_report(&cfg.out_dir, &cfg, &records)?;
    print_condition(&summary, &run_dir(&cfg.out_dir, &cfg.hash()));
    Ok(())
}

fn task_header(tasks: &[Task]) -> Vec<&'static str> {
    let mut h = vec!["label", "seed"];
    h.extend(tasks.iter().map(|t| t.name()));
    h.push("average");
    h
}

fn exploit(args: &Common) -> Result<()> {
    let cfg = setup(args)?;
    if !matches!(cfg.env, EnvConfig::Locomotion(_)) {
        return Err(Error::Config("exploit needs `[env] kind = \"locomotion\"`".into()));
    }
    let per_seed = collect(run_jobs(args.jobs, cfg.seeds.clone(), |s| {
        let floor = exploit_floor(&cfg, s)?;
        let ceiling = exploit_ceiling(&cfg, s)?;
        let (scores, record) = explore_then_exploit(&cfg, s)?;
        Ok((vec![floor, ceiling, scores], record))
    }))?;
    let records: Vec<_> = per_seed.iter().map(|(_, r)| r.clone()).collect();
    emit_report(&cfg.out_dir, &cfg, &records)?;
    let scores: Vec<&TaskScores> = per_seed.iter().flat_map(|(s, _)| s).collect();
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|s| {
            let mut row = vec![s.label.clone(), s.seed.to_string()];
            row.extend(s.rewards.iter().map(|(_, r)| format_cell(*r)));
            row.push(format_cell(s.average));
            row
        })
        .collect();
    let dir = run_dir(&cfg.out_dir, &cfg.hash());
    write_table(&dir.join("exploit.csv"), &task_header(&cfg.exploit.tasks), &rows)?;
    let mut by_label: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in &scores {
        by_label.entry(s.label.as_str()).or_default().push(s.average);
    }
    for (label, v) in &by_label {
        println!("{label}: average reward {}", stat_text(Stat::from_values(v).as_ref()));
    }
    println!("-> {}", dir.join("exploit.csv").display());
    Ok(())
}

fn sweep(args: &Common) -> Result<()> {
    let cfg = setup(args)?;
    let (rows, conditions) = ensemble_size_sweep(&cfg, args.jobs)?;
    for c in &conditions {
        emit_report(&cfg.out_dir, &c.config, &c.records)?;
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.name().to_string(),
                r.size.to_string(),
                r.ensemble_size.to_string(),
                r.seed.to_string(),
                format_cell(r.final_coverage),
                r.degenerate.to_string(),
            ]
        })
        .collect();
    let path = cfg.out_dir.join("sweep").join(format!("{}.csv", cfg.hash()));
    write_table(
        &path,
        &["method", "size", "ensemble_size", "seed", "final_coverage", "degenerate"],
        &table,
    )?;
    for c in &conditions {
        let v: Vec<f64> = c.records.iter().map(|r| r.final_coverage()).collect();
        println!(
            "{} size={} final coverage {}",
            c.config.method.name(),
            c.size,
            stat_text(Stat::from_values(&v).as_ref())
        );
    }
    println!("-> {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct TransferSummary {
    schema: &'static str,
    config_hash: String,
    seeds: Vec<u64>,
    /// Keyed by the number of fine-tuning transitions.
    improvement_pct: BTreeMap<usize, Stat>,
    l2_difference: BTreeMap<usize, Stat>,
}

fn transfer(args: &Common) -> Result<()> {
    let cfg = setup(args)?;
    let per_seed = collect(run_jobs(args.jobs, cfg.seeds.clone(), |s| domain_transfer_pipeline(&cfg, s)))?;
    let dir = cfg.out_dir.join("transfer").join(cfg.hash());
    std::fs::create_dir_all(&dir)?;
    for (seed, rows) in cfg.seeds.iter().zip(&per_seed) {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.samples.to_string(),
                    format_cell(r.curious_l2),
                    format_cell(r.random_l2),
                    format_cell(r.improvement_pct),
                ]
            })
            .collect();
        write_table(
            &dir.join(format!("{seed}.csv")),
            &["samples", "curious_l2", "random_l2", "improvement_pct"],
            &table,
        )?;
    }
    write_json(&dir.join(RUN_MANIFEST_FILE), &manifest_for(&cfg, cfg.seeds.clone()))?;
    let rows: Vec<&TransferRow> = per_seed.iter().flatten().collect();
    let mut improvement_pct = BTreeMap::new();
    let mut l2_difference = BTreeMap::new();
    for &n in &cfg.transfer.sample_sizes {
        let at: Vec<&&TransferRow> = rows.iter().filter(|r| r.samples == n).collect();
        let pct: Vec<f64> = at.iter().map(|r| r.improvement_pct).collect();
        let diff: Vec<f64> = at.iter().map(|r| r.random_l2 - r.curious_l2).collect();
        if let (Some(p), Some(d)) = (Stat::from_values(&pct), Stat::from_values(&diff)) {
            println!("N={n}: improvement {:+.2}% ± {:.2}, L2 difference {}", p.mean, p.standard_error, stat_text(Some(&d)));
            improvement_pct.insert(n, p);
            l2_difference.insert(n, d);
        }
    }
    let summary = TransferSummary {
        schema: advcur::harness::REPORT_SCHEMA,
        config_hash: cfg.hash(),
        seeds: cfg.seeds.clone(),
        improvement_pct,
        l2_difference,
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    println!("-> {}", dir.display());
    Ok(())
}

fn report(args: &Common) -> Result<()> {
    let cfg = setup(args)?;
    if !cfg.out_dir.join("runs").is_dir() {
        return Err(Error::Config(format!("no runs under {}", cfg.out_dir.display())));
    }
    let summaries = rebuild_summaries(&cfg.out_dir)?;
    let mut rows = Vec::with_capacity(summaries.len());
    for s in &summaries {
        print_condition(s, &run_dir(&cfg.out_dir, &s.config_hash));
        let cov = s.final_round.get("coverage");
        rows.push(vec![
            s.config_hash.clone(),
            s.method.name().to_string(),
            s.ensemble_size.to_string(),
            s.seeds.len().to_string(),
            cov.map(|c| format_cell(c.mean)).unwrap_or_default(),
            cov.map(|c| format_cell(c.standard_error)).unwrap_or_default(),
        ]);
    }
    let path = cfg.out_dir.join("report.csv");
    write_table(
        &path,
        &["config_hash", "method", "ensemble_size", "seeds", "final_coverage", "final_coverage_se"],
        &rows,
    )?;
    println!("-> {}", path.display());
    Ok(())
}
