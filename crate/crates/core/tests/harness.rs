use std::fs;

use advcur::envs::{EnvConfig, LocomotionConfig, Maze, MazeConfig, Task};
use advcur::harness::*;
use advcur::planning::CemConfig;

fn small(method: Method, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        method,
        ensemble_size: k,
        seeds: vec![0, 1],
        rounds: 2,
        cem: CemConfig {
            candidates: 40,
            iterations: 2,
            elite_fraction: 0.1,
            ..CemConfig::default()
        },
        training: TrainingSettings {
            epochs: 1,
            batch_size: 16,
        },
        ..ExperimentConfig::default()
    }
    .resolve()
    .unwrap()
}

#[test]
fn one_round_of_one_episode_logs_its_transitions() {
    let cfg = ExperimentConfig {
        rounds: 1,
        ..small(Method::Random, 1)
    };
    let out = explore_loop(&cfg, 3).unwrap();
    let r = &out.record.rounds;
    assert_eq!(r.len(), 2);
    assert_eq!((r[0].episodes, r[0].transitions), (1, 30));
    assert_eq!((r[1].episodes, r[1].transitions), (2, 60));
    assert_eq!(out.record.steps.len(), 60);
    assert_eq!(out.buffer.transitions(), 60);
}

#[test]
fn coverage_is_monotone_and_bounded() {
    let out = explore_loop(&small(Method::Adversarial, 1), 0).unwrap();
    let cov: Vec<f64> = out.record.rounds.iter().map(|r| r.coverage).collect();
    assert!(cov.windows(2).all(|w| w[1] >= w[0]), "{cov:?}");
    assert!(cov.iter().all(|c| (0.0..=1.0).contains(c)));
}

#[test]
fn logged_maze_states_stay_out_of_walls() {
    let maze = Maze::new(MazeConfig::default()).unwrap();
    for method in [Method::Adversarial, Method::Random] {
        let out = explore_loop(&small(method, 1), 5).unwrap();
        for s in &out.record.steps {
            assert!(!maze.in_wall(s.next_state[0], s.next_state[1]), "{:?}", s.next_state);
            assert!(!maze.in_wall(s.state[0], s.state[1]));
        }
    }
}

#[test]
fn equal_seeds_write_identical_csv_bytes() {
    let cfg = small(Method::Tvax, 2);
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let records: Vec<_> = cfg.seeds.iter().map(|&s| explore_loop(&cfg, s).unwrap().record).collect();
        emit_report(dir.path(), &cfg, &records).unwrap();
        let run = run_dir(dir.path(), &cfg.hash());
        let mut files: Vec<_> = fs::read_dir(&run)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| (p.file_name().unwrap().to_owned(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    let a = run();
    assert_eq!(a.len(), 4);
    assert_eq!(a, run());
}

#[test]
fn summary_json_round_trips_and_rebuilds_from_csv() {
    let cfg = small(Method::Random, 1);
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<_> = cfg.seeds.iter().map(|&s| explore_loop(&cfg, s).unwrap().record).collect();
    let summary = emit_report(dir.path(), &cfg, &records).unwrap();
    let run = run_dir(dir.path(), &cfg.hash());
    let on_disk: ConditionSummary = serde_json::from_slice(&fs::read(run.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
    assert_eq!(rebuild_summaries(dir.path()).unwrap(), vec![summary.clone()]);

    let manifest: RunManifest = serde_json::from_slice(&fs::read(run.join(RUN_MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest.config, cfg);
    assert_eq!(manifest.seeds, vec![0, 1]);

    let cov = summary.final_round["coverage"];
    let finals: Vec<f64> = records.iter().map(RunRecord::final_coverage).collect();
    assert_eq!(cov, Stat::from_values(&finals).unwrap());
    assert!(!summary.final_round.contains_key("seed"));
}

#[test]
fn csv_has_one_row_per_round_plus_header() {
    let cfg = small(Method::Random, 1);
    let dir = tempfile::tempdir().unwrap();
    let record = explore_loop(&cfg, 0).unwrap().record;
    let path = dir.path().join("0.csv");
    write_round_csv(&path, &record).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), cfg.rounds + 2);
    assert_eq!(text.lines().next().unwrap(), RoundRecord::COLUMNS.join(","));
    let rows = read_round_csv(&path).unwrap();
    assert!(rows[0]["plan_cost"].is_nan());
    assert_eq!(rows[2]["coverage"], record.rounds[2].coverage);
}

#[test]
fn single_member_ensemble_objectives_are_flagged_degenerate() {
    let jr = explore_loop(&small(Method::MaxJr, 1), 0).unwrap();
    assert!(jr.record.degenerate_objective);
    // a zero utility leaves every plan at the bounds centre
    assert!(jr.record.rounds[1..].iter().all(|r| r.plan_cost == 0.0));
    assert!(!explore_loop(&small(Method::MaxJr, 2), 0).unwrap().record.degenerate_objective);
    assert!(!explore_loop(&small(Method::Adversarial, 1), 0).unwrap().record.degenerate_objective);
    let note = manifest_for(&small(Method::Tvax, 1), vec![0]).notes;
    assert!(note.iter().any(|n| n.contains("identically zero")));
}

#[test]
fn sweep_table_covers_every_method_size_and_seed() {
    let base = ExperimentConfig {
        rounds: 1,
        sweep: SweepConfig {
            sizes: vec![1, 2],
            methods: Method::ALL.to_vec(),
        },
        ..small(Method::Random, 1)
    };
    let (rows, conditions) = ensemble_size_sweep(&base, 2).unwrap();
    assert_eq!(rows.len(), 4 * 2 * 2);
    assert_eq!(conditions.len(), 4 * 2);
    for r in &rows {
        let expect = if r.method == Method::Adversarial { 1 } else { r.size };
        assert_eq!(r.ensemble_size, expect);
    }
    let adv: Vec<_> = rows.iter().filter(|r| r.method == Method::Adversarial && r.seed == 0).collect();
    assert_eq!(adv[0].final_coverage, adv[1].final_coverage);
}

#[test]
fn parallel_jobs_match_serial_results() {
    let cfg = small(Method::Random, 1);
    let serial = run_jobs(1, vec![0, 1, 2], |s| explore_loop(&cfg, s).unwrap().record.final_coverage());
    let parallel = run_jobs(3, vec![0, 1, 2], |s| explore_loop(&cfg, s).unwrap().record.final_coverage());
    assert_eq!(serial, parallel);
}

#[test]
fn transfer_control_has_exactly_zero_improvement() {
    let cfg = ExperimentConfig {
        transfer: TransferConfig {
            source_episodes: 3,
            source_epochs: 1,
            sample_sizes: vec![0, 20],
            fine_tune_steps: 5,
            control_size: 50,
            ..TransferConfig::default()
        },
        ..small(Method::Adversarial, 1)
    };
    let rows = domain_transfer_pipeline(&cfg, 1).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].samples, 0);
    assert_eq!(rows[0].curious_l2, rows[0].random_l2);
    assert_eq!(rows[0].improvement_pct, 0.0);
    assert!(rows[1].curious_l2 > 0.0 && rows[1].random_l2 > 0.0);
    assert_eq!(rows, domain_transfer_pipeline(&cfg, 1).unwrap());
}

#[test]
fn exploit_average_is_mean_of_task_columns() {
    let cfg = ExperimentConfig {
        env: EnvConfig::Locomotion(LocomotionConfig::default()),
        rounds: 1,
        exploit: ExploitConfig {
            episodes: 1,
            episode_length: 10,
            cem: CemConfig {
                candidates: 40,
                iterations: 2,
                elite_fraction: 0.1,
                ..CemConfig::default()
            },
            ..ExploitConfig::default()
        },
        ..small(Method::Random, 1)
    }
    .resolve()
    .unwrap();
    let (scores, _) = explore_then_exploit(&cfg, 0).unwrap();
    let run = scores.reward(Task::Run).unwrap();
    let flip = scores.reward(Task::Flip).unwrap();
    assert_eq!(scores.average, (run + flip) / 2.0);
    let floor = exploit_floor(&cfg, 0).unwrap();
    assert_eq!(floor.rewards.len(), 2);
    assert!(exploit_ceiling(&cfg, 0).unwrap().average.is_finite());
}

#[test]
fn exploit_requires_the_locomotion_environment() {
    let err = explore_then_exploit(&small(Method::Random, 1), 0).unwrap_err();
    assert!(matches!(err, advcur::Error::Config(_)));
}

#[test]
fn config_hash_ignores_seeds_and_output() {
    let a = small(Method::Random, 1);
    let b = ExperimentConfig {
        seeds: vec![9],
        out_dir: "elsewhere".into(),
        ..a.clone()
    };
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), small(Method::Random, 2).hash());
    assert_eq!(a.hash().len(), 16);
}
