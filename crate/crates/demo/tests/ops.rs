use advcur_demo::{cem_quadratic, explore_maze, jr_curve};

#[test]
fn jr_curve_starts_at_zero_and_saturates_at_log_k() {
    let c = jr_curve(3, 1.0, 60.0, 31).unwrap();
    assert_eq!(c.len(), 31);
    assert!(c[0].divergence.abs() < 1e-9);
    assert!(c.windows(2).all(|w| w[1].divergence >= w[0].divergence - 1e-12));
    assert!((c[30].divergence - 3f64.ln()).abs() < 1e-6);
    assert!(jr_curve(1, 1.0, 5.0, 10).is_err());
    assert!(jr_curve(2, 0.0, 5.0, 10).is_err());
}

#[test]
fn cem_finds_the_target() {
    let r = cem_quadratic(0.4, -0.7, 10, 200, 1).unwrap();
    assert!(r.best_cost < 1e-3, "{}", r.best_cost);
    assert!(r.best_trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(cem_quadratic(0.0, 0.0, 0, 200, 1).is_err());
}

#[test]
fn maze_run_reports_episodes_and_coverage() {
    let r = explore_maze("random", 1, 2, 0).unwrap();
    assert_eq!(r.coverage.len(), 3);
    assert_eq!(r.episodes.len(), 3);
    assert!(r.episodes.iter().all(|e| e.len() == 31));
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["walls"].as_array().unwrap().len(), 1);
    assert!(explore_maze("greedy", 1, 2, 0).is_err());
    assert!(explore_maze("max_jr", 9, 2, 0).is_err());
}
