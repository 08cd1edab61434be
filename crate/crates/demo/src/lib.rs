//! Browser demo. Each operation returns a JSON string so the page can draw
//! it directly; the same functions are exercised natively by the tests.

use advcur::curiosity::{jensen_renyi_divergence, DiagGaussian};
use advcur::envs::{EnvConfig, MazeConfig, Rect};
use advcur::harness::{explore_loop, ExperimentConfig, Method, TrainingSettings};
use advcur::planning::{cem_optimize, CemConfig};
use advcur::rng::Streams;
use advcur::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct JrPoint {
    pub separation: f64,
    pub divergence: f64,
}

/// Jensen-Rényi divergence of `components` isotropic 2-D Gaussians
/// spaced evenly on a line, as the spacing grows from 0 to `max_separation`.
pub fn jr_curve(components: usize, variance: f64, max_separation: f64, points: usize) -> Result<Vec<JrPoint>> {
    if !(2..=16).contains(&components) || points < 2 || !(max_separation > 0.0) {
        return Err(Error::Invalid("need 2-16 components, 2+ points and a positive range".into()));
    }
    (0..points)
        .map(|i| {
            let separation = max_separation * i as f64 / (points - 1) as f64;
            let comps = (0..components)
                .map(|k| DiagGaussian::new(vec![separation * k as f64, 0.0], vec![variance; 2]))
                .collect::<Result<Vec<_>>>()?;
            Ok(JrPoint {
                separation,
                divergence: jensen_renyi_divergence(&comps)?,
            })
        })
        .collect()
}

#[derive(Serialize)]
pub struct CemRun {
    pub target: [f64; 2],
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub best_trace: Vec<f64>,
    pub elite_trace: Vec<f64>,
}

/// CEM on `|a - target|^2` over a single 2-D action in `[-1, 1]^2`.
pub fn cem_quadratic(tx: f64, ty: f64, iterations: usize, candidates: usize, seed: u64) -> Result<CemRun> {
    let cfg = CemConfig {
        horizon: 1,
        iterations,
        candidates,
        elite_fraction: 0.1,
        actions_per_replan: 1,
        ..CemConfig::default()
    };
    cfg.validate()?;
    let target = [tx, ty];
    let r = cem_optimize(
        |a| Ok(a[0].iter().zip(&target).map(|(x, t)| (x - t) * (x - t)).sum()),
        &cfg,
        &mut Streams::new(seed).stream("demo_cem"),
    )?;
    Ok(CemRun {
        target,
        best: r.best_actions[0].clone(),
        best_cost: r.best_objective,
        best_trace: r.best_trace,
        elite_trace: r.elite_trace,
    })
}

#[derive(Serialize)]
pub struct MazeRun {
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Rect>,
    pub coverage: Vec<f64>,
    /// `(x, y)` of every visited state, grouped by episode.
    pub episodes: Vec<Vec<[f64; 2]>>,
}

/// A short exploration run on the default maze.
pub fn explore_maze(method: &str, ensemble_size: usize, rounds: usize, seed: u64) -> Result<MazeRun> {
    let method: Method = serde_json::from_value(serde_json::Value::String(method.to_string()))
        .map_err(|_| Error::Invalid(format!("unknown method {method:?}")))?;
    if rounds > 20 || ensemble_size > 8 {
        return Err(Error::Invalid("the demo allows at most 20 rounds and 8 members".into()));
    }
    let maze = MazeConfig::default();
    let cfg = ExperimentConfig {
        method,
        ensemble_size,
        rounds,
        seeds: vec![seed],
        env: EnvConfig::Maze(maze.clone()),
        cem: CemConfig {
            candidates: 100,
            ..CemConfig::default()
        },
        training: TrainingSettings {
            epochs: 3,
            batch_size: 32,
        },
        ..ExperimentConfig::default()
    }
    .resolve()?;
    let record = explore_loop(&cfg, seed)?.record;
    let mut episodes: Vec<Vec<[f64; 2]>> = Vec::new();
    for s in &record.steps {
        if s.step == 0 {
            episodes.push(vec![[s.state[0], s.state[1]]]);
        }
        if let Some(ep) = episodes.last_mut() {
            ep.push([s.next_state[0], s.next_state[1]]);
        }
    }
    Ok(MazeRun {
        width: maze.width,
        height: maze.height,
        walls: maze.walls,
        coverage: record.rounds.iter().map(|r| r.coverage).collect(),
        episodes,
    })
}

// Seeds cross the boundary as u32 so JavaScript can pass plain numbers.
fn to_json<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.and_then(|v| Ok(serde_json::to_string(&v)?)).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = jrCurve)]
pub fn jr_curve_js(components: usize, variance: f64, max_separation: f64, points: usize) -> std::result::Result<String, JsValue> {
    to_json(jr_curve(components, variance, max_separation, points))
}

#[wasm_bindgen(js_name = cemQuadratic)]
pub fn cem_quadratic_js(tx: f64, ty: f64, iterations: usize, candidates: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_json(cem_quadratic(tx, ty, iterations, candidates, seed.into()))
}

#[wasm_bindgen(js_name = exploreMaze)]
pub fn explore_maze_js(method: &str, ensemble_size: usize, rounds: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_json(explore_maze(method, ensemble_size, rounds, seed.into()))
}
