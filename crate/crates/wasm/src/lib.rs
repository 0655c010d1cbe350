//! Browser bindings: each export returns a JSON document for the demo page.

use chernoff_lab::experiments::{ergodic_instance, run_scenario_with_workers, ExperimentConfig, Scenario, MAX_DIM};
use chernoff_lab::linalg::{derive_seed, random_contraction, random_unitary, spectral_norm, OperatorMatrix, C64};
use chernoff_lab::product_formula::ergodic_bound_check;
use chernoff_lab::superop::{exact_pinching_projector, ContractionMap, DEFAULT_CLUSTER_TOL, DEFAULT_TRUNCATION_TOL};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest `log₂ n` the page may request.
pub const MAX_LOG2: u32 = 14;

const CONVERGENCE_SCENARIOS: [Scenario; 7] = [
    Scenario::Example1Dft,
    Scenario::Example2Blocks,
    Scenario::Example3TwoUnitaries,
    Scenario::Decoupling,
    Scenario::Cyclic,
    Scenario::Zeno,
    Scenario::Custom,
];

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    norm_error: Option<f64>,
    per_vector_max_error: Option<f64>,
    failure: Option<String>,
}

#[derive(Serialize)]
struct Sweep {
    scenario: String,
    notes: Vec<String>,
    rows: Vec<SweepRow>,
}

#[derive(Serialize)]
struct CesaroPoint {
    n: usize,
    distance: f64,
}

#[derive(Serialize)]
struct BoundPoint {
    n: usize,
    lhs: f64,
    bound: f64,
}

fn dyadic(min_log2: u32, max_log2: u32) -> Result<Vec<usize>, String> {
    if max_log2 > MAX_LOG2 || min_log2 > max_log2 {
        return Err(format!("log₂ n must lie in [{min_log2}, {MAX_LOG2}]"));
    }
    Ok((min_log2..=max_log2).map(|k| 1usize << k).collect())
}

fn check_dim(dim: usize, limit: usize) -> Result<(), String> {
    if dim == 0 || dim > limit {
        return Err(format!("dimension must lie in [1, {limit}]"));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Convergence sweep of a built-in scenario over `n = 2², …, 2^max_log2`.
pub fn convergence_sweep_json(scenario: &str, dim: usize, seed: u64, t: f64, max_log2: u32) -> Result<String, String> {
    let scenario = CONVERGENCE_SCENARIOS
        .into_iter()
        .find(|s| s.name() == scenario)
        .ok_or_else(|| format!("unknown scenario {scenario:?}"))?;
    let config = ExperimentConfig {
        dim,
        seed,
        t,
        n_values: dyadic(2, max_log2)?,
        ..ExperimentConfig::new(scenario)
    };
    let report = run_scenario_with_workers(&config, 1).map_err(|e| e.to_string())?;
    to_json(&Sweep {
        scenario: scenario.name().into(),
        notes: report.metadata.notes,
        rows: report
            .rows
            .into_iter()
            .map(|r| SweepRow {
                n: r.n,
                norm_error: r.norm_error,
                per_vector_max_error: r.per_vector_max_error,
                failure: r.failure,
            })
            .collect(),
    })
}

/// `‖M_n x − Px‖` for the Cesàro means of a seeded unitary conjugation at
/// `n = 1, 2, 4, …`.
pub fn cesaro_trajectory_json(dim: usize, seed: u64, max_log2: u32) -> Result<String, String> {
    check_dim(dim, 16)?;
    let checkpoints = dyadic(0, max_log2)?;
    let u = random_unitary(dim, derive_seed(seed, 1));
    let x = random_contraction(dim, derive_seed(seed, 2));
    let map = ContractionMap::unitary_conjugation(u.clone()).map_err(|e| e.to_string())?;
    let px = exact_pinching_projector(&u, DEFAULT_CLUSTER_TOL)
        .and_then(|p| p.apply(&x))
        .map_err(|e| e.to_string())?;
    let mut iterate = x;
    let mut sum = OperatorMatrix::zeros(dim, dim);
    let mut points = Vec::with_capacity(checkpoints.len());
    let last = *checkpoints.last().expect("at least one checkpoint");
    for k in 1..=last {
        iterate = map.apply(&iterate).map_err(|e| e.to_string())?;
        sum += &iterate;
        if k.is_power_of_two() {
            let mean = &sum / C64::new(k as f64, 0.0);
            let distance = spectral_norm(&(mean - &px)).map_err(|e| e.to_string())?;
            points.push(CesaroPoint { n: k, distance });
        }
    }
    to_json(&points)
}

/// Ergodic product bound for one seeded instance at `n = 1, 2, 4, …`.
pub fn ergodic_bound_json(seed: u64, instance: usize, max_log2: u32) -> Result<String, String> {
    let n_values = dyadic(0, max_log2.min(12))?;
    let (map, x) = ergodic_instance(seed, instance, 1.0, 1).map_err(|e| e.to_string())?;
    let points = n_values
        .into_iter()
        .map(|n| {
            ergodic_bound_check(&map, &x, 1.0, n, DEFAULT_TRUNCATION_TOL).map(|c| BoundPoint {
                n,
                lhs: c.lhs,
                bound: c.bound + 10.0 * c.residual,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    to_json(&points)
}

#[wasm_bindgen]
pub fn convergence_sweep(scenario: &str, dim: usize, seed: u32, t: f64, max_log2: u32) -> Result<String, JsError> {
    let limit = if scenario == "example2-blocks" {
        MAX_DIM / 2
    } else {
        MAX_DIM
    };
    check_dim(dim, limit.min(16)).map_err(|e| JsError::new(&e))?;
    convergence_sweep_json(scenario, dim, u64::from(seed), t, max_log2).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn cesaro_trajectory(dim: usize, seed: u32, max_log2: u32) -> Result<String, JsError> {
    cesaro_trajectory_json(dim, u64::from(seed), max_log2).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ergodic_bound(seed: u32, instance: usize, max_log2: u32) -> Result<String, JsError> {
    ergodic_bound_json(u64::from(seed), instance, max_log2).map_err(|e| JsError::new(&e))
}
