//! WebAssembly bindings for the browser demo. Each export takes and
//! returns JSON text; the plain functions underneath are what the native
//! tests exercise.

use action_shapley::env::{aggregate_percentile, generate_training_point, make_env, EnvParams, Family};
use action_shapley::valuation::{synthetic_valuation, SyntheticParams};
use action_shapley::{action_shapley_report, p_comp, AlgoParams, PointResult};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Largest point count the demo accepts; keeps the page responsive.
pub const MAX_DEMO_POINTS: usize = 16;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapleyRequest {
    pub n: usize,
    pub kind: String,
    #[serde(default)]
    pub params: SyntheticParams,
    #[serde(default = "one")]
    pub epsilon: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Serialize)]
pub struct ShapleyResponse {
    pub per_point: Vec<PointResult>,
    pub global_theta: usize,
    pub p_comp: f64,
    pub evaluations: u64,
    /// Subsets an exhaustive computation would touch.
    pub exhaustive: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub family: Family,
    /// Slider positions in [0, 1] per action dimension; missing trailing
    /// entries sit at the midpoint.
    #[serde(default)]
    pub position: Vec<f64>,
    pub series_len: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct SimulateResponse {
    pub name: String,
    pub action_labels: Vec<String>,
    pub config: Vec<f64>,
    pub series: Vec<f64>,
    pub threshold: f64,
    pub unit: String,
    /// The family's goal percentile over the whole series.
    pub statistic: f64,
    pub percentile: f64,
    pub goal_met: bool,
}

/// Truncated Action Shapley on a closed-form valuation.
pub fn shapley_json(request: &str) -> Result<String, String> {
    let req: ShapleyRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(3..=MAX_DEMO_POINTS).contains(&req.n) {
        return Err(format!("n must be in 3..={MAX_DEMO_POINTS}"));
    }
    let valuation = synthetic_valuation(&req.kind, &req.params).map_err(|e| e.to_string())?;
    let params = AlgoParams::default().with_epsilon(req.epsilon);
    let report = action_shapley_report(&valuation, req.n, &params).map_err(|e| e.to_string())?;
    let response = ShapleyResponse {
        evaluations: report.total_evaluations(),
        exhaustive: 1u64 << req.n,
        global_theta: report.global_theta,
        p_comp: report.p_comp,
        per_point: report.per_point,
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

/// One logged series of a synthetic environment at a slider position.
pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SimulateRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let env = make_env(req.family, &EnvParams::default()).map_err(|e| e.to_string())?;
    if req.position.len() > env.action_dim {
        return Err(format!("expected at most {} slider positions", env.action_dim));
    }
    let u: Vec<f64> = (0..env.action_dim)
        .map(|i| req.position.get(i).map_or(0.5, |p| p.clamp(0.0, 1.0)))
        .collect();
    let config = env.denormalize(&u);
    let point = generate_training_point(&env, "demo", &config, req.series_len, req.seed).map_err(|e| e.to_string())?;
    let q = env.percentile.q();
    let statistic = aggregate_percentile(&point.series, q).map_err(|e| e.to_string())?;
    let response = SimulateResponse {
        goal_met: env.satisfies(statistic),
        name: env.name,
        action_labels: env.action_labels,
        config,
        series: point.series,
        threshold: env.threshold,
        unit: env.unit,
        statistic,
        percentile: q,
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn shapley(request: &str) -> Result<String, JsError> {
    shapley_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsError> {
    simulate_json(request).map_err(|e| JsError::new(&e))
}

/// `1 - 2^theta / 2^n`.
#[wasm_bindgen(js_name = pComp)]
pub fn p_comp_js(n: usize, theta: usize) -> f64 {
    p_comp(n, theta)
}
