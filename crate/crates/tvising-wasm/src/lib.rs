//! Browser bindings for the estimation pipeline: three JSON-in/JSON-out
//! endpoints (`generate_json`, `fit_json`, `evaluate_json`) mirroring the
//! generate → fit → evaluate CLI flow. Every function takes and returns
//! strings so the logic compiles and tests on the host target; the
//! `wasm-bindgen` attributes are active only on `wasm32`.
//!
//! On failure each endpoint returns `{"error": "..."}` instead of throwing,
//! so the page can surface messages without exception plumbing.

use serde::Deserialize;
use serde_json::{json, Value};

use tvising::io::{
    dataset_from_json, dataset_to_json, diagnostics_to_json, estimate_from_json,
    estimate_to_json, model_from_json, model_to_json,
};
use tvising::solver::PenaltyConfig;
use tvising::{
    evaluate, fit_model, generate_scenario, Error, EstimatorOptions, Result, ScenarioConfig,
    SolverOptions,
};

#[cfg(target_arch = "wasm32")]
use wasm_bindgen::prelude::wasm_bindgen;

/// Demo-size guards: keep a single-threaded browser tab responsive.
const MAX_P: usize = 14;
const MAX_N: usize = 80;
const MAX_OBS: usize = 20;

fn err_json(err: &Error) -> String {
    json!({ "error": err.to_string() }).to_string()
}

fn respond(result: Result<Value>) -> String {
    match result {
        Ok(value) => value.to_string(),
        Err(err) => err_json(&err),
    }
}

/// Embed an artifact's canonical JSON encoding as a `Value`.
fn embed(text: &str) -> Result<Value> {
    Ok(serde_json::from_str(text)?)
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

fn generate_impl(config: &str) -> Result<Value> {
    let config: ScenarioConfig = serde_json::from_str(config)?;
    if config.p > MAX_P || config.n > MAX_N || config.obs_per_timestamp > MAX_OBS {
        return Err(Error::InvalidConfig(format!(
            "demo limits: p ≤ {MAX_P}, n ≤ {MAX_N}, obs_per_timestamp ≤ {MAX_OBS}"
        )));
    }
    let scenario = generate_scenario(&config)?;
    Ok(json!({
        "model": embed(&model_to_json(&scenario.model)?)?,
        "train": embed(&dataset_to_json(&scenario.train)?)?,
    }))
}

/// Sample a synthetic scenario. Input: a scenario config object
/// (`p`, `n`, `change_points`, `degree`, `obs_per_timestamp`, `seed`, …).
/// Output: `{"model": …, "train": …}` in the crate's file formats.
#[cfg_attr(target_arch = "wasm32", wasm_bindgen)]
pub fn generate_json(config: &str) -> String {
    respond(generate_impl(config))
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct FitRequest {
    train: Value,
    lambda1: f64,
    lambda2: f64,
    /// "tvifl" (default), "tesla", or "per-timestamp".
    #[serde(default)]
    method: Option<String>,
}

fn fit_impl(payload: &str) -> Result<Value> {
    let request: FitRequest = serde_json::from_str(payload)?;
    let dataset = dataset_from_json(&request.train.to_string())?;
    let penalty = match request.method.as_deref().unwrap_or("tvifl") {
        "tvifl" => PenaltyConfig::group(request.lambda1, request.lambda2),
        "tesla" => PenaltyConfig::l1(request.lambda1, request.lambda2),
        "per-timestamp" => PenaltyConfig::group(0.0, request.lambda2),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (expected tvifl, tesla, or per-timestamp)"
            )))
        }
    };
    let (estimate, solutions) = fit_model(
        &dataset,
        &penalty,
        &SolverOptions::default(),
        &EstimatorOptions::default(),
    )?;
    Ok(json!({
        "estimate": embed(&estimate_to_json(&estimate)?)?,
        "diagnostics": embed(&diagnostics_to_json(&solutions)?)?,
    }))
}

/// Fit a model. Input: `{"train": <dataset>, "lambda1": x, "lambda2": y,
/// "method": "tvifl"|"tesla"|"per-timestamp"}`. Output:
/// `{"estimate": …, "diagnostics": […]}`.
#[cfg_attr(target_arch = "wasm32", wasm_bindgen)]
pub fn fit_json(payload: &str) -> String {
    respond(fit_impl(payload))
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct EvaluateRequest {
    estimate: Value,
    truth: Value,
}

fn evaluate_impl(payload: &str) -> Result<Value> {
    let request: EvaluateRequest = serde_json::from_str(payload)?;
    let estimate = estimate_from_json(&request.estimate.to_string())?;
    let truth = model_from_json(&request.truth.to_string())?;
    if estimate.n() != truth.n() || estimate.p() != truth.p() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is (n = {}, p = {}) but truth is (n = {}, p = {})",
            estimate.n(),
            estimate.p(),
            truth.n(),
            truth.p()
        )));
    }
    let true_edges = (1..=truth.n())
        .map(|t| truth.edges_at(t))
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&estimate, truth.change_points(), &true_edges)?;
    Ok(serde_json::to_value(&report)?)
}

/// Score an estimate against the ground truth. Input:
/// `{"estimate": …, "truth": …}`. Output: the evaluation report
/// (`h_score`, `precision`, `recall`, `f1`, `num_detected`).
#[cfg_attr(target_arch = "wasm32", wasm_bindgen)]
pub fn evaluate_json(payload: &str) -> String {
    respond(evaluate_impl(payload))
}
