//! WebAssembly bindings for the browser demo. Each export takes plain
//! numbers or JSON text and returns JSON text; the `*_json` functions hold
//! the logic so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use rwre_core::law::OffspringLaw;
use rwre_core::rw1d::{band_probability, reflected_event_probability, BandSpec, Estimator, Profile};
use rwre_core::walk::{default_depth_cap, run_walk, BoundaryPolicy};
use rwre_core::{presets, MarkedTree, StepLaw};

/// Upper limits that keep a single call interactive.
pub const MAX_WALK_STEPS: u64 = 20_000_000;
pub const MAX_RW1D_N: usize = 20_000;

/// A preset name, or a law object as in the experiment configs.
pub fn parse_law(text: &str) -> Result<OffspringLaw, String> {
    let t = text.trim();
    if let Some(law) = presets::by_name(t.trim_matches('"')) {
        return Ok(law);
    }
    serde_json::from_str(t).map_err(|e| format!("law: {e}"))
}

fn finite(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn presets_json() -> String {
    json!(presets::NAMES).to_string()
}

pub fn analyze_law_json(law: &str) -> Result<String, String> {
    let law = parse_law(law)?;
    let report = law.classify().map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Runs one walk and returns its checkpointed max-depth curve next to the
/// `(log k)^3` prediction.
pub fn walk_curve_json(law: &str, steps: u64, seed: u64) -> Result<String, String> {
    if steps == 0 || steps > MAX_WALK_STEPS {
        return Err(format!("steps must lie in 1..={MAX_WALK_STEPS}"));
    }
    let law = parse_law(law)?;
    let report = law.classify().map_err(|e| e.to_string())?;
    let cap = default_depth_cap(&report, steps);
    let mut tree = MarkedTree::lazy(law, seed, cap).map_err(|e| e.to_string())?;
    let traj = run_walk(&mut tree, steps, seed, BoundaryPolicy::ReflectAtParentOfRoot, false);
    let c = report.constants.map(|c| c.displacement_constant);
    let (ks, depths): (Vec<u64>, Vec<u32>) = traj.max_depth_curve.iter().copied().unzip();
    let prediction: Vec<Value> =
        ks.iter().map(|&k| c.map_or(Value::Null, |c| finite(c * (k.max(1) as f64).ln().powi(3)))).collect();
    Ok(json!({
        "regime": report.regime,
        "k": ks,
        "max_depth": depths,
        "prediction": prediction,
        "depth_cap": cap,
        "depth_cap_hit": traj.depth_cap_hit,
        "vertices": tree.len(),
    })
    .to_string())
}

/// Exact probability that a simple random walk stays in `[lo, hi] n^(1/3)`
/// (`delta < 0`) or satisfies the reflected constraint
/// `(1 + delta) max S - S <= hi n^(1/3)` (`delta >= 0`) for `n` steps.
pub fn rw1d_json(lo: f64, hi: f64, delta: f64, n: usize) -> Result<String, String> {
    if n == 0 || n > MAX_RW1D_N {
        return Err(format!("n must lie in 1..={MAX_RW1D_N}"));
    }
    let step = StepLaw::Rademacher;
    let est = if delta < 0.0 {
        band_probability(&step, &BandSpec::constant(lo, hi), n, Estimator::Exact, 0, None)
    } else {
        reflected_event_probability(
            &step,
            &BandSpec::reflected(Profile::constant(hi), delta),
            n,
            Estimator::Exact,
            0,
            None,
        )
    }
    .map_err(|e| e.to_string())?;
    Ok(json!({
        "p": finite(est.value),
        "rate": est.rate.map(finite),
        "predicted_rate": est.predicted_rate.map(finite),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn presets_list() -> String {
    presets_json()
}

#[wasm_bindgen]
pub fn analyze_law(law: &str) -> Result<String, JsError> {
    analyze_law_json(law).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn walk_curve(law: &str, steps: f64, seed: u32) -> Result<String, JsError> {
    walk_curve_json(law, steps as u64, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rw1d_probability(lo: f64, hi: f64, delta: f64, n: u32) -> Result<String, JsError> {
    rw1d_json(lo, hi, delta, n as usize).map_err(|e| JsError::new(&e))
}
