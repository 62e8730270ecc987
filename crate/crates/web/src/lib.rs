//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string so the page can stay plain JavaScript.
//! Errors come back as the library's message.

use densecode::sweep::{multistage_point as point, sweep_me, sweep_sep, Table, DEFAULT_MARGIN};
use densecode::SchmidtState;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request.
const MAX_GRID: usize = 120;

fn columns(t: &Table) -> Value {
    let mut obj = serde_json::Map::new();
    for name in &t.header {
        if let Some(v) = t.floats(name) {
            obj.insert(name.clone(), json!(v));
        }
    }
    Value::Object(obj)
}

fn two_qudit(p0: f64, p1: f64, d2: usize) -> Result<SchmidtState, String> {
    let p2 = 1.0 - p0 - p1;
    SchmidtState::from_squared(3, d2, &[p0, p1, p2]).map_err(|e| e.to_string())
}

/// Minimum-error information over the qutrit simplex: `{a0, a1, I_bits}`.
#[wasm_bindgen]
pub fn me_surface(d2: usize, grid: usize) -> Result<String, String> {
    if grid > MAX_GRID {
        return Err(format!("grid {grid} exceeds {MAX_GRID}"));
    }
    let t = sweep_me(3, d2.max(3), grid, DEFAULT_MARGIN).map_err(|e| e.to_string())?;
    Ok(columns(&t).to_string())
}

/// `P_s`, `I_total`, `I_success` and `I_ME` against ξ for `a² = (p0, 1 − p0)`.
#[wasm_bindgen]
pub fn separation_curve(p0: f64, d2: usize, steps: usize) -> Result<String, String> {
    let s = SchmidtState::from_squared(2, d2, &[p0, 1.0 - p0]).map_err(|e| e.to_string())?;
    let t = sweep_sep(&s, steps.clamp(1, 1000)).map_err(|e| e.to_string())?;
    Ok(columns(&t).to_string())
}

/// Two-stage comparison at `a² = (p0, p1, 1 − p0 − p1)`.
#[wasm_bindgen]
pub fn multistage_point(p0: f64, p1: f64, d2: usize) -> Result<String, String> {
    let p = point(&two_qudit(p0, p1, d2)?).map_err(|e| e.to_string())?;
    Ok(json!({
        "I_MC": p.i_mc,
        "I_MC_ME": p.i_mc_me,
        "I_MC_MC": p.i_mc_mc,
        "I_suc1": p.i_suc1,
        "I_suc2": p.i_suc2,
        "I_ME": p.i_me,
        "P_s1": p.p_s1,
        "P_s2": p.p_s2,
        "P_overall": p.p_overall,
        "stage2_degenerate": p.stage2_degenerate,
    })
    .to_string())
}
