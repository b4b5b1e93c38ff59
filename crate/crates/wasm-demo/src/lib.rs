//! Browser bindings for a few interactive computations. The plain functions
//! return JSON strings so they can be tested natively; the `#[wasm_bindgen]`
//! wrappers only turn errors into JS exceptions.

use adapted_ot::adapted::lift;
use adapted_ot::diagnostics::BranchingExample;
use adapted_ot::io::{self, Document, SpaceTable};
use adapted_ot::measures::PairedMeasure;
use adapted_ot::modulus::modulus_curve;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect()
}

/// Counterexample table: plain and lifted distances to the left process, and the
/// LP modulus of each lifted right process next to its closed form.
pub fn branching_table(gaps: &str, separation: f64, delta: f64, p: f64) -> Result<String, String> {
    let fig = BranchingExample::new(&list(gaps)?, separation).map_err(|e| e.to_string())?;
    let rows = fig.table(delta, p).map_err(|e| e.to_string())?;
    let rows: Vec<_> = rows
        .iter()
        .map(|r| json!({"gap": r.gap, "plain": r.plain, "lifted": r.lifted, "omega": r.omega, "closed_form": r.closed_form}))
        .collect();
    Ok(json!({ "rows": rows }).to_string())
}

/// Modulus curves of the lifted right processes over a δ grid.
pub fn branching_curves(gaps: &str, separation: f64, grid: &str, p: f64) -> Result<String, String> {
    let fig = BranchingExample::new(&list(gaps)?, separation).map_err(|e| e.to_string())?;
    let deltas = list(grid)?;
    let mut curves = Vec::new();
    for (k, &g) in fig.gaps().iter().enumerate() {
        let mu = lift(&fig.right(k), 1, p).and_then(|l| l.as_paired()).map_err(|e| e.to_string())?;
        let c = modulus_curve(&mu, &deltas, p).map_err(|e| e.to_string())?;
        curves.push(json!({"gap": g, "values": c.values}));
    }
    Ok(json!({ "deltas": deltas, "curves": curves }).to_string())
}

fn paired(text: &str, t: usize, p: f64) -> Result<PairedMeasure, String> {
    let doc = io::parse_document(text, &SpaceTable::default()).map_err(|e| e.to_string())?;
    let mu = match doc {
        Document::Measure(m, split) => io::as_paired(m, split),
        Document::Process(m) => lift(&m, t, p).and_then(|l| l.as_paired()),
        Document::Lifted(l) => l.as_paired(),
        other => return Err(format!("expected a measure, process or lift, got a {}", other.kind_name())),
    };
    mu.map_err(|e| e.to_string())
}

/// Modulus curve of a pasted measure, process law (lifted at `t`) or lift.
pub fn modulus_curve_of(doc: &str, grid: &str, p: f64, t: usize) -> Result<String, String> {
    let mu = paired(doc, t, p)?;
    let c = modulus_curve(&mu, &list(grid)?, p).map_err(|e| e.to_string())?;
    let diam = mu.y_space().factors().iter().map(|f| f.diameter()).fold(0.0, f64::max);
    Ok(json!({
        "deltas": c.deltas,
        "values": c.values,
        "violations": c.violations().len(),
        "y_diameter": diam,
    })
    .to_string())
}

#[wasm_bindgen(js_name = branchingTable)]
pub fn branching_table_js(gaps: &str, separation: f64, delta: f64, p: f64) -> Result<String, JsError> {
    branching_table(gaps, separation, delta, p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = branchingCurves)]
pub fn branching_curves_js(gaps: &str, separation: f64, grid: &str, p: f64) -> Result<String, JsError> {
    branching_curves(gaps, separation, grid, p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = modulusCurve)]
pub fn modulus_curve_js(doc: &str, grid: &str, p: f64, t: usize) -> Result<String, JsError> {
    modulus_curve_of(doc, grid, p, t).map_err(|e| JsError::new(&e))
}
