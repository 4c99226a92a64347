//! Browser bindings for the `www/` demo page.
//!
//! The plain functions return JSON strings so they can be exercised natively;
//! the `#[wasm_bindgen]` wrappers only convert errors into exceptions.

use serde::Serialize;
use torickems::fixture::{catalog, fixture};
use torickems::flow::{flow_mis_report, FlowOptions};
use torickems::mis::{analyze, CandidateSource, Mode};
use torickems::potentials::PotentialModel;
use torickems::summary::{summarize, Analysis};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Entry {
    name: String,
    rays: Vec<Vec<i64>>,
    notes: String,
}

pub fn fixture_list() -> String {
    let entries: Vec<Entry> =
        catalog().into_iter().map(|f| Entry { name: f.name, rays: f.rays, notes: f.notes }).collect();
    serde_json::to_string(&entries).expect("serializes")
}

/// Summary plus the KE or KRS exclusion report for a built-in fixture.
pub fn analysis_json(name: &str, mode: &str) -> Result<String, String> {
    let mode = match mode {
        "ke" => Mode::KE,
        "krs" => Mode::KRS,
        other => return Err(format!("unknown mode {other:?}")),
    };
    let f = fixture(name).map_err(|e| e.to_string())?;
    let summary = summarize(&f, 1e-12).map_err(|e| e.to_string())?;
    let report = analyze(&f, mode, CandidateSource::Fixture).map_err(|e| e.to_string())?;
    Ok(Analysis { summary, report }.to_json())
}

/// Images `∇ũ(x)` of an `n × n` grid on `[−extent, extent]²`, flattened as
/// `[y0, y1, y0, y1, ...]` row by row.
pub fn moment_image(name: &str, extent: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || n > 400 {
        return Err(format!("grid size {n} outside 2..=400"));
    }
    let (p, _) = fixture(name).and_then(|f| f.build()).map_err(|e| e.to_string())?;
    let model = PotentialModel::from_polytope(&p);
    let step = 2.0 * extent / (n - 1) as f64;
    let mut out = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let y = model.grad(&[-extent + j as f64 * step, -extent + i as f64 * step]);
            out.extend_from_slice(&y);
        }
    }
    Ok(out)
}

/// Flow report for a single Nadel exponent.
pub fn flow_json(name: &str, alpha: f64) -> Result<String, String> {
    let f = fixture(name).map_err(|e| e.to_string())?;
    let opts = FlowOptions { alphas: vec![alpha], ..FlowOptions::default() };
    flow_mis_report(&f, &opts).map(|r| r.to_json()).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn fixtures() -> String {
    fixture_list()
}

#[wasm_bindgen]
pub fn analysis(name: &str, mode: &str) -> Result<String, JsError> {
    analysis_json(name, mode).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = momentImage)]
pub fn moment_image_js(name: &str, extent: f64, n: usize) -> Result<Vec<f64>, JsError> {
    moment_image(name, extent, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn flow(name: &str, alpha: f64) -> Result<String, JsError> {
    flow_json(name, alpha).map_err(|e| JsError::new(&e))
}
