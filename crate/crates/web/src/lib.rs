//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function so the logic
//! can be tested natively.

use causal_choice::counterfactual::{flow_forward, PlanarLayer};
use causal_choice::graph::CausalDag;
use causal_choice::scm::{Mechanism, MechanismKind, ParentInfo, ParentValue};
use wasm_bindgen::prelude::*;

/// Parameters per 2-D planar layer: `u1 u2 w1 w2 b`.
pub const LAYER_WIDTH: usize = 5;

fn names(list: &str) -> Vec<&str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// Whether `x` and `y` are d-separated by the comma-separated set `z` in a
/// DAG written one `a -> b` edge per line.
pub fn d_separation(dag: &str, x: &str, y: &str, z: &str) -> Result<bool, String> {
    let dag = CausalDag::parse(dag).map_err(|e| e.to_string())?;
    dag.d_separated_by_name(x, y, &names(z)).map_err(|e| e.to_string())
}

fn layers(params: &[f64]) -> Result<Vec<PlanarLayer>, String> {
    if !params.len().is_multiple_of(LAYER_WIDTH) {
        return Err(format!("expected a multiple of {LAYER_WIDTH} parameters, got {}", params.len()));
    }
    params
        .chunks(LAYER_WIDTH)
        .map(|c| PlanarLayer::new(vec![c[0], c[1]], vec![c[2], c[3]], c[4]).map_err(|e| e.to_string()))
        .collect()
}

/// Pushes an `n × n` grid of base points on `[-extent, extent]²` through a
/// stack of planar layers. Returns `x, y, log q` triples, where `q` is the
/// density of the transformed standard normal at `(x, y)`.
pub fn flow_grid(params: &[f64], n: usize, extent: f64) -> Result<Vec<f64>, String> {
    let flows = layers(params)?;
    if n < 2 || !(extent > 0.0) {
        return Err("grid needs n ≥ 2 and a positive extent".into());
    }
    let step = 2.0 * extent / (n - 1) as f64;
    let mut out = Vec::with_capacity(3 * n * n);
    for i in 0..n {
        for j in 0..n {
            let g0 = [-extent + step * j as f64, -extent + step * i as f64];
            let (g, log_det) = flow_forward(&flows, &g0).map_err(|e| e.to_string())?;
            let log_base = -(g0[0] * g0[0] + g0[1] * g0[1]) / 2.0 - (2.0 * std::f64::consts::PI).ln();
            out.extend([g[0], g[1], log_base - log_det]);
        }
    }
    Ok(out)
}

/// Walk, bus and car probabilities as the car cost sweeps `[lo, hi]` in
/// `n` steps. Returns `cost, p_walk, p_bus, p_car` quadruples.
pub fn choice_curve(asc_bus: f64, asc_car: f64, beta_cost: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    let err = |e: causal_choice::Error| e.to_string();
    let parents = vec![ParentInfo::continuous("car_cost").for_alternative(2)];
    let mut m = Mechanism::new("mode", &["walk", "bus", "car"], MechanismKind::Categorical, parents, 0).map_err(err)?;
    let cost = m.feature_index("car_cost", None).ok_or("no car_cost feature")?;
    m.set_beta(1, 0, asc_bus).map_err(err)?;
    m.set_beta(2, 0, asc_car).map_err(err)?;
    m.set_beta(2, cost, beta_cost).map_err(err)?;
    if n < 2 {
        return Err("curve needs at least two points".into());
    }
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        let c = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let p = m.choice_probabilities(&[ParentValue::Real(c)]).map_err(err)?;
        out.push(c);
        out.extend(p);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = dSeparated)]
pub fn d_separated_js(dag: &str, x: &str, y: &str, z: &str) -> Result<bool, JsError> {
    d_separation(dag, x, y, z).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = flowGrid)]
pub fn flow_grid_js(params: &[f64], n: usize, extent: f64) -> Result<Vec<f64>, JsError> {
    flow_grid(params, n, extent).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = choiceCurve)]
pub fn choice_curve_js(asc_bus: f64, asc_car: f64, beta_cost: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    choice_curve(asc_bus, asc_car, beta_cost, lo, hi, n).map_err(|e| JsError::new(&e))
}
