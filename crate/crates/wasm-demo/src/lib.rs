//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a flat `Float64Array` of fixed-width rows so the page
//! can draw without parsing. Undefined values are NaN.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use hjlb::bounds::{lower_big_l, lower_l, lower_sharpened, BoundInputs};
use hjlb::characteristics::integrate_forward;
use hjlb::hamiltonians::{BuiltinHamiltonian, BuiltinKind, StructuralConstants};
use hjlb::initial_data::InitialDatum;
use hjlb::solver::{solve, ClosedFormOracle, GridSpec, OracleKind};
use wasm_bindgen::prelude::*;

/// Row widths of the three exports.
pub const BOUND_ROW: usize = 4;
pub const PROFILE_ROW: usize = 3;
pub const PATH_ROW: usize = 4;

fn model(kind: &str, param: f64) -> Result<BuiltinHamiltonian, String> {
    let kind = BuiltinKind::from_name(kind, Some(param)).map_err(|e| e.to_string())?;
    BuiltinHamiltonian::new(kind, 1).map_err(|e| e.to_string())
}

/// Rows `t, l, L, sharpened` at `samples + 1` evenly spaced times in `[0, horizon]`.
pub fn bound_rows(
    c1: f64,
    beta: f64,
    k3: f64,
    theta: f64,
    horizon: f64,
    samples: usize,
) -> Result<Vec<f64>, String> {
    if samples == 0 || !(horizon > 0.0) {
        return Err("need samples >= 1 and horizon > 0".into());
    }
    let c = StructuralConstants::new(c1, beta, 0.0, 0.0, k3, None).map_err(|e| e.to_string())?;
    let inputs = BoundInputs::new(c, theta, horizon, None).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity((samples + 1) * BOUND_ROW);
    for k in 0..=samples {
        let t = horizon * k as f64 / samples as f64;
        let err = |e: hjlb::bounds::BoundsError| e.to_string();
        out.push(t);
        out.push(lower_l(&inputs, t).map_err(err)?.unwrap_or(f64::NAN));
        out.push(lower_big_l(&inputs, t).map_err(err)?);
        out.push(
            lower_sharpened(&inputs, t)
                .map_err(err)?
                .unwrap_or(f64::NAN),
        );
    }
    Ok(out)
}

/// Rows `x, u_scheme, u_exact` for the cone datum on `[-3, 3]` at time `t`.
pub fn profile_rows(kind: &str, param: f64, cells: usize, t: f64) -> Result<Vec<f64>, String> {
    let h = model(kind, param)?;
    let datum = InitialDatum::cone(1);
    let grid = GridSpec::new(-3.0, 3.0, cells, t, 0.4).map_err(|e| e.to_string())?;
    let sol = solve(&h, &datum, &grid).map_err(|e| e.to_string())?;
    let oracle = OracleKind::from_builtin(h.kind())
        .ok()
        .map(|k| ClosedFormOracle::new(k, datum));
    let mut out = Vec::with_capacity((cells + 1) * PROFILE_ROW);
    for (i, u) in sol.final_slice().iter().enumerate() {
        let x = grid.x(i);
        out.push(x);
        out.push(*u);
        out.push(oracle.as_ref().map_or(f64::NAN, |o| o.eval(&[x], t)));
    }
    Ok(out)
}

/// Rows `s, xi, eta, u` of the characteristic leaving `(y, u0(y))` with the
/// least-norm initial slope of the cone.
pub fn path_rows(kind: &str, param: f64, y: f64, t: f64, steps: usize) -> Result<Vec<f64>, String> {
    let h = model(kind, param)?;
    let datum = InitialDatum::cone(1);
    let p = datum
        .subgradient_set(&[y])
        .min_norm_element()
        .ok_or_else(|| format!("no subgradient at {y}"))?;
    let path =
        integrate_forward(&h, &[y], &p, datum.eval(&[y]), t, steps).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(path.times.len() * PATH_ROW);
    for k in 0..path.times.len() {
        out.extend([path.times[k], path.xi[k][0], path.eta[k][0], path.u_xi[k]]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn bound_curves(
    c1: f64,
    beta: f64,
    k3: f64,
    theta: f64,
    horizon: f64,
    samples: usize,
) -> Result<Vec<f64>, JsError> {
    bound_rows(c1, beta, k3, theta, horizon, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve_profile(kind: &str, param: f64, cells: usize, t: f64) -> Result<Vec<f64>, JsError> {
    profile_rows(kind, param, cells, t).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn characteristic(
    kind: &str,
    param: f64,
    y: f64,
    t: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    path_rows(kind, param, y, t, steps).map_err(|e| JsError::new(&e))
}
