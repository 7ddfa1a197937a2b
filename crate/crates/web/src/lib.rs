//! Browser bindings: fit a k-monotone MLE, plot its certificate curves and
//! simulate data. Every export returns JSON (or plain text for samples).

use kmono::cli::parse_atoms;
use kmono::geometry::{directional_derivative, fitted_vector, p_function};
use kmono::{certify, solve_mle, Atom, KMonotoneModel, MixingMeasure, Sample, SolverConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const CURVE_POINTS: usize = 400;

#[derive(Debug, Serialize)]
pub struct FitView {
    pub k: u32,
    pub n: usize,
    pub atoms: Vec<Atom>,
    pub log_likelihood: f64,
    pub optimal: bool,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_sup: f64,
    pub p_min_relative: f64,
    /// Fitted density on `[0, 1.1 Y_m]`.
    pub density: Vec<[f64; 2]>,
    pub observations: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CertificateView {
    pub optimal: bool,
    pub gradient_sup: f64,
    pub gradient_argmax: f64,
    /// `(y, p(y) / X_(n)^k)`.
    pub p: Vec<[f64; 2]>,
    /// `(y, D(y))`.
    pub gradient: Vec<[f64; 2]>,
    pub atoms: Vec<Atom>,
    pub observations: Vec<f64>,
}

/// Parses numbers separated by whitespace, commas or semicolons.
pub fn parse_data(text: &str) -> Result<Sample, String> {
    let mut values = Vec::new();
    for (i, token) in text
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter(|t| !t.is_empty())
        .enumerate()
    {
        let v: f64 = token
            .parse()
            .map_err(|_| format!("value {} is not a number: '{token}'", i + 1))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err("no observations".into());
    }
    Sample::new(values).map_err(|e| e.to_string())
}

fn grid(upper: f64, count: usize) -> impl Iterator<Item = f64> {
    (1..=count).map(move |i| upper * i as f64 / count as f64)
}

pub fn fit_view(data: &str, k: u32, seed: u64) -> Result<FitView, String> {
    let sample = parse_data(data)?;
    let config = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    let result = solve_mle(&sample, k, &config).map_err(|e| e.to_string())?;
    let upper = 1.1 * result.model.mixing().max_location();
    let density = std::iter::once(0.0)
        .chain(grid(upper, CURVE_POINTS))
        .map(|x| [x, result.model.density(x)])
        .collect();
    Ok(FitView {
        k,
        n: sample.len(),
        atoms: result.model.mixing().atoms().to_vec(),
        log_likelihood: result.log_likelihood,
        optimal: result.certificate.optimal,
        converged: result.converged,
        iterations: result.outer_iterations,
        gradient_sup: result.final_gradient_sup,
        p_min_relative: result.certificate.p_min / result.certificate.scale,
        density,
        observations: sample.values().to_vec(),
    })
}

pub fn certificate_view(data: &str, k: u32, atoms: &str) -> Result<CertificateView, String> {
    let sample = parse_data(data)?;
    let mixing = parse_atoms(atoms).map_err(|e| e.to_string())?;
    let model = KMonotoneModel::new(k, mixing).map_err(|e| e.to_string())?;
    let cert = certify(&model, &sample, SolverConfig::default().tol_gradient).map_err(|e| e.to_string())?;
    let p = p_function(&cert.v, &sample, k).map_err(|e| e.to_string())?;
    let b = fitted_vector(&model, &sample);
    let upper = 1.2 * model.mixing().max_location().max(sample.max());
    let mut p_curve = Vec::with_capacity(CURVE_POINTS);
    let mut d_curve = Vec::with_capacity(CURVE_POINTS);
    for y in grid(upper, CURVE_POINTS) {
        p_curve.push([y, p.eval(y) / cert.scale]);
        let d = directional_derivative(&b, &sample, k, y).map_err(|e| e.to_string())?;
        d_curve.push([y, d]);
    }
    Ok(CertificateView {
        optimal: cert.optimal,
        gradient_sup: cert.gradient_sup,
        gradient_argmax: cert.gradient_argmax,
        p: p_curve,
        gradient: d_curve,
        atoms: model.mixing().atoms().to_vec(),
        observations: sample.values().to_vec(),
    })
}

pub fn simulate_text(k: u32, atoms: &str, n: usize, seed: u64) -> Result<String, String> {
    let mixing: MixingMeasure = parse_atoms(atoms).map_err(|e| e.to_string())?;
    let model = KMonotoneModel::new(k, mixing).map_err(|e| e.to_string())?;
    let sample = model.sample(n, seed).map_err(|e| e.to_string())?;
    Ok(sample
        .values()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("\n"))
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// Fits the MLE; returns a JSON `FitView`.
#[wasm_bindgen]
pub fn fit(data: &str, k: u32, seed: u64) -> Result<String, JsError> {
    to_js(fit_view(data, k, seed))
}

/// Support-plane and directional-derivative curves for a candidate given as
/// `"Y1:w1,Y2:w2"`; returns a JSON `CertificateView`.
#[wasm_bindgen(js_name = certificateCurves)]
pub fn certificate_curves(data: &str, k: u32, atoms: &str) -> Result<String, JsError> {
    to_js(certificate_view(data, k, atoms))
}

/// Draws `n` observations, one per line.
#[wasm_bindgen]
pub fn simulate(k: u32, atoms: &str, n: usize, seed: u64) -> Result<String, JsError> {
    simulate_text(k, atoms, n, seed).map_err(|e| JsError::new(&e))
}
