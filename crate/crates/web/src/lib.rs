//! Browser bindings for three small demos: a dual certificate for a 1D
//! support, the converse noise-amplification ratio across SRF values, and a
//! 1D recovery from noisy low-pass data.
//!
//! Each binding returns a JSON string; the plain Rust functions behind them
//! are usable (and tested) natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use superres::adversarial::{compute_cr, mc_lower_bound_with_cr, CR_MAX_R};
use superres::certificate::build_separated_certificate;
use superres::grid::{Grid, GridSignal};
use superres::noise::poisson_noise_at_level;
use superres::rayleigh::SupportSet;
use superres::solver::{solve, SolverConfig};
use superres::spectral::{ForwardOperator, OperatorKind};

#[derive(Debug, Clone, Serialize)]
pub struct CertificateView {
    pub rho: f64,
    pub band_limit: usize,
    pub roots: Vec<usize>,
    /// Samples of `q` on `[0, 1)`, uniformly spaced.
    pub dense: Vec<f64>,
}

/// Separated certificate of band `fc` vanishing on `positions`.
pub fn certificate_view(size: usize, fc: usize, positions: &[usize]) -> Result<CertificateView, String> {
    let grid = Grid::one_d(size, fc).map_err(|e| e.to_string())?;
    let t = SupportSet::one_d(grid, positions).map_err(|e| e.to_string())?;
    let cert = build_separated_certificate(&t, fc).map_err(|e| e.to_string())?;
    Ok(CertificateView { rho: cert.rho(), band_limit: cert.band_limit(), roots: t.indices(), dense: cert.dense_values().to_vec() })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConverseRow {
    pub srf: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub ratio: f64,
    pub g_r: f64,
    pub bound: Option<f64>,
}

/// `||h||_1 / ||Q h||_1` for the order-`r` adversarial pair at each SRF.
pub fn converse_rows(r: usize, fc: usize, srfs: &[usize]) -> Result<Vec<ConverseRow>, String> {
    let c_r = if (1..=CR_MAX_R).contains(&r) { Some(compute_cr(r).map_err(|e| e.to_string())?) } else { None };
    srfs.iter()
        .map(|&srf| {
            let grid = Grid::from_srf(1, fc, srf).map_err(|e| e.to_string())?;
            let e = mc_lower_bound_with_cr(&grid, r, c_r).map_err(|e| e.to_string())?;
            Ok(ConverseRow { srf, n: e.n, ratio: e.ratio, g_r: e.g_r, bound: e.bound })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryView {
    pub x: Vec<f64>,
    pub observed: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub noise_l1: f64,
    pub error_l1: f64,
    pub residual_l1: f64,
    pub iterations: usize,
}

/// Spikes observed through the flat or triangular kernel with Poisson noise
/// rescaled to `||z||_1 = noise_l1`, then recovered.
#[allow(clippy::too_many_arguments)]
pub fn recovery_view(
    triangular: bool,
    size: usize,
    fc: usize,
    positions: &[usize],
    amplitudes: &[f64],
    noise_l1: f64,
    seed: u64,
    final_iter: usize,
) -> Result<RecoveryView, String> {
    let err = |e: superres::Error| e.to_string();
    let grid = Grid::one_d(size, fc).map_err(err)?;
    if let Some(a) = amplitudes.iter().find(|a| !(**a > 0.0)) {
        return Err(format!("amplitude {a} is not positive"));
    }
    let x = GridSignal::spikes(grid, positions, amplitudes).map_err(err)?;
    let kind = if triangular { OperatorKind::Tri1d } else { OperatorKind::Flat1d };
    let op = ForwardOperator::new(kind, grid).map_err(err)?;
    let clean = op.apply(&x).map_err(err)?;
    let observed = if noise_l1 > 0.0 { poisson_noise_at_level(&clean, noise_l1, seed).map_err(err)?.observed } else { clean.clone() };
    let cfg = SolverConfig { final_iter, ..SolverConfig::default() };
    let result = solve(&op, &observed, &cfg).map_err(err)?;
    Ok(RecoveryView {
        noise_l1: observed.sub(&clean).map_err(err)?.l1_norm(),
        error_l1: result.x_hat.sub(&x).map_err(err)?.l1_norm(),
        residual_l1: result.residual_l1,
        iterations: result.total_iterations(),
        x: x.into_values(),
        observed: observed.into_values(),
        x_hat: result.x_hat.into_values(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

fn indices(v: &[u32]) -> Vec<usize> {
    v.iter().map(|&i| i as usize).collect()
}

#[wasm_bindgen]
pub fn certificate(size: usize, fc: usize, positions: Vec<u32>) -> Result<String, JsValue> {
    to_js(certificate_view(size, fc, &indices(&positions)))
}

#[wasm_bindgen]
pub fn converse(r: usize, fc: usize, srfs: Vec<u32>) -> Result<String, JsValue> {
    to_js(converse_rows(r, fc, &indices(&srfs)))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn recover(
    triangular: bool,
    size: usize,
    fc: usize,
    positions: Vec<u32>,
    amplitudes: Vec<f64>,
    noise_l1: f64,
    seed: u32,
    final_iter: usize,
) -> Result<String, JsValue> {
    to_js(recovery_view(triangular, size, fc, &indices(&positions), &amplitudes, noise_l1, seed as u64, final_iter))
}
