//! Converse bounds: pairs of nonnegative `r`-sparse signals whose difference
//! is nearly annihilated by the triangular kernel, the limiting constants
//! `c_r`, and empirical noise amplification.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSignal};
use crate::spectral::{fejer_kernel, ForwardOperator, OperatorKind};

/// Reference lower bounds on `c_1 .. c_5`.
pub const CR_REFERENCE: [f64; 5] = [1.66, 1.44, 0.92, 0.48, 0.24];
pub const CR_MAX_R: usize = 5;

/// `C(n, k)` as a float (exact for the small orders used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `x - x~ = h` with `h_l = (-1)^l C(2r-1, l) / 2^{2r-1}`, `l = 0..2r-1`:
/// `x` carries the even taps, `x~` the odd ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialPair {
    pub r: usize,
    pub x: GridSignal,
    pub x_tilde: GridSignal,
    pub h: GridSignal,
}

impl AdversarialPair {
    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    /// Order `2r - 1` of the difference.
    pub fn order(&self) -> usize {
        2 * self.r - 1
    }

    pub fn shifted(&self, shift: usize) -> Self {
        Self { r: self.r, x: self.x.shifted(shift), x_tilde: self.x_tilde.shifted(shift), h: self.h.shifted(shift) }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { r: self.r, x: self.x.scaled(factor), x_tilde: self.x_tilde.scaled(factor), h: self.h.scaled(factor) }
    }
}

pub fn make_adversarial_pair(grid: &Grid, r: usize) -> Result<AdversarialPair> {
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("adversarial pairs are 1D".into()));
    }
    if r == 0 || 2 * r > grid.size() {
        return Err(Error::InvalidArgument(format!("r = {r} does not fit a grid of size {}", grid.size())));
    }
    let order = 2 * r - 1;
    let scale = 0.5f64.powi(order as i32);
    let mut x = vec![0.0; grid.size()];
    let mut xt = vec![0.0; grid.size()];
    for l in 0..=order {
        let w = binomial(order, l) * scale;
        if l % 2 == 0 {
            x[l] = w;
        } else {
            xt[l] = w;
        }
    }
    let h: Vec<f64> = x.iter().zip(&xt).map(|(a, b)| a - b).collect();
    Ok(AdversarialPair {
        r,
        x: GridSignal::new(*grid, x)?,
        x_tilde: GridSignal::new(*grid, xt)?,
        h: GridSignal::new(*grid, h)?,
    })
}

/// `||Q (x - x~)||_1` for a triangular 1D operator.
pub fn pushforward_l1(op: &ForwardOperator, pair: &AdversarialPair) -> Result<f64> {
    if op.kind() != OperatorKind::Tri1d {
        return Err(Error::InvalidArgument("pushforward is defined for the triangular 1D operator".into()));
    }
    let qx = op.apply(&pair.x)?;
    let qxt = op.apply(&pair.x_tilde)?;
    Ok(qx.sub(&qxt)?.l1_norm())
}

/// `sum_l (-1)^l C(order, l) g(t + (order - l) delta)`.
pub fn finite_difference(g: impl Fn(f64) -> f64, t: f64, delta: f64, order: usize) -> Result<f64> {
    if order == 0 || !(delta > 0.0) {
        return Err(Error::InvalidArgument("finite difference needs order >= 1 and delta > 0".into()));
    }
    Ok((0..=order)
        .map(|l| {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(order, l) * g(t + (order - l) as f64 * delta)
        })
        .sum())
}

/// `sum_m |2^{-order} D^{order}_{1/N} g((m - order)/N)|` with `g` the
/// Fejér kernel: the same quantity as [`pushforward_l1`] summed directly.
pub fn pushforward_l1_direct(grid: &Grid, r: usize) -> Result<f64> {
    let n = grid.size();
    let order = 2 * r - 1;
    let delta = 1.0 / n as f64;
    let g = |t: f64| fejer_kernel(t, grid.fc(), n);
    let scale = 0.5f64.powi(order as i32);
    let mut total = 0.0;
    for m in 0..n {
        let t = (m as f64 - order as f64) / n as f64;
        total += (scale * finite_difference(g, t, delta, order)?).abs();
    }
    Ok(total)
}

/// Quadrature resolution for [`compute_cr_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrQuadrature {
    /// Outer trapezoid step in `t`.
    pub step: f64,
    /// Outer truncation; the remainder is added from its asymptotic form.
    pub t_max: f64,
    /// Gauss-Legendre panels on `[0, 1]` for the inner integral at small `t`.
    pub panels: usize,
}

impl Default for CrQuadrature {
    fn default() -> Self {
        Self { step: 1.0 / 512.0, t_max: 2048.0, panels: 32 }
    }
}

impl CrQuadrature {
    pub fn doubled(&self) -> Self {
        Self { step: self.step / 2.0, t_max: self.t_max * 2.0, panels: self.panels * 2 }
    }
}

/// Below this `t` the inner integral is computed by Gauss-Legendre.
const INNER_SWITCH: f64 = 2.0;

/// Polynomial `(1 - f) f^order` in ascending coefficients.
fn inner_poly(order: usize) -> Vec<f64> {
    let mut p = vec![0.0; order + 2];
    p[order] = 1.0;
    p[order + 1] = -1.0;
    p
}

fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect()
}

/// `int_0^1 sin(w f) p(f) df` by repeated integration by parts (exact).
fn sine_moment_closed(p: &[f64], w: f64) -> f64 {
    let (s1, c1) = w.sin_cos();
    let mut d = p.to_vec();
    let mut total = 0.0;
    let mut sign = 1.0;
    let mut wpow = w;
    while !d.is_empty() {
        let d1 = poly_derivative(&d);
        let even = -(c1 * poly_eval(&d, 1.0) - poly_eval(&d, 0.0)) / wpow;
        let odd = if d1.is_empty() { 0.0 } else { s1 * poly_eval(&d1, 1.0) / (wpow * w) };
        total += sign * (even + odd);
        d = poly_derivative(&d1);
        sign = -sign;
        wpow *= w * w;
    }
    total
}

/// 16-point Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre_16() -> ([f64; 16], [f64; 16]) {
    const X: [f64; 8] = [
        0.095_012_509_837_637_44,
        0.281_603_550_779_258_9,
        0.458_016_777_657_227_4,
        0.617_876_244_402_643_7,
        0.755_404_408_355_003,
        0.865_631_202_387_831_8,
        0.944_575_023_073_232_6,
        0.989_400_934_991_649_9,
    ];
    const W: [f64; 8] = [
        0.189_450_610_455_068_5,
        0.182_603_415_044_923_6,
        0.169_156_519_395_002_5,
        0.149_595_988_816_576_7,
        0.124_628_971_255_533_9,
        0.095_158_511_682_492_78,
        0.062_253_523_938_647_89,
        0.027_152_459_411_754_09,
    ];
    let mut x = [0.0; 16];
    let mut w = [0.0; 16];
    for i in 0..8 {
        x[i] = -X[7 - i];
        w[i] = W[7 - i];
        x[15 - i] = X[7 - i];
        w[15 - i] = W[7 - i];
    }
    (x, w)
}

fn sine_moment_gl(p: &[f64], w: f64, panels: usize) -> f64 {
    let (x, wt) = gauss_legendre_16();
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    for j in 0..panels {
        let mid = (j as f64 + 0.5) * h;
        for i in 0..16 {
            let f = mid + 0.5 * h * x[i];
            total += 0.5 * h * wt[i] * (w * f).sin() * poly_eval(p, f);
        }
    }
    total
}

/// `|int_{-1}^{1} exp(i 2 pi t f) (1 - |f|) f^order df|` for odd `order`.
fn inner_magnitude(p: &[f64], t: f64, panels: usize) -> f64 {
    let w = 2.0 * PI * t;
    // The integrand is odd in f, so the integral is 2i times the sine moment.
    let s = if t < INNER_SWITCH { sine_moment_gl(p, w, panels) } else { sine_moment_closed(p, w) };
    2.0 * s.abs()
}

/// `c_r = 2^{2r-1} (pi^{2r-1} int |int exp(i 2 pi t f) tri(f) f^{2r-1} df| dt)^{-1}`.
pub fn compute_cr(r: usize) -> Result<f64> {
    compute_cr_with(r, &CrQuadrature::default())
}

pub fn compute_cr_with(r: usize, quad: &CrQuadrature) -> Result<f64> {
    if r == 0 || r > CR_MAX_R {
        return Err(Error::InvalidArgument(format!("c_r is computed for 1 <= r <= {CR_MAX_R}, got {r}")));
    }
    let order = 2 * r - 1;
    let p = inner_poly(order);
    let steps = (quad.t_max / quad.step).round() as usize;
    let h = quad.t_max / steps as f64;
    let mut half = 0.0;
    for j in 0..=steps {
        let v = inner_magnitude(&p, j as f64 * h, quad.panels);
        half += if j == 0 || j == steps { 0.5 * v } else { v };
    }
    half *= h;
    // |inner| ~ 2 |sin(2 pi t)| / (2 pi t)^2 beyond t_max; mean of |sin| is 2/pi.
    half += 1.0 / (PI.powi(3) * quad.t_max);
    let integral = 2.0 * half;
    Ok(2f64.powi(order as i32) / (PI.powi(order as i32) * integral))
}

/// Modulus-of-continuity lower bound from one adversarial pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub r: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub fc: usize,
    pub srf: f64,
    /// `||h||_1 / ||Q h||_1`.
    pub ratio: f64,
    /// `ratio / SRF^{2r-1}`, which tends to `c_r`.
    pub g_r: f64,
    pub c_r: Option<f64>,
    /// `c_r SRF^{2r-1}`.
    pub bound: Option<f64>,
}

pub fn mc_lower_bound(grid: &Grid, r: usize) -> Result<McEstimate> {
    mc_lower_bound_with_cr(grid, r, None)
}

/// [`mc_lower_bound`] with a precomputed `c_r` (skips the quadrature).
pub fn mc_lower_bound_with_cr(grid: &Grid, r: usize, c_r: Option<f64>) -> Result<McEstimate> {
    let op = ForwardOperator::triangular(*grid)?;
    let pair = make_adversarial_pair(grid, r)?;
    let push = pushforward_l1(&op, &pair)?;
    if !(push > 0.0) {
        return Err(Error::NonFinite("pushforward vanished".into()));
    }
    let ratio = pair.h.l1_norm() / push;
    let srf = grid.srf();
    let e = (2 * r - 1) as i32;
    let c_r = match c_r {
        Some(c) => Some(c),
        None if r <= CR_MAX_R => Some(compute_cr(r)?),
        None => None,
    };
    Ok(McEstimate {
        r,
        n: grid.size(),
        fc: grid.fc(),
        srf,
        ratio,
        g_r: ratio / srf.powi(e),
        c_r,
        bound: c_r.map(|c| c * srf.powi(e)),
    })
}

/// CSV rows `r,SRF,N,fc,ratio,g_r,c_r,bound`.
pub fn mc_table_csv(rows: &[McEstimate]) -> String {
    let mut out = String::from("r,SRF,N,fc,ratio,g_r,c_r,bound\n");
    for e in rows {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        out.push_str(&format!("{},{},{},{},{},{},{},{}\n", e.r, e.srf, e.n, e.fc, e.ratio, e.g_r, opt(e.c_r), opt(e.bound)));
    }
    out
}

/// One recovery: its error and the noise that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRun {
    pub error_l1: f64,
    pub noise_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NafEstimate {
    /// `max error / delta`, or `None` when `delta` is zero (noiseless batch).
    pub naf: Option<f64>,
    pub max_error: f64,
    pub delta: f64,
    pub runs: usize,
}

/// Empirical noise amplification `max_i ||x_hat_i - x_i||_1 / delta` over
/// runs whose noise obeys `||z_i||_1 <= delta`.
pub fn empirical_naf(runs: &[RecoveryRun], delta: f64) -> Result<NafEstimate> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument("delta must be nonnegative".into()));
    }
    if let Some(run) = runs.iter().find(|r| r.noise_l1 > delta * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("noise {} exceeds delta {delta}", run.noise_l1)));
    }
    let max_error = runs.iter().map(|r| r.error_l1).fold(0.0, f64::max);
    let naf = (delta > 0.0).then(|| max_error / delta);
    Ok(NafEstimate { naf, max_error, delta, runs: runs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_weights() {
        let g = Grid::one_d(64, 4).unwrap();
        let p1 = make_adversarial_pair(&g, 1).unwrap();
        assert_eq!(p1.x.values()[0], 0.5);
        assert_eq!(p1.x_tilde.values()[1], 0.5);
        assert_eq!(p1.h.l1_norm(), 1.0);
        let p2 = make_adversarial_pair(&g, 2).unwrap();
        assert_eq!(&p2.x.values()[..4], &[0.125, 0.0, 0.375, 0.0]);
        assert_eq!(&p2.x_tilde.values()[..4], &[0.0, 0.375, 0.0, 0.125]);
        for r in 1..=6 {
            let p = make_adversarial_pair(&g, r).unwrap();
            assert_eq!(p.x.support().len(), r);
            assert_eq!(p.x_tilde.support().len(), r);
            assert!((p.h.l1_norm() - 1.0).abs() < 1e-12);
            assert!(p.x.is_nonneg() && p.x_tilde.is_nonneg());
        }
        assert!(make_adversarial_pair(&Grid::one_d(4, 1).unwrap(), 3).is_err());
    }

    #[test]
    fn finite_difference_basics() {
        assert!((finite_difference(|t| t, 0.3, 0.01, 1).unwrap() - 0.01).abs() < 1e-15);
        assert!(finite_difference(|t| 3.0 * t - 2.0, 0.7, 0.1, 2).unwrap().abs() < 1e-14);
        assert!(finite_difference(|t| t, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn closed_form_sine_moment_matches_quadrature() {
        for order in [1, 3, 5, 9] {
            let p = inner_poly(order);
            for t in [0.5, 1.0, 2.5, 7.3] {
                let w = 2.0 * PI * t;
                let a = sine_moment_closed(&p, w);
                let b = sine_moment_gl(&p, w, 64);
                assert!((a - b).abs() < 1e-12, "order {order} t {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn naf_contract() {
        assert!(empirical_naf(&[], 1.0).is_err());
        let runs = [RecoveryRun { error_l1: 0.0, noise_l1: 0.0 }];
        assert_eq!(empirical_naf(&runs, 0.0).unwrap().naf, None);
        let runs = [RecoveryRun { error_l1: 3.0, noise_l1: 0.5 }, RecoveryRun { error_l1: 1.0, noise_l1: 1.0 }];
        assert_eq!(empirical_naf(&runs, 1.0).unwrap().naf, Some(3.0));
        assert!(empirical_naf(&runs, 0.9).is_err());
    }
}
