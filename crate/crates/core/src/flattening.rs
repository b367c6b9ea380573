//! Spectrum flattening for the triangular kernel.
//!
//! The filter `R` has spectrum `(fc+1)/(fc+1-|k|)` on `|k| <= alpha fc`, a
//! linear ramp down to zero at `|k| = fc`, and zero beyond, so `T = R Q_tri`
//! has a flat unit spectrum on `[-alpha fc, alpha fc]`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::spectral::FourierMultiplier;

#[derive(Debug, Clone, PartialEq)]
pub struct FlatteningFilter {
    grid: Grid,
    alpha: f64,
    flat_band: usize,
    a: f64,
    b: f64,
    multiplier: FourierMultiplier,
    one_norm: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.5..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in [1/2, 1), got {alpha}")))
    }
}

/// `c_alpha = 2 alpha + 2/(1-alpha) + 1.11/(2 (1-alpha)^2)`.
pub fn calpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let u = 1.0 - alpha;
    Ok(2.0 * alpha + 2.0 / u + 1.11 / (2.0 * u * u))
}

/// Largest cutoff `fc <= (N/srf - 1)/2` with `alpha fc` an integer.
pub fn sweep_cutoff(size: usize, srf: usize, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    if srf == 0 || size < srf {
        return Err(Error::InvalidGrid(format!("N = {size} and SRF = {srf} leave no observations")));
    }
    let top = (size / srf).saturating_sub(1) / 2;
    (1..=top)
        .rev()
        .find(|&fc| is_integral(alpha * fc as f64))
        .ok_or_else(|| Error::InvalidGrid(format!("no cutoff up to {top} makes alpha * fc integral for alpha = {alpha}")))
}

fn is_integral(v: f64) -> bool {
    (v - v.round()).abs() < 1e-9
}

impl FlatteningFilter {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `alpha fc`.
    pub fn flat_band(&self) -> usize {
        self.flat_band
    }

    /// Ramp slope and intercept: `r_k = (fc+1)(a|k| + b)` on the ramp.
    pub fn ramp(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn multiplier(&self) -> &FourierMultiplier {
        &self.multiplier
    }

    pub fn coeff(&self, k: i64) -> f64 {
        self.multiplier.coeff(k)
    }

    pub fn one_norm(&self) -> f64 {
        self.one_norm
    }

    pub fn calpha(&self) -> f64 {
        calpha(self.alpha).expect("validated at construction")
    }

    /// Spectrum of `T = R Q_tri`.
    pub fn flattened(&self) -> FourierMultiplier {
        self.multiplier.product(&FourierMultiplier::triangular(&self.grid)).expect("same grid")
    }

    /// `(fc+1)(a (alpha fc + 1) + b)` against `(fc+1)/(fc+1 - alpha fc)`: the
    /// ramp's first value next to the flat region's last.
    pub fn seam(&self) -> (f64, f64) {
        let fc = self.grid.fc() as f64;
        let af = self.flat_band as f64;
        ((fc + 1.0) * (self.a * (af + 1.0) + self.b), (fc + 1.0) / (fc + 1.0 - af))
    }

    pub fn to_json(&self) -> FilterJson {
        FilterJson {
            n: self.grid.size(),
            fc: self.grid.fc(),
            alpha: self.alpha,
            flat_band: self.flat_band,
            a: self.a,
            b: self.b,
            coefficients: self.multiplier.frequency_ordered(),
            one_norm: self.one_norm,
            calpha: self.calpha(),
        }
    }
}

/// On-disk form; coefficients by ascending frequency `-N/2+1 ..= N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub fc: usize,
    pub alpha: f64,
    pub flat_band: usize,
    pub a: f64,
    pub b: f64,
    pub coefficients: Vec<f64>,
    pub one_norm: f64,
    pub calpha: f64,
}

/// Builds the filter on a 1D grid. `alpha fc` must be an integer.
pub fn build_flattening_filter(grid: &Grid, alpha: f64) -> Result<FlatteningFilter> {
    check_alpha(alpha)?;
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("flattening filter is built on 1D grids".into()));
    }
    let fc = grid.fc();
    if fc == 0 {
        return Err(Error::InvalidGrid("flattening needs fc >= 1".into()));
    }
    let af = alpha * fc as f64;
    if !is_integral(af) {
        return Err(Error::InvalidArgument(format!("alpha * fc = {af} is not an integer")));
    }
    let flat_band = af.round() as usize;
    let fcf = fc as f64;
    let u = fcf * (1.0 - alpha);
    let a = -1.0 / ((u + 1.0) * u);
    let b = 1.0 / ((u + 1.0) * (1.0 - alpha));
    let multiplier = FourierMultiplier::from_fn(*grid, |k| {
        let m = k.unsigned_abs() as usize;
        if m <= flat_band {
            (fcf + 1.0) / (fcf + 1.0 - m as f64)
        } else if m <= fc {
            (fcf + 1.0) * (a * m as f64 + b)
        } else {
            0.0
        }
    });
    let one_norm = operator_one_norm(&multiplier);
    Ok(FlatteningFilter { grid: *grid, alpha, flat_band, a, b, multiplier, one_norm })
}

/// `l1 -> l1` norm of the circulant `F* diag(m) F`: the `l1` norm of its
/// first column.
pub fn operator_one_norm(m: &FourierMultiplier) -> f64 {
    m.impulse_response().iter().map(|v| v.abs()).sum()
}

/// Outcome of the second-difference bound
/// `|x~_k| <= A / (sqrt(N) (2 - 2 cos(2 pi k / N)))`, `k != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondDifferenceCheck {
    /// `sum_l |x_{l+1} - 2 x_l + x_{l-1}|`.
    pub a: f64,
    /// Largest `|x~_k| / bound_k`.
    pub max_ratio: f64,
    /// Smallest `bound_k - |x~_k|`.
    pub min_slack: f64,
    pub holds: bool,
}

/// Checks the bound for the periodic sequence `x`, with
/// `x~_k = N^{-1/2} sum_l x_l exp(i 2 pi k l / N)`.
pub fn second_difference_spectrum_bound(x: &[f64]) -> SecondDifferenceCheck {
    let n = x.len();
    let a: f64 = (0..n).map(|l| (x[(l + 1) % n] - 2.0 * x[l] + x[(l + n - 1) % n]).abs()).sum();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let sq = (n as f64).sqrt();
    let mut max_ratio: f64 = 0.0;
    let mut min_slack = f64::INFINITY;
    let mut holds = true;
    for (k, c) in buf.iter().enumerate().skip(1) {
        let mag = c.norm() / sq;
        let denom = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos();
        let bound = a / (sq * denom);
        // Room for FFT rounding on exactly-zero right-hand sides.
        let tol = 1e-12 * (bound + x.iter().map(|v| v.abs()).sum::<f64>() / sq);
        if mag > bound + tol {
            holds = false;
        }
        if bound > 0.0 {
            max_ratio = max_ratio.max(mag / bound);
        } else if mag > tol {
            max_ratio = f64::INFINITY;
        }
        min_slack = min_slack.min(bound - mag);
    }
    SecondDifferenceCheck { a, max_ratio, min_slack, holds }
}
