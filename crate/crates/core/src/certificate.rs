//! Dual certificates: nonnegative trigonometric polynomials bounded by one
//! that vanish on a support, and the stability bounds they yield.
//!
//! Polynomials are `q(t) = sum_k q_k exp(-i 2 pi k t)` with Hermitian
//! coefficients, so `q` is real. In 2D the phase is `k1 t1 + k2 t2` and the
//! coefficients are stored row-major over `(k1, k2)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rayleigh::{is_regular, partition_ordered, RayleighParams, SupportJson, SupportSet};

/// Tolerance on `|q|` and `|grad q|` at the roots.
pub const ROOT_TOL: f64 = 1e-8;
/// Tolerated undershoot below zero.
pub const NONNEG_TOL: f64 = 1e-9;
/// Separation, in units of `lambda_c / 2`, assumed by the 1D construction.
pub const DEFAULT_SEPARATION: f64 = 3.74;
/// Separation assumed by the 2D construction.
pub const DEFAULT_SEPARATION_2D: f64 = 4.76;
/// Growth radius used when measuring constants, in units of `lambda_c`.
pub const DEFAULT_C2: f64 = 0.17;
/// Reference lower bound on the quadratic growth constant.
pub const REFERENCE_C1: f64 = 0.029;
/// `4 / c1`.
pub const C3: f64 = 67.79;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateOptions {
    /// Separation (in `lambda_c / 2` units) used for partitions.
    pub separation: f64,
    /// Dense evaluation points per grid step in 1D.
    pub oversample: usize,
    /// Largest dense evaluation grid per axis in 2D.
    pub max_dense_2d: usize,
    /// Condition number above which the interpolation switches to least squares.
    pub cond_limit: f64,
    /// Growth radius for the measured constants, in units of `1/f`.
    pub c2: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self { separation: DEFAULT_SEPARATION, oversample: 16, max_dense_2d: 2048, cond_limit: 1e12, c2: DEFAULT_C2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Separated,
    Classical,
    Product,
    Separated2d,
}

/// Growth of `q` measured on the dense evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub c2: f64,
    /// Smallest `q(t) / (f^2 |t - t0|^2)` within `c2 / f` of a root.
    pub near: f64,
    /// Smallest `q` farther than `c2 / f` from every root.
    pub far: f64,
    /// `min(near, far / c2^2)`: the largest `c1` with `q >= phi`.
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    kind: CertificateKind,
    grid: Grid,
    band: usize,
    coeffs: Vec<Complex64>,
    roots: SupportSet,
    /// Values on the dense evaluation grid (row-major in 2D).
    dense: Vec<f64>,
    dense_size: usize,
    rho: f64,
    growth: Option<Growth>,
    /// Factor applied after construction to bring `max q` to at most one.
    scale: f64,
    used_least_squares: bool,
}

impl Certificate {
    pub fn kind(&self) -> CertificateKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn band_limit(&self) -> usize {
        self.band
    }

    /// Coefficient of `exp(-i 2 pi k t)` (1D).
    pub fn coeff(&self, k: i64) -> Complex64 {
        let f = self.band as i64;
        if self.grid.dim() != 1 || k.abs() > f {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(k + f) as usize]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn roots(&self) -> &SupportSet {
        &self.roots
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn growth(&self) -> Option<Growth> {
        self.growth
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn used_least_squares(&self) -> bool {
        self.used_least_squares
    }

    /// Dense samples `q(j / M)`, `M = dense_size()` per axis.
    pub fn dense_values(&self) -> &[f64] {
        &self.dense
    }

    pub fn dense_size(&self) -> usize {
        self.dense_size
    }

    pub fn dense_min(&self) -> f64 {
        self.dense.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dense_max(&self) -> f64 {
        self.dense.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `q` on the signal grid, `q(l / N)` (row-major in 2D).
    pub fn grid_values(&self) -> Vec<f64> {
        let n = self.grid.size();
        let step = self.dense_size / n;
        match self.grid.dim() {
            1 => (0..n).map(|l| self.dense[l * step]).collect(),
            _ => {
                let m = self.dense_size;
                (0..n * n).map(|f| self.dense[(f / n) * step * m + (f % n) * step]).collect()
            }
        }
    }

    /// Direct evaluation of `q(t)` (1D).
    pub fn eval(&self, t: f64) -> f64 {
        let f = self.band as i64;
        (-f..=f)
            .map(|k| (self.coeff(k) * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * t)).re)
            .sum()
    }

    /// First derivative `q'(t)` (1D).
    pub fn eval_derivative(&self, t: f64) -> f64 {
        let f = self.band as i64;
        (-f..=f)
            .map(|k| {
                let w = -2.0 * PI * k as f64;
                (self.coeff(k) * Complex64::new(0.0, w) * Complex64::from_polar(1.0, w * t)).re
            })
            .sum()
    }

    /// Direct evaluation of `q(t1, t2)` and its gradient (2D).
    pub fn eval_2d(&self, t: [f64; 2]) -> (f64, [f64; 2]) {
        let f = self.band as i64;
        let w = 2 * self.band + 1;
        let (mut v, mut g1, mut g2) = (0.0, 0.0, 0.0);
        for k1 in -f..=f {
            for k2 in -f..=f {
                let c = self.coeffs[(k1 + f) as usize * w + (k2 + f) as usize];
                let e = c * Complex64::from_polar(1.0, -2.0 * PI * (k1 as f64 * t[0] + k2 as f64 * t[1]));
                v += e.re;
                // d/dt of exp(-i w t) is -i w exp(-i w t), and Re(-i z) = Im(z).
                g1 += 2.0 * PI * k1 as f64 * e.im;
                g2 += 2.0 * PI * k2 as f64 * e.im;
            }
        }
        (v, [g1, g2])
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            kind: self.kind,
            n: self.grid.size(),
            d: self.grid.dim(),
            fc: self.grid.fc(),
            band_limit: self.band,
            coefficients: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
            roots: self.roots.to_json(),
            rho: self.rho,
            growth: self.growth,
            scale: self.scale,
            dense_size: self.dense_size,
            dense_min: self.dense_min(),
            dense_max: self.dense_max(),
            used_least_squares: self.used_least_squares,
        }
    }

    /// Dense evaluation as CSV: `t,q` in 1D; in 2D an `N x N` matrix of
    /// grid values.
    pub fn evaluation_csv(&self) -> String {
        let mut out = String::new();
        match self.grid.dim() {
            1 => {
                out.push_str("t,q\n");
                let m = self.dense_size as f64;
                for (j, v) in self.dense.iter().enumerate() {
                    out.push_str(&format!("{},{}\n", j as f64 / m, v));
                }
            }
            _ => {
                let n = self.grid.size();
                for row in self.grid_values().chunks(n) {
                    let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub kind: CertificateKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub fc: usize,
    pub band_limit: usize,
    /// `[re, im]` for `k = -f..=f` (row-major over `(k1, k2)` in 2D).
    pub coefficients: Vec<[f64; 2]>,
    pub roots: SupportJson,
    pub rho: f64,
    pub growth: Option<Growth>,
    pub scale: f64,
    pub dense_size: usize,
    pub dense_min: f64,
    pub dense_max: f64,
    pub used_least_squares: bool,
}

/// Interpolation kernel of band limit `f`: the normalized Fejér kernel of
/// order `floor(f/2)`, squared. `K(0) = 1`, `K >= 0`, even.
#[derive(Debug, Clone)]
pub struct InterpKernel {
    /// `kappa_k` for `k = 0..=2M`.
    coeffs: Vec<f64>,
}

impl InterpKernel {
    pub fn new(f: usize) -> Self {
        let m = (f / 2) as i64;
        let a = (m + 1) as f64;
        let tri = |k: i64| if k.abs() <= m { (a - k.abs() as f64) / (a * a) } else { 0.0 };
        let coeffs = (0..=2 * m).map(|k| (-m..=m).map(|j| tri(j) * tri(k - j)).sum()).collect();
        Self { coeffs }
    }

    pub fn band(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: i64) -> f64 {
        self.coeffs.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// `(K, K', K'')` at `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let mut out = [self.coeffs[0], 0.0, 0.0];
        for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
            let w = 2.0 * PI * k as f64;
            let (s, co) = (w * t).sin_cos();
            out[0] += 2.0 * c * co;
            out[1] -= 2.0 * c * w * s;
            out[2] -= 2.0 * c * w * w * co;
        }
        out
    }

    /// Closed form `[sin((M+1) pi t) / ((M+1) sin(pi t))]^4`.
    pub fn closed_form(&self, t: f64) -> f64 {
        let a = (self.band() / 2 + 1) as f64;
        let s = (PI * t).sin();
        if s.abs() < 1e-300 {
            return 1.0;
        }
        ((a * PI * t).sin() / (a * s)).powi(4)
    }
}

fn signed_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Solves `A x = b`, switching to truncated-SVD least squares when the
/// condition number exceeds `cond_limit`. Returns whether it switched.
fn solve_system(a: DMatrix<f64>, b: DVector<f64>, cond_limit: f64) -> Result<(DVector<f64>, bool)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) {
        return Err(Error::IllConditioned("interpolation matrix is zero".into()));
    }
    let cond = smax / smin;
    if cond <= cond_limit {
        if let Some(x) = a.lu().solve(&b) {
            return Ok((x, false));
        }
    }
    let x = svd
        .solve(&b, smax / cond_limit)
        .map_err(|e| Error::IllConditioned(format!("least-squares fallback failed: {e}")))?;
    Ok((x, true))
}

fn fft_forward(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// `q(j / m)` for `j < m` from 1D coefficients.
fn dense_1d(coeffs: &[Complex64], band: usize, m: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let f = band as i64;
    for k in -f..=f {
        buf[k.rem_euclid(m as i64) as usize] += coeffs[(k + f) as usize];
    }
    fft_forward(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

fn dense_2d(coeffs: &[Complex64], band: usize, m: usize) -> Vec<f64> {
    let f = band as i64;
    let w = 2 * band + 1;
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    for k1 in -f..=f {
        for k2 in -f..=f {
            let i = k1.rem_euclid(m as i64) as usize;
            let j = k2.rem_euclid(m as i64) as usize;
            buf[i * m + j] += coeffs[(k1 + f) as usize * w + (k2 + f) as usize];
        }
    }
    let plan = FftPlanner::new().plan_fft_forward(m);
    for row in buf.chunks_exact_mut(m) {
        plan.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = buf[i * m + j];
        }
        plan.process(&mut col);
        for i in 0..m {
            buf[i * m + j] = col[i];
        }
    }
    buf.iter().map(|c| c.re).collect()
}

fn dense_size_1d(grid: &Grid, opts: &CertificateOptions) -> usize {
    grid.size() * opts.oversample.max(1)
}

fn dense_size_2d(grid: &Grid, opts: &CertificateOptions) -> usize {
    let n = grid.size();
    let factor = (opts.max_dense_2d / n).clamp(1, opts.oversample.max(1));
    n * factor
}

/// Half the smallest value of `q` at grid points off the support.
fn rho_from_grid(values: &[f64], support: &[usize]) -> f64 {
    let mut on = vec![false; values.len()];
    for &s in support {
        on[s] = true;
    }
    let min = values.iter().zip(&on).filter(|(_, &o)| !o).map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        0.5 * min
    } else {
        0.5
    }
}

fn growth_1d(dense: &[f64], roots: &[f64], f: usize, c2: f64) -> Option<Growth> {
    if f == 0 {
        return None;
    }
    let m = dense.len() as f64;
    let ff = f as f64;
    let radius = c2 / ff;
    let (mut near, mut far) = (f64::INFINITY, f64::INFINITY);
    for (j, &v) in dense.iter().enumerate() {
        let t = j as f64 / m;
        let d = roots.iter().map(|&r| signed_gap(t, r).abs()).fold(f64::INFINITY, f64::min);
        if d <= radius {
            if d > 0.0 {
                near = near.min(v / (ff * ff * d * d));
            }
        } else {
            far = far.min(v);
        }
    }
    Some(finish_growth(near, far, c2))
}

fn finish_growth(near: f64, far: f64, c2: f64) -> Growth {
    let c1 = near.min(far / (c2 * c2));
    Growth { c2, near, far, c1 }
}

fn finish_1d(
    kind: CertificateKind,
    roots: &SupportSet,
    band: usize,
    mut coeffs: Vec<Complex64>,
    opts: &CertificateOptions,
    rescale: bool,
    used_least_squares: bool,
) -> Result<Certificate> {
    let grid = *roots.grid();
    let m = dense_size_1d(&grid, opts);
    if m <= 2 * band {
        return Err(Error::InvalidArgument(format!("dense grid {m} too coarse for band {band}")));
    }
    let mut dense = dense_1d(&coeffs, band, m);
    let mut scale = 1.0;
    let max = dense.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if rescale && max > 1.0 {
        scale = 1.0 / max;
        coeffs.iter_mut().for_each(|c| *c *= scale);
        dense.iter_mut().for_each(|v| *v *= scale);
    }
    let positions: Vec<f64> = roots.positions().iter().map(|p| p[0]).collect();
    let cert = Certificate {
        kind,
        grid,
        band,
        coeffs,
        roots: roots.clone(),
        rho: 0.0,
        growth: None,
        dense,
        dense_size: m,
        scale,
        used_least_squares,
    };
    verify_1d(&cert, &positions)?;
    let rho = rho_from_grid(&cert.grid_values(), &roots.indices());
    let growth = growth_1d(&cert.dense, &positions, band, opts.c2);
    Ok(Certificate { rho, growth, ..cert })
}

fn verify_1d(cert: &Certificate, roots: &[f64]) -> Result<()> {
    let min = cert.dense_min();
    let max = cert.dense_max();
    if min < -NONNEG_TOL {
        return Err(Error::InvariantViolation(format!("certificate dips to {min:.3e} below zero")));
    }
    if max > 1.0 + 1e-12 {
        return Err(Error::InvariantViolation(format!("certificate reaches {max:.6} above one")));
    }
    for &t in roots {
        let v = cert.eval(t);
        if v.abs() > ROOT_TOL {
            return Err(Error::InvariantViolation(format!("q({t}) = {v:.3e} at a root")));
        }
    }
    Ok(())
}

/// Builds `q = 1 - sum_j [a_j K(t - t_j) + b_j K'(t - t_j)]` with value and
/// slope zero at every root, `K` the squared-Fejér kernel of band `f`.
///
/// Fails if the interpolant leaves `[0, 1]` after scaling by `1 / max q`,
/// or misses a root by more than [`ROOT_TOL`].
pub fn build_separated_certificate(t: &SupportSet, f: usize) -> Result<Certificate> {
    build_separated_certificate_with(t, f, &CertificateOptions::default())
}

pub fn build_separated_certificate_with(t: &SupportSet, f: usize, opts: &CertificateOptions) -> Result<Certificate> {
    let grid = *t.grid();
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("use build_2d_certificate for 2D supports".into()));
    }
    if f > grid.fc() {
        return Err(Error::InvalidArgument(format!("band limit {f} exceeds the grid cutoff {}", grid.fc())));
    }
    let bw = 2 * f + 1;
    if t.is_empty() {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); bw];
        coeffs[f] = Complex64::new(1.0, 0.0);
        return finish_1d(CertificateKind::Separated, t, f, coeffs, opts, false, false);
    }
    if f < 2 {
        return Err(Error::InvalidArgument("band limit must be at least 2 to place roots".into()));
    }
    let kernel = InterpKernel::new(f);
    let pos: Vec<f64> = t.positions().iter().map(|p| p[0]).collect();
    let s = pos.len();
    // Slopes are scaled by sqrt(-K''(0)) so both blocks are O(1).
    let w = (-kernel.eval(0.0)[2]).sqrt();
    let mut a = DMatrix::<f64>::zeros(2 * s, 2 * s);
    let mut b = DVector::<f64>::zeros(2 * s);
    for i in 0..s {
        b[i] = 1.0;
        for j in 0..s {
            let [k0, k1, k2] = kernel.eval(signed_gap(pos[i], pos[j]));
            a[(i, j)] = k0;
            a[(i, s + j)] = k1 / w;
            a[(s + i, j)] = k1 / w;
            a[(s + i, s + j)] = k2 / (w * w);
        }
    }
    let (sol, lsq) = solve_system(a, b, opts.cond_limit)?;
    let fi = f as i64;
    let coeffs = (-fi..=fi)
        .map(|k| {
            let kap = kernel.coeff(k);
            let mut c = Complex64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0);
            if kap != 0.0 {
                let wk = 2.0 * PI * k as f64;
                for j in 0..s {
                    let phase = Complex64::from_polar(1.0, wk * pos[j]);
                    let slope = Complex64::new(0.0, -wk) * (sol[s + j] / w);
                    c -= kap * phase * (sol[j] + slope);
                }
            }
            c
        })
        .collect();
    finish_1d(CertificateKind::Separated, t, f, coeffs, opts, true, lsq)
}

/// `prod_{t0} (1/2)[cos(2 pi (t - t0) + pi) + 1] = prod sin^2(pi (t - t0))`.
pub fn classical_certificate(t: &SupportSet) -> Result<Certificate> {
    let grid = *t.grid();
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("classical certificate is 1D".into()));
    }
    let fc = grid.fc();
    if 2 * t.len() >= 2 * fc + 1 {
        return Err(Error::InvalidArgument(format!("{} roots need band limit above {fc}", t.len())));
    }
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for p in t.positions() {
        let e = Complex64::from_polar(0.25, 2.0 * PI * p[0]);
        coeffs = convolve(&coeffs, &[-e.conj(), Complex64::new(0.5, 0.0), -e]);
    }
    finish_1d(CertificateKind::Classical, t, t.len(), coeffs, &CertificateOptions::default(), false, false)
}

/// Linear convolution of centred coefficient arrays of odd length.
fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Product certificate for `T` in `R(separation * r, r)`.
#[derive(Debug, Clone)]
pub struct ProductCertificate {
    pub certificate: Certificate,
    pub factors: Vec<Certificate>,
    pub subsets: Vec<SupportSet>,
    /// Band limit of each factor, `floor(fc / r)`.
    pub factor_band: usize,
    /// `(1/2) c1^r f_i^{2r} / N^{2r}` with the smallest measured factor `c1`.
    pub rho_prediction: Option<f64>,
}

/// `q = prod_i q_i`, each `q_i` a separated certificate of band
/// `floor(fc / r)` vanishing on the `i`-th subset.
///
/// Subsets are every `r`-th point by rank. When the ranks wrap badly
/// (`|T|` not a multiple of `r`), the membership witness is used instead.
pub fn product_certificate(t: &SupportSet, r: usize) -> Result<ProductCertificate> {
    product_certificate_with(t, r, &CertificateOptions::default())
}

pub fn product_certificate_with(t: &SupportSet, r: usize, opts: &CertificateOptions) -> Result<ProductCertificate> {
    let grid = *t.grid();
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    let fi = grid.fc() / r;
    if fi < 2 && !t.is_empty() {
        return Err(Error::InvalidArgument(format!("cutoff {} too small for r = {r}", grid.fc())));
    }
    let factor_grid = grid.with_cutoff(fi)?;
    let tf = t.with_grid(factor_grid)?;
    let sep = RayleighParams::new(opts.separation, 1, factor_grid)?;
    let mut subsets = partition_ordered(&tf, r)?;
    let separated = |parts: &[SupportSet]| -> Result<bool> {
        for p in parts {
            if !is_regular(p, &sep)?.regular {
                return Ok(false);
            }
        }
        Ok(true)
    };
    if !separated(&subsets)? {
        let class = RayleighParams::new(opts.separation, r, factor_grid)?;
        if let Some(w) = is_regular(&tf, &class)?.partition {
            subsets = w;
        }
    }
    let factors = subsets
        .iter()
        .map(|s| build_separated_certificate_with(s, fi, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for q in &factors {
        coeffs = convolve(&coeffs, q.coefficients());
    }
    let band = fi * r;
    let certificate = finish_1d(CertificateKind::Product, t, band, coeffs, opts, false, factors.iter().any(|q| q.used_least_squares))?;
    let c1 = factors.iter().filter(|q| !q.roots.is_empty()).filter_map(|q| q.growth.map(|g| g.c1)).fold(None, |m: Option<f64>, v| {
        Some(m.map_or(v, |m| m.min(v)))
    });
    let n = grid.size() as f64;
    let rho_prediction = c1.map(|c| 0.5 * c.powi(r as i32) * (fi as f64 / n).powi(2 * r as i32));
    Ok(ProductCertificate { certificate, factors, subsets, factor_band: fi, rho_prediction })
}

/// `2 (1 - rho) / rho * ||z||_1`.
pub fn error_bound_from_certificate(cert: &Certificate, z_l1: f64) -> Result<f64> {
    error_bound(cert.rho, z_l1)
}

pub fn error_bound(rho: f64, z_l1: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 0.5) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1/2], got {rho}")));
    }
    if z_l1 < 0.0 {
        return Err(Error::InvalidArgument("noise norm must be nonnegative".into()));
    }
    Ok(2.0 * (1.0 - rho) / rho * z_l1)
}

/// `C1(r) = 4 c3^r r^{2r}`.
pub fn theoretical_constant_c1(r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    let rf = r as f64;
    Ok(4.0 * C3.powi(r as i32) * rf.powf(2.0 * rf))
}

/// `C1(r) c_alpha alpha^{-2r}`.
pub fn c1_alpha(r: usize, alpha: f64) -> Result<f64> {
    let ca = crate::flattening::calpha(alpha)?;
    Ok(theoretical_constant_c1(r)? * ca * alpha.powi(-2 * r as i32))
}

fn growth_2d(dense: &[f64], m: usize, roots: &[[f64; 2]], f: usize, c2: f64) -> Option<Growth> {
    if f == 0 {
        return None;
    }
    let ff = f as f64;
    let radius = c2 / ff;
    let (mut near, mut far) = (f64::INFINITY, f64::INFINITY);
    for i in 0..m {
        let t1 = i as f64 / m as f64;
        for j in 0..m {
            let t2 = j as f64 / m as f64;
            let v = dense[i * m + j];
            let mut best_inf = f64::INFINITY;
            let mut best_l2 = f64::INFINITY;
            for r in roots {
                let d1 = signed_gap(t1, r[0]).abs();
                let d2 = signed_gap(t2, r[1]).abs();
                let dinf = d1.max(d2);
                if dinf < best_inf {
                    best_inf = dinf;
                    best_l2 = d1 * d1 + d2 * d2;
                }
            }
            if best_inf <= radius {
                if best_l2 > 0.0 {
                    near = near.min(v / (ff * ff * best_l2));
                }
            } else {
                far = far.min(v);
            }
        }
    }
    Some(finish_growth(near, far, c2))
}

/// 2D analogue of [`build_separated_certificate`] with the tensor kernel
/// `K(t1) K(t2)`; value and both partial derivatives vanish on `T`.
pub fn build_2d_certificate(t: &SupportSet, f: usize) -> Result<Certificate> {
    build_2d_certificate_with(t, f, &CertificateOptions { separation: DEFAULT_SEPARATION_2D, ..Default::default() })
}

pub fn build_2d_certificate_with(t: &SupportSet, f: usize, opts: &CertificateOptions) -> Result<Certificate> {
    let grid = *t.grid();
    if grid.dim() != 2 {
        return Err(Error::InvalidArgument("2D certificate needs a 2D support".into()));
    }
    if f > grid.fc() {
        return Err(Error::InvalidArgument(format!("band limit {f} exceeds the grid cutoff {}", grid.fc())));
    }
    let bw = 2 * f + 1;
    let fi = f as i64;
    let mut lsq = false;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); bw * bw];
    coeffs[f * bw + f] = Complex64::new(1.0, 0.0);
    let pos = t.positions();
    if !t.is_empty() {
        if f < 2 {
            return Err(Error::InvalidArgument("band limit must be at least 2 to place roots".into()));
        }
        let kernel = InterpKernel::new(f);
        let s = pos.len();
        let w = (-kernel.eval(0.0)[2]).sqrt();
        let mut a = DMatrix::<f64>::zeros(3 * s, 3 * s);
        let mut b = DVector::<f64>::zeros(3 * s);
        for i in 0..s {
            b[i] = 1.0;
            for j in 0..s {
                let [x0, x1, x2] = kernel.eval(signed_gap(pos[i][0], pos[j][0]));
                let [y0, y1, y2] = kernel.eval(signed_gap(pos[i][1], pos[j][1]));
                // Rows: value, d/dt1, d/dt2. Columns: alpha, beta1, beta2.
                let rows = [[x0 * y0, x1 * y0, x0 * y1], [x1 * y0, x2 * y0, x1 * y1], [x0 * y1, x1 * y1, x0 * y2]];
                let rs = [1.0, w, w];
                for (ri, row) in rows.iter().enumerate() {
                    for (ci, v) in row.iter().enumerate() {
                        a[(ri * s + i, ci * s + j)] = v / (rs[ri] * rs[ci]);
                    }
                }
            }
        }
        let (sol, used) = solve_system(a, b, opts.cond_limit)?;
        lsq = used;
        for k1 in -fi..=fi {
            let kx = kernel.coeff(k1);
            if kx == 0.0 {
                continue;
            }
            for k2 in -fi..=fi {
                let ky = kernel.coeff(k2);
                if ky == 0.0 {
                    continue;
                }
                let w1 = 2.0 * PI * k1 as f64;
                let w2 = 2.0 * PI * k2 as f64;
                let mut c = Complex64::new(0.0, 0.0);
                for j in 0..s {
                    let phase = Complex64::from_polar(1.0, w1 * pos[j][0] + w2 * pos[j][1]);
                    let amp = Complex64::new(sol[j], 0.0)
                        + Complex64::new(0.0, -w1) * (sol[s + j] / w)
                        + Complex64::new(0.0, -w2) * (sol[2 * s + j] / w);
                    c += phase * amp;
                }
                coeffs[(k1 + fi) as usize * bw + (k2 + fi) as usize] -= kx * ky * c;
            }
        }
    }
    let m = dense_size_2d(&grid, opts);
    if m <= 2 * f {
        return Err(Error::InvalidArgument(format!("dense grid {m} too coarse for band {f}")));
    }
    let mut dense = dense_2d(&coeffs, f, m);
    let max = dense.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut scale = 1.0;
    if max > 1.0 {
        scale = 1.0 / max;
        coeffs.iter_mut().for_each(|c| *c *= scale);
        dense.iter_mut().for_each(|v| *v *= scale);
    }
    let cert = Certificate {
        kind: CertificateKind::Separated2d,
        grid,
        band: f,
        coeffs,
        roots: t.clone(),
        dense,
        dense_size: m,
        rho: 0.0,
        growth: None,
        scale,
        used_least_squares: lsq,
    };
    let min = cert.dense_min();
    if min < -NONNEG_TOL {
        return Err(Error::InvariantViolation(format!("2D certificate dips to {min:.3e} below zero")));
    }
    for p in &pos {
        let (v, g) = cert.eval_2d(*p);
        let gn = g[0].abs().max(g[1].abs()) / (2.0 * PI * f.max(1) as f64);
        if v.abs() > ROOT_TOL || gn > ROOT_TOL {
            return Err(Error::InvariantViolation(format!("root {p:?}: q = {v:.3e}, scaled gradient {gn:.3e}")));
        }
    }
    let rho = rho_from_grid(&cert.grid_values(), &t.flat_indices());
    let growth = growth_2d(&cert.dense, m, &pos, f, opts.c2);
    Ok(Certificate { rho, growth, ..cert })
}
