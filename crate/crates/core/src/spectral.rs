//! Fourier multipliers and the low-pass forward operators they define.
//!
//! All operators are `F* diag(m) F` with `F` the unitary DFT whose rows are
//! indexed by `k in [-N/2+1, N/2]`. In 2D the multiplier acts separably,
//! `m_{k1} m_{k2}`, which is the Kronecker form on column-stacked images.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSignal};

/// Imaginary residue tolerated after the inverse transform, relative to the
/// output scale.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Real spectrum `m_k`, `k in [-N/2+1, N/2]`, stored in DFT bin order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMultiplier {
    grid: Grid,
    bins: Vec<f64>,
}

impl FourierMultiplier {
    /// Builds a multiplier from a function of the signed frequency.
    pub fn from_fn(grid: Grid, f: impl Fn(i64) -> f64) -> Self {
        let n = grid.size();
        let bins = (0..n).map(|j| f(grid.freq_of_bin(j))).collect();
        Self { grid, bins }
    }

    /// Coefficients listed by ascending frequency `-N/2+1 ..= N/2`.
    pub fn from_frequency_ordered(grid: Grid, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != grid.size() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.size(),
                coeffs.len()
            )));
        }
        let offset = grid.size() as i64 / 2 - 1;
        Ok(Self::from_fn(grid, |k| coeffs[(k + offset) as usize]))
    }

    /// Ideal low-pass: `1` on `|k| <= fc`.
    pub fn flat(grid: &Grid) -> Self {
        let fc = grid.fc() as i64;
        Self::from_fn(*grid, |k| if k.abs() <= fc { 1.0 } else { 0.0 })
    }

    /// Triangle `1 - |k|/(fc+1)` on `|k| <= fc`; its impulse response is the
    /// Fejér kernel.
    pub fn triangular(grid: &Grid) -> Self {
        let fc = grid.fc() as i64;
        Self::from_fn(*grid, |k| {
            if k.abs() <= fc {
                1.0 - k.abs() as f64 / (fc + 1) as f64
            } else {
                0.0
            }
        })
    }

    /// All-pass spectrum.
    pub fn identity(grid: &Grid) -> Self {
        Self::from_fn(*grid, |_| 1.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeff(&self, k: i64) -> f64 {
        self.bins[self.grid.bin_of_freq(k)]
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn frequency_ordered(&self) -> Vec<f64> {
        self.grid.frequencies().map(|k| self.coeff(k)).collect()
    }

    /// Pointwise product of two spectra on the same grid.
    pub fn product(&self, other: &FourierMultiplier) -> Result<Self> {
        if self.grid.size() != other.grid.size() {
            return Err(Error::GridMismatch("multipliers on different grids".into()));
        }
        let bins = self.bins.iter().zip(&other.bins).map(|(a, b)| a * b).collect();
        Ok(Self { grid: self.grid, bins })
    }

    /// Largest `|k|` with a nonzero coefficient.
    pub fn bandwidth(&self) -> usize {
        self.grid
            .frequencies()
            .filter(|&k| self.coeff(k) != 0.0)
            .map(|k| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.bins.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `m_{-k} = m_k` for `|k| <= N/2 - 1`.
    pub fn is_symmetric(&self) -> bool {
        let half = self.grid.size() as i64 / 2;
        (1..half).all(|k| self.coeff(k) == self.coeff(-k))
    }

    /// First column of the circulant matrix `F* diag(m) F`:
    /// `c_l = (1/N) sum_k m_k e^{i 2 pi k l / N}`.
    pub fn impulse_response(&self) -> Vec<f64> {
        let n = self.grid.size();
        let mut buf: Vec<Complex64> = self.bins.iter().map(|&m| Complex64::new(m, 0.0)).collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }
}

/// Which point-spread function an operator models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[serde(rename = "flat_1d")]
    Flat1d,
    #[serde(rename = "tri_1d")]
    Tri1d,
    #[serde(rename = "flat_2d")]
    Flat2d,
    #[serde(rename = "tri_2d")]
    Tri2d,
    Custom,
}

impl OperatorKind {
    pub fn dim(&self) -> Option<usize> {
        match self {
            OperatorKind::Flat1d | OperatorKind::Tri1d => Some(1),
            OperatorKind::Flat2d | OperatorKind::Tri2d => Some(2),
            OperatorKind::Custom => None,
        }
    }

    pub fn is_triangular(&self) -> bool {
        matches!(self, OperatorKind::Tri1d | OperatorKind::Tri2d)
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat_1d" => Ok(OperatorKind::Flat1d),
            "tri_1d" => Ok(OperatorKind::Tri1d),
            "flat_2d" => Ok(OperatorKind::Flat2d),
            "tri_2d" => Ok(OperatorKind::Tri2d),
            "custom" => Ok(OperatorKind::Custom),
            other => Err(Error::InvalidArgument(format!("unknown operator kind {other:?}"))),
        }
    }
}

/// A convolution operator diagonalized by the DFT.
///
/// Immutable after construction; FFT plans are shared, so clones are cheap
/// and the operator may be used from several threads.
#[derive(Clone)]
pub struct ForwardOperator {
    kind: OperatorKind,
    grid: Grid,
    multiplier: FourierMultiplier,
    /// Column bins with a nonzero coefficient, in ascending bin order.
    band_bins: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for ForwardOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForwardOperator")
            .field("kind", &self.kind)
            .field("grid", &self.grid)
            .field("bandwidth", &self.multiplier.bandwidth())
            .finish()
    }
}

impl ForwardOperator {
    /// Standard operator of the given kind on `grid`.
    pub fn new(kind: OperatorKind, grid: Grid) -> Result<Self> {
        let multiplier = match kind {
            OperatorKind::Flat1d | OperatorKind::Flat2d => FourierMultiplier::flat(&grid),
            OperatorKind::Tri1d | OperatorKind::Tri2d => FourierMultiplier::triangular(&grid),
            OperatorKind::Custom => {
                return Err(Error::InvalidArgument("custom operators need a multiplier".into()))
            }
        };
        if kind.dim() != Some(grid.dim()) {
            return Err(Error::GridMismatch(format!(
                "{kind:?} needs a {}D grid, got {}D",
                kind.dim().unwrap_or(0),
                grid.dim()
            )));
        }
        Ok(Self::build(kind, grid, multiplier))
    }

    pub fn flat(grid: Grid) -> Result<Self> {
        Self::new(if grid.dim() == 1 { OperatorKind::Flat1d } else { OperatorKind::Flat2d }, grid)
    }

    pub fn triangular(grid: Grid) -> Result<Self> {
        Self::new(if grid.dim() == 1 { OperatorKind::Tri1d } else { OperatorKind::Tri2d }, grid)
    }

    /// Operator from an arbitrary spectrum; in 2D the spectrum acts per axis.
    pub fn custom(multiplier: FourierMultiplier) -> Self {
        let grid = *multiplier.grid();
        Self::build(OperatorKind::Custom, grid, multiplier)
    }

    fn build(kind: OperatorKind, grid: Grid, multiplier: FourierMultiplier) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.size();
        let band_bins = (0..n).filter(|&j| multiplier.bins[j] != 0.0).collect();
        Self {
            kind,
            grid,
            multiplier,
            band_bins,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn multiplier(&self) -> &FourierMultiplier {
        &self.multiplier
    }

    /// Spectral norm, `max_k |m_k|^D`.
    pub fn norm_bound(&self) -> f64 {
        self.multiplier.max_abs().powi(self.grid.dim() as i32)
    }

    /// `F* diag(m) F x`, separably per axis in 2D.
    pub fn apply(&self, x: &GridSignal) -> Result<GridSignal> {
        if *x.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "operator on {:?}, signal on {:?}",
                self.grid,
                x.grid()
            )));
        }
        let values = self.apply_slice(x.values())?;
        GridSignal::new(self.grid, values)
    }

    /// Adjoint. A real spectrum makes `F* diag(m) F` Hermitian, so this is
    /// [`apply`](Self::apply).
    pub fn adjoint_apply(&self, y: &GridSignal) -> Result<GridSignal> {
        self.apply(y)
    }

    /// Raw-slice form of [`apply`](Self::apply) used by the solver hot loop.
    pub fn apply_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.size();
        if x.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!("expected {} samples, got {}", self.grid.len(), x.len())));
        }
        let scale_in = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        match self.grid.dim() {
            1 => {
                self.forward.process(&mut buf);
                for (c, &m) in buf.iter_mut().zip(&self.multiplier.bins) {
                    *c *= m;
                }
                self.inverse.process(&mut buf);
            }
            _ => self.apply_2d(&mut buf, n),
        }
        let norm = 1.0 / self.grid.len() as f64;
        let mut max_im = 0.0f64;
        let mut max_re = 0.0f64;
        let out: Vec<f64> = buf
            .iter()
            .map(|c| {
                max_im = max_im.max(c.im.abs());
                max_re = max_re.max(c.re.abs());
                c.re * norm
            })
            .collect();
        let scale = (max_re * norm).max(scale_in * self.norm_bound()).max(f64::MIN_POSITIVE);
        if max_im * norm > IMAG_RESIDUE_TOL * scale {
            return Err(Error::InvariantViolation(format!(
                "imaginary residue {:.3e} exceeds tolerance at scale {:.3e}",
                max_im * norm,
                scale
            )));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator output".into()));
        }
        Ok(out)
    }

    fn apply_2d(&self, buf: &mut [Complex64], n: usize) {
        let m = &self.multiplier.bins;
        for row in buf.chunks_exact_mut(n) {
            self.forward.process(row);
        }
        // Only columns inside the band survive the multiplier.
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        let mut keep = vec![false; n];
        for &j in &self.band_bins {
            keep[j] = true;
            for i in 0..n {
                col[i] = buf[i * n + j];
            }
            self.forward.process(&mut col);
            for (i, c) in col.iter_mut().enumerate() {
                *c *= m[i] * m[j];
            }
            self.inverse.process(&mut col);
            for i in 0..n {
                buf[i * n + j] = col[i];
            }
        }
        for (j, kept) in keep.iter().enumerate() {
            if !kept {
                for i in 0..n {
                    buf[i * n + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
        for row in buf.chunks_exact_mut(n) {
            self.inverse.process(row);
        }
    }
}

/// Fejér kernel `(1/((1+fc) N)) (sin((1+fc) pi t) / sin(pi t))^2`, the
/// impulse response of the triangular operator at `t = m/N`.
pub fn fejer_kernel(t: f64, fc: usize, n: usize) -> f64 {
    let a = (fc + 1) as f64;
    let s = (PI * t).sin();
    if (t - t.round()).abs() < 1e-12 {
        return a / n as f64;
    }
    let r = (a * PI * t).sin() / s;
    r * r / (a * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_spectrum_examples() {
        let g = Grid::one_d(8, 2).unwrap();
        let m = FourierMultiplier::flat(&g);
        assert_eq!(m.frequency_ordered(), vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let g0 = Grid::one_d(8, 0).unwrap();
        let m0 = FourierMultiplier::flat(&g0);
        assert_eq!(m0.frequency_ordered(), vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let g92 = Grid::one_d(92, 11).unwrap();
        assert_eq!(FourierMultiplier::flat(&g92).bins().iter().filter(|&&v| v == 1.0).count(), 23);
    }

    #[test]
    fn triangular_spectrum_examples() {
        let g = Grid::one_d(8, 2).unwrap();
        let m = FourierMultiplier::triangular(&g);
        let expect = [1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0 / 3.0];
        for (k, e) in (-2..=2).zip(expect) {
            assert!((m.coeff(k) - e).abs() < 1e-15);
        }
        assert_eq!(m.coeff(3), 0.0);
        for fc in [1usize, 5, 17] {
            let g = Grid::one_d(64, fc).unwrap();
            assert_eq!(FourierMultiplier::triangular(&g).coeff(0), 1.0);
        }
    }

    #[test]
    fn triangular_impulse_response_is_fejer() {
        for (n, fc) in [(64usize, 7usize), (90, 11), (128, 31)] {
            let g = Grid::one_d(n, fc).unwrap();
            let ir = FourierMultiplier::triangular(&g).impulse_response();
            for (m, v) in ir.iter().enumerate() {
                let direct = fejer_kernel(m as f64 / n as f64, fc, n);
                assert!((v - direct).abs() < 1e-14, "m={m}: {v} vs {direct}");
            }
        }
    }

    #[test]
    fn apply_basic_identities() {
        let g = Grid::one_d(32, 5).unwrap();
        let flat = ForwardOperator::flat(g).unwrap();
        let ones = GridSignal::constant(g, 1.0);
        let out = flat.apply(&ones).unwrap();
        assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-13));

        // A band-limited signal passes through unchanged.
        let bl: Vec<f64> = (0..32)
            .map(|l| {
                let t = l as f64 / 32.0;
                0.3 + (2.0 * PI * 3.0 * t).cos() - 0.5 * (2.0 * PI * 5.0 * t).sin()
            })
            .collect();
        let x = GridSignal::new(g, bl.clone()).unwrap();
        let y = flat.apply(&x).unwrap();
        for (a, b) in y.values().iter().zip(&bl) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_rejects_grid_mismatch() {
        let op = ForwardOperator::flat(Grid::one_d(16, 3).unwrap()).unwrap();
        let x = GridSignal::zeros(Grid::one_d(32, 3).unwrap());
        assert!(matches!(op.apply(&x), Err(Error::GridMismatch(_))));
        assert!(matches!(op.adjoint_apply(&x), Err(Error::GridMismatch(_))));
        assert!(ForwardOperator::new(OperatorKind::Tri2d, Grid::one_d(16, 3).unwrap()).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let g = Grid::two_d(16, 3).unwrap();
        let op = ForwardOperator::triangular(g).unwrap();
        let z = op.adjoint_apply(&GridSignal::zeros(g)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn asymmetric_custom_is_rejected_by_residue_check() {
        let g = Grid::one_d(16, 3).unwrap();
        let m = FourierMultiplier::from_fn(g, |k| if k == 2 { 1.0 } else { 0.0 });
        let op = ForwardOperator::custom(m);
        let x = GridSignal::spikes(g, &[0], &[1.0]).unwrap();
        assert!(matches!(op.apply(&x), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn fejer_limit_at_zero() {
        assert!((fejer_kernel(0.0, 9, 100) - 0.1).abs() < 1e-15);
        assert!((fejer_kernel(1.0, 9, 100) - 0.1).abs() < 1e-15);
        let near = fejer_kernel(1e-9, 9, 100);
        assert!((near - 0.1).abs() < 1e-9);
    }
}
