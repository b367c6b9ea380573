//! Periodic sampling grids and the real-valued signals that live on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A periodic grid `{0, 1/N, ..., 1 - 1/N}^D` observed through a low-pass
/// band `|k| <= fc`.
///
/// The cutoff is stored and the observation count `n = 2 fc + 1` derived,
/// which avoids any parity ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    size: usize,
    fc: usize,
}

impl Grid {
    pub fn new(dim: usize, size: usize, fc: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if size < 2 || size % 2 != 0 {
            return Err(Error::InvalidGrid(format!("grid size must be even and >= 2, got {size}")));
        }
        if 2 * fc + 1 > size {
            return Err(Error::InvalidGrid(format!(
                "observation count 2*fc+1 = {} exceeds grid size {size}",
                2 * fc + 1
            )));
        }
        Ok(Self { dim, size, fc })
    }

    pub fn one_d(size: usize, fc: usize) -> Result<Self> {
        Self::new(1, size, fc)
    }

    pub fn two_d(size: usize, fc: usize) -> Result<Self> {
        Self::new(2, size, fc)
    }

    /// Grid with `N = srf * (2 fc + 1)`; fails unless that product is even.
    pub fn from_srf(dim: usize, fc: usize, srf: usize) -> Result<Self> {
        Self::new(dim, srf * (2 * fc + 1), fc)
    }

    /// Same grid with another cutoff.
    pub fn with_cutoff(&self, fc: usize) -> Result<Self> {
        Self::new(self.dim, self.size, fc)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis, `N`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn fc(&self) -> usize {
        self.fc
    }

    /// Observation count per axis, `n = 2 fc + 1`.
    pub fn n_obs(&self) -> usize {
        2 * self.fc + 1
    }

    /// `1/fc`; infinite for the degenerate averaging grid `fc = 0`.
    pub fn lambda_c(&self) -> f64 {
        1.0 / self.fc as f64
    }

    /// Super-resolution factor `N / n`.
    pub fn srf(&self) -> f64 {
        self.size as f64 / self.n_obs() as f64
    }

    /// Total number of samples, `N^D`.
    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequency index of DFT bin `j`, in the convention `k in [-N/2+1, N/2]`.
    pub fn freq_of_bin(&self, j: usize) -> i64 {
        let n = self.size as i64;
        let j = j as i64;
        if j > n / 2 {
            j - n
        } else {
            j
        }
    }

    /// DFT bin holding frequency `k`.
    pub fn bin_of_freq(&self, k: i64) -> usize {
        k.rem_euclid(self.size as i64) as usize
    }

    /// Frequencies `-N/2+1 ..= N/2` in ascending order.
    pub fn frequencies(&self) -> impl Iterator<Item = i64> {
        let half = (self.size / 2) as i64;
        (-half + 1)..=half
    }
}

/// Real samples on a [`Grid`], stored row-major for 2D (`values[i * N + j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSignal {
    grid: Grid,
    values: Vec<f64>,
}

impl GridSignal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Like [`GridSignal::new`] but additionally requires every entry `>= 0`.
    pub fn nonneg(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeEntry { index, value });
        }
        Self::new(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// Spikes at flat indices with the given amplitudes.
    pub fn spikes(grid: Grid, positions: &[usize], amplitudes: &[f64]) -> Result<Self> {
        if positions.len() != amplitudes.len() {
            return Err(Error::InvalidArgument("positions and amplitudes differ in length".into()));
        }
        let mut values = vec![0.0; grid.len()];
        for (&p, &a) in positions.iter().zip(amplitudes) {
            if p >= values.len() {
                return Err(Error::InvalidArgument(format!("position {p} outside grid")));
            }
            values[p] += a;
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_nonneg(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn dot(&self, other: &GridSignal) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn sub(&self, other: &GridSignal) -> Result<GridSignal> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridSignal { grid: self.grid, values })
    }

    pub fn add(&self, other: &GridSignal) -> Result<GridSignal> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(GridSignal { grid: self.grid, values })
    }

    pub fn scaled(&self, factor: f64) -> GridSignal {
        GridSignal { grid: self.grid, values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Cyclic shift by `shift` samples along every axis.
    pub fn shifted(&self, shift: usize) -> GridSignal {
        let n = self.grid.size();
        let mut values = vec![0.0; self.values.len()];
        match self.grid.dim() {
            1 => {
                for (l, v) in self.values.iter().enumerate() {
                    values[(l + shift) % n] = *v;
                }
            }
            _ => {
                for i in 0..n {
                    for j in 0..n {
                        values[((i + shift) % n) * n + (j + shift) % n] = self.values[i * n + j];
                    }
                }
            }
        }
        GridSignal { grid: self.grid, values }
    }

    /// Flat indices of nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect()
    }

    pub(crate) fn check_same_grid(&self, other: &GridSignal) -> Result<()> {
        self.check_grid(&other.grid)
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid != *grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, grid)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_invariants() {
        assert!(Grid::one_d(7, 2).is_err());
        assert!(Grid::one_d(8, 4).is_err());
        assert!(Grid::new(3, 8, 1).is_err());
        let g = Grid::one_d(92, 11).unwrap();
        assert_eq!(g.n_obs(), 23);
        assert!((g.srf() - 4.0).abs() < 1e-15);
        assert!((g.lambda_c() * g.fc() as f64 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn from_srf_matches_figure_grid() {
        let g = Grid::from_srf(2, 19, 10).unwrap();
        assert_eq!(g.size(), 390);
        assert!(Grid::from_srf(1, 1, 3).is_err());
    }

    #[test]
    fn frequency_convention() {
        let g = Grid::one_d(8, 2).unwrap();
        let ks: Vec<i64> = g.frequencies().collect();
        assert_eq!(ks, vec![-3, -2, -1, 0, 1, 2, 3, 4]);
        for k in g.frequencies() {
            assert_eq!(g.freq_of_bin(g.bin_of_freq(k)), k);
        }
    }

    #[test]
    fn nonneg_rejects_negative() {
        let g = Grid::one_d(4, 1).unwrap();
        assert!(matches!(
            GridSignal::nonneg(g, vec![1.0, -0.5, 0.0, 2.0]),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
        assert!(GridSignal::new(g, vec![0.0; 3]).is_err());
    }
}
