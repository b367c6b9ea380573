//! Photon-counting (Poisson) observation noise.
//!
//! Sampling is deterministic per seed: a ChaCha8 stream drives sequential
//! inversion for means below [`INVERSION_LIMIT`] and Hörmann's transformed
//! rejection (PTRS) above it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GridSignal;

/// Means below this use inversion; larger means use PTRS.
pub const INVERSION_LIMIT: f64 = 30.0;

/// Entries of the mean image down to `-NEG_TOL * max|s|` are treated as 0;
/// FFT round-off leaves residues of this size on nonnegative outputs.
pub const NEG_TOL: f64 = 1e-9;

/// A noisy observation `s = Qx + z` together with its noise vector.
#[derive(Debug, Clone)]
pub struct NoisyObservation {
    pub observed: GridSignal,
    pub noise: GridSignal,
}

/// One Poisson draw with the given mean.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_LIMIT {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u64;
    // The tail beyond ~200 is below 1e-100 for mean < 30.
    while u > cdf && k < 1000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -mean + k * loglam - ln_factorial(k) {
            return k as u64;
        }
    }
}

/// `ln(k!)`: exact summation for small `k`, Stirling series beyond.
fn ln_factorial(k: f64) -> f64 {
    if k < 10.0 {
        return (2..=(k as u64)).map(|i| (i as f64).ln()).sum();
    }
    let x = k + 1.0;
    let x2 = 1.0 / (x * x);
    let series = [
        8.333333333333333e-02,
        -2.777777777777778e-03,
        7.936507936507937e-04,
        -5.952380952380952e-04,
        8.417508417508418e-04,
        -1.917526917526918e-03,
        6.410256410256410e-03,
        -2.955065359477124e-02,
        1.796443723688307e-01,
        -1.39243221690590e+00,
    ];
    let mut gl0 = series[9];
    for c in series[..9].iter().rev() {
        gl0 = gl0 * x2 + c;
    }
    gl0 / x + 0.5 * (2.0 * std::f64::consts::PI).ln() + (x - 0.5) * x.ln() - x
}

fn clamp_means(s: &GridSignal) -> Result<Vec<f64>> {
    let scale = s.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    s.values()
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if !value.is_finite() {
                Err(Error::NonFinite(format!("mean at index {index}")))
            } else if value >= 0.0 {
                Ok(value)
            } else if value >= -NEG_TOL * scale {
                Ok(0.0)
            } else {
                Err(Error::NegativeEntry { index, value })
            }
        })
        .collect()
}

/// Replaces every entry of `s` by a Poisson draw with that mean.
pub fn add_poisson_noise(s: &GridSignal, seed: u64) -> Result<NoisyObservation> {
    let means = clamp_means(s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<f64> = means.iter().map(|&m| sample_poisson(&mut rng, m) as f64).collect();
    finish(s, counts)
}

/// Photon-scaled shot noise for signed means: `z_i = (Pois(c |s_i|) - c |s_i|) / c`.
///
/// For nonnegative `s` this is `Pois(c s) / c`; larger `photons` gives
/// relatively smaller noise.
pub fn add_scaled_poisson_noise(s: &GridSignal, photons: f64, seed: u64) -> Result<NoisyObservation> {
    if !(photons > 0.0) || !photons.is_finite() {
        return Err(Error::InvalidArgument(format!("photon scale must be positive, got {photons}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let observed: Vec<f64> = s
        .values()
        .iter()
        .map(|&v| {
            let mean = photons * v.abs();
            let draw = sample_poisson(&mut rng, mean) as f64;
            v + (draw - mean) / photons
        })
        .collect();
    finish(s, observed)
}

/// Shot-noise-shaped perturbation rescaled to `||z||_1 = target_l1`.
///
/// The shape is that of [`add_scaled_poisson_noise`] with about `1e4`
/// photons at the brightest entry.
pub fn poisson_noise_at_level(s: &GridSignal, target_l1: f64, seed: u64) -> Result<NoisyObservation> {
    if !(target_l1 >= 0.0) || !target_l1.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {target_l1}")));
    }
    let peak = s.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || target_l1 == 0.0 {
        return finish(s, s.values().to_vec());
    }
    let raw = add_scaled_poisson_noise(s, 1e4 / peak, seed)?.noise;
    let norm = raw.l1_norm();
    if norm == 0.0 {
        return finish(s, s.values().to_vec());
    }
    let z = raw.scaled(target_l1 / norm);
    finish(s, s.add(&z)?.into_values())
}

fn finish(s: &GridSignal, observed: Vec<f64>) -> Result<NoisyObservation> {
    let observed = GridSignal::new(*s.grid(), observed)?;
    let noise = observed.sub(s)?;
    Ok(NoisyObservation { observed, noise })
}
