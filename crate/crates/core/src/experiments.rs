//! Reproducible experiment drivers built from the other modules: random
//! recovery trials with certificate-based error bounds, and the five-region
//! 2D microscopy scene with per-region detection scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{
    build_separated_certificate, error_bound, product_certificate, theoretical_constant_c1, c1_alpha,
};
use crate::error::{Error, Result};
use crate::flattening::build_flattening_filter;
use crate::grid::{Grid, GridSignal};
use crate::noise::{add_poisson_noise, poisson_noise_at_level};
use crate::rayleigh::{sample_support, sample_support_in, GridBox, RayleighParams, SupportSet};
use crate::solver::{solve, SolveResult, SolverConfig};
use crate::spectral::{ForwardOperator, OperatorKind};

/// Random 1D recovery instance: support in `R(separation * r, r)`,
/// amplitudes uniform in `[amp_min, amp_max]`, optional noise scaled to
/// `||z||_1 = noise_level * ||x||_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSpec {
    pub kind: OperatorKind,
    pub fc: usize,
    pub srf: usize,
    pub r: usize,
    /// Per-subset separation in `lambda_c / 2` units; the class is
    /// `R(separation * r, r)`.
    pub separation: f64,
    /// Number of spikes; defaults to a third of the packing bound.
    pub count: Option<usize>,
    pub amp_min: f64,
    pub amp_max: f64,
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            kind: OperatorKind::Flat1d,
            fc: 128,
            srf: 4,
            r: 1,
            separation: 3.74,
            count: None,
            amp_min: 1.0,
            amp_max: 2.0,
            noise_level: 0.0,
            seed: 0,
        }
    }
}

impl TrialSpec {
    pub fn grid(&self) -> Result<Grid> {
        let dim = self.kind.dim().ok_or_else(|| Error::InvalidArgument("trials need a named operator".into()))?;
        if dim != 1 {
            return Err(Error::InvalidArgument("recovery trials are 1D".into()));
        }
        Grid::from_srf(1, self.fc, self.srf)
    }

    pub fn class(&self) -> Result<RayleighParams> {
        RayleighParams::new(self.separation * self.r as f64, self.r, self.grid()?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp_min > 0.0 && self.amp_max >= self.amp_min && self.amp_max.is_finite()) {
            return Err(Error::InvalidArgument("amplitudes need 0 < amp_min <= amp_max".into()));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::InvalidArgument("noise_level must be nonnegative".into()));
        }
        self.class().map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub spec: TrialSpec,
    pub support: SupportSet,
    pub x: GridSignal,
    pub clean: GridSignal,
    pub observed: GridSignal,
    pub noise_l1: f64,
    pub solve: SolveResult,
    pub error_l1: f64,
}

impl TrialOutcome {
    pub fn relative_error(&self) -> f64 {
        self.error_l1 / self.x.l1_norm()
    }

    /// `x_hat - x`.
    pub fn difference(&self) -> GridSignal {
        self.solve.x_hat.sub(&self.x).expect("same grid")
    }
}

/// Draws the instance of `spec` without solving it.
pub fn trial_instance(spec: &TrialSpec) -> Result<(ForwardOperator, SupportSet, GridSignal, GridSignal, GridSignal)> {
    spec.validate()?;
    let grid = spec.grid()?;
    let class = spec.class()?;
    let count = spec.count.unwrap_or_else(|| (class.packing_bound() / 3).max(1));
    let support = sample_support(&class, count, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let amps: Vec<f64> = (0..support.len()).map(|_| rng.random_range(spec.amp_min..=spec.amp_max)).collect();
    let x = GridSignal::spikes(grid, &support.indices(), &amps)?;
    let op = ForwardOperator::new(spec.kind, grid)?;
    let clean = op.apply(&x)?;
    let observed = if spec.noise_level > 0.0 {
        poisson_noise_at_level(&clean, spec.noise_level * x.l1_norm(), spec.seed.wrapping_add(1))?.observed
    } else {
        clean.clone()
    };
    Ok((op, support, x, clean, observed))
}

pub fn run_trial(spec: &TrialSpec, cfg: &SolverConfig) -> Result<TrialOutcome> {
    let (op, support, x, clean, observed) = trial_instance(spec)?;
    let noise_l1 = observed.sub(&clean)?.l1_norm();
    let solve = solve(&op, &observed, cfg)?;
    let error_l1 = solve.x_hat.sub(&x)?.l1_norm();
    Ok(TrialOutcome { spec: spec.clone(), support, x, clean, observed, noise_l1, solve, error_l1 })
}

/// Rounding slack, relative to `||x||_1`, allowed when comparing an observed
/// error against a bound (the noiseless bound is exactly zero).
pub const BOUND_SLACK: f64 = 1e-9;

/// Certificate-based bound for one finished trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBound {
    /// `{l : h_l < 0}` for `h = x_hat - x`.
    pub negative_set: Vec<usize>,
    pub rho: f64,
    /// `||R||_{1,op}` for flattened (triangular) runs, 1 otherwise.
    pub filter_norm: f64,
    pub bound: f64,
    pub error_l1: f64,
    pub holds: bool,
}

/// Error bound `2 (1 - rho) ||R|| / rho * ||z||_1` from a certificate
/// vanishing on the negative part of `x_hat - x`: band `fc` for the flat
/// kernel; band `alpha fc` plus the flattening filter `R` for the
/// triangular one.
pub fn certified_bound(outcome: &TrialOutcome, alpha: f64) -> Result<CertifiedBound> {
    let grid = *outcome.x.grid();
    let h = outcome.difference();
    let negative_set: Vec<usize> = h.values().iter().enumerate().filter(|(_, v)| **v < 0.0).map(|(i, _)| i).collect();
    let (band, filter_norm) = match outcome.spec.kind {
        OperatorKind::Flat1d => (grid.fc(), 1.0),
        OperatorKind::Tri1d => {
            let filter = build_flattening_filter(&grid, alpha)?;
            (filter.flat_band(), filter.one_norm())
        }
        other => return Err(Error::InvalidArgument(format!("no 1D certificate bound for {other:?}"))),
    };
    let cert_grid = grid.with_cutoff(band)?;
    let t = SupportSet::one_d(cert_grid, &negative_set)?;
    let r = outcome.spec.r;
    let cert = if r == 1 { build_separated_certificate(&t, band)? } else { product_certificate(&t, r)?.certificate };
    let bound = error_bound(cert.rho(), outcome.noise_l1)? * filter_norm;
    Ok(CertifiedBound {
        negative_set,
        rho: cert.rho(),
        filter_norm,
        bound,
        error_l1: outcome.error_l1,
        holds: outcome.error_l1 <= bound + BOUND_SLACK * outcome.x.l1_norm(),
    })
}

/// Worst-case constant times `(N/(n-1))^{2r}`: `C1(r)` for the flat kernel,
/// `C1(r, alpha)` for the triangular one.
pub fn stability_constant(kind: OperatorKind, grid: &Grid, r: usize, alpha: f64) -> Result<f64> {
    let c = match kind {
        OperatorKind::Flat1d | OperatorKind::Flat2d => theoretical_constant_c1(r)?,
        OperatorKind::Tri1d | OperatorKind::Tri2d => c1_alpha(r, alpha)?,
        OperatorKind::Custom => return Err(Error::InvalidArgument("no constant for custom operators".into())),
    };
    let ratio = grid.size() as f64 / (grid.n_obs() - 1) as f64;
    Ok(c * ratio.powi(2 * r as i32))
}

/// Grid and solver settings for the five-region scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenePreset {
    pub fc: usize,
    pub size: usize,
    pub amplitude: f64,
    pub final_iter: usize,
    /// Target fraction of each box's packing capacity; lowered in steps of
    /// 0.05 until random sequential addition succeeds.
    pub fill: f64,
}

impl Default for ScenePreset {
    fn default() -> Self {
        Self::full()
    }
}

impl ScenePreset {
    /// `fc = 19`, `N = 390`, magnitudes `1e4`, 15000 final iterations.
    pub fn full() -> Self {
        Self { fc: 19, size: 390, amplitude: 1e4, final_iter: 15000, fill: 1.0 }
    }

    /// `fc = 10`, `N = 200`, 3000 final iterations.
    pub fn reduced() -> Self {
        Self { fc: 10, size: 200, amplitude: 1e4, final_iter: 3000, fill: 1.0 }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::two_d(self.size, self.fc)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { final_iter: self.final_iter, ..SolverConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: &'static str,
    /// Class `R_2(d, r)` the points were drawn from (`None` for the cluster).
    pub class: Option<(f64, usize)>,
    /// Scoring area; the areas of the five regions tile the image.
    pub area: RegionArea,
    pub support: SupportSet,
}

/// A box, optionally with a second box cut out of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionArea {
    pub outer: GridBox,
    pub hole: Option<GridBox>,
}

impl RegionArea {
    pub fn contains(&self, p: [usize; 2]) -> bool {
        self.outer.contains(p) && !self.hole.is_some_and(|h| h.contains(p))
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub grid: Grid,
    pub kind: OperatorKind,
    pub amplitude: f64,
    pub x: GridSignal,
    pub regions: Vec<Region>,
}

impl Scene {
    pub fn support(&self) -> Vec<[usize; 2]> {
        let mut pts: Vec<[usize; 2]> = self.regions.iter().flat_map(|r| r.support.points().to_vec()).collect();
        pts.sort_unstable();
        pts
    }
}

fn bx(lo: [usize; 2], hi: [usize; 2]) -> GridBox {
    GridBox { lo, hi }
}

/// Points that fit in a box with sup-norm spacing `m`, times `r`.
fn box_capacity(b: &GridBox, m: usize, r: usize) -> usize {
    let per = |a: usize| (b.hi[a] - b.lo[a] - 1) / m + 1;
    r * per(0) * per(1)
}

/// The five-region microscopy scene: quadrants drawn from `R_2(4.28, 1)`
/// (top left), `R_2(2.14, 1)` (top right), `R_2(4.28, 2)` (bottom left),
/// `R_2(2.24, 2)` (bottom right, towards the centre) and three spikes inside
/// one Nyquist cell near the bottom-right corner.
pub fn figure4_scene(preset: &ScenePreset, seed: u64) -> Result<Scene> {
    let grid = preset.grid()?;
    let n = grid.size();
    let h = n / 2;
    let cell = n.div_ceil(2 * grid.fc().max(1));
    let margin = matching_radius(&grid) + 1;
    let corner = 4 * cell;
    if corner + 2 * margin >= h {
        return Err(Error::InvalidGrid("grid too small for the five-region layout".into()));
    }
    let quad = |r0: usize, c0: usize| bx([r0, c0], [r0 + h, c0 + h]);
    let inner = |b: GridBox| bx([b.lo[0] + margin, b.lo[1] + margin], [b.hi[0] - margin, b.hi[1] - margin]);
    let corner_box = bx([n - corner, n - corner], [n, n]);
    let plans: [(&str, f64, usize, GridBox, GridBox, Option<GridBox>); 4] = [
        ("i", 4.28, 1, quad(0, 0), inner(quad(0, 0)), None),
        ("ii", 2.14, 1, quad(0, h), inner(quad(0, h)), None),
        ("iii", 4.28, 2, quad(h, 0), inner(quad(h, 0)), None),
        (
            "iv",
            2.24,
            2,
            quad(h, h),
            bx([h + margin, h + margin], [n - margin, n - corner - margin]),
            Some(corner_box),
        ),
    ];
    let mut regions = Vec::new();
    for (k, (name, d, r, outer, sample_box, hole)) in plans.into_iter().enumerate() {
        let class = RayleighParams::new(d, r, grid)?;
        let capacity = box_capacity(&sample_box, class.min_steps(), r) as f64;
        let region_seed = seed.wrapping_mul(31).wrapping_add(k as u64);
        let mut fill = preset.fill;
        let support = loop {
            let count = ((capacity * fill).round() as usize).max(1);
            match sample_support_in(&class, count, sample_box, region_seed) {
                Ok(t) => break t,
                Err(Error::Infeasible(_)) if count > 1 => fill -= 0.05,
                Err(e) => return Err(e),
            }
        };
        regions.push(Region { name, class: Some((d, r)), area: RegionArea { outer, hole }, support });
    }
    let c = n - corner / 2;
    let offsets: [(isize, isize); 3] = [(-2, -2), (2, -1), (-1, 2)];
    let cluster: Vec<(usize, usize)> =
        offsets.iter().map(|&(a, b)| ((c as isize + a) as usize, (c as isize + b) as usize)).collect();
    regions.push(Region {
        name: "v",
        class: None,
        area: RegionArea { outer: corner_box, hole: None },
        support: SupportSet::two_d(grid, &cluster)?,
    });
    let mut values = vec![0.0; grid.len()];
    for region in &regions {
        for f in region.support.flat_indices() {
            values[f] = preset.amplitude;
        }
    }
    let x = GridSignal::new(grid, values)?;
    Ok(Scene { grid, kind: OperatorKind::Tri2d, amplitude: preset.amplitude, x, regions })
}

/// `ceil(N / (2n))` grid steps.
pub fn matching_radius(grid: &Grid) -> usize {
    grid.size().div_ceil(2 * grid.n_obs())
}

/// Spikes in a recovered 2D image: maxima of the `(2h+1)^2` box sums of
/// `x_hat` over the same window (ties go to the larger centre value, then the lowest
/// flat index) whose box
/// sum is at least `mass_fraction * amplitude`.
pub fn detect_spikes(x_hat: &GridSignal, amplitude: f64, half_width: usize, mass_fraction: f64) -> Vec<[usize; 2]> {
    let n = x_hat.grid().size();
    let h = half_width as isize;
    let wrap = |i: isize| i.rem_euclid(n as isize) as usize;
    let v = x_hat.values();
    // Separable box sums along rows, then columns.
    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n as isize {
            rows[i * n + j as usize] = (-h..=h).map(|d| v[i * n + wrap(j + d)]).sum();
        }
    }
    let mut boxed = vec![0.0; n * n];
    for i in 0..n as isize {
        for j in 0..n {
            boxed[i as usize * n + j] = (-h..=h).map(|d| rows[wrap(i + d) * n + j]).sum();
        }
    }
    let mut out = Vec::new();
    for i in 0..n as isize {
        for j in 0..n as isize {
            let here = i as usize * n + j as usize;
            let c = boxed[here];
            if c < mass_fraction * amplitude {
                continue;
            }
            let beaten = (-h..=h).any(|di| {
                (-h..=h).any(|dj| {
                    let q = wrap(i + di) * n + wrap(j + dj);
                    let key = (boxed[q], v[q]);
                    key > (c, v[here]) || (key == (c, v[here]) && q < here)
                })
            });
            if !beaten {
                out.push([i as usize, j as usize]);
            }
        }
    }
    out
}

/// Box half-width used by [`run_scene`]: half the matching radius.
pub fn detection_half_width(grid: &Grid) -> usize {
    (matching_radius(grid) / 2).max(1)
}

pub const DEFAULT_MASS_FRACTION: f64 = 0.5;

/// Greedy one-to-one matching by increasing sup-norm torus distance, up to
/// `radius`. Returns matched `(truth, detection)` index pairs.
pub fn match_points(grid: &Grid, truth: &[[usize; 2]], detections: &[[usize; 2]], radius: usize) -> Vec<(usize, usize)> {
    let n = grid.size();
    let axis = |a: usize, b: usize| {
        let d = a.abs_diff(b) % n;
        d.min(n - d)
    };
    let mut pairs: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (di, d) in detections.iter().enumerate() {
            let linf = axis(t[0], d[0]).max(axis(t[1], d[1]));
            if linf <= radius {
                let l2 = axis(t[0], d[0]).pow(2) + axis(t[1], d[1]).pow(2);
                pairs.push((l2, linf, ti, di));
            }
        }
    }
    pairs.sort_unstable();
    let mut used_t = vec![false; truth.len()];
    let mut used_d = vec![false; detections.len()];
    let mut out = Vec::new();
    for (_, _, ti, di) in pairs {
        if !used_t[ti] && !used_d[di] {
            used_t[ti] = true;
            used_d[di] = true;
            out.push((ti, di));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub region: String,
    pub true_spikes: usize,
    pub detections: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean `|amplitude error| / amplitude` over matched spikes, where the
    /// recovered amplitude is the detection box sum.
    pub amplitude_error: Option<f64>,
}

/// Per-region precision and recall of `detections` against the scene.
pub fn score_regions(
    scene: &Scene,
    x_hat: &GridSignal,
    detections: &[[usize; 2]],
    radius: usize,
    half_width: usize,
) -> Vec<RegionScore> {
    let n = scene.grid.size();
    let mass = |p: [usize; 2]| -> f64 {
        let mut m = 0.0;
        for di in 0..=2 * half_width {
            for dj in 0..=2 * half_width {
                m += x_hat.values()[((p[0] + n + di - half_width) % n) * n + (p[1] + n + dj - half_width) % n];
            }
        }
        m
    };
    scene
        .regions
        .iter()
        .map(|region| {
            let truth = region.support.points().to_vec();
            let dets: Vec<[usize; 2]> = detections.iter().copied().filter(|&d| region.area.contains(d)).collect();
            let matches = match_points(&scene.grid, &truth, &dets, radius);
            let matched = matches.len();
            let ratio = |a: usize, b: usize| if b == 0 { if a == 0 { 1.0 } else { 0.0 } } else { a as f64 / b as f64 };
            let precision = ratio(matched, dets.len());
            let recall = ratio(matched, truth.len());
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            let amplitude_error = (matched > 0).then(|| {
                matches.iter().map(|&(_, di)| (mass(dets[di]) - scene.amplitude).abs() / scene.amplitude).sum::<f64>()
                    / matched as f64
            });
            RegionScore {
                region: region.name.to_string(),
                true_spikes: truth.len(),
                detections: dets.len(),
                matched,
                precision,
                recall,
                f1,
                amplitude_error,
            }
        })
        .collect()
}

/// Observation and recovery of a scene.
#[derive(Debug, Clone)]
pub struct SceneRun {
    pub clean: GridSignal,
    pub observed: GridSignal,
    pub solve: SolveResult,
    pub detections: Vec<[usize; 2]>,
    pub scores: Vec<RegionScore>,
}

/// Poisson observation of `Q x`, recovery, detection and scoring.
pub fn run_scene(scene: &Scene, cfg: &SolverConfig, seed: u64) -> Result<SceneRun> {
    let op = ForwardOperator::new(scene.kind, scene.grid)?;
    let clean = op.apply(&scene.x)?;
    let observed = add_poisson_noise(&clean, seed)?.observed;
    let solve = solve(&op, &observed, cfg)?;
    let half_width = detection_half_width(&scene.grid);
    let detections = detect_spikes(&solve.x_hat, scene.amplitude, half_width, DEFAULT_MASS_FRACTION);
    let scores = score_regions(scene, &solve.x_hat, &detections, matching_radius(&scene.grid), half_width);
    Ok(SceneRun { clean, observed, solve, detections, scores })
}

/// Seed of the Poisson draw for the scene generated from `seed`.
pub fn scene_noise_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x5eed)
}

/// Scene and recovery for one seed; the Poisson draw uses
/// [`scene_noise_seed`].
pub fn figure4_experiment(preset: &ScenePreset, seed: u64) -> Result<(Scene, SceneRun)> {
    let scene = figure4_scene(preset, seed)?;
    let run = run_scene(&scene, &preset.solver_config(), scene_noise_seed(seed))?;
    Ok((scene, run))
}
