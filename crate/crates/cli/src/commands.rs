//! Config types and implementations of the six commands.
//!
//! Relative paths inside a config resolve against the config file's
//! directory.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use superres::adversarial::{compute_cr, empirical_naf, mc_lower_bound_with_cr, mc_table_csv, RecoveryRun, CR_MAX_R};
use superres::certificate::{
    build_2d_certificate, build_separated_certificate, c1_alpha, error_bound, product_certificate,
    theoretical_constant_c1, Certificate, DEFAULT_SEPARATION, DEFAULT_SEPARATION_2D,
};
use superres::experiments::{
    certified_bound, detect_spikes, detection_half_width, figure4_scene, matching_radius, run_trial,
    scene_noise_seed, score_regions, stability_constant, trial_instance, ScenePreset, TrialSpec, DEFAULT_MASS_FRACTION,
};
use superres::flattening::{build_flattening_filter, calpha};
use superres::grid::{Grid, GridSignal};
use superres::io::{signal_from_csv, signal_to_csv, signal_to_pgm};
use superres::noise::{add_poisson_noise, add_scaled_poisson_noise, poisson_noise_at_level};
use superres::rayleigh::{is_regular, RayleighParams, SupportJson, SupportSet};
use superres::solver::{solve, SolverConfig};
use superres::spectral::{ForwardOperator, FourierMultiplier, OperatorKind};

use crate::{config_err, read_text, Command, Outputs, Result, RunManifest};

pub(crate) fn dispatch(command: Command, config: Value, base: &Path, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    match command {
        Command::Generate => generate(parse(config)?, out, seed),
        Command::Solve => solve_scene(parse(config)?, base, out, seed),
        Command::Certify => certify(parse(config)?, base, out, seed),
        Command::McTable => mc_table(parse(config)?, out, seed),
        Command::FlattenCheck => flatten_check(parse(config)?, out, seed),
        Command::NafSweep => naf_sweep(parse(config)?, out, seed),
    }
}

fn parse<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| config_err(e.to_string()))
}

fn echo(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("config types serialize")
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub scene: SceneSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSpec {
    /// The five-region 2D microscopy scene.
    Figure4 {
        #[serde(default)]
        preset: PresetSpec,
    },
    /// A random 1D trial; `--seed` or the top-level seed replaces `trial.seed`.
    Random {
        #[serde(default)]
        trial: TrialSpec,
    },
    /// Explicit spikes.
    Spikes {
        kind: OperatorKind,
        size: usize,
        fc: usize,
        points: Vec<Vec<usize>>,
        amplitudes: Vec<f64>,
        #[serde(default)]
        noise: NoiseSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PresetSpec {
    Named(PresetName),
    Custom(ScenePreset),
}

impl Default for PresetSpec {
    fn default() -> Self {
        PresetSpec::Named(PresetName::Full)
    }
}

impl PresetSpec {
    pub fn preset(&self) -> ScenePreset {
        match self {
            PresetSpec::Named(PresetName::Full) => ScenePreset::full(),
            PresetSpec::Named(PresetName::Reduced) => ScenePreset::reduced(),
            PresetSpec::Custom(p) => *p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Full,
    Reduced,
}

/// Observation noise for explicit scenes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    /// `s ~ Poisson(Qx)`.
    Poisson,
    /// `s ~ Poisson(photons Qx) / photons`.
    ScaledPoisson { photons: f64 },
    /// Poisson noise rescaled to `||z||_1 = l1`.
    PoissonLevel { l1: f64 },
}

/// `scene.json`: what `solve` needs to reload a generated scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub source: String,
    pub kind: OperatorKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub fc: usize,
    pub seed: Option<u64>,
    pub preset: Option<ScenePreset>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct RegionFile {
    name: String,
    class: Option<RegionClass>,
    outer: superres::rayleigh::GridBox,
    hole: Option<superres::rayleigh::GridBox>,
    points: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
struct RegionClass {
    d: f64,
    r: usize,
}

struct GeneratedScene {
    file: SceneFile,
    support: SupportSet,
    x: GridSignal,
    clean: GridSignal,
    observed: GridSignal,
    regions: Option<Vec<RegionFile>>,
}

fn need_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| config_err(format!("{what} is random and needs a seed (config \"seed\" or --seed)")))
}

fn build_scene(spec: &mut SceneSpec, seed: Option<u64>) -> Result<GeneratedScene> {
    match spec {
        SceneSpec::Figure4 { preset } => {
            let preset = preset.preset();
            let seed = need_seed(seed, "the figure4 scene")?;
            let scene = figure4_scene(&preset, seed)?;
            let op = ForwardOperator::new(scene.kind, scene.grid)?;
            let clean = op.apply(&scene.x)?;
            let observed = add_poisson_noise(&clean, scene_noise_seed(seed))?.observed;
            let support = SupportSet::new(scene.grid, scene.support())?;
            let regions = scene
                .regions
                .iter()
                .map(|r| RegionFile {
                    name: r.name.to_string(),
                    class: r.class.map(|(d, r)| RegionClass { d, r }),
                    outer: r.area.outer,
                    hole: r.area.hole,
                    points: r.support.to_json().points,
                })
                .collect();
            Ok(GeneratedScene {
                file: SceneFile {
                    source: "figure4".into(),
                    kind: scene.kind,
                    n: scene.grid.size(),
                    d: 2,
                    fc: scene.grid.fc(),
                    seed: Some(seed),
                    preset: Some(preset),
                    amplitude: Some(scene.amplitude),
                },
                support,
                x: scene.x,
                clean,
                observed,
                regions: Some(regions),
            })
        }
        SceneSpec::Random { trial } => {
            if let Some(s) = seed {
                trial.seed = s;
            }
            let (op, support, x, clean, observed) = trial_instance(trial)?;
            let grid = *op.grid();
            Ok(GeneratedScene {
                file: SceneFile {
                    source: "random".into(),
                    kind: trial.kind,
                    n: grid.size(),
                    d: 1,
                    fc: grid.fc(),
                    seed: Some(trial.seed),
                    preset: None,
                    amplitude: None,
                },
                support,
                x,
                clean,
                observed,
                regions: None,
            })
        }
        SceneSpec::Spikes { kind, size, fc, points, amplitudes, noise } => {
            let d = kind.dim().ok_or_else(|| config_err("explicit scenes need a named operator kind"))?;
            if points.len() != amplitudes.len() {
                return Err(config_err(format!("{} points but {} amplitudes", points.len(), amplitudes.len())));
            }
            if let Some(a) = amplitudes.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
                return Err(config_err(format!("amplitude {a} is not positive")));
            }
            let support = SupportSet::from_json(&SupportJson { n: *size, d, points: points.clone() }, *fc)?;
            let grid = *support.grid();
            let mut values = vec![0.0; grid.len()];
            for (&i, &a) in support.flat_indices().iter().zip(amplitudes.iter()) {
                values[i] = a;
            }
            let x = GridSignal::nonneg(grid, values)?;
            let op = ForwardOperator::new(*kind, grid)?;
            let clean = op.apply(&x)?;
            let observed = match *noise {
                NoiseSpec::None => clean.clone(),
                NoiseSpec::Poisson => add_poisson_noise(&clean, need_seed(seed, "Poisson noise")?)?.observed,
                NoiseSpec::ScaledPoisson { photons } => {
                    add_scaled_poisson_noise(&clean, photons, need_seed(seed, "Poisson noise")?)?.observed
                }
                NoiseSpec::PoissonLevel { l1 } => {
                    poisson_noise_at_level(&clean, l1, need_seed(seed, "Poisson noise")?)?.observed
                }
            };
            Ok(GeneratedScene {
                file: SceneFile {
                    source: "spikes".into(),
                    kind: *kind,
                    n: grid.size(),
                    d,
                    fc: grid.fc(),
                    seed: if matches!(noise, NoiseSpec::None) { None } else { seed },
                    preset: None,
                    amplitude: None,
                },
                support,
                x,
                clean,
                observed,
                regions: None,
            })
        }
    }
}

pub fn generate(mut cfg: GenerateConfig, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    let seed = seed.or(cfg.seed);
    cfg.seed = seed;
    let scene = build_scene(&mut cfg.scene, seed)?;
    let mut outputs = Outputs::new(out)?;
    outputs.write_json("scene.json", &scene.file)?;
    outputs.write("x.csv", signal_to_csv(&scene.x))?;
    outputs.write("clean.csv", signal_to_csv(&scene.clean))?;
    outputs.write("observed.csv", signal_to_csv(&scene.observed))?;
    outputs.write_json("support.json", &scene.support.to_json())?;
    let mut metrics = json!({
        "N": scene.file.n,
        "fc": scene.file.fc,
        "srf": scene.x.grid().srf(),
        "spikes": scene.support.len(),
        "x_l1": scene.x.l1_norm(),
        "noise_l1": scene.observed.sub(&scene.clean)?.l1_norm(),
    });
    if scene.file.d == 2 {
        let (pgm, x_scale) = signal_to_pgm(&scene.x)?;
        outputs.write("x.pgm", pgm)?;
        let (pgm, obs_scale) = signal_to_pgm(&scene.observed)?;
        outputs.write("observed.pgm", pgm)?;
        metrics["pgm_scaling"] = json!({ "x.pgm": x_scale, "observed.pgm": obs_scale });
    }
    if let Some(regions) = &scene.regions {
        outputs.write_json("regions.json", regions)?;
        metrics["region_spikes"] = regions.iter().map(|r| (r.name.clone(), json!(r.points.len()))).collect();
    }
    outputs.finish(Command::Generate, echo(&cfg), seed, metrics)
}

// ------------------------------------------------------------------- solve

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Directory written by `generate`.
    pub scene: PathBuf,
    /// Defaults to the preset's settings for figure4 scenes.
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

fn read_signal(dir: &Path, name: &str, fc: usize) -> Result<GridSignal> {
    Ok(signal_from_csv(&read_text(&dir.join(name))?, fc)?)
}

fn read_optional(dir: &Path, name: &str, fc: usize) -> Result<Option<GridSignal>> {
    if dir.join(name).exists() {
        read_signal(dir, name, fc).map(Some)
    } else {
        Ok(None)
    }
}

pub fn solve_scene(mut cfg: SolveConfig, base: &Path, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    let dir = resolve(base, &cfg.scene);
    let meta: SceneFile = serde_json::from_str(&read_text(&dir.join("scene.json"))?)
        .map_err(|e| config_err(format!("{}: {e}", dir.join("scene.json").display())))?;
    let observed = read_signal(&dir, "observed.csv", meta.fc)?;
    if observed.grid().dim() != meta.d || observed.grid().size() != meta.n {
        return Err(config_err("observed.csv does not match scene.json"));
    }
    let truth = read_optional(&dir, "x.csv", meta.fc)?;
    let clean = read_optional(&dir, "clean.csv", meta.fc)?;
    let solver_cfg = cfg.solver.clone().unwrap_or_else(|| meta.preset.map_or_else(SolverConfig::default, |p| p.solver_config()));
    cfg.solver = Some(solver_cfg.clone());
    let op = ForwardOperator::new(meta.kind, *observed.grid())?;
    let result = solve(&op, &observed, &solver_cfg)?;

    let mut outputs = Outputs::new(out)?;
    outputs.write("x_hat.csv", signal_to_csv(&result.x_hat))?;
    let mut log = Vec::new();
    result.write_log(&mut log)?;
    outputs.write("run_log.jsonl", log)?;
    outputs.write_json("stages.json", &result.stages)?;
    let mut metrics = json!({
        "residual_l1": result.residual_l1,
        "mu0": result.mu0,
        "smoothing_gap": result.smoothing_gap(),
        "iterations": result.total_iterations(),
        "applies": result.applies,
        "x_hat_l1": result.x_hat.l1_norm(),
    });
    if meta.d == 2 {
        let (pgm, scale) = signal_to_pgm(&result.x_hat)?;
        outputs.write("x_hat.pgm", pgm)?;
        metrics["pgm_scaling"] = json!({ "x_hat.pgm": scale });
    }
    if let Some(x) = &truth {
        let err = result.x_hat.sub(x)?.l1_norm();
        metrics["error_l1"] = json!(err);
        metrics["relative_error"] = json!(if x.l1_norm() > 0.0 { err / x.l1_norm() } else { err });
    }
    if let Some(c) = &clean {
        metrics["noise_l1"] = json!(observed.sub(c)?.l1_norm());
    }
    if let (Some(preset), Some(scene_seed)) = (meta.preset, meta.seed) {
        let scene = figure4_scene(&preset, scene_seed)?;
        if truth.as_ref().is_some_and(|x| x.values() != scene.x.values()) {
            return Err(config_err("x.csv does not match the scene regenerated from its preset and seed"));
        }
        let half_width = detection_half_width(&scene.grid);
        let detections = detect_spikes(&result.x_hat, scene.amplitude, half_width, DEFAULT_MASS_FRACTION);
        let radius = matching_radius(&scene.grid);
        let scores = score_regions(&scene, &result.x_hat, &detections, radius, half_width);
        outputs.write_json("detections.json", &detections)?;
        outputs.write_json("scores.json", &scores)?;
        metrics["matching_radius"] = json!(radius);
        metrics["regions"] = echo(&scores);
    }
    outputs.finish(Command::Solve, echo(&cfg), seed, metrics)
}

// ----------------------------------------------------------------- certify

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SupportSource {
    Inline(SupportJson),
    File(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub support: SupportSource,
    pub fc: usize,
    #[serde(default = "one")]
    pub r: usize,
    /// Per-subset separation of the class `R(separation * r, r)` used for the
    /// regularity report.
    #[serde(default)]
    pub separation: Option<f64>,
    /// Noise level for the predicted error bound.
    #[serde(default)]
    pub noise_l1: Option<f64>,
}

fn one() -> usize {
    1
}

pub fn certify(cfg: CertifyConfig, base: &Path, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    let json: SupportJson = match &cfg.support {
        SupportSource::Inline(j) => j.clone(),
        SupportSource::File(p) => {
            let path = resolve(base, p);
            serde_json::from_str(&read_text(&path)?).map_err(|e| config_err(format!("{}: {e}", path.display())))?
        }
    };
    let t = SupportSet::from_json(&json, cfg.fc)?;
    if cfg.r == 0 {
        return Err(config_err("r must be at least 1"));
    }
    if let Some(z) = cfg.noise_l1 {
        if !(z >= 0.0 && z.is_finite()) {
            return Err(config_err("noise_l1 must be nonnegative"));
        }
    }
    let separation = cfg.separation.unwrap_or(if json.d == 2 { DEFAULT_SEPARATION_2D } else { DEFAULT_SEPARATION });
    let class = RayleighParams::new(separation * cfg.r as f64, cfg.r, *t.grid())?;
    let regular = is_regular(&t, &class)?.regular;

    let mut outputs = Outputs::new(out)?;
    let mut metrics = json!({ "class": { "d": class.d, "r": cfg.r }, "regular": regular });
    let cert: Certificate = match (json.d, cfg.r) {
        (1, 1) => build_separated_certificate(&t, cfg.fc)?,
        (1, r) => {
            let p = product_certificate(&t, r)?;
            metrics["factor_band"] = json!(p.factor_band);
            metrics["rho_prediction"] = json!(p.rho_prediction);
            metrics["subset_sizes"] = json!(p.subsets.iter().map(SupportSet::len).collect::<Vec<_>>());
            for (i, f) in p.factors.iter().enumerate() {
                outputs.write_json(&format!("factor_{i}.json"), &f.to_json())?;
            }
            p.certificate
        }
        (2, 1) => build_2d_certificate(&t, cfg.fc)?,
        (d, r) => return Err(config_err(format!("no {d}D certificate for r = {r}"))),
    };
    outputs.write_json("certificate.json", &cert.to_json())?;
    outputs.write("evaluation.csv", cert.evaluation_csv())?;
    metrics["rho"] = json!(cert.rho());
    metrics["band_limit"] = json!(cert.band_limit());
    metrics["dense_size"] = json!(cert.dense_size());
    metrics["dense_min"] = json!(cert.dense_min());
    metrics["dense_max"] = json!(cert.dense_max());
    metrics["growth"] = json!(cert.growth());
    if let Some(z) = cfg.noise_l1 {
        metrics["noise_l1"] = json!(z);
        metrics["predicted_bound"] = json!(error_bound(cert.rho(), z)?);
    }
    outputs.finish(Command::Certify, echo(&cfg), seed, metrics)
}

// ---------------------------------------------------------------- mc-table

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McTableConfig {
    pub r: Vec<usize>,
    pub srf: Vec<usize>,
    pub fc: Vec<usize>,
}

pub fn mc_table(cfg: McTableConfig, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    if cfg.r.is_empty() || cfg.srf.is_empty() || cfg.fc.is_empty() {
        return Err(config_err("r, srf and fc lists must be non-empty"));
    }
    let mut rows = Vec::new();
    let mut constants = serde_json::Map::new();
    for &r in &cfg.r {
        let c_r = if (1..=CR_MAX_R).contains(&r) { Some(compute_cr(r)?) } else { None };
        constants.insert(r.to_string(), json!(c_r));
        for &srf in &cfg.srf {
            for &fc in &cfg.fc {
                rows.push(mc_lower_bound_with_cr(&Grid::from_srf(1, fc, srf)?, r, c_r)?);
            }
        }
    }
    let mut outputs = Outputs::new(out)?;
    outputs.write("mc_table.csv", mc_table_csv(&rows))?;
    outputs.write_json("mc_table.json", &rows)?;
    let metrics = json!({ "rows": rows.len(), "c_r": constants });
    outputs.finish(Command::McTable, echo(&cfg), seed, metrics)
}

// ----------------------------------------------------------- flatten-check

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlattenCheckConfig {
    pub alpha: Vec<f64>,
    pub size: Vec<usize>,
    pub srf: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlattenEntry {
    pub alpha_requested: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub srf: usize,
    pub fc: usize,
    /// `alpha fc` rounded to an integer band, divided by `fc`.
    pub alpha_effective: Option<f64>,
    pub flat_band: Option<usize>,
    pub one_norm: Option<f64>,
    pub calpha: Option<f64>,
    pub within: Option<bool>,
    /// `max |R_k m_k - 1|` over `|k| <= alpha fc`, with `m` the triangular spectrum.
    pub flat_error: Option<f64>,
    /// `max |R_k m_k|` over `|k| > fc`.
    pub out_of_band: Option<f64>,
    pub note: Option<String>,
}

fn flatten_entry(alpha: f64, n: usize, srf: usize) -> Result<FlattenEntry> {
    let fc = (n / srf).saturating_sub(1) / 2;
    let mut entry = FlattenEntry {
        alpha_requested: alpha,
        n,
        srf,
        fc,
        alpha_effective: None,
        flat_band: None,
        one_norm: None,
        calpha: None,
        within: None,
        flat_error: None,
        out_of_band: None,
        note: None,
    };
    // Bands with alpha in [1/2, 1).
    let (lo, hi) = (fc.div_ceil(2), fc.saturating_sub(1));
    if fc == 0 || lo > hi {
        entry.note = Some(format!("fc = {fc} admits no band with alpha in [1/2, 1)"));
        return Ok(entry);
    }
    let band = ((alpha * fc as f64).round() as usize).clamp(lo, hi);
    let alpha_eff = band as f64 / fc as f64;
    let grid = Grid::one_d(n, fc)?;
    let filter = build_flattening_filter(&grid, alpha_eff)?;
    let tri = FourierMultiplier::triangular(&grid);
    let product = |k: i64| filter.coeff(k) * tri.coeff(k);
    let mut flat_error: f64 = 0.0;
    let mut out_of_band: f64 = 0.0;
    for k in grid.frequencies() {
        let m = k.unsigned_abs() as usize;
        if m <= filter.flat_band() {
            flat_error = flat_error.max((product(k) - 1.0).abs());
        } else if m > fc {
            out_of_band = out_of_band.max(product(k).abs());
        }
    }
    let c = calpha(alpha_eff)?;
    entry.alpha_effective = Some(alpha_eff);
    entry.flat_band = Some(filter.flat_band());
    entry.one_norm = Some(filter.one_norm());
    entry.calpha = Some(c);
    entry.within = Some(filter.one_norm() <= c);
    entry.flat_error = Some(flat_error);
    entry.out_of_band = Some(out_of_band);
    Ok(entry)
}

pub fn flatten_check(cfg: FlattenCheckConfig, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    if cfg.alpha.is_empty() || cfg.size.is_empty() || cfg.srf.is_empty() {
        return Err(config_err("alpha, size and srf lists must be non-empty"));
    }
    if let Some(a) = cfg.alpha.iter().find(|a| !(0.5..1.0).contains(*a)) {
        return Err(config_err(format!("alpha {a} is outside [1/2, 1)")));
    }
    if cfg.srf.contains(&0) {
        return Err(config_err("srf must be positive"));
    }
    let mut entries = Vec::new();
    for &alpha in &cfg.alpha {
        for &n in &cfg.size {
            for &srf in &cfg.srf {
                entries.push(flatten_entry(alpha, n, srf)?);
            }
        }
    }
    let checked: Vec<&FlattenEntry> = entries.iter().filter(|e| e.within.is_some()).collect();
    let all_within = checked.iter().all(|e| e.within == Some(true));
    let max_flat_error = checked.iter().filter_map(|e| e.flat_error).fold(0.0, f64::max);
    let mut outputs = Outputs::new(out)?;
    outputs.write_json("flatten_check.json", &entries)?;
    let metrics = json!({
        "entries": entries.len(),
        "checked": checked.len(),
        "all_within": all_within,
        "max_flat_error": max_flat_error,
    });
    outputs.finish(Command::FlattenCheck, echo(&cfg), seed, metrics)
}

// --------------------------------------------------------------- naf-sweep

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NafSweepConfig {
    pub kind: OperatorKind,
    pub fc: usize,
    pub srf: usize,
    pub r: usize,
    pub separation: f64,
    pub count: Option<usize>,
    pub amp_min: f64,
    pub amp_max: f64,
    /// `||z||_1 / ||x||_1` for each batch.
    pub noise_levels: Vec<f64>,
    /// Runs per level, with seeds `seed, seed + 1, ..`.
    pub trials: usize,
    pub seed: Option<u64>,
    /// Flattening parameter for triangular runs.
    pub alpha: f64,
    /// Also check each run against its certificate-based bound.
    pub certify: bool,
    pub solver: SolverConfig,
}

impl Default for NafSweepConfig {
    fn default() -> Self {
        let t = TrialSpec::default();
        Self {
            kind: t.kind,
            fc: 16,
            srf: t.srf,
            r: t.r,
            separation: t.separation,
            count: None,
            amp_min: t.amp_min,
            amp_max: t.amp_max,
            noise_levels: vec![1e-3, 1e-2],
            trials: 5,
            seed: None,
            alpha: 0.5,
            certify: false,
            solver: SolverConfig::default(),
        }
    }
}

pub fn naf_sweep(mut cfg: NafSweepConfig, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    let seed = need_seed(seed.or(cfg.seed), "naf-sweep")?;
    cfg.seed = Some(seed);
    if cfg.trials == 0 || cfg.noise_levels.is_empty() {
        return Err(config_err("trials and noise_levels must be non-empty"));
    }
    cfg.solver.validate()?;
    let spec = |level: f64, i: usize| TrialSpec {
        kind: cfg.kind,
        fc: cfg.fc,
        srf: cfg.srf,
        r: cfg.r,
        separation: cfg.separation,
        count: cfg.count,
        amp_min: cfg.amp_min,
        amp_max: cfg.amp_max,
        noise_level: level,
        seed: seed.wrapping_add(i as u64),
    };
    let first = spec(cfg.noise_levels[0], 0);
    first.validate()?;
    let grid = first.grid()?;
    let srf_power = grid.srf().powi(2 * cfg.r as i32);
    let constant = if cfg.kind.is_triangular() { c1_alpha(cfg.r, cfg.alpha)? } else { theoretical_constant_c1(cfg.r)? };
    let c_srf = constant * srf_power;
    let stability = stability_constant(cfg.kind, &grid, cfg.r, cfg.alpha)?;

    let mut runs_csv = String::from("noise_level,seed,x_l1,noise_l1,error_l1,relative_error,bound,holds\n");
    let mut table = String::from("noise_level,trials,delta,max_error,naf,c_srf,stability_constant,bounds_held\n");
    let mut levels = Vec::new();
    for &level in &cfg.noise_levels {
        let mut runs = Vec::new();
        let mut held = 0usize;
        for i in 0..cfg.trials {
            let s = spec(level, i);
            let outcome = run_trial(&s, &cfg.solver)?;
            let (bound, holds) = if cfg.certify {
                let b = certified_bound(&outcome, cfg.alpha)?;
                held += b.holds as usize;
                (b.bound.to_string(), b.holds.to_string())
            } else {
                (String::new(), String::new())
            };
            runs_csv.push_str(&format!(
                "{level},{},{},{},{},{},{bound},{holds}\n",
                s.seed,
                outcome.x.l1_norm(),
                outcome.noise_l1,
                outcome.error_l1,
                outcome.relative_error()
            ));
            runs.push(RecoveryRun { error_l1: outcome.error_l1, noise_l1: outcome.noise_l1 });
        }
        let delta = runs.iter().map(|r| r.noise_l1).fold(0.0, f64::max);
        let naf = empirical_naf(&runs, delta)?;
        let held_cell = if cfg.certify { held.to_string() } else { String::new() };
        table.push_str(&format!(
            "{level},{},{delta},{},{},{c_srf},{stability},{held_cell}\n",
            runs.len(),
            naf.max_error,
            naf.naf.map_or(String::new(), |v| v.to_string())
        ));
        levels.push(json!({
            "noise_level": level,
            "delta": delta,
            "max_error": naf.max_error,
            "naf": naf.naf,
            "bounds_held": cfg.certify.then_some(held),
        }));
    }
    let mut outputs = Outputs::new(out)?;
    outputs.write("naf_sweep.csv", table)?;
    outputs.write("runs.csv", runs_csv)?;
    let metrics = json!({
        "N": grid.size(),
        "srf": grid.srf(),
        "c_srf": c_srf,
        "stability_constant": stability,
        "levels": levels,
    });
    outputs.finish(Command::NafSweep, echo(&cfg), Some(seed), metrics)
}
