//! Nonnegative least-absolute-deviation recovery,
//! `min ||s - Q x||_1  s.t.  x >= 0`.
//!
//! The `l1` loss is replaced by a Huber surrogate `h_mu`, minimized by an
//! accelerated projected gradient method with function-value restart, while
//! `mu` is driven down a continuation schedule `mu0 * f` for each factor
//! `f` (warm-started). The iterate with the smallest true `l1` residual is
//! returned.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSignal;
use crate::rayleigh::{is_regular, RayleighParams, SupportSet};
use crate::spectral::ForwardOperator;

/// Solver tuning. All fields have defaults and may be omitted in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mu0_scale: f64,
    pub continuation_factors: Vec<f64>,
    /// Stop a non-final stage once `||x_{k+1} - x_k||_2 / ||x_k||_2` drops below this.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub final_iter: usize,
    /// Multiplies the `1/L` step; values above 1 void the descent guarantee.
    pub step_scale: f64,
    /// Restart momentum whenever the smoothed objective increases.
    pub restart: bool,
    /// Emit a run-log line every this many iterations (0 disables periodic lines).
    pub log_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu0_scale: 0.1,
            continuation_factors: vec![1e3, 1e2, 1e1, 1.0],
            inner_tol: 1e-5,
            inner_max_iter: 1000,
            final_iter: 15000,
            step_scale: 1.0,
            restart: true,
            log_every: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("solver config: {m}")));
        if !(self.mu0_scale > 0.0 && self.mu0_scale.is_finite()) {
            return bad("mu0_scale must be positive");
        }
        let f = &self.continuation_factors;
        if f.is_empty() || f.last() != Some(&1.0) {
            return bad("continuation_factors must end with 1");
        }
        if f.windows(2).any(|w| !(w[0] > w[1])) || f.iter().any(|v| !v.is_finite()) {
            return bad("continuation_factors must be strictly decreasing");
        }
        if !(self.inner_tol > 0.0) {
            return bad("inner_tol must be positive");
        }
        if self.inner_max_iter == 0 {
            return bad("inner_max_iter must be positive");
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 2.0) {
            return bad("step_scale must lie in (0, 2]");
        }
        Ok(())
    }
}

/// Huber function `t^2/(2 mu)` for `|t| <= mu`, `|t| - mu/2` otherwise.
pub fn huber(t: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(huber_unchecked(t, mu))
}

/// Derivative of [`huber`]: `clamp(t/mu, -1, 1)`.
pub fn huber_grad(t: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok((t / mu).clamp(-1.0, 1.0))
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Huber parameter must be positive, got {mu}")))
    }
}

#[inline]
fn huber_unchecked(t: f64, mu: f64) -> f64 {
    let a = t.abs();
    if a <= mu {
        t * t / (2.0 * mu)
    } else {
        a - mu / 2.0
    }
}

/// `sum_i h_mu(v_i)`.
pub fn huber_sum(v: &[f64], mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(v.iter().map(|&t| huber_unchecked(t, mu)).sum())
}

/// `mu0_scale * sum_i sqrt(s_i) / |grid|` with the default scale 0.1.
pub fn mu0_from_data(s: &GridSignal) -> Result<f64> {
    mu0_scaled(s, SolverConfig::default().mu0_scale)
}

fn mu0_scaled(s: &GridSignal, scale: f64) -> Result<f64> {
    if let Some((index, &value)) = s.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeEntry { index, value });
    }
    Ok(scale * s.values().iter().map(|v| v.sqrt()).sum::<f64>() / s.values().len() as f64)
}

/// Continuation base `mu0`: the data formula on `max(s, 0)` (flat kernels
/// produce signed data), floored at `1e-12 * max|s|` and `1e-12`.
pub fn effective_mu0(s: &GridSignal, cfg: &SolverConfig) -> Result<f64> {
    let clamped = GridSignal::new(*s.grid(), s.values().iter().map(|v| v.max(0.0)).collect())?;
    let mu0 = mu0_scaled(&clamped, cfg.mu0_scale)?;
    let scale = s.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(mu0.max(1e-12 * scale).max(1e-12))
}

/// Smoothed objective `sum h_mu(s - Q x)`.
pub fn smoothed_objective(op: &ForwardOperator, s: &GridSignal, x: &GridSignal, mu: f64) -> Result<f64> {
    let qx = op.apply(x)?;
    huber_sum(&s.sub(&qx)?.into_values(), mu)
}

/// Gradient `-Q* huber_grad(s - Q x)` of [`smoothed_objective`].
pub fn smoothed_gradient(op: &ForwardOperator, s: &GridSignal, x: &GridSignal, mu: f64) -> Result<GridSignal> {
    check_mu(mu)?;
    let r = s.sub(&op.apply(x)?)?;
    let w: Vec<f64> = r.values().iter().map(|&t| (t / mu).clamp(-1.0, 1.0)).collect();
    let g = op.adjoint_apply(&GridSignal::new(*s.grid(), w)?)?;
    Ok(g.scaled(-1.0))
}

/// One line of the JSON-lines run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub stage: usize,
    pub iter: usize,
    pub mu: f64,
    pub objective: f64,
    pub residual: f64,
}

/// Summary of one continuation stage, taken at its last iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub mu: f64,
    pub iterations: usize,
    /// Smoothed objective of the warm start at this stage's `mu`.
    pub start_objective: f64,
    pub objective: f64,
    pub residual_l1: f64,
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_hat: GridSignal,
    /// `||s - Q x_hat||_1`, recomputed from `x_hat`.
    pub residual_l1: f64,
    pub stages: Vec<StageRecord>,
    pub log: Vec<LogEntry>,
    pub mu0: f64,
    /// Operator applications performed.
    pub applies: usize,
}

impl SolveResult {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    /// Upper bound `mu0 |grid| / 2` on `||v||_1 - sum h_mu0(v)`.
    pub fn smoothing_gap(&self) -> f64 {
        self.mu0 * self.x_hat.values().len() as f64 / 2.0
    }

    pub fn write_log(&self, mut out: impl Write) -> Result<()> {
        for e in &self.log {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn l1_residual(s: &[f64], qx: &[f64]) -> f64 {
    s.iter().zip(qx).map(|(a, b)| (a - b).abs()).sum()
}

fn huber_residual(s: &[f64], qx: &[f64], mu: f64) -> f64 {
    s.iter().zip(qx).map(|(a, b)| huber_unchecked(a - b, mu)).sum()
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Solves the nonnegative `l1` fit from `x = 0`.
pub fn solve(op: &ForwardOperator, s: &GridSignal, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    s.check_grid(op.grid())?;
    check_finite(s.values(), "observation")?;
    let mu0 = effective_mu0(s, cfg)?;
    let sv = s.values();
    let len = sv.len();
    let lip0 = op.norm_bound().powi(2);

    let mut x = vec![0.0; len];
    let mut qx = vec![0.0; len];
    let mut best_x = x.clone();
    let mut best_res = l1_residual(sv, &qx);
    let mut stages = Vec::new();
    let mut log = Vec::new();
    let mut applies = 0usize;
    let n_stages = cfg.continuation_factors.len();

    for (stage, &factor) in cfg.continuation_factors.iter().enumerate() {
        let mu = mu0 * factor;
        let last = stage + 1 == n_stages;
        let step = cfg.step_scale * mu / lip0.max(f64::MIN_POSITIVE);
        let max_iter = if last { cfg.final_iter } else { cfg.inner_max_iter };

        // Momentum state: y = x + beta (x - x_prev), tracked with Q y.
        let mut y = x.clone();
        let mut qy = qx.clone();
        let mut t = 1.0f64;
        let mut obj = huber_residual(sv, &qx, mu);
        let start_objective = obj;
        log.push(LogEntry { stage, iter: 0, mu, objective: obj, residual: l1_residual(sv, &qx) });
        let mut iters = 0usize;
        let mut restarts = 0usize;
        // True while y == x, i.e. the next step is a plain projected gradient step.
        let mut plain = true;

        while iters < max_iter {
            iters += 1;
            let w: Vec<f64> = sv.iter().zip(&qy).map(|(a, b)| ((a - b) / mu).clamp(-1.0, 1.0)).collect();
            let qw = op.apply_slice(&w)?;
            let x_next: Vec<f64> = y.iter().zip(&qw).map(|(yi, gi)| (yi + step * gi).max(0.0)).collect();
            let qx_next = op.apply_slice(&x_next)?;
            applies += 2;
            let obj_next = huber_residual(sv, &qx_next, mu);
            if !obj_next.is_finite() {
                return Err(Error::NonFinite(format!("objective at stage {stage}, iteration {iters}")));
            }
            if cfg.restart && obj_next > obj && !plain {
                // Momentum overshot: drop it and retry from x.
                restarts += 1;
                t = 1.0;
                y.clone_from(&x);
                qy.clone_from(&qx);
                plain = true;
                continue;
            }

            let res = l1_residual(sv, &qx_next);
            if res < best_res {
                best_res = res;
                best_x.clone_from(&x_next);
            }

            let mut diff = 0.0;
            let mut norm = 0.0;
            for (a, b) in x_next.iter().zip(&x) {
                diff += (a - b) * (a - b);
                norm += b * b;
            }
            let rel = diff.sqrt() / norm.sqrt().max(f64::MIN_POSITIVE);

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for i in 0..len {
                y[i] = x_next[i] + beta * (x_next[i] - x[i]);
                qy[i] = qx_next[i] + beta * (qx_next[i] - qx[i]);
            }
            t = t_next;
            plain = beta == 0.0;
            x = x_next;
            qx = qx_next;
            obj = obj_next;

            if cfg.log_every > 0 && iters % cfg.log_every == 0 {
                log.push(LogEntry { stage, iter: iters, mu, objective: obj, residual: res });
            }
            if diff == 0.0 || (!last && rel < cfg.inner_tol) {
                break;
            }
        }
        // Q y drifts from Q applied to y only by rounding; resync each stage.
        qx = op.apply_slice(&x)?;
        applies += 1;
        let res = l1_residual(sv, &qx);
        obj = huber_residual(sv, &qx, mu);
        log.push(LogEntry { stage, iter: iters, mu, objective: obj, residual: res });
        stages.push(StageRecord { stage, mu, iterations: iters, start_objective, objective: obj, residual_l1: res, restarts });
    }

    let x_hat = GridSignal::new(*s.grid(), best_x)?;
    let residual_l1 = l1_residual(sv, &op.apply_slice(x_hat.values())?);
    applies += 1;
    Ok(SolveResult { x_hat, residual_l1, stages, log, mu0, applies })
}

/// Brute-force solution of the exhaustive-search program over a lattice.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// Feasible candidate with the smallest residual.
    pub x_hat: GridSignal,
    pub residual_l1: f64,
    /// Every feasible candidate with its residual.
    pub feasible: Vec<(GridSignal, f64)>,
    pub candidates_checked: usize,
}

impl OracleSolution {
    /// Largest `||x' - x||_1` over feasible candidates: the error an
    /// adversarial choice among them could make.
    pub fn worst_error(&self, x: &GridSignal) -> Result<f64> {
        self.feasible.iter().map(|(c, _)| Ok(c.sub(x)?.l1_norm())).try_fold(0.0f64, |m, e: Result<f64>| Ok(m.max(e?)))
    }
}

/// Hard limits keeping the oracle to toy sizes.
pub const ORACLE_MAX_N: usize = 24;
pub const ORACLE_MAX_SPIKES: usize = 3;
const ORACLE_MAX_CANDIDATES: usize = 50_000_000;

/// Enumerates every support of at most `max_spikes` points lying in
/// `class` and every amplitude assignment from `lattice`, keeping the
/// candidates with `||s - Q x'||_1 <= delta`.
pub fn exhaustive_search_oracle(
    op: &ForwardOperator,
    s: &GridSignal,
    class: &RayleighParams,
    delta: f64,
    lattice: &[f64],
    max_spikes: usize,
) -> Result<OracleSolution> {
    let grid = *op.grid();
    s.check_grid(&grid)?;
    if grid.size() > ORACLE_MAX_N || grid.dim() != 1 {
        return Err(Error::InvalidArgument(format!("oracle is limited to 1D grids with N <= {ORACLE_MAX_N}")));
    }
    if max_spikes > ORACLE_MAX_SPIKES {
        return Err(Error::InvalidArgument(format!("oracle is limited to {ORACLE_MAX_SPIKES} spikes")));
    }
    if lattice.is_empty() || lattice.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument("amplitude lattice must be nonempty and positive".into()));
    }
    let n = grid.size();
    // Shifted copies of the impulse response give Q e_l.
    let psf = op.apply(&GridSignal::spikes(grid, &[0], &[1.0])?)?.into_values();
    let column = |l: usize, i: usize| psf[(i + n - l) % n];

    let mut supports: Vec<Vec<usize>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_spikes {
        let mut next = Vec::new();
        for sup in &frontier {
            let start = sup.last().map_or(0, |&l| l + 1);
            for l in start..n {
                let mut cand = sup.clone();
                cand.push(l);
                let set = SupportSet::one_d(grid, &cand)?;
                if is_regular(&set, class)?.regular {
                    next.push(cand);
                }
            }
        }
        supports.extend(next.iter().cloned());
        frontier = next;
    }
    let total: usize = supports.iter().map(|sup| lattice.len().pow(sup.len() as u32)).sum();
    if total > ORACLE_MAX_CANDIDATES {
        return Err(Error::InvalidArgument(format!("{total} oracle candidates exceed the limit")));
    }

    let sv = s.values();
    let mut feasible = Vec::new();
    let mut checked = 0usize;
    let mut pred = vec![0.0; n];
    for sup in &supports {
        let k = sup.len();
        let mut idx = vec![0usize; k];
        loop {
            checked += 1;
            pred.iter_mut().for_each(|p| *p = 0.0);
            for (j, &l) in sup.iter().enumerate() {
                let a = lattice[idx[j]];
                for (i, p) in pred.iter_mut().enumerate() {
                    *p += a * column(l, i);
                }
            }
            let res = l1_residual(sv, &pred);
            if res <= delta {
                let amps: Vec<f64> = idx.iter().map(|&i| lattice[i]).collect();
                feasible.push((GridSignal::spikes(grid, sup, &amps)?, res));
            }
            // Odometer over amplitude indices.
            let mut pos = 0;
            while pos < k {
                idx[pos] += 1;
                if idx[pos] < lattice.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == k {
                break;
            }
        }
    }
    let (x_hat, residual_l1) = feasible
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .ok_or_else(|| Error::Infeasible(format!("no lattice candidate within delta = {delta:.3e}")))?;
    Ok(OracleSolution { x_hat, residual_l1, feasible, candidates_checked: checked })
}
