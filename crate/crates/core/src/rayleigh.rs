//! Rayleigh-regular supports: membership tests, separated partitions and
//! random sampling.
//!
//! A support is in `R_D(d, r)` when it splits into `r` disjoint subsets none
//! of which has two points inside one axis-aligned window of side
//! `d * lambda_c / 2` on the torus. Windows are half-open, so two points of
//! one subset conflict exactly when their (sup-norm) torus distance is below
//! the window side; membership is therefore an `r`-colouring question on the
//! conflict graph.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Slack on distance comparisons, in torus units.
const DIST_EPS: f64 = 1e-12;

/// Node budget for the exact colouring search.
pub const SEARCH_BUDGET: u64 = 20_000_000;

/// Largest support `partition_2d` hands to exhaustive search.
pub const PARTITION_2D_EXHAUSTIVE_MAX: usize = 12;

/// Distinct grid points, sorted lexicographically. 1D points use `[i, 0]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    grid: Grid,
    points: Vec<[usize; 2]>,
}

impl SupportSet {
    pub fn new(grid: Grid, points: Vec<[usize; 2]>) -> Result<Self> {
        let n = grid.size();
        let mut points = points;
        for p in &points {
            if p[0] >= n || p[1] >= n || (grid.dim() == 1 && p[1] != 0) {
                return Err(Error::InvalidArgument(format!("point {p:?} outside the {}D grid of size {n}", grid.dim())));
            }
        }
        points.sort_unstable();
        let before = points.len();
        points.dedup();
        if points.len() != before {
            return Err(Error::InvalidArgument("support points must be distinct".into()));
        }
        Ok(Self { grid, points })
    }

    pub fn one_d(grid: Grid, indices: &[usize]) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::InvalidArgument("one_d support on a 2D grid".into()));
        }
        Self::new(grid, indices.iter().map(|&i| [i, 0]).collect())
    }

    pub fn two_d(grid: Grid, pairs: &[(usize, usize)]) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::InvalidArgument("two_d support on a 1D grid".into()));
        }
        Self::new(grid, pairs.iter().map(|&(i, j)| [i, j]).collect())
    }

    pub fn empty(grid: Grid) -> Self {
        Self { grid, points: Vec::new() }
    }

    /// Nonzero positions of a signal given as flat indices.
    pub fn from_flat(grid: Grid, flat: &[usize]) -> Result<Self> {
        let n = grid.size();
        let pts = flat.iter().map(|&f| if grid.dim() == 1 { [f, 0] } else { [f / n, f % n] }).collect();
        Self::new(grid, pts)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn points(&self) -> &[[usize; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First coordinates (the grid indices in 1D).
    pub fn indices(&self) -> Vec<usize> {
        self.points.iter().map(|p| p[0]).collect()
    }

    /// Flat indices into a row-major signal.
    pub fn flat_indices(&self) -> Vec<usize> {
        let n = self.grid.size();
        self.points.iter().map(|p| if self.grid.dim() == 1 { p[0] } else { p[0] * n + p[1] }).collect()
    }

    /// Positions on the torus, `index / N`.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        let n = self.grid.size() as f64;
        self.points.iter().map(|p| [p[0] as f64 / n, p[1] as f64 / n]).collect()
    }

    /// Same points re-attached to a grid with another cutoff.
    pub fn with_grid(&self, grid: Grid) -> Result<Self> {
        if grid.size() != self.grid.size() || grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch("support moved to a differently sized grid".into()));
        }
        Ok(Self { grid, points: self.points.clone() })
    }

    /// Cyclic translation by `shift` steps along every axis.
    pub fn shifted(&self, shift: usize) -> Self {
        let n = self.grid.size();
        let pts = self
            .points
            .iter()
            .map(|p| if self.grid.dim() == 1 { [(p[0] + shift) % n, 0] } else { [(p[0] + shift) % n, (p[1] + shift) % n] })
            .collect();
        Self::new(self.grid, pts).expect("translation keeps points distinct")
    }

    pub fn contains(&self, p: [usize; 2]) -> bool {
        self.points.binary_search(&p).is_ok()
    }

    /// Sup-norm torus distance between two stored points, in torus units.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        torus_distance(&self.grid, self.points[a], self.points[b])
    }

    pub fn to_json(&self) -> SupportJson {
        SupportJson {
            n: self.grid.size(),
            d: self.grid.dim(),
            points: self.points.iter().map(|p| p[..self.grid.dim()].to_vec()).collect(),
        }
    }

    pub fn from_json(json: &SupportJson, fc: usize) -> Result<Self> {
        let grid = Grid::new(json.d, json.n, fc)?;
        let pts = json
            .points
            .iter()
            .map(|p| match (json.d, p.as_slice()) {
                (1, [i]) => Ok([*i, 0]),
                (2, [i, j]) => Ok([*i, *j]),
                _ => Err(Error::Parse(format!("point {p:?} does not match dimension {}", json.d))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, pts)
    }
}

/// On-disk form: `{"N": .., "D": .., "points": [[i, j], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportJson {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub points: Vec<Vec<usize>>,
}

/// Class parameters `(d, r)` of `R_D(d, r; N, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighParams {
    pub d: f64,
    pub r: usize,
    pub grid: Grid,
}

impl RayleighParams {
    pub fn new(d: f64, r: usize, grid: Grid) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidArgument(format!("separation d must be positive, got {d}")));
        }
        if r == 0 {
            return Err(Error::InvalidArgument("r must be at least 1".into()));
        }
        Ok(Self { d, r, grid })
    }

    /// Window side `d * lambda_c / 2` in torus units.
    pub fn window(&self) -> f64 {
        window_side(self.d, &self.grid)
    }

    /// Minimal admissible same-subset spacing in grid steps.
    pub fn min_steps(&self) -> usize {
        let steps = self.window() * self.grid.size() as f64;
        (steps - 1e-9).ceil().max(1.0) as usize
    }

    /// Largest support any set in the class can have.
    pub fn packing_bound(&self) -> usize {
        let n = self.grid.size();
        let m = self.min_steps();
        let per_axis = if m > n / 2 { 1 } else { n / m };
        self.r * per_axis.pow(self.grid.dim() as u32)
    }
}

fn window_side(d: f64, grid: &Grid) -> f64 {
    if grid.fc() == 0 {
        f64::INFINITY
    } else {
        d / (2.0 * grid.fc() as f64)
    }
}

pub(crate) fn torus_distance(grid: &Grid, a: [usize; 2], b: [usize; 2]) -> f64 {
    let n = grid.size();
    let axis = |x: usize, y: usize| {
        let d = x.abs_diff(y) % n;
        d.min(n - d)
    };
    let steps = match grid.dim() {
        1 => axis(a[0], b[0]),
        _ => axis(a[0], b[0]).max(axis(a[1], b[1])),
    };
    steps as f64 / n as f64
}

/// Outcome of a membership test, with a witness partition on success.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularity {
    pub regular: bool,
    /// `r` disjoint subsets (some possibly empty) covering the support.
    pub partition: Option<Vec<SupportSet>>,
}

/// Conflict graph: two points conflict when closer than the window side.
struct Conflicts {
    adj: Vec<Vec<usize>>,
}

impl Conflicts {
    fn build(t: &SupportSet, window: f64) -> Self {
        let s = t.len();
        let mut adj = vec![Vec::new(); s];
        for a in 0..s {
            for b in (a + 1)..s {
                if t.distance(a, b) < window - DIST_EPS {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        Self { adj }
    }

    fn fits(&self, v: usize, colour: usize, colours: &[Option<usize>]) -> bool {
        self.adj[v].iter().all(|&u| colours[u] != Some(colour))
    }

    /// First-fit colouring in the given order.
    fn greedy(&self, order: &[usize], r: usize) -> Option<Vec<usize>> {
        let mut colours = vec![None; self.adj.len()];
        for &v in order {
            let c = (0..r).find(|&c| self.fits(v, c, &colours))?;
            colours[v] = Some(c);
        }
        Some(colours.into_iter().map(|c| c.unwrap()).collect())
    }

    /// Exact backtracking colouring with interchangeable-colour symmetry
    /// breaking. `None` means proven impossible.
    fn exact(&self, order: &[usize], r: usize, budget: Option<u64>) -> Result<Option<Vec<usize>>> {
        let mut colours = vec![None; self.adj.len()];
        let mut nodes = 0u64;
        let found = self.dfs(order, 0, r, 0, &mut colours, &mut nodes, budget)?;
        Ok(found.then(|| colours.into_iter().map(|c| c.unwrap()).collect()))
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        order: &[usize],
        depth: usize,
        r: usize,
        used: usize,
        colours: &mut Vec<Option<usize>>,
        nodes: &mut u64,
        budget: Option<u64>,
    ) -> Result<bool> {
        if depth == order.len() {
            return Ok(true);
        }
        *nodes += 1;
        if let Some(b) = budget {
            if *nodes > b {
                return Err(Error::SearchExhausted(format!(
                    "more than {b} nodes colouring {} points with {r} subsets",
                    order.len()
                )));
            }
        }
        let v = order[depth];
        for c in 0..r.min(used + 1) {
            if self.fits(v, c, colours) {
                colours[v] = Some(c);
                if self.dfs(order, depth + 1, r, used.max(c + 1), colours, nodes, budget)? {
                    return Ok(true);
                }
                colours[v] = None;
            }
        }
        Ok(false)
    }
}

fn split(t: &SupportSet, colours: &[usize], r: usize) -> Vec<SupportSet> {
    let mut parts = vec![Vec::new(); r];
    for (p, &c) in t.points.iter().zip(colours) {
        parts[c].push(*p);
    }
    parts.into_iter().map(|pts| SupportSet { grid: t.grid, points: pts }).collect()
}

/// Largest number of points in any half-open window of the given side (1D).
fn max_window_count_1d(t: &SupportSet, window: f64) -> usize {
    let s = t.len();
    let n = t.grid.size() as f64;
    let pos: Vec<f64> = t.points.iter().map(|p| p[0] as f64 / n).collect();
    if window >= 1.0 {
        return s;
    }
    (0..s)
        .map(|i| {
            (0..s)
                .filter(|&j| {
                    let ahead = (pos[j] - pos[i]).rem_euclid(1.0);
                    ahead < window - DIST_EPS
                })
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// Decides `T in R_D(d, r)` and returns a witness partition when it is.
///
/// Fast paths: a window-count bound (1D) rejects, first-fit colouring over
/// all cyclic starting points accepts. Otherwise an exact search decides;
/// it fails with [`Error::SearchExhausted`] rather than guessing if it
/// exceeds [`SEARCH_BUDGET`] nodes.
pub fn is_regular(t: &SupportSet, p: &RayleighParams) -> Result<Regularity> {
    if t.grid.size() != p.grid.size() || t.grid.dim() != p.grid.dim() {
        return Err(Error::GridMismatch("support and class parameters on different grids".into()));
    }
    let s = t.len();
    if s == 0 {
        return Ok(Regularity { regular: true, partition: Some(vec![SupportSet::empty(t.grid); p.r]) });
    }
    let window = p.window();
    if t.grid.dim() == 1 && max_window_count_1d(t, window) > p.r {
        return Ok(Regularity { regular: false, partition: None });
    }
    let graph = Conflicts::build(t, window);
    let starts: Vec<usize> = if t.grid.dim() == 1 { (0..s).collect() } else { vec![0] };
    for start in starts {
        let order: Vec<usize> = (0..s).map(|i| (start + i) % s).collect();
        if let Some(col) = graph.greedy(&order, p.r) {
            return Ok(Regularity { regular: true, partition: Some(split(t, &col, p.r)) });
        }
    }
    let order: Vec<usize> = (0..s).collect();
    match graph.exact(&order, p.r, Some(SEARCH_BUDGET))? {
        Some(col) => Ok(Regularity { regular: true, partition: Some(split(t, &col, p.r)) }),
        None => Ok(Regularity { regular: false, partition: None }),
    }
}

/// Every `r`-th point by rank: subset `i` is `{t_i, t_{i+r}, ...}` (1D).
pub fn partition_ordered(t: &SupportSet, r: usize) -> Result<Vec<SupportSet>> {
    if t.grid.dim() != 1 {
        return Err(Error::InvalidArgument("ordered partition is defined in 1D".into()));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    let mut parts = vec![Vec::new(); r];
    for (rank, p) in t.points.iter().enumerate() {
        parts[rank % r].push(*p);
    }
    Ok(parts.into_iter().map(|pts| SupportSet { grid: t.grid, points: pts }).collect())
}

/// Splits a 2D support into `r` subsets with sup-norm torus separation at
/// least `sep * lambda_c / 2`.
///
/// First-fit in lexicographic order; if that fails, supports of at most
/// [`PARTITION_2D_EXHAUSTIVE_MAX`] points are searched exhaustively.
pub fn partition_2d(t: &SupportSet, r: usize, sep: f64) -> Result<Vec<SupportSet>> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    if t.is_empty() {
        return Ok(vec![SupportSet::empty(t.grid); r]);
    }
    let graph = Conflicts::build(t, window_side(sep, &t.grid));
    let order: Vec<usize> = (0..t.len()).collect();
    if let Some(col) = graph.greedy(&order, r) {
        return Ok(split(t, &col, r));
    }
    if t.len() <= PARTITION_2D_EXHAUSTIVE_MAX {
        if let Some(col) = graph.exact(&order, r, None)? {
            return Ok(split(t, &col, r));
        }
    }
    Err(Error::Infeasible(format!(
        "no partition of {} points into {r} subsets with separation {sep} (in lambda_c/2 units)",
        t.len()
    )))
}

/// Axis-aligned box `[lo, hi)` of grid indices per axis, for region sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridBox {
    pub lo: [usize; 2],
    pub hi: [usize; 2],
}

impl GridBox {
    pub fn whole(grid: &Grid) -> Self {
        let n = grid.size();
        Self { lo: [0, 0], hi: [n, if grid.dim() == 1 { 1 } else { n }] }
    }

    pub fn contains(&self, p: [usize; 2]) -> bool {
        (0..2).all(|a| p[a] >= self.lo[a] && p[a] < self.hi[a])
    }
}

const SAMPLE_RESTARTS: usize = 50;

/// Random support of `count` points in the class, verified by [`is_regular`].
pub fn sample_support(p: &RayleighParams, count: usize, seed: u64) -> Result<SupportSet> {
    sample_support_in(p, count, GridBox::whole(&p.grid), seed)
}

/// [`sample_support`] restricted to a box of the grid.
///
/// Random sequential addition: candidate points are drawn uniformly and kept
/// if some subset can take them without a conflict.
pub fn sample_support_in(p: &RayleighParams, count: usize, region: GridBox, seed: u64) -> Result<SupportSet> {
    let bound = p.packing_bound();
    if count > bound {
        return Err(Error::Infeasible(format!("{count} points exceed the packing bound {bound}")));
    }
    let window = p.window();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subset_order: Vec<usize> = (0..p.r).collect();
    for _ in 0..SAMPLE_RESTARTS {
        let mut subsets: Vec<Vec<[usize; 2]>> = vec![Vec::new(); p.r];
        let mut taken = std::collections::BTreeSet::new();
        let mut attempts = 0usize;
        while taken.len() < count && attempts < 200 * count.max(1) + 1000 {
            attempts += 1;
            let cand = [
                rng.random_range(region.lo[0]..region.hi[0]),
                rng.random_range(region.lo[1]..region.hi[1]),
            ];
            if taken.contains(&cand) {
                continue;
            }
            subset_order.shuffle(&mut rng);
            let home = subset_order.iter().copied().find(|&c| {
                subsets[c].iter().all(|&q| torus_distance(&p.grid, cand, q) >= window - DIST_EPS)
            });
            if let Some(c) = home {
                subsets[c].push(cand);
                taken.insert(cand);
            }
        }
        if taken.len() == count {
            let t = SupportSet::new(p.grid, taken.into_iter().collect())?;
            if is_regular(&t, p)?.regular {
                return Ok(t);
            }
        }
    }
    Err(Error::Infeasible(format!(
        "could not place {count} points in R(d={}, r={}) after {SAMPLE_RESTARTS} restarts",
        p.d, p.r
    )))
}
