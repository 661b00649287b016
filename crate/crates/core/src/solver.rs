//! Discretized free-boundary equation
//! `β(t) = z − ∫_t^1 K(t, β(t), u, β(u)) du`, solved on a time mesh with a
//! right Riemann sum whose last addend (the interval ending at `t = 1`,
//! where `K` is undefined) is dropped.
//!
//! Two solvers share that discretization: Picard iteration over the whole
//! boundary, and node-by-node backward induction from `β(1) = z`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::kernel_unchecked;
use crate::ou_bridge::{CanonicalReduction, OubParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshKind {
    #[default]
    Logarithmic,
    Uniform,
}

/// Partition `0 = t_0 < t_1 < … < t_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(kind: MeshKind, n: usize) -> Result<Self> {
        match kind {
            MeshKind::Logarithmic => log_partition(n),
            MeshKind::Uniform => uniform_partition(n),
        }
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Config(format!(
                "a time grid needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::Config(
                "time grid must start at 0 and end at 1".into(),
            ));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "time grid must be strictly increasing".into(),
            ));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals `N`.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Index of the first node strictly greater than `t`.
    pub(crate) fn first_after(&self, t: f64) -> usize {
        self.nodes.partition_point(|&x| x <= t)
    }
}

/// `t_i = ln(1 + i(e − 1)/N)`, `i = 0..=N`, with `t_N` set to exactly 1.
pub fn log_partition(n: usize) -> Result<TimeGrid> {
    check_mesh_size(n)?;
    let step = (std::f64::consts::E - 1.0) / n as f64;
    let mut nodes: Vec<f64> = (0..=n).map(|i| (i as f64 * step).ln_1p()).collect();
    nodes[n] = 1.0;
    Ok(TimeGrid { nodes })
}

pub fn uniform_partition(n: usize) -> Result<TimeGrid> {
    check_mesh_size(n)?;
    let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    nodes[n] = 1.0;
    Ok(TimeGrid { nodes })
}

fn check_mesh_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Config(format!(
            "mesh size N must be at least 2, got {n}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub n: usize,
    pub eps: f64,
    pub max_iter: usize,
    pub mesh: MeshKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: 500,
            eps: 1e-4,
            max_iter: 500,
            mesh: MeshKind::Logarithmic,
        }
    }
}

impl SolverConfig {
    pub fn with_n(self, n: usize) -> Self {
        SolverConfig { n, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        check_mesh_size(self.n)?;
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Picard,
    Backward,
    /// Loaded from a file or built by hand.
    External,
}

/// Boundary values `β_i` on a canonical time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySolution {
    pub grid: TimeGrid,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    /// Sup-norm change per Picard sweep (empty for other methods).
    pub residuals: Vec<f64>,
    pub method: Method,
}

impl BoundarySolution {
    /// Wraps externally supplied boundary values; `beta` must align with the grid.
    pub fn from_values(grid: TimeGrid, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != grid.nodes().len() {
            return Err(Error::Config(format!(
                "{} boundary values for {} grid nodes",
                beta.len(),
                grid.nodes().len()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("boundary values must be finite".into()));
        }
        Ok(BoundarySolution {
            grid,
            beta,
            iterations: 0,
            final_residual: 0.0,
            residuals: Vec::new(),
            method: Method::External,
        })
    }

    /// Terminal value `β(1)`, which equals the pinning point.
    pub fn terminal(&self) -> f64 {
        *self.beta.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        boundary_eval(self, t)
    }

    /// Copy with every node shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> BoundarySolution {
        BoundarySolution {
            beta: self.beta.iter().map(|b| b + delta).collect(),
            method: Method::External,
            ..self.clone()
        }
    }
}

/// Piecewise-linear interpolation of the boundary, exact at the nodes.
pub fn boundary_eval(sol: &BoundarySolution, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(
            "boundary_eval",
            format!("t = {t} outside [0, 1]"),
        ));
    }
    let nodes = sol.grid.nodes();
    let k = sol.grid.first_after(t);
    if k == 0 {
        return Ok(sol.beta[0]);
    }
    if k == nodes.len() || nodes[k - 1] == t {
        return Ok(sol.beta[k - 1]);
    }
    let (t0, t1) = (nodes[k - 1], nodes[k]);
    let (b0, b1) = (sol.beta[k - 1], sol.beta[k]);
    if t - t0 == t1 - t {
        return Ok(0.5 * (b0 + b1));
    }
    let w = (t - t0) / (t1 - t0);
    Ok(b0 + w * (b1 - b0))
}

/// Right Riemann sum `Σ_{j=i}^{N-2} K(t_i, x, t_{j+1}, β_{j+1}) (t_{j+1} − t_j)`.
#[inline]
fn riemann_tail(p: &OubParams, nodes: &[f64], beta: &[f64], i: usize, x: f64) -> f64 {
    let n = nodes.len() - 1;
    let ti = nodes[i];
    let mut acc = 0.0;
    for j in i..n.saturating_sub(1) {
        acc += kernel_unchecked(p, ti, x, nodes[j + 1], beta[j + 1]) * (nodes[j + 1] - nodes[j]);
    }
    acc
}

fn prepare(params: &OubParams, cfg: &SolverConfig) -> Result<TimeGrid> {
    params.validate()?;
    params.ensure_canonical()?;
    cfg.validate()?;
    TimeGrid::new(cfg.mesh, cfg.n)
}

/// Picard iteration started from `β ≡ z`, stopped at the first sweep whose
/// sup-norm change drops below `cfg.eps`.
pub fn picard_solve(params: &OubParams, cfg: &SolverConfig) -> Result<BoundarySolution> {
    let grid = prepare(params, cfg)?;
    let n = grid.n();
    let z = params.z;
    let nodes = grid.nodes();
    let mut beta = vec![z; n + 1];
    let mut residuals = Vec::new();

    for k in 1..=cfg.max_iter {
        let prev = &beta;
        let next: Vec<f64> = (0..=n)
            .into_par_iter()
            .map(|i| {
                if i == n {
                    z
                } else {
                    z - riemann_tail(params, nodes, prev, i, prev[i])
                }
            })
            .collect();
        let residual = next
            .iter()
            .zip(prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        residuals.push(residual);
        beta = next;
        if !residual.is_finite() {
            break;
        }
        if residual < cfg.eps {
            return Ok(BoundarySolution {
                grid,
                beta,
                iterations: k,
                final_residual: residual,
                residuals,
                method: Method::Picard,
            });
        }
    }

    let residual = residuals.last().copied().unwrap_or(f64::NAN);
    let iterations = residuals.len();
    Err(Error::NonConvergence {
        iterations,
        residual,
        partial: Box::new(BoundarySolution {
            grid,
            beta,
            iterations,
            final_residual: residual,
            residuals,
            method: Method::Picard,
        }),
    })
}

const UNDAMPED_STEPS: usize = 20;
const MAX_SCALAR_STEPS: usize = 200;
const DAMPING: f64 = 0.5;
const BRACKET_WIDTH: f64 = 10.0;

/// Backward induction: for `i = N−1, …, 0` solve the scalar equation
/// `β_i = z − Σ_{j≥i} K(t_i, β_i, t_{j+1}, β_{j+1}) Δ_j` with later nodes
/// fixed. Fixed-point steps (damped after the first 20) with a bisection
/// fallback on `[z − 10γ, z + 10γ]`.
pub fn backward_solve(params: &OubParams, cfg: &SolverConfig) -> Result<BoundarySolution> {
    let grid = prepare(params, cfg)?;
    let n = grid.n();
    let z = params.z;
    let nodes = grid.nodes();
    // Scalar steps have to resolve well below the Picard stop rule.
    let tol = (cfg.eps * 1e-3).max(1e-13);
    let mut beta = vec![z; n + 1];
    let mut total_steps = 0;
    let mut worst = 0.0f64;

    for i in (0..n).rev() {
        let map = |x: f64| z - riemann_tail(params, nodes, &beta, i, x);
        let mut x = beta[i + 1];
        let mut solved = false;
        for step in 0..MAX_SCALAR_STEPS {
            total_steps += 1;
            let fx = map(x);
            let next = if step < UNDAMPED_STEPS {
                fx
            } else {
                x + DAMPING * (fx - x)
            };
            if !next.is_finite() {
                break;
            }
            let done = (next - x).abs() < tol;
            x = next;
            if done {
                solved = true;
                break;
            }
        }
        if !solved {
            x = bisect(
                &map,
                z - BRACKET_WIDTH * params.gamma,
                z + BRACKET_WIDTH * params.gamma,
                tol,
            )
            .map_err(|reason| Error::ScalarSolve { node: i, reason })?;
        }
        worst = worst.max((map(x) - x).abs());
        beta[i] = x;
    }

    Ok(BoundarySolution {
        grid,
        beta,
        iterations: total_steps,
        final_residual: worst,
        residuals: Vec::new(),
        method: Method::Backward,
    })
}

fn bisect(
    map: &impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> std::result::Result<f64, String> {
    let g = |x: f64| map(x) - x;
    let (mut glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(format!("no sign change on bracket [{lo}, {hi}]"));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Boundary of a general (θ, T) bridge, obtained from the canonical solve.
#[derive(Debug, Clone)]
pub struct OriginalBoundary {
    pub reduction: CanonicalReduction,
    pub canonical: BoundarySolution,
}

impl OriginalBoundary {
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (tc, _) = self.reduction.to_canonical(t, 0.0);
        Ok(self
            .reduction
            .level_from_canonical(boundary_eval(&self.canonical, tc)?))
    }

    /// `(t_i, β_i)` in original coordinates.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.canonical
            .grid
            .nodes()
            .iter()
            .zip(&self.canonical.beta)
            .map(|(&t, &b)| self.reduction.from_canonical(t, b))
    }
}

/// Picard solve for arbitrary pulling level and horizon.
pub fn solve(params: &OubParams, cfg: &SolverConfig) -> Result<OriginalBoundary> {
    params.validate()?;
    let reduction = params.reduce_to_canonical();
    let canonical = picard_solve(&reduction.canonical, cfg)?;
    Ok(OriginalBoundary {
        reduction,
        canonical,
    })
}
