//! Independent checks on a solved boundary: exact-law Monte Carlo of the
//! stopped payoff, paired perturbation tests, and a brute-force quadrature
//! oracle for the kernel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelQuery;
use crate::ou_bridge::{canonical_drift, OubParams, RngStream, Transition};
use crate::solver::{boundary_eval, BoundarySolution};

/// Paths per rng stream. Part of the determinism contract: changing it
/// changes every estimate.
const BLOCK_PATHS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    /// `None` monitors at the solver mesh nodes after `t0`; `Some(m)` uses
    /// `m` equal steps from `t0` to 1.
    pub time_nodes: Option<usize>,
    pub seed: u64,
    /// Worker-count hint; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 100_000,
            time_nodes: None,
            seed: 0x5eed,
            workers: None,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        if self.time_nodes == Some(0) {
            return Err(Error::Config("time_nodes must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sample mean with its standard error `sd / √n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Welford accumulator, merged across blocks in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    fn estimate(&self) -> McEstimate {
        let std_error = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            std_error,
            n: self.n,
        }
    }
}

/// One boundary shift evaluated on shared paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationEntry {
    pub delta: f64,
    pub estimate: McEstimate,
    /// Paired estimate of `payoff(delta) − payoff(0)`.
    pub diff_vs_zero: McEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub reference: McEstimate,
    pub entries: Vec<PerturbationEntry>,
}

/// Monitoring schedule: times after `t0`, the exact transition into each,
/// and the unshifted boundary there.
struct Schedule {
    steps: Vec<Transition>,
    boundary: Vec<f64>,
}

fn schedule(
    params: &OubParams,
    sol: &BoundarySolution,
    t0: f64,
    cfg: &McConfig,
) -> Result<Schedule> {
    let times: Vec<f64> = match cfg.time_nodes {
        None => {
            let nodes = sol.grid.nodes();
            nodes[sol.grid.first_after(t0)..].to_vec()
        }
        Some(m) => {
            let mut v: Vec<f64> = (1..=m)
                .map(|k| t0 + (1.0 - t0) * k as f64 / m as f64)
                .collect();
            *v.last_mut().unwrap() = 1.0;
            v
        }
    };
    let mut steps = Vec::with_capacity(times.len());
    let mut boundary = Vec::with_capacity(times.len());
    let mut prev = t0;
    for &t in &times {
        steps.push(params.transition(prev, t)?);
        boundary.push(boundary_eval(sol, t)?);
        prev = t;
    }
    Ok(Schedule { steps, boundary })
}

/// Simulates full paths and evaluates the first-crossing rule for every shift.
/// Entry 0 of the result is the first shift; diffs are taken against it.
fn simulate_shifts(
    params: &OubParams,
    sol: &BoundarySolution,
    t0: f64,
    x0: f64,
    shifts: &[f64],
    cfg: &McConfig,
) -> Result<(Vec<Moments>, Vec<Moments>)> {
    params.validate()?;
    params.ensure_canonical()?;
    cfg.validate()?;
    if !(t0 >= 0.0 && t0 < 1.0) || !x0.is_finite() {
        return Err(Error::domain(
            "simulate",
            format!("(t0, x0) = ({t0}, {x0})"),
        ));
    }
    let sched = schedule(params, sol, t0, cfg)?;
    let beta0 = boundary_eval(sol, t0)?;
    let z = params.z;
    let last = sched.steps.len() - 1;
    let n_blocks = cfg.paths.div_ceil(BLOCK_PATHS);

    let run_block = |b: usize| {
        let mut rng = RngStream::new(cfg.seed, b as u64);
        let count = BLOCK_PATHS.min(cfg.paths - b * BLOCK_PATHS);
        let mut pay = vec![Moments::default(); shifts.len()];
        let mut diff = vec![Moments::default(); shifts.len()];
        let mut payoff = vec![0.0; shifts.len()];
        let mut stopped = vec![false; shifts.len()];
        for _ in 0..count {
            for (k, &d) in shifts.iter().enumerate() {
                stopped[k] = x0 >= beta0 + d;
                payoff[k] = x0;
            }
            let mut x = x0;
            for (k, step) in sched.steps.iter().enumerate() {
                let xi = rng.standard_normal();
                x = if k == last {
                    z
                } else {
                    step.mean(x) + step.std * xi
                };
                for (s, &d) in shifts.iter().enumerate() {
                    if !stopped[s] && (k == last || x >= sched.boundary[k] + d) {
                        stopped[s] = true;
                        payoff[s] = x;
                    }
                }
            }
            for s in 0..shifts.len() {
                pay[s].push(payoff[s]);
                diff[s].push(payoff[s] - payoff[0]);
            }
        }
        (pay, diff)
    };

    let blocks: Vec<(Vec<Moments>, Vec<Moments>)> = match cfg.workers {
        None => (0..n_blocks).into_par_iter().map(run_block).collect(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| (0..n_blocks).into_par_iter().map(run_block).collect()),
    };

    let mut pay = vec![Moments::default(); shifts.len()];
    let mut diff = vec![Moments::default(); shifts.len()];
    for (bp, bd) in &blocks {
        for s in 0..shifts.len() {
            pay[s].merge(&bp[s]);
            diff[s].merge(&bd[s]);
        }
    }
    Ok((pay, diff))
}

/// Expected payoff of stopping at the first monitoring time where
/// `X ≥ β(t)`, or at the horizon (payoff `z`) if that never happens.
pub fn simulate_stopped_payoff(
    params: &OubParams,
    sol: &BoundarySolution,
    t0: f64,
    x0: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let (pay, _) = simulate_shifts(params, sol, t0, x0, &[0.0], cfg)?;
    Ok(pay[0].estimate())
}

/// Evaluates the rule with boundary `β + δ` for each `δ` on common random
/// numbers, alongside the unshifted rule.
pub fn perturbation_test(
    params: &OubParams,
    sol: &BoundarySolution,
    deltas: &[f64],
    t0: f64,
    x0: f64,
    cfg: &McConfig,
) -> Result<PerturbationReport> {
    let mut shifts = Vec::with_capacity(deltas.len() + 1);
    shifts.push(0.0);
    shifts.extend_from_slice(deltas);
    let (pay, diff) = simulate_shifts(params, sol, t0, x0, &shifts, cfg)?;
    let entries = deltas
        .iter()
        .enumerate()
        .map(|(k, &delta)| PerturbationEntry {
            delta,
            estimate: pay[k + 1].estimate(),
            diff_vs_zero: diff[k + 1].estimate(),
        })
        .collect();
    Ok(PerturbationReport {
        reference: pay[0].estimate(),
        entries,
    })
}

/// `E[μ(t2, X_{t2}) 1(X_{t2} ≥ x2) | X_{t1} = x1]` by adaptive quadrature
/// against the Gaussian density, over `[max(x2, m − 12v), m + 12v]`.
/// Mass beyond 12 standard deviations is below `1e−32` and is dropped.
pub fn kernel_oracle(params: &OubParams, q: &KernelQuery) -> Result<f64> {
    params.ensure_canonical()?;
    let tr = params.transition(q.t1, q.t2)?;
    let (m, v) = (tr.mean(q.x1), tr.std);
    if v == 0.0 {
        return Ok(if m >= q.x2 {
            canonical_drift(params, q.t2, m)
        } else {
            0.0
        });
    }
    let lo = ((q.x2 - m) / v).max(-12.0);
    if lo >= 12.0 {
        return Ok(0.0);
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    gauss_kronrod(
        |u| canonical_drift(params, q.t2, m + v * u) * norm * (-0.5 * u * u).exp(),
        lo,
        12.0,
        1e-13,
    )
}

// Gauss–Kronrod (7, 15) abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` on `[a, b]` to absolute
/// tolerance `tol`, bisecting the interval with the largest error estimate.
pub fn gauss_kronrod(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 2000;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite limits [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut parts = vec![(a, b, gk15(&f, a, b))];
    loop {
        let (total, err) = parts
            .iter()
            .fold((0.0, 0.0), |(s, e), p| (s + p.2 .0, e + p.2 .1));
        if !total.is_finite() {
            return Err(Error::Quadrature("integrand is not finite".into()));
        }
        if err <= tol {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above tolerance {tol:e} after {MAX_INTERVALS} intervals"
            )));
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&f, lo, mid)));
        parts.push((mid, hi, gk15(&f, mid, hi)));
    }
}
