//! Value function from a solved boundary.
//!
//! `V(t, x) = z − ∫_t^1 K(t, x, u, β(u)) du` is discretized on the solver's
//! own mesh, so that at a node `V(t_i, β_i)` reproduces the free-boundary
//! sum exactly. The transformed-space formula
//! `W(s, y) = c − ∫_s^∞ E[∂_s G(u, Y_u) 1(Y_u ≥ b(u))] du` is kept as an
//! independent mirror.

use crate::error::{Error, Result};
use crate::kernel::{kernel_unchecked, transformed_integrand};
use crate::ou_bridge::OubParams;
use crate::solver::{boundary_eval, BoundarySolution};
use crate::transform::{upsilon, upsilon_inv, TransformContext};

/// Evaluation point `(t, x)` of the value function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueSurfaceQuery {
    pub t: f64,
    pub x: f64,
    /// `None` reuses the solver mesh on `(t, 1]`. `Some(m)` switches to an
    /// independent logarithmic mesh of `m` intervals on `[t, 1]`, with the
    /// boundary interpolated.
    pub quadrature_nodes: Option<usize>,
}

impl ValueSurfaceQuery {
    pub fn new(t: f64, x: f64) -> Self {
        ValueSurfaceQuery {
            t,
            x,
            quadrature_nodes: None,
        }
    }
}

/// `V(t, x)` for canonical parameters. Points on or above the boundary
/// return `x`.
pub fn value(params: &OubParams, sol: &BoundarySolution, q: &ValueSurfaceQuery) -> Result<f64> {
    params.ensure_canonical()?;
    let (t, x) = (q.t, q.x);
    if !(t >= 0.0 && t < 1.0) {
        return Err(Error::domain("value", format!("t = {t} outside [0, 1)")));
    }
    if !x.is_finite() {
        return Err(Error::domain("value", format!("x = {x} is not finite")));
    }
    if x >= boundary_eval(sol, t)? {
        return Ok(x);
    }
    formula_value(params, sol, q)
}

/// The pricing formula itself, without the stopping-region clamp.
pub fn formula_value(
    params: &OubParams,
    sol: &BoundarySolution,
    q: &ValueSurfaceQuery,
) -> Result<f64> {
    params.ensure_canonical()?;
    let (t, x) = (q.t, q.x);
    if !(t >= 0.0 && t < 1.0) || !x.is_finite() {
        return Err(Error::domain(
            "formula_value",
            format!("(t, x) = ({t}, {x})"),
        ));
    }
    let mut acc = 0.0;
    match q.quadrature_nodes {
        None => {
            let nodes = sol.grid.nodes();
            let n = nodes.len() - 1;
            let k = sol.grid.first_after(t);
            // Intervals [prev, t_j] for j = k..=N-1; [t_{N-1}, 1] is dropped.
            let mut prev = t;
            for j in k..n {
                acc += kernel_unchecked(params, t, x, nodes[j], sol.beta[j]) * (nodes[j] - prev);
                prev = nodes[j];
            }
        }
        Some(m) => {
            if m < 2 {
                return Err(Error::Config(format!(
                    "quadrature_nodes must be at least 2, got {m}"
                )));
            }
            let span = 1.0 - t;
            let step = (std::f64::consts::E - 1.0) / m as f64;
            let mut prev = t;
            for i in 1..m {
                let u = t + span * (i as f64 * step).ln_1p();
                acc += kernel_unchecked(params, t, x, u, boundary_eval(sol, u)?) * (u - prev);
                prev = u;
            }
        }
    }
    Ok(params.z - acc)
}

/// Solved boundary carried into transformed coordinates `(s, b(s))`.
#[derive(Debug, Clone)]
pub struct TransformedBoundary<'a> {
    ctx: TransformContext,
    sol: &'a BoundarySolution,
    /// Image nodes `υ(t_j)` for `j = 0..N−1`, then `υ(1 − 1e−6)`.
    s_nodes: Vec<f64>,
    b_nodes: Vec<f64>,
}

/// Cutoff of the improper transformed integral, in original time.
pub const TRANSFORMED_CUTOFF: f64 = 1.0 - 1e-6;

impl<'a> TransformedBoundary<'a> {
    pub fn new(ctx: &TransformContext, sol: &'a BoundarySolution) -> Result<Self> {
        let nodes = sol.grid.nodes();
        let n = nodes.len() - 1;
        let mut s_nodes = Vec::with_capacity(n + 1);
        let mut b_nodes = Vec::with_capacity(n + 1);
        for j in 0..n {
            let (s, b) = ctx.original_to_transformed(nodes[j], sol.beta[j])?;
            s_nodes.push(s);
            b_nodes.push(b);
        }
        if TRANSFORMED_CUTOFF > nodes[n - 1] {
            let beta = boundary_eval(sol, TRANSFORMED_CUTOFF)?;
            let (s, b) = ctx.original_to_transformed(TRANSFORMED_CUTOFF, beta)?;
            s_nodes.push(s);
            b_nodes.push(b);
        }
        Ok(TransformedBoundary {
            ctx: *ctx,
            sol,
            s_nodes,
            b_nodes,
        })
    }

    pub fn context(&self) -> &TransformContext {
        &self.ctx
    }

    /// `b(s)`, via the interpolated original boundary at `υ⁻¹(s)`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let t = upsilon_inv(self.ctx.alpha, s)?;
        if t >= 1.0 {
            return Err(Error::domain(
                "TransformedBoundary::eval",
                "s maps to the horizon",
            ));
        }
        let beta = boundary_eval(self.sol, t)?;
        Ok(self.ctx.original_to_transformed(t, beta)?.1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.s_nodes
            .iter()
            .copied()
            .zip(self.b_nodes.iter().copied())
    }
}

/// `W_{c_z}(s, y)` by a right Riemann sum over the image of the solver mesh,
/// truncated at `υ(1 − 1e−6)`. Points on or above `b(s)` return the gain.
pub fn transformed_value(tb: &TransformedBoundary<'_>, s: f64, y: f64) -> Result<f64> {
    let ctx = tb.context();
    if !(s >= 0.0) || !y.is_finite() {
        return Err(Error::domain(
            "transformed_value",
            format!("(s, y) = ({s}, {y})"),
        ));
    }
    let s_max = upsilon(ctx.alpha, TRANSFORMED_CUTOFF)?;
    if s >= s_max {
        return Err(Error::domain(
            "transformed_value",
            format!("s = {s} beyond the truncation point {s_max}"),
        ));
    }
    if y >= tb.eval(s)? {
        return Ok(crate::transform::gain(ctx.c_z, ctx.alpha, s, y));
    }
    let k = tb.s_nodes.partition_point(|&u| u <= s);
    let mut acc = 0.0;
    let mut prev = s;
    for j in k..tb.s_nodes.len() {
        let u = tb.s_nodes[j];
        acc += transformed_integrand(ctx, s, y, u, tb.b_nodes[j])? * (u - prev);
        prev = u;
    }
    Ok(ctx.c_z - acc)
}
