//! Standard normal primitives and the integral kernels of the pricing and
//! free-boundary equations.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::ou_bridge::{canonical_drift, OubParams, Transition};
use crate::transform::TransformContext;

/// `1 − Φ(u)`, accurate in both tails.
pub fn survival(u: f64) -> f64 {
    0.5 * libm::erfc(u * FRAC_1_SQRT_2)
}

pub fn density(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Arguments `(t1, x1, t2, x2)` of `K`, with `0 ≤ t1 ≤ t2 < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuery {
    pub t1: f64,
    pub x1: f64,
    pub t2: f64,
    pub x2: f64,
}

impl KernelQuery {
    pub fn new(t1: f64, x1: f64, t2: f64, x2: f64) -> Result<Self> {
        if !(t1 >= 0.0 && t1 <= t2 && t2 < 1.0) {
            return Err(Error::domain(
                "kernel",
                format!("need 0 <= t1 <= t2 < 1, got t1 = {t1}, t2 = {t2}"),
            ));
        }
        if !x1.is_finite() || x2.is_nan() {
            return Err(Error::domain("kernel", "non-finite position"));
        }
        Ok(KernelQuery { t1, x1, t2, x2 })
    }
}

/// `K(t1, x1, t2, x2) = E[μ(t2, X_{t2}) 1(X_{t2} ≥ x2) | X_{t1} = x1]` in
/// closed form, for canonical parameters.
pub fn kernel(params: &OubParams, q: &KernelQuery) -> Result<f64> {
    params.ensure_canonical()?;
    Ok(kernel_unchecked(params, q.t1, q.x1, q.t2, q.x2))
}

/// Hot-loop form of [`kernel`]; the caller guarantees canonical parameters
/// and `0 ≤ t1 ≤ t2 < 1`.
#[inline]
pub(crate) fn kernel_unchecked(p: &OubParams, t1: f64, x1: f64, t2: f64, x2: f64) -> f64 {
    let tr = Transition::canonical(p, t1, t2);
    let m = tr.mean(x1);
    let v = tr.std;
    if v == 0.0 {
        // Continuity limit: the law of X_{t2} is a point mass at m.
        return if m >= x2 {
            canonical_drift(p, t2, m)
        } else {
            0.0
        };
    }
    let u = (x2 - m) / v;
    let surv = survival(u);
    let dens = density(u);
    let rem = p.alpha * (1.0 - t2);
    let bracket = p.z * surv - rem.cosh() * (m * surv + v * dens);
    p.alpha * bracket / rem.sinh()
}

/// Integrand of the transformed-space pricing formula,
/// `E[∂_s G_c(u, Y_u) 1(Y_u ≥ b_u) | Y_s = y]` with `c = c_z`.
pub fn transformed_integrand(
    ctx: &TransformContext,
    s: f64,
    y: f64,
    u: f64,
    b_u: f64,
) -> Result<f64> {
    if !(s >= 0.0 && u > s) {
        return Err(Error::domain(
            "transformed_integrand",
            format!("need 0 <= s < u, got s = {s}, u = {u}"),
        ));
    }
    let c = ctx.c_z;
    let fu = ctx.f(u);
    let sd = (u - s).sqrt();
    let w = (b_u - y) / sd;
    let surv = survival(w);
    let dens = density(w);
    let inner = c * surv - (ctx.a + 2.0 * u) * ((y + c * u) * surv + sd * dens) / (2.0 * fu * fu);
    Ok(inner / fu)
}
