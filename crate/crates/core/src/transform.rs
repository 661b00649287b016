//! Time-space change of variables between the OU bridge stopping problem and
//! an infinite-horizon problem for a Brownian motion `Y` with gain
//! `G_c(s, y) = (cs + y) / f(s)`.
//!
//! A canonical bridge satisfies `X_t = scale · G_{c_z}(υ(t), Y_{υ(t)})`, so a
//! state `(t, x)` corresponds to `(s, y) = (υ(t), x f(s)/scale − c_z s)`.
//! The constant `scale = γ√(κ(1)e^α)` replaces the ratio `z / c_z`, which is
//! `0/0` when `z = 0`.

use crate::error::{Error, Result};
use crate::ou_bridge::OubParams;

/// `κ(t) = (1 − e^{−2αt}) / (2α)`.
pub fn kappa(alpha: f64, t: f64) -> f64 {
    -(-2.0 * alpha * t).exp_m1() / (2.0 * alpha)
}

/// `κ⁻¹(s) = −ln(1 − 2αs) / (2α)`.
pub fn kappa_inv(alpha: f64, s: f64) -> Result<f64> {
    let arg = -2.0 * alpha * s;
    if arg <= -1.0 || arg.is_nan() {
        return Err(Error::domain(
            "kappa_inv",
            format!("1 - 2 alpha s = {} is not positive", 1.0 + arg),
        ));
    }
    Ok(-arg.ln_1p() / (2.0 * alpha))
}

fn check_open_unit(op: &'static str, t: f64) -> Result<()> {
    if t >= 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(op, format!("t = {t} outside [0, 1)")))
    }
}

/// `ψ(t) = κ(t)κ(1) / (κ(1) − κ(t))` on `[0, 1)`.
pub fn psi(alpha: f64, t: f64) -> Result<f64> {
    check_open_unit("psi", t)?;
    // κ(1) − κ(t) = e^{−2αt} κ(1 − t), free of cancellation near t = 1.
    let gap = (-2.0 * alpha * t).exp() * kappa(alpha, 1.0 - t);
    Ok(kappa(alpha, t) * kappa(alpha, 1.0) / gap)
}

/// `υ(t) = ψ(t) e^{−α} / κ(1)`, a strictly increasing bijection `[0,1) → [0,∞)`.
pub fn upsilon(alpha: f64, t: f64) -> Result<f64> {
    Ok(psi(alpha, t)? * (-alpha).exp() / kappa(alpha, 1.0))
}

pub fn upsilon_inv(alpha: f64, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain("upsilon_inv", format!("s = {s} is negative")));
    }
    if s.is_infinite() {
        return Ok(1.0);
    }
    let k1 = kappa(alpha, 1.0);
    let psi = s * k1 * alpha.exp();
    kappa_inv(alpha, psi * k1 / (psi + k1))
}

/// `dυ/dt = e^{2αt − α} κ(1) / κ(1 − t)²`.
pub fn upsilon_deriv(alpha: f64, t: f64) -> Result<f64> {
    check_open_unit("upsilon_deriv", t)?;
    let rem = kappa(alpha, 1.0 - t);
    Ok((alpha * (2.0 * t - 1.0)).exp() * kappa(alpha, 1.0) / (rem * rem))
}

/// `f(s) = √((e^α + s)(e^{−α} + s))`.
pub fn f(alpha: f64, s: f64) -> f64 {
    ((alpha.exp() + s) * ((-alpha).exp() + s)).sqrt()
}

/// `f′(s) = (a + 2s) / (2 f(s))` with `a = e^{−α} + e^{α}`.
pub fn f_prime(alpha: f64, s: f64) -> f64 {
    let a = (-alpha).exp() + alpha.exp();
    (a + 2.0 * s) / (2.0 * f(alpha, s))
}

/// Gain `G_c(s, y) = (cs + y) / f(s)`.
pub fn gain(c: f64, alpha: f64, s: f64, y: f64) -> f64 {
    (c * s + y) / f(alpha, s)
}

/// `∂_s G_c(s, y) = (c(f − s f′) − f′ y) / f²`.
pub fn gain_t(c: f64, alpha: f64, s: f64, y: f64) -> f64 {
    let fs = f(alpha, s);
    let fp = f_prime(alpha, s);
    (c * (fs - s * fp) - fp * y) / (fs * fs)
}

/// `∂_y G_c(s, y) = 1 / f(s)`.
pub fn gain_x(alpha: f64, s: f64) -> f64 {
    1.0 / f(alpha, s)
}

/// Constants of the change of variables for one canonical bridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformContext {
    pub alpha: f64,
    pub gamma: f64,
    pub z: f64,
    /// Gain parameter `c_z = z / scale`.
    pub c_z: f64,
    /// `a = e^{−α} + e^{α}`.
    pub a: f64,
    /// `γ√(κ(1)e^α)`, so that `z = c_z · scale`.
    pub scale: f64,
}

impl TransformContext {
    pub fn new(params: &OubParams) -> Result<Self> {
        params.validate()?;
        params.ensure_canonical()?;
        let (alpha, gamma, z) = (params.alpha, params.gamma, params.z);
        let scale = gamma * (kappa(alpha, 1.0) * alpha.exp()).sqrt();
        Ok(TransformContext {
            alpha,
            gamma,
            z,
            c_z: z / scale,
            a: (-alpha).exp() + alpha.exp(),
            scale,
        })
    }

    pub fn f(&self, s: f64) -> f64 {
        f(self.alpha, s)
    }

    /// Lower bound `c(f(s) − s f′(s)) / f(s)` on the transformed boundary.
    pub fn boundary_lower_bound(&self, s: f64) -> f64 {
        let fs = self.f(s);
        self.c_z * (fs - s * f_prime(self.alpha, s)) / fs
    }

    /// Level `c(f(s) − s f′(s)) / f′(s)` below which `∂_s G > 0`; the
    /// continuation set contains every point under it.
    pub fn continuation_threshold(&self, s: f64) -> f64 {
        let fp = f_prime(self.alpha, s);
        self.c_z * (self.f(s) - s * fp) / fp
    }

    /// Maps a transformed boundary point `(s, b(s))` to `(t, β(t))`.
    pub fn boundary_to_original(&self, s: f64, b_s: f64) -> Result<(f64, f64)> {
        let t = upsilon_inv(self.alpha, s)?;
        Ok((t, self.scale * gain(self.c_z, self.alpha, s, b_s)))
    }

    /// Maps `(t, x)` (a boundary point or any state) to `(s, y)`.
    pub fn original_to_transformed(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        let s = upsilon(self.alpha, t)?;
        Ok((s, x * self.f(s) / self.scale - self.c_z * s))
    }

    /// `V(t, x) = scale · W_{c_z}(s, y)` at matched arguments.
    pub fn value_to_original(&self, w_value: f64) -> f64 {
        self.scale * w_value
    }
}
