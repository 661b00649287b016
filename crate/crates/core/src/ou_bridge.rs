//! Ornstein–Uhlenbeck bridge: parameters, drift, Gaussian transition law and
//! exact path sampling.
//!
//! The bridge solves `dX = μ(t, X) dt + γ dB` on `[0, T]` with `X_T = z`.
//! Everything numerical is done in canonical coordinates (pulling level 0,
//! horizon 1). General parameters go through [`CanonicalReduction`], which
//! composes a pulling-level shift `x ↦ x − θ` with the time rescaling
//! `t ↦ t / T` (slope `αT`, volatility `γ√T`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Parameters of an OU bridge with slope `alpha`, volatility `gamma`, pinning
/// point `z`, pulling level `theta` and horizon `horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OubParams {
    pub alpha: f64,
    pub gamma: f64,
    pub z: f64,
    pub theta: f64,
    pub horizon: f64,
}

impl OubParams {
    /// Canonical bridge (`theta = 0`, `horizon = 1`).
    pub fn new(alpha: f64, gamma: f64, z: f64) -> Result<Self> {
        Self::general(alpha, gamma, z, 0.0, 1.0)
    }

    pub fn general(alpha: f64, gamma: f64, z: f64, theta: f64, horizon: f64) -> Result<Self> {
        let p = OubParams {
            alpha,
            gamma,
            z,
            theta,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value, reason| {
            Err(Error::InvalidParameter {
                name,
                value,
                reason,
            })
        };
        if !self.alpha.is_finite() || self.alpha == 0.0 {
            return bad("alpha", self.alpha, "must be finite and non-zero");
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad("gamma", self.gamma, "must be finite and positive");
        }
        if !self.z.is_finite() {
            return bad("z", self.z, "must be finite");
        }
        if !self.theta.is_finite() {
            return bad("theta", self.theta, "must be finite");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad("horizon", self.horizon, "must be finite and positive");
        }
        Ok(())
    }

    pub fn is_canonical(&self) -> bool {
        self.theta == 0.0 && self.horizon == 1.0
    }

    pub(crate) fn ensure_canonical(&self) -> Result<()> {
        if self.is_canonical() {
            Ok(())
        } else {
            Err(Error::NotCanonical)
        }
    }

    /// Horizon rescaling with an arbitrary factor `r > 0`.
    ///
    /// A bridge with slope `α`, volatility `γ` and horizon `T` observed at
    /// time `t` has the law of the bridge with slope `α / r`, volatility
    /// `γ r^{-1/2}` and horizon `rT` observed at `rt`. Pulling level and
    /// pinning point are untouched.
    pub fn rescale_horizon(&self, r: f64) -> Result<OubParams> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                value: r,
                reason: "time scale must be finite and positive",
            });
        }
        OubParams::general(
            self.alpha / r,
            self.gamma / r.sqrt(),
            self.z,
            self.theta,
            self.horizon * r,
        )
    }

    pub fn reduce_to_canonical(&self) -> CanonicalReduction {
        // Pulling level first, then time.
        let shifted = OubParams {
            z: self.z - self.theta,
            theta: 0.0,
            ..*self
        };
        let horizon = self.horizon;
        let canonical = if horizon == 1.0 {
            shifted
        } else {
            OubParams {
                alpha: shifted.alpha * horizon,
                gamma: shifted.gamma * horizon.sqrt(),
                horizon: 1.0,
                ..shifted
            }
        };
        CanonicalReduction {
            canonical,
            horizon,
            space_shift: self.theta,
        }
    }

    /// Drift `μ(t, x)` of the bridge, in this parameter set's own coordinates.
    pub fn drift(&self, t: f64, x: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::domain(
                "drift",
                format!("t = {t} outside [0, {})", self.horizon),
            ));
        }
        if self.is_canonical() {
            return Ok(canonical_drift(self, t, x));
        }
        let red = self.reduce_to_canonical();
        let (tc, xc) = red.to_canonical(t, x);
        Ok(canonical_drift(&red.canonical, tc, xc) / red.horizon)
    }

    /// `E[X_{t2} | X_{t1} = x1]`.
    pub fn cond_mean(&self, t1: f64, x1: f64, t2: f64) -> Result<f64> {
        Ok(self.transition(t1, t2)?.mean(x1))
    }

    /// Standard deviation of `X_{t2}` given `X_{t1}`.
    pub fn cond_std(&self, t1: f64, t2: f64) -> Result<f64> {
        Ok(self.transition(t1, t2)?.std)
    }

    /// Gaussian transition law from `t1` to `t2`, `0 ≤ t1 ≤ t2 ≤ T`, `t1 < T`.
    pub fn transition(&self, t1: f64, t2: f64) -> Result<Transition> {
        if !(t1 >= 0.0 && t1 < self.horizon && t2 >= t1 && t2 <= self.horizon) {
            return Err(Error::domain(
                "transition",
                format!(
                    "need 0 <= t1 <= t2 <= {} and t1 < {}, got t1 = {t1}, t2 = {t2}",
                    self.horizon, self.horizon
                ),
            ));
        }
        if self.is_canonical() {
            return Ok(Transition::canonical(self, t1, t2));
        }
        let red = self.reduce_to_canonical();
        let tr = Transition::canonical(&red.canonical, t1 / red.horizon, t2 / red.horizon);
        // Undo the pulling-level shift: mean(x) = θ + slope·(x − θ) + offset.
        Ok(Transition {
            slope: tr.slope,
            offset: tr.offset + self.theta * (1.0 - tr.slope),
            std: tr.std,
        })
    }

    /// Exact draw of `X_{t2}` given `state`.
    pub fn sample_transition(
        &self,
        state: ProcessState,
        t2: f64,
        rng: &mut RngStream,
    ) -> Result<f64> {
        if !(state.t < t2 && t2 <= self.horizon) {
            return Err(Error::domain(
                "sample_transition",
                format!(
                    "need state.t < t2 <= {}, got {} and {t2}",
                    self.horizon, state.t
                ),
            ));
        }
        if t2 == self.horizon {
            return Ok(self.z);
        }
        let tr = self.transition(state.t, t2)?;
        Ok(tr.sample(state.x, rng))
    }
}

impl Default for OubParams {
    fn default() -> Self {
        OubParams {
            alpha: 1.0,
            gamma: 1.0,
            z: 0.0,
            theta: 0.0,
            horizon: 1.0,
        }
    }
}

/// A point `(t, x)` of the bridge's state space, `t` strictly before the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessState {
    pub t: f64,
    pub x: f64,
}

impl ProcessState {
    pub fn new(params: &OubParams, t: f64, x: f64) -> Result<Self> {
        if !(t >= 0.0 && t < params.horizon) || !x.is_finite() {
            return Err(Error::domain(
                "ProcessState",
                format!("(t, x) = ({t}, {x}) outside [0, {}) x R", params.horizon),
            ));
        }
        Ok(ProcessState { t, x })
    }
}

/// Affine maps between a general bridge and its canonical form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalReduction {
    pub canonical: OubParams,
    /// Original horizon `T`; canonical time is `t / T`.
    pub horizon: f64,
    /// Pulling level `θ`; canonical space is `x − θ`.
    pub space_shift: f64,
}

impl CanonicalReduction {
    /// Time scale `r = 1 / T`.
    pub fn time_scale(&self) -> f64 {
        1.0 / self.horizon
    }

    pub fn to_canonical(&self, t: f64, x: f64) -> (f64, f64) {
        (t / self.horizon, x - self.space_shift)
    }

    pub fn from_canonical(&self, t: f64, x: f64) -> (f64, f64) {
        (t * self.horizon, x + self.space_shift)
    }

    /// Boundary and value functions shift by `θ` in space.
    pub fn level_from_canonical(&self, v: f64) -> f64 {
        v + self.space_shift
    }
}

/// `X_{t2} | X_{t1} = x ~ N(slope·x + offset, std²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub slope: f64,
    pub offset: f64,
    pub std: f64,
}

impl Transition {
    /// Canonical-coordinate law; caller guarantees `0 ≤ t1 ≤ t2 ≤ 1`, `t1 < 1`.
    pub(crate) fn canonical(p: &OubParams, t1: f64, t2: f64) -> Self {
        if t2 == t1 {
            return Transition {
                slope: 1.0,
                offset: 0.0,
                std: 0.0,
            };
        }
        let a = p.alpha;
        let s_rem1 = (a * (1.0 - t1)).sinh();
        let s_rem2 = (a * (1.0 - t2)).sinh();
        let s_gap = (a * (t2 - t1)).sinh();
        let var = p.gamma * p.gamma / a * s_rem2 * s_gap / s_rem1;
        Transition {
            slope: s_rem2 / s_rem1,
            offset: p.z * s_gap / s_rem1,
            std: var.max(0.0).sqrt(),
        }
    }

    pub fn mean(&self, x: f64) -> f64 {
        if self.slope == 1.0 && self.offset == 0.0 {
            return x;
        }
        self.slope * x + self.offset
    }

    pub fn sample(&self, x: f64, rng: &mut RngStream) -> f64 {
        self.mean(x) + self.std * rng.standard_normal()
    }
}

/// `α(z − cosh(α(1−t))x) / sinh(α(1−t))`; no domain checks.
#[inline]
pub(crate) fn canonical_drift(p: &OubParams, t: f64, x: f64) -> f64 {
    let rem = p.alpha * (1.0 - t);
    p.alpha * (p.z - rem.cosh() * x) / rem.sinh()
}

/// Deterministic random stream: a ChaCha8 generator keyed by `(seed, stream)`.
///
/// Distinct stream ids give independent sequences under one seed, which is
/// what lets path blocks be simulated on any number of workers.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { rng }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}
