//! Optimal stopping of an Ornstein–Uhlenbeck bridge.
//!
//! Computes the optimal stopping boundary `β(t)` and value function
//! `V(t, x) = sup_τ E[X_{t+τ} | X_t = x]` for an OU bridge pinned at `z` at
//! the horizon, by solving the free-boundary integral equation
//! `β(t) = z − ∫_t^1 K(t, β(t), u, β(u)) du` on a time mesh.
//!
//! ```no_run
//! use oubstop::{picard_solve, value, OubParams, SolverConfig, ValueSurfaceQuery};
//!
//! let params = OubParams::new(1.0, 1.0, 0.0)?;
//! let boundary = picard_solve(&params, &SolverConfig::default())?;
//! let v = value(&params, &boundary, &ValueSurfaceQuery::new(0.0, 0.0))?;
//! println!("beta(0) = {}, V(0, 0) = {v}", boundary.beta[0]);
//! # Ok::<(), oubstop::Error>(())
//! ```
//!
//! Modules:
//! - [`ou_bridge`]: process parameters, drift, Gaussian transitions, sampling.
//! - [`transform`]: change of variables to a Brownian-motion problem.
//! - [`kernel`]: integral kernels of the pricing and boundary equations.
//! - [`solver`]: time meshes, Picard and backward-induction solvers.
//! - [`pricing`]: value function from a solved boundary.
//! - [`mc_oracle`]: Monte Carlo and quadrature cross-checks.
//! - [`csv_io`]: boundary and report file formats.

pub mod csv_io;
pub mod error;
pub mod kernel;
pub mod mc_oracle;
pub mod ou_bridge;
pub mod pricing;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use kernel::{kernel, KernelQuery};
pub use mc_oracle::{
    kernel_oracle, perturbation_test, simulate_stopped_payoff, McConfig, McEstimate,
};
pub use ou_bridge::{CanonicalReduction, OubParams, ProcessState, RngStream};
pub use pricing::{formula_value, value, ValueSurfaceQuery};
pub use solver::{
    backward_solve, boundary_eval, log_partition, picard_solve, solve, BoundarySolution, MeshKind,
    OriginalBoundary, SolverConfig, TimeGrid,
};
pub use transform::TransformContext;
