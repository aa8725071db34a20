//! Dual-engine solver for optimal stopping under dynamic risk measures
//! induced by BSDEs with jumps.
//!
//! The value of the stopping problem
//!
//! ```text
//! u(t,x) = ess sup over stopping times tau of E_f[ hbar(tau, X_tau) ]
//! ```
//!
//! (with `E_f` the nonlinear f-expectation defined by a BSDE driver and
//! `X` a jump-diffusion state process) is computed along two independent
//! routes:
//!
//! * a probabilistic engine ([`bsde`]) that solves the reflected BSDE by
//!   least-squares regression on simulated paths, and
//! * a deterministic engine ([`pide`]) that time-steps the obstacle
//!   problem for the associated partial integro-differential variational
//!   inequality
//!
//!   ```text
//!   min( u - h, -du/dt - Au - Ku - f(t, x, u, sigma du/dx, Bu) ) = 0,
//!   u(T, .) = g,
//!   ```
//!
//!   with `A` the local diffusion generator, `K` the compensated jump
//!   operator and `B` the scalar jump-sensitivity operator.
//!
//! The [`validate`] module cross-checks the two engines against each
//! other and verifies a-priori estimates, comparison/monotonicity
//! properties and growth bounds numerically.

#![allow(clippy::needless_range_loop)]

pub mod bsde;
pub mod driver;
pub mod export;
pub mod matrix;
pub mod model;
pub mod numerics;
pub mod paths;
pub mod pide;
pub mod rng;
pub mod validate;

pub use bsde::{solve_bsde, solve_rbsde, McEstimate, McParams, ObstacleSpec, RbsdeSolution};
pub use driver::{DriverSpec, FullDriver, KernelMode};
pub use model::{JumpDiffusionModel, LevyMeasure};
pub use paths::{simulate, PathBundle, TimeGrid};
pub use pide::{solve_pidvi, ObstacleScheme, SpaceGrid, ValueSurface};
pub use validate::ProblemInstance;
