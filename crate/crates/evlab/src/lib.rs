//! evlab: a pseudo-spectral laboratory for a viscous shallow-water system
//! with friction and capillarity.
//!
//! The crate revolves around an effective-velocity change of unknown,
//! v = u + mu * grad(ln h), which under the coefficient constraints
//! kappa = mu^2 and 1/Fr^2 = r * mu turns the primitive system into a heat
//! equation for the depth coupled to a damped momentum equation with a
//! quadratic nonlinearity. Everything here exists to make the structural
//! consequences of that reformulation checkable numerically at desk scale:
//!
//! - [`grid`]: periodic grids, FFTs, spectral calculus, dealiased products.
//! - [`littlewood_paley`]: dyadic frequency blocks, Besov and time-integrated
//!   (Chemin-Lerner style) norms.
//! - [`models`]: physical parameters, the three equivalent state
//!   descriptions, right-hand sides, capillary tensor, energy functional.
//! - [`propagators`]: exact Fourier-side semigroups, Duhamel source
//!   integration, and exponential time stepping.
//! - [`picard`]: the constructive fixed-point iteration, working norms,
//!   contraction measurement, and smallness-threshold sweeps.
//! - [`checks`]: a named, re-runnable verification suite with one
//!   experiment per structural claim.
//! - [`cli`]: configuration parsing, initial-data generators, and the
//!   drivers behind the `evlab` binary.

pub mod checks;
pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod littlewood_paley;
pub mod models;
pub mod picard;
pub mod propagators;

pub use error::{Error, Result};
