//! Numerical toolkit for optimal deferred-income-annuity (DIA) purchase
//! policies over the lifecycle.
//!
//! The library solves a two-phase stochastic control problem for a saver who
//! can buy DIA units before retirement and consumes from investments, DIA
//! income, and an exogenous pension afterwards:
//!
//! * [`model`] — Gompertz-Makeham mortality, annuity factors, DIA pricing
//!   with a refund blend, CRRA utility.
//! * [`numerics`] — grids, tridiagonal solves, and the asymptotic
//!   large-wealth coefficient ODEs.
//! * [`post`] — implicit backward solver for the post-retirement HJB,
//!   producing the value surface and consumption/allocation policies.
//! * [`pre`] — explicit solver for the pre-retirement variational
//!   inequality with the free annuitization boundary.
//! * [`policy`] — boundary extraction and purchase recommendations along
//!   the characteristic line.
//! * [`sim`] — forward Monte Carlo validation of the extracted policy.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature
//! (default) only switches float intrinsics and enables `rand/std`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub(crate) mod fmath;
pub mod model;
pub mod numerics;
pub mod policy;
pub mod post;
pub mod pre;
pub mod sim;

pub use error::Error;
pub use model::{DiaContract, MarketModel, MortalityModel, Preferences};
pub use numerics::{AsymptoticCoeffs, Grid2D, TridiagonalSystem};
pub use policy::{PolicyFrontier, Recommendation};
pub use post::{AllocationMode, ValueSurface};
pub use pre::{PreSolution, PreSolveSlice};
pub use sim::{SimConfig, SimResult, Strategy};
