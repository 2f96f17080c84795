//! Numerical study of sharp-interface limits for phase-field energies with
//! higher-order and fractional perturbations.
//!
//! The building blocks are layered bottom up: [`potential`] and [`grid`]
//! describe profiles, [`kernel`] and [`energy`] evaluate discrete energies,
//! [`solver`] minimizes them, and [`tension`] and [`experiments`] compute the
//! surface tensions and parameter sweeps. [`cli`] wraps everything for the
//! `tensionlab` binary.

pub mod cli;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod kernel;
pub mod potential;
pub mod precond;
pub mod solver;
pub mod tension;

pub use error::{Error, Result};
pub use grid::{GridFunction, PinMask, ProfileGrid, Tails};
pub use kernel::{FractionalOrder, KernelMatrix, ScalingVariant};
pub use potential::Potential;
