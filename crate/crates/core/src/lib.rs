//! Saturated passivity-based control workbench.
//!
//! Plants are described as input-affine models (directly, or reduced from
//! port-Hamiltonian mechanical and Brayton–Moser circuit descriptions).
//! Controllers with `tanh` saturation are synthesized for them, the stability
//! hypotheses are checked numerically, and closed loops are simulated with a
//! fixed-step RK4 integrator.

pub mod controllers;
pub mod error;
pub mod models;
pub mod numerics;
pub mod scenarios;
pub mod simulation;
pub mod verification;

pub use error::{Error, Result};
