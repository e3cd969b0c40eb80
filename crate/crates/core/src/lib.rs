//! Model-following control for flat nonlinear systems with matched Lipschitz
//! uncertainty.
//!
//! The crate designs the two-loop controller and its single-loop baselines,
//! certifies them with quadratic Lyapunov functions, estimates regions of
//! attraction for the mass-spring-damper benchmark, simulates the closed loops
//! and tries to falsify every certificate by sampling.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a < b)` deliberately treats NaN as a failure.

pub mod config;
pub mod error;
pub mod falsify;
pub mod linalg;
pub mod plant;
pub mod report;
pub mod roa;
pub mod simulate;
pub mod steady_state;
pub mod synthesis;

pub use error::{Error, Result};
pub use plant::{BrunovskyDims, FnPlant, MsdParams, MsdPlant, Plant, State, StateBox};
pub use roa::{RoaEstimate, RoaKind, RoaSet};
pub use steady_state::{EquilibriumSet, LoopKind, Stability};
pub use synthesis::{GainSet, LyapunovCertificate};
