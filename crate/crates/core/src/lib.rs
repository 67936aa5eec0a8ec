//! Defect states of periodic 1D Schrödinger operators and the resonances
//! produced by truncating the periodic background to a finite interval.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod defect;
pub mod error;
pub mod fit;
pub mod floquet;
pub mod ode;
pub mod potential;
pub mod resonance;

pub use error::{Error, Result};
pub use potential::{DefectPotential, DefectShape, PeriodicPotential, Potential};
