//! Exact simulation of the Kac equation through its Wild-sum / McKean-tree
//! representation, a deterministic Fourier-side solver used as an oracle,
//! and the statistics needed to measure convergence to the Maxwellian.
//!
//! The numeric kernels are generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the common case.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod error;
pub mod fourier;
pub mod io;
pub mod law;
pub mod quadrature;
pub mod scalar;
pub mod simulate;
pub mod stats;
pub mod tree;
pub mod verify;

pub use coefficients::{alpha_p, coefficients, lemma1_bound, AngleVector, CoefficientVector};
pub use error::{Error, Result};
pub use fourier::{CharGrid, SolverConfig, WildSeriesState};
pub use law::InitialLaw;
pub use scalar::Real;
pub use simulate::{SampleBatch, SimulationConfig};
pub use stats::{EmpiricalCdf, RateReport, Theorem2Params};
pub use tree::{McKeanTree, TreeWeight};

pub type AngleVector64 = AngleVector<f64>;
pub type CoefficientVector64 = CoefficientVector<f64>;
pub type CharGrid64 = CharGrid<f64>;
pub type CharGrid32 = CharGrid<f32>;
pub type EmpiricalCdf64 = EmpiricalCdf<f64>;
