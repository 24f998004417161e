//! Kraus-series simulation of Markovian open quantum systems.
//!
//! A [`lindblad::LindbladSystem`] whose superoperators satisfy
//! `[𝓗, 𝓛] = α𝓛 + c` admits a closed-form Kraus series. This crate
//! classifies systems, evaluates and truncates that series, compiles each
//! Kraus term to a circuit of time-independent depth, and executes circuits
//! on a statevector simulator. Dense propagators and an RK4 integrator serve
//! as reference solutions.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod config;
pub mod dump;
pub mod error;
pub mod kraus;
pub mod lindblad;
pub mod pauli;
pub mod pipeline;
pub mod qho;
pub mod statevector;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{ComplexMatrix, C64};
