//! Time-delayed coherent feedback for a driven two-level system.
//!
//! The TLS sits in front of a mirror: photons emitted towards the mirror
//! return after a round-trip delay `τ` and interfere with the emitter. The
//! field is discretized into time bins and the joint state is propagated as
//! a matrix product state, one step unitary per bin. On top of the
//! simulator the crate provides Markovian reference dynamics and measures
//! of non-Markovianity.
//!
//! ```no_run
//! use nmss_core::feedback::{steady_state_nm, NumericsParams, SystemParams};
//!
//! let sys = SystemParams::symmetric(1.0, 2.0, 0.0, 0.5);
//! let ss = steady_state_nm(&sys, &NumericsParams::default()).unwrap();
//! println!("{:?}", ss.state.bloch());
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feedback;
pub mod lindblad;
pub mod measures;
pub mod mps;
pub mod qubit;
pub mod tensors;

pub use error::{FeedbackError, LindbladError, MeasureError, MpsError, StateError, TensorError};
pub use qubit::QubitDensityMatrix;
pub use tensors::C64;
