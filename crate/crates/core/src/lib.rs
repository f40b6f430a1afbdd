//! Koashi-Imoto decomposition of bipartite quantum sources, their optimal
//! qubit/ebit compression region, small-blocklength code simulation and
//! numerical estimates of the converse functionals.
//!
//! The linear-algebra layer in [`qcore`] is generic over the real scalar
//! type (`f32` or `f64`); the higher-level modules work in `f64`.

pub mod bounds;
pub mod ki;
pub mod qcore;
pub mod rates;
pub mod sim;

pub use qcore::dims::SystemDims;
pub use qcore::error::{Error, Result};
pub use qcore::scalar::{CMat, CVec, Real};

/// Double-precision labeled density matrix.
pub type State = qcore::state::MultipartiteState<f64>;
/// Single-precision labeled density matrix.
pub type State32 = qcore::state::MultipartiteState<f32>;
pub type Isometry = qcore::maps::IsometryMap<f64>;
pub type Channel = qcore::maps::QuantumChannel<f64>;
pub type Povm = qcore::povm::Povm<f64>;
pub type Matrix = CMat<f64>;
pub type Vector = CVec<f64>;
