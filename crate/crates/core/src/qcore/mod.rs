//! Labeled dense linear algebra and entropic functionals.

pub mod dims;
pub mod error;
pub mod io;
pub mod linalg;
pub mod maps;
pub mod measures;
pub mod povm;
pub mod random;
pub mod scalar;
pub mod state;
