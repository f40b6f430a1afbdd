//! Koashi-Imoto decomposition of a bipartite source `ρ^{AR}` into a
//! classical part `C`, a redundant part `N` and a quantum part `Q`.

pub mod algebra;
pub mod decomposition;
pub mod ensemble;
pub mod io;
pub mod synth;

pub use algebra::{decompose_algebra, generate_algebra, BlockStructure, MatrixAlgebra};
pub use decomposition::{
    ki_decompose, ki_decompose_with, verify, KiBlock, KiDecomposition, KiOptions, Tolerances, Verification,
};
pub use ensemble::{measure_reference, Ensemble};
pub use synth::{build_clean_source, synth_ki_state, synth_ki_state_with, BlockSpec, SynthOptions};
