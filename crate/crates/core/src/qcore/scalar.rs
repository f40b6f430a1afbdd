//! Scalar abstraction shared by every numeric routine in [`crate::qcore`].
//!
//! All matrices are dense complex matrices over a real field `T`. The two
//! concrete instantiations are `f64` (the default used throughout the
//! higher-level modules) and `f32` (handy for quick exploratory runs).

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type underlying a complex matrix.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Tolerance used when validating Hermiticity, positivity and trace.
    const VALIDATION_TOL: f64;
    /// Eigenvalues in `[-EIG_CLAMP, 0)` are treated as exact zeros.
    const EIG_CLAMP: f64;
    /// Eigenvalues below this contribute nothing to entropies.
    const ENTROPY_CUTOFF: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite value")
    }
}

impl Real for f64 {
    const VALIDATION_TOL: f64 = 1e-10;
    const EIG_CLAMP: f64 = 1e-10;
    const ENTROPY_CUTOFF: f64 = 1e-12;
}

impl Real for f32 {
    const VALIDATION_TOL: f64 = 1e-4;
    const EIG_CLAMP: f64 = 1e-5;
    const ENTROPY_CUTOFF: f64 = 1e-7;
}

pub type Cplx<T> = Complex<T>;
pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;

#[inline]
pub fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn cr<T: Real>(re: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::zero())
}
