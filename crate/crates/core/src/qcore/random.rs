//! Seeded random states and isometries.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::dims::SystemDims;
use super::error::{Error, Result};
use super::maps::IsometryMap;
use super::scalar::{CMat, Real};
use super::state::MultipartiteState;

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "QKI_SEED";

/// Seed from `QKI_SEED`, or 0.
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat<T> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMat::<T>::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(T::lit(re * h), T::lit(im * h))
    })
}

/// Modified Gram-Schmidt on the columns; yields a Haar-distributed
/// isometry when fed a Gaussian matrix.
pub fn orthonormalize_columns<T: Real>(g: &CMat<T>) -> CMat<T> {
    let mut q = g.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for k in 0..j {
                let proj = q.column(k).dotc(&q.column(j));
                let col_k = q.column(k).clone_owned();
                let mut col_j = q.column_mut(j);
                col_j -= col_k * proj;
            }
        }
        let n = q.column(j).norm();
        q.column_mut(j).unscale_mut(n);
    }
    q
}

pub fn random_isometry_rng<T: Real, R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> CMat<T> {
    orthonormalize_columns(&gaussian_matrix::<T, R>(out_dim, in_dim, rng))
}

pub fn random_unitary_rng<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat<T> {
    random_isometry_rng(dim, dim, rng)
}

/// Density matrix of the given rank from the induced (Hilbert-Schmidt
/// type) measure: the marginal of a Haar-random pure state on the system
/// tensored with a `rank`-dimensional ancilla.
pub fn random_density_rng<T: Real, R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> CMat<T> {
    let g = gaussian_matrix::<T, R>(dim, rank, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m.map(|z| z / tr)
}

pub fn random_state<T: Real>(dims: &SystemDims, rank: usize, seed: u64) -> Result<MultipartiteState<T>> {
    let n = dims.total();
    if rank == 0 || rank > n {
        return Err(Error::BadRank { rank, max: n });
    }
    let mut rng = rng_from_seed(seed);
    MultipartiteState::new_unchecked(dims.clone(), random_density_rng(n, rank, &mut rng))
}

pub fn random_isometry<T: Real>(in_dims: &SystemDims, out_dims: &SystemDims, seed: u64) -> Result<IsometryMap<T>> {
    if out_dims.total() < in_dims.total() {
        return Err(Error::DimMismatch(format!(
            "no isometry from {} into smaller {}",
            in_dims, out_dims
        )));
    }
    let mut rng = rng_from_seed(seed);
    let u = random_isometry_rng(out_dims.total(), in_dims.total(), &mut rng);
    IsometryMap::new(in_dims.clone(), out_dims.clone(), u)
}
