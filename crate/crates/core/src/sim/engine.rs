//! Exact fidelity `F(σ^{⊗n}, (Λ⊗id)σ^{⊗n})` of a [`ProductBasisCode`] on an
//! i.i.d. source, computed in the `r^n`-dimensional eigenbasis of `σ^{⊗n}`
//! instead of the full `(|X||R|)^n` space.

use num_complex::Complex;

use super::code::{checked_power, digits, ProductBasisCode};
use crate::qcore::linalg::{self, eigh};
use crate::qcore::measures::trace_sqrt_psd;
use crate::{Error, Matrix, Result};

/// Largest `rank(σ)^n` handled by the engine.
pub const ENGINE_CAP: usize = 1 << 10;

/// Single-copy source `σ^{XR} = Σ_a d_a |v_a⟩⟨v_a|` with each `v_a`
/// reshaped to an `|X| × |R|` matrix `V_a`.
#[derive(Debug, Clone)]
pub struct ProductSource {
    pub dim_x: usize,
    pub dim_r: usize,
    pub values: Vec<f64>,
    pub vecs: Vec<Matrix>,
}

impl ProductSource {
    /// `sigma` on `X ⊗ R` (X most significant).
    pub fn from_matrix(sigma: &Matrix, dim_x: usize, dim_r: usize) -> Result<Self> {
        if sigma.nrows() != dim_x * dim_r {
            return Err(Error::DimMismatch(format!(
                "source of size {} is not {dim_x} x {dim_r}",
                sigma.nrows()
            )));
        }
        let e = eigh(sigma);
        let (values, v) = e.support(1e-13);
        let vecs = (0..values.len())
            .map(|a| Matrix::from_fn(dim_x, dim_r, |x, r| v[(x * dim_r + r, a)]))
            .collect();
        Ok(Self {
            dim_x,
            dim_r,
            values,
            vecs,
        })
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// `ρ^X = Tr_R σ`.
    pub fn marginal_x(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim_x, self.dim_x);
        for (d, v) in self.values.iter().zip(&self.vecs) {
            m += (v * v.adjoint()).map(|z| z * *d);
        }
        m
    }
}

/// `Σ_{x∈S} ⊗_i mats[i][x_i]` over sorted flat indices, grouping shared
/// prefixes so every Kronecker product is formed once per trie node.
fn kron_sum(sorted: &[usize], level: usize, n: usize, d: usize, mats: &[Vec<Matrix>]) -> Matrix {
    if level == n {
        return Matrix::identity(1, 1);
    }
    let stride = d.pow((n - 1 - level) as u32);
    let mut out: Option<Matrix> = None;
    let mut start = 0;
    while start < sorted.len() {
        let digit = (sorted[start] / stride) % d;
        let mut end = start + 1;
        while end < sorted.len() && (sorted[end] / stride) % d == digit {
            end += 1;
        }
        let tail = kron_sum(&sorted[start..end], level + 1, n, d, mats);
        let term = linalg::kron(&mats[level][digit], &tail);
        out = Some(match out {
            None => term,
            Some(acc) => acc + term,
        });
        start = end;
    }
    out.expect("nonempty sequence set")
}

/// Exact `F(σ^{⊗n}, (Λ⊗id)σ^{⊗n})`.
pub fn code_fidelity(src: &ProductSource, code: &ProductBasisCode) -> Result<f64> {
    let d = src.dim_x;
    if code.local_dim() != d {
        return Err(Error::DimMismatch(format!(
            "code on {} letters, source on {d}",
            code.local_dim()
        )));
    }
    let n = code.n();
    let r = src.rank();
    let rn = checked_power(r, n, ENGINE_CAP)?;
    let w = code.basis();
    // B[γ][α] = W† V_γ V_α† W
    let wv: Vec<Matrix> = src.vecs.iter().map(|v| w.adjoint() * v).collect();
    let b: Vec<Vec<Matrix>> = (0..r)
        .map(|g| (0..r).map(|a| &wv[g] * wv[a].adjoint()).collect())
        .collect();
    // diagonal part: g_x[α, γ] = B[γ][α][x, x]
    let g: Vec<Matrix> = (0..d).map(|x| Matrix::from_fn(r, r, |a, c| b[c][a][(x, x)])).collect();
    // discarded part for fallback letter s: H_x = C_x D C_x†, C_x[α,γ] = B[γ][α][x,s]
    let dmat = Matrix::from_diagonal(&crate::Vector::from_iterator(
        r,
        src.values.iter().map(|&v| Complex::new(v, 0.0)),
    ));
    let h_for = |s: usize| -> Vec<Matrix> {
        (0..d)
            .map(|x| {
                let c = Matrix::from_fn(r, r, |a, gm| b[gm][a][(x, s)]);
                &c * &dmat * c.adjoint()
            })
            .collect()
    };
    let s0 = code.fallback_digits();
    let h_pos: Vec<Vec<Matrix>> = s0.iter().map(|&s| h_for(s)).collect();
    let g_pos: Vec<Vec<Matrix>> = vec![g; n];

    let mut sorted: Vec<usize> = code.retained().to_vec();
    sorted.sort_unstable();
    let g_pi = kron_sum(&sorted, 0, n, d, &g_pos);
    // Σ_{x∉S} ⊗ H = ⊗ (Σ_x H) − Σ_{x∈S} ⊗ H
    let mut all = Matrix::identity(1, 1);
    for hs in &h_pos {
        let mut tot = Matrix::zeros(r, r);
        for h in hs {
            tot += h;
        }
        all = linalg::kron(&all, &tot);
    }
    let discarded = all - kron_sum(&sorted, 0, n, d, &h_pos);

    // D^{⊗n} diagonal
    let dn: Vec<f64> = (0..rn)
        .map(|i| digits(i, r, n).iter().fold(1.0, |acc, &a| acc * src.values[a]))
        .collect();
    let mut gd = g_pi.clone();
    for (k, &v) in dn.iter().enumerate() {
        gd.column_mut(k).scale_mut(v);
    }
    let m = discarded + &gd * g_pi.adjoint();
    let sq: Vec<f64> = dn.iter().map(|v| v.sqrt()).collect();
    let core = Matrix::from_fn(rn, rn, |i, j| m[(i, j)] * (sq[i] * sq[j]));
    Ok(trace_sqrt_psd(&core))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::measures::fidelity_matrix;
    use crate::qcore::random::{random_density_rng, random_unitary_rng, rng_from_seed};

    /// σ^{⊗n} on X^n R^n, dense.
    fn dense_power(sigma: &Matrix, dx: usize, dr: usize, n: usize) -> Matrix {
        let mut m = Matrix::identity(1, 1);
        for _ in 0..n {
            m = linalg::kron(&m, sigma);
        }
        let dims: Vec<usize> = (0..n).flat_map(|_| [dx, dr]).collect();
        let perm: Vec<usize> = (0..n).map(|i| 2 * i).chain((0..n).map(|i| 2 * i + 1)).collect();
        linalg::permute_matrix(&m, &dims, &perm)
    }

    fn dense_fidelity(sigma: &Matrix, dx: usize, dr: usize, code: &ProductBasisCode) -> f64 {
        let n = code.n();
        let big = dense_power(sigma, dx, dr, n);
        let out = code.apply_dense(&big, dr.pow(n as u32)).unwrap();
        fidelity_matrix(&big, &out)
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = rng_from_seed(3);
        for (dx, dr, rank, n, k) in [
            (2, 2, 2, 2, 2),
            (3, 2, 2, 2, 4),
            (2, 3, 3, 3, 5),
            (3, 1, 3, 2, 3),
            (2, 2, 1, 3, 3),
        ] {
            let sigma = random_density_rng::<f64, _>(dx * dr, rank, &mut rng);
            let src = ProductSource::from_matrix(&sigma, dx, dr).unwrap();
            let w = random_unitary_rng::<f64, _>(dx, &mut rng);
            let weights: Vec<f64> = (0..dx).map(|i| 1.0 / (i + 1) as f64).collect();
            let code = ProductBasisCode::top_k(w, weights, n, k).unwrap();
            let fast = code_fidelity(&src, &code).unwrap();
            let slow = dense_fidelity(&sigma, dx, dr, &code);
            assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        }
    }

    #[test]
    fn pure_source_fidelity_is_retained_mass() {
        let mut rng = rng_from_seed(8);
        let sigma = random_density_rng::<f64, _>(4, 1, &mut rng);
        let src = ProductSource::from_matrix(&sigma, 2, 2).unwrap();
        let e = eigh(&src.marginal_x());
        let code = ProductBasisCode::top_k(e.vectors.clone(), e.values.clone(), 4, 5).unwrap();
        let f = code_fidelity(&src, &code).unwrap();
        assert!((f - code.retained_mass()).abs() < 1e-12);
    }

    #[test]
    fn full_code_is_lossless() {
        let mut rng = rng_from_seed(1);
        let sigma = random_density_rng::<f64, _>(6, 3, &mut rng);
        let src = ProductSource::from_matrix(&sigma, 3, 2).unwrap();
        let code = ProductBasisCode::top_k(Matrix::identity(3, 3), vec![1.0; 3], 3, 27).unwrap();
        assert!((code_fidelity(&src, &code).unwrap() - 1.0).abs() < 1e-12);
    }
}
