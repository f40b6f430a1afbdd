//! Ground-truth sources with a prescribed block structure, and the clean
//! classical-quantum source built from a decomposition.

use num_complex::Complex;

use super::algebra::generate_algebra;
use super::decomposition::{embed, KiBlock, KiDecomposition, Tolerances};
use super::ensemble::measure_reference;
use crate::qcore::linalg;
use crate::qcore::povm::make_ic_povm;
use crate::qcore::random::{random_density_rng, random_isometry_rng, rng_from_seed};
use crate::{Error, Matrix, Result, State, SystemDims, Vector};

/// Resamples allowed when a block's conditional family is reducible.
pub const MAX_RESAMPLES: usize = 16;

/// `(p_j, d_j, m_j)`: weight, `|Q_j|` and `|N_j|` of a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub p: f64,
    pub q_dim: usize,
    pub n_dim: usize,
}

impl From<(f64, usize, usize)> for BlockSpec {
    fn from((p, q_dim, n_dim): (f64, usize, usize)) -> Self {
        Self { p, q_dim, n_dim }
    }
}

/// Optional knobs of [`synth_ki_state_with`].
#[derive(Debug, Clone, Default)]
pub struct SynthOptions {
    /// Rank of every `ρ_j^{QR}` (default: full rank). Rank 1 gives pure blocks.
    pub qr_rank: Option<usize>,
    /// Prescribed `ω_j` (one per block, in the order of the block list).
    pub omegas: Option<Vec<Matrix>>,
    /// `|A|` (default `Σ d_j m_j`); the block sum is embedded isometrically.
    pub dim_a: Option<usize>,
}

pub fn synth_ki_state(spec: &[BlockSpec], dim_r: usize, seed: u64) -> Result<(State, KiDecomposition)> {
    synth_ki_state_with(spec, dim_r, seed, &SynthOptions::default())
}

/// True when measuring `R` on `ρ^{QR}` generates the full matrix algebra on `Q`.
fn is_irreducible(rho_qr: &Matrix, q: usize, r: usize) -> Result<bool> {
    if q == 1 {
        return Ok(true);
    }
    let dims = SystemDims::new([("A", q), ("R", r)])?;
    let s = State::new_unchecked(dims, rho_qr.clone())?;
    let ens = measure_reference(&s, &make_ic_povm(r))?;
    let gen = generate_algebra(&ens)?;
    Ok(gen.spectrum.len() == q && gen.algebra.dim() == q * q)
}

pub fn synth_ki_state_with(
    spec: &[BlockSpec],
    dim_r: usize,
    seed: u64,
    opts: &SynthOptions,
) -> Result<(State, KiDecomposition)> {
    if spec.is_empty() || dim_r == 0 {
        return Err(Error::InvalidState("empty block specification".into()));
    }
    let total_p: f64 = spec.iter().map(|b| b.p).sum();
    if (total_p - 1.0).abs() > 1e-10 || spec.iter().any(|b| b.p <= 0.0) {
        return Err(Error::InvalidState(format!("block weights sum to {total_p}")));
    }
    if spec.iter().any(|b| b.q_dim == 0 || b.n_dim == 0) {
        return Err(Error::ZeroDim("block".into()));
    }
    if let Some(om) = &opts.omegas {
        if om.len() != spec.len() {
            return Err(Error::DimMismatch(format!(
                "{} omegas for {} blocks",
                om.len(),
                spec.len()
            )));
        }
    }
    let sum_dim: usize = spec.iter().map(|b| b.q_dim * b.n_dim).sum();
    let dim_a = opts.dim_a.unwrap_or(sum_dim);
    if dim_a < sum_dim {
        return Err(Error::DimMismatch(format!(
            "|A| = {dim_a} cannot hold blocks of total size {sum_dim}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let v = random_isometry_rng::<f64, _>(dim_a, sum_dim, &mut rng);

    let mut blocks = Vec::with_capacity(spec.len());
    let mut offset = 0;
    for (j, b) in spec.iter().enumerate() {
        let (q, m) = (b.q_dim, b.n_dim);
        let omega = match &opts.omegas {
            Some(om) => {
                let w = om[j].clone();
                State::new(SystemDims::single("N", m)?, w.clone())?;
                w
            }
            None => random_density_rng(m, m, &mut rng),
        };
        let rank = opts.qr_rank.unwrap_or(q * dim_r);
        if rank == 0 || rank > q * dim_r || rank * dim_r < q {
            return Err(Error::BadRank { rank, max: q * dim_r });
        }
        let mut rho_qr = None;
        for _ in 0..MAX_RESAMPLES {
            let cand = random_density_rng(q * dim_r, rank, &mut rng);
            if is_irreducible(&cand, q, dim_r)? {
                rho_qr = Some(cand);
                break;
            }
        }
        let rho_qr = rho_qr.ok_or(Error::IrreducibilityFailure {
            attempts: MAX_RESAMPLES,
        })?;
        let n = q * m;
        let isometry = v.columns(offset, n).adjoint();
        offset += n;
        blocks.push(KiBlock {
            p: b.p,
            q_dim: q,
            n_dim: m,
            omega,
            rho_qr,
            isometry,
            q_slots: Vec::new(),
            n_slots: Vec::new(),
        });
    }
    let mut ki = KiDecomposition::from_blocks(dim_a, dim_r, blocks, seed, Tolerances::default())?;
    let rho = ki.reconstruct();
    ki.verification.reconstruction_fidelity = 1.0;
    Ok((rho, ki))
}

/// `Ω^{CQRR'C'} = Σ_j p_j |j⟩⟨j| ⊗ |ψ_j⟩⟨ψ_j|^{QRR'} ⊗ |j⟩⟨j|` with `ψ_j` a
/// purification of `ρ_j^{QR}` (padded `Q`, `|R'|` the largest rank).
pub fn build_clean_source(ki: &KiDecomposition) -> Result<State> {
    let r = ki.dim_r;
    let q = ki.q_dim;
    let c = ki.c_dim;
    let mut purifications = Vec::with_capacity(c);
    let mut r2 = 1;
    for b in &ki.blocks {
        let padded = embed(&b.rho_qr, &b.q_slots, q, r);
        let dims = SystemDims::new([("Q", q), ("R", r)])?;
        let (pdims, psi) = State::new_unchecked(dims, padded)?.purification_vector("R'")?;
        let k = pdims.dim_of("R'")?;
        r2 = r2.max(k);
        purifications.push((psi, k));
    }
    let inner = q * r * r2;
    let total = c * inner * c;
    let mut m = Matrix::zeros(total, total);
    for (j, (b, (psi, k))) in ki.blocks.iter().zip(&purifications).enumerate() {
        // widen R' from k to r2
        let mut wide = Vector::zeros(inner);
        for x in 0..q * r {
            for y in 0..*k {
                wide[x * r2 + y] = psi[x * k + y];
            }
        }
        for a in 0..inner {
            for bb in 0..inner {
                let row = (j * inner + a) * c + j;
                let col = (j * inner + bb) * c + j;
                m[(row, col)] = wide[a] * wide[bb].conj() * Complex::new(b.p, 0.0);
            }
        }
    }
    let dims = SystemDims::new([("C", c), ("Q", q), ("R", r), ("R'", r2), ("C'", c)])?;
    State::new_unchecked(dims, linalg::hermitize(&m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::measures::{entropy_bits, fidelity};

    #[test]
    fn single_n_block_is_a_product() {
        let (rho, _) = synth_ki_state(&[(1.0, 1, 3).into()], 2, 5).unwrap();
        let a = rho.partial_trace(&["A"]).unwrap();
        let r = rho.partial_trace(&["R"]).unwrap();
        let prod = a.tensor(&r).unwrap();
        assert!(linalg::max_abs(&(prod.matrix() - rho.matrix())) < 1e-12);
    }

    #[test]
    fn pure_quantum_block_is_pure() {
        let opts = SynthOptions {
            qr_rank: Some(1),
            ..Default::default()
        };
        let (rho, _) = synth_ki_state_with(&[(1.0, 2, 1).into()], 2, 5, &opts).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-10);
        assert!((entropy_bits(&rho.partial_trace(&["A"]).unwrap())) > 0.0);
    }

    #[test]
    fn clean_source_marginal_is_omega_cqr() {
        for seed in 0..4 {
            let (_, ki) = synth_ki_state(&[(0.6, 2, 1).into(), (0.4, 1, 2).into()], 2, seed).unwrap();
            let big = build_clean_source(&ki).unwrap();
            assert!((big.purity() - ki.probabilities().iter().map(|p| p * p).sum::<f64>()).abs() < 1e-10);
            let marg = big.partial_trace(&["C", "Q", "R"]).unwrap();
            let f = fidelity(&marg, &ki.omega_cqr()).unwrap();
            assert!((1.0 - f).abs() < 1e-9, "{f}");
        }
    }

    #[test]
    fn clean_source_of_classical_source_is_duplicated() {
        let (_, ki) = synth_ki_state(&[(0.5, 1, 1).into(), (0.5, 1, 1).into()], 2, 1).unwrap();
        let big = build_clean_source(&ki).unwrap();
        let cc = big.partial_trace(&["C", "C'"]).unwrap();
        let expected = State::diagonal(cc.dims().clone(), &[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(linalg::max_abs(&(cc.matrix() - expected.matrix())) < 1e-12);
    }
}
