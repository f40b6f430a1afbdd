//! The Koashi-Imoto decomposition `ρ^{AR} ↦ Σ_j p_j |j⟩⟨j| ⊗ ω_j ⊗ ρ_j^{QR}`.

use super::algebra::{decompose_algebra, generate_algebra, SUPPORT_TOL};
use super::ensemble::measure_reference;
use crate::qcore::linalg::{self, eigh};
use crate::qcore::maps::QuantumChannel;
use crate::qcore::measures::{entropy_matrix, fidelity_matrix, trace_norm_hermitian};
use crate::qcore::povm::make_ic_povm;
use crate::{Channel, Error, Matrix, Povm, Result, State, SystemDims};

/// Thresholds used by the decomposition and its verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Minimum fidelity gap `1 − F` allowed for the reconstruction.
    pub fidelity: f64,
    /// Bound on `I(N:QR|C)`, the product-form defect and block coherences.
    pub structure: f64,
    /// Bound on `|U†U − Π|` and on normalization errors.
    pub isometry: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fidelity: 1e-9,
            structure: 1e-8,
            isometry: 1e-9,
        }
    }
}

/// One summand `p_j ω_j^{N_j} ⊗ ρ_j^{Q_j R}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KiBlock {
    pub p: f64,
    /// `d_j = |Q_j|`
    pub q_dim: usize,
    /// `m_j = |N_j|`
    pub n_dim: usize,
    /// `ω_j` on `N_j`.
    pub omega: Matrix,
    /// `ρ_j^{QR}` on `Q_j ⊗ R`.
    pub rho_qr: Matrix,
    /// Isometry part `A → Q_j ⊗ N_j` (Q index most significant), shape
    /// `(d_j m_j) × |A|`.
    pub isometry: Matrix,
    /// Positions of `Q_j` inside the padded `Q`.
    pub q_slots: Vec<usize>,
    /// Positions of `N_j` inside the padded `N`.
    pub n_slots: Vec<usize>,
}

impl KiBlock {
    /// `ρ_j^Q = Tr_R ρ_j^{QR}`.
    pub fn rho_q(&self, dim_r: usize) -> Matrix {
        linalg::partial_trace_matrix(&self.rho_qr, &[self.q_dim, dim_r], &[0])
    }
}

/// Verification figures recorded for an accepted decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Verification {
    pub reconstruction_fidelity: f64,
    /// `I(N:QR|C)` of the transformed state.
    pub conditional_mutual_info: f64,
    /// Largest `½‖σ_j/p_j − ω_j ⊗ ρ_j^{QR}‖₁`.
    pub product_defect: f64,
    /// Largest entry of a cross-block coherence `K_j ρ K_k†`.
    pub coherence: f64,
    /// `max |U†U − Π_A|`.
    pub isometry_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KiDecomposition {
    pub dim_a: usize,
    pub dim_r: usize,
    /// Padded `|C|`, `|N|`, `|Q|`.
    pub c_dim: usize,
    pub n_dim: usize,
    pub q_dim: usize,
    pub blocks: Vec<KiBlock>,
    /// `U_KI : A → C ⊗ N ⊗ Q` (rows in that label order).
    pub u_ki: Matrix,
    /// Projector onto the support of `ρ^A`.
    pub support: Matrix,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub verification: Verification,
}

/// Options for [`ki_decompose_with`].
#[derive(Debug, Clone, Default)]
pub struct KiOptions {
    pub seed: u64,
    /// Measurement on `R`; defaults to `make_ic_povm(|R|)`.
    pub povm: Option<Povm>,
    pub tolerances: Tolerances,
}

/// Embed `m` (on `X ⊗ rest` with `|X| = slots.len()`) into `pad ⊗ rest`.
pub(crate) fn embed(m: &Matrix, slots: &[usize], pad: usize, rest: usize) -> Matrix {
    let mut out = Matrix::zeros(pad * rest, pad * rest);
    for (a, &sa) in slots.iter().enumerate() {
        for (b, &sb) in slots.iter().enumerate() {
            for r in 0..rest {
                for s in 0..rest {
                    out[(sa * rest + r, sb * rest + s)] = m[(a * rest + r, b * rest + s)];
                }
            }
        }
    }
    out
}

fn canonical_order(blocks: &mut [KiBlock]) {
    blocks.sort_by(|x, y| {
        y.p.partial_cmp(&x.p)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.q_dim.cmp(&x.q_dim))
            .then(y.n_dim.cmp(&x.n_dim))
    });
}

impl KiDecomposition {
    /// Assemble the padded form from a block list (sorted canonically; the
    /// slot lists are assigned as leading positions).
    pub fn from_blocks(
        dim_a: usize,
        dim_r: usize,
        mut blocks: Vec<KiBlock>,
        seed: u64,
        tolerances: Tolerances,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidState("decomposition without blocks".into()));
        }
        canonical_order(&mut blocks);
        for b in &mut blocks {
            b.q_slots = (0..b.q_dim).collect();
            b.n_slots = (0..b.n_dim).collect();
        }
        let q_dim = blocks.iter().map(|b| b.q_dim).max().unwrap_or(1);
        let n_dim = blocks.iter().map(|b| b.n_dim).max().unwrap_or(1);
        Self::from_slotted_blocks(dim_a, dim_r, blocks, n_dim, q_dim, seed, tolerances)
    }

    /// Assemble from blocks whose slot lists are already set.
    pub fn from_slotted_blocks(
        dim_a: usize,
        dim_r: usize,
        blocks: Vec<KiBlock>,
        n_dim: usize,
        q_dim: usize,
        seed: u64,
        tolerances: Tolerances,
    ) -> Result<Self> {
        let c_dim = blocks.len();
        let mut u_ki = Matrix::zeros(c_dim * n_dim * q_dim, dim_a);
        let mut support = Matrix::zeros(dim_a, dim_a);
        for (j, b) in blocks.iter().enumerate() {
            if b.q_slots.len() != b.q_dim
                || b.n_slots.len() != b.n_dim
                || b.q_slots.iter().any(|&s| s >= q_dim)
                || b.n_slots.iter().any(|&s| s >= n_dim)
                || b.isometry.shape() != (b.q_dim * b.n_dim, dim_a)
                || b.omega.shape() != (b.n_dim, b.n_dim)
                || b.rho_qr.shape() != (b.q_dim * dim_r, b.q_dim * dim_r)
            {
                return Err(Error::DimMismatch(format!(
                    "block {j} is inconsistent with padded sizes"
                )));
            }
            for a in 0..b.q_dim {
                for m in 0..b.n_dim {
                    let row = (j * n_dim + b.n_slots[m]) * q_dim + b.q_slots[a];
                    u_ki.set_row(row, &b.isometry.row(a * b.n_dim + m));
                }
            }
            support += b.isometry.adjoint() * &b.isometry;
        }
        Ok(Self {
            dim_a,
            dim_r,
            c_dim,
            n_dim,
            q_dim,
            blocks,
            u_ki,
            support,
            seed,
            tolerances,
            verification: Verification::default(),
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.p).collect()
    }

    /// `(d_j, m_j)` per block, in canonical order.
    pub fn block_dims(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| (b.q_dim, b.n_dim)).collect()
    }

    /// Padded `(|C|, |N|, |Q|)`.
    pub fn padded_dims(&self) -> (usize, usize, usize) {
        (self.c_dim, self.n_dim, self.q_dim)
    }

    pub fn dims_cnq(&self) -> SystemDims {
        SystemDims::new([("C", self.c_dim), ("N", self.n_dim), ("Q", self.q_dim)]).expect("positive dims")
    }

    /// `ω^{CNQR} = Σ_j p_j |j⟩⟨j| ⊗ ω_j ⊗ ρ_j^{QR}` on the padded systems.
    pub fn omega_cnqr(&self) -> State {
        let (c, n, q) = self.padded_dims();
        let r = self.dim_r;
        let inner = n * q * r;
        let mut m = Matrix::zeros(c * inner, c * inner);
        for (j, b) in self.blocks.iter().enumerate() {
            let w = embed(&b.omega, &b.n_slots, n, 1);
            let x = embed(&b.rho_qr, &b.q_slots, q, r);
            let blk = linalg::kron(&w, &x).map(|z| z * b.p);
            m.view_mut((j * inner, j * inner), (inner, inner)).copy_from(&blk);
        }
        let dims = SystemDims::new([("C", c), ("N", n), ("Q", q), ("R", r)]).expect("positive dims");
        State::new_unchecked(dims, m).expect("shape")
    }

    /// `ω^{CQR} = Σ_j p_j |j⟩⟨j| ⊗ ρ_j^{QR}`.
    pub fn omega_cqr(&self) -> State {
        let (c, _, q) = self.padded_dims();
        let r = self.dim_r;
        let inner = q * r;
        let mut m = Matrix::zeros(c * inner, c * inner);
        for (j, b) in self.blocks.iter().enumerate() {
            let x = embed(&b.rho_qr, &b.q_slots, q, r).map(|z| z * b.p);
            m.view_mut((j * inner, j * inner), (inner, inner)).copy_from(&x);
        }
        let dims = SystemDims::new([("C", c), ("Q", q), ("R", r)]).expect("positive dims");
        State::new_unchecked(dims, m).expect("shape")
    }

    /// `ω^{CNQRC'}` with `C'` a classical copy of `C`.
    pub fn omega_cnqrc(&self) -> State {
        let base = self.omega_cnqr();
        let c = self.c_dim;
        let inner = base.dim() / c;
        let total = base.dim() * c;
        let mut m = Matrix::zeros(total, total);
        for j in 0..c {
            for a in 0..inner {
                for b in 0..inner {
                    m[((j * inner + a) * c + j, (j * inner + b) * c + j)] =
                        base.matrix()[(j * inner + a, j * inner + b)];
                }
            }
        }
        let dims = base
            .dims()
            .concat(&SystemDims::single("C'", c).expect("positive"))
            .expect("fresh label");
        State::new_unchecked(dims, m).expect("shape")
    }

    /// `ρ^{AR}` rebuilt from the block data: `Σ_j p_j K_j†(ρ_j^{QR} ⊗ ω_j)K_j`.
    pub fn reconstruct(&self) -> State {
        let (da, dr) = (self.dim_a, self.dim_r);
        let mut out = Matrix::zeros(da * dr, da * dr);
        for b in &self.blocks {
            let sigma = block_state_qnr(b, dr);
            let k = linalg::kron(&b.isometry, &Matrix::identity(dr, dr));
            out += (k.adjoint() * sigma * &k).map(|z| z * b.p);
        }
        let dims = SystemDims::new([("A", da), ("R", dr)]).expect("positive dims");
        State::new_unchecked(dims, linalg::hermitize(&out)).expect("shape")
    }

    /// The reversal map `ℛ : CNQ → A`, `Y ↦ U†YU + Tr[(1−Π_{CNQ})Y] σ` with
    /// `σ` the leading eigenvector of the support projector.
    pub fn reversal_channel(&self) -> Result<Channel> {
        let d = self.u_ki.nrows();
        let proj = &self.u_ki * self.u_ki.adjoint();
        let comp = eigh(&(Matrix::identity(d, d) - proj));
        let (_, perp) = comp.support(0.5);
        let anchor = eigh(&self.support).vectors.column(0).into_owned();
        let mut kraus = vec![self.u_ki.adjoint()];
        for k in 0..perp.ncols() {
            kraus.push(&anchor * perp.column(k).adjoint());
        }
        QuantumChannel::new(self.dims_cnq(), SystemDims::single("A", self.dim_a)?, kraus)
    }

    /// The full KI image as an isometry on the support: `U_KI` as a matrix.
    pub fn isometry_defect(&self) -> f64 {
        linalg::max_abs(&(self.u_ki.adjoint() * &self.u_ki - &self.support))
    }
}

/// `σ_j/p_j = ρ_j^{QR} ⊗ ω_j` reordered to `Q ⊗ N ⊗ R`.
fn block_state_qnr(b: &KiBlock, dr: usize) -> Matrix {
    let qrn = linalg::kron(&b.rho_qr, &b.omega);
    // factors (Q, R, N) → (Q, N, R)
    linalg::permute_matrix(&qrn, &[b.q_dim, dr, b.n_dim], &[0, 2, 1])
}

/// Decomposition with default options (seed from the environment).
pub fn ki_decompose(rho_ar: &State) -> Result<KiDecomposition> {
    ki_decompose_with(
        rho_ar,
        &KiOptions {
            seed: crate::qcore::random::default_seed(),
            ..KiOptions::default()
        },
    )
}

pub fn ki_decompose_with(rho_ar: &State, opts: &KiOptions) -> Result<KiDecomposition> {
    let s = rho_ar.reorder(&["A", "R"])?;
    let da = s.dims().dim_of("A")?;
    let dr = s.dims().dim_of("R")?;
    if s.dims().len() != 2 {
        return Err(Error::DimMismatch(format!(
            "source must live on A and R only, got {}",
            s.dims()
        )));
    }
    let povm = opts.povm.clone().unwrap_or_else(|| make_ic_povm(dr));
    let ens = measure_reference(&s, &povm)?;
    let gen = generate_algebra(&ens)?;
    let structure = decompose_algebra(&gen.algebra, opts.seed)?;

    let rho = s.matrix();
    let id_r = Matrix::identity(dr, dr);
    let mut blocks = Vec::with_capacity(structure.blocks.len());
    let mut kernels = Vec::with_capacity(structure.blocks.len());
    for ab in &structure.blocks {
        // A → support coordinates → block → Q ⊗ N
        let iso = ab.isometry() * gen.support.adjoint();
        let k = linalg::kron(&iso, &id_r);
        let sigma = linalg::hermitize(&(&k * rho * k.adjoint()));
        let (q, m) = (ab.q_dim, ab.n_dim);
        let p = sigma.trace().re;
        if p <= 0.0 {
            return Err(Error::VerificationFailed("block with zero weight".into()));
        }
        let dims = [q, m, dr];
        let omega = linalg::partial_trace_matrix(&sigma, &dims, &[1]).map(|z| z / p);
        let rho_qr = linalg::partial_trace_matrix(&sigma, &dims, &[0, 2]).map(|z| z / p);
        blocks.push(KiBlock {
            p,
            q_dim: q,
            n_dim: m,
            omega: linalg::hermitize(&omega),
            rho_qr: linalg::hermitize(&rho_qr),
            isometry: iso,
            q_slots: Vec::new(),
            n_slots: Vec::new(),
        });
        kernels.push((k, sigma));
    }

    // coherences between blocks and per-block product form are checked on
    // the transformed state before the weights are normalized
    let mut coherence = 0.0f64;
    for (j, (kj, _)) in kernels.iter().enumerate() {
        for (kk, _) in kernels.iter().skip(j + 1) {
            coherence = coherence.max(linalg::max_abs(&(kj * rho * kk.adjoint())));
        }
    }
    let mut product_defect = 0.0f64;
    let mut cmi = 0.0;
    for (b, (_, sigma)) in blocks.iter().zip(&kernels) {
        let normalized = sigma.map(|z| z / b.p);
        let target = block_state_qnr(b, dr);
        product_defect = product_defect.max(0.5 * trace_norm_hermitian(&(&normalized - target)));
        let s_n = entropy_matrix(&b.omega);
        let s_qr = entropy_matrix(&b.rho_qr);
        let s_all = entropy_matrix(&normalized);
        cmi += b.p * (s_n + s_qr - s_all);
    }

    let total: f64 = blocks.iter().map(|b| b.p).sum();
    let tol = opts.tolerances;
    if (total - 1.0).abs() > tol.isometry {
        return Err(Error::VerificationFailed(format!("block weights sum to {total:.12}")));
    }
    let mut ki = KiDecomposition::from_blocks(da, dr, blocks, opts.seed, tol)?;
    let support_proj = {
        let e = eigh(&s.partial_trace(&["A"])?.into_matrix());
        let (_, v) = e.support(SUPPORT_TOL);
        &v * v.adjoint()
    };
    ki.support = support_proj;
    let iso_defect = ki.isometry_defect();
    let fid = fidelity_matrix(rho, ki.reconstruct().matrix());
    ki.verification = Verification {
        reconstruction_fidelity: fid,
        conditional_mutual_info: cmi,
        product_defect,
        coherence,
        isometry_defect: iso_defect,
    };
    verify(&ki)?;
    Ok(ki)
}

/// Check every recorded invariant of an assembled decomposition.
pub fn verify(ki: &KiDecomposition) -> Result<()> {
    let tol = ki.tolerances;
    let v = &ki.verification;
    let total: f64 = ki.blocks.iter().map(|b| b.p).sum();
    if (total - 1.0).abs() > tol.isometry {
        return Err(Error::VerificationFailed(format!("block weights sum to {total:.12}")));
    }
    for (j, b) in ki.blocks.iter().enumerate() {
        for (name, m, dims) in [
            ("omega", &b.omega, SystemDims::single("N", b.n_dim)?),
            ("rho_QR", &b.rho_qr, SystemDims::new([("Q", b.q_dim), ("R", ki.dim_r)])?),
        ] {
            State::new_unchecked(dims, m.clone())?
                .validate(tol.isometry)
                .map_err(|e| Error::VerificationFailed(format!("block {j} {name}: {e}")))?;
        }
    }
    if v.isometry_defect > tol.isometry {
        return Err(Error::VerificationFailed(format!(
            "U_KI is not an isometry on the support (defect {:.3e})",
            v.isometry_defect
        )));
    }
    if v.coherence > tol.structure {
        return Err(Error::VerificationFailed(format!(
            "coherence {:.3e} between distinct blocks",
            v.coherence
        )));
    }
    if v.conditional_mutual_info > tol.structure {
        return Err(Error::VerificationFailed(format!(
            "I(N:QR|C) = {:.3e} exceeds {:.0e}",
            v.conditional_mutual_info, tol.structure
        )));
    }
    if v.product_defect > tol.structure {
        return Err(Error::VerificationFailed(format!(
            "N-marginal given j differs from omega_j (trace distance {:.3e})",
            v.product_defect
        )));
    }
    if v.reconstruction_fidelity < 1.0 - tol.fidelity {
        return Err(Error::VerificationFailed(format!(
            "reconstruction fidelity {:.15} below 1 - {:.0e}",
            v.reconstruction_fidelity, tol.fidelity
        )));
    }
    Ok(())
}
