//! The achievability protocol at desk scale: typical subspaces, Schumacher
//! codes on the `CQ` part of a KI decomposition, the regeneration map for
//! the redundant part, and end-to-end fidelity reports.
//!
//! The fidelity of the full pipeline
//! `U_KI^{⊗n} → Tr_{Nⁿ} → code → 𝒩^{⊗n} → U_KI†` on `ρ^{⊗n}` equals the
//! fidelity of the code on `ω^{CQR}`: `𝒩` maps `ω^{CQR}` back to `ω^{CNQR}`
//! and tracing `N` inverts it, so neither step changes the fidelity, and
//! `U_KI` is an isometry on the support. The reports therefore evaluate the
//! code on `ω^{CQR}` with the exact engine; the module tests check the
//! shortcut against the dense pipeline.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::Serialize;

use super::code::{
    checked_power, digits, ranked_sequences, retained_count, sequence_weight, ProductBasisCode, DENSE_CAP, SEQUENCE_CAP,
};
use super::engine::{code_fidelity, ProductSource};
use crate::ki::{ki_decompose, KiDecomposition};
use crate::qcore::io::fmt_f17;
use crate::qcore::linalg::{self, eigh};
use crate::qcore::measures::entropy_of_spectrum;
use crate::rates::rate_region;
use crate::{Channel, Error, Isometry, Matrix, Result, State, SystemDims};

/// Slack on the typicality window (guards rounding of `log₂` products).
pub const TYPICAL_TOL: f64 = 1e-12;
/// Eigenvalues of `ω_j` below this are dropped from the regeneration map.
pub const KRAUS_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Unassisted,
    Assisted,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Unassisted => "unassisted",
            Mode::Assisted => "assisted",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unassisted" => Ok(Mode::Unassisted),
            "assisted" => Ok(Mode::Assisted),
            other => Err(Error::Parse(format!(
                "mode `{other}` is neither `unassisted` nor `assisted`"
            ))),
        }
    }
}

/// Single-copy orthonormal basis (columns) with the weight of each vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LetterBasis {
    pub basis: Matrix,
    pub weights: Vec<f64>,
}

impl LetterBasis {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// Eigenbasis of `rho`, eigenvalues descending; degenerate eigenvalues keep
/// the solver's column order, which is deterministic.
pub fn eigen_letters(rho: &Matrix) -> LetterBasis {
    let e = eigh(rho);
    LetterBasis {
        weights: e.values.iter().map(|&v| v.max(0.0)).collect(),
        basis: e.vectors,
    }
}

/// Block-aware eigenbasis of `ω^{CQ}` on the padded `C ⊗ Q`: letter
/// `j·|Q| + k` is `|j⟩ ⊗ e_{j,k}` with `e_{j,k}` the `k`-th eigenvector of
/// `ρ_j^Q` placed in the block's slots (weight `p_j λ_{j,k}`); letters past
/// the block dimension fill the unused slots with weight 0.
pub fn cq_letters(ki: &KiDecomposition) -> LetterBasis {
    let (c, _, q) = ki.padded_dims();
    let mut basis = Matrix::zeros(c * q, c * q);
    let mut weights = vec![0.0; c * q];
    for (j, b) in ki.blocks.iter().enumerate() {
        let e = eigh(&b.rho_q(ki.dim_r));
        for k in 0..b.q_dim {
            for (s, &slot) in b.q_slots.iter().enumerate() {
                basis[(j * q + slot, j * q + k)] = e.vectors[(s, k)];
            }
            weights[j * q + k] = b.p * e.values[k].max(0.0);
        }
        let unused = (0..q).filter(|s| !b.q_slots.contains(s));
        for (k, slot) in (b.q_dim..q).zip(unused) {
            basis[(j * q + slot, j * q + k)] = Complex::new(1.0, 0.0);
        }
    }
    LetterBasis { basis, weights }
}

/// Typical subspace of `ρ^{⊗n}` in the product eigenbasis of `ρ`.
#[derive(Debug, Clone)]
pub struct TypicalSubspace {
    pub letters: LetterBasis,
    pub n: usize,
    pub entropy: f64,
    /// Typical sequences `(flat index, eigenvalue product)` in flat order.
    pub sequences: Vec<(usize, f64)>,
    /// `Tr[Π ρ^{⊗n}]`.
    pub mass: f64,
}

impl TypicalSubspace {
    pub fn rank(&self) -> usize {
        self.sequences.len()
    }

    /// The projector `Π` as a dense matrix.
    pub fn projector(&self) -> Result<Matrix> {
        let d = self.letters.dim();
        let total = checked_power(d, self.n, DENSE_CAP)?;
        let mut out = Matrix::zeros(total, total);
        for &(f, _) in &self.sequences {
            let v = product_vector(&self.letters.basis, &digits(f, d, self.n));
            out += &v * v.adjoint();
        }
        Ok(out)
    }
}

/// `⊗_i basis[:, seq_i]`.
fn product_vector(basis: &Matrix, seq: &[usize]) -> Matrix {
    seq.iter().fold(Matrix::identity(1, 1), |acc, &x| {
        linalg::kron(
            &acc,
            &Matrix::from_column_slice(basis.nrows(), 1, basis.column(x).as_slice()),
        )
    })
}

/// Span of the product eigenvectors whose eigenvalue `p` satisfies
/// `|−(1/n) log₂ p − S(ρ)| ≤ delta`.
pub fn typical_projector(rho: &State, n: usize, delta: f64) -> Result<TypicalSubspace> {
    if n == 0 {
        return Err(Error::InvalidState("block length must be positive".into()));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidState(format!(
            "typicality window {delta} must be finite and nonnegative"
        )));
    }
    let letters = eigen_letters(rho.matrix());
    let d = letters.dim();
    let total = checked_power(d, n, SEQUENCE_CAP)?;
    let entropy = entropy_of_spectrum(letters.weights.iter().copied());
    let sequences: Vec<(usize, f64)> = (0..total)
        .map(|f| (f, sequence_weight(&digits(f, d, n), &letters.weights)))
        .filter(|&(_, p)| p > 0.0 && (-p.log2() / n as f64 - entropy).abs() <= delta + TYPICAL_TOL)
        .collect();
    let mass = sequences.iter().map(|&(_, p)| p).sum();
    Ok(TypicalSubspace {
        letters,
        n,
        entropy,
        sequences,
        mass,
    })
}

/// A block code together with its resource ledger.
#[derive(Debug, Clone)]
pub struct CodeInstance {
    pub n: usize,
    pub mode: Mode,
    pub code: ProductBasisCode,
    /// Qubits charged, `log₂|M|` (ledger value in assisted mode).
    pub log_m: f64,
    /// Ebits charged, `log₂K`.
    pub log_k: f64,
}

impl CodeInstance {
    pub fn rate_q(&self) -> f64 {
        self.log_m / self.n as f64
    }

    pub fn rate_e(&self) -> f64 {
        self.log_k / self.n as f64
    }

    /// Encoder isometry `Xⁿ → M ⊗ W` (letters `X1..Xn`, code environment `W`):
    /// retained sequences go to `|index⟩_M|0⟩_W`, the `i`-th discarded one to
    /// `|fallback⟩_M|1+i⟩_W`. Everything is expressed in the code basis.
    pub fn encoder(&self) -> Result<Isometry> {
        let c = &self.code;
        let wn = c.basis_power()?;
        let total = c.total_dim();
        let m = c.message_dim();
        let pos = retained_positions(c);
        let env = 1 + total - m;
        let mut t = Matrix::zeros(m * env, total);
        let mut next = 1;
        for x in 0..total {
            match pos[x] {
                Some(i) => t[(i * env, x)] = Complex::new(1.0, 0.0),
                None => {
                    let f = pos[c.fallback()].expect("fallback is retained");
                    t[(f * env + next, x)] = Complex::new(1.0, 0.0);
                    next += 1;
                }
            }
        }
        let out = SystemDims::new([("M", m), ("W", env)])?;
        Isometry::new(self.letter_dims()?, out, t * wn.adjoint())
    }

    /// Decoder isometry `M → Xⁿ`, `|i⟩ ↦` the `i`-th retained code vector.
    pub fn decoder(&self) -> Result<Isometry> {
        let c = &self.code;
        let wn = c.basis_power()?;
        let d = wn.select_columns(c.retained());
        Isometry::new(SystemDims::single("M", c.message_dim())?, self.letter_dims()?, d)
    }

    fn letter_dims(&self) -> Result<SystemDims> {
        let d = self.code.local_dim();
        SystemDims::new((1..=self.n).map(|i| (format!("X{i}"), d)))
    }
}

/// Position of every sequence within the retained list.
fn retained_positions(c: &ProductBasisCode) -> Vec<Option<usize>> {
    let mut pos = vec![None; c.total_dim()];
    for (i, &f) in c.retained().iter().enumerate() {
        pos[f] = Some(i);
    }
    pos
}

fn check_rate(rate: f64, what: &str) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidState(format!(
            "{what} {rate} must be finite and nonnegative"
        )))
    }
}

/// Top-`⌊2^{n·rate}⌋` code in the given letter basis.
pub fn schumacher_code_on(letters: &LetterBasis, n: usize, rate_q: f64) -> Result<CodeInstance> {
    check_rate(rate_q, "rate")?;
    if n == 0 {
        return Err(Error::InvalidState("block length must be positive".into()));
    }
    let k = retained_count(n, rate_q, letters.dim());
    let code = ProductBasisCode::top_k(letters.basis.clone(), letters.weights.clone(), n, k)?;
    Ok(CodeInstance {
        n,
        mode: Mode::Unassisted,
        log_m: code.log_m(),
        log_k: 0.0,
        code,
    })
}

/// Schumacher code in the eigenbasis of `rho`.
pub fn schumacher_code(rho: &State, n: usize, rate_q: f64) -> Result<CodeInstance> {
    schumacher_code_on(&eigen_letters(rho.matrix()), n, rate_q)
}

/// Schumacher code on the `CQ` part of a decomposition (block-aware basis).
pub fn cq_code(ki: &KiDecomposition, n: usize, rate_q: f64) -> Result<CodeInstance> {
    schumacher_code_on(&cq_letters(ki), n, rate_q)
}

/// Assisted code: the `⌊2^{n(S(C)+slack)}⌋` likeliest `jⁿ`, and for each of
/// them the `⌊2^{n(S(Q|C)+slack)}⌋` likeliest `kⁿ` under `Π_i λ_{j_i,k_i}`.
/// The ledger charges the classical part half in qubits and half in ebits.
pub fn assisted_code(ki: &KiDecomposition, n: usize, slack: f64) -> Result<CodeInstance> {
    check_rate(slack, "slack")?;
    if n == 0 {
        return Err(Error::InvalidState("block length must be positive".into()));
    }
    let region = rate_region(ki)?;
    let (c, _, q) = ki.padded_dims();
    let d = c * q;
    checked_power(d, n, SEQUENCE_CAP)?;
    let letters = cq_letters(ki);
    let p = ki.probabilities();
    let lam: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            (0..q)
                .map(|k| {
                    if p[j] > 0.0 {
                        letters.weights[j * q + k] / p[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let k_c = retained_count(n, region.s_c + slack, c);
    let k_q = retained_count(n, region.s_q_given_c + slack, q);
    let q_total = checked_power(q, n, SEQUENCE_CAP)?;

    let mut retained = Vec::new();
    for &(jflat, _) in ranked_sequences(&p, n)?.iter().take(k_c) {
        let js = digits(jflat, c, n);
        let mut ks: Vec<(usize, f64)> = (0..q_total)
            .map(|kflat| {
                let mut pairs: Vec<(usize, usize)> = js.iter().copied().zip(digits(kflat, q, n)).collect();
                pairs.sort_unstable();
                (kflat, pairs.iter().fold(1.0, |acc, &(j, k)| acc * lam[j][k]))
            })
            .collect();
        ks.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        for &(kflat, _) in ks.iter().take(k_q) {
            let ksd = digits(kflat, q, n);
            retained.push(js.iter().zip(&ksd).fold(0, |acc, (&j, &k)| acc * d + j * q + k));
        }
    }
    let fallback = retained[0];
    let code = ProductBasisCode::from_retained(letters.basis, letters.weights, n, retained, fallback)?;
    let classical = n as f64 * (region.s_c + slack);
    Ok(CodeInstance {
        n,
        mode: Mode::Assisted,
        code,
        log_m: classical / 2.0 + n as f64 * (region.s_q_given_c + slack),
        log_k: classical / 2.0,
    })
}

/// `𝒩 : CQ → CNQ`, `X ↦ Σ_j (|j⟩⟨j|⊗1) X (|j⟩⟨j|⊗1) ⊗ ω_j`, with Kraus
/// operators `√λ_{j,a} |j⟩⟨j| ⊗ |e_{j,a}⟩ ⊗ 1_Q` for the eigenpairs of `ω_j`.
pub fn reconstruct_n_channel(ki: &KiDecomposition) -> Result<Channel> {
    let (c, nd, q) = ki.padded_dims();
    let mut kraus = Vec::new();
    for (j, b) in ki.blocks.iter().enumerate() {
        let e = eigh(&crate::ki::decomposition::embed(&b.omega, &b.n_slots, nd, 1));
        for (a, &lam) in e.values.iter().enumerate() {
            if lam <= KRAUS_CUTOFF {
                continue;
            }
            let s = lam.sqrt();
            let mut k = Matrix::zeros(c * nd * q, c * q);
            for x in 0..nd {
                for y in 0..q {
                    k[((j * nd + x) * q + y, j * q + y)] = e.vectors[(x, a)] * s;
                }
            }
            kraus.push(k);
        }
    }
    let in_dims = SystemDims::new([("C", c), ("Q", q)])?;
    Channel::new(in_dims, ki.dims_cnq(), kraus)
}

/// One simulated point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub n: usize,
    pub mode: Mode,
    pub rate_q: f64,
    pub rate_e: f64,
    /// `F(ρ^{AⁿRⁿ}, ξ^{ÂⁿRⁿ})` (root fidelity).
    pub fidelity: f64,
    /// Weight of the retained sequences, `Tr[Π ω_{CQ}^{⊗n}]`.
    pub typical_mass: f64,
    /// `|M|` of the physical code (retained sequences).
    pub dims_used: usize,
}

/// Exact end-to-end fidelity of a code on the `CQ` part of `ki`.
pub fn code_instance_fidelity(ki: &KiDecomposition, code: &CodeInstance) -> Result<f64> {
    let (c, _, q) = ki.padded_dims();
    let src = ProductSource::from_matrix(ki.omega_cqr().matrix(), c * q, ki.dim_r)?;
    Ok(code_fidelity(&src, &code.code)?.clamp(0.0, 1.0))
}

fn report(code: &CodeInstance, fidelity: f64) -> SimulationReport {
    SimulationReport {
        n: code.n,
        mode: code.mode,
        rate_q: code.rate_q(),
        rate_e: code.rate_e(),
        fidelity,
        typical_mass: code.code.retained_mass(),
        dims_used: code.code.message_dim(),
    }
}

pub fn run_unassisted_ki(ki: &KiDecomposition, n: usize, rate_q: f64) -> Result<SimulationReport> {
    let code = cq_code(ki, n, rate_q)?;
    Ok(report(&code, code_instance_fidelity(ki, &code)?))
}

pub fn run_assisted_ki(ki: &KiDecomposition, n: usize, slack: f64) -> Result<SimulationReport> {
    let code = assisted_code(ki, n, slack)?;
    Ok(report(&code, code_instance_fidelity(ki, &code)?))
}

/// Decompose `rho_ar` (default seed) and run the unassisted protocol.
pub fn run_unassisted(rho_ar: &State, n: usize, rate_q: f64) -> Result<SimulationReport> {
    run_unassisted_ki(&ki_decompose(rho_ar)?, n, rate_q)
}

/// Decompose `rho_ar` (default seed) and run the assisted protocol.
pub fn run_assisted(rho_ar: &State, n: usize, slack: f64) -> Result<SimulationReport> {
    run_assisted_ki(&ki_decompose(rho_ar)?, n, slack)
}

/// Control experiment: Schumacher compression of the whole of `A`, ignoring
/// the decomposition. `rho_ar` is ordered `A ⊗ R`.
pub fn run_plain_schumacher(rho_ar: &State, n: usize, rate_q: f64) -> Result<SimulationReport> {
    let dims = rho_ar.dims().dims();
    if dims.len() != 2 {
        return Err(Error::DimMismatch(format!(
            "expected a bipartite source, got {}",
            rho_ar.dims()
        )));
    }
    let src = ProductSource::from_matrix(rho_ar.matrix(), dims[0], dims[1])?;
    let code = schumacher_code_on(&eigen_letters(&src.marginal_x()), n, rate_q)?;
    let fidelity = code_fidelity(&src, &code.code)?.clamp(0.0, 1.0);
    Ok(report(&code, fidelity))
}

/// Reports as CSV with header `n,rateQ,rateE,fidelity,typical_mass`.
pub fn reports_csv(rows: &[SimulationReport]) -> String {
    let mut out = String::from("n,rateQ,rateE,fidelity,typical_mass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            fmt_f17(r.rate_q),
            fmt_f17(r.rate_e),
            fmt_f17(r.fidelity),
            fmt_f17(r.typical_mass)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ki::{ki_decompose_with, synth_ki_state_with, BlockSpec, KiOptions, SynthOptions};
    use crate::qcore::maps::apply;
    use crate::qcore::measures::{fidelity, fidelity_matrix};
    use crate::qcore::random::{random_density_rng, random_state, rng_from_seed};
    use crate::qcore::scalar::cr;
    use crate::Vector;

    fn d2(a: usize, r: usize) -> SystemDims {
        SystemDims::new([("A", a), ("R", r)]).unwrap()
    }

    fn bell() -> State {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        State::from_pure(d2(2, 2), &Vector::from_vec(vec![cr(h), cr(0.0), cr(0.0), cr(h)])).unwrap()
    }

    fn classical_bit() -> State {
        State::diagonal(d2(2, 2), &[0.5, 0.0, 0.0, 0.5]).unwrap()
    }

    fn decomp(s: &State) -> KiDecomposition {
        ki_decompose_with(s, &KiOptions::default()).unwrap()
    }

    fn two_block() -> (State, KiDecomposition) {
        synth_ki_state_with(
            &[BlockSpec::from((0.7, 2, 1)), BlockSpec::from((0.3, 1, 2))],
            2,
            5,
            &SynthOptions::default(),
        )
        .unwrap()
    }

    fn binomial(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn typical_pure_and_uniform() {
        let pure = State::basis(SystemDims::single("A", 3).unwrap(), 1).unwrap();
        for n in 1..4 {
            let t = typical_projector(&pure, n, 0.1).unwrap();
            assert_eq!(t.rank(), 1);
            assert!((t.mass - 1.0).abs() < 1e-12);
        }
        let mm = State::maximally_mixed(SystemDims::single("A", 2).unwrap());
        let t = typical_projector(&mm, 5, 0.0).unwrap();
        assert_eq!(t.rank(), 32);
        assert!((t.mass - 1.0).abs() < 1e-12);
        let p = t.projector().unwrap();
        assert!(linalg::max_abs(&(p - Matrix::identity(32, 32))) < 1e-12);
    }

    #[test]
    fn typical_mass_matches_binomial_sum() {
        let rho = State::diagonal(SystemDims::single("A", 2).unwrap(), &[0.9, 0.1]).unwrap();
        let (n, delta) = (10u64, 0.2);
        let t = typical_projector(&rho, n as usize, delta).unwrap();
        let s = crate::qcore::measures::binary_entropy(0.1);
        let mut mass = 0.0;
        let mut rank = 0.0;
        for k in 0..=n {
            let p = 0.9f64.powi((n - k) as i32) * 0.1f64.powi(k as i32);
            if (-p.log2() / n as f64 - s).abs() <= delta {
                mass += binomial(n, k) * p;
                rank += binomial(n, k);
            }
        }
        assert!((t.mass - mass).abs() < 1e-12);
        assert_eq!(t.rank() as f64, rank);
        assert!(t.mass > 0.0 && t.mass < 1.0);
        assert!(matches!(
            typical_projector(&rho, 15, delta),
            Err(Error::DimTooLarge { .. })
        ));
    }

    #[test]
    fn typical_projector_is_projector_with_mass() {
        let rho = random_state::<f64>(&SystemDims::single("A", 3).unwrap(), 3, 4).unwrap();
        let t = typical_projector(&rho, 3, 0.3).unwrap();
        let p = t.projector().unwrap();
        assert!(linalg::max_abs(&(&p * &p - &p)) < 1e-10);
        let rn = rho.tensor_power(3).unwrap();
        assert!((linalg::trace(&(&p * rn.matrix())).re - t.mass).abs() < 1e-10);
    }

    #[test]
    fn cq_letters_are_orthonormal_and_block_local() {
        let (_, ki) = two_block();
        let l = cq_letters(&ki);
        assert!(linalg::isometry_defect(&l.basis) < 1e-12);
        assert!((l.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // ω^{CQ} is diagonal in the letter basis with the letter weights
        let cq = ki.omega_cqr().partial_trace(&["C", "Q"]).unwrap();
        let t = l.basis.adjoint() * cq.matrix() * &l.basis;
        let diag = Matrix::from_diagonal(&Vector::from_iterator(l.dim(), l.weights.iter().map(|&w| cr(w))));
        assert!(linalg::max_abs(&(t - diag)) < 1e-10);
    }

    #[test]
    fn reconstruction_map_regenerates_omega() {
        let (_, ki) = two_block();
        let n = reconstruct_n_channel(&ki).unwrap();
        assert!(n.trace_preservation_defect() < 1e-10);
        let cqr = ki.omega_cqr();
        let out = apply(&n, &cqr, &["C", "Q"]).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - ki.omega_cnqr().matrix())) < 1e-9);
    }

    #[test]
    fn reconstruction_map_is_pinch_and_append() {
        let (_, ki) = two_block();
        let (c, nd, q) = ki.padded_dims();
        let n = reconstruct_n_channel(&ki).unwrap();
        // block-diagonal input Σ p_j |j⟩⟨j| ⊗ σ_j
        let mut rng = rng_from_seed(3);
        let mut x = Matrix::zeros(c * q, c * q);
        for (j, b) in ki.blocks.iter().enumerate() {
            let s = crate::ki::decomposition::embed(
                &random_density_rng::<f64, _>(b.q_dim, b.q_dim, &mut rng),
                &b.q_slots,
                q,
                1,
            );
            x.view_mut((j * q, j * q), (q, q)).copy_from(&s.map(|z| z * b.p));
        }
        let xs = State::new(SystemDims::new([("C", c), ("Q", q)]).unwrap(), x.clone()).unwrap();
        let out = apply(&n, &xs, &["C", "Q"]).unwrap();
        let mut expect = Matrix::zeros(c * nd * q, c * nd * q);
        for (j, b) in ki.blocks.iter().enumerate() {
            let w = crate::ki::decomposition::embed(&b.omega, &b.n_slots, nd, 1);
            let blk = linalg::kron(&w, &x.view((j * q, j * q), (q, q)).into_owned());
            expect
                .view_mut((j * nd * q, j * nd * q), (nd * q, nd * q))
                .copy_from(&blk);
        }
        assert!(linalg::max_abs(&(out.matrix() - expect)) < 1e-12);
    }

    #[test]
    fn reconstruction_map_does_not_decrease_fidelity() {
        let (_, ki) = two_block();
        let n = reconstruct_n_channel(&ki).unwrap();
        let cqr = ki.omega_cqr();
        for seed in 0..10 {
            let z = random_state::<f64>(cqr.dims(), 3, seed).unwrap();
            let before = fidelity(&cqr, &z).unwrap();
            let after = fidelity(
                &apply(&n, &cqr, &["C", "Q"]).unwrap(),
                &apply(&n, &z, &["C", "Q"]).unwrap(),
            )
            .unwrap();
            assert!(after >= before - 1e-9);
        }
    }

    /// Dense pipeline `U_KI^{⊗n} → Tr_N → Λ → 𝒩 → U_KI†` on `ρ^{⊗n}`.
    fn dense_pipeline_fidelity(rho: &State, ki: &KiDecomposition, code: &CodeInstance) -> f64 {
        let n = code.n;
        let (c, nd, q) = ki.padded_dims();
        let (da, dr) = (ki.dim_a, ki.dim_r);
        let u = crate::Isometry::new_unchecked(SystemDims::single("A", da).unwrap(), ki.dims_cnq(), ki.u_ki.clone())
            .unwrap();
        let back = ki.reversal_channel().unwrap();
        let regen = reconstruct_n_channel(ki).unwrap();
        let rn = rho.tensor_power(n).unwrap();
        let mut s = rn.clone();
        for i in 0..n {
            let a = format!("A{i}");
            s = apply(&u, &s, &[&a])
                .unwrap()
                .relabel_with(&relabel_cnq(&s, &a, i, c, nd, q))
                .unwrap();
        }
        let mut letters: Vec<String> = Vec::new();
        for i in 0..n {
            s = s.trace_out(&[&format!("N{i}")]).unwrap();
            letters.push(format!("C{i}"));
            letters.push(format!("Q{i}"));
        }
        // group CQ pairs into the code's letters
        let rest: Vec<String> = (0..n).map(|i| format!("R{i}")).collect();
        let order: Vec<&str> = letters.iter().chain(&rest).map(|x| x.as_str()).collect();
        let s = s.reorder(&order).unwrap();
        let coded = code.code.apply_dense(s.matrix(), dr.pow(n as u32)).unwrap();
        let mut s = State::new_unchecked(s.dims().clone(), coded).unwrap();
        for i in 0..n {
            let cq = [format!("C{i}"), format!("Q{i}")];
            s = apply(&regen, &s, &[&cq[0], &cq[1]]).unwrap();
            s = s
                .relabel_with(
                    &SystemDims::new(s.dims().iter().map(|(l, d)| {
                        let l = match l {
                            "C" => format!("C{i}"),
                            "N" => format!("N{i}"),
                            "Q" => format!("Q{i}"),
                            o => o.to_string(),
                        };
                        (l, d)
                    }))
                    .unwrap(),
                )
                .unwrap();
            let cnq = [format!("C{i}"), format!("N{i}"), format!("Q{i}")];
            s = apply(&back, &s, &[&cnq[0], &cnq[1], &cnq[2]]).unwrap();
            s = s
                .relabel_with(
                    &SystemDims::new(
                        s.dims()
                            .iter()
                            .map(|(l, d)| (if l == "A" { format!("A{i}") } else { l.to_string() }, d)),
                    )
                    .unwrap(),
                )
                .unwrap();
        }
        let order: Vec<String> = (0..n).flat_map(|i| [format!("A{i}"), format!("R{i}")]).collect();
        let order: Vec<&str> = order.iter().map(|x| x.as_str()).collect();
        let s = s.reorder(&order).unwrap();
        fidelity_matrix(rn.matrix(), s.matrix())
    }

    fn relabel_cnq(s: &State, a: &str, i: usize, c: usize, nd: usize, q: usize) -> SystemDims {
        let mut pairs: Vec<(String, usize)> = Vec::new();
        for (l, d) in s.dims().iter() {
            if l == a {
                pairs.push((format!("C{i}"), c));
                pairs.push((format!("N{i}"), nd));
                pairs.push((format!("Q{i}"), q));
            } else {
                pairs.push((l.to_string(), d));
            }
        }
        SystemDims::new(pairs).unwrap()
    }

    #[test]
    fn engine_matches_dense_pipeline() {
        let (rho, ki) = two_block();
        let full = (ki.c_dim * ki.q_dim) as f64;
        for n in 1..=2 {
            for rate in [0.0, 0.6, 1.1, full.log2()] {
                let code = cq_code(&ki, n, rate).unwrap();
                let fast = code_instance_fidelity(&ki, &code).unwrap();
                let dense = dense_pipeline_fidelity(&rho, &ki, &code);
                assert!((fast - dense).abs() < 1e-8, "n={n} rate={rate}: {fast} vs {dense}");
            }
            let code = assisted_code(&ki, n, 0.1).unwrap();
            let fast = code_instance_fidelity(&ki, &code).unwrap();
            assert!((fast - dense_pipeline_fidelity(&rho, &ki, &code)).abs() < 1e-8);
        }
    }

    #[test]
    fn lossless_rate_gives_unit_fidelity() {
        for s in [bell(), classical_bit(), two_block().0] {
            let ki = decomp(&s);
            let full = ((ki.c_dim * ki.q_dim) as f64).log2();
            for n in [1, 3] {
                let r = run_unassisted_ki(&ki, n, full).unwrap();
                assert!((r.fidelity - 1.0).abs() < 1e-8);
                assert!((r.typical_mass - 1.0).abs() < 1e-12);
            }
            let r = run_unassisted_ki(&ki, 2, (ki.dim_a as f64).log2()).unwrap();
            assert!((r.fidelity - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn product_source_needs_no_qubits() {
        let a = random_state::<f64>(&SystemDims::single("A", 3).unwrap(), 3, 2).unwrap();
        let r = random_state::<f64>(&SystemDims::single("R", 2).unwrap(), 2, 3).unwrap();
        let rho = a.tensor(&r).unwrap();
        let rep = run_unassisted_ki(&decomp(&rho), 4, 0.0).unwrap();
        assert!((rep.fidelity - 1.0).abs() < 1e-8);
        assert_eq!(rep.dims_used, 1);
        assert_eq!(rep.rate_q, 0.0);
    }

    #[test]
    fn fair_bit_at_full_rate() {
        let rep = run_unassisted_ki(&decomp(&classical_bit()), 6, 1.0).unwrap();
        assert!(rep.fidelity >= 0.99);
        assert!((rep.rate_q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rate_fidelity_is_best_product_overlap() {
        // ψ pure: ξ = Πψ Π + Σ_{x≠s0} λ_x |s0⟩⟨s0| ⊗ |x⟩⟨x|_R, and only the
        // first term overlaps ψ, so F = ⟨ψ|ξ|ψ⟩^{1/2} = λ₀ⁿ
        let lam = [0.8f64, 0.2];
        let psi = Vector::from_vec(vec![cr(lam[0].sqrt()), cr(0.0), cr(0.0), cr(lam[1].sqrt())]);
        let rho = State::from_pure(d2(2, 2), &psi).unwrap();
        let ki = decomp(&rho);
        for n in 1..=3 {
            let rep = run_unassisted_ki(&ki, n, 0.0).unwrap();
            let expect = lam[0].powi(n as i32);
            assert!(
                (rep.fidelity - expect).abs() < 1e-9,
                "n={n}: {} vs {expect}",
                rep.fidelity
            );
        }
    }

    #[test]
    fn schumacher_fidelity_increases_with_n() {
        // pure qubit source with Schmidt weights (0.8, 0.2)
        let psi = Vector::from_vec(vec![cr(0.8f64.sqrt()), cr(0.0), cr(0.0), cr(0.2f64.sqrt())]);
        let ki = decomp(&State::from_pure(d2(2, 2), &psi).unwrap());
        let s = rate_region(&ki).unwrap().s_cq;
        let f: Vec<f64> = [2, 4, 6, 8]
            .iter()
            .map(|&n| run_unassisted_ki(&ki, n, s + 0.25).unwrap().fidelity)
            .collect();
        for w in f.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{f:?}");
        }
    }

    #[test]
    fn assisted_ledger() {
        let ki = decomp(&classical_bit());
        let rep = run_assisted_ki(&ki, 4, 0.0).unwrap();
        assert!((rep.rate_e - 0.5).abs() < 1e-12 && (rep.rate_q - 0.5).abs() < 1e-12);
        assert!((rep.fidelity - 1.0).abs() < 1e-8);

        let (_, ki) = synth_ki_state_with(
            &[BlockSpec::from((0.7, 2, 1)), BlockSpec::from((0.3, 1, 2))],
            2,
            5,
            &SynthOptions {
                qr_rank: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        let r = rate_region(&ki).unwrap();
        let slack = 0.3;
        let r4 = run_assisted_ki(&ki, 4, slack).unwrap();
        let r2 = run_assisted_ki(&ki, 2, slack).unwrap();
        assert!((r4.rate_e - (r.s_c + slack) / 2.0).abs() < 1e-12);
        assert!((r4.rate_q - ((r.s_c + slack) / 2.0 + r.s_q_given_c + slack)).abs() < 1e-12);
        assert!((r4.rate_q + r4.rate_e - (r.s_cq + 2.0 * slack)).abs() < 1e-12);
        assert!(r4.fidelity >= r2.fidelity - 1e-9);
    }

    #[test]
    fn assisted_without_classical_part_matches_unassisted_structure() {
        let ki = decomp(&bell());
        let rep = run_assisted_ki(&ki, 3, 0.2).unwrap();
        assert!((rep.rate_e - 0.1).abs() < 1e-12);
        assert!((rep.fidelity - 1.0).abs() < 1e-8);
    }

    #[test]
    fn encoder_and_decoder_realize_the_code() {
        let (_, ki) = two_block();
        let code = cq_code(&ki, 2, 0.8).unwrap();
        let enc = code.encoder().unwrap();
        let dec = code.decoder().unwrap();
        let cq = ki.omega_cqr().partial_trace(&["C", "Q"]).unwrap();
        let d = cq.dim();
        let src = State::new_unchecked(
            SystemDims::new([("X1", d), ("X2", d)]).unwrap(),
            linalg::kron(cq.matrix(), cq.matrix()),
        )
        .unwrap();
        let via_iso = apply(&enc.to_channel_tracing(&["W"]).unwrap(), &src, &["X1", "X2"]).unwrap();
        let out = apply(&dec, &via_iso, &["M"]).unwrap();
        let direct = code.code.apply_dense(src.matrix(), 1).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - direct)) < 1e-12);
    }

    #[test]
    fn csv_and_parsing() {
        let ki = decomp(&bell());
        let rows = vec![run_unassisted_ki(&ki, 2, 1.0).unwrap()];
        let csv = reports_csv(&rows);
        assert!(csv.starts_with("n,rateQ,rateE,fidelity,typical_mass\n"));
        assert_eq!(csv.lines().count(), 2);
        assert_eq!("assisted".parse::<Mode>().unwrap(), Mode::Assisted);
        assert!("both".parse::<Mode>().is_err());
        assert!(cq_code(&ki, 2, -1.0).is_err());
    }

    #[test]
    fn control_code_matches_schumacher_on_a() {
        let rho = bell();
        let a = run_plain_schumacher(&rho, 3, 1.0).unwrap();
        assert!((a.fidelity - 1.0).abs() < 1e-8);
        let half = run_plain_schumacher(&rho, 2, 0.5).unwrap();
        assert!((half.fidelity - 0.5).abs() < 1e-9);
    }
}
