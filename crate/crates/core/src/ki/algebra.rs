//! Finite-dimensional *-algebras: closure of a generating set and the
//! block (center / commutant) factorization.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use super::ensemble::Ensemble;
use crate::qcore::linalg::{self, eigh};
use crate::qcore::random::rng_from_seed;
use crate::{Error, Matrix, Result};

/// Span rank threshold used during closure.
pub const SPAN_TOL: f64 = 1e-9;
/// Eigenvalues of a generic central element closer than this collide.
pub const CENTER_GAP: f64 = 1e-8;
/// Allowed deviation from the `M ⊗ 1` form after factorization.
pub const FACTOR_TOL: f64 = 1e-8;
/// Times of the modular flow `X ↦ w^{it} X w^{-it}` used during closure;
/// their ratio is irrational, so invariance under both is invariance under
/// the whole flow.
pub const MODULAR_TIMES: [f64; 2] = [1.0, std::f64::consts::SQRT_2];
/// Random splits attempted before giving up.
pub const MAX_SPLIT_RETRIES: usize = 8;
/// Support threshold for the average state.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Operations the span of an algebra is closed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Closure {
    pub product: bool,
    pub adjoint: bool,
    pub modular: bool,
}

/// Subspace of `d × d` matrices with a Hilbert-Schmidt orthonormal basis.
#[derive(Debug, Clone)]
pub struct MatrixAlgebra {
    dim: usize,
    basis: Vec<Matrix>,
    closed_under: Closure,
}

/// Orthonormalize `x` against `basis`; push and return true if it adds a
/// direction of relative size above `tol`.
fn span_insert(basis: &mut Vec<Matrix>, x: &Matrix, tol: f64) -> bool {
    let nrm = linalg::frobenius(x);
    if nrm <= f64::MIN_POSITIVE {
        return false;
    }
    let mut y = x.map(|z| z / nrm);
    for _ in 0..2 {
        for b in basis.iter() {
            let c = linalg::hs_inner(b, &y);
            y -= b.map(|z| z * c);
        }
    }
    let r = linalg::frobenius(&y);
    if r <= tol {
        return false;
    }
    basis.push(y.map(|z| z / r));
    true
}

impl MatrixAlgebra {
    /// Span of `gens` (no closure applied).
    pub fn span(dim: usize, gens: &[Matrix]) -> Self {
        let mut basis = Vec::new();
        for g in gens {
            span_insert(&mut basis, g, SPAN_TOL);
        }
        Self {
            dim,
            basis,
            closed_under: Closure::default(),
        }
    }

    /// Smallest *-algebra containing the identity and `gens`, also closed
    /// under the modular flow `X ↦ diag(w)^{it} X diag(w)^{-it}` when
    /// `modular` is given.
    pub fn generate(dim: usize, gens: &[Matrix], modular: Option<&[f64]>) -> Self {
        let mut basis: Vec<Matrix> = Vec::new();
        span_insert(&mut basis, &Matrix::identity(dim, dim), SPAN_TOL);
        for g in gens {
            span_insert(&mut basis, g, SPAN_TOL);
        }
        let full = dim * dim;
        // semi-naive closure: each pass only combines with elements new in
        // the previous pass
        let mut fresh_from = 0;
        while basis.len() < full {
            let before = basis.len();
            let snapshot = basis.clone();
            for x in &snapshot[fresh_from..] {
                span_insert(&mut basis, &x.adjoint(), SPAN_TOL);
                if let Some(w) = modular {
                    // the unitary flow spans the same invariant subspaces as
                    // `X ↦ w X w^{-1}` without amplifying rounding by w_max/w_min
                    for t in MODULAR_TIMES {
                        let y = Matrix::from_fn(dim, dim, |a, b| {
                            x[(a, b)] * Complex::from_polar(1.0, t * (w[a] / w[b]).ln())
                        });
                        span_insert(&mut basis, &y, SPAN_TOL);
                    }
                }
            }
            for (i, x) in snapshot.iter().enumerate() {
                let start = if i >= fresh_from { 0 } else { fresh_from };
                for y in &snapshot[start..] {
                    span_insert(&mut basis, &(x * y), SPAN_TOL);
                    span_insert(&mut basis, &(y * x), SPAN_TOL);
                    if basis.len() == full {
                        break;
                    }
                }
                if basis.len() == full {
                    break;
                }
            }
            if basis.len() == before {
                break;
            }
            fresh_from = before;
        }
        Self {
            dim,
            basis,
            closed_under: Closure {
                product: true,
                adjoint: true,
                modular: modular.is_some(),
            },
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the algebra as a vector space.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Matrix] {
        &self.basis
    }

    pub fn closed_under(&self) -> Closure {
        self.closed_under
    }

    /// Distance of `x` from the span, relative to `‖x‖`.
    pub fn residual(&self, x: &Matrix) -> f64 {
        let nrm = linalg::frobenius(x);
        if nrm == 0.0 {
            return 0.0;
        }
        let mut y = x.map(|z| z / nrm);
        for _ in 0..2 {
            for b in &self.basis {
                let c = linalg::hs_inner(b, &y);
                y -= b.map(|z| z * c);
            }
        }
        linalg::frobenius(&y)
    }

    pub fn contains(&self, x: &Matrix, tol: f64) -> bool {
        self.residual(x) <= tol
    }

    /// Basis of `{Z ∈ alg : [Z, X] = 0 for all X ∈ alg}`.
    pub fn center(&self) -> Vec<Matrix> {
        let k = self.basis.len();
        let d = self.dim;
        let mut a = Matrix::zeros(k * d * d, k);
        for (l, bl) in self.basis.iter().enumerate() {
            for (c, bc) in self.basis.iter().enumerate() {
                let comm = bc * bl - bl * bc;
                for r in 0..d {
                    for s in 0..d {
                        a[(l * d * d + r * d + s, c)] = comm[(r, s)];
                    }
                }
            }
        }
        let ns = linalg::null_space(&a, SPAN_TOL);
        (0..ns.ncols())
            .map(|col| {
                let mut z = Matrix::zeros(d, d);
                for (c, b) in self.basis.iter().enumerate() {
                    z += b.map(|x| x * ns[(c, col)]);
                }
                z
            })
            .collect()
    }

    /// Basis of the commutant `{Y : [Y, X] = 0 for all X ∈ alg}` in the
    /// full matrix space.
    pub fn commutant(&self) -> Vec<Matrix> {
        let d = self.dim;
        let k = self.basis.len();
        let mut a = Matrix::zeros(k * d * d, d * d);
        for (l, x) in self.basis.iter().enumerate() {
            // [E_pq, X][r,s] = δ_rp X[q,s] − X[r,p] δ_qs
            for p in 0..d {
                for q in 0..d {
                    let col = p * d + q;
                    for s in 0..d {
                        a[(l * d * d + p * d + s, col)] += x[(q, s)];
                    }
                    for r in 0..d {
                        a[(l * d * d + r * d + q, col)] -= x[(r, p)];
                    }
                }
            }
        }
        let ns = linalg::null_space(&a, SPAN_TOL);
        (0..ns.ncols())
            .map(|col| Matrix::from_fn(d, d, |p, q| ns[(p * d + q, col)]))
            .collect()
    }

    /// Compress to the subspace spanned by the orthonormal columns of `v`.
    pub fn restricted(&self, v: &Matrix) -> Self {
        let gens: Vec<Matrix> = self.basis.iter().map(|b| v.adjoint() * b * v).collect();
        let mut out = Self::span(v.ncols(), &gens);
        out.closed_under = self.closed_under;
        out
    }
}

/// Output of [`generate_algebra`]: the algebra acts on the support of the
/// ensemble average, written in its eigenbasis.
#[derive(Debug, Clone)]
pub struct SupportAlgebra {
    pub algebra: MatrixAlgebra,
    /// Orthonormal eigenvectors of the average spanning its support (`d × k`).
    pub support: Matrix,
    /// Corresponding eigenvalues (descending).
    pub spectrum: Vec<f64>,
}

/// Algebra generated by `ρ̄^{-1/2} ρ_y ρ̄^{-1/2}` on the support of `ρ̄`,
/// closed under products, adjoints and the modular flow `X ↦ ρ̄^{it} X ρ̄^{-it}`.
pub fn generate_algebra(ens: &Ensemble) -> Result<SupportAlgebra> {
    let e = eigh(&ens.average());
    let (spectrum, support) = e.support(SUPPORT_TOL);
    if spectrum.is_empty() {
        return Err(Error::SingularAverage);
    }
    let k = spectrum.len();
    let inv_sqrt: Vec<f64> = spectrum.iter().map(|l| 1.0 / l.sqrt()).collect();
    let gens: Vec<Matrix> = ens
        .states()
        .iter()
        .map(|s| {
            let r = support.adjoint() * s * &support;
            Matrix::from_fn(k, k, |a, b| r[(a, b)] * (inv_sqrt[a] * inv_sqrt[b]))
        })
        .collect();
    if gens
        .iter()
        .any(|g| g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
    {
        return Err(Error::SingularAverage);
    }
    let algebra = MatrixAlgebra::generate(k, &gens, Some(&spectrum));
    Ok(SupportAlgebra {
        algebra,
        support,
        spectrum,
    })
}

/// One simple summand: `basis` spans the block (columns, ambient
/// coordinates) and `factor` is the unitary `W_j : block → Q_j ⊗ N_j`
/// (Q index most significant) carrying the algebra onto `M ⊗ 1_N`.
#[derive(Debug, Clone)]
pub struct AlgebraBlock {
    pub basis: Matrix,
    pub factor: Matrix,
    pub q_dim: usize,
    pub n_dim: usize,
}

impl AlgebraBlock {
    /// `W_j V_j†`: ambient space → `Q_j ⊗ N_j`.
    pub fn isometry(&self) -> Matrix {
        &self.factor * self.basis.adjoint()
    }
}

#[derive(Debug, Clone)]
pub struct BlockStructure {
    pub blocks: Vec<AlgebraBlock>,
    /// Random splits used (1 = first attempt succeeded).
    pub attempts: usize,
}

fn random_hermitian_combination<R: Rng>(elems: &[Matrix], rng: &mut R) -> Matrix {
    let d = elems[0].nrows();
    let mut h = Matrix::zeros(d, d);
    for z in elems {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let herm = z + z.adjoint();
        let anti = (z - z.adjoint()).map(|x| x * Complex::new(0.0, 1.0));
        h += herm.map(|x| x * a) + anti.map(|x| x * b);
    }
    h
}

/// Eigenvalue clusters (descending) of a Hermitian matrix normalized to unit
/// spectral radius; returns (cluster sizes, eigenvectors).
fn clusters(h: &Matrix) -> (Vec<usize>, Matrix) {
    let e = eigh(h);
    let scale = e
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut sizes = vec![1usize];
    for w in e.values.windows(2) {
        if (w[0] - w[1]) / scale > CENTER_GAP {
            sizes.push(1);
        } else {
            *sizes.last_mut().expect("nonempty") += 1;
        }
    }
    (sizes, e.vectors)
}

/// Orthonormal basis of the top eigenspace of a random Hermitian element of
/// `span(elems)` whose expected multiplicity is `mult`.
fn top_eigenspace<R: Rng>(elems: &[Matrix], mult: usize, rng: &mut R) -> Result<Matrix> {
    let d = elems[0].nrows();
    if mult == d {
        return Ok(Matrix::identity(d, d));
    }
    for _ in 0..MAX_SPLIT_RETRIES {
        let h = random_hermitian_combination(elems, rng);
        let (sizes, vecs) = clusters(&h);
        if sizes.iter().all(|&s| s == mult) {
            return Ok(vecs.columns(0, mult).into_owned());
        }
    }
    Err(Error::DegenerateCenterSplit {
        retries: MAX_SPLIT_RETRIES,
    })
}

/// Center decomposition plus per-block tensor factorization.
pub fn decompose_algebra(alg: &MatrixAlgebra, seed: u64) -> Result<BlockStructure> {
    let mut rng = rng_from_seed(seed);
    let d = alg.ambient_dim();
    let center = alg.center();
    if center.is_empty() {
        return Err(Error::VerificationFailed(
            "algebra has a trivial center (identity missing)".into(),
        ));
    }
    let c = center.len();

    // split the identity into minimal central projections
    let mut split = None;
    let mut attempts = 0;
    for _ in 0..MAX_SPLIT_RETRIES {
        attempts += 1;
        let h = random_hermitian_combination(&center, &mut rng);
        let (sizes, vecs) = clusters(&h);
        if sizes.len() == c {
            split = Some((sizes, vecs));
            break;
        }
    }
    let (sizes, vecs) = split.ok_or(Error::DegenerateCenterSplit {
        retries: MAX_SPLIT_RETRIES,
    })?;

    let mut blocks = Vec::with_capacity(c);
    let mut offset = 0;
    for &nj in &sizes {
        let vj = vecs.columns(offset, nj).into_owned();
        offset += nj;
        let aj = alg.restricted(&vj);
        let dim_aj = aj.dim();
        let dj = (dim_aj as f64).sqrt().round() as usize;
        if dj * dj != dim_aj || dj == 0 || nj % dj != 0 {
            return Err(Error::VerificationFailed(format!(
                "block of size {nj} carries an algebra of dimension {dim_aj}, not a full matrix factor"
            )));
        }
        let mj = nj / dj;
        let factor = factorize_block(&aj, dj, mj, &mut rng)?;
        blocks.push(AlgebraBlock {
            basis: vj,
            factor,
            q_dim: dj,
            n_dim: mj,
        });
    }
    debug_assert_eq!(offset, d);

    let structure = BlockStructure { blocks, attempts };
    verify_structure(alg, &structure)?;
    Ok(structure)
}

/// Unitary `W` with `W X W† = x ⊗ 1_m` for every `X` in a simple block
/// algebra `≅ M_d ⊗ 1_m`.
fn factorize_block<R: Rng>(aj: &MatrixAlgebra, dj: usize, mj: usize, rng: &mut R) -> Result<Matrix> {
    let nj = dj * mj;
    if dj == 1 || mj == 1 {
        // either the algebra is scalar (any basis is a product basis) or it
        // is the full matrix algebra (N trivial)
        return Ok(Matrix::identity(nj, nj));
    }
    let p = top_eigenspace(aj.basis(), mj, rng)?; // e ⊗ C^m
    let comm = aj.commutant();
    if comm.len() != mj * mj {
        return Err(Error::VerificationFailed(format!(
            "commutant has dimension {}, expected {}",
            comm.len(),
            mj * mj
        )));
    }
    let f = top_eigenspace(&comm, dj, rng)?; // C^d ⊗ f
                                             // ξ spans range(P) ∩ range(F)
    let pf = &p * p.adjoint() * &f * f.adjoint();
    let best = (0..nj)
        .max_by(|&a, &b| {
            pf.column(a)
                .norm()
                .partial_cmp(&pf.column(b).norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("nonempty block");
    let xi = pf.column(best).normalize();
    // columns A_k ξ
    let k = aj.dim();
    let mut a_xi = Matrix::zeros(nj, k);
    for (c, b) in aj.basis().iter().enumerate() {
        a_xi.set_column(c, &(b * &xi));
    }
    let svd = a_xi.clone().svd(true, true);
    let mut wdag = Matrix::zeros(nj, nj);
    for a in 0..dj {
        let ua = f.column(a).into_owned();
        let coef = svd
            .solve(&ua, 1e-12)
            .map_err(|e| Error::VerificationFailed(format!("block factorization solve: {e}")))?;
        let mut xa = Matrix::zeros(nj, nj);
        for (c, b) in aj.basis().iter().enumerate() {
            xa += b.map(|z| z * coef[c]);
        }
        for bidx in 0..mj {
            wdag.set_column(a * mj + bidx, &(&xa * p.column(bidx)));
        }
    }
    let wdag = linalg::polar_isometry(&wdag);
    Ok(wdag.adjoint())
}

/// Largest deviation of `W V† X V W†` from `x ⊗ 1_m`, and of off-diagonal
/// blocks from zero, over the algebra basis.
pub fn structure_defect(alg: &MatrixAlgebra, s: &BlockStructure) -> f64 {
    let mut worst = 0.0f64;
    for x in alg.basis() {
        for (j, bj) in s.blocks.iter().enumerate() {
            let y = &bj.factor * bj.basis.adjoint() * x * &bj.basis * bj.factor.adjoint();
            let m = bj.n_dim;
            let q = bj.q_dim;
            let red = linalg::partial_trace_matrix(&y, &[q, m], &[0]).map(|z| z / m as f64);
            let target = linalg::kron(&red, &Matrix::identity(m, m));
            worst = worst.max(linalg::max_abs(&(y - target)));
            for bk in s.blocks.iter().skip(j + 1) {
                let off = bj.basis.adjoint() * x * &bk.basis;
                let off2 = bk.basis.adjoint() * x * &bj.basis;
                worst = worst.max(linalg::max_abs(&off)).max(linalg::max_abs(&off2));
            }
        }
    }
    worst
}

fn verify_structure(alg: &MatrixAlgebra, s: &BlockStructure) -> Result<()> {
    let defect = structure_defect(alg, s);
    if defect > FACTOR_TOL {
        return Err(Error::VerificationFailed(format!(
            "block factorization defect {defect:.3e} exceeds {FACTOR_TOL:.0e}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::random::{random_density_rng, random_unitary_rng, rng_from_seed};

    fn dims_of(s: &BlockStructure) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = s.blocks.iter().map(|b| (b.q_dim, b.n_dim)).collect();
        v.sort();
        v
    }

    #[test]
    fn trivial_algebra_is_one_n_block() {
        let alg = MatrixAlgebra::generate(3, &[], None);
        assert_eq!(alg.dim(), 1);
        let s = decompose_algebra(&alg, 0).unwrap();
        assert_eq!(dims_of(&s), vec![(1, 3)]);
    }

    #[test]
    fn non_orthogonal_pure_states_generate_everything() {
        let zero = Matrix::from_fn(2, 2, |r, c| Complex::new(if r == 0 && c == 0 { 1.0 } else { 0.0 }, 0.0));
        let plus = Matrix::from_element(2, 2, Complex::new(0.5, 0.0));
        let alg = MatrixAlgebra::generate(2, &[zero, plus], None);
        assert_eq!(alg.dim(), 4);
        let s = decompose_algebra(&alg, 0).unwrap();
        assert_eq!(dims_of(&s), vec![(2, 1)]);
    }

    #[test]
    fn commuting_family_is_abelian() {
        let a = Matrix::from_diagonal(&crate::Vector::from_vec(vec![
            Complex::new(0.5, 0.0),
            Complex::new(0.5, 0.0),
            Complex::new(0.0, 0.0),
        ]));
        let b = Matrix::from_diagonal(&crate::Vector::from_vec(vec![
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(1.0, 0.0),
        ]));
        let alg = MatrixAlgebra::generate(3, &[a, b], None);
        assert_eq!(alg.dim(), 2);
        assert_eq!(alg.center().len(), 2);
        let s = decompose_algebra(&alg, 0).unwrap();
        assert_eq!(dims_of(&s), vec![(1, 1), (1, 2)]);
    }

    #[test]
    fn hidden_tensor_structure_is_recovered() {
        // (M_2 ⊗ 1_3) ⊕ M_1 rotated by a random unitary on C^7
        let mut rng = rng_from_seed(4);
        let u = random_unitary_rng::<f64, _>(7, &mut rng);
        let mut gens = Vec::new();
        for _ in 0..3 {
            let x = random_density_rng::<f64, _>(2, 2, &mut rng);
            let mut g = Matrix::zeros(7, 7);
            g.view_mut((0, 0), (6, 6))
                .copy_from(&linalg::kron(&x, &Matrix::identity(3, 3)));
            g[(6, 6)] = Complex::new(0.3, 0.0);
            gens.push(&u * g * u.adjoint());
        }
        let alg = MatrixAlgebra::generate(7, &gens, None);
        assert_eq!(alg.dim(), 5);
        let s = decompose_algebra(&alg, 11).unwrap();
        assert_eq!(dims_of(&s), vec![(1, 1), (2, 3)]);
        assert!(structure_defect(&alg, &s) < 1e-10);
        for b in &s.blocks {
            assert!(linalg::isometry_defect(&b.isometry().adjoint()) < 1e-10);
        }
    }

    #[test]
    fn commutant_of_full_algebra_is_scalars() {
        // two pure states only reach M_2 ⊕ M_1 (their span is invariant)
        let mut rng = rng_from_seed(1);
        let mut gens: Vec<Matrix> = (0..2).map(|_| random_density_rng::<f64, _>(3, 1, &mut rng)).collect();
        let alg = MatrixAlgebra::generate(3, &gens, None);
        assert_eq!(alg.dim(), 5);
        assert_eq!(alg.commutant().len(), 2);
        gens.push(random_density_rng::<f64, _>(3, 1, &mut rng));
        let alg = MatrixAlgebra::generate(3, &gens, None);
        assert_eq!(alg.dim(), 9);
        assert_eq!(alg.commutant().len(), 1);
    }
}
