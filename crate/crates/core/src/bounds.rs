//! Feasible lower bounds on the converse functionals
//! `J_ε(ω) = max I(N̂E:ĈQ̂|C')_τ` and `Z_ε(ω) = max S(N̂E|C')_τ` over
//! isometries `U : CNQ → ĈN̂Q̂E` with `F(ω^{CNQR}, τ^{ĈN̂Q̂R}) ≥ 1 − ε`.
//!
//! Because `C'` is classical, both objectives split over the blocks:
//! with `σ_j = |j⟩⟨j| ⊗ ω_j ⊗ ρ_j^Q` and `τ_j = U σ_j U†`,
//! `S(N̂E|C') = Σ_j p_j S(N̂E)_{τ_j}` and
//! `I(N̂E:ĈQ̂|C') = Σ_j p_j [S(N̂E) + S(ĈQ̂) − S(σ_j)]_{τ_j}`.
//! The fidelity is evaluated on the support of `ω^{CNQR}`.
//!
//! Estimates come from a penalized (1+1) evolution strategy with several
//! restarts; every reported point is feasible, so every value is a lower
//! bound on the true maximum. At `ε = 0` the identity embedding is exact.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::ki::decomposition::embed;
use crate::ki::KiDecomposition;
use crate::qcore::io::{fmt_f17, matrix_parts, MatrixParts};
use crate::qcore::linalg::{self, eigh};
use crate::qcore::measures::{entropy_matrix, trace_sqrt_psd};
use crate::qcore::random::{random_isometry_rng, rng_from_seed};
use crate::qcore::scalar::cr;
use crate::{Error, Matrix, Result, Vector};

/// Largest padded `|C||N||Q|` handled by [`estimate`].
pub const OPT_DIM_CAP: usize = 8;
/// Largest environment used by default.
pub const DEFAULT_ENV_CAP: usize = 64;
/// Largest `|C||N||Q||E|` accepted by [`objective`].
pub const OBJECTIVE_CAP: usize = 4096;
/// Initial penalty weight, its growth factor and the number of rounds.
pub const PENALTY_START: f64 = 10.0;
pub const PENALTY_GROWTH: f64 = 10.0;
pub const PENALTY_ROUNDS: usize = 5;
/// Feasibility is reported with this much rounding slack.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Which {
    J,
    Z,
}

/// One block `p_j |j⟩⟨j| ⊗ ω_j ⊗ ρ_j^{QR}` on the padded systems.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBlock {
    pub j: usize,
    pub p: f64,
    /// `ω_j` on the padded `N`.
    pub omega: Matrix,
    /// `ρ_j^{QR}` on the padded `Q ⊗ R`.
    pub rho_qr: Matrix,
}

/// The state `ω^{CNQR}` in block form, independent of how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSource {
    pub c: usize,
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub blocks: Vec<SourceBlock>,
}

impl BlockSource {
    pub fn from_ki(ki: &KiDecomposition) -> Self {
        let (c, n, q) = ki.padded_dims();
        let blocks = ki
            .blocks
            .iter()
            .enumerate()
            .map(|(j, b)| SourceBlock {
                j,
                p: b.p,
                omega: embed(&b.omega, &b.n_slots, n, 1),
                rho_qr: embed(&b.rho_qr, &b.q_slots, q, ki.dim_r),
            })
            .collect();
        Self {
            c,
            n,
            q,
            r: ki.dim_r,
            blocks,
        }
    }

    pub fn dim_cnq(&self) -> usize {
        self.c * self.n * self.q
    }

    /// `ω₁ ⊗ ω₂` with `C = C₁C₂`, `N = N₁N₂`, `Q = Q₁Q₂`, `R = R₁R₂`.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut blocks = Vec::new();
        for a in &self.blocks {
            for b in &other.blocks {
                let qr = linalg::kron(&a.rho_qr, &b.rho_qr);
                // (Q₁ R₁ Q₂ R₂) → (Q₁ Q₂ R₁ R₂)
                let qr = linalg::permute_matrix(&qr, &[self.q, self.r, other.q, other.r], &[0, 2, 1, 3]);
                blocks.push(SourceBlock {
                    j: a.j * other.c + b.j,
                    p: a.p * b.p,
                    omega: linalg::kron(&a.omega, &b.omega),
                    rho_qr: qr,
                });
            }
        }
        Self {
            c: self.c * other.c,
            n: self.n * other.n,
            q: self.q * other.q,
            r: self.r * other.r,
            blocks,
        }
    }

    /// `S(N|C) = Σ_j p_j S(ω_j)`.
    pub fn s_n_given_c(&self) -> f64 {
        self.blocks.iter().map(|b| b.p * entropy_matrix(&b.omega)).sum()
    }

    /// Dense `ω^{CNQR}`.
    pub fn omega_cnqr(&self) -> Matrix {
        let inner = self.n * self.q * self.r;
        let mut m = Matrix::zeros(self.c * inner, self.c * inner);
        for b in &self.blocks {
            let blk = linalg::kron(&b.omega, &b.rho_qr).map(|z| z * b.p);
            let mut view = m.view_mut((b.j * inner, b.j * inner), (inner, inner));
            view += blk;
        }
        m
    }
}

/// `U : CNQ → ĈN̂Q̂E` (output rows in that order, `E` least significant),
/// the polar orthonormalization of the complex matrix encoded by `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryAnsatz {
    pub dim_in: usize,
    pub env: usize,
    pub params: Vec<f64>,
    pub matrix: Matrix,
}

impl IsometryAnsatz {
    pub fn from_params(dim_in: usize, env: usize, params: Vec<f64>) -> Result<Self> {
        let rows = dim_in * env;
        if params.len() != 2 * rows * dim_in {
            return Err(Error::DimMismatch(format!(
                "{} parameters for a {rows}x{dim_in} isometry",
                params.len()
            )));
        }
        let g = Matrix::from_fn(rows, dim_in, |r, c| {
            let k = 2 * (r * dim_in + c);
            num_complex::Complex::new(params[k], params[k + 1])
        });
        let matrix = linalg::polar_isometry(&g);
        Ok(Self {
            dim_in,
            env,
            params,
            matrix,
        })
    }

    /// Parameters reproducing `g` (which is then orthonormalized).
    pub fn from_matrix(g: &Matrix, env: usize) -> Result<Self> {
        let dim_in = g.ncols();
        if g.nrows() != dim_in * env {
            return Err(Error::DimMismatch(format!(
                "matrix {}x{} is not CNQ -> CNQ x E with |E| = {env}",
                g.nrows(),
                g.ncols()
            )));
        }
        let params = (0..g.nrows())
            .flat_map(|r| (0..dim_in).flat_map(move |c| [g[(r, c)].re, g[(r, c)].im]))
            .collect();
        Self::from_params(dim_in, env, params)
    }

    /// `1 ⊗ |0⟩_E`.
    pub fn identity(dim_in: usize, env: usize) -> Self {
        let g = Matrix::from_fn(
            dim_in * env,
            dim_in,
            |r, c| if r == c * env { cr(1.0) } else { cr(0.0) },
        );
        Self::from_matrix(&g, env).expect("consistent shape")
    }

    pub fn isometry_defect(&self) -> f64 {
        linalg::isometry_defect(&self.matrix)
    }

    /// `U₁ ⊗ U₂` with the factors of each of `C, N, Q, E` grouped.
    pub fn tensor(&self, s1: &BlockSource, other: &Self, s2: &BlockSource) -> Result<Self> {
        let (c1, n1, q1, e1) = (s1.c, s1.n, s1.q, self.env);
        let (c2, n2, q2, e2) = (s2.c, s2.n, s2.q, other.env);
        if self.dim_in != s1.dim_cnq() || other.dim_in != s2.dim_cnq() {
            return Err(Error::DimMismatch("ansatz does not match its source".into()));
        }
        let k = linalg::kron(&self.matrix, &other.matrix);
        let rows = linalg::permute_rows(&k, &[c1, n1, q1, e1, c2, n2, q2, e2], &[0, 4, 1, 5, 2, 6, 3, 7]);
        let cols = linalg::permute_rows(&rows.transpose(), &[c1, n1, q1, c2, n2, q2], &[0, 3, 1, 4, 2, 5]).transpose();
        Self::from_matrix(&cols, e1 * e2)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump {
            dim_in: usize,
            env: usize,
            matrix: MatrixParts,
        }
        serde_json::to_string(&Dump {
            dim_in: self.dim_in,
            env: self.env,
            matrix: matrix_parts(&self.matrix),
        })
        .expect("finite entries")
    }
}

/// Per-block data reused across objective evaluations.
#[derive(Debug, Clone)]
struct Prepared {
    c: usize,
    n: usize,
    q: usize,
    /// `(p_j, F_j, S(σ_j))` with `F_j F_j† = σ_j` on `CNQ`.
    factors: Vec<(f64, Matrix, f64)>,
    /// Support of `ω^{CNQR}`: slices `V_ρ` (rows `x·R + ρ`) and eigenvalues.
    v_slices: Vec<Matrix>,
    d: Vec<f64>,
}

fn psd_factor(m: &Matrix) -> Matrix {
    let e = eigh(m);
    let (vals, vecs) = e.support(1e-14);
    let mut f = vecs;
    for (k, v) in vals.iter().enumerate() {
        f.column_mut(k).scale_mut(v.sqrt());
    }
    f
}

impl Prepared {
    fn new(src: &BlockSource) -> Self {
        let (c, n, q, r) = (src.c, src.n, src.q, src.r);
        let dim = src.dim_cnq();
        let factors = src
            .blocks
            .iter()
            .map(|b| {
                let rho_q = linalg::partial_trace_matrix(&b.rho_qr, &[q, r], &[0]);
                let fq = linalg::kron(&psd_factor(&b.omega), &psd_factor(&rho_q));
                let mut f = Matrix::zeros(dim, fq.ncols());
                f.view_mut((b.j * n * q, 0), (n * q, fq.ncols())).copy_from(&fq);
                let s = entropy_matrix(&(f.adjoint() * &f));
                (b.p, f, s)
            })
            .collect();
        let e = eigh(&src.omega_cnqr());
        let (d, v) = e.support(1e-13);
        let v_slices = (0..r)
            .map(|rho| Matrix::from_fn(dim, d.len(), |x, k| v[(x * r + rho, k)]))
            .collect();
        Self {
            c,
            n,
            q,
            factors,
            v_slices,
            d,
        }
    }

    /// `(J, Z)` objective values and the fidelity for `u`.
    fn evaluate(&self, u: &Matrix, env: usize) -> (f64, f64, f64) {
        let (c, n, q) = (self.c, self.n, self.q);
        let (mut jv, mut zv) = (0.0, 0.0);
        for (p, f, s_all) in &self.factors {
            if *p <= 0.0 {
                continue;
            }
            let a = u * f;
            let r = a.ncols();
            // rows of `a`: ((ĉ n̂ q̂) e); regroup as ĈQ̂ vs N̂E ⊗ r
            let cq = Matrix::from_fn(c * q, n * env * r, |row, col| {
                let (ci, qi) = (row / q, row % q);
                let (ni, rest) = (col / (env * r), col % (env * r));
                let (ei, k) = (rest / r, rest % r);
                a[((((ci * n) + ni) * q + qi) * env + ei, k)]
            });
            let s_cq = gram_entropy(&cq);
            let ne = cq_to_ne(&cq, c, n, q, env, r);
            let s_ne = gram_entropy(&ne);
            jv += p * (s_ne + s_cq - s_all);
            zv += p * s_ne;
        }
        (jv.max(0.0), zv, self.fidelity(u, env))
    }

    /// `Σ √eig(D^½ Σ_e G_e D G_e† D^½)` with `G_e = Σ_ρ V_ρ† K_e V_ρ`.
    fn fidelity(&self, u: &Matrix, env: usize) -> f64 {
        let dim = self.c * self.n * self.q;
        let rank = self.d.len();
        let sq: Vec<f64> = self.d.iter().map(|x| x.sqrt()).collect();
        let mut acc = Matrix::zeros(rank, rank);
        for e in 0..env {
            let k = Matrix::from_fn(dim, dim, |row, col| u[(row * env + e, col)]);
            let mut g = Matrix::zeros(rank, rank);
            for v in &self.v_slices {
                g += v.adjoint() * (&k * v);
            }
            // H = D^½ G D^½ ;  accumulate H H†
            let h = Matrix::from_fn(rank, rank, |a, b| g[(a, b)] * (sq[a] * sq[b]));
            acc += &h * h.adjoint();
        }
        trace_sqrt_psd(&acc).min(1.0)
    }
}

/// Regroup the `ĈQ̂ × (N̂ E r)` matrix into `N̂E × (Ĉ Q̂ r)`.
fn cq_to_ne(cq: &Matrix, c: usize, n: usize, q: usize, env: usize, r: usize) -> Matrix {
    Matrix::from_fn(n * env, c * q * r, |row, col| {
        let (ni, ei) = (row / env, row % env);
        let (cqi, k) = (col / r, col % r);
        cq[(cqi, (ni * env + ei) * r + k)]
    })
}

/// Entropy of `A A†` computed from the smaller Gram matrix.
fn gram_entropy(a: &Matrix) -> f64 {
    if a.nrows() <= a.ncols() {
        entropy_matrix(&(a * a.adjoint()))
    } else {
        entropy_matrix(&(a.adjoint() * a))
    }
}

/// Objective value and fidelity of `ansatz` on the source.
pub fn objective_on(u: &IsometryAnsatz, src: &BlockSource, which: Which) -> Result<(f64, f64)> {
    let (j, z, f) = evaluate_all(u, src)?;
    Ok((
        match which {
            Which::J => j,
            Which::Z => z,
        },
        f,
    ))
}

/// `(J value, Z value, fidelity)`.
pub fn evaluate_all(u: &IsometryAnsatz, src: &BlockSource) -> Result<(f64, f64, f64)> {
    if u.dim_in != src.dim_cnq() {
        return Err(Error::DimMismatch(format!(
            "ansatz on {} dimensions for |C||N||Q| = {}",
            u.dim_in,
            src.dim_cnq()
        )));
    }
    if u.dim_in * u.env > OBJECTIVE_CAP {
        return Err(Error::DimTooLarge {
            dim: u.dim_in * u.env,
            cap: OBJECTIVE_CAP,
        });
    }
    Ok(Prepared::new(src).evaluate(&u.matrix, u.env))
}

/// Objective on the padded form of `ki`.
pub fn objective(u: &IsometryAnsatz, ki: &KiDecomposition, which: Which) -> Result<(f64, f64)> {
    objective_on(u, &BlockSource::from_ki(ki), which)
}

/// Optimization budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub restarts: usize,
    /// Evaluations per restart (split evenly over the penalty rounds).
    pub iterations: usize,
    /// Environment dimension; `None` selects `min((|C||N||Q|)², 64)`.
    pub env: Option<usize>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            restarts: 6,
            iterations: 300,
            env: None,
        }
    }
}

impl Budget {
    pub fn env_dim(&self, dim_cnq: usize) -> usize {
        self.env
            .unwrap_or_else(|| (dim_cnq * dim_cnq).min(DEFAULT_ENV_CAP))
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundEstimate {
    pub epsilon: f64,
    pub which: Which,
    pub achieved_fidelity: f64,
    pub j_value: f64,
    pub z_value: f64,
    pub ansatz: IsometryAnsatz,
    pub restarts_used: usize,
}

impl BoundEstimate {
    /// The optimized value.
    pub fn value(&self) -> f64 {
        match self.which {
            Which::J => self.j_value,
            Which::Z => self.z_value,
        }
    }
}

/// Best feasible point of one restart: `(value, j, z, fidelity, params)`.
type Candidate = (f64, f64, f64, f64, Vec<f64>);

struct Search<'a> {
    prep: &'a Prepared,
    dim: usize,
    env: usize,
    epsilon: f64,
    which: Which,
}

impl Search<'_> {
    fn eval(&self, params: &[f64]) -> (f64, f64, f64, f64) {
        let u = IsometryAnsatz::from_params(self.dim, self.env, params.to_vec()).expect("parameter count");
        let (j, z, f) = self.prep.evaluate(&u.matrix, self.env);
        let v = match self.which {
            Which::J => j,
            Which::Z => z,
        };
        (v, j, z, f)
    }

    fn feasible(&self, f: f64) -> bool {
        f >= 1.0 - self.epsilon
    }

    /// Penalized (1+1) evolution strategy with the one-fifth success rule.
    fn run(&self, start: Vec<f64>, sigma0: f64, iterations: usize, seed: u64) -> Option<Candidate> {
        let mut rng = rng_from_seed(seed);
        let mut x = start;
        let (v, j, z, f) = self.eval(&x);
        let mut best = self.feasible(f).then(|| (v, j, z, f, x.clone()));
        let mut sigma = sigma0;
        let mut lambda = PENALTY_START;
        let per_round = (iterations / PENALTY_ROUNDS).max(1);
        let penalized = |v: f64, f: f64, lambda: f64| v - lambda * (1.0 - self.epsilon - f).max(0.0).powi(2);
        let (mut xv, mut xf) = (v, f);
        for _ in 0..PENALTY_ROUNDS {
            let mut fx = penalized(xv, xf, lambda);
            for _ in 0..per_round {
                let y: Vec<f64> = x
                    .iter()
                    .map(|&xi| xi + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let (v, j, z, f) = self.eval(&y);
                if self.feasible(f) && best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, j, z, f, y.clone()));
                }
                let fy = penalized(v, f, lambda);
                if fy >= fx {
                    x = y;
                    (xv, xf, fx) = (v, f, fy);
                    sigma = (sigma * 1.5).min(1.0);
                } else {
                    sigma = (sigma * 0.9).max(1e-6);
                }
            }
            lambda *= PENALTY_GROWTH;
        }
        best
    }
}

fn restart_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Block-form start `Σ_j |j⟩⟨j| ⊗ U_j ⊗ 1_Q ⊗ |0⟩_E` with `U_j` random
/// phases in the eigenbasis of `ω_j` (so `U_j ω_j U_j† = ω_j`).
fn block_start(src: &BlockSource, env: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let (n, q) = (src.n, src.q);
    let dim = src.dim_cnq();
    let mut u = Matrix::zeros(dim, dim);
    for j in 0..src.c {
        let block = src.blocks.iter().find(|b| b.j == j);
        let uj = match block {
            Some(b) => {
                let e = eigh(&b.omega);
                let phases = Vector::from_fn(n, |_, _| {
                    let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                    num_complex::Complex::from_polar(1.0, t)
                });
                &e.vectors * Matrix::from_diagonal(&phases) * e.vectors.adjoint()
            }
            None => Matrix::identity(n, n),
        };
        let blk = linalg::kron(&uj, &Matrix::identity(q, q));
        u.view_mut((j * n * q, j * n * q), (n * q, n * q)).copy_from(&blk);
    }
    Matrix::from_fn(
        dim * env,
        dim,
        |r, c| if r % env == 0 { u[(r / env, c)] } else { cr(0.0) },
    )
}

fn check_inputs(src: &BlockSource, epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidState(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if src.dim_cnq() > OPT_DIM_CAP {
        return Err(Error::DimTooLarge {
            dim: src.dim_cnq(),
            cap: OPT_DIM_CAP,
        });
    }
    Ok(())
}

/// Best feasible point found from the restart menu: the warm start (or the
/// identity embedding), the identity, block forms with `ω_j`-preserving
/// phases, and Haar-random isometries, alternating. Restarts run in
/// parallel; the best value wins, ties going to the lower restart index.
pub fn estimate_on(
    src: &BlockSource,
    epsilon: f64,
    which: Which,
    budget: &Budget,
    seed: u64,
    warm: Option<&IsometryAnsatz>,
) -> Result<BoundEstimate> {
    check_inputs(src, epsilon)?;
    let dim = src.dim_cnq();
    let env = warm.map_or_else(|| budget.env_dim(dim), |w| w.env);
    let prep = Prepared::new(src);
    let identity = IsometryAnsatz::identity(dim, env);
    let finish = |u: IsometryAnsatz, restarts: usize| -> BoundEstimate {
        let (j, z, f) = prep.evaluate(&u.matrix, env);
        BoundEstimate {
            epsilon,
            which,
            achieved_fidelity: f,
            j_value: j,
            z_value: z,
            ansatz: u,
            restarts_used: restarts,
        }
    };
    if epsilon == 0.0 {
        // exact: J₀ = 0 and Z₀ = S(N|C), attained by the identity embedding
        return Ok(finish(identity, 0));
    }
    let search = Search {
        prep: &prep,
        dim,
        env,
        epsilon,
        which,
    };
    let restarts = budget.restarts.max(1);
    let results: Vec<Option<Candidate>> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let s = restart_seed(seed, i);
            let (start, sigma) = match i {
                0 => (warm.unwrap_or(&identity).params.clone(), 0.05),
                1 => (identity.params.clone(), 0.1),
                _ if i % 2 == 0 => (
                    IsometryAnsatz::from_matrix(&block_start(src, env, s), env).ok()?.params,
                    0.1,
                ),
                _ => {
                    let mut rng = rng_from_seed(s);
                    let g: Matrix = random_isometry_rng(dim * env, dim, &mut rng);
                    (IsometryAnsatz::from_matrix(&g, env).ok()?.params, 0.3)
                }
            };
            search.run(start, sigma, budget.iterations, s.wrapping_add(1))
        })
        .collect();
    let mut best: Option<Candidate> = None;
    for c in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| c.0 > b.0) {
            best = Some(c);
        }
    }
    let (_, _, _, _, params) = best.ok_or(Error::NoFeasiblePoint)?;
    let u = IsometryAnsatz::from_params(dim, env, params)?;
    let est = finish(u, restarts);
    if est.achieved_fidelity < 1.0 - epsilon - FEASIBILITY_TOL {
        return Err(Error::NoFeasiblePoint);
    }
    Ok(est)
}

pub fn estimate(ki: &KiDecomposition, epsilon: f64, which: Which, budget: &Budget, seed: u64) -> Result<BoundEstimate> {
    estimate_on(&BlockSource::from_ki(ki), epsilon, which, budget, seed, None)
}

/// Estimates along a sorted list of `ε`, warm-starting each from the
/// previous optimum, plus the upper concave envelope of the values.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub estimates: Vec<BoundEstimate>,
    pub concave: Vec<f64>,
}

pub fn envelope_on(src: &BlockSource, epsilons: &[f64], which: Which, budget: &Budget, seed: u64) -> Result<Envelope> {
    if epsilons
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt()))
    {
        return Err(Error::InvalidState("epsilons must be sorted ascending".into()));
    }
    let mut estimates: Vec<BoundEstimate> = Vec::with_capacity(epsilons.len());
    for (i, &eps) in epsilons.iter().enumerate() {
        if let Some(prev) = estimates.last() {
            if prev.epsilon == eps {
                estimates.push(prev.clone());
                continue;
            }
        }
        let warm = estimates.last().map(|e| &e.ansatz);
        let mut est = estimate_on(src, eps, which, budget, restart_seed(seed, 1000 + i), warm)?;
        // the warm start is feasible here too, so the best value cannot drop
        if let Some(prev) = estimates.last() {
            if est.value() < prev.value() {
                est = BoundEstimate {
                    epsilon: eps,
                    ..prev.clone()
                };
            }
        }
        estimates.push(est);
    }
    let pts: Vec<(f64, f64)> = estimates.iter().map(|e| (e.epsilon, e.value())).collect();
    Ok(Envelope {
        concave: upper_concave_envelope(&pts),
        estimates,
    })
}

pub fn envelope(ki: &KiDecomposition, epsilons: &[f64], which: Which, budget: &Budget, seed: u64) -> Result<Envelope> {
    envelope_on(&BlockSource::from_ki(ki), epsilons, which, budget, seed)
}

/// Least concave majorant of points sorted by `x`, evaluated at each `x`.
pub fn upper_concave_envelope(pts: &[(f64, f64)]) -> Vec<f64> {
    // upper hull with the x-duplicates collapsed to their maximum
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &(x, y) in pts {
        if let Some(last) = hull.last_mut() {
            if last.0 == x {
                last.1 = last.1.max(y);
                while hull.len() >= 3 && !right_turn(hull[hull.len() - 3], hull[hull.len() - 2], hull[hull.len() - 1]) {
                    let top = hull.pop().expect("nonempty");
                    hull.pop();
                    hull.push(top);
                }
                continue;
            }
        }
        while hull.len() >= 2 && !right_turn(hull[hull.len() - 2], hull[hull.len() - 1], (x, y)) {
            hull.pop();
        }
        hull.push((x, y));
    }
    pts.iter()
        .map(|&(x, _)| {
            let k = hull.partition_point(|h| h.0 < x);
            if k < hull.len() && hull[k].0 == x {
                return hull[k].1;
            }
            let (a, b) = (hull[k - 1], hull[k]);
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        })
        .collect()
}

/// `b` lies strictly above the chord from `a` to `c`.
fn right_turn(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0) < 0.0
}

/// The product ansatz `U₁ ⊗ U₂` evaluated on `ω₁ ⊗ ω₂`; `ε` is
/// `1 − (1 − ε₁)(1 − ε₂)`.
pub fn tensor_feasible(
    s1: &BlockSource,
    e1: &BoundEstimate,
    s2: &BlockSource,
    e2: &BoundEstimate,
) -> Result<(BlockSource, BoundEstimate)> {
    if e1.which != e2.which {
        return Err(Error::DimMismatch("estimates of different functionals".into()));
    }
    let src = s1.tensor(s2);
    let u = e1.ansatz.tensor(s1, &e2.ansatz, s2)?;
    let (j, z, f) = evaluate_all(&u, &src)?;
    Ok((
        src,
        BoundEstimate {
            epsilon: 1.0 - (1.0 - e1.epsilon) * (1.0 - e2.epsilon),
            which: e1.which,
            achieved_fidelity: f,
            j_value: j,
            z_value: z,
            ansatz: u,
            restarts_used: e1.restarts_used + e2.restarts_used,
        },
    ))
}

/// Rows `epsilon,J_lower,Z_lower,fidelity,restarts` from paired J and Z
/// envelopes over the same `ε` list; `fidelity` is the smaller of the two.
pub fn bounds_csv(j: &Envelope, z: &Envelope) -> String {
    let mut out = String::from("epsilon,J_lower,Z_lower,fidelity,restarts\n");
    for (a, b) in j.estimates.iter().zip(&z.estimates) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f17(a.epsilon),
            fmt_f17(a.j_value),
            fmt_f17(b.z_value),
            fmt_f17(a.achieved_fidelity.min(b.achieved_fidelity)),
            a.restarts_used.max(b.restarts_used)
        ));
    }
    out
}
