//! Block codes that keep a set of product basis vectors and route the rest
//! to a fixed retained vector.

use num_complex::Complex;

use crate::qcore::linalg;
use crate::{Error, Matrix, Result};

/// Largest `|X|^n` enumerated when ranking sequences.
pub const SEQUENCE_CAP: usize = 1 << 14;
/// Largest `|X|^n` for which dense operators are built.
pub const DENSE_CAP: usize = 1 << 10;

/// Code on `X^{⊗n}` defined by a single-copy orthonormal basis `W`, a
/// retained set `S` of basis sequences and a fallback `s0 ∈ S`:
/// `Λ(X) = Π X Π + Σ_{x∉S} ⟨x|X|x⟩ |s0⟩⟨s0|` (all in the `W` basis).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBasisCode {
    basis: Matrix,
    weights: Vec<f64>,
    n: usize,
    retained: Vec<usize>,
    mask: Vec<bool>,
    fallback: usize,
}

/// `|X|^n`, or `DimTooLarge` past `cap`.
pub fn checked_power(d: usize, n: usize, cap: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..n {
        total = total.checked_mul(d).filter(|&t| t <= cap).ok_or(Error::DimTooLarge {
            dim: d.saturating_pow(n as u32),
            cap,
        })?;
    }
    Ok(total)
}

/// Digits of `flat` in base `d` (first most significant).
pub fn digits(mut flat: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for i in (0..n).rev() {
        out[i] = flat % d;
        flat /= d;
    }
    out
}

/// Product of the weights of a sequence, multiplied in sorted digit order so
/// that permutations of a sequence get bit-identical keys.
pub fn sequence_weight(seq: &[usize], weights: &[f64]) -> f64 {
    let mut sorted = seq.to_vec();
    sorted.sort_unstable();
    sorted.iter().fold(1.0, |acc, &x| acc * weights[x])
}

/// All sequences of length `n` over `d` letters ordered by decreasing
/// weight, ties broken by increasing flat index.
pub fn ranked_sequences(weights: &[f64], n: usize) -> Result<Vec<(usize, f64)>> {
    let d = weights.len();
    let total = checked_power(d, n, SEQUENCE_CAP)?;
    let mut all: Vec<(usize, f64)> = (0..total)
        .map(|f| (f, sequence_weight(&digits(f, d, n), weights)))
        .collect();
    all.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(all)
}

/// Number of sequences kept at `rate` bits per letter: `⌊2^{n·rate}⌋`,
/// clamped to `[1, d^n]`.
pub fn retained_count(n: usize, rate: f64, d: usize) -> usize {
    let full = (d as f64).powi(n as i32);
    // round down so that log₂K never exceeds n·rate; the relative nudge keeps
    // exact powers such as 2^{n log₂ d} from slipping to the integer below
    let k = ((n as f64 * rate).exp2() * (1.0 + 1e-12)).floor();
    k.clamp(1.0, full) as usize
}

impl ProductBasisCode {
    /// Keep the `k` highest-weight sequences (see [`ranked_sequences`]).
    pub fn top_k(basis: Matrix, weights: Vec<f64>, n: usize, k: usize) -> Result<Self> {
        let ranked = ranked_sequences(&weights, n)?;
        let k = k.clamp(1, ranked.len());
        let retained: Vec<usize> = ranked[..k].iter().map(|&(f, _)| f).collect();
        let fallback = retained[0];
        Self::from_retained(basis, weights, n, retained, fallback)
    }

    pub fn from_retained(
        basis: Matrix,
        weights: Vec<f64>,
        n: usize,
        retained: Vec<usize>,
        fallback: usize,
    ) -> Result<Self> {
        let d = basis.nrows();
        if basis.ncols() != d || weights.len() != d {
            return Err(Error::DimMismatch(format!(
                "basis {}x{} with {} weights",
                basis.nrows(),
                basis.ncols(),
                weights.len()
            )));
        }
        if linalg::isometry_defect(&basis) > 1e-10 {
            return Err(Error::NotIsometry(linalg::isometry_defect(&basis)));
        }
        let total = checked_power(d, n, SEQUENCE_CAP)?;
        let mut mask = vec![false; total];
        for &f in &retained {
            if f >= total || mask[f] {
                return Err(Error::InvalidState(format!(
                    "retained sequence {f} out of range or repeated"
                )));
            }
            mask[f] = true;
        }
        if retained.is_empty() || !mask.get(fallback).copied().unwrap_or(false) {
            return Err(Error::InvalidState("fallback sequence must be retained".into()));
        }
        Ok(Self {
            basis,
            weights,
            n,
            retained,
            mask,
            fallback,
        })
    }

    pub fn local_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Retained flat indices in retention order.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn is_retained(&self, flat: usize) -> bool {
        self.mask[flat]
    }

    pub fn fallback(&self) -> usize {
        self.fallback
    }

    pub fn fallback_digits(&self) -> Vec<usize> {
        digits(self.fallback, self.local_dim(), self.n)
    }

    pub fn total_dim(&self) -> usize {
        self.mask.len()
    }

    /// `|M| = |S|`.
    pub fn message_dim(&self) -> usize {
        self.retained.len()
    }

    /// `log₂|M|`.
    pub fn log_m(&self) -> f64 {
        (self.message_dim() as f64).log2()
    }

    /// `Σ_{x∈S} Π_i w_{x_i}`; with eigenvalue weights this is `Tr[Π ρ^{⊗n}]`.
    pub fn retained_mass(&self) -> f64 {
        let d = self.local_dim();
        self.retained
            .iter()
            .map(|&f| sequence_weight(&digits(f, d, self.n), &self.weights))
            .sum()
    }

    /// `W^{⊗n}`.
    pub fn basis_power(&self) -> Result<Matrix> {
        checked_power(self.local_dim(), self.n, DENSE_CAP)?;
        let mut w = Matrix::identity(1, 1);
        for _ in 0..self.n {
            w = linalg::kron(&w, &self.basis);
        }
        Ok(w)
    }

    /// Projector `Π` onto the retained span, in the computational basis.
    pub fn projector(&self) -> Result<Matrix> {
        let w = self.basis_power()?;
        let cols: Vec<usize> = self.retained.clone();
        let ws = w.select_columns(&cols);
        Ok(&ws * ws.adjoint())
    }

    /// Kraus operators of `Λ` in the computational basis: `Π` followed by
    /// `|s0⟩⟨x|` for every discarded `x`.
    pub fn kraus(&self) -> Result<Vec<Matrix>> {
        let w = self.basis_power()?;
        let mut out = vec![self.projector()?];
        let s0 = w.column(self.fallback).into_owned();
        for x in 0..self.total_dim() {
            if !self.mask[x] {
                out.push(&s0 * w.column(x).adjoint());
            }
        }
        Ok(out)
    }

    /// `(Λ ⊗ id)(m)` for `m` on `X^n ⊗ rest` (X^n most significant).
    pub fn apply_dense(&self, m: &Matrix, rest: usize) -> Result<Matrix> {
        let w = self.basis_power()?;
        let dn = w.nrows();
        if m.nrows() != dn * rest {
            return Err(Error::DimMismatch(format!(
                "code on {dn} applied to matrix of size {}",
                m.nrows()
            )));
        }
        let big_w = linalg::kron(&w, &Matrix::identity(rest, rest));
        let t = big_w.adjoint() * m * &big_w;
        let mut out = Matrix::zeros(dn * rest, dn * rest);
        for x in 0..dn {
            if !self.mask[x] {
                continue;
            }
            for y in 0..dn {
                if !self.mask[y] {
                    continue;
                }
                for a in 0..rest {
                    for b in 0..rest {
                        out[(x * rest + a, y * rest + b)] = t[(x * rest + a, y * rest + b)];
                    }
                }
            }
        }
        let s0 = self.fallback;
        for x in 0..dn {
            if self.mask[x] {
                continue;
            }
            for a in 0..rest {
                for b in 0..rest {
                    let v: Complex<f64> = t[(x * rest + a, x * rest + b)];
                    out[(s0 * rest + a, s0 * rest + b)] += v;
                }
            }
        }
        Ok(&big_w * out * big_w.adjoint())
    }
}
