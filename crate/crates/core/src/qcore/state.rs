use super::dims::SystemDims;
use super::error::{Error, Result};
use super::linalg::{self, eigh, Eigh};
use super::scalar::{CMat, CVec, Real};

/// Density matrix over labeled subsystems.
///
/// Rows and columns run over the tensor basis with the first label as the
/// most significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipartiteState<T: Real> {
    dims: SystemDims,
    matrix: CMat<T>,
}

impl<T: Real> MultipartiteState<T> {
    /// Validated constructor (Hermitian, PSD and unit trace within
    /// `T::VALIDATION_TOL`).
    pub fn new(dims: SystemDims, matrix: CMat<T>) -> Result<Self> {
        let s = Self::new_unchecked(dims, matrix)?;
        s.validate(T::lit(T::VALIDATION_TOL))?;
        Ok(s)
    }

    /// Shape-checked constructor that skips the spectral checks.
    pub fn new_unchecked(dims: SystemDims, matrix: CMat<T>) -> Result<Self> {
        let n = dims.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimMismatch(format!(
                "matrix is {}x{}, systems {} need {n}x{n}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            )));
        }
        Ok(Self { dims, matrix })
    }

    pub fn validate(&self, tol: T) -> Result<()> {
        let herm = linalg::max_abs(&(&self.matrix - self.matrix.adjoint()));
        if herm > tol {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |M - M^dag| = {:.3e})",
                herm.as_f64()
            )));
        }
        let tr = self.matrix.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!(
                "trace is {:.12} (expected 1)",
                tr.re.as_f64()
            )));
        }
        let min = linalg::eigvalsh(&self.matrix).last().copied().unwrap_or_else(T::zero);
        if min < -tol {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {:.3e})",
                min.as_f64()
            )));
        }
        Ok(())
    }

    /// Pure state `|ψ⟩⟨ψ|`; `psi` must be normalized.
    pub fn from_pure(dims: SystemDims, psi: &CVec<T>) -> Result<Self> {
        if psi.len() != dims.total() {
            return Err(Error::DimMismatch(format!(
                "vector of length {} on systems {}",
                psi.len(),
                dims
            )));
        }
        let norm = psi.norm();
        if (norm - T::one()).abs() > T::lit(T::VALIDATION_TOL) {
            return Err(Error::InvalidState(format!(
                "state vector has norm {:.12}",
                norm.as_f64()
            )));
        }
        Self::new_unchecked(dims, psi * psi.adjoint())
    }

    pub fn maximally_mixed(dims: SystemDims) -> Self {
        let n = dims.total();
        let m = linalg::identity::<T>(n).map(|z| z / T::from_usize(n).unwrap());
        Self { dims, matrix: m }
    }

    /// Computational basis state with flat index `index`.
    pub fn basis(dims: SystemDims, index: usize) -> Result<Self> {
        let n = dims.total();
        if index >= n {
            return Err(Error::DimMismatch(format!("basis index {index} >= {n}")));
        }
        let mut m = CMat::<T>::zeros(n, n);
        m[(index, index)] = num_complex::Complex::new(T::one(), T::zero());
        Ok(Self { dims, matrix: m })
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(dims: SystemDims, probs: &[T]) -> Result<Self> {
        let n = dims.total();
        if probs.len() != n {
            return Err(Error::DimMismatch(format!(
                "{} probabilities for dimension {n}",
                probs.len()
            )));
        }
        let mut m = CMat::<T>::zeros(n, n);
        for (i, &p) in probs.iter().enumerate() {
            m[(i, i)] = num_complex::Complex::new(p, T::zero());
        }
        Self::new(dims, m)
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> T {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigh(&self) -> Eigh<T> {
        eigh(&self.matrix)
    }

    /// Kronecker product with concatenated labels.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dims = self.dims.concat(&other.dims)?;
        Ok(Self {
            dims,
            matrix: linalg::kron(&self.matrix, &other.matrix),
        })
    }

    /// `n`-fold tensor power; copy `i` gets labels suffixed with `i`.
    pub fn tensor_power(&self, n: usize) -> Result<Self> {
        let mut out: Option<Self> = None;
        for i in 0..n {
            let copy = self.relabel_with(&self.dims.suffixed(&i.to_string()))?;
            out = Some(match out {
                None => copy,
                Some(acc) => acc.tensor(&copy)?,
            });
        }
        out.ok_or_else(|| Error::DimMismatch("tensor power with n = 0".into()))
    }

    /// Reduced state on `keep`, in the original label order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        let pos = self.dims.positions(keep)?;
        let matrix = linalg::partial_trace_matrix(&self.matrix, &self.dims.dims(), &pos);
        let dims = self.dims.select(keep)?;
        Ok(Self { dims, matrix })
    }

    /// Trace out the listed systems.
    pub fn trace_out(&self, remove: &[&str]) -> Result<Self> {
        self.dims.positions(remove)?;
        let keep: Vec<&str> = self.dims.labels().filter(|l| !remove.contains(l)).collect();
        self.partial_trace(&keep)
    }

    /// Reorder the systems to `order` (must list every label once).
    pub fn reorder(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.dims.len() {
            return Err(Error::DimMismatch(format!(
                "reorder lists {} of {} systems",
                order.len(),
                self.dims.len()
            )));
        }
        let perm = self.dims.positions(order)?;
        Ok(Self {
            dims: self.dims.permuted(&perm),
            matrix: linalg::permute_matrix(&self.matrix, &self.dims.dims(), &perm),
        })
    }

    /// Replace the labels; dimensions must agree.
    pub fn relabel_with(&self, dims: &SystemDims) -> Result<Self> {
        if dims.dims() != self.dims.dims() {
            return Err(Error::DimMismatch(format!("relabel {} as {}", self.dims, dims)));
        }
        Ok(Self {
            dims: dims.clone(),
            matrix: self.matrix.clone(),
        })
    }

    pub fn relabel(&self, labels: &[&str]) -> Result<Self> {
        self.relabel_with(&self.dims.relabeled(labels)?)
    }

    /// Purification on a fresh system `new_label` whose dimension is the rank.
    pub fn purify(&self, new_label: &str) -> Result<Self> {
        let (dims, psi) = self.purification_vector(new_label)?;
        Self::new_unchecked(dims, &psi * psi.adjoint())
    }

    /// Purifying vector `Σ √λ_i |v_i⟩|i⟩` together with its systems.
    pub fn purification_vector(&self, new_label: &str) -> Result<(SystemDims, CVec<T>)> {
        if self.dims.contains(new_label) {
            return Err(Error::DuplicateLabel(new_label.to_string()));
        }
        let e = self.eigh();
        let (vals, vecs) = e.support(T::lit(T::EIG_CLAMP));
        let r = vals.len().max(1);
        let dims = self.dims.concat(&SystemDims::single(new_label, r)?)?;
        let n = self.dim();
        let mut psi = CVec::<T>::zeros(n * r);
        for (k, &lam) in vals.iter().enumerate() {
            let s = lam.sqrt();
            for i in 0..n {
                psi[i * r + k] = vecs[(i, k)] * s;
            }
        }
        let norm = psi.norm();
        if norm > T::zero() {
            psi.unscale_mut(norm);
        }
        Ok((dims, psi))
    }
}
