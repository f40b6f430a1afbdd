use num_complex::Complex;

use super::dims::SystemDims;
use super::error::{Error, Result};
use super::linalg::{self, eigh, eigvalsh};
use super::scalar::{CMat, Real};

/// Positive operator-valued measure on a labeled system.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm<T: Real> {
    dims: SystemDims,
    elements: Vec<CMat<T>>,
}

impl<T: Real> Povm<T> {
    pub fn new(dims: SystemDims, elements: Vec<CMat<T>>) -> Result<Self> {
        let d = dims.total();
        let tol = T::lit(T::VALIDATION_TOL);
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no elements".into()));
        }
        let mut sum = CMat::<T>::zeros(d, d);
        for (y, m) in elements.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::InvalidPovm(format!(
                    "element {y} is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let min = eigvalsh(m).last().copied().unwrap_or_else(T::zero);
            if min < -tol {
                return Err(Error::InvalidPovm(format!(
                    "element {y} has eigenvalue {:.3e}",
                    min.as_f64()
                )));
            }
            sum += m;
        }
        let defect = linalg::max_abs(&(sum - linalg::identity::<T>(d)));
        if defect > tol {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {:.3e}",
                defect.as_f64()
            )));
        }
        Ok(Self { dims, elements })
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn elements(&self) -> &[CMat<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.dims = SystemDims::single(label, self.dims.total()).expect("nonzero dim");
        self
    }

    /// `V M_y V†` for a unitary `V`; again a POVM.
    pub fn conjugated(&self, v: &CMat<T>) -> Self {
        Self {
            dims: self.dims.clone(),
            elements: self.elements.iter().map(|m| v * m * v.adjoint()).collect(),
        }
    }

    /// Rank of the real span of the elements inside the Hermitian matrices.
    pub fn span_rank(&self, tol: T) -> usize {
        let d = self.dims.total();
        // real coordinates of each Hermitian element, one row per element
        let rows = self.elements.len();
        let gram = CMat::<T>::from_fn(rows, rows, |a, b| {
            Complex::new(linalg::hs_inner(&self.elements[a], &self.elements[b]).re, T::zero())
        });
        let _ = d;
        linalg::rank(&gram, tol)
    }
}

/// Informationally complete POVM with exactly `dim²` rank-one elements,
/// built from the frame `|r⟩`, `(|r⟩+|s⟩)/√2`, `(|r⟩+i|s⟩)/√2` and
/// normalized by `S^{-1/2}` with `S` the frame operator.
pub fn make_ic_povm<T: Real>(dim: usize) -> Povm<T> {
    assert!(dim >= 1, "POVM dimension must be positive");
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let one = Complex::new(T::one(), T::zero());
    let mut vecs: Vec<Vec<Complex<T>>> = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        let mut v = vec![Complex::new(T::zero(), T::zero()); dim];
        v[r] = one;
        vecs.push(v);
    }
    for r in 0..dim {
        for s in (r + 1)..dim {
            let mut v = vec![Complex::new(T::zero(), T::zero()); dim];
            v[r] = Complex::new(h, T::zero());
            v[s] = Complex::new(h, T::zero());
            vecs.push(v);
            let mut w = vec![Complex::new(T::zero(), T::zero()); dim];
            w[r] = Complex::new(h, T::zero());
            w[s] = Complex::new(T::zero(), h);
            vecs.push(w);
        }
    }
    let frame: Vec<CMat<T>> = vecs
        .iter()
        .map(|v| CMat::<T>::from_fn(dim, dim, |i, j| v[i] * v[j].conj()))
        .collect();
    let mut s = CMat::<T>::zeros(dim, dim);
    for e in &frame {
        s += e;
    }
    let s_inv_sqrt = eigh(&s).compose(|x| T::one() / x.sqrt());
    let elements = frame
        .iter()
        .map(|e| linalg::hermitize(&(&s_inv_sqrt * e * &s_inv_sqrt)))
        .collect();
    Povm {
        dims: SystemDims::single("R", dim).expect("nonzero dim"),
        elements,
    }
}

/// Projective measurement in the computational basis.
pub fn computational_basis_povm<T: Real>(dim: usize) -> Povm<T> {
    let elements = (0..dim)
        .map(|i| {
            let mut m = CMat::<T>::zeros(dim, dim);
            m[(i, i)] = Complex::new(T::one(), T::zero());
            m
        })
        .collect();
    Povm {
        dims: SystemDims::single("R", dim).expect("nonzero dim"),
        elements,
    }
}
