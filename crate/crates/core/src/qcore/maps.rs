//! Isometries and CPTP maps acting on labeled subsystems.

use std::borrow::Cow;

use num_complex::Complex;

use super::dims::SystemDims;
use super::error::{Error, Result};
use super::linalg;
use super::scalar::{CMat, Real};
use super::state::MultipartiteState;

/// Linear map given by Kraus operators from `in_dims` to `out_dims`.
pub trait KrausMap<T: Real> {
    fn in_dims(&self) -> &SystemDims;
    fn out_dims(&self) -> &SystemDims;
    fn kraus(&self) -> Cow<'_, [CMat<T>]>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryMap<T: Real> {
    in_dims: SystemDims,
    out_dims: SystemDims,
    matrix: CMat<T>,
}

impl<T: Real> IsometryMap<T> {
    pub fn new(in_dims: SystemDims, out_dims: SystemDims, matrix: CMat<T>) -> Result<Self> {
        let u = Self::new_unchecked(in_dims, out_dims, matrix)?;
        let defect = linalg::isometry_defect(&u.matrix);
        if defect > T::lit(T::VALIDATION_TOL) {
            return Err(Error::NotIsometry(defect.as_f64()));
        }
        Ok(u)
    }

    pub fn new_unchecked(in_dims: SystemDims, out_dims: SystemDims, matrix: CMat<T>) -> Result<Self> {
        if matrix.nrows() != out_dims.total() || matrix.ncols() != in_dims.total() {
            return Err(Error::DimMismatch(format!(
                "isometry matrix {}x{} for {} -> {}",
                matrix.nrows(),
                matrix.ncols(),
                in_dims,
                out_dims
            )));
        }
        if out_dims.total() < in_dims.total() {
            return Err(Error::DimMismatch(format!(
                "isometry output {} smaller than input {}",
                out_dims, in_dims
            )));
        }
        Ok(Self {
            in_dims,
            out_dims,
            matrix,
        })
    }

    pub fn identity(dims: SystemDims) -> Self {
        let n = dims.total();
        Self {
            in_dims: dims.clone(),
            out_dims: dims,
            matrix: linalg::identity(n),
        }
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.matrix
    }

    /// Inverse on the image, as a map out -> in (a co-isometry).
    pub fn adjoint_matrix(&self) -> CMat<T> {
        self.matrix.adjoint()
    }

    /// Unitary inverse; only valid when input and output dimensions agree.
    pub fn inverse(&self) -> Result<Self> {
        if self.in_dims.total() != self.out_dims.total() {
            return Err(Error::DimMismatch("inverse of a proper isometry".into()));
        }
        Ok(Self {
            in_dims: self.out_dims.clone(),
            out_dims: self.in_dims.clone(),
            matrix: self.matrix.adjoint(),
        })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            in_dims: self.in_dims.concat(&other.in_dims)?,
            out_dims: self.out_dims.concat(&other.out_dims)?,
            matrix: linalg::kron(&self.matrix, &other.matrix),
        })
    }

    /// Stinespring picture: trace out the output systems listed in `env`.
    pub fn to_channel_tracing(&self, env: &[&str]) -> Result<QuantumChannel<T>> {
        let env_pos = self.out_dims.positions(env)?;
        let keep: Vec<&str> = self.out_dims.labels().filter(|l| !env.contains(l)).collect();
        let keep_pos = self.out_dims.positions(&keep)?;
        let mut perm = keep_pos.clone();
        perm.extend(&env_pos);
        let m = linalg::permute_rows(&self.matrix, &self.out_dims.dims(), &perm);
        let out_dims = self.out_dims.select(&keep)?;
        let env_dim: usize = env_pos.iter().map(|&p| self.out_dims.dims()[p]).product();
        let out_total = out_dims.total();
        let kraus = (0..env_dim)
            .map(|e| CMat::<T>::from_fn(out_total, self.in_dims.total(), |r, c| m[(r * env_dim + e, c)]))
            .collect();
        QuantumChannel::new(self.in_dims.clone(), out_dims, kraus)
    }
}

impl<T: Real> KrausMap<T> for IsometryMap<T> {
    fn in_dims(&self) -> &SystemDims {
        &self.in_dims
    }
    fn out_dims(&self) -> &SystemDims {
        &self.out_dims
    }
    fn kraus(&self) -> Cow<'_, [CMat<T>]> {
        Cow::Owned(vec![self.matrix.clone()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel<T: Real> {
    in_dims: SystemDims,
    out_dims: SystemDims,
    kraus: Vec<CMat<T>>,
}

impl<T: Real> QuantumChannel<T> {
    pub fn new(in_dims: SystemDims, out_dims: SystemDims, kraus: Vec<CMat<T>>) -> Result<Self> {
        let ch = Self::new_unchecked(in_dims, out_dims, kraus)?;
        let defect = ch.trace_preservation_defect();
        if defect > T::lit(T::VALIDATION_TOL) {
            return Err(Error::NotTracePreserving(defect.as_f64()));
        }
        Ok(ch)
    }

    pub fn new_unchecked(in_dims: SystemDims, out_dims: SystemDims, kraus: Vec<CMat<T>>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::DimMismatch("channel needs at least one Kraus operator".into()));
        }
        for k in &kraus {
            if k.nrows() != out_dims.total() || k.ncols() != in_dims.total() {
                return Err(Error::DimMismatch(format!(
                    "Kraus operator {}x{} for {} -> {}",
                    k.nrows(),
                    k.ncols(),
                    in_dims,
                    out_dims
                )));
            }
        }
        Ok(Self {
            in_dims,
            out_dims,
            kraus,
        })
    }

    pub fn identity(dims: SystemDims) -> Self {
        let n = dims.total();
        Self {
            in_dims: dims.clone(),
            out_dims: dims,
            kraus: vec![linalg::identity(n)],
        }
    }

    /// `X ↦ Tr(X) 1/d`.
    pub fn completely_depolarizing(dims: SystemDims) -> Self {
        let d = dims.total();
        let scale = Complex::new(T::one() / T::from_usize(d).unwrap().sqrt(), T::zero());
        let mut kraus = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut k = CMat::<T>::zeros(d, d);
                k[(i, j)] = scale;
                kraus.push(k);
            }
        }
        Self {
            in_dims: dims.clone(),
            out_dims: dims,
            kraus,
        }
    }

    pub fn unitary(u: &IsometryMap<T>) -> Self {
        Self {
            in_dims: u.in_dims.clone(),
            out_dims: u.out_dims.clone(),
            kraus: vec![u.matrix.clone()],
        }
    }

    pub fn kraus_ops(&self) -> &[CMat<T>] {
        &self.kraus
    }

    pub fn trace_preservation_defect(&self) -> T {
        let n = self.in_dims.total();
        let mut acc = CMat::<T>::zeros(n, n);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        linalg::max_abs(&(acc - linalg::identity::<T>(n)))
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &Self) -> Result<Self> {
        if other.in_dims.dims() != self.out_dims.dims() {
            return Err(Error::DimMismatch(format!(
                "compose {} -> {} with {} -> {}",
                self.in_dims, self.out_dims, other.in_dims, other.out_dims
            )));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for b in &other.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        Self::new_unchecked(self.in_dims.clone(), other.out_dims.clone(), kraus)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(linalg::kron(a, b));
            }
        }
        Self::new_unchecked(
            self.in_dims.concat(&other.in_dims)?,
            self.out_dims.concat(&other.out_dims)?,
            kraus,
        )
    }
}

impl<T: Real> KrausMap<T> for QuantumChannel<T> {
    fn in_dims(&self) -> &SystemDims {
        &self.in_dims
    }
    fn out_dims(&self) -> &SystemDims {
        &self.out_dims
    }
    fn kraus(&self) -> Cow<'_, [CMat<T>]> {
        Cow::Borrowed(&self.kraus)
    }
}

/// `(K ⊗ 1_rest) X` where the rows of `X` run over `in ⊗ rest`.
pub(crate) fn left_apply<T: Real>(k: &CMat<T>, x: &CMat<T>, rest: usize) -> CMat<T> {
    let din = k.ncols();
    let dout = k.nrows();
    debug_assert_eq!(x.nrows(), din * rest);
    let cols = x.ncols();
    let mut out = CMat::<T>::zeros(dout * rest, cols);
    if rest == 1 {
        return k * x;
    }
    let mut block = CMat::<T>::zeros(din, cols);
    for r in 0..rest {
        for i in 0..din {
            block.row_mut(i).copy_from(&x.row(i * rest + r));
        }
        let y = k * &block;
        for o in 0..dout {
            out.row_mut(o * rest + r).copy_from(&y.row(o));
        }
    }
    out
}

/// Apply `m ⊗ id` to the systems `on` of `s`. The output systems of `m`
/// take the place of the first replaced label; other labels keep their order.
pub fn apply<T: Real, M: KrausMap<T> + ?Sized>(
    m: &M,
    s: &MultipartiteState<T>,
    on: &[&str],
) -> Result<MultipartiteState<T>> {
    let sd = s.dims();
    let pos = sd.positions(on)?;
    let on_dims: Vec<usize> = pos.iter().map(|&p| sd.dims()[p]).collect();
    if on_dims != m.in_dims().dims() {
        return Err(Error::DimMismatch(format!(
            "map input {} applied to systems {:?} with dims {:?}",
            m.in_dims(),
            on,
            on_dims
        )));
    }
    let rest_labels: Vec<&str> = sd.labels().filter(|l| !on.contains(l)).collect();
    for l in m.out_dims().labels() {
        if rest_labels.contains(&l) {
            return Err(Error::DuplicateLabel(l.to_string()));
        }
    }
    let mut order: Vec<&str> = on.to_vec();
    order.extend(&rest_labels);
    let front = s.reorder(&order)?;
    let rest_dims = sd.select(&rest_labels)?;
    let rest = rest_dims.total();

    let mut acc: Option<CMat<T>> = None;
    for k in m.kraus().iter() {
        let y = left_apply(k, front.matrix(), rest);
        let z = left_apply(k, &y.adjoint(), rest).adjoint();
        acc = Some(match acc {
            None => z,
            Some(a) => a + z,
        });
    }
    let out_dims = m.out_dims().concat(&rest_dims)?;
    let raw = MultipartiteState::new_unchecked(out_dims, acc.expect("nonempty Kraus set"))?;

    // put outputs where the first input label was
    let first = pos.iter().copied().min().unwrap_or(0);
    let mut final_order: Vec<&str> = Vec::new();
    let mut inserted = false;
    for (i, l) in sd.labels().enumerate() {
        if i >= first && !inserted {
            final_order.extend(m.out_dims().labels());
            inserted = true;
        }
        if !on.contains(&l) {
            final_order.push(l);
        }
    }
    if !inserted {
        final_order.extend(m.out_dims().labels());
    }
    raw.reorder(&final_order)
}
