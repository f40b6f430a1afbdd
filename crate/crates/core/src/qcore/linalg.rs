//! Dense Hermitian linear algebra on tensor-product index spaces.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex;

use super::scalar::{CMat, CVec, Real};

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Eigh<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMat<T>,
}

impl<T: Real> Eigh<T> {
    /// Columns whose eigenvalue exceeds `tol`.
    pub fn support(&self, tol: T) -> (Vec<T>, CMat<T>) {
        let keep: Vec<usize> = (0..self.values.len()).filter(|&i| self.values[i] > tol).collect();
        let vals = keep.iter().map(|&i| self.values[i]).collect();
        let vecs = self.vectors.select_columns(&keep);
        (vals, vecs)
    }

    pub fn rank(&self, tol: T) -> usize {
        self.values.iter().filter(|v| **v > tol).count()
    }

    /// Rebuild `V f(Λ) V†`.
    pub fn compose(&self, f: impl Fn(T) -> T) -> CMat<T> {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = Complex::new(f(v), T::zero());
            for z in scaled.column_mut(j).iter_mut() {
                *z *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn hermitize<T: Real>(m: &CMat<T>) -> CMat<T> {
    let half = T::lit(0.5);
    (m + m.adjoint()).map(|z| z * half)
}

/// Hermitian eigendecomposition (input is symmetrized first).
pub fn eigh<T: Real>(m: &CMat<T>) -> Eigh<T> {
    assert_eq!(m.nrows(), m.ncols(), "eigh needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return Eigh {
            values: Vec::new(),
            vectors: CMat::<T>::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    Eigh { values, vectors }
}

/// Eigenvalues only, descending.
pub fn eigvalsh<T: Real>(m: &CMat<T>) -> Vec<T> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let vals = SymmetricEigen::new(hermitize(m)).eigenvalues;
    let mut v: Vec<T> = vals.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Clamp tiny negative eigenvalues to zero.
#[inline]
pub fn clamp_eig<T: Real>(x: T) -> T {
    if x < T::zero() {
        T::zero()
    } else {
        x
    }
}

/// Square root of a positive semidefinite matrix.
pub fn sqrt_psd<T: Real>(m: &CMat<T>) -> CMat<T> {
    eigh(m).compose(|x| clamp_eig(x).sqrt())
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    CMat::<T>::identity(n, n)
}

pub fn trace<T: Real>(m: &CMat<T>) -> Complex<T> {
    m.trace()
}

pub fn max_abs<T: Real>(m: &CMat<T>) -> T {
    m.iter()
        .map(|z| (z.re * z.re + z.im * z.im).sqrt())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

pub fn frobenius<T: Real>(m: &CMat<T>) -> T {
    m.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt()
}

/// Hilbert-Schmidt inner product `Tr(a† b)`.
pub fn hs_inner<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Complex<T> {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.conj() * y)
        .fold(Complex::new(T::zero(), T::zero()), |s, v| s + v)
}

pub fn kron<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a.kronecker(b)
}

pub fn kron_vec<T: Real>(a: &CVec<T>, b: &CVec<T>) -> CVec<T> {
    a.kronecker(b)
}

/// `max |U†U − 1|`.
pub fn isometry_defect<T: Real>(u: &CMat<T>) -> T {
    let g = u.adjoint() * u;
    max_abs(&(g - identity::<T>(u.ncols())))
}

/// Polar orthonormalization `G (G†G)^{-1/2}`; the closest isometry to `G`.
pub fn polar_isometry<T: Real>(g: &CMat<T>) -> CMat<T> {
    let gram = g.adjoint() * g;
    let e = eigh(&gram);
    let floor = T::lit(1e-300);
    let inv_sqrt = e.compose(|x| {
        let x = if x > floor { x } else { floor };
        T::one() / x.sqrt()
    });
    g * inv_sqrt
}

/// Orthonormal basis of the null space of `a` (columns), using singular
/// values below `tol * max(1, σ_max)`.
pub fn null_space<T: Real>(a: &CMat<T>, tol: T) -> CMat<T> {
    let cols = a.ncols();
    if cols == 0 {
        return CMat::<T>::zeros(0, 0);
    }
    let padded;
    let a = if a.nrows() < cols {
        let mut p = CMat::<T>::zeros(cols, cols);
        p.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
        padded = p;
        &padded
    } else {
        a
    };
    let svd = SVD::new(a.clone(), false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |m, s| if s > m { s } else { m });
    let scale = if smax > T::one() { smax } else { T::one() };
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol * scale)
        .collect();
    let mut out = CMat::<T>::zeros(cols, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        for c in 0..cols {
            out[(c, k)] = vt[(i, c)].conj();
        }
    }
    out
}

/// Numerical rank: singular values above `tol * max(1, σ_max)`.
pub fn rank<T: Real>(a: &CMat<T>, tol: T) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().copied().fold(T::zero(), |m, s| if s > m { s } else { m });
    let scale = if smax > T::one() { smax } else { T::one() };
    sv.iter().filter(|s| **s > tol * scale).count()
}

/// Mixed-radix strides, first digit most significant.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// For each old flat index, its flat index after reordering the tensor
/// factors so that new factor `k` is old factor `perm[k]`.
pub fn permutation_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    assert_eq!(dims.len(), perm.len());
    let total: usize = dims.iter().product();
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new_strides = strides(&new_dims);
    // stride of old factor p in the new layout
    let mut dest_stride = vec![0; dims.len()];
    for (k, &p) in perm.iter().enumerate() {
        dest_stride[p] = new_strides[k];
    }
    (0..total)
        .map(|idx| {
            let mut out = 0;
            for (p, (&st, &d)) in old_strides.iter().zip(dims).enumerate() {
                out += ((idx / st) % d) * dest_stride[p];
            }
            out
        })
        .collect()
}

/// Reorder the tensor factors of a square matrix.
pub fn permute_matrix<T: Real>(m: &CMat<T>, dims: &[usize], perm: &[usize]) -> CMat<T> {
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return m.clone();
    }
    let map = permutation_map(dims, perm);
    let n = m.nrows();
    let mut out = CMat::<T>::zeros(n, n);
    for c in 0..n {
        let nc = map[c];
        for r in 0..n {
            out[(map[r], nc)] = m[(r, c)];
        }
    }
    out
}

/// Reorder the tensor factors of the row index of a (possibly rectangular) matrix.
pub fn permute_rows<T: Real>(m: &CMat<T>, dims: &[usize], perm: &[usize]) -> CMat<T> {
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return m.clone();
    }
    let map = permutation_map(dims, perm);
    let mut out = CMat::<T>::zeros(m.nrows(), m.ncols());
    for (r, &dest) in map.iter().enumerate() {
        out.row_mut(dest).copy_from(&m.row(r));
    }
    out
}

/// Reorder the tensor factors of a vector.
pub fn permute_vector<T: Real>(v: &CVec<T>, dims: &[usize], perm: &[usize]) -> CVec<T> {
    let map = permutation_map(dims, perm);
    let mut out = CVec::<T>::zeros(v.len());
    for (i, &j) in map.iter().enumerate() {
        out[j] = v[i];
    }
    out
}

/// Partial trace keeping the factors at `keep` (original order preserved).
pub fn partial_trace_matrix<T: Real>(m: &CMat<T>, dims: &[usize], keep: &[usize]) -> CMat<T> {
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kdim: usize = keep.iter().map(|&i| dims[i]).product();
    let tdim: usize = traced.iter().map(|&i| dims[i]).product();
    if tdim == 1 {
        return m.clone();
    }
    let mut perm = keep.clone();
    perm.extend(&traced);
    let map = permutation_map(dims, &perm);
    // rows/cols of m grouped by traced index
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(kdim); tdim];
    for (old, &new) in map.iter().enumerate() {
        groups[new % tdim].push((new / tdim, old));
    }
    let mut out = CMat::<T>::zeros(kdim, kdim);
    for g in &groups {
        for &(kc, oc) in g {
            for &(kr, or) in g {
                out[(kr, kc)] += m[(or, oc)];
            }
        }
    }
    out
}

/// View a vector on `rows ⊗ cols` as a `rows × cols` matrix.
pub fn unvec<T: Real>(v: &CVec<T>, rows: usize, cols: usize) -> CMat<T> {
    assert_eq!(v.len(), rows * cols);
    DMatrix::from_fn(rows, cols, |r, c| v[r * cols + c])
}

/// Inverse of [`unvec`].
pub fn vec_of<T: Real>(m: &CMat<T>) -> CVec<T> {
    let (rows, cols) = m.shape();
    CVec::<T>::from_fn(rows * cols, |i, _| m[(i / cols, i % cols)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::scalar::cr;

    #[test]
    fn permutation_swaps_factors() {
        let a = DMatrix::from_fn(2, 2, |r, c| cr::<f64>((r * 2 + c) as f64));
        let b = DMatrix::from_fn(3, 3, |r, c| cr::<f64>((10 + r * 3 + c) as f64));
        let ab = kron(&a, &b);
        let ba = kron(&b, &a);
        let swapped = permute_matrix(&ab, &[2, 3], &[1, 0]);
        assert!(max_abs(&(swapped - ba)) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = DMatrix::from_fn(2, 2, |r, c| cr::<f64>(if r == c { 0.5 } else { 0.1 }));
        let b = DMatrix::from_fn(3, 3, |r, c| cr::<f64>(if r == c { 1.0 / 3.0 } else { 0.0 }));
        let ab = kron(&a, &b);
        assert!(max_abs(&(partial_trace_matrix(&ab, &[2, 3], &[0]) - &a)) < 1e-14);
        assert!(max_abs(&(partial_trace_matrix(&ab, &[2, 3], &[1]) - &b)) < 1e-14);
    }

    #[test]
    fn null_space_of_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 3, &[cr::<f64>(1.0), cr(0.0), cr(1.0), cr(0.0), cr(1.0), cr(0.0)]);
        let ns = null_space(&a, 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!(max_abs(&(&a * &ns)) < 1e-12);
        assert_eq!(rank(&a, 1e-10), 2);
    }

    #[test]
    fn polar_gives_isometry() {
        let g = DMatrix::from_fn(4, 2, |r, c| {
            num_complex::Complex::new((r + 2 * c) as f64 * 0.3 + 1.0, r as f64 - c as f64)
        });
        assert!(isometry_defect(&polar_isometry(&g)) < 1e-12);
    }
}
