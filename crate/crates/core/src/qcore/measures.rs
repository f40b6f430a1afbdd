//! Entropies, fidelity and trace distance. Logarithms are base 2.

use super::error::{Error, Result};
use super::linalg::{clamp_eig, eigh, eigvalsh};
use super::scalar::{CMat, Real};
use super::state::MultipartiteState;

/// `-Σ λ log₂ λ` over a spectrum, ignoring eigenvalues below the cutoff.
pub fn entropy_of_spectrum<T: Real>(eigs: impl IntoIterator<Item = T>) -> T {
    let cutoff = T::lit(T::ENTROPY_CUTOFF);
    eigs.into_iter()
        .filter(|&l| l > cutoff)
        .fold(T::zero(), |s, l| s - l * l.log2())
}

/// Shannon entropy of a probability vector, in bits.
pub fn shannon_bits<T: Real>(p: &[T]) -> T {
    entropy_of_spectrum(p.iter().copied())
}

/// Binary entropy `h(x)`; `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Von Neumann entropy of a density matrix in bits.
pub fn entropy_matrix<T: Real>(m: &CMat<T>) -> T {
    entropy_of_spectrum(eigvalsh(m))
}

pub fn entropy_bits<T: Real>(s: &MultipartiteState<T>) -> T {
    entropy_matrix(s.matrix())
}

/// Entropy of the reduced state on `labels` (empty set gives 0).
pub fn entropy_of<T: Real>(s: &MultipartiteState<T>, labels: &[&str]) -> Result<T> {
    if labels.is_empty() {
        s.dims().positions(labels)?;
        return Ok(T::zero());
    }
    Ok(entropy_bits(&s.partial_trace(labels)?))
}

/// Entropic expressions over label groups.
#[derive(Debug, Clone, Copy)]
pub enum Entropic<'a> {
    /// `S(X)`
    Entropy(&'a [&'a str]),
    /// `S(X|Y) = S(XY) − S(Y)`
    Conditional(&'a [&'a str], &'a [&'a str]),
    /// `I(X:Y) = S(X) + S(Y) − S(XY)`
    Mutual(&'a [&'a str], &'a [&'a str]),
    /// `I(X:Y|Z) = S(XZ) + S(YZ) − S(XYZ) − S(Z)`
    CondMutual(&'a [&'a str], &'a [&'a str], &'a [&'a str]),
}

fn disjoint(groups: &[&[&str]]) -> Result<()> {
    for (i, g) in groups.iter().enumerate() {
        for (j, l) in g.iter().enumerate() {
            if g[..j].contains(l) || groups[..i].iter().any(|h| h.contains(l)) {
                return Err(Error::OverlappingGroups(l.to_string()));
            }
        }
    }
    Ok(())
}

fn union<'a>(groups: &[&[&'a str]]) -> Vec<&'a str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

pub fn entropic<T: Real>(s: &MultipartiteState<T>, expr: Entropic<'_>) -> Result<T> {
    let h = |labels: &[&str]| entropy_of(s, labels);
    match expr {
        Entropic::Entropy(x) => {
            disjoint(&[x])?;
            h(x)
        }
        Entropic::Conditional(x, y) => {
            disjoint(&[x, y])?;
            Ok(h(&union(&[x, y]))? - h(y)?)
        }
        Entropic::Mutual(x, y) => {
            disjoint(&[x, y])?;
            Ok(h(x)? + h(y)? - h(&union(&[x, y]))?)
        }
        Entropic::CondMutual(x, y, z) => {
            disjoint(&[x, y, z])?;
            Ok(h(&union(&[x, z]))? + h(&union(&[y, z]))? - h(&union(&[x, y, z]))? - h(z)?)
        }
    }
}

/// `Tr √M` for a PSD matrix `M`. Eigenvalues at the rounding floor of `M`
/// are dropped: they would otherwise enter as √(round-off) and, for
/// rank-deficient arguments, make the fidelity depend on argument order.
pub fn trace_sqrt_psd<T: Real>(m: &CMat<T>) -> T {
    let mu = eigvalsh(m);
    let top = mu.iter().fold(T::zero(), |a, &x| if x > a { x } else { a });
    let floor = top * T::default_epsilon() * T::lit(16.0 * m.nrows() as f64);
    mu.into_iter()
        .filter(|&x| x > floor)
        .fold(T::zero(), |acc, x| acc + clamp_eig(x).sqrt())
}

/// Uhlmann fidelity `Tr √(√ρ ξ √ρ)` of two PSD matrices (not squared).
pub fn fidelity_matrix<T: Real>(rho: &CMat<T>, xi: &CMat<T>) -> T {
    let e = eigh(rho);
    let (vals, vecs) = e.support(T::lit(T::ENTROPY_CUTOFF) * T::lit(1e-3));
    if vals.is_empty() {
        return T::zero();
    }
    // restrict to the support of ρ: √ρ ξ √ρ = V D^½ (V† ξ V) D^½ V†
    let inner = vecs.adjoint() * xi * &vecs;
    let r = vals.len();
    let sq: Vec<T> = vals.iter().map(|&v| v.sqrt()).collect();
    let m = CMat::<T>::from_fn(r, r, |i, j| inner[(i, j)] * (sq[i] * sq[j]));
    trace_sqrt_psd(&m)
}

pub fn fidelity<T: Real>(rho: &MultipartiteState<T>, xi: &MultipartiteState<T>) -> Result<T> {
    if rho.dims().dims() != xi.dims().dims() {
        return Err(Error::DimMismatch(format!(
            "fidelity between {} and {}",
            rho.dims(),
            xi.dims()
        )));
    }
    Ok(fidelity_matrix(rho.matrix(), xi.matrix()))
}

/// Trace norm `‖X‖₁` of a Hermitian matrix.
pub fn trace_norm_hermitian<T: Real>(m: &CMat<T>) -> T {
    eigvalsh(m).into_iter().fold(T::zero(), |a, l| a + l.abs())
}

/// `½‖ρ − ξ‖₁`.
pub fn trace_distance<T: Real>(rho: &MultipartiteState<T>, xi: &MultipartiteState<T>) -> Result<T> {
    if rho.dims().dims() != xi.dims().dims() {
        return Err(Error::DimMismatch(format!(
            "trace distance between {} and {}",
            rho.dims(),
            xi.dims()
        )));
    }
    Ok(trace_norm_hermitian(&(rho.matrix() - xi.matrix())) * T::lit(0.5))
}

/// Matrix logarithm (base 2) of a positive definite matrix on its support.
pub fn log2_psd<T: Real>(m: &CMat<T>) -> CMat<T> {
    eigh(m).compose(|x| {
        if x > T::lit(T::ENTROPY_CUTOFF) {
            x.log2()
        } else {
            T::zero()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::dims::SystemDims;
    use crate::qcore::random::random_state;
    use crate::qcore::scalar::{cr, CVec};

    fn d1(l: &str, n: usize) -> SystemDims {
        SystemDims::single(l, n).unwrap()
    }

    #[test]
    fn entropy_basic_values() {
        let mm = MultipartiteState::<f64>::maximally_mixed(d1("A", 2));
        assert!((entropy_bits(&mm) - 1.0).abs() < 1e-12);
        let pure = MultipartiteState::<f64>::basis(d1("A", 3), 1).unwrap();
        assert!(entropy_bits(&pure).abs() < 1e-12);
        let skew = MultipartiteState::<f64>::diagonal(d1("A", 2), &[0.7, 0.3]).unwrap();
        // h(0.3) evaluated directly
        let h = -0.7f64 * 0.7f64.log2() - 0.3f64 * 0.3f64.log2();
        assert!((h - 0.8812908992306927).abs() < 1e-15);
        assert!((entropy_bits(&skew) - 0.8812908992306927).abs() < 1e-12);
    }

    #[test]
    fn entropy_in_single_precision() {
        let mm = MultipartiteState::<f32>::maximally_mixed(d1("A", 4));
        assert!((entropy_bits(&mm) - 2.0).abs() < 1e-5);
    }

    #[test]
    fn conditional_entropy_of_bell_pair() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = CVec::<f64>::from_vec(vec![cr(h), cr(0.0), cr(0.0), cr(h)]);
        let s = MultipartiteState::from_pure(SystemDims::new([("A", 2), ("R", 2)]).unwrap(), &psi).unwrap();
        let v = entropic(&s, Entropic::Conditional(&["A"], &["R"])).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_of_product_vanishes() {
        let a = random_state::<f64>(&d1("A", 2), 2, 1).unwrap();
        let r = random_state::<f64>(&d1("R", 3), 3, 2).unwrap();
        let s = a.tensor(&r).unwrap();
        assert!(entropic(&s, Entropic::Mutual(&["A"], &["R"])).unwrap().abs() < 1e-12);
        assert!(matches!(
            entropic(&s, Entropic::Mutual(&["A"], &["A"])),
            Err(Error::OverlappingGroups(_))
        ));
    }

    #[test]
    fn fidelity_examples() {
        let zero = MultipartiteState::<f64>::basis(d1("A", 2), 0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = MultipartiteState::from_pure(d1("A", 2), &CVec::<f64>::from_vec(vec![cr(h), cr(h)])).unwrap();
        assert!((fidelity(&zero, &plus).unwrap() - h).abs() < 1e-12);
        let s = random_state::<f64>(&d1("A", 3), 3, 9).unwrap();
        assert!((fidelity(&s, &s).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(fidelity(&s, &zero), Err(Error::DimMismatch(_))));
    }
}
