//! The optimal qubit/ebit rate region of a source, from its KI decomposition.

use crate::ki::KiDecomposition;
use crate::qcore::io::fmt_f17;
use crate::qcore::measures::{entropy_matrix, entropy_of, shannon_bits};
use crate::{Error, Result};

/// Slack on the rate inequalities (guards rounding only).
pub const MEMBERSHIP_TOL: f64 = 1e-12;
/// Largest assembled `ω^{CNQR}` used for the entropy cross-check.
pub const CROSS_CHECK_DIM: usize = 256;

/// Entanglement rate `E` (ebits) and quantum rate `Q` (qubits) per copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub e: f64,
    pub q: f64,
}

impl RatePoint {
    pub fn new(e: f64, q: f64) -> Result<Self> {
        if !(e.is_finite() && q.is_finite()) || e < 0.0 || q < 0.0 {
            return Err(Error::InvalidState(format!(
                "rate pair ({e}, {q}) must be finite and nonnegative"
            )));
        }
        Ok(Self { e, q })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRegion {
    pub s_c: f64,
    pub s_cq: f64,
    pub s_q_given_c: f64,
    pub s_n_given_c: f64,
    pub s_cnq: f64,
    /// `(0, S(CQ))`
    pub corner_unassisted: RatePoint,
    /// `(S(C)/2, S(CQ) − S(C)/2)`
    pub corner_assisted: RatePoint,
}

/// Entropies from the block data: `S(C) = H(p)`, `S(Q|C) = Σ p_j S(ρ_j^Q)`,
/// `S(N|C) = Σ p_j S(ω_j)`.
pub fn rate_region(ki: &KiDecomposition) -> Result<RateRegion> {
    let s_c = shannon_bits(&ki.probabilities()).max(0.0);
    let s_q_given_c: f64 = ki.blocks.iter().map(|b| b.p * entropy_matrix(&b.rho_q(ki.dim_r))).sum();
    let s_n_given_c: f64 = ki.blocks.iter().map(|b| b.p * entropy_matrix(&b.omega)).sum();
    let s_cq = s_c + s_q_given_c;
    let s_cnq = s_cq + s_n_given_c;
    let region = RateRegion {
        s_c,
        s_cq,
        s_q_given_c,
        s_n_given_c,
        s_cnq,
        corner_unassisted: RatePoint { e: 0.0, q: s_cq },
        corner_assisted: RatePoint {
            e: s_c / 2.0,
            q: s_cq - s_c / 2.0,
        },
    };
    let (c, n, q) = ki.padded_dims();
    if c * n * q * ki.dim_r <= CROSS_CHECK_DIM {
        cross_check(ki, &region)?;
    }
    Ok(region)
}

/// Compare the block formulas with entropies of the assembled `ω^{CNQR}`.
pub fn cross_check(ki: &KiDecomposition, r: &RateRegion) -> Result<()> {
    let omega = ki.omega_cnqr();
    let checks = [
        ("S(C)", r.s_c, entropy_of(&omega, &["C"])?),
        ("S(CQ)", r.s_cq, entropy_of(&omega, &["C", "Q"])?),
        ("S(CNQ)", r.s_cnq, entropy_of(&omega, &["C", "N", "Q"])?),
    ];
    for (name, block, dense) in checks {
        if (block - dense).abs() > 1e-9 {
            return Err(Error::VerificationFailed(format!(
                "{name}: block formula {block} vs assembled state {dense}"
            )));
        }
    }
    Ok(())
}

/// `Q ≥ S(CQ) − S(C)/2` and `Q + E ≥ S(CQ)`.
pub fn is_achievable(p: RatePoint, r: &RateRegion) -> bool {
    p.q >= r.s_cq - r.s_c / 2.0 - MEMBERSHIP_TOL && p.q + p.e >= r.s_cq - MEMBERSHIP_TOL
}

/// Advantage over Schumacher compression of `A`: `S(CNQ) − S(CQ) = S(N|C)`.
pub fn schumacher_gap(ki: &KiDecomposition) -> Result<f64> {
    Ok(rate_region(ki)?.s_n_given_c)
}

/// Minimal quantum rate at entanglement rate `e`.
pub fn q_min(r: &RateRegion, e: f64) -> f64 {
    (r.s_cq - e).max(r.s_cq - r.s_c / 2.0)
}

/// `samples` points `(E, Q_min(E))` with `E` uniform on `[0, S(C)/2 + 1]`.
pub fn region_boundary(r: &RateRegion, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidState(format!(
            "boundary needs at least 2 samples, got {samples}"
        )));
    }
    let e_max = r.s_c / 2.0 + 1.0;
    Ok((0..samples)
        .map(|i| {
            let e = e_max * i as f64 / (samples - 1) as f64;
            (e, q_min(r, e))
        })
        .collect())
}

/// The boundary as CSV with header `E,Qmin`.
pub fn region_boundary_csv(r: &RateRegion, samples: usize) -> Result<String> {
    let mut out = String::from("E,Qmin\n");
    for (e, q) in region_boundary(r, samples)? {
        out.push_str(&format!("{},{}\n", fmt_f17(e), fmt_f17(q)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ki::{ki_decompose_with, synth_ki_state_with, BlockSpec, KiOptions, SynthOptions};
    use crate::qcore::measures::binary_entropy;
    use crate::{Matrix, State, SystemDims};
    use num_complex::Complex;

    fn classical_bit() -> State {
        State::diagonal(SystemDims::new([("A", 2), ("R", 2)]).unwrap(), &[0.5, 0.0, 0.0, 0.5]).unwrap()
    }

    fn decomp(s: &State) -> KiDecomposition {
        ki_decompose_with(s, &KiOptions::default()).unwrap()
    }

    #[test]
    fn classical_bit_corners() {
        let r = rate_region(&decomp(&classical_bit())).unwrap();
        assert!((r.s_c - 1.0).abs() < 1e-12);
        assert!((r.s_cq - 1.0).abs() < 1e-12);
        assert_eq!(r.corner_unassisted, RatePoint { e: 0.0, q: r.s_cq });
        assert!((r.corner_assisted.e - 0.5).abs() < 1e-12 && (r.corner_assisted.q - 0.5).abs() < 1e-12);
        assert!((r.corner_assisted.e + r.corner_assisted.q - r.s_cq).abs() < 1e-12);
    }

    #[test]
    fn membership() {
        let r = rate_region(&decomp(&classical_bit())).unwrap();
        assert!(is_achievable(RatePoint { e: 0.0, q: r.s_cq }, &r));
        assert!(!is_achievable(
            RatePoint {
                e: r.s_c / 2.0 - 0.01,
                q: r.s_cq - r.s_c / 2.0
            },
            &r
        ));
        assert!(is_achievable(RatePoint { e: 10.0, q: 10.0 }, &r));
        assert!(!is_achievable(RatePoint { e: 1.0, q: 0.49 }, &r));
    }

    #[test]
    fn gap_of_prescribed_omega() {
        let om = Matrix::from_diagonal(&crate::Vector::from_vec(vec![
            Complex::new(0.7, 0.0),
            Complex::new(0.3, 0.0),
        ]));
        let (rho, _) = synth_ki_state_with(
            &[BlockSpec::from((1.0, 1, 2))],
            2,
            0,
            &SynthOptions {
                omegas: Some(vec![om]),
                ..Default::default()
            },
        )
        .unwrap();
        let gap = schumacher_gap(&decomp(&rho)).unwrap();
        assert!((gap - 0.8812908992306927).abs() < 1e-9);
        assert!((gap - binary_entropy(0.3)).abs() < 1e-12);
    }

    #[test]
    fn boundary_shape() {
        let r = rate_region(&decomp(&classical_bit())).unwrap();
        let pts = region_boundary(&r, 101).unwrap();
        assert_eq!(pts.len(), 101);
        assert_eq!(pts[0], (0.0, r.s_cq));
        for w in pts.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        // slopes: -1 before the kink, 0 after
        let kink = r.s_c / 2.0;
        for w in pts.windows(2) {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            if w[1].0 <= kink {
                assert!((slope + 1.0).abs() < 1e-9);
            } else if w[0].0 >= kink {
                assert!(slope.abs() < 1e-12);
            }
        }
        let csv = region_boundary_csv(&r, 5).unwrap();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("E,Qmin\n"));
        assert!(region_boundary(&r, 1).is_err());
    }
}
