//! Numerical audit of the converse chains on the Stinespring dilation of a
//! concrete code.
//!
//! Every copy of the source is purified as `ψ^{CNQC'X}` (with `C'` a copy of
//! `C` and `X` purifying the rest, reference included). The encoder isometry
//! `CⁿNⁿQⁿ → M ⊗ W` keeps `Nⁿ` in its environment together with the code
//! environment; the decoder embeds `M` into `ĈⁿQ̂ⁿ` and runs the
//! regeneration map through its dilation `ĈQ̂ → ĈN̂Q̂V`. All entropies are
//! taken from the resulting global pure states.
//!
//! The dilation sends `|j,q⟩ ↦ |j,q⟩ ⊗ |φ_j⟩_{N̂V}` with orthonormal
//! `φ_j = Σ_a √λ_{j,a} |e_{j,a}⟩|j,a⟩`, and `N̂`, `V` only ever enter the
//! chains together, so by default `N̂V` is stored through the isometric
//! relabeling `φ_j ↦ |j⟩`; this leaves every entropy unchanged. Entanglement-assisted codes
//! are audited in their physical realization: the retained space is sent
//! as is, so `A₀`, `B₀` are trivial and `Q = log₂|M|/n`.

use num_complex::Complex;
use serde::Serialize;

use super::protocol::{code_instance_fidelity, reconstruct_n_channel, CodeInstance};
use crate::ki::KiDecomposition;
use crate::qcore::io::fmt_f17;
use crate::qcore::measures::{binary_entropy, entropy_matrix};
use crate::rates::rate_region;
use crate::{Error, Matrix, Result, Vector};

/// Longest block length audited.
pub const AUDIT_MAX_N: usize = 3;
/// Largest global pure state (number of amplitudes).
pub const AUDIT_CAP: usize = 1 << 20;
/// Smallest acceptable step slack.
pub const SLACK_TOL: f64 = 1e-8;

/// One labeled step `lhs (≥ or =) rhs`. Inequalities report `lhs − rhs`,
/// equalities `−|lhs − rhs|`; a step holds when its slack is `≥ −SLACK_TOL`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditStep {
    pub step: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl AuditStep {
    fn geq(step: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            step: step.into(),
            lhs,
            rhs,
            slack: lhs - rhs,
        }
    }

    fn eq(step: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            step: step.into(),
            lhs,
            rhs,
            // `+ 0.0` turns a negative zero into a plain zero
            slack: -(lhs - rhs).abs() + 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n: usize,
    /// Physical qubit rate `log₂|M|/n`.
    pub rate_q: f64,
    pub fidelity: f64,
    pub epsilon: f64,
    /// `δ(n, ε)` used in the continuity step.
    pub delta: f64,
    pub steps: Vec<AuditStep>,
}

impl AuditReport {
    pub fn min_slack(&self) -> f64 {
        self.steps.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min)
    }

    /// `SlackViolation` for the first step below `−tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        match self.steps.iter().find(|s| s.slack < -tol) {
            Some(s) => Err(Error::SlackViolation {
                step: s.step.clone(),
                slack: s.slack,
            }),
            None => Ok(()),
        }
    }

    /// CSV with header `step,lhs,rhs,slack`; a leading `delta` row records
    /// `δ(n, ε)` (as both sides, slack 0).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,lhs,rhs,slack\n");
        out.push_str(&format!(
            "delta,{},{},{}\n",
            fmt_f17(self.delta),
            fmt_f17(self.delta),
            fmt_f17(0.0)
        ));
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.step,
                fmt_f17(s.lhs),
                fmt_f17(s.rhs),
                fmt_f17(s.slack)
            ));
        }
        out
    }
}

/// `δ(n, ε) = x log₂(|C||Q|) + h(x)/n` with `x = √(2ε)` clamped to `[0, 1]`.
pub fn continuity_delta(n: usize, epsilon: f64, dim_cq: usize) -> f64 {
    let x = (2.0 * epsilon.max(0.0)).sqrt().min(1.0);
    x * (dim_cq as f64).log2() + binary_entropy(x) / n as f64
}

/// Labeled pure state on a list of subsystems (first label most significant).
#[derive(Debug, Clone)]
struct Pure {
    labels: Vec<String>,
    dims: Vec<usize>,
    v: Vector,
}

impl Pure {
    fn position(&self, l: &str) -> usize {
        self.labels
            .iter()
            .position(|x| x == l)
            .unwrap_or_else(|| panic!("unknown subsystem {l}"))
    }

    fn tensor(&self, other: &Pure) -> Pure {
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut dims = self.dims.clone();
        dims.extend(&other.dims);
        let v = Vector::from_fn(self.v.len() * other.v.len(), |i, _| {
            self.v[i / other.v.len()] * other.v[i % other.v.len()]
        });
        Pure { labels, dims, v }
    }

    /// Amplitudes as a `|front| × |rest|` matrix, with the remaining labels.
    fn split(&self, front: &[&str]) -> (Matrix, Vec<String>, Vec<usize>) {
        let mut perm: Vec<usize> = front.iter().map(|l| self.position(l)).collect();
        let rest: Vec<usize> = (0..self.labels.len()).filter(|i| !perm.contains(i)).collect();
        perm.extend(&rest);
        let w = crate::qcore::linalg::permute_vector(&self.v, &self.dims, &perm);
        let df: usize = front.iter().map(|l| self.dims[self.position(l)]).product();
        let dr = self.v.len() / df;
        let m = Matrix::from_fn(df, dr, |i, r| w[i * dr + r]);
        (
            m,
            rest.iter().map(|&i| self.labels[i].clone()).collect(),
            rest.iter().map(|&i| self.dims[i]).collect(),
        )
    }

    /// Apply `u : on → outs` (rows ordered as `outs`).
    fn apply(&self, on: &[&str], u: &Matrix, outs: &[(String, usize)]) -> Pure {
        let (m, rest_l, rest_d) = self.split(on);
        let y = u * m;
        let dr = y.ncols();
        let v = Vector::from_fn(y.nrows() * dr, |i, _| y[(i / dr, i % dr)]);
        let mut labels: Vec<String> = outs.iter().map(|(l, _)| l.clone()).collect();
        labels.extend(rest_l);
        let mut dims: Vec<usize> = outs.iter().map(|&(_, d)| d).collect();
        dims.extend(rest_d);
        Pure { labels, dims, v }
    }

    /// `S(labels)`, from whichever side of the cut is smaller.
    fn entropy(&self, labels: &[String]) -> f64 {
        if labels.is_empty() || labels.len() == self.labels.len() {
            return 0.0;
        }
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let (m, _, _) = self.split(&refs);
        let gram = if m.nrows() <= m.ncols() {
            &m * m.adjoint()
        } else {
            m.adjoint() * &m
        };
        entropy_matrix(&gram)
    }
}

fn labels(groups: &[&[String]]) -> Vec<String> {
    groups.iter().flat_map(|g| g.iter().cloned()).collect()
}

fn per_copy(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Stinespring isometry of a Kraus set: row `out·K + k`.
fn dilation(kraus: &[Matrix]) -> Matrix {
    let nk = kraus.len();
    let (rows, cols) = kraus[0].shape();
    Matrix::from_fn(rows * nk, cols, |r, c| kraus[r % nk][(r / nk, c)])
}

/// How the regeneration dilation is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dilation {
    /// `N̂` and `V` as separate registers (`|N||V|` per copy).
    Full,
    /// `N̂V` relabeled to its `|C|`-dimensional support.
    Compressed,
}

/// Evaluate both converse chains and the combined bounds on `code` for the
/// source with decomposition `ki`. `epsilon` defaults to `1 − F`; a value
/// below the achieved infidelity is rejected.
pub fn audit_converse_chain(code: &CodeInstance, ki: &KiDecomposition, epsilon: Option<f64>) -> Result<AuditReport> {
    audit_with(code, ki, epsilon, Dilation::Compressed)
}

pub fn audit_with(
    code: &CodeInstance,
    ki: &KiDecomposition,
    epsilon: Option<f64>,
    dilation_kind: Dilation,
) -> Result<AuditReport> {
    let n = code.n;
    if n > AUDIT_MAX_N {
        return Err(Error::BlockLengthTooLarge { n, max: AUDIT_MAX_N });
    }
    let (c, nd, q) = ki.padded_dims();
    if code.code.local_dim() != c * q {
        return Err(Error::DimMismatch(format!(
            "code on {} letters for |C||Q| = {}",
            code.code.local_dim(),
            c * q
        )));
    }
    let regen = reconstruct_n_channel(ki)?;
    let nk = regen.kraus_ops().len();
    let single = ki.omega_cnqrc().partial_trace(&["C", "N", "Q", "C'"])?;
    let (_, psi) = single.purification_vector("X")?;
    let x = psi.len() / (c * nd * q * c);
    let m = code.code.message_dim();
    let env = 1 + code.code.total_dim() - m;
    let nv_dim = match dilation_kind {
        Dilation::Full => nd * nk,
        Dilation::Compressed => c,
    };
    let global = (c * q * nv_dim).pow(n as u32) * env * (nd * c * x).pow(n as u32);
    if global > AUDIT_CAP {
        return Err(Error::DimTooLarge {
            dim: global,
            cap: AUDIT_CAP,
        });
    }

    let fidelity = code_instance_fidelity(ki, code)?;
    let eps = match epsilon {
        Some(e) if !(0.0..=1.0).contains(&e) => {
            return Err(Error::InvalidState(format!("epsilon {e} outside [0, 1]")));
        }
        Some(e) if e < 1.0 - fidelity - 1e-12 => {
            return Err(Error::InvalidState(format!(
                "epsilon {e} is below the achieved infidelity {}",
                1.0 - fidelity
            )));
        }
        Some(e) => e,
        None => (1.0 - fidelity).max(0.0),
    };
    let delta = continuity_delta(n, eps, c * q);
    let region = rate_region(ki)?;
    let s_cnq_single = region.s_cnq;
    let (s_cq, s_c, s_n_c) = (region.s_cq, region.s_c, region.s_n_given_c);
    let s_n_cq = s_cnq_single - s_cq;
    let nf = n as f64;
    let n_q = code.code.log_m();
    let rate_q = n_q / nf;

    // ψ₀ on (C N Q C' X)^n
    let mut psi0: Option<Pure> = None;
    for i in 1..=n {
        let copy = Pure {
            labels: ["C", "N", "Q", "C'", "X"].iter().map(|l| format!("{l}{i}")).collect(),
            dims: vec![c, nd, q, c, x],
            v: psi.clone(),
        };
        psi0 = Some(match psi0 {
            None => copy,
            Some(acc) => acc.tensor(&copy),
        });
    }
    let psi0 = psi0.expect("n >= 1");
    let (cs, ns, qs, cps) = (per_copy("C", n), per_copy("N", n), per_copy("Q", n), per_copy("C'", n));

    // encoding: (C_i Q_i)_i → M Wc
    let letters: Vec<String> = (1..=n).flat_map(|i| [format!("C{i}"), format!("Q{i}")]).collect();
    let letter_refs: Vec<&str> = letters.iter().map(|s| s.as_str()).collect();
    let enc = code.encoder()?;
    let psi1 = psi0.apply(&letter_refs, enc.matrix(), &[("M".into(), m), ("Wc".into(), env)]);
    let mlab = vec!["M".to_string()];
    let w = labels(&[&["Wc".to_string()], &ns]);

    // decoding: M → (Ĉ_i Q̂_i)_i, then the regeneration dilation per copy
    let dec = code.decoder()?;
    let outs: Vec<(String, usize)> = (1..=n)
        .flat_map(|i| [(format!("Ch{i}"), c), (format!("Qh{i}"), q)])
        .collect();
    let mut psi2 = psi1.apply(&["M"], dec.matrix(), &outs);
    let (chs, qhs) = (per_copy("Ch", n), per_copy("Qh", n));
    let nv = match dilation_kind {
        Dilation::Full => {
            let u = dilation(regen.kraus_ops());
            for i in 1..=n {
                let (ch, qh) = (format!("Ch{i}"), format!("Qh{i}"));
                let outs = [
                    (ch.clone(), c),
                    (format!("Nh{i}"), nd),
                    (qh.clone(), q),
                    (format!("V{i}"), nk),
                ];
                psi2 = psi2.apply(&[&ch, &qh], &u, &outs);
            }
            labels(&[&per_copy("Nh", n), &per_copy("V", n)])
        }
        Dilation::Compressed => {
            // |j,q⟩ ↦ |j,q⟩|j⟩
            let u = Matrix::from_fn(c * q * c, c * q, |r, col| {
                let (jq, t) = (r / c, r % c);
                if jq == col && t == col / q {
                    Complex::new(1.0, 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                }
            });
            for i in 1..=n {
                let (ch, qh) = (format!("Ch{i}"), format!("Qh{i}"));
                let outs = [(ch.clone(), c), (qh.clone(), q), (format!("NV{i}"), c)];
                psi2 = psi2.apply(&[&ch, &qh], &u, &outs);
            }
            per_copy("NV", n)
        }
    };
    let chq = labels(&[&chs, &qhs]);

    // entropies
    let s0 = |g: &[&[String]]| psi0.entropy(&labels(g));
    let s1 = |g: &[&[String]]| psi1.entropy(&labels(g));
    let s2 = |g: &[&[String]]| psi2.entropy(&labels(g));
    let s_m = s1(&[&mlab]);
    let s_cp = s2(&[&cps]);
    let s_w_cp = s2(&[&w, &cps]) - s_cp;
    let s_out = s2(&[&chq, &nv]);
    let s_chq = s2(&[&chq]);
    let s_nv_given_chq = s_out - s_chq;
    let s_nv_given_chqc = s2(&[&chq, &nv, &cps]) - s2(&[&chq, &cps]);
    let s_nv_cp = s2(&[&nv, &cps]) - s_cp;
    let i_nv = s2(&[&nv, &cps]) + s2(&[&chq, &cps]) - s2(&[&nv, &chq, &cps]) - s_cp;
    let i_nvw = s2(&[&nv, &w, &cps]) + s2(&[&chq, &cps]) - s2(&[&nv, &w, &chq, &cps]) - s_cp;
    let s_nv_given_wcp = s2(&[&nv, &w, &cps]) - s2(&[&w, &cps]);
    let s_nvw_cp = s2(&[&nv, &w, &cps]) - s_cp;

    let mut steps = Vec::new();
    // decoding chain (S(B₀) = 0)
    let d_fannes = nf * s_cq + s_nv_given_chq - nf * delta;
    let d_ssa = nf * s_cq + s_nv_given_chqc - nf * delta;
    let d_rewrite = nf * s_cq - i_nv + s_nv_cp - nf * delta;
    let d_final = nf * s_cq - i_nvw + s_nv_cp - nf * delta;
    steps.push(AuditStep::geq("decoding.dimension_bound", n_q, s_m));
    steps.push(AuditStep::geq("decoding.subadditivity", s_m, s_m));
    steps.push(AuditStep::eq("decoding.isometry", s_m, s_out));
    steps.push(AuditStep::eq("decoding.chain_rule", s_out, s_chq + s_nv_given_chq));
    steps.push(AuditStep::geq("decoding.continuity", s_chq + s_nv_given_chq, d_fannes));
    steps.push(AuditStep::geq("decoding.strong_subadditivity", d_fannes, d_ssa));
    steps.push(AuditStep::eq(
        "decoding.conditional_mutual_information",
        d_ssa,
        d_rewrite,
    ));
    steps.push(AuditStep::geq("decoding.data_processing", d_rewrite, d_final));

    // encoding chain (S(A₀) = 0)
    let s_m_given_wcp = s1(&[&mlab, &w, &cps]) - s1(&[&w, &cps]);
    let s_wcp1 = s1(&[&w, &cps]);
    let s_cnq = s0(&[&cs, &ns, &qs]);
    let s_cnqc = s0(&[&cs, &ns, &qs, &cps]);
    let e_final = nf * s_cq + nf * s_n_c - nf * s_c - s_w_cp;
    steps.push(AuditStep::geq("encoding.dimension_bound", n_q, s_m));
    steps.push(AuditStep::geq("encoding.subadditivity", s_m, s_m_given_wcp));
    steps.push(AuditStep::eq(
        "encoding.chain_rule",
        s_m_given_wcp,
        s1(&[&mlab, &w, &cps]) - s_wcp1,
    ));
    steps.push(AuditStep::eq(
        "encoding.isometry",
        s1(&[&mlab, &w, &cps]) - s_wcp1,
        s_cnqc - s_wcp1,
    ));
    steps.push(AuditStep::eq(
        "encoding.independent_entanglement",
        s_cnqc - s_wcp1,
        s_cnqc - s_wcp1,
    ));
    steps.push(AuditStep::eq(
        "encoding.chain_rule_copy",
        s_cnqc - s_wcp1,
        s_cnqc - s_cp - s_w_cp,
    ));
    steps.push(AuditStep::eq(
        "encoding.classical_copy",
        s_cnqc - s_cp - s_w_cp,
        s_cnq - s_cp - s_w_cp,
    ));
    steps.push(AuditStep::eq(
        "encoding.additivity",
        s_cnq - s_cp - s_w_cp,
        nf * s_cq + nf * s_n_cq - nf * s_c - s_w_cp,
    ));
    steps.push(AuditStep::eq(
        "encoding.conditional_independence",
        nf * s_cq + nf * s_n_cq - nf * s_c - s_w_cp,
        e_final,
    ));

    // combined qubit bound and sum-rate bound (E = 0 in the physical realization)
    let comb =
        s_cq - s_c / 2.0 + s_n_c / 2.0 - i_nvw / (2.0 * nf) + s_nv_cp / (2.0 * nf) - s_w_cp / (2.0 * nf) - delta / 2.0;
    let comb_ssa = s_cq - s_c / 2.0 + s_n_c / 2.0 - i_nvw / (2.0 * nf) - s_nvw_cp / (2.0 * nf) - delta / 2.0;
    steps.push(AuditStep::geq(
        "combined.chains_sum",
        rate_q,
        (d_final + e_final) / (2.0 * nf),
    ));
    steps.push(AuditStep::eq(
        "combined.average",
        (d_final + e_final) / (2.0 * nf),
        comb,
    ));
    steps.push(AuditStep::geq(
        "combined.weak_monotonicity",
        s_nv_cp + s_nv_given_wcp,
        0.0,
    ));
    steps.push(AuditStep::geq("combined.qubit_bound", comb, comb_ssa));
    steps.push(AuditStep::geq("sum_rate.decoding_chain", n_q, d_final));
    steps.push(AuditStep::geq(
        "sum_rate.classical_conditioning",
        d_final,
        nf * s_cq - i_nvw - nf * delta,
    ));

    Ok(AuditReport {
        n,
        rate_q,
        fidelity,
        epsilon: eps,
        delta,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ki::{ki_decompose_with, synth_ki_state_with, BlockSpec, KiOptions, SynthOptions};
    use crate::qcore::scalar::cr;
    use crate::sim::protocol::{assisted_code, cq_code};
    use crate::{State, SystemDims};

    fn bell() -> State {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let d = SystemDims::new([("A", 2), ("R", 2)]).unwrap();
        State::from_pure(d, &Vector::from_vec(vec![cr(h), cr(0.0), cr(0.0), cr(h)])).unwrap()
    }

    fn decomp(s: &State) -> KiDecomposition {
        ki_decompose_with(s, &KiOptions::default()).unwrap()
    }

    fn assert_all_hold(r: &AuditReport) {
        for s in &r.steps {
            assert!(
                s.slack >= -SLACK_TOL,
                "{} violated: {} vs {} ({})",
                s.step,
                s.lhs,
                s.rhs,
                s.slack
            );
        }
        r.check(SLACK_TOL).unwrap();
    }

    #[test]
    fn delta_values() {
        assert_eq!(continuity_delta(2, 0.0, 4), 0.0);
        let x = 0.2f64.sqrt();
        assert!((continuity_delta(3, 0.1, 4) - (2.0 * x + binary_entropy(x) / 3.0)).abs() < 1e-15);
        assert!((continuity_delta(2, 0.9, 4) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lossless_code_on_bell_pair() {
        let ki = decomp(&bell());
        for n in 1..=3 {
            let code = cq_code(&ki, n, 1.0).unwrap();
            let r = audit_converse_chain(&code, &ki, None).unwrap();
            assert!((r.fidelity - 1.0).abs() < 1e-9);
            assert!(r.delta.abs() < 1e-6);
            assert_all_hold(&r);
            // the final qubit bound is tight: Q = S(CQ) = 1
            let last = r.steps.iter().find(|s| s.step == "decoding.dimension_bound").unwrap();
            assert!((last.lhs - n as f64).abs() < 1e-12);
        }
    }

    fn mixed_omega() -> KiDecomposition {
        let opts = SynthOptions {
            qr_rank: Some(1),
            ..Default::default()
        };
        synth_ki_state_with(&[BlockSpec::from((1.0, 2, 2))], 2, 4, &opts)
            .unwrap()
            .1
    }

    fn two_block() -> KiDecomposition {
        synth_ki_state_with(
            &[BlockSpec::from((0.6, 2, 1)), BlockSpec::from((0.4, 1, 2))],
            2,
            1,
            &SynthOptions::default(),
        )
        .unwrap()
        .1
    }

    #[test]
    fn lossy_codes_respect_both_chains() {
        let cases = [(two_block(), 2), (mixed_omega(), 2), (mixed_omega(), 3)];
        for (ki, n) in &cases {
            for rate in [0.0, 0.5, 1.0, 1.2] {
                let code = cq_code(ki, *n, rate).unwrap();
                assert_all_hold(&audit_converse_chain(&code, ki, None).unwrap());
            }
            let code = assisted_code(ki, *n, 0.2).unwrap();
            assert_all_hold(&audit_converse_chain(&code, ki, None).unwrap());
        }
    }

    #[test]
    fn compressed_dilation_matches_full() {
        let ki = two_block();
        for (n, rate) in [(1, 0.5), (1, 1.3)] {
            let code = cq_code(&ki, n, rate).unwrap();
            let a = audit_with(&code, &ki, None, Dilation::Full).unwrap();
            let b = audit_with(&code, &ki, None, Dilation::Compressed).unwrap();
            for (x, y) in a.steps.iter().zip(&b.steps) {
                assert_eq!(x.step, y.step);
                assert!(
                    (x.lhs - y.lhs).abs() < 1e-9 && (x.rhs - y.rhs).abs() < 1e-9,
                    "{}",
                    x.step
                );
            }
        }
    }

    #[test]
    fn weak_monotonicity_step_is_present_and_holds() {
        let ki =
            decomp(&State::diagonal(SystemDims::new([("A", 2), ("R", 2)]).unwrap(), &[0.5, 0.0, 0.0, 0.5]).unwrap());
        let code = cq_code(&ki, 2, 0.5).unwrap();
        let r = audit_converse_chain(&code, &ki, None).unwrap();
        let s = r.steps.iter().find(|s| s.step == "combined.weak_monotonicity").unwrap();
        assert!(s.slack >= -SLACK_TOL);
        assert!(r.fidelity < 1.0 && r.delta > 0.0);
        assert_all_hold(&r);
    }

    #[test]
    fn caps_and_epsilon_validation() {
        let ki = decomp(&bell());
        let code = cq_code(&ki, 4, 1.0).unwrap();
        assert!(matches!(
            audit_converse_chain(&code, &ki, None),
            Err(Error::BlockLengthTooLarge { .. })
        ));
        let lossy = cq_code(&ki, 2, 0.5).unwrap();
        assert!(audit_converse_chain(&lossy, &ki, Some(0.0)).is_err());
        let r = audit_converse_chain(&lossy, &ki, Some(0.9)).unwrap();
        assert_eq!(r.epsilon, 0.9);
        let csv = r.to_csv();
        assert!(csv.starts_with("step,lhs,rhs,slack\ndelta,"));
        assert_eq!(csv.lines().count(), 2 + r.steps.len());
    }
}
