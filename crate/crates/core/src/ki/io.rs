//! JSON encoding of a [`KiDecomposition`].

use serde::Serialize;
use serde_json::Value;

use super::decomposition::{verify, KiBlock, KiDecomposition, Tolerances, Verification};
use crate::qcore::io::{
    as_object, get, get_array, get_f64, get_usize, matrix_parts, parse_json, parse_matrix, MatrixParts, F17,
};
use crate::{Error, Result};

#[derive(Serialize)]
struct BlockFile {
    p: F17,
    q_dim: usize,
    n_dim: usize,
    q_slots: Vec<usize>,
    n_slots: Vec<usize>,
    omega_re: Vec<Vec<F17>>,
    omega_im: Vec<Vec<F17>>,
    rho_qr_re: Vec<Vec<F17>>,
    rho_qr_im: Vec<Vec<F17>>,
    isometry_re: Vec<Vec<F17>>,
    isometry_im: Vec<Vec<F17>>,
}

#[derive(Serialize)]
struct TolFile {
    fidelity: F17,
    structure: F17,
    isometry: F17,
}

#[derive(Serialize)]
struct VerFile {
    reconstruction_fidelity: F17,
    conditional_mutual_info: F17,
    product_defect: F17,
    coherence: F17,
    isometry_defect: F17,
}

#[derive(Serialize)]
struct DecompFile {
    dim_a: usize,
    dim_r: usize,
    padded: [(&'static str, usize); 3],
    seed: u64,
    tolerances: TolFile,
    verification: VerFile,
    blocks: Vec<BlockFile>,
    u_ki_re: Vec<Vec<F17>>,
    u_ki_im: Vec<Vec<F17>>,
    support_re: Vec<Vec<F17>>,
    support_im: Vec<Vec<F17>>,
}

pub fn decomposition_to_json(ki: &KiDecomposition) -> String {
    let blocks = ki
        .blocks
        .iter()
        .map(|b| {
            let MatrixParts {
                re: omega_re,
                im: omega_im,
            } = matrix_parts(&b.omega);
            let MatrixParts {
                re: rho_qr_re,
                im: rho_qr_im,
            } = matrix_parts(&b.rho_qr);
            let MatrixParts {
                re: isometry_re,
                im: isometry_im,
            } = matrix_parts(&b.isometry);
            BlockFile {
                p: F17(b.p),
                q_dim: b.q_dim,
                n_dim: b.n_dim,
                q_slots: b.q_slots.clone(),
                n_slots: b.n_slots.clone(),
                omega_re,
                omega_im,
                rho_qr_re,
                rho_qr_im,
                isometry_re,
                isometry_im,
            }
        })
        .collect();
    let u = matrix_parts(&ki.u_ki);
    let s = matrix_parts(&ki.support);
    let v = ki.verification;
    let file = DecompFile {
        dim_a: ki.dim_a,
        dim_r: ki.dim_r,
        padded: [("C", ki.c_dim), ("N", ki.n_dim), ("Q", ki.q_dim)],
        seed: ki.seed,
        tolerances: TolFile {
            fidelity: F17(ki.tolerances.fidelity),
            structure: F17(ki.tolerances.structure),
            isometry: F17(ki.tolerances.isometry),
        },
        verification: VerFile {
            reconstruction_fidelity: F17(v.reconstruction_fidelity),
            conditional_mutual_info: F17(v.conditional_mutual_info),
            product_defect: F17(v.product_defect),
            coherence: F17(v.coherence),
            isometry_defect: F17(v.isometry_defect),
        },
        blocks,
        u_ki_re: u.re,
        u_ki_im: u.im,
        support_re: s.re,
        support_im: s.im,
    };
    serde_json::to_string_pretty(&file).expect("finite decomposition entries")
}

fn slots(obj: &serde_json::Map<String, Value>, key: &str, path: &str, len: usize, bound: usize) -> Result<Vec<usize>> {
    let field = format!("{path}{key}");
    let arr = get_array(obj, key, &field)?;
    if arr.len() != len {
        return Err(Error::Parse(format!(
            "field `{field}`: expected {len} entries, found {}",
            arr.len()
        )));
    }
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_u64()
                .map(|x| x as usize)
                .filter(|&x| x < bound)
                .ok_or_else(|| Error::Parse(format!("field `{field}[{i}]`: expected an index below {bound}")))
        })
        .collect()
}

pub fn decomposition_from_json(text: &str) -> Result<KiDecomposition> {
    let root = parse_json(text)?;
    let obj = as_object(&root, "<root>")?;
    let dim_a = get_usize(obj, "dim_a", "dim_a")?;
    let dim_r = get_usize(obj, "dim_r", "dim_r")?;
    if dim_a == 0 || dim_r == 0 {
        return Err(Error::Parse(
            "field `dim_a`/`dim_r`: dimensions must be positive".into(),
        ));
    }
    let padded = get_array(obj, "padded", "padded")?;
    let mut pads = [0usize; 3];
    for (i, (want, slot)) in ["C", "N", "Q"].iter().zip(pads.iter_mut()).enumerate() {
        let f = format!("padded[{i}]");
        let pair = padded
            .get(i)
            .and_then(|v| v.as_array())
            .filter(|p| p.len() == 2 && p[0].as_str() == Some(want))
            .ok_or_else(|| Error::Parse(format!("field `{f}`: expected [\"{want}\", dim]")))?;
        *slot = pair[1]
            .as_u64()
            .filter(|&d| d >= 1)
            .ok_or_else(|| Error::Parse(format!("field `{f}[1]`: expected a positive integer")))?
            as usize;
    }
    let [c_dim, n_dim, q_dim] = pads;
    let seed = get(obj, "seed", "seed")?
        .as_u64()
        .ok_or_else(|| Error::Parse("field `seed`: expected a nonnegative integer".into()))?;
    let t = as_object(get(obj, "tolerances", "tolerances")?, "tolerances")?;
    let tolerances = Tolerances {
        fidelity: get_f64(t, "fidelity", "tolerances.fidelity")?,
        structure: get_f64(t, "structure", "tolerances.structure")?,
        isometry: get_f64(t, "isometry", "tolerances.isometry")?,
    };
    let v = as_object(get(obj, "verification", "verification")?, "verification")?;
    let verification = Verification {
        reconstruction_fidelity: get_f64(v, "reconstruction_fidelity", "verification.reconstruction_fidelity")?,
        conditional_mutual_info: get_f64(v, "conditional_mutual_info", "verification.conditional_mutual_info")?,
        product_defect: get_f64(v, "product_defect", "verification.product_defect")?,
        coherence: get_f64(v, "coherence", "verification.coherence")?,
        isometry_defect: get_f64(v, "isometry_defect", "verification.isometry_defect")?,
    };
    let arr = get_array(obj, "blocks", "blocks")?;
    if arr.len() != c_dim {
        return Err(Error::Parse(format!(
            "field `blocks`: expected {c_dim} blocks, found {}",
            arr.len()
        )));
    }
    let mut blocks = Vec::with_capacity(arr.len());
    for (j, bv) in arr.iter().enumerate() {
        let path = format!("blocks[{j}].");
        let b = as_object(bv, &format!("blocks[{j}]"))?;
        let p = get_f64(b, "p", &format!("{path}p"))?;
        let q = get_usize(b, "q_dim", &format!("{path}q_dim"))?;
        let m = get_usize(b, "n_dim", &format!("{path}n_dim"))?;
        if q == 0 || m == 0 {
            return Err(Error::Parse(format!(
                "field `{path}q_dim`/`n_dim`: dimensions must be positive"
            )));
        }
        blocks.push(KiBlock {
            p,
            q_dim: q,
            n_dim: m,
            q_slots: slots(b, "q_slots", &path, q, q_dim)?,
            n_slots: slots(b, "n_slots", &path, m, n_dim)?,
            omega: parse_matrix(b, "omega", &path, m, m)?,
            rho_qr: parse_matrix(b, "rho_qr", &path, q * dim_r, q * dim_r)?,
            isometry: parse_matrix(b, "isometry", &path, q * m, dim_a)?,
        });
    }
    let mut ki = KiDecomposition::from_slotted_blocks(dim_a, dim_r, blocks, n_dim, q_dim, seed, tolerances)?;
    ki.support = parse_matrix(obj, "support", "", dim_a, dim_a)?;
    let stored_u = parse_matrix(obj, "u_ki", "", c_dim * n_dim * q_dim, dim_a)?;
    let gap = crate::qcore::linalg::max_abs(&(&stored_u - &ki.u_ki));
    if gap > 1e-12 {
        return Err(Error::Parse(format!(
            "field `u_ki_re`: disagrees with the block isometries by {gap:.3e}"
        )));
    }
    ki.verification = verification;
    ki.verification.isometry_defect = ki.isometry_defect();
    verify(&ki)?;
    Ok(ki)
}
