//! JSON encoding of labeled states and matrices.
//!
//! Matrices are stored as two row-major arrays `*_re` and `*_im`; floats are
//! written with 17 significant digits so files round-trip bit-exactly.

use num_complex::Complex;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use serde_json::{Map, Value};

use super::dims::SystemDims;
use super::error::{Error, Result};
use super::scalar::CMat;
use super::state::MultipartiteState;

/// Float that serializes with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

/// `x` with 17 significant digits (`d.dddddddddddddddde±x`).
pub fn fmt_f17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite float {}", self.0)));
        }
        let raw = RawValue::from_string(fmt_f17(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

/// Row-major real and imaginary parts of a matrix.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixParts {
    pub re: Vec<Vec<F17>>,
    pub im: Vec<Vec<F17>>,
}

pub fn matrix_parts(m: &CMat<f64>) -> MatrixParts {
    let rows = |f: fn(&Complex<f64>) -> f64| {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| F17(f(&m[(i, j)]))).collect())
            .collect()
    };
    MatrixParts {
        re: rows(|z| z.re),
        im: rows(|z| z.im),
    }
}

#[derive(Serialize)]
struct StateFile<'a> {
    dims: &'a [(String, usize)],
    matrix_re: Vec<Vec<F17>>,
    matrix_im: Vec<Vec<F17>>,
}

pub fn state_to_json(s: &MultipartiteState<f64>) -> String {
    let parts = matrix_parts(s.matrix());
    let file = StateFile {
        dims: s.dims().as_pairs(),
        matrix_re: parts.re,
        matrix_im: parts.im,
    };
    serde_json::to_string_pretty(&file).expect("finite state entries")
}

fn parse_err(field: &str, what: impl std::fmt::Display) -> Error {
    Error::Parse(format!("field `{field}`: {what}"))
}

pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))
}

pub fn as_object<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| parse_err(field, "expected an object"))
}

pub fn get<'a>(obj: &'a Map<String, Value>, key: &str, field: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| parse_err(field, "missing"))
}

pub fn get_f64(obj: &Map<String, Value>, key: &str, field: &str) -> Result<f64> {
    let v = get(obj, key, field)?;
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| parse_err(field, "expected a finite number"))
}

pub fn get_usize(obj: &Map<String, Value>, key: &str, field: &str) -> Result<usize> {
    let v = get(obj, key, field)?;
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| parse_err(field, "expected a nonnegative integer"))
}

pub fn get_array<'a>(obj: &'a Map<String, Value>, key: &str, field: &str) -> Result<&'a Vec<Value>> {
    get(obj, key, field)?
        .as_array()
        .ok_or_else(|| parse_err(field, "expected an array"))
}

/// Parse `[["A",2],["R",2]]`.
pub fn parse_dims(v: &Value, field: &str) -> Result<SystemDims> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(field, "expected an array of [label, dim] pairs"))?;
    let mut pairs = Vec::with_capacity(arr.len());
    for (i, item) in arr.iter().enumerate() {
        let f = format!("{field}[{i}]");
        let pair = item
            .as_array()
            .filter(|p| p.len() == 2)
            .ok_or_else(|| parse_err(&f, "expected [label, dim]"))?;
        let label = pair[0]
            .as_str()
            .ok_or_else(|| parse_err(&format!("{f}[0]"), "expected a string label"))?;
        let dim = pair[1]
            .as_u64()
            .filter(|&d| d >= 1)
            .ok_or_else(|| parse_err(&format!("{f}[1]"), "expected a positive integer dimension"))?;
        pairs.push((label.to_string(), dim as usize));
    }
    SystemDims::new(pairs).map_err(|e| parse_err(field, e))
}

fn parse_real_rows(v: &Value, field: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(field, "expected an array of rows"))?;
    if arr.len() != rows {
        return Err(parse_err(field, format!("expected {rows} rows, found {}", arr.len())));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for (i, row) in arr.iter().enumerate() {
        let f = format!("{field}[{i}]");
        let r = row.as_array().ok_or_else(|| parse_err(&f, "expected an array"))?;
        if r.len() != cols {
            return Err(parse_err(&f, format!("expected {cols} entries, found {}", r.len())));
        }
        for (j, x) in r.iter().enumerate() {
            let val = x
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(&format!("{f}[{j}]"), "expected a finite number"))?;
            out.push(val);
        }
    }
    Ok(out)
}

/// Read `{prefix}_re` / `{prefix}_im` as a `rows × cols` matrix; a missing
/// imaginary part means a real matrix.
pub fn parse_matrix(obj: &Map<String, Value>, prefix: &str, path: &str, rows: usize, cols: usize) -> Result<CMat<f64>> {
    let re_key = format!("{prefix}_re");
    let im_key = format!("{prefix}_im");
    let re_field = format!("{path}{re_key}");
    let re = parse_real_rows(get(obj, &re_key, &re_field)?, &re_field, rows, cols)?;
    let im = match obj.get(&im_key) {
        Some(v) => parse_real_rows(v, &format!("{path}{im_key}"), rows, cols)?,
        None => vec![0.0; rows * cols],
    };
    Ok(CMat::<f64>::from_fn(rows, cols, |i, j| {
        Complex::new(re[i * cols + j], im[i * cols + j])
    }))
}

pub fn state_from_value(v: &Value, path: &str) -> Result<MultipartiteState<f64>> {
    let obj = as_object(v, if path.is_empty() { "<root>" } else { path })?;
    let dims_field = format!("{path}dims");
    let dims = parse_dims(get(obj, "dims", &dims_field)?, &dims_field)?;
    let n = dims.total();
    let m = parse_matrix(obj, "matrix", path, n, n)?;
    MultipartiteState::new(dims, m)
}

pub fn state_from_json(text: &str) -> Result<MultipartiteState<f64>> {
    state_from_value(&parse_json(text)?, "")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::random::random_state;

    #[test]
    fn round_trip_is_bit_exact() {
        let d = SystemDims::new([("A", 2), ("R", 3)]).unwrap();
        let s = random_state::<f64>(&d, 4, 11).unwrap();
        let back = state_from_json(&state_to_json(&s)).unwrap();
        assert_eq!(back.dims(), s.dims());
        assert_eq!(back.matrix().as_slice(), s.matrix().as_slice());
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f17(0.1), "1.0000000000000001e-1");
        assert_eq!(serde_json::to_string(&F17(1.0)).unwrap(), "1.0000000000000000e0");
    }

    #[test]
    fn errors_name_the_field() {
        let err = state_from_json(r#"{"dims": [["A", 2]], "matrix_re": [[1, 0], [0]]}"#).unwrap_err();
        assert!(err.to_string().contains("matrix_re[1]"), "{err}");
        let err = state_from_json(r#"{"matrix_re": []}"#).unwrap_err();
        assert!(err.to_string().contains("`dims`"), "{err}");
        let err = state_from_json(r#"{"dims": [["A", 0]], "matrix_re": []}"#).unwrap_err();
        assert!(err.to_string().contains("dims[0][1]"), "{err}");
        let err = state_from_json(r#"{"dims": [["A", 1]], "matrix_re": [["x"]]}"#).unwrap_err();
        assert!(err.to_string().contains("matrix_re[0][0]"), "{err}");
    }

    #[test]
    fn invalid_state_rejected() {
        let err = state_from_json(r#"{"dims": [["A", 2]], "matrix_re": [[1, 0], [0, 1]]}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)));
    }
}
