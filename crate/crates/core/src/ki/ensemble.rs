//! Reduction of a bipartite source to an ensemble on `A` by measuring `R`.

use num_complex::Complex;

use crate::qcore::linalg;
use crate::qcore::measures::trace_distance;
use crate::{Error, Matrix, Povm, Result, State};

/// Weighted family of states on a single system.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    weights: Vec<f64>,
    states: Vec<Matrix>,
}

/// Outcomes with smaller probability are dropped.
pub const OUTCOME_CUTOFF: f64 = 1e-12;

impl Ensemble {
    pub fn new(weights: Vec<f64>, states: Vec<Matrix>) -> Result<Self> {
        if weights.is_empty() || weights.len() != states.len() {
            return Err(Error::InvalidState(format!(
                "ensemble with {} weights and {} states",
                weights.len(),
                states.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidState(format!("ensemble weights sum to {total}")));
        }
        let d = states[0].nrows();
        for (y, s) in states.iter().enumerate() {
            if s.nrows() != d || s.ncols() != d {
                return Err(Error::DimMismatch(format!(
                    "ensemble state {y} is {}x{}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            let st = State::new_unchecked(crate::SystemDims::single("A", d)?, s.clone())?;
            st.validate(1e-10)
                .map_err(|e| Error::InvalidState(format!("ensemble state {y}: {e}")))?;
        }
        Ok(Self { weights, states })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[Matrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].nrows()
    }

    /// `Σ_y q(y) ρ_y`.
    pub fn average(&self) -> Matrix {
        let d = self.dim();
        let mut avg = Matrix::zeros(d, d);
        for (q, s) in self.weights.iter().zip(&self.states) {
            avg += s.map(|z| z * *q);
        }
        avg
    }

    /// True when all members coincide within trace distance `tol`.
    pub fn is_constant(&self, tol: f64) -> bool {
        let d = crate::SystemDims::single("A", self.dim()).expect("positive dimension");
        let first = State::new_unchecked(d.clone(), self.states[0].clone()).expect("shape");
        self.states.iter().all(|s| {
            let other = State::new_unchecked(d.clone(), s.clone()).expect("shape");
            trace_distance(&first, &other).expect("same dims") <= tol
        })
    }
}

/// `q(y) = Tr[ρ(1⊗M_y)]`, `ρ_y = Tr_R[ρ(1⊗M_y)]/q(y)`.
pub fn measure_reference(rho_ar: &State, povm: &Povm) -> Result<Ensemble> {
    let s = rho_ar.reorder(&["A", "R"])?;
    let da = s.dims().dim_of("A")?;
    let dr = s.dims().dim_of("R")?;
    if povm.dims().total() != dr {
        return Err(Error::DimMismatch(format!(
            "POVM on dimension {} applied to R of dimension {dr}",
            povm.dims().total()
        )));
    }
    let m = s.matrix();
    let mut weights = Vec::new();
    let mut states = Vec::new();
    for el in povm.elements() {
        // Σ_{r,r'} ρ[(a,r),(a',r')] M[r',r]
        let cond = Matrix::from_fn(da, da, |a, b| {
            let mut acc = Complex::new(0.0, 0.0);
            for r in 0..dr {
                for r2 in 0..dr {
                    acc += m[(a * dr + r, b * dr + r2)] * el[(r2, r)];
                }
            }
            acc
        });
        let q = cond.trace().re;
        if q < OUTCOME_CUTOFF {
            continue;
        }
        weights.push(q);
        states.push(linalg::hermitize(&cond.map(|z| z / q)));
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ensemble::new(weights, states)
}
