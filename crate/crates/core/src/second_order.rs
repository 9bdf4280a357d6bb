//! Spoke-diagram predictions for covariances of traces of cyclically
//! alternating centered words.

use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// First-order inputs `φ(a_i b_j)` and `φ(a_i b_jᵗ)`, stored 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderTable<T> {
    pub m: usize,
    pub n: usize,
    pub phi: Vec<Vec<T>>,
    pub phi_t: Vec<Vec<T>>,
}

impl<T: Clone + Zero> FirstOrderTable<T> {
    pub fn new(phi: Vec<Vec<T>>, phi_t: Vec<Vec<T>>) -> Result<Self> {
        let m = phi.len();
        let n = phi.first().map_or(0, Vec::len);
        let shaped = |t: &Vec<Vec<T>>| t.len() == m && t.iter().all(|r| r.len() == n);
        if m == 0 || n == 0 || !shaped(&phi) || !shaped(&phi_t) {
            return Err(Error::InvalidInput("first-order tables must be nonempty m×n".into()));
        }
        Ok(FirstOrderTable { m, n, phi, phi_t })
    }

    /// A table with every `φ(a_i b_jᵗ)` zero.
    pub fn complex_only(phi: Vec<Vec<T>>) -> Result<Self> {
        let phi_t = phi
            .iter()
            .map(|r| vec![T::zero(); r.len()])
            .collect();
        Self::new(phi, phi_t)
    }

    /// Rotates the `a` sequence: row `i` becomes old row `i + shift`.
    pub fn rotate_a(&self, shift: usize) -> Self {
        let rot = |t: &Vec<Vec<T>>| (0..self.m).map(|i| t[(i + shift) % self.m].clone()).collect();
        FirstOrderTable {
            m: self.m,
            n: self.n,
            phi: rot(&self.phi),
            phi_t: rot(&self.phi_t),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderPrediction<T> {
    pub value: T,
    pub spoke_terms: Vec<T>,
    pub reversed_terms: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Complex,
    Real,
}

/// 1-based cyclic reduction of `k` into `1..=n`.
fn cyc(k: i64, n: usize) -> usize {
    (k - 1).rem_euclid(n as i64) as usize
}

fn spoke_terms<T: Clone + Zero + One>(tbl: &FirstOrderTable<T>) -> Vec<T> {
    let n = tbl.n;
    (1..=n as i64)
        .map(|k| {
            (1..=n as i64).fold(T::one(), |acc, i| {
                acc * tbl.phi[i as usize - 1][cyc(k - i, n)].clone()
            })
        })
        .collect()
}

fn reversed_terms<T: Clone + Zero + One>(tbl: &FirstOrderTable<T>) -> Vec<T> {
    let n = tbl.n;
    (1..=n as i64)
        .map(|k| {
            (1..=n as i64).fold(T::one(), |acc, i| {
                acc * tbl.phi_t[i as usize - 1][cyc(k + i, n)].clone()
            })
        })
        .collect()
}

fn sum<T: Clone + Zero>(xs: &[T]) -> T {
    xs.iter().cloned().fold(T::zero(), |a, b| a + b)
}

fn zero_prediction<T: Zero>() -> SecondOrderPrediction<T> {
    SecondOrderPrediction {
        value: T::zero(),
        spoke_terms: Vec::new(),
        reversed_terms: Vec::new(),
    }
}

/// `δ_{m,n} Σ_k ∏_i φ(a_i b_{k-i})`.
pub fn complex_spoke_prediction<T: Clone + Zero + One>(tbl: &FirstOrderTable<T>) -> Result<SecondOrderPrediction<T>> {
    if tbl.m == 1 && tbl.n == 1 {
        return Err(Error::NoReduction);
    }
    if tbl.m != tbl.n {
        return Ok(zero_prediction());
    }
    let spoke = spoke_terms(tbl);
    Ok(SecondOrderPrediction {
        value: sum(&spoke),
        spoke_terms: spoke,
        reversed_terms: Vec::new(),
    })
}

/// The complex sum plus `Σ_k ∏_i φ(a_i b_{k+i}ᵗ)`.
pub fn real_spoke_prediction<T: Clone + Zero + One>(tbl: &FirstOrderTable<T>) -> Result<SecondOrderPrediction<T>> {
    if tbl.m == 1 && tbl.n == 1 {
        return Err(Error::NoReduction);
    }
    if tbl.m != tbl.n {
        return Ok(zero_prediction());
    }
    let spoke = spoke_terms(tbl);
    let reversed = reversed_terms(tbl);
    Ok(SecondOrderPrediction {
        value: sum(&spoke) + sum(&reversed),
        spoke_terms: spoke,
        reversed_terms: reversed,
    })
}

/// Extension for single letters (`m = n = 1`): `φ(a_1 b_1) + φ(a_1 b_1ᵗ)`.
pub fn real_single_letter_prediction<T: Clone + Zero + One>(tbl: &FirstOrderTable<T>) -> Result<SecondOrderPrediction<T>> {
    if tbl.m != 1 || tbl.n != 1 {
        return Err(Error::InvalidInput("single-letter mode needs m = n = 1".into()));
    }
    let s = tbl.phi[0][0].clone();
    let r = tbl.phi_t[0][0].clone();
    Ok(SecondOrderPrediction {
        value: s.clone() + r.clone(),
        spoke_terms: vec![s],
        reversed_terms: vec![r],
    })
}

/// Prediction in the given mode; `m = n = 1` in real mode uses the
/// single-letter extension.
pub fn predict<T: Clone + Zero + One>(tbl: &FirstOrderTable<T>, mode: Mode) -> Result<SecondOrderPrediction<T>> {
    match mode {
        Mode::Complex => complex_spoke_prediction(tbl),
        Mode::Real if tbl.m == 1 && tbl.n == 1 => real_single_letter_prediction(tbl),
        Mode::Real => real_spoke_prediction(tbl),
    }
}

/// `cov - prediction`.
pub fn freeness_residual<T>(cov: T, tbl: &FirstOrderTable<T>, mode: Mode) -> Result<T>
where
    T: Clone + Zero + One + std::ops::Sub<Output = T>,
{
    Ok(cov - predict(tbl, mode)?.value)
}
