//! Classical multivariate moments and cumulants over set partitions, for
//! exact rationals and for floating samples alike.

use std::collections::HashMap;

use num_complex::Complex64;
use num_traits::{FromPrimitive, Num};

use crate::combinat::{enumerate_partitions, moebius_partition_to_top, SetPartition};
use crate::error::{Error, Result};

/// Scalars the transforms run over.
pub trait Scalar: Num + Clone + FromPrimitive {}
impl<T: Num + Clone + FromPrimitive> Scalar for T {}

/// Values keyed by multisets of variable indices (stored sorted).
#[derive(Clone, Debug, PartialEq)]
pub struct Functional<T> {
    values: HashMap<Vec<usize>, T>,
}

/// `E(X_{i_1} ⋯ X_{i_r})` for each index tuple.
pub type MomentFunctional<T> = Functional<T>;
/// `k_r(X_{i_1}, …, X_{i_r})` for each index tuple.
pub type CumulantFunctional<T> = Functional<T>;

impl<T: Clone> Default for Functional<T> {
    fn default() -> Self {
        Functional {
            values: HashMap::new(),
        }
    }
}

impl<T: Clone> Functional<T> {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(tuple: &[usize]) -> Vec<usize> {
        let mut k = tuple.to_vec();
        k.sort_unstable();
        k
    }

    pub fn insert(&mut self, tuple: &[usize], value: T) {
        self.values.insert(Self::key(tuple), value);
    }

    pub fn get(&self, tuple: &[usize]) -> Result<T> {
        self.values
            .get(&Self::key(tuple))
            .cloned()
            .ok_or_else(|| Error::MissingOrder(tuple.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &T)> {
        self.values.iter()
    }

    /// Builds a functional for every multiset up to `max_order` over
    /// `vars` variables.
    pub fn from_fn(vars: usize, max_order: usize, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut out = Self::new();
        for t in multisets(vars, max_order) {
            let v = f(&t);
            out.insert(&t, v);
        }
        out
    }
}

/// All sorted tuples over `0..vars` of length `1..=max_order`.
pub fn multisets(vars: usize, max_order: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, vars: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for v in start..vars {
            cur.push(v);
            rec(v, vars, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, vars, max_order, &mut Vec::new(), &mut out);
    out
}

fn block_tuple(tuple: &[usize], block: &[usize]) -> Vec<usize> {
    block.iter().map(|&k| tuple[k - 1]).collect()
}

/// `E_π(X_1, …, X_R) = ∏_{V ∈ π} E(∏_{j ∈ V} X_j)`.
pub fn e_pi<T: Scalar>(moments: &MomentFunctional<T>, pi: &SetPartition, tuple: &[usize]) -> Result<T> {
    if pi.size() != tuple.len() {
        return Err(Error::DimensionMismatch {
            expected: tuple.len(),
            found: pi.size(),
        });
    }
    let mut out = T::one();
    for b in pi.blocks() {
        out = out * moments.get(&block_tuple(tuple, b))?;
    }
    Ok(out)
}

/// `E(X_1 ⋯ X_r) = Σ_{𝒰 ∈ P(r)} k_𝒰(X_1, …, X_r)`.
pub fn cumulants_to_moments<T: Scalar>(k: &CumulantFunctional<T>, tuple: &[usize]) -> Result<T> {
    let mut total = T::zero();
    for pi in enumerate_partitions(tuple.len())? {
        total = total + e_pi(k, &pi, tuple)?;
    }
    Ok(total)
}

/// `k_R(X_1, …, X_R) = Σ_{π ∈ P(R)} µ(π, 1_R) E_π(X_1, …, X_R)`.
pub fn moments_to_cumulants<T: Scalar>(moments: &MomentFunctional<T>, tuple: &[usize]) -> Result<T> {
    let mut total = T::zero();
    for pi in enumerate_partitions(tuple.len())? {
        let mu = T::from_i64(moebius_partition_to_top(&pi)).expect("integer fits");
        total = total + mu * e_pi(moments, &pi, tuple)?;
    }
    Ok(total)
}

/// Applies `moments_to_cumulants` to every key of `moments`.
pub fn all_cumulants<T: Scalar>(moments: &MomentFunctional<T>) -> Result<CumulantFunctional<T>> {
    let mut out = Functional::new();
    for (t, _) in moments.iter() {
        out.insert(t, moments_to_cumulants(moments, t)?);
    }
    Ok(out)
}

/// Plug-in cumulant estimates with batch-means standard errors.
#[derive(Clone, Debug)]
pub struct EmpiricalCumulants {
    pub cumulants: CumulantFunctional<Complex64>,
    /// Standard errors of the order-1 and order-2 estimates, real and
    /// imaginary parts estimated separately.
    pub std_errors: HashMap<Vec<usize>, Complex64>,
    pub replicas: usize,
}

impl EmpiricalCumulants {
    pub fn get(&self, tuple: &[usize]) -> Result<Complex64> {
        self.cumulants.get(tuple)
    }

    pub fn std_error(&self, tuple: &[usize]) -> Option<Complex64> {
        let mut k = tuple.to_vec();
        k.sort_unstable();
        self.std_errors.get(&k).copied()
    }
}

pub const MAX_EMPIRICAL_ORDER: usize = 4;
const BATCHES: usize = 10;

fn sample_moments(samples: &[Vec<Complex64>], range: std::ops::Range<usize>, max_order: usize) -> MomentFunctional<Complex64> {
    let count = range.len() as f64;
    Functional::from_fn(samples.len(), max_order, |t| {
        let mut acc = Complex64::new(0.0, 0.0);
        for s in range.clone() {
            let mut prod = Complex64::new(1.0, 0.0);
            for &v in t {
                prod *= samples[v][s];
            }
            acc += prod;
        }
        acc / count
    })
}

/// `samples[v][s]` is the value of variable `v` in replica `s`.
pub fn empirical_cumulants(samples: &[Vec<Complex64>], max_order: usize) -> Result<EmpiricalCumulants> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if max_order == 0 || max_order > MAX_EMPIRICAL_ORDER {
        return Err(Error::InvalidInput(format!(
            "cumulant order must lie in 1..={MAX_EMPIRICAL_ORDER}"
        )));
    }
    let s = samples[0].len();
    if let Some(bad) = samples.iter().find(|v| v.len() != s) {
        return Err(Error::DimensionMismatch {
            expected: s,
            found: bad.len(),
        });
    }
    if s < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: s });
    }
    let moments = sample_moments(samples, 0..s, max_order);
    let cumulants = all_cumulants(&moments)?;
    let mut std_errors = HashMap::new();
    if s >= BATCHES * 2 {
        let size = s / BATCHES;
        let low: Vec<CumulantFunctional<Complex64>> = (0..BATCHES)
            .map(|b| all_cumulants(&sample_moments(samples, b * size..(b + 1) * size, max_order.min(2))))
            .collect::<Result<_>>()?;
        for t in multisets(samples.len(), max_order.min(2)) {
            let vals: Vec<Complex64> = low.iter().map(|c| c.get(&t)).collect::<Result<_>>()?;
            let se = |f: fn(&Complex64) -> f64| {
                let xs: Vec<f64> = vals.iter().map(f).collect();
                let mean = xs.iter().sum::<f64>() / BATCHES as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
                (var / BATCHES as f64).sqrt()
            };
            std_errors.insert(t, Complex64::new(se(|z| z.re), se(|z| z.im)));
        }
    }
    Ok(EmpiricalCumulants {
        cumulants,
        std_errors,
        replicas: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use num_rational::BigRational;

    #[test]
    fn low_order_moments_from_cumulants() {
        let mut k: CumulantFunctional<BigRational> = Functional::new();
        k.insert(&[0], rat(2, 1));
        k.insert(&[1], rat(3, 1));
        k.insert(&[0, 1], rat(5, 1));
        assert_eq!(cumulants_to_moments(&k, &[0]).unwrap(), rat(2, 1));
        assert_eq!(cumulants_to_moments(&k, &[0, 1]).unwrap(), rat(11, 1));
        let mut k3: CumulantFunctional<BigRational> = Functional::new();
        for t in multisets(3, 3) {
            let v = if t.len() == 1 { rat(0, 1) } else { rat(t.len() as i64, 7) };
            k3.insert(&t, v);
        }
        assert_eq!(cumulants_to_moments(&k3, &[0, 1, 2]).unwrap(), k3.get(&[0, 1, 2]).unwrap());
    }

    #[test]
    fn missing_order() {
        let k: CumulantFunctional<BigRational> = Functional::new();
        assert!(matches!(cumulants_to_moments(&k, &[0]), Err(Error::MissingOrder(_))));
    }

    #[test]
    fn gaussian_and_constant() {
        let mut m: MomentFunctional<BigRational> = Functional::new();
        for (r, v) in [(1, 0), (2, 1), (3, 0), (4, 3)] {
            m.insert(&vec![0; r], rat(v, 1));
        }
        assert_eq!(moments_to_cumulants(&m, &[0, 0]).unwrap(), rat(1, 1));
        assert_eq!(moments_to_cumulants(&m, &[0, 0, 0]).unwrap(), rat(0, 1));
        assert_eq!(moments_to_cumulants(&m, &[0, 0, 0, 0]).unwrap(), rat(0, 1));
        let c = rat(5, 3);
        let mut m: MomentFunctional<BigRational> = Functional::new();
        for r in 1..=4 {
            m.insert(&vec![0; r], num_traits::pow(c.clone(), r));
        }
        assert_eq!(moments_to_cumulants(&m, &[0]).unwrap(), c);
        for r in 2..=4 {
            assert_eq!(moments_to_cumulants(&m, &vec![0; r]).unwrap(), rat(0, 1));
        }
    }

    #[test]
    fn e_pi_examples() {
        let m: MomentFunctional<BigRational> =
            Functional::from_fn(5, 5, |t| rat(t.iter().map(|&x| x as i64 + 2).product(), 1) + rat(1, 1));
        let pi = SetPartition::new(5, vec![vec![1, 3, 5], vec![2, 4]]).unwrap();
        let tuple = [0, 1, 2, 3, 4];
        let expected = m.get(&[0, 2, 4]).unwrap() * m.get(&[1, 3]).unwrap();
        assert_eq!(e_pi(&m, &pi, &tuple).unwrap(), expected);
        assert_eq!(
            e_pi(&m, &SetPartition::top(5), &tuple).unwrap(),
            m.get(&tuple).unwrap()
        );
    }

    #[test]
    fn empirical_constant_samples() {
        let samples = vec![vec![Complex64::new(2.5, 0.0); 50]];
        let e = empirical_cumulants(&samples, 2).unwrap();
        assert!((e.get(&[0]).unwrap() - 2.5).norm() < 1e-12);
        assert!(e.get(&[0, 0]).unwrap().norm() < 1e-12);
        assert!(matches!(
            empirical_cumulants(&[vec![Complex64::new(1.0, 0.0)]], 2),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
