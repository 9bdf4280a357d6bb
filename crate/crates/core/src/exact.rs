//! Exact complex-rational scalars and small dense/structured matrices.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combinat::Permutation;
use crate::error::{Error, Result};

/// Arbitrary-precision complex rational number.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ExactScalar(pub Complex<BigRational>);

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl ExactScalar {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        ExactScalar(Complex::new(re, im))
    }

    pub fn real(re: BigRational) -> Self {
        ExactScalar::new(re, BigRational::zero())
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        ExactScalar::real(rat(num, den))
    }

    pub fn int(k: i64) -> Self {
        ExactScalar::ratio(k, 1)
    }

    pub fn i() -> Self {
        ExactScalar::new(BigRational::zero(), BigRational::one())
    }

    /// `i^k` for any integer `k`.
    pub fn i_pow(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => ExactScalar::int(1),
            1 => ExactScalar::i(),
            2 => ExactScalar::int(-1),
            _ => -ExactScalar::i(),
        }
    }

    pub fn re(&self) -> &BigRational {
        &self.0.re
    }

    pub fn im(&self) -> &BigRational {
        &self.0.im
    }

    pub fn is_real(&self) -> bool {
        self.0.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        ExactScalar(self.0.conj())
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = ExactScalar::one();
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::InvalidInput("division by zero".into()));
        }
        let d = &self.0.re * &self.0.re + &self.0.im * &self.0.im;
        Ok(ExactScalar::new(&self.0.re / &d, -&self.0.im / &d))
    }

    pub fn to_complex64(&self) -> Complex64 {
        Complex64::new(
            self.0.re.to_f64().unwrap_or(f64::NAN),
            self.0.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

impl Zero for ExactScalar {
    fn zero() -> Self {
        ExactScalar(Complex::zero())
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl One for ExactScalar {
    fn one() -> Self {
        ExactScalar(Complex::one())
    }
}

impl From<i64> for ExactScalar {
    fn from(k: i64) -> Self {
        ExactScalar::int(k)
    }
}

impl From<BigRational> for ExactScalar {
    fn from(r: BigRational) -> Self {
        ExactScalar::real(r)
    }
}

macro_rules! bin_op {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&ExactScalar> for &ExactScalar {
            type Output = ExactScalar;
            fn $f(self, rhs: &ExactScalar) -> ExactScalar {
                ExactScalar(&self.0 $op &rhs.0)
            }
        }
        impl $tr for ExactScalar {
            type Output = ExactScalar;
            fn $f(self, rhs: ExactScalar) -> ExactScalar {
                ExactScalar(self.0 $op rhs.0)
            }
        }
        impl $tr<&ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $f(self, rhs: &ExactScalar) -> ExactScalar {
                ExactScalar(self.0 $op &rhs.0)
            }
        }
    };
}

bin_op!(Add, add, +);
bin_op!(Sub, sub, -);
bin_op!(Mul, mul, *);

impl Div for ExactScalar {
    type Output = ExactScalar;
    fn div(self, rhs: ExactScalar) -> ExactScalar {
        ExactScalar(self.0 / rhs.0)
    }
}

impl AddAssign<&ExactScalar> for ExactScalar {
    fn add_assign(&mut self, rhs: &ExactScalar) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for ExactScalar {
    fn add_assign(&mut self, rhs: ExactScalar) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&ExactScalar> for ExactScalar {
    fn sub_assign(&mut self, rhs: &ExactScalar) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&ExactScalar> for ExactScalar {
    fn mul_assign(&mut self, rhs: &ExactScalar) {
        self.0 = &self.0 * &rhs.0;
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar(-self.0)
    }
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar(-self.0.clone())
    }
}

impl std::iter::Sum for ExactScalar {
    fn sum<I: Iterator<Item = ExactScalar>>(iter: I) -> Self {
        iter.fold(ExactScalar::zero(), |a, b| a + b)
    }
}

impl fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `a/b`, `a/b*i` or `a/b+c/d*i`.
impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = (&self.0.re, &self.0.im);
        if im.is_zero() {
            return write!(f, "{re}");
        }
        if re.is_zero() {
            return write!(f, "{im}*i");
        }
        let sign = if im.is_negative() { '-' } else { '+' };
        write!(f, "{re}{sign}{}*i", im.abs())
    }
}

/// An exact `N×N` constant matrix. Identity and diagonal shapes are kept
/// structured so that traces of long products stay cheap.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ExactMatrix {
    Identity(usize),
    Diagonal(Vec<ExactScalar>),
    Dense { n: usize, data: Vec<ExactScalar> },
}

impl ExactMatrix {
    pub fn identity(n: usize) -> Self {
        ExactMatrix::Identity(n)
    }

    pub fn zeros(n: usize) -> Self {
        ExactMatrix::Diagonal(vec![ExactScalar::zero(); n])
    }

    pub fn diagonal(entries: Vec<ExactScalar>) -> Self {
        ExactMatrix::Diagonal(entries)
    }

    /// Row-major dense matrix.
    pub fn dense(n: usize, data: Vec<ExactScalar>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(ExactMatrix::Dense { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> ExactScalar) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        ExactMatrix::Dense { n, data }
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            data.extend(r.iter().map(|&x| ExactScalar::int(x)));
        }
        ExactMatrix::dense(n, data)
    }

    /// Balanced `±1` diagonal: `+1` on the first `⌈n/2⌉` entries, `-1` after.
    pub fn balanced_signs(n: usize) -> Self {
        ExactMatrix::Diagonal(
            (0..n)
                .map(|k| ExactScalar::int(if k < n.div_ceil(2) { 1 } else { -1 }))
                .collect(),
        )
    }

    /// The superdiagonal matrix with `(k, k+1)` entry `i^k` (1-based `k`).
    pub fn superdiagonal_i_powers(n: usize) -> Self {
        ExactMatrix::from_fn(n, |r, c| {
            if c == r + 1 {
                ExactScalar::i_pow(r as i64 + 1)
            } else {
                ExactScalar::zero()
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ExactMatrix::Identity(n) => *n,
            ExactMatrix::Diagonal(d) => d.len(),
            ExactMatrix::Dense { n, .. } => *n,
        }
    }

    /// Zero-based entry access.
    pub fn get(&self, i: usize, j: usize) -> ExactScalar {
        match self {
            ExactMatrix::Identity(_) => {
                if i == j {
                    ExactScalar::one()
                } else {
                    ExactScalar::zero()
                }
            }
            ExactMatrix::Diagonal(d) => {
                if i == j {
                    d[i].clone()
                } else {
                    ExactScalar::zero()
                }
            }
            ExactMatrix::Dense { n, data } => data[i * n + j].clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            ExactMatrix::Identity(_) => true,
            ExactMatrix::Diagonal(d) => d.iter().all(One::is_one),
            ExactMatrix::Dense { n, data } => (0..*n).all(|i| {
                (0..*n).all(|j| {
                    let x = &data[i * n + j];
                    if i == j {
                        x.is_one()
                    } else {
                        x.is_zero()
                    }
                })
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ExactMatrix::Identity(n) => *n == 0,
            ExactMatrix::Diagonal(d) => d.iter().all(Zero::is_zero),
            ExactMatrix::Dense { data, .. } => data.iter().all(Zero::is_zero),
        }
    }

    fn to_dense_data(&self) -> Vec<ExactScalar> {
        let n = self.dim();
        match self {
            ExactMatrix::Dense { data, .. } => data.clone(),
            _ => (0..n * n).map(|k| self.get(k / n, k % n)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        match self {
            ExactMatrix::Dense { n, data } => {
                let n = *n;
                let data = (0..n * n).map(|k| data[(k % n) * n + k / n].clone()).collect();
                ExactMatrix::Dense { n, data }
            }
            other => other.clone(),
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            ExactMatrix::Identity(n) => ExactMatrix::Identity(*n),
            ExactMatrix::Diagonal(d) => ExactMatrix::Diagonal(d.iter().map(ExactScalar::conj).collect()),
            ExactMatrix::Dense { n, data } => ExactMatrix::Dense {
                n: *n,
                data: data.iter().map(ExactScalar::conj).collect(),
            },
        }
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    /// `A^{(ε)}`: the matrix itself for `ε = 1`, its transpose for `ε = -1`.
    pub fn with_transpose_flag(&self, eps: i8) -> Self {
        if eps < 0 {
            self.transpose()
        } else {
            self.clone()
        }
    }

    pub fn scale(&self, c: &ExactScalar) -> Self {
        match self {
            ExactMatrix::Identity(n) => ExactMatrix::Diagonal(vec![c.clone(); *n]),
            ExactMatrix::Diagonal(d) => ExactMatrix::Diagonal(d.iter().map(|x| x * c).collect()),
            ExactMatrix::Dense { n, data } => ExactMatrix::Dense {
                n: *n,
                data: data.iter().map(|x| x * c).collect(),
            },
        }
    }

    fn check_dims(&self, other: &ExactMatrix) -> Result<usize> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.dim())
    }

    pub fn add(&self, other: &ExactMatrix) -> Result<Self> {
        let n = self.check_dims(other)?;
        Ok(match (self, other) {
            (ExactMatrix::Dense { .. }, _) | (_, ExactMatrix::Dense { .. }) => {
                let a = self.to_dense_data();
                let b = other.to_dense_data();
                ExactMatrix::Dense {
                    n,
                    data: a.iter().zip(&b).map(|(x, y)| x + y).collect(),
                }
            }
            _ => ExactMatrix::Diagonal((0..n).map(|i| self.get(i, i) + other.get(i, i)).collect()),
        })
    }

    pub fn sub(&self, other: &ExactMatrix) -> Result<Self> {
        self.add(&other.scale(&ExactScalar::int(-1)))
    }

    pub fn mul(&self, other: &ExactMatrix) -> Result<Self> {
        let n = self.check_dims(other)?;
        Ok(match (self, other) {
            (ExactMatrix::Identity(_), m) | (m, ExactMatrix::Identity(_)) => m.clone(),
            (ExactMatrix::Diagonal(a), ExactMatrix::Diagonal(b)) => {
                ExactMatrix::Diagonal(a.iter().zip(b).map(|(x, y)| x * y).collect())
            }
            (ExactMatrix::Diagonal(a), ExactMatrix::Dense { data, .. }) => ExactMatrix::Dense {
                n,
                data: (0..n * n).map(|k| &a[k / n] * &data[k]).collect(),
            },
            (ExactMatrix::Dense { data, .. }, ExactMatrix::Diagonal(b)) => ExactMatrix::Dense {
                n,
                data: (0..n * n).map(|k| &data[k] * &b[k % n]).collect(),
            },
            (ExactMatrix::Dense { data: a, .. }, ExactMatrix::Dense { data: b, .. }) => {
                let mut data = vec![ExactScalar::zero(); n * n];
                for i in 0..n {
                    for k in 0..n {
                        let x = &a[i * n + k];
                        if x.is_zero() {
                            continue;
                        }
                        for j in 0..n {
                            let y = &b[k * n + j];
                            if !y.is_zero() {
                                data[i * n + j] += x * y;
                            }
                        }
                    }
                }
                ExactMatrix::Dense { n, data }
            }
        })
    }

    /// Product of a sequence of matrices; identity of size `n` when empty.
    pub fn product<'a>(n: usize, mats: impl IntoIterator<Item = &'a ExactMatrix>) -> Result<Self> {
        let mut acc = ExactMatrix::Identity(n);
        for m in mats {
            acc = acc.mul(m)?;
        }
        Ok(acc)
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        let mut out = ExactMatrix::Identity(self.dim());
        for _ in 0..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Unnormalized trace `Tr`.
    pub fn trace(&self) -> ExactScalar {
        let n = self.dim();
        match self {
            ExactMatrix::Identity(n) => ExactScalar::int(*n as i64),
            ExactMatrix::Diagonal(d) => d.iter().cloned().sum(),
            ExactMatrix::Dense { data, .. } => (0..n).map(|i| data[i * n + i].clone()).sum(),
        }
    }

    /// Normalized trace `tr = Tr / N`.
    pub fn normalized_trace(&self) -> ExactScalar {
        let n = self.dim().max(1) as i64;
        self.trace() * ExactScalar::ratio(1, n)
    }

    /// `Å = A - tr(A)·I`.
    pub fn centered(&self) -> Self {
        let t = self.normalized_trace();
        match self {
            ExactMatrix::Identity(n) => ExactMatrix::zeros(*n),
            ExactMatrix::Diagonal(d) => ExactMatrix::Diagonal(d.iter().map(|x| x - &t).collect()),
            ExactMatrix::Dense { n, data } => {
                let mut data = data.clone();
                for i in 0..*n {
                    data[i * n + i] -= &t;
                }
                ExactMatrix::Dense { n: *n, data }
            }
        }
    }

    pub fn to_complex_rows(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j).to_complex64()).collect())
            .collect()
    }
}

/// `Tr_{(π,ε)}(A_1, …, A_n)`: product over cycles `(c_1, …, c_r)` of `π` of
/// `Tr(A_{c_1}^{(ε_{c_1})} ⋯ A_{c_r}^{(ε_{c_r})})`.
pub fn trace_along(pi: &Permutation, mats: &[ExactMatrix], eps: &[i8]) -> Result<ExactScalar> {
    if mats.len() != pi.size() || eps.len() != pi.size() {
        return Err(Error::DimensionMismatch {
            expected: pi.size(),
            found: mats.len(),
        });
    }
    let dim = mats.first().map_or(0, ExactMatrix::dim);
    let mut out = ExactScalar::one();
    for cycle in pi.cycles() {
        let letters: Vec<ExactMatrix> = cycle
            .iter()
            .map(|&k| mats[k as usize - 1].with_transpose_flag(eps[k as usize - 1]))
            .collect();
        out *= &ExactMatrix::product(dim, &letters)?.trace();
        if out.is_zero() {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_display() {
        assert_eq!(ExactScalar::ratio(-1, 60).to_string(), "-1/60");
        assert_eq!(ExactScalar::i_pow(3).to_string(), "-1*i");
        let z = ExactScalar::new(rat(1, 2), rat(-3, 4));
        assert_eq!(z.to_string(), "1/2-3/4*i");
        assert_eq!((&z * &z.recip().unwrap()), ExactScalar::one());
    }

    #[test]
    fn matrix_shapes_agree_with_dense() {
        let d = ExactMatrix::diagonal(vec![ExactScalar::int(2), ExactScalar::int(-1)]);
        let a = ExactMatrix::from_i64_rows(&[vec![1, 2], vec![3, 4]]).unwrap();
        let dd = ExactMatrix::dense(2, d.to_dense_data()).unwrap();
        assert_eq!(d.mul(&a).unwrap(), dd.mul(&a).unwrap());
        assert_eq!(a.mul(&d).unwrap(), a.mul(&dd).unwrap());
        assert_eq!(a.transpose().get(0, 1), ExactScalar::int(3));
        assert_eq!(a.centered().trace(), ExactScalar::zero());
        assert!(ExactMatrix::identity(3).centered().is_zero());
    }

    #[test]
    fn superdiagonal_matrix() {
        let a = ExactMatrix::superdiagonal_i_powers(5);
        assert_eq!(a.get(1, 2), ExactScalar::int(-1));
        assert_eq!(a.get(4, 0), ExactScalar::zero());
        assert_eq!(a.get(0, 1), ExactScalar::i());
    }

    #[test]
    fn trace_along_cycles() {
        let a = ExactMatrix::from_i64_rows(&[vec![1, 2], vec![0, 1]]).unwrap();
        let b = ExactMatrix::from_i64_rows(&[vec![0, 1], vec![1, 3]]).unwrap();
        let pi = Permutation::from_cycles(2, false, &[vec![1, 2]]).unwrap();
        let ab = a.mul(&b).unwrap().trace();
        assert_eq!(trace_along(&pi, &[a.clone(), b.clone()], &[1, 1]).unwrap(), ab);
        let abt = a.mul(&b.transpose()).unwrap().trace();
        assert_eq!(trace_along(&pi, &[a.clone(), b.clone()], &[1, -1]).unwrap(), abt);
        let id = Permutation::identity(2);
        assert_eq!(
            trace_along(&id, &[a.clone(), b.clone()], &[1, 1]).unwrap(),
            a.trace() * b.trace()
        );
    }
}
