//! The unitary Weingarten function at a concrete dimension `N`.
//!
//! `Wg_N` is computed exactly as the inverse of the Gram element
//! `Σ_σ N^{#(σ)} σ` in the centre of the group algebra of `S_n`. Since both
//! sides are class functions, the system collapses to one unknown per cycle
//! type.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::combinat::{
    all_permutations, moebius_cycle_type, pq_cycle_pairs, CycleType, Pairing, Permutation,
};
use crate::error::{Error, Result};
use crate::exact::ExactScalar;

/// Largest order accepted by [`wg_exact`].
pub const ORDER_CAP: usize = 6;

/// Exact `Wg_N` values for every cycle type of `S_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeingartenTable {
    n: usize,
    dim: usize,
    values: BTreeMap<CycleType, BigRational>,
}

impl WeingartenTable {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, ct: &CycleType) -> Option<&BigRational> {
        self.values.get(ct)
    }

    pub fn value(&self, sigma: &Permutation) -> BigRational {
        self.values[&sigma.cycle_type()].clone()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CycleType, &BigRational)> {
        self.values.iter()
    }

    /// CSV rows `n,cycle_type,N,numerator,denominator`; cycle types are
    /// written as space-separated parts.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,cycle_type,N,numerator,denominator\n");
        for (ct, v) in &self.values {
            let parts: Vec<String> = ct.parts().iter().map(usize::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.n,
                parts.join(" "),
                self.dim,
                v.numer(),
                v.denom()
            );
        }
        out
    }
}

fn big_pow(base: usize, exp: usize) -> BigInt {
    num_traits::pow(BigInt::from(base), exp)
}

/// `N^{#(σ τ⁻¹)}`.
pub fn gram_entry(sigma: &Permutation, tau: &Permutation, dim: usize) -> ExactScalar {
    let k = sigma.compose(&tau.inverse()).count_cycles();
    ExactScalar::real(BigRational::from_integer(big_pow(dim, k)))
}

/// Solves `A x = b` over the rationals; `None` when `A` is singular.
pub(crate) fn solve_rational(
    mut a: Vec<Vec<BigRational>>,
    mut b: Vec<BigRational>,
) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for x in &mut a[col][col..] {
            *x = &*x * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            let pivot = a[col][col..].to_vec();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot) {
                *x -= &f * p;
            }
            let delta = &f * &b[col];
            b[r] -= delta;
        }
    }
    Some(b)
}

fn build_table(n: usize, dim: usize) -> Result<WeingartenTable> {
    let (classes, gram, rhs) = gram_system(n, dim);
    let sol = solve_rational(gram, rhs).ok_or(Error::Singular { order: n, dim })?;
    Ok(WeingartenTable {
        n,
        dim,
        values: classes.into_iter().zip(sol).collect(),
    })
}

type TableCache = Mutex<HashMap<(usize, usize), Arc<WeingartenTable>>>;

fn cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Exact `Wg_N` table of order `n`, memoized per `(n, N)`.
///
/// Order 0 gives the table `{⟨⟩: 1}` (the empty integral).
pub fn wg_exact(n: usize, dim: usize) -> Result<Arc<WeingartenTable>> {
    if n > ORDER_CAP {
        return Err(Error::Capacity {
            what: "Weingarten order",
            size: n,
            cap: ORDER_CAP,
        });
    }
    if dim < n || dim == 0 {
        return Err(Error::Singular { order: n, dim });
    }
    if let Some(t) = cache().lock().expect("cache lock").get(&(n, dim)) {
        return Ok(t.clone());
    }
    let table = Arc::new(build_table(n, dim)?);
    cache()
        .lock()
        .expect("cache lock")
        .insert((n, dim), table.clone());
    Ok(table)
}

/// Weingarten values usable in Haar integrals at any `N ≥ 1`.
///
/// For `N ≥ n` this is [`wg_exact`]. For `N < n` the Gram element is
/// singular and the table holds the central generalized inverse
/// `(G + P₀)⁻¹`, with `P₀` the spectral projector onto `ker G`. The
/// index vectors of an integral lie in the range of `G`, so integrals are
/// unaffected by the choice of generalized inverse.
pub fn wg_values(n: usize, dim: usize) -> Result<Arc<WeingartenTable>> {
    if dim >= n || n > ORDER_CAP {
        return wg_exact(n, dim);
    }
    if dim == 0 {
        return Err(Error::Singular { order: n, dim });
    }
    let key = (n, dim);
    if let Some(t) = cache().lock().expect("cache lock").get(&key) {
        return Ok(t.clone());
    }
    let table = Arc::new(build_generalized(n, dim)?);
    cache().lock().expect("cache lock").insert(key, table.clone());
    Ok(table)
}

fn gram_system(n: usize, dim: usize) -> (Vec<CycleType>, Vec<Vec<BigRational>>, Vec<BigRational>) {
    let classes = CycleType::all(n);
    let index: HashMap<CycleType, usize> =
        classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    let perms = all_permutations(n);
    let perm_classes: Vec<usize> = perms.iter().map(|p| index[&p.cycle_type()]).collect();
    let mut gram = vec![vec![BigRational::zero(); classes.len()]; classes.len()];
    for (row, ct) in classes.iter().enumerate() {
        let sigma = ct.representative();
        for (tau, &col) in perms.iter().zip(&perm_classes) {
            let k = sigma.compose(&tau.inverse()).count_cycles();
            gram[row][col] += BigRational::from_integer(big_pow(dim, k));
        }
    }
    let rhs = classes
        .iter()
        .map(|ct| {
            if ct.num_cycles() == n {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        })
        .collect();
    (classes, gram, rhs)
}

fn mat_vec(a: &[Vec<BigRational>], v: &[BigRational]) -> Vec<BigRational> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(BigRational::zero(), |acc, (x, y)| acc + x * y))
        .collect()
}

/// Works inside the Krylov space of the identity indicator, where the
/// operator acts through the companion matrix of its local minimal polynomial.
fn build_generalized(n: usize, dim: usize) -> Result<WeingartenTable> {
    let (classes, gram, e) = gram_system(n, dim);
    let size = e.len();
    let mut basis: Vec<Vec<BigRational>> = vec![e.clone()];
    let coeffs = loop {
        let next = mat_vec(&gram, basis.last().expect("nonempty"));
        // Express `next` in the current basis if possible.
        let k = basis.len();
        let a: Vec<Vec<BigRational>> = (0..size)
            .map(|r| (0..k).map(|c| basis[c][r].clone()).collect())
            .collect();
        if let Some(c) = least_dependence(&a, &next) {
            break c;
        }
        if k == size {
            return Err(Error::Internal("Krylov sequence failed to close".into()));
        }
        basis.push(next);
    };
    let k = basis.len();
    // M restricted to the Krylov space, in the basis v_0..v_{k-1}.
    let mut comp = vec![vec![BigRational::zero(); k]; k];
    for j in 0..k - 1 {
        comp[j + 1][j] = BigRational::one();
    }
    for (i, c) in coeffs.iter().enumerate() {
        comp[i][k - 1] = c.clone();
    }
    // Local minimal polynomial x^k - Σ c_j x^j; r(x) = m(x)/x when c_0 = 0.
    let system = if coeffs[0].is_zero() {
        let mut r = vec![BigRational::zero(); k];
        r[k - 1] = BigRational::one();
        for j in 1..k {
            r[j - 1] = -coeffs[j].clone();
        }
        let r0 = r[0].clone();
        if r0.is_zero() {
            return Err(Error::Internal("Gram operator is not diagonalizable".into()));
        }
        let mut proj = vec![vec![BigRational::zero(); k]; k];
        let mut power = identity_matrix(k);
        for rj in &r {
            for a in 0..k {
                for b in 0..k {
                    proj[a][b] += rj * &power[a][b];
                }
            }
            power = mat_mul(&power, &comp);
        }
        (0..k)
            .map(|a| (0..k).map(|b| &comp[a][b] + &proj[a][b] / &r0).collect())
            .collect()
    } else {
        comp.clone()
    };
    let mut rhs = vec![BigRational::zero(); k];
    rhs[0] = BigRational::one();
    let z = solve_rational(system, rhs).ok_or(Error::Singular { order: n, dim })?;
    let w: Vec<BigRational> = (0..size)
        .map(|r| (0..k).fold(BigRational::zero(), |acc, c| acc + &z[c] * &basis[c][r]))
        .collect();
    Ok(WeingartenTable {
        n,
        dim,
        values: classes.into_iter().zip(w).collect(),
    })
}

fn identity_matrix(k: usize) -> Vec<Vec<BigRational>> {
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
        .collect()
}

fn mat_mul(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let k = b.len();
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| (0..k).fold(BigRational::zero(), |acc, t| acc + &row[t] * &b[t][j]))
                .collect()
        })
        .collect()
}

/// Coefficients `c` with `a c = v` when `v` lies in the column span of `a`
/// (columns assumed independent).
fn least_dependence(a: &[Vec<BigRational>], v: &[BigRational]) -> Option<Vec<BigRational>> {
    let rows = a.len();
    let cols = a[0].len();
    let mut m: Vec<Vec<BigRational>> = (0..rows)
        .map(|r| {
            let mut row = a[r].clone();
            row.push(v[r].clone());
            row
        })
        .collect();
    let mut pivot_row = 0;
    for col in 0..cols {
        let p = (pivot_row..rows).find(|&r| !m[r][col].is_zero())?;
        m.swap(pivot_row, p);
        let inv = m[pivot_row][col].recip();
        for x in m[pivot_row].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..rows {
            if r != pivot_row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let pivot = m[pivot_row].clone();
                for (x, p) in m[r].iter_mut().zip(&pivot) {
                    *x -= &f * p;
                }
            }
        }
        pivot_row += 1;
    }
    if (pivot_row..rows).any(|r| !m[r][cols].is_zero()) {
        return None;
    }
    Some((0..cols).map(|c| m[c][cols].clone()).collect())
}

/// `N^{-2n+#σ} Möb(σ)`.
pub fn wg_leading(ct: &CycleType, dim: usize) -> ExactScalar {
    let n = ct.order();
    let exp = 2 * n - ct.num_cycles();
    let mob = BigRational::from_integer(BigInt::from(moebius_cycle_type(ct)));
    ExactScalar::real(mob / BigRational::from_integer(big_pow(dim, exp)))
}

/// Cycle type formed by one representative cycle from each mate pair of `pq`.
pub fn phi_cycle_type(p: &Pairing, q: &Pairing) -> Result<CycleType> {
    let pairs = pq_cycle_pairs(p, q)?;
    Ok(CycleType::new(pairs.iter().map(|(c, _)| c.len()).collect()))
}

/// `Φ_N(p, q)` looked up in a table of the matching order.
pub fn phi_with(p: &Pairing, q: &Pairing, table: &WeingartenTable) -> Result<BigRational> {
    let ct = phi_cycle_type(p, q)?;
    table.get(&ct).cloned().ok_or(Error::DimensionMismatch {
        expected: table.order(),
        found: ct.order(),
    })
}

/// `Φ_N(p, q) = Wg_N(σ)` where `σ` has the cycle structure of half of `pq`.
pub fn phi(p: &Pairing, q: &Pairing, dim: usize) -> Result<ExactScalar> {
    if p.size() % 2 == 1 {
        return Err(Error::InvalidInput("pairings of an odd set".into()));
    }
    let table = wg_values(p.size() / 2, dim)?;
    Ok(ExactScalar::real(phi_with(p, q, &table)?))
}

/// Rounds a rational for display.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}
