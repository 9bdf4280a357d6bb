//! Exact expectations over a Haar unitary `U` of entry products and of
//! products of traces of words in `U^{(ε,η)}` and deterministic constants.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::combinat::{enumerate_alpha_pairings, pi_epsilon, CycleType, Pairing, Permutation};
use crate::error::{Error, Result};
use crate::exact::{trace_along, ExactMatrix, ExactScalar};
use crate::exec::Execution;
use crate::weingarten::{phi_cycle_type, wg_values, ORDER_CAP};

/// `U^{(ε,η)}`: `ε = -1` transposes, `η = -1` conjugates entrywise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HaarLetter {
    pub eps: i8,
    pub eta: i8,
}

impl HaarLetter {
    pub const U: HaarLetter = HaarLetter { eps: 1, eta: 1 };
    pub const TRANSPOSE: HaarLetter = HaarLetter { eps: -1, eta: 1 };
    pub const CONJ: HaarLetter = HaarLetter { eps: 1, eta: -1 };
    pub const ADJOINT: HaarLetter = HaarLetter { eps: -1, eta: -1 };
    pub const ALL: [HaarLetter; 4] = [Self::U, Self::TRANSPOSE, Self::CONJ, Self::ADJOINT];

    pub fn new(eps: i8, eta: i8) -> Result<Self> {
        if eps.abs() != 1 || eta.abs() != 1 {
            return Err(Error::InvalidInput(format!("({eps},{eta}) is not a sign pair")));
        }
        Ok(HaarLetter { eps, eta })
    }

    pub fn adjoint(self) -> Self {
        HaarLetter {
            eps: -self.eps,
            eta: -self.eta,
        }
    }

    pub fn transpose(self) -> Self {
        HaarLetter {
            eps: -self.eps,
            eta: self.eta,
        }
    }

    pub fn conj(self) -> Self {
        HaarLetter {
            eps: self.eps,
            eta: -self.eta,
        }
    }

    pub fn name(self) -> &'static str {
        match (self.eps, self.eta) {
            (1, 1) => "U",
            (-1, 1) => "Ut",
            (1, -1) => "Uc",
            _ => "U*",
        }
    }
}

impl fmt::Display for HaarLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A deterministic constant, optionally transposed.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantLetter {
    pub matrix: Arc<ExactMatrix>,
    pub eps: i8,
    pub name: Option<String>,
}

impl ConstantLetter {
    pub fn new(matrix: ExactMatrix) -> Self {
        ConstantLetter {
            matrix: Arc::new(matrix),
            eps: 1,
            name: None,
        }
    }

    pub fn named(name: &str, matrix: Arc<ExactMatrix>) -> Self {
        ConstantLetter {
            matrix,
            eps: 1,
            name: Some(name.to_string()),
        }
    }

    pub fn transposed(mut self) -> Self {
        self.eps = -self.eps;
        self
    }

    pub fn value(&self) -> ExactMatrix {
        self.matrix.with_transpose_flag(self.eps)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Letter {
    Haar(HaarLetter),
    Const(ConstantLetter),
}

impl Letter {
    pub fn constant(m: ExactMatrix) -> Self {
        Letter::Const(ConstantLetter::new(m))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Haar(h) => write!(f, "{h}"),
            Letter::Const(c) => {
                let name = c.name.as_deref().unwrap_or("C");
                if c.eps < 0 {
                    write!(f, "{name}^t")
                } else {
                    f.write_str(name)
                }
            }
        }
    }
}

/// A word read under `Tr`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceWord {
    letters: Vec<Letter>,
}

impl TraceWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidInput("empty trace word".into()));
        }
        let mut dim = None;
        for l in &letters {
            if let Letter::Const(c) = l {
                match dim {
                    None => dim = Some(c.dim()),
                    Some(d) if d != c.dim() => {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            found: c.dim(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(TraceWord { letters })
    }

    pub fn haar(letters: &[HaarLetter]) -> Self {
        TraceWord::new(letters.iter().map(|&h| Letter::Haar(h)).collect()).expect("nonempty word")
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn haar_count(&self) -> usize {
        self.letters
            .iter()
            .filter(|l| matches!(l, Letter::Haar(_)))
            .count()
    }

    pub fn const_dim(&self) -> Option<usize> {
        self.letters.iter().find_map(|l| match l {
            Letter::Const(c) => Some(c.dim()),
            Letter::Haar(_) => None,
        })
    }

    /// Whether the word is simplified in the sense used by [`simplify_word`].
    pub fn is_simplified(&self, dim: usize) -> Result<bool> {
        Ok(match alternate(&self.letters, dim)? {
            Alternating::Constant(c) => c.trace().is_zero(),
            Alternating::Mixed { consts, haar } => first_violation(&consts, &haar).is_none(),
        })
    }

    /// Replaces every constant `C` by `f(C)`.
    pub fn map_constants(&self, f: &impl Fn(&ExactMatrix) -> ExactMatrix) -> Self {
        TraceWord {
            letters: self
                .letters
                .iter()
                .map(|l| match l {
                    Letter::Const(c) => Letter::constant(f(&c.value())),
                    Letter::Haar(h) => Letter::Haar(*h),
                })
                .collect(),
        }
    }
}

impl fmt::Display for TraceWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.letters.iter().map(Letter::to_string).collect();
        write!(f, "Tr({})", parts.join(" "))
    }
}

/// `coefficient · Tr(W_1) ⋯ Tr(W_R)` at dimension `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceProductExpr {
    pub dim: usize,
    pub coefficient: ExactScalar,
    pub words: Vec<TraceWord>,
}

impl TraceProductExpr {
    pub fn new(dim: usize, words: Vec<TraceWord>) -> Result<Self> {
        for w in &words {
            if let Some(d) = w.const_dim() {
                if d != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: d,
                    });
                }
            }
        }
        Ok(TraceProductExpr {
            dim,
            coefficient: ExactScalar::one(),
            words,
        })
    }

    pub fn with_coefficient(mut self, c: ExactScalar) -> Self {
        self.coefficient = c;
        self
    }

    pub fn haar_count(&self) -> usize {
        self.words.iter().map(TraceWord::haar_count).sum()
    }

    pub fn map_constants(&self, f: &impl Fn(&ExactMatrix) -> ExactMatrix) -> Self {
        TraceProductExpr {
            dim: self.dim,
            coefficient: self.coefficient.clone(),
            words: self.words.iter().map(|w| w.map_constants(f)).collect(),
        }
    }
}

/// A word up to cyclic rotation: either constants only, or
/// `A_1 H_1 A_2 H_2 ⋯ A_m H_m` with `A_i` the product of the constants
/// standing before `H_i` (identity if none).
#[derive(Clone, Debug, PartialEq)]
pub enum Alternating {
    Constant(ExactMatrix),
    Mixed {
        consts: Vec<ExactMatrix>,
        haar: Vec<HaarLetter>,
    },
}

pub fn alternate(letters: &[Letter], dim: usize) -> Result<Alternating> {
    let Some(h0) = letters.iter().position(|l| matches!(l, Letter::Haar(_))) else {
        let mats: Vec<ExactMatrix> = letters
            .iter()
            .map(|l| match l {
                Letter::Const(c) => c.value(),
                Letter::Haar(_) => unreachable!(),
            })
            .collect();
        return Ok(Alternating::Constant(ExactMatrix::product(dim, &mats)?));
    };
    let len = letters.len();
    let mut consts = Vec::new();
    let mut haar = Vec::new();
    let mut pending = ExactMatrix::identity(dim);
    for step in 1..=len {
        match &letters[(h0 + step) % len] {
            Letter::Const(c) => pending = pending.mul(&c.value())?,
            Letter::Haar(h) => {
                consts.push(std::mem::replace(&mut pending, ExactMatrix::identity(dim)));
                haar.push(*h);
            }
        }
    }
    Ok(Alternating::Mixed { consts, haar })
}

fn alternating_letters(consts: &[ExactMatrix], haar: &[HaarLetter]) -> Vec<Letter> {
    let mut out = Vec::new();
    for (a, h) in consts.iter().zip(haar) {
        if !a.is_identity() {
            out.push(Letter::constant(a.clone()));
        }
        out.push(Letter::Haar(*h));
    }
    out
}

/// `E(u^{(α_1)}_{r_1 c_1} ⋯ u^{(α_n)}_{r_n c_n})` with 1-based indices.
pub fn entry_product_expectation(
    alpha: &[i8],
    rows: &[usize],
    cols: &[usize],
    dim: usize,
) -> Result<ExactScalar> {
    let n = alpha.len();
    if rows.len() != n || cols.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rows.len().min(cols.len()),
        });
    }
    if let Some(&bad) = rows.iter().chain(cols).find(|&&i| i == 0 || i > dim) {
        return Err(Error::InvalidInput(format!("index {bad} outside 1..={dim}")));
    }
    if n == 0 {
        return Ok(ExactScalar::one());
    }
    let pairings = enumerate_alpha_pairings(alpha)?;
    if pairings.is_empty() {
        return Ok(ExactScalar::zero());
    }
    let order = n / 2;
    check_order(order)?;
    let table = wg_values(order, dim)?;
    let respects = |p: &Pairing, idx: &[usize]| {
        p.blocks()
            .iter()
            .all(|&(a, b)| idx[a as usize - 1] == idx[b as usize - 1])
    };
    let ps: Vec<&Pairing> = pairings.iter().filter(|p| respects(p, rows)).collect();
    let qs: Vec<&Pairing> = pairings.iter().filter(|q| respects(q, cols)).collect();
    let mut total = BigRational::zero();
    for p in &ps {
        for q in &qs {
            let ct = phi_cycle_type(p, q)?;
            total += table.get(&ct).expect("table is total");
        }
    }
    Ok(ExactScalar::real(total))
}

fn check_order(order: usize) -> Result<()> {
    if order > ORDER_CAP {
        return Err(Error::Capacity {
            what: "Haar letters per conjugation class",
            size: order,
            cap: ORDER_CAP,
        });
    }
    Ok(())
}

/// The Haar letters of an expression in global order, the constant that
/// follows each of them, the cycle structure γ and the deterministic factor.
struct Flattened {
    haar: Vec<HaarLetter>,
    follow: Vec<ExactMatrix>,
    gamma: Vec<Vec<i32>>,
    deterministic: ExactScalar,
}

fn flatten(expr: &TraceProductExpr) -> Result<Flattened> {
    let mut out = Flattened {
        haar: Vec::new(),
        follow: Vec::new(),
        gamma: Vec::new(),
        deterministic: expr.coefficient.clone(),
    };
    for w in &expr.words {
        match alternate(w.letters(), expr.dim)? {
            Alternating::Constant(c) => out.deterministic *= &c.trace(),
            Alternating::Mixed { consts, haar } => {
                let base = out.haar.len() as i32;
                let m = haar.len();
                for l in 0..m {
                    out.haar.push(haar[l]);
                    out.follow.push(consts[(l + 1) % m].clone());
                }
                out.gamma.push((base + 1..=base + m as i32).collect());
            }
        }
    }
    Ok(out)
}

/// Key of one `(p, q)` summand: Weingarten class and the constant trace.
type SummandKey = (CycleType, Permutation, Vec<i8>);

/// `φ = εγδ` on `[±M]`: `φ(l) = -ε_l l`, `φ(-l) = ε_{γ(l)} γ(l)`.
fn phi_map(haar: &[HaarLetter], gamma: &Permutation) -> Result<Permutation> {
    let m = haar.len();
    let mut images = Vec::with_capacity(2 * m);
    for l in 1..=m as i32 {
        images.push(-(haar[l as usize - 1].eps as i32) * l);
    }
    for l in 1..=m as i32 {
        let g = gamma.apply(l);
        images.push(haar[g as usize - 1].eps as i32 * g);
    }
    let cycles = images_to_cycles(m, &images);
    Permutation::from_cycles(m, true, &cycles)
}

fn images_to_cycles(m: usize, images: &[i32]) -> Vec<Vec<i32>> {
    let point = |s: usize| if s < m { s as i32 + 1 } else { -((s - m) as i32 + 1) };
    let slot = |k: i32| if k > 0 { k as usize - 1 } else { m + (-k) as usize - 1 };
    let mut seen = vec![false; 2 * m];
    let mut cycles = Vec::new();
    for s in 0..2 * m {
        if seen[s] {
            continue;
        }
        let mut c = Vec::new();
        let mut k = point(s);
        while !seen[slot(k)] {
            seen[slot(k)] = true;
            c.push(k);
            k = images[slot(k)];
        }
        cycles.push(c);
    }
    cycles
}

/// `pδqδ`: `k ↦ p(k)` and `-k ↦ -q(k)`.
fn p_delta_q_delta(p: &Pairing, q: &Pairing) -> Result<Pairing> {
    let m = p.size();
    let mut pairs: Vec<(i32, i32)> = p.blocks().to_vec();
    pairs.extend(q.blocks().iter().map(|&(a, b)| (-a, -b)));
    Pairing::new(m, true, &pairs)
}

/// Exact `E(coefficient · Tr(W_1) ⋯ Tr(W_R))` with the default execution mode.
pub fn expected_trace_product(expr: &TraceProductExpr) -> Result<ExactScalar> {
    expected_trace_product_with(expr, Execution::default())
}

pub fn expected_trace_product_with(expr: &TraceProductExpr, exec: Execution) -> Result<ExactScalar> {
    let flat = flatten(expr)?;
    if flat.deterministic.is_zero() {
        return Ok(ExactScalar::zero());
    }
    let m = flat.haar.len();
    if m == 0 {
        return Ok(flat.deterministic);
    }
    let eta: Vec<i8> = flat.haar.iter().map(|h| h.eta).collect();
    let plus = eta.iter().filter(|&&e| e == 1).count();
    if 2 * plus != m {
        return Ok(ExactScalar::zero());
    }
    check_order(m / 2)?;
    let pairings = enumerate_alpha_pairings(&eta)?;
    let table = wg_values(m / 2, expr.dim)?;
    let gamma = Permutation::from_cycles(m, false, &flat.gamma)?;
    let phi = phi_map(&flat.haar, &gamma)?;
    let phi_inv = phi.inverse();

    let counts = exec.fold_reduce(
        pairings.len(),
        || Ok(HashMap::<SummandKey, u64>::new()),
        |acc: Result<HashMap<SummandKey, u64>>, i| {
            let mut acc = acc?;
            let p = &pairings[i];
            for q in &pairings {
                let ct = phi_cycle_type(p, q)?;
                let sigma = p_delta_q_delta(p, q)?;
                let tau = phi_inv.compose(sigma.as_permutation()).compose(&phi);
                let (pi, lambda) = pi_epsilon(&Pairing::from_involution(tau)?)?;
                *acc.entry((ct, pi, lambda)).or_insert(0) += 1;
            }
            Ok(acc)
        },
        |a, b| {
            let (mut a, b) = (a?, b?);
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            Ok(a)
        },
    )?;

    let mut trace_keys: Vec<(Permutation, Vec<i8>)> = counts
        .keys()
        .map(|(_, pi, lambda)| (pi.clone(), lambda.clone()))
        .collect();
    trace_keys.sort_by(|a, b| (a.0.to_string(), &a.1).cmp(&(b.0.to_string(), &b.1)));
    trace_keys.dedup();
    let traces = exec.map_indexed(trace_keys.len(), |i| {
        let (pi, lambda) = &trace_keys[i];
        trace_along(pi, &flat.follow, lambda)
    });
    let mut trace_of: HashMap<(Permutation, Vec<i8>), ExactScalar> = HashMap::new();
    for (k, t) in trace_keys.into_iter().zip(traces) {
        trace_of.insert(k, t?);
    }

    let mut total = ExactScalar::zero();
    for ((ct, pi, lambda), count) in counts {
        let t = &trace_of[&(pi, lambda)];
        if t.is_zero() {
            continue;
        }
        let w = table.get(&ct).expect("table is total");
        let weight = ExactScalar::real(w * BigRational::from_integer(count.into()));
        total += weight * t;
    }
    Ok(total * flat.deterministic)
}

/// `Tr(w) = c_0 + Σ c_i Tr(W_i)` with every `W_i` simplified.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplification {
    pub c0: ExactScalar,
    pub terms: Vec<(ExactScalar, TraceWord)>,
}

/// First `A_i` that breaks the simplified form: neither centered nor an
/// identity between two letters that are not mutually adjoint.
fn first_violation(consts: &[ExactMatrix], haar: &[HaarLetter]) -> Option<usize> {
    let m = haar.len();
    (0..m).find(|&i| {
        let a = &consts[i];
        if a.is_identity() {
            let prev = haar[(i + m - 1) % m];
            m >= 2 && prev == haar[i].adjoint()
        } else {
            !a.normalized_trace().is_zero()
        }
    })
}

/// Cancels `H H*` pairs with nothing in between until none remain.
fn cancel_adjoint_pairs(mut alt: Alternating, dim: usize) -> Result<Alternating> {
    loop {
        let Alternating::Mixed { consts, haar } = &alt else {
            return Ok(alt);
        };
        let m = haar.len();
        let hit = (0..m).find(|&i| {
            m >= 2 && consts[i].is_identity() && haar[(i + m - 1) % m] == haar[i].adjoint()
        });
        let Some(i) = hit else {
            return Ok(alt);
        };
        let prev = (i + m - 1) % m;
        let mut letters = Vec::new();
        for j in 0..m {
            if j == i {
                continue;
            }
            letters.push(Letter::constant(consts[j].clone()));
            if j != prev {
                letters.push(Letter::Haar(haar[j]));
            }
        }
        alt = alternate(&letters, dim)?;
    }
}

/// Rewrites `Tr(w)` over deterministic constants as a constant plus a
/// combination of traces of simplified words.
///
/// A constant `A` that breaks the simplified form is split as
/// `Å + tr(A)·I`. An identity between mutually adjoint letters cancels them.
pub fn simplify_word(w: &TraceWord, dim: usize) -> Result<Simplification> {
    let mut out = Simplification {
        c0: ExactScalar::zero(),
        terms: Vec::new(),
    };
    let start = cancel_adjoint_pairs(alternate(w.letters(), dim)?, dim)?;
    let mut work = vec![(ExactScalar::one(), start)];
    while let Some((coef, alt)) = work.pop() {
        match alt {
            Alternating::Constant(c) => {
                out.c0 += &coef * &c.trace();
                let centered = c.centered();
                if !centered.is_zero() {
                    out.terms
                        .push((coef, TraceWord::new(vec![Letter::constant(centered)])?));
                }
            }
            Alternating::Mixed { consts, haar } => {
                if consts.iter().any(ExactMatrix::is_zero) {
                    continue;
                }
                let Some(i) = first_violation(&consts, &haar) else {
                    out.terms
                        .push((coef, TraceWord::new(alternating_letters(&consts, &haar))?));
                    continue;
                };
                let t = consts[i].normalized_trace();
                let centered = consts[i].centered();
                if !centered.is_zero() {
                    let mut c1 = consts.clone();
                    c1[i] = centered;
                    work.push((
                        coef.clone(),
                        Alternating::Mixed {
                            consts: c1,
                            haar: haar.clone(),
                        },
                    ));
                }
                let mut c2 = consts;
                c2[i] = ExactMatrix::identity(dim);
                let next = cancel_adjoint_pairs(Alternating::Mixed { consts: c2, haar }, dim)?;
                work.push((coef * t, next));
            }
        }
    }
    Ok(out)
}

/// Limit of `E(tr((U^{(ε,η)})^m (U^{(ε',η')})^n))`: `δ_m^n δ_ε^{-ε'} δ_η^{-η'}`.
/// A negative power is read as the positive power of the adjoint letter.
pub fn first_order_limit(m: i64, a: HaarLetter, n: i64, b: HaarLetter) -> Result<u8> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("powers must be nonzero".into()));
    }
    let (m, a) = if m < 0 { (-m, a.adjoint()) } else { (m, a) };
    let (n, b) = if n < 0 { (-n, b.adjoint()) } else { (n, b) };
    Ok(u8::from(m == n && a.eps == -b.eps && a.eta == -b.eta))
}

/// `(E(u_{11} ū_{22}), E(b^{(1)}_{11} b^{(2)}_{22}))` for `B_k = V A_k V*` with
/// `A_1 = U`, `A_2 = Ū` and `V` the rotation by `θ` in the first two
/// coordinates (`V_{11} = V_{22} = sin θ`, `V_{12} = V_{21} = i cos θ`).
/// The angle enters through the exact value `cos²θ`.
pub fn invariance_counterexample(cos2: &BigRational, dim: usize) -> Result<(ExactScalar, ExactScalar)> {
    if dim < 2 {
        return Err(Error::InvalidInput("need N >= 2".into()));
    }
    if *cos2 < BigRational::zero() || *cos2 > BigRational::one() {
        return Err(Error::InvalidInput("cos²θ must lie in [0, 1]".into()));
    }
    let sin2 = BigRational::one() - cos2;
    let lhs = entry_product_expectation(&[1, -1], &[1, 2], &[1, 2], dim)?;
    // Entries as (coefficient, power of sin θ, power of cos θ, row, col).
    let i = ExactScalar::i();
    let one = ExactScalar::one();
    let b11 = [
        (one.clone(), 2, 0, 1, 1),
        (i.clone(), 1, 1, 2, 1),
        (-&i, 1, 1, 1, 2),
        (one.clone(), 0, 2, 2, 2),
    ];
    let b22 = [
        (one.clone(), 0, 2, 1, 1),
        (-&i, 1, 1, 2, 1),
        (i.clone(), 1, 1, 1, 2),
        (one, 2, 0, 2, 2),
    ];
    let mut rhs = ExactScalar::zero();
    for (ca, sa, ka, ra, cola) in &b11 {
        for (cb, sb, kb, rb, colb) in &b22 {
            let e = entry_product_expectation(&[1, -1], &[*ra, *rb], &[*cola, *colb], dim)?;
            if e.is_zero() {
                continue;
            }
            let (s, k) = (sa + sb, ka + kb);
            if s % 2 == 1 {
                return Err(Error::Internal("odd trigonometric term survived".into()));
            }
            let trig = num_traits::pow(sin2.clone(), s / 2) * num_traits::pow(cos2.clone(), k / 2);
            rhs += ca * cb * e * ExactScalar::real(trig);
        }
    }
    Ok((lhs, rhs))
}

/// An exact rational rotation in the first two coordinates: `[[a,-b],[b,a]]`
/// with `a² + b² = 1`, padded by the identity.
pub fn rational_rotation(dim: usize, a: BigRational, b: BigRational) -> Result<ExactMatrix> {
    if &a * &a + &b * &b != BigRational::one() || dim < 2 {
        return Err(Error::InvalidInput("not a rotation".into()));
    }
    Ok(ExactMatrix::from_fn(dim, |r, c| match (r, c) {
        (0, 0) | (1, 1) => ExactScalar::real(a.clone()),
        (0, 1) => ExactScalar::real(-b.clone()),
        (1, 0) => ExactScalar::real(b.clone()),
        _ if r == c => ExactScalar::one(),
        _ => ExactScalar::zero(),
    }))
}

/// The expression with every constant `C` replaced by `Oᵗ C O`. For an
/// orthogonal `O` this leaves the expectation unchanged.
pub fn conjugate_constants(expr: &TraceProductExpr, o: &ExactMatrix) -> Result<TraceProductExpr> {
    if o.dim() != expr.dim {
        return Err(Error::DimensionMismatch {
            expected: expr.dim,
            found: o.dim(),
        });
    }
    let ot = o.transpose();
    Ok(expr.map_constants(&|c: &ExactMatrix| {
        ot.mul(c)
            .and_then(|x| x.mul(o))
            .expect("constants share the expression dimension")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    const U: HaarLetter = HaarLetter::U;
    const UT: HaarLetter = HaarLetter::TRANSPOSE;
    const UC: HaarLetter = HaarLetter::CONJ;
    const UA: HaarLetter = HaarLetter::ADJOINT;

    fn expect(dim: usize, words: Vec<TraceWord>) -> ExactScalar {
        expected_trace_product(&TraceProductExpr::new(dim, words).unwrap()).unwrap()
    }

    #[test]
    fn entry_examples() {
        for n in 1..=6 {
            assert_eq!(
                entry_product_expectation(&[1, -1], &[1, 1], &[1, 1], n).unwrap(),
                ExactScalar::ratio(1, n as i64)
            );
        }
        assert!(entry_product_expectation(&[1, 1], &[1, 2], &[2, 1], 4).unwrap().is_zero());
        assert_eq!(
            entry_product_expectation(&[1, 1, -1, -1], &[1, 2, 1, 2], &[1, 2, 1, 2], 2).unwrap(),
            ExactScalar::ratio(1, 3)
        );
        assert_eq!(entry_product_expectation(&[], &[], &[], 3).unwrap(), ExactScalar::one());
    }

    #[test]
    fn trace_examples() {
        for n in 1..=5 {
            let n64 = n as i64;
            assert_eq!(expect(n, vec![TraceWord::haar(&[U, UA])]), ExactScalar::int(n64));
            assert_eq!(
                expect(n, vec![TraceWord::haar(&[U]), TraceWord::haar(&[UC])]),
                ExactScalar::one()
            );
            assert_eq!(expect(n, vec![TraceWord::haar(&[U, UC])]), ExactScalar::one());
            assert!(expect(n, vec![TraceWord::haar(&[U, UT])]).is_zero());
        }
        for n in 2..=5 {
            assert_eq!(
                expect(n, vec![TraceWord::haar(&[U, U]), TraceWord::haar(&[UA, UA])]),
                ExactScalar::int(2)
            );
        }
        assert_eq!(expect(3, vec![]), ExactScalar::one());
    }

    #[test]
    fn moments_of_trace_count_permutations_without_long_increasing_runs() {
        // E|Tr U|^{2n} on U(N) counts permutations of [n] whose longest
        // increasing subsequence is at most N.
        let cases = [(2, 1, 1), (3, 1, 1), (3, 2, 5), (4, 2, 14), (4, 3, 23), (3, 3, 6)];
        for (n, dim, count) in cases {
            let mut words = vec![TraceWord::haar(&[U]); n];
            words.extend(vec![TraceWord::haar(&[UC]); n]);
            assert_eq!(expect(dim, words), ExactScalar::int(count), "n={n} N={dim}");
        }
    }

    #[test]
    fn unitarity() {
        for n in 1..=6 {
            assert_eq!(
                expect(n, vec![TraceWord::haar(&[U, UA, U, UA])]),
                ExactScalar::int(n as i64)
            );
        }
    }

    #[test]
    fn first_order_limits() {
        assert_eq!(first_order_limit(1, U, 1, UA).unwrap(), 1);
        assert_eq!(first_order_limit(1, U, 1, UT).unwrap(), 0);
        assert_eq!(first_order_limit(1, U, 2, UA).unwrap(), 0);
        assert_eq!(first_order_limit(-1, U, 1, U).unwrap(), 1);
        assert!(first_order_limit(0, U, 1, U).is_err());
    }

    #[test]
    fn counterexample_values() {
        let (l, r) = invariance_counterexample(&rat(1, 2), 4).unwrap();
        assert!(l.is_zero());
        assert_eq!(r, ExactScalar::ratio(1, 4));
        let (_, r) = invariance_counterexample(&rat(1, 2), 10).unwrap();
        assert_eq!(r, ExactScalar::ratio(1, 10));
        for c in [rat(0, 1), rat(1, 1)] {
            let (l, r) = invariance_counterexample(&c, 5).unwrap();
            assert!(l.is_zero() && r.is_zero());
        }
    }

    #[test]
    fn simplify_constant_word() {
        let a = ExactMatrix::diagonal(vec![ExactScalar::int(3), ExactScalar::int(1)]);
        let s = simplify_word(&TraceWord::new(vec![Letter::constant(a.clone())]).unwrap(), 2).unwrap();
        assert_eq!(s.c0, ExactScalar::int(4));
        assert_eq!(s.terms.len(), 1);
        assert!(s.terms[0].1.is_simplified(2).unwrap());
    }

    #[test]
    fn simplify_single_letter() {
        let a = ExactMatrix::diagonal(vec![ExactScalar::int(3), ExactScalar::int(1)]);
        let w = TraceWord::new(vec![Letter::constant(a), Letter::Haar(U)]).unwrap();
        let s = simplify_word(&w, 2).unwrap();
        assert!(s.c0.is_zero());
        assert_eq!(s.terms.len(), 2);
        let coefs: Vec<_> = s.terms.iter().map(|(c, _)| c.clone()).collect();
        assert!(coefs.contains(&ExactScalar::int(2)));
        assert!(s.terms.iter().all(|(_, w)| w.is_simplified(2).unwrap()));
    }

    #[test]
    fn simplify_cancels_adjoint_neighbours() {
        let a = ExactMatrix::diagonal(vec![ExactScalar::int(1), ExactScalar::int(-1)]);
        let w = TraceWord::new(vec![
            Letter::constant(a),
            Letter::Haar(U),
            Letter::constant(ExactMatrix::identity(2)),
            Letter::Haar(UA),
        ])
        .unwrap();
        let s = simplify_word(&w, 2).unwrap();
        // Tr(A U U*) = Tr(A) = 0 with A already centered.
        assert!(s.c0.is_zero());
        assert_eq!(s.terms.len(), 1);
        assert_eq!(s.terms[0].1.haar_count(), 0);
    }
}
