//! Text syntax for matrix expressions and trace polynomials.
//!
//! Matrix expressions are built from `U`, `Ut`, `Uc`, `U*`, `I`, `X22`
//! (the superdiagonal matrix with entries `i^k`) and named constants,
//! combined by juxtaposition or `*`, sums, rational or `i` scalars, and the
//! postfix operators `^t`, `^c`, `^*` and `^k`. `U*` directly followed by
//! anything is always the adjoint letter; write `U * A` for a product.
//!
//! Trace polynomials are sums of products of `Tr(expr)` and `tr(expr)`
//! (normalized trace) with scalar coefficients, e.g.
//! `Tr(U A U*) tr(B) - 1/2*Tr(Ut)` or `(1/3-2*i) Tr(U^2)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{ExactMatrix, ExactScalar};
use crate::exec::Execution;
use crate::haar_expect::{
    expected_trace_product_with, ConstantLetter, HaarLetter, Letter, TraceProductExpr, TraceWord,
};

pub type CMatrix = DMatrix<Complex64>;

pub fn to_cmatrix(m: &ExactMatrix) -> CMatrix {
    let n = m.dim();
    match m {
        ExactMatrix::Identity(_) => CMatrix::identity(n, n),
        _ => {
            let rows = m.to_complex_rows();
            CMatrix::from_fn(n, n, |i, j| rows[i][j])
        }
    }
}

#[derive(Clone, Debug)]
struct Entry {
    exact: Arc<ExactMatrix>,
    numeric: Arc<CMatrix>,
    /// The diagonal, when every off-diagonal entry is zero.
    diagonal: Option<Arc<Vec<Complex64>>>,
}

impl Entry {
    fn new(m: ExactMatrix) -> Self {
        let numeric = to_cmatrix(&m);
        let n = m.dim();
        let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || numeric[(i, j)] == Complex64::new(0.0, 0.0)));
        Entry {
            diagonal: is_diag.then(|| Arc::new((0..n).map(|i| numeric[(i, i)]).collect())),
            numeric: Arc::new(numeric),
            exact: Arc::new(m),
        }
    }
}

/// Named deterministic matrices at a fixed dimension.
#[derive(Clone, Debug)]
pub struct Constants {
    dim: usize,
    named: HashMap<String, Entry>,
    x22: Arc<OnceLock<Entry>>,
}

impl Constants {
    pub fn new(dim: usize) -> Self {
        Constants {
            dim,
            named: HashMap::new(),
            x22: Arc::new(OnceLock::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, name: &str, m: ExactMatrix) -> Result<()> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.dim(),
            });
        }
        if !is_identifier(name) || RESERVED.contains(&name) {
            return Err(Error::InvalidInput(format!("`{name}` cannot name a constant")));
        }
        self.named.insert(name.to_string(), Entry::new(m));
        Ok(())
    }

    pub fn with(mut self, name: &str, m: ExactMatrix) -> Result<Self> {
        self.insert(name, m)?;
        Ok(self)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.named.keys().map(String::as_str)
    }

    fn entry(&self, name: &str) -> Result<&Entry> {
        self.named
            .get(name)
            .ok_or_else(|| Error::UnknownConstant(name.to_string()))
    }

    fn x22(&self) -> &Entry {
        self.x22
            .get_or_init(|| Entry::new(ExactMatrix::superdiagonal_i_powers(self.dim)))
    }

    pub fn exact(&self, name: &str) -> Result<Arc<ExactMatrix>> {
        Ok(self.entry(name)?.exact.clone())
    }
}

const RESERVED: [&str; 8] = ["U", "Ut", "Uc", "I", "X22", "Tr", "tr", "i"];

fn is_identifier(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixExpr {
    Haar(HaarLetter),
    Named(String),
    Identity,
    X22,
    Transpose(Box<MatrixExpr>),
    Conj(Box<MatrixExpr>),
    Adjoint(Box<MatrixExpr>),
    Power(Box<MatrixExpr>, u32),
    Scale(ExactScalar, Box<MatrixExpr>),
    Product(Vec<MatrixExpr>),
    Sum(Vec<MatrixExpr>),
}

/// `coef · L_1 ⋯ L_k`; an empty letter list is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: ExactScalar,
    pub letters: Vec<Letter>,
}

fn transpose_letters(ms: Vec<Monomial>) -> Vec<Monomial> {
    ms.into_iter()
        .map(|m| Monomial {
            coef: m.coef,
            letters: m
                .letters
                .into_iter()
                .rev()
                .map(|l| match l {
                    Letter::Haar(h) => Letter::Haar(h.transpose()),
                    Letter::Const(c) => Letter::Const(c.transposed()),
                })
                .collect(),
        })
        .collect()
}

fn conj_letters(ms: Vec<Monomial>) -> Vec<Monomial> {
    ms.into_iter()
        .map(|m| Monomial {
            coef: m.coef.conj(),
            letters: m
                .letters
                .into_iter()
                .map(|l| match l {
                    Letter::Haar(h) => Letter::Haar(h.conj()),
                    Letter::Const(c) => {
                        let name = format!("{}^c", c.name.as_deref().unwrap_or("C"));
                        Letter::Const(ConstantLetter::named(&name, Arc::new(c.value().conj())))
                    }
                })
                .collect(),
        })
        .collect()
}

fn multiply(a: &[Monomial], b: &[Monomial]) -> Vec<Monomial> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let mut letters = x.letters.clone();
            letters.extend(y.letters.iter().cloned());
            out.push(Monomial {
                coef: &x.coef * &y.coef,
                letters,
            });
        }
    }
    out
}

const MONOMIAL_CAP: usize = 4096;

impl MatrixExpr {
    /// Expands into a sum of monomials.
    pub fn monomials(&self, consts: &Constants) -> Result<Vec<Monomial>> {
        let out = match self {
            MatrixExpr::Haar(h) => vec![Monomial {
                coef: ExactScalar::one(),
                letters: vec![Letter::Haar(*h)],
            }],
            MatrixExpr::Named(name) => vec![Monomial {
                coef: ExactScalar::one(),
                letters: vec![Letter::Const(ConstantLetter::named(name, consts.exact(name)?))],
            }],
            MatrixExpr::Identity => vec![Monomial {
                coef: ExactScalar::one(),
                letters: Vec::new(),
            }],
            MatrixExpr::X22 => vec![Monomial {
                coef: ExactScalar::one(),
                letters: vec![Letter::Const(ConstantLetter::named("X22", consts.x22().exact.clone()))],
            }],
            MatrixExpr::Transpose(e) => transpose_letters(e.monomials(consts)?),
            MatrixExpr::Conj(e) => conj_letters(e.monomials(consts)?),
            MatrixExpr::Adjoint(e) => conj_letters(transpose_letters(e.monomials(consts)?)),
            MatrixExpr::Power(e, k) => {
                let base = e.monomials(consts)?;
                let mut acc = MatrixExpr::Identity.monomials(consts)?;
                for _ in 0..*k {
                    acc = multiply(&acc, &base);
                    check_cap(acc.len())?;
                }
                acc
            }
            MatrixExpr::Scale(c, e) => {
                let mut ms = e.monomials(consts)?;
                for m in &mut ms {
                    m.coef = c * &m.coef;
                }
                ms
            }
            MatrixExpr::Product(es) => {
                let mut acc = MatrixExpr::Identity.monomials(consts)?;
                for e in es {
                    acc = multiply(&acc, &e.monomials(consts)?);
                    check_cap(acc.len())?;
                }
                acc
            }
            MatrixExpr::Sum(es) => {
                let mut acc = Vec::new();
                for e in es {
                    acc.extend(e.monomials(consts)?);
                }
                acc
            }
        };
        check_cap(out.len())?;
        Ok(out)
    }

    /// Numerical value for a given realization of `U`.
    pub fn eval(&self, u: &CMatrix, consts: &Constants) -> Result<CMatrix> {
        let n = consts.dim();
        if u.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.nrows(),
            });
        }
        Ok(match self {
            MatrixExpr::Haar(h) => match (h.eps, h.eta) {
                (1, 1) => u.clone(),
                (-1, 1) => u.transpose(),
                (1, _) => u.conjugate(),
                _ => u.adjoint(),
            },
            MatrixExpr::Named(name) => (*consts.entry(name)?.numeric).clone(),
            MatrixExpr::Identity => CMatrix::identity(n, n),
            MatrixExpr::X22 => (*consts.x22().numeric).clone(),
            MatrixExpr::Transpose(e) => e.eval(u, consts)?.transpose(),
            MatrixExpr::Conj(e) => e.eval(u, consts)?.conjugate(),
            MatrixExpr::Adjoint(e) => e.eval(u, consts)?.adjoint(),
            MatrixExpr::Power(e, k) => {
                let base = e.eval(u, consts)?;
                let mut acc = CMatrix::identity(n, n);
                for _ in 0..*k {
                    acc = &acc * &base;
                }
                acc
            }
            MatrixExpr::Scale(c, e) => e.eval(u, consts)? * c.to_complex64(),
            MatrixExpr::Product(es) => eval_product(es, u, consts)?,
            MatrixExpr::Sum(es) => {
                let mut acc = CMatrix::zeros(n, n);
                for e in es {
                    acc += e.eval(u, consts)?;
                }
                acc
            }
        })
    }

    /// `Tr` of the value, sparing the last multiplication of a product.
    pub fn eval_trace(&self, u: &CMatrix, consts: &Constants) -> Result<Complex64> {
        match self {
            MatrixExpr::Product(es) if es.len() >= 2 => {
                let (last, init) = es.split_last().expect("nonempty");
                let p = eval_product(init, u, consts)?;
                let l = last.eval(u, consts)?;
                Ok(p.component_mul(&l.transpose()).sum())
            }
            _ => Ok(self.eval(u, consts)?.trace()),
        }
    }

    fn diagonal<'a>(&self, consts: &'a Constants) -> Option<&'a Arc<Vec<Complex64>>> {
        match self {
            MatrixExpr::Named(name) => consts.entry(name).ok()?.diagonal.as_ref(),
            MatrixExpr::X22 => consts.x22().diagonal.as_ref(),
            _ => None,
        }
    }

    pub fn uses_haar(&self) -> bool {
        match self {
            MatrixExpr::Haar(_) => true,
            MatrixExpr::Named(_) | MatrixExpr::Identity | MatrixExpr::X22 => false,
            MatrixExpr::Transpose(e)
            | MatrixExpr::Conj(e)
            | MatrixExpr::Adjoint(e)
            | MatrixExpr::Power(e, _)
            | MatrixExpr::Scale(_, e) => e.uses_haar(),
            MatrixExpr::Product(es) | MatrixExpr::Sum(es) => es.iter().any(MatrixExpr::uses_haar),
        }
    }
}

fn eval_product(es: &[MatrixExpr], u: &CMatrix, consts: &Constants) -> Result<CMatrix> {
    let mut acc: Option<CMatrix> = None;
    for e in es {
        if matches!(e, MatrixExpr::Identity) {
            continue;
        }
        acc = Some(match (acc, e.diagonal(consts)) {
            (Some(mut a), Some(d)) => {
                for (j, dj) in d.iter().enumerate() {
                    let mut col = a.column_mut(j);
                    col *= *dj;
                }
                a
            }
            (Some(a), None) => a * e.eval(u, consts)?,
            (None, _) => e.eval(u, consts)?,
        });
    }
    Ok(acc.unwrap_or_else(|| CMatrix::identity(consts.dim(), consts.dim())))
}

fn check_cap(len: usize) -> Result<()> {
    if len > MONOMIAL_CAP {
        return Err(Error::Capacity {
            what: "expanded monomials",
            size: len,
            cap: MONOMIAL_CAP,
        });
    }
    Ok(())
}

impl fmt::Display for MatrixExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let group = |e: &MatrixExpr, f: &mut fmt::Formatter<'_>| match e {
            MatrixExpr::Product(_) | MatrixExpr::Sum(_) | MatrixExpr::Scale(..) => write!(f, "({e})"),
            _ => write!(f, "{e}"),
        };
        match self {
            MatrixExpr::Haar(h) => write!(f, "{h}"),
            MatrixExpr::Named(n) => f.write_str(n),
            MatrixExpr::Identity => f.write_str("I"),
            MatrixExpr::X22 => f.write_str("X22"),
            MatrixExpr::Transpose(e) => {
                group(e, f)?;
                f.write_str("^t")
            }
            MatrixExpr::Conj(e) => {
                group(e, f)?;
                f.write_str("^c")
            }
            MatrixExpr::Adjoint(e) => {
                group(e, f)?;
                f.write_str("^*")
            }
            MatrixExpr::Power(e, k) => {
                group(e, f)?;
                write!(f, "^{k}")
            }
            MatrixExpr::Scale(c, e) => {
                write!(f, "({c})*")?;
                group(e, f)
            }
            MatrixExpr::Product(es) => {
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    match e {
                        MatrixExpr::Sum(_) => write!(f, "({e})")?,
                        _ => write!(f, "{e}")?,
                    }
                }
                Ok(())
            }
            MatrixExpr::Sum(es) => {
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
        }
    }
}

/// `Tr(expr)`, or `tr(expr) = Tr(expr)/N` when `normalized`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceFactor {
    pub normalized: bool,
    pub expr: MatrixExpr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceTerm {
    pub coef: ExactScalar,
    pub factors: Vec<TraceFactor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracePolynomial {
    pub terms: Vec<TraceTerm>,
}

impl TracePolynomial {
    pub fn single(normalized: bool, expr: MatrixExpr) -> Self {
        TracePolynomial {
            terms: vec![TraceTerm {
                coef: ExactScalar::one(),
                factors: vec![TraceFactor { normalized, expr }],
            }],
        }
    }

    /// Product of two polynomials.
    pub fn times(&self, other: &TracePolynomial) -> TracePolynomial {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(TraceTerm {
                    coef: &a.coef * &b.coef,
                    factors,
                });
            }
        }
        TracePolynomial { terms }
    }

    /// Expands into trace products of words.
    pub fn products(&self, consts: &Constants) -> Result<Vec<TraceProductExpr>> {
        let dim = consts.dim();
        let inv_dim = ExactScalar::real(BigRational::new(BigInt::one(), BigInt::from(dim)));
        let mut out = Vec::new();
        for term in &self.terms {
            let mut partial: Vec<(ExactScalar, Vec<TraceWord>)> = vec![(term.coef.clone(), Vec::new())];
            for factor in &term.factors {
                let mut next = Vec::new();
                for m in factor.expr.monomials(consts)? {
                    let letters = if m.letters.is_empty() {
                        vec![Letter::constant(ExactMatrix::identity(dim))]
                    } else {
                        m.letters
                    };
                    let word = TraceWord::new(letters)?;
                    let scale = if factor.normalized { &m.coef * &inv_dim } else { m.coef };
                    for (c, ws) in &partial {
                        let mut ws = ws.clone();
                        ws.push(word.clone());
                        next.push((c * &scale, ws));
                    }
                }
                check_cap(next.len())?;
                partial = next;
            }
            for (c, words) in partial {
                if !c.is_zero() {
                    out.push(TraceProductExpr::new(dim, words)?.with_coefficient(c));
                }
            }
        }
        Ok(out)
    }

    /// Exact expectation over a Haar unitary.
    pub fn expectation(&self, consts: &Constants, exec: Execution) -> Result<ExactScalar> {
        let mut total = ExactScalar::zero();
        for p in self.products(consts)? {
            total += expected_trace_product_with(&p, exec)?;
        }
        Ok(total)
    }

    /// Numerical value for one realization of `U`.
    pub fn eval(&self, u: &CMatrix, consts: &Constants) -> Result<Complex64> {
        let n = consts.dim() as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let mut v = term.coef.to_complex64();
            for f in &term.factors {
                let t = f.expr.eval_trace(u, consts)?;
                v *= if f.normalized { t / n } else { t };
            }
            total += v;
        }
        Ok(total)
    }
}

impl fmt::Display for TracePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            let unit = t.coef.is_one() && !t.factors.is_empty();
            if !unit {
                write!(f, "({})", t.coef)?;
            }
            for (j, fac) in t.factors.iter().enumerate() {
                if j > 0 || !unit {
                    f.write_str(" ")?;
                }
                let name = if fac.normalized { "tr" } else { "Tr" };
                write!(f, "{name}({})", fac.expr)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    AdjU,
    Post(Postfix),
    Star,
    Slash,
    Plus,
    Minus,
    LParen,
    RParen,
}

#[derive(Clone, Debug, PartialEq)]
enum Postfix {
    T,
    C,
    Adj,
    Pow(u32),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: &str| Error::Parse {
        offset,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '0'..='9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((start, Tok::Num(src[start..i].parse().expect("digits"))));
                continue;
            }
            'A'..='Z' | 'a'..='z' | '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &src[start..i];
                if word == "U" && bytes.get(i) == Some(&b'*') {
                    i += 1;
                    out.push((start, Tok::AdjU));
                } else {
                    out.push((start, Tok::Ident(word.to_string())));
                }
                continue;
            }
            '^' => {
                i += 1;
                match bytes.get(i).map(|&b| b as char) {
                    Some('t') => Tok::Post(Postfix::T),
                    Some('c') => Tok::Post(Postfix::C),
                    Some('*') => Tok::Post(Postfix::Adj),
                    Some(d) if d.is_ascii_digit() => {
                        let s = i;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                        let k = src[s..i].parse().map_err(|_| err(s, "exponent too large"))?;
                        out.push((start, Tok::Post(Postfix::Pow(k))));
                        continue;
                    }
                    _ => return Err(err(i, "expected `t`, `c`, `*` or an exponent after `^`")),
                }
            }
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => return Err(err(start, &format!("unexpected character `{c}`"))),
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.src.len(), |(o, _)| *o)
    }

    fn err<T>(&self, message: &str) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.to_string(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(&format!("expected {what}"))
        }
    }

    fn at_scalar(&self) -> bool {
        matches!(self.peek(), Some(Tok::Num(_))) || matches!(self.peek(), Some(Tok::Ident(s)) if s == "i")
    }

    fn scalar(&mut self) -> Result<ExactScalar> {
        match self.bump() {
            Some(Tok::Num(n)) => {
                let den = if self.eat(&Tok::Slash) {
                    match self.bump() {
                        Some(Tok::Num(d)) if !d.is_zero() => d,
                        _ => {
                            self.pos -= 1;
                            return self.err("expected a nonzero denominator");
                        }
                    }
                } else {
                    BigInt::one()
                };
                Ok(ExactScalar::real(BigRational::new(n, den)))
            }
            Some(Tok::Ident(s)) if s == "i" => Ok(ExactScalar::i()),
            _ => {
                self.pos -= 1;
                self.err("expected a scalar")
            }
        }
    }

    fn at_matrix_atom(&self) -> bool {
        match self.peek() {
            Some(Tok::AdjU) | Some(Tok::LParen) => true,
            Some(Tok::Ident(s)) => !matches!(s.as_str(), "i" | "Tr" | "tr"),
            _ => false,
        }
    }

    fn matrix_sum(&mut self) -> Result<MatrixExpr> {
        let mut terms = Vec::new();
        let mut negate = self.eat(&Tok::Minus);
        if !negate {
            self.eat(&Tok::Plus);
        }
        loop {
            let t = self.matrix_term()?;
            terms.push(if negate {
                MatrixExpr::Scale(ExactScalar::int(-1), Box::new(t))
            } else {
                t
            });
            if self.eat(&Tok::Plus) {
                negate = false;
            } else if self.eat(&Tok::Minus) {
                negate = true;
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            MatrixExpr::Sum(terms)
        })
    }

    fn matrix_term(&mut self) -> Result<MatrixExpr> {
        let mut coef = ExactScalar::one();
        let mut factors = Vec::new();
        let mut any = false;
        loop {
            if self.at_scalar() {
                coef = coef * self.scalar()?;
            } else if self.at_matrix_atom() {
                factors.push(self.matrix_factor()?);
            } else if any {
                return self.err("expected a factor after `*`");
            } else {
                return self.err("expected a matrix term");
            }
            any = true;
            if !self.eat(&Tok::Star) && !self.at_scalar() && !self.at_matrix_atom() {
                break;
            }
        }
        let body = match factors.len() {
            0 => MatrixExpr::Identity,
            1 => factors.pop().expect("one factor"),
            _ => MatrixExpr::Product(factors),
        };
        Ok(if coef.is_one() {
            body
        } else {
            MatrixExpr::Scale(coef, Box::new(body))
        })
    }

    fn matrix_factor(&mut self) -> Result<MatrixExpr> {
        let mut e = match self.bump() {
            Some(Tok::AdjU) => MatrixExpr::Haar(HaarLetter::ADJOINT),
            Some(Tok::LParen) => {
                let inner = self.matrix_sum()?;
                self.expect(&Tok::RParen, "`)`")?;
                inner
            }
            Some(Tok::Ident(s)) => match s.as_str() {
                "U" => MatrixExpr::Haar(HaarLetter::U),
                "Ut" => MatrixExpr::Haar(HaarLetter::TRANSPOSE),
                "Uc" => MatrixExpr::Haar(HaarLetter::CONJ),
                "I" => MatrixExpr::Identity,
                "X22" => MatrixExpr::X22,
                _ => MatrixExpr::Named(s),
            },
            _ => {
                self.pos -= 1;
                return self.err("expected a matrix");
            }
        };
        while let Some(Tok::Post(p)) = self.peek().cloned() {
            self.pos += 1;
            e = match p {
                Postfix::T => MatrixExpr::Transpose(Box::new(e)),
                Postfix::C => MatrixExpr::Conj(Box::new(e)),
                Postfix::Adj => MatrixExpr::Adjoint(Box::new(e)),
                Postfix::Pow(k) => MatrixExpr::Power(Box::new(e), k),
            };
        }
        Ok(e)
    }

    /// `( ±s … ±s )` with each `s` a `*`-product of scalars.
    fn scalar_group(&mut self) -> Result<ExactScalar> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut total = ExactScalar::zero();
        let mut negate = self.eat(&Tok::Minus);
        if !negate {
            self.eat(&Tok::Plus);
        }
        loop {
            let mut v = self.scalar()?;
            while self.eat(&Tok::Star) {
                v = v * self.scalar()?;
            }
            total += if negate { -v } else { v };
            if self.eat(&Tok::Plus) {
                negate = false;
            } else if self.eat(&Tok::Minus) {
                negate = true;
            } else {
                break;
            }
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(total)
    }

    fn trace_term(&mut self) -> Result<TraceTerm> {
        let mut coef = ExactScalar::one();
        let mut factors = Vec::new();
        loop {
            match self.peek() {
                _ if self.at_scalar() => coef = coef * self.scalar()?,
                Some(Tok::LParen) => coef = coef * self.scalar_group()?,
                Some(Tok::Ident(s)) if s == "Tr" || s == "tr" => {
                    let normalized = s == "tr";
                    self.pos += 1;
                    self.expect(&Tok::LParen, "`(` after the trace")?;
                    let expr = self.matrix_sum()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    factors.push(TraceFactor { normalized, expr });
                }
                _ => return self.err("expected `Tr(...)`, `tr(...)` or a scalar"),
            }
            let star = self.eat(&Tok::Star);
            let more = self.at_scalar()
                || matches!(self.peek(), Some(Tok::LParen))
                || matches!(self.peek(), Some(Tok::Ident(s)) if s == "Tr" || s == "tr");
            if !more {
                if star {
                    return self.err("expected a factor after `*`");
                }
                break;
            }
        }
        Ok(TraceTerm { coef, factors })
    }

    fn trace_poly(&mut self) -> Result<TracePolynomial> {
        let mut terms = Vec::new();
        let mut negate = self.eat(&Tok::Minus);
        if !negate {
            self.eat(&Tok::Plus);
        }
        loop {
            let mut t = self.trace_term()?;
            if negate {
                t.coef = -t.coef;
            }
            terms.push(t);
            if self.eat(&Tok::Plus) {
                negate = false;
            } else if self.eat(&Tok::Minus) {
                negate = true;
            } else {
                break;
            }
        }
        Ok(TracePolynomial { terms })
    }

    fn finish(&self) -> Result<()> {
        if self.pos < self.toks.len() {
            return self.err("unexpected trailing input");
        }
        Ok(())
    }
}

fn parser(src: &str) -> Result<Parser<'_>> {
    Ok(Parser {
        toks: tokenize(src)?,
        pos: 0,
        src,
    })
}

pub fn parse_matrix_expr(src: &str) -> Result<MatrixExpr> {
    let mut p = parser(src)?;
    let e = p.matrix_sum()?;
    p.finish()?;
    Ok(e)
}

pub fn parse_trace_polynomial(src: &str) -> Result<TracePolynomial> {
    let mut p = parser(src)?;
    let e = p.trace_poly()?;
    p.finish()?;
    Ok(e)
}

/// Reads `row,col,re_num,re_den,im_num,im_den` rows (1-based indices, header
/// optional, unlisted entries zero) into a dense `dim × dim` matrix.
pub fn parse_matrix_csv(text: &str, dim: usize) -> Result<ExactMatrix> {
    let mut data = vec![ExactScalar::zero(); dim * dim];
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let here = offset;
        offset += line.len();
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("row") {
            continue;
        }
        let bad = |message: String| Error::Parse { offset: here, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        }
        let ints: Vec<BigInt> = fields
            .iter()
            .map(|f| f.parse::<BigInt>().map_err(|_| bad(format!("`{f}` is not an integer"))))
            .collect::<Result<_>>()?;
        let index = |v: &BigInt| -> Result<usize> {
            usize::try_from(v.clone())
                .ok()
                .filter(|&k| (1..=dim).contains(&k))
                .ok_or_else(|| bad(format!("index {v} outside 1..={dim}")))
        };
        let (r, c) = (index(&ints[0])?, index(&ints[1])?);
        if ints[3].is_zero() || ints[5].is_zero() {
            return Err(bad("zero denominator".into()));
        }
        data[(r - 1) * dim + c - 1] = ExactScalar::new(
            BigRational::new(ints[2].clone(), ints[3].clone()),
            BigRational::new(ints[4].clone(), ints[5].clone()),
        );
    }
    ExactMatrix::dense(dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    fn consts(dim: usize) -> Constants {
        Constants::new(dim)
            .with("A", ExactMatrix::balanced_signs(dim))
            .unwrap()
            .with("B", ExactMatrix::from_fn(dim, |i, j| ExactScalar::int((i + 2 * j) as i64 % 3)))
            .unwrap()
    }

    #[test]
    fn letters_and_postfix() {
        assert_eq!(parse_matrix_expr("U*").unwrap(), MatrixExpr::Haar(HaarLetter::ADJOINT));
        assert_eq!(
            parse_matrix_expr("U * A").unwrap(),
            MatrixExpr::Product(vec![MatrixExpr::Haar(HaarLetter::U), MatrixExpr::Named("A".into())])
        );
        let e = parse_matrix_expr("(U A U*)^t").unwrap();
        assert!(matches!(e, MatrixExpr::Transpose(_)));
        let e = parse_matrix_expr("U^3").unwrap();
        assert_eq!(e, MatrixExpr::Power(Box::new(MatrixExpr::Haar(HaarLetter::U)), 3));
    }

    #[test]
    fn expectations() {
        let c = Constants::new(3);
        let e = |s: &str| parse_trace_polynomial(s).unwrap().expectation(&c, Execution::Sequential).unwrap();
        assert_eq!(e("Tr(U) Tr(U*)"), ExactScalar::one());
        assert_eq!(e("Tr(U U*)"), ExactScalar::int(3));
        assert_eq!(e("tr(I) - 1/2*Tr(U)Tr(Uc)"), ExactScalar::ratio(1, 2));
        assert_eq!(e("Tr((U + U*)^2)"), ExactScalar::int(6));
        assert_eq!(e("2"), ExactScalar::int(2));
    }

    #[test]
    fn transposes_match_numeric() {
        let c = consts(3);
        let u = CMatrix::from_fn(3, 3, |i, j| Complex64::new(i as f64 + 1.0, j as f64 - 0.5));
        let a = parse_matrix_expr("(U A^c B)^t").unwrap();
        let b = parse_matrix_expr("B^t A^* Ut").unwrap();
        let (x, y) = (a.eval(&u, &c).unwrap(), b.eval(&u, &c).unwrap());
        assert!((x - y).norm() < 1e-12);
        let poly = parse_trace_polynomial("Tr((U A B)^t (U A B))").unwrap();
        let handmade = {
            let m = parse_matrix_expr("U A B").unwrap().eval(&u, &c).unwrap();
            (m.transpose() * &m).trace()
        };
        assert!((poly.eval(&u, &c).unwrap() - handmade).norm() < 1e-9);
    }

    #[test]
    fn product_shortcuts() {
        let c = consts(3);
        let u = CMatrix::from_fn(3, 3, |i, j| Complex64::new((i * j) as f64 - 1.0, i as f64));
        let a = to_cmatrix(&ExactMatrix::balanced_signs(3));
        let b = to_cmatrix(&c.exact("B").unwrap());
        let direct = &u * &a * u.adjoint() * &b * &a;
        let e = parse_matrix_expr("U A I U* B A").unwrap();
        assert!((e.eval(&u, &c).unwrap() - &direct).norm() < 1e-12);
        assert!((e.eval_trace(&u, &c).unwrap() - direct.trace()).norm() < 1e-12);
    }

    #[test]
    fn monomial_expansion_agrees_with_eval() {
        let c = consts(2);
        let u = CMatrix::from_fn(2, 2, |i, j| Complex64::new(0.3 * i as f64, 1.0 - j as f64));
        let e = parse_matrix_expr("(1/2*U - i*A^t)(B + Uc)^* X22").unwrap();
        let direct = e.eval(&u, &c).unwrap();
        let mut summed = CMatrix::zeros(2, 2);
        for m in e.monomials(&c).unwrap() {
            let mut acc = CMatrix::identity(2, 2) * m.coef.to_complex64();
            for l in &m.letters {
                let x = match l {
                    Letter::Haar(h) => MatrixExpr::Haar(*h).eval(&u, &c).unwrap(),
                    Letter::Const(k) => to_cmatrix(&k.value()),
                };
                acc *= x;
            }
            summed += acc;
        }
        assert!((direct - summed).norm() < 1e-12);
    }

    #[test]
    fn parse_errors() {
        for bad in ["Tr(U", "Tr(U) +", "Tr(U)^t", "tr()", "U^q", "Tr(1/0*U)", "Tr(U) ? 2"] {
            assert!(matches!(parse_trace_polynomial(bad), Err(Error::Parse { .. })), "{bad}");
        }
        let c = Constants::new(2);
        let p = parse_trace_polynomial("Tr(Q)").unwrap();
        assert_eq!(
            p.expectation(&c, Execution::Sequential),
            Err(Error::UnknownConstant("Q".into()))
        );
    }

    #[test]
    fn csv_matrix() {
        let m = parse_matrix_csv("row,col,re_num,re_den,im_num,im_den\n1,2,1,2,0,1\n2,1,0,1,-3,4\n", 2).unwrap();
        assert_eq!(m.get(0, 1), ExactScalar::ratio(1, 2));
        assert_eq!(m.get(1, 0), ExactScalar::new(rat(0, 1), rat(-3, 4)));
        assert!(m.get(0, 0).is_zero());
        assert!(matches!(parse_matrix_csv("3,1,1,1,0,1\n", 2), Err(Error::Parse { .. })));
    }

    #[test]
    fn display_roundtrip() {
        for s in ["Tr(U A U*) tr(B^t)", "(1/2) Tr(U^2)", "Tr((U + A)^t)", "(-1/3-2*i) Tr(U)", "Tr(U)-(i)"] {
            let p = parse_trace_polynomial(s).unwrap();
            let again = parse_trace_polynomial(&p.to_string()).unwrap();
            assert_eq!(p, again, "{s} -> {p}");
        }
    }
}
