//! Limit laws for the spectra of `H = U + U*` (arcsine) and of `H + Hᵗ`,
//! whose limit is the free self-convolution of the arcsine law, a
//! Kesten–McKay law.

use std::f64::consts::{FRAC_PI_2, PI};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::combinat::enumerate_nc_partitions;
use crate::error::{Error, Result};

pub const MOMENT_CAP: usize = 8;
const QUAD_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LawKind {
    Arcsine,
    KestenMcKay,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitLaw {
    pub kind: LawKind,
}

impl LimitLaw {
    pub fn arcsine() -> Self {
        LimitLaw { kind: LawKind::Arcsine }
    }

    pub fn kesten_mckay() -> Self {
        LimitLaw { kind: LawKind::KestenMcKay }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LawKind::Arcsine => "arcsine",
            LawKind::KestenMcKay => "kesten-mckay",
        }
    }

    /// Half-width `c` of the symmetric support `[-c, c]`.
    pub fn radius(&self) -> f64 {
        match self.kind {
            LawKind::Arcsine => 2.0,
            LawKind::KestenMcKay => 12f64.sqrt(),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (-self.radius(), self.radius())
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let c = self.radius();
        if x.abs() >= c {
            return 0.0;
        }
        match self.kind {
            LawKind::Arcsine => 1.0 / (PI * (4.0 - x * x).sqrt()),
            LawKind::KestenMcKay => 2.0 * (12.0 - x * x).sqrt() / (PI * (16.0 - x * x)),
        }
    }

    /// Density in the angle `θ` with `x = c sin θ`, i.e. `pdf(x) dx/dθ`.
    /// Smooth on the closed interval, which keeps quadrature accurate.
    fn angular_density(&self, theta: f64) -> f64 {
        let (s, co) = theta.sin_cos();
        match self.kind {
            LawKind::Arcsine => 1.0 / PI,
            LawKind::KestenMcKay => 24.0 * co * co / (PI * (16.0 - 12.0 * s * s)),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let c = self.radius();
        if x <= -c {
            return 0.0;
        }
        if x >= c {
            return 1.0;
        }
        let top = (x / c).asin();
        match self.kind {
            LawKind::Arcsine => 0.5 + top / PI,
            LawKind::KestenMcKay => {
                adaptive_simpson(&|t| self.angular_density(t), -FRAC_PI_2, top, QUAD_TOL).clamp(0.0, 1.0)
            }
        }
    }

    /// `∫ x^k dµ(x)` by quadrature.
    pub fn moment(&self, k: u32) -> f64 {
        let c = self.radius();
        adaptive_simpson(
            &|t| (c * t.sin()).powi(k as i32) * self.angular_density(t),
            -FRAC_PI_2,
            FRAC_PI_2,
            QUAD_TOL,
        )
    }

    /// `x,pdf` at `points` evenly spaced abscissae across the support.
    pub fn sampled_csv(&self, points: usize) -> String {
        let (a, b) = self.support();
        let mut out = String::from("x,pdf\n");
        for k in 0..points {
            let x = a + (b - a) * k as f64 / (points.max(2) - 1) as f64;
            out.push_str(&format!("{:.16e},{:.16e}\n", x, self.pdf(x)));
        }
        out
    }

    /// Exact moments `m_1, …, m_order`.
    pub fn exact_moments(&self, order: usize) -> Result<Vec<BigRational>> {
        let arcsine = arcsine_moments(order)?;
        match self.kind {
            LawKind::Arcsine => Ok(arcsine),
            LawKind::KestenMcKay => free_self_convolution(&arcsine),
        }
    }
}

fn arcsine_moments(order: usize) -> Result<Vec<BigRational>> {
    check_order(order)?;
    Ok((1..=order)
        .map(|k| {
            if k % 2 == 1 {
                BigRational::zero()
            } else {
                BigRational::from_integer(central_binomial(k / 2))
            }
        })
        .collect())
}

fn central_binomial(k: usize) -> BigInt {
    let mut out = BigInt::one();
    for j in 1..=k {
        out = out * BigInt::from(k + j) / BigInt::from(j);
    }
    out
}

fn check_order(order: usize) -> Result<()> {
    if order > MOMENT_CAP {
        return Err(Error::Capacity {
            what: "moment order",
            size: order,
            cap: MOMENT_CAP,
        });
    }
    Ok(())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        // A few forced levels keep symmetric integrands from stopping on a
        // coincidental zero error estimate.
        if depth == 0 || (depth < 36 && diff.abs() <= 15.0 * tol) {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Free cumulants `κ_1, …, κ_n` from moments `m_1, …, m_n`.
pub fn free_cumulants(moments: &[BigRational]) -> Result<Vec<BigRational>> {
    check_order(moments.len())?;
    let mut kappa: Vec<BigRational> = Vec::with_capacity(moments.len());
    for n in 1..=moments.len() {
        let mut rest = BigRational::zero();
        for pi in enumerate_nc_partitions(n)? {
            if pi.num_blocks() == 1 {
                continue;
            }
            rest += pi
                .blocks()
                .iter()
                .fold(BigRational::one(), |acc, b| acc * &kappa[b.len() - 1]);
        }
        kappa.push(&moments[n - 1] - rest);
    }
    Ok(kappa)
}

/// Moments from free cumulants: `m_n = Σ_{π ∈ NC(n)} ∏_{V ∈ π} κ_{|V|}`.
pub fn moments_from_free_cumulants(kappa: &[BigRational]) -> Result<Vec<BigRational>> {
    check_order(kappa.len())?;
    (1..=kappa.len())
        .map(|n| {
            Ok(enumerate_nc_partitions(n)?
                .iter()
                .map(|pi| {
                    pi.blocks()
                        .iter()
                        .fold(BigRational::one(), |acc, b| acc * &kappa[b.len() - 1])
                })
                .sum())
        })
        .collect()
}

/// Moments of `µ ⊞ µ`: free cumulants double.
pub fn free_self_convolution(moments: &[BigRational]) -> Result<Vec<BigRational>> {
    let two = BigRational::from_integer(2.into());
    let kappa: Vec<BigRational> = free_cumulants(moments)?.into_iter().map(|k| k * &two).collect();
    moments_from_free_cumulants(&kappa)
}

/// Compares quadrature moments against the exact sequence; returns the
/// largest absolute deviation over `m_1..m_order`.
pub fn moment_check(law: &LimitLaw, order: usize) -> Result<f64> {
    let exact = law.exact_moments(order)?;
    Ok(exact
        .iter()
        .enumerate()
        .map(|(k, m)| (law.moment(k as u32 + 1) - crate::weingarten::rational_to_f64(m)).abs())
        .fold(0.0, f64::max))
}
