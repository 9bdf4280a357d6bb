//! Monte Carlo over Haar unitaries: sampling, realized ensembles, spectra,
//! trace statistics and distribution distances.
//!
//! Replica `r` draws its unitaries from `ChaCha8Rng` seeded with
//! `seed ^ r`, so results are bit-identical for sequential and parallel
//! execution and for any worker count.

use nalgebra::linalg::{SymmetricEigen, QR};
use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cumulant_alg::{empirical_cumulants, EmpiricalCumulants};
use crate::densities::LimitLaw;
use crate::error::{Error, Result};
use crate::exact::ExactMatrix;
use crate::exec::Execution;
use crate::syntax::{CMatrix, Constants, MatrixExpr, TracePolynomial};

pub const SELF_ADJOINT_TOL: f64 = 1e-8;
pub const MIN_BINS: usize = 10;
pub const MIN_REPLICAS: usize = 10;

pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ replica as u64)
}

/// Haar unitary from the QR decomposition of a complex Ginibre matrix,
/// with the phases of `R`'s diagonal folded back into `Q`.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    });
    let qr = QR::new(z);
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// A matrix model in one Haar unitary (letters `U`, `Ut`, `Uc`, `U*`) and
/// named constants.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub recipe: MatrixExpr,
    pub constants: Constants,
}

impl EnsembleSpec {
    pub fn new(recipe: MatrixExpr, constants: Constants) -> Self {
        EnsembleSpec { recipe, constants }
    }

    pub fn dim(&self) -> usize {
        self.constants.dim()
    }
}

/// One draw of the ensemble for replica `replica`.
pub fn realize(spec: &EnsembleSpec, seed: u64, replica: usize) -> Result<CMatrix> {
    let u = sample_haar_unitary(spec.dim(), &mut replica_rng(seed, replica));
    spec.recipe.eval(&u, &spec.constants)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSample {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// `(seed, replica)` when the matrix came from [`realize`].
    pub origin: Option<(u64, usize)>,
}

impl SpectralSample {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Eigenvalues of a self-adjoint matrix.
pub fn spectrum(m: &CMatrix) -> Result<SpectralSample> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.norm().max(1.0);
    let skew = (m - m.adjoint()).norm() / scale;
    if skew > SELF_ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint(skew));
    }
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(SpectralSample {
        eigenvalues,
        origin: None,
    })
}

/// Spectrum of one realization, tagged with its seed and replica.
pub fn realized_spectrum(spec: &EnsembleSpec, seed: u64, replica: usize) -> Result<SpectralSample> {
    let mut s = spectrum(&realize(spec, seed, replica)?)?;
    s.origin = Some((seed, replica));
    Ok(s)
}

/// Per-replica values of several trace observables.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStatistics {
    pub labels: Vec<String>,
    /// `samples[v][r]`: observable `v` in replica `r`.
    pub samples: Vec<Vec<Complex64>>,
    pub seed: u64,
}

impl TraceStatistics {
    pub fn replicas(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn mean(&self, v: usize) -> Complex64 {
        let xs = &self.samples[v];
        xs.iter().sum::<Complex64>() / xs.len() as f64
    }

    /// `E(X_i X_j) - E(X_i) E(X_j)`, without conjugation.
    pub fn covariance(&self, i: usize, j: usize) -> Complex64 {
        let (mi, mj) = (self.mean(i), self.mean(j));
        let n = self.replicas() as f64;
        self.samples[i]
            .iter()
            .zip(&self.samples[j])
            .map(|(a, b)| (a - mi) * (b - mj))
            .sum::<Complex64>()
            / n
    }

    /// Cumulants up to order four with batch-means errors for orders 1 and 2.
    pub fn cumulants(&self, max_order: usize) -> Result<EmpiricalCumulants> {
        empirical_cumulants(&self.samples, max_order)
    }

    /// Appends the replicas of `other`, which must track the same labels.
    pub fn merge(&mut self, other: &TraceStatistics) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::InvalidInput("merged statistics track different observables".into()));
        }
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            a.extend_from_slice(b);
        }
        Ok(())
    }

    /// Long format: `observable,replica,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("observable,replica,re,im\n");
        for (label, v) in self.labels.iter().zip(&self.samples) {
            let label = if label.contains([',', '"']) {
                format!("\"{}\"", label.replace('"', "\"\""))
            } else {
                label.clone()
            };
            for (r, x) in v.iter().enumerate() {
                out.push_str(&format!("{label},{r},{:.16e},{:.16e}\n", x.re, x.im));
            }
        }
        out
    }
}

/// Evaluates the observables on `replicas` independent draws of `U`.
pub fn trace_observables(
    constants: &Constants,
    observables: &[(String, TracePolynomial)],
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<TraceStatistics> {
    if replicas < MIN_REPLICAS {
        return Err(Error::InsufficientSamples {
            needed: MIN_REPLICAS,
            got: replicas,
        });
    }
    trace_observables_range(constants, observables, 0..replicas, seed, exec)
}

/// Like [`trace_observables`] over the replica indices in `range`. Merging
/// the statistics of consecutive ranges reproduces the whole run exactly.
pub fn trace_observables_range(
    constants: &Constants,
    observables: &[(String, TracePolynomial)],
    range: std::ops::Range<usize>,
    seed: u64,
    exec: Execution,
) -> Result<TraceStatistics> {
    let n = constants.dim();
    let start = range.start;
    let rows: Vec<Result<Vec<Complex64>>> = exec.map_indexed(range.len(), |k| {
        let u = sample_haar_unitary(n, &mut replica_rng(seed, start + k));
        observables.iter().map(|(_, p)| p.eval(&u, constants)).collect()
    });
    let mut samples = vec![Vec::with_capacity(range.len()); observables.len()];
    for row in rows {
        for (v, x) in row?.into_iter().enumerate() {
            samples[v].push(x);
        }
    }
    Ok(TraceStatistics {
        labels: observables.iter().map(|(l, _)| l.clone()).collect(),
        samples,
        seed,
    })
}

/// Pooled spectra of `spec` over `replicas` draws.
pub fn pooled_spectrum(spec: &EnsembleSpec, replicas: usize, seed: u64, exec: Execution) -> Result<Vec<f64>> {
    let parts: Vec<Result<SpectralSample>> =
        exec.map_indexed(replicas, |r| realized_spectrum(spec, seed, r));
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?.eigenvalues);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Normalized to integrate to 1 over the range.
    pub density: Vec<f64>,
}

impl Histogram {
    /// `bin_left,bin_right,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,density\n");
        for (k, d) in self.density.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", self.edges[k], self.edges[k + 1], d));
        }
        out
    }
}

pub fn histogram(samples: &[f64], bins: usize, range: (f64, f64)) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if bins < MIN_BINS {
        return Err(Error::InvalidInput(format!("at least {MIN_BINS} bins are required")));
    }
    let (lo, hi) = range;
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidInput("histogram range is empty".into()));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        if (lo..=hi).contains(&x) {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let inside: usize = counts.iter().sum();
    if inside == 0 {
        return Err(Error::EmptySample);
    }
    let total = inside as f64;
    Ok(Histogram {
        edges: (0..=bins).map(|k| lo + width * k as f64).collect(),
        density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        counts,
    })
}

/// `sup_x |F_n(x) - F(x)|` for the empirical CDF of `samples`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max))
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS p-value.
pub fn ks_p_value(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    // The alternating series is useless near zero, where Q(λ) is 1 to
    // double precision anyway.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let t = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += t;
        if t.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Pooled spectra of `H = U + U*` and `H + Hᵗ` (one unitary per replica)
/// against the arcsine law and its free self-convolution.
#[derive(Clone, Debug)]
pub struct FigureOne {
    pub dim: usize,
    pub replicas: usize,
    pub seed: u64,
    pub one_unitary: Vec<f64>,
    pub with_transpose: Vec<f64>,
    pub ks_arcsine: f64,
    pub ks_kesten_mckay: f64,
}

pub fn figure_one(dim: usize, replicas: usize, seed: u64, exec: Execution) -> Result<FigureOne> {
    if replicas == 0 {
        return Err(Error::EmptySample);
    }
    let draws: Vec<Result<(Vec<f64>, Vec<f64>)>> = exec.map_indexed(replicas, |r| {
        let u = sample_haar_unitary(dim, &mut replica_rng(seed, r));
        let h = &u + u.adjoint();
        let one = spectrum(&h)?.eigenvalues;
        let two = spectrum(&(&h + h.transpose()))?.eigenvalues;
        Ok((one, two))
    });
    let (mut one_unitary, mut with_transpose) = (Vec::new(), Vec::new());
    for d in draws {
        let (a, b) = d?;
        one_unitary.extend(a);
        with_transpose.extend(b);
    }
    let (arc, km) = (LimitLaw::arcsine(), LimitLaw::kesten_mckay());
    Ok(FigureOne {
        dim,
        replicas,
        seed,
        ks_arcsine: ks_distance(&one_unitary, |x| arc.cdf(x))?,
        ks_kesten_mckay: ks_distance(&with_transpose, |x| km.cdf(x))?,
        one_unitary,
        with_transpose,
    })
}

/// `Tr(A Aᵗ)` and `tr(A Aᵗ)` for `A = X22` at dimension `n`, from the
/// entries: `Tr(A Aᵗ) = Σ_{i,j} A_{ij}²`.
pub fn x22_transpose_traces(n: usize) -> (crate::exact::ExactScalar, crate::exact::ExactScalar) {
    let a = ExactMatrix::superdiagonal_i_powers(n);
    let mut t = crate::exact::ExactScalar::zero();
    for i in 0..n {
        for j in 0..n {
            let x = a.get(i, j);
            t += &x * &x;
        }
    }
    let normalized = &t * &crate::exact::ExactScalar::ratio(1, n as i64);
    (t, normalized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_matrix_expr, parse_trace_polynomial};

    #[test]
    fn sampled_unitary_is_unitary() {
        let mut rng = replica_rng(7, 0);
        let u = sample_haar_unitary(12, &mut rng);
        let err = (&u * u.adjoint() - CMatrix::identity(12, 12)).norm();
        assert!(err < 1e-10);
    }

    #[test]
    fn determinism_across_modes() {
        let c = Constants::new(4);
        let obs = vec![("t".to_string(), parse_trace_polynomial("Tr(U^2)").unwrap())];
        let a = trace_observables(&c, &obs, 50, 99, Execution::Sequential).unwrap();
        let b = trace_observables(&c, &obs, 50, 99, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spectrum_rejects_non_hermitian() {
        let m = CMatrix::from_fn(2, 2, |i, j| Complex64::new((i * 2 + j) as f64, 0.0));
        assert!(matches!(spectrum(&m), Err(Error::NotSelfAdjoint(_))));
        let spec = EnsembleSpec::new(parse_matrix_expr("U + U*").unwrap(), Constants::new(5));
        let ev = spectrum(&realize(&spec, 3, 0).unwrap()).unwrap().eigenvalues;
        assert!(ev.iter().all(|x| x.abs() <= 2.0 + 1e-9));
    }

    #[test]
    fn histogram_and_ks() {
        assert!(matches!(histogram(&[0.1], 5, (0.0, 1.0)), Err(Error::InvalidInput(_))));
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        let h = histogram(&xs, 10, (0.0, 1.0)).unwrap();
        assert!(h.density.iter().all(|d| (d - 1.0).abs() < 1e-9));
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d <= 0.0005 + 1e-12);
        assert_eq!(ks_two_sample(&xs, &xs).unwrap(), 0.0);
        assert!(ks_p_value(0.0, 100, 100) > 0.99);
    }

    #[test]
    fn x22_sequence() {
        let (t, _) = x22_transpose_traces(4);
        // Σ_{k=1}^{3} (i^k)² = -1 + 1 - 1
        assert_eq!(t, crate::exact::ExactScalar::int(-1));
    }
}
