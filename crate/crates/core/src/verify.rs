//! Named verification suites: `exact` (finite-N identities of the exact
//! engine) and `mc` (seeded Monte Carlo checks). Every record carries its
//! tolerance, seed and sizes so a report can be re-run.

use std::time::Instant;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::combinat::{all_permutations, CycleType};
use crate::densities::{free_self_convolution, LimitLaw};
use crate::error::{Error, Result};
use crate::exact::{rat, ExactMatrix, ExactScalar};
use crate::exec::Execution;
use crate::haar_expect::{first_order_limit, invariance_counterexample, HaarLetter};
use crate::rmt_sim::{figure_one, trace_observables};
use crate::second_order::{predict, FirstOrderTable, Mode};
use crate::syntax::{parse_trace_polynomial, Constants, TracePolynomial};
use crate::weingarten::{gram_entry, rational_to_f64, wg_exact};

pub const SUITES: [&str; 2] = ["exact", "mc"];
pub const DEFAULT_SEED: u64 = 7;

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub claim: String,
    pub expected: String,
    pub observed: String,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: Option<u64>,
    pub dims: Vec<usize>,
    pub replicas: Option<usize>,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
}

struct Outcome {
    expected: String,
    observed: String,
    passed: bool,
}

impl Outcome {
    fn exact(expected: impl ToString, observed: impl ToString) -> Self {
        let (expected, observed) = (expected.to_string(), observed.to_string());
        Outcome {
            passed: expected == observed,
            expected,
            observed,
        }
    }
}

struct Check {
    name: &'static str,
    claim: &'static str,
    tolerance: f64,
    seed: Option<u64>,
    dims: Vec<usize>,
    replicas: Option<usize>,
    run: Box<dyn Fn() -> Result<Outcome>>,
}

fn expect(src: &str, consts: &Constants) -> Result<ExactScalar> {
    parse_trace_polynomial(src)?.expectation(consts, Execution::default())
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn exact_checks() -> Vec<Check> {
    vec![
        Check {
            name: "wg-small-orders",
            claim: "Wg_N is 1/N at order 1 and 1/(N²-1), -1/(N(N²-1)) at order 2",
            tolerance: 0.0,
            seed: None,
            dims: (2..=8).collect(),
            replicas: None,
            run: Box::new(|| {
                let (mut want, mut got) = (Vec::new(), Vec::new());
                for dim in 2..=8i64 {
                    let t1 = wg_exact(1, dim as usize)?;
                    let t2 = wg_exact(2, dim as usize)?;
                    want.extend([rat(1, dim), rat(1, dim * dim - 1), rat(-1, dim * (dim * dim - 1))]);
                    got.push(t1.get(&CycleType::new(vec![1])).cloned().unwrap_or_default());
                    got.push(t2.get(&CycleType::new(vec![1, 1])).cloned().unwrap_or_default());
                    got.push(t2.get(&CycleType::new(vec![2])).cloned().unwrap_or_default());
                }
                Ok(Outcome::exact(join(want), join(got)))
            }),
        },
        Check {
            name: "wg-gram-identity",
            claim: "Σ_τ N^{#(στ⁻¹)} Wg_N(τ) = [σ = id] for n <= 4 and N in {n, n+1, 8}",
            tolerance: 0.0,
            seed: None,
            dims: vec![1, 2, 3, 4, 5, 8],
            replicas: None,
            run: Box::new(|| {
                let mut failures = 0;
                for n in 1..=4usize {
                    let perms = all_permutations(n);
                    for dim in [n, n + 1, 8] {
                        let table = wg_exact(n, dim)?;
                        for sigma in &perms {
                            let mut sum = ExactScalar::zero();
                            for tau in &perms {
                                sum += gram_entry(sigma, tau, dim) * ExactScalar::real(table.value(tau));
                            }
                            let want = if sigma.is_identity() { ExactScalar::one() } else { ExactScalar::zero() };
                            failures += usize::from(sum != want);
                        }
                    }
                }
                Ok(Outcome::exact(0, failures))
            }),
        },
        Check {
            name: "first-order-traces",
            claim: "E tr(U Ū) = 1/N, E tr(U Uᵗ) = 0 and E tr(U U*) = 1",
            tolerance: 0.0,
            seed: None,
            dims: (2..=8).collect(),
            replicas: None,
            run: Box::new(|| {
                let (mut want, mut got) = (Vec::new(), Vec::new());
                for dim in 2..=8usize {
                    let c = Constants::new(dim);
                    want.extend([ExactScalar::ratio(1, dim as i64), ExactScalar::zero(), ExactScalar::one()]);
                    got.extend([expect("tr(U Uc)", &c)?, expect("tr(U Ut)", &c)?, expect("tr(U U*)", &c)?]);
                }
                Ok(Outcome::exact(join(want), join(got)))
            }),
        },
        Check {
            name: "power-trace-variance",
            claim: "E|Tr U^k|² = min(k, N) for k <= 2",
            tolerance: 0.0,
            seed: None,
            dims: (1..=5).collect(),
            replicas: None,
            run: Box::new(|| {
                let (mut want, mut got) = (Vec::new(), Vec::new());
                for k in 1..=2usize {
                    for dim in 1..=5usize {
                        want.push(ExactScalar::int(k.min(dim) as i64));
                        got.push(expect(&format!("Tr(U^{k}) Tr(U*^{k})"), &Constants::new(dim))?);
                    }
                }
                Ok(Outcome::exact(join(want), join(got)))
            }),
        },
        Check {
            name: "transpose-covariance",
            claim: "cov(Tr U, Tr Ū) = 1 at every N, carried entirely by the reversed spokes",
            tolerance: 0.0,
            seed: None,
            dims: (1..=8).collect(),
            replicas: None,
            run: Box::new(|| {
                let mut got = Vec::new();
                for dim in 1..=8usize {
                    let c = Constants::new(dim);
                    got.push(expect("Tr(U) Tr(Uc)", &c)? - expect("Tr(U)", &c)? * expect("Tr(Uc)", &c)?);
                }
                let phi = f64::from(first_order_limit(1, HaarLetter::U, 1, HaarLetter::CONJ)?);
                let phi_t = f64::from(first_order_limit(1, HaarLetter::U, 1, HaarLetter::ADJOINT)?);
                let pred = predict(&FirstOrderTable::new(vec![vec![phi]], vec![vec![phi_t]])?, Mode::Real)?;
                let spokes: f64 = pred.spoke_terms.iter().sum();
                let mut want = vec!["1".to_string(); 8];
                want.extend(["1".into(), "0".into()]);
                let mut observed: Vec<String> = got.iter().map(ToString::to_string).collect();
                observed.extend([pred.value.to_string(), spokes.to_string()]);
                Ok(Outcome::exact(want.join(" "), observed.join(" ")))
            }),
        },
        Check {
            name: "conjugation-counterexample",
            claim: "rotating U and Ū by a fixed unitary changes E(u₁₁ ū₂₂) from 0 to 4cos²θ sin²θ / N",
            tolerance: 0.0,
            seed: None,
            dims: vec![2, 4, 10],
            replicas: None,
            run: Box::new(|| {
                let (mut want, mut got) = (Vec::new(), Vec::new());
                for c2 in [rat(1, 4), rat(1, 2)] {
                    for dim in [2usize, 4, 10] {
                        let (lhs, rhs) = invariance_counterexample(&c2, dim)?;
                        let s2 = rat(1, 1) - &c2;
                        want.push(format!("0,{}", ExactScalar::real(rat(4, dim as i64) * &c2 * s2)));
                        got.push(format!("{lhs},{rhs}"));
                    }
                }
                Ok(Outcome::exact(join(want), join(got)))
            }),
        },
        Check {
            name: "transposed-conjugation-decay",
            claim: "E tr(U A U* (U A U*)ᵗ) with balanced ±1 diagonal A halves when N doubles",
            tolerance: 0.1,
            seed: None,
            dims: vec![8, 16, 32],
            replicas: None,
            run: Box::new(|| {
                let mut vals = Vec::new();
                for dim in [8usize, 16, 32] {
                    let c = Constants::new(dim).with("A", ExactMatrix::balanced_signs(dim))?;
                    vals.push(expect("tr(U A U* Uc A^t Ut)", &c)?);
                }
                let ratios: Vec<f64> = vals
                    .windows(2)
                    .map(|w| w[1].to_complex64().re / w[0].to_complex64().re)
                    .collect();
                Ok(Outcome {
                    expected: "ratios 0.5 ± 0.1".into(),
                    observed: format!("values {}, ratios {}", join(&vals), join(&ratios)),
                    passed: ratios.iter().all(|r| (r - 0.5).abs() <= 0.1),
                })
            }),
        },
        Check {
            name: "free-self-convolution",
            claim: "doubling the free cumulants of the arcsine law gives moments 4, 28, 232 and matches the Kesten–McKay density",
            tolerance: 1e-6,
            seed: None,
            dims: vec![],
            replicas: None,
            run: Box::new(|| {
                let km = LimitLaw::kesten_mckay();
                let mu2 = free_self_convolution(&LimitLaw::arcsine().exact_moments(6)?)?;
                let quad: Vec<f64> = [2u32, 4, 6].iter().map(|&k| km.moment(k)).collect();
                let exact = [&mu2[1], &mu2[3], &mu2[5]];
                let passed = exact.iter().map(|m| m.to_string()).collect::<Vec<_>>() == ["4", "28", "232"]
                    && quad.iter().zip(exact).all(|(q, m)| (q - rational_to_f64(m)).abs() <= 1e-6);
                Ok(Outcome {
                    expected: "4 28 232".into(),
                    observed: format!("exact {}, quadrature {}", join(exact), join(&quad)),
                    passed,
                })
            }),
        },
        Check {
            name: "nilpotent-traces",
            claim: "tr(X^p) = 0 for 1 <= p < N when X has entries i^k on the superdiagonal",
            tolerance: 0.0,
            seed: None,
            dims: (2..=8).collect(),
            replicas: None,
            run: Box::new(|| {
                let mut nonzero = 0;
                for dim in 2..=8usize {
                    let c = Constants::new(dim);
                    for p in 1..dim {
                        nonzero += usize::from(!expect(&format!("tr(X22^{p})"), &c)?.is_zero());
                    }
                }
                Ok(Outcome::exact(0, nonzero))
            }),
        },
    ]
}

fn observables(srcs: &[&str]) -> Result<Vec<(String, TracePolynomial)>> {
    srcs.iter().map(|s| Ok((s.to_string(), parse_trace_polynomial(s)?))).collect()
}

fn mc_checks(seed: u64) -> Vec<Check> {
    let s = move |k: u64| seed.wrapping_add(k);
    vec![
        Check {
            name: "mc-transpose-covariance",
            claim: "sample cov(Tr U, Tr Ū) is 1",
            tolerance: 4.0,
            seed: Some(s(1)),
            dims: vec![32],
            replicas: Some(2000),
            run: Box::new(move || {
                let stats = trace_observables(
                    &Constants::new(32),
                    &observables(&["Tr(U)", "Tr(Uc)"])?,
                    2000,
                    s(1),
                    Execution::default(),
                )?;
                let k = stats.cumulants(2)?;
                let (est, se) = (k.get(&[0, 1])?, k.std_error(&[0, 1]).unwrap_or_default().norm());
                Ok(Outcome {
                    expected: "1 within 4 SE".into(),
                    observed: format!("{:.6} (SE {se:.4})", est.re),
                    passed: (est - 1.0).norm() <= 4.0 * se,
                })
            }),
        },
        Check {
            name: "mc-transposed-conjugation",
            claim: "the sample mean of tr(U A U* (U A U*)ᵗ) agrees with the exact value",
            tolerance: 4.0,
            seed: Some(s(2)),
            dims: vec![48],
            replicas: Some(1000),
            run: Box::new(move || {
                let c = Constants::new(48).with("A", ExactMatrix::balanced_signs(48))?;
                let word = "tr(U A U* Uc A^t Ut)";
                let exact = expect(word, &c)?.to_complex64();
                let stats = trace_observables(&c, &observables(&[word])?, 1000, s(2), Execution::default())?;
                let k = stats.cumulants(1)?;
                let (mean, se) = (k.get(&[0])?, k.std_error(&[0]).unwrap_or_default());
                Ok(Outcome {
                    expected: format!("{:.6} within 4 SE", exact.re),
                    observed: format!("{mean:.6} (SE {se:.4})"),
                    passed: (mean.re - exact.re).abs() <= 4.0 * se.re && mean.im.abs() <= 4.0 * se.im,
                })
            }),
        },
        Check {
            name: "mc-third-cumulant",
            claim: "third cumulants of Tr U and Tr Ū vanish",
            tolerance: 0.1,
            seed: Some(s(3)),
            dims: vec![32],
            replicas: Some(2000),
            run: Box::new(move || {
                let stats = trace_observables(
                    &Constants::new(32),
                    &observables(&["Tr(U)", "Tr(Uc)"])?,
                    2000,
                    s(3),
                    Execution::default(),
                )?;
                let k = stats.cumulants(3)?;
                let worst = [[0, 0, 0], [0, 0, 1], [0, 1, 1], [1, 1, 1]]
                    .iter()
                    .map(|t| k.get(t).map(|z| z.norm()))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                Ok(Outcome {
                    expected: "< 0.1".into(),
                    observed: format!("{worst:.4}"),
                    passed: worst < 0.1,
                })
            }),
        },
        Check {
            name: "mc-spectral-laws",
            claim: "pooled spectra of H = U + U* and H + Hᵗ follow the arcsine and Kesten–McKay laws",
            tolerance: 0.05,
            seed: Some(s(4)),
            dims: vec![256],
            replicas: Some(10),
            run: Box::new(move || {
                let fig = figure_one(256, 10, s(4), Execution::default())?;
                Ok(Outcome {
                    expected: "KS < 0.05".into(),
                    observed: format!("{:.4} {:.4}", fig.ks_arcsine, fig.ks_kesten_mckay),
                    passed: fig.ks_arcsine < 0.05 && fig.ks_kesten_mckay < 0.05,
                })
            }),
        },
        Check {
            name: "mc-reproducible",
            claim: "a re-run with the same seed reproduces the CSV bytes",
            tolerance: 0.0,
            seed: Some(s(5)),
            dims: vec![16],
            replicas: Some(200),
            run: Box::new(move || {
                let obs = observables(&["Tr(U)", "tr(U Ut)"])?;
                let run = |exec| trace_observables(&Constants::new(16), &obs, 200, s(5), exec).map(|t| t.to_csv());
                let (a, b) = (run(Execution::Parallel)?, run(Execution::Sequential)?);
                Ok(Outcome::exact(a.len(), if a == b { b.len() } else { 0 }))
            }),
        },
    ]
}

/// Runs a suite; `seed` only affects `mc`.
pub fn run_suite(suite: &str, seed: u64) -> Result<VerificationReport> {
    let checks = match suite {
        "exact" => exact_checks(),
        "mc" => mc_checks(seed),
        _ => return Err(Error::InvalidInput(format!("unknown suite `{suite}` (known: {})", SUITES.join(", ")))),
    };
    let records: Vec<CheckRecord> = checks
        .into_iter()
        .map(|c| {
            let start = Instant::now();
            let outcome = (c.run)().unwrap_or_else(|e| Outcome {
                expected: "no error".into(),
                observed: e.to_string(),
                passed: false,
            });
            CheckRecord {
                name: c.name.into(),
                claim: c.claim.into(),
                expected: outcome.expected,
                observed: outcome.observed,
                tolerance: c.tolerance,
                passed: outcome.passed,
                seed: c.seed,
                dims: c.dims,
                replicas: c.replicas,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();
    Ok(VerificationReport {
        suite: suite.into(),
        seed,
        passed: records.iter().all(|r| r.passed),
        checks: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!(run_suite("nosuch", 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn exact_suite_passes() {
        let report = run_suite("exact", DEFAULT_SEED).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{}: expected {}, observed {}", c.name, c.expected, c.observed);
        }
    }
}
