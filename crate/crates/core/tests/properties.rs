use haarlab::combinat::{pi_epsilon, pq_cycle_pairs, Pairing};
use haarlab::cumulant_alg::{cumulants_to_moments, moments_to_cumulants, multisets, Functional};
use haarlab::exact::{rat, trace_along, ExactMatrix, ExactScalar};
use haarlab::exec::Execution;
use haarlab::haar_expect::{conjugate_constants, expected_trace_product, rational_rotation};
use haarlab::second_order::{predict, FirstOrderTable, Mode};
use haarlab::syntax::{parse_trace_polynomial, Constants};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn signed_points(n: usize) -> Vec<i32> {
    (1..=n as i32).chain((1..=n as i32).map(|k| -k)).collect()
}

fn pairing_strategy(max_n: usize) -> impl Strategy<Value = Pairing> {
    (1..=max_n).prop_flat_map(|n| {
        Just(signed_points(n)).prop_shuffle().prop_map(move |pts| {
            let pairs: Vec<(i32, i32)> = pts.chunks(2).map(|c| (c[0], c[1])).collect();
            Pairing::new(n, true, &pairs).unwrap()
        })
    })
}

fn int_matrix(dim: usize) -> impl Strategy<Value = ExactMatrix> {
    prop::collection::vec(-3i64..=3, dim * dim).prop_map(move |v| {
        let rows: Vec<Vec<i64>> = v.chunks(dim).map(<[i64]>::to_vec).collect();
        ExactMatrix::from_i64_rows(&rows).unwrap()
    })
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-30i64..=30, 1i64..=7).prop_map(|(a, b)| rat(a, b))
}

/// Brute-force sum over index functions on `[±n]` constant on the blocks.
fn index_sum(p: &Pairing, mats: &[ExactMatrix], dim: usize) -> ExactScalar {
    let n = mats.len();
    let slot = |k: i32| if k > 0 { (k - 1) as usize } else { n + (-k - 1) as usize };
    let blocks = p.blocks();
    let mut total = ExactScalar::zero();
    for code in 0..dim.pow(blocks.len() as u32) {
        let mut idx = vec![0; 2 * n];
        let mut c = code;
        for &(x, y) in blocks {
            idx[slot(x)] = c % dim;
            idx[slot(y)] = c % dim;
            c /= dim;
        }
        let mut term = ExactScalar::one();
        for (k, m) in mats.iter().enumerate() {
            term = term * m.get(idx[k], idx[n + k]);
        }
        total += term;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pairing_traces_match_index_sums(
        (p, mats, dim) in pairing_strategy(4).prop_flat_map(|p| {
            let n = p.size();
            (1usize..=3).prop_flat_map(move |dim| {
                (Just(p.clone()), prop::collection::vec(int_matrix(dim), n), Just(dim))
            })
        })
    ) {
        let (pi, eps) = pi_epsilon(&p).unwrap();
        prop_assert_eq!(trace_along(&pi, &mats, &eps).unwrap(), index_sum(&p, &mats, dim));
    }

    #[test]
    fn mates_satisfy_the_conjugation_law(
        (p, q) in (1usize..=5).prop_flat_map(|n| {
            let pair = move || Just(signed_points(n)).prop_shuffle().prop_map(move |pts| {
                let pairs: Vec<(i32, i32)> = pts.chunks(2).map(|c| (c[0], c[1])).collect();
                Pairing::new(n, true, &pairs).unwrap()
            });
            (pair(), pair())
        })
    ) {
        let pairs = pq_cycle_pairs(&p, &q).unwrap();
        let covered: usize = pairs.iter().map(|(a, b)| a.len() + b.len()).sum();
        prop_assert_eq!(covered, 2 * p.size());
        for (c, mate) in pairs {
            for (i, &x) in c.iter().enumerate() {
                prop_assert_eq!(c[(i + 1) % c.len()], p.partner(q.partner(x)));
            }
            let pred = |x: i32| {
                let i = c.iter().position(|&y| y == x).unwrap();
                c[(i + c.len() - 1) % c.len()]
            };
            for (i, &x) in mate.iter().enumerate() {
                let next = mate[(i + 1) % mate.len()];
                prop_assert_eq!(next, q.partner(pred(q.partner(x))));
            }
        }
    }

    #[test]
    fn cumulant_round_trip(vars in 1usize..=3, values in prop::collection::vec(rational(), 55)) {
        let mut it = values.into_iter().cycle();
        let k = Functional::from_fn(vars, 5, |_| it.next().unwrap());
        let mut m = Functional::new();
        for t in multisets(vars, 5) {
            m.insert(&t, cumulants_to_moments(&k, &t).unwrap());
        }
        for t in multisets(vars, 5) {
            prop_assert_eq!(moments_to_cumulants(&m, &t).unwrap(), k.get(&t).unwrap());
        }
    }

    #[test]
    fn cumulants_are_multilinear(
        values in prop::collection::vec(rational(), 70),
        a in rational(),
        b in rational(),
        order in 1usize..=4,
        slot in 0usize..4,
    ) {
        // Variables 0 and 1 are free; variable 2 stands for a·X_0 + b·X_1.
        let slot = slot % order;
        let mut it = values.into_iter().cycle();
        let base = Functional::from_fn(2, 4, |_| it.next().unwrap());
        let m = Functional::from_fn(3, 4, |t| combined_rec(&base, &a, &b, t));
        let tuple: Vec<usize> = (0..order).map(|i| if i == slot { 2 } else { i % 2 }).collect();
        let mut t0 = tuple.clone();
        t0[slot] = 0;
        let mut t1 = tuple.clone();
        t1[slot] = 1;
        let lhs = moments_to_cumulants(&m, &tuple).unwrap();
        let rhs = &a * moments_to_cumulants(&m, &t0).unwrap() + &b * moments_to_cumulants(&m, &t1).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn independent_groups_have_no_mixed_cumulants(
        xs in prop::collection::vec(rational(), 4),
        ys in prop::collection::vec(rational(), 4),
        order in 2usize..=4,
        split in 1usize..4,
    ) {
        // E(X^i Y^j) = E(X^i) E(Y^j) with independent moment sequences.
        let group = |t: &[usize], g: usize| t.iter().filter(|&&v| v == g).count();
        let moment = |seq: &[BigRational], k: usize| if k == 0 { BigRational::one() } else { seq[k - 1].clone() };
        let m = Functional::from_fn(2, 4, |t| moment(&xs, group(t, 0)) * moment(&ys, group(t, 1)));
        let split = split.min(order - 1);
        let tuple: Vec<usize> = (0..order).map(|i| usize::from(i >= split)).collect();
        prop_assert!(moments_to_cumulants(&m, &tuple).unwrap().is_zero());
    }

    #[test]
    fn spoke_predictions_are_rotation_invariant(
        n in 2usize..=5,
        values in prop::collection::vec(-5i64..=5, 50),
        shift in 0usize..5,
    ) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let phi: Vec<Vec<f64>> = (0..n).map(|i| v[i * n..(i + 1) * n].to_vec()).collect();
        let phi_t: Vec<Vec<f64>> = (0..n).map(|i| v[25 + i * n..25 + (i + 1) * n].to_vec()).collect();
        let tbl = FirstOrderTable::new(phi, phi_t).unwrap();
        let rotated = tbl.rotate_a(shift % n);
        for mode in [Mode::Complex, Mode::Real] {
            let (a, b) = (predict(&tbl, mode).unwrap(), predict(&rotated, mode).unwrap());
            prop_assert_eq!(a.spoke_terms.len(), n);
            prop_assert_eq!(a.reversed_terms.len(), if mode == Mode::Real { n } else { 0 });
            prop_assert!((a.value - b.value).abs() < 1e-9);
        }
    }

    #[test]
    fn complex_and_real_agree_without_transposes(
        n in 2usize..=5,
        values in prop::collection::vec(-5i64..=5, 25),
    ) {
        let phi: Vec<Vec<f64>> = (0..n).map(|i| values[i * n..(i + 1) * n].iter().map(|&x| x as f64).collect()).collect();
        let tbl = FirstOrderTable::complex_only(phi).unwrap();
        prop_assert_eq!(predict(&tbl, Mode::Complex).unwrap().value, predict(&tbl, Mode::Real).unwrap().value);
    }

    #[test]
    fn unequal_lengths_predict_zero(m in 1usize..=5, n in 1usize..=5, x in -3.0f64..3.0) {
        prop_assume!(m != n);
        let tbl = FirstOrderTable::new(vec![vec![x; n]; m], vec![vec![x; n]; m]).unwrap();
        for mode in [Mode::Complex, Mode::Real] {
            prop_assert_eq!(predict(&tbl, mode).unwrap().value, 0.0);
        }
    }

    #[test]
    fn orthogonal_conjugation_preserves_expectations(
        letters in prop::collection::vec(0usize..7, 1..=4),
        a in int_matrix(2),
        b in int_matrix(2),
    ) {
        const NAMES: [&str; 7] = ["U", "Ut", "Uc", "U*", "A", "B^t", "A^c"];
        let consts = Constants::new(2).with("A", a).unwrap().with("B", b).unwrap();
        let src = format!("Tr({})", letters.iter().map(|&l| NAMES[l]).collect::<Vec<_>>().join(" "));
        let o = rational_rotation(2, rat(5, 13), rat(12, 13)).unwrap();
        for expr in parse_trace_polynomial(&src).unwrap().products(&consts).unwrap() {
            let before = expected_trace_product(&expr).unwrap();
            let after = expected_trace_product(&conjugate_constants(&expr, &o).unwrap()).unwrap();
            prop_assert_eq!(before, after);
        }
    }

    #[test]
    fn unbalanced_words_with_constants_vanish(
        letters in prop::collection::vec(0usize..6, 1..=4),
        a in int_matrix(3),
    ) {
        const NAMES: [&str; 6] = ["U", "Ut", "Uc", "U*", "A", "A^t"];
        let consts = Constants::new(3).with("A", a).unwrap();
        let balance: i32 = letters
            .iter()
            .map(|&l| match l { 0 | 1 => 1, 2 | 3 => -1, _ => 0 })
            .sum();
        prop_assume!(balance != 0);
        let src = format!("Tr({})", letters.iter().map(|&l| NAMES[l]).collect::<Vec<_>>().join(" "));
        let v = parse_trace_polynomial(&src).unwrap().expectation(&consts, Execution::Sequential).unwrap();
        prop_assert!(v.is_zero(), "{} = {}", src, v);
    }
}

fn combined_rec(base: &Functional<BigRational>, a: &BigRational, b: &BigRational, t: &[usize]) -> BigRational {
    if let Some(pos) = t.iter().position(|&v| v == 2) {
        let mut t0 = t.to_vec();
        t0[pos] = 0;
        let mut t1 = t.to_vec();
        t1[pos] = 1;
        return a * combined_rec(base, a, b, &t0) + b * combined_rec(base, a, b, &t1);
    }
    base.get(t).unwrap()
}

#[test]
fn unbalanced_haar_words_vanish_exhaustively() {
    let letters = ["U", "Ut", "Uc", "U*"];
    let consts = Constants::new(3);
    let mut checked = 0;
    for len in 1..=4u32 {
        for code in 0..4usize.pow(len) {
            let word: Vec<usize> = (0..len).map(|i| code / 4usize.pow(i) % 4).collect();
            let balance: i32 = word.iter().map(|&l| if l < 2 { 1 } else { -1 }).sum();
            if balance == 0 {
                continue;
            }
            let src = format!("Tr({})", word.iter().map(|&l| letters[l]).collect::<Vec<_>>().join(" "));
            let v = parse_trace_polynomial(&src).unwrap().expectation(&consts, Execution::Sequential).unwrap();
            assert!(v.is_zero(), "{src}");
            checked += 1;
        }
    }
    assert_eq!(checked, 4 + 16 + 64 + 256 - 8 - 96);
}

#[test]
fn powers_of_u_u_star_have_trace_n() {
    for dim in 1..=6usize {
        for k in 1..=2 {
            let v = parse_trace_polynomial(&format!("Tr((U U*)^{k})"))
                .unwrap()
                .expectation(&Constants::new(dim), Execution::Sequential)
                .unwrap();
            assert_eq!(v, ExactScalar::int(dim as i64));
        }
    }
}
