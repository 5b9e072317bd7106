use std::collections::BTreeMap;
use std::time::Duration;

use duality_lab::algebra::{tensor, OperatorPolynomial, TruncatedOperator};
use duality_lab::processes::{build_rate_generator, enumerate_sector, DiscreteFamily, Graph, StationaryLaw};
use duality_lab::report::{render_json, CheckReport};
use duality_lab::simulate::{gauss_hermite, Welford};
use duality_lab::specfun::{hyper_pfq_detailed, krawtchouk, meixner, HyperSpec, Spin};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn small_matrix(dim: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec(-3.0f64..3.0, dim * dim)
        .prop_map(move |v| DMatrix::from_iterator(dim, dim, v.into_iter().map(|x| Complex64::new(x, 0.0))))
}

fn word() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(vec!["A", "B", "C"]), 0..7)
}

proptest! {
    #[test]
    fn terminating_series_uses_degree_plus_one_terms(n in 0u32..30, b in 0.5f64..5.0, x in -3.0f64..3.0) {
        let s = hyper_pfq_detailed(&HyperSpec::new(&[-f64::from(n), 1.5], &[b], x)).unwrap();
        prop_assert_eq!(s.terms, n as usize + 1);
    }

    #[test]
    fn krawtchouk_is_symmetric(two_j in 1u32..12, p in 0.05f64..0.95, n in 0u32..12, x in 0u32..12) {
        prop_assume!(n <= two_j && x <= two_j);
        let j = Spin::from_two_j(two_j).unwrap();
        let a = krawtchouk(n, x, j, p).unwrap();
        let b = krawtchouk(x, n, j, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn meixner_is_symmetric(k in 0.25f64..2.0, c in 0.3f64..0.9, n in 0u32..10, x in 0u32..10) {
        let a = meixner(n, x, k, c).unwrap();
        let b = meixner(x, n, k, c).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
    }

    #[test]
    fn reversal_is_an_involution(words in prop::collection::vec((word(), -2.0f64..2.0), 1..5)) {
        let mut poly = OperatorPolynomial::new(&["A", "B", "C"]);
        for (w, c) in &words {
            poly.push(*c, w).unwrap();
        }
        prop_assert!(poly.reverse().reverse().approx_eq(&poly, 1e-14));
        prop_assert!(poly.reverse_word().reverse_word().approx_eq(&poly, 1e-14));
    }

    #[test]
    fn reversal_is_an_antihomomorphism(u in word(), v in word()) {
        let symbols = ["A", "B", "C"];
        let p = OperatorPolynomial::monomial(&symbols, &u).unwrap();
        let q = OperatorPolynomial::monomial(&symbols, &v).unwrap();
        let lhs = p.times(&q).unwrap().reverse();
        let rhs = q.reverse().times(&p.reverse()).unwrap();
        prop_assert!(lhs.approx_eq(&rhs, 1e-14));
    }

    #[test]
    fn tensor_mixed_product(a in small_matrix(2), b in small_matrix(3), c in small_matrix(2), d in small_matrix(3)) {
        let op = |m: DMatrix<Complex64>| TruncatedOperator::exact(m, "M").unwrap();
        let (a, b, c, d) = (op(a), op(b), op(c), op(d));
        let lhs = &tensor(&a, &b) * &tensor(&c, &d);
        let rhs = tensor(&(&a * &c), &(&b * &d));
        prop_assert!(lhs.residual(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn sector_sizes(n in 1usize..5, total in 0u32..6) {
        let graph = Graph::path(n).unwrap();
        let sep = enumerate_sector(DiscreteFamily::sep(0.5).unwrap(), &graph, total);
        if total as usize <= n {
            prop_assert_eq!(sep.unwrap().len() as u64, binomial(n as u64, u64::from(total)));
        } else {
            prop_assert!(sep.is_err());
        }
        let irw = enumerate_sector(DiscreteFamily::Irw, &graph, total).unwrap();
        prop_assert_eq!(irw.len() as u64, binomial(u64::from(total) + n as u64 - 1, n as u64 - 1));
        prop_assert!(irw.states().iter().all(|s| s.iter().sum::<u32>() == total));
        prop_assert!(irw.states().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rate_rows_sum_to_zero(k in 0.1f64..3.0, n in 2usize..4, total in 0u32..5) {
        let sector = enumerate_sector(DiscreteFamily::sip(k).unwrap(), &Graph::complete(n).unwrap(), total).unwrap();
        let l = build_rate_generator(&sector);
        for row in l.entries().row_iter() {
            prop_assert!(row.sum().abs() <= 1e-12 * (1.0 + row.amax()));
        }
    }

    #[test]
    fn welford_merge_is_order_independent(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Welford::default(), Welford::default());
        xs[..cut].iter().for_each(|&x| a.push(x));
        xs[cut..].iter().for_each(|&x| b.push(x));
        let (m, w) = (a.merge(&b).estimate(), whole.estimate());
        prop_assert_eq!(m.n_samples, w.n_samples);
        prop_assert!((m.mean - w.mean).abs() <= 1e-9);
        prop_assert!((m.stderr - w.stderr).abs() <= 1e-9 * (1.0 + w.stderr));
    }

    #[test]
    fn gauss_hermite_weights_sum_to_root_pi(order in 1usize..120) {
        let (x, w) = gauss_hermite(order).unwrap();
        prop_assert_eq!(x.len(), order);
        prop_assert!((w.iter().sum::<f64>() - std::f64::consts::PI.sqrt()).abs() <= 1e-12);
        prop_assert!(x.iter().zip(x.iter().rev()).all(|(a, b)| (a + b).abs() <= 1e-12));
    }

    #[test]
    fn stationary_laws_have_positive_variance(p in 0.01f64..0.99, r in 0.1f64..5.0) {
        for law in [StationaryLaw::Binomial { n: 3, p }, StationaryLaw::NegativeBinomial { r, p }] {
            prop_assert!(law.variance() > 0.0);
            prop_assert!(law.mean() > 0.0);
        }
    }

    #[test]
    fn json_reports_round_trip(residual in prop::num::f64::NORMAL, tol in 1e-14f64..1.0, key in "[a-z]{1,4}", v in -1e6f64..1e6) {
        let params: BTreeMap<String, f64> = [(key, v)].into_iter().collect();
        let r = CheckReport::from_residual("c", "SEP", params, residual, tol, "a", Duration::from_micros(1500));
        let back: Vec<CheckReport> = serde_json::from_str(&render_json(std::slice::from_ref(&r)).unwrap()).unwrap();
        prop_assert_eq!(&back[0], &r);
    }
}
