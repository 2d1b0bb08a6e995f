mod common;

use common::*;
use num_rational::Rational64;
use rand::Rng;
use wplzx::masd::{masd_decode, min_weight_perfect_matching, DecodeOptions, Exactness, WeightMode};

#[test]
fn exact_matching_agrees_with_enumeration() {
    let mut r = rng(9);
    for case in 0..40 {
        let n = [4, 6, 8, 10][case % 4];
        let g = random_defect_graph(&mut r, n);
        let lambda = Rational64::new(r.gen_range(0..8), 4);
        for (mode, normalized) in [(WeightMode::Raw, false), (WeightMode::Normalized, true)] {
            let w = |i: usize, j: usize| exact_weight(&g.vertices[i], &g.vertices[j], lambda, normalized);
            let best = brute_force(&w, &(0..n).collect::<Vec<_>>());
            let lam = *lambda.numer() as f64 / *lambda.denom() as f64;
            let m = min_weight_perfect_matching(&g, lam, mode, Exactness::Exact).unwrap();
            let cost: Rational64 = m.pairs.iter().map(|&(a, b)| w(a, b)).sum();
            assert_eq!(cost, best, "case {case} {mode:?}");
            assert!(m.is_perfect_for(&g));
        }
    }
}

#[test]
fn risk_is_monotone_in_lambda() {
    let mut r = rng(21);
    for _ in 0..30 {
        let n = 2 * r.gen_range(1..=4);
        let g = random_defect_graph(&mut r, n);
        for mode in [WeightMode::Raw, WeightMode::Normalized] {
            let opts = DecodeOptions { mode, ..Default::default() };
            let mut prev = (0.0, 0.0);
            for i in 0..=20 {
                let (_, rep) = masd_decode(&g, i as f64 * 0.05, &opts).unwrap();
                if i == 0 {
                    assert_eq!((rep.drg_toy, rep.drg_pm), (0.0, 0.0));
                }
                assert!(rep.drg_toy >= prev.0 && rep.drg_pm >= prev.1);
                prev = (rep.drg_toy, rep.drg_pm);
            }
        }
    }
}

#[test]
fn cost_grows_with_lambda() {
    let mut r = rng(4);
    for _ in 0..20 {
        let g = random_defect_graph(&mut r, 8);
        let mut prev = 0.0;
        for i in 0..=10 {
            let m = min_weight_perfect_matching(&g, i as f64 * 0.1, WeightMode::Normalized, Exactness::Auto).unwrap();
            assert!(m.cost >= prev - 1e-12);
            prev = m.cost;
        }
    }
}

#[test]
fn shortest_path_closure_is_a_metric() {
    let mut r = rng(33);
    for _ in 0..20 {
        let g = random_defect_graph(&mut r, 7);
        let n = g.len();
        let lambda = Rational64::new(r.gen_range(0..6), 3);
        let mut d: Vec<Vec<Rational64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Rational64::from_integer(0) } else { exact_weight(&g.vertices[i], &g.vertices[j], lambda, true) }).collect())
            .collect();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(d[i][j], d[j][i]);
                for k in 0..n {
                    assert!(d[i][j] <= d[i][k] + d[k][j]);
                }
            }
        }
    }
}
