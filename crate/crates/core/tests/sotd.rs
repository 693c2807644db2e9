mod common;

use common::*;
use ottc_core::ot::{compute_coupling, SimplexWeights};
use ottc_core::sotd::{self, aggregate, prune, sotd_distance, sotd_oracle, BetaPolicy, CostKind, MinimizerConfig, VectorSequence};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

fn oracle(x: &VectorSequence, y: &VectorSequence) -> f64 {
    sotd_oracle(x, y, 1, CostKind::Euclidean, &BetaPolicy::Uniform).unwrap().distance
}

fn seq(v: Vec<Vec<f64>>) -> VectorSequence {
    VectorSequence::new(v).unwrap()
}

/// Transport objective with `alpha` on `long` and uniform weights on `short`.
fn objective(long: &VectorSequence, short: &VectorSequence, alpha: &SimplexWeights) -> f64 {
    let beta = sotd::uniform_beta(short.len()).unwrap();
    compute_coupling(alpha, &beta)
        .entries
        .iter()
        .map(|e| e.mass * sotd::eval_cost(CostKind::Euclidean, &long.vectors()[e.i - 1], &short.vectors()[e.j - 1]).unwrap())
        .sum()
}

#[test]
fn self_distance_is_exactly_zero() {
    let mut r = rng(1);
    for _ in 0..200 {
        let arg = r.random_range(1..12);
        let x = sequence(&mut r, arg, 3);
        assert_eq!(oracle(&x, &x), 0.0);
        let d = sotd_distance(&x, &x, 1, CostKind::Euclidean, &BetaPolicy::Uniform, &MinimizerConfig { steps: 5, restarts: 0, ..Default::default() });
        assert_eq!(d.unwrap().distance, 0.0);
    }
}

#[test]
fn symmetric_under_metric_cost() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let arg = r.random_range(1..9);
        let x = sequence(&mut r, arg, 2);
        let arg = r.random_range(1..9);
        let y = sequence(&mut r, arg, 2);
        assert!((oracle(&x, &y) - oracle(&y, &x)).abs() <= 1e-9);
    }
}

#[test]
fn triangle_inequality_counterexample() {
    // the free weights on the longer sequence can hide either end point
    let a = vec![0.0, 0.0];
    let b = vec![1.0, 0.0];
    let x = seq(vec![a.clone()]);
    let y = seq(vec![a, b.clone()]);
    let z = seq(vec![b]);
    assert_eq!(oracle(&x, &y), 0.0);
    assert_eq!(oracle(&y, &z), 0.0);
    assert_eq!(oracle(&x, &z), 1.0);
}

#[test]
fn no_sampled_alpha_beats_the_oracle() {
    let mut r = rng(3);
    for n in 1..=5 {
        for m in 1..=5 {
            let x = sequence(&mut r, n, 2);
            let y = sequence(&mut r, m, 2);
            let best = oracle(&x, &y);
            let orientations: Vec<(&VectorSequence, &VectorSequence)> = match n.cmp(&m) {
                std::cmp::Ordering::Greater => vec![(&x, &y)],
                std::cmp::Ordering::Less => vec![(&y, &x)],
                std::cmp::Ordering::Equal => vec![(&x, &y), (&y, &x)],
            };
            for (long, short) in orientations {
                for _ in 0..2000 {
                    let arg = r.random_bool(0.3);
                    let alpha = simplex(&mut r, long.len(), arg);
                    let v = objective(long, short, &alpha);
                    assert!(v >= best - 1e-9, "n={n} m={m}: sampled {v} below oracle {best}");
                }
            }
        }
    }
}

#[test]
fn minimizer_reaches_the_oracle() {
    let mut r = rng(4);
    let cfg = MinimizerConfig::default();
    let mut close = 0;
    for k in 0..200 {
        let arg = r.random_range(1..=6);
        let x = sequence(&mut r, arg, 2);
        let arg = r.random_range(1..=6);
        let y = sequence(&mut r, arg, 2);
        let res = sotd_distance(&x, &y, 1, CostKind::Euclidean, &BetaPolicy::Uniform, &MinimizerConfig { seed: k, ..cfg.clone() }).unwrap();
        let exact = oracle(&x, &y);
        assert!(res.distance >= exact - 1e-9);
        assert!((res.recompute(&x, &y, CostKind::Euclidean).unwrap() - res.distance).abs() < 1e-12);
        if res.distance - exact <= 1e-3 {
            close += 1;
        } else if std::env::var("SOTD_DEBUG").is_ok() {
            eprintln!("n={} m={} gap={:.3e} exact={:.4} alpha={:?}", x.len(), y.len(), res.distance - exact, exact, res.alpha_star.as_slice());
        }
        assert_eq!(res.converged, res.distance - exact <= cfg.gap_tol);
    }
    assert!(close >= 190, "{close}/200 within 1e-3");
}

/// Sequence with no two equal neighbours drawn from a small pool.
fn base(r: &mut impl Rng, pool: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < len {
        let v = pool[r.random_range(0..pool.len())].clone();
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

fn expand(r: &mut impl Rng, u: &[Vec<f64>], max_rep: usize) -> Vec<Vec<f64>> {
    u.iter().flat_map(|v| std::iter::repeat_n(v.clone(), r.random_range(1..=max_rep))).collect()
}

#[test]
fn matching_aggregates_are_at_distance_zero() {
    let mut r = rng(5);
    let pool: Vec<Vec<f64>> = (0..4).map(|_| normal_vec(&mut r, 3)).collect();
    let junk: Vec<Vec<f64>> = (0..3).map(|_| normal_vec(&mut r, 3)).collect();
    let mut done = 0;
    while done < 200 {
        let arg = r.random_range(1..6);
        let u = base(&mut r, &pool, arg);
        let mut x = expand(&mut r, &u, 3);
        for _ in 0..r.random_range(0..3) {
            let at = r.random_range(0..=x.len());
            x.insert(at, junk[r.random_range(0..junk.len())].clone());
        }
        let y = expand(&mut r, &u, 2);
        if x.len() <= y.len() && x != y {
            continue;
        }
        let (xs, ys) = (seq(x.clone()), seq(y.clone()));
        let res = sotd::sotd_oracle_result(&xs, &ys, 1, CostKind::Euclidean, &BetaPolicy::Uniform).unwrap();
        assert!(res.distance <= 1e-12);
        if x.len() > y.len() {
            assert!(sotd::check_non_separation(&x, &y, &res.alpha_star));
        }
        done += 1;
    }
}

#[test]
fn foreign_target_element_gives_positive_distance() {
    let mut r = rng(6);
    let pool: Vec<Vec<f64>> = (0..4).map(|_| normal_vec(&mut r, 3)).collect();
    let foreign = normal_vec(&mut r, 3);
    for _ in 0..200 {
        let arg = r.random_range(1..6);
        let u = base(&mut r, &pool, arg);
        let x = expand(&mut r, &u, 4);
        let mut y = u.clone();
        y.insert(r.random_range(0..=y.len()), foreign.clone());
        let mut x = x;
        while x.len() <= y.len() {
            x = [x.clone(), x].concat();
        }
        let (xs, ys) = (seq(x.clone()), seq(y.clone()));
        let res = sotd::sotd_oracle_result(&xs, &ys, 1, CostKind::Euclidean, &BetaPolicy::Uniform).unwrap();
        assert!(res.distance > 0.0);
        assert!(!sotd::check_non_separation(&x, &y, &res.alpha_star));
    }
}

#[test]
fn squared_cost_with_order_two_matches_root() {
    let mut r = rng(7);
    for _ in 0..50 {
        let arg = r.random_range(1..7);
        let x = sequence(&mut r, arg, 2);
        let arg = r.random_range(1..7);
        let y = sequence(&mut r, arg, 2);
        let d = sotd_oracle(&x, &y, 2, CostKind::Euclidean, &BetaPolicy::Uniform).unwrap().distance;
        let s = sotd_oracle(&x, &y, 1, CostKind::SquaredEuclidean, &BetaPolicy::Uniform).unwrap().distance;
        assert!((d * d - s).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn aggregate_is_idempotent(v in prop::collection::vec(0u8..4, 0..40)) {
        let once = aggregate(&v);
        prop_assert_eq!(aggregate(&once), once.clone());
        prop_assert!(once.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn prune_at_zero_keeps_positive_weights(v in prop::collection::vec(0u8..4, 1..30), seed in any::<u64>()) {
        let mut r = rng(seed);
        let w: Vec<f64> = v.iter().map(|_| if r.random_bool(0.3) { 0.0 } else { Distribution::<f64>::sample(&Exp1, &mut r) + 1e-3 }).collect();
        let Ok(alpha) = SimplexWeights::from_unnormalized(w) else { return Ok(()) };
        let kept = prune(&v, &alpha, 0.0).unwrap();
        let expected: Vec<u8> = v.iter().zip(alpha.as_slice()).filter(|(_, a)| **a > 0.0).map(|(x, _)| *x).collect();
        prop_assert_eq!(aggregate(&kept), aggregate(&expected));
    }
}
