mod common;

use common::*;
use ndarray::Array2;
use ottc_core::ctc::{self, collapse, ctc_loss, ctc_loss_and_grad, ctc_loss_bruteforce, ctc_viterbi, path_log_prob};
use ottc_core::ottc::{log_softmax_backward, log_softmax_rows};
use ottc_core::LabelSequence;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn forward_backward_equals_enumeration() {
    let mut r = rng(31);
    let mut infeasible = 0;
    for _ in 0..500 {
        let n = r.random_range(1..=8);
        let k = r.random_range(2..=4);
        let len = r.random_range(0..=3);
        let y = labels(&mut r, len, k - 1);
        let post = posteriors(&mut r, n, k, 1.5);
        let brute = ctc_loss_bruteforce(&post, &y).unwrap();
        match ctc_loss(post.log(0.0).view(), &y) {
            Ok(l) => assert!((l - brute).abs() <= 1e-9, "n={n} K={k} y={:?}: {l} vs {brute}", y.tokens()),
            Err(_) => {
                assert!(brute.is_infinite());
                infeasible += 1;
            }
        }
    }
    assert!(infeasible < 500);
}

#[test]
fn viterbi_is_a_valid_path_no_likelier_than_the_marginal() {
    let mut r = rng(32);
    for _ in 0..500 {
        let n = r.random_range(1..=10);
        let k = r.random_range(2..=5);
        let len = r.random_range(0..=4);
        let y = labels(&mut r, len, k - 1);
        let lp = posteriors(&mut r, n, k, 2.0).log(0.0);
        let Ok(loss) = ctc_loss(lp.view(), &y) else { continue };
        let path = ctc_viterbi(lp.view(), &y).unwrap();
        assert_eq!(path.len(), n);
        assert_eq!(collapse(&path, k - 1), y);
        assert!(path_log_prob(lp.view(), &path) <= -loss + 1e-12);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut r = rng(33);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 100 {
        let n = r.random_range(2..=8);
        let k = r.random_range(2..=4);
        let len = r.random_range(1..=3);
        let y = labels(&mut r, len, k - 1);
        let logits = Array2::from_shape_vec((n, k), normal_vec(&mut r, n * k)).unwrap();
        let lp = log_softmax_rows(logits.view());
        let Ok((_, g)) = ctc_loss_and_grad(lp.view(), &y) else { continue };
        let analytic = log_softmax_backward(lp.view(), g.view());
        let fd = central_diff(logits.as_slice().unwrap(), 1e-6, |z| {
            let z = Array2::from_shape_vec((n, k), z.to_vec()).unwrap();
            ctc_loss(log_softmax_rows(z.view()).view(), &y).unwrap()
        });
        worst = worst.max(vec_rel_err(&fd, analytic.as_slice().unwrap()));
        done += 1;
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

proptest! {
    #[test]
    fn forced_alignment_weights_are_strict_and_sum_to_one(path in prop::collection::vec(0usize..4, 1..60)) {
        let (y, beta) = ctc::beta_from_forced_alignment(&path, 3).unwrap();
        let runs = ctc::path_runs(&path);
        prop_assert_eq!(y.len(), runs.len());
        prop_assert!(beta.as_slice().iter().all(|&b| b > 0.0));
        let total: f64 = beta.as_slice().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for (b, run) in beta.as_slice().iter().zip(&runs) {
            prop_assert!((*b - run.len() as f64 / path.len() as f64).abs() <= 1e-15);
        }
    }

    #[test]
    fn collapse_removes_blanks_and_merges_runs(path in prop::collection::vec(0usize..4, 0..40)) {
        let y = collapse(&path, 3);
        prop_assert!(!y.contains_blank());
        let spaced: Vec<usize> = y.tokens().iter().flat_map(|&t| [t, 3]).collect();
        prop_assert_eq!(collapse(&spaced, 3), y.clone());
        prop_assert_eq!(y, LabelSequence::new(ottc_core::sotd::aggregate(&path).into_iter().filter(|&s| s != 3).collect(), 3).unwrap());
    }
}
