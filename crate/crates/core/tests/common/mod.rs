#![allow(dead_code)]

use ndarray::Array2;
use ottc_core::ot::{MonotonicAlignment, SimplexWeights, StrictSimplexWeights};
use ottc_core::sotd::VectorSequence;
use ottc_core::{LabelSequence, PosteriorMatrix};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dirichlet(1) draw, optionally with some exact zeros.
pub fn simplex(r: &mut impl Rng, n: usize, zeros: bool) -> SimplexWeights {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(r)).collect();
    if zeros && n > 1 {
        for x in v.iter_mut() {
            if r.random_bool(0.2) {
                *x = 0.0;
            }
        }
        if v.iter().all(|&x| x == 0.0) {
            v[r.random_range(0..n)] = 1.0;
        }
    }
    SimplexWeights::from_unnormalized(v).unwrap()
}

pub fn strict_simplex(r: &mut impl Rng, m: usize) -> StrictSimplexWeights {
    let v: Vec<f64> = (0..m).map(|_| 0.05 + Distribution::<f64>::sample(&Exp1, r)).collect();
    StrictSimplexWeights::from_unnormalized(v).unwrap()
}

pub fn normal_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

pub fn sequence(r: &mut impl Rng, len: usize, dim: usize) -> VectorSequence {
    VectorSequence::new((0..len).map(|_| normal_vec(r, dim)).collect()).unwrap()
}

/// Row-stochastic posteriors from Gaussian logits.
pub fn posteriors(r: &mut impl Rng, n: usize, k: usize, scale: f64) -> PosteriorMatrix {
    let logits = Array2::from_shape_fn((n, k), |_| scale * Distribution::<f64>::sample(&StandardNormal, r));
    PosteriorMatrix::from_logits(logits.view()).unwrap()
}

pub fn labels(r: &mut impl Rng, len: usize, vocab: usize) -> LabelSequence {
    LabelSequence::new((0..len).map(|_| r.random_range(0..vocab)).collect(), vocab).unwrap()
}

/// Random discrete monotonic alignment built as a staircase walk: each step
/// advances the source, the target, or both; some sources are left out.
pub fn monotonic_alignment(r: &mut impl Rng, n_max: usize, m_max: usize) -> MonotonicAlignment {
    loop {
        let (mut i, mut j) = (1usize, 1usize);
        let mut pairs = vec![(1, 1)];
        let mut n = 1;
        let steps = r.random_range(0..(n_max + m_max));
        for _ in 0..steps {
            match r.random_range(0..4) {
                0 => {
                    // dropped source between two aligned ones
                    if n + 2 <= n_max {
                        i += 2;
                        n = i;
                        pairs.push((i, j));
                    }
                }
                1 if n < n_max => {
                    i += 1;
                    n = i;
                    pairs.push((i, j));
                }
                2 if j < m_max => {
                    j += 1;
                    pairs.push((i, j));
                }
                _ if n < n_max && j < m_max => {
                    i += 1;
                    j += 1;
                    n = i;
                    pairs.push((i, j));
                }
                _ => {}
            }
        }
        let trailing = if r.random_bool(0.2) && n < n_max { 1 } else { 0 };
        if let Ok(a) = MonotonicAlignment::new(n + trailing, j, pairs) {
            return a;
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// `||a - b|| / max(||a||, ||b||)`, with the denominator floored at `1e-8`.
pub fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-8)
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            p[k] = x[k] + h;
            let up = f(&p);
            p[k] = x[k] - h;
            let down = f(&p);
            p[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Smallest distance between interior prefix sums of `a` and `b`.
pub fn breakpoint_gap(a: &[f64], b: &[f64]) -> f64 {
    let prefix = |v: &[f64]| -> Vec<f64> {
        let mut s = 0.0;
        v[..v.len() - 1].iter().map(|x| { s += x; s }).collect()
    };
    let (pa, pb) = (prefix(a), prefix(b));
    pa.iter().flat_map(|x| pb.iter().map(move |y| (x - y).abs())).fold(f64::INFINITY, f64::min)
}
