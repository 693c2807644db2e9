//! Reference CTC: collapse mapping, log-space forward-backward, brute-force
//! enumeration, Viterbi forced alignment, and run-length target weights.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::ot::StrictSimplexWeights;
use crate::ottc::PROB_FLOOR;
use crate::seq::{decode_frames, runs, LabelSequence, PosteriorMatrix, Segmentation, Span};

/// Largest frame count accepted by [`ctc_loss_bruteforce`].
pub const BRUTEFORCE_MAX_FRAMES: usize = 10;
/// Largest class count accepted by [`ctc_loss_bruteforce`].
pub const BRUTEFORCE_MAX_CLASSES: usize = 6;

/// Merge consecutive duplicates, then delete blanks.
pub fn collapse(path: &[usize], vocab_size: usize) -> LabelSequence {
    decode_frames(path, vocab_size, vocab_size).0
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `φ y1 φ y2 … φ`.
fn lattice(y: &LabelSequence) -> Vec<usize> {
    let blank = y.blank_id();
    let mut l = Vec::with_capacity(2 * y.len() + 1);
    l.push(blank);
    for &t in y.tokens() {
        l.push(t);
        l.push(blank);
    }
    l
}

fn can_skip(l: &[usize], s: usize, blank: usize) -> bool {
    s >= 2 && l[s] != blank && l[s] != l[s - 2]
}

fn check(log_post: ArrayView2<f64>, y: &LabelSequence) -> Result<()> {
    let (n, k) = log_post.dim();
    if n == 0 {
        return Err(Error::Empty("posterior frames"));
    }
    if k != y.num_classes() {
        return Err(Error::Shape(format!(
            "posteriors have {k} classes, vocabulary needs {}",
            y.num_classes()
        )));
    }
    if y.contains_blank() {
        return Err(Error::InvalidLabels("CTC targets must not contain the blank".into()));
    }
    let repeats = y.adjacent_repeats();
    if n < y.len() + repeats {
        return Err(Error::Infeasible {
            frames: n,
            target: y.len(),
            repeats,
        });
    }
    Ok(())
}

fn forward(lp: &Array2<f64>, l: &[usize], blank: usize) -> Array2<f64> {
    let (n, _) = lp.dim();
    let s_len = l.len();
    let mut a = Array2::from_elem((n, s_len), f64::NEG_INFINITY);
    a[[0, 0]] = lp[[0, l[0]]];
    if s_len > 1 {
        a[[0, 1]] = lp[[0, l[1]]];
    }
    for t in 1..n {
        for s in 0..s_len {
            let mut acc = a[[t - 1, s]];
            if s >= 1 {
                acc = log_add(acc, a[[t - 1, s - 1]]);
            }
            if can_skip(l, s, blank) {
                acc = log_add(acc, a[[t - 1, s - 2]]);
            }
            if acc > f64::NEG_INFINITY {
                a[[t, s]] = acc + lp[[t, l[s]]];
            }
        }
    }
    a
}

/// Backward variables excluding the emission at `t`.
fn backward(lp: &Array2<f64>, l: &[usize], blank: usize) -> Array2<f64> {
    let (n, _) = lp.dim();
    let s_len = l.len();
    let mut b = Array2::from_elem((n, s_len), f64::NEG_INFINITY);
    b[[n - 1, s_len - 1]] = 0.0;
    if s_len > 1 {
        b[[n - 1, s_len - 2]] = 0.0;
    }
    for t in (0..n - 1).rev() {
        for s in 0..s_len {
            let mut acc = b[[t + 1, s]] + lp[[t + 1, l[s]]];
            if s + 1 < s_len {
                acc = log_add(acc, b[[t + 1, s + 1]] + lp[[t + 1, l[s + 1]]]);
            }
            if s + 2 < s_len && can_skip(l, s + 2, blank) {
                acc = log_add(acc, b[[t + 1, s + 2]] + lp[[t + 1, l[s + 2]]]);
            }
            b[[t, s]] = acc;
        }
    }
    b
}

fn floored(log_post: ArrayView2<f64>) -> Array2<f64> {
    let f = PROB_FLOOR.ln();
    log_post.mapv(|v| v.max(f))
}

fn total(a: &Array2<f64>) -> f64 {
    let (n, s_len) = a.dim();
    let mut z = a[[n - 1, s_len - 1]];
    if s_len > 1 {
        z = log_add(z, a[[n - 1, s_len - 2]]);
    }
    z
}

/// `-log Σ_{π ∈ B⁻¹(y)} p(π)` from log-posteriors.
pub fn ctc_loss(log_post: ArrayView2<f64>, y: &LabelSequence) -> Result<f64> {
    check(log_post, y)?;
    let lp = floored(log_post);
    let l = lattice(y);
    Ok(-total(&forward(&lp, &l, y.blank_id())))
}

/// CTC loss and its gradient with respect to the log-posteriors.
pub fn ctc_loss_and_grad(log_post: ArrayView2<f64>, y: &LabelSequence) -> Result<(f64, Array2<f64>)> {
    check(log_post, y)?;
    let lp = floored(log_post);
    let l = lattice(y);
    let blank = y.blank_id();
    let a = forward(&lp, &l, blank);
    let b = backward(&lp, &l, blank);
    let z = total(&a);
    let mut grad = Array2::zeros(lp.dim());
    for t in 0..lp.nrows() {
        for (s, &k) in l.iter().enumerate() {
            let occ = a[[t, s]] + b[[t, s]] - z;
            if occ > f64::NEG_INFINITY {
                grad[[t, k]] -= occ.exp();
            }
        }
    }
    Ok((-z, grad))
}

/// Enumerates every path; `f64::INFINITY` when no path collapses to `y`.
pub fn ctc_loss_bruteforce(posteriors: &PosteriorMatrix, y: &LabelSequence) -> Result<f64> {
    let n = posteriors.frames();
    let k = posteriors.num_classes();
    if n > BRUTEFORCE_MAX_FRAMES || k > BRUTEFORCE_MAX_CLASSES {
        return Err(Error::TooLarge(format!(
            "{n} frames x {k} classes exceeds {BRUTEFORCE_MAX_FRAMES} x {BRUTEFORCE_MAX_CLASSES}"
        )));
    }
    if k != y.num_classes() {
        return Err(Error::Shape(format!("posteriors have {k} classes, vocabulary needs {}", y.num_classes())));
    }
    let p = posteriors.view();
    let mut path = vec![0usize; n];
    let mut sum = 0.0;
    loop {
        if collapse(&path, y.vocab_size()).tokens() == y.tokens() {
            sum += path.iter().enumerate().map(|(t, &c)| p[[t, c]]).product::<f64>();
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(if sum > 0.0 { -sum.ln() } else { f64::INFINITY });
            }
            path[pos] += 1;
            if path[pos] < k {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

/// Most probable path in `B⁻¹(y)`. On ties the transition from the smaller
/// lattice index wins.
pub fn ctc_viterbi(log_post: ArrayView2<f64>, y: &LabelSequence) -> Result<Vec<usize>> {
    check(log_post, y)?;
    let lp = floored(log_post);
    let l = lattice(y);
    let blank = y.blank_id();
    let (n, _) = lp.dim();
    let s_len = l.len();
    let mut score = Array2::from_elem((n, s_len), f64::NEG_INFINITY);
    let mut back = Array2::<usize>::zeros((n, s_len));
    score[[0, 0]] = lp[[0, l[0]]];
    if s_len > 1 {
        score[[0, 1]] = lp[[0, l[1]]];
    }
    for t in 1..n {
        for s in 0..s_len {
            let mut best = f64::NEG_INFINITY;
            let mut arg = s;
            let lo = if can_skip(&l, s, blank) { s - 2 } else { s.saturating_sub(1) };
            for prev in lo..=s {
                let v = score[[t - 1, prev]];
                if v > best {
                    best = v;
                    arg = prev;
                }
            }
            if best > f64::NEG_INFINITY {
                score[[t, s]] = best + lp[[t, l[s]]];
                back[[t, s]] = arg;
            }
        }
    }
    let mut s = s_len - 1;
    if s_len > 1 && score[[n - 1, s_len - 2]] >= score[[n - 1, s_len - 1]] {
        s = s_len - 2;
    }
    let mut path = vec![0; n];
    for t in (0..n).rev() {
        path[t] = l[s];
        if t > 0 {
            s = back[[t, s]];
        }
    }
    Ok(path)
}

/// Log-probability of a single path.
pub fn path_log_prob(log_post: ArrayView2<f64>, path: &[usize]) -> f64 {
    path.iter().enumerate().map(|(t, &k)| log_post[[t, k]]).sum()
}

/// Run-length encodes a path into its consecutive symbols; each weight is
/// the run length over the path length.
pub fn beta_from_forced_alignment(path: &[usize], vocab_size: usize) -> Result<(LabelSequence, StrictSimplexWeights)> {
    if path.is_empty() {
        return Err(Error::Empty("forced-alignment path"));
    }
    let r = runs(path);
    let n = path.len() as f64;
    let labels = LabelSequence::new(r.iter().map(|s| s.label).collect(), vocab_size)?;
    let beta = StrictSimplexWeights::new(r.iter().map(|s| s.len() as f64 / n).collect())?;
    Ok((labels, beta))
}

/// Runs of a forced path, blanks included.
pub fn path_runs(path: &[usize]) -> Vec<Span> {
    runs(path)
}

pub fn ctc_greedy_decode(posteriors: &PosteriorMatrix) -> (LabelSequence, Segmentation) {
    crate::ottc::greedy_decode(posteriors)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: usize = 0;
    const PHI: usize = 1;

    fn post(rows: &[[f64; 2]]) -> PosteriorMatrix {
        PosteriorMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn collapse_examples() {
        // G O D over vocab of 3, blank 3
        let (g, o, d, b) = (0, 1, 2, 3);
        assert_eq!(collapse(&[g, g, o, o, b, o, d, d], 3).tokens(), &[g, o, o, d]);
        assert!(collapse(&[b, b, b], 3).is_empty());
        assert_eq!(collapse(&[0, 3, 0], 3).tokens(), &[0, 0]);
    }

    #[test]
    fn two_frame_uniform() {
        let p = post(&[[0.5, 0.5], [0.5, 0.5]]);
        let y = LabelSequence::new(vec![A], 1).unwrap();
        let l = ctc_loss(p.log(PROB_FLOOR).view(), &y).unwrap();
        assert!((l + 0.75f64.ln()).abs() < 1e-12);
        assert!((l - 0.287682).abs() < 1e-6);
        let bf = ctc_loss_bruteforce(&p, &y).unwrap();
        assert!((l - bf).abs() < 1e-9);
    }

    #[test]
    fn three_frame_enumeration_and_viterbi() {
        let p = post(&[[0.9, 0.1], [0.9, 0.1], [0.1, 0.9]]);
        let y = LabelSequence::new(vec![A], 1).unwrap();
        // AAA, AAφ, Aφφ, φAA, φAφ, φφA
        let expected = 0.081 + 0.729 + 0.081 + 0.009 + 0.081 + 0.001;
        let l = ctc_loss(p.log(PROB_FLOOR).view(), &y).unwrap();
        assert!((l + f64::ln(expected)).abs() < 1e-12);
        assert!((ctc_loss_bruteforce(&p, &y).unwrap() - l).abs() < 1e-12);
        let path = ctc_viterbi(p.log(PROB_FLOOR).view(), &y).unwrap();
        assert_eq!(path, vec![A, A, PHI]);
        assert!((path_log_prob(p.log(PROB_FLOOR).view(), &path).exp() - 0.729).abs() < 1e-12);
    }

    #[test]
    fn deterministic_path() {
        let p = post(&[[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        let y = LabelSequence::new(vec![A], 1).unwrap();
        assert!(ctc_loss(p.log(PROB_FLOOR).view(), &y).unwrap().abs() < 1e-12);
        assert_eq!(ctc_viterbi(p.log(PROB_FLOOR).view(), &y).unwrap(), vec![PHI, A, PHI]);
    }

    #[test]
    fn viterbi_tie_prefers_earlier_transition() {
        let p = post(&[[0.5, 0.5], [0.5, 0.5]]);
        let y = LabelSequence::new(vec![A], 1).unwrap();
        // AA, Aφ and φA all have probability 1/4
        assert_eq!(ctc_viterbi(p.log(PROB_FLOOR).view(), &y).unwrap(), vec![PHI, A]);
    }

    #[test]
    fn infeasible_targets() {
        let p = PosteriorMatrix::from_rows(&[vec![0.3, 0.3, 0.4]]).unwrap();
        let y = LabelSequence::new(vec![0, 1], 2).unwrap();
        assert!(matches!(ctc_loss(p.log(PROB_FLOOR).view(), &y), Err(Error::Infeasible { .. })));
        let p2 = PosteriorMatrix::from_rows(&[vec![0.3, 0.3, 0.4], vec![0.3, 0.3, 0.4]]).unwrap();
        let rep = LabelSequence::new(vec![0, 0], 2).unwrap();
        assert!(matches!(ctc_loss(p2.log(PROB_FLOOR).view(), &rep), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn bruteforce_unreachable_and_bounds() {
        let p = post(&[[0.0, 1.0], [0.0, 1.0]]);
        let y = LabelSequence::new(vec![A], 1).unwrap();
        assert_eq!(ctc_loss_bruteforce(&p, &y).unwrap(), f64::INFINITY);
        let big = PosteriorMatrix::from_rows(&vec![vec![0.5, 0.5]; 11]).unwrap();
        assert!(matches!(ctc_loss_bruteforce(&big, &y), Err(Error::TooLarge(_))));
    }

    #[test]
    fn oracle_beta_examples() {
        // Y=0, E=1, S=2, blank=3
        let (yy, e, s, b) = (0, 1, 2, 3);
        let (rel, beta) = beta_from_forced_alignment(&[b, yy, b, b, e, e, s], 3).unwrap();
        assert_eq!(rel.tokens(), &[b, yy, b, e, s]);
        let want = [1.0, 1.0, 2.0, 2.0, 1.0].map(|v| v / 7.0);
        for (g, w) in beta.as_slice().iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
        let (rel, beta) = beta_from_forced_alignment(&[0, 0, 0, 0], 3).unwrap();
        assert_eq!((rel.tokens(), beta.as_slice()), (&[0][..], &[1.0][..]));
        let (rel, beta) = beta_from_forced_alignment(&[0, 1], 3).unwrap();
        assert_eq!((rel.tokens(), beta.as_slice()), (&[0, 1][..], &[0.5, 0.5][..]));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let logits = ndarray::array![[0.2, -0.4, 0.9], [1.1, 0.3, -0.2], [0.0, 0.5, 0.4], [-0.3, 0.8, 0.1]];
        let y = LabelSequence::new(vec![0, 1], 2).unwrap();
        let base = crate::ottc::log_softmax_rows(logits.view());
        let (_, g_log) = ctc_loss_and_grad(base.view(), &y).unwrap();
        let g = crate::ottc::log_softmax_backward(base.view(), g_log.view());
        let h = 1e-6;
        for t in 0..4 {
            for k in 0..3 {
                let mut lp = logits.clone();
                lp[[t, k]] += h;
                let up = ctc_loss(crate::ottc::log_softmax_rows(lp.view()).view(), &y).unwrap();
                lp[[t, k]] -= 2.0 * h;
                let dn = ctc_loss(crate::ottc::log_softmax_rows(lp.view()).view(), &y).unwrap();
                assert!(((up - dn) / (2.0 * h) - g[[t, k]]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn greedy_examples() {
        let rows = |ids: &[usize]| {
            PosteriorMatrix::from_rows(
                &ids.iter().map(|&k| (0..3).map(|c| if c == k { 0.9 } else { 0.05 }).collect()).collect::<Vec<_>>(),
            )
            .unwrap()
        };
        let (l, s) = ctc_greedy_decode(&rows(&[2, 0, 2]));
        assert_eq!(l.tokens(), &[0]);
        assert_eq!(s.spans, vec![Span { label: 0, start: 1, end: 2 }]);
        assert_eq!(ctc_greedy_decode(&rows(&[0, 0, 1])).0.tokens(), &[0, 1]);
        assert!(ctc_greedy_decode(&rows(&[2, 2])).0.is_empty());
    }
}
