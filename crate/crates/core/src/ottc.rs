//! The OTTC objective: cross-entropy weighted by the 1D transport plan
//! between learned frame weights and fixed label weights.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::ot::{self, compensated_sum, SimplexWeights, SparseCoupling, StrictSimplexWeights};
use crate::seq::{decode_frames, LabelSequence, PosteriorMatrix, Segmentation};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-30;

/// Inserts a blank between every pair of equal adjacent labels.
pub fn augment_blanks(y: &LabelSequence) -> Result<LabelSequence> {
    if y.contains_blank() {
        return Err(Error::InvalidLabels("sequence already contains the blank".into()));
    }
    let blank = y.blank_id();
    let mut out = Vec::with_capacity(y.len() + y.adjacent_repeats());
    for (k, &t) in y.tokens().iter().enumerate() {
        if k > 0 && y.tokens()[k - 1] == t {
            out.push(blank);
        }
        out.push(t);
    }
    LabelSequence::new(out, y.vocab_size())
}

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z = compensated_sum(exps.iter().copied());
    exps.into_iter().map(|e| e / z).collect()
}

/// Frame weights from per-frame scalar scores.
pub fn alpha_from_scores(scores: &[f64]) -> Result<SimplexWeights> {
    if scores.is_empty() {
        return Err(Error::Empty("alpha scores"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("alpha scores"));
    }
    SimplexWeights::from_unnormalized(softmax(scores))
}

/// Chains a gradient on `alpha = softmax(scores)` back to the scores.
pub fn softmax_backward(alpha: &[f64], grad_alpha: &[f64]) -> Vec<f64> {
    let dot = compensated_sum(alpha.iter().zip(grad_alpha).map(|(a, g)| a * g));
    alpha.iter().zip(grad_alpha).map(|(a, g)| a * (g - dot)).collect()
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Given `dL/dlog p` and `log p = log_softmax(z)`, returns `dL/dz`.
pub fn log_softmax_backward(log_probs: ArrayView2<f64>, grad_log: ArrayView2<f64>) -> Array2<f64> {
    let mut out = grad_log.to_owned();
    for (mut g, lp) in out.axis_iter_mut(Axis(0)).zip(log_probs.axis_iter(Axis(0))) {
        let total: f64 = g.sum();
        for (gk, &l) in g.iter_mut().zip(lp.iter()) {
            *gk -= l.exp() * total;
        }
    }
    out
}

fn check_shapes(
    log_post: ArrayView2<f64>,
    y: &LabelSequence,
    n_alpha: usize,
    beta: &StrictSimplexWeights,
) -> Result<()> {
    let (n, k) = log_post.dim();
    if y.is_empty() {
        return Err(Error::Empty("target sequence"));
    }
    if n < y.len() {
        return Err(Error::Shape(format!("{n} frames cannot cover {} targets", y.len())));
    }
    if k != y.num_classes() {
        return Err(Error::Shape(format!(
            "posteriors have {k} classes, vocabulary needs {}",
            y.num_classes()
        )));
    }
    if n_alpha != n {
        return Err(Error::Shape(format!("alpha has {n_alpha} weights for {n} frames")));
    }
    if beta.len() != y.len() {
        return Err(Error::Shape(format!("beta has {} weights for {} targets", beta.len(), y.len())));
    }
    Ok(())
}

#[inline]
fn floored(lp: f64) -> f64 {
    lp.max(PROB_FLOOR.ln())
}

/// `-sum gamma_ij log p_{y_j}(x_i)` from log-posteriors.
pub fn ottc_loss_log(
    log_post: ArrayView2<f64>,
    y_aug: &LabelSequence,
    alpha: &SimplexWeights,
    beta: &StrictSimplexWeights,
) -> Result<f64> {
    check_shapes(log_post, y_aug, alpha.len(), beta)?;
    let coupling = ot::compute_coupling(alpha, beta);
    Ok(weighted_nll(log_post, y_aug, &coupling))
}

fn weighted_nll(log_post: ArrayView2<f64>, y: &LabelSequence, coupling: &SparseCoupling) -> f64 {
    let t = y.tokens();
    -compensated_sum(
        coupling
            .entries
            .iter()
            .map(|e| e.mass * floored(log_post[[e.i - 1, t[e.j - 1]]])),
    )
}

/// OTTC loss from probabilities.
pub fn ottc_loss(
    posteriors: &PosteriorMatrix,
    y_aug: &LabelSequence,
    alpha: &SimplexWeights,
    beta: &StrictSimplexWeights,
) -> Result<f64> {
    ottc_loss_log(posteriors.log(PROB_FLOOR).view(), y_aug, alpha, beta)
}

/// Loss value and gradients of one OTTC evaluation.
#[derive(Debug, Clone)]
pub struct OttcGrad {
    pub loss: f64,
    /// `dL/dlog p`, `n x K`.
    pub log_posteriors: Array2<f64>,
    /// `dL/dalpha`, unprojected.
    pub alpha: Vec<f64>,
    /// `dL/dscores` when `alpha = softmax(scores)`; empty otherwise.
    pub scores: Vec<f64>,
    pub coupling: SparseCoupling,
}

/// Loss and gradients for fixed `alpha`.
pub fn ottc_forward_backward(
    log_post: ArrayView2<f64>,
    y_aug: &LabelSequence,
    alpha: &SimplexWeights,
    beta: &StrictSimplexWeights,
) -> Result<OttcGrad> {
    check_shapes(log_post, y_aug, alpha.len(), beta)?;
    let t = y_aug.tokens();
    let coupling = ot::compute_coupling(alpha, beta);
    let loss = weighted_nll(log_post, y_aug, &coupling);
    let mut d_log = Array2::zeros(log_post.dim());
    for e in &coupling.entries {
        d_log[[e.i - 1, t[e.j - 1]]] -= e.mass;
    }
    let d_alpha = ot::coupling_backward(alpha, beta, |i, j| -floored(log_post[[i - 1, t[j - 1]]]))?;
    Ok(OttcGrad {
        loss,
        log_posteriors: d_log,
        alpha: d_alpha,
        scores: Vec::new(),
        coupling,
    })
}

/// Loss and gradients with `alpha = softmax(scores)`.
pub fn ottc_backward_log(
    log_post: ArrayView2<f64>,
    y_aug: &LabelSequence,
    scores: &[f64],
    beta: &StrictSimplexWeights,
) -> Result<OttcGrad> {
    let alpha = alpha_from_scores(scores)?;
    let mut g = ottc_forward_backward(log_post, y_aug, &alpha, beta)?;
    g.scores = softmax_backward(alpha.as_slice(), &g.alpha);
    Ok(g)
}

pub fn ottc_backward(
    posteriors: &PosteriorMatrix,
    y_aug: &LabelSequence,
    scores: &[f64],
    beta: &StrictSimplexWeights,
) -> Result<OttcGrad> {
    ottc_backward_log(posteriors.log(PROB_FLOOR).view(), y_aug, scores, beta)
}

/// Argmax, collapse repeats, drop blanks.
pub fn greedy_decode(posteriors: &PosteriorMatrix) -> (LabelSequence, Segmentation) {
    let vocab = posteriors.num_classes() - 1;
    decode_frames(&posteriors.argmax(), vocab, vocab)
}
