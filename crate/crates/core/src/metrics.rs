//! Alignment-quality metrics: blank share, start-frame F1, intersection
//! duration ratio, and token error rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{LabelSequence, Segmentation};

pub const DEFAULT_TOLERANCE_FRAMES: usize = 2;

/// `100 * share(argmax in non_alphabet) - 100 * silence`, clamped to `[0, 100]`.
pub fn peaky_percent(frame_argmax: &[usize], non_alphabet: &[usize], silence_fraction: f64) -> Result<f64> {
    if frame_argmax.is_empty() {
        return Err(Error::Empty("frame argmax"));
    }
    if !(0.0..=1.0).contains(&silence_fraction) {
        return Err(Error::Config(format!("silence fraction {silence_fraction} outside [0, 1]")));
    }
    let hits = frame_argmax.iter().filter(|k| non_alphabet.contains(k)).count();
    let pct = 100.0 * hits as f64 / frame_argmax.len() as f64 - 100.0 * silence_fraction;
    Ok(pct.clamp(0.0, 100.0))
}

/// Levenshtein distance with unit costs.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn token_error_rate(hyp: &LabelSequence, reference: &LabelSequence) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Empty("reference transcript"));
    }
    Ok(levenshtein(hyp.tokens(), reference.tokens()) as f64 / reference.len() as f64)
}

/// Index pairs `(pred, ref)` with equal labels on a minimum-edit-distance
/// alignment. Ties prefer match, then substitution, then deleting a
/// prediction, then inserting a reference token, so earlier matches win.
pub fn match_tokens(pred: &[usize], reference: &[usize]) -> Vec<(usize, usize)> {
    let (p, r) = (pred.len(), reference.len());
    let w = r + 1;
    // d[i * w + j]: distance between pred[i..] and reference[j..]
    let mut d = vec![0usize; (p + 1) * w];
    for i in (0..=p).rev() {
        for j in (0..=r).rev() {
            d[i * w + j] = if i == p {
                r - j
            } else if j == r {
                p - i
            } else {
                let diag = d[(i + 1) * w + j + 1] + usize::from(pred[i] != reference[j]);
                diag.min(d[(i + 1) * w + j] + 1).min(d[i * w + j + 1] + 1)
            };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < p && j < r {
        let here = d[i * w + j];
        if pred[i] == reference[j] && here == d[(i + 1) * w + j + 1] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if pred[i] != reference[j] && here == d[(i + 1) * w + j + 1] + 1 {
            i += 1;
            j += 1;
        } else if here == d[(i + 1) * w + j] + 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// True/false positive and false negative counts behind [`boundary_f1`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct F1Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub matched: usize,
}

impl F1Counts {
    pub fn f1(&self) -> f64 {
        if self.tp + self.fp + self.fn_ == 0 {
            return 1.0;
        }
        let denom = 2 * self.tp + self.fp + self.fn_;
        2.0 * self.tp as f64 / denom as f64
    }
}

pub fn boundary_counts(pred: &Segmentation, reference: &Segmentation, tolerance_frames: usize) -> F1Counts {
    let pairs = match_tokens(&pred.labels(), &reference.labels());
    let tp = pairs
        .iter()
        .filter(|&&(i, j)| pred.spans[i].start.abs_diff(reference.spans[j].start) <= tolerance_frames)
        .count();
    F1Counts {
        tp,
        fp: pred.len() - tp,
        fn_: reference.len() - tp,
        matched: pairs.len(),
    }
}

/// Start-frame F1. Two empty segmentations score 1.
pub fn boundary_f1(pred: &Segmentation, reference: &Segmentation, tolerance_frames: usize) -> f64 {
    boundary_counts(pred, reference, tolerance_frames).f1()
}

/// Overlap of matched spans over total reference duration.
pub fn idr(pred: &Segmentation, reference: &Segmentation) -> Result<f64> {
    let total: usize = reference.spans.iter().map(|s| s.len()).sum();
    if total == 0 {
        return Err(Error::Empty("reference segmentation"));
    }
    let inter: usize = match_tokens(&pred.labels(), &reference.labels())
        .into_iter()
        .map(|(i, j)| pred.spans[i].overlap(&reference.spans[j]))
        .sum();
    Ok(inter as f64 / total as f64)
}

/// Per-evaluation summary; fields are unweighted means over utterances,
/// counts are totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub peaky_percent: f64,
    pub f1: f64,
    pub idr: f64,
    pub token_error_rate: f64,
    pub dropped_frame_percent: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub matched_tokens: usize,
    pub utterances: usize,
}

/// Metrics of one decoded utterance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtteranceMetrics {
    pub peaky_percent: f64,
    pub f1: f64,
    pub idr: f64,
    pub token_error_rate: f64,
    pub dropped_frame_percent: f64,
    pub counts: F1Counts,
}

#[allow(clippy::too_many_arguments)]
pub fn utterance_metrics(
    frame_argmax: &[usize],
    non_alphabet: &[usize],
    silence_fraction: f64,
    hyp: &LabelSequence,
    hyp_seg: &Segmentation,
    reference: &LabelSequence,
    ref_seg: &Segmentation,
    tolerance_frames: usize,
    dropped_frames: usize,
) -> Result<UtteranceMetrics> {
    let counts = boundary_counts(hyp_seg, ref_seg, tolerance_frames);
    Ok(UtteranceMetrics {
        peaky_percent: peaky_percent(frame_argmax, non_alphabet, silence_fraction)?,
        f1: counts.f1(),
        idr: idr(hyp_seg, ref_seg)?,
        token_error_rate: token_error_rate(hyp, reference)?,
        dropped_frame_percent: 100.0 * dropped_frames as f64 / frame_argmax.len() as f64,
        counts,
    })
}

impl MetricsReport {
    pub fn aggregate(items: &[UtteranceMetrics]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let n = items.len() as f64;
        let mean = |f: fn(&UtteranceMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            peaky_percent: mean(|u| u.peaky_percent),
            f1: mean(|u| u.f1),
            idr: mean(|u| u.idr),
            token_error_rate: mean(|u| u.token_error_rate),
            dropped_frame_percent: mean(|u| u.dropped_frame_percent),
            tp: items.iter().map(|u| u.counts.tp).sum(),
            fp: items.iter().map(|u| u.counts.fp).sum(),
            fn_: items.iter().map(|u| u.counts.fn_).sum(),
            matched_tokens: items.iter().map(|u| u.counts.matched).sum(),
            utterances: items.len(),
        })
    }
}
