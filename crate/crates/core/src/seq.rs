//! Label sequences, per-frame posteriors, and frame segmentations.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Target tokens over a vocabulary of `vocab_size` labels plus the blank,
/// which always has id `vocab_size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSequence {
    tokens: Vec<usize>,
    vocab_size: usize,
}

impl LabelSequence {
    pub fn new(tokens: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::InvalidLabels("vocabulary is empty".into()));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t > vocab_size) {
            return Err(Error::InvalidLabels(format!(
                "token {t} outside [0, {vocab_size}]"
            )));
        }
        Ok(Self { tokens, vocab_size })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn blank_id(&self) -> usize {
        self.vocab_size
    }

    /// One-hot dimension, `|L| + 1`.
    pub fn num_classes(&self) -> usize {
        self.vocab_size + 1
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains_blank(&self) -> bool {
        self.tokens.contains(&self.vocab_size)
    }

    /// Number of positions `k` with `tokens[k] == tokens[k + 1]`.
    pub fn adjacent_repeats(&self) -> usize {
        self.tokens.windows(2).filter(|w| w[0] == w[1]).count()
    }

    pub fn without_blanks(&self) -> Self {
        Self {
            tokens: self.tokens.iter().copied().filter(|&t| t != self.vocab_size).collect(),
            vocab_size: self.vocab_size,
        }
    }
}

/// Row-stochastic `n x (|L| + 1)` matrix of per-frame label probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix(Array2<f64>);

pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

impl PosteriorMatrix {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::Empty("posterior matrix"));
        }
        for (t, row) in rows.outer_iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidProbability(format!("frame {t} has a negative or non-finite entry")));
            }
            let s: f64 = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidProbability(format!("frame {t} sums to {s}")));
            }
        }
        Ok(Self(rows))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("ragged posterior rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((rows.len(), k), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(arr)
    }

    /// Row-wise softmax of unnormalized logits.
    pub fn from_logits(logits: ArrayView2<f64>) -> Result<Self> {
        Self::new(crate::ottc::log_softmax_rows(logits).mapv(f64::exp))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn frames(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }

    /// Elementwise natural log with the given probability floor.
    pub fn log(&self, floor: f64) -> Array2<f64> {
        self.0.mapv(|p| p.max(floor).ln())
    }

    /// Per-frame argmax; ties resolve to the smallest id.
    pub fn argmax(&self) -> Vec<usize> {
        argmax_rows(self.0.view())
    }
}

pub(crate) fn argmax_rows(m: ArrayView2<f64>) -> Vec<usize> {
    m.outer_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// A labelled frame run `[start, end)`, serialized as `[label, start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub label: usize,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &Span) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.label, self.start, self.end).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (label, start, end) = <(usize, usize, usize)>::deserialize(d)?;
        Ok(Span { label, start, end })
    }
}

/// Ordered, non-overlapping token spans over a frame axis.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Segmentation {
    pub spans: Vec<Span>,
}

impl Segmentation {
    pub fn new(spans: Vec<Span>) -> Self {
        Self { spans }
    }

    /// Checks ordering, non-overlap, and that every span lies in `[0, frames)`.
    pub fn validate(&self, frames: usize) -> Result<()> {
        let mut prev_end = 0;
        for s in &self.spans {
            if s.end <= s.start || s.end > frames || s.start < prev_end {
                return Err(Error::Shape(format!(
                    "span ({}, {}, {}) is empty, overlaps, or exceeds {frames} frames",
                    s.label, s.start, s.end
                )));
            }
            prev_end = s.end;
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.spans.iter().map(|s| s.label).collect()
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// Maximal runs of equal symbols as `(symbol, start, end)`.
pub fn runs(symbols: &[usize]) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    for (t, &s) in symbols.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.label == s => last.end = t + 1,
            _ => out.push(Span {
                label: s,
                start: t,
                end: t + 1,
            }),
        }
    }
    out
}

/// Argmax-collapse decoding: merge runs, drop blank runs, record each
/// surviving token's run.
pub fn decode_frames(frame_labels: &[usize], blank: usize, vocab_size: usize) -> (LabelSequence, Segmentation) {
    let spans: Vec<Span> = runs(frame_labels).into_iter().filter(|r| r.label != blank).collect();
    let tokens = spans.iter().map(|s| s.label).collect();
    (
        LabelSequence {
            tokens,
            vocab_size,
        },
        Segmentation::new(spans),
    )
}
