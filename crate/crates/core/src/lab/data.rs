//! Synthetic monotonic sequence data with known segmentations.
//!
//! Each label owns a fixed codebook vector; a token of duration `k` becomes
//! `k` noisy copies of that vector. Silence frames are noisy copies of a
//! separate prototype. Codebook rows are orthonormal and scaled by
//! [`CODEBOOK_SCALE`].

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{LabelSequence, Segmentation, Span};

pub const CODEBOOK_SCALE: f64 = 1.5;
pub const DEFAULT_FEATURE_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub vocab_size: usize,
    pub count: usize,
    /// Inclusive range of target lengths.
    pub target_len: (usize, usize),
    /// Inclusive range of per-token (and per-pause) durations in frames.
    pub duration: (usize, usize),
    pub noise_sigma: f64,
    /// Chance of a pause between two different adjacent tokens. Equal
    /// adjacent tokens are always separated by a pause.
    pub silence_prob: f64,
    pub seed: u64,
    pub feature_dim: usize,
    /// Seeds the codebook independently of the utterances, so splits drawn
    /// with different `seed`s share one feature space.
    pub codebook_seed: u64,
}

/// The reference synthetic configuration (vocabulary 8, 100 utterances).
impl Default for DataConfig {
    fn default() -> Self {
        Self {
            vocab_size: 8,
            count: 100,
            target_len: (3, 8),
            duration: (2, 6),
            noise_sigma: 0.3,
            silence_prob: 0.15,
            seed: 0,
            feature_dim: DEFAULT_FEATURE_DIM,
            codebook_seed: 0,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.vocab_size < 2 {
            return bad(format!("vocabulary size {} must be at least 2", self.vocab_size));
        }
        if self.target_len.0 == 0 || self.target_len.0 > self.target_len.1 {
            return bad(format!("target length range {:?} is empty", self.target_len));
        }
        if self.duration.0 == 0 || self.duration.0 > self.duration.1 {
            return bad(format!("duration range {:?} is empty", self.duration));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {} must be finite and nonnegative", self.noise_sigma));
        }
        if !(0.0..=1.0).contains(&self.silence_prob) {
            return bad(format!("silence probability {} outside [0, 1]", self.silence_prob));
        }
        if self.feature_dim < self.vocab_size + 1 {
            return bad(format!(
                "feature dimension {} cannot hold {} orthogonal prototypes",
                self.feature_dim,
                self.vocab_size + 1
            ));
        }
        Ok(())
    }
}

/// One generated record. Frame indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticUtterance {
    pub id: String,
    pub vocab_size: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub gt_segmentation: Segmentation,
    pub silence_frames: Vec<usize>,
}

impl SyntheticUtterance {
    pub fn frames(&self) -> usize {
        self.features.len()
    }

    pub fn silence_fraction(&self) -> f64 {
        self.silence_frames.len() as f64 / self.frames() as f64
    }

    pub fn label_sequence(&self) -> Result<LabelSequence> {
        LabelSequence::new(self.labels.clone(), self.vocab_size)
    }

    pub fn feature_matrix(&self) -> Result<Array2<f64>> {
        let d = self.features.first().map_or(0, Vec::len);
        if self.features.iter().any(|f| f.len() != d) {
            return Err(Error::Shape(format!("{}: ragged features", self.id)));
        }
        Array2::from_shape_vec((self.frames(), d), self.features.concat())
            .map_err(|e| Error::Shape(format!("{}: {e}", self.id)))
    }

    /// Checks the record's internal consistency.
    pub fn validate(&self) -> Result<()> {
        let n = self.frames();
        if n == 0 || self.labels.is_empty() {
            return Err(Error::Empty("utterance"));
        }
        self.label_sequence()?;
        if self.labels.contains(&self.vocab_size) {
            return Err(Error::InvalidLabels(format!("{}: labels contain the blank", self.id)));
        }
        self.gt_segmentation.validate(n)?;
        if self.gt_segmentation.labels() != self.labels {
            return Err(Error::InvalidLabels(format!("{}: segmentation labels differ from labels", self.id)));
        }
        let covered: usize = self.gt_segmentation.spans.iter().map(Span::len).sum();
        if covered + self.silence_frames.len() != n {
            return Err(Error::Shape(format!("{}: spans and silence do not tile the frames", self.id)));
        }
        Ok(())
    }
}

/// Orthonormal rows via Gram-Schmidt on Gaussian draws, scaled; row
/// `vocab_size` is the silence prototype.
pub fn codebook(vocab_size: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = vocab_size + 1;
    let mut out = Array2::<f64>::zeros((rows, dim));
    let mut k = 0;
    while k < rows {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for prev in 0..k {
            let dot: f64 = v.iter().zip(out.row(prev)).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(out.row(prev)) {
                *a -= dot * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        for (o, a) in out.row_mut(k).iter_mut().zip(&v) {
            *o = a / norm;
        }
        k += 1;
    }
    out * CODEBOOK_SCALE
}

pub fn generate_dataset(cfg: &DataConfig) -> Result<Vec<SyntheticUtterance>> {
    cfg.validate()?;
    let book = codebook(cfg.vocab_size, cfg.feature_dim, cfg.codebook_seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let silence = cfg.vocab_size;
    let mut out = Vec::with_capacity(cfg.count);
    for u in 0..cfg.count {
        let m = rng.random_range(cfg.target_len.0..=cfg.target_len.1);
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..cfg.vocab_size)).collect();
        let mut frame_rows: Vec<usize> = Vec::new();
        let mut spans = Vec::with_capacity(m);
        let mut silence_frames = Vec::new();
        for (k, &label) in labels.iter().enumerate() {
            if k > 0 {
                let forced = labels[k - 1] == label;
                let pause = rng.random_bool(cfg.silence_prob);
                if forced || pause {
                    let len = rng.random_range(cfg.duration.0..=cfg.duration.1);
                    for _ in 0..len {
                        silence_frames.push(frame_rows.len());
                        frame_rows.push(silence);
                    }
                }
            }
            let len = rng.random_range(cfg.duration.0..=cfg.duration.1);
            let start = frame_rows.len();
            frame_rows.extend(std::iter::repeat_n(label, len));
            spans.push(Span {
                label,
                start,
                end: start + len,
            });
        }
        let features = frame_rows
            .iter()
            .map(|&r| {
                book.row(r)
                    .iter()
                    .map(|&c| if cfg.noise_sigma > 0.0 { c + noise.sample(&mut rng) } else { c })
                    .collect()
            })
            .collect();
        out.push(SyntheticUtterance {
            id: format!("utt{u:05}"),
            vocab_size: cfg.vocab_size,
            features,
            labels,
            gt_segmentation: Segmentation::new(spans),
            silence_frames,
        });
    }
    Ok(out)
}

/// Check that every record agrees on vocabulary and feature dimension.
pub fn dataset_shape(data: &[SyntheticUtterance]) -> Result<(usize, usize)> {
    let first = data.first().ok_or(Error::Empty("dataset"))?;
    let vocab = first.vocab_size;
    let dim = first.features.first().map_or(0, Vec::len);
    for u in data {
        u.validate()?;
        if u.vocab_size != vocab || u.features[0].len() != dim {
            return Err(Error::Shape(format!("{}: vocabulary or feature dimension differs", u.id)));
        }
    }
    Ok((vocab, dim))
}
