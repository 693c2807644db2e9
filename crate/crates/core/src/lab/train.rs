//! Training loop and evaluation for the toy encoder.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{dataset_shape, SyntheticUtterance};
use super::encoder::{encoder_backward, encoder_forward, EncoderParams, EncoderShape, ParamGroup};
use crate::ctc;
use crate::error::{Error, Result};
use crate::metrics::{utterance_metrics, MetricsReport, DEFAULT_TOLERANCE_FRAMES};
use crate::ot::{SimplexWeights, StrictSimplexWeights};
use crate::ottc::{self, alpha_from_scores, augment_blanks, log_softmax_backward, log_softmax_rows};
use crate::seq::{LabelSequence, PosteriorMatrix, Segmentation};
use crate::sotd::default_drop_threshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Ottc,
    Ctc,
    OttcFixedAlpha,
    OttcOracleBeta,
    SinglePathCe,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Ottc,
        Mode::Ctc,
        Mode::OttcFixedAlpha,
        Mode::OttcOracleBeta,
        Mode::SinglePathCe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ottc => "ottc",
            Mode::Ctc => "ctc",
            Mode::OttcFixedAlpha => "ottc-fixed-alpha",
            Mode::OttcOracleBeta => "ottc-oracle-beta",
            Mode::SinglePathCe => "single-path-ce",
        }
    }

    /// Whether the score head produces the frame weights.
    pub fn learns_alpha(self) -> bool {
        matches!(self, Mode::Ottc | Mode::OttcOracleBeta)
    }

    /// Whether targets come from Viterbi paths of a trained CTC model.
    pub fn needs_ctc_model(self) -> bool {
        matches!(self, Mode::OttcOracleBeta | Mode::SinglePathCe)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub epochs: usize,
    /// During the last this-many epochs only the logits head is updated in
    /// modes that learn frame weights; elsewhere the score head is held.
    pub freeze_last_epochs: usize,
    pub lr: f64,
    pub warmup_steps: usize,
    pub seed: u64,
    pub batch_size: usize,
    /// Absolute frame-weight threshold for dropped frames; `None` uses
    /// `0.1 / n` per utterance.
    pub drop_threshold: Option<f64>,
    pub hidden: usize,
    pub context: usize,
    /// Training utterances scored after every epoch.
    pub probe_count: usize,
    /// Training utterances whose frame weights are logged every epoch.
    pub snapshot_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Ottc,
            epochs: 50,
            freeze_last_epochs: 10,
            lr: 1e-3,
            warmup_steps: 100,
            seed: 0,
            batch_size: 16,
            drop_threshold: None,
            hidden: 64,
            context: 0,
            probe_count: 200,
            snapshot_count: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.freeze_last_epochs > self.epochs {
            return Err(Error::Config(format!(
                "cannot freeze the last {} of {} epochs",
                self.freeze_last_epochs, self.epochs
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and nonnegative", self.lr)));
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::Config("batch size and hidden width must be positive".into()));
        }
        if self.drop_threshold.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::Config("drop threshold must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn is_frozen(&self, epoch: usize) -> bool {
        epoch >= self.epochs - self.freeze_last_epochs
    }
}

#[derive(Debug, Clone)]
enum Target {
    Ottc { y: LabelSequence, beta: StrictSimplexWeights },
    Ctc(LabelSequence),
    Frames(Vec<usize>),
}

/// An utterance converted for training: dense features and a loss target.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    pub features: Array2<f64>,
    pub labels: LabelSequence,
    pub gt: Segmentation,
    pub silence_fraction: f64,
    target: Target,
}

/// Viterbi paths of a CTC model for each utterance.
pub fn forced_paths(ctc_params: &EncoderParams, data: &[SyntheticUtterance]) -> Result<Vec<Vec<usize>>> {
    data.par_iter()
        .map(|u| {
            let x = u.feature_matrix()?;
            let out = encoder_forward(ctc_params, x.view())?;
            ctc::ctc_viterbi(log_softmax_rows(out.logits.view()).view(), &u.label_sequence()?)
        })
        .collect()
}

pub fn prepare(mode: Mode, data: &[SyntheticUtterance], ctc_params: Option<&EncoderParams>) -> Result<Vec<Prepared>> {
    dataset_shape(data)?;
    let paths = if mode.needs_ctc_model() {
        let p = ctc_params.ok_or_else(|| Error::Config(format!("mode {mode} needs a trained CTC checkpoint")))?;
        Some(forced_paths(p, data)?)
    } else {
        None
    };
    data.iter()
        .enumerate()
        .map(|(k, u)| {
            let labels = u.label_sequence()?;
            let target = match mode {
                Mode::Ottc | Mode::OttcFixedAlpha => {
                    let y = augment_blanks(&labels)?;
                    let beta = StrictSimplexWeights::uniform(y.len())?;
                    Target::Ottc { y, beta }
                }
                Mode::Ctc => Target::Ctc(labels.clone()),
                Mode::OttcOracleBeta => {
                    let path = &paths.as_ref().expect("paths")[k];
                    let (y, beta) = ctc::beta_from_forced_alignment(path, u.vocab_size)?;
                    Target::Ottc { y, beta }
                }
                Mode::SinglePathCe => Target::Frames(paths.as_ref().expect("paths")[k].clone()),
            };
            Ok(Prepared {
                id: u.id.clone(),
                features: u.feature_matrix()?,
                labels,
                gt: u.gt_segmentation.clone(),
                silence_fraction: u.silence_fraction(),
                target,
            })
        })
        .collect()
}

/// Loss and parameter gradients for one utterance.
pub fn utterance_grad(params: &EncoderParams, u: &Prepared, mode: Mode) -> Result<(f64, EncoderParams)> {
    let out = encoder_forward(params, u.features.view())?;
    let lp = log_softmax_rows(out.logits.view());
    let n = lp.nrows();
    let (loss, d_log, d_scores) = match &u.target {
        Target::Ottc { y, beta } if mode.learns_alpha() => {
            let g = ottc::ottc_backward_log(lp.view(), y, &out.scores, beta)?;
            (g.loss, g.log_posteriors, Some(Array1::from(g.scores)))
        }
        Target::Ottc { y, beta } => {
            let g = ottc::ottc_forward_backward(lp.view(), y, &SimplexWeights::uniform(n)?, beta)?;
            (g.loss, g.log_posteriors, None)
        }
        Target::Ctc(y) => {
            let (l, g) = ctc::ctc_loss_and_grad(lp.view(), y)?;
            (l, g, None)
        }
        Target::Frames(path) => {
            let mut g = Array2::zeros(lp.dim());
            let mut l = 0.0;
            for (t, &k) in path.iter().enumerate() {
                l -= lp[[t, k]] / n as f64;
                g[[t, k]] = -1.0 / n as f64;
            }
            (l, g, None)
        }
    };
    let d_logits = log_softmax_backward(lp.view(), d_log.view());
    let grads = encoder_backward(params, &out.cache, d_logits.view(), d_scores.as_ref().map(|d| d.view()));
    Ok((loss, grads))
}

/// Adam with bias correction; groups outside the mask are left untouched,
/// moments included.
#[derive(Debug, Clone)]
pub struct Adam {
    m: EncoderParams,
    v: EncoderParams,
    t: i32,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl Adam {
    pub fn new(shape: EncoderShape) -> Self {
        Self {
            m: EncoderParams::zeros(shape),
            v: EncoderParams::zeros(shape),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut EncoderParams, grads: &EncoderParams, lr: f64, update: impl Fn(ParamGroup) -> bool) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let g = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for ((((group, p), (_, m)), (_, v)), (_, _, _, g)) in params.tensors_mut().into_iter().zip(ms).zip(vs).zip(g.iter()) {
            if !update(group) {
                continue;
            }
            for k in 0..p.len() {
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Linear warmup to `lr` over `warmup` steps, then linear decay to zero at
/// `total`. Steps count from 1.
pub fn learning_rate(lr: f64, step: usize, warmup: usize, total: usize) -> f64 {
    if step <= warmup {
        return lr * step as f64 / warmup as f64;
    }
    if total <= warmup {
        return lr;
    }
    lr * (total.saturating_sub(step)) as f64 / (total - warmup) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub ter: f64,
    pub peaky: f64,
    pub f1: f64,
    pub idr: f64,
    pub dropped_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSnapshot {
    pub epoch: usize,
    pub id: String,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Frame weights of the first utterances after each epoch, epoch 0
    /// being the initialization. Empty for modes without learned weights.
    pub alpha_snapshots: Vec<AlphaSnapshot>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,ter,peaky,f1,idr,dropped_pct\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.epoch, e.loss, e.ter, e.peaky, e.f1, e.idr, e.dropped_pct
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub tolerance_frames: usize,
    pub drop_threshold: Option<f64>,
    /// Subtract the utterance's true silence share from the blank share.
    pub subtract_silence: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerance_frames: DEFAULT_TOLERANCE_FRAMES,
            drop_threshold: None,
            subtract_silence: true,
        }
    }
}

fn snapshot(params: &EncoderParams, data: &[Prepared], epoch: usize) -> Result<Vec<AlphaSnapshot>> {
    data.iter()
        .map(|u| {
            let out = encoder_forward(params, u.features.view())?;
            Ok(AlphaSnapshot {
                epoch,
                id: u.id.clone(),
                alpha: alpha_from_scores(&out.scores)?.into_vec(),
            })
        })
        .collect()
}

/// Frame weights the model assigns to an utterance in `mode`.
pub fn frame_weights(mode: Mode, scores: &[f64]) -> Result<SimplexWeights> {
    if mode.learns_alpha() {
        alpha_from_scores(scores)
    } else {
        SimplexWeights::uniform(scores.len())
    }
}

pub fn evaluate_prepared(params: &EncoderParams, data: &[Prepared], mode: Mode, cfg: &EvalConfig) -> Result<MetricsReport> {
    let items = data
        .par_iter()
        .map(|u| {
            let out = encoder_forward(params, u.features.view())?;
            let post = PosteriorMatrix::from_logits(out.logits.view())?;
            let (hyp, seg) = ottc::greedy_decode(&post);
            let n = post.frames();
            let dropped = if mode.learns_alpha() {
                let alpha = alpha_from_scores(&out.scores)?;
                let thr = cfg.drop_threshold.unwrap_or_else(|| default_drop_threshold(n));
                alpha.as_slice().iter().filter(|&&a| a < thr).count()
            } else {
                0
            };
            let silence = if cfg.subtract_silence { u.silence_fraction } else { 0.0 };
            utterance_metrics(
                &post.argmax(),
                &[u.labels.blank_id()],
                silence,
                &hyp,
                &seg,
                &u.labels,
                &u.gt,
                cfg.tolerance_frames,
                dropped,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::aggregate(&items)
}

pub fn evaluate(params: &EncoderParams, data: &[SyntheticUtterance], mode: Mode, cfg: &EvalConfig) -> Result<MetricsReport> {
    let prepared = prepare(Mode::Ctc, data, None)?;
    evaluate_prepared(params, &prepared, mode, cfg)
}

/// Trains from the seeded initialization. `ctc_params` supplies the forced
/// paths for the oracle modes.
pub fn train(
    cfg: &TrainConfig,
    data: &[SyntheticUtterance],
    ctc_params: Option<&EncoderParams>,
) -> Result<(EncoderParams, TrainLog)> {
    cfg.validate()?;
    let (vocab, dim) = dataset_shape(data)?;
    let shape = EncoderShape {
        feature_dim: dim,
        context: cfg.context,
        hidden: cfg.hidden,
        num_classes: vocab + 1,
    };
    let prepared = prepare(cfg.mode, data, ctc_params)?;
    let mut params = EncoderParams::init(shape, cfg.seed);
    let mut adam = Adam::new(shape);
    let probe = &prepared[..cfg.probe_count.min(prepared.len())];
    let snap = &prepared[..cfg.snapshot_count.min(prepared.len())];
    let eval_cfg = EvalConfig {
        drop_threshold: cfg.drop_threshold,
        ..EvalConfig::default()
    };
    let mut log = TrainLog::default();
    if cfg.mode.learns_alpha() {
        log.alpha_snapshots.extend(snapshot(&params, snap, 0)?);
    }
    let batches_per_epoch = prepared.len().div_ceil(cfg.batch_size);
    let total = batches_per_epoch * cfg.epochs;
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5851_F42D_4C95_7F2D);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let frozen = cfg.is_frozen(epoch);
        let learns_alpha = cfg.mode.learns_alpha();
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let results = batch
                .par_iter()
                .map(|&k| utterance_grad(&params, &prepared[k], cfg.mode))
                .collect::<Result<Vec<_>>>()?;
            let mut grads = EncoderParams::zeros(shape);
            let scale = 1.0 / batch.len() as f64;
            for (loss, g) in &results {
                epoch_loss += loss;
                grads.add_scaled(g, scale);
            }
            let lr = learning_rate(cfg.lr, step, cfg.warmup_steps, total);
            adam.step(&mut params, &grads, lr, |group| match group {
                ParamGroup::Logits => true,
                ParamGroup::Score => !frozen,
                ParamGroup::Trunk => !(frozen && learns_alpha),
            });
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters after update"));
        }
        let report = evaluate_prepared(&params, probe, cfg.mode, &eval_cfg)?;
        log.epochs.push(EpochLog {
            epoch: epoch + 1,
            loss: epoch_loss / prepared.len() as f64,
            ter: report.token_error_rate,
            peaky: report.peaky_percent,
            f1: report.f1,
            idr: report.idr,
            dropped_pct: report.dropped_frame_percent,
        });
        if learns_alpha {
            log.alpha_snapshots.extend(snapshot(&params, snap, epoch + 1)?);
        }
    }
    Ok((params, log))
}

/// Mean per-frame cross-entropy of posteriors against frame labels.
pub fn frame_cross_entropy(log_post: ArrayView2<f64>, frames: &[usize]) -> f64 {
    -frames.iter().enumerate().map(|(t, &k)| log_post[[t, k]]).sum::<f64>() / frames.len() as f64
}
