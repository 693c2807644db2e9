//! Command-line front end for the `ottc` binary.
//!
//! Exit status is 0 on success, 1 on usage errors, 2 on runtime errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::ctc;
use crate::error::{Error, Result};
use crate::io::{self, AlignmentRecord, ForcedAlignmentRecord, SequenceRecord};
use crate::lab::checkpoint::Checkpoint;
use crate::lab::data::{generate_dataset, DataConfig, SyntheticUtterance};
use crate::lab::encoder::{encoder_forward, frame_argmax};
use crate::lab::train::{self, frame_weights, EvalConfig, Mode, TrainConfig};
use crate::ot::{self, SimplexWeights, StrictSimplexWeights};
use crate::ottc::{augment_blanks, log_softmax_rows};
use crate::sotd::{self, BetaPolicy, CostKind, MinimizerConfig, Side, VectorSequence};

#[derive(Debug, Parser)]
#[command(name = "ottc", version, about = "Optimal-transport alignment, losses, and a toy training lab")]
pub struct Cli {
    /// Resolve relative output paths against this directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as JSON Lines.
    Gen(GenArgs),
    /// Train the toy encoder.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Compute the transport plan between two weight vectors.
    Align(AlignArgs),
    /// Sequence transport distance between paired sequences.
    Sotd(SotdArgs),
    /// Export per-frame weights, plans and argmax labels for plotting.
    ExportAlignment(ExportArgs),
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected MIN:MAX, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// JSON file with a full or partial dataset configuration; flags win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Number of labels, blank excluded.
    #[arg(long)]
    pub vocab: Option<usize>,
    /// Number of utterances.
    #[arg(long)]
    pub count: Option<usize>,
    /// Target length range.
    #[arg(long, value_name = "MIN:MAX", value_parser = parse_range)]
    pub target_len: Option<(usize, usize)>,
    /// Per-token duration range in frames.
    #[arg(long, value_name = "MIN:MAX", value_parser = parse_range)]
    pub dur: Option<(usize, usize)>,
    /// Standard deviation of the feature noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Probability of a pause between two different tokens.
    #[arg(long)]
    pub silence_prob: Option<f64>,
    /// Feature dimension; must exceed the vocabulary size.
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// Seed of the label codebook, shared across splits.
    #[arg(long)]
    pub codebook_seed: Option<u64>,
    #[arg(long, env = "OTTC_SEED")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON file with a full or partial training configuration; flags win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs at the end during which the frame-weight head is frozen.
    #[arg(long)]
    pub freeze_last: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Linear warmup length in optimizer steps.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Utterances per batch.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Hidden width of the trunk.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Neighbouring frames seen on each side (default 0: per-frame).
    #[arg(long)]
    pub context: Option<usize>,
    /// Absolute weight under which a frame counts as dropped (default 0.1/n).
    #[arg(long)]
    pub drop_threshold: Option<f64>,
    #[arg(long, env = "OTTC_SEED")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub ckpt_out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long, value_name = "FILE")]
    pub log_out: PathBuf,
    /// Per-epoch frame-weight snapshots as JSON Lines.
    #[arg(long, value_name = "FILE")]
    pub alpha_out: Option<PathBuf>,
    /// Trained CTC checkpoint, required by ottc-oracle-beta and single-path-ce.
    #[arg(long, value_name = "FILE")]
    pub ctc_ckpt: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_cost(s: &str) -> std::result::Result<CostKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub ckpt: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Defaults to the mode stored in the checkpoint.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_TOLERANCE_FRAMES)]
    pub tolerance_frames: usize,
    #[arg(long)]
    pub drop_threshold: Option<f64>,
    /// Do not subtract true silence from the blank share.
    #[arg(long)]
    pub keep_silence: bool,
    #[arg(long, value_name = "FILE")]
    pub report_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// JSON array of source weights.
    #[arg(long, value_name = "FILE")]
    pub alpha: PathBuf,
    /// JSON array of strictly positive target weights.
    #[arg(long, value_name = "FILE")]
    pub beta: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SotdArgs {
    /// Sequences as JSON Lines `{"id", "vectors"}`; paired line by line with --y.
    #[arg(long, value_name = "FILE")]
    pub x: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub y: PathBuf,
    /// Order of the distance.
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    #[arg(long, value_parser = parse_cost, default_value = "euclid")]
    pub cost: CostKind,
    /// Use the exact dynamic program instead of gradient descent.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = MinimizerConfig::default().steps)]
    pub steps: usize,
    #[arg(long, default_value_t = MinimizerConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = MinimizerConfig::default().restarts)]
    pub restarts: usize,
    #[arg(long, env = "OTTC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    pub ckpt: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Comma-separated utterance ids; all utterances when omitted.
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<String>,
    #[arg(long)]
    pub drop_threshold: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write Viterbi forced alignments `{"id", "path", "runs"}`.
    #[arg(long, value_name = "FILE")]
    pub forced_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PartialData {
    vocab_size: Option<usize>,
    count: Option<usize>,
    target_len: Option<(usize, usize)>,
    duration: Option<(usize, usize)>,
    noise_sigma: Option<f64>,
    silence_prob: Option<f64>,
    seed: Option<u64>,
    feature_dim: Option<usize>,
    codebook_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PartialTrain {
    mode: Option<Mode>,
    epochs: Option<usize>,
    freeze_last_epochs: Option<usize>,
    lr: Option<f64>,
    warmup_steps: Option<usize>,
    seed: Option<u64>,
    batch_size: Option<usize>,
    drop_threshold: Option<f64>,
    hidden: Option<usize>,
    context: Option<usize>,
    probe_count: Option<usize>,
    snapshot_count: Option<usize>,
}

fn data_config(a: &GenArgs) -> Result<DataConfig> {
    let file: PartialData = match &a.config {
        Some(p) => io::read_json(p)?,
        None => PartialData::default(),
    };
    let d = DataConfig::default();
    Ok(DataConfig {
        vocab_size: a.vocab.or(file.vocab_size).unwrap_or(d.vocab_size),
        count: a.count.or(file.count).unwrap_or(d.count),
        target_len: a.target_len.or(file.target_len).unwrap_or(d.target_len),
        duration: a.dur.or(file.duration).unwrap_or(d.duration),
        noise_sigma: a.noise.or(file.noise_sigma).unwrap_or(d.noise_sigma),
        silence_prob: a.silence_prob.or(file.silence_prob).unwrap_or(d.silence_prob),
        seed: a.seed.or(file.seed).unwrap_or(d.seed),
        feature_dim: a.feature_dim.or(file.feature_dim).unwrap_or(d.feature_dim),
        codebook_seed: a.codebook_seed.or(file.codebook_seed).unwrap_or(d.codebook_seed),
    })}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let file: PartialTrain = match &a.config {
        Some(p) => io::read_json(p)?,
        None => PartialTrain::default(),
    };
    let d = TrainConfig::default();
    Ok(TrainConfig {
        mode: a.mode.or(file.mode).unwrap_or(d.mode),
        epochs: a.epochs.or(file.epochs).unwrap_or(d.epochs),
        freeze_last_epochs: a.freeze_last.or(file.freeze_last_epochs).unwrap_or(d.freeze_last_epochs),
        lr: a.lr.or(file.lr).unwrap_or(d.lr),
        warmup_steps: a.warmup.or(file.warmup_steps).unwrap_or(d.warmup_steps),
        seed: a.seed.or(file.seed).unwrap_or(d.seed),
        batch_size: a.batch.or(file.batch_size).unwrap_or(d.batch_size),
        drop_threshold: a.drop_threshold.or(file.drop_threshold).or(d.drop_threshold),
        hidden: a.hidden.or(file.hidden).unwrap_or(d.hidden),
        context: a.context.or(file.context).unwrap_or(d.context),
        probe_count: file.probe_count.unwrap_or(d.probe_count),
        snapshot_count: file.snapshot_count.unwrap_or(d.snapshot_count),
    })
}

struct Ctx {
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn out(&self, p: &Path) -> Result<PathBuf> {
        let path = match &self.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(format!("cannot create {}", parent.display()), e))?;
        }
        Ok(path)
    }
}

fn load_data(path: &Path) -> Result<Vec<SyntheticUtterance>> {
    let data: Vec<SyntheticUtterance> = io::read_jsonl(path)?;
    if data.is_empty() {
        return Err(Error::Empty("dataset file"));
    }
    Ok(data)
}

fn gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let cfg = data_config(a)?;
    let data = generate_dataset(&cfg)?;
    io::write_jsonl(&ctx.out(&a.out)?, &data)
}

fn run_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a)?;
    cfg.validate()?;
    let data = load_data(&a.data)?;
    let ctc_params = match (&a.ctc_ckpt, cfg.mode.needs_ctc_model()) {
        (Some(p), true) => Some(Checkpoint::load(p)?.params()?),
        (None, true) => return Err(Error::Config(format!("mode {} requires --ctc-ckpt", cfg.mode))),
        _ => None,
    };
    let (params, log) = train::train(&cfg, &data, ctc_params.as_ref())?;
    Checkpoint::new(&params, cfg.mode).save(&ctx.out(&a.ckpt_out)?)?;
    let log_path = ctx.out(&a.log_out)?;
    std::fs::write(&log_path, log.to_csv()).map_err(|e| Error::io(format!("cannot write {}", log_path.display()), e))?;
    if let Some(p) = &a.alpha_out {
        io::write_jsonl(&ctx.out(p)?, &log.alpha_snapshots)?;
    }
    Ok(())
}

fn run_eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let params = ck.params()?;
    let data = load_data(&a.data)?;
    let cfg = EvalConfig {
        tolerance_frames: a.tolerance_frames,
        drop_threshold: a.drop_threshold,
        subtract_silence: !a.keep_silence,
    };
    let report = train::evaluate(&params, &data, a.mode.unwrap_or(ck.mode), &cfg)?;
    io::write_json(&ctx.out(&a.report_out)?, &report)
}

fn align(ctx: &Ctx, a: &AlignArgs) -> Result<()> {
    let alpha: SimplexWeights = io::read_json(&a.alpha)?;
    let beta: StrictSimplexWeights = io::read_json(&a.beta)?;
    io::write_json(&ctx.out(&a.out)?, &ot::compute_coupling(&alpha, &beta))
}

#[derive(Debug, Serialize)]
struct SotdRecord {
    x_id: String,
    y_id: String,
    distance: f64,
    /// Which argument carries the free weights.
    alpha_side: Side,
    alpha: Vec<f64>,
    coupling: ot::SparseCoupling,
    r: u32,
    converged: bool,
}

fn run_sotd(ctx: &Ctx, a: &SotdArgs) -> Result<()> {
    if a.r == 0 {
        return Err(Error::Config("--r must be positive".into()));
    }
    let xs: Vec<SequenceRecord> = io::read_jsonl(&a.x)?;
    let ys: Vec<SequenceRecord> = io::read_jsonl(&a.y)?;
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} x sequences but {} y sequences", xs.len(), ys.len())));
    }
    let mcfg = MinimizerConfig {
        steps: a.steps,
        lr: a.lr,
        restarts: a.restarts,
        seed: a.seed,
        ..MinimizerConfig::default()
    };
    let out = xs
        .iter()
        .zip(&ys)
        .map(|(xr, yr)| {
            let x = VectorSequence::new(xr.vectors.clone())?;
            let y = VectorSequence::new(yr.vectors.clone())?;
            let res = if a.oracle {
                sotd::sotd_oracle_result(&x, &y, a.r, a.cost, &BetaPolicy::Uniform)?
            } else {
                sotd::sotd_distance(&x, &y, a.r, a.cost, &BetaPolicy::Uniform, &mcfg)?
            };
            Ok(SotdRecord {
                x_id: xr.id.clone(),
                y_id: yr.id.clone(),
                distance: res.distance,
                alpha_side: res.alpha_side,
                alpha: res.alpha_star.into_vec(),
                coupling: res.coupling,
                r: res.r,
                converged: res.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_jsonl(&ctx.out(&a.out)?, &out)
}

fn export(ctx: &Ctx, a: &ExportArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let params = ck.params()?;
    let data = load_data(&a.data)?;
    let chosen: Vec<&SyntheticUtterance> = if a.ids.is_empty() {
        data.iter().collect()
    } else {
        a.ids
            .iter()
            .map(|id| {
                data.iter()
                    .find(|u| &u.id == id)
                    .ok_or_else(|| Error::Config(format!("utterance {id:?} not in {}", a.data.display())))
            })
            .collect::<Result<_>>()?
    };
    let mut records = Vec::with_capacity(chosen.len());
    let mut forced = Vec::new();
    for u in chosen {
        let x = u.feature_matrix()?;
        let out = encoder_forward(&params, x.view())?;
        let n = x.nrows();
        let alpha = frame_weights(ck.mode, &out.scores)?;
        let y = augment_blanks(&u.label_sequence()?)?;
        let beta = StrictSimplexWeights::uniform(y.len())?;
        let thr = a.drop_threshold.unwrap_or_else(|| sotd::default_drop_threshold(n));
        records.push(AlignmentRecord {
            id: u.id.clone(),
            coupling: ot::compute_coupling(&alpha, &beta).entries,
            frame_argmax: frame_argmax(out.logits.view()),
            dropped_frames: (0..n).filter(|&t| alpha.as_slice()[t] < thr).collect(),
            alpha: alpha.into_vec(),
        });
        if a.forced_out.is_some() {
            let path = ctc::ctc_viterbi(log_softmax_rows(out.logits.view()).view(), &u.label_sequence()?)?;
            forced.push(ForcedAlignmentRecord {
                id: u.id.clone(),
                runs: ctc::path_runs(&path),
                path,
            });
        }
    }
    io::write_jsonl(&ctx.out(&a.out)?, &records)?;
    if let Some(p) = &a.forced_out {
        io::write_jsonl(&ctx.out(p)?, &forced)?;
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        out_dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Train(a) => run_train(&ctx, a),
        Command::Eval(a) => run_eval(&ctx, a),
        Command::Align(a) => align(&ctx, a),
        Command::Sotd(a) => run_sotd(&ctx, a),
        Command::ExportAlignment(a) => export(&ctx, a),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("3:8").unwrap(), (3, 8));
        assert!(parse_range("8:3").is_err());
        assert!(parse_range("3").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["ottc", "gen", "--bogus"]), 1);
        assert_eq!(run(["ottc"]), 1);
        assert_eq!(run(["ottc", "train", "--help"]), 0);
    }

    #[test]
    fn runtime_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("c.json");
        let out = out.to_str().unwrap();
        assert_eq!(run(["ottc", "align", "--alpha", "/nonexistent/a.json", "--beta", "/nonexistent/b.json", "--out", out]), 2);
    }
}
