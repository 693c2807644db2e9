//! Sequence optimal transport distance between vector sequences.
//!
//! The longer sequence carries free weights `alpha`, the shorter one fixed
//! strictly positive weights `beta`, and the distance is the smallest
//! `(sum gamma(alpha)_ij C(x_i, y_j)^r)^(1/r)` over the simplex. Two
//! evaluators are provided: a softmax-parameterized gradient minimizer that
//! differentiates through the transport plan, and an exact dynamic program
//! over nondecreasing maps used as ground truth.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::{self, compensated_sum, SimplexWeights, SparseCoupling, StrictSimplexWeights};
use crate::ottc::softmax;

/// Default upper bound on sequence length.
pub const DEFAULT_MAX_LEN: usize = 1 << 20;

/// Probability floor used by the cross-entropy cost.
pub const CE_FLOOR: f64 = 1e-30;

/// Nonempty sequence of equal-dimension real vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct VectorSequence {
    vectors: Vec<Vec<f64>>,
}

impl VectorSequence {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_max_len(vectors, DEFAULT_MAX_LEN)
    }

    pub fn with_max_len(vectors: Vec<Vec<f64>>, max_len: usize) -> Result<Self> {
        let d = match vectors.first() {
            Some(v) => v.len(),
            None => return Err(Error::Empty("vector sequence")),
        };
        if d == 0 {
            return Err(Error::Empty("vector dimension"));
        }
        if vectors.len() > max_len {
            return Err(Error::Shape(format!("sequence length {} exceeds {max_len}", vectors.len())));
        }
        if vectors.iter().any(|v| v.len() != d) {
            return Err(Error::Shape("vectors have mixed dimensions".into()));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector sequence"));
        }
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

impl TryFrom<Vec<Vec<f64>>> for VectorSequence {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<VectorSequence> for Vec<Vec<f64>> {
    fn from(s: VectorSequence) -> Self {
        s.vectors
    }
}

/// Ground cost between two vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    SquaredEuclidean,
    Euclidean,
    /// `-log u[k]` where `v` is one-hot at `k` and `u` a probability vector.
    CrossEntropy,
}

impl FromStr for CostKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqeuclid" | "squared-euclidean" => Ok(CostKind::SquaredEuclidean),
            "euclid" | "euclidean" => Ok(CostKind::Euclidean),
            "xent" | "cross-entropy" => Ok(CostKind::CrossEntropy),
            other => Err(Error::Config(format!("unknown cost kind {other:?}"))),
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::SquaredEuclidean => "sqeuclid",
            CostKind::Euclidean => "euclid",
            CostKind::CrossEntropy => "xent",
        })
    }
}

impl CostKind {
    /// Whether `C` is a metric on vectors (symmetric, separated, triangle).
    pub fn is_metric(self) -> bool {
        matches!(self, CostKind::Euclidean)
    }
}

fn one_hot_index(v: &[f64]) -> Option<usize> {
    let mut hot = None;
    for (k, &x) in v.iter().enumerate() {
        if x == 1.0 {
            if hot.is_some() {
                return None;
            }
            hot = Some(k);
        } else if x != 0.0 {
            return None;
        }
    }
    hot
}

/// `C(u, v)` for the given kind.
pub fn eval_cost(kind: CostKind, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("vector dimensions {} and {} differ", u.len(), v.len())));
    }
    match kind {
        CostKind::SquaredEuclidean => Ok(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()),
        CostKind::Euclidean => Ok(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()),
        CostKind::CrossEntropy => {
            if u.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (u.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidProbability("first argument is not a probability vector".into()));
            }
            let k = one_hot_index(v)
                .ok_or_else(|| Error::InvalidProbability("second argument is not one-hot".into()))?;
            Ok(-(u[k].max(CE_FLOOR)).ln())
        }
    }
}

/// `[1/q; q]`.
pub fn uniform_beta(q: usize) -> Result<StrictSimplexWeights> {
    StrictSimplexWeights::uniform(q)
}

/// Source of the target weights for a given short-side length.
#[derive(Debug, Clone, Default)]
pub enum BetaPolicy {
    #[default]
    Uniform,
    Fixed(StrictSimplexWeights),
}

impl BetaPolicy {
    pub fn resolve(&self, q: usize) -> Result<StrictSimplexWeights> {
        match self {
            BetaPolicy::Uniform => uniform_beta(q),
            BetaPolicy::Fixed(b) if b.len() == q => Ok(b.clone()),
            BetaPolicy::Fixed(b) => Err(Error::Shape(format!(
                "fixed beta has {} weights, the shorter sequence has {q}",
                b.len()
            ))),
        }
    }
}

/// Which input sequence carries the free weights `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    X,
    Y,
}

/// Cost table `C(long_i, short_j)^r` in the argument order of the caller.
struct Problem {
    side: Side,
    p: usize,
    q: usize,
    /// Row-major `p x q`.
    cost: Vec<f64>,
}

impl Problem {
    fn new(x: &VectorSequence, y: &VectorSequence, side: Side, r: u32, kind: CostKind) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::Shape(format!("sequence dimensions {} and {} differ", x.dim(), y.dim())));
        }
        let (long, short) = match side {
            Side::X => (x, y),
            Side::Y => (y, x),
        };
        let (p, q) = (long.len(), short.len());
        let mut cost = Vec::with_capacity(p * q);
        for l in long.vectors() {
            for s in short.vectors() {
                let c = match side {
                    Side::X => eval_cost(kind, l, s)?,
                    Side::Y => eval_cost(kind, s, l)?,
                };
                cost.push(c.powi(r as i32));
            }
        }
        Ok(Self { side, p, q, cost })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.cost[(i - 1) * self.q + (j - 1)]
    }

    fn objective(&self, coupling: &SparseCoupling) -> f64 {
        compensated_sum(coupling.entries.iter().map(|e| e.mass * self.at(e.i, e.j)))
    }
}

/// Orientations to evaluate: the longer side carries `alpha`; with equal
/// lengths both are tried so the distance is symmetric.
fn sides(n: usize, m: usize) -> &'static [Side] {
    use std::cmp::Ordering::*;
    match n.cmp(&m) {
        Greater => &[Side::X],
        Less => &[Side::Y],
        Equal => &[Side::X, Side::Y],
    }
}

/// Exact minimizer over nondecreasing maps from the short side to the long side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub distance: f64,
    pub alpha_side: Side,
    /// For each short-side index `j` (0-based position), the 1-based long-side
    /// index it is concentrated on.
    pub assignment: Vec<usize>,
}

fn oracle_dp(problem: &Problem, beta: &[f64]) -> (f64, Vec<usize>) {
    let (p, q) = (problem.p, problem.q);
    // prefix-min values and their argmin, per target row
    let mut best = vec![0.0f64; p];
    let mut arg = vec![0usize; p * q];
    let mut prev = vec![0.0f64; p];
    for j in 0..q {
        let mut run_min = f64::INFINITY;
        let mut run_arg = 0usize;
        for i in 0..p {
            let here = beta[j] * problem.cost[i * q + j] + if j == 0 { 0.0 } else { prev[i] };
            if here < run_min {
                run_min = here;
                run_arg = i;
            }
            best[i] = run_min;
            arg[j * p + i] = run_arg;
        }
        std::mem::swap(&mut prev, &mut best);
    }
    let total = prev[p - 1];
    let mut assignment = vec![0usize; q];
    let mut limit = p - 1;
    for j in (0..q).rev() {
        let i = arg[j * p + limit];
        assignment[j] = i + 1;
        limit = i;
    }
    (total, assignment)
}

fn root(value: f64, r: u32) -> f64 {
    let v = value.max(0.0);
    if r == 1 {
        v
    } else {
        v.powf(1.0 / r as f64)
    }
}

fn check_order(r: u32) -> Result<()> {
    if r == 0 {
        return Err(Error::Config("the order r must be a positive integer".into()));
    }
    Ok(())
}

/// Exact SOTD value by dynamic programming in `O(p q)`.
///
/// Concentrating each `beta_j` on its cheapest admissible long-side bin is
/// both a lower bound for every monotone plan and itself realizable, so the
/// DP optimum over nondecreasing maps equals the minimum over `alpha`.
pub fn sotd_oracle(
    x: &VectorSequence,
    y: &VectorSequence,
    r: u32,
    kind: CostKind,
    beta_policy: &BetaPolicy,
) -> Result<OracleResult> {
    check_order(r)?;
    let beta = beta_policy.resolve(x.len().min(y.len()))?;
    let mut out: Option<OracleResult> = None;
    for &side in sides(x.len(), y.len()) {
        let problem = Problem::new(x, y, side, r, kind)?;
        let (value, assignment) = oracle_dp(&problem, beta.as_slice());
        let distance = root(value, r);
        if out.as_ref().is_none_or(|o| distance < o.distance) {
            out = Some(OracleResult {
                distance,
                alpha_side: side,
                assignment,
            });
        }
    }
    Ok(out.expect("at least one orientation"))
}

/// Result of a SOTD evaluation with its minimizing weights and plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SotdResult {
    pub distance: f64,
    pub alpha_side: Side,
    pub alpha_star: SimplexWeights,
    pub coupling: SparseCoupling,
    pub r: u32,
    pub converged: bool,
}

impl SotdResult {
    /// Recomputes `(sum gamma C^r)^(1/r)` from the stored plan.
    pub fn recompute(&self, x: &VectorSequence, y: &VectorSequence, kind: CostKind) -> Result<f64> {
        let problem = Problem::new(x, y, self.alpha_side, self.r, kind)?;
        Ok(root(problem.objective(&self.coupling), self.r))
    }
}

/// The oracle's concentrated weights and plan packaged as a [`SotdResult`].
pub fn sotd_oracle_result(
    x: &VectorSequence,
    y: &VectorSequence,
    r: u32,
    kind: CostKind,
    beta_policy: &BetaPolicy,
) -> Result<SotdResult> {
    let oracle = sotd_oracle(x, y, r, kind, beta_policy)?;
    let beta = beta_policy.resolve(x.len().min(y.len()))?;
    let problem = Problem::new(x, y, oracle.alpha_side, r, kind)?;
    let mut alpha = vec![0.0f64; problem.p];
    for (j, &i) in oracle.assignment.iter().enumerate() {
        alpha[i - 1] += beta.as_slice()[j];
    }
    let alpha_star = SimplexWeights::from_unnormalized(alpha)?;
    let coupling = ot::compute_coupling(&alpha_star, &beta);
    Ok(SotdResult {
        distance: root(problem.objective(&coupling), r),
        alpha_side: oracle.alpha_side,
        alpha_star,
        coupling,
        r,
        converged: true,
    })
}

/// Settings for the gradient minimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizerConfig {
    pub steps: usize,
    pub lr: f64,
    /// Random restarts in addition to the deterministic start.
    pub restarts: usize,
    /// Gap to the exact value under which the run counts as converged.
    pub gap_tol: f64,
    pub seed: u64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 0.1,
            restarts: 4,
            gap_tol: 1e-3,
            seed: 0,
        }
    }
}

/// Standard deviation of the restart scores. Wide starts put the softmax
/// near many different faces of the simplex, where the optima lie.
const RESTART_SCALE: f64 = 3.0;

struct Descent {
    objective: f64,
    alpha: SimplexWeights,
}

/// Adam on pre-softmax scores with a linearly decaying step; keeps the best
/// iterate seen, then tries two projections of it onto simplex faces.
fn descend(problem: &Problem, beta: &StrictSimplexWeights, init: Vec<f64>, cfg: &MinimizerConfig) -> Result<Descent> {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let p = problem.p;
    let mut scores = init;
    let mut m1 = vec![0.0; p];
    let mut m2 = vec![0.0; p];
    let mut best: Option<Descent> = None;
    for step in 0..=cfg.steps {
        let alpha = SimplexWeights::from_unnormalized(softmax(&scores))?;
        let coupling = ot::compute_coupling(&alpha, beta);
        let objective = problem.objective(&coupling);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(Descent {
                objective,
                alpha: alpha.clone(),
            });
        }
        if step == cfg.steps || p == 1 {
            break;
        }
        let g_alpha = ot::coupling_backward(&alpha, beta, |i, j| problem.at(i, j))?;
        let a = alpha.as_slice();
        let mean: f64 = a.iter().zip(&g_alpha).map(|(x, g)| x * g).sum();
        let t = (step + 1) as f64;
        let lr = cfg.lr * (1.0 - step as f64 / cfg.steps as f64);
        for k in 0..p {
            let g = a[k] * (g_alpha[k] - mean);
            m1[k] = B1 * m1[k] + (1.0 - B1) * g;
            m2[k] = B2 * m2[k] + (1.0 - B2) * g * g;
            let mh = m1[k] / (1.0 - B1.powf(t));
            let vh = m2[k] / (1.0 - B2.powf(t));
            scores[k] -= lr * mh / (vh.sqrt() + EPS);
        }
    }
    let mut best = best.expect("at least one evaluation");
    // softmax never reaches the simplex faces the optimum lives on; also try
    // dropping negligible weights, and the vertex that gives each target
    // entirely to the source carrying most of it
    let thr = default_drop_threshold(p);
    let snapped: Vec<f64> = best.alpha.as_slice().iter().map(|&a| if a < thr { 0.0 } else { a }).collect();
    let mut heaviest = vec![(0usize, f64::NEG_INFINITY); beta.len()];
    for e in &ot::compute_coupling(&best.alpha, beta).entries {
        if e.mass > heaviest[e.j - 1].1 {
            heaviest[e.j - 1] = (e.i, e.mass);
        }
    }
    let mut vertex = vec![0.0; p];
    for (j, &(i, _)) in heaviest.iter().enumerate() {
        vertex[i - 1] += beta.as_slice()[j];
    }
    for candidate in [snapped, vertex] {
        if let Ok(alpha) = SimplexWeights::from_unnormalized(candidate) {
            let objective = problem.objective(&ot::compute_coupling(&alpha, beta));
            if objective < best.objective {
                best = Descent { objective, alpha };
            }
        }
    }
    Ok(best)
}

/// SOTD by gradient descent over `alpha = softmax(scores)`.
///
/// Runs one deterministic start (`alpha = beta` when the lengths agree,
/// uniform otherwise) plus `restarts` Gaussian-initialized starts, and keeps
/// the best. Restarts run in parallel and are reduced in a fixed order, the
/// earliest winning ties. `converged` reports whether the result is within
/// `gap_tol` of [`sotd_oracle`].
pub fn sotd_distance(
    x: &VectorSequence,
    y: &VectorSequence,
    r: u32,
    kind: CostKind,
    beta_policy: &BetaPolicy,
    cfg: &MinimizerConfig,
) -> Result<SotdResult> {
    check_order(r)?;
    let q = x.len().min(y.len());
    let beta = beta_policy.resolve(q)?;
    let mut jobs = Vec::new();
    for &side in sides(x.len(), y.len()) {
        let p = x.len().max(y.len());
        let init = if p == q {
            beta.as_slice().iter().map(|b| b.ln()).collect()
        } else {
            vec![0.0; p]
        };
        jobs.push((side, init));
        for k in 0..cfg.restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let init = (0..p).map(|_| RESTART_SCALE * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            jobs.push((side, init));
        }
    }
    let problems: Vec<Problem> = sides(x.len(), y.len())
        .iter()
        .map(|&s| Problem::new(x, y, s, r, kind))
        .collect::<Result<_>>()?;
    let outcomes: Vec<(Side, Descent)> = jobs
        .into_par_iter()
        .map(|(side, init)| {
            let problem = problems.iter().find(|pr| pr.side == side).expect("problem per side");
            descend(problem, &beta, init, cfg).map(|d| (side, d))
        })
        .collect::<Result<_>>()?;
    let mut winner: Option<(Side, Descent)> = None;
    for (side, d) in outcomes {
        if winner.as_ref().is_none_or(|(_, w)| d.objective < w.objective) {
            winner = Some((side, d));
        }
    }
    let (side, best) = winner.expect("at least one start");
    let problem = problems.iter().find(|pr| pr.side == side).expect("problem per side");
    let coupling = ot::compute_coupling(&best.alpha, &beta);
    let distance = root(problem.objective(&coupling), r);
    let oracle = sotd_oracle(x, y, r, kind, &BetaPolicy::Fixed(beta.clone()))?;
    Ok(SotdResult {
        distance,
        alpha_side: side,
        alpha_star: best.alpha,
        coupling,
        r,
        converged: distance - oracle.distance <= cfg.gap_tol,
    })
}

/// Collapses consecutive equal elements.
pub fn aggregate<T: PartialEq + Clone>(seq: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(seq.len());
    for item in seq {
        if out.last() != Some(item) {
            out.push(item.clone());
        }
    }
    out
}

/// Removes element `i` whenever `alpha_i <= drop_threshold`.
pub fn prune<T: Clone>(seq: &[T], alpha: &SimplexWeights, drop_threshold: f64) -> Result<Vec<T>> {
    if seq.len() != alpha.len() {
        return Err(Error::Shape(format!(
            "sequence has {} elements, alpha has {}",
            seq.len(),
            alpha.len()
        )));
    }
    if drop_threshold.is_nan() || drop_threshold < 0.0 {
        return Err(Error::Config("drop threshold must be nonnegative".into()));
    }
    Ok(seq
        .iter()
        .zip(alpha.as_slice())
        .filter(|(_, &a)| a > drop_threshold)
        .map(|(x, _)| x.clone())
        .collect())
}

/// Relative threshold standing in for exact zeros of a softmax output.
pub fn default_drop_threshold(n: usize) -> f64 {
    0.1 / n as f64
}

/// Whether `aggregate(prune(x, alpha_star, 0)) == aggregate(y)`.
pub fn check_non_separation<T: PartialEq + Clone>(x: &[T], y: &[T], alpha_star: &SimplexWeights) -> bool {
    match prune(x, alpha_star, 0.0) {
        Ok(kept) => aggregate(&kept) == aggregate(y),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[&[f64]]) -> VectorSequence {
        VectorSequence::new(v.iter().map(|x| x.to_vec()).collect()).unwrap()
    }

    #[test]
    fn uniform_beta_values() {
        assert_eq!(uniform_beta(1).unwrap().as_slice(), &[1.0]);
        assert_eq!(uniform_beta(4).unwrap().as_slice(), &[0.25; 4]);
        let b = uniform_beta(3).unwrap();
        assert!((b.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cost_values() {
        assert_eq!(eval_cost(CostKind::SquaredEuclidean, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(eval_cost(CostKind::SquaredEuclidean, &[0.0], &[3.0]).unwrap(), 9.0);
        let ce = eval_cost(CostKind::CrossEntropy, &[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(eval_cost(CostKind::CrossEntropy, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(eval_cost(CostKind::Euclidean, &[0.0], &[0.0, 1.0]).is_err());
        assert!(eval_cost(CostKind::CrossEntropy, &[0.7, 0.7], &[1.0, 0.0]).is_err());
        assert!(eval_cost(CostKind::CrossEntropy, &[0.5, 0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn oracle_hand_examples() {
        let x = seq(&[&[0.0], &[1.0], &[5.0]]);
        let y = seq(&[&[0.0], &[5.0]]);
        let o = sotd_oracle(&x, &y, 1, CostKind::SquaredEuclidean, &BetaPolicy::Uniform).unwrap();
        assert_eq!(o.distance, 0.0);
        assert_eq!(o.assignment, vec![1, 3]);
        assert_eq!(o.alpha_side, Side::X);

        let y = seq(&[&[0.5], &[5.0]]);
        let o = sotd_oracle(&x, &y, 1, CostKind::SquaredEuclidean, &BetaPolicy::Uniform).unwrap();
        assert!((o.distance - 0.125).abs() < 1e-15);

        let w = sotd_oracle_result(&x, &y, 1, CostKind::SquaredEuclidean, &BetaPolicy::Uniform).unwrap();
        assert!((w.distance - 0.125).abs() < 1e-15);
    }

    #[test]
    fn oracle_identity_is_zero() {
        let x = seq(&[&[0.3, 1.0], &[-2.0, 0.5], &[4.0, 4.0]]);
        for kind in [CostKind::Euclidean, CostKind::SquaredEuclidean] {
            let o = sotd_oracle(&x, &x, 1, kind, &BetaPolicy::Uniform).unwrap();
            assert_eq!(o.distance, 0.0);
            assert_eq!(o.assignment, vec![1, 2, 3]);
        }
    }

    #[test]
    fn minimizer_matches_hand_examples() {
        let cfg = MinimizerConfig::default();
        let x = seq(&[&[0.0], &[1.0], &[5.0]]);
        let y = seq(&[&[0.5], &[5.0]]);
        let res = sotd_distance(&x, &y, 1, CostKind::SquaredEuclidean, &BetaPolicy::Uniform, &cfg).unwrap();
        assert!((res.distance - 0.125).abs() < 1e-3, "{}", res.distance);
        assert!(res.converged);
        let again = res.recompute(&x, &y, CostKind::SquaredEuclidean).unwrap();
        assert!((again - res.distance).abs() < 1e-9);

        let same = sotd_distance(&x, &x, 1, CostKind::Euclidean, &BetaPolicy::Uniform, &cfg).unwrap();
        assert_eq!(same.distance, 0.0);

        let u = seq(&[&[1.0, 2.0]]);
        let v = seq(&[&[4.0, 6.0]]);
        let single = sotd_distance(&u, &v, 1, CostKind::Euclidean, &BetaPolicy::Uniform, &cfg).unwrap();
        assert_eq!(single.distance, 5.0);
    }

    #[test]
    fn aggregate_and_prune() {
        assert_eq!(aggregate(&['a', 'a', 'b']), vec!['a', 'b']);
        assert_eq!(aggregate(&['a', 'b', 'a']), vec!['a', 'b', 'a']);
        assert_eq!(aggregate(&['a', 'a', 'b', 'b', 'a']), vec!['a', 'b', 'a']);

        let a = SimplexWeights::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(prune(&['a', 'c', 'b'], &a, 0.0).unwrap(), vec!['a', 'b']);
        let u = SimplexWeights::uniform(3).unwrap();
        assert_eq!(prune(&['a', 'c', 'b'], &u, 0.0).unwrap(), vec!['a', 'c', 'b']);
        let skew = SimplexWeights::from_unnormalized(vec![0.001, 0.999]).unwrap();
        assert_eq!(prune(&['a', 'b'], &skew, 0.01).unwrap(), vec!['b']);
        assert!(prune(&['a'], &u, 0.0).is_err());
    }

    #[test]
    fn non_separation_examples() {
        let x = ['a', 'a', 'b'];
        let y = ['a', 'b'];
        let keep = SimplexWeights::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert!(check_non_separation(&x, &y, &keep));
        let x = ['a', 'c', 'b'];
        assert!(check_non_separation(&x, &y, &keep));
        assert!(!check_non_separation(&x, &y, &SimplexWeights::uniform(3).unwrap()));
    }

    #[test]
    fn fixed_beta_length_must_match() {
        let x = seq(&[&[0.0], &[1.0]]);
        let b = BetaPolicy::Fixed(StrictSimplexWeights::uniform(3).unwrap());
        assert!(sotd_oracle(&x, &x, 1, CostKind::Euclidean, &b).is_err());
    }
}
