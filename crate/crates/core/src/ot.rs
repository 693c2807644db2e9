//! One-dimensional optimal transport between weighted bin sequences.
//!
//! Source bins `1..=n` carry weights `alpha`, target bins `1..=m` carry
//! strictly positive weights `beta`, and the ground cost is `|i - j|^2`.
//! Because the bins are already sorted, the optimal plan is the
//! north-west-corner sweep over the two cumulative distributions:
//!
//! ```text
//! gamma[i][j] = max(0, min(A_i, B_j) - max(A_{i-1}, B_{j-1}))
//! ```
//!
//! with `A_i = alpha_1 + ... + alpha_i` and `B_j` likewise. The plan has at
//! most `n + m - 1` nonzero entries, its support is a monotone staircase, and
//! every entry is an explicit piecewise-linear function of `alpha`, which is
//! what [`coupling_backward`] differentiates.
//!
//! All indices exposed by this module are 1-based.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on the simplex sum accepted at construction.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Smallest admissible component of a target weight vector.
pub const MIN_TARGET_WEIGHT: f64 = 1e-12;

/// Two cumulative sums closer than this are treated as the same breakpoint.
///
/// Exact ties are structural (a frame that fully covers a target ends exactly
/// where the target ends), so rounding in the prefix sums must not create
/// slivers of mass on the wrong side of the tie.
pub const TIE_TOLERANCE: f64 = 1e-14;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Validates `values` as a simplex point (components in `[0, 1]`, sum
    /// within [`SUM_TOLERANCE`] of one) and renormalizes to machine precision.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("simplex weights"));
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite("simplex weights"));
            }
            if !(0.0..=1.0 + SUM_TOLERANCE).contains(&v) {
                return Err(Error::NotSimplex(format!("component {k} = {v} is outside [0, 1]")));
            }
        }
        let total = compensated_sum(values.iter().copied());
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotSimplex(format!("components sum to {total}")));
        }
        Ok(Self::renormalized(values, total))
    }

    /// Normalizes a nonnegative vector with a positive sum onto the simplex.
    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("simplex weights"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("simplex weights"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::NotSimplex("negative component".into()));
        }
        let total = compensated_sum(values.iter().copied());
        if total <= 0.0 {
            return Err(Error::NotSimplex("all components are zero".into()));
        }
        Ok(Self::renormalized(values, total))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("simplex weights"));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    fn renormalized(mut values: Vec<f64>, total: f64) -> Self {
        for v in &mut values {
            *v = (*v / total).clamp(0.0, 1.0);
        }
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for SimplexWeights {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        SimplexWeights::new(values).map_err(serde::de::Error::custom)
    }
}

/// A simplex point with every component at least [`MIN_TARGET_WEIGHT`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StrictSimplexWeights(SimplexWeights);

impl StrictSimplexWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::check(SimplexWeights::new(values)?)
    }

    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self> {
        Self::check(SimplexWeights::from_unnormalized(values)?)
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Ok(Self(SimplexWeights::uniform(m)?))
    }

    fn check(w: SimplexWeights) -> Result<Self> {
        if let Some((index, &value)) = w
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, &v)| v < MIN_TARGET_WEIGHT)
        {
            return Err(Error::ZeroTargetWeight { index, value });
        }
        Ok(Self(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_simplex(&self) -> &SimplexWeights {
        &self.0
    }
}

impl<'de> Deserialize<'de> for StrictSimplexWeights {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        StrictSimplexWeights::new(values).map_err(serde::de::Error::custom)
    }
}

/// One nonzero cell of a transport plan, serialized as `[i, j, mass]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

impl Serialize for CouplingEntry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.i, self.j, self.mass).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CouplingEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (i, j, mass) = <(usize, usize, f64)>::deserialize(d)?;
        Ok(CouplingEntry { i, j, mass })
    }
}

/// Sparse monotone transport plan, entries sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCoupling {
    pub n: usize,
    pub m: usize,
    pub entries: Vec<CouplingEntry>,
}

impl SparseCoupling {
    pub fn support(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|e| (e.i, e.j)).collect()
    }

    /// True when `i < k` implies `j <= l` over all distinct support pairs.
    pub fn is_staircase(&self) -> bool {
        self.entries.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            (a.i, a.j) < (b.i, b.j) && a.j <= b.j
        })
    }

    /// Checks sortedness, index ranges, positivity, staircase shape, sparsity,
    /// and (optionally) the marginals against `alpha`/`beta`.
    pub fn validate(&self, marginals: Option<(&[f64], &[f64])>, tol: f64) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Empty("coupling"));
        }
        for e in &self.entries {
            if e.i == 0 || e.i > self.n || e.j == 0 || e.j > self.m {
                return Err(Error::Shape(format!(
                    "entry ({}, {}) outside a {}x{} plan",
                    e.i, e.j, self.n, self.m
                )));
            }
            if !(e.mass.is_finite() && e.mass > 0.0) {
                return Err(Error::NotSimplex(format!("entry ({}, {}) has mass {}", e.i, e.j, e.mass)));
            }
        }
        if !self.is_staircase() {
            return Err(Error::InvalidAlignment("coupling support is not a monotone staircase".into()));
        }
        if self.entries.len() > self.n + self.m - 1 {
            return Err(Error::Shape(format!(
                "{} entries exceed n + m - 1 = {}",
                self.entries.len(),
                self.n + self.m - 1
            )));
        }
        if let Some((alpha, beta)) = marginals {
            if alpha.len() != self.n || beta.len() != self.m {
                return Err(Error::Shape("marginal lengths do not match the plan".into()));
            }
            let (rows, cols) = marginals_of(self);
            let worst = rows
                .iter()
                .zip(alpha)
                .chain(cols.iter().zip(beta))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if worst > tol {
                return Err(Error::NotSimplex(format!("marginal error {worst:e} exceeds {tol:e}")));
            }
        }
        Ok(())
    }
}

/// A discrete monotonic alignment between `n` source and `m` target items.
///
/// Every target is aligned to at least one source, and for distinct pairs
/// `(i, j)`, `(k, l)` with `i < k` we have `j <= l`. Sources may be left
/// unaligned (dropped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicAlignment {
    n: usize,
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl MonotonicAlignment {
    pub fn new(n: usize, m: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Empty("alignment"));
        }
        pairs.sort_unstable();
        pairs.dedup();
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i == 0 || i > n || j == 0 || j > m) {
            return Err(Error::InvalidAlignment(format!("pair ({i}, {j}) outside {n}x{m}")));
        }
        let mut covered = vec![false; m];
        for &(_, j) in &pairs {
            covered[j - 1] = true;
        }
        if let Some(j) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidAlignment(format!("target {} is not aligned", j + 1)));
        }
        if let Some(w) = pairs.windows(2).find(|w| w[1].1 < w[0].1) {
            return Err(Error::InvalidAlignment(format!(
                "pairs {:?} and {:?} break monotonicity",
                w[0], w[1]
            )));
        }
        Ok(Self { n, m, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Prefix sums `[0, A_1, ..., A_n]`, compensated, clamped nondecreasing, and
/// pinned to end at exactly one.
fn cumulative(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(0.0);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut prev = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        let cur = (sum + comp).clamp(prev, 1.0);
        out.push(cur);
        prev = cur;
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Which side determines each end of a cell's overlap interval.
#[derive(Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    mass: f64,
    /// Upper end is `A_i` (rather than `B_j`).
    upper_from_source: bool,
    /// Lower end is `A_{i-1}` (rather than `B_{j-1}`).
    lower_from_source: bool,
}

/// North-west-corner sweep over the merged cumulative breakpoints.
fn sweep(a: &[f64], b: &[f64], mut visit: impl FnMut(Cell)) {
    let (n, m) = (a.len() - 1, b.len() - 1);
    let (mut i, mut j) = (1usize, 1usize);
    while i <= n && j <= m {
        let lower_from_source = a[i - 1] > b[j - 1];
        let upper_from_source = a[i] <= b[j];
        let lo = if lower_from_source { a[i - 1] } else { b[j - 1] };
        let hi = if upper_from_source { a[i] } else { b[j] };
        if hi > lo {
            visit(Cell {
                i,
                j,
                mass: hi - lo,
                upper_from_source,
                lower_from_source,
            });
        }
        let diff = a[i] - b[j];
        if diff.abs() <= TIE_TOLERANCE {
            i += 1;
            j += 1;
        } else if diff < 0.0 {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// The optimal plan between `alpha` on `1..=n` and `beta` on `1..=m` under
/// the cost `|i - j|^2`. Runs in `O(n + m)`.
pub fn compute_coupling(alpha: &SimplexWeights, beta: &StrictSimplexWeights) -> SparseCoupling {
    let a = cumulative(alpha.as_slice());
    let b = cumulative(beta.as_slice());
    let mut entries = Vec::with_capacity(alpha.len() + beta.len() - 1);
    sweep(&a, &b, |c| {
        entries.push(CouplingEntry {
            i: c.i,
            j: c.j,
            mass: c.mass,
        })
    });
    SparseCoupling {
        n: alpha.len(),
        m: beta.len(),
        entries,
    }
}

fn marginals_of(coupling: &SparseCoupling) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![Vec::new(); coupling.n];
    let mut cols = vec![Vec::new(); coupling.m];
    for e in &coupling.entries {
        rows[e.i - 1].push(e.mass);
        cols[e.j - 1].push(e.mass);
    }
    let sum = |v: Vec<Vec<f64>>| v.into_iter().map(compensated_sum).collect();
    (sum(rows), sum(cols))
}

/// Row and column sums of a plan.
pub fn marginals(coupling: &SparseCoupling) -> (Vec<f64>, Vec<f64>) {
    marginals_of(coupling)
}

/// `sum gamma_ij (i - j)^2` over the support.
pub fn transport_cost(coupling: &SparseCoupling) -> f64 {
    compensated_sum(coupling.entries.iter().map(|e| {
        let d = e.i as f64 - e.j as f64;
        e.mass * d * d
    }))
}

/// Subgradient of `L(alpha) = sum gamma(alpha)_ij * cost(i, j)` with respect
/// to `alpha`, where `cost` is queried only on the support of the plan.
///
/// The plan is linear in the prefix sums `A_i` between breakpoints, so the
/// derivative is accumulated on `A` during the sweep and then pushed to
/// `alpha` by a suffix sum. At a breakpoint `A_i = B_j` the upper end of the
/// cell is attributed to `A_i` and the lower end to `B`, i.e. the derivative
/// taken as source mass shrinks. The result is not projected; see
/// [`project_to_tangent`].
pub fn coupling_backward(
    alpha: &SimplexWeights,
    beta: &StrictSimplexWeights,
    mut cost: impl FnMut(usize, usize) -> f64,
) -> Result<Vec<f64>> {
    let n = alpha.len();
    let a = cumulative(alpha.as_slice());
    let b = cumulative(beta.as_slice());
    let mut d_cum = vec![0.0f64; n + 1];
    let mut bad = false;
    sweep(&a, &b, |c| {
        let w = cost(c.i, c.j);
        if !w.is_finite() {
            bad = true;
            return;
        }
        if c.upper_from_source {
            d_cum[c.i] += w;
        }
        if c.lower_from_source {
            d_cum[c.i - 1] -= w;
        }
    });
    if bad {
        return Err(Error::NonFinite("transport cost"));
    }
    let mut grad = vec![0.0f64; n];
    let mut acc = 0.0;
    for k in (1..=n).rev() {
        acc += d_cum[k];
        grad[k - 1] = acc;
    }
    Ok(grad)
}

/// Removes the component along the all-ones direction.
pub fn project_to_tangent(grad: &[f64]) -> Vec<f64> {
    if grad.is_empty() {
        return Vec::new();
    }
    let mean = compensated_sum(grad.iter().copied()) / grad.len() as f64;
    grad.iter().map(|g| g - mean).collect()
}

/// Source weights whose optimal plan against `beta` has support exactly
/// `alignment`.
///
/// Each target's weight is split evenly among the sources aligned to it, and
/// a source's weight is the sum of its shares. Sources aligned to nothing get
/// zero weight. With at most two sources per target this is the familiar
/// half-split of a shared boundary mass.
pub fn alignment_to_weights(
    alignment: &MonotonicAlignment,
    beta: &StrictSimplexWeights,
) -> Result<SimplexWeights> {
    if alignment.m() != beta.len() {
        return Err(Error::Shape(format!(
            "alignment has {} targets but beta has {} weights",
            alignment.m(),
            beta.len()
        )));
    }
    let mut fanout = vec![0usize; alignment.m()];
    for &(_, j) in alignment.pairs() {
        fanout[j - 1] += 1;
    }
    let b = beta.as_slice();
    let mut shares = vec![Vec::new(); alignment.n()];
    for &(i, j) in alignment.pairs() {
        shares[i - 1].push(b[j - 1] / fanout[j - 1] as f64);
    }
    let alpha = shares.into_iter().map(compensated_sum).collect();
    SimplexWeights::from_unnormalized(alpha)
}
