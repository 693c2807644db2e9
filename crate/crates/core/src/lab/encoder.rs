//! Small frame encoder: a two-layer GELU trunk over a window of
//! neighbouring frames, a linear logits head, and a two-layer score head
//! producing one alignment score per frame. Backpropagation is written out
//! by hand.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which part of the model a tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamGroup {
    Trunk,
    Logits,
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub feature_dim: usize,
    /// Frames of context on each side; 0 makes the model purely per-frame.
    pub context: usize,
    pub hidden: usize,
    pub num_classes: usize,
}

impl EncoderShape {
    pub fn input_dim(&self) -> usize {
        self.feature_dim * (2 * self.context + 1)
    }

    pub fn score_hidden(&self) -> usize {
        (self.hidden / 2).max(1)
    }
}

/// Weights are stored `in x out`; activations are `frames x units`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub shape: EncoderShape,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ws1: Array2<f64>,
    pub bs1: Array1<f64>,
    pub ws2: Array2<f64>,
    pub bs2: Array1<f64>,
}

/// Names, groups and shapes in storage order.
pub const TENSOR_NAMES: [(&str, ParamGroup); 10] = [
    ("trunk.0.weight", ParamGroup::Trunk),
    ("trunk.0.bias", ParamGroup::Trunk),
    ("trunk.1.weight", ParamGroup::Trunk),
    ("trunk.1.bias", ParamGroup::Trunk),
    ("logits.weight", ParamGroup::Logits),
    ("logits.bias", ParamGroup::Logits),
    ("score.0.weight", ParamGroup::Score),
    ("score.0.bias", ParamGroup::Score),
    ("score.1.weight", ParamGroup::Score),
    ("score.1.bias", ParamGroup::Score),
];

impl EncoderParams {
    pub fn zeros(shape: EncoderShape) -> Self {
        let (d, h, hs, k) = (shape.input_dim(), shape.hidden, shape.score_hidden(), shape.num_classes);
        Self {
            shape,
            w1: Array2::zeros((d, h)),
            b1: Array1::zeros(h),
            w2: Array2::zeros((h, h)),
            b2: Array1::zeros(h),
            wo: Array2::zeros((h, k)),
            bo: Array1::zeros(k),
            ws1: Array2::zeros((h, hs)),
            bs1: Array1::zeros(hs),
            ws2: Array2::zeros((hs, 1)),
            bs2: Array1::zeros(1),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(shape: EncoderShape, seed: u64) -> Self {
        let mut p = Self::zeros(shape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in [&mut p.w1, &mut p.w2, &mut p.wo, &mut p.ws1, &mut p.ws2] {
            let (fi, fo) = w.dim();
            let a = (6.0 / (fi + fo) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-a..a));
        }
        p
    }

    pub fn tensors(&self) -> [(&'static str, ParamGroup, Vec<usize>, &[f64]); 10] {
        fn t2(a: &Array2<f64>) -> (Vec<usize>, &[f64]) {
            (vec![a.nrows(), a.ncols()], a.as_slice().expect("standard layout"))
        }
        fn t1(a: &Array1<f64>) -> (Vec<usize>, &[f64]) {
            (vec![a.len()], a.as_slice().expect("standard layout"))
        }
        let all = [
            t2(&self.w1),
            t1(&self.b1),
            t2(&self.w2),
            t1(&self.b2),
            t2(&self.wo),
            t1(&self.bo),
            t2(&self.ws1),
            t1(&self.bs1),
            t2(&self.ws2),
            t1(&self.bs2),
        ];
        let mut k = 0;
        all.map(|(shape, data)| {
            let (name, group) = TENSOR_NAMES[k];
            k += 1;
            (name, group, shape, data)
        })
    }

    pub fn tensors_mut(&mut self) -> [(ParamGroup, &mut [f64]); 10] {
        let [w1, b1, w2, b2, wo, bo, ws1, bs1, ws2, bs2] = [
            self.w1.as_slice_mut(),
            self.b1.as_slice_mut(),
            self.w2.as_slice_mut(),
            self.b2.as_slice_mut(),
            self.wo.as_slice_mut(),
            self.bo.as_slice_mut(),
            self.ws1.as_slice_mut(),
            self.bs1.as_slice_mut(),
            self.ws2.as_slice_mut(),
            self.bs2.as_slice_mut(),
        ]
        .map(|s| s.expect("standard layout"));
        [
            (ParamGroup::Trunk, w1),
            (ParamGroup::Trunk, b1),
            (ParamGroup::Trunk, w2),
            (ParamGroup::Trunk, b2),
            (ParamGroup::Logits, wo),
            (ParamGroup::Logits, bo),
            (ParamGroup::Score, ws1),
            (ParamGroup::Score, bs1),
            (ParamGroup::Score, ws2),
            (ParamGroup::Score, bs2),
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.3.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.3.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &EncoderParams, scale: f64) {
        let src = other.tensors();
        for ((_, dst), (_, _, _, s)) in self.tensors_mut().into_iter().zip(src.iter()) {
            for (d, v) in dst.iter_mut().zip(s.iter()) {
                *d += scale * v;
            }
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu(z: f64) -> f64 {
    0.5 * z * (1.0 + (GELU_C * (z + GELU_A * z * z * z)).tanh())
}

pub fn gelu_grad(z: f64) -> f64 {
    let t = (GELU_C * (z + GELU_A * z * z * z)).tanh();
    0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * z * z)
}

/// Stacks `[x_{t-w}, …, x_{t+w}]` per frame, repeating the edge frames.
pub fn context_stack(features: ArrayView2<f64>, w: usize) -> Array2<f64> {
    if w == 0 {
        return features.to_owned();
    }
    let n = features.nrows() as isize;
    let views: Vec<Array2<f64>> = (-(w as isize)..=w as isize)
        .map(|off| {
            let idx: Vec<usize> = (0..n).map(|t| (t + off).clamp(0, n - 1) as usize).collect();
            features.select(Axis(0), &idx)
        })
        .collect();
    let v: Vec<ArrayView2<f64>> = views.iter().map(|a| a.view()).collect();
    concatenate(Axis(1), &v).expect("equal row counts")
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Array2<f64>,
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    a2: Array2<f64>,
    zs: Array2<f64>,
    as_: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// `frames x classes`.
    pub logits: Array2<f64>,
    /// One alignment score per frame.
    pub scores: Vec<f64>,
    pub cache: ForwardCache,
}

fn affine(x: ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x.dot(w) + b
}

pub fn encoder_forward(params: &EncoderParams, features: ArrayView2<f64>) -> Result<EncoderOutput> {
    let sh = params.shape;
    if features.nrows() == 0 {
        return Err(Error::Empty("encoder input"));
    }
    if features.ncols() != sh.feature_dim {
        return Err(Error::Shape(format!(
            "features have dimension {}, encoder expects {}",
            features.ncols(),
            sh.feature_dim
        )));
    }
    let x = context_stack(features, sh.context);
    let z1 = affine(x.view(), &params.w1, &params.b1);
    let a1 = z1.mapv(gelu);
    let z2 = affine(a1.view(), &params.w2, &params.b2);
    let a2 = z2.mapv(gelu);
    let logits = affine(a2.view(), &params.wo, &params.bo);
    let zs = affine(a2.view(), &params.ws1, &params.bs1);
    let as_ = zs.mapv(gelu);
    let scores = affine(as_.view(), &params.ws2, &params.bs2).column(0).to_vec();
    Ok(EncoderOutput {
        logits,
        scores,
        cache: ForwardCache { x, z1, a1, z2, a2, zs, as_ },
    })
}

fn dgelu(dz: &mut Array2<f64>, z: &Array2<f64>) {
    ndarray::Zip::from(dz).and(z).for_each(|d, &z| *d *= gelu_grad(z));
}

fn bias_grad(d: ArrayView2<f64>) -> Array1<f64> {
    d.sum_axis(Axis(0))
}

/// Parameter gradients from `dL/dlogits` and optionally `dL/dscores`.
/// Returned as an [`EncoderParams`] holding gradients.
pub fn encoder_backward(
    params: &EncoderParams,
    cache: &ForwardCache,
    d_logits: ArrayView2<f64>,
    d_scores: Option<ArrayView1<f64>>,
) -> EncoderParams {
    let mut g = EncoderParams::zeros(params.shape);
    g.wo = cache.a2.t().dot(&d_logits);
    g.bo = bias_grad(d_logits);
    let mut d_a2 = d_logits.dot(&params.wo.t());
    if let Some(ds) = d_scores {
        let ds = ds.to_owned().insert_axis(Axis(1));
        g.ws2 = cache.as_.t().dot(&ds);
        g.bs2 = bias_grad(ds.view());
        let mut d_zs = ds.dot(&params.ws2.t());
        dgelu(&mut d_zs, &cache.zs);
        g.ws1 = cache.a2.t().dot(&d_zs);
        g.bs1 = bias_grad(d_zs.view());
        d_a2 = d_a2 + d_zs.dot(&params.ws1.t());
    }
    let mut d_z2 = d_a2;
    dgelu(&mut d_z2, &cache.z2);
    g.w2 = cache.a1.t().dot(&d_z2);
    g.b2 = bias_grad(d_z2.view());
    let mut d_z1 = d_z2.dot(&params.w2.t());
    dgelu(&mut d_z1, &cache.z1);
    g.w1 = cache.x.t().dot(&d_z1);
    g.b1 = bias_grad(d_z1.view());
    for w in [&mut g.w1, &mut g.w2, &mut g.wo, &mut g.ws1, &mut g.ws2] {
        if !w.is_standard_layout() {
            *w = w.as_standard_layout().into_owned();
        }
    }
    g
}

/// Per-frame argmax of the logits.
pub fn frame_argmax(logits: ArrayView2<f64>) -> Vec<usize> {
    crate::seq::argmax_rows(logits)
}
