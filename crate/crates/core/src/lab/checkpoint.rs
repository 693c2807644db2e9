//! Versioned JSON checkpoints of named parameter tensors.
//!
//! ```text
//! {
//!   "format": "ottc-encoder",
//!   "version": 1,
//!   "mode": "ottc",
//!   "shape": {"feature_dim": 16, "context": 2, "hidden": 64, "num_classes": 9},
//!   "tensors": [{"name": "trunk.0.weight", "shape": [80, 64], "data": [...]}, ...]
//! }
//! ```
//!
//! Weights are row-major with shape `[in, out]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::{EncoderParams, EncoderShape, TENSOR_NAMES};
use super::train::Mode;
use crate::error::{Error, Result};
use crate::io;

pub const FORMAT: &str = "ottc-encoder";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub mode: Mode,
    pub shape: EncoderShape,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(params: &EncoderParams, mode: Mode) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            mode,
            shape: params.shape,
            tensors: params
                .tensors()
                .iter()
                .map(|(name, _, shape, data)| Tensor {
                    name: (*name).into(),
                    shape: shape.clone(),
                    data: data.to_vec(),
                })
                .collect(),
        }
    }

    pub fn params(&self) -> Result<EncoderParams> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{} (expected {FORMAT} v{VERSION})",
                self.format, self.version
            )));
        }
        let mut p = EncoderParams::zeros(self.shape);
        let expected: Vec<Vec<usize>> = p.tensors().iter().map(|t| t.2.clone()).collect();
        if self.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::Shape(format!("checkpoint has {} tensors", self.tensors.len())));
        }
        for (k, ((_, dst), t)) in p.tensors_mut().into_iter().zip(&self.tensors).enumerate() {
            if t.name != TENSOR_NAMES[k].0 || t.shape != expected[k] || t.data.len() != dst.len() {
                return Err(Error::Shape(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    t.name, t.shape, TENSOR_NAMES[k].0, expected[k]
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("checkpoint tensor"));
            }
            dst.copy_from_slice(&t.data);
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let shape = EncoderShape {
            feature_dim: 4,
            context: 1,
            hidden: 6,
            num_classes: 3,
        };
        let p = EncoderParams::init(shape, 11);
        let ck = Checkpoint::new(&p, Mode::Ottc);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.params().unwrap(), p);
    }

    #[test]
    fn rejects_wrong_version_and_shape() {
        let shape = EncoderShape {
            feature_dim: 2,
            context: 0,
            hidden: 2,
            num_classes: 2,
        };
        let mut ck = Checkpoint::new(&EncoderParams::zeros(shape), Mode::Ctc);
        ck.version = 9;
        assert!(ck.params().is_err());
        ck.version = VERSION;
        ck.tensors[0].shape = vec![1, 1];
        assert!(ck.params().is_err());
    }
}
