//! Versioned JSON parameter checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

use super::ParamSet;

pub const CHECKPOINT_FORMAT: &str = "onbody-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// A named tensor list plus free-form architecture metadata. Values are
/// written with shortest round-trip formatting, so reloading is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub meta: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn capture<P: ParamSet>(params: &P, meta: serde_json::Value) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            meta,
            tensors: params
                .tensors()
                .into_iter()
                .map(|(name, shape, values)| NamedTensor {
                    name,
                    shape,
                    values: values.to_vec(),
                })
                .collect(),
        }
    }

    /// Copies the stored values into `params`, which must have exactly the
    /// same tensor names and shapes in the same order.
    pub fn restore_into<P: ParamSet>(&self, params: &mut P) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let layout: Vec<(String, Vec<usize>)> = params.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if layout.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.values.len() != shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, name, shape
                )));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor {} has non-finite values", t.name)));
            }
        }
        for (dst, t) in params.tensors_mut().into_iter().zip(&self.tensors) {
            dst.copy_from_slice(&t.values);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Conv1d, Dense};
    use crate::rng::rng_from_seed;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let mut c = Conv1d::init(2, 5, 3, &mut rng_from_seed(9));
        c.b = vec![0.1, 1.0 / 3.0, f64::MIN_POSITIVE, -1e300, 5e-324];
        Checkpoint::capture(&c, serde_json::json!({"kind": "conv"})).save(&path).unwrap();
        let mut back = c.zeros_like();
        Checkpoint::load(&path).unwrap().restore_into(&mut back).unwrap();
        for (a, b) in c.w.iter().chain(&c.b).zip(back.w.iter().chain(&back.b)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let ck = Checkpoint::capture(&Dense::zeros(3, 2), serde_json::Value::Null);
        assert!(ck.restore_into(&mut Dense::zeros(2, 3)).is_err());
        let mut bad = ck.clone();
        bad.version = 99;
        assert!(bad.restore_into(&mut Dense::zeros(3, 2)).is_err());
    }
}
