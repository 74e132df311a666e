//! JSON parameter checkpoints: a versioned array of named, shaped tensors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RlError};
use crate::mlp::{Mlp, MlpSpec};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub spec: MlpSpec,
    pub layers: Vec<Tensor>,
}

impl Checkpoint {
    pub fn from_mlp(net: &Mlp) -> Self {
        let spec = net.spec().clone();
        let params = net.params();
        let mut layers = Vec::new();
        let mut offset = 0;
        if let Some(e) = &spec.embedding {
            let n = e.vocab * e.dim;
            layers.push(Tensor {
                name: "embedding".into(),
                shape: vec![e.vocab, e.dim],
                data: params[..n].to_vec(),
            });
            offset = n;
        }
        let mut fan_in = spec.dense_input_dim();
        let widths = spec.hidden.iter().chain(std::iter::once(&spec.output_dim));
        for (i, &fan_out) in widths.enumerate() {
            let w = fan_in * fan_out;
            layers.push(Tensor {
                name: format!("dense{i}.weight"),
                shape: vec![fan_out, fan_in],
                data: params[offset..offset + w].to_vec(),
            });
            layers.push(Tensor {
                name: format!("dense{i}.bias"),
                shape: vec![fan_out],
                data: params[offset + w..offset + w + fan_out].to_vec(),
            });
            offset += w + fan_out;
            fan_in = fan_out;
        }
        Self {
            version: CHECKPOINT_VERSION,
            spec,
            layers,
        }
    }

    pub fn into_mlp(self) -> Result<Mlp> {
        if self.version != CHECKPOINT_VERSION {
            return Err(RlError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let reference = Checkpoint::from_mlp(&Mlp::zeros(self.spec.clone())?);
        if reference.layers.len() != self.layers.len() {
            return Err(RlError::Checkpoint(format!(
                "expected {} tensors, found {}",
                reference.layers.len(),
                self.layers.len()
            )));
        }
        let mut params = Vec::with_capacity(reference.layers.iter().map(|t| t.data.len()).sum());
        for (want, got) in reference.layers.iter().zip(self.layers) {
            if want.name != got.name || want.shape != got.shape {
                return Err(RlError::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    got.name, got.shape, want.name, want.shape
                )));
            }
            if got.data.len() != want.data.len() {
                return Err(RlError::Checkpoint(format!(
                    "tensor {} has {} values, shape needs {}",
                    got.name,
                    got.data.len(),
                    want.data.len()
                )));
            }
            params.extend(got.data);
        }
        let mut net = Mlp::zeros(self.spec)?;
        net.params_mut().copy_from_slice(&params);
        Ok(net)
    }
}

pub fn save(net: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string(&Checkpoint::from_mlp(net))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Mlp> {
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.into_mlp()
}
