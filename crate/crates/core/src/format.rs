//! Network file format.
//!
//! A network is stored as one JSON document:
//!
//! ```json
//! {
//!   "input_dim": 2,
//!   "classes": 2,
//!   "layers": [
//!     { "rows": 2, "cols": 2, "weights": [1.0, 0.0, 0.0, 1.0], "bias": [0.0, 0.0],
//!       "activation": { "name": "leaky_relu", "alpha": 0.1 } },
//!     { "rows": 2, "cols": 2, "weights": [1.0, -1.0, -1.0, 1.0], "bias": [0.0, 0.0],
//!       "activation": null }
//!   ]
//! }
//! ```
//!
//! `weights` is row-major. Activation names are `sigmoid`, `tanh`, `relu`,
//! `leaky_relu` (with `alpha`), `softplus` and `elu` (with `alpha`). The
//! output layer carries `"activation": null`. Reals are written in shortest
//! round-trip form, so save/load is lossless.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::network::{ActivationKind, Layer, Network};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub input_dim: usize,
    pub classes: usize,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Option<ActivationFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl ActivationFile {
    pub fn from_kind(a: &ActivationKind<f64>) -> Self {
        Self {
            name: a.name().to_string(),
            alpha: a.alpha(),
        }
    }

    pub fn to_kind(&self) -> Result<ActivationKind<f64>, String> {
        let need_alpha = || {
            self.alpha
                .ok_or_else(|| format!("activation `{}` requires `alpha`", self.name))
        };
        let no_alpha = |k: ActivationKind<f64>| match self.alpha {
            Some(_) => Err(format!("activation `{}` takes no `alpha`", self.name)),
            None => Ok(k),
        };
        match self.name.as_str() {
            "sigmoid" => no_alpha(ActivationKind::Sigmoid),
            "tanh" => no_alpha(ActivationKind::Tanh),
            "relu" => no_alpha(ActivationKind::Relu),
            "softplus" => no_alpha(ActivationKind::Softplus),
            "leaky_relu" => ActivationKind::leaky_relu(need_alpha()?).map_err(|e| e.to_string()),
            "elu" => ActivationKind::elu(need_alpha()?).map_err(|e| e.to_string()),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

impl NetworkFile {
    pub fn from_network(net: &Network<f64>) -> Self {
        Self {
            input_dim: net.input_dim(),
            classes: net.classes(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerFile {
                    rows: l.weights.rows(),
                    cols: l.weights.cols(),
                    weights: l.weights.as_slice().to_vec(),
                    bias: l.bias.clone(),
                    activation: l.activation.as_ref().map(ActivationFile::from_kind),
                })
                .collect(),
        }
    }

    pub fn to_network(&self) -> Result<Network<f64>, FormatError> {
        let field = |path: String, message: String| FormatError::Field { path, message };
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let weights = Matrix::new(l.rows, l.cols, l.weights.clone())
                .map_err(|e| field(format!("layers[{i}].weights"), e.to_string()))?;
            if l.bias.len() != l.rows {
                return Err(field(
                    format!("layers[{i}].bias"),
                    format!("expected {} entries, got {}", l.rows, l.bias.len()),
                ));
            }
            if l.bias.iter().any(|b| !b.is_finite()) {
                return Err(field(format!("layers[{i}].bias"), "non-finite entry".into()));
            }
            let activation = l
                .activation
                .as_ref()
                .map(ActivationFile::to_kind)
                .transpose()
                .map_err(|m| field(format!("layers[{i}].activation"), m))?;
            layers.push(Layer::new(weights, l.bias.clone(), activation));
        }
        Network::new(self.input_dim, self.classes, layers)
            .map_err(|e| field("layers".into(), e.to_string()))
    }
}

pub fn network_to_string(net: &Network<f64>) -> String {
    let mut s = serde_json::to_string_pretty(&NetworkFile::from_network(net))
        .expect("network serializes");
    s.push('\n');
    s
}

pub fn network_from_str(text: &str) -> Result<Network<f64>, FormatError> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| FormatError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.to_network()
}

pub fn read_network(path: impl AsRef<Path>) -> Result<Network<f64>, FormatError> {
    network_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_network(path: impl AsRef<Path>, net: &Network<f64>) -> Result<(), FormatError> {
    std::fs::write(path, network_to_string(net))?;
    Ok(())
}
