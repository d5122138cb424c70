//! Versioned JSON model documents.
//!
//! Floats are written in shortest round-trip form, so a saved model reloads
//! bit-identically.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelKind, KernelSpec};
use crate::model::{Mode, OrdinalModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDocument {
    pub kind: KernelKind,
    pub gamma: f64,
    pub support_points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub mode: Mode,
    pub k: usize,
    pub p: usize,
    /// Row-major `(k − 1) × p`, or `(k − 1) × m` dual coefficients when a
    /// kernel is attached.
    pub weights: Vec<f64>,
    pub thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelDocument>,
}

impl From<&OrdinalModel> for ModelDocument {
    fn from(model: &OrdinalModel) -> Self {
        let kernel = model.kernel().map(|spec| KernelDocument {
            kind: spec.kind(),
            gamma: spec.gamma(),
            support_points: spec
                .support_points()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        });
        Self {
            schema_version: SCHEMA_VERSION,
            mode: model.mode(),
            k: model.k(),
            p: model.p(),
            weights: model.weights().iter().copied().collect(),
            thresholds: model.thresholds().to_vec(),
            kernel,
        }
    }
}

impl TryFrom<ModelDocument> for OrdinalModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        if doc.k < 2 {
            return Err(Error::InvalidModel(format!("k = {} < 2", doc.k)));
        }
        let rows = doc.k - 1;
        let (kernel, cols) = match doc.kernel {
            Some(kd) => {
                let m = kd.support_points.len();
                let mut flat = Vec::with_capacity(m * doc.p);
                for (i, r) in kd.support_points.iter().enumerate() {
                    if r.len() != doc.p {
                        return Err(Error::InvalidModel(format!(
                            "support point {i} has {} features, expected {}",
                            r.len(),
                            doc.p
                        )));
                    }
                    flat.extend_from_slice(r);
                }
                let support = Array2::from_shape_vec((m, doc.p), flat)
                    .map_err(|e| Error::InvalidModel(e.to_string()))?;
                (Some(KernelSpec::new(kd.kind, kd.gamma, support)?), m)
            }
            None => (None, doc.p),
        };
        if doc.weights.len() != rows * cols {
            return Err(Error::dim(
                "serialized weights",
                rows * cols,
                doc.weights.len(),
            ));
        }
        let weights = Array2::from_shape_vec((rows, cols), doc.weights)
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        OrdinalModel::new(doc.mode, weights, Array1::from(doc.thresholds), kernel)
    }
}

pub fn to_json(model: &OrdinalModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelDocument::from(model))?)
}

pub fn from_json(text: &str) -> Result<OrdinalModel> {
    let doc: ModelDocument = serde_json::from_str(text)?;
    OrdinalModel::try_from(doc)
}

pub fn save_model(model: &OrdinalModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = to_json(model)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OrdinalModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
