//! Trained-model persistence: a versioned JSON document whose numeric
//! arrays are 17-significant-digit decimal strings, enough to reproduce
//! every `f64` bit-exactly on reload.

use crate::error::{Error, Result};
use crate::kan::{self, KanConfig, KanParams};
use crate::matrix::Matrix;
use crate::neural::{BatchNormState, DropoutSpec, LinearLayer};
use crate::scaler::{self, RobustScalerParams};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted scaler plus trained network, ready for raw-RSSI prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: KanConfig,
    pub params: KanParams,
    pub scaler: RobustScalerParams,
}

/// Anything that maps a raw RSSI vector to a position estimate.
pub trait Predictor {
    fn predict(&self, rssi: &[f64]) -> Result<[f64; 2]>;
    fn n_inputs(&self) -> usize;
}

impl TrainedModel {
    pub fn new(config: KanConfig, params: KanParams, scaler: RobustScalerParams) -> Result<Self> {
        if scaler.n_features() != config.n_inputs {
            return Err(Error::invalid(format!(
                "model: scaler has {} features, network expects {}",
                scaler.n_features(),
                config.n_inputs
            )));
        }
        Ok(Self {
            config,
            params,
            scaler,
        })
    }
}

impl Predictor for TrainedModel {
    fn predict(&self, rssi: &[f64]) -> Result<[f64; 2]> {
        let scaled = scaler::transform(&self.scaler, rssi)?;
        kan::forward_one(&self.params, &scaled)
    }

    fn n_inputs(&self) -> usize {
        self.config.n_inputs
    }
}

/// Shortest-exact is not used here: 17 significant digits guarantee an
/// exact f64 round trip regardless of the reading parser's shortest-form
/// support.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::data(format!("model file: {what}: unparseable number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::data(format!(
            "model file: {what}: non-finite value {s:?}"
        )));
    }
    Ok(v)
}

fn fmt_vec(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| fmt_f64(*x)).collect()
}

fn parse_vec(v: &[String], expect_len: usize, what: &str) -> Result<Vec<f64>> {
    if v.len() != expect_len {
        return Err(Error::data(format!(
            "model file: {what}: {} values, expected {expect_len}",
            v.len()
        )));
    }
    v.iter().map(|s| parse_f64(s, what)).collect()
}

fn fmt_matrix(m: &Matrix) -> Vec<Vec<String>> {
    m.iter_rows().map(fmt_vec).collect()
}

fn parse_matrix(rows: &[Vec<String>], expect: (usize, usize), what: &str) -> Result<Matrix> {
    if rows.len() != expect.0 {
        return Err(Error::data(format!(
            "model file: {what}: {} rows, expected {}",
            rows.len(),
            expect.0
        )));
    }
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| parse_vec(r, expect.1, what))
        .collect::<Result<_>>()?;
    Matrix::from_rows(&parsed).map_err(|e| Error::data(format!("model file: {what}: {e}")))
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerDoc {
    w: Vec<Vec<String>>,
    b: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BranchDoc {
    lin: LayerDoc,
    gain: Vec<String>,
    shift: Vec<String>,
    running_mean: Vec<String>,
    running_var: Vec<String>,
    momentum: String,
    eps: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsDoc {
    inner: Vec<BranchDoc>,
    kolmogorov: LayerDoc,
    output: LayerDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScalerDoc {
    medians: Vec<String>,
    iqrs: Vec<String>,
}

/// On-disk schema of one trained model.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelDoc {
    format_version: u32,
    config: KanConfig,
    scaler: ScalerDoc,
    params: ParamsDoc,
}

fn layer_doc(l: &LinearLayer) -> LayerDoc {
    LayerDoc {
        w: fmt_matrix(&l.w),
        b: fmt_vec(&l.b),
    }
}

fn layer_from_doc(doc: &LayerDoc, expect: (usize, usize), what: &str) -> Result<LinearLayer> {
    let w = parse_matrix(&doc.w, expect, what)?;
    let b = parse_vec(&doc.b, expect.0, what)?;
    LinearLayer::new(w, b).map_err(|e| Error::data(format!("model file: {what}: {e}")))
}

/// Projects a model onto the on-disk schema.
pub fn to_doc(model: &TrainedModel) -> ModelDoc {
    ModelDoc {
        format_version: MODEL_FORMAT_VERSION,
        config: model.config.clone(),
        scaler: ScalerDoc {
            medians: fmt_vec(&model.scaler.medians),
            iqrs: fmt_vec(&model.scaler.iqrs),
        },
        params: ParamsDoc {
            inner: model
                .params
                .inner
                .iter()
                .map(|br| BranchDoc {
                    lin: layer_doc(&br.lin),
                    gain: fmt_vec(&br.bn.gain),
                    shift: fmt_vec(&br.bn.shift),
                    running_mean: fmt_vec(&br.bn.running_mean),
                    running_var: fmt_vec(&br.bn.running_var),
                    momentum: fmt_f64(br.bn.momentum),
                    eps: fmt_f64(br.bn.eps),
                })
                .collect(),
            kolmogorov: layer_doc(&model.params.kolmogorov),
            output: layer_doc(&model.params.output),
        },
    }
}

/// Validates the document end to end and reconstructs the model.
pub fn from_doc(doc: &ModelDoc) -> Result<TrainedModel> {
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::data(format!(
            "model file: unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
            doc.format_version
        )));
    }
    let cfg = &doc.config;
    cfg.validate()
        .map_err(|e| Error::data(format!("model file: config: {e}")))?;
    if doc.params.inner.len() != cfg.m_inner {
        return Err(Error::data(format!(
            "model file: {} inner branches, config declares {}",
            doc.params.inner.len(),
            cfg.m_inner
        )));
    }
    let dropout = DropoutSpec::new(cfg.dropout_rate)
        .map_err(|e| Error::data(format!("model file: dropout: {e}")))?;
    let mut inner = Vec::with_capacity(cfg.m_inner);
    for (j, br) in doc.params.inner.iter().enumerate() {
        let what = format!("inner branch {j}");
        let lin = layer_from_doc(&br.lin, (cfg.inner_width, cfg.n_inputs), &what)?;
        let mut bn = BatchNormState::new(cfg.inner_width);
        bn.gain = parse_vec(&br.gain, cfg.inner_width, &what)?;
        bn.shift = parse_vec(&br.shift, cfg.inner_width, &what)?;
        bn.running_mean = parse_vec(&br.running_mean, cfg.inner_width, &what)?;
        bn.running_var = parse_vec(&br.running_var, cfg.inner_width, &what)?;
        bn.momentum = parse_f64(&br.momentum, &what)?;
        bn.eps = parse_f64(&br.eps, &what)?;
        if bn.running_var.iter().any(|&v| v < 0.0) {
            return Err(Error::data(format!(
                "model file: {what}: negative running variance"
            )));
        }
        inner.push(crate::kan::InnerBranch { lin, bn, dropout });
    }
    let concat = cfg.m_inner * cfg.inner_width;
    let kolmogorov = layer_from_doc(
        &doc.params.kolmogorov,
        (cfg.kolmogorov_width, concat),
        "kolmogorov layer",
    )?;
    let output = layer_from_doc(
        &doc.params.output,
        (2, cfg.kolmogorov_width),
        "output layer",
    )?;
    let scaler = RobustScalerParams {
        medians: parse_vec(&doc.scaler.medians, cfg.n_inputs, "scaler medians")?,
        iqrs: parse_vec(&doc.scaler.iqrs, cfg.n_inputs, "scaler iqrs")?,
    };
    if scaler.iqrs.iter().any(|&v| v <= 0.0) {
        return Err(Error::data("model file: scaler iqrs must be positive"));
    }
    TrainedModel::new(
        cfg.clone(),
        KanParams {
            inner,
            kolmogorov,
            output,
        },
        scaler,
    )
    .map_err(|e| Error::data(format!("model file: {e}")))
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let doc = to_doc(model);
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::data(format!("model file: serialization failed: {e}")))?;
    fs::write(path.as_ref(), json)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let text = fs::read_to_string(path.as_ref())?;
    let doc: ModelDoc = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("model file: invalid JSON schema: {e}")))?;
    from_doc(&doc)
}
