//! Convex blending of the Base and Robust models and grid-search tuning of
//! the blend coefficient λ.

use crate::attacks::{perturb_dataset, AttackSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::rmse;
use crate::model::{self, Predictor, TrainedModel};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

/// `(1−λ)·Base + λ·Robust`, componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub base: TrainedModel,
    pub robust: TrainedModel,
    pub lambda: f64,
}

impl EnsembleModel {
    pub fn new(base: TrainedModel, robust: TrainedModel, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!(
                "ensemble: lambda must be in [0, 1], got {lambda}"
            )));
        }
        if base.config.n_inputs != robust.config.n_inputs {
            return Err(Error::invalid(format!(
                "ensemble: base expects {} inputs, robust expects {}",
                base.config.n_inputs, robust.config.n_inputs
            )));
        }
        Ok(Self {
            base,
            robust,
            lambda,
        })
    }
}

/// Blends two predictions. At the λ = 0 and λ = 1 boundaries the matching
/// sub-model's prediction is passed through untouched, bit for bit.
fn blend(lambda: f64, base: [f64; 2], robust: [f64; 2]) -> [f64; 2] {
    if lambda == 0.0 {
        base
    } else if lambda == 1.0 {
        robust
    } else {
        [
            (1.0 - lambda) * base[0] + lambda * robust[0],
            (1.0 - lambda) * base[1] + lambda * robust[1],
        ]
    }
}

impl Predictor for EnsembleModel {
    fn predict(&self, rssi: &[f64]) -> Result<[f64; 2]> {
        if self.lambda == 0.0 {
            return self.base.predict(rssi);
        }
        if self.lambda == 1.0 {
            return self.robust.predict(rssi);
        }
        let b = self.base.predict(rssi)?;
        let r = self.robust.predict(rssi)?;
        Ok(blend(self.lambda, b, r))
    }

    fn n_inputs(&self) -> usize {
        self.base.config.n_inputs
    }
}

/// RMSE of the blend at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaCell {
    pub lambda: f64,
    pub rmse: f64,
}

/// Default tuning grid: 21 points, 0 to 1 in steps of 0.05.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Grid-searches λ on the validation set.
///
/// The objective set contains one clean copy of `d_val` plus one perturbed
/// copy per attack spec (an empty spec list tunes on clean data only); a
/// grid point's score is the mean of its per-copy RMSEs. Returns the
/// scored table and the argmin, ties resolved toward the smallest λ.
pub fn tune_lambda(
    base: &TrainedModel,
    robust: &TrainedModel,
    d_val: &Dataset,
    objective: &[AttackSpec],
    grid: &[f64],
) -> Result<(f64, Vec<LambdaCell>)> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda tuning: empty grid"));
    }
    for &l in grid {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::invalid(format!(
                "lambda tuning: grid point {l} outside [0, 1]"
            )));
        }
    }
    if d_val.is_empty() {
        return Err(Error::invalid("lambda tuning: empty validation set"));
    }

    let mut copies = vec![d_val.clone()];
    for spec in objective {
        copies.push(perturb_dataset(d_val, spec)?);
    }
    let truths = d_val.positions();

    // Sub-model predictions per copy are λ-independent; compute them once.
    let mut base_preds = Vec::with_capacity(copies.len());
    let mut robust_preds = Vec::with_capacity(copies.len());
    for copy in &copies {
        let mut b = Vec::with_capacity(copy.len());
        let mut r = Vec::with_capacity(copy.len());
        for s in copy.samples() {
            b.push(base.predict(&s.rssi)?);
            r.push(robust.predict(&s.rssi)?);
        }
        base_preds.push(b);
        robust_preds.push(r);
    }

    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let mut score = 0.0;
        for (b, r) in base_preds.iter().zip(&robust_preds) {
            let preds: Vec<[f64; 2]> = b
                .iter()
                .zip(r)
                .map(|(pb, pr)| blend(lambda, *pb, *pr))
                .collect();
            score += rmse(&truths, &preds)?;
        }
        score /= copies.len() as f64;
        table.push(LambdaCell {
            lambda,
            rmse: score,
        });
        let better = match best {
            None => true,
            Some((best_rmse, best_lambda)) => {
                score < best_rmse || (score == best_rmse && lambda < best_lambda)
            }
        };
        if better {
            best = Some((score, lambda));
        }
    }
    Ok((best.unwrap().1, table))
}

pub fn lambda_table_csv(table: &[LambdaCell]) -> String {
    let mut out = String::from("lambda,rmse\n");
    for cell in table {
        out.push_str(&format!("{},{}\n", cell.lambda, cell.rmse));
    }
    out
}

/// On-disk schema: both sub-models plus the blend coefficient.
#[derive(Serialize, Deserialize)]
struct EnsembleDoc {
    format_version: u32,
    lambda: String,
    base: model::ModelDoc,
    robust: model::ModelDoc,
}

pub fn save_ensemble(e: &EnsembleModel, path: impl AsRef<Path>) -> Result<()> {
    let doc = EnsembleDoc {
        format_version: ENSEMBLE_FORMAT_VERSION,
        lambda: model::fmt_f64(e.lambda),
        base: model::to_doc(&e.base),
        robust: model::to_doc(&e.robust),
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::data(format!("ensemble file: serialization failed: {e}")))?;
    fs::write(path.as_ref(), json)?;
    Ok(())
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<EnsembleModel> {
    let text = fs::read_to_string(path.as_ref())?;
    let doc: EnsembleDoc = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("ensemble file: invalid JSON schema: {e}")))?;
    if doc.format_version != ENSEMBLE_FORMAT_VERSION {
        return Err(Error::data(format!(
            "ensemble file: unsupported format_version {} (expected {ENSEMBLE_FORMAT_VERSION})",
            doc.format_version
        )));
    }
    let lambda = model::parse_f64(&doc.lambda, "ensemble lambda")?;
    let base = model::from_doc(&doc.base)?;
    let robust = model::from_doc(&doc.robust)?;
    EnsembleModel::new(base, robust, lambda).map_err(|e| Error::data(format!("ensemble file: {e}")))
}
