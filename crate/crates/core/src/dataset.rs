//! RSSI fingerprint datasets: CSV ingestion, deterministic splitting, and a
//! log-distance path-loss generator for synthetic desk-scale data.
//!
//! The CSV schema is fixed: header `rssi_0,...,rssi_{n-1},x,y`, one sample
//! per line, UTF-8, `.` decimal point. There are no missing-value sentinels;
//! any non-finite or unparseable field rejects the whole file with the
//! offending line number.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

/// One fingerprint: per-access-point RSSI readings (dBm) and the true
/// position (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct RssiSample {
    pub rssi: Vec<f64>,
    pub position: [f64; 2],
}

/// A validated collection of fingerprints sharing one feature count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<RssiSample>,
    n_features: usize,
}

impl Dataset {
    /// Validates that every sample has `n_features` finite RSSI values and a
    /// finite position.
    pub fn new(samples: Vec<RssiSample>, n_features: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.rssi.len() != n_features {
                return Err(Error::invalid(format!(
                    "sample {i} has {} features, expected {n_features}",
                    s.rssi.len()
                )));
            }
            if !s.rssi.iter().all(|v| v.is_finite()) || !s.position.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("sample {i} has a non-finite value")));
            }
        }
        Ok(Self {
            samples,
            n_features,
        })
    }

    pub fn samples(&self) -> &[RssiSample] {
        &self.samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature matrix, one row per sample.
    pub fn feature_matrix(&self) -> Matrix {
        Matrix::from_fn(self.samples.len(), self.n_features, |i, j| {
            self.samples[i].rssi[j]
        })
    }

    /// Target matrix, one `(x, y)` row per sample.
    pub fn target_matrix(&self) -> Matrix {
        Matrix::from_fn(self.samples.len(), 2, |i, j| self.samples[i].position[j])
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(|s| s.position).collect()
    }

    /// Concatenates datasets with identical feature counts.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.n_features != other.n_features {
            return Err(Error::invalid(format!(
                "cannot concatenate datasets with {} and {} features",
                self.n_features, other.n_features
            )));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Dataset::new(samples, self.n_features)
    }
}

/// Configuration for the synthetic log-distance path-loss generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Access point positions, meters.
    pub ap_positions: Vec<[f64; 2]>,
    /// Rectangle (width, height) that device positions are drawn from, meters.
    pub area: [f64; 2],
    /// Received power at the reference distance, dBm.
    pub p0: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Reference distance, meters.
    pub d0: f64,
    /// Standard deviation of the additive measurement noise, dBm.
    pub noise_std: f64,
    pub n_samples: usize,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ap_positions.is_empty() {
            return Err(Error::invalid(
                "ap_positions: need at least one access point",
            ));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid(format!(
                "gamma: must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.d0 > 0.0) {
            return Err(Error::invalid(format!("d0: must be > 0, got {}", self.d0)));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid(format!(
                "noise_std: must be >= 0, got {}",
                self.noise_std
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples: must be >= 1"));
        }
        if !(self.area[0] > 0.0 && self.area[1] > 0.0) {
            return Err(Error::invalid(format!(
                "area: dimensions must be > 0, got {:?}",
                self.area
            )));
        }
        Ok(())
    }
}

/// Expected RSSI at `distance` meters from an access point under the
/// log-distance model, with distances clamped to the reference distance.
pub fn path_loss_rssi(cfg: &SynthConfig, distance: f64) -> f64 {
    cfg.p0 - 10.0 * cfg.gamma * (distance.max(cfg.d0) / cfg.d0).log10()
}

/// Generates `cfg.n_samples` fingerprints at uniform-random positions.
///
/// Draw order per sample is fixed (position x, position y, then one noise
/// term per access point), so a given `(cfg, seed)` pair is bitwise
/// reproducible.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = DetRng::new(seed);
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let x = rng.uniform_range(0.0, cfg.area[0]);
        let y = rng.uniform_range(0.0, cfg.area[1]);
        let rssi = cfg
            .ap_positions
            .iter()
            .map(|ap| {
                let d = ((x - ap[0]).powi(2) + (y - ap[1]).powi(2)).sqrt();
                path_loss_rssi(cfg, d) + rng.normal_scaled(cfg.noise_std)
            })
            .collect();
        samples.push(RssiSample {
            rssi,
            position: [x, y],
        });
    }
    Dataset::new(samples, cfg.ap_positions.len())
}

/// Splits into `(train, val)` with `|val| = round(val_fraction · |d|)`.
///
/// The dataset is shuffled by a seeded Fisher-Yates pass; validation samples
/// come from the shuffled tail. The same `(dataset, fraction, seed)` always
/// produces the same partition.
pub fn split(d: &Dataset, val_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if d.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::invalid(format!(
            "val_fraction must be in [0, 1), got {val_fraction}"
        )));
    }
    let n = d.len();
    let n_val = (val_fraction * n as f64).round() as usize;
    let mut shuffled = d.samples.clone();
    DetRng::new(seed).shuffle(&mut shuffled);
    let val = shuffled.split_off(n - n_val);
    Ok((
        Dataset::new(shuffled, d.n_features)?,
        Dataset {
            samples: val,
            n_features: d.n_features,
        },
    ))
}

/// CSV header for `n` features: `rssi_0,...,rssi_{n-1},x,y`.
fn expected_header(n_features: usize) -> String {
    let mut cols: Vec<String> = (0..n_features).map(|j| format!("rssi_{j}")).collect();
    cols.push("x".into());
    cols.push("y".into());
    cols.join(",")
}

/// Loads a fingerprint CSV.
///
/// The feature count is inferred from the header unless `expected_features`
/// pins it. Every parse failure names the 1-based line it occurred on.
pub fn load_csv(path: impl AsRef<Path>, expected_features: Option<usize>) -> Result<Dataset> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_csv(&text, expected_features)
}

fn parse_csv(text: &str, expected_features: Option<usize>) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::data("empty dataset: no header row"))?;
    let header = header.trim_end_matches('\r');
    let n_cols = header.split(',').count();
    if n_cols < 3 {
        return Err(Error::data(format!(
            "line 1: header has {n_cols} columns, need at least rssi_0,x,y"
        )));
    }
    let n_features = n_cols - 2;
    if header != expected_header(n_features) {
        return Err(Error::data(format!(
            "line 1: header {header:?} does not match the rssi_0,...,x,y schema"
        )));
    }
    if let Some(expected) = expected_features {
        if n_features != expected {
            return Err(Error::data(format!(
                "line 1: header declares {n_features} features, expected {expected}"
            )));
        }
    }

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(Error::data(format!(
                "line {line_no}: {} columns, expected {n_cols}",
                fields.len()
            )));
        }
        let mut values = Vec::with_capacity(n_cols);
        for (col, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::data(format!(
                    "line {line_no}: cannot parse column {col} value {field:?}"
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "line {line_no}: non-finite value in column {col}"
                )));
            }
            values.push(v);
        }
        let position = [values[n_features], values[n_features + 1]];
        values.truncate(n_features);
        samples.push(RssiSample {
            rssi: values,
            position,
        });
    }
    if samples.is_empty() {
        return Err(Error::data("empty dataset"));
    }
    Dataset::new(samples, n_features)
}

/// Writes a dataset in the fixed CSV schema.
///
/// Values are printed with the shortest decimal form that reparses to the
/// identical `f64`, so a write/load round trip is value-preserving.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&expected_header(d.n_features));
    out.push('\n');
    for s in &d.samples {
        for v in &s.rssi {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{},{}\n", s.position[0], s.position[1]));
    }
    let mut file = fs::File::create(path.as_ref())?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
