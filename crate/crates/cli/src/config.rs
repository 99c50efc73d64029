//! Run configuration: one JSON document describes an entire experiment.
//!
//! Every field has a default, so a config file only needs the values it
//! changes; an empty `{}` reproduces the standard synthetic scenario end to
//! end. Unknown keys are rejected so typos fail loudly instead of silently
//! falling back to defaults.

use std::fs;
use std::path::{Path, PathBuf};

use fortiloc_core::attacks::{AttackKind, AttackSpec};
use fortiloc_core::dataset::SynthConfig;
use fortiloc_core::ensemble::default_lambda_grid;
use fortiloc_core::kan::KanConfig;
use fortiloc_core::training::TrainConfig;
use fortiloc_core::{derive_seed, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Every random stream in a run is derived from it by a
    /// fixed tag, so reruns are bit-reproducible and adding a stream never
    /// shifts the existing ones.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: DatasetSource,
    /// Fraction of the dataset held out as the test split.
    pub test_fraction: f64,
    /// Fraction of the remainder held out as the validation split.
    pub val_fraction: f64,
    pub kan: KanSettings,
    pub train: TrainSettings,
    /// Training-time augmentation: one perturbed copy of the training split
    /// per entry. Seeds are assigned by list position.
    pub attacks: Vec<AttackKind>,
    /// Perturbed validation copies scored by the blend-weight tuner next to
    /// the clean copy.
    pub tune_objective: Vec<AttackKind>,
    pub lambda_grid: Vec<f64>,
    pub sweep: SweepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: PathBuf::from("out"),
            dataset: DatasetSource::Synthetic(SynthSettings::default()),
            test_fraction: 0.2,
            val_fraction: 0.2,
            kan: KanSettings::default(),
            train: TrainSettings::default(),
            attacks: vec![
                AttackKind::Spoofing { sigma: 2.0 },
                AttackKind::Spoofing { sigma: 2.0 },
                AttackKind::Spoofing { sigma: 2.0 },
                AttackKind::Spoofing { sigma: 2.0 },
                AttackKind::Manipulation { alpha: 0.2 },
            ],
            tune_objective: vec![
                AttackKind::Spoofing { sigma: 2.0 },
                AttackKind::Manipulation { alpha: 0.2 },
            ],
            lambda_grid: default_lambda_grid(),
            sweep: SweepSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn synth_seed(&self) -> u64 {
        derive_seed(self.seed, &[1])
    }

    pub fn test_split_seed(&self) -> u64 {
        derive_seed(self.seed, &[2])
    }

    pub fn val_split_seed(&self) -> u64 {
        derive_seed(self.seed, &[3])
    }

    pub fn training_attack_specs(&self) -> Vec<AttackSpec> {
        self.attacks
            .iter()
            .enumerate()
            .map(|(i, &kind)| AttackSpec {
                kind,
                seed: derive_seed(self.seed, &[4, i as u64]),
            })
            .collect()
    }

    pub fn train_seed(&self) -> u64 {
        derive_seed(self.seed, &[5])
    }

    pub fn kan_seed(&self) -> u64 {
        derive_seed(self.seed, &[6])
    }

    pub fn objective_specs(&self) -> Vec<AttackSpec> {
        self.tune_objective
            .iter()
            .enumerate()
            .map(|(i, &kind)| AttackSpec {
                kind,
                seed: derive_seed(self.seed, &[7 + i as u64]),
            })
            .collect()
    }

    pub fn sweep_seed(&self) -> u64 {
        derive_seed(self.seed, &[10])
    }
}

/// Where the fingerprint dataset comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Fingerprint CSV with header `rssi_0,...,rssi_{n-1},x,y`.
    Csv {
        path: PathBuf,
    },
    Synthetic(SynthSettings),
}

/// Log-distance path-loss scenario. The default places two rows of ceiling
/// access points along the long axis of a 20 m x 15 m room.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub ap_positions: Vec<[f64; 2]>,
    pub area: [f64; 2],
    pub p0: f64,
    pub gamma: f64,
    pub d0: f64,
    pub noise_std: f64,
    pub n_samples: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            ap_positions: vec![
                [1.25, 10.0],
                [3.75, 5.0],
                [6.25, 10.0],
                [8.75, 5.0],
                [11.25, 10.0],
                [13.75, 5.0],
                [16.25, 10.0],
                [18.75, 5.0],
            ],
            area: [20.0, 15.0],
            p0: -40.0,
            gamma: 2.2,
            d0: 1.0,
            noise_std: 2.0,
            n_samples: 2000,
        }
    }
}

impl SynthSettings {
    pub fn resolve(&self) -> SynthConfig {
        SynthConfig {
            ap_positions: self.ap_positions.clone(),
            area: self.area,
            p0: self.p0,
            gamma: self.gamma,
            d0: self.d0,
            noise_std: self.noise_std,
            n_samples: self.n_samples,
        }
    }
}

/// Network shape. `kolmogorov_width` defaults to `2n + 1` for `n` inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KanSettings {
    pub m_inner: usize,
    pub inner_width: usize,
    pub kolmogorov_width: Option<usize>,
    pub dropout_rate: f64,
}

impl Default for KanSettings {
    fn default() -> Self {
        KanSettings {
            m_inner: 15,
            inner_width: 16,
            kolmogorov_width: None,
            dropout_rate: 0.1,
        }
    }
}

impl KanSettings {
    pub fn resolve(&self, n_inputs: usize, seed: u64) -> KanConfig {
        KanConfig {
            n_inputs,
            m_inner: self.m_inner,
            inner_width: self.inner_width,
            kolmogorov_width: self.kolmogorov_width.unwrap_or(2 * n_inputs + 1),
            dropout_rate: self.dropout_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub delta: f64,
    pub learning_rate: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            epochs: d.epochs,
            batch_size: d.batch_size,
            patience: d.patience,
            delta: d.delta,
            learning_rate: d.learning_rate,
        }
    }
}

impl TrainSettings {
    pub fn resolve(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            delta: self.delta,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

/// Attack-strength grids for the evaluation sweep, plus the reference
/// strengths the comparison summary is projected onto.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub spoofing_strengths: Vec<f64>,
    pub manipulation_strengths: Vec<f64>,
    /// Perturbation redraws per grid cell; reported as mean and std.
    pub repeats: usize,
    pub reference_spoofing: f64,
    pub reference_manipulation: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            spoofing_strengths: (0..=8).map(|i| i as f64 * 0.5).collect(),
            manipulation_strengths: (0..=8).map(|i| i as f64 * 0.05).collect(),
            repeats: 5,
            reference_spoofing: 2.0,
            reference_manipulation: 0.2,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("config {}: {e}", path.display())))
}
