//! Mini-batch training with weighted Huber loss, early stopping, and the
//! two-stage Base/Robust pipeline.
//!
//! Determinism contract: everything downstream of `(datasets, TrainConfig,
//! KanConfig)` is bitwise reproducible. Per-epoch shuffle and dropout RNGs
//! are independent substreams of the training seed, so changing the number
//! of epochs never perturbs earlier epochs.

use crate::attacks::{augment_dataset, AttackSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kan::{self, KanConfig, KanParams};
use crate::matrix::Matrix;
use crate::model::{Predictor, TrainedModel};
use crate::neural::{adam_step, huber, huber_grad, AdamState, Mode};
use crate::rng::DetRng;
use crate::scaler::{self, RobustScalerParams};
use serde::{Deserialize, Serialize};

/// Substream bases keeping shuffle and dropout draws disjoint per epoch.
const SHUFFLE_STREAM: u64 = 1 << 32;
const DROPOUT_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without strict validation improvement before stopping.
    pub patience: usize,
    /// Huber transition point, meters.
    pub delta: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            patience: 10,
            delta: 1.0,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("train config: epochs must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("train config: batch_size must be >= 2"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("train config: patience must be >= 1"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid(format!(
                "train config: delta must be > 0, got {}",
                self.delta
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "train config: learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Normalized per-sample loss weights: strictly positive, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights {
    weights: Vec<f64>,
}

impl SampleWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("sample weights: empty"));
        }
        if !weights.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return Err(Error::invalid("sample weights: all must be finite and > 0"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "sample weights: sum {sum} is not 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sample weights: empty"));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Sign-imbalance weighting over prediction residuals.
///
/// Each 2-D residual is scalarized as the sum of its components; ties count
/// as positive. With N₊ positive and N₋ negative samples, a sample of sign
/// class `t` receives raw weight `max(N₋, N₊)/N_t`, and the raw weights are
/// normalized to sum to 1, upweighting the minority side.
pub fn compute_sample_weights(residuals: &[[f64; 2]]) -> Result<SampleWeights> {
    if residuals.is_empty() {
        return Err(Error::invalid("sample weights: no residuals"));
    }
    let positive: Vec<bool> = residuals.iter().map(|r| r[0] + r[1] >= 0.0).collect();
    let n_plus = positive.iter().filter(|&&p| p).count();
    let n_minus = residuals.len() - n_plus;
    let majority = n_plus.max(n_minus) as f64;
    let raw: Vec<f64> = positive
        .iter()
        .map(|&p| {
            let class = if p { n_plus } else { n_minus };
            majority / class as f64
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    SampleWeights::new(raw.into_iter().map(|w| w / sum).collect())
}

/// Loss curves and the early-stopping outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 0-based epoch whose snapshot the run returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (i, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            out.push_str(&format!("{i},{t},{v}\n"));
        }
        out
    }
}

/// A trained model plus how it got there.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub model: TrainedModel,
    pub history: TrainHistory,
}

fn batch_indices(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    // BatchNorm cannot normalize a single sample; fold a trailing singleton
    // into the previous batch.
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().unwrap();
        batches.last_mut().unwrap().extend(tail);
    }
    batches
}

fn gather_rows(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), m.cols(), |i, j| m.get(idx[i], j))
}

/// Rescales the output head to the training targets: bias starts at the
/// target mean and the weight rows are stretched by the per-component
/// target spread. Initial predictions then already live in target units,
/// so the optimizer spends its steps on structure instead of scale.
fn init_output_head(params: &mut KanParams, y_train: &Matrix) {
    let n = y_train.rows() as f64;
    for k in 0..y_train.cols() {
        let mut mean = 0.0;
        for i in 0..y_train.rows() {
            mean += y_train.get(i, k);
        }
        mean /= n;
        let mut var = 0.0;
        for i in 0..y_train.rows() {
            let d = y_train.get(i, k) - mean;
            var += d * d;
        }
        let std = (var / n).sqrt();
        for j in 0..params.output.fan_in() {
            let w = params.output.w.get(k, j);
            params.output.w.set(k, j, w * std);
        }
        params.output.b[k] = mean;
    }
}

/// Mean per-sample Huber loss of Infer-mode predictions.
fn validation_loss(params: &KanParams, x_val: &Matrix, y_val: &Matrix, delta: f64) -> Result<f64> {
    let preds = kan::forward_batch(params, x_val, Mode::Infer, None)?;
    let mut total = 0.0;
    for i in 0..x_val.rows() {
        total += huber(y_val.row(i), preds.row(i), delta)?;
    }
    Ok(total / x_val.rows() as f64)
}

/// Trains with a pre-fitted scaler (features are transformed with it; the
/// targets stay in meters).
pub fn train_with_scaler(
    d_train: &Dataset,
    d_val: &Dataset,
    weights: Option<&SampleWeights>,
    cfg: &TrainConfig,
    kan_cfg: &KanConfig,
    scaler_params: RobustScalerParams,
) -> Result<TrainResult> {
    cfg.validate()?;
    kan_cfg.validate()?;
    if d_train.is_empty() || d_val.is_empty() {
        return Err(Error::invalid(
            "training needs non-empty train and val sets",
        ));
    }
    if d_train.len() < 2 {
        return Err(Error::invalid("training needs at least 2 samples"));
    }
    if d_train.n_features() != kan_cfg.n_inputs || d_val.n_features() != kan_cfg.n_inputs {
        return Err(Error::invalid(format!(
            "training: dataset has {} features, network expects {}",
            d_train.n_features(),
            kan_cfg.n_inputs
        )));
    }
    if let Some(w) = weights {
        if w.len() != d_train.len() {
            return Err(Error::invalid(format!(
                "training: {} weights for {} samples",
                w.len(),
                d_train.len()
            )));
        }
    }
    let owned_uniform;
    let weights = match weights {
        Some(w) => w,
        None => {
            owned_uniform = SampleWeights::uniform(d_train.len())?;
            &owned_uniform
        }
    };

    let x_train = scaler::transform_matrix(&scaler_params, &d_train.feature_matrix())?;
    let y_train = d_train.target_matrix();
    let x_val = scaler::transform_matrix(&scaler_params, &d_val.feature_matrix())?;
    let y_val = d_val.target_matrix();

    let mut params = kan::init(kan_cfg)?;
    init_output_head(&mut params, &y_train);
    let mut adam = AdamState::new(kan::flatten_params(&params).len(), cfg.learning_rate);

    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..d_train.len()).collect();
        DetRng::substream(cfg.seed, SHUFFLE_STREAM + epoch as u64).shuffle(&mut order);
        let mut dropout_rng = DetRng::substream(cfg.seed, DROPOUT_STREAM + epoch as u64);

        let mut epoch_loss = 0.0;
        for (batch_no, batch) in batch_indices(&order, cfg.batch_size).iter().enumerate() {
            let xb = gather_rows(&x_train, batch);
            let yb = gather_rows(&y_train, batch);
            let (preds, cache) =
                kan::forward_cached(&params, &xb, Mode::Train, Some(&mut dropout_rng))?;
            let mut batch_loss = 0.0;
            let mut d_out = Matrix::zeros(batch.len(), 2);
            for (row, &sample_idx) in batch.iter().enumerate() {
                let w = weights.as_slice()[sample_idx];
                batch_loss += w * huber(yb.row(row), preds.row(row), cfg.delta)?;
                let g = huber_grad(yb.row(row), preds.row(row), cfg.delta)?;
                for (col, gv) in g.iter().enumerate() {
                    d_out.set(row, col, w * gv);
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite training loss at epoch {epoch}, batch {batch_no}"
                )));
            }
            epoch_loss += batch_loss;

            let grads = kan::backward(&params, &cache, &d_out);
            let mut flat = kan::flatten_params(&params);
            adam_step(&mut flat, &kan::flatten_grads(&grads), &mut adam)?;
            kan::unflatten_into(&mut params, &flat)?;
            kan::apply_bn_updates(&mut params, &cache);
        }

        let val = validation_loss(&params, &x_val, &y_val, cfg.delta)?;
        if !val.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        history.train_loss.push(epoch_loss);
        history.val_loss.push(val);

        if val < best_val {
            best_val = val;
            best_params = params.clone();
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    Ok(TrainResult {
        model: TrainedModel::new(kan_cfg.clone(), best_params, scaler_params)?,
        history,
    })
}

/// Fits the scaler on `d_train` and trains on it.
pub fn train(
    d_train: &Dataset,
    d_val: &Dataset,
    weights: Option<&SampleWeights>,
    cfg: &TrainConfig,
    kan_cfg: &KanConfig,
) -> Result<TrainResult> {
    if d_train.is_empty() {
        return Err(Error::invalid(
            "training needs non-empty train and val sets",
        ));
    }
    let scaler_params = scaler::fit(&d_train.feature_matrix())?;
    train_with_scaler(d_train, d_val, weights, cfg, kan_cfg, scaler_params)
}

/// Base and Robust models plus the weights the Robust run used.
#[derive(Debug, Clone)]
pub struct RobustPipeline {
    pub base: TrainResult,
    pub robust: TrainResult,
    pub weights: SampleWeights,
}

/// Two-stage pipeline: train Base on clean data, build the attack-augmented
/// set, weight every sample by the sign imbalance of the Base model's
/// residuals, and train Robust on clean-plus-augmented data with those
/// weights. Robust's scaler is fit on the original clean features only, so
/// perturbed copies never shift its reference statistics.
pub fn train_robust_pipeline(
    d_train: &Dataset,
    d_val: &Dataset,
    specs: &[AttackSpec],
    cfg: &TrainConfig,
    kan_cfg: &KanConfig,
) -> Result<RobustPipeline> {
    let base = train(d_train, d_val, None, cfg, kan_cfg)?;

    let augmented = augment_dataset(d_train, specs)?;
    let combined = d_train.concat(&augmented)?;

    let mut residuals = Vec::with_capacity(combined.len());
    for s in combined.samples() {
        let pred = base.model.predict(&s.rssi)?;
        residuals.push([s.position[0] - pred[0], s.position[1] - pred[1]]);
    }
    let weights = compute_sample_weights(&residuals)?;

    let robust_scaler = scaler::fit(&d_train.feature_matrix())?;
    let robust = train_with_scaler(
        &combined,
        d_val,
        Some(&weights),
        cfg,
        kan_cfg,
        robust_scaler,
    )?;

    Ok(RobustPipeline {
        base,
        robust,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{AttackKind, AttackSpec};
    use crate::dataset::{generate_synthetic, split, RssiSample, SynthConfig};

    fn synth_cfg(n_samples: usize, noise: f64) -> SynthConfig {
        SynthConfig {
            ap_positions: vec![[0.0, 0.0], [10.0, 0.0], [0.0, 8.0], [10.0, 8.0]],
            area: [10.0, 8.0],
            p0: -40.0,
            gamma: 2.0,
            d0: 1.0,
            noise_std: noise,
            n_samples,
        }
    }

    fn small_kan(n_inputs: usize) -> KanConfig {
        KanConfig {
            n_inputs,
            m_inner: 4,
            inner_width: 8,
            kolmogorov_width: 2 * n_inputs + 1,
            dropout_rate: 0.1,
            seed: 7,
        }
    }

    fn quick_train_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 15,
            batch_size: 16,
            patience: 10,
            delta: 1.0,
            learning_rate: 1e-3,
            seed: 3,
        }
    }

    #[test]
    fn weights_match_hand_enumeration() {
        // Signs [+, +, −]: majority 2, raw [1, 1, 2], normalized below.
        let w = compute_sample_weights(&[[1.0, 0.5], [0.2, 0.1], [-1.0, -0.5]]).unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn all_same_sign_is_uniform() {
        let w = compute_sample_weights(&[[1.0, 0.0], [0.5, 0.5], [2.0, 1.0], [0.1, 0.1]]).unwrap();
        for &v in w.as_slice() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn balanced_signs_are_symmetric() {
        let w = compute_sample_weights(&[[1.0, 1.0], [-1.0, -1.0]]).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_sum_residual_counts_as_positive() {
        // First residual sums to exactly zero: positive class, so the
        // negative sample is the upweighted minority.
        let w = compute_sample_weights(&[[1.0, -1.0], [3.0, 1.0], [-2.0, -1.0]]).unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn weights_always_sum_to_one() {
        let mut rng = DetRng::new(40);
        for _ in 0..50 {
            let n = 1 + rng.range_usize(30);
            let residuals: Vec<[f64; 2]> = (0..n).map(|_| [rng.normal(), rng.normal()]).collect();
            let w = compute_sample_weights(&residuals).unwrap();
            let sum: f64 = w.as_slice().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
            assert!(w.as_slice().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn uniform_weights_are_one_over_n() {
        let w = SampleWeights::uniform(8).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 0.125));
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(SampleWeights::new(vec![]).is_err());
        assert!(SampleWeights::new(vec![0.5, 0.6]).is_err());
        assert!(SampleWeights::new(vec![1.5, -0.5]).is_err());
    }

    /// Constant features make every prediction identical and immune to
    /// BatchNorm running-stat drift, so with lr = 0 the validation loss is
    /// exactly constant across epochs.
    fn constant_feature_dataset(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| RssiSample {
                rssi: vec![-50.0, -60.0],
                position: [i as f64 % 5.0, (i as f64 * 0.7) % 4.0],
            })
            .collect();
        Dataset::new(samples, 2).unwrap()
    }

    #[test]
    fn early_stopping_fires_after_patience_epochs() {
        let d_train = constant_feature_dataset(20);
        let d_val = constant_feature_dataset(6);
        // learning_rate 0 freezes the parameters, so the validation loss
        // can never strictly improve after the first epoch.
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            patience: 1,
            delta: 1.0,
            learning_rate: 0.0,
            seed: 1,
        };
        let kan_cfg = KanConfig {
            dropout_rate: 0.0,
            ..small_kan(2)
        };
        let out = train(&d_train, &d_val, None, &cfg, &kan_cfg).unwrap();
        // Epoch 0 sets the best; epoch 1 cannot strictly improve, and with
        // patience 1 the run stops there: exactly 2 epochs recorded.
        assert_eq!(out.history.val_loss.len(), 2);
        assert!(out.history.stopped_early);
        assert_eq!(out.history.best_epoch, 0);
    }

    #[test]
    fn best_snapshot_attains_min_recorded_val_loss() {
        let d = generate_synthetic(&synth_cfg(80, 1.0), 9).unwrap();
        let (d_train, d_val) = split(&d, 0.25, 4).unwrap();
        let cfg = TrainConfig {
            epochs: 8,
            ..quick_train_cfg()
        };
        let out = train(&d_train, &d_val, None, &cfg, &small_kan(4)).unwrap();
        let min_val = out
            .history
            .val_loss
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.history.val_loss[out.history.best_epoch], min_val);
        // Recomputing the returned model's validation loss reproduces the
        // recorded minimum bit for bit.
        let x_val = scaler::transform_matrix(&out.model.scaler, &d_val.feature_matrix()).unwrap();
        let recomputed =
            validation_loss(&out.model.params, &x_val, &d_val.target_matrix(), cfg.delta).unwrap();
        assert_eq!(recomputed, min_val);
    }

    #[test]
    fn loss_decreases_on_noiseless_data() {
        let d = generate_synthetic(&synth_cfg(200, 0.0), 15).unwrap();
        let (d_train, d_val) = split(&d, 0.2, 5).unwrap();
        let out = train(&d_train, &d_val, None, &quick_train_cfg(), &small_kan(4)).unwrap();
        let first = out.history.train_loss[0];
        let last = *out.history.train_loss.last().unwrap();
        assert!(
            last < first,
            "training loss did not decrease: {first} -> {last}"
        );
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let d = generate_synthetic(&synth_cfg(60, 1.5), 22).unwrap();
        let (d_train, d_val) = split(&d, 0.2, 6).unwrap();
        let cfg = TrainConfig {
            epochs: 4,
            ..quick_train_cfg()
        };
        let a = train(&d_train, &d_val, None, &cfg, &small_kan(4)).unwrap();
        let b = train(&d_train, &d_val, None, &cfg, &small_kan(4)).unwrap();
        assert_eq!(
            kan::flatten_params(&a.model.params),
            kan::flatten_params(&b.model.params)
        );
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn weight_length_mismatch_is_rejected() {
        let d = generate_synthetic(&synth_cfg(20, 1.0), 1).unwrap();
        let (d_train, d_val) = split(&d, 0.2, 1).unwrap();
        let w = SampleWeights::uniform(3).unwrap();
        assert!(train(
            &d_train,
            &d_val,
            Some(&w),
            &quick_train_cfg(),
            &small_kan(4)
        )
        .is_err());
    }

    #[test]
    fn huge_learning_rate_aborts_with_numerical_error() {
        let d = generate_synthetic(&synth_cfg(40, 1.0), 2).unwrap();
        let (d_train, d_val) = split(&d, 0.2, 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 3,
            ..quick_train_cfg()
        };
        match train(&d_train, &d_val, None, &cfg, &small_kan(4)) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("non-finite"), "{msg}"),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn history_csv_shape() {
        let h = TrainHistory {
            train_loss: vec![2.0, 1.5],
            val_loss: vec![2.2, 1.8],
            best_epoch: 1,
            stopped_early: false,
        };
        assert_eq!(
            h.to_csv(),
            "epoch,train_loss,val_loss\n0,2,2.2\n1,1.5,1.8\n"
        );
    }

    #[test]
    fn pipeline_cardinality_and_weights() {
        let d = generate_synthetic(&synth_cfg(60, 1.0), 13).unwrap();
        let (d_train, d_val) = split(&d, 0.2, 3).unwrap();
        let specs = [
            AttackSpec {
                kind: AttackKind::Spoofing { sigma: 2.0 },
                seed: 100,
            },
            AttackSpec {
                kind: AttackKind::Manipulation { alpha: 0.2 },
                seed: 101,
            },
        ];
        let cfg = TrainConfig {
            epochs: 3,
            ..quick_train_cfg()
        };
        let out = train_robust_pipeline(&d_train, &d_val, &specs, &cfg, &small_kan(4)).unwrap();
        // Robust trains on d_train plus one copy per spec.
        assert_eq!(out.weights.len(), d_train.len() * (1 + specs.len()));
        let sum: f64 = out.weights.as_slice().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        // Robust's scaler comes from the clean training features only.
        assert_eq!(
            out.robust.model.scaler,
            scaler::fit(&d_train.feature_matrix()).unwrap()
        );
        assert_eq!(
            out.base.model.scaler,
            scaler::fit(&d_train.feature_matrix()).unwrap()
        );
    }

    #[test]
    fn identity_attack_pipeline_keeps_robust_near_base() {
        let d = generate_synthetic(&synth_cfg(150, 1.0), 30).unwrap();
        let (d_train, d_val) = split(&d, 0.2, 8).unwrap();
        let specs = [
            AttackSpec {
                kind: AttackKind::Spoofing { sigma: 0.0 },
                seed: 50,
            },
            AttackSpec {
                kind: AttackKind::Manipulation { alpha: 0.0 },
                seed: 51,
            },
        ];
        // Both models must reach their plateau for the comparison to mean
        // anything; Robust sees 3x the batches per epoch, so a short run
        // would leave Base behind.
        let cfg = TrainConfig {
            epochs: 100,
            ..quick_train_cfg()
        };
        let out = train_robust_pipeline(&d_train, &d_val, &specs, &cfg, &small_kan(4)).unwrap();
        let rmse_of = |model: &TrainedModel| -> f64 {
            let mut acc = 0.0;
            for s in d_val.samples() {
                let p = model.predict(&s.rssi).unwrap();
                acc += (s.position[0] - p[0]).powi(2) + (s.position[1] - p[1]).powi(2);
            }
            (acc / d_val.len() as f64).sqrt()
        };
        let base = rmse_of(&out.base.model);
        let robust = rmse_of(&out.robust.model);
        assert!(
            (robust - base).abs() / base < 0.2,
            "clean-duplicate pipeline drifted: base {base}, robust {robust}"
        );
    }
}
