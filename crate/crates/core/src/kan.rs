//! The Kolmogorov-Arnold style regressor mapping n scaled RSSI features to a
//! 2-D position.
//!
//! Architecture: m parallel inner branches, each
//! `Dropout(BatchNorm(ReLU(W_j x + b_j)))`, concatenated and fed through a
//! single "kolmogorov" linear layer (width 2n+1 by default) whose tanh
//! activation forms the Arnold stage, then a linear output head to R².
//!
//! The batched forward is pure: it returns the activations needed by the
//! backward pass plus pending BatchNorm statistics, and mutates nothing.
//! Training applies the statistics explicitly via [`apply_bn_updates`].

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::neural::{
    dropout_mask, relu_batch, tanh_backward, tanh_batch, BatchNormState, BnCache, DropoutSpec,
    LinearLayer, Mode,
};
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};

/// Shape and regularization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanConfig {
    pub n_inputs: usize,
    pub m_inner: usize,
    pub inner_width: usize,
    pub kolmogorov_width: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl KanConfig {
    /// Defaults: 15 inner branches of width 16, a 2n+1-wide kolmogorov
    /// stage, dropout 0.1.
    pub fn for_inputs(n_inputs: usize, seed: u64) -> Self {
        Self {
            n_inputs,
            m_inner: 15,
            inner_width: 16,
            kolmogorov_width: 2 * n_inputs + 1,
            dropout_rate: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0
            || self.m_inner == 0
            || self.inner_width == 0
            || self.kolmogorov_width == 0
        {
            return Err(Error::invalid("kan config: all widths must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "kan config: dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// One inner branch: dense layer, its normalization state, and dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerBranch {
    pub lin: LinearLayer,
    pub bn: BatchNormState,
    pub dropout: DropoutSpec,
}

/// All trainable state of the regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct KanParams {
    pub inner: Vec<InnerBranch>,
    pub kolmogorov: LinearLayer,
    pub output: LinearLayer,
}

/// Activations and masks recorded by [`forward_cached`] for the backward
/// pass.
pub struct KanCache {
    x: Matrix,
    relu_masks: Vec<Matrix>,
    bn_caches: Vec<BnCache>,
    dropout_masks: Option<Vec<Matrix>>,
    concat: Matrix,
    tanh_out: Matrix,
}

/// Parameter gradients, shaped like the parameters they belong to.
pub struct KanGrads {
    pub inner: Vec<BranchGrads>,
    pub dkolm_w: Matrix,
    pub dkolm_b: Vec<f64>,
    pub dout_w: Matrix,
    pub dout_b: Vec<f64>,
}

pub struct BranchGrads {
    pub dw: Matrix,
    pub db: Vec<f64>,
    pub dgain: Vec<f64>,
    pub dshift: Vec<f64>,
}

/// Seeded parameter construction. Rectified inner layers draw weights with
/// variance 2/fan-in; the tanh-feeding kolmogorov layer and the output head
/// use 1/fan-in. Biases start at zero, BN gains at 1, shifts at 0.
pub fn init(cfg: &KanConfig) -> Result<KanParams> {
    cfg.validate()?;
    let mut rng = DetRng::new(cfg.seed);
    let dropout = DropoutSpec::new(cfg.dropout_rate)?;
    let inner = (0..cfg.m_inner)
        .map(|_| InnerBranch {
            lin: LinearLayer::init(&mut rng, cfg.inner_width, cfg.n_inputs, 2.0),
            bn: BatchNormState::new(cfg.inner_width),
            dropout,
        })
        .collect();
    let concat_width = cfg.m_inner * cfg.inner_width;
    let kolmogorov = LinearLayer::init(&mut rng, cfg.kolmogorov_width, concat_width, 1.0);
    let output = LinearLayer::init(&mut rng, 2, cfg.kolmogorov_width, 1.0);
    Ok(KanParams {
        inner,
        kolmogorov,
        output,
    })
}

/// Trainable parameter count (BN running statistics are buffers, not
/// parameters).
pub fn param_count(cfg: &KanConfig) -> usize {
    let per_branch = cfg.inner_width * cfg.n_inputs + cfg.inner_width + 2 * cfg.inner_width;
    let concat = cfg.m_inner * cfg.inner_width;
    cfg.m_inner * per_branch
        + (cfg.kolmogorov_width * concat + cfg.kolmogorov_width)
        + (2 * cfg.kolmogorov_width + 2)
}

fn check_input_width(params: &KanParams, cols: usize) -> Result<()> {
    let expect = params.inner[0].lin.fan_in();
    if cols != expect {
        return Err(Error::invalid(format!(
            "kan forward: input width {cols} vs expected {expect}"
        )));
    }
    Ok(())
}

/// Pure batched forward returning the output and the backward cache.
///
/// Train mode requires a batch of at least 2 (batch statistics) and an RNG
/// whenever the dropout rate is nonzero. Dropout masks are drawn branch by
/// branch in a fixed order, so the pass is a deterministic function of
/// `(params, x, rng state)`.
pub fn forward_cached(
    params: &KanParams,
    x: &Matrix,
    mode: Mode,
    mut rng: Option<&mut DetRng>,
) -> Result<(Matrix, KanCache)> {
    check_input_width(params, x.cols())?;
    if mode == Mode::Train && x.rows() < 2 {
        return Err(Error::invalid(format!(
            "kan forward: Train mode needs batch size >= 2, got {}",
            x.rows()
        )));
    }
    let n = x.rows();
    let m = params.inner.len();
    let w = params.inner[0].lin.fan_out();
    let needs_dropout = mode == Mode::Train && params.inner[0].dropout.rate > 0.0;
    if needs_dropout && rng.is_none() {
        return Err(Error::invalid(
            "kan forward: Train mode with dropout needs an RNG",
        ));
    }

    let mut concat = Matrix::zeros(n, m * w);
    let mut relu_masks = Vec::with_capacity(m);
    let mut bn_caches = Vec::with_capacity(m);
    let mut dropout_masks = if needs_dropout {
        Some(Vec::with_capacity(m))
    } else {
        None
    };
    for (j, branch) in params.inner.iter().enumerate() {
        let z = branch.lin.forward_batch(x)?;
        let (r, mask) = relu_batch(&z);
        let (b, bn_cache) = branch.bn.forward_cached(&r, mode)?;
        let d = if let Some(masks) = dropout_masks.as_mut() {
            let dm = dropout_mask(branch.dropout, n, w, rng.as_deref_mut().unwrap());
            let out = b.hadamard(&dm);
            masks.push(dm);
            out
        } else {
            b
        };
        concat.write_cols(j * w, &d);
        relu_masks.push(mask);
        bn_caches.push(bn_cache);
    }

    let k_pre = params.kolmogorov.forward_batch(&concat)?;
    let tanh_out = tanh_batch(&k_pre);
    let out = params.output.forward_batch(&tanh_out)?;
    Ok((
        out,
        KanCache {
            x: x.clone(),
            relu_masks,
            bn_caches,
            dropout_masks,
            concat,
            tanh_out,
        },
    ))
}

/// Batched forward without a cache.
pub fn forward_batch(
    params: &KanParams,
    x: &Matrix,
    mode: Mode,
    rng: Option<&mut DetRng>,
) -> Result<Matrix> {
    forward_cached(params, x, mode, rng).map(|(out, _)| out)
}

/// Single-sample deterministic prediction (Infer semantics).
pub fn forward_one(params: &KanParams, x: &[f64]) -> Result<[f64; 2]> {
    let xm = Matrix::from_rows(&[x.to_vec()])
        .map_err(|_| Error::invalid("kan forward: non-finite input"))?;
    let out = forward_batch(params, &xm, Mode::Infer, None)?;
    Ok([out.get(0, 0), out.get(0, 1)])
}

/// Exact backward from the output gradient `d_out` (N×2) to every trainable
/// parameter.
pub fn backward(params: &KanParams, cache: &KanCache, d_out: &Matrix) -> KanGrads {
    let out_grads = params.output.backward(&cache.tanh_out, d_out);
    let d_kpre = tanh_backward(&cache.tanh_out, &out_grads.dx);
    let kolm_grads = params.kolmogorov.backward(&cache.concat, &d_kpre);

    let w = params.inner[0].lin.fan_out();
    let mut inner = Vec::with_capacity(params.inner.len());
    for (j, branch) in params.inner.iter().enumerate() {
        let mut d_block = kolm_grads.dx.slice_cols(j * w, w);
        if let Some(masks) = &cache.dropout_masks {
            d_block = d_block.hadamard(&masks[j]);
        }
        let bn_grads = branch.bn.backward(&cache.bn_caches[j], &d_block);
        let d_z = bn_grads.dx.hadamard(&cache.relu_masks[j]);
        let lin_grads = branch.lin.backward(&cache.x, &d_z);
        inner.push(BranchGrads {
            dw: lin_grads.dw,
            db: lin_grads.db,
            dgain: bn_grads.dgain,
            dshift: bn_grads.dshift,
        });
    }
    KanGrads {
        inner,
        dkolm_w: kolm_grads.dw,
        dkolm_b: kolm_grads.db,
        dout_w: out_grads.dw,
        dout_b: out_grads.db,
    }
}

/// Commits the pending BatchNorm running-statistic updates of a Train pass.
pub fn apply_bn_updates(params: &mut KanParams, cache: &KanCache) {
    for (branch, bn_cache) in params.inner.iter_mut().zip(&cache.bn_caches) {
        branch.bn.apply_update(bn_cache);
    }
}

/// Flattening order, fixed for the optimizer and serialization: per branch
/// `[W row-major, b, gain, shift]`, then kolmogorov `[W, b]`, then output
/// `[W, b]`. Running statistics are excluded.
pub fn flatten_params(params: &KanParams) -> Vec<f64> {
    let mut flat = Vec::new();
    for branch in &params.inner {
        flat.extend_from_slice(branch.lin.w.data());
        flat.extend_from_slice(&branch.lin.b);
        flat.extend_from_slice(&branch.bn.gain);
        flat.extend_from_slice(&branch.bn.shift);
    }
    flat.extend_from_slice(params.kolmogorov.w.data());
    flat.extend_from_slice(&params.kolmogorov.b);
    flat.extend_from_slice(params.output.w.data());
    flat.extend_from_slice(&params.output.b);
    flat
}

/// Inverse of [`flatten_params`]; running statistics are left untouched.
pub fn unflatten_into(params: &mut KanParams, flat: &[f64]) -> Result<()> {
    let expect = flatten_params(params).len();
    if flat.len() != expect {
        return Err(Error::invalid(format!(
            "unflatten: {} values for {expect} parameters",
            flat.len()
        )));
    }
    let mut pos = 0;
    let mut take = |n: usize| {
        let s = &flat[pos..pos + n];
        pos += n;
        s
    };
    for branch in &mut params.inner {
        let nw = branch.lin.w.data().len();
        branch.lin.w.data_mut().copy_from_slice(take(nw));
        let nb = branch.lin.b.len();
        branch.lin.b.copy_from_slice(take(nb));
        let ng = branch.bn.gain.len();
        branch.bn.gain.copy_from_slice(take(ng));
        branch.bn.shift.copy_from_slice(take(ng));
    }
    let nk = params.kolmogorov.w.data().len();
    params.kolmogorov.w.data_mut().copy_from_slice(take(nk));
    let nkb = params.kolmogorov.b.len();
    params.kolmogorov.b.copy_from_slice(take(nkb));
    let no = params.output.w.data().len();
    params.output.w.data_mut().copy_from_slice(take(no));
    let nob = params.output.b.len();
    params.output.b.copy_from_slice(take(nob));
    Ok(())
}

/// Gradients in [`flatten_params`] order.
pub fn flatten_grads(grads: &KanGrads) -> Vec<f64> {
    let mut flat = Vec::new();
    for g in &grads.inner {
        flat.extend_from_slice(g.dw.data());
        flat.extend_from_slice(&g.db);
        flat.extend_from_slice(&g.dgain);
        flat.extend_from_slice(&g.dshift);
    }
    flat.extend_from_slice(grads.dkolm_w.data());
    flat.extend_from_slice(&grads.dkolm_b);
    flat.extend_from_slice(grads.dout_w.data());
    flat.extend_from_slice(&grads.dout_b);
    flat
}
