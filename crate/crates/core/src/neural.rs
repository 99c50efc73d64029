//! Dense-network building blocks with hand-derived backward passes: linear
//! layers, ReLU/tanh, batch normalization, inverted dropout, Huber loss,
//! a bias-corrected adaptive-moment optimizer, and a finite-difference
//! gradient checker.
//!
//! Every forward that participates in training has an exact analytic
//! backward; the gradient checker is the arbiter for all of them.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::DetRng;

/// Whether a forward pass uses batch statistics and dropout (Train) or is a
/// deterministic map (Infer).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Fully connected layer: `y = W·x + b`, weights stored out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Gradients of a linear layer plus the gradient passed to its input.
pub struct LinearGrads {
    pub dw: Matrix,
    pub db: Vec<f64>,
    pub dx: Matrix,
}

impl LinearLayer {
    pub fn new(w: Matrix, b: Vec<f64>) -> Result<Self> {
        if w.rows() != b.len() {
            return Err(Error::invalid(format!(
                "linear layer: {} weight rows vs {} biases",
                w.rows(),
                b.len()
            )));
        }
        if !w.all_finite() || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("linear layer: non-finite parameter"));
        }
        Ok(Self { w, b })
    }

    /// Random init with weight variance `var_scale / fan_in` and zero biases.
    /// `var_scale` 2 suits rectified outputs, 1 suits tanh-fed outputs.
    pub fn init(rng: &mut DetRng, fan_out: usize, fan_in: usize, var_scale: f64) -> Self {
        let std = (var_scale / fan_in as f64).sqrt();
        Self {
            w: Matrix::from_fn(fan_out, fan_in, |_, _| rng.normal_scaled(std)),
            b: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.rows()
    }

    /// `W·x + b` for one sample.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.fan_in() {
            return Err(Error::invalid(format!(
                "linear forward: input length {} vs fan-in {}",
                x.len(),
                self.fan_in()
            )));
        }
        Ok((0..self.fan_out())
            .map(|o| {
                let row = self.w.row(o);
                let mut acc = self.b[o];
                for (wi, xi) in row.iter().zip(x) {
                    acc += wi * xi;
                }
                acc
            })
            .collect())
    }

    /// `X·Wᵀ + b` row-wise over a batch.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.fan_in() {
            return Err(Error::invalid(format!(
                "linear forward: batch width {} vs fan-in {}",
                x.cols(),
                self.fan_in()
            )));
        }
        let mut y = x.matmul_transpose_b(&self.w);
        for i in 0..y.rows() {
            for (v, b) in y.row_mut(i).iter_mut().zip(&self.b) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// Backward through `Y = X·Wᵀ + b`: `dW = dYᵀ·X`, `db = column sums of
    /// dY`, `dX = dY·W`. `x` is the forward input batch.
    pub fn backward(&self, x: &Matrix, d_out: &Matrix) -> LinearGrads {
        LinearGrads {
            dw: d_out.matmul_transpose_a(x),
            db: d_out.col_sums(),
            dx: d_out.matmul(&self.w),
        }
    }
}

/// Componentwise `max(0, x)`.
pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

/// Componentwise hyperbolic tangent.
pub fn tanh_act(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Batch ReLU returning `(output, mask)`; the mask is the local derivative
/// (1 where the input was positive, else 0) consumed by the backward pass.
pub fn relu_batch(x: &Matrix) -> (Matrix, Matrix) {
    let out = x.map(|v| v.max(0.0));
    let mask = x.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    (out, mask)
}

/// Batch tanh; the backward derivative `1 − y²` is recovered from the output.
pub fn tanh_batch(x: &Matrix) -> Matrix {
    x.map(|v| v.tanh())
}

/// Backward through tanh given its forward output.
pub fn tanh_backward(y: &Matrix, d_out: &Matrix) -> Matrix {
    Matrix::from_fn(y.rows(), y.cols(), |i, j| {
        d_out.get(i, j) * (1.0 - y.get(i, j) * y.get(i, j))
    })
}

/// Per-feature batch normalization state. Running statistics follow the
/// momentum convention `running = (1−m)·running + m·batch` with the biased
/// batch variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gain: Vec<f64>,
    pub shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// Everything the BatchNorm backward needs, plus the pending running-stat
/// update so the forward itself can stay pure.
pub struct BnCache {
    /// Normalized pre-affine values, one row per sample.
    pub xhat: Matrix,
    /// Reciprocal standard deviation per feature.
    pub inv_std: Vec<f64>,
    pub mode: Mode,
    /// `(batch_mean, batch_var)` from a Train pass; `None` after Infer.
    pub pending: Option<(Vec<f64>, Vec<f64>)>,
}

pub struct BnGrads {
    pub dgain: Vec<f64>,
    pub dshift: Vec<f64>,
    pub dx: Matrix,
}

impl BatchNormState {
    pub fn new(width: usize) -> Self {
        Self {
            gain: vec![1.0; width],
            shift: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn width(&self) -> usize {
        self.gain.len()
    }

    /// Pure forward. Train mode normalizes by batch statistics and reports
    /// the running-stat update in the cache; Infer normalizes by the stored
    /// running statistics.
    pub fn forward_cached(&self, x: &Matrix, mode: Mode) -> Result<(Matrix, BnCache)> {
        let (n, c) = (x.rows(), x.cols());
        if c != self.width() {
            return Err(Error::invalid(format!(
                "batchnorm: input width {c} vs state width {}",
                self.width()
            )));
        }
        let (mean, var, pending) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::invalid(format!(
                        "batchnorm: Train mode needs batch size >= 2, got {n}"
                    )));
                }
                let mean = x.col_means();
                let mut var = vec![0.0; c];
                for i in 0..n {
                    for (j, v) in x.row(i).iter().enumerate() {
                        let d = v - mean[j];
                        var[j] += d * d;
                    }
                }
                for v in &mut var {
                    *v /= n as f64;
                }
                let pending = Some((mean.clone(), var.clone()));
                (mean, var, pending)
            }
            Mode::Infer => (self.running_mean.clone(), self.running_var.clone(), None),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let xhat = Matrix::from_fn(n, c, |i, j| (x.get(i, j) - mean[j]) * inv_std[j]);
        let out = Matrix::from_fn(n, c, |i, j| self.gain[j] * xhat.get(i, j) + self.shift[j]);
        Ok((
            out,
            BnCache {
                xhat,
                inv_std,
                mode,
                pending,
            },
        ))
    }

    /// Folds a Train pass's batch statistics into the running statistics.
    pub fn apply_update(&mut self, cache: &BnCache) {
        if let Some((mean, var)) = &cache.pending {
            let m = self.momentum;
            for j in 0..self.width() {
                self.running_mean[j] = (1.0 - m) * self.running_mean[j] + m * mean[j];
                self.running_var[j] = (1.0 - m) * self.running_var[j] + m * var[j];
            }
        }
    }

    /// Exact backward. Train mode accounts for the dependence of the batch
    /// statistics on every sample; Infer mode is a per-sample affine map.
    pub fn backward(&self, cache: &BnCache, d_out: &Matrix) -> BnGrads {
        let (n, c) = (cache.xhat.rows(), cache.xhat.cols());
        let mut dgain = vec![0.0; c];
        let mut dshift = vec![0.0; c];
        for i in 0..n {
            for j in 0..c {
                dgain[j] += d_out.get(i, j) * cache.xhat.get(i, j);
                dshift[j] += d_out.get(i, j);
            }
        }
        let dx = match cache.mode {
            Mode::Infer => Matrix::from_fn(n, c, |i, j| {
                d_out.get(i, j) * self.gain[j] * cache.inv_std[j]
            }),
            Mode::Train => {
                // dxhat = d_out * gain; per column:
                // dx_i = inv_std/N * (N*dxhat_i - Σ dxhat - xhat_i * Σ dxhat*xhat)
                let mut sum_dxhat = vec![0.0; c];
                let mut sum_dxhat_xhat = vec![0.0; c];
                for i in 0..n {
                    for j in 0..c {
                        let dxh = d_out.get(i, j) * self.gain[j];
                        sum_dxhat[j] += dxh;
                        sum_dxhat_xhat[j] += dxh * cache.xhat.get(i, j);
                    }
                }
                Matrix::from_fn(n, c, |i, j| {
                    let dxh = d_out.get(i, j) * self.gain[j];
                    cache.inv_std[j] / n as f64
                        * (n as f64 * dxh - sum_dxhat[j] - cache.xhat.get(i, j) * sum_dxhat_xhat[j])
                })
            }
        };
        BnGrads { dgain, dshift, dx }
    }
}

/// Forward that also commits the running-statistics update in Train mode.
pub fn batchnorm_forward(state: &mut BatchNormState, batch: &Matrix, mode: Mode) -> Result<Matrix> {
    let (out, cache) = state.forward_cached(batch, mode)?;
    state.apply_update(&cache);
    Ok(out)
}

/// Inverted-dropout configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub rate: f64,
}

impl DropoutSpec {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Self { rate })
    }
}

/// Samples a multiplier per entry: 0 with probability `rate`, else
/// `1/(1−rate)`. Rate 0 consumes no randomness.
pub fn dropout_mask(spec: DropoutSpec, rows: usize, cols: usize, rng: &mut DetRng) -> Matrix {
    if spec.rate == 0.0 {
        return Matrix::from_fn(rows, cols, |_, _| 1.0);
    }
    let keep_scale = 1.0 / (1.0 - spec.rate);
    Matrix::from_fn(rows, cols, |_, _| {
        if rng.uniform01() < spec.rate {
            0.0
        } else {
            keep_scale
        }
    })
}

/// Vector-shaped dropout: identity in Infer mode, inverted dropout in Train.
pub fn dropout_forward(spec: DropoutSpec, x: &[f64], mode: Mode, rng: &mut DetRng) -> Vec<f64> {
    match mode {
        Mode::Infer => x.to_vec(),
        Mode::Train => {
            let mask = dropout_mask(spec, 1, x.len(), rng);
            x.iter().zip(mask.row(0)).map(|(v, m)| v * m).collect()
        }
    }
}

/// Huber loss summed over components: `½r²` where `|r| ≤ δ`, else
/// `δ|r| − ½δ²`, with `r = y − ŷ`.
pub fn huber(y: &[f64], yhat: &[f64], delta: f64) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::invalid(format!(
            "huber: length mismatch {} vs {}",
            y.len(),
            yhat.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "huber: delta must be > 0, got {delta}"
        )));
    }
    let mut total = 0.0;
    for (t, p) in y.iter().zip(yhat) {
        let r = t - p;
        total += if r.abs() <= delta {
            0.5 * r * r
        } else {
            delta * r.abs() - 0.5 * delta * delta
        };
    }
    Ok(total)
}

/// Gradient of [`huber`] with respect to the prediction `ŷ`:
/// `−r` inside the quadratic region, `−δ·sign(r)` outside.
pub fn huber_grad(y: &[f64], yhat: &[f64], delta: f64) -> Result<Vec<f64>> {
    if y.len() != yhat.len() {
        return Err(Error::invalid(format!(
            "huber_grad: length mismatch {} vs {}",
            y.len(),
            yhat.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "huber_grad: delta must be > 0, got {delta}"
        )));
    }
    Ok(y.iter()
        .zip(yhat)
        .map(|(t, p)| {
            let r = t - p;
            if r.abs() <= delta {
                -r
            } else {
                -delta * r.signum()
            }
        })
        .collect())
}

/// Bias-corrected adaptive-moment optimizer state over one flat parameter
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One in-place update step.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Compares an analytic gradient against central finite differences
/// `(f(θ+h)−f(θ−h))/2h` at the probed coordinates and returns the maximum
/// relative error, with the denominator floored to keep near-zero
/// coordinates meaningful.
pub fn grad_check(
    mut f: impl FnMut(&[f64]) -> f64,
    analytic: &[f64],
    theta: &[f64],
    probes: &[usize],
    h: f64,
) -> f64 {
    let mut work = theta.to_vec();
    let mut worst = 0.0f64;
    for &i in probes {
        let orig = work[i];
        work[i] = orig + h;
        let up = f(&work);
        work[i] = orig - h;
        let down = f(&work);
        work[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-3);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_identity_map() {
        let layer = LinearLayer::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(layer.forward(&[3.0, -4.5]).unwrap(), vec![3.0, -4.5]);
    }

    #[test]
    fn linear_hand_case() {
        let layer =
            LinearLayer::new(Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![0.5]).unwrap();
        assert_eq!(layer.forward(&[2.0, 3.0]).unwrap(), vec![5.5]);
    }

    #[test]
    fn linear_zero_weights_yield_bias() {
        let layer = LinearLayer::new(Matrix::zeros(2, 3), vec![7.0, -1.0]).unwrap();
        assert_eq!(layer.forward(&[9.0, 9.0, 9.0]).unwrap(), vec![7.0, -1.0]);
    }

    #[test]
    fn linear_dimension_mismatch_rejected() {
        let layer = LinearLayer::new(Matrix::zeros(2, 3), vec![0.0, 0.0]).unwrap();
        assert!(layer.forward(&[1.0, 2.0]).is_err());
        assert!(layer.forward_batch(&Matrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn linear_batch_matches_single_calls() {
        let mut rng = DetRng::new(8);
        let layer = LinearLayer::init(&mut rng, 4, 3, 2.0);
        let x = Matrix::from_fn(5, 3, |_, _| rng.normal());
        let batch = layer.forward_batch(&x).unwrap();
        for i in 0..5 {
            assert_eq!(batch.row(i), layer.forward(x.row(i)).unwrap().as_slice());
        }
    }

    #[test]
    fn linear_backward_matches_finite_differences() {
        let mut rng = DetRng::new(21);
        let layer = LinearLayer::init(&mut rng, 3, 4, 2.0);
        let x = Matrix::from_fn(6, 4, |_, _| rng.normal());
        let y_true: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![rng.normal(), rng.normal(), rng.normal()])
            .collect();

        // Loss: sum of per-row Huber between fixed targets and the layer
        // output. Flatten params as [w row-major..., b...].
        let n_w = 3 * 4;
        let theta: Vec<f64> = layer.w.data().iter().chain(&layer.b).copied().collect();
        let loss = |th: &[f64]| -> f64 {
            let w = Matrix::from_fn(3, 4, |i, j| th[i * 4 + j]);
            let l = LinearLayer::new(w, th[n_w..].to_vec()).unwrap();
            let out = l.forward_batch(&x).unwrap();
            (0..6)
                .map(|i| huber(&y_true[i], out.row(i), 1.0).unwrap())
                .sum()
        };

        let out = layer.forward_batch(&x).unwrap();
        let mut d_out = Matrix::zeros(6, 3);
        for i in 0..6 {
            let g = huber_grad(&y_true[i], out.row(i), 1.0).unwrap();
            d_out.row_mut(i).copy_from_slice(&g);
        }
        let grads = layer.backward(&x, &d_out);
        let analytic: Vec<f64> = grads.dw.data().iter().chain(&grads.db).copied().collect();
        let probes: Vec<usize> = (0..theta.len()).collect();
        let err = grad_check(loss, &analytic, &theta, &probes, 1e-5);
        assert!(err < 1e-6, "linear+huber gradcheck failed: {err}");
    }

    #[test]
    fn relu_and_tanh_examples() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(tanh_act(&[0.0]), vec![0.0]);
        let out = tanh_act(&[-10.0, -0.3, 0.7, 10.0]);
        assert!(out.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn relu_mask_matches_positivity() {
        let x = Matrix::from_rows(&[vec![-2.0, 0.0, 3.0]]).unwrap();
        let (y, mask) = relu_batch(&x);
        assert_eq!(y.row(0), &[0.0, 0.0, 3.0]);
        assert_eq!(mask.row(0), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn batchnorm_two_sample_hand_value() {
        let state = BatchNormState::new(1);
        let x = Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        let (out, _) = state.forward_cached(&x, Mode::Train).unwrap();
        // mean 2, biased var 1, eps 1e-5: (x-2)/sqrt(1.00001).
        let expected = 0.9999950000374997;
        assert!(
            (out.get(0, 0) + expected).abs() < 1e-12,
            "{}",
            out.get(0, 0)
        );
        assert!(
            (out.get(1, 0) - expected).abs() < 1e-12,
            "{}",
            out.get(1, 0)
        );
    }

    #[test]
    fn batchnorm_zero_gain_yields_shift() {
        let mut state = BatchNormState::new(2);
        state.gain = vec![0.0, 0.0];
        state.shift = vec![5.0, -3.0];
        let x = Matrix::from_fn(4, 2, |i, j| (i * 2 + j) as f64);
        for mode in [Mode::Train, Mode::Infer] {
            let (out, _) = state.forward_cached(&x, mode).unwrap();
            for i in 0..4 {
                assert_eq!(out.row(i), &[5.0, -3.0]);
            }
        }
    }

    #[test]
    fn batchnorm_train_needs_two_samples() {
        let state = BatchNormState::new(1);
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(state.forward_cached(&x, Mode::Train).is_err());
        assert!(state.forward_cached(&x, Mode::Infer).is_ok());
    }

    #[test]
    fn batchnorm_infer_is_affine_in_input() {
        let mut state = BatchNormState::new(1);
        state.running_mean = vec![2.0];
        state.running_var = vec![4.0];
        let f = |v: f64| {
            let x = Matrix::from_rows(&[vec![v]]).unwrap();
            state.forward_cached(&x, Mode::Infer).unwrap().0.get(0, 0)
        };
        // Affine: f(a+b) - f(a) is linear in b.
        let slope = f(3.0) - f(2.0);
        assert!((f(10.0) - f(0.0) - 10.0 * slope).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_running_stats_follow_momentum() {
        let mut state = BatchNormState::new(1);
        let x = Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        batchnorm_forward(&mut state, &x, Mode::Train).unwrap();
        // rm = 0.9*0 + 0.1*2; rv = 0.9*1 + 0.1*1 (biased batch var is 1).
        assert!((state.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((state.running_var[0] - 1.0).abs() < 1e-15);
        batchnorm_forward(&mut state, &x, Mode::Train).unwrap();
        assert!((state.running_mean[0] - (0.9 * 0.2 + 0.1 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn batchnorm_infer_does_not_touch_stats() {
        let mut state = BatchNormState::new(1);
        let before = state.clone();
        let x = Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        batchnorm_forward(&mut state, &x, Mode::Infer).unwrap();
        assert_eq!(state, before);
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut rng = DetRng::new(33);
        let n = 5;
        let c = 3;
        let x = Matrix::from_fn(n, c, |_, _| rng.normal_scaled(2.0));
        let coeff = Matrix::from_fn(n, c, |_, _| rng.normal());
        let mut state = BatchNormState::new(c);
        state.gain = vec![1.3, 0.7, -0.4];
        state.shift = vec![0.2, -0.1, 0.5];
        state.running_mean = vec![0.3, -0.2, 0.1];
        state.running_var = vec![1.5, 0.8, 2.0];

        for mode in [Mode::Train, Mode::Infer] {
            // Loss = Σ coeff ⊙ BN(x); θ = [gain, shift, x row-major].
            let theta: Vec<f64> = state
                .gain
                .iter()
                .chain(&state.shift)
                .chain(x.data())
                .copied()
                .collect();
            let base = state.clone();
            let loss = |th: &[f64]| -> f64 {
                let mut s = base.clone();
                s.gain = th[..c].to_vec();
                s.shift = th[c..2 * c].to_vec();
                let xm = Matrix::from_fn(n, c, |i, j| th[2 * c + i * c + j]);
                let (out, _) = s.forward_cached(&xm, mode).unwrap();
                out.data()
                    .iter()
                    .zip(coeff.data())
                    .map(|(o, w)| o * w)
                    .sum()
            };
            let (_, cache) = state.forward_cached(&x, mode).unwrap();
            let grads = state.backward(&cache, &coeff);
            let analytic: Vec<f64> = grads
                .dgain
                .iter()
                .chain(&grads.dshift)
                .chain(grads.dx.data())
                .copied()
                .collect();
            let probes: Vec<usize> = (0..theta.len()).collect();
            let err = grad_check(loss, &analytic, &theta, &probes, 1e-5);
            assert!(err < 1e-7, "bn gradcheck failed in {mode:?}: {err}");
        }
    }

    #[test]
    fn dropout_rate_zero_is_identity_and_consumes_no_rng() {
        let spec = DropoutSpec::new(0.0).unwrap();
        let mut rng = DetRng::new(4);
        let before = DetRng::new(4).next_u64();
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(dropout_forward(spec, &x, Mode::Train, &mut rng), x);
        assert_eq!(rng.next_u64(), before);
    }

    #[test]
    fn dropout_infer_is_identity_at_any_rate() {
        let spec = DropoutSpec::new(0.7).unwrap();
        let mut rng = DetRng::new(4);
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(dropout_forward(spec, &x, Mode::Infer, &mut rng), x);
    }

    #[test]
    fn dropout_preserves_expectation() {
        let spec = DropoutSpec::new(0.5).unwrap();
        let mut rng = DetRng::new(11);
        let n = 100_000;
        let mask = dropout_mask(spec, 1, n, &mut rng);
        let mean = mask.row(0).iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "dropout mean {mean}");
        let keep = 1.0 / (1.0 - spec.rate);
        assert!(mask.row(0).iter().all(|&v| v == 0.0 || v == keep));
    }

    #[test]
    fn dropout_rejects_bad_rates() {
        assert!(DropoutSpec::new(1.0).is_err());
        assert!(DropoutSpec::new(-0.1).is_err());
        assert!(DropoutSpec::new(0.999).is_ok());
    }

    #[test]
    fn huber_branch_values() {
        assert!((huber(&[0.5], &[0.0], 1.0).unwrap() - 0.125).abs() < 1e-15);
        assert!((huber(&[2.0], &[0.0], 1.0).unwrap() - 1.5).abs() < 1e-15);
        // Sum over components.
        let both = huber(&[0.5, 2.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((both - 1.625).abs() < 1e-15);
    }

    #[test]
    fn huber_branches_agree_at_boundary() {
        let delta = 1.0f64;
        // Value continuity: both branch formulas at |r| = δ give ½δ².
        let quad = 0.5 * delta * delta;
        let lin = delta * delta - 0.5 * delta * delta;
        assert!((quad - lin).abs() < 1e-12);
        assert!((huber(&[delta], &[0.0], delta).unwrap() - quad).abs() < 1e-12);
        // Derivative continuity at the boundary from both sides.
        let below = huber_grad(&[delta - 1e-13], &[0.0], delta).unwrap()[0];
        let above = huber_grad(&[delta + 1e-13], &[0.0], delta).unwrap()[0];
        assert!((below - above).abs() < 1e-12);
        assert!((below + delta).abs() < 1e-12);
    }

    #[test]
    fn huber_rejects_bad_inputs() {
        assert!(huber(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(huber(&[1.0], &[1.0], 0.0).is_err());
        assert!(huber_grad(&[1.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn adam_first_step_has_lr_magnitude() {
        let mut params = vec![1.0, -2.0, 0.5];
        let grads = vec![3.0, -0.2, 1e-4];
        let mut state = AdamState::new(3, 1e-3);
        let before = params.clone();
        adam_step(&mut params, &grads, &mut state).unwrap();
        for i in 0..3 {
            let step = params[i] - before[i];
            // First step: -lr * g/(|g| + eps), magnitude ≈ lr, direction -sign(g).
            let expected = -state.lr * grads[i] / (grads[i].abs() + state.eps);
            assert!((step - expected).abs() < 1e-12, "component {i}: {step}");
            assert!((step.abs() - state.lr).abs() < state.lr * 1e-3);
        }
    }

    #[test]
    fn adam_zero_gradient_is_a_noop() {
        let mut params = vec![1.0, -2.0];
        let mut state = AdamState::new(2, 1e-3);
        adam_step(&mut params, &[0.0, 0.0], &mut state).unwrap();
        assert_eq!(params, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut params = vec![0.3, 0.9];
            let mut state = AdamState::new(2, 1e-2);
            for _ in 0..10 {
                let g: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
                adam_step(&mut params, &g, &mut state).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut params = vec![1.0];
        let mut state = AdamState::new(2, 1e-3);
        assert!(adam_step(&mut params, &[1.0], &mut state).is_err());
    }

    #[test]
    fn grad_check_constant_loss_is_zero() {
        let theta = vec![1.0, 2.0];
        let analytic = vec![0.0, 0.0];
        let err = grad_check(|_| 5.0, &analytic, &theta, &[0, 1], 1e-5);
        assert_eq!(err, 0.0);
    }

    #[test]
    fn grad_check_flags_wrong_gradients() {
        let theta = vec![2.0];
        // f = θ², true gradient 4; claim 1.
        let err = grad_check(|t| t[0] * t[0], &[1.0], &theta, &[0], 1e-5);
        assert!(err > 0.5);
    }
}
