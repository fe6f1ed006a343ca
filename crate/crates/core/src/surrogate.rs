//! MLP robustness surrogate: predicts cage status and escape energy (or
//! clearance) from a tool/object configuration pair, plus the unified
//! planner-facing scores.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::geometry::Pose2;
use crate::rng::{stream_rng, streams};
use crate::scene::ObjectConfig;

pub const HIDDEN: [usize; 3] = [128, 128, 64];
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Mee,
    Pcc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnifiedParams {
    pub q_thres: f64,
    #[serde(rename = "Q_max")]
    pub q_max: f64,
    pub q_thres_pcc: f64,
    #[serde(rename = "Q_max_pcc")]
    pub q_max_pcc: f64,
}

impl Default for UnifiedParams {
    fn default() -> Self {
        UnifiedParams { q_thres: 0.5, q_max: 1.0, q_thres_pcc: 0.5, q_max_pcc: 1.0 }
    }
}

impl UnifiedParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.q_thres) || !unit(self.q_thres_pcc) || !(self.q_max > 0.0) || !(self.q_max_pcc > 0.0) {
            return Err(Error::InvalidArgument("unified params: thresholds in [0,1], maxima > 0".into()));
        }
        Ok(())
    }
}

/// Escape-energy score: the classifier splices in `Q_max` for cages.
pub fn unified_mee_score(q_hat: f64, q_mee_hat: f64, p: &UnifiedParams) -> f64 {
    if q_hat >= p.q_thres {
        p.q_max
    } else {
        q_mee_hat
    }
}

/// Clearance score: zero unless partially caged.
pub fn unified_pcc_score(q_hat: f64, q_pcc_hat: f64, p: &UnifiedParams) -> f64 {
    if q_hat >= p.q_thres_pcc {
        p.q_max_pcc + q_pcc_hat
    } else {
        0.0
    }
}

/// Network input: object pose in the tool frame (angle as sin/cos, joint
/// angle if any) followed by the tool's world pose.
pub fn features(s_obj: &ObjectConfig, s_tool: &Pose2) -> Vec<f64> {
    let rel = s_tool.inverse().compose(&s_obj.pose);
    let mut f = vec![rel.x, rel.y, rel.theta.sin(), rel.theta.cos()];
    if let Some(a) = s_obj.alpha {
        f.push(a);
    }
    f.extend([s_tool.x, s_tool.y, s_tool.theta.sin(), s_tool.theta.cos()]);
    f
}

#[derive(Debug, Clone, PartialEq)]
struct Linear {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct BatchNorm {
    gamma: DVector<f64>,
    beta: DVector<f64>,
    running_mean: DVector<f64>,
    running_var: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LinearFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BatchNormFile {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    metric_kind: MetricKind,
    widths: Vec<usize>,
    layers: Vec<LinearFile>,
    batch_norm: Vec<BatchNormFile>,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    target_scale: f64,
    unified: UnifiedParams,
    scene_hash: String,
    tool_id: usize,
}

/// Fully connected network `[in, 128, 128, 64, 2]` with batch norm and ReLU
/// on the hidden layers. Output 0 is the cage logit, output 1 the scaled
/// regression value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct MlpModel {
    pub metric_kind: MetricKind,
    layers: Vec<Linear>,
    bn: Vec<BatchNorm>,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    /// Regression targets are divided by this before training.
    pub target_scale: f64,
    pub unified: UnifiedParams,
    pub scene_hash: String,
    pub tool_id: usize,
}

impl TryFrom<ModelFile> for MlpModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        let bad = |m: &str| Error::Model(m.to_string());
        if f.widths.len() != HIDDEN.len() + 2
            || f.layers.len() != HIDDEN.len() + 1
            || f.batch_norm.len() != HIDDEN.len()
        {
            return Err(bad("unexpected layer count"));
        }
        let mut layers = Vec::new();
        for (i, l) in f.layers.iter().enumerate() {
            let (rows, cols) = (f.widths[i + 1], f.widths[i]);
            if l.weights.len() != rows || l.weights.iter().any(|r| r.len() != cols) || l.bias.len() != rows {
                return Err(bad("layer shape does not match widths"));
            }
            let w = DMatrix::from_fn(rows, cols, |r, c| l.weights[r][c]);
            layers.push(Linear { w, b: DVector::from_vec(l.bias.clone()) });
        }
        let mut bn = Vec::new();
        for (i, b) in f.batch_norm.iter().enumerate() {
            let n = f.widths[i + 1];
            if [&b.gamma, &b.beta, &b.running_mean, &b.running_var].iter().any(|v| v.len() != n) {
                return Err(bad("batch-norm shape does not match widths"));
            }
            if b.running_var.iter().any(|v| !(*v > 0.0)) {
                return Err(bad("running variances must be > 0"));
            }
            bn.push(BatchNorm {
                gamma: DVector::from_vec(b.gamma.clone()),
                beta: DVector::from_vec(b.beta.clone()),
                running_mean: DVector::from_vec(b.running_mean.clone()),
                running_var: DVector::from_vec(b.running_var.clone()),
            });
        }
        if f.input_mean.len() != f.widths[0] || f.input_std.len() != f.widths[0] {
            return Err(bad("normalization length does not match input width"));
        }
        let m = MlpModel {
            metric_kind: f.metric_kind,
            layers,
            bn,
            input_mean: f.input_mean,
            input_std: f.input_std,
            target_scale: f.target_scale,
            unified: f.unified,
            scene_hash: f.scene_hash,
            tool_id: f.tool_id,
        };
        if m.flat_params().iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(m)
    }
}

impl From<MlpModel> for ModelFile {
    fn from(m: MlpModel) -> Self {
        let mut widths = vec![m.input_dim()];
        widths.extend(m.layers.iter().map(|l| l.w.nrows()));
        ModelFile {
            metric_kind: m.metric_kind,
            widths,
            layers: m
                .layers
                .iter()
                .map(|l| LinearFile {
                    weights: (0..l.w.nrows()).map(|r| l.w.row(r).iter().copied().collect()).collect(),
                    bias: l.b.iter().copied().collect(),
                })
                .collect(),
            batch_norm: m
                .bn
                .iter()
                .map(|b| BatchNormFile {
                    gamma: b.gamma.iter().copied().collect(),
                    beta: b.beta.iter().copied().collect(),
                    running_mean: b.running_mean.iter().copied().collect(),
                    running_var: b.running_var.iter().copied().collect(),
                })
                .collect(),
            input_mean: m.input_mean,
            input_std: m.input_std,
            target_scale: m.target_scale,
            unified: m.unified,
            scene_hash: m.scene_hash,
            tool_id: m.tool_id,
        }
    }
}

/// Intermediate values of a training-mode forward pass.
struct Cache {
    inputs: Vec<DMatrix<f64>>,
    xhat: Vec<DMatrix<f64>>,
    inv_std: Vec<DVector<f64>>,
    pre_relu: Vec<DMatrix<f64>>,
    out: DMatrix<f64>,
}

/// A normalized training batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: DMatrix<f64>,
    /// Cage label (0 or 1).
    pub q: Vec<f64>,
    /// Scaled regression target, meaningful where `mask` is 1.
    pub r: Vec<f64>,
    pub mask: Vec<f64>,
}

fn add_bias(z: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut row in z.row_iter_mut() {
        for (v, bb) in row.iter_mut().zip(b.iter()) {
            *v += bb;
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn smooth_l1(d: f64) -> (f64, f64) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

impl MlpModel {
    /// Fresh network with He-initialized hidden layers and a zero output
    /// layer (so an untrained model predicts q = 0.5, Q = 0).
    pub fn new(input_dim: usize, metric_kind: MetricKind, seed: u64) -> Self {
        let mut rng = stream_rng(seed, streams::INIT, 0);
        let mut widths = vec![input_dim];
        widths.extend(HIDDEN);
        widths.push(2);
        let mut layers = Vec::new();
        for i in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[i], widths[i + 1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let last = i == widths.len() - 2;
            let w =
                DMatrix::from_fn(
                    fan_out,
                    fan_in,
                    |_, _| {
                        if last {
                            0.0
                        } else {
                            std * rng.sample::<f64, _>(StandardNormal)
                        }
                    },
                );
            layers.push(Linear { w, b: DVector::zeros(fan_out) });
        }
        let bn = HIDDEN
            .iter()
            .map(|&n| BatchNorm {
                gamma: DVector::from_element(n, 1.0),
                beta: DVector::zeros(n),
                running_mean: DVector::zeros(n),
                running_var: DVector::from_element(n, 1.0),
            })
            .collect();
        MlpModel {
            metric_kind,
            layers,
            bn,
            input_mean: vec![0.0; input_dim],
            input_std: vec![1.0; input_dim],
            target_scale: 1.0,
            unified: UnifiedParams::default(),
            scene_hash: String::new(),
            tool_id: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    fn normalize(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(self.input_mean.iter().zip(&self.input_std)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    /// Eval-mode forward on normalized rows; returns (logit, scaled value).
    fn eval_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &a * layer.w.transpose();
            add_bias(&mut z, &layer.b);
            if l < self.bn.len() {
                let bn = &self.bn[l];
                for (j, mut col) in z.column_iter_mut().enumerate() {
                    let s = bn.gamma[j] / (bn.running_var[j] + BN_EPS).sqrt();
                    for v in col.iter_mut() {
                        *v = ((*v - bn.running_mean[j]) * s + bn.beta[j]).max(0.0);
                    }
                }
            }
            a = z;
        }
        a
    }

    /// Predicted cage probability and metric value (in label units).
    pub fn forward(&self, s_obj: &ObjectConfig, s_tool: &Pose2) -> Result<(f64, f64)> {
        Ok(self.forward_batch(&[(*s_obj, *s_tool)])?[0])
    }

    pub fn forward_batch(&self, pairs: &[(ObjectConfig, Pose2)]) -> Result<Vec<(f64, f64)>> {
        let d = self.input_dim();
        let mut rows = Vec::with_capacity(pairs.len() * d);
        for (o, t) in pairs {
            let f = features(o, t);
            if f.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: f.len() });
            }
            let n = self.normalize(&f);
            if n.iter().any(|v| v.abs() > 10.0) {
                log::debug!("surrogate input beyond 10 std of training data");
            }
            rows.extend(n);
        }
        let x = DMatrix::from_row_slice(pairs.len(), d, &rows);
        let out = self.eval_rows(&x);
        Ok((0..pairs.len()).map(|i| (sigmoid(out[(i, 0)]), out[(i, 1)] * self.target_scale)).collect())
    }

    fn check_kind(&self, k: MetricKind) -> Result<()> {
        if self.metric_kind != k {
            return Err(Error::Model(format!("model predicts {:?}, not {k:?}", self.metric_kind)));
        }
        Ok(())
    }

    pub fn unified_mee(&self, p: &UnifiedParams, s_obj: &ObjectConfig, s_tool: &Pose2) -> Result<f64> {
        self.check_kind(MetricKind::Mee)?;
        let (q, v) = self.forward(s_obj, s_tool)?;
        Ok(unified_mee_score(q, v, p))
    }

    pub fn unified_pcc(&self, p: &UnifiedParams, s_obj: &ObjectConfig, s_tool: &Pose2) -> Result<f64> {
        self.check_kind(MetricKind::Pcc)?;
        let (q, v) = self.forward(s_obj, s_tool)?;
        Ok(unified_pcc_score(q, v, p))
    }

    /// Unified score for the model's own metric with its stored parameters.
    pub fn unified_batch(&self, pairs: &[(ObjectConfig, Pose2)]) -> Result<Vec<f64>> {
        let p = &self.unified;
        Ok(self
            .forward_batch(pairs)?
            .into_iter()
            .map(|(q, v)| match self.metric_kind {
                MetricKind::Mee => unified_mee_score(q, v, p),
                MetricKind::Pcc => unified_pcc_score(q, v, p),
            })
            .collect())
    }

    fn forward_train(&self, x: &DMatrix<f64>) -> Cache {
        let n = x.nrows() as f64;
        let mut cache = Cache {
            inputs: Vec::new(),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            pre_relu: Vec::new(),
            out: DMatrix::zeros(0, 0),
        };
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &a * layer.w.transpose();
            add_bias(&mut z, &layer.b);
            cache.inputs.push(a);
            if l == self.bn.len() {
                cache.out = z;
                break;
            }
            let bn = &self.bn[l];
            let mut xhat = z.clone();
            let mut inv = DVector::zeros(z.ncols());
            for j in 0..z.ncols() {
                let col = z.column(j);
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                inv[j] = 1.0 / (var + BN_EPS).sqrt();
                for i in 0..z.nrows() {
                    xhat[(i, j)] = (z[(i, j)] - mean) * inv[j];
                }
            }
            let mut y = xhat.clone();
            for j in 0..y.ncols() {
                for i in 0..y.nrows() {
                    y[(i, j)] = bn.gamma[j] * y[(i, j)] + bn.beta[j];
                }
            }
            a = y.map(|v| v.max(0.0));
            cache.xhat.push(xhat);
            cache.inv_std.push(inv);
            cache.pre_relu.push(y);
        }
        cache
    }

    fn update_running_stats(&mut self, x: &DMatrix<f64>) {
        let n = x.nrows() as f64;
        let mut a = x.clone();
        for l in 0..self.bn.len() {
            let mut z = &a * self.layers[l].w.transpose();
            add_bias(&mut z, &self.layers[l].b);
            let bn = &mut self.bn[l];
            let mut y = z.clone();
            for j in 0..z.ncols() {
                let col = z.column(j);
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let unbiased = if n > 1.0 { var * n / (n - 1.0) } else { var };
                bn.running_mean[j] = (1.0 - BN_MOMENTUM) * bn.running_mean[j] + BN_MOMENTUM * mean;
                bn.running_var[j] = (1.0 - BN_MOMENTUM) * bn.running_var[j] + BN_MOMENTUM * unbiased;
                let inv = 1.0 / (var + BN_EPS).sqrt();
                for i in 0..z.nrows() {
                    y[(i, j)] = (bn.gamma[j] * (z[(i, j)] - mean) * inv + bn.beta[j]).max(0.0);
                }
            }
            a = y;
        }
    }

    fn loss_terms(out: &DMatrix<f64>, b: &Batch, lambda: f64) -> (f64, DMatrix<f64>) {
        let n = out.nrows();
        let n_reg: f64 = b.mask.iter().sum();
        let mut d = DMatrix::zeros(n, 2);
        let mut loss = 0.0;
        for i in 0..n {
            let z = out[(i, 0)];
            // log(1 + e^z) - q z, evaluated stably
            loss += (z.max(0.0) + (-z.abs()).exp().ln_1p() - b.q[i] * z) / n as f64;
            d[(i, 0)] = (sigmoid(z) - b.q[i]) / n as f64;
            if b.mask[i] > 0.0 && n_reg > 0.0 {
                let (l, g) = smooth_l1(out[(i, 1)] - b.r[i]);
                loss += lambda * l / n_reg;
                d[(i, 1)] = lambda * g / n_reg;
            }
        }
        (loss, d)
    }

    /// Training-mode loss (batch statistics), without touching running stats.
    pub fn loss(&self, b: &Batch, lambda: f64) -> f64 {
        Self::loss_terms(&self.forward_train(&b.x).out, b, lambda).0
    }

    /// Training-mode loss and its exact gradient, in `flat_params` order.
    pub fn loss_and_grad(&self, b: &Batch, lambda: f64) -> (f64, Vec<f64>) {
        let cache = self.forward_train(&b.x);
        let (loss, mut dz) = Self::loss_terms(&cache.out, b, lambda);
        let nl = self.layers.len();
        let mut gw: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nl];
        let mut gb: Vec<DVector<f64>> = vec![DVector::zeros(0); nl];
        let mut ggamma: Vec<DVector<f64>> = vec![DVector::zeros(0); self.bn.len()];
        let mut gbeta: Vec<DVector<f64>> = vec![DVector::zeros(0); self.bn.len()];
        let n = b.x.nrows() as f64;
        for l in (0..nl).rev() {
            gw[l] = dz.transpose() * &cache.inputs[l];
            gb[l] = DVector::from_iterator(dz.ncols(), dz.column_iter().map(|c| c.sum()));
            if l == 0 {
                break;
            }
            // back through the previous hidden block: ReLU, then batch norm
            let da = &dz * &self.layers[l].w;
            let h = l - 1;
            let (y, xhat, inv) = (&cache.pre_relu[h], &cache.xhat[h], &cache.inv_std[h]);
            let gamma = &self.bn[h].gamma;
            let mut dy = da;
            for j in 0..dy.ncols() {
                for i in 0..dy.nrows() {
                    if y[(i, j)] <= 0.0 {
                        dy[(i, j)] = 0.0;
                    }
                }
            }
            let mut dg = DVector::zeros(dy.ncols());
            let mut dbt = DVector::zeros(dy.ncols());
            let mut dprev = DMatrix::zeros(dy.nrows(), dy.ncols());
            for j in 0..dy.ncols() {
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for i in 0..dy.nrows() {
                    dg[j] += dy[(i, j)] * xhat[(i, j)];
                    dbt[j] += dy[(i, j)];
                    let dx = dy[(i, j)] * gamma[j];
                    s1 += dx;
                    s2 += dx * xhat[(i, j)];
                }
                for i in 0..dy.nrows() {
                    let dx = dy[(i, j)] * gamma[j];
                    dprev[(i, j)] = inv[j] / n * (n * dx - s1 - xhat[(i, j)] * s2);
                }
            }
            ggamma[h] = dg;
            gbeta[h] = dbt;
            dz = dprev;
        }
        let mut g = Vec::with_capacity(self.param_count());
        for l in 0..nl {
            g.extend(gw[l].transpose().iter());
            g.extend(gb[l].iter());
        }
        for h in 0..self.bn.len() {
            g.extend(ggamma[h].iter());
            g.extend(gbeta[h].iter());
        }
        (loss, g)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum::<usize>()
            + self.bn.iter().map(|b| 2 * b.gamma.len()).sum::<usize>()
    }

    /// Trainable parameters: each layer's weights (row-major) and bias, then
    /// each batch norm's scale and shift.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend(l.w.transpose().iter());
            p.extend(l.b.iter());
        }
        for b in &self.bn {
            p.extend(b.gamma.iter());
            p.extend(b.beta.iter());
        }
        p
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut k = 0;
        let mut take = |n: usize| {
            let s = &p[k..k + n];
            k += n;
            s
        };
        for l in &mut self.layers {
            let (r, c) = l.w.shape();
            l.w = DMatrix::from_row_slice(r, c, take(r * c));
            l.b = DVector::from_row_slice(take(r));
        }
        for b in &mut self.bn {
            let n = b.gamma.len();
            b.gamma = DVector::from_row_slice(take(n));
            b.beta = DVector::from_row_slice(take(n));
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<MlpModel> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Weight of the masked regression loss.
    pub lambda: f64,
    /// Fraction of samples held out for evaluation.
    pub holdout: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { lr: 1e-3, epochs: 200, batch: 64, seed: 0, lambda: 1.0, holdout: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub accuracy: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub median_abs_error: f64,
    pub label_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub holdout: EvalMetrics,
    pub degenerate_auc: bool,
}

/// Classification label and regression target of a sample for `kind`.
pub fn targets(s: &Sample, kind: MetricKind) -> (bool, Option<f64>) {
    match kind {
        MetricKind::Mee => (s.q_c, s.q_mee),
        MetricKind::Pcc => (s.q_pc, s.q_pcc),
    }
}

fn make_batch(model: &MlpModel, samples: &[&Sample]) -> Batch {
    let d = model.input_dim();
    let mut rows = Vec::with_capacity(samples.len() * d);
    let (mut q, mut r, mut mask) = (Vec::new(), Vec::new(), Vec::new());
    for s in samples {
        rows.extend(model.normalize(&features(&s.s_obj, &s.s_tool)));
        let (c, v) = targets(s, model.metric_kind);
        q.push(if c { 1.0 } else { 0.0 });
        // MEE is regressed where the object is not caged, PCC where it is
        // partially caged: exactly where the label is defined
        r.push(v.unwrap_or(0.0) / model.target_scale);
        mask.push(if v.is_some() { 1.0 } else { 0.0 });
    }
    Batch { x: DMatrix::from_row_slice(samples.len(), d, &rows), q, r, mask }
}

fn auc(scores: &[(f64, bool)]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Classification accuracy, AUC and regression error on labeled samples.
pub fn evaluate(model: &MlpModel, samples: &[Sample]) -> Result<EvalMetrics> {
    let pairs: Vec<(ObjectConfig, Pose2)> = samples.iter().map(|s| (s.s_obj, s.s_tool)).collect();
    let pred = if pairs.is_empty() { vec![] } else { model.forward_batch(&pairs)? };
    let mut correct = 0;
    let mut scores = Vec::new();
    let mut errs = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (s, (qh, vh)) in samples.iter().zip(&pred) {
        let (c, v) = targets(s, model.metric_kind);
        if (*qh >= 0.5) == c {
            correct += 1;
        }
        scores.push((*qh, c));
        if let Some(v) = v {
            errs.push((vh - v).abs());
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok(EvalMetrics {
        n: samples.len(),
        accuracy: if samples.is_empty() { 0.0 } else { correct as f64 / samples.len() as f64 },
        auc: auc(&scores),
        median_abs_error: median(errs),
        label_range: if hi >= lo { hi - lo } else { 0.0 },
    })
}

/// Splits sample indices into (train, held-out) by seed.
pub fn split(n: usize, holdout: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, streams::SPLIT, 0));
    let k = ((n as f64) * holdout).round() as usize;
    let test = idx[..k].to_vec();
    let mut train = idx[k..].to_vec();
    train.sort_unstable();
    (train, test)
}

/// Trains a fresh model on `data` with Adam.
pub fn train(data: &Dataset, kind: MetricKind, hp: &TrainParams) -> Result<(MlpModel, TrainReport)> {
    let n = data.samples.len();
    if n < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {n}")));
    }
    if !(hp.lr > 0.0) || hp.batch < 2 || hp.epochs == 0 || !(0.0..1.0).contains(&hp.holdout) {
        return Err(Error::InvalidArgument("train: lr > 0, batch >= 2, epochs >= 1, holdout in [0,1)".into()));
    }
    let (tr, te) = split(n, hp.holdout, hp.seed);
    let train_s: Vec<&Sample> = tr.iter().map(|&i| &data.samples[i]).collect();
    let test_s: Vec<Sample> = te.iter().map(|&i| data.samples[i].clone()).collect();

    let feats: Vec<Vec<f64>> = train_s.iter().map(|s| features(&s.s_obj, &s.s_tool)).collect();
    let d = feats[0].len();
    let mut model = MlpModel::new(d, kind, hp.seed);
    model.scene_hash = data.header.scene_hash.clone();
    model.tool_id = data.header.tool_id;
    for j in 0..d {
        let m = feats.iter().map(|f| f[j]).sum::<f64>() / feats.len() as f64;
        let v = feats.iter().map(|f| (f[j] - m).powi(2)).sum::<f64>() / feats.len() as f64;
        model.input_mean[j] = m;
        model.input_std[j] = if v.sqrt() > 1e-9 { v.sqrt() } else { 1.0 };
    }
    let labels: Vec<f64> = train_s.iter().filter_map(|s| targets(s, kind).1).collect();
    let max_abs = labels.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    model.target_scale = if max_abs > 0.0 { max_abs } else { 1.0 };
    model.unified = match kind {
        MetricKind::Mee => {
            UnifiedParams { q_max: if max_abs > 0.0 { 2.0 * max_abs } else { 1.0 }, ..Default::default() }
        }
        MetricKind::Pcc => UnifiedParams { q_max_pcc: if max_abs > 0.0 { max_abs } else { 1.0 }, ..Default::default() },
    };
    let classes: Vec<bool> = train_s.iter().map(|s| targets(s, kind).0).collect();
    let degenerate = classes.iter().all(|c| *c) || classes.iter().all(|c| !*c);
    if degenerate {
        log::warn!("training data has a single cage class; AUC is undefined");
    }

    let mut rng = stream_rng(hp.seed, streams::TRAIN, 0);
    let np = model.param_count();
    let (mut m1, mut m2) = (vec![0.0; np], vec![0.0; np]);
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..train_s.len()).collect();
    let mut epoch_loss = Vec::with_capacity(hp.epochs);
    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for chunk in order.chunks(hp.batch) {
            if chunk.len() < 2 {
                continue;
            }
            let items: Vec<&Sample> = chunk.iter().map(|&i| train_s[i]).collect();
            let b = make_batch(&model, &items);
            let (loss, g) = model.loss_and_grad(&b, hp.lambda);
            model.update_running_stats(&b.x);
            t += 1;
            let mut p = model.flat_params();
            let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
            for k in 0..np {
                m1[k] = b1 * m1[k] + (1.0 - b1) * g[k];
                m2[k] = b2 * m2[k] + (1.0 - b2) * g[k] * g[k];
                p[k] -= hp.lr * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
            }
            model.set_flat_params(&p);
            total += loss * chunk.len() as f64;
            count += chunk.len();
        }
        epoch_loss.push(total / count.max(1) as f64);
    }
    let holdout = evaluate(&model, &test_s)?;
    let degenerate_auc = degenerate || holdout.auc.is_none();
    Ok((model, TrainReport { epoch_loss, holdout, degenerate_auc }))
}

/// Builds a normalized batch from samples (exposed for gradient checks).
pub fn batch_for(model: &MlpModel, samples: &[Sample]) -> Batch {
    let refs: Vec<&Sample> = samples.iter().collect();
    make_batch(model, &refs)
}
