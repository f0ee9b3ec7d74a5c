//! Mini-batch SGD training of a small feed-forward encoder against the
//! loss family, with learnable class proxies.
//!
//! The encoder maps feature vectors to K-dimensional latent codes through
//! hidden layers with a configurable nonlinearity and a linear output
//! layer (latents must be able to reach +-1 exactly, so the output is not
//! squashed). Binarization is sgn with sgn(0) = +1.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::code_bounds;
use crate::datasets::FeatureDataset;
use crate::error::{HhfError, Result};
use crate::hamming::BinaryCode;
use crate::losses::{
    self, HHFParams, LatentBatch, LossResult, ProxyBank, DEFAULT_ALPHA, DEFAULT_DELTA,
    DEFAULT_GAMMA,
};
use crate::num::{matmul, matmul_backward, Activation, Matrix, Parameter};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub hash_bits: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl EncoderConfig {
    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hash_bits == 0 {
            return Err(HhfError::InvalidArgument(
                "input_dim and hash_bits must be positive".into(),
            ));
        }
        if self.hidden_dims.contains(&0) {
            return Err(HhfError::InvalidArgument(
                "hidden dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ProxyAnchor,
    ProxyNca,
    DhnPairwise,
    /// No metric term; only the quantization penalty trains the encoder.
    QuantizationOnly,
}

impl std::str::FromStr for LossKind {
    type Err = HhfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proxy_anchor" | "pa" => Ok(LossKind::ProxyAnchor),
            "proxy_nca" | "nca" => Ok(LossKind::ProxyNca),
            "dhn_pairwise" | "dhn" => Ok(LossKind::DhnPairwise),
            "quantization_only" | "quan" => Ok(LossKind::QuantizationOnly),
            other => Err(HhfError::InvalidArgument(format!(
                "unknown loss kind {other:?}"
            ))),
        }
    }
}

/// Which objective the training loop evaluates each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub hhf: bool,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Softmax temperature; only Proxy-NCA reads it.
    pub temperature: f64,
    /// 1 or 2, the quantization norm.
    pub quan_norm: u8,
    /// Explicit inflection constant. `None` lets training compute it from
    /// the hash length and class count.
    pub zeta: Option<f64>,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            kind: LossKind::ProxyAnchor,
            hhf: true,
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            delta: DEFAULT_DELTA,
            temperature: 0.25,
            quan_norm: 2,
            zeta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_proxy: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub beta: f64,
    pub loss: LossSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            lr_encoder: 0.001,
            lr_proxy: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr_decay_factor: 0.5,
            lr_decay_every: 10,
            beta: 1.0,
            loss: LossSpec::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(HhfError::InvalidArgument(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if self.lr_encoder < 0.0 || self.lr_proxy < 0.0 {
            return Err(HhfError::InvalidArgument(
                "learning rates must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(HhfError::InvalidArgument(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if self.weight_decay < 0.0 || self.beta < 0.0 {
            return Err(HhfError::InvalidArgument(
                "weight_decay and beta must be non-negative".into(),
            ));
        }
        if !(0.0 < self.lr_decay_factor && self.lr_decay_factor <= 1.0) {
            return Err(HhfError::InvalidArgument(format!(
                "lr_decay_factor {} outside (0, 1]",
                self.lr_decay_factor
            )));
        }
        if self.lr_decay_every == 0 {
            return Err(HhfError::InvalidArgument(
                "lr_decay_every must be positive".into(),
            ));
        }
        if self.loss.quan_norm != 1 && self.loss.quan_norm != 2 {
            return Err(HhfError::InvalidArgument(
                "quan_norm must be 1 or 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Parameter, // in x out
    pub bias: Parameter,   // 1 x out
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub metric: f64,
    pub quantization: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub encoder: EncoderConfig,
    pub layers: Vec<DenseLayer>,
    pub proxies: ProxyBank,
    pub epoch: usize,
    pub rng: Rng,
    pub history: Vec<EpochLoss>,
}

/// Glorot-uniform weights, zero biases, unit-normal proxies rescaled to
/// row norm sqrt(K). Bit-identical per seed.
pub fn init_state(encoder: &EncoderConfig, classes: usize) -> Result<TrainState> {
    encoder.validate()?;
    if classes == 0 {
        return Err(HhfError::InvalidArgument(
            "class count must be positive".into(),
        ));
    }
    let mut rng = Rng::seed_from_u64(encoder.seed);
    let mut dims = vec![encoder.input_dim];
    dims.extend(&encoder.hidden_dims);
    dims.push(encoder.hash_bits);

    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.uniform_symmetric(bound))
            .collect();
        layers.push(DenseLayer {
            weight: Parameter::new(Matrix::from_vec(fan_in, fan_out, data)?),
            bias: Parameter::new(Matrix::zeros(1, fan_out)),
        });
    }

    let k = encoder.hash_bits;
    let mut proxy_data = vec![0.0; classes * k];
    for v in &mut proxy_data {
        *v = rng.normal();
    }
    let mut proxy = Matrix::from_vec(classes, k, proxy_data)?;
    let target = (k as f64).sqrt();
    for r in 0..classes {
        let norm = proxy.squared_row_norm(r).sqrt();
        for v in proxy.row_mut(r) {
            *v *= target / norm;
        }
    }

    Ok(TrainState {
        encoder: encoder.clone(),
        layers,
        proxies: ProxyBank::new(proxy)?,
        epoch: 0,
        rng,
        history: Vec::new(),
    })
}

struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation output of each hidden layer.
    preacts: Vec<Matrix>,
}

fn layer_forward(layer: &DenseLayer, input: &Matrix) -> Result<Matrix> {
    let mut out = matmul(input, &layer.weight.value)?;
    for r in 0..out.rows() {
        for (o, b) in out.row_mut(r).iter_mut().zip(layer.bias.value.row(0)) {
            *o += b;
        }
    }
    Ok(out)
}

fn forward_cached(state: &TrainState, features: &Matrix) -> Result<(Matrix, ForwardCache)> {
    if features.cols() != state.encoder.input_dim {
        return Err(HhfError::ShapeMismatch {
            op: "encoder_forward",
            left_rows: features.rows(),
            left_cols: features.cols(),
            right_rows: state.encoder.input_dim,
            right_cols: state.encoder.hash_bits,
        });
    }
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(state.layers.len()),
        preacts: Vec::with_capacity(state.layers.len().saturating_sub(1)),
    };
    let mut current = features.clone();
    let last = state.layers.len() - 1;
    for (li, layer) in state.layers.iter().enumerate() {
        cache.inputs.push(current.clone());
        let pre = layer_forward(layer, &current)?;
        if li < last {
            cache.preacts.push(pre.clone());
            current = state.encoder.activation.forward(&pre);
        } else {
            current = pre;
        }
    }
    Ok((current, cache))
}

/// Latent codes for a feature batch.
pub fn forward(state: &TrainState, features: &Matrix) -> Result<Matrix> {
    Ok(forward_cached(state, features)?.0)
}

/// Backpropagates dL/dlatents into the layer gradient accumulators.
fn backward(state: &mut TrainState, cache: &ForwardCache, grad_latents: &Matrix) -> Result<()> {
    let last = state.layers.len() - 1;
    let mut upstream = grad_latents.clone();
    for li in (0..state.layers.len()).rev() {
        if li < last {
            upstream = state
                .encoder
                .activation
                .backward(&upstream, &cache.preacts[li])?;
        }
        let layer = &mut state.layers[li];
        let (grad_in, grad_w) =
            matmul_backward(&upstream, &cache.inputs[li], &layer.weight.value)?;
        layer.weight.grad.add_scaled(&grad_w, 1.0)?;
        for r in 0..upstream.rows() {
            for (g, u) in layer.bias.grad.row_mut(0).iter_mut().zip(upstream.row(r)) {
                *g += u;
            }
        }
        upstream = grad_in;
    }
    Ok(())
}

/// SGD with momentum: v = mu v + g (+ wd theta for decayed parameters),
/// theta -= lr v.
fn sgd_update(param: &mut Parameter, lr: f64, momentum: f64, weight_decay: f64) {
    for i in 0..param.value.data().len() {
        let g = param.grad.data()[i] + weight_decay * param.value.data()[i];
        let v = momentum * param.velocity.data()[i] + g;
        param.velocity.data_mut()[i] = v;
        param.value.data_mut()[i] -= lr * v;
    }
}

/// Effective learning-rate multiplier at a given epoch:
/// factor^(epoch / every) with integer division.
pub fn lr_decay_multiplier(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.lr_decay_factor.powi((epoch / cfg.lr_decay_every) as i32)
}

fn metric_loss(
    batch: &LatentBatch,
    proxies: &ProxyBank,
    spec: &LossSpec,
    params: &HHFParams,
) -> Result<LossResult> {
    match (spec.kind, spec.hhf) {
        (LossKind::ProxyAnchor, false) => losses::proxy_anchor_loss(batch, proxies, params),
        (LossKind::ProxyAnchor, true) => losses::hhf_proxy_anchor_loss(batch, proxies, params),
        (LossKind::ProxyNca, false) => {
            losses::proxy_nca_loss(batch, proxies, spec.temperature)
        }
        (LossKind::ProxyNca, true) => {
            losses::hhf_proxy_nca_loss(batch, proxies, spec.temperature, params)
        }
        (LossKind::DhnPairwise, false) => losses::dhn_pairwise_loss(batch, params),
        (LossKind::DhnPairwise, true) => losses::hhf_dhn_pairwise_loss(batch, params),
        (LossKind::QuantizationOnly, _) => Ok(LossResult {
            value: 0.0,
            grad_h: Matrix::zeros(batch.len(), batch.bits()),
            grad_p: None,
        }),
    }
}

/// Resolves the loss shape, computing zeta from the hash length and class
/// count when the spec does not pin it.
pub fn resolve_params(spec: &LossSpec, hash_bits: usize, classes: usize) -> Result<HHFParams> {
    let zeta = match spec.zeta {
        Some(z) => z,
        None if spec.hhf => code_bounds::zeta(hash_bits, classes)?,
        // Baselines never read zeta; any in-range value does.
        None => -1.0,
    };
    HHFParams::new(zeta, spec.delta, spec.alpha, spec.gamma)
}

/// Runs `cfg.epochs` further epochs of mini-batch SGD. Each epoch visits a
/// fresh random permutation of the dataset in batches. Encoder weights get
/// weight decay; biases and proxies do not. Proxies update with lr_proxy.
pub fn train(state: &mut TrainState, dataset: &FeatureDataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(HhfError::InvalidArgument("empty training set".into()));
    }
    if dataset.dim() != state.encoder.input_dim {
        return Err(HhfError::InvalidArgument(format!(
            "dataset dim {} does not match encoder input {}",
            dataset.dim(),
            state.encoder.input_dim
        )));
    }
    let params = resolve_params(&cfg.loss, state.encoder.hash_bits, state.proxies.classes())?;

    let m = dataset.len();
    for _ in 0..cfg.epochs {
        let decay = lr_decay_multiplier(cfg, state.epoch);
        let lr_enc = cfg.lr_encoder * decay;
        let lr_prox = cfg.lr_proxy * decay;

        let mut order: Vec<usize> = (0..m).collect();
        state.rng.shuffle(&mut order);

        let mut epoch_metric = 0.0;
        let mut epoch_quan = 0.0;
        let mut epoch_total = 0.0;
        let mut steps = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            let rows: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&i| dataset.features.row(i).to_vec())
                .collect();
            let labels: Vec<Vec<u32>> =
                chunk.iter().map(|&i| dataset.labels[i].clone()).collect();
            let features = Matrix::from_rows(&rows)?;

            let (latents, cache) = forward_cached(state, &features)?;
            let batch = LatentBatch::new(latents, labels)?;
            let metric = metric_loss(&batch, &state.proxies, &cfg.loss, &params)?;
            let quan = losses::quantization_loss(&batch, cfg.loss.quan_norm)?;
            let total = losses::total_loss(&metric, &quan, cfg.beta)?;
            if !total.value.is_finite() {
                return Err(HhfError::Divergence {
                    epoch: state.epoch,
                    step: steps,
                });
            }

            backward(state, &cache, &total.grad_h)?;
            for layer in &mut state.layers {
                sgd_update(&mut layer.weight, lr_enc, cfg.momentum, cfg.weight_decay);
                sgd_update(&mut layer.bias, lr_enc, cfg.momentum, 0.0);
                layer.weight.zero_grad();
                layer.bias.zero_grad();
            }
            if let Some(grad_p) = &total.grad_p {
                state.proxies.param.grad.add_scaled(grad_p, 1.0)?;
                sgd_update(&mut state.proxies.param, lr_prox, cfg.momentum, 0.0);
                state.proxies.param.zero_grad();
            }

            epoch_metric += metric.value;
            epoch_quan += quan.value;
            epoch_total += total.value;
            steps += 1;
        }

        state.history.push(EpochLoss {
            epoch: state.epoch,
            metric: epoch_metric / steps as f64,
            quantization: epoch_quan / steps as f64,
            total: epoch_total / steps as f64,
        });
        state.epoch += 1;
    }
    Ok(())
}

/// Latents and packed sign codes for a feature set.
pub fn encode_database(
    state: &TrainState,
    features: &Matrix,
) -> Result<(Matrix, Vec<BinaryCode>)> {
    let latents = forward(state, features)?;
    let codes = (0..latents.rows())
        .map(|r| BinaryCode::from_latent(latents.row(r)))
        .collect();
    Ok((latents, codes))
}

/// Writes history as `epoch,metric_loss,quan_loss,total` CSV.
pub fn write_history_csv(history: &[EpochLoss], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| HhfError::io(name.clone(), e);
    writeln!(w, "epoch,metric_loss,quan_loss,total").map_err(io_err)?;
    for h in history {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e}",
            h.epoch, h.metric, h.quantization, h.total
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"HHFK";
const CHECKPOINT_VERSION: u16 = 1;

struct BinWriter<W: Write> {
    w: W,
    name: String,
}

impl<W: Write> BinWriter<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w
            .write_all(b)
            .map_err(|e| HhfError::io(self.name.clone(), e))
    }
    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }
    fn u16(&mut self, v: u16) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn matrix(&mut self, m: &Matrix) -> Result<()> {
        self.u64(m.rows() as u64)?;
        self.u64(m.cols() as u64)?;
        for &v in m.data() {
            self.f64(v)?;
        }
        Ok(())
    }
    fn parameter(&mut self, p: &Parameter) -> Result<()> {
        self.matrix(&p.value)?;
        self.matrix(&p.velocity)
    }
}

struct BinReader<R: Read> {
    r: R,
    name: String,
}

impl<R: Read> BinReader<R> {
    fn bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        self.r
            .read_exact(buf)
            .map_err(|e| HhfError::io(self.name.clone(), e))
    }
    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.bytes(&mut b)?;
        Ok(b[0])
    }
    fn u16(&mut self) -> Result<u16> {
        let mut b = [0u8; 2];
        self.bytes(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let mut data = vec![0.0; rows * cols];
        for v in &mut data {
            *v = self.f64()?;
        }
        // Bypasses the finite check: velocities can legitimately hold any
        // value the optimizer produced, and the round trip must be exact.
        Matrix::from_vec(rows, cols, data)
    }
    fn parameter(&mut self) -> Result<Parameter> {
        let value = self.matrix()?;
        let velocity = self.matrix()?;
        let (r, c) = value.shape();
        let mut p = Parameter::new(value);
        if velocity.shape() != (r, c) {
            return Err(HhfError::Parse {
                file: self.name.clone(),
                line: 0,
                msg: "velocity shape differs from value shape".into(),
            });
        }
        p.velocity = velocity;
        Ok(p)
    }
}

/// Versioned binary checkpoint: encoder and train configs, layer
/// parameters with momentum buffers, proxies, RNG state, epoch counter,
/// and loss history. Bit-exact round trip.
pub fn save_checkpoint(
    state: &TrainState,
    cfg: &TrainConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut w = BinWriter {
        w: BufWriter::new(file),
        name,
    };
    w.bytes(CHECKPOINT_MAGIC)?;
    w.u16(CHECKPOINT_VERSION)?;

    // Encoder config.
    w.u64(state.encoder.input_dim as u64)?;
    w.u64(state.encoder.hidden_dims.len() as u64)?;
    for &d in &state.encoder.hidden_dims {
        w.u64(d as u64)?;
    }
    w.u64(state.encoder.hash_bits as u64)?;
    w.u8(match state.encoder.activation {
        Activation::Tanh => 0,
        Activation::Relu => 1,
    })?;
    w.u64(state.encoder.seed)?;

    // Train config.
    w.u64(cfg.epochs as u64)?;
    w.u64(cfg.batch_size as u64)?;
    w.f64(cfg.lr_encoder)?;
    w.f64(cfg.lr_proxy)?;
    w.f64(cfg.momentum)?;
    w.f64(cfg.weight_decay)?;
    w.f64(cfg.lr_decay_factor)?;
    w.u64(cfg.lr_decay_every as u64)?;
    w.f64(cfg.beta)?;
    w.u8(match cfg.loss.kind {
        LossKind::ProxyAnchor => 0,
        LossKind::ProxyNca => 1,
        LossKind::DhnPairwise => 2,
        LossKind::QuantizationOnly => 3,
    })?;
    w.u8(cfg.loss.hhf as u8)?;
    w.f64(cfg.loss.alpha)?;
    w.f64(cfg.loss.gamma)?;
    w.f64(cfg.loss.delta)?;
    w.f64(cfg.loss.temperature)?;
    w.u8(cfg.loss.quan_norm)?;
    match cfg.loss.zeta {
        Some(z) => {
            w.u8(1)?;
            w.f64(z)?;
        }
        None => w.u8(0)?,
    }

    // State.
    w.u64(state.epoch as u64)?;
    for word in state.rng.state() {
        w.u64(word)?;
    }
    w.u64(state.layers.len() as u64)?;
    for layer in &state.layers {
        w.parameter(&layer.weight)?;
        w.parameter(&layer.bias)?;
    }
    w.parameter(&state.proxies.param)?;
    w.u64(state.history.len() as u64)?;
    for h in &state.history {
        w.u64(h.epoch as u64)?;
        w.f64(h.metric)?;
        w.f64(h.quantization)?;
        w.f64(h.total)?;
    }
    w.w.flush().map_err(|e| HhfError::io(w.name.clone(), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(TrainState, TrainConfig)> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut r = BinReader {
        r: BufReader::new(file),
        name: name.clone(),
    };
    let parse = |msg: String| HhfError::Parse {
        file: name.clone(),
        line: 0,
        msg,
    };
    let mut magic = [0u8; 4];
    r.bytes(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(parse(format!("bad magic {magic:?}, expected HHFK")));
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(parse(format!("unsupported checkpoint version {version}")));
    }

    let input_dim = r.u64()? as usize;
    let hidden_count = r.u64()? as usize;
    let mut hidden_dims = Vec::with_capacity(hidden_count);
    for _ in 0..hidden_count {
        hidden_dims.push(r.u64()? as usize);
    }
    let hash_bits = r.u64()? as usize;
    let activation = match r.u8()? {
        0 => Activation::Tanh,
        1 => Activation::Relu,
        other => return Err(parse(format!("unknown activation tag {other}"))),
    };
    let seed = r.u64()?;
    let encoder = EncoderConfig {
        input_dim,
        hidden_dims,
        hash_bits,
        activation,
        seed,
    };

    let epochs = r.u64()? as usize;
    let batch_size = r.u64()? as usize;
    let lr_encoder = r.f64()?;
    let lr_proxy = r.f64()?;
    let momentum = r.f64()?;
    let weight_decay = r.f64()?;
    let lr_decay_factor = r.f64()?;
    let lr_decay_every = r.u64()? as usize;
    let beta = r.f64()?;
    let kind = match r.u8()? {
        0 => LossKind::ProxyAnchor,
        1 => LossKind::ProxyNca,
        2 => LossKind::DhnPairwise,
        3 => LossKind::QuantizationOnly,
        other => return Err(parse(format!("unknown loss kind tag {other}"))),
    };
    let hhf = r.u8()? != 0;
    let alpha = r.f64()?;
    let gamma = r.f64()?;
    let delta = r.f64()?;
    let temperature = r.f64()?;
    let quan_norm = r.u8()?;
    let zeta = if r.u8()? != 0 { Some(r.f64()?) } else { None };
    let cfg = TrainConfig {
        epochs,
        batch_size,
        lr_encoder,
        lr_proxy,
        momentum,
        weight_decay,
        lr_decay_factor,
        lr_decay_every,
        beta,
        loss: LossSpec {
            kind,
            hhf,
            alpha,
            gamma,
            delta,
            temperature,
            quan_norm,
            zeta,
        },
    };

    let epoch = r.u64()? as usize;
    let rng_state = [r.u64()?, r.u64()?, r.u64()?, r.u64()?];
    let layer_count = r.u64()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let weight = r.parameter()?;
        let bias = r.parameter()?;
        layers.push(DenseLayer { weight, bias });
    }
    let proxies = ProxyBank {
        param: r.parameter()?,
    };
    let history_len = r.u64()? as usize;
    let mut history = Vec::with_capacity(history_len);
    for _ in 0..history_len {
        history.push(EpochLoss {
            epoch: r.u64()? as usize,
            metric: r.f64()?,
            quantization: r.f64()?,
            total: r.f64()?,
        });
    }

    Ok((
        TrainState {
            encoder,
            layers,
            proxies,
            epoch,
            rng: Rng::from_state(rng_state),
            history,
        },
        cfg,
    ))
}
