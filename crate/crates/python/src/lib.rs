//! Python bindings for the deep-hashing toolkit: code-distance bounds,
//! hinge-clamped losses, encoder training, Hamming retrieval, and the
//! evaluation metrics.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use hhf_core::code_bounds;
use hhf_core::datasets::FeatureDataset;
use hhf_core::error::HhfError;
use hhf_core::hamming;
use hhf_core::losses;
use hhf_core::metrics;
use hhf_core::num::Matrix;
use hhf_core::train;

fn to_py(e: HhfError) -> PyErr {
    match e {
        HhfError::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows_to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py)
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn latent_batch(h: Vec<Vec<f64>>, labels: Vec<Vec<u32>>) -> PyResult<losses::LatentBatch> {
    losses::LatentBatch::new(rows_to_matrix(h)?, labels).map_err(to_py)
}

fn proxy_bank(proxies: Vec<Vec<f64>>) -> PyResult<losses::ProxyBank> {
    losses::ProxyBank::new(rows_to_matrix(proxies)?).map_err(to_py)
}

fn hhf_params(zeta: f64, delta: f64, alpha: f64, gamma: f64) -> PyResult<losses::HHFParams> {
    losses::HHFParams::new(zeta, delta, alpha, gamma).map_err(to_py)
}

type LossTriple = (f64, Vec<Vec<f64>>, Option<Vec<Vec<f64>>>);
type FeaturesAndLabels = (Vec<Vec<f64>>, Vec<Vec<u32>>);
type LatentsAndCodes = (Vec<Vec<f64>>, Vec<Vec<i8>>);

fn loss_triple(result: losses::LossResult) -> LossTriple {
    (
        result.value,
        matrix_to_rows(&result.grad_h),
        result.grad_p.as_ref().map(matrix_to_rows),
    )
}

/// Code dimension k = ceil(log2 C) for C classes.
#[pyfunction]
fn dimension_for_classes(classes: usize) -> PyResult<usize> {
    code_bounds::dimension_for_classes(classes).map_err(to_py)
}

/// Inflection constant zeta = 1 - 2 d_min / K.
#[pyfunction]
fn zeta(hash_bits: usize, classes: usize) -> PyResult<f64> {
    code_bounds::zeta(hash_bits, classes).map_err(to_py)
}

/// Every valid (K, C) -> zeta entry as a dict.
#[pyfunction]
fn zeta_table(
    max_bits: usize,
    max_classes: usize,
) -> PyResult<std::collections::BTreeMap<(usize, usize), f64>> {
    let table = code_bounds::generate_table(max_bits, max_classes).map_err(to_py)?;
    Ok(table.entries().map(|(k, c, z)| ((k, c), z)).collect())
}

/// Hamming distance between two +-1 sign vectors.
#[pyfunction]
fn hamming_distance(a: Vec<i8>, b: Vec<i8>) -> PyResult<u32> {
    let ca = hamming::BinaryCode::pack(&a).map_err(to_py)?;
    let cb = hamming::BinaryCode::pack(&b).map_err(to_py)?;
    hamming::hamming_distance(&ca, &cb).map_err(to_py)
}

/// Single-label Gaussian clusters; returns (features, labels).
#[pyfunction]
#[pyo3(signature = (classes, per_class, dim, separation=10.0, noise_sigma=1.0, seed=0))]
fn synth_gaussian(
    classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    noise_sigma: f64,
    seed: u64,
) -> PyResult<FeaturesAndLabels> {
    let d =
        hhf_core::datasets::synth_gaussian(classes, per_class, dim, separation, noise_sigma, seed)
            .map_err(to_py)?;
    Ok((matrix_to_rows(&d.features), d.labels))
}

/// Multi-label synthetic data; returns (features, labels).
#[pyfunction]
#[pyo3(signature = (classes, samples, dim, labels_per_sample=2, seed=0))]
fn synth_multilabel(
    classes: usize,
    samples: usize,
    dim: usize,
    labels_per_sample: usize,
    seed: u64,
) -> PyResult<FeaturesAndLabels> {
    let d = hhf_core::datasets::synth_multilabel(classes, samples, dim, labels_per_sample, seed)
        .map_err(to_py)?;
    Ok((matrix_to_rows(&d.features), d.labels))
}

/// Quantization penalty; returns (value, grad_h).
#[pyfunction]
#[pyo3(signature = (h, labels, norm=2))]
fn quantization_loss(
    h: Vec<Vec<f64>>,
    labels: Vec<Vec<u32>>,
    norm: u8,
) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let batch = latent_batch(h, labels)?;
    let r = losses::quantization_loss(&batch, norm).map_err(to_py)?;
    Ok((r.value, matrix_to_rows(&r.grad_h)))
}

/// Proxy-Anchor loss; returns (value, grad_h, grad_p).
#[pyfunction]
#[pyo3(signature = (h, labels, proxies, alpha=32.0, gamma=0.1))]
fn proxy_anchor_loss(
    h: Vec<Vec<f64>>,
    labels: Vec<Vec<u32>>,
    proxies: Vec<Vec<f64>>,
    alpha: f64,
    gamma: f64,
) -> PyResult<LossTriple> {
    let batch = latent_batch(h, labels)?;
    let bank = proxy_bank(proxies)?;
    let params = hhf_params(0.0, 0.2, alpha, gamma)?;
    Ok(loss_triple(
        losses::proxy_anchor_loss(&batch, &bank, &params).map_err(to_py)?,
    ))
}

/// Hinge-clamped Proxy-Anchor loss; returns (value, grad_h, grad_p).
#[pyfunction]
#[pyo3(signature = (h, labels, proxies, zeta, delta=0.2, alpha=32.0, gamma=0.1))]
fn hhf_proxy_anchor_loss(
    h: Vec<Vec<f64>>,
    labels: Vec<Vec<u32>>,
    proxies: Vec<Vec<f64>>,
    zeta: f64,
    delta: f64,
    alpha: f64,
    gamma: f64,
) -> PyResult<LossTriple> {
    let batch = latent_batch(h, labels)?;
    let bank = proxy_bank(proxies)?;
    let params = hhf_params(zeta, delta, alpha, gamma)?;
    Ok(loss_triple(
        losses::hhf_proxy_anchor_loss(&batch, &bank, &params).map_err(to_py)?,
    ))
}

/// AP@N of a ranked relevance list.
#[pyfunction]
fn average_precision(flags: Vec<bool>, n: usize) -> PyResult<f64> {
    metrics::average_precision(&flags, n).map_err(to_py)
}

/// Mean squared latent-to-sign distance.
#[pyfunction]
fn hpe(latents: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::hpe(&rows_to_matrix(latents)?).map_err(to_py)
}

#[pyfunction]
fn eta_global(latents: Vec<Vec<f64>>, labels: Vec<Vec<u32>>) -> PyResult<f64> {
    metrics::eta_global(&rows_to_matrix(latents)?, &labels).map_err(to_py)
}

#[pyfunction]
fn eta_local(latents: Vec<Vec<f64>>, labels: Vec<Vec<u32>>) -> PyResult<f64> {
    metrics::eta_local(&rows_to_matrix(latents)?, &labels).map_err(to_py)
}

/// Bit-packed code database with exact Hamming top-N retrieval.
#[pyclass]
struct CodeDb {
    inner: hamming::CodeDatabase,
}

#[pymethods]
impl CodeDb {
    #[new]
    fn new(bits: usize) -> Self {
        CodeDb {
            inner: hamming::CodeDatabase::new(bits),
        }
    }

    /// Appends a sign vector; returns the record id.
    #[pyo3(signature = (signs, labels=Vec::new()))]
    fn add(&mut self, signs: Vec<i8>, labels: Vec<u32>) -> PyResult<u64> {
        let code = hamming::BinaryCode::pack(&signs).map_err(to_py)?;
        self.inner.push(&code, labels).map_err(to_py)
    }

    /// Exact top-N: list of (id, distance), ties by insertion index.
    fn top_n(&self, signs: Vec<i8>, n: usize) -> PyResult<Vec<(u64, u32)>> {
        let code = hamming::BinaryCode::pack(&signs).map_err(to_py)?;
        Ok(self.inner.top_n(&code, n).map_err(to_py)?.hits)
    }

    /// Distance to every record, in insertion order.
    fn batch_distances(&self, signs: Vec<i8>) -> PyResult<Vec<u32>> {
        let code = hamming::BinaryCode::pack(&signs).map_err(to_py)?;
        self.inner.batch_distances(&code).map_err(to_py)
    }

    fn labels(&self, index: usize) -> PyResult<Vec<u32>> {
        if index >= self.inner.len() {
            return Err(PyValueError::new_err(format!(
                "index {index} out of range for {} records",
                self.inner.len()
            )));
        }
        Ok(self.inner.labels(index).to_vec())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        hamming::save_codes(&self.inner, path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(CodeDb {
            inner: hamming::load_codes(path).map_err(to_py)?,
        })
    }

    #[getter]
    fn bits(&self) -> usize {
        self.inner.bits()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Retrieval + quantization evaluation report.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Report {
    #[pyo3(get)]
    map_at_n: f64,
    #[pyo3(get)]
    map_n: usize,
    #[pyo3(get)]
    hpe: f64,
    #[pyo3(get)]
    eta_global: f64,
    #[pyo3(get)]
    eta_local: f64,
    /// (cutoff, recall, precision) triples.
    #[pyo3(get)]
    precision_at: Vec<(usize, f64, f64)>,
}

#[pymethods]
impl Report {
    fn __repr__(&self) -> String {
        format!(
            "Report(map_at_n={:.4}, hpe={:.4}, eta_global={:.4}, eta_local={:.4})",
            self.map_at_n, self.hpe, self.eta_global, self.eta_local
        )
    }
}

fn signs_db(signs: Vec<Vec<i8>>, labels: Vec<Vec<u32>>) -> PyResult<hamming::CodeDatabase> {
    let codes: Vec<hamming::BinaryCode> = signs
        .iter()
        .map(|s| hamming::BinaryCode::pack(s).map_err(to_py))
        .collect::<PyResult<_>>()?;
    hamming::CodeDatabase::from_codes(&codes, labels).map_err(to_py)
}

/// Full metric suite over sign-vector codes and database latents.
#[pyfunction]
#[pyo3(signature = (db_signs, db_labels, query_signs, query_labels, db_latents, map_n=100, multi_label=false))]
#[allow(clippy::too_many_arguments)]
fn evaluate_retrieval(
    db_signs: Vec<Vec<i8>>,
    db_labels: Vec<Vec<u32>>,
    query_signs: Vec<Vec<i8>>,
    query_labels: Vec<Vec<u32>>,
    db_latents: Vec<Vec<f64>>,
    map_n: usize,
    multi_label: bool,
) -> PyResult<Report> {
    let db = signs_db(db_signs, db_labels)?;
    let queries = signs_db(query_signs, query_labels)?;
    let latents = rows_to_matrix(db_latents)?;
    let judge = if multi_label {
        metrics::RelevanceJudge::MultiLabel
    } else {
        metrics::RelevanceJudge::SingleLabel
    };
    let grid = metrics::default_pr_grid(db.len(), 50);
    let r = metrics::evaluate(&queries, &db, &latents, map_n, judge, &grid).map_err(to_py)?;
    Ok(Report {
        map_at_n: r.map_at_n,
        map_n: r.map_n,
        hpe: r.hpe,
        eta_global: r.eta_global,
        eta_local: r.eta_local,
        precision_at: r
            .precision_at
            .iter()
            .map(|p| (p.cutoff, p.recall, p.precision))
            .collect(),
    })
}

/// Feed-forward encoder with learnable proxies, trained by mini-batch SGD.
#[pyclass]
struct Encoder {
    state: train::TrainState,
    last_cfg: Option<train::TrainConfig>,
}

#[pymethods]
impl Encoder {
    #[new]
    #[pyo3(signature = (input_dim, hidden_dims, hash_bits, classes, activation="tanh", seed=0))]
    fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        hash_bits: usize,
        classes: usize,
        activation: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let config = train::EncoderConfig {
            input_dim,
            hidden_dims,
            hash_bits,
            activation: activation.parse().map_err(to_py)?,
            seed,
        };
        Ok(Encoder {
            state: train::init_state(&config, classes).map_err(to_py)?,
            last_cfg: None,
        })
    }

    /// Trains in place; returns the (epoch, metric, quantization, total)
    /// loss history of the new epochs. `zeta=None` computes the inflection
    /// constant from the hash length and class count.
    #[pyo3(signature = (
        features, labels, *, epochs=100, batch_size=32, lr_encoder=0.001,
        lr_proxy=0.01, momentum=0.9, weight_decay=5e-4, lr_decay_factor=0.5,
        lr_decay_every=10, beta=1.0, loss="proxy_anchor", hhf=true,
        alpha=32.0, gamma=0.1, delta=0.2, temperature=0.25, quan_norm=2,
        zeta=None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        features: Vec<Vec<f64>>,
        labels: Vec<Vec<u32>>,
        epochs: usize,
        batch_size: usize,
        lr_encoder: f64,
        lr_proxy: f64,
        momentum: f64,
        weight_decay: f64,
        lr_decay_factor: f64,
        lr_decay_every: usize,
        beta: f64,
        loss: &str,
        hhf: bool,
        alpha: f64,
        gamma: f64,
        delta: f64,
        temperature: f64,
        quan_norm: u8,
        zeta: Option<f64>,
    ) -> PyResult<Vec<(usize, f64, f64, f64)>> {
        let classes = self.state.proxies.classes();
        let dataset =
            FeatureDataset::new(rows_to_matrix(features)?, labels, classes).map_err(to_py)?;
        let cfg = train::TrainConfig {
            epochs,
            batch_size,
            lr_encoder,
            lr_proxy,
            momentum,
            weight_decay,
            lr_decay_factor,
            lr_decay_every,
            beta,
            loss: train::LossSpec {
                kind: loss.parse().map_err(to_py)?,
                hhf,
                alpha,
                gamma,
                delta,
                temperature,
                quan_norm,
                zeta,
            },
        };
        let before = self.state.history.len();
        train::train(&mut self.state, &dataset, &cfg).map_err(to_py)?;
        self.last_cfg = Some(cfg);
        Ok(self.state.history[before..]
            .iter()
            .map(|h| (h.epoch, h.metric, h.quantization, h.total))
            .collect())
    }

    /// Returns (latents, sign_codes) for a feature list.
    fn encode(&self, features: Vec<Vec<f64>>) -> PyResult<LatentsAndCodes> {
        let feats = rows_to_matrix(features)?;
        let (latents, codes) = train::encode_database(&self.state, &feats).map_err(to_py)?;
        Ok((
            matrix_to_rows(&latents),
            codes.iter().map(|c| c.unpack()).collect(),
        ))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let cfg = self.last_cfg.clone().unwrap_or_default();
        train::save_checkpoint(&self.state, &cfg, path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let (state, cfg) = train::load_checkpoint(path).map_err(to_py)?;
        Ok(Encoder {
            state,
            last_cfg: Some(cfg),
        })
    }

    #[getter]
    fn hash_bits(&self) -> usize {
        self.state.encoder.hash_bits
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.state.epoch
    }

    #[getter]
    fn proxies(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.state.proxies.param.value)
    }
}

#[pymodule]
fn hhf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dimension_for_classes, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_table, m)?)?;
    m.add_function(wrap_pyfunction!(hamming_distance, m)?)?;
    m.add_function(wrap_pyfunction!(synth_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(synth_multilabel, m)?)?;
    m.add_function(wrap_pyfunction!(quantization_loss, m)?)?;
    m.add_function(wrap_pyfunction!(proxy_anchor_loss, m)?)?;
    m.add_function(wrap_pyfunction!(hhf_proxy_anchor_loss, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(hpe, m)?)?;
    m.add_function(wrap_pyfunction!(eta_global, m)?)?;
    m.add_function(wrap_pyfunction!(eta_local, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_retrieval, m)?)?;
    m.add_class::<CodeDb>()?;
    m.add_class::<Report>()?;
    m.add_class::<Encoder>()?;
    Ok(())
}
