//! Experiment configuration: one TOML file drives dataset construction,
//! encoder shape, training, loss selection, and evaluation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::code_bounds;
use crate::datasets::{
    self, DatabaseRule, FeatureDataset, SplitCount, SplitSpec,
};
use crate::error::{HhfError, Result};
use crate::metrics::RelevanceJudge;
use crate::num::Activation;
use crate::train::{EncoderConfig, LossKind, LossSpec, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub split: Option<SplitSection>,
    pub encoder: EncoderSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// "synthetic", "synthetic_multilabel", or "files".
    pub kind: String,
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default)]
    pub per_class: Option<usize>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub separation: Option<f64>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub labels_per_sample: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// files mode: either a single feature file plus a [split] section...
    #[serde(default)]
    pub features: Option<PathBuf>,
    /// ...or three pre-split feature files.
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub query: Option<PathBuf>,
    #[serde(default)]
    pub database: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// "mini" (disjoint train/query, database = remainder) or
    /// "full" (database = train).
    pub protocol: String,
    #[serde(default)]
    pub train_per_class: Option<usize>,
    #[serde(default)]
    pub query_per_class: Option<usize>,
    #[serde(default)]
    pub train_total: Option<usize>,
    #[serde(default)]
    pub query_total: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    pub hash_bits: usize,
    #[serde(default = "default_activation")]
    pub activation: String,
}

fn default_activation() -> String {
    "tanh".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_proxy: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub beta: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr_encoder: t.lr_encoder,
            lr_proxy: t.lr_proxy,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            lr_decay_factor: t.lr_decay_factor,
            lr_decay_every: t.lr_decay_every,
            beta: t.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub kind: String,
    pub hhf: bool,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub temperature: f64,
    pub quan_norm: u8,
    /// Explicit inflection constant; wins over everything else.
    pub zeta: Option<f64>,
    /// External zeta table; consulted before computing from bounds.
    pub zeta_table: Option<PathBuf>,
}

impl Default for LossSection {
    fn default() -> Self {
        let l = LossSpec::default();
        LossSection {
            kind: "proxy_anchor".into(),
            hhf: l.hhf,
            alpha: l.alpha,
            gamma: l.gamma,
            delta: l.delta,
            temperature: l.temperature,
            quan_norm: l.quan_norm,
            zeta: None,
            zeta_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub map_n: usize,
    /// Explicit precision/recall cutoffs; empty means an automatic grid.
    pub pr_grid: Vec<usize>,
    pub judge: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            map_n: 100,
            pr_grid: Vec::new(),
            judge: "single-label".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let text =
            std::fs::read_to_string(path).map_err(|e| HhfError::io(name.clone(), e))?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| HhfError::Parse {
            file: name,
            line: 0,
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.dataset.kind.as_str() {
            "synthetic" | "synthetic_multilabel" => {
                if self.dataset.classes.is_none() || self.dataset.dim.is_none() {
                    return Err(HhfError::InvalidArgument(
                        "synthetic dataset needs `classes` and `dim`".into(),
                    ));
                }
            }
            "files" => {
                let pre_split = self.dataset.train.is_some()
                    && self.dataset.query.is_some()
                    && self.dataset.database.is_some();
                let with_split = self.dataset.features.is_some() && self.split.is_some();
                if !pre_split && !with_split {
                    return Err(HhfError::InvalidArgument(
                        "files dataset needs train/query/database paths, or `features` plus a [split] section"
                            .into(),
                    ));
                }
                for path in [
                    &self.dataset.features,
                    &self.dataset.train,
                    &self.dataset.query,
                    &self.dataset.database,
                ]
                .into_iter()
                .flatten()
                {
                    if !path.exists() {
                        return Err(HhfError::InvalidArgument(format!(
                            "referenced file does not exist: {}",
                            path.display()
                        )));
                    }
                }
            }
            other => {
                return Err(HhfError::InvalidArgument(format!(
                    "unknown dataset kind {other:?}"
                )))
            }
        }
        if let Some(z) = self.loss.zeta {
            if !(-1.0..1.0).contains(&z) {
                return Err(HhfError::InvalidArgument(format!(
                    "zeta override {z} outside [-1, 1)"
                )));
            }
        }
        if let Some(table) = &self.loss.zeta_table {
            if !table.exists() {
                return Err(HhfError::InvalidArgument(format!(
                    "zeta table does not exist: {}",
                    table.display()
                )));
            }
        }
        self.loss_kind()?;
        self.judge()?;
        self.encoder_config(0)?;
        Ok(())
    }

    pub fn loss_kind(&self) -> Result<LossKind> {
        self.loss.kind.parse()
    }

    pub fn judge(&self) -> Result<RelevanceJudge> {
        self.eval.judge.parse()
    }

    pub fn encoder_config(&self, seed: u64) -> Result<EncoderConfig> {
        let activation: Activation = self.encoder.activation.parse()?;
        Ok(EncoderConfig {
            // input_dim is patched in once the dataset is materialized.
            input_dim: 1,
            hidden_dims: self.encoder.hidden_dims.clone(),
            hash_bits: self.encoder.hash_bits,
            activation,
            seed,
        })
    }

    /// The TrainConfig for a variant, with zeta resolved in the contract
    /// order: explicit override, then external table, then computed.
    pub fn train_config(&self, kind: LossKind, hhf: bool, classes: usize) -> Result<TrainConfig> {
        let zeta = if let Some(z) = self.loss.zeta {
            Some(z)
        } else if hhf {
            if let Some(table_path) = &self.loss.zeta_table {
                let table = code_bounds::load_table(table_path)?;
                table.get(self.encoder.hash_bits, classes)
            } else {
                None
            }
        } else {
            None
        };
        Ok(TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr_encoder: self.train.lr_encoder,
            lr_proxy: self.train.lr_proxy,
            momentum: self.train.momentum,
            weight_decay: self.train.weight_decay,
            lr_decay_factor: self.train.lr_decay_factor,
            lr_decay_every: self.train.lr_decay_every,
            beta: self.train.beta,
            loss: LossSpec {
                kind,
                hhf,
                alpha: self.loss.alpha,
                gamma: self.loss.gamma,
                delta: self.loss.delta,
                temperature: self.loss.temperature,
                quan_norm: self.loss.quan_norm,
                zeta,
            },
        })
    }

    fn split_spec(&self) -> Result<SplitSpec> {
        let section = self
            .split
            .as_ref()
            .ok_or_else(|| HhfError::InvalidArgument("missing [split] section".into()))?;
        let database = match section.protocol.as_str() {
            "mini" => DatabaseRule::Remainder,
            "full" => DatabaseRule::EqualsTrain,
            other => {
                return Err(HhfError::InvalidArgument(format!(
                    "unknown split protocol {other:?} (expected mini or full)"
                )))
            }
        };
        let (train, query) = match (
            section.train_per_class,
            section.query_per_class,
            section.train_total,
            section.query_total,
        ) {
            (Some(t), Some(q), None, None) => {
                (SplitCount::PerClass(t), SplitCount::PerClass(q))
            }
            (None, None, Some(t), Some(q)) => (SplitCount::Total(t), SplitCount::Total(q)),
            _ => {
                return Err(HhfError::InvalidArgument(
                    "split needs train/query counts, either both per-class or both totals"
                        .into(),
                ))
            }
        };
        Ok(SplitSpec {
            train,
            query,
            database,
        })
    }

    /// Materializes the train/query/database feature sets for one run
    /// seed. Synthetic data and the split derive from the run seed (or the
    /// pinned dataset seed when given); file datasets are fixed and only
    /// the encoder varies across seeds.
    pub fn materialize(&self, run_seed: u64) -> Result<ExperimentData> {
        let data_seed = self.dataset.seed.unwrap_or(run_seed);
        match self.dataset.kind.as_str() {
            "synthetic" | "synthetic_multilabel" => {
                let classes = self.dataset.classes.unwrap();
                let dim = self.dataset.dim.unwrap();
                let full = if self.dataset.kind == "synthetic" {
                    datasets::synth_gaussian(
                        classes,
                        self.dataset.per_class.ok_or_else(|| {
                            HhfError::InvalidArgument("synthetic needs `per_class`".into())
                        })?,
                        dim,
                        self.dataset.separation.unwrap_or(10.0),
                        self.dataset.noise_sigma.unwrap_or(1.0),
                        data_seed,
                    )?
                } else {
                    datasets::synth_multilabel(
                        classes,
                        self.dataset.samples.ok_or_else(|| {
                            HhfError::InvalidArgument(
                                "synthetic_multilabel needs `samples`".into(),
                            )
                        })?,
                        dim,
                        self.dataset.labels_per_sample.unwrap_or(2),
                        data_seed,
                    )?
                };
                let split_spec = self.split_spec()?;
                let parts = datasets::split(&full, &split_spec, data_seed)?;
                Ok(ExperimentData {
                    train: full.subset(&parts.train)?,
                    query: full.subset(&parts.query)?,
                    database: full.subset(&parts.database)?,
                    warnings: parts.warnings,
                })
            }
            "files" => {
                if let (Some(t), Some(q), Some(d)) = (
                    &self.dataset.train,
                    &self.dataset.query,
                    &self.dataset.database,
                ) {
                    Ok(ExperimentData {
                        train: datasets::load_features(t)?,
                        query: datasets::load_features(q)?,
                        database: datasets::load_features(d)?,
                        warnings: Vec::new(),
                    })
                } else {
                    let full =
                        datasets::load_features(self.dataset.features.as_ref().unwrap())?;
                    let split_spec = self.split_spec()?;
                    let parts = datasets::split(&full, &split_spec, data_seed)?;
                    Ok(ExperimentData {
                        train: full.subset(&parts.train)?,
                        query: full.subset(&parts.query)?,
                        database: full.subset(&parts.database)?,
                        warnings: parts.warnings,
                    })
                }
            }
            _ => unreachable!("validated"),
        }
    }
}

/// Materialized splits for one run.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: FeatureDataset,
    pub query: FeatureDataset,
    pub database: FeatureDataset,
    pub warnings: Vec<String>,
}
