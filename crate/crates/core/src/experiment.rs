//! The full pipeline for one training run: materialize data, train,
//! encode, index, evaluate. Shared by the CLI commands and the test
//! suites so every caller exercises the same path.

use crate::config::ExperimentConfig;
use crate::error::{HhfError, Result};
use crate::hamming::CodeDatabase;
use crate::metrics::{self, EvalReport};
use crate::num::Matrix;
use crate::train::{
    self, encode_database, init_state, LossKind, TrainConfig, TrainState,
};

/// A loss selection to compare: kind plus the hinge-clamp switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub kind: LossKind,
    pub hhf: bool,
}

impl Variant {
    /// Accepts `proxy_anchor`, `pa+hhf`, `nca`, `dhn+hhf`, ...
    pub fn parse(s: &str) -> Result<Self> {
        let (kind_str, hhf) = match s.strip_suffix("+hhf") {
            Some(prefix) => (prefix, true),
            None => (s, false),
        };
        Ok(Variant {
            kind: kind_str.trim().parse()?,
            hhf,
        })
    }

    pub fn name(&self) -> String {
        let kind = match self.kind {
            LossKind::ProxyAnchor => "proxy_anchor",
            LossKind::ProxyNca => "proxy_nca",
            LossKind::DhnPairwise => "dhn_pairwise",
            LossKind::QuantizationOnly => "quantization_only",
        };
        if self.hhf {
            format!("{kind}+hhf")
        } else {
            kind.to_string()
        }
    }
}

/// Everything one run produces.
pub struct RunOutput {
    pub state: TrainState,
    pub train_cfg: TrainConfig,
    pub db: CodeDatabase,
    pub queries: CodeDatabase,
    pub db_latents: Matrix,
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

/// Offset separating the encoder seed stream from the dataset seed stream.
const ENCODER_SEED_OFFSET: u64 = 1000;

/// Trains one variant at one seed and evaluates it. The run seed drives
/// the synthetic dataset and the split; the encoder and proxies seed from
/// run_seed + 1000 so data and initialization vary independently.
pub fn run_single(cfg: &ExperimentConfig, variant: Variant, run_seed: u64) -> Result<RunOutput> {
    let data = cfg.materialize(run_seed)?;
    if data.database.is_empty() {
        return Err(HhfError::InvalidArgument(
            "database split is empty; retrieval evaluation is impossible".into(),
        ));
    }
    let mut encoder = cfg.encoder_config(run_seed.wrapping_add(ENCODER_SEED_OFFSET))?;
    encoder.input_dim = data.train.dim();
    let classes = data.train.classes;
    let train_cfg = cfg.train_config(variant.kind, variant.hhf, classes)?;

    let mut state = init_state(&encoder, classes)?;
    train::train(&mut state, &data.train, &train_cfg)?;

    let (db_latents, db_codes) = encode_database(&state, &data.database.features)?;
    let (_, query_codes) = encode_database(&state, &data.query.features)?;
    let db = CodeDatabase::from_codes(&db_codes, data.database.labels.clone())?;
    let queries = CodeDatabase::from_codes(&query_codes, data.query.labels.clone())?;

    let grid = if cfg.eval.pr_grid.is_empty() {
        metrics::default_pr_grid(db.len(), 50)
    } else {
        cfg.eval.pr_grid.clone()
    };
    let report = metrics::evaluate(
        &queries,
        &db,
        &db_latents,
        cfg.eval.map_n,
        cfg.judge()?,
        &grid,
    )?;

    Ok(RunOutput {
        state,
        train_cfg,
        db,
        queries,
        db_latents,
        report,
        warnings: data.warnings,
    })
}

/// Median with the usual even-count average.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_parsing() {
        let v = Variant::parse("proxy_anchor+hhf").unwrap();
        assert_eq!(v.kind, LossKind::ProxyAnchor);
        assert!(v.hhf);
        assert_eq!(v.name(), "proxy_anchor+hhf");
        let v = Variant::parse("nca").unwrap();
        assert_eq!(v.kind, LossKind::ProxyNca);
        assert!(!v.hhf);
        assert_eq!(v.name(), "proxy_nca");
        assert!(Variant::parse("nonsense").is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
