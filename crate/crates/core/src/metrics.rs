//! Retrieval and quantization quality metrics: mAP@N, hash position error,
//! global/local inter-intra distance ratios, and precision/recall series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{HhfError, Result};
use crate::hamming::CodeDatabase;
use crate::num::{sgn, Matrix};

/// Relevance rule between a query's label set and a database entry's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelevanceJudge {
    /// Relevant iff the label sets are equal.
    SingleLabel,
    /// Relevant iff the label sets share at least one label.
    MultiLabel,
}

impl RelevanceJudge {
    pub fn relevant(&self, a: &[u32], b: &[u32]) -> bool {
        match self {
            RelevanceJudge::SingleLabel => {
                let mut x = a.to_vec();
                let mut y = b.to_vec();
                x.sort_unstable();
                x.dedup();
                y.sort_unstable();
                y.dedup();
                x == y
            }
            RelevanceJudge::MultiLabel => a.iter().any(|l| b.contains(l)),
        }
    }
}

impl std::str::FromStr for RelevanceJudge {
    type Err = HhfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "single-label" => Ok(RelevanceJudge::SingleLabel),
            "multi" | "multi-label" => Ok(RelevanceJudge::MultiLabel),
            other => Err(HhfError::InvalidArgument(format!(
                "unknown judge {other:?} (expected single or multi)"
            ))),
        }
    }
}

/// AP@N over a ranked relevance list:
/// (sum over relevant ranks i <= N of precision@i) / (relevant within top N),
/// and 0 when the top N contain nothing relevant.
pub fn average_precision(rel_flags: &[bool], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(HhfError::InvalidArgument("AP@N requires N >= 1".into()));
    }
    if rel_flags.is_empty() {
        return Err(HhfError::InvalidArgument(
            "AP of an empty ranking".into(),
        ));
    }
    let cut = n.min(rel_flags.len());
    let mut hits = 0u64;
    let mut sum = 0.0;
    for (i, &rel) in rel_flags[..cut].iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        Ok(0.0)
    } else {
        Ok(sum / hits as f64)
    }
}

/// Mean AP@N over the queries, ranking the database by Hamming distance
/// with the index tie rule.
pub fn map_at_n(
    queries: &CodeDatabase,
    db: &CodeDatabase,
    n: usize,
    judge: RelevanceJudge,
) -> Result<f64> {
    if queries.is_empty() {
        return Err(HhfError::InvalidArgument("empty query set".into()));
    }
    let mut total = 0.0;
    for qi in 0..queries.len() {
        let result = db.top_n(&queries.code(qi), n)?;
        let flags: Vec<bool> = result
            .hits
            .iter()
            .map(|&(id, _)| judge.relevant(queries.labels(qi), db.labels(id as usize)))
            .collect();
        total += average_precision(&flags, n)?;
    }
    Ok(total / queries.len() as f64)
}

/// Hash position error: mean squared distance between latent codes and
/// their sign vectors.
pub fn hpe(latents: &Matrix) -> Result<f64> {
    if latents.rows() == 0 {
        return Err(HhfError::InvalidArgument("HPE of an empty set".into()));
    }
    let mut total = 0.0;
    for r in 0..latents.rows() {
        total += latents
            .row(r)
            .iter()
            .map(|&v| {
                let d = v - sgn(v);
                d * d
            })
            .sum::<f64>();
    }
    Ok(total / latents.rows() as f64)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Per-class arithmetic mean of the latent rows carrying that label.
/// Multi-label rows contribute to every labeled class.
fn class_centers(latents: &Matrix, labels: &[Vec<u32>]) -> Result<BTreeMap<u32, Vec<f64>>> {
    if labels.len() != latents.rows() {
        return Err(HhfError::InvalidArgument(format!(
            "{} label sets for {} latent rows",
            labels.len(),
            latents.rows()
        )));
    }
    let mut sums: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
    for (r, set) in labels.iter().enumerate() {
        if set.is_empty() {
            return Err(HhfError::InvalidArgument(format!(
                "row {r} carries no label"
            )));
        }
        for &c in set {
            let entry = sums
                .entry(c)
                .or_insert_with(|| (vec![0.0; latents.cols()], 0));
            for (s, v) in entry.0.iter_mut().zip(latents.row(r)) {
                *s += v;
            }
            entry.1 += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(c, (mut sum, count))| {
            for v in &mut sum {
                *v /= count as f64;
            }
            (c, sum)
        })
        .collect())
}

/// Global inter-intra ratio: mean squared distance of samples to their
/// class centers over the mean squared distance between distinct class
/// centers. Multi-label rows average over their labeled centers.
pub fn eta_global(latents: &Matrix, labels: &[Vec<u32>]) -> Result<f64> {
    let centers = class_centers(latents, labels)?;
    if centers.len() < 2 {
        return Err(HhfError::UndefinedRatio(format!(
            "{} class(es); inter-class spread needs at least two",
            centers.len()
        )));
    }
    let mut numerator = 0.0;
    for (r, set) in labels.iter().enumerate() {
        let mut intra = 0.0;
        for c in set {
            intra += squared_distance(latents.row(r), &centers[c]);
        }
        numerator += intra / set.len() as f64;
    }
    numerator /= latents.rows() as f64;

    let keys: Vec<&u32> = centers.keys().collect();
    let c = keys.len();
    let mut denominator = 0.0;
    for &i in &keys {
        let mut inter = 0.0;
        for &j in &keys {
            if i != j {
                inter += squared_distance(&centers[i], &centers[j]);
            }
        }
        denominator += inter / (c - 1) as f64;
    }
    denominator /= c as f64;
    if denominator == 0.0 {
        return Err(HhfError::UndefinedRatio(
            "all class centers coincide".into(),
        ));
    }
    Ok(numerator / denominator)
}

/// Floor applied to the nearest-foreign-center distance so that a sample
/// sitting exactly on a foreign center yields a huge ratio instead of a
/// division by zero.
pub const ETA_LOCAL_FLOOR: f64 = 1e-12;

/// Local inter-intra ratio: per sample, squared distance to the own class
/// center over squared distance to the nearest center of any class the
/// sample does not carry, averaged over samples.
pub fn eta_local(latents: &Matrix, labels: &[Vec<u32>]) -> Result<f64> {
    let centers = class_centers(latents, labels)?;
    if centers.len() < 2 {
        return Err(HhfError::UndefinedRatio(format!(
            "{} class(es); no foreign center exists",
            centers.len()
        )));
    }
    let mut total = 0.0;
    for (r, set) in labels.iter().enumerate() {
        let mut own = 0.0;
        for c in set {
            own += squared_distance(latents.row(r), &centers[c]);
        }
        own /= set.len() as f64;

        let foreign = centers
            .iter()
            .filter(|(c, _)| !set.contains(c))
            .map(|(_, center)| squared_distance(latents.row(r), center))
            .fold(f64::INFINITY, f64::min);
        if foreign.is_infinite() {
            return Err(HhfError::UndefinedRatio(format!(
                "row {r} carries every class; no foreign center exists"
            )));
        }
        total += own / foreign.max(ETA_LOCAL_FLOOR);
    }
    Ok(total / latents.rows() as f64)
}

/// One point of the precision/recall series at a retrieval cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub cutoff: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Mean precision and recall over queries at each cutoff. Queries with no
/// relevant database entry are excluded from both means; recall therefore
/// reaches 1.0 at cutoff = database size.
pub fn precision_recall(
    queries: &CodeDatabase,
    db: &CodeDatabase,
    judge: RelevanceJudge,
    cutoffs: &[usize],
) -> Result<Vec<PrPoint>> {
    if queries.is_empty() || db.is_empty() {
        return Err(HhfError::InvalidArgument(
            "precision_recall needs nonempty queries and database".into(),
        ));
    }
    if cutoffs.contains(&0) {
        return Err(HhfError::InvalidArgument("cutoff 0 is meaningless".into()));
    }
    // Per query: relevance flags in rank order, then prefix hit counts.
    let mut rankings: Vec<Vec<bool>> = Vec::new();
    for qi in 0..queries.len() {
        let dists = db.batch_distances(&queries.code(qi))?;
        let mut order: Vec<usize> = (0..db.len()).collect();
        order.sort_by_key(|&i| (dists[i], i));
        let flags: Vec<bool> = order
            .iter()
            .map(|&i| judge.relevant(queries.labels(qi), db.labels(i)))
            .collect();
        if flags.iter().any(|&f| f) {
            rankings.push(flags);
        }
    }
    if rankings.is_empty() {
        return Err(HhfError::UndefinedRatio(
            "no query has a relevant database entry".into(),
        ));
    }
    let prefix: Vec<(Vec<usize>, usize)> = rankings
        .iter()
        .map(|flags| {
            let mut acc = Vec::with_capacity(flags.len());
            let mut hits = 0;
            for &f in flags {
                if f {
                    hits += 1;
                }
                acc.push(hits);
            }
            (acc, hits)
        })
        .collect();

    let mut points = Vec::with_capacity(cutoffs.len());
    for &n in cutoffs {
        let cut = n.min(db.len());
        let mut precision = 0.0;
        let mut recall = 0.0;
        for (acc, total) in &prefix {
            let hits = acc[cut - 1] as f64;
            precision += hits / n as f64;
            recall += hits / *total as f64;
        }
        points.push(PrPoint {
            cutoff: n,
            precision: precision / prefix.len() as f64,
            recall: recall / prefix.len() as f64,
        });
    }
    Ok(points)
}

/// Full evaluation of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub map_at_n: f64,
    pub map_n: usize,
    pub hpe: f64,
    pub eta_global: f64,
    pub eta_local: f64,
    pub precision_at: Vec<PrPoint>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Computes the whole metric suite: retrieval metrics from the codes,
/// quantization/clustering metrics from the database latents.
pub fn evaluate(
    queries: &CodeDatabase,
    db: &CodeDatabase,
    db_latents: &Matrix,
    map_n: usize,
    judge: RelevanceJudge,
    pr_cutoffs: &[usize],
) -> Result<EvalReport> {
    if db_latents.rows() != db.len() {
        return Err(HhfError::InvalidArgument(format!(
            "{} latent rows for {} database codes",
            db_latents.rows(),
            db.len()
        )));
    }
    let labels: Vec<Vec<u32>> = (0..db.len()).map(|i| db.labels(i).to_vec()).collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        map_at_n: map_at_n(queries, db, map_n, judge)?,
        map_n,
        hpe: hpe(db_latents)?,
        eta_global: eta_global(db_latents, &labels)?,
        eta_local: eta_local(db_latents, &labels)?,
        precision_at: precision_recall(queries, db, judge, pr_cutoffs)?,
    })
}

/// Evenly spread cutoffs 1..=max (all of them when max <= limit).
pub fn default_pr_grid(max: usize, limit: usize) -> Vec<usize> {
    if max <= limit {
        (1..=max).collect()
    } else {
        let mut grid: Vec<usize> = (1..=limit)
            .map(|i| (i as f64 / limit as f64 * max as f64).round() as usize)
            .map(|n| n.max(1))
            .collect();
        grid.dedup();
        grid
    }
}
