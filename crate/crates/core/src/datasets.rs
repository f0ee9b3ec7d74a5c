//! Dataset generation, train/query/database split protocols, and feature
//! file IO.
//!
//! Real-image pipelines are out of scope; experiments run on synthetic
//! Gaussian clusters or on precomputed feature vectors loaded from disk.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{HhfError, Result};
use crate::num::{format_f64, Matrix};
use crate::rng::Rng;

/// Feature vectors with per-row label sets and the class count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub features: Matrix,
    pub labels: Vec<Vec<u32>>,
    pub classes: usize,
}

impl FeatureDataset {
    pub fn new(features: Matrix, labels: Vec<Vec<u32>>, classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(HhfError::InvalidArgument(format!(
                "{} label sets for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        let labels: Vec<Vec<u32>> = labels
            .into_iter()
            .map(|mut set| {
                set.sort_unstable();
                set.dedup();
                set
            })
            .collect();
        for (row, set) in labels.iter().enumerate() {
            if set.is_empty() {
                return Err(HhfError::InvalidArgument(format!(
                    "row {row} carries no label"
                )));
            }
            if let Some(&bad) = set.iter().find(|&&l| l as usize >= classes) {
                return Err(HhfError::LabelRange {
                    label: bad,
                    classes,
                });
            }
        }
        Ok(FeatureDataset {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows of `self` selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<FeatureDataset> {
        let rows: Vec<Vec<f64>> = indices
            .iter()
            .map(|&i| self.features.row(i).to_vec())
            .collect();
        let labels: Vec<Vec<u32>> = indices.iter().map(|&i| self.labels[i].clone()).collect();
        FeatureDataset::new(Matrix::from_rows(&rows)?, labels, self.classes)
    }
}

/// Draws a unit direction uniformly via normalized Gaussians.
fn sphere_point(rng: &mut Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm * radius).collect();
        }
    }
}

/// Single-label Gaussian clusters: C means on a sphere of the given
/// radius, samples = mean + N(0, sigma^2) per coordinate. Deterministic
/// per seed; rows are grouped by class.
pub fn synth_gaussian(
    classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<FeatureDataset> {
    if classes < 2 {
        return Err(HhfError::Degenerate(format!(
            "{classes} class(es): need at least two"
        )));
    }
    if separation <= 0.0 {
        return Err(HhfError::InvalidArgument(format!(
            "separation {separation} must be positive"
        )));
    }
    if per_class == 0 || dim == 0 {
        return Err(HhfError::InvalidArgument(
            "per_class and dim must be positive".into(),
        ));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| sphere_point(&mut rng, dim, separation))
        .collect();
    let mut rows = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            let row: Vec<f64> = mean
                .iter()
                .map(|&m| m + noise_sigma * rng.normal())
                .collect();
            rows.push(row);
            labels.push(vec![c as u32]);
        }
    }
    FeatureDataset::new(Matrix::from_rows(&rows)?, labels, classes)
}

/// Mean radius and per-coordinate noise used by the multi-label generator.
const MULTILABEL_SEPARATION: f64 = 10.0;
const MULTILABEL_SIGMA: f64 = 1.0;

/// Multi-label generator: every sample carries `labels_per_sample`
/// distinct uniform labels; its features are the sum of the chosen class
/// means plus Gaussian noise.
pub fn synth_multilabel(
    classes: usize,
    samples: usize,
    dim: usize,
    labels_per_sample: usize,
    seed: u64,
) -> Result<FeatureDataset> {
    if classes < 2 {
        return Err(HhfError::Degenerate(format!(
            "{classes} class(es): need at least two"
        )));
    }
    if labels_per_sample == 0 || labels_per_sample > classes {
        return Err(HhfError::InvalidArgument(format!(
            "labels_per_sample {labels_per_sample} outside 1..={classes}"
        )));
    }
    if samples == 0 || dim == 0 {
        return Err(HhfError::InvalidArgument(
            "samples and dim must be positive".into(),
        ));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| sphere_point(&mut rng, dim, MULTILABEL_SEPARATION))
        .collect();
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        // Partial Fisher-Yates draw of distinct labels.
        let mut pool: Vec<u32> = (0..classes as u32).collect();
        let mut chosen = Vec::with_capacity(labels_per_sample);
        for picked in 0..labels_per_sample {
            let j = picked + rng.below(classes - picked);
            pool.swap(picked, j);
            chosen.push(pool[picked]);
        }
        let mut row = vec![0.0; dim];
        for &c in &chosen {
            for (r, m) in row.iter_mut().zip(&means[c as usize]) {
                *r += m;
            }
        }
        for r in &mut row {
            *r += MULTILABEL_SIGMA * rng.normal();
        }
        rows.push(row);
        labels.push(chosen);
    }
    FeatureDataset::new(Matrix::from_rows(&rows)?, labels, classes)
}

/// How many records each split takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCount {
    PerClass(usize),
    Total(usize),
}

/// What the database split contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatabaseRule {
    /// Everything not taken by train or query.
    Remainder,
    /// The database is the train split itself.
    EqualsTrain,
}

/// Split protocol: train and query sizes plus the database rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: SplitCount,
    pub query: SplitCount,
    pub database: DatabaseRule,
}

/// Record-id partitions produced by [`split`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSplit {
    pub train: Vec<usize>,
    pub query: Vec<usize>,
    pub database: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Partitions a dataset per the protocol. Train and query are always
/// disjoint; the database is either the remainder (disjoint from both) or
/// identical to the train ids. Deterministic per seed.
pub fn split(dataset: &FeatureDataset, spec: &SplitSpec, seed: u64) -> Result<IndexSplit> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let (train, query, rest): (Vec<usize>, Vec<usize>, Vec<usize>) =
        match (spec.train, spec.query) {
            (SplitCount::PerClass(train_n), SplitCount::PerClass(query_n)) => {
                // Per-class selection requires single-label rows.
                if let Some(row) = dataset.labels.iter().position(|set| set.len() != 1) {
                    return Err(HhfError::InvalidArgument(format!(
                        "per-class split needs single-label data; row {row} has {} labels",
                        dataset.labels[row].len()
                    )));
                }
                let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.classes];
                for (i, set) in dataset.labels.iter().enumerate() {
                    by_class[set[0] as usize].push(i);
                }
                let mut train = Vec::new();
                let mut query = Vec::new();
                let mut rest = Vec::new();
                for (c, ids) in by_class.iter_mut().enumerate() {
                    if ids.is_empty() {
                        continue;
                    }
                    if ids.len() < train_n + query_n {
                        return Err(HhfError::SplitError {
                            class: c as u32,
                            requested: train_n + query_n,
                            available: ids.len(),
                        });
                    }
                    rng.shuffle(ids);
                    train.extend_from_slice(&ids[..train_n]);
                    query.extend_from_slice(&ids[train_n..train_n + query_n]);
                    rest.extend_from_slice(&ids[train_n + query_n..]);
                }
                train.sort_unstable();
                query.sort_unstable();
                rest.sort_unstable();
                (train, query, rest)
            }
            (SplitCount::Total(train_n), SplitCount::Total(query_n)) => {
                if dataset.len() < train_n + query_n {
                    return Err(HhfError::InvalidArgument(format!(
                        "dataset has {} rows, split wants {}",
                        dataset.len(),
                        train_n + query_n
                    )));
                }
                let mut ids: Vec<usize> = (0..dataset.len()).collect();
                rng.shuffle(&mut ids);
                let mut train = ids[..train_n].to_vec();
                let mut query = ids[train_n..train_n + query_n].to_vec();
                let mut rest = ids[train_n + query_n..].to_vec();
                train.sort_unstable();
                query.sort_unstable();
                rest.sort_unstable();
                (train, query, rest)
            }
            _ => {
                return Err(HhfError::InvalidArgument(
                    "train and query counts must both be per-class or both totals".into(),
                ))
            }
        };

    let database = match spec.database {
        DatabaseRule::Remainder => {
            if rest.is_empty() {
                warnings.push(
                    "remainder database is empty: train and query consume every record"
                        .to_string(),
                );
            }
            rest
        }
        DatabaseRule::EqualsTrain => train.clone(),
    };
    Ok(IndexSplit {
        train,
        query,
        database,
        warnings,
    })
}

/// CSV row format: `label;label;...|f1,f2,...`. An optional leading
/// `#classes=C` line pins the class count; without it the loader infers
/// C = max label + 1.
pub fn save_features_csv(dataset: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| HhfError::io(name.clone(), e);
    writeln!(w, "#classes={}", dataset.classes).map_err(io_err)?;
    for r in 0..dataset.len() {
        let labels: Vec<String> = dataset.labels[r].iter().map(|l| l.to_string()).collect();
        let feats: Vec<String> = dataset.features.row(r).iter().map(|&v| format_f64(v)).collect();
        writeln!(w, "{}|{}", labels.join(";"), feats.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn load_features_csv(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Vec<u32>> = Vec::new();
    let mut classes: Option<usize> = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HhfError::io(name.clone(), e))?;
        let line_no = idx + 1;
        let parse_err = |msg: String| HhfError::Parse {
            file: name.clone(),
            line: line_no,
            msg,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#classes=") {
            classes = Some(
                rest.trim()
                    .parse()
                    .map_err(|e| parse_err(format!("bad class count: {e}")))?,
            );
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let (label_part, feat_part) = trimmed
            .split_once('|')
            .ok_or_else(|| parse_err("missing `|` separator".into()))?;
        let label_set: Vec<u32> = label_part
            .split(';')
            .map(|tok| {
                tok.trim()
                    .parse::<u32>()
                    .map_err(|e| parse_err(format!("bad label {tok:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let feats: Vec<f64> = feat_part
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("bad feature {tok:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        labels.push(label_set);
        rows.push(feats);
    }
    let classes = classes.unwrap_or_else(|| {
        labels
            .iter()
            .flat_map(|set| set.iter())
            .max()
            .map_or(0, |&m| m as usize + 1)
    });
    FeatureDataset::new(Matrix::from_rows(&rows)?, labels, classes)
}

const FEATURE_FILE_MAGIC: &[u8; 4] = b"HHFD";
const FEATURE_FILE_VERSION: u16 = 1;

/// Raw binary container: magic `HHFD`, version u16, D u32, M u64, C u32,
/// then M label sets (count u16, ids u32) and M*D feature f64s, all
/// little-endian.
pub fn save_features_bin(dataset: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| HhfError::io(name.clone(), e);
    w.write_all(FEATURE_FILE_MAGIC).map_err(io_err)?;
    w.write_all(&FEATURE_FILE_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(dataset.dim() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(dataset.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(dataset.classes as u32).to_le_bytes()).map_err(io_err)?;
    for set in &dataset.labels {
        w.write_all(&(set.len() as u16).to_le_bytes()).map_err(io_err)?;
        for &l in set {
            w.write_all(&l.to_le_bytes()).map_err(io_err)?;
        }
    }
    for &v in dataset.features.data() {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn load_features_bin(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut r = BufReader::new(file);
    let parse = |msg: String| HhfError::Parse {
        file: name.clone(),
        line: 0,
        msg,
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| HhfError::io(name.clone(), e))?;
    if &magic != FEATURE_FILE_MAGIC {
        return Err(parse(format!("bad magic {magic:?}, expected HHFD")));
    }
    let version = read_u16(&mut r, &name)?;
    if version != FEATURE_FILE_VERSION {
        return Err(parse(format!("unsupported feature file version {version}")));
    }
    let dim = read_u32(&mut r, &name)? as usize;
    let m = read_u64(&mut r, &name)? as usize;
    let classes = read_u32(&mut r, &name)? as usize;
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let count = read_u16(&mut r, &name)? as usize;
        let mut set = Vec::with_capacity(count);
        for _ in 0..count {
            set.push(read_u32(&mut r, &name)?);
        }
        labels.push(set);
    }
    let mut data = vec![0.0f64; m * dim];
    for v in &mut data {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)
            .map_err(|e| HhfError::io(name.clone(), e))?;
        *v = f64::from_le_bytes(b);
    }
    FeatureDataset::new(Matrix::from_vec(m, dim, data)?, labels, classes)
}

/// Loads either container, sniffing the magic bytes: `HHFD` means binary,
/// anything else is parsed as CSV.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut file = std::fs::File::open(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut magic = [0u8; 4];
    let is_bin = match file.read(&mut magic) {
        Ok(4) => &magic == FEATURE_FILE_MAGIC,
        Ok(_) => false,
        Err(e) => return Err(HhfError::io(name, e)),
    };
    drop(file);
    if is_bin {
        load_features_bin(path)
    } else {
        load_features_csv(path)
    }
}

fn read_u16<R: Read>(r: &mut R, name: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)
        .map_err(|e| HhfError::io(name.to_string(), e))?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, name: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| HhfError::io(name.to_string(), e))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, name: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| HhfError::io(name.to_string(), e))?;
    Ok(u64::from_le_bytes(b))
}
