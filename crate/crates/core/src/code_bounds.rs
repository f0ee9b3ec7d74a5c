//! Minimum-distance bounds for binary linear codes and the inflection
//! constant derived from them.
//!
//! For a hash length K and class count C, the code dimension is
//! k = ceil(log2 C) and the inflection constant is zeta = 1 - 2 d_min / K,
//! where d_min is the optimal minimum distance of the best [K, k] binary
//! linear code. Finding d_min exactly is NP-hard in general, so this module
//! brackets it with classical bounds (Gilbert-Varshamov from below;
//! Singleton, Griesmer, Plotkin, and sphere-packing from above) and takes
//! the midpoint of the bracket. A brute-force enumerator over small
//! parameters serves as the exactness oracle for the bracket.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_bigint::BigUint;

use crate::error::{HhfError, Result};
use crate::num::format_f64;

/// Largest code length the table machinery supports.
pub const MAX_TABLE_BITS: usize = 256;

/// Parameters [n, k] of a binary linear code: length n, dimension k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    n: usize,
    k: usize,
}

impl CodeParams {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k < 1 || k > n {
            return Err(HhfError::InvalidCodeParams(format!(
                "need 1 <= k <= n, got n={n}, k={k}"
            )));
        }
        if n > MAX_TABLE_BITS {
            return Err(HhfError::InvalidCodeParams(format!(
                "code length {n} exceeds table scope {MAX_TABLE_BITS}"
            )));
        }
        Ok(CodeParams { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Inclusive bracket on the optimal minimum distance of an [n, k] code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceBound {
    pub lower: usize,
    pub upper: usize,
}

/// Code dimension needed to index C classes: ceil(log2 C).
pub fn dimension_for_classes(classes: usize) -> Result<usize> {
    if classes < 2 {
        return Err(HhfError::Degenerate(format!(
            "{classes} class(es): retrieval needs at least two classes"
        )));
    }
    Ok(((classes - 1).ilog2() + 1) as usize)
}

fn binomial_row(n: usize) -> Vec<BigUint> {
    // C(n, 0..=n) via the multiplicative recurrence; exact in BigUint.
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigUint::from(1u32);
    row.push(c.clone());
    for i in 0..n {
        c = c * BigUint::from(n - i) / BigUint::from(i + 1);
        row.push(c.clone());
    }
    row
}

fn pow2(e: usize) -> BigUint {
    BigUint::from(1u32) << e
}

/// Gilbert-Varshamov: an [n, k, d] binary linear code exists whenever
/// sum_{i<=d-2} C(n-1, i) < 2^(n-k). Returns the largest such d.
fn gilbert_varshamov_lower(n: usize, k: usize) -> usize {
    let budget = pow2(n - k);
    let binom = binomial_row(n - 1);
    let mut acc = BigUint::from(0u32);
    let mut best = 1;
    for d in 1..=n {
        // acc = sum_{i=0}^{d-2} C(n-1, i)
        if d >= 2 {
            acc += &binom[d - 2];
        }
        if acc < budget {
            best = d;
        } else {
            break;
        }
    }
    best
}

/// Griesmer: n >= sum_{i=0}^{k-1} ceil(d / 2^i). Returns the largest
/// feasible d.
fn griesmer_upper(n: usize, k: usize) -> usize {
    let mut best = 1;
    for d in 1..=n {
        let mut total = 0usize;
        for i in 0..k {
            let denom = 1usize << i.min(63);
            total += d.div_ceil(denom);
            if total > n {
                break;
            }
        }
        if total <= n {
            best = d;
        }
    }
    best
}

/// Plotkin-style average-weight bound for linear codes:
/// d <= n * 2^(k-1) / (2^k - 1).
fn plotkin_upper(n: usize, k: usize) -> usize {
    let num = BigUint::from(n) * pow2(k - 1);
    let den = pow2(k) - BigUint::from(1u32);
    let q = num / den;
    // The quotient is at most n, so the conversion cannot truncate.
    q.to_u64_digits().first().copied().unwrap_or(0) as usize
}

/// Sphere-packing (Hamming): 2^k * V(n, floor((d-1)/2)) <= 2^n, where
/// V(n, r) is the volume of the radius-r Hamming ball.
fn hamming_upper(n: usize, k: usize) -> usize {
    let budget = pow2(n - k);
    let binom = binomial_row(n);
    let mut volume = BigUint::from(1u32); // V(n, 0)
    let mut radius = 0usize;
    let mut best = 1;
    for d in 1..=n {
        let r = (d - 1) / 2;
        while radius < r {
            radius += 1;
            volume += &binom[radius];
        }
        if volume <= budget {
            best = d;
        } else {
            break;
        }
    }
    best
}

/// Brackets the optimal minimum distance of the best [n, k] binary linear
/// code. The true optimum always lies inside the returned range.
pub fn bound_range(params: CodeParams) -> DistanceBound {
    let (n, k) = (params.n, params.k);
    let singleton = n - k + 1;
    let upper = singleton
        .min(griesmer_upper(n, k))
        .min(plotkin_upper(n, k))
        .min(hamming_upper(n, k));
    let lower = gilbert_varshamov_lower(n, k);
    assert!(
        lower <= upper,
        "bound inversion for [{n}, {k}]: GV {lower} > upper {upper}"
    );
    DistanceBound { lower, upper }
}

/// Feasibility limits for the brute-force enumerator.
pub const ORACLE_MAX_K: usize = 6;
pub const ORACLE_MAX_N: usize = 14;

/// Exact optimal minimum distance over all [n, k] binary linear codes,
/// by enumeration over systematic generator matrices [I_k | A].
///
/// Every linear code is equivalent to a systematic one, and permuting the
/// columns of A never changes the weight distribution, so A is enumerated
/// as a multiset of nonzero column vectors (a zero column can always be
/// replaced by a nonzero one without decreasing the minimum distance).
/// Branch-and-bound: each remaining column adds at most one to any
/// codeword weight.
pub fn exhaustive_dmin(params: CodeParams) -> Result<usize> {
    let (n, k) = (params.n, params.k);
    if k > ORACLE_MAX_K || n > ORACLE_MAX_N {
        return Err(HhfError::OracleScope {
            n,
            k,
            max_k: ORACLE_MAX_K,
            max_n: ORACLE_MAX_N,
        });
    }
    let msgs = (1usize << k) - 1; // nonzero messages 1..=msgs
    let parity_cols = n - k;
    if parity_cols == 0 {
        return Ok(1); // [k, k] is the full space; d = 1
    }

    // parity_mask[a] bit m-1 set iff <m, a> is odd.
    let col_values: Vec<usize> = (1..(1usize << k)).collect();
    let parity_mask: Vec<u64> = col_values
        .iter()
        .map(|&a| {
            let mut mask = 0u64;
            for m in 1..=msgs {
                if ((m & a).count_ones() & 1) == 1 {
                    mask |= 1 << (m - 1);
                }
            }
            mask
        })
        .collect();

    // weights[m-1] starts at wt(m) from the identity part.
    let mut weights = [0u16; 64];
    for m in 1..=msgs {
        weights[m - 1] = m.count_ones() as u16;
    }

    // A code meeting the GV bound exists, so anything below it can be
    // pruned from the start.
    let mut best = gilbert_varshamov_lower(n, k).saturating_sub(1) as u16;

    fn min_weight(weights: &[u16; 64], msgs: usize) -> u16 {
        weights[..msgs].iter().copied().min().unwrap()
    }

    fn dfs(
        parity_mask: &[u64],
        weights: &mut [u16; 64],
        msgs: usize,
        start: usize,
        remaining: usize,
        best: &mut u16,
    ) {
        if remaining == 0 {
            let d = min_weight(weights, msgs);
            if d > *best {
                *best = d;
            }
            return;
        }
        if min_weight(weights, msgs) + remaining as u16 <= *best {
            return;
        }
        for col in start..parity_mask.len() {
            let mask = parity_mask[col];
            for m in 0..msgs {
                weights[m] += ((mask >> m) & 1) as u16;
            }
            dfs(parity_mask, weights, msgs, col, remaining - 1, best);
            for m in 0..msgs {
                weights[m] -= ((mask >> m) & 1) as u16;
            }
        }
    }

    dfs(
        &parity_mask,
        &mut weights,
        msgs,
        0,
        parity_cols,
        &mut best,
    );
    Ok(best as usize)
}

/// Collapses a distance bracket to the value used in the zeta formula:
/// the exact value when the bracket is a point, otherwise its midpoint.
/// Non-integer midpoints are intentional; zeta is a continuous threshold.
pub fn resolve_dmin(bound: DistanceBound) -> f64 {
    if bound.lower == bound.upper {
        bound.lower as f64
    } else {
        (bound.lower + bound.upper) as f64 / 2.0
    }
}

/// Inflection constant zeta = 1 - 2 d_min / K for K hash bits and C classes.
pub fn zeta(hash_bits: usize, classes: usize) -> Result<f64> {
    let k = dimension_for_classes(classes)?;
    if !(1..=MAX_TABLE_BITS).contains(&hash_bits) {
        return Err(HhfError::InvalidCodeParams(format!(
            "hash length must be in 1..={MAX_TABLE_BITS}, got {hash_bits}"
        )));
    }
    if k > hash_bits {
        return Err(HhfError::NoCode { n: hash_bits, k });
    }
    let d_min = resolve_dmin(bound_range(CodeParams::new(hash_bits, k)?));
    Ok(1.0 - 2.0 * d_min / hash_bits as f64)
}

/// Precomputed zeta values for every valid (hash bits, class count) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaTable {
    max_bits: usize,
    max_classes: usize,
    entries: BTreeMap<(u16, u16), f64>,
}

impl ZetaTable {
    pub fn max_bits(&self) -> usize {
        self.max_bits
    }

    pub fn max_classes(&self) -> usize {
        self.max_classes
    }

    pub fn get(&self, hash_bits: usize, classes: usize) -> Option<f64> {
        self.entries
            .get(&(hash_bits as u16, classes as u16))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .iter()
            .map(|(&(k, c), &z)| (k as usize, c as usize, z))
    }

    pub fn zeta_range(&self) -> Option<(f64, f64)> {
        let mut it = self.entries.values();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for &z in it {
            lo = lo.min(z);
            hi = hi.max(z);
        }
        Some((lo, hi))
    }
}

/// Computes the zeta table for all K in 1..=max_bits, C in 2..=max_classes.
/// Pairs whose dimension exceeds K carry no entry. Deterministic.
pub fn generate_table(max_bits: usize, max_classes: usize) -> Result<ZetaTable> {
    if max_bits > MAX_TABLE_BITS || max_classes > MAX_TABLE_BITS {
        return Err(HhfError::InvalidCodeParams(format!(
            "table scope is {MAX_TABLE_BITS}x{MAX_TABLE_BITS}, requested {max_bits}x{max_classes}"
        )));
    }
    let mut dmin_cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut entries = BTreeMap::new();
    for bits in 1..=max_bits {
        for classes in 2..=max_classes {
            let k = dimension_for_classes(classes)?;
            if k > bits {
                continue;
            }
            let d_min = *dmin_cache
                .entry((bits, k))
                .or_insert_with(|| resolve_dmin(bound_range(CodeParams { n: bits, k })));
            entries.insert(
                (bits as u16, classes as u16),
                1.0 - 2.0 * d_min / bits as f64,
            );
        }
    }
    Ok(ZetaTable {
        max_bits,
        max_classes,
        entries,
    })
}

/// Writes a table as `K<TAB>C<TAB>zeta` lines, one entry per line, zeta at
/// 17 significant digits so the round trip is bit exact.
pub fn export_table<W: Write>(table: &ZetaTable, mut dest: W) -> std::io::Result<()> {
    for ((bits, classes), z) in &table.entries {
        writeln!(dest, "{bits}\t{classes}\t{}", format_f64(*z))?;
    }
    Ok(())
}

pub fn save_table(table: &ZetaTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file =
        std::fs::File::create(path).map_err(|e| HhfError::io(path.display().to_string(), e))?;
    export_table(table, std::io::BufWriter::new(file))
        .map_err(|e| HhfError::io(path.display().to_string(), e))
}

/// Parses a table written by [`export_table`], or an externally supplied one
/// in the same format; loaded entries override computed values downstream.
pub fn load_table(path: impl AsRef<Path>) -> Result<ZetaTable> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut entries = BTreeMap::new();
    let mut max_bits = 0usize;
    let mut max_classes = 0usize;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HhfError::io(name.clone(), e))?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let parse_err = |col: &str, msg: String| HhfError::Parse {
            file: name.clone(),
            line: line_no,
            msg: format!("column {col}: {msg}"),
        };
        let bits: usize = fields
            .next()
            .ok_or_else(|| parse_err("1 (K)", "missing".into()))?
            .trim()
            .parse()
            .map_err(|e| parse_err("1 (K)", format!("{e}")))?;
        let classes: usize = fields
            .next()
            .ok_or_else(|| parse_err("2 (C)", "missing".into()))?
            .trim()
            .parse()
            .map_err(|e| parse_err("2 (C)", format!("{e}")))?;
        let z: f64 = fields
            .next()
            .ok_or_else(|| parse_err("3 (zeta)", "missing".into()))?
            .trim()
            .parse()
            .map_err(|e| parse_err("3 (zeta)", format!("{e}")))?;
        if fields.next().is_some() {
            return Err(parse_err("4", "unexpected extra field".into()));
        }
        if !(1..=MAX_TABLE_BITS).contains(&bits) || !(2..=MAX_TABLE_BITS).contains(&classes) {
            return Err(parse_err(
                "1-2 (K, C)",
                format!("pair ({bits}, {classes}) outside table scope"),
            ));
        }
        if !(-1.0..1.0).contains(&z) {
            return Err(parse_err(
                "3 (zeta)",
                format!("value {z} outside [-1, 1)"),
            ));
        }
        entries.insert((bits as u16, classes as u16), z);
        max_bits = max_bits.max(bits);
        max_classes = max_classes.max(classes);
    }
    Ok(ZetaTable {
        max_bits,
        max_classes,
        entries,
    })
}
