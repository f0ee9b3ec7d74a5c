//! Bit-packed binary codes and exact Hamming-distance retrieval.
//!
//! Codes are stored little-endian: bit i of a code lives in word i/64 at
//! bit position i%64, with bit value 1 encoding the sign +1. Unused high
//! bits of the last word are always zero so that equal codes are equal as
//! word slices and XOR/popcount needs no masking.

use std::collections::BinaryHeap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{HhfError, Result};

/// A K-bit hash code in canonical packed form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bits: usize,
    words: Vec<u64>,
}

fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BinaryCode {
    /// Packs a sign vector (+1/-1 entries) into a code; bit 1 encodes +1.
    pub fn pack(signs: &[i8]) -> Result<Self> {
        let bits = signs.len();
        let mut words = vec![0u64; words_for(bits)];
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => words[i / 64] |= 1u64 << (i % 64),
                -1 => {}
                other => {
                    return Err(HhfError::InvalidArgument(format!(
                        "sign vector entry {i} is {other}, expected +1 or -1"
                    )))
                }
            }
        }
        Ok(BinaryCode { bits, words })
    }

    /// Packs the signs of a real vector, with sgn(0) = +1.
    pub fn from_latent(latent: &[f64]) -> Self {
        let bits = latent.len();
        let mut words = vec![0u64; words_for(bits)];
        for (i, &v) in latent.iter().enumerate() {
            if v >= 0.0 {
                words[i / 64] |= 1u64 << (i % 64);
            }
        }
        BinaryCode { bits, words }
    }

    pub fn unpack(&self) -> Vec<i8> {
        (0..self.bits)
            .map(|i| {
                if (self.words[i / 64] >> (i % 64)) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn from_words(bits: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(bits) {
            return Err(HhfError::InvalidArgument(format!(
                "{} words cannot hold a {bits}-bit code",
                words.len()
            )));
        }
        if !bits.is_multiple_of(64) {
            let last = words[words.len() - 1];
            if last >> (bits % 64) != 0 {
                return Err(HhfError::InvalidArgument(
                    "non-canonical code: padding bits set".into(),
                ));
            }
        }
        Ok(BinaryCode { bits, words })
    }
}

/// Hamming distance: popcount of the XOR.
pub fn hamming_distance(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.bits != b.bits {
        return Err(HhfError::InvalidArgument(format!(
            "code length mismatch: {} vs {}",
            a.bits, b.bits
        )));
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

/// Immutable store of N equal-length codes with record ids and label sets.
///
/// Codes live in one flat word buffer so the scan path is a straight run of
/// XOR/popcount over contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeDatabase {
    bits: usize,
    stride: usize,
    words: Vec<u64>,
    ids: Vec<u64>,
    labels: Vec<Vec<u32>>,
}

impl CodeDatabase {
    pub fn new(bits: usize) -> Self {
        CodeDatabase {
            bits,
            stride: words_for(bits),
            words: Vec::new(),
            ids: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Builds a database with ids 0..n in insertion order.
    pub fn from_codes(codes: &[BinaryCode], labels: Vec<Vec<u32>>) -> Result<Self> {
        let bits = codes
            .first()
            .map(|c| c.bits)
            .ok_or_else(|| HhfError::InvalidArgument("empty code database".into()))?;
        let mut db = CodeDatabase::new(bits);
        if labels.len() != codes.len() {
            return Err(HhfError::InvalidArgument(format!(
                "{} codes but {} label sets",
                codes.len(),
                labels.len()
            )));
        }
        for (code, label_set) in codes.iter().zip(labels) {
            db.push(code, label_set)?;
        }
        Ok(db)
    }

    /// Appends a code; the record id is its insertion index.
    pub fn push(&mut self, code: &BinaryCode, labels: Vec<u32>) -> Result<u64> {
        if code.bits != self.bits {
            return Err(HhfError::InvalidArgument(format!(
                "code length mismatch: database holds {}-bit codes, got {}",
                self.bits, code.bits
            )));
        }
        let id = self.ids.len() as u64;
        self.words.extend_from_slice(&code.words);
        self.ids.push(id);
        self.labels.push(labels);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn code(&self, index: usize) -> BinaryCode {
        let start = index * self.stride;
        BinaryCode {
            bits: self.bits,
            words: self.words[start..start + self.stride].to_vec(),
        }
    }

    pub fn id(&self, index: usize) -> u64 {
        self.ids[index]
    }

    pub fn labels(&self, index: usize) -> &[u32] {
        &self.labels[index]
    }

    #[inline]
    fn distance_at(&self, query: &[u64], index: usize) -> u32 {
        let start = index * self.stride;
        let mut d = 0;
        for (w, q) in self.words[start..start + self.stride].iter().zip(query) {
            d += (w ^ q).count_ones();
        }
        d
    }

    fn check_query(&self, query: &BinaryCode) -> Result<()> {
        if query.bits != self.bits {
            return Err(HhfError::InvalidArgument(format!(
                "query is {}-bit but database holds {}-bit codes",
                query.bits, self.bits
            )));
        }
        Ok(())
    }

    /// Hamming distance from the query to every record, in database order.
    pub fn batch_distances(&self, query: &BinaryCode) -> Result<Vec<u32>> {
        self.check_query(query)?;
        Ok((0..self.len())
            .map(|i| self.distance_at(&query.words, i))
            .collect())
    }

    /// Exact top-N by Hamming distance; ties break by ascending insertion
    /// index. A bounded max-heap over a linear popcount scan.
    pub fn top_n(&self, query: &BinaryCode, n: usize) -> Result<QueryResult> {
        self.check_query(query)?;
        if n == 0 {
            return Err(HhfError::InvalidArgument(
                "top_n requires n >= 1".into(),
            ));
        }
        if self.is_empty() {
            return Err(HhfError::InvalidArgument(
                "top_n on an empty database".into(),
            ));
        }
        // Heap of (distance, index); the root is the current worst kept.
        let mut heap: BinaryHeap<(u32, usize)> = BinaryHeap::with_capacity(n + 1);
        for i in 0..self.len() {
            let d = self.distance_at(&query.words, i);
            if heap.len() < n {
                heap.push((d, i));
            } else if let Some(&(worst_d, worst_i)) = heap.peek() {
                if (d, i) < (worst_d, worst_i) {
                    heap.pop();
                    heap.push((d, i));
                }
            }
        }
        let mut entries: Vec<(u32, usize)> = heap.into_vec();
        entries.sort_unstable();
        Ok(QueryResult {
            hits: entries
                .into_iter()
                .map(|(d, i)| (self.ids[i], d))
                .collect(),
        })
    }
}

/// Ranked retrieval result: (record id, Hamming distance) pairs with
/// non-decreasing distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub hits: Vec<(u64, u32)>,
}

const CODE_FILE_MAGIC: &[u8; 4] = b"HHFC";
const CODE_FILE_VERSION: u16 = 1;

/// Writes the code file: magic `HHFC`, version u16, K u16, N u64, then N
/// records of ceil(K/8) bytes, then N label sets (count u16, ids u32 each).
/// All integers little-endian; bit i of a record lives in byte i/8 at bit
/// i%8.
pub fn save_codes(db: &CodeDatabase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| HhfError::io(name.clone(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| HhfError::io(name.clone(), e);
    w.write_all(CODE_FILE_MAGIC).map_err(io_err)?;
    w.write_all(&CODE_FILE_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(db.bits as u16).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(db.len() as u64).to_le_bytes()).map_err(io_err)?;
    let bytes_per_code = db.bits.div_ceil(8);
    for i in 0..db.len() {
        let start = i * db.stride;
        let mut raw = Vec::with_capacity(db.stride * 8);
        for word in &db.words[start..start + db.stride] {
            raw.extend_from_slice(&word.to_le_bytes());
        }
        w.write_all(&raw[..bytes_per_code]).map_err(io_err)?;
    }
    for labels in &db.labels {
        w.write_all(&(labels.len() as u16).to_le_bytes()).map_err(io_err)?;
        for &label in labels {
            w.write_all(&label.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<CodeDatabase> {
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
    read_exact(&mut r, &mut magic, &name)?;
    if &magic != CODE_FILE_MAGIC {
        return Err(parse(format!("bad magic {magic:?}, expected HHFC")));
    }
    let version = read_u16(&mut r, &name)?;
    if version != CODE_FILE_VERSION {
        return Err(parse(format!("unsupported code file version {version}")));
    }
    let bits = read_u16(&mut r, &name)? as usize;
    if bits == 0 {
        return Err(parse("code length 0".into()));
    }
    let n = read_u64(&mut r, &name)? as usize;
    let bytes_per_code = bits.div_ceil(8);
    let stride = words_for(bits);

    let mut db = CodeDatabase::new(bits);
    let mut raw = vec![0u8; bytes_per_code];
    for i in 0..n {
        read_exact(&mut r, &mut raw, &name)?;
        let mut words = vec![0u64; stride];
        for (byte_idx, &byte) in raw.iter().enumerate() {
            words[byte_idx / 8] |= (byte as u64) << ((byte_idx % 8) * 8);
        }
        let code = BinaryCode::from_words(bits, words).map_err(|_| {
            parse(format!("record {i}: padding bits set beyond K={bits}"))
        })?;
        db.words.extend_from_slice(&code.words);
        db.ids.push(i as u64);
        db.labels.push(Vec::new());
    }
    for i in 0..n {
        let count = read_u16(&mut r, &name)? as usize;
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            labels.push(read_u32(&mut r, &name)?);
        }
        db.labels[i] = labels;
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => Ok(db),
        Ok(_) => Err(parse("trailing bytes after last record".into())),
        Err(e) => Err(HhfError::io(name.clone(), e)),
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], name: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| HhfError::io(name.to_string(), e))
}

fn read_u16<R: Read>(r: &mut R, name: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b, name)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, name: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, name)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, name: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, name)?;
    Ok(u64::from_le_bytes(b))
}
