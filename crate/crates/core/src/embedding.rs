//! Dense document embeddings: the `.pemb` binary format, CSV interchange, and
//! a seeded non-neural fallback embedder.
//!
//! # `.pemb` layout (little-endian)
//!
//! | field    | type            |
//! |----------|-----------------|
//! | magic    | `b"PEMB"`       |
//! | version  | `u16` = 1       |
//! | dtype    | `u8`: 4 = f32, 8 = f64 |
//! | reserved | `u8` = 0        |
//! | n_docs   | `u64`           |
//! | dim      | `u32`           |
//! | n_ids    | `u64` (must equal n_docs) |
//! | ids      | `n_ids` × (`u32` byte length, UTF-8 bytes) |
//! | payload  | `n_docs × dim` reals, row-major |
//!
//! Writers use 4-byte reals whenever every value is exactly representable
//! in `f32` (always the case for externally encoded embeddings) and fall back
//! to 8-byte reals otherwise, so a save/load round trip is always bit-exact.
//! A 63,326 × 384 matrix is 97,268,736 payload bytes (about 93 MiB) at 4 bytes
//! per value, and twice that in memory, where values are held as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::textprep::DocTermCounts;

const MAGIC: &[u8; 4] = b"PEMB";
const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad embedding header: {0}")]
    Header(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding has no row for document {0}")]
    MissingDocument(String),
    #[error("duplicate document id {0} in embedding")]
    DuplicateDocument(String),
    #[error("embedding dimension must be at least 2, got {0}")]
    DimTooSmall(usize),
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

/// Row-major `n_docs × dim` matrix with one id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    doc_ids: Vec<String>,
    values: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(doc_ids: Vec<String>, values: Array2<f64>) -> Result<Self, EmbeddingError> {
        if doc_ids.len() != values.nrows() {
            return Err(EmbeddingError::Header(format!("{} ids for {} rows", doc_ids.len(), values.nrows())));
        }
        if values.ncols() < 2 {
            return Err(EmbeddingError::DimTooSmall(values.ncols()));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { row, col });
        }
        let mut sorted: Vec<&String> = doc_ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(EmbeddingError::DuplicateDocument(w[0].clone()));
        }
        Ok(EmbeddingMatrix { doc_ids, values })
    }

    pub fn n_docs(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn with_doc_ids(self, doc_ids: Vec<String>) -> Result<Self, EmbeddingError> {
        Self::new(doc_ids, self.values)
    }

    pub fn expect_dim(&self, expected: usize) -> Result<(), EmbeddingError> {
        if self.dim() != expected {
            return Err(EmbeddingError::DimensionMismatch { expected, found: self.dim() });
        }
        Ok(())
    }

    /// Reorders rows to follow `ids`; every id must be present.
    pub fn align_to(&self, ids: &[String]) -> Result<Self, EmbeddingError> {
        let pos: std::collections::HashMap<&str, usize> =
            self.doc_ids.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
        let rows: Vec<usize> = ids
            .iter()
            .map(|id| pos.get(id.as_str()).copied().ok_or_else(|| EmbeddingError::MissingDocument(id.clone())))
            .collect::<Result<_, _>>()?;
        Ok(EmbeddingMatrix { doc_ids: ids.to_vec(), values: self.values.select(Axis(0), &rows) })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io { path: path.to_path_buf(), source }
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<(), EmbeddingError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write_pemb(m, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_pemb<W: Write>(m: &EmbeddingMatrix, w: &mut W) -> std::io::Result<()> {
    let narrow = m.values.iter().all(|&v| f64::from(v as f32) == v);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[if narrow { 4 } else { 8 }, 0])?;
    w.write_all(&(m.n_docs() as u64).to_le_bytes())?;
    w.write_all(&(m.dim() as u32).to_le_bytes())?;
    w.write_all(&(m.doc_ids.len() as u64).to_le_bytes())?;
    for id in &m.doc_ids {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    for &v in m.values.iter() {
        if narrow {
            w.write_all(&(v as f32).to_le_bytes())?;
        } else {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix, EmbeddingError> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return load_embeddings_csv(path);
    }
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err(path))?;
    read_pemb(&bytes)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], EmbeddingError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| EmbeddingError::Header(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, EmbeddingError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_pemb(bytes: &[u8]) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(EmbeddingError::Header("bad magic".into()));
    }
    let version = u16::from_le_bytes(c.take(2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(EmbeddingError::Header(format!("unsupported version {version}")));
    }
    let dtype = c.take(2, "dtype")?[0];
    if dtype != 4 && dtype != 8 {
        return Err(EmbeddingError::Header(format!("unknown dtype {dtype}")));
    }
    let n_docs = c.u64("n_docs")? as usize;
    let dim = c.u32("dim")? as usize;
    let n_ids = c.u64("n_ids")? as usize;
    if n_ids != n_docs {
        return Err(EmbeddingError::Header(format!("n_docs = {n_docs} but {n_ids} id entries")));
    }
    let mut ids = Vec::with_capacity(n_ids);
    for _ in 0..n_ids {
        let len = c.u32("id length")? as usize;
        let raw = c.take(len, "id")?;
        ids.push(String::from_utf8(raw.to_vec()).map_err(|_| EmbeddingError::Header("id is not UTF-8".into()))?);
    }
    let expected = n_docs
        .checked_mul(dim)
        .and_then(|x| x.checked_mul(dtype as usize))
        .ok_or_else(|| EmbeddingError::Header("payload size overflows".into()))?;
    let payload = &bytes[c.pos..];
    if payload.len() != expected {
        return Err(EmbeddingError::Header(format!("payload is {} bytes, expected {expected}", payload.len())));
    }
    let values: Vec<f64> = if dtype == 4 {
        payload.chunks_exact(4).map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap()))).collect()
    } else {
        payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect()
    };
    let values = Array2::from_shape_vec((n_docs, dim), values).expect("shape checked");
    EmbeddingMatrix::new(ids, values)
}

/// Reads `doc_id,v0,...,v{dim-1}`.
pub fn load_embeddings_csv(path: &Path) -> Result<EmbeddingMatrix, EmbeddingError> {
    let csv_err = |message: String| EmbeddingError::Csv { path: path.to_path_buf(), message };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(e.to_string()))?;
    let header = rdr.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    if header.get(0) != Some("doc_id") {
        return Err(csv_err("first column must be doc_id".into()));
    }
    let dim = header.len() - 1;
    for (j, h) in header.iter().skip(1).enumerate() {
        if h != format!("v{j}") {
            return Err(csv_err(format!("column {} should be v{j}, found {h}", j + 1)));
        }
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(e.to_string()))?;
        if rec.len() != dim + 1 {
            return Err(EmbeddingError::DimensionMismatch { expected: dim, found: rec.len().saturating_sub(1) });
        }
        ids.push(rec[0].to_string());
        for v in rec.iter().skip(1) {
            values.push(v.trim().parse::<f64>().map_err(|e| csv_err(format!("{v:?}: {e}")))?);
        }
    }
    let n = ids.len();
    EmbeddingMatrix::new(ids, Array2::from_shape_vec((n, dim), values).expect("row lengths checked"))
}

pub fn save_embeddings_csv(m: &EmbeddingMatrix, path: &Path) -> Result<(), EmbeddingError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut line = String::from("doc_id");
    for j in 0..m.dim() {
        line.push_str(&format!(",v{j}"));
    }
    writeln!(w, "{line}").map_err(io_err(path))?;
    for (id, row) in m.doc_ids.iter().zip(m.values.rows()) {
        let vals: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{id},{}", vals.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// TF-IDF weighted counts pushed through a seeded sparse `{-1, 0, +1}`
/// projection and L2-normalized.
///
/// Each vocabulary term gets a projection row whose entries are non-zero with
/// probability `1/sqrt(|V|)` (at least one non-zero entry is forced). Row ids
/// are `"0"`, `"1"`, ...; relabel with [`EmbeddingMatrix::with_doc_ids`].
pub fn fallback_embed(doc_term: &DocTermCounts, dim: usize, seed: u64) -> Result<EmbeddingMatrix, EmbeddingError> {
    if dim < 2 {
        return Err(EmbeddingError::DimTooSmall(dim));
    }
    let n_terms = doc_term.n_terms();
    if n_terms == 0 {
        return Err(EmbeddingError::EmptyVocabulary);
    }
    let density = (1.0 / (n_terms as f64).sqrt()).min(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut projection = vec![0i8; n_terms * dim];
    for t in 0..n_terms {
        let row = &mut projection[t * dim..(t + 1) * dim];
        for v in row.iter_mut() {
            if rng.gen_bool(density) {
                *v = if rng.gen_bool(0.5) { 1 } else { -1 };
            }
        }
        if row.iter().all(|&v| v == 0) {
            let c = rng.gen_range(0..dim);
            row[c] = if rng.gen_bool(0.5) { 1 } else { -1 };
        }
    }

    let n_docs = doc_term.n_docs();
    let mut df = vec![0usize; n_terms];
    for row in doc_term.rows() {
        for &(t, _) in row {
            df[t as usize] += 1;
        }
    }
    let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n_docs as f64) / (1.0 + d as f64)).ln() + 1.0).collect();

    let mut values = Array2::<f64>::zeros((n_docs, dim));
    for (d, mut out) in values.rows_mut().into_iter().enumerate() {
        for &(t, count) in doc_term.row(d) {
            let w = f64::from(count) * idf[t as usize];
            let proj = &projection[t as usize * dim..(t as usize + 1) * dim];
            for (o, &p) in out.iter_mut().zip(proj) {
                *o += w * f64::from(p);
            }
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.mapv_inplace(|v| v / norm);
        } else {
            // Empty document, or exact cancellation: a fixed unit vector.
            out[0] = 1.0;
        }
    }
    let ids = (0..n_docs).map(|i| i.to_string()).collect();
    EmbeddingMatrix::new(ids, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::build_doc_term;

    fn small() -> EmbeddingMatrix {
        let v = Array2::from_shape_vec((3, 4), (0..12).map(|x| x as f64 * 0.25 - 1.0).collect()).unwrap();
        EmbeddingMatrix::new(vec!["p1".into(), "p2".into(), "p3".into()], v).unwrap()
    }

    #[test]
    fn roundtrip_is_exact_f32_and_f64() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.pemb");
        let m = small();
        save_embeddings(&m, &p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, 4 + 2 + 2 + 8 + 4 + 8 + 3 * (4 + 2) + 12 * 4);
        assert_eq!(load_embeddings(&p).unwrap(), m);

        let wide = EmbeddingMatrix::new(vec!["a".into()], Array2::from_shape_vec((1, 2), vec![0.1, 1.0 / 3.0]).unwrap()).unwrap();
        save_embeddings(&wide, &p).unwrap();
        assert_eq!(load_embeddings(&p).unwrap(), wide);
    }

    #[test]
    fn id_count_mismatch_is_header_error() {
        let mut bytes = Vec::new();
        write_pemb(&small(), &mut bytes).unwrap();
        // n_docs field sits after magic(4) + version(2) + dtype/reserved(2).
        bytes[8..16].copy_from_slice(&2u64.to_le_bytes());
        let err = read_pemb(&bytes).unwrap_err();
        assert!(matches!(err, EmbeddingError::Header(ref m) if m.contains("3 id entries")), "{err}");
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut bytes = Vec::new();
        write_pemb(&small(), &mut bytes).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_pemb(&bytes), Err(EmbeddingError::NonFinite { row: 2, col: 3 })));
    }

    #[test]
    fn truncated_payload_rejected() {
        let mut bytes = Vec::new();
        write_pemb(&small(), &mut bytes).unwrap();
        bytes.pop();
        assert!(matches!(read_pemb(&bytes), Err(EmbeddingError::Header(_))));
    }

    #[test]
    fn csv_roundtrip_and_alignment() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let m = small();
        save_embeddings_csv(&m, &p).unwrap();
        let back = load_embeddings(&p).unwrap();
        assert_eq!(back, m);
        let aligned = back.align_to(&["p3".into(), "p1".into()]).unwrap();
        assert_eq!(aligned.values().row(0), m.values().row(2));
        assert!(matches!(back.align_to(&["zz".into()]), Err(EmbeddingError::MissingDocument(_))));
        assert!(matches!(back.expect_dim(384), Err(EmbeddingError::DimensionMismatch { expected: 384, found: 4 })));
    }

    fn docs(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter().map(|d| d.split_whitespace().map(str::to_string).collect()).collect()
    }

    #[test]
    fn fallback_is_deterministic_and_normalized() {
        let (_, m) = build_doc_term(&docs(&["wind turbine blade", "wind turbine blade", "battery cell", ""]), 1).unwrap();
        let e = fallback_embed(&m, 8, 7).unwrap();
        assert_eq!(e.values().row(0), e.values().row(1));
        for row in e.values().rows() {
            let n: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
        assert_eq!(e, fallback_embed(&m, 8, 7).unwrap());
        assert_ne!(e, fallback_embed(&m, 8, 2).unwrap());
        assert!(matches!(fallback_embed(&m, 1, 7), Err(EmbeddingError::DimTooSmall(1))));
    }

    #[test]
    fn fallback_separates_disjoint_vocabularies() {
        let planted = greenai_fixtures::planted_corpus(60, 2, 25, 30, 11);
        let toks: Vec<Vec<String>> = planted
            .abstracts
            .iter()
            .map(|a| a.split_whitespace().filter(|w| planted.vocabularies.iter().flatten().any(|v| v == w)).map(str::to_string).collect())
            .collect();
        let (_, m) = build_doc_term(&toks, 1).unwrap();
        let e = fallback_embed(&m, 16, 5).unwrap();
        let v = e.values();
        let (mut within, mut nw, mut cross, mut nc) = (0.0, 0, 0.0, 0);
        for i in 0..v.nrows() {
            for j in i + 1..v.nrows() {
                let cos = v.row(i).dot(&v.row(j));
                if planted.labels[i] == planted.labels[j] {
                    within += cos;
                    nw += 1;
                } else {
                    cross += cos;
                    nc += 1;
                }
            }
        }
        assert!(within / nw as f64 > cross / nc as f64);
    }
}
