//! Binary persistence for datasets and codebooks.
//!
//! Both formats are little-endian with an 8-byte magic and a u32 version.
//! Complex payloads are interleaved (re, im) f64 pairs; candidates are stored
//! in index order, which is the wire contract for feedback indices.

use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, SteeringMatrix};

use super::{
    Codebook, DistanceMetric, PointProvenance, SerializedVector, TrainingDataset, TrainingMeta,
};

const DATASET_MAGIC: &[u8; 8] = b"BFCBDSET";
const CODEBOOK_MAGIC: &[u8; 8] = b"BFCBBOOK";
const FORMAT_VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn complex(&mut self, z: Complex64) {
        self.f64(z.re);
        self.f64(z.im);
    }

    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!(
                "truncated file: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn complex(&mut self) -> Result<Complex64> {
        Ok(Complex64::new(self.f64()?, self.f64()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Format("non-utf8 string in file".into()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Encodes a dataset into its canonical byte representation.
pub fn write_dataset(ds: &TrainingDataset) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(DATASET_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(ds.n_r() as u32);
    w.u32(ds.n_c() as u32);
    w.u64(ds.len() as u64);
    w.u32(ds.profile_names().len() as u32);
    for name in ds.profile_names() {
        w.string(name);
    }
    for z in ds.points_flat() {
        w.complex(*z);
    }
    for p in ds.provenance() {
        w.u32(p.profile_index);
        w.u64(p.seed);
        w.u32(p.subcarrier);
    }
    w.buf
}

pub fn read_dataset(bytes: &[u8]) -> Result<TrainingDataset> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != DATASET_MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let n_r = r.u32()? as usize;
    let n_c = r.u32()? as usize;
    let n_points = r.u64()? as usize;
    let n_profiles = r.u32()? as usize;
    let mut profile_names = Vec::with_capacity(n_profiles);
    for _ in 0..n_profiles {
        profile_names.push(r.string()?);
    }
    let dim = n_r
        .checked_mul(n_c)
        .ok_or_else(|| Error::Format("dataset shape overflow".into()))?;
    let total = n_points
        .checked_mul(dim)
        .ok_or_else(|| Error::Format("dataset size overflow".into()))?;
    let mut data = Vec::with_capacity(total);
    for _ in 0..total {
        data.push(r.complex()?);
    }
    let mut provenance = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let profile_index = r.u32()?;
        let seed = r.u64()?;
        let subcarrier = r.u32()?;
        if profile_index as usize >= profile_names.len() {
            return Err(Error::Format("provenance profile index out of range".into()));
        }
        provenance.push(PointProvenance { profile_index, seed, subcarrier });
    }
    r.finish()?;
    TrainingDataset::from_parts(n_r, n_c, data, provenance, profile_names)
}

pub fn save_dataset(ds: &TrainingDataset, path: &Path) -> Result<()> {
    std::fs::write(path, write_dataset(ds)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<TrainingDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_dataset(&bytes)
}

/// SHA-256 over the canonical dataset bytes; recorded in trained codebooks.
pub fn dataset_digest(ds: &TrainingDataset) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(write_dataset(ds));
    hasher.finalize().into()
}

/// Encodes a codebook; candidates are packed in index order, column-stacked.
pub fn write_codebook(cb: &Codebook) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(CODEBOOK_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(cb.n_r() as u32);
    w.u32(cb.n_c() as u32);
    w.u32(cb.n_k() as u32);
    w.u8(cb.metric().tag());
    w.bytes(&cb.meta().dataset_hash);
    w.u32(cb.meta().iterations);
    w.f64(cb.meta().final_objective);
    for i in 0..cb.n_k() {
        for z in cb.serialized_candidate(i) {
            w.complex(*z);
        }
    }
    w.buf
}

pub fn read_codebook(bytes: &[u8]) -> Result<Codebook> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != CODEBOOK_MAGIC {
        return Err(Error::Format("not a codebook file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported codebook version {version}")));
    }
    let n_r = r.u32()? as usize;
    let n_c = r.u32()? as usize;
    let n_k = r.u32()? as usize;
    let metric = DistanceMetric::from_tag(r.u8()?)?;
    let mut dataset_hash = [0u8; 32];
    dataset_hash.copy_from_slice(r.take(32)?);
    let iterations = r.u32()?;
    let final_objective = r.f64()?;

    let dim = n_r
        .checked_mul(n_c)
        .ok_or_else(|| Error::Format("codebook shape overflow".into()))?;
    let mut candidates = Vec::with_capacity(n_k);
    for i in 0..n_k {
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(r.complex()?);
        }
        let sv = SerializedVector::from_raw(values, n_r, n_c)
            .map_err(|e| Error::Format(format!("candidate {i}: {e}")))?;
        let m = super::deserialize(&sv)?;
        let m = ComplexMatrix::new(n_r, n_c, m.entries().to_vec())?;
        let steering = SteeringMatrix::new(m)
            .map_err(|e| Error::Format(format!("candidate {i} is not unitary: {e}")))?;
        candidates.push(steering);
    }
    r.finish()?;
    Codebook::new(candidates, metric, TrainingMeta { dataset_hash, iterations, final_objective })
}

pub fn save_codebook(cb: &Codebook, path: &Path) -> Result<()> {
    std::fs::write(path, write_codebook(cb)).map_err(|e| Error::io(path, e))
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_codebook(&bytes)
}
