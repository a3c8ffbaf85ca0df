//! Angle-index clustering baseline: candidates come from k-means (SED) over
//! vectors of quantized Givens-angle indices rather than over the complex
//! steering vectors themselves.

use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::givens::{
    angle_count, angle_indices, angles_from_indices, givens_decompose, givens_reconstruct,
};
use super::{
    group_count, representative, FeedbackReport, FeedbackScheme, GroupRepresentative,
    ReportPayload,
};
use crate::codebook::{
    deserialize, index_bits_for, kmeans_raw, FlatPoints, KmeansOptions, SerializedVector,
    TrainingDataset, TrainingMeta,
};
use crate::codebook::{dataset_digest, DistanceMetric};
use crate::error::{Error, Result};
use crate::numerics::{SteeringMatrix};

/// Training knobs for the angle-index codebook.
#[derive(Debug, Clone)]
pub struct IforOptions {
    pub n_k: usize,
    pub bits_phi: u8,
    pub bits_psi: u8,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl IforOptions {
    pub fn new(n_k: usize, seed: u64) -> Self {
        Self { n_k, bits_phi: 6, bits_psi: 4, seed, max_iter: 300, tol: 1e-6 }
    }
}

/// Codebook of rounded angle-index vectors plus their reconstructed
/// steering matrices, in index order.
#[derive(Debug, Clone)]
pub struct IforCodebook {
    /// Flat `n_k x (2 * angle_count)` storage: per candidate, the phi indices
    /// then the psi indices.
    index_vectors: Vec<u16>,
    candidates: Vec<SteeringMatrix>,
    n_r: usize,
    n_c: usize,
    bits_phi: u8,
    bits_psi: u8,
    meta: TrainingMeta,
}

impl IforCodebook {
    fn from_index_vectors(
        index_vectors: Vec<u16>,
        n_r: usize,
        n_c: usize,
        bits_phi: u8,
        bits_psi: u8,
        meta: TrainingMeta,
    ) -> Result<Self> {
        let per = angle_count(n_r, n_c);
        if per == 0 || index_vectors.is_empty() || !index_vectors.len().is_multiple_of(2 * per) {
            return Err(Error::InvalidArgument(
                "angle-index storage does not match the matrix shape".into(),
            ));
        }
        let n_k = index_vectors.len() / (2 * per);
        let mut candidates = Vec::with_capacity(n_k);
        for k in 0..n_k {
            let row = &index_vectors[k * 2 * per..(k + 1) * 2 * per];
            let angles =
                angles_from_indices(&row[..per], &row[per..], bits_phi, bits_psi, n_r, n_c)?;
            candidates.push(givens_reconstruct(&angles)?);
        }
        Ok(Self { index_vectors, candidates, n_r, n_c, bits_phi, bits_psi, meta })
    }

    pub fn n_k(&self) -> usize {
        self.candidates.len()
    }

    #[inline]
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    #[inline]
    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn bits(&self) -> (u8, u8) {
        (self.bits_phi, self.bits_psi)
    }

    pub fn candidate(&self, i: usize) -> &SteeringMatrix {
        &self.candidates[i]
    }

    pub fn index_vector(&self, i: usize) -> &[u16] {
        let w = 2 * angle_count(self.n_r, self.n_c);
        &self.index_vectors[i * w..(i + 1) * w]
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }
}

/// Converts one steering matrix to its quantized angle-index vector
/// (phi indices then psi indices).
fn angle_index_vector(v: &SteeringMatrix, bits_phi: u8, bits_psi: u8) -> Vec<u16> {
    let angles = givens_decompose(v);
    let (mut phi, mut psi) = angle_indices(&angles, bits_phi, bits_psi);
    phi.append(&mut psi);
    phi
}

/// Trains the angle-index codebook on the same dataset used for the
/// serialized-V codebooks, by clustering integer index vectors as reals.
pub fn train_ifor(dataset: &TrainingDataset, opts: &IforOptions) -> Result<IforCodebook> {
    let per = angle_count(dataset.n_r(), dataset.n_c());
    let dim = 2 * per;
    let mut flat = Vec::with_capacity(dataset.len() * dim);
    for i in 0..dataset.len() {
        let sv = SerializedVector::from_raw(
            dataset.point(i).to_vec(),
            dataset.n_r(),
            dataset.n_c(),
        )?;
        let v = SteeringMatrix::new(deserialize(&sv)?).map_err(|e| {
            Error::InvalidArgument(format!("dataset point {i} is not a steering matrix: {e}"))
        })?;
        let idx = angle_index_vector(&v, opts.bits_phi, opts.bits_psi);
        flat.extend(idx.iter().map(|&x| Complex64::new(x as f64, 0.0)));
    }

    let mut km = KmeansOptions::new(DistanceMetric::Sed, opts.seed);
    km.max_iter = opts.max_iter;
    km.tol = opts.tol;
    let raw = kmeans_raw(&FlatPoints::new(&flat, dim)?, opts.n_k, &km, dataset.n_c())?;

    let phi_levels = (1u32 << opts.bits_phi) as f64 - 1.0;
    let psi_levels = (1u32 << opts.bits_psi) as f64 - 1.0;
    let mut index_vectors = Vec::with_capacity(opts.n_k * dim);
    for k in 0..opts.n_k {
        for (pos, z) in raw.centroid(k).iter().enumerate() {
            let cap = if pos < per { phi_levels } else { psi_levels };
            index_vectors.push(z.re.round().clamp(0.0, cap) as u16);
        }
    }

    IforCodebook::from_index_vectors(
        index_vectors,
        dataset.n_r(),
        dataset.n_c(),
        opts.bits_phi,
        opts.bits_psi,
        TrainingMeta {
            dataset_hash: dataset_digest(dataset),
            iterations: raw.iterations,
            final_objective: raw.objective,
        },
    )
}

/// Nearest centroid in angle-index space under SED; ties go to the lowest
/// index.
pub fn ifor_select(v: &SteeringMatrix, cb: &IforCodebook) -> Result<usize> {
    if v.n_r() != cb.n_r || v.n_c() != cb.n_c {
        return Err(Error::InvalidArgument(format!(
            "steering matrix {}x{} does not match angle codebook {}x{}",
            v.n_r(),
            v.n_c(),
            cb.n_r,
            cb.n_c
        )));
    }
    let query = angle_index_vector(v, cb.bits_phi, cb.bits_psi);
    let mut best = f64::INFINITY;
    let mut best_k = 0usize;
    for k in 0..cb.n_k() {
        let cand = cb.index_vector(k);
        let mut d = 0.0;
        for (&a, &b) in query.iter().zip(cand) {
            let diff = a as f64 - b as f64;
            d += diff * diff;
        }
        if d < best {
            best = d;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Builds an angle-index report: one codebook index per subcarrier group.
pub fn generate_ifor_report(
    truth: &[SteeringMatrix],
    cb: &IforCodebook,
    n_g: usize,
    rule: GroupRepresentative,
) -> Result<FeedbackReport> {
    if n_g == 0 {
        return Err(Error::InvalidArgument("n_g must be at least 1".into()));
    }
    let mut indices = Vec::with_capacity(group_count(truth.len(), n_g));
    for group in truth.chunks(n_g) {
        let rep = representative(group, rule)?;
        indices.push(ifor_select(&rep, cb)? as u32);
    }
    Ok(FeedbackReport {
        scheme: FeedbackScheme::IndexIfor,
        n_g,
        bits_per_group: index_bits_for(cb.n_k()) as usize,
        payload: ReportPayload::Indices { indices, n_k: cb.n_k() as u32 },
    })
}

/// Maps an angle-index report to the per-group reconstructed matrices.
pub fn reconstruct_ifor(report: &FeedbackReport, cb: &IforCodebook) -> Result<Vec<SteeringMatrix>> {
    let ReportPayload::Indices { indices, n_k } = &report.payload else {
        return Err(Error::CorruptReport("angle-index payload expected".into()));
    };
    if *n_k as usize != cb.n_k() {
        return Err(Error::CorruptReport(format!(
            "report counts {n_k} candidates, codebook has {}",
            cb.n_k()
        )));
    }
    indices
        .iter()
        .map(|&i| {
            if (i as usize) < cb.n_k() {
                Ok(cb.candidate(i as usize).clone())
            } else {
                Err(Error::CorruptReport(format!("candidate index {i} out of range")))
            }
        })
        .collect()
}

const IFOR_MAGIC: &[u8; 8] = b"BFCBIFOR";
const FORMAT_VERSION: u32 = 1;

pub fn write_ifor_codebook(cb: &IforCodebook) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(IFOR_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cb.n_r as u32).to_le_bytes());
    buf.extend_from_slice(&(cb.n_c as u32).to_le_bytes());
    buf.extend_from_slice(&(cb.n_k() as u32).to_le_bytes());
    buf.push(cb.bits_phi);
    buf.push(cb.bits_psi);
    buf.extend_from_slice(&cb.meta.dataset_hash);
    buf.extend_from_slice(&cb.meta.iterations.to_le_bytes());
    buf.extend_from_slice(&cb.meta.final_objective.to_le_bytes());
    for &idx in &cb.index_vectors {
        buf.extend_from_slice(&idx.to_le_bytes());
    }
    buf
}

pub fn read_ifor_codebook(bytes: &[u8]) -> Result<IforCodebook> {
    let need = |cond: bool, what: &str| {
        if cond {
            Ok(())
        } else {
            Err(Error::Format(format!("truncated angle codebook ({what})")))
        }
    };
    need(bytes.len() >= 8 + 4 + 12 + 2 + 32 + 12, "header")?;
    if &bytes[..8] != IFOR_MAGIC {
        return Err(Error::Format("not an angle codebook file (bad magic)".into()));
    }
    let mut pos = 8;
    let u32_at = |pos: &mut usize| {
        let v = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap());
        *pos += 4;
        v
    };
    let version = u32_at(&mut pos);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported angle codebook version {version}")));
    }
    let n_r = u32_at(&mut pos) as usize;
    let n_c = u32_at(&mut pos) as usize;
    let n_k = u32_at(&mut pos) as usize;
    let bits_phi = bytes[pos];
    let bits_psi = bytes[pos + 1];
    pos += 2;
    let mut dataset_hash = [0u8; 32];
    dataset_hash.copy_from_slice(&bytes[pos..pos + 32]);
    pos += 32;
    let iterations = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
    pos += 4;
    let final_objective = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
    pos += 8;

    let per = angle_count(n_r, n_c);
    let total = n_k * 2 * per;
    need(bytes.len() == pos + total * 2, "index payload")?;
    let mut index_vectors = Vec::with_capacity(total);
    for _ in 0..total {
        index_vectors.push(u16::from_le_bytes(bytes[pos..pos + 2].try_into().unwrap()));
        pos += 2;
    }
    IforCodebook::from_index_vectors(
        index_vectors,
        n_r,
        n_c,
        bits_phi,
        bits_psi,
        TrainingMeta { dataset_hash, iterations, final_objective },
    )
}

pub fn save_ifor_codebook(cb: &IforCodebook, path: &Path) -> Result<()> {
    std::fs::write(path, write_ifor_codebook(cb)).map_err(|e| Error::io(path, e))
}

pub fn load_ifor_codebook(path: &Path) -> Result<IforCodebook> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_ifor_codebook(&bytes)
}

/// SHA-256 of the serialized angle codebook, for report provenance.
pub fn ifor_codebook_digest(cb: &IforCodebook) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(write_ifor_codebook(cb));
    hasher.finalize().into()
}
