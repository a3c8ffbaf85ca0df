//! Candidate-set construction: steering-matrix serialization, the two
//! clustering distance metrics, k-means training, and codebook persistence.

pub(crate) mod kmeans;
mod store;

pub use kmeans::{kmeans, kmeans_raw, FlatPoints, KmeansOptions, RawKmeans};
pub use store::{
    dataset_digest, load_codebook, load_dataset, read_codebook, read_dataset, save_codebook,
    save_dataset, write_codebook, write_dataset,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_realization, steering_from_channel, ChannelProfile};
use crate::error::{Error, Result};
use crate::numerics::{inner_product, norm_sqr, ComplexMatrix, SteeringMatrix};

/// Column-stacked vector form of a steering matrix: column 1's `N_r` entries
/// first, then column 2's, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct SerializedVector {
    values: Vec<Complex64>,
    n_r: usize,
    n_c: usize,
}

impl SerializedVector {
    pub fn from_raw(values: Vec<Complex64>, n_r: usize, n_c: usize) -> Result<Self> {
        if values.len() != n_r * n_c {
            return Err(Error::InvalidArgument(format!(
                "serialized vector needs {} entries for {n_r}x{n_c}, got {}",
                n_r * n_c,
                values.len()
            )));
        }
        Ok(Self { values, n_r, n_c })
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    #[inline]
    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rotates the whole vector so its first entry is real and non-negative.
    /// Optional pre-clustering switch; off by default.
    pub fn align_global_phase(&mut self) {
        if let Some(first) = self.values.iter().find(|z| z.norm() > 1e-15) {
            let factor = (first / first.norm()).conj();
            for z in &mut self.values {
                *z *= factor;
            }
        }
    }
}

/// Serializes a steering matrix column by column.
pub fn serialize(v: &SteeringMatrix) -> SerializedVector {
    let m = v.matrix();
    let mut values = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            values.push(m.get(i, j));
        }
    }
    SerializedVector { values, n_r: m.rows(), n_c: m.cols() }
}

/// Inverse of [`serialize`]. The result is a plain matrix: cluster centroids
/// are not unitary, so callers orthonormalize with `gram_schmidt` afterwards.
pub fn deserialize(s: &SerializedVector) -> Result<ComplexMatrix> {
    let mut m = ComplexMatrix::zeros(s.n_r, s.n_c);
    for j in 0..s.n_c {
        for i in 0..s.n_r {
            m.set(i, j, s.values[j * s.n_r + i]);
        }
    }
    ComplexMatrix::new(s.n_r, s.n_c, m.entries().to_vec())
}

/// Distance metric used for clustering and candidate selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Cosine distance `1 - |a^H b| / (||a|| ||b||)`; invariant to a common
    /// phase on either vector.
    Cd,
    /// Squared Euclidean distance `||a - b||^2`.
    Sed,
}

impl DistanceMetric {
    pub fn tag(&self) -> u8 {
        match self {
            DistanceMetric::Cd => 0,
            DistanceMetric::Sed => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(DistanceMetric::Cd),
            1 => Ok(DistanceMetric::Sed),
            other => Err(Error::Format(format!("unknown metric tag {other}"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DistanceMetric::Cd => "cd",
            DistanceMetric::Sed => "sed",
        }
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cd" => Ok(DistanceMetric::Cd),
            "sed" => Ok(DistanceMetric::Sed),
            other => Err(Error::Config(format!("unknown metric '{other}' (use cd | sed)"))),
        }
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Cosine-distance denominator. `NormProduct` is the default and keeps CD in
/// `[0, 1]`; `ColumnsSquared` divides by `N_c^2` instead, kept selectable as a
/// compatibility switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdNormalization {
    #[default]
    NormProduct,
    ColumnsSquared,
}

/// Distance between two serialized vectors under the chosen metric.
pub fn distance(a: &SerializedVector, b: &SerializedVector, metric: DistanceMetric) -> Result<f64> {
    distance_with(a, b, metric, CdNormalization::NormProduct)
}

pub fn distance_with(
    a: &SerializedVector,
    b: &SerializedVector,
    metric: DistanceMetric,
    cd_norm: CdNormalization,
) -> Result<f64> {
    if a.n_r != b.n_r || a.n_c != b.n_c {
        return Err(Error::InvalidArgument(format!(
            "distance shape mismatch: {}x{} vs {}x{}",
            a.n_r, a.n_c, b.n_r, b.n_c
        )));
    }
    match metric {
        DistanceMetric::Sed => {
            let mut acc = 0.0;
            for (x, y) in a.values.iter().zip(&b.values) {
                acc += (x - y).norm_sqr();
            }
            Ok(acc)
        }
        DistanceMetric::Cd => {
            let na = norm_sqr(&a.values).sqrt();
            let nb = norm_sqr(&b.values).sqrt();
            if na == 0.0 || nb == 0.0 {
                return Err(Error::InvalidArgument(
                    "cosine distance undefined for a zero-norm vector".into(),
                ));
            }
            let ip = inner_product(&a.values, &b.values)?;
            let denom = match cd_norm {
                CdNormalization::NormProduct => na * nb,
                CdNormalization::ColumnsSquared => (a.n_c * a.n_c) as f64,
            };
            Ok(1.0 - ip.norm() / denom)
        }
    }
}

/// Where one training point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointProvenance {
    pub profile_index: u32,
    pub seed: u64,
    pub subcarrier: u32,
}

/// Serialized steering vectors of uniform shape plus per-point provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDataset {
    n_r: usize,
    n_c: usize,
    /// Flat point storage, `len * dim` entries.
    data: Vec<Complex64>,
    provenance: Vec<PointProvenance>,
    profile_names: Vec<String>,
}

impl TrainingDataset {
    pub fn new(n_r: usize, n_c: usize, profile_names: Vec<String>) -> Self {
        Self { n_r, n_c, data: Vec::new(), provenance: Vec::new(), profile_names }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n_r * self.n_c
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    #[inline]
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    #[inline]
    pub fn n_c(&self) -> usize {
        self.n_c
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[Complex64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn points_flat(&self) -> &[Complex64] {
        &self.data
    }

    pub fn provenance(&self) -> &[PointProvenance] {
        &self.provenance
    }

    pub fn profile_names(&self) -> &[String] {
        &self.profile_names
    }

    pub fn push(&mut self, point: &SerializedVector, provenance: PointProvenance) -> Result<()> {
        if point.n_r != self.n_r || point.n_c != self.n_c {
            return Err(Error::InvalidArgument(format!(
                "dataset point shape {}x{} does not match dataset {}x{}",
                point.n_r, point.n_c, self.n_r, self.n_c
            )));
        }
        if provenance.profile_index as usize >= self.profile_names.len() {
            return Err(Error::InvalidArgument("provenance profile index out of range".into()));
        }
        self.data.extend_from_slice(&point.values);
        self.provenance.push(provenance);
        Ok(())
    }

    pub(crate) fn from_parts(
        n_r: usize,
        n_c: usize,
        data: Vec<Complex64>,
        provenance: Vec<PointProvenance>,
        profile_names: Vec<String>,
    ) -> Result<Self> {
        if data.len() != provenance.len() * n_r * n_c {
            return Err(Error::Format("dataset payload/provenance size mismatch".into()));
        }
        Ok(Self { n_r, n_c, data, provenance, profile_names })
    }

    /// Optional pre-clustering normalization: rotates every point so its
    /// first entry is real and non-negative. Off by default; selection-side
    /// queries are not aligned, so enabling this mainly suits CD pipelines
    /// (which ignore a common phase anyway).
    pub fn align_global_phases(&mut self) {
        let d = self.dim();
        for point in self.data.chunks_mut(d) {
            if let Some(first) = point.iter().find(|z| z.norm() > 1e-15) {
                let factor = (first / first.norm()).conj();
                for z in point {
                    *z *= factor;
                }
            }
        }
    }
}

/// Builds a training dataset: every profile contributes `seeds_per_profile`
/// realizations, each decomposed into per-subcarrier steering vectors.
pub fn build_dataset(
    profiles: &[ChannelProfile],
    seeds_per_profile: usize,
    n_sc: usize,
    n_c: usize,
    base_seed: u64,
) -> Result<TrainingDataset> {
    let entries: Vec<(&ChannelProfile, usize)> =
        profiles.iter().map(|p| (p, seeds_per_profile)).collect();
    build_dataset_weighted(&entries, n_sc, n_c, base_seed)
}

/// As [`build_dataset`] with an explicit per-profile realization count, which
/// is how dataset mixing weights are realized.
pub fn build_dataset_weighted(
    entries: &[(&ChannelProfile, usize)],
    n_sc: usize,
    n_c: usize,
    base_seed: u64,
) -> Result<TrainingDataset> {
    if entries.is_empty() {
        return Err(Error::InvalidArgument("need at least one channel profile".into()));
    }
    let n_r = entries[0].0.n_r;
    for (p, _) in entries {
        p.validate()?;
        if p.n_r != n_r {
            return Err(Error::InvalidArgument(
                "all profiles in one dataset must share n_r".into(),
            ));
        }
    }

    let names: Vec<String> = entries.iter().map(|(p, _)| p.name.clone()).collect();
    let mut dataset = TrainingDataset::new(n_r, n_c, names);
    for (profile_index, (profile, count)) in entries.iter().enumerate() {
        for j in 0..*count {
            // Realization seeds are a pure function of (base seed, profile slot,
            // seed slot) so datasets are reproducible point for point.
            let seed = base_seed
                .wrapping_add((profile_index as u64) << 32)
                .wrapping_add(j as u64);
            let realization = generate_realization(profile, n_sc, seed)?;
            let steering = steering_from_channel(&realization, n_c)?;
            for (sc, v) in steering.iter().enumerate() {
                dataset.push(
                    &serialize(v),
                    PointProvenance {
                        profile_index: profile_index as u32,
                        seed,
                        subcarrier: sc as u32,
                    },
                )?;
            }
        }
    }
    Ok(dataset)
}

/// Training metadata carried by a codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub dataset_hash: [u8; 32],
    pub iterations: u32,
    pub final_objective: f64,
}

/// An ordered candidate set. The index of a candidate is the wire
/// representation: feedback index `i` always refers to `candidates[i]`.
#[derive(Debug, Clone)]
pub struct Codebook {
    candidates: Vec<SteeringMatrix>,
    /// Serialized candidates, flat, for the selection scan.
    serialized: Vec<Complex64>,
    metric: DistanceMetric,
    n_r: usize,
    n_c: usize,
    meta: TrainingMeta,
}

impl Codebook {
    pub fn new(
        candidates: Vec<SteeringMatrix>,
        metric: DistanceMetric,
        meta: TrainingMeta,
    ) -> Result<Self> {
        let first = candidates
            .first()
            .ok_or_else(|| Error::InvalidArgument("codebook needs at least one candidate".into()))?;
        let (n_r, n_c) = (first.n_r(), first.n_c());
        let mut serialized = Vec::with_capacity(candidates.len() * n_r * n_c);
        for cand in &candidates {
            if cand.n_r() != n_r || cand.n_c() != n_c {
                return Err(Error::InvalidArgument("codebook candidates differ in shape".into()));
            }
            serialized.extend_from_slice(&serialize(cand).values);
        }
        Ok(Self { candidates, serialized, metric, n_r, n_c, meta })
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

    pub fn candidates(&self) -> &[SteeringMatrix] {
        &self.candidates
    }

    pub fn candidate(&self, i: usize) -> &SteeringMatrix {
        &self.candidates[i]
    }

    /// Serialized form of candidate `i` (column-stacked, same order as
    /// [`serialize`]).
    #[inline]
    pub fn serialized_candidate(&self, i: usize) -> &[Complex64] {
        let d = self.n_r * self.n_c;
        &self.serialized[i * d..(i + 1) * d]
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Bits needed to address a candidate: `ceil(log2 n_k)`.
    pub fn index_bits(&self) -> u32 {
        index_bits_for(self.n_k())
    }
}

/// `ceil(log2 n)`: the index width used on the wire. A single-candidate
/// codebook needs no bits at all.
pub fn index_bits_for(n_k: usize) -> u32 {
    if n_k <= 1 {
        0
    } else {
        (n_k - 1).ilog2() + 1
    }
}
