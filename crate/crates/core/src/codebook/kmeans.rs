//! Lloyd k-means over complex vectors with CD or SED assignment.
//!
//! Assignment parallelizes over points; every reduction (objective sums,
//! centroid accumulation, empty-cluster reseeding) runs in point order, so the
//! result is independent of the number of worker threads.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashSet;

use super::store::dataset_digest;
use super::{
    deserialize, CdNormalization, Codebook, DistanceMetric, SerializedVector, TrainingDataset,
    TrainingMeta,
};
use crate::error::{Error, Result};
use crate::numerics::gram_schmidt;

/// Knobs for one clustering run.
#[derive(Debug, Clone)]
pub struct KmeansOptions {
    pub metric: DistanceMetric,
    pub cd_normalization: CdNormalization,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl KmeansOptions {
    pub fn new(metric: DistanceMetric, seed: u64) -> Self {
        Self {
            metric,
            cd_normalization: CdNormalization::NormProduct,
            seed,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// Borrowed view of uniformly shaped points in flat storage.
#[derive(Debug, Clone, Copy)]
pub struct FlatPoints<'a> {
    data: &'a [Complex64],
    dim: usize,
}

impl<'a> FlatPoints<'a> {
    pub fn new(data: &'a [Complex64], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "flat point storage of {} entries is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &'a [Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Raw clustering output: centroids are arithmetic means, not yet
/// orthonormalized.
#[derive(Debug, Clone)]
pub struct RawKmeans {
    centroids: Vec<Complex64>,
    dim: usize,
    pub iterations: u32,
    pub objective: f64,
    /// Objective after each assignment step.
    pub history: Vec<f64>,
    pub assignments: Vec<u32>,
}

impl RawKmeans {
    pub fn n_k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    #[inline]
    pub fn centroid(&self, k: usize) -> &[Complex64] {
        &self.centroids[k * self.dim..(k + 1) * self.dim]
    }
}

#[inline]
pub(crate) fn ip_re(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut re = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
    }
    re
}

#[inline]
pub(crate) fn ip_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    (re * re + im * im).sqrt()
}

#[inline]
pub(crate) fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Distance from one point to every centroid; returns the best (index, value).
/// Ties resolve to the lowest index.
#[inline]
#[allow(clippy::too_many_arguments)]
fn nearest(
    point: &[Complex64],
    point_norm_sq: f64,
    centroids: &[Complex64],
    centroid_norms: &[f64],
    dim: usize,
    metric: DistanceMetric,
    cd_norm: CdNormalization,
    n_c_sq: f64,
) -> (u32, f64) {
    let mut best_k = 0u32;
    let mut best = f64::INFINITY;
    for (k, cn) in centroid_norms.iter().enumerate() {
        let cent = &centroids[k * dim..(k + 1) * dim];
        let d = match metric {
            DistanceMetric::Sed => {
                let re = ip_re(point, cent);
                (point_norm_sq + cn * cn - 2.0 * re).max(0.0)
            }
            DistanceMetric::Cd => {
                if *cn == 0.0 {
                    f64::INFINITY
                } else {
                    let denom = match cd_norm {
                        CdNormalization::NormProduct => point_norm_sq.sqrt() * cn,
                        CdNormalization::ColumnsSquared => n_c_sq,
                    };
                    1.0 - ip_norm(point, cent) / denom
                }
            }
        };
        if d < best {
            best = d;
            best_k = k as u32;
        }
    }
    (best_k, best)
}

/// Deterministic empty-cluster rule: each empty centroid (ascending index) is
/// re-seeded to the not-yet-used point farthest from its nearest centroid.
fn reseed_empty(
    counts: &[usize],
    dists: &[f64],
    points: &FlatPoints<'_>,
    centroids: &mut [Complex64],
    dim: usize,
) {
    let mut used = vec![false; points.len()];
    for k in 0..counts.len() {
        if counts[k] > 0 {
            continue;
        }
        let mut best_idx = None;
        let mut best = f64::NEG_INFINITY;
        for (i, &d) in dists.iter().enumerate() {
            if !used[i] && d > best {
                best = d;
                best_idx = Some(i);
            }
        }
        if let Some(i) = best_idx {
            used[i] = true;
            centroids[k * dim..(k + 1) * dim].copy_from_slice(points.point(i));
        }
    }
}

/// Greedy farthest-point seeding: the first centroid comes from the run seed,
/// each following one is the point with the largest distance to its nearest
/// already-chosen centroid.
fn init_centroids(
    points: &FlatPoints<'_>,
    n_k: usize,
    opts: &KmeansOptions,
    point_norms_sq: &[f64],
    n_c_sq: f64,
) -> Vec<Complex64> {
    let dim = points.dim();
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let first = rng.gen_range(0..n);

    let mut centroids = Vec::with_capacity(n_k * dim);
    centroids.extend_from_slice(points.point(first));

    let single_norm = [norm_sq(points.point(first)).sqrt()];
    let mut min_dist: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            nearest(
                points.point(i),
                point_norms_sq[i],
                &centroids,
                &single_norm,
                dim,
                opts.metric,
                opts.cd_normalization,
                n_c_sq,
            )
            .1
        })
        .collect();

    for _ in 1..n_k {
        let mut best_idx = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > best {
                best = d;
                best_idx = i;
            }
        }
        let new_point = points.point(best_idx);
        centroids.extend_from_slice(new_point);
        let new_norm = [norm_sq(new_point).sqrt()];
        min_dist = (0..n)
            .into_par_iter()
            .map(|i| {
                let d = nearest(
                    points.point(i),
                    point_norms_sq[i],
                    new_point,
                    &new_norm,
                    dim,
                    opts.metric,
                    opts.cd_normalization,
                    n_c_sq,
                )
                .1;
                d.min(min_dist[i])
            })
            .collect();
    }
    centroids
}

/// Lloyd iteration over flat complex points. `n_c_for_cd` feeds the
/// `ColumnsSquared` compatibility denominator and is ignored otherwise.
pub fn kmeans_raw(
    points: &FlatPoints<'_>,
    n_k: usize,
    opts: &KmeansOptions,
    n_c_for_cd: usize,
) -> Result<RawKmeans> {
    let n = points.len();
    let dim = points.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("k-means needs a nonempty dataset".into()));
    }
    if n_k == 0 {
        return Err(Error::InvalidArgument("k-means needs n_k >= 1".into()));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("k-means needs max_iter >= 1".into()));
    }
    let distinct = count_distinct(points);
    if n_k > distinct {
        return Err(Error::InvalidArgument(format!(
            "n_k = {n_k} exceeds the {distinct} distinct points in the dataset"
        )));
    }

    let point_norms_sq: Vec<f64> = (0..n).map(|i| norm_sq(points.point(i))).collect();
    if opts.metric == DistanceMetric::Cd {
        if let Some(i) = point_norms_sq.iter().position(|&x| x == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cosine distance undefined for zero-norm point {i}"
            )));
        }
    }
    let n_c_sq = (n_c_for_cd * n_c_for_cd) as f64;

    let mut centroids = init_centroids(points, n_k, opts, &point_norms_sq, n_c_sq);
    let mut assignments = vec![0u32; n];
    let mut history = Vec::new();
    let mut prev_obj: Option<f64> = None;
    let mut iterations = 0u32;

    for _iter in 0..opts.max_iter {
        iterations += 1;
        let centroid_norms: Vec<f64> =
            (0..n_k).map(|k| norm_sq(&centroids[k * dim..(k + 1) * dim]).sqrt()).collect();

        let assigned: Vec<(u32, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                nearest(
                    points.point(i),
                    point_norms_sq[i],
                    &centroids,
                    &centroid_norms,
                    dim,
                    opts.metric,
                    opts.cd_normalization,
                    n_c_sq,
                )
            })
            .collect();

        let mut objective = 0.0;
        let mut dists = vec![0.0; n];
        for (i, (k, d)) in assigned.iter().enumerate() {
            assignments[i] = *k;
            dists[i] = *d;
            objective += *d;
        }
        history.push(objective);

        if let Some(prev) = prev_obj {
            let rel = if prev.abs() > 0.0 { (prev - objective) / prev.abs() } else { 0.0 };
            if objective == 0.0 || rel < opts.tol {
                break;
            }
        }
        prev_obj = Some(objective);

        // Mean update, accumulated in point order.
        let mut sums = vec![Complex64::new(0.0, 0.0); n_k * dim];
        let mut counts = vec![0usize; n_k];
        for (i, &assigned) in assignments.iter().enumerate() {
            let k = assigned as usize;
            counts[k] += 1;
            let p = points.point(i);
            let dst = &mut sums[k * dim..(k + 1) * dim];
            for (acc, x) in dst.iter_mut().zip(p) {
                *acc += x;
            }
        }
        for k in 0..n_k {
            if counts[k] > 0 {
                let inv = 1.0 / counts[k] as f64;
                for z in &mut sums[k * dim..(k + 1) * dim] {
                    *z *= inv;
                }
            } else {
                // Keep the slot; the reseed rule below overwrites it.
                sums[k * dim..(k + 1) * dim]
                    .copy_from_slice(&centroids[k * dim..(k + 1) * dim]);
            }
        }
        centroids = sums;
        if counts.contains(&0) {
            reseed_empty(&counts, &dists, points, &mut centroids, dim);
        }
    }

    let objective = *history.last().expect("at least one iteration");
    Ok(RawKmeans { centroids, dim, iterations, objective, history, assignments })
}

fn count_distinct(points: &FlatPoints<'_>) -> usize {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(points.len());
    for i in 0..points.len() {
        let key: Vec<u64> =
            points.point(i).iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect();
        seen.insert(key);
    }
    seen.len()
}

/// Clusters a training dataset and orthonormalizes every centroid into a
/// codebook candidate. Deterministic for a fixed `(dataset, n_k, options)`.
pub fn kmeans(dataset: &TrainingDataset, n_k: usize, opts: &KmeansOptions) -> Result<Codebook> {
    let points = FlatPoints::new(dataset.points_flat(), dataset.dim())?;
    let raw = kmeans_raw(&points, n_k, opts, dataset.n_c())?;

    let mut candidates = Vec::with_capacity(n_k);
    for k in 0..n_k {
        let sv = SerializedVector::from_raw(
            raw.centroid(k).to_vec(),
            dataset.n_r(),
            dataset.n_c(),
        )?;
        let mut m = deserialize(&sv)?;
        let steering = match gram_schmidt(&m) {
            Ok(s) => s,
            Err(Error::DegenerateCentroid { column, .. }) => {
                // Nudge the offending column and retry once.
                let row = column % dataset.n_r();
                m.set(row, column, m.get(row, column) + Complex64::new(1e-6, 0.0));
                gram_schmidt(&m).map_err(|e| {
                    Error::Numerical(format!(
                        "centroid {k} stayed rank-deficient after perturbation: {e}"
                    ))
                })?
            }
            Err(e) => return Err(e),
        };
        candidates.push(steering);
    }

    Codebook::new(
        candidates,
        opts.metric,
        TrainingMeta {
            dataset_hash: dataset_digest(dataset),
            iterations: raw.iterations,
            final_objective: raw.objective,
        },
    )
}
