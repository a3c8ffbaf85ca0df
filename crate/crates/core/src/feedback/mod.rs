//! Feedback generation and reconstruction for the three schemes under
//! comparison: serialized-V candidate indices, 802.11 compressed beamforming
//! (quantized Givens angles), and angle-index clustering.

pub mod givens;
mod ifor;
mod wire;

pub use ifor::{
    ifor_codebook_digest, load_ifor_codebook, read_ifor_codebook, save_ifor_codebook, train_ifor,
    write_ifor_codebook, IforCodebook, IforOptions,
};
pub use wire::{decode_report, encode_report};

use crate::codebook::{
    index_bits_for, kmeans::{ip_norm, ip_re, norm_sq}, serialize, CdNormalization, Codebook,
    DistanceMetric,
};
use crate::error::{Error, Result};
use crate::numerics::{gram_schmidt, ComplexMatrix, SteeringMatrix};
use givens::{
    angle_indices, angles_from_indices, compressed_bits_per_group, givens_decompose,
    givens_reconstruct,
};

/// Wire tag for a feedback report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackScheme {
    IndexSerializedV,
    CompressedBf,
    IndexIfor,
}

impl FeedbackScheme {
    pub fn tag(&self) -> u8 {
        match self {
            FeedbackScheme::IndexSerializedV => 0,
            FeedbackScheme::CompressedBf => 1,
            FeedbackScheme::IndexIfor => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(FeedbackScheme::IndexSerializedV),
            1 => Ok(FeedbackScheme::CompressedBf),
            2 => Ok(FeedbackScheme::IndexIfor),
            other => Err(Error::CorruptReport(format!("unknown scheme tag {other}"))),
        }
    }
}

/// Quantizer grid indices for one subcarrier group, in storage order
/// (per column: its phi block, then its psi block).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedAngles {
    pub phi_idx: Vec<u16>,
    pub psi_idx: Vec<u16>,
}

/// Per-group payload of a report.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportPayload {
    /// Candidate indices into a shared codebook of `n_k` entries.
    Indices { indices: Vec<u32>, n_k: u32 },
    /// Quantized Givens angles per group.
    Angles {
        groups: Vec<QuantizedAngles>,
        n_r: u8,
        n_c: u8,
        bits_phi: u8,
        bits_psi: u8,
    },
}

/// One beamforming report: what the beamformee sends back after a sounding.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackReport {
    pub scheme: FeedbackScheme,
    /// Subcarrier grouping factor.
    pub n_g: usize,
    pub bits_per_group: usize,
    pub payload: ReportPayload,
}

impl FeedbackReport {
    pub fn group_count(&self) -> usize {
        match &self.payload {
            ReportPayload::Indices { indices, .. } => indices.len(),
            ReportPayload::Angles { groups, .. } => groups.len(),
        }
    }

    /// Total feedback payload bits carried by this report.
    pub fn total_bits(&self) -> usize {
        self.bits_per_group * self.group_count()
    }
}

/// Number of subcarrier groups: `ceil(n_sc / n_g)`.
pub fn group_count(n_sc: usize, n_g: usize) -> usize {
    n_sc.div_ceil(n_g)
}

/// Which subcarrier stands in for its group when feedback is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupRepresentative {
    /// The group's first subcarrier (the default).
    #[default]
    First,
    /// The group's middle subcarrier.
    Middle,
    /// Entrywise mean of the group's matrices, re-orthonormalized.
    FrobeniusMean,
}

impl std::str::FromStr for GroupRepresentative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "first" => Ok(GroupRepresentative::First),
            "middle" => Ok(GroupRepresentative::Middle),
            "mean" | "frobenius-mean" => Ok(GroupRepresentative::FrobeniusMean),
            other => Err(Error::Config(format!(
                "unknown group representative '{other}' (use first | middle | mean)"
            ))),
        }
    }
}

/// Picks (or synthesizes) the steering matrix representing one group.
pub fn representative(
    group: &[SteeringMatrix],
    rule: GroupRepresentative,
) -> Result<SteeringMatrix> {
    if group.is_empty() {
        return Err(Error::InvalidArgument("empty subcarrier group".into()));
    }
    match rule {
        GroupRepresentative::First => Ok(group[0].clone()),
        GroupRepresentative::Middle => Ok(group[(group.len() - 1) / 2].clone()),
        GroupRepresentative::FrobeniusMean => {
            let (n_r, n_c) = (group[0].n_r(), group[0].n_c());
            let mut mean = ComplexMatrix::zeros(n_r, n_c);
            for v in group {
                for i in 0..n_r {
                    for j in 0..n_c {
                        mean.set(i, j, mean.get(i, j) + v.matrix().get(i, j));
                    }
                }
            }
            let inv = 1.0 / group.len() as f64;
            for i in 0..n_r {
                for j in 0..n_c {
                    mean.set(i, j, mean.get(i, j) * inv);
                }
            }
            gram_schmidt(&mean)
        }
    }
}

/// Index of the closest candidate under the chosen metric, scanning in index
/// order so ties resolve to the lowest index.
pub fn select_candidate(
    v: &SteeringMatrix,
    cb: &Codebook,
    metric: DistanceMetric,
) -> Result<usize> {
    select_candidate_with(v, cb, metric, CdNormalization::NormProduct)
}

pub fn select_candidate_with(
    v: &SteeringMatrix,
    cb: &Codebook,
    metric: DistanceMetric,
    cd_norm: CdNormalization,
) -> Result<usize> {
    if v.n_r() != cb.n_r() || v.n_c() != cb.n_c() {
        return Err(Error::InvalidArgument(format!(
            "steering matrix {}x{} does not match codebook {}x{}",
            v.n_r(),
            v.n_c(),
            cb.n_r(),
            cb.n_c()
        )));
    }
    let query = serialize(v);
    let q = query.values();
    let qn_sq = norm_sq(q);
    if metric == DistanceMetric::Cd && qn_sq == 0.0 {
        return Err(Error::InvalidArgument(
            "cosine distance undefined for a zero-norm query".into(),
        ));
    }
    let n_c_sq = (cb.n_c() * cb.n_c()) as f64;

    let mut best = f64::INFINITY;
    let mut best_k = 0usize;
    for k in 0..cb.n_k() {
        let cand = cb.serialized_candidate(k);
        let d = match metric {
            DistanceMetric::Sed => {
                // Candidates are unitary so their squared norm is n_c.
                qn_sq + cb.n_c() as f64 - 2.0 * ip_re(q, cand)
            }
            DistanceMetric::Cd => {
                let denom = match cd_norm {
                    CdNormalization::NormProduct => qn_sq.sqrt() * (cb.n_c() as f64).sqrt(),
                    CdNormalization::ColumnsSquared => n_c_sq,
                };
                1.0 - ip_norm(q, cand) / denom
            }
        };
        if d < best {
            best = d;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Builds an index report: one candidate index per subcarrier group.
pub fn generate_index_report(
    truth: &[SteeringMatrix],
    cb: &Codebook,
    metric: DistanceMetric,
    n_g: usize,
    rule: GroupRepresentative,
) -> Result<FeedbackReport> {
    if n_g == 0 {
        return Err(Error::InvalidArgument("n_g must be at least 1".into()));
    }
    let mut indices = Vec::with_capacity(group_count(truth.len(), n_g));
    for group in truth.chunks(n_g) {
        let rep = representative(group, rule)?;
        indices.push(select_candidate(&rep, cb, metric)? as u32);
    }
    Ok(FeedbackReport {
        scheme: FeedbackScheme::IndexSerializedV,
        n_g,
        bits_per_group: index_bits_for(cb.n_k()) as usize,
        payload: ReportPayload::Indices { indices, n_k: cb.n_k() as u32 },
    })
}

/// Builds a compressed-beamforming report: quantized Givens angles per group.
pub fn generate_compressed_report(
    truth: &[SteeringMatrix],
    bits_phi: u8,
    bits_psi: u8,
    n_g: usize,
    rule: GroupRepresentative,
) -> Result<FeedbackReport> {
    if n_g == 0 {
        return Err(Error::InvalidArgument("n_g must be at least 1".into()));
    }
    let first = truth
        .first()
        .ok_or_else(|| Error::InvalidArgument("no subcarriers to report".into()))?;
    let (n_r, n_c) = (first.n_r(), first.n_c());
    let mut groups = Vec::with_capacity(group_count(truth.len(), n_g));
    for group in truth.chunks(n_g) {
        let rep = representative(group, rule)?;
        let angles = givens_decompose(&rep);
        let (phi_idx, psi_idx) = angle_indices(&angles, bits_phi, bits_psi);
        groups.push(QuantizedAngles { phi_idx, psi_idx });
    }
    Ok(FeedbackReport {
        scheme: FeedbackScheme::CompressedBf,
        n_g,
        bits_per_group: compressed_bits_per_group(n_r, n_c, bits_phi, bits_psi),
        payload: ReportPayload::Angles {
            groups,
            n_r: n_r as u8,
            n_c: n_c as u8,
            bits_phi,
            bits_psi,
        },
    })
}

/// Maps an index report back to per-group candidates.
pub fn reconstruct<'a>(
    report: &FeedbackReport,
    cb: &'a Codebook,
) -> Result<Vec<&'a SteeringMatrix>> {
    let ReportPayload::Indices { indices, n_k } = &report.payload else {
        return Err(Error::CorruptReport(
            "index reconstruction needs an index payload".into(),
        ));
    };
    if *n_k as usize != cb.n_k() {
        return Err(Error::CorruptReport(format!(
            "report was generated against {n_k} candidates, codebook has {}",
            cb.n_k()
        )));
    }
    indices
        .iter()
        .map(|&i| {
            if (i as usize) < cb.n_k() {
                Ok(cb.candidate(i as usize))
            } else {
                Err(Error::CorruptReport(format!(
                    "candidate index {i} out of range [0, {})",
                    cb.n_k()
                )))
            }
        })
        .collect()
}

/// Rebuilds per-group steering matrices from a compressed report.
pub fn reconstruct_compressed(report: &FeedbackReport) -> Result<Vec<SteeringMatrix>> {
    let ReportPayload::Angles { groups, n_r, n_c, bits_phi, bits_psi } = &report.payload else {
        return Err(Error::CorruptReport(
            "compressed reconstruction needs an angle payload".into(),
        ));
    };
    groups
        .iter()
        .map(|g| {
            let angles = angles_from_indices(
                &g.phi_idx,
                &g.psi_idx,
                *bits_phi,
                *bits_psi,
                *n_r as usize,
                *n_c as usize,
            )?;
            givens_reconstruct(&angles)
        })
        .collect()
}

/// Expands per-group values to per-subcarrier values: subcarrier `n` uses
/// group `n / n_g`.
pub fn expand_groups<T: Clone>(groups: &[T], n_sc: usize, n_g: usize) -> Result<Vec<T>> {
    if groups.len() != group_count(n_sc, n_g) {
        return Err(Error::InvalidArgument(format!(
            "have {} groups, need {} for {n_sc} subcarriers at n_g = {n_g}",
            groups.len(),
            group_count(n_sc, n_g)
        )));
    }
    Ok((0..n_sc).map(|n| groups[n / n_g].clone()).collect())
}

/// One evaluated feedback configuration: how the beamformer obtains `V-hat`.
#[derive(Debug, Clone, Copy)]
pub enum SchemeSpec<'a> {
    /// Genie bound: the beamformer knows the exact per-subcarrier V.
    PerfectCsi,
    /// Candidate index into a serialized-V codebook.
    SerializedV { codebook: &'a Codebook, select_metric: DistanceMetric },
    /// 802.11 compressed beamforming at the given angle resolutions.
    Compressed { bits_phi: u8, bits_psi: u8 },
    /// Angle-index clustering.
    Ifor { codebook: &'a IforCodebook },
}

impl SchemeSpec<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeSpec::PerfectCsi => "perfect-csi",
            SchemeSpec::SerializedV { .. } => "serialized-v",
            SchemeSpec::Compressed { .. } => "compressed",
            SchemeSpec::Ifor { .. } => "ifor",
        }
    }

    pub fn metric_label(&self) -> &'static str {
        match self {
            SchemeSpec::SerializedV { select_metric, .. } => select_metric.label(),
            SchemeSpec::Ifor { .. } => "sed",
            _ => "",
        }
    }

    /// Feedback bits per subcarrier group; the genie scheme reports nothing.
    pub fn bits_per_group(&self, n_r: usize, n_c: usize) -> usize {
        match self {
            SchemeSpec::PerfectCsi => 0,
            SchemeSpec::SerializedV { codebook, .. } => index_bits_for(codebook.n_k()) as usize,
            SchemeSpec::Compressed { bits_phi, bits_psi } => {
                compressed_bits_per_group(n_r, n_c, *bits_phi, *bits_psi)
            }
            SchemeSpec::Ifor { codebook } => index_bits_for(codebook.n_k()) as usize,
        }
    }

    /// Runs feedback generation plus reconstruction, returning the
    /// per-subcarrier `V-hat` the beamformer would apply.
    pub fn apply(
        &self,
        truth: &[SteeringMatrix],
        n_g: usize,
        rule: GroupRepresentative,
    ) -> Result<Vec<SteeringMatrix>> {
        match self {
            SchemeSpec::PerfectCsi => Ok(truth.to_vec()),
            SchemeSpec::SerializedV { codebook, select_metric } => {
                let report =
                    generate_index_report(truth, codebook, *select_metric, n_g, rule)?;
                let groups: Vec<SteeringMatrix> =
                    reconstruct(&report, codebook)?.into_iter().cloned().collect();
                expand_groups(&groups, truth.len(), n_g)
            }
            SchemeSpec::Compressed { bits_phi, bits_psi } => {
                let report =
                    generate_compressed_report(truth, *bits_phi, *bits_psi, n_g, rule)?;
                let groups = reconstruct_compressed(&report)?;
                expand_groups(&groups, truth.len(), n_g)
            }
            SchemeSpec::Ifor { codebook } => {
                let report = ifor::generate_ifor_report(truth, codebook, n_g, rule)?;
                let groups = ifor::reconstruct_ifor(&report, codebook)?;
                expand_groups(&groups, truth.len(), n_g)
            }
        }
    }
}

pub use ifor::{generate_ifor_report, ifor_select, reconstruct_ifor};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{distance, TrainingMeta};
    use crate::numerics::gram_schmidt;
    use num_complex::Complex64;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_steering(rng: &mut ChaCha8Rng, n_r: usize, n_c: usize) -> SteeringMatrix {
        let m = ComplexMatrix::from_fn(n_r, n_c, |_, _| {
            Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        });
        gram_schmidt(&m).unwrap()
    }

    fn random_codebook(rng: &mut ChaCha8Rng, n_k: usize, n_r: usize, n_c: usize) -> Codebook {
        let candidates: Vec<SteeringMatrix> =
            (0..n_k).map(|_| random_steering(rng, n_r, n_c)).collect();
        Codebook::new(
            candidates,
            DistanceMetric::Cd,
            TrainingMeta { dataset_hash: [0; 32], iterations: 0, final_objective: 0.0 },
        )
        .unwrap()
    }

    #[test]
    fn exact_candidate_wins_under_both_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let cb = random_codebook(&mut rng, 16, 8, 2);
        let v = cb.candidate(7).clone();
        assert_eq!(select_candidate(&v, &cb, DistanceMetric::Cd).unwrap(), 7);
        assert_eq!(select_candidate(&v, &cb, DistanceMetric::Sed).unwrap(), 7);
    }

    #[test]
    fn cd_selection_ignores_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let cb = random_codebook(&mut rng, 16, 8, 2);
        let theta = 0.9f64;
        let rot = Complex64::from_polar(1.0, theta);
        let rotated = ComplexMatrix::from_fn(8, 2, |i, j| cb.candidate(3).matrix().get(i, j) * rot);
        let v = SteeringMatrix::new(rotated).unwrap();
        assert_eq!(select_candidate(&v, &cb, DistanceMetric::Cd).unwrap(), 3);
    }

    #[test]
    fn sed_selection_can_change_under_global_phase() {
        // Phase rotation must be able to flip an SED decision; one witness
        // suffices.
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut witnessed = false;
        for _ in 0..50 {
            let cb = random_codebook(&mut rng, 8, 4, 2);
            let v = random_steering(&mut rng, 4, 2);
            let baseline = select_candidate(&v, &cb, DistanceMetric::Sed).unwrap();
            for step in 1..8 {
                let theta = step as f64 * 0.7;
                let rot = Complex64::from_polar(1.0, theta);
                let rotated =
                    ComplexMatrix::from_fn(4, 2, |i, j| v.matrix().get(i, j) * rot);
                let rv = SteeringMatrix::new(rotated).unwrap();
                if select_candidate(&rv, &cb, DistanceMetric::Sed).unwrap() != baseline {
                    witnessed = true;
                    break;
                }
            }
            if witnessed {
                break;
            }
        }
        assert!(witnessed, "SED selection never moved under global phase");
    }

    #[test]
    fn selection_matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let cb = random_codebook(&mut rng, 16, 8, 2);
            let v = random_steering(&mut rng, 8, 2);
            for metric in [DistanceMetric::Cd, DistanceMetric::Sed] {
                let got = select_candidate(&v, &cb, metric).unwrap();
                // Straightforward scan through the public distance function.
                let query = serialize(&v);
                let mut best = f64::INFINITY;
                let mut best_k = 0;
                for k in 0..cb.n_k() {
                    let d =
                        distance(&query, &serialize(cb.candidate(k)), metric).unwrap();
                    if d < best {
                        best = d;
                        best_k = k;
                    }
                }
                assert_eq!(got, best_k, "metric {metric:?}");
            }
        }
    }

    #[test]
    fn selection_shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let cb = random_codebook(&mut rng, 4, 8, 2);
        let v = random_steering(&mut rng, 4, 2);
        assert!(select_candidate(&v, &cb, DistanceMetric::Cd).is_err());
    }

    #[test]
    fn grouping_counts() {
        assert_eq!(group_count(242, 4), 61);
        assert_eq!(group_count(242, 1), 242);
        assert_eq!(group_count(5, 4), 2);
    }

    #[test]
    fn index_report_round_trip_and_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cb = random_codebook(&mut rng, 16, 4, 2);
        let truth: Vec<SteeringMatrix> =
            (0..242).map(|_| random_steering(&mut rng, 4, 2)).collect();
        let report = generate_index_report(
            &truth,
            &cb,
            DistanceMetric::Cd,
            4,
            GroupRepresentative::First,
        )
        .unwrap();
        assert_eq!(report.group_count(), 61);
        assert_eq!(report.bits_per_group, 4);

        let groups = reconstruct(&report, &cb).unwrap();
        let ReportPayload::Indices { indices, .. } = &report.payload else { unreachable!() };
        for (g, &idx) in groups.iter().zip(indices) {
            assert_eq!(
                g.matrix().entries(),
                cb.candidate(idx as usize).matrix().entries()
            );
        }

        // Subcarriers 0..3 share group 0's candidate.
        let expanded: Vec<SteeringMatrix> =
            expand_groups(&groups.into_iter().cloned().collect::<Vec<_>>(), 242, 4).unwrap();
        for v in expanded.iter().take(4) {
            assert_eq!(
                v.matrix().entries(),
                cb.candidate(indices[0] as usize).matrix().entries()
            );
        }
    }

    #[test]
    fn all_zero_indices_reconstruct_to_candidate_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let cb = random_codebook(&mut rng, 8, 4, 2);
        let report = FeedbackReport {
            scheme: FeedbackScheme::IndexSerializedV,
            n_g: 4,
            bits_per_group: 3,
            payload: ReportPayload::Indices { indices: vec![0; 10], n_k: 8 },
        };
        let groups = reconstruct(&report, &cb).unwrap();
        for g in groups {
            assert_eq!(g.matrix().entries(), cb.candidate(0).matrix().entries());
        }
    }

    #[test]
    fn out_of_range_index_is_corrupt() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cb = random_codebook(&mut rng, 8, 4, 2);
        let report = FeedbackReport {
            scheme: FeedbackScheme::IndexSerializedV,
            n_g: 4,
            bits_per_group: 3,
            payload: ReportPayload::Indices { indices: vec![8], n_k: 8 },
        };
        assert!(matches!(reconstruct(&report, &cb), Err(Error::CorruptReport(_))));
    }

    #[test]
    fn representative_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let group: Vec<SteeringMatrix> =
            (0..4).map(|_| random_steering(&mut rng, 4, 2)).collect();
        let first = representative(&group, GroupRepresentative::First).unwrap();
        assert_eq!(first.matrix().entries(), group[0].matrix().entries());
        let middle = representative(&group, GroupRepresentative::Middle).unwrap();
        assert_eq!(middle.matrix().entries(), group[1].matrix().entries());
        let mean = representative(&group, GroupRepresentative::FrobeniusMean).unwrap();
        assert!(mean.matrix().unitarity_error() <= 1e-9);
    }

    #[test]
    fn perfect_csi_apply_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let truth: Vec<SteeringMatrix> =
            (0..8).map(|_| random_steering(&mut rng, 4, 2)).collect();
        let out = SchemeSpec::PerfectCsi
            .apply(&truth, 4, GroupRepresentative::First)
            .unwrap();
        for (a, b) in truth.iter().zip(&out) {
            assert_eq!(a.matrix().entries(), b.matrix().entries());
        }
    }

    #[test]
    fn compressed_apply_reconstructs_group_representatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let truth: Vec<SteeringMatrix> =
            (0..8).map(|_| random_steering(&mut rng, 8, 2)).collect();
        let out = SchemeSpec::Compressed { bits_phi: 6, bits_psi: 4 }
            .apply(&truth, 4, GroupRepresentative::First)
            .unwrap();
        assert_eq!(out.len(), 8);
        // Group members share one reconstruction, close to the representative.
        assert_eq!(out[0].matrix().entries(), out[3].matrix().entries());
        let err = givens::column_phase_aligned_error(&out[0], &truth[0]);
        assert!(err < 0.2, "quantized reconstruction too far off: {err}");
    }
}
