//! Monte-Carlo link sweep: channel realizations through feedback,
//! per-subcarrier MMSE SINRs, EESM compression, PER per MCS, MCS selection,
//! and goodput.
//!
//! Each realization produces one PER grid; the ensemble mean is reduced in
//! seed order, so results are independent of thread count and of how the
//! seed range is split across calls.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    eesm, goodput, mmse_sinrs, per_estimate, select_mcs, sounding_duration, LinkCalibration,
    TimingConfig, MCS_TABLE,
};
use crate::channel::{generate_realization, steering_from_channel, ChannelProfile};
use crate::error::{Error, Result};
use crate::feedback::SchemeSpec;
use crate::metrics::EvalParams;

/// One feedback configuration in a sweep, with the labels its report rows
/// will carry.
pub struct NamedScheme<'a> {
    pub name: String,
    pub metric: String,
    pub spec: SchemeSpec<'a>,
}

impl<'a> NamedScheme<'a> {
    pub fn new(spec: SchemeSpec<'a>) -> Self {
        Self { name: spec.label().to_string(), metric: spec.metric_label().to_string(), spec }
    }

    pub fn named(name: impl Into<String>, spec: SchemeSpec<'a>) -> Self {
        Self { name: name.into(), metric: spec.metric_label().to_string(), spec }
    }
}

/// Sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepParams {
    pub snr_grid_db: Vec<f64>,
    pub n_realizations: usize,
    pub eval: EvalParams,
    /// Evaluate at this MCS instead of applying the selection rule.
    pub fixed_mcs: Option<u8>,
    pub timing: TimingConfig,
    pub calibration: LinkCalibration,
}

/// Ensemble-mean PER for every (scheme, SNR, MCS) cell plus the sweep
/// geometry needed to turn cells into reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub scheme_names: Vec<(String, String)>,
    pub bits_per_group: Vec<usize>,
    pub snr_grid_db: Vec<f64>,
    pub n_groups: usize,
    pub n_realizations: usize,
    per: Vec<f64>,
}

impl SweepGrid {
    /// Mean PER of one cell.
    pub fn per_at(&self, scheme: usize, snr_idx: usize, mcs: usize) -> f64 {
        let n_mcs = MCS_TABLE.len();
        self.per[(scheme * self.snr_grid_db.len() + snr_idx) * n_mcs + mcs]
    }

    /// Averages per-realization grids (in the order given).
    pub fn from_realizations(
        scheme_names: Vec<(String, String)>,
        bits_per_group: Vec<usize>,
        snr_grid_db: Vec<f64>,
        n_groups: usize,
        grids: &[Vec<f64>],
    ) -> Result<Self> {
        let cell_count = scheme_names.len() * snr_grid_db.len() * MCS_TABLE.len();
        if grids.is_empty() {
            return Err(Error::InvalidArgument("no realizations to average".into()));
        }
        let mut per = vec![0.0; cell_count];
        for grid in grids {
            if grid.len() != cell_count {
                return Err(Error::InvalidArgument("realization grid size mismatch".into()));
            }
            for (acc, v) in per.iter_mut().zip(grid) {
                *acc += v;
            }
        }
        let inv = 1.0 / grids.len() as f64;
        for v in &mut per {
            *v *= inv;
        }
        Ok(Self {
            scheme_names,
            bits_per_group,
            snr_grid_db,
            n_groups,
            n_realizations: grids.len(),
            per,
        })
    }

    /// Turns the grid into report rows, one per (scheme, SNR), either at a
    /// fixed MCS or through the selection rule. Rows come out in scheme-major,
    /// then SNR order.
    pub fn reports(
        &self,
        fixed_mcs: Option<u8>,
        timing: &TimingConfig,
    ) -> Result<Vec<LinkReport>> {
        timing.validate()?;
        if let Some(m) = fixed_mcs {
            if m as usize >= MCS_TABLE.len() {
                return Err(Error::Config(format!("fixed MCS {m} out of range")));
            }
        }
        let n_mcs = MCS_TABLE.len();
        let mut rows = Vec::with_capacity(self.scheme_names.len() * self.snr_grid_db.len());
        for (s, (name, metric)) in self.scheme_names.iter().enumerate() {
            let t_sounding =
                sounding_duration(self.bits_per_group[s], self.n_groups, timing);
            for (i, &snr_db) in self.snr_grid_db.iter().enumerate() {
                let base = (s * self.snr_grid_db.len() + i) * n_mcs;
                let per_by_mcs = &self.per[base..base + n_mcs];
                let chosen = match fixed_mcs {
                    Some(m) => Some(m),
                    None => select_mcs(per_by_mcs),
                };
                let (per, gput) = match chosen {
                    Some(m) => {
                        let per = per_by_mcs[m as usize];
                        let rate = timing.data_rate_per_mcs[m as usize];
                        (per, goodput(per, rate, t_sounding, timing)?)
                    }
                    // Nothing qualifies: report the most robust MCS's PER and
                    // zero goodput.
                    None => (per_by_mcs[0], 0.0),
                };
                rows.push(LinkReport {
                    scheme: name.clone(),
                    metric: metric.clone(),
                    snr_db,
                    per,
                    mcs: chosen,
                    t_sounding_us: t_sounding,
                    goodput_mbps: gput,
                });
            }
        }
        Ok(rows)
    }
}

/// One record of a link sweep. Goodput is in Mbit/s, which equals bits per
/// microsecond one-for-one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub scheme: String,
    pub metric: String,
    pub snr_db: f64,
    pub per: f64,
    pub mcs: Option<u8>,
    pub t_sounding_us: f64,
    pub goodput_mbps: f64,
}

/// PER grid of a single channel realization, flat `[scheme][snr][mcs]`.
pub fn sweep_realization_grid(
    profile: &ChannelProfile,
    schemes: &[NamedScheme<'_>],
    params: &SweepParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let realization = generate_realization(profile, params.eval.n_sc, seed)?;
    let truth = steering_from_channel(&realization, params.eval.n_c)?;
    let n_mcs = MCS_TABLE.len();
    let mut grid = vec![0.0; schemes.len() * params.snr_grid_db.len() * n_mcs];

    for (s, scheme) in schemes.iter().enumerate() {
        let v_hats = scheme.spec.apply(&truth, params.eval.n_g, params.eval.representative)?;
        // G^H G per subcarrier is SNR-independent; computed once.
        let grams: Vec<_> = realization
            .subcarrier_responses
            .iter()
            .zip(&v_hats)
            .map(|(h, v)| h.matmul(v.matrix()).map(|g| super::effective_gram(&g)))
            .collect::<Result<_>>()?;

        for (i, &snr_db) in params.snr_grid_db.iter().enumerate() {
            // Per-stream transmit scaling rho / N_r, N_r = beamformer antennas.
            let alpha_sq = 10f64.powf(snr_db / 10.0) / truth[0].n_r() as f64;
            let mut sinrs = Vec::with_capacity(grams.len() * params.eval.n_c);
            for gram in &grams {
                sinrs.extend(mmse_sinrs(gram, alpha_sq)?);
            }
            let base = (s * params.snr_grid_db.len() + i) * n_mcs;
            for mcs in 0..n_mcs {
                let eff = eesm(&sinrs, params.calibration.eesm_beta[mcs]);
                let eff_db = 10.0 * eff.log10();
                grid[base + mcs] = per_estimate(eff_db, mcs, &params.calibration);
            }
        }
    }
    Ok(grid)
}

/// Runs the Monte-Carlo sweep over `n_realizations` seeds starting at
/// `base_seed`. Realizations are computed in parallel but averaged in seed
/// order.
pub fn run_sweep(
    profile: &ChannelProfile,
    schemes: &[NamedScheme<'_>],
    params: &SweepParams,
    base_seed: u64,
) -> Result<SweepGrid> {
    if schemes.is_empty() {
        return Err(Error::InvalidArgument("no schemes to sweep".into()));
    }
    if params.snr_grid_db.is_empty() {
        return Err(Error::InvalidArgument("empty SNR grid".into()));
    }
    if params.n_realizations == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    params.calibration.validate()?;
    params.timing.validate()?;

    let grids: Vec<Result<Vec<f64>>> = (0..params.n_realizations)
        .into_par_iter()
        .map(|r| {
            sweep_realization_grid(profile, schemes, params, base_seed.wrapping_add(r as u64))
        })
        .collect();
    let grids = grids.into_iter().collect::<Result<Vec<_>>>()?;

    let scheme_names: Vec<(String, String)> =
        schemes.iter().map(|s| (s.name.clone(), s.metric.clone())).collect();
    let bits: Vec<usize> = schemes
        .iter()
        .map(|s| s.spec.bits_per_group(profile.n_r, params.eval.n_c))
        .collect();
    SweepGrid::from_realizations(
        scheme_names,
        bits,
        params.snr_grid_db.clone(),
        crate::feedback::group_count(params.eval.n_sc, params.eval.n_g),
        &grids,
    )
}

/// Convenience wrapper: sweep and emit report rows directly.
pub fn sweep(
    profile: &ChannelProfile,
    schemes: &[NamedScheme<'_>],
    params: &SweepParams,
    base_seed: u64,
) -> Result<Vec<LinkReport>> {
    run_sweep(profile, schemes, params, base_seed)?.reports(params.fixed_mcs, &params.timing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_dataset, kmeans, DistanceMetric, KmeansOptions};
    use crate::feedback::{train_ifor, GroupRepresentative, IforOptions};

    fn test_setup() -> (ChannelProfile, crate::codebook::Codebook, crate::feedback::IforCodebook)
    {
        let profile = ChannelProfile::model_b_approx(4, 2);
        let ds = build_dataset(std::slice::from_ref(&profile), 6, 16, 2, 11).unwrap();
        let cb = kmeans(&ds, 16, &KmeansOptions::new(DistanceMetric::Cd, 3)).unwrap();
        let ifor = train_ifor(&ds, &IforOptions::new(16, 3)).unwrap();
        (profile, cb, ifor)
    }

    fn test_params() -> SweepParams {
        SweepParams {
            snr_grid_db: (0..=7).map(|i| i as f64 * 5.0).collect(),
            n_realizations: 12,
            eval: EvalParams {
                n_sc: 16,
                n_c: 2,
                n_g: 4,
                representative: GroupRepresentative::First,
            },
            fixed_mcs: None,
            timing: TimingConfig::default(),
            calibration: LinkCalibration::default(),
        }
    }

    #[test]
    fn perfect_csi_dominates_quantized_schemes() {
        let (profile, cb, ifor) = test_setup();
        let schemes = vec![
            NamedScheme::new(SchemeSpec::PerfectCsi),
            NamedScheme::new(SchemeSpec::SerializedV {
                codebook: &cb,
                select_metric: DistanceMetric::Cd,
            }),
            NamedScheme::new(SchemeSpec::Compressed { bits_phi: 6, bits_psi: 4 }),
            NamedScheme::new(SchemeSpec::Ifor { codebook: &ifor }),
        ];
        let params = test_params();
        let grid = run_sweep(&profile, &schemes, &params, 100).unwrap();
        for snr_idx in 0..params.snr_grid_db.len() {
            for mcs in 0..MCS_TABLE.len() {
                let perfect = grid.per_at(0, snr_idx, mcs);
                for s in 1..schemes.len() {
                    let other = grid.per_at(s, snr_idx, mcs);
                    assert!(
                        perfect <= other + 1e-9,
                        "scheme {s} beats perfect CSI at snr {snr_idx} mcs {mcs}: \
                         {perfect} vs {other}"
                    );
                }
            }
        }
    }

    #[test]
    fn chosen_mcs_non_decreasing_in_snr() {
        let (profile, cb, _) = test_setup();
        let schemes = vec![
            NamedScheme::new(SchemeSpec::PerfectCsi),
            NamedScheme::new(SchemeSpec::SerializedV {
                codebook: &cb,
                select_metric: DistanceMetric::Sed,
            }),
        ];
        let params = test_params();
        let rows = sweep(&profile, &schemes, &params, 100).unwrap();
        for chunk in rows.chunks(params.snr_grid_db.len()) {
            let mut prev = -1i32;
            for row in chunk {
                let cur = row.mcs.map_or(-1, |m| m as i32);
                assert!(
                    cur >= prev,
                    "{}: MCS dropped from {prev} to {cur} at snr {}",
                    row.scheme,
                    row.snr_db
                );
                prev = cur;
            }
        }
    }

    #[test]
    fn per_per_mcs_non_increasing_in_snr() {
        let (profile, _, _) = test_setup();
        let schemes = vec![NamedScheme::new(SchemeSpec::Compressed { bits_phi: 6, bits_psi: 4 })];
        let params = test_params();
        let grid = run_sweep(&profile, &schemes, &params, 7).unwrap();
        for mcs in 0..MCS_TABLE.len() {
            for i in 1..params.snr_grid_db.len() {
                assert!(
                    grid.per_at(0, i, mcs) <= grid.per_at(0, i - 1, mcs) + 1e-12,
                    "ensemble PER increased with SNR at mcs {mcs}"
                );
            }
        }
    }

    #[test]
    fn seed_split_reduction_is_bit_identical() {
        let (profile, cb, _) = test_setup();
        let schemes = vec![NamedScheme::new(SchemeSpec::SerializedV {
            codebook: &cb,
            select_metric: DistanceMetric::Cd,
        })];
        let mut params = test_params();
        params.n_realizations = 8;
        let full = run_sweep(&profile, &schemes, &params, 40).unwrap();

        // Same seeds computed in two separate batches, merged in seed order.
        let mut grids = Vec::new();
        for seed in 40..44u64 {
            grids.push(sweep_realization_grid(&profile, &schemes, &params, seed).unwrap());
        }
        for seed in 44..48u64 {
            grids.push(sweep_realization_grid(&profile, &schemes, &params, seed).unwrap());
        }
        let merged = SweepGrid::from_realizations(
            full.scheme_names.clone(),
            full.bits_per_group.clone(),
            full.snr_grid_db.clone(),
            full.n_groups,
            &grids,
        )
        .unwrap();
        assert_eq!(full, merged, "split-seed reduction must be exact");
    }

    #[test]
    fn fixed_mcs_reports_that_mcs() {
        let (profile, _, _) = test_setup();
        let schemes = vec![NamedScheme::new(SchemeSpec::PerfectCsi)];
        let mut params = test_params();
        params.fixed_mcs = Some(3);
        let rows = sweep(&profile, &schemes, &params, 5).unwrap();
        assert!(rows.iter().all(|r| r.mcs == Some(3)));
        // The PER column is the full waterfall, even above the target.
        assert!(rows.first().unwrap().per > 0.5, "low SNR should fail at MCS 3");
        assert!(rows.last().unwrap().per < 1e-6);
    }

    #[test]
    fn index_scheme_sounds_faster_than_compressed() {
        let (profile, cb, _) = test_setup();
        let schemes = vec![
            NamedScheme::new(SchemeSpec::SerializedV {
                codebook: &cb,
                select_metric: DistanceMetric::Cd,
            }),
            NamedScheme::new(SchemeSpec::Compressed { bits_phi: 6, bits_psi: 4 }),
        ];
        let params = test_params();
        let rows = sweep(&profile, &schemes, &params, 9).unwrap();
        let t_index = rows[0].t_sounding_us;
        let t_comp = rows[params.snr_grid_db.len()].t_sounding_us;
        assert!(t_index < t_comp);
    }
}
