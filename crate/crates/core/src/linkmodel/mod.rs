//! Abstracted link performance: post-beamforming MMSE stream SINRs, an
//! exponential effective-SNR mapping, parametric PER waterfalls per MCS, the
//! MCS selection rule, sounding-overhead accounting, and the goodput formula.

mod sweep;

pub use sweep::{
    run_sweep, sweep, sweep_realization_grid, LinkReport, NamedScheme, SweepGrid, SweepParams,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, SteeringMatrix};

/// The PER threshold of the MCS selection rule.
pub const PER_TARGET: f64 = 0.01;

/// Usable data subcarriers within the 242-tone 20 MHz allocation.
pub const DATA_SUBCARRIERS: usize = 234;

/// OFDM symbol duration (12.8 us + 0.8 us guard interval), microseconds.
pub const SYMBOL_DURATION_US: f64 = 13.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
    Qam1024,
}

impl Modulation {
    pub fn bits_per_symbol(&self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
            Modulation::Qam1024 => 10,
        }
    }
}

/// One row of the MCS table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McsEntry {
    pub index: u8,
    pub modulation: Modulation,
    pub code_rate_num: u32,
    pub code_rate_den: u32,
}

impl McsEntry {
    pub fn code_rate(&self) -> f64 {
        self.code_rate_num as f64 / self.code_rate_den as f64
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.modulation.bits_per_symbol()
    }
}

/// MCS indices 0-11: modulation and code rate.
pub const MCS_TABLE: [McsEntry; 12] = [
    McsEntry { index: 0, modulation: Modulation::Bpsk, code_rate_num: 1, code_rate_den: 2 },
    McsEntry { index: 1, modulation: Modulation::Qpsk, code_rate_num: 1, code_rate_den: 2 },
    McsEntry { index: 2, modulation: Modulation::Qpsk, code_rate_num: 3, code_rate_den: 4 },
    McsEntry { index: 3, modulation: Modulation::Qam16, code_rate_num: 1, code_rate_den: 2 },
    McsEntry { index: 4, modulation: Modulation::Qam16, code_rate_num: 3, code_rate_den: 4 },
    McsEntry { index: 5, modulation: Modulation::Qam64, code_rate_num: 2, code_rate_den: 3 },
    McsEntry { index: 6, modulation: Modulation::Qam64, code_rate_num: 3, code_rate_den: 4 },
    McsEntry { index: 7, modulation: Modulation::Qam64, code_rate_num: 5, code_rate_den: 6 },
    McsEntry { index: 8, modulation: Modulation::Qam256, code_rate_num: 3, code_rate_den: 4 },
    McsEntry { index: 9, modulation: Modulation::Qam256, code_rate_num: 5, code_rate_den: 6 },
    McsEntry { index: 10, modulation: Modulation::Qam1024, code_rate_num: 3, code_rate_den: 4 },
    McsEntry { index: 11, modulation: Modulation::Qam1024, code_rate_num: 5, code_rate_den: 6 },
];

/// Per-MCS link-abstraction constants.
///
/// Waterfall midpoints come from an uncoded-QAM union bound evaluated at a
/// 1000-byte packet, minus a per-code-rate offset; the logistic slope is
/// shared. EESM betas grow with spectral efficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCalibration {
    /// Effective SNR (dB) where PER crosses 0.5, per MCS.
    pub s50_db: Vec<f64>,
    /// Logistic slope per MCS (1/dB).
    pub slope: Vec<f64>,
    /// EESM compression factor per MCS (linear).
    pub eesm_beta: Vec<f64>,
}

impl Default for LinkCalibration {
    fn default() -> Self {
        Self {
            s50_db: vec![
                1.3670, 4.3773, 5.6561, 11.2112, 12.4822, 18.1367, 18.5667, 19.3033, 24.5060,
                25.2407, 30.4207, 31.1537,
            ],
            slope: vec![3.5; 12],
            eesm_beta: vec![1.5, 1.6, 2.0, 4.0, 5.5, 9.0, 11.0, 14.0, 24.0, 30.0, 48.0, 60.0],
        }
    }
}

impl LinkCalibration {
    pub fn validate(&self) -> Result<()> {
        if self.s50_db.len() != MCS_TABLE.len()
            || self.slope.len() != MCS_TABLE.len()
            || self.eesm_beta.len() != MCS_TABLE.len()
        {
            return Err(Error::Config("calibration tables need one entry per MCS".into()));
        }
        for w in self.s50_db.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(
                    "waterfall midpoints must increase with the MCS index".into(),
                ));
            }
        }
        if self.slope.iter().any(|&k| !k.is_finite() || k <= 0.0)
            || self.eesm_beta.iter().any(|&b| !b.is_finite() || b <= 0.0)
        {
            return Err(Error::Config("slopes and betas must be positive".into()));
        }
        Ok(())
    }
}

/// MAC/PHY timing constants for the goodput model. All durations in
/// microseconds, rates in bits per microsecond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    pub t_sifs_us: f64,
    pub t_ack_us: f64,
    pub t_ndpa_us: f64,
    pub t_ndp_us: f64,
    /// Fixed preamble + MAC header time of the beamforming report.
    pub t_bfr_overhead_us: f64,
    /// Rate at which report payload bits are carried.
    pub bfr_bits_per_us: f64,
    /// Data payload per packet, bytes.
    pub l_data_bytes: f64,
    /// Data rate per MCS index, bits per microsecond.
    pub data_rate_per_mcs: Vec<f64>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self::for_streams(2)
    }
}

impl TimingConfig {
    /// Defaults with the MCS data-rate table computed for `n_ss` spatial
    /// streams at 20 MHz.
    pub fn for_streams(n_ss: usize) -> Self {
        Self {
            t_sifs_us: 16.0,
            t_ack_us: 32.0,
            t_ndpa_us: 32.0,
            t_ndp_us: 40.0,
            t_bfr_overhead_us: 40.0,
            bfr_bits_per_us: 6.5,
            l_data_bytes: 1000.0,
            data_rate_per_mcs: MCS_TABLE.iter().map(|m| data_rate(m, n_ss)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let durations = [
            self.t_sifs_us,
            self.t_ack_us,
            self.t_ndpa_us,
            self.t_ndp_us,
            self.t_bfr_overhead_us,
            self.bfr_bits_per_us,
            self.l_data_bytes,
        ];
        if durations.iter().any(|&d| !d.is_finite() || d <= 0.0) {
            return Err(Error::Config("timing constants must be positive".into()));
        }
        if self.data_rate_per_mcs.len() != MCS_TABLE.len()
            || self.data_rate_per_mcs.iter().any(|&r| !r.is_finite() || r <= 0.0)
        {
            return Err(Error::Config("need a positive data rate per MCS".into()));
        }
        Ok(())
    }
}

/// PHY data rate for one MCS in bits per microsecond.
pub fn data_rate(mcs: &McsEntry, n_ss: usize) -> f64 {
    n_ss as f64 * DATA_SUBCARRIERS as f64 * mcs.bits_per_symbol() as f64 * mcs.code_rate()
        / SYMBOL_DURATION_US
}

/// Per-stream post-MMSE SINR (linear) for one subcarrier: the receiver sees
/// `sqrt(rho/N_r) H V-hat x + z` and equalizes `G = H V-hat` linearly.
pub fn stream_sinr(h: &ComplexMatrix, v_hat: &SteeringMatrix, snr_db: f64) -> Result<Vec<f64>> {
    if h.cols() != v_hat.n_r() {
        return Err(Error::InvalidArgument(format!(
            "channel is {}x{} but the precoder has {} rows",
            h.rows(),
            h.cols(),
            v_hat.n_r()
        )));
    }
    let g = h.matmul(v_hat.matrix())?;
    let alpha_sq = 10f64.powf(snr_db / 10.0) / v_hat.n_r() as f64;
    mmse_sinrs(&effective_gram(&g), alpha_sq)
}

/// `G^H G` of the effective channel, the part that does not depend on SNR.
pub(crate) fn effective_gram(g: &ComplexMatrix) -> ComplexMatrix {
    let n_c = g.cols();
    ComplexMatrix::from_fn(n_c, n_c, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..g.rows() {
            acc += g.get(r, a).conj() * g.get(r, b);
        }
        acc
    })
}

/// Per-stream MMSE SINRs from a precomputed `G^H G`:
/// `SINR_k = 1 / (I + alpha^2 G^H G)^-1_kk - 1`.
pub(crate) fn mmse_sinrs(gram: &ComplexMatrix, alpha_sq: f64) -> Result<Vec<f64>> {
    let n_c = gram.rows();
    let mut m = ComplexMatrix::from_fn(n_c, n_c, |a, b| gram.get(a, b) * alpha_sq);
    for k in 0..n_c {
        m.set(k, k, m.get(k, k) + 1.0);
    }
    let diag_inv = hermitian_inverse_diagonal(&m)?;
    Ok(diag_inv.iter().map(|d| (1.0 / d - 1.0).max(0.0)).collect())
}

/// Diagonal of the inverse of a Hermitian positive-definite matrix, via
/// Cholesky: `(M^-1)_kk = || L^-1 e_k ||^2`.
fn hermitian_inverse_diagonal(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = m.rows();
    let mut l = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k).conj();
            }
            if i == j {
                let d = sum.re;
                if d <= 0.0 {
                    return Err(Error::Numerical(
                        "MMSE matrix lost positive definiteness".into(),
                    ));
                }
                l.set(i, j, Complex64::new(d.sqrt(), 0.0));
            } else {
                l.set(i, j, sum / l.get(j, j).re);
            }
        }
    }
    // Forward-solve L y = e_k for each k.
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in k..n {
            let mut rhs = if i == k { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            for (j, &yj) in y.iter().enumerate().take(i).skip(k) {
                rhs -= l.get(i, j) * yj;
            }
            y[i] = rhs / l.get(i, i).re;
        }
        out.push(y.iter().map(|z| z.norm_sqr()).sum());
    }
    Ok(out)
}

/// Exponential effective-SNR mapping: compresses a set of linear SINRs into
/// one equivalent AWGN SNR for the given beta.
pub fn eesm(sinrs_linear: &[f64], beta: f64) -> f64 {
    if sinrs_linear.is_empty() {
        return 0.0;
    }
    let mean =
        sinrs_linear.iter().map(|&s| (-s / beta).exp()).sum::<f64>() / sinrs_linear.len() as f64;
    -beta * mean.ln()
}

/// PER at one effective SNR (dB) for one MCS: a logistic waterfall
/// `1 / (1 + exp(k (s - s50)))`, monotone non-increasing in `s`.
pub fn per_estimate(eff_snr_db: f64, mcs_index: usize, calib: &LinkCalibration) -> f64 {
    let k = calib.slope[mcs_index];
    let s50 = calib.s50_db[mcs_index];
    1.0 / (1.0 + (k * (eff_snr_db - s50)).exp())
}

/// The selection rule: highest MCS index with PER at or below the target.
pub fn select_mcs(per_by_mcs: &[f64]) -> Option<u8> {
    per_by_mcs
        .iter()
        .enumerate()
        .rev()
        .find(|(_, &per)| per <= PER_TARGET)
        .map(|(i, _)| i as u8)
}

/// Channel sounding duration in microseconds: NDPA, NDP, the inter-frame
/// gaps, and the beamforming report (fixed overhead plus payload time).
pub fn sounding_duration(bits_per_group: usize, groups: usize, cfg: &TimingConfig) -> f64 {
    cfg.t_ndpa_us
        + cfg.t_sifs_us
        + cfg.t_ndp_us
        + cfg.t_sifs_us
        + cfg.t_bfr_overhead_us
        + (bits_per_group * groups) as f64 / cfg.bfr_bits_per_us
}

/// Goodput in bits per microsecond:
/// `L / (T_sounding + T_data / (1 - PER) + T_SIFS + T_ACK)` with
/// `T_data = 8 L_bytes / rate`. Sounding is not repeated on retransmission,
/// so only the data term is inflated by `1 / (1 - PER)`.
pub fn goodput(
    per: f64,
    data_rate_bits_per_us: f64,
    t_sounding_us: f64,
    cfg: &TimingConfig,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&per) {
        return Err(Error::InvalidArgument(format!("PER {per} outside [0, 1]")));
    }
    if per >= 1.0 {
        return Ok(0.0);
    }
    let l_bits = cfg.l_data_bytes * 8.0;
    let t_data = l_bits / data_rate_bits_per_us;
    Ok(l_bits / (t_sounding_us + t_data / (1.0 - per) + cfg.t_sifs_us + cfg.t_ack_us))
}
