//! Tapped-delay-line MIMO channel synthesizer.
//!
//! Produces per-subcarrier frequency responses for one sounding instant from
//! a power-delay profile with optional Rician first tap and Kronecker
//! (exponential) spatial correlation. Sounding is noiseless; SNR enters the
//! pipeline analytically in the link model.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{svd, ComplexMatrix, SteeringMatrix};

/// 20 MHz EHT numerology: 242 usable subcarriers at 78.125 kHz spacing.
pub const DEFAULT_N_SC: usize = 242;
pub const SUBCARRIER_SPACING_KHZ: f64 = 78.125;

/// Power-delay profile plus antenna geometry for one synthetic channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub name: String,
    /// Tap delays in nanoseconds, strictly increasing, first tap at 0.
    pub tap_delays_ns: Vec<f64>,
    /// Per-tap powers in dB; linear powers must sum to 1.
    pub tap_powers_db: Vec<f64>,
    /// Beamformer antenna count.
    pub n_r: usize,
    /// Beamformee antenna count.
    pub n_t: usize,
    /// Rician K factor in dB for the first tap; `-inf` selects pure Rayleigh.
    #[serde(default = "neg_infinity")]
    pub rician_k_db: f64,
    /// Exponential correlation coefficient applied to both antenna arrays.
    #[serde(default)]
    pub spatial_correlation: f64,
}

fn neg_infinity() -> f64 {
    f64::NEG_INFINITY
}

impl ChannelProfile {
    /// Single zero-delay tap: every subcarrier sees the same flat response.
    pub fn flat(n_r: usize, n_t: usize) -> Self {
        Self {
            name: "flat".into(),
            tap_delays_ns: vec![0.0],
            tap_powers_db: vec![0.0],
            n_r,
            n_t,
            rician_k_db: f64::NEG_INFINITY,
            spatial_correlation: 0.0,
        }
    }

    /// Exponential power-delay profile approximating TGn model B
    /// (15 ns rms delay spread).
    pub fn model_b_approx(n_r: usize, n_t: usize) -> Self {
        Self::exponential("modelB-approx", 15.0, n_r, n_t)
    }

    /// Exponential power-delay profile approximating TGn model D
    /// (50 ns rms delay spread).
    pub fn model_d_approx(n_r: usize, n_t: usize) -> Self {
        Self::exponential("modelD-approx", 50.0, n_r, n_t)
    }

    /// Uniformly spaced taps with exponentially decaying power, truncated
    /// once the tail falls 30 dB below the first tap, then renormalized.
    pub fn exponential(name: &str, rms_delay_ns: f64, n_r: usize, n_t: usize) -> Self {
        let spacing = 10.0;
        // Keep taps while exp(-t/tau) >= 1e-3, i.e. t <= tau ln(1000).
        let n_taps = ((1000f64.ln() * rms_delay_ns) / spacing).floor() as usize + 1;
        let mut delays = Vec::with_capacity(n_taps);
        let mut linear = Vec::with_capacity(n_taps);
        for k in 0..n_taps {
            let t = k as f64 * spacing;
            delays.push(t);
            linear.push((-t / rms_delay_ns).exp());
        }
        let total: f64 = linear.iter().sum();
        let powers_db: Vec<f64> = linear.iter().map(|p| 10.0 * (p / total).log10()).collect();
        Self {
            name: name.into(),
            tap_delays_ns: delays,
            tap_powers_db: powers_db,
            n_r,
            n_t,
            rician_k_db: f64::NEG_INFINITY,
            spatial_correlation: 0.0,
        }
    }

    /// Looks up one of the shipped presets by name.
    pub fn preset(name: &str, n_r: usize, n_t: usize) -> Result<Self> {
        match name {
            "flat" => Ok(Self::flat(n_r, n_t)),
            "modelB-approx" => Ok(Self::model_b_approx(n_r, n_t)),
            "modelD-approx" => Ok(Self::model_d_approx(n_r, n_t)),
            other => Err(Error::Config(format!(
                "unknown channel profile preset '{other}' \
                 (expected flat | modelB-approx | modelD-approx)"
            ))),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let profile: ChannelProfile =
            toml::from_str(s).map_err(|e| Error::Config(format!("channel profile: {e}")))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.tap_delays_ns.is_empty() || self.tap_delays_ns.len() != self.tap_powers_db.len() {
            return Err(Error::Config(format!(
                "profile '{}': need matching, nonempty tap delay/power lists",
                self.name
            )));
        }
        if self.tap_delays_ns[0] != 0.0 {
            return Err(Error::Config(format!(
                "profile '{}': first tap must be at 0 ns",
                self.name
            )));
        }
        for w in self.tap_delays_ns.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(format!(
                    "profile '{}': tap delays must be strictly increasing",
                    self.name
                )));
            }
        }
        let total: f64 = self.linear_powers().iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "profile '{}': linear tap powers sum to {total}, expected 1",
                self.name
            )));
        }
        if self.n_r == 0 || self.n_t == 0 {
            return Err(Error::Config(format!(
                "profile '{}': antenna counts must be positive",
                self.name
            )));
        }
        if !(0.0..1.0).contains(&self.spatial_correlation) {
            return Err(Error::Config(format!(
                "profile '{}': spatial correlation must lie in [0, 1)",
                self.name
            )));
        }
        Ok(())
    }

    pub fn linear_powers(&self) -> Vec<f64> {
        self.tap_powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect()
    }
}

/// Per-subcarrier channel matrices (`n_t x n_r` each) for one sounding instant.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub subcarrier_responses: Vec<ComplexMatrix>,
    pub subcarrier_spacing_khz: f64,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn n_sc(&self) -> usize {
        self.subcarrier_responses.len()
    }
}

/// Synthesizes one channel realization. Deterministic in `(profile, n_sc, seed)`:
/// the generator state is derived from `seed` alone, taps are drawn in tap
/// order with row-major entries (re then im).
pub fn generate_realization(
    profile: &ChannelProfile,
    n_sc: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    profile.validate()?;
    if n_sc == 0 {
        return Err(Error::InvalidArgument("n_sc must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_t = profile.n_t;
    let n_r = profile.n_r;
    let powers = profile.linear_powers();

    let l_row = correlation_cholesky(n_t, profile.spatial_correlation);
    let l_col = correlation_cholesky(n_r, profile.spatial_correlation);

    let mut taps: Vec<ComplexMatrix> = Vec::with_capacity(powers.len());
    for (k, &p) in powers.iter().enumerate() {
        let mut a = ComplexMatrix::from_fn(n_t, n_r, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        if k == 0 && profile.rician_k_db.is_finite() {
            let k_lin = 10f64.powf(profile.rician_k_db / 10.0);
            let los_w = (k_lin / (k_lin + 1.0)).sqrt();
            let nlos_w = (1.0 / (k_lin + 1.0)).sqrt();
            a = ComplexMatrix::from_fn(n_t, n_r, |i, j| {
                Complex64::new(los_w, 0.0) + a.get(i, j) * nlos_w
            });
        }
        if profile.spatial_correlation > 0.0 {
            a = apply_kronecker(&l_row, &a, &l_col);
        }
        let scale = p.sqrt();
        taps.push(ComplexMatrix::from_fn(n_t, n_r, |i, j| a.get(i, j) * scale));
    }

    let spacing_hz = SUBCARRIER_SPACING_KHZ * 1e3;
    let center = (n_sc as f64 - 1.0) / 2.0;
    let mut responses = Vec::with_capacity(n_sc);
    for n in 0..n_sc {
        let f = (n as f64 - center) * spacing_hz;
        let mut h = ComplexMatrix::zeros(n_t, n_r);
        for (k, tap) in taps.iter().enumerate() {
            let tau_s = profile.tap_delays_ns[k] * 1e-9;
            let phase = -2.0 * PI * f * tau_s;
            let rot = Complex64::new(phase.cos(), phase.sin());
            for i in 0..n_t {
                for j in 0..n_r {
                    let v = h.get(i, j) + tap.get(i, j) * rot;
                    h.set(i, j, v);
                }
            }
        }
        responses.push(h);
    }

    Ok(ChannelRealization {
        subcarrier_responses: responses,
        subcarrier_spacing_khz: SUBCARRIER_SPACING_KHZ,
        seed,
    })
}

/// Per-subcarrier steering matrices: the first `n_c` right singular vectors of
/// each subcarrier response, in the tall `N_r x N_c` orientation.
pub fn steering_from_channel(
    realization: &ChannelRealization,
    n_c: usize,
) -> Result<Vec<SteeringMatrix>> {
    let first = realization
        .subcarrier_responses
        .first()
        .ok_or_else(|| Error::InvalidArgument("realization has no subcarriers".into()))?;
    let (n_t, n_r) = (first.rows(), first.cols());
    if n_c == 0 || n_c > n_t.min(n_r) {
        return Err(Error::InvalidArgument(format!(
            "n_c = {n_c} out of range for a {n_t}x{n_r} channel"
        )));
    }
    realization
        .subcarrier_responses
        .iter()
        .map(|h| {
            let r = svd(h)?;
            let v = ComplexMatrix::from_fn(n_r, n_c, |i, j| r.v.get(i, j));
            SteeringMatrix::new(v)
        })
        .collect()
}

/// Cholesky factor of the exponential correlation matrix `R[i][j] = r^|i-j|`.
fn correlation_cholesky(n: usize, r: f64) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; n]; n];
    if r == 0.0 {
        for (i, row) in l.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        return l;
    }
    for i in 0..n {
        for j in 0..=i {
            let rij = r.powi((i as i32 - j as i32).abs());
            let dot: f64 = l[i][..j].iter().zip(&l[j][..j]).map(|(a, b)| a * b).sum();
            let sum = rij - dot;
            if i == j {
                l[i][j] = sum.max(0.0).sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    l
}

/// `L_row * A * L_col^T` for real triangular factors.
fn apply_kronecker(
    l_row: &[Vec<f64>],
    a: &ComplexMatrix,
    l_col: &[Vec<f64>],
) -> ComplexMatrix {
    let rows = a.rows();
    let cols = a.cols();
    ComplexMatrix::from_fn(rows, cols, |i, j| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, &wr) in l_row[i].iter().enumerate() {
            if wr == 0.0 {
                continue;
            }
            for (q, &wc) in l_col[j].iter().enumerate() {
                if wc == 0.0 {
                    continue;
                }
                acc += a.get(p, q) * (wr * wc);
            }
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm_sqr;
    use rand::Rng;

    #[test]
    fn flat_profile_is_frequency_flat() {
        let profile = ChannelProfile::flat(4, 2);
        let real = generate_realization(&profile, 16, 42).unwrap();
        let first = &real.subcarrier_responses[0];
        for h in &real.subcarrier_responses[1..] {
            assert_eq!(h, first, "flat channel must be identical on all subcarriers");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let profile = ChannelProfile::model_b_approx(8, 2);
        let a = generate_realization(&profile, 32, 7).unwrap();
        let b = generate_realization(&profile, 32, 7).unwrap();
        for (x, y) in a.subcarrier_responses.iter().zip(&b.subcarrier_responses) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn two_tap_power_conserved_over_ensemble() {
        // Monte-Carlo oracle: mean per-entry power equals the tap power sum.
        let profile = ChannelProfile {
            name: "two-tap".into(),
            tap_delays_ns: vec![0.0, 50.0],
            tap_powers_db: vec![10.0 * 0.5f64.log10(), 10.0 * 0.5f64.log10()],
            n_r: 2,
            n_t: 2,
            rician_k_db: f64::NEG_INFINITY,
            spatial_correlation: 0.0,
        };
        let n_sc = 8;
        let seeds = 10_000u64;
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut selective = false;
        for seed in 0..seeds {
            let real = generate_realization(&profile, n_sc, seed).unwrap();
            let p0 = real.subcarrier_responses[0].frobenius_norm();
            let p_mid = real.subcarrier_responses[n_sc / 2].frobenius_norm();
            if (p0 - p_mid).abs() > 1e-6 {
                selective = true;
            }
            for h in &real.subcarrier_responses {
                for z in h.entries() {
                    acc += z.norm_sqr();
                    count += 1;
                }
            }
        }
        let mean_power = acc / count as f64;
        assert!(
            (mean_power - 1.0).abs() < 0.05,
            "ensemble per-entry power {mean_power} deviates more than 5%"
        );
        assert!(selective, "two-tap channel should be frequency selective");
    }

    #[test]
    fn frequency_correlation_orders_with_delay_spread() {
        let short = ChannelProfile::model_b_approx(2, 2);
        let long = ChannelProfile::model_d_approx(2, 2);
        let corr = |profile: &ChannelProfile| {
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for seed in 0..10_000u64 {
                let real = generate_realization(profile, 4, seed).unwrap();
                let a = &real.subcarrier_responses[0];
                let b = &real.subcarrier_responses[3];
                for (x, y) in a.entries().iter().zip(b.entries()) {
                    num += x * y.conj();
                    den += x.norm_sqr();
                }
            }
            num.norm() / den
        };
        let c_short = corr(&short);
        let c_long = corr(&long);
        assert!(
            c_short > c_long,
            "adjacent-band correlation must fall with delay spread: {c_short} vs {c_long}"
        );
    }

    #[test]
    fn steering_identity_channel() {
        let h = ComplexMatrix::identity(3);
        let real = ChannelRealization {
            subcarrier_responses: vec![h],
            subcarrier_spacing_khz: SUBCARRIER_SPACING_KHZ,
            seed: 0,
        };
        let vs = steering_from_channel(&real, 2).unwrap();
        let v = vs[0].matrix();
        assert_eq!(v.rows(), 3);
        assert_eq!(v.cols(), 2);
        for i in 0..3 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v.get(i, j) - Complex64::new(expected, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn steering_beats_random_beams() {
        // Random-search oracle for sigma_1 optimality of the first column.
        let profile = ChannelProfile::model_d_approx(4, 2);
        let real = generate_realization(&profile, 2, 3).unwrap();
        let vs = steering_from_channel(&real, 1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for (h, v) in real.subcarrier_responses.iter().zip(&vs) {
            let gain = |w: &ComplexMatrix| h.matmul(w).unwrap().frobenius_norm();
            let v_mat = ComplexMatrix::new(4, 1, v.matrix().column(0)).unwrap();
            let best = gain(&v_mat);
            for _ in 0..100 {
                let mut w: Vec<Complex64> = (0..4)
                    .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect();
                let norm = norm_sqr(&w).sqrt();
                for z in &mut w {
                    *z /= norm;
                }
                let w = ComplexMatrix::new(4, 1, w).unwrap();
                assert!(gain(&w) <= best + 1e-9);
            }
        }
    }

    #[test]
    fn preset_lookup_and_validation() {
        assert!(ChannelProfile::preset("flat", 8, 2).is_ok());
        assert!(ChannelProfile::preset("modelB-approx", 8, 2).is_ok());
        assert!(ChannelProfile::preset("modelD-approx", 8, 2).is_ok());
        assert!(ChannelProfile::preset("modelZ", 8, 2).is_err());
        for name in ["flat", "modelB-approx", "modelD-approx"] {
            ChannelProfile::preset(name, 8, 2).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn profile_toml_round_trip() {
        let p = ChannelProfile::model_b_approx(8, 2);
        let text = p.to_toml_string();
        let q = ChannelProfile::from_toml_str(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn invalid_profiles_rejected() {
        let mut p = ChannelProfile::flat(2, 2);
        p.tap_delays_ns = vec![1.0];
        assert!(p.validate().is_err(), "first tap must sit at 0 ns");

        let mut p = ChannelProfile::flat(2, 2);
        p.tap_powers_db = vec![3.0];
        assert!(p.validate().is_err(), "powers must sum to 1");

        let mut p = ChannelProfile::flat(2, 2);
        p.spatial_correlation = 1.0;
        assert!(p.validate().is_err(), "correlation must be below 1");
    }

    #[test]
    fn n_sc_zero_is_invalid() {
        let profile = ChannelProfile::flat(2, 2);
        assert!(generate_realization(&profile, 0, 1).is_err());
    }
}
