//! Declarative run configuration. One TOML file describes every stage of an
//! experiment; commands read the sections they need.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bfcb_core::channel::ChannelProfile;
use bfcb_core::codebook::DistanceMetric;
use bfcb_core::error::{Error, Result};
use bfcb_core::linkmodel::{LinkCalibration, TimingConfig, MCS_TABLE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kpi: Option<KpiSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub compressed: CompressedSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<LinkCalibration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Beamformer antennas.
    pub n_r: usize,
    /// Spatial streams (and beamformee antennas).
    pub n_c: usize,
    pub n_sc: usize,
    /// Subcarrier grouping factor.
    pub n_g: usize,
    pub seed: u64,
    /// Group representative rule: first | middle | mean.
    #[serde(default = "default_representative")]
    pub representative: String,
}

fn default_representative() -> String {
    "first".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Preset names (`flat`, `modelB-approx`, `modelD-approx`) or paths to
    /// profile TOML files.
    pub profiles: Vec<String>,
    /// Relative mixing weights, default uniform. Weights scale how many
    /// realizations each profile contributes while preserving the total.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub seeds_per_profile: usize,
    /// Rotate every training vector so its first entry is real non-negative
    /// before clustering. Off by default.
    #[serde(default)]
    pub align_phase: bool,
    /// Output file name, relative to the output directory.
    #[serde(default = "default_dataset_file")]
    pub file: String,
}

fn default_dataset_file() -> String {
    "dataset.bin".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub n_k: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iter() -> usize {
    300
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpiSection {
    pub profiles: Vec<String>,
    pub schemes: Vec<String>,
    pub n_realizations: usize,
    #[serde(default = "default_kpi_output")]
    pub output: String,
}

fn default_kpi_output() -> String {
    "kpi".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub profile: String,
    pub schemes: Vec<String>,
    pub snr_start_db: f64,
    pub snr_stop_db: f64,
    pub snr_step_db: f64,
    pub n_realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_mcs: Option<u8>,
    #[serde(default = "default_sweep_output")]
    pub output: String,
}

fn default_sweep_output() -> String {
    "sweep".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressedSection {
    pub bits_phi: u8,
    pub bits_psi: u8,
}

impl Default for CompressedSection {
    fn default() -> Self {
        Self { bits_phi: 6, bits_psi: 4 }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let run = &self.run;
        if run.n_r == 0 || run.n_c == 0 || run.n_sc == 0 || run.n_g == 0 {
            return Err(Error::Config("run dimensions must be positive".into()));
        }
        if run.n_c > run.n_r {
            return Err(Error::Config(format!(
                "n_c = {} cannot exceed n_r = {}",
                run.n_c, run.n_r
            )));
        }
        run.representative.parse::<bfcb_core::feedback::GroupRepresentative>()?;
        if self.dataset.profiles.is_empty() {
            return Err(Error::Config("dataset needs at least one profile".into()));
        }
        if let Some(w) = &self.dataset.weights {
            if w.len() != self.dataset.profiles.len() {
                return Err(Error::Config(
                    "dataset weights must match the profile list".into(),
                ));
            }
            if w.iter().any(|&x| !x.is_finite() || x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config(
                    "dataset weights must be non-negative with a positive sum".into(),
                ));
            }
        }
        if self.dataset.seeds_per_profile == 0 {
            return Err(Error::Config("seeds_per_profile must be positive".into()));
        }
        if self.train.n_k == 0 {
            return Err(Error::Config("train.n_k must be positive".into()));
        }
        if let Some(kpi) = &self.kpi {
            if kpi.profiles.is_empty() || kpi.schemes.is_empty() || kpi.n_realizations == 0 {
                return Err(Error::Config("kpi section is incomplete".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.schemes.is_empty() || sweep.n_realizations == 0 {
                return Err(Error::Config("sweep section is incomplete".into()));
            }
            if sweep.snr_step_db <= 0.0 || sweep.snr_stop_db < sweep.snr_start_db {
                return Err(Error::Config("sweep SNR grid is malformed".into()));
            }
            if let Some(m) = sweep.fixed_mcs {
                if m as usize >= MCS_TABLE.len() {
                    return Err(Error::Config(format!("fixed_mcs {m} out of range")));
                }
            }
        }
        if self.compressed.bits_phi == 0 || self.compressed.bits_psi == 0 {
            return Err(Error::Config("compressed bit widths must be positive".into()));
        }
        if let Some(t) = &self.timing {
            t.validate()?;
        }
        if let Some(c) = &self.calibration {
            c.validate()?;
        }
        Ok(())
    }

    /// Effective selection/training metric derived helpers live with the
    /// commands; the config only stores the declarative strings.
    pub fn snr_grid(&self) -> Result<Vec<f64>> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [sweep] section".into()))?;
        let mut grid = Vec::new();
        let mut v = sweep.snr_start_db;
        let mut i = 0u32;
        while v <= sweep.snr_stop_db + 1e-9 {
            grid.push(v);
            i += 1;
            v = sweep.snr_start_db + f64::from(i) * sweep.snr_step_db;
        }
        Ok(grid)
    }

    /// Resolves a profile reference: a shipped preset name, or a path to a
    /// profile TOML (anything containing a path separator or `.toml`).
    pub fn resolve_profile(&self, reference: &str, config_dir: &Path) -> Result<ChannelProfile> {
        let looks_like_path = reference.contains('/') || reference.ends_with(".toml");
        let profile = if looks_like_path {
            let path = PathBuf::from(reference);
            let path =
                if path.is_relative() { config_dir.join(&path) } else { path };
            ChannelProfile::load(&path)?
        } else {
            ChannelProfile::preset(reference, self.run.n_r, self.run.n_c)?
        };
        if profile.n_r != self.run.n_r {
            return Err(Error::Config(format!(
                "profile '{}' has n_r = {}, run expects {}",
                profile.name, profile.n_r, self.run.n_r
            )));
        }
        if profile.n_t < self.run.n_c {
            return Err(Error::Config(format!(
                "profile '{}' has n_t = {} but the run needs at least {} streams",
                profile.name, profile.n_t, self.run.n_c
            )));
        }
        Ok(profile)
    }

    /// Per-profile realization counts from the mixing weights; uniform
    /// weights give every profile `seeds_per_profile` and the total is
    /// preserved for any weighting.
    pub fn dataset_counts(&self) -> Vec<usize> {
        let n = self.dataset.profiles.len();
        let weights = match &self.dataset.weights {
            Some(w) => w.clone(),
            None => vec![1.0; n],
        };
        let total: f64 = weights.iter().sum();
        let budget = (self.dataset.seeds_per_profile * n) as f64;
        weights.iter().map(|w| (budget * w / total).round() as usize).collect()
    }

    pub fn timing(&self) -> TimingConfig {
        self.timing.clone().unwrap_or_else(|| TimingConfig::for_streams(self.run.n_c))
    }

    pub fn calibration(&self) -> LinkCalibration {
        self.calibration.clone().unwrap_or_default()
    }
}

/// Parsed scheme reference from a config string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeRef {
    SerializedV(DistanceMetric),
    Compressed,
    Ifor,
    PerfectCsi,
}

impl std::str::FromStr for SchemeRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "serialized-v-cd" => Ok(SchemeRef::SerializedV(DistanceMetric::Cd)),
            "serialized-v-sed" => Ok(SchemeRef::SerializedV(DistanceMetric::Sed)),
            "compressed" => Ok(SchemeRef::Compressed),
            "ifor" => Ok(SchemeRef::Ifor),
            "perfect-csi" => Ok(SchemeRef::PerfectCsi),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (use serialized-v-cd | serialized-v-sed | \
                 compressed | ifor | perfect-csi)"
            ))),
        }
    }
}
