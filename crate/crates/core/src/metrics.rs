//! Intermediate feedback-accuracy KPIs, evaluated over noiseless soundings:
//! NMSE between serialized truth and chosen candidate, and the generalized
//! cosine similarity (rho) of the first columns.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{generate_realization, steering_from_channel, ChannelProfile};
use crate::codebook::serialize;
use crate::error::{Error, Result};
use crate::feedback::{GroupRepresentative, SchemeSpec};
use crate::numerics::{inner_product, norm_sqr, SteeringMatrix};

/// Reports below this mean NMSE are clamped to the -200 dB floor.
pub const NMSE_DB_FLOOR: f64 = -200.0;

/// One KPI row: a (profile, scheme, metric) cell of the evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiReport {
    pub profile: String,
    pub scheme: String,
    pub metric: String,
    pub rho: f64,
    pub nmse_db: f64,
    pub n_points: usize,
}

/// Per-sample normalized squared error between the serialized truth and the
/// chosen candidate.
pub fn nmse(
    truth: &crate::codebook::SerializedVector,
    chosen: &crate::codebook::SerializedVector,
) -> Result<f64> {
    if truth.n_r() != chosen.n_r() || truth.n_c() != chosen.n_c() {
        return Err(Error::InvalidArgument("nmse shape mismatch".into()));
    }
    let denom = norm_sqr(truth.values());
    if denom == 0.0 {
        return Err(Error::InvalidArgument("nmse undefined for zero-norm truth".into()));
    }
    let num: f64 = truth
        .values()
        .iter()
        .zip(chosen.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(num / denom)
}

/// Converts a mean NMSE to decibels with the finite floor.
pub fn nmse_db_from_mean(mean: f64) -> f64 {
    if mean <= 0.0 {
        return NMSE_DB_FLOOR;
    }
    (10.0 * mean.log10()).max(NMSE_DB_FLOOR)
}

/// Generalized cosine similarity of the first columns:
/// `|v_c1^H v_1| / (||v_c1|| ||v_1||)`.
pub fn gcs(truth: &SteeringMatrix, chosen: &SteeringMatrix) -> Result<f64> {
    if truth.n_r() != chosen.n_r() || truth.n_c() != chosen.n_c() {
        return Err(Error::InvalidArgument("gcs shape mismatch".into()));
    }
    let t = truth.matrix().column(0);
    let c = chosen.matrix().column(0);
    let tn = norm_sqr(&t).sqrt();
    let cn = norm_sqr(&c).sqrt();
    if tn == 0.0 || cn == 0.0 {
        return Err(Error::InvalidArgument("gcs undefined for a zero column".into()));
    }
    Ok(inner_product(&c, &t)?.norm() / (cn * tn))
}

/// Shared evaluation geometry for KPI runs and link sweeps.
#[derive(Debug, Clone, Copy)]
pub struct EvalParams {
    pub n_sc: usize,
    pub n_c: usize,
    pub n_g: usize,
    pub representative: GroupRepresentative,
}

/// Runs `n_realizations` noiseless soundings of `profile`, applies the scheme
/// per subcarrier group, and averages NMSE and rho uniformly over
/// (subcarrier x realization). Deterministic in `base_seed`; realizations are
/// evaluated in parallel and reduced in seed order.
pub fn evaluate_kpis(
    profile: &ChannelProfile,
    scheme: &SchemeSpec<'_>,
    params: &EvalParams,
    n_realizations: usize,
    base_seed: u64,
) -> Result<KpiReport> {
    if n_realizations == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    let partials: Vec<Result<(f64, f64, usize)>> = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed.wrapping_add(r as u64);
            let realization = generate_realization(profile, params.n_sc, seed)?;
            let truth = steering_from_channel(&realization, params.n_c)?;
            let chosen = scheme.apply(&truth, params.n_g, params.representative)?;
            let mut gcs_sum = 0.0;
            let mut nmse_sum = 0.0;
            for (t, c) in truth.iter().zip(&chosen) {
                gcs_sum += gcs(t, c)?;
                nmse_sum += nmse(&serialize(t), &serialize(c))?;
            }
            Ok((gcs_sum, nmse_sum, truth.len()))
        })
        .collect();

    let mut gcs_total = 0.0;
    let mut nmse_total = 0.0;
    let mut n_points = 0usize;
    for partial in partials {
        let (g, n, count) = partial?;
        gcs_total += g;
        nmse_total += n;
        n_points += count;
    }

    Ok(KpiReport {
        profile: profile.name.clone(),
        scheme: scheme.label().to_string(),
        metric: scheme.metric_label().to_string(),
        rho: gcs_total / n_points as f64,
        nmse_db: nmse_db_from_mean(nmse_total / n_points as f64),
        n_points,
    })
}
