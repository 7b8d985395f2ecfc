//! Relative-entropy deviation between density tubes, discretized over a
//! common bin geometry with a volume weight, and the linear-growth fit that
//! turns a deviation series into a chaos indicator.

use crate::error::Error;
use crate::stochastic::EnsembleDensity;
use crate::Result;
use serde::Serialize;
use std::collections::BTreeSet;

/// Discretized deviation between two binned densities.
#[derive(Debug, Clone, Serialize)]
pub struct KlReport {
    pub value: f64,
    /// Stamps of the two densities.
    pub s_a: f64,
    pub s_b: f64,
    /// Bins in the union support (smoothing domain).
    pub support_bins: usize,
    /// Bins occupied by both inputs.
    pub common_bins: usize,
    /// Second moment of the log-ratio under the first density (spread
    /// diagnostic of the estimator).
    pub second_moment: f64,
    /// Additive smoothing weight applied per bin.
    pub alpha: f64,
}

/// Deviation of `a` from `b`: `sum_bins p_a ln|p_a / p_b| sqrt(g)` with
/// additive smoothing `alpha` over the union support. The volume weight is
/// evaluated at bin centers.
pub fn kl_divergence<G>(
    a: &EnsembleDensity,
    b: &EnsembleDensity,
    volume_weight: G,
    alpha: f64,
) -> Result<KlReport>
where
    G: Fn(&[f64]) -> f64,
{
    if !a.same_geometry(b) {
        return Err(Error::Incomparable("densities use different bin geometries".into()));
    }
    if a.total_weight() <= 0.0 || b.total_weight() <= 0.0 {
        return Err(Error::InvalidArgument("empty density".into()));
    }
    let mut union: BTreeSet<Vec<u32>> = BTreeSet::new();
    let mut common = 0usize;
    for (k, _) in a.iter() {
        union.insert(k.clone());
    }
    for (k, _) in b.iter() {
        if !union.insert(k.clone()) {
            common += 1;
        }
    }
    if common == 0 && alpha <= 0.0 {
        return Err(Error::DisjointSupports);
    }
    let kk = union.len() as f64;
    let na = a.total_weight();
    let nb = b.total_weight();
    let mut value = 0.0;
    let mut second = 0.0;
    for key in &union {
        let pa = (a.weight(key) + alpha) / (na + alpha * kk);
        let pb = (b.weight(key) + alpha) / (nb + alpha * kk);
        let w = volume_weight(&a.centers(key)).sqrt();
        let log_ratio = (pa / pb).abs().ln();
        value += pa * log_ratio * w;
        second += pa * log_ratio * log_ratio * w;
    }
    Ok(KlReport {
        value,
        s_a: a.s_stamp,
        s_b: b.s_stamp,
        support_bins: union.len(),
        common_bins: common,
        second_moment: second,
        alpha,
    })
}

/// Least-squares line through deviation samples against stamp separation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Growth flag: positive slope with fit quality above the threshold.
    pub chaotic: bool,
}

/// Fits `d ~ k |s_a - s_b|`; flags chaotic growth when `k > 0` with
/// `R^2 >= r2_threshold`. Needs at least five separations.
pub fn chaos_slope(samples: &[(f64, f64)], r2_threshold: f64) -> Result<SlopeFit> {
    if samples.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least 5 separations, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let sx: f64 = samples.iter().map(|p| p.0).sum();
    let sy: f64 = samples.iter().map(|p| p.1).sum();
    let sxx: f64 = samples.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = samples.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InvalidArgument("degenerate separations".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = samples.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = samples.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        n_points: samples.len(),
        chaotic: slope > 0.0 && r_squared >= r2_threshold,
    })
}
