//! Distances between predicted and observed bid distributions.

use serde::{Deserialize, Serialize};

use crate::distributions::EmpiricalDistribution;

/// Euclidean distance between (mean, population SD) pairs.
pub fn moment_distance_from_stats(mean_a: f64, sd_a: f64, mean_b: f64, sd_b: f64) -> f64 {
    (mean_a - mean_b).hypot(sd_a - sd_b)
}

/// [`moment_distance_from_stats`] on two distributions.
pub fn moment_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    moment_distance_from_stats(a.mean(), a.std_dev(), b.mean(), b.std_dev())
}

/// Area between two step cdfs, integrated exactly over the merged support.
pub fn l1_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let mut points: Vec<f64> = a.support().iter().chain(b.support()).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
        .windows(2)
        .map(|w| (a.cdf(w[0]) - b.cdf(w[0])).abs() * (w[1] - w[0]))
        .sum()
}

/// Count-weighted average of `(value, count)` pairs; zero counts are
/// ignored and `None` is returned when nothing remains.
pub fn weighted_average(entries: &[(f64, usize)]) -> Option<f64> {
    let total: usize = entries.iter().map(|(_, c)| c).sum();
    if total == 0 {
        return None;
    }
    Some(
        entries
            .iter()
            .filter(|(_, c)| *c > 0)
            .map(|(v, c)| v * *c as f64)
            .sum::<f64>()
            / total as f64,
    )
}

/// One row of a fit comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub class: String,
    pub bidders: usize,
    pub estimator: String,
    /// Observed bids in the target class.
    pub observations: usize,
    pub sample_mean: f64,
    pub sample_sd: f64,
    pub predicted_mean: f64,
    pub predicted_sd: f64,
    pub predicted_points: usize,
    pub md: f64,
    pub l1: f64,
}

/// Observation-weighted averages for one (class, estimator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedFit {
    pub class: String,
    pub estimator: String,
    pub observations: usize,
    pub md: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rows: Vec<FitRow>,
    pub averages: Vec<WeightedFit>,
}

impl FitReport {
    pub fn average(&self, class: &str, estimator: &str) -> Option<&WeightedFit> {
        self.averages
            .iter()
            .find(|w| w.class == class && w.estimator == estimator)
    }
}

/// Builds the report with averages per (class, estimator) in order of first
/// appearance.
pub fn weighted_fit_report(rows: Vec<FitRow>) -> FitReport {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in &rows {
        let key = (r.class.clone(), r.estimator.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let averages = keys
        .into_iter()
        .filter_map(|(class, estimator)| {
            let group: Vec<&FitRow> = rows
                .iter()
                .filter(|r| r.class == class && r.estimator == estimator)
                .collect();
            let md: Vec<(f64, usize)> = group.iter().map(|r| (r.md, r.observations)).collect();
            let l1: Vec<(f64, usize)> = group.iter().map(|r| (r.l1, r.observations)).collect();
            Some(WeightedFit {
                observations: group.iter().map(|r| r.observations).sum(),
                md: weighted_average(&md)?,
                l1: weighted_average(&l1)?,
                class,
                estimator,
            })
        })
        .collect();
    FitReport { rows, averages }
}
