//! Synthetic procurement data drawn from a moment equilibrium.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::records::BidRecord;
use crate::distributions::ValueDistribution;
use crate::equilibrium::{solve_equilibrium, EquilibriumOptions, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::loss::{Belief, Family};

/// Additive effects on the normalized bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateEffects {
    pub fringe: f64,
    pub dist: f64,
    pub util: f64,
    pub rutil: f64,
    pub rdist: f64,
}

impl Default for CovariateEffects {
    fn default() -> Self {
        CovariateEffects {
            fringe: 0.04,
            dist: 0.001,
            util: -0.02,
            rutil: 0.01,
            rdist: 0.0005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub auctions: usize,
    pub seed: u64,
    pub family: Family,
    /// Normalized costs are uniform on `[cost_low, cost_high]`.
    pub cost_low: f64,
    pub cost_high: f64,
    pub nonfringe_bidders: Vec<usize>,
    pub fringe_bidders: Vec<usize>,
    /// Share of all-fringe auctions.
    pub fringe_share: f64,
    /// Share of auctions mixing both kinds of bidder.
    pub mixed_share: f64,
    /// Probability that a fringe bid receives a high-tail shock.
    pub outlier_probability: f64,
    /// Bidder counts whose fringe bids can be shocked; empty means all.
    pub outlier_bidders: Vec<usize>,
    /// Shocks are uniform on `[outlier_low, outlier_high]`.
    pub outlier_low: f64,
    pub outlier_high: f64,
    pub auction_effect_sd: f64,
    pub noise_sd: f64,
    pub effects: CovariateEffects,
    pub eng_low: f64,
    pub eng_high: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            auctions: 400,
            seed: 0,
            family: Family::Individual,
            cost_low: 0.85,
            cost_high: 1.25,
            nonfringe_bidders: vec![2, 3, 4],
            fringe_bidders: vec![2, 3, 4, 5, 6, 7],
            fringe_share: 0.5,
            mixed_share: 0.0,
            outlier_probability: 0.08,
            outlier_bidders: vec![3, 5],
            outlier_low: 0.2,
            outlier_high: 0.6,
            auction_effect_sd: 0.005,
            noise_sd: 0.0,
            effects: CovariateEffects::default(),
            eng_low: 0.5,
            eng_high: 5.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.auctions == 0 {
            return bad("at least one auction is required".into());
        }
        if !(self.cost_low < self.cost_high) || !self.cost_low.is_finite() || !self.cost_high.is_finite() {
            return bad(format!(
                "cost range [{}, {}] is empty",
                self.cost_low, self.cost_high
            ));
        }
        for (name, list) in [
            ("nonfringe_bidders", &self.nonfringe_bidders),
            ("fringe_bidders", &self.fringe_bidders),
        ] {
            if list.is_empty() || list.iter().any(|n| *n < 2) {
                return bad(format!("{name} must list bidder counts of at least 2"));
            }
        }
        for (name, p) in [
            ("fringe_share", self.fringe_share),
            ("mixed_share", self.mixed_share),
            ("outlier_probability", self.outlier_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.fringe_share + self.mixed_share > 1.0 {
            return bad("fringe_share + mixed_share exceeds 1".into());
        }
        if !(0.0 <= self.outlier_low && self.outlier_low <= self.outlier_high) {
            return bad("outlier shock range must satisfy 0 <= low <= high".into());
        }
        if !(self.auction_effect_sd >= 0.0 && self.noise_sd >= 0.0) {
            return bad("standard deviations must be non-negative".into());
        }
        if !(self.eng_low > 0.0 && self.eng_low <= self.eng_high) {
            return bad("engineer's estimate range must be positive and ordered".into());
        }
        Ok(())
    }
}

/// Generating equilibrium for one bidder count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub bidders: usize,
    pub belief: Belief,
    pub mean_bid: f64,
}

/// Ground truth recorded alongside a synthetic data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub config: SyntheticConfig,
    pub cost_distribution: ValueDistribution,
    pub equilibria: Vec<TruthEntry>,
    pub records: usize,
    pub fringe_auctions: usize,
    pub mixed_auctions: usize,
    pub outliers: usize,
}

/// Draws a data set. Each auction is non-fringe, fringe or mixed; bidders
/// draw costs, bid the equilibrium bid for the auction's bidder count, and
/// covariate effects, an auction effect and noise are added before scaling
/// by the engineer's estimate. Fringe bids occasionally get a high shock.
pub fn generate(config: &SyntheticConfig) -> Result<(Vec<BidRecord>, SyntheticTruth)> {
    config.validate()?;
    let costs = ValueDistribution::uniform(config.cost_low, config.cost_high)?;
    let counts: BTreeSet<usize> = config
        .nonfringe_bidders
        .iter()
        .chain(&config.fringe_bidders)
        .copied()
        .collect();
    let opts = EquilibriumOptions::procurement();
    let solutions: Vec<EquilibriumSolution> = counts
        .iter()
        .map(|&n| solve_equilibrium(config.family, &costs, n, &opts))
        .collect::<Result<_>>()?;
    let solution_for = |n: usize| &solutions[counts.iter().position(|c| *c == n).unwrap()];

    let effect_dist = Normal::new(0.0, config.auction_effect_sd)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let noise_dist =
        Normal::new(0.0, config.noise_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = (config.auctions as f64).log10().floor() as usize + 1;
    let fx = &config.effects;

    let mut records = Vec::new();
    let (mut fringe_auctions, mut mixed_auctions, mut outliers) = (0, 0, 0);
    for a in 0..config.auctions {
        let draw: f64 = rng.gen();
        let (fringe_all, mixed) = if draw < config.fringe_share {
            (true, false)
        } else if draw < config.fringe_share + config.mixed_share {
            (false, true)
        } else {
            (false, false)
        };
        let list = if fringe_all {
            &config.fringe_bidders
        } else {
            &config.nonfringe_bidders
        };
        let n = list[rng.gen_range(0..list.len())];
        fringe_auctions += fringe_all as usize;
        mixed_auctions += mixed as usize;
        let solution = solution_for(n);
        let eng = rng.gen_range(config.eng_low..=config.eng_high);
        let effect = effect_dist.sample(&mut rng);
        let dists: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..50.0)).collect();
        let utils: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let auction_id = format!("A{a:0width$}");
        for j in 0..n {
            let fringe = fringe_all || (mixed && j == 0);
            let rival_min = |v: &[f64]| {
                v.iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, x)| *x)
                    .fold(f64::INFINITY, f64::min)
            };
            let rdist = rival_min(&dists);
            let rutil = rival_min(&utils);
            let cost = costs.sample(&mut rng);
            let mut y = solution.bid(cost)?
                + fx.dist * dists[j]
                + fx.util * utils[j]
                + fx.rutil * rutil
                + fx.rdist * rdist
                + effect
                + noise_dist.sample(&mut rng);
            if fringe {
                y += fx.fringe;
                let eligible =
                    config.outlier_bidders.is_empty() || config.outlier_bidders.contains(&n);
                if rng.gen::<f64>() < config.outlier_probability && eligible {
                    y += rng.gen_range(config.outlier_low..=config.outlier_high);
                    outliers += 1;
                }
            }
            records.push(BidRecord {
                auction_id: auction_id.clone(),
                bidder_id: format!("{auction_id}-{}", j + 1),
                bid: y * eng,
                eng,
                dist: dists[j],
                util: utils[j],
                rdist,
                rutil,
                fringe,
                n_bidders: n,
            });
        }
    }
    let truth = SyntheticTruth {
        config: config.clone(),
        cost_distribution: costs,
        equilibria: counts
            .iter()
            .zip(&solutions)
            .map(|(&n, s)| TruthEntry {
                bidders: n,
                belief: s.belief,
                mean_bid: s.mean_bid,
            })
            .collect(),
        records: records.len(),
        fringe_auctions,
        mixed_auctions,
        outliers,
    };
    Ok((records, truth))
}
