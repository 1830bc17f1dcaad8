//! Leave-one-bidder-count-out prediction of bid distributions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::homogenize::{fit_homogenization, homogenize, HomogenizationModel, HomogenizedBid};
use super::metrics::{l1_distance, moment_distance, weighted_fit_report, FitReport, FitRow};
use super::records::{reconcile_bidder_counts, BidRecord};
use crate::bidding::BiddingFunction;
use crate::distributions::{EmpiricalDistribution, Orientation};
use crate::equilibrium::{
    solve_sample_equilibrium_agg, solve_sample_equilibrium_ind, EquilibriumOptions,
};
use crate::error::{Error, Result};
use crate::estimation::{bne_bid_empirical, gpv_pseudo_values, passes_cutoff, tukey_cutoff};
use crate::loss::{Belief, Family};

/// Symmetric bidder population of an auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BidderClass {
    NonFringe,
    Fringe,
}

impl BidderClass {
    pub fn label(self) -> &'static str {
        match self {
            BidderClass::NonFringe => "non-fringe",
            BidderClass::Fringe => "fringe",
        }
    }
}

impl fmt::Display for BidderClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "AGG")]
    Agg,
    #[serde(rename = "IND")]
    Ind,
    #[serde(rename = "BNE")]
    Bne,
    #[serde(rename = "AGG-Out")]
    AggOut,
    #[serde(rename = "IND-Out")]
    IndOut,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Agg,
        Estimator::Ind,
        Estimator::Bne,
        Estimator::AggOut,
        Estimator::IndOut,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Agg => "AGG",
            Estimator::Ind => "IND",
            Estimator::Bne => "BNE",
            Estimator::AggOut => "AGG-Out",
            Estimator::IndOut => "IND-Out",
        }
    }

    /// Moment family, `None` for the Bayes-Nash benchmark.
    pub fn family(self) -> Option<Family> {
        match self {
            Estimator::Agg | Estimator::AggOut => Some(Family::Aggregate),
            Estimator::Ind | Estimator::IndOut => Some(Family::Individual),
            Estimator::Bne => None,
        }
    }

    pub fn removes_outliers(self) -> bool {
        matches!(self, Estimator::AggOut | Estimator::IndOut)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown estimator {s:?}")))
    }
}

/// How the per-count upper extremes are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpperPooling {
    /// Largest per-count maximum.
    #[default]
    Max,
    /// Smallest per-count maximum; bids above it are discarded.
    Min,
}

/// Where the outlier cutoff is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TukeyScope {
    /// On all bids used for estimation.
    #[default]
    Pooled,
    /// Separately for each bidder count.
    PerClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub estimators: Vec<Estimator>,
    pub tukey_k: f64,
    pub tukey_scope: TukeyScope,
    pub upper_pooling: UpperPooling,
    pub max_bidders_nonfringe: Option<usize>,
    pub max_bidders_fringe: Option<usize>,
    /// Bidder counts with fewer auctions are not used for estimation.
    pub min_auctions: usize,
    pub bandwidth: Option<f64>,
    pub equilibrium: EquilibriumOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            estimators: Estimator::ALL.to_vec(),
            tukey_k: 1.5,
            tukey_scope: TukeyScope::Pooled,
            upper_pooling: UpperPooling::Max,
            max_bidders_nonfringe: None,
            max_bidders_fringe: None,
            min_auctions: 2,
            bandwidth: None,
            equilibrium: EquilibriumOptions::procurement(),
        }
    }
}

impl PipelineConfig {
    pub fn max_bidders(&self, class: BidderClass) -> Option<usize> {
        match class {
            BidderClass::NonFringe => self.max_bidders_nonfringe,
            BidderClass::Fringe => self.max_bidders_fringe,
        }
    }
}

/// Homogenized bids of one symmetric class, grouped by bidder count and
/// auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassData {
    pub class: BidderClass,
    pub auctions: BTreeMap<usize, Vec<Vec<f64>>>,
}

impl ClassData {
    pub fn new(class: BidderClass, auctions: BTreeMap<usize, Vec<Vec<f64>>>) -> Self {
        ClassData { class, auctions }
    }

    /// Splits homogenized bids into all-fringe and all-non-fringe auctions;
    /// the count of mixed auctions is returned alongside.
    pub fn split(bids: &[HomogenizedBid]) -> (ClassData, ClassData, usize) {
        let mut grouped: BTreeMap<&str, Vec<&HomogenizedBid>> = BTreeMap::new();
        for b in bids {
            grouped.entry(b.auction_id.as_str()).or_default().push(b);
        }
        let mut non_fringe = ClassData::new(BidderClass::NonFringe, BTreeMap::new());
        let mut fringe = ClassData::new(BidderClass::Fringe, BTreeMap::new());
        let mut mixed = 0;
        for members in grouped.values() {
            let fringe_count = members.iter().filter(|b| b.fringe).count();
            let target = if fringe_count == members.len() {
                &mut fringe
            } else if fringe_count == 0 {
                &mut non_fringe
            } else {
                mixed += 1;
                continue;
            };
            target
                .auctions
                .entry(members.len())
                .or_default()
                .push(members.iter().map(|b| b.homogenized).collect());
        }
        (non_fringe, fringe, mixed)
    }

    pub fn bidder_counts(&self) -> Vec<usize> {
        self.auctions.keys().copied().collect()
    }

    pub fn bids(&self, bidders: usize) -> Vec<f64> {
        self.auctions
            .get(&bidders)
            .map(|rows| rows.iter().flatten().copied().collect())
            .unwrap_or_default()
    }

    /// Drops bidder counts above `max` and below two.
    pub fn restricted(&self, max: Option<usize>) -> ClassData {
        ClassData {
            class: self.class,
            auctions: self
                .auctions
                .iter()
                .filter(|(n, _)| **n >= 2 && !max.is_some_and(|m| **n > m))
                .map(|(n, rows)| (*n, rows.clone()))
                .collect(),
        }
    }
}

/// Per-count summary statistics of a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: BidderClass,
    pub bidders: usize,
    pub auctions: usize,
    pub bids: usize,
    pub low: f64,
    /// Average lowest bid per auction.
    pub winning_mean: f64,
    pub mean: f64,
    pub high: f64,
    /// Population standard deviation.
    pub sd: f64,
}

pub fn summarize(data: &ClassData) -> Vec<ClassSummary> {
    data.auctions
        .iter()
        .filter(|(_, rows)| !rows.is_empty())
        .map(|(&n, rows)| {
            let bids: Vec<f64> = rows.iter().flatten().copied().collect();
            let count = bids.len() as f64;
            let mean = bids.iter().sum::<f64>() / count;
            let sd = (bids.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / count).sqrt();
            let winners: f64 = rows
                .iter()
                .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
                .sum();
            ClassSummary {
                class: data.class,
                bidders: n,
                auctions: rows.len(),
                bids: bids.len(),
                low: bids.iter().copied().fold(f64::INFINITY, f64::min),
                winning_mean: winners / rows.len() as f64,
                mean,
                high: bids.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                sd,
            }
        })
        .collect()
}

/// Belief used to invert the bids of one bidder count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceBelief {
    pub bidders: usize,
    pub belief: Belief,
    pub bids_used: usize,
    pub bids_discarded: usize,
}

/// Predicted bid distribution for one target count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: BidderClass,
    pub target: usize,
    pub estimator: Estimator,
    /// Pooled pseudo-costs, one per inverted bid.
    pub pseudo_costs: Vec<f64>,
    /// Predicted bids, one per pseudo-cost.
    pub predicted_bids: Vec<f64>,
    pub sources: Vec<SourceBelief>,
    /// Equilibrium belief at the target count; `None` for the benchmark.
    pub equilibrium_belief: Option<Belief>,
    pub cutoff: Option<f64>,
    pub warnings: Vec<String>,
}

impl Prediction {
    pub fn distribution(&self) -> Result<EmpiricalDistribution> {
        EmpiricalDistribution::from_sample(&self.predicted_bids)
    }
}

/// Bidder counts usable as estimation sources for `target`.
fn sources(data: &ClassData, target: usize, config: &PipelineConfig) -> Vec<usize> {
    data.auctions
        .iter()
        .filter(|(n, rows)| **n != target && **n >= 2 && rows.len() >= config.min_auctions.max(1))
        .map(|(n, _)| *n)
        .collect()
}

/// Predicts the bid distribution of `target`-bidder auctions from the other
/// bidder counts of the class. Target bids are never read.
pub fn leave_one_n_out_predict(
    data: &ClassData,
    target: usize,
    estimator: Estimator,
    config: &PipelineConfig,
) -> Result<Prediction> {
    if target < 2 {
        return Err(Error::InvalidArity(target));
    }
    let others = sources(data, target, config);
    if others.is_empty() {
        return Err(Error::NotEnoughVariation(format!(
            "no other bidder count with at least {} auctions in the {} class",
            config.min_auctions.max(1),
            data.class
        )));
    }
    match estimator.family() {
        Some(family) => predict_moment(data, target, estimator, family, &others, config),
        None => predict_bne(data, target, &others, config),
    }
}

fn predict_moment(
    data: &ClassData,
    target: usize,
    estimator: Estimator,
    family: Family,
    others: &[usize],
    config: &PipelineConfig,
) -> Result<Prediction> {
    let orientation = Orientation::Procurement;
    let all: BTreeMap<usize, Vec<f64>> = others.iter().map(|&n| (n, data.bids(n))).collect();

    let mut cutoff = None;
    let kept: BTreeMap<usize, Vec<f64>> = if estimator.removes_outliers() {
        match config.tukey_scope {
            TukeyScope::Pooled => {
                let pooled: Vec<f64> = all.values().flatten().copied().collect();
                let c = tukey_cutoff(&pooled, config.tukey_k, orientation)?;
                cutoff = Some(c);
                all.iter()
                    .map(|(n, b)| (*n, filter_cutoff(b, c)))
                    .collect()
            }
            TukeyScope::PerClass => all
                .iter()
                .map(|(n, b)| Ok((*n, filter_cutoff(b, tukey_cutoff(b, config.tukey_k, orientation)?))))
                .collect::<Result<_>>()?,
        }
    } else {
        all.clone()
    };

    let max_of = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let highs = kept.values().filter(|b| !b.is_empty()).map(|b| max_of(b));
    let high = match config.upper_pooling {
        UpperPooling::Max => highs.fold(f64::NEG_INFINITY, f64::max),
        UpperPooling::Min => highs.fold(f64::INFINITY, f64::min),
    };

    let mut warnings = Vec::new();
    let mut source_beliefs = Vec::new();
    let mut pooled = Vec::new();
    for &n in others {
        let used: Vec<f64> = kept[&n].iter().copied().filter(|b| *b <= high).collect();
        if used.is_empty() {
            warnings.push(format!("no usable bids for {n} bidders"));
            continue;
        }
        let low = others
            .iter()
            .filter(|&&k| k <= n)
            .map(|k| min_of(&kept[k]))
            .fold(f64::INFINITY, f64::min);
        let rows = &data.auctions[&n];
        let moment = match family {
            Family::Aggregate => {
                rows.iter().map(|r| min_of(r)).sum::<f64>() / rows.len() as f64
            }
            Family::Individual => all[&n].iter().sum::<f64>() / all[&n].len() as f64,
        };
        let belief = Belief::new(
            family,
            low,
            moment.clamp(low, high),
            high,
            n,
            orientation,
        )?;
        let costs = BiddingFunction::new(belief).inverse_all(&used)?;
        pooled.extend(costs);
        source_beliefs.push(SourceBelief {
            bidders: n,
            belief,
            bids_used: used.len(),
            bids_discarded: all[&n].len() - used.len(),
        });
    }
    let dist = pooled_distribution(&pooled)?;
    let solution = match family {
        Family::Aggregate => solve_sample_equilibrium_agg(&dist, target, None, &config.equilibrium)?,
        Family::Individual => solve_sample_equilibrium_ind(&dist, target, None, &config.equilibrium)?,
    };
    let function = solution.bidding_function();
    let predicted_bids = function.bid_all(&pooled)?;
    Ok(Prediction {
        class: data.class,
        target,
        estimator,
        pseudo_costs: pooled,
        predicted_bids,
        sources: source_beliefs,
        equilibrium_belief: Some(solution.belief),
        cutoff,
        warnings,
    })
}

fn filter_cutoff(bids: &[f64], cutoff: f64) -> Vec<f64> {
    bids.iter()
        .copied()
        .filter(|b| passes_cutoff(*b, cutoff, Orientation::Procurement))
        .collect()
}

fn pooled_distribution(pooled: &[f64]) -> Result<EmpiricalDistribution> {
    if pooled.is_empty() {
        return Err(Error::NotEnoughVariation("no pseudo-costs to pool".into()));
    }
    let dist = EmpiricalDistribution::from_sample(pooled)?;
    if dist.len() < 2 {
        return Err(Error::NotEnoughVariation(
            "pooled pseudo-costs are all identical".into(),
        ));
    }
    Ok(dist)
}

fn predict_bne(
    data: &ClassData,
    target: usize,
    others: &[usize],
    config: &PipelineConfig,
) -> Result<Prediction> {
    let mut warnings = Vec::new();
    let mut pooled = Vec::new();
    for &n in others {
        match gpv_pseudo_values(&data.bids(n), n, Orientation::Procurement, config.bandwidth) {
            Ok(set) => {
                warnings.extend(set.warnings.iter().map(|w| format!("{n} bidders: {w}")));
                pooled.extend(set.values);
            }
            Err(e @ (Error::NotEnoughVariation(_) | Error::DensityUnderflow { .. })) => {
                warnings.push(format!("{n} bidders skipped: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    let dist = pooled_distribution(&pooled)?;
    let predicted_bids = pooled
        .iter()
        .map(|&c| bne_bid_empirical(&dist, target, c, Orientation::Procurement))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Prediction {
        class: data.class,
        target,
        estimator: Estimator::Bne,
        pseudo_costs: pooled,
        predicted_bids,
        sources: Vec::new(),
        equilibrium_belief: None,
        cutoff: None,
        warnings,
    })
}

/// Everything produced by [`run_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub model: HomogenizationModel,
    pub summaries: Vec<ClassSummary>,
    pub report: FitReport,
    pub predictions: Vec<Prediction>,
    pub adjusted_bidder_counts: usize,
    pub mixed_auctions_excluded: usize,
    pub warnings: Vec<String>,
}

/// Compares a prediction with the observed target bids.
pub fn fit_row(prediction: &Prediction, observed: &[f64]) -> Result<FitRow> {
    let sample = EmpiricalDistribution::from_sample(observed)?;
    let predicted = prediction.distribution()?;
    Ok(FitRow {
        class: prediction.class.label().into(),
        bidders: prediction.target,
        estimator: prediction.estimator.label().into(),
        observations: observed.len(),
        sample_mean: sample.mean(),
        sample_sd: sample.std_dev(),
        predicted_mean: predicted.mean(),
        predicted_sd: predicted.std_dev(),
        predicted_points: prediction.predicted_bids.len(),
        md: moment_distance(&predicted, &sample),
        l1: l1_distance(&predicted, &sample),
    })
}

/// Homogenizes the records, splits them into symmetric classes and predicts
/// every bidder count of every class with each configured estimator.
/// Targets that cannot be estimated are skipped with a warning.
pub fn run_pipeline(records: &[BidRecord], config: &PipelineConfig) -> Result<PipelineOutput> {
    if !(config.tukey_k >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tukey multiplier must be non-negative, got {}",
            config.tukey_k
        )));
    }
    let mut records = records.to_vec();
    let adjusted = reconcile_bidder_counts(&mut records)?;
    let model = fit_homogenization(&records)?;
    let homogenized = homogenize(&records, &model)?;
    let (non_fringe, fringe, mixed) = ClassData::split(&homogenized);

    let mut warnings = Vec::new();
    if adjusted > 0 {
        warnings.push(format!("{adjusted} records had their bidder count adjusted"));
    }
    let mut summaries = Vec::new();
    let mut classes = Vec::new();
    for data in [non_fringe, fringe] {
        let data = data.restricted(config.max_bidders(data.class));
        summaries.extend(summarize(&data));
        if data.auctions.len() < 2 {
            warnings.push(format!(
                "{} class has fewer than two bidder counts; skipped",
                data.class
            ));
            continue;
        }
        classes.push(data);
    }
    if classes.is_empty() {
        return Err(Error::NotEnoughVariation(
            "no symmetric class has two or more bidder counts".into(),
        ));
    }

    let jobs: Vec<(&ClassData, usize, Estimator)> = classes
        .iter()
        .flat_map(|d| {
            d.bidder_counts()
                .into_iter()
                .flat_map(move |n| config.estimators.iter().map(move |e| (d, n, *e)))
        })
        .collect();
    let results: Vec<Result<(Prediction, FitRow)>> = jobs
        .par_iter()
        .map(|(d, n, e)| {
            let p = leave_one_n_out_predict(d, *n, *e, config)?;
            let row = fit_row(&p, &d.bids(*n))?;
            Ok((p, row))
        })
        .collect();

    let mut predictions = Vec::new();
    let mut rows = Vec::new();
    for ((d, n, e), r) in jobs.iter().zip(results) {
        match r {
            Ok((p, row)) => {
                warnings.extend(
                    p.warnings
                        .iter()
                        .map(|w| format!("{} n={n} {e}: {w}", d.class)),
                );
                predictions.push(p);
                rows.push(row);
            }
            Err(err) => warnings.push(format!("{} n={n} {e} skipped: {err}", d.class)),
        }
    }
    if rows.is_empty() {
        return Err(Error::NotEnoughVariation(
            "no bidder count could be predicted".into(),
        ));
    }
    Ok(PipelineOutput {
        model,
        summaries,
        report: weighted_fit_report(rows),
        predictions,
        adjusted_bidder_counts: adjusted,
        mixed_auctions_excluded: mixed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ValueDistribution;
    use crate::equilibrium::solve_equilibrium_ind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn equilibrium_class(counts: &[(usize, usize)], seed: u64) -> ClassData {
        let dist = ValueDistribution::uniform(0.8, 1.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut auctions = BTreeMap::new();
        for &(n, count) in counts {
            let sol =
                solve_equilibrium_ind(&dist, n, &EquilibriumOptions::procurement()).unwrap();
            let rows: Vec<Vec<f64>> = (0..count)
                .map(|_| (0..n).map(|_| sol.bid(dist.sample(&mut rng)).unwrap()).collect())
                .collect();
            auctions.insert(n, rows);
        }
        ClassData::new(BidderClass::NonFringe, auctions)
    }

    #[test]
    fn prediction_has_one_bid_per_pseudo_cost() {
        let data = equilibrium_class(&[(2, 60), (3, 40), (4, 30)], 1);
        let p = leave_one_n_out_predict(&data, 3, Estimator::Ind, &PipelineConfig::default())
            .unwrap();
        assert_eq!(p.predicted_bids.len(), p.pseudo_costs.len());
        assert_eq!(p.pseudo_costs.len(), 120 + 120);
    }

    #[test]
    fn target_bids_are_never_read() {
        let data = equilibrium_class(&[(2, 50), (3, 40), (4, 30)], 2);
        let mut poisoned = data.clone();
        for row in poisoned.auctions.get_mut(&3).unwrap() {
            for b in row.iter_mut() {
                *b = 123.0;
            }
        }
        for e in Estimator::ALL {
            let a = leave_one_n_out_predict(&data, 3, e, &PipelineConfig::default()).unwrap();
            let b = leave_one_n_out_predict(&poisoned, 3, e, &PipelineConfig::default()).unwrap();
            assert_eq!(a, b, "{e}");
        }
    }

    #[test]
    fn equilibrium_data_predicted_closely() {
        let data = equilibrium_class(&[(2, 200), (3, 150), (4, 100)], 3);
        let p = leave_one_n_out_predict(&data, 3, Estimator::Ind, &PipelineConfig::default())
            .unwrap();
        let observed = data.bids(3);
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        let predicted = p.distribution().unwrap().mean();
        assert!((predicted - mean).abs() < 0.01, "{predicted} vs {mean}");
    }

    #[test]
    fn single_count_is_not_enough() {
        let data = equilibrium_class(&[(2, 20)], 4);
        assert!(matches!(
            leave_one_n_out_predict(&data, 2, Estimator::Agg, &PipelineConfig::default()),
            Err(Error::NotEnoughVariation(_))
        ));
        let sparse = equilibrium_class(&[(2, 20), (3, 1)], 4);
        assert!(matches!(
            leave_one_n_out_predict(&sparse, 2, Estimator::Agg, &PipelineConfig::default()),
            Err(Error::NotEnoughVariation(_))
        ));
    }

    #[test]
    fn min_pooling_discards_high_bids() {
        let data = equilibrium_class(&[(2, 40), (3, 40), (5, 40)], 5);
        let config = PipelineConfig {
            upper_pooling: UpperPooling::Min,
            ..PipelineConfig::default()
        };
        let p = leave_one_n_out_predict(&data, 3, Estimator::Ind, &config).unwrap();
        let high = p.sources[0].belief.high();
        assert!(p.sources.iter().all(|s| s.belief.high() == high));
        assert!(p.sources.iter().any(|s| s.bids_discarded > 0));
    }

    #[test]
    fn estimator_labels_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.label().parse::<Estimator>().unwrap(), e);
        }
    }
}
