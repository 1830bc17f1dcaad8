//! Non-parametric structural estimation.
//!
//! Beliefs are estimated from observed bids (extremes, average winning bid,
//! mean bid), bids are mapped to pseudo-values through the inverse minimax
//! bidding function, and the Bayes-Nash benchmark inverts the first-order
//! condition with a kernel estimate of the bid density.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bidding::BiddingFunction;
use crate::distributions::{EmpiricalDistribution, Orientation, ValueDistribution};
use crate::error::{Error, Result};
use crate::loss::{Belief, Family};

/// Observed bids with a fixed number of bidders per auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidSample {
    structured: Option<Vec<Vec<f64>>>,
    flat: Vec<f64>,
    bidders: usize,
}

fn check_bids(bids: &[f64]) -> Result<()> {
    match bids.iter().position(|b| !b.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: bids[index],
        }),
        None => Ok(()),
    }
}

impl BidSample {
    /// One row per auction; every row must hold the same number of bids.
    pub fn structured(rows: Vec<Vec<f64>>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptySample)?;
        let bidders = first.len();
        if bidders < 2 {
            return Err(Error::InvalidArity(bidders));
        }
        for (row, bids) in rows.iter().enumerate() {
            if bids.len() != bidders {
                return Err(Error::RaggedSample {
                    row,
                    len: bids.len(),
                    expected: bidders,
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        check_bids(&flat)?;
        Ok(Self {
            structured: Some(rows),
            flat,
            bidders,
        })
    }

    /// Bids without auction structure, from auctions with `bidders` bidders.
    pub fn flat(bids: Vec<f64>, bidders: usize) -> Result<Self> {
        if bids.is_empty() {
            return Err(Error::EmptySample);
        }
        if bidders < 2 {
            return Err(Error::InvalidArity(bidders));
        }
        check_bids(&bids)?;
        Ok(Self {
            structured: None,
            flat: bids,
            bidders,
        })
    }

    pub fn bids(&self) -> &[f64] {
        &self.flat
    }

    pub fn rows(&self) -> Option<&[Vec<f64>]> {
        self.structured.as_deref()
    }

    pub fn bidders(&self) -> usize {
        self.bidders
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum OutlierRule {
    #[default]
    None,
    /// Interquartile rule with multiplier `k`, applied to the tail that
    /// favors the bidder: low bids for buyers, high bids in procurement.
    Tukey { k: f64 },
}

impl OutlierRule {
    pub fn tukey() -> Self {
        OutlierRule::Tukey { k: 1.5 }
    }
}

impl FromStr for OutlierRule {
    type Err = Error;

    /// `none`, `tukey` or `tukey:k`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "none" => Ok(OutlierRule::None),
            None if s == "tukey" => Ok(OutlierRule::tukey()),
            Some(("tukey", k)) => {
                let k: f64 = k.trim().parse().map_err(|e| {
                    Error::InvalidParameter(format!("outlier multiplier `{k}`: {e}"))
                })?;
                if !(k >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "outlier multiplier must be nonnegative, got {k}"
                    )));
                }
                Ok(OutlierRule::Tukey { k })
            }
            _ => Err(Error::InvalidParameter(format!(
                "unknown outlier rule `{s}` (expected none, tukey or tukey:k)"
            ))),
        }
    }
}

impl fmt::Display for OutlierRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutlierRule::None => f.write_str("none"),
            OutlierRule::Tukey { k } => write!(f, "tukey:{k}"),
        }
    }
}

/// Cutoff of the interquartile rule: `Q1 - k IQR` for buyers (bids below are
/// outliers), `Q3 + k IQR` in procurement (bids above are outliers).
/// Quartiles use the inverse-cdf convention.
pub fn tukey_cutoff(bids: &[f64], k: f64, orientation: Orientation) -> Result<f64> {
    let dist = EmpiricalDistribution::from_sample(bids)?;
    let (q1, q3) = (dist.quantile(0.25), dist.quantile(0.75));
    let iqr = q3 - q1;
    Ok(match orientation {
        Orientation::BuyerAuction => q1 - k * iqr,
        Orientation::Procurement => q3 + k * iqr,
    })
}

/// Whether `bid` survives the cutoff from [`tukey_cutoff`].
pub fn passes_cutoff(bid: f64, cutoff: f64, orientation: Orientation) -> bool {
    match orientation {
        Orientation::BuyerAuction => bid >= cutoff,
        Orientation::Procurement => bid <= cutoff,
    }
}

/// Estimated belief triple with both moment candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefEstimate {
    pub low: f64,
    /// Average winning bid.
    pub winning_moment: f64,
    /// Average bid.
    pub mean: f64,
    pub high: f64,
    pub bidders: usize,
    pub orientation: Orientation,
    pub outliers_removed: usize,
    pub source: String,
}

impl BeliefEstimate {
    pub fn moment(&self, family: Family) -> f64 {
        match family {
            Family::Aggregate => self.winning_moment,
            Family::Individual => self.mean,
        }
    }

    /// The belief of `family`, with the moment clamped into the estimated
    /// range (outlier removal can move an extreme past a moment estimated
    /// on the full sample).
    pub fn belief(&self, family: Family) -> Result<Belief> {
        let moment = self.moment(family).clamp(self.low, self.high);
        Belief::new(
            family,
            self.low,
            moment,
            self.high,
            self.bidders,
            self.orientation,
        )
    }
}

/// Estimates beliefs from a bid sample. Extremes are sample extremes after
/// optional outlier removal; both moments are computed before removal. The
/// winning-bid moment averages per-auction winners for structured samples
/// and otherwise uses the expected extreme of `bidders` draws from the
/// empirical bid distribution.
pub fn estimate_beliefs(
    sample: &BidSample,
    orientation: Orientation,
    rule: OutlierRule,
) -> Result<BeliefEstimate> {
    let bids = sample.bids();
    let n = sample.bidders();
    let dist = EmpiricalDistribution::from_sample(bids)?;
    let mean = dist.mean();
    let (winning_moment, mut source) = match sample.rows() {
        Some(rows) => {
            let winners = rows.iter().map(|row| match orientation {
                Orientation::BuyerAuction => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Orientation::Procurement => row.iter().copied().fold(f64::INFINITY, f64::min),
            });
            (
                winners.sum::<f64>() / rows.len() as f64,
                format!("structured sample of {} auctions", rows.len()),
            )
        }
        None => {
            let m = match orientation {
                Orientation::BuyerAuction => dist.max_order_stat_mean(n)?,
                Orientation::Procurement => dist.min_order_stat_mean(n)?,
            };
            (m, format!("flat sample of {} bids", bids.len()))
        }
    };
    let kept: Vec<f64> = match rule {
        OutlierRule::None => bids.to_vec(),
        OutlierRule::Tukey { k } => {
            let cutoff = tukey_cutoff(bids, k, orientation)?;
            source.push_str(&format!(", tukey k={k} cutoff {cutoff}"));
            bids.iter()
                .copied()
                .filter(|b| passes_cutoff(*b, cutoff, orientation))
                .collect()
        }
    };
    if dist.len() == 1 {
        source.push_str(", degenerate sample: all bids identical");
    }
    let low = kept.iter().copied().fold(f64::INFINITY, f64::min);
    let high = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BeliefEstimate {
        low,
        winning_moment,
        mean,
        high,
        bidders: n,
        orientation,
        outliers_removed: bids.len() - kept.len(),
        source,
    })
}

/// Which estimator produced a set of pseudo-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Agg,
    Ind,
    Bne,
}

impl From<Family> for Method {
    fn from(f: Family) -> Self {
        match f {
            Family::Aggregate => Method::Agg,
            Family::Individual => Method::Ind,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Agg => "agg",
            Method::Ind => "ind",
            Method::Bne => "bne",
        })
    }
}

/// Recovered values (buyer) or costs (procurement), aligned with the input
/// bids through `indices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoValueSet {
    pub values: Vec<f64>,
    /// Position in the input of each value; BNE trimming drops positions.
    pub indices: Vec<usize>,
    pub method: Method,
    pub belief_used: Option<BeliefEstimate>,
    pub bandwidth: Option<f64>,
    pub warnings: Vec<String>,
}

impl PseudoValueSet {
    pub fn distribution(&self) -> Result<EmpiricalDistribution> {
        EmpiricalDistribution::from_sample(&self.values)
    }
}

/// Inverts every bid through the minimax bidding function of the estimated
/// belief. Output keeps the input order. When the estimate removed outliers,
/// bids beyond the trimmed extreme on the removed tail are skipped; any other
/// bid outside the belief range is an error.
pub fn pseudo_values(
    bids: &[f64],
    estimate: &BeliefEstimate,
    family: Family,
) -> Result<PseudoValueSet> {
    if bids.is_empty() {
        return Err(Error::EmptySample);
    }
    check_bids(bids)?;
    let function = BiddingFunction::new(estimate.belief(family)?);
    let trimmed = |b: f64| {
        estimate.outliers_removed > 0
            && match estimate.orientation {
                Orientation::BuyerAuction => b < estimate.low,
                Orientation::Procurement => b > estimate.high,
            }
    };
    let indices: Vec<usize> = (0..bids.len()).filter(|&i| !trimmed(bids[i])).collect();
    let kept: Vec<f64> = indices.iter().map(|&i| bids[i]).collect();
    let values = function.inverse_all(&kept)?;
    let mut warnings = Vec::new();
    if kept.len() < bids.len() {
        warnings.push(format!(
            "{} bids removed as outliers were not inverted",
            bids.len() - kept.len()
        ));
    }
    Ok(PseudoValueSet {
        indices,
        values,
        method: family.into(),
        belief_used: Some(estimate.clone()),
        bandwidth: None,
        warnings,
    })
}

/// Triweight kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TriweightKde {
    points: Vec<f64>,
    bandwidth: f64,
}

impl TriweightKde {
    pub fn new(points: &[f64], bandwidth: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        check_bids(points)?;
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            points: sorted,
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `K(x) = 35/32 (1 - x^2)^3` on `[-1, 1]`.
    pub fn kernel(x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            35.0 / 32.0 * (1.0 - x * x).powi(3)
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let from = self.points.partition_point(|p| *p < x - h);
        let to = self.points.partition_point(|p| *p <= x + h);
        let sum: f64 = self.points[from..to]
            .iter()
            .map(|p| Self::kernel((x - p) / h))
            .sum();
        sum / (self.points.len() as f64 * h)
    }
}

/// Canonical-bandwidth factor that converts a Gaussian rule of thumb to the
/// triweight kernel.
pub const TRIWEIGHT_FACTOR: f64 = 2.978;

/// Rule-of-thumb bandwidth `2.978 * 1.06 * sd * N^(-1/5)`.
pub fn default_bandwidth(bids: &[f64]) -> Result<f64> {
    if bids.len() < 2 {
        return Err(Error::NotEnoughVariation(
            "bandwidth needs at least two bids".into(),
        ));
    }
    let n = bids.len() as f64;
    let mean = bids.iter().sum::<f64>() / n;
    let sd = (bids.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::NotEnoughVariation(
            "bids have zero spread; no kernel bandwidth".into(),
        ));
    }
    Ok(TRIWEIGHT_FACTOR * 1.06 * sd * n.powf(-0.2))
}

/// Samples smaller than this trigger a warning in GPV estimates.
pub const GPV_MIN_BIDS: usize = 30;

/// Bayes-Nash pseudo-values from the first-order condition:
/// `v = b + G(b) / ((n-1) g(b))` for buyers and
/// `c = b - (1 - G(b)) / ((n-1) g(b))` in procurement, with `G` the empirical
/// cdf and `g` a triweight kernel density. Bids within one bandwidth of
/// either sample end are trimmed.
pub fn gpv_pseudo_values(
    bids: &[f64],
    bidders: usize,
    orientation: Orientation,
    bandwidth: Option<f64>,
) -> Result<PseudoValueSet> {
    if bids.is_empty() {
        return Err(Error::EmptySample);
    }
    if bidders < 2 {
        return Err(Error::InvalidArity(bidders));
    }
    check_bids(bids)?;
    let mut warnings = Vec::new();
    if bids.len() < GPV_MIN_BIDS {
        warnings.push(format!(
            "only {} bids; kernel estimates are unreliable below {GPV_MIN_BIDS}",
            bids.len()
        ));
    }
    let h = match bandwidth {
        Some(h) => h,
        None => default_bandwidth(bids)?,
    };
    let kde = TriweightKde::new(bids, h)?;
    let cdf = EmpiricalDistribution::from_sample(bids)?;
    let (lo, hi) = (cdf.min() + h, cdf.max() - h);
    let kept: Vec<usize> = (0..bids.len())
        .filter(|&i| bids[i] >= lo && bids[i] <= hi)
        .collect();
    if kept.is_empty() {
        return Err(Error::NotEnoughVariation(format!(
            "every bid lies within one bandwidth ({h}) of the sample edges"
        )));
    }
    let scale = (bidders - 1) as f64;
    let values = kept
        .par_iter()
        .map(|&i| {
            let b = bids[i];
            let g = kde.density(b);
            if !(g > 0.0) {
                return Err(Error::DensityUnderflow { bid: b });
            }
            let big_g = cdf.cdf(b);
            Ok(match orientation {
                Orientation::BuyerAuction => b + big_g / (scale * g),
                Orientation::Procurement => b - (1.0 - big_g) / (scale * g),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PseudoValueSet {
        values,
        indices: kept,
        method: Method::Bne,
        belief_used: None,
        bandwidth: Some(h),
        warnings,
    })
}

/// Bayes-Nash equilibrium bid for independent private values (buyer) or
/// costs (procurement) drawn from `dist`:
/// `v - int_low^v F^(n-1) / F(v)^(n-1)` for buyers and
/// `c + int_c^high (1-F)^(n-1) / (1-F(c))^(n-1)` in procurement. Step
/// distributions are integrated exactly.
pub fn bne_bid(
    dist: &ValueDistribution,
    bidders: usize,
    value: f64,
    orientation: Orientation,
) -> Result<f64> {
    if bidders < 2 {
        return Err(Error::InvalidArity(bidders));
    }
    if !value.is_finite() {
        return Err(Error::NonFinite { index: 0, value });
    }
    let n = bidders as f64;
    match dist {
        ValueDistribution::Point { .. } => Ok(value),
        ValueDistribution::Uniform { low, high } => {
            let x = value.clamp(*low, *high);
            Ok(match orientation {
                Orientation::BuyerAuction => value - (x - low) / n,
                Orientation::Procurement => value + (high - x) / n,
            })
        }
        ValueDistribution::Discrete { distribution } => {
            bne_bid_empirical(distribution, bidders, value, orientation)
        }
    }
}

/// [`bne_bid`] for an empirical distribution.
pub fn bne_bid_empirical(
    dist: &EmpiricalDistribution,
    bidders: usize,
    value: f64,
    orientation: Orientation,
) -> Result<f64> {
    if bidders < 2 {
        return Err(Error::InvalidArity(bidders));
    }
    let k = bidders as i32 - 1;
    let support = dist.support();
    let cumulative = dist.cumulative();
    match orientation {
        Orientation::BuyerAuction => {
            let top = dist.cdf(value);
            if top <= 0.0 {
                return Ok(value);
            }
            // F is constant on [s_i, s_{i+1}).
            let mut area = 0.0;
            for i in 0..support.len() {
                if support[i] >= value {
                    break;
                }
                let end = support.get(i + 1).copied().unwrap_or(f64::INFINITY).min(value);
                area += cumulative[i].powi(k) * (end - support[i]);
            }
            Ok(value - area / top.powi(k))
        }
        Orientation::Procurement => {
            let survive = 1.0 - dist.cdf(value);
            if survive <= 0.0 {
                return Ok(value);
            }
            let mut area = 0.0;
            let start = support.partition_point(|s| *s <= value);
            let mut left = value;
            let mut level = survive;
            for i in start..support.len() {
                area += level.powi(k) * (support[i] - left);
                left = support[i];
                level = 1.0 - cumulative[i];
            }
            Ok(value + area / survive.powi(k))
        }
    }
}
