//! Worst-case losses of a bid under moment beliefs.
//!
//! A belief fixes the range `[low, high]` of opponent bids and one moment: the
//! expected winning bid (aggregate beliefs) or the expected individual bid
//! (individual beliefs). The worst case over such a set is attained by a
//! two-point bid distribution, which gives closed forms for the loss from
//! bidding too high and from bidding too low. [`oracle_worst_loss`] searches
//! the two-point family by brute force and serves as an independent check.
//!
//! Procurement losses are written directly rather than through the reflection
//! `x -> low + high - x`, so the reflection identity can be tested.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Orientation;
use crate::error::{Error, Result};

/// Which moment the belief constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Expected winning bid.
    #[serde(rename = "agg")]
    Aggregate,
    /// Expected individual bid.
    #[serde(rename = "ind")]
    Individual,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Aggregate => "agg",
            Family::Individual => "ind",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "agg" | "aggregate" => Ok(Family::Aggregate),
            "ind" | "individual" => Ok(Family::Individual),
            other => Err(Error::InvalidParameter(format!(
                "unknown family `{other}` (expected agg or ind)"
            ))),
        }
    }
}

/// Range plus expected winning bid among all `bidders` bids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateBelief {
    pub low: f64,
    pub moment: f64,
    pub high: f64,
    pub bidders: usize,
    pub orientation: Orientation,
}

/// Range plus expected bid of a single opponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndividualBelief {
    pub low: f64,
    pub mean: f64,
    pub high: f64,
    pub bidders: usize,
    pub orientation: Orientation,
}

fn validate(low: f64, moment: f64, high: f64, bidders: usize) -> Result<()> {
    if bidders < 2 {
        return Err(Error::InvalidBelief(format!(
            "need at least two bidders, got {bidders}"
        )));
    }
    if !(low.is_finite() && moment.is_finite() && high.is_finite()) {
        return Err(Error::InvalidBelief(format!(
            "non-finite belief ({low}, {moment}, {high})"
        )));
    }
    if !(low <= moment && moment <= high) {
        return Err(Error::InvalidBelief(format!(
            "belief must satisfy low <= moment <= high, got ({low}, {moment}, {high})"
        )));
    }
    Ok(())
}

impl AggregateBelief {
    pub fn new(
        low: f64,
        moment: f64,
        high: f64,
        bidders: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        validate(low, moment, high, bidders)?;
        Ok(Self {
            low,
            moment,
            high,
            bidders,
            orientation,
        })
    }

    pub fn buyer(low: f64, moment: f64, high: f64, bidders: usize) -> Result<Self> {
        Self::new(low, moment, high, bidders, Orientation::BuyerAuction)
    }

    pub fn procurement(low: f64, moment: f64, high: f64, bidders: usize) -> Result<Self> {
        Self::new(low, moment, high, bidders, Orientation::Procurement)
    }

    pub fn is_degenerate(&self) -> bool {
        self.high <= self.low
    }

    /// `(n-1)/n`: maps the winning-bid probability of a point to the
    /// probability that all `n-1` opponents stay there.
    pub fn exponent(&self) -> f64 {
        (self.bidders - 1) as f64 / self.bidders as f64
    }

    /// Mirror image under `x -> low + high - x`, with the orientation flipped.
    pub fn reflect(&self) -> Self {
        Self {
            low: self.low,
            moment: self.low + self.high - self.moment,
            high: self.high,
            bidders: self.bidders,
            orientation: self.orientation.flipped(),
        }
    }

    /// Probability that the winning bid sits at the lower point `x1` of a
    /// two-point winning-bid distribution with mean `moment`.
    pub fn q_prob(&self, x1: f64, x2: f64) -> Result<f64> {
        Ok(TwoPointDistribution::with_mean(x1, x2, self.moment)?.prob_x1)
    }

    /// Probability that a bidder facing the two-point worst case wins by
    /// bidding just beyond the near point: `q^((n-1)/n)` for buyers, where
    /// the near point is `x1`, and `(1-q)^((n-1)/n)` in procurement, where it
    /// is `x2`.
    pub fn p_win(&self, x1: f64, x2: f64) -> Result<f64> {
        let q = self.q_prob(x1, x2)?;
        let a = self.exponent();
        Ok(match self.orientation {
            Orientation::BuyerAuction => q.powf(a),
            Orientation::Procurement => (1.0 - q).powf(a),
        })
    }
}

impl IndividualBelief {
    pub fn new(
        low: f64,
        mean: f64,
        high: f64,
        bidders: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        validate(low, mean, high, bidders)?;
        Ok(Self {
            low,
            mean,
            high,
            bidders,
            orientation,
        })
    }

    pub fn buyer(low: f64, mean: f64, high: f64, bidders: usize) -> Result<Self> {
        Self::new(low, mean, high, bidders, Orientation::BuyerAuction)
    }

    pub fn procurement(low: f64, mean: f64, high: f64, bidders: usize) -> Result<Self> {
        Self::new(low, mean, high, bidders, Orientation::Procurement)
    }

    pub fn is_degenerate(&self) -> bool {
        self.high <= self.low
    }

    pub fn opponents(&self) -> i32 {
        (self.bidders - 1) as i32
    }

    pub fn reflect(&self) -> Self {
        Self {
            low: self.low,
            mean: self.low + self.high - self.mean,
            high: self.high,
            bidders: self.bidders,
            orientation: self.orientation.flipped(),
        }
    }

    /// Probability that one opponent bids the lower point `x1`.
    pub fn pi_prob(&self, x1: f64, x2: f64) -> Result<f64> {
        Ok(TwoPointDistribution::with_mean(x1, x2, self.mean)?.prob_x1)
    }

    /// `pi^(n-1)` for buyers and `(1-pi)^(n-1)` in procurement.
    pub fn p_win(&self, x1: f64, x2: f64) -> Result<f64> {
        let pi = self.pi_prob(x1, x2)?;
        Ok(match self.orientation {
            Orientation::BuyerAuction => pi.powi(self.opponents()),
            Orientation::Procurement => (1.0 - pi).powi(self.opponents()),
        })
    }
}

/// Either belief family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Belief {
    #[serde(rename = "agg")]
    Aggregate(AggregateBelief),
    #[serde(rename = "ind")]
    Individual(IndividualBelief),
}

impl Belief {
    pub fn new(
        family: Family,
        low: f64,
        moment: f64,
        high: f64,
        bidders: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        Ok(match family {
            Family::Aggregate => {
                Belief::Aggregate(AggregateBelief::new(low, moment, high, bidders, orientation)?)
            }
            Family::Individual => {
                Belief::Individual(IndividualBelief::new(low, moment, high, bidders, orientation)?)
            }
        })
    }

    pub fn family(&self) -> Family {
        match self {
            Belief::Aggregate(_) => Family::Aggregate,
            Belief::Individual(_) => Family::Individual,
        }
    }

    pub fn low(&self) -> f64 {
        match self {
            Belief::Aggregate(b) => b.low,
            Belief::Individual(b) => b.low,
        }
    }

    /// Expected winning bid or expected individual bid, depending on family.
    pub fn moment(&self) -> f64 {
        match self {
            Belief::Aggregate(b) => b.moment,
            Belief::Individual(b) => b.mean,
        }
    }

    pub fn high(&self) -> f64 {
        match self {
            Belief::Aggregate(b) => b.high,
            Belief::Individual(b) => b.high,
        }
    }

    pub fn bidders(&self) -> usize {
        match self {
            Belief::Aggregate(b) => b.bidders,
            Belief::Individual(b) => b.bidders,
        }
    }

    pub fn orientation(&self) -> Orientation {
        match self {
            Belief::Aggregate(b) => b.orientation,
            Belief::Individual(b) => b.orientation,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.high() <= self.low()
    }

    pub fn reflect(&self) -> Self {
        match self {
            Belief::Aggregate(b) => Belief::Aggregate(b.reflect()),
            Belief::Individual(b) => Belief::Individual(b.reflect()),
        }
    }

    /// Same family and orientation with new range and moment.
    pub fn with_params(&self, low: f64, moment: f64, high: f64) -> Result<Self> {
        Belief::new(
            self.family(),
            low,
            moment,
            high,
            self.bidders(),
            self.orientation(),
        )
    }

    pub fn worst_loss_high(&self, value: f64, bid: f64) -> Result<f64> {
        match self {
            Belief::Aggregate(b) => worst_loss_high_agg(b, value, bid),
            Belief::Individual(b) => worst_loss_high_ind(b, value, bid),
        }
    }

    pub fn worst_loss_low(&self, value: f64, bid: f64) -> Result<f64> {
        match self {
            Belief::Aggregate(b) => worst_loss_low_agg(b, value, bid),
            Belief::Individual(b) => worst_loss_low_ind(b, value, bid),
        }
    }

    /// Larger of the two conditional worst-case losses.
    pub fn worst_loss(&self, value: f64, bid: f64) -> Result<f64> {
        Ok(self
            .worst_loss_high(value, bid)?
            .max(self.worst_loss_low(value, bid)?))
    }
}

impl From<AggregateBelief> for Belief {
    fn from(b: AggregateBelief) -> Self {
        Belief::Aggregate(b)
    }
}

impl From<IndividualBelief> for Belief {
    fn from(b: IndividualBelief) -> Self {
        Belief::Individual(b)
    }
}

/// Distribution with mass `prob_x1` at `x1` and the rest at `x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointDistribution {
    pub x1: f64,
    pub x2: f64,
    pub prob_x1: f64,
}

impl TwoPointDistribution {
    /// The unique two-point distribution on `{x1, x2}` with the given mean.
    pub fn with_mean(x1: f64, x2: f64, mean: f64) -> Result<Self> {
        if !(x1 <= mean && mean <= x2) {
            return Err(Error::InvalidParameter(format!(
                "two-point support ({x1}, {x2}) must bracket the mean {mean}"
            )));
        }
        if x1 == x2 {
            return Err(Error::DegenerateSupport(x1));
        }
        Ok(Self {
            x1,
            x2,
            prob_x1: ((x2 - mean) / (x2 - x1)).clamp(0.0, 1.0),
        })
    }

    pub fn mean(&self) -> f64 {
        self.prob_x1 * self.x1 + (1.0 - self.prob_x1) * self.x2
    }
}

/// Free-function form of [`AggregateBelief::q_prob`].
pub fn q_prob(belief: &AggregateBelief, x1: f64, x2: f64) -> Result<f64> {
    belief.q_prob(x1, x2)
}

/// Free-function form of [`AggregateBelief::p_win`].
pub fn p_win(belief: &AggregateBelief, x1: f64, x2: f64) -> Result<f64> {
    belief.p_win(x1, x2)
}

/// Nonnegative ratio with `0/0 = 0`; only used where the numerator vanishes
/// whenever the denominator does.
pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).max(0.0)
    } else {
        0.0
    }
}

fn slack(low: f64, high: f64) -> f64 {
    1e-12 * low.abs().max(high.abs()).max(1.0)
}

fn check_bid(low: f64, high: f64, bid: f64) -> Result<f64> {
    let eps = slack(low, high);
    if !bid.is_finite() || bid < low - eps || bid > high + eps {
        return Err(Error::BidOutsideSupport {
            low,
            high,
            offenders: vec![(0, bid)],
        });
    }
    Ok(bid.clamp(low, high))
}

fn check_surplus(orientation: Orientation, value: f64, bid: f64, eps: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite { index: 0, value });
    }
    let dominated = match orientation {
        Orientation::BuyerAuction => bid > value + eps,
        Orientation::Procurement => bid < value - eps,
    };
    if dominated {
        return Err(Error::DominatedBid { value, bid });
    }
    Ok(())
}

// Buyer and procurement kernels. All assume a validated, non-degenerate
// belief and a bid inside the range; surplus may be negative only through
// float dust.

pub(crate) fn agg_buyer_high(low: f64, moment: f64, high: f64, a: f64, bid: f64) -> f64 {
    ratio(high - moment, high - low).powf(a) * (bid - low)
}

pub(crate) fn agg_buyer_low(low: f64, moment: f64, high: f64, a: f64, value: f64, bid: f64) -> f64 {
    if bid < moment {
        (ratio(high - moment, high - bid).powf(a) * (value - bid)).max(value - moment)
    } else {
        (value - bid) * (1.0 - ratio(bid - moment, bid - low).powf(a))
    }
}

pub(crate) fn agg_proc_low(low: f64, moment: f64, high: f64, a: f64, bid: f64) -> f64 {
    ratio(moment - low, high - low).powf(a) * (high - bid)
}

pub(crate) fn agg_proc_high(low: f64, moment: f64, high: f64, a: f64, cost: f64, bid: f64) -> f64 {
    if bid > moment {
        (ratio(moment - low, bid - low).powf(a) * (bid - cost)).max(moment - cost)
    } else {
        (bid - cost) * (1.0 - ratio(moment - bid, high - bid).powf(a))
    }
}

/// Unconstrained maximizer of `(s - x) / (t - x)^(n-1)` type objectives:
/// `((n-1) s - t) / (n-2)`.
fn interior_point(bidders: usize, s: f64, t: f64) -> f64 {
    let n = bidders as f64;
    ((n - 1.0) * s - t) / (n - 2.0)
}

/// Probability that one opponent sits at `x1` when the other point is the
/// top of the range; a point mass when `x1` reaches the mean.
fn ind_prob_low_point(mean: f64, high: f64, x1: f64) -> f64 {
    if x1 >= mean {
        1.0
    } else {
        ratio(high - mean, high - x1)
    }
}

/// Probability that one opponent sits at `x2` when the other point is the
/// bottom of the range.
fn ind_prob_high_point(low: f64, mean: f64, x2: f64) -> f64 {
    if x2 <= mean {
        1.0
    } else {
        ratio(mean - low, x2 - low)
    }
}

pub(crate) fn ind_buyer_high(low: f64, mean: f64, high: f64, bidders: usize, bid: f64) -> f64 {
    if high <= mean {
        return 0.0;
    }
    let raw = if bidders == 2 {
        low
    } else {
        interior_point(bidders, bid, high)
    };
    let x1 = raw.min(mean).max(low);
    ind_prob_low_point(mean, high, x1).powi(bidders as i32 - 1) * (bid - x1)
}

pub(crate) fn ind_buyer_low(
    low: f64,
    mean: f64,
    high: f64,
    bidders: usize,
    value: f64,
    bid: f64,
) -> f64 {
    let k = bidders as i32 - 1;
    if bid < mean {
        let x1 = if bidders == 2 {
            if value <= high {
                bid
            } else {
                mean
            }
        } else {
            interior_point(bidders, value, high).clamp(bid, mean)
        };
        ind_prob_low_point(mean, high, x1).powi(k) * (value - x1)
    } else {
        (value - bid) * (1.0 - ratio(bid - mean, bid - low).powi(k))
    }
}

pub(crate) fn ind_proc_low(low: f64, mean: f64, high: f64, bidders: usize, bid: f64) -> f64 {
    if mean <= low {
        return 0.0;
    }
    let raw = if bidders == 2 {
        high
    } else {
        interior_point(bidders, bid, low)
    };
    let x2 = raw.max(mean).min(high);
    ind_prob_high_point(low, mean, x2).powi(bidders as i32 - 1) * (x2 - bid)
}

pub(crate) fn ind_proc_high(
    low: f64,
    mean: f64,
    high: f64,
    bidders: usize,
    cost: f64,
    bid: f64,
) -> f64 {
    let k = bidders as i32 - 1;
    if bid > mean {
        let x2 = if bidders == 2 {
            if cost >= low {
                bid
            } else {
                mean
            }
        } else {
            interior_point(bidders, cost, low).clamp(mean, bid)
        };
        ind_prob_high_point(low, mean, x2).powi(k) * (x2 - cost)
    } else {
        (bid - cost) * (1.0 - ratio(mean - bid, high - bid).powi(k))
    }
}

/// Worst-case loss given that the bid turns out to be too high: for a buyer
/// the loss from overpaying, for a seller the loss from being undercut. The
/// buyer loss does not depend on `value`.
pub fn worst_loss_high_agg(belief: &AggregateBelief, value: f64, bid: f64) -> Result<f64> {
    validate(belief.low, belief.moment, belief.high, belief.bidders)?;
    let bid = check_bid(belief.low, belief.high, bid)?;
    if belief.is_degenerate() {
        return Ok(0.0);
    }
    let a = belief.exponent();
    let AggregateBelief {
        low, moment, high, ..
    } = *belief;
    Ok(match belief.orientation {
        Orientation::BuyerAuction => agg_buyer_high(low, moment, high, a, bid),
        Orientation::Procurement => {
            check_surplus(belief.orientation, value, bid, slack(low, high))?;
            agg_proc_high(low, moment, high, a, value, bid)
        }
    })
}

/// Worst-case loss given that the bid turns out to be too low: for a buyer
/// the loss from being outbid, for a seller the loss from leaving money on the
/// table. The procurement loss does not depend on `value`.
pub fn worst_loss_low_agg(belief: &AggregateBelief, value: f64, bid: f64) -> Result<f64> {
    validate(belief.low, belief.moment, belief.high, belief.bidders)?;
    let bid = check_bid(belief.low, belief.high, bid)?;
    if belief.is_degenerate() {
        return Ok(0.0);
    }
    let a = belief.exponent();
    let AggregateBelief {
        low, moment, high, ..
    } = *belief;
    Ok(match belief.orientation {
        Orientation::BuyerAuction => {
            check_surplus(belief.orientation, value, bid, slack(low, high))?;
            agg_buyer_low(low, moment, high, a, value, bid)
        }
        Orientation::Procurement => agg_proc_low(low, moment, high, a, bid),
    })
}

/// Individual-belief analog of [`worst_loss_high_agg`].
pub fn worst_loss_high_ind(belief: &IndividualBelief, value: f64, bid: f64) -> Result<f64> {
    validate(belief.low, belief.mean, belief.high, belief.bidders)?;
    let bid = check_bid(belief.low, belief.high, bid)?;
    if belief.is_degenerate() {
        return Ok(0.0);
    }
    let IndividualBelief {
        low,
        mean,
        high,
        bidders,
        ..
    } = *belief;
    Ok(match belief.orientation {
        Orientation::BuyerAuction => ind_buyer_high(low, mean, high, bidders, bid),
        Orientation::Procurement => {
            check_surplus(belief.orientation, value, bid, slack(low, high))?;
            ind_proc_high(low, mean, high, bidders, value, bid)
        }
    })
}

/// Individual-belief analog of [`worst_loss_low_agg`].
pub fn worst_loss_low_ind(belief: &IndividualBelief, value: f64, bid: f64) -> Result<f64> {
    validate(belief.low, belief.mean, belief.high, belief.bidders)?;
    let bid = check_bid(belief.low, belief.high, bid)?;
    if belief.is_degenerate() {
        return Ok(0.0);
    }
    let IndividualBelief {
        low,
        mean,
        high,
        bidders,
        ..
    } = *belief;
    Ok(match belief.orientation {
        Orientation::BuyerAuction => {
            check_surplus(belief.orientation, value, bid, slack(low, high))?;
            ind_buyer_low(low, mean, high, bidders, value, bid)
        }
        Orientation::Procurement => ind_proc_low(low, mean, high, bidders, bid),
    })
}

/// Brute-force worst-case loss over two-point opponent bid distributions.
///
/// Scans `grid_size` points for each of `x1` in `[low, moment]` and `x2` in
/// `[moment, high]`, plus the range ends, the moment, the bid and the value.
/// The moment pins the weights. Ties are resolved against the evaluated bid,
/// and the best response is the supremum over bidding just beyond `x1`, just
/// beyond `x2`, or abstaining.
pub fn oracle_worst_loss(belief: &Belief, value: f64, bid: f64, grid_size: usize) -> Result<f64> {
    if grid_size < 100 {
        return Err(Error::InvalidParameter(format!(
            "oracle grid needs at least 100 points, got {grid_size}"
        )));
    }
    validate(belief.low(), belief.moment(), belief.high(), belief.bidders())?;
    let (low, moment, high) = (belief.low(), belief.moment(), belief.high());
    let bid = check_bid(low, high, bid)?;
    check_surplus(belief.orientation(), value, bid, slack(low, high))?;
    if belief.is_degenerate() {
        return Ok(0.0);
    }

    let grid = |from: f64, to: f64| -> Vec<f64> {
        let mut pts: Vec<f64> = (0..grid_size)
            .map(|i| from + (to - from) * i as f64 / (grid_size - 1) as f64)
            .collect();
        pts.extend(
            [low, moment, high, bid, value]
                .into_iter()
                .filter(|x| *x >= from && *x <= to),
        );
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    };
    let lows = grid(low, moment);
    let highs = grid(moment, high);

    let bidders = belief.bidders();
    let family = belief.family();
    let orientation = belief.orientation();
    let opponents = (bidders - 1) as f64;
    let n = bidders as f64;

    let worst = lows
        .par_iter()
        .map(|&x1| {
            let mut worst = 0.0f64;
            for &x2 in &highs {
                // Probability that the relevant opponent extreme sits at the
                // point nearest to the bidder's side of the market.
                let share_x1 = if x2 > x1 { (x2 - moment) / (x2 - x1) } else { 1.0 };
                let near = match (family, orientation) {
                    (Family::Aggregate, Orientation::BuyerAuction) => {
                        share_x1.powf(opponents / n)
                    }
                    (Family::Aggregate, Orientation::Procurement) => {
                        if x2 > x1 {
                            (1.0 - share_x1).powf(opponents / n)
                        } else {
                            1.0
                        }
                    }
                    (Family::Individual, Orientation::BuyerAuction) => share_x1.powf(opponents),
                    (Family::Individual, Orientation::Procurement) => {
                        if x2 > x1 {
                            (1.0 - share_x1).powf(opponents)
                        } else {
                            1.0
                        }
                    }
                };
                let loss = match orientation {
                    Orientation::BuyerAuction => {
                        // `near` = P(highest opponent bid is x1).
                        let win = if bid > x2 {
                            1.0
                        } else if bid > x1 {
                            near
                        } else {
                            0.0
                        };
                        let best = ((value - x1) * near).max(value - x2).max(0.0);
                        best - (value - bid) * win
                    }
                    Orientation::Procurement => {
                        // `near` = P(lowest opponent bid is x2).
                        let win = if bid < x1 {
                            1.0
                        } else if bid < x2 {
                            near
                        } else {
                            0.0
                        };
                        let best = ((x2 - value) * near).max(x1 - value).max(0.0);
                        best - (bid - value) * win
                    }
                };
                worst = worst.max(loss);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn agg_example() -> AggregateBelief {
        AggregateBelief::buyer(0.0, 0.37, 0.5, 2).unwrap()
    }

    #[test]
    fn q_and_p_on_the_full_range() {
        let b = agg_example();
        close(b.q_prob(0.0, 0.5).unwrap(), 0.26, 1e-12);
        close(b.p_win(0.0, 0.5).unwrap(), 0.26f64.sqrt(), 1e-12);
        close(0.26f64.sqrt(), 0.5099, 1e-4);
    }

    #[test]
    fn q_at_the_moment() {
        let b = agg_example();
        assert_eq!(b.q_prob(0.0, 0.37).unwrap(), 0.0);
        assert_eq!(b.p_win(0.0, 0.37).unwrap(), 0.0);
        assert_eq!(b.q_prob(0.37, 0.5).unwrap(), 1.0);
        assert_eq!(b.p_win(0.37, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let b = AggregateBelief::buyer(0.0, 0.3, 0.5, 2).unwrap();
        assert_eq!(b.q_prob(0.3, 0.3), Err(Error::DegenerateSupport(0.3)));
    }

    #[test]
    fn procurement_win_probability_uses_the_upper_point() {
        let b = AggregateBelief::procurement(0.0, 0.37, 0.5, 2).unwrap();
        close(b.p_win(0.0, 0.5).unwrap(), 0.74f64.sqrt(), 1e-12);
    }

    #[test]
    fn high_loss_examples() {
        let b = agg_example();
        assert_eq!(worst_loss_high_agg(&b, 1.0, 0.0).unwrap(), 0.0);
        close(worst_loss_high_agg(&b, 1.0, 0.5).unwrap(), 0.26f64.sqrt() * 0.5, 1e-12);
        close(worst_loss_high_agg(&b, 1.0, 0.5).unwrap(), 0.2550, 1e-4);
    }

    #[test]
    fn low_loss_examples() {
        let b = agg_example();
        assert_eq!(worst_loss_low_agg(&b, 0.37, 0.37).unwrap(), 0.0);
        close(worst_loss_low_agg(&b, 1.0, 0.37).unwrap(), 0.63, 1e-12);
        close(worst_loss_low_agg(&b, 0.3, 0.0).unwrap(), 0.1530, 1e-4);
    }

    #[test]
    fn bid_above_value_is_dominated() {
        let b = agg_example();
        assert!(matches!(
            worst_loss_low_agg(&b, 0.2, 0.3),
            Err(Error::DominatedBid { .. })
        ));
    }

    #[test]
    fn individual_examples() {
        let b = IndividualBelief::buyer(0.0, 0.3, 0.55, 2).unwrap();
        assert_eq!(worst_loss_high_ind(&b, 1.0, 0.0).unwrap(), 0.0);
        close(worst_loss_low_ind(&b, 0.2, 0.1).unwrap(), 0.25 / 0.45 * 0.1, 1e-12);
        close(worst_loss_low_ind(&b, 0.2, 0.1).unwrap(), 0.0556, 1e-4);

        let b3 = IndividualBelief::buyer(0.0, 0.5, 1.0, 3).unwrap();
        close(worst_loss_high_ind(&b3, 1.0, 0.8).unwrap(), 0.3, 1e-12);
    }

    #[test]
    fn degenerate_belief_has_zero_loss() {
        let b = Belief::new(Family::Aggregate, 0.4, 0.4, 0.4, 3, Orientation::BuyerAuction).unwrap();
        assert_eq!(b.worst_loss(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(oracle_worst_loss(&b, 0.4, 0.4, 200).unwrap(), 0.0);
    }

    #[test]
    fn oracle_zero_at_the_bottom() {
        let b: Belief = agg_example().into();
        assert_eq!(oracle_worst_loss(&b, 0.0, 0.0, 200).unwrap(), 0.0);
    }

    #[test]
    fn oracle_matches_closed_forms_on_the_examples() {
        let cases: Vec<(Belief, f64, f64)> = vec![
            (agg_example().into(), 0.3, 0.0),
            (agg_example().into(), 1.0, 0.37),
            (agg_example().into(), 0.6, 0.45),
            (IndividualBelief::buyer(0.0, 0.3, 0.55, 2).unwrap().into(), 0.2, 0.1),
            (IndividualBelief::buyer(0.0, 0.5, 1.0, 3).unwrap().into(), 1.0, 0.8),
            (IndividualBelief::buyer(0.0, 0.5, 1.0, 4).unwrap().into(), 0.9, 0.2),
            (AggregateBelief::procurement(0.9, 1.07, 1.29, 2).unwrap().into(), 1.0, 1.1),
            (IndividualBelief::procurement(0.9, 1.07, 1.29, 3).unwrap().into(), 1.0, 1.1),
            (IndividualBelief::procurement(0.9, 1.07, 1.29, 5).unwrap().into(), 0.95, 1.0),
        ];
        for (belief, v, bid) in cases {
            let closed = belief.worst_loss(v, bid).unwrap();
            let oracle = oracle_worst_loss(&belief, v, bid, 1000).unwrap();
            close(closed, oracle, 2e-3 * (belief.high() - belief.low()));
        }
    }

    #[test]
    fn small_oracle_grid_rejected() {
        let b: Belief = agg_example().into();
        assert!(oracle_worst_loss(&b, 0.3, 0.1, 10).is_err());
    }

    #[test]
    fn reflection_maps_procurement_to_buyer_losses() {
        let proc_agg = AggregateBelief::procurement(0.9, 1.02, 1.29, 3).unwrap();
        let proc_ind = IndividualBelief::procurement(0.9, 1.02, 1.29, 3).unwrap();
        let pivot = 0.9 + 1.29;
        for (cost, bid) in [(0.8, 0.95), (1.0, 1.1), (1.2, 1.25), (0.95, 1.0)] {
            for belief in [Belief::from(proc_agg), Belief::from(proc_ind)] {
                let mirror = belief.reflect();
                close(
                    belief.worst_loss_high(cost, bid).unwrap(),
                    mirror.worst_loss_low(pivot - cost, pivot - bid).unwrap(),
                    1e-12,
                );
                close(
                    belief.worst_loss_low(cost, bid).unwrap(),
                    mirror.worst_loss_high(pivot - cost, pivot - bid).unwrap(),
                    1e-12,
                );
            }
        }
    }

    #[test]
    fn family_parses() {
        assert_eq!("agg".parse::<Family>().unwrap(), Family::Aggregate);
        assert_eq!("IND".parse::<Family>().unwrap(), Family::Individual);
        assert!("bne".parse::<Family>().is_err());
    }
}
