//! Minimax-loss bidding functions and their inverses.
//!
//! The minimax bid equalizes the worst-case loss from bidding too high with
//! the worst-case loss from bidding too low. The first is increasing in the
//! bid and the second decreasing, so bisection on their difference finds the
//! bid. Procurement bids are obtained from the buyer problem under the
//! reflection `x -> low + high - x`; procurement inverses (bid to cost) are
//! solved natively.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Orientation;
use crate::error::{Error, Result};
use crate::loss::{
    agg_buyer_high, agg_buyer_low, agg_proc_high, agg_proc_low, ind_buyer_high, ind_buyer_low,
    ind_proc_high, ind_proc_low, ratio, AggregateBelief, Belief, Family, IndividualBelief,
};
use crate::roots::bisect;

fn dust(low: f64, high: f64) -> f64 {
    1e-12 * low.abs().max(high.abs()).max(1.0)
}

fn check_value(belief: &Belief, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite { index: 0, value });
    }
    let eps = dust(belief.low(), belief.high());
    match belief.orientation() {
        Orientation::BuyerAuction if value < belief.low() - eps => Err(Error::ValueBelowSupport {
            value,
            low: belief.low(),
        }),
        Orientation::Procurement if value > belief.high() + eps => Err(Error::CostAboveSupport {
            cost: value,
            high: belief.high(),
        }),
        _ => Ok(()),
    }
}

fn check_bid(belief: &Belief, bid: f64) -> Result<f64> {
    let (low, high) = (belief.low(), belief.high());
    let eps = dust(low, high);
    if !bid.is_finite() || bid < low - eps || bid > high + eps {
        return Err(Error::BidOutsideSupport {
            low,
            high,
            offenders: vec![(0, bid)],
        });
    }
    Ok(bid.clamp(low, high))
}

/// Equalizes a decreasing `too_low` and an increasing `too_high` loss on
/// `[low, cap]`; returns `cap` if the low-side loss still dominates there.
fn equalize<L, H>(low: f64, cap: f64, too_low: L, too_high: H) -> Result<f64>
where
    L: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    if cap <= low {
        return Ok(low);
    }
    let gap = |b: f64| too_low(b) - too_high(b);
    if gap(cap) >= 0.0 {
        return Ok(cap);
    }
    bisect(gap, low, cap, 0.0)
}

fn agg_buyer_bid(low: f64, moment: f64, high: f64, bidders: usize, value: f64) -> Result<f64> {
    if high <= low {
        return Ok(low);
    }
    let a = (bidders - 1) as f64 / bidders as f64;
    equalize(
        low,
        value.min(high),
        |b| agg_buyer_low(low, moment, high, a, value, b),
        |b| agg_buyer_high(low, moment, high, a, b),
    )
}

fn ind_buyer_bid_root(low: f64, mean: f64, high: f64, bidders: usize, value: f64) -> Result<f64> {
    if high <= low {
        return Ok(low);
    }
    equalize(
        low,
        value.min(high),
        |b| ind_buyer_low(low, mean, high, bidders, value, b),
        |b| ind_buyer_high(low, mean, high, bidders, b),
    )
}

/// Closed form for two bidders with the mean strictly inside the range.
fn ind_buyer_bid_pair(low: f64, mean: f64, high: f64, value: f64) -> f64 {
    let first_kink = (high * (mean - low) + mean * (high - mean)) / (high - low);
    let cap_type = (high * (high - low) - low * (high - mean)) / (mean - low);
    if value < first_kink {
        high - ((high - low) * (high - value)).sqrt()
    } else if value < cap_type {
        let disc = (mean - low)
            * (high - low)
            * ((4.0 * value - 3.0 * low) * (high - mean) + high * (mean - low)
                - low * (high - low));
        let b = low + (-(mean - low) * (high - low) + disc.max(0.0).sqrt()) / (2.0 * (high - mean));
        b.clamp(low, value.min(high))
    } else {
        high
    }
}

fn ind_buyer_bid(low: f64, mean: f64, high: f64, bidders: usize, value: f64) -> Result<f64> {
    if high <= low {
        return Ok(low);
    }
    if bidders == 2 && low < mean && mean < high {
        return Ok(ind_buyer_bid_pair(low, mean, high, value));
    }
    ind_buyer_bid_root(low, mean, high, bidders, value)
}

/// Minimax bid under an aggregate belief; for procurement, `value` is the
/// cost. Bids are capped at the believed range.
pub fn bid_agg(belief: &AggregateBelief, value: f64) -> Result<f64> {
    let wrapped = Belief::Aggregate(*belief);
    check_value(&wrapped, value)?;
    let AggregateBelief {
        low,
        moment,
        high,
        bidders,
        ..
    } = *belief;
    match belief.orientation {
        Orientation::BuyerAuction => agg_buyer_bid(low, moment, high, bidders, value.max(low)),
        Orientation::Procurement => {
            let pivot = low + high;
            let mirrored = agg_buyer_bid(low, pivot - moment, high, bidders, (pivot - value).max(low))?;
            Ok((pivot - mirrored).clamp(low, high))
        }
    }
}

/// Minimax bid under an individual belief. Two bidders use the closed form;
/// more bidders use root-finding.
pub fn bid_ind(belief: &IndividualBelief, value: f64) -> Result<f64> {
    bid_ind_with(belief, value, ind_buyer_bid)
}

/// [`bid_ind`] by root-finding for every bidder count; cross-checks the
/// two-bidder closed form.
pub fn bid_ind_root(belief: &IndividualBelief, value: f64) -> Result<f64> {
    bid_ind_with(belief, value, ind_buyer_bid_root)
}

fn bid_ind_with(
    belief: &IndividualBelief,
    value: f64,
    solve: fn(f64, f64, f64, usize, f64) -> Result<f64>,
) -> Result<f64> {
    let wrapped = Belief::Individual(*belief);
    check_value(&wrapped, value)?;
    let IndividualBelief {
        low,
        mean,
        high,
        bidders,
        ..
    } = *belief;
    match belief.orientation {
        Orientation::BuyerAuction => solve(low, mean, high, bidders, value.max(low)),
        Orientation::Procurement => {
            let pivot = low + high;
            let mirrored = solve(low, pivot - mean, high, bidders, (pivot - value).max(low))?;
            Ok((pivot - mirrored).clamp(low, high))
        }
    }
}

/// Type that bids exactly the moment under a buyer aggregate belief; types
/// below bid below it. In procurement, the mirrored cost.
pub fn agg_cutoff(belief: &AggregateBelief) -> f64 {
    let b = match belief.orientation {
        Orientation::BuyerAuction => *belief,
        Orientation::Procurement => belief.reflect(),
    };
    let p = ratio(b.high - b.moment, b.high - b.low).powf(b.exponent());
    let cutoff = b.moment + (b.moment - b.low) * p;
    match belief.orientation {
        Orientation::BuyerAuction => cutoff,
        Orientation::Procurement => belief.low + belief.high - cutoff,
    }
}

fn pooled_at_low(low: f64, bid: f64) -> Error {
    Error::InvalidBelief(format!(
        "moment at the lower bound {low}: every type bids the bound, bid {bid} is not invertible"
    ))
}

fn agg_buyer_inverse(belief: &AggregateBelief, bid: f64) -> Result<f64> {
    let AggregateBelief {
        low, moment, high, ..
    } = *belief;
    if belief.is_degenerate() || bid <= low {
        return Ok(low);
    }
    let a = belief.exponent();
    let loss = agg_buyer_high(low, moment, high, a, bid);
    if bid < moment {
        let flat = moment + loss;
        if high <= moment {
            return Ok(flat);
        }
        Ok((bid + loss * ((high - bid) / (high - moment)).powf(a)).min(flat))
    } else {
        let keep = 1.0 - ratio(bid - moment, bid - low).powf(a);
        if keep <= 0.0 {
            return Err(pooled_at_low(low, bid));
        }
        Ok(bid + loss / keep)
    }
}

fn ind_buyer_inverse(belief: &IndividualBelief, bid: f64) -> Result<f64> {
    let IndividualBelief {
        low,
        mean,
        high,
        bidders,
        ..
    } = *belief;
    if belief.is_degenerate() || bid <= low {
        return Ok(low);
    }
    let k = belief.opponents();
    let loss = ind_buyer_high(low, mean, high, bidders, bid);
    if bid < mean {
        if high <= mean {
            return Ok(mean + loss);
        }
        // Fast path assumes the worst case puts its low point at the bid.
        let guess = bid + loss * ((high - bid) / (high - mean)).powi(k);
        let at_guess = ind_buyer_low(low, mean, high, bidders, guess, bid);
        if (at_guess - loss).abs() <= 1e-14 * guess.abs().max(1.0) {
            return Ok(guess);
        }
        bisect(
            |v| ind_buyer_low(low, mean, high, bidders, v, bid) - loss,
            bid,
            guess,
            0.0,
        )
    } else {
        let keep = 1.0 - ratio(bid - mean, bid - low).powi(k);
        if keep <= 0.0 {
            return Err(pooled_at_low(low, bid));
        }
        Ok(bid + loss / keep)
    }
}

/// Cost of the procurement type whose aggregate minimax bid is `bid`, found
/// by bisection in the cost.
pub fn cost_inverse_procurement_agg(belief: &AggregateBelief, bid: f64) -> Result<f64> {
    let wrapped = Belief::Aggregate(*belief);
    let bid = check_bid(&wrapped, bid)?;
    let AggregateBelief {
        low, moment, high, ..
    } = *belief;
    if belief.is_degenerate() {
        return Ok(bid);
    }
    let a = belief.exponent();
    let target = agg_proc_low(low, moment, high, a, bid);
    if target <= 0.0 {
        return Ok(bid);
    }
    let gap = |c: f64| agg_proc_high(low, moment, high, a, c, bid) - target;
    let mut width = (high - low).max(target);
    let mut floor = bid - width;
    let mut expansions = 0;
    while gap(floor) < 0.0 {
        expansions += 1;
        if expansions > 200 {
            return Err(Error::solver(
                "procurement aggregate inverse",
                format!("no cost equalizes the losses at bid {bid}"),
            ));
        }
        width *= 2.0;
        floor = bid - width;
    }
    bisect(gap, floor, bid, 0.0)
}

/// Cost of the procurement type whose individual minimax bid is `bid`. Uses
/// the explicit solution and falls back to bisection where the worst case
/// moves its upper point inside `[mean, bid]`.
pub fn cost_inverse_procurement_ind(belief: &IndividualBelief, bid: f64) -> Result<f64> {
    let wrapped = Belief::Individual(*belief);
    let bid = check_bid(&wrapped, bid)?;
    let IndividualBelief {
        low,
        mean,
        high,
        bidders,
        ..
    } = *belief;
    if belief.is_degenerate() || bid >= high {
        return Ok(bid);
    }
    let k = belief.opponents();
    let target = ind_proc_low(low, mean, high, bidders, bid);
    if bid > mean {
        let share = ratio(mean - low, bid - low).powi(k);
        if share <= 0.0 {
            return Err(Error::InvalidBelief(format!(
                "mean at the lower bound {low}: bid {bid} is not invertible"
            )));
        }
        let guess = bid - target / share;
        let at_guess = ind_proc_high(low, mean, high, bidders, guess, bid);
        if (at_guess - target).abs() <= 1e-14 * guess.abs().max(1.0) {
            return Ok(guess);
        }
        bisect(
            |c| ind_proc_high(low, mean, high, bidders, c, bid) - target,
            guess,
            bid,
            0.0,
        )
    } else {
        let keep = 1.0 - ratio(mean - bid, high - bid).powi(k);
        if keep <= 0.0 {
            return Err(Error::InvalidBelief(format!(
                "mean at the upper bound {high}: bid {bid} is not invertible"
            )));
        }
        Ok(bid - target / keep)
    }
}

/// Value (buyer) or cost (procurement) that bids `bid` under an aggregate
/// belief.
pub fn inverse_bid_agg(belief: &AggregateBelief, bid: f64) -> Result<f64> {
    match belief.orientation {
        Orientation::BuyerAuction => {
            let bid = check_bid(&Belief::Aggregate(*belief), bid)?;
            agg_buyer_inverse(belief, bid)
        }
        Orientation::Procurement => cost_inverse_procurement_agg(belief, bid),
    }
}

/// Value (buyer) or cost (procurement) that bids `bid` under an individual
/// belief.
pub fn inverse_bid_ind(belief: &IndividualBelief, bid: f64) -> Result<f64> {
    match belief.orientation {
        Orientation::BuyerAuction => {
            let bid = check_bid(&Belief::Individual(*belief), bid)?;
            ind_buyer_inverse(belief, bid)
        }
        Orientation::Procurement => cost_inverse_procurement_ind(belief, bid),
    }
}

/// A minimax bidding function for a fixed belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiddingFunction {
    pub belief: Belief,
}

impl BiddingFunction {
    pub fn new(belief: Belief) -> Self {
        Self { belief }
    }

    pub fn family(&self) -> Family {
        self.belief.family()
    }

    pub fn bid(&self, value: f64) -> Result<f64> {
        match &self.belief {
            Belief::Aggregate(b) => bid_agg(b, value),
            Belief::Individual(b) => bid_ind(b, value),
        }
    }

    pub fn inverse(&self, bid: f64) -> Result<f64> {
        match &self.belief {
            Belief::Aggregate(b) => inverse_bid_agg(b, bid),
            Belief::Individual(b) => inverse_bid_ind(b, bid),
        }
    }

    /// Bids for many values, in input order.
    pub fn bid_all(&self, values: &[f64]) -> Result<Vec<f64>> {
        values.par_iter().map(|v| self.bid(*v)).collect()
    }

    /// Inverse for many bids, in input order. Bids outside the belief range
    /// are collected into one error.
    pub fn inverse_all(&self, bids: &[f64]) -> Result<Vec<f64>> {
        let (low, high) = (self.belief.low(), self.belief.high());
        let eps = dust(low, high);
        let offenders: Vec<(usize, f64)> = bids
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_finite() || **b < low - eps || **b > high + eps)
            .map(|(i, b)| (i, *b))
            .collect();
        if !offenders.is_empty() {
            return Err(Error::BidOutsideSupport {
                low,
                high,
                offenders,
            });
        }
        bids.par_iter().map(|b| self.inverse(*b)).collect()
    }
}

impl From<Belief> for BiddingFunction {
    fn from(belief: Belief) -> Self {
        Self::new(belief)
    }
}

/// Checks that bidding commutes with the affine map `x -> scale * x + shift`
/// applied to values and beliefs alike, on 50 types spanning the relevant
/// range, to 1e-8 relative to the bid scale.
pub fn affine_transform_check(belief: &Belief, scale: f64, shift: f64) -> Result<bool> {
    if !(scale > 0.0) || !shift.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "affine map needs scale > 0 and finite shift, got ({scale}, {shift})"
        )));
    }
    let original = BiddingFunction::new(*belief);
    let moved = BiddingFunction::new(belief.with_params(
        scale * belief.low() + shift,
        scale * belief.moment() + shift,
        scale * belief.high() + shift,
    )?);
    let (low, high) = (belief.low(), belief.high());
    let width = (high - low).max(1.0);
    let (from, to) = match belief.orientation() {
        Orientation::BuyerAuction => (low, high + width),
        Orientation::Procurement => (low - width, high),
    };
    let tol = 1e-8 * (scale * low.abs().max(high.abs()) + shift.abs()).max(1.0);
    for i in 0..50 {
        let v = from + (to - from) * i as f64 / 49.0;
        let lhs = moved.bid(scale * v + shift)?;
        let rhs = scale * original.bid(v)? + shift;
        if (lhs - rhs).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}
