//! Helpers shared by the integration suites.
#![allow(dead_code)]

use moment_eq::{Belief, BiddingFunction, Family, Orientation};
use rand::Rng;

/// A monotonicity claim about the buyer minimax bid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Claim {
    IncreasingInValue,
    IncreasingInMoment,
    IncreasingInBidders,
    DecreasingInHigh,
    /// Only for types below the aggregate cutoff.
    IncreasingInLow,
}

pub const AGG_CLAIMS: [Claim; 5] = [
    Claim::IncreasingInValue,
    Claim::IncreasingInMoment,
    Claim::IncreasingInBidders,
    Claim::DecreasingInHigh,
    Claim::IncreasingInLow,
];

pub const IND_CLAIMS: [Claim; 3] = [
    Claim::IncreasingInValue,
    Claim::IncreasingInMoment,
    Claim::IncreasingInBidders,
];

#[derive(Debug, Clone, Copy)]
pub struct Config {
    pub family: Family,
    pub low: f64,
    pub moment: f64,
    pub high: f64,
    pub bidders: usize,
    pub value: f64,
}

impl Config {
    pub fn random<R: Rng>(rng: &mut R, family: Family) -> Self {
        let low = rng.gen_range(-1.0..1.0);
        let width = rng.gen_range(0.2..2.0);
        let high = low + width;
        let moment = low + width * rng.gen_range(0.05..0.95);
        let bidders = rng.gen_range(2..=7);
        let value = low + width * rng.gen_range(0.0..1.6);
        Config {
            family,
            low,
            moment,
            high,
            bidders,
            value,
        }
    }

    pub fn bid(&self) -> Option<f64> {
        bid(self.family, self.low, self.moment, self.high, self.bidders, self.value)
    }
}

pub fn bid(family: Family, low: f64, moment: f64, high: f64, bidders: usize, value: f64) -> Option<f64> {
    let belief = Belief::new(family, low, moment, high, bidders, Orientation::BuyerAuction).ok()?;
    BiddingFunction::new(belief).bid(value).ok()
}

fn interior(c: &Config, b: f64) -> bool {
    let margin = 1e-6 * (c.high - c.low);
    b > c.low + margin && b < c.high - margin
}

/// Outcome of checking one claim at one configuration: `None` when the
/// claim does not apply there, otherwise whether it held.
pub fn check_claim(c: &Config, claim: Claim) -> Option<Result<(), String>> {
    let base = c.bid()?;
    if !interior(c, base) {
        return None;
    }
    let width = c.high - c.low;
    let h = 1e-4 * width;
    let tol = 1e-10 * width.max(1.0);
    let (bumped, sign, strict) = match claim {
        Claim::IncreasingInValue => (Config { value: c.value + h, ..*c }, 1.0, true),
        Claim::IncreasingInMoment => {
            if c.moment + h >= c.high {
                return None;
            }
            (Config { moment: c.moment + h, ..*c }, 1.0, false)
        }
        Claim::IncreasingInBidders => (Config { bidders: c.bidders + 1, ..*c }, 1.0, false),
        Claim::DecreasingInHigh => (Config { high: c.high + h, ..*c }, -1.0, false),
        Claim::IncreasingInLow => {
            let exponent = (c.bidders - 1) as f64 / c.bidders as f64;
            let cutoff =
                c.moment + (c.moment - c.low) * ((c.high - c.moment) / (c.high - c.low)).powf(exponent);
            if c.family != Family::Aggregate || c.value >= cutoff || c.low + h >= c.moment || c.value < c.low + h {
                return None;
            }
            (Config { low: c.low + h, ..*c }, 1.0, false)
        }
    };
    let moved = bumped.bid()?;
    if !interior(&bumped, moved) {
        return None;
    }
    let diff = sign * (moved - base);
    let ok = if strict { diff > 0.0 } else { diff >= -tol };
    Some(if ok {
        Ok(())
    } else {
        Err(format!("{claim:?} violated at {c:?}: {base} -> {moved}"))
    })
}

/// Draws configurations until `count` of them exercise `claim`, returning
/// the first violation.
pub fn claim_suite<R: Rng>(rng: &mut R, family: Family, claim: Claim, count: usize) -> Result<usize, String> {
    let mut checked = 0;
    let mut draws = 0;
    while checked < count {
        draws += 1;
        if draws > 1000 * count {
            return Err(format!("{claim:?}: only {checked} applicable configurations found"));
        }
        let c = Config::random(rng, family);
        if let Some(outcome) = check_claim(&c, claim) {
            outcome?;
            checked += 1;
        }
    }
    Ok(checked)
}

/// Kolmogorov distance between a step cdf and a continuous cdf.
pub fn ks_distance(dist: &moment_eq::EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    dist.support()
        .iter()
        .map(|&x| {
            let f = cdf(x);
            (dist.cdf(x) - f).abs().max((dist.cdf_left(x) - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Largest cdf gap between two step distributions, evaluated `slack` to the
/// right of every support point so that points closer than `slack` count as
/// the same atom.
pub fn step_cdf_gap(
    a: &moment_eq::EmpiricalDistribution,
    b: &moment_eq::EmpiricalDistribution,
    slack: f64,
) -> f64 {
    a.support()
        .iter()
        .chain(b.support())
        .map(|&x| (a.cdf(x + slack) - b.cdf(x + slack)).abs())
        .fold(0.0, f64::max)
}
