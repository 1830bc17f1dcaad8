//! Distributions on the real line.
//!
//! [`EmpiricalDistribution`] is the carrier for every value, cost and bid
//! distribution that comes out of data: a strictly ascending support with
//! probability weights and a right-continuous step cdf. [`ValueDistribution`]
//! adds the parametric test distributions used by the equilibrium solvers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Which side of the market bids: buyers (highest bid wins) or sellers in a
/// procurement auction (lowest bid wins).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[serde(rename = "buyer")]
    BuyerAuction,
    Procurement,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::BuyerAuction => Orientation::Procurement,
            Orientation::Procurement => Orientation::BuyerAuction,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Orientation::BuyerAuction => f.write_str("buyer"),
            Orientation::Procurement => f.write_str("procurement"),
        }
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "buyer" | "buyer-auction" => Ok(Orientation::BuyerAuction),
            "procurement" | "seller" => Ok(Orientation::Procurement),
            other => Err(Error::InvalidParameter(format!(
                "unknown orientation `{other}` (expected buyer or procurement)"
            ))),
        }
    }
}

/// Closed support `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBounds {
    pub low: f64,
    pub high: f64,
}

impl SupportBounds {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !low.is_finite() || !high.is_finite() || low > high {
            return Err(Error::InvalidParameter(format!(
                "support bounds [{low}, {high}] must be finite and ordered"
            )));
        }
        Ok(Self { low, high })
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn is_degenerate(&self) -> bool {
        self.high <= self.low
    }
}

/// Discrete distribution with strictly ascending support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmpirical", into = "RawEmpirical")]
pub struct EmpiricalDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
    // cumulative[k] = P(X <= support[k]); last entry pinned to 1.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawEmpirical {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawEmpirical> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(raw: RawEmpirical) -> Result<Self> {
        EmpiricalDistribution::from_weighted(&raw.support, &raw.weights)
    }
}

impl From<EmpiricalDistribution> for RawEmpirical {
    fn from(d: EmpiricalDistribution) -> Self {
        RawEmpirical {
            support: d.support,
            weights: d.weights,
        }
    }
}

impl EmpiricalDistribution {
    /// Relative frequencies of the distinct sample values. Ties merge into one
    /// support point.
    pub fn from_sample(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        check_finite(values)?;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let total = sorted.len() as f64;
        let mut support = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in sorted {
            match support.last() {
                Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    support.push(x);
                    counts.push(1);
                }
            }
        }
        let weights = counts.iter().map(|&c| c as f64 / total).collect();
        Ok(Self::assemble(support, weights))
    }

    /// Builds a distribution from `(point, weight)` pairs in any order.
    /// Weights are normalized; duplicated points are merged.
    pub fn from_weighted(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} support points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        check_finite(points)?;
        check_finite(weights)?;
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidParameter(format!("negative weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        let mut pairs: Vec<(f64, f64)> = points
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| (*x, *w / total))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut merged: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match support.last() {
                Some(&last) if last == x => *merged.last_mut().unwrap() += w,
                _ => {
                    support.push(x);
                    merged.push(w);
                }
            }
        }
        Ok(Self::assemble(support, merged))
    }

    pub fn point(x: f64) -> Result<Self> {
        Self::from_weighted(&[x], &[1.0])
    }

    fn assemble(support: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            support,
            weights,
            cumulative,
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        *self.support.last().unwrap()
    }

    pub fn bounds(&self) -> SupportBounds {
        SupportBounds {
            low: self.min(),
            high: self.max(),
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|s| *s <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|s| *s < x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Cumulative probabilities at each support point.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - mean).powi(2))
            .sum()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Expected maximum of `n` independent draws, computed from the
    /// differences of `F^n` across the support.
    pub fn max_order_stat_mean(&self, n: usize) -> Result<f64> {
        if n < 1 {
            return Err(Error::InvalidArity(n));
        }
        if n == 1 {
            return Ok(self.mean());
        }
        let mut prev = 0.0;
        let mut total = 0.0;
        for (x, c) in self.support.iter().zip(&self.cumulative) {
            let cur = c.powi(n as i32);
            total += x * (cur - prev);
            prev = cur;
        }
        Ok(total)
    }

    /// Expected minimum of `n` independent draws.
    pub fn min_order_stat_mean(&self, n: usize) -> Result<f64> {
        if n < 1 {
            return Err(Error::InvalidArity(n));
        }
        if n == 1 {
            return Ok(self.mean());
        }
        Ok(self
            .support
            .iter()
            .map(|&x| x * self.min_pmf_at(n, x))
            .sum())
    }

    /// `P(min of n draws = x)`, evaluated term by term as
    /// `sum_{j<n} C(n,j) (p3^j (p1+p2)^(n-j) - (p2+p3)^j p1^(n-j))` with
    /// `p1 = P(X<x)`, `p2 = P(X=x)`, `p3 = P(X>x)`.
    pub fn min_order_stat_pmf(&self, n: usize, x: f64) -> Result<f64> {
        if n < 1 {
            return Err(Error::InvalidArity(n));
        }
        Ok(self.min_pmf_at(n, x))
    }

    fn min_pmf_at(&self, n: usize, x: f64) -> f64 {
        let below = self.cdf_left(x);
        let at_or_below = self.cdf(x);
        let (p1, p2, p3) = (below, at_or_below - below, 1.0 - at_or_below);
        let mut binom = 1.0;
        let mut total = 0.0;
        for j in 0..n {
            let ji = j as i32;
            let rest = (n - j) as i32;
            total += binom * (p3.powi(ji) * (p1 + p2).powi(rest) - (p2 + p3).powi(ji) * p1.powi(rest));
            binom *= (n - j) as f64 / (j + 1) as f64;
        }
        total
    }

    /// `P(max of n draws = x)`.
    pub fn max_order_stat_pmf(&self, n: usize, x: f64) -> Result<f64> {
        if n < 1 {
            return Err(Error::InvalidArity(n));
        }
        let k = n as i32;
        Ok(self.cdf(x).powi(k) - self.cdf_left(x).powi(k))
    }

    /// Min-of-`n` probabilities for every support point, in support order.
    pub fn min_order_stat_pmf_all(&self, n: usize) -> Result<Vec<f64>> {
        if n < 1 {
            return Err(Error::InvalidArity(n));
        }
        Ok(self.support.iter().map(|&x| self.min_pmf_at(n, x)).collect())
    }

    /// Max-of-`n` probabilities for every support point, in support order.
    pub fn max_order_stat_pmf_all(&self, n: usize) -> Result<Vec<f64>> {
        if n < 1 {
            return Err(Error::InvalidArity(n));
        }
        let k = n as i32;
        let mut prev = 0.0;
        Ok(self
            .cumulative
            .iter()
            .map(|c| {
                let cur = c.powi(k);
                let p = cur - prev;
                prev = cur;
                p
            })
            .collect())
    }

    /// Inverse-cdf quantile: the smallest support point with `cdf >= p`.
    /// Probabilities within 1e-12 count as attained so that float dust in the
    /// cumulative sums does not push a quartile to the next point.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let k = self.cumulative.partition_point(|c| *c < p - 1e-12);
        self.support[k.min(self.support.len() - 1)]
    }

    /// Image of the distribution under a monotone map. A strictly increasing
    /// map keeps the weights attached to the mapped points.
    pub fn map<F: FnMut(f64) -> f64>(&self, f: F) -> Result<Self> {
        let mapped: Vec<f64> = self.support.iter().copied().map(f).collect();
        Self::from_weighted(&mapped, &self.weights)
    }

    /// Draws one observation by inverting the cdf.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let k = self.cumulative.partition_point(|c| *c < u);
        self.support[k.min(self.support.len() - 1)]
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Distribution of private values (or costs) fed to the equilibrium solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ValueDistribution {
    Uniform { low: f64, high: f64 },
    Point { value: f64 },
    Discrete { distribution: EmpiricalDistribution },
}

impl ValueDistribution {
    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        let bounds = SupportBounds::new(low, high)?;
        if bounds.is_degenerate() {
            return Ok(ValueDistribution::Point { value: low });
        }
        Ok(ValueDistribution::Uniform { low, high })
    }

    pub fn point(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("point mass at {value}")));
        }
        Ok(ValueDistribution::Point { value })
    }

    pub fn discrete(distribution: EmpiricalDistribution) -> Self {
        if distribution.len() == 1 {
            return ValueDistribution::Point {
                value: distribution.min(),
            };
        }
        ValueDistribution::Discrete { distribution }
    }

    pub fn bounds(&self) -> SupportBounds {
        match self {
            ValueDistribution::Uniform { low, high } => SupportBounds {
                low: *low,
                high: *high,
            },
            ValueDistribution::Point { value } => SupportBounds {
                low: *value,
                high: *value,
            },
            ValueDistribution::Discrete { distribution } => distribution.bounds(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.bounds().is_degenerate()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ValueDistribution::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            ValueDistribution::Point { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            ValueDistribution::Discrete { distribution } => distribution.cdf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ValueDistribution::Uniform { low, high } => 0.5 * (low + high),
            ValueDistribution::Point { value } => *value,
            ValueDistribution::Discrete { distribution } => distribution.mean(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ValueDistribution::Uniform { low, high } => low + (high - low) * rng.gen::<f64>(),
            ValueDistribution::Point { value } => *value,
            ValueDistribution::Discrete { distribution } => distribution.sample(rng),
        }
    }

    /// Mirror image under `x -> pivot - x`.
    pub fn reflect(&self, pivot: f64) -> Result<Self> {
        Ok(match self {
            ValueDistribution::Uniform { low, high } => ValueDistribution::Uniform {
                low: pivot - high,
                high: pivot - low,
            },
            ValueDistribution::Point { value } => ValueDistribution::Point {
                value: pivot - value,
            },
            ValueDistribution::Discrete { distribution } => ValueDistribution::Discrete {
                distribution: distribution.map(|x| pivot - x)?,
            },
        })
    }

    /// `E[g(X_(n))]` where `X_(n)` is the maximum of `power` independent draws,
    /// i.e. the integral of `g` against `dF^power`. Discrete distributions are
    /// summed exactly; the uniform is integrated by Gauss-Legendre on each
    /// piece between the sorted `breakpoints`, so kinks of `g` should be passed
    /// there.
    pub fn integrate_max<G>(
        &self,
        power: usize,
        mut g: G,
        breakpoints: &[f64],
        rule: &GaussLegendre,
    ) -> Result<f64>
    where
        G: FnMut(f64) -> Result<f64>,
    {
        if power < 1 {
            return Err(Error::InvalidArity(power));
        }
        match self {
            ValueDistribution::Point { value } => g(*value),
            ValueDistribution::Discrete { distribution } => {
                let k = power as i32;
                let mut prev = 0.0;
                let mut total = 0.0;
                for (x, c) in distribution.support().iter().zip(distribution.cumulative()) {
                    let cur = c.powi(k);
                    if cur > prev {
                        total += g(*x)? * (cur - prev);
                    }
                    prev = cur;
                }
                Ok(total)
            }
            ValueDistribution::Uniform { low, high } => {
                let width = high - low;
                let k = power as i32;
                let mut cuts: Vec<f64> = breakpoints
                    .iter()
                    .copied()
                    .filter(|b| b.is_finite() && *b > *low && *b < *high)
                    .collect();
                cuts.sort_by(f64::total_cmp);
                cuts.insert(0, *low);
                cuts.push(*high);
                let mut total = 0.0;
                for pair in cuts.windows(2) {
                    total += rule.integrate(pair[0], pair[1], |x| {
                        let f = (x - low) / width;
                        let density = power as f64 * f.powi(k - 1) / width;
                        Ok(g(x)? * density)
                    })?;
                }
                Ok(total)
            }
        }
    }
}

impl FromStr for ValueDistribution {
    type Err = Error;

    /// Parses `uniform:a,b` and `point:x`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').ok_or_else(|| {
            Error::InvalidParameter(format!("distribution spec `{s}` lacks a `kind:` prefix"))
        })?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("distribution spec `{s}`: {e}")))?;
        match (kind.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("uniform", [a, b]) => ValueDistribution::uniform(*a, *b),
            ("point", [x]) => ValueDistribution::point(*x),
            _ => Err(Error::InvalidParameter(format!(
                "unsupported distribution spec `{s}` (expected uniform:a,b or point:x)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frequencies_merge_ties() {
        let d = EmpiricalDistribution::from_sample(&[1.0, 1.0, 3.0]).unwrap();
        assert_eq!(d.support(), &[1.0, 3.0]);
        assert!((d.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.weights()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn singleton_sample() {
        let d = EmpiricalDistribution::from_sample(&[5.0]).unwrap();
        assert_eq!(d.support(), &[5.0]);
        assert_eq!(d.weights(), &[1.0]);
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert_eq!(
            EmpiricalDistribution::from_sample(&[]),
            Err(Error::EmptySample)
        );
    }

    #[test]
    fn uniform_draws_have_median_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let d = EmpiricalDistribution::from_sample(&draws).unwrap();
        assert!((d.cdf(0.5) - 0.5).abs() < 0.05);
    }

    #[test]
    fn cdf_steps() {
        let d = EmpiricalDistribution::from_sample(&[1.0, 2.0, 3.0]).unwrap();
        assert!((d.cdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.cdf(0.5), 0.0);
        assert_eq!(d.cdf(3.0), 1.0);
        assert_eq!(d.cdf(7.0), 1.0);
        assert!((d.cdf_left(2.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn min_pmf_two_point_enumeration() {
        let d = EmpiricalDistribution::from_sample(&[1.0, 2.0]).unwrap();
        // Of the four equally likely pairs, three have minimum 1.
        assert!((d.min_order_stat_pmf(2, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((d.min_order_stat_pmf(2, 2.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn min_pmf_with_one_draw_is_the_weights() {
        let d = EmpiricalDistribution::from_weighted(&[0.0, 1.0, 4.0], &[0.2, 0.5, 0.3]).unwrap();
        for (x, w) in d.support().iter().zip(d.weights()) {
            assert!((d.min_order_stat_pmf(1, *x).unwrap() - w).abs() < 1e-15);
        }
    }

    #[test]
    fn max_mean_two_point() {
        let d = EmpiricalDistribution::from_sample(&[0.0, 1.0]).unwrap();
        assert!((d.max_order_stat_mean(2).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(d.max_order_stat_mean(1).unwrap(), d.mean());
    }

    #[test]
    fn zero_arity_is_rejected() {
        let d = EmpiricalDistribution::from_sample(&[0.0, 1.0]).unwrap();
        assert_eq!(d.max_order_stat_mean(0), Err(Error::InvalidArity(0)));
        assert_eq!(d.min_order_stat_pmf(0, 0.0), Err(Error::InvalidArity(0)));
    }

    #[test]
    fn inverse_cdf_quantiles() {
        let d = EmpiricalDistribution::from_sample(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.quantile(0.25), 1.0);
        assert_eq!(d.quantile(0.26), 2.0);
        assert_eq!(d.quantile(0.0), 1.0);
        assert_eq!(d.quantile(1.0), 4.0);
    }

    #[test]
    fn weighted_constructor_normalizes_and_merges() {
        let d = EmpiricalDistribution::from_weighted(&[2.0, 1.0, 2.0], &[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(d.support(), &[1.0, 2.0]);
        assert_eq!(d.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn parses_distribution_specs() {
        assert_eq!(
            "uniform:0,1".parse::<ValueDistribution>().unwrap(),
            ValueDistribution::Uniform { low: 0.0, high: 1.0 }
        );
        assert_eq!(
            "point:0.5".parse::<ValueDistribution>().unwrap(),
            ValueDistribution::Point { value: 0.5 }
        );
        assert!("normal:0,1".parse::<ValueDistribution>().is_err());
    }

    #[test]
    fn uniform_max_integral_matches_closed_form() {
        // E[max of 3 uniforms] = 3/4.
        let rule = GaussLegendre::new(16);
        let d = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let m = d.integrate_max(3, Ok, &[0.3], &rule).unwrap();
        assert!((m - 0.75).abs() < 1e-14);
    }
}
