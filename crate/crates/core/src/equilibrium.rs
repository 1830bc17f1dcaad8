//! Moment equilibria: consistent beliefs and the bidding functions they induce.
//!
//! In a separating equilibrium the lowest type bids its value, so the lower
//! belief equals the bottom of the value support, and the top type bids
//! exactly the upper belief, which pins the upper belief as a function of the
//! moment. What remains is a one-dimensional fixed point in the moment: the
//! moment implied by equilibrium play must equal the believed one. Both the
//! analytic solvers and the sample versions run on this reduction; the
//! sample versions integrate against the empirical pseudo-value distribution.
//!
//! Everything is solved in the buyer frame. Procurement problems are
//! reflected through `x -> low + high - x` of the cost support, solved, and
//! reflected back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bidding::{agg_cutoff, bid_agg, bid_ind, inverse_bid_ind, BiddingFunction};
use crate::distributions::{EmpiricalDistribution, Orientation, SupportBounds, ValueDistribution};
use crate::error::{Error, Result};
use crate::loss::{ratio, Belief, Family};
use crate::quadrature::{GaussLegendre, DEFAULT_NODES};
use crate::roots::bisect;

/// Solver settings shared by the analytic and sample solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumOptions {
    pub orientation: Orientation,
    /// Gauss-Legendre nodes per smooth piece for continuous distributions.
    pub quadrature_nodes: usize,
    /// Rows of the tabulated bidding function.
    pub table_points: usize,
    /// Required fixed-point residual.
    pub tolerance: f64,
    /// Moment grid scanned for sign changes before bisection.
    pub scan_points: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            orientation: Orientation::BuyerAuction,
            quadrature_nodes: DEFAULT_NODES,
            table_points: 512,
            tolerance: 1e-8,
            scan_points: 64,
        }
    }
}

impl EquilibriumOptions {
    pub fn procurement() -> Self {
        Self {
            orientation: Orientation::Procurement,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.quadrature_nodes == 0 || self.table_points < 2 || self.scan_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "quadrature nodes, table points and scan points must be positive \
                 (got {}, {}, {})",
                self.quadrature_nodes, self.table_points, self.scan_points
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidPoint {
    pub value: f64,
    pub bid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Evaluations of the moment map.
    pub iterations: usize,
    /// `|implied moment - believed moment|` at the solution.
    pub residual: f64,
    /// Believed moments (in the problem's own frame) at which the scan saw
    /// the implied-minus-believed gap change sign.
    pub sign_changes: Vec<f64>,
    pub pooling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub family: Family,
    pub orientation: Orientation,
    pub bidders: usize,
    pub belief: Belief,
    pub value_bounds: SupportBounds,
    pub value_dist: ValueDistribution,
    pub bid_table: Vec<BidPoint>,
    /// Expected bid of a single bidder.
    pub mean_bid: f64,
    /// Expected winning bid: the highest bid for buyers, the lowest in
    /// procurement.
    pub winning_bid: f64,
    pub diagnostics: Diagnostics,
}

impl EquilibriumSolution {
    pub fn bidding_function(&self) -> BiddingFunction {
        BiddingFunction::new(self.belief)
    }

    pub fn bid(&self, value: f64) -> Result<f64> {
        self.bidding_function().bid(value)
    }

    pub fn inverse(&self, bid: f64) -> Result<f64> {
        self.bidding_function().inverse(bid)
    }

    pub fn is_pooling(&self) -> bool {
        self.diagnostics.pooling
    }

    /// The equilibrium moment: expected winning bid (aggregate) or expected
    /// individual bid (individual).
    pub fn moment(&self) -> f64 {
        self.belief.moment()
    }
}

/// Upper belief consistent with the top type `top` bidding exactly the
/// upper bound, given the lower belief and the expected winning bid.
pub fn upper_belief_agg(low: f64, moment: f64, top: f64, bidders: usize) -> Result<f64> {
    check_upper_inputs(low, moment, top, bidders)?;
    let a = (bidders - 1) as f64 / bidders as f64;
    let gap = |upper: f64| top - upper - ratio(upper - moment, upper - low).powf(a) * (top - low);
    bisect(gap, moment, top, 0.0)
}

/// Individual-belief analog of [`upper_belief_agg`]: solves
/// `top = u + (u - mean) / (1 - ((u - mean)/(u - low))^(n-1))`.
pub fn upper_belief_ind(low: f64, mean: f64, top: f64, bidders: usize) -> Result<f64> {
    check_upper_inputs(low, mean, top, bidders)?;
    if mean <= low {
        return Err(Error::InfeasibleBelief(format!(
            "mean {mean} must exceed the lower belief {low}"
        )));
    }
    let k = bidders as i32 - 1;
    let gap = |upper: f64| {
        let keep = 1.0 - ratio(upper - mean, upper - low).powi(k);
        upper + (upper - mean) / keep - top
    };
    bisect(gap, mean, top, 0.0)
}

fn check_upper_inputs(low: f64, moment: f64, top: f64, bidders: usize) -> Result<()> {
    if bidders < 2 {
        return Err(Error::InvalidBelief(format!(
            "need at least two bidders, got {bidders}"
        )));
    }
    if !(low.is_finite() && moment.is_finite() && top.is_finite()) {
        return Err(Error::InfeasibleBelief(format!(
            "non-finite inputs ({low}, {moment}, {top})"
        )));
    }
    if moment < low {
        return Err(Error::InfeasibleBelief(format!(
            "moment {moment} below the lower belief {low}"
        )));
    }
    if moment >= top {
        return Err(Error::InfeasibleBelief(format!(
            "moment {moment} must lie below the top type {top}"
        )));
    }
    Ok(())
}

/// Buyer-frame belief for a candidate moment.
fn buyer_belief(
    family: Family,
    low: f64,
    moment: f64,
    top: f64,
    bidders: usize,
) -> Result<Belief> {
    let upper = match family {
        Family::Aggregate => upper_belief_agg(low, moment, top, bidders)?,
        Family::Individual => upper_belief_ind(low, moment, top, bidders)?,
    };
    Belief::new(
        family,
        low,
        moment,
        upper.max(moment),
        bidders,
        Orientation::BuyerAuction,
    )
}

/// Type that bids the moment; the bidding function kinks there.
fn kink(belief: &Belief) -> Result<f64> {
    match belief {
        Belief::Aggregate(b) => Ok(agg_cutoff(b)),
        Belief::Individual(b) => inverse_bid_ind(b, b.mean),
    }
}

fn buyer_bid(belief: &Belief, value: f64) -> Result<f64> {
    match belief {
        Belief::Aggregate(b) => bid_agg(b, value),
        Belief::Individual(b) => bid_ind(b, value),
    }
}

/// Expected winning bid (aggregate) or expected bid (individual) when all
/// bidders follow the minimax function of `belief`.
fn implied_moment(
    belief: &Belief,
    dist: &ValueDistribution,
    rule: &GaussLegendre,
) -> Result<f64> {
    let power = match belief.family() {
        Family::Aggregate => belief.bidders(),
        Family::Individual => 1,
    };
    dist.integrate_max(power, |v| buyer_bid(belief, v), &[kink(belief)?], rule)
}

struct BuyerFrame {
    belief: Belief,
    diagnostics: Diagnostics,
}

fn solve_buyer_frame(
    family: Family,
    dist: &ValueDistribution,
    bidders: usize,
    bounds: SupportBounds,
    opts: &EquilibriumOptions,
) -> Result<BuyerFrame> {
    let (low, top) = (bounds.low, bounds.high);
    if top <= low {
        return Ok(BuyerFrame {
            belief: Belief::new(family, low, low, low, bidders, Orientation::BuyerAuction)?,
            diagnostics: Diagnostics {
                iterations: 0,
                residual: 0.0,
                sign_changes: Vec::new(),
                pooling: true,
            },
        });
    }
    let rule = GaussLegendre::try_new(opts.quadrature_nodes)?;
    let mut iterations = 0usize;
    let mut gap = |moment: f64| -> Result<f64> {
        iterations += 1;
        let belief = buyer_belief(family, low, moment, top, bidders)?;
        Ok(implied_moment(&belief, dist, &rule)? - moment)
    };

    let eps = 1e-6 * (top - low);
    let (from, to) = (low + eps, top - eps);
    let grid: Vec<f64> = (0..opts.scan_points)
        .map(|i| from + (to - from) * i as f64 / (opts.scan_points - 1) as f64)
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for &m in &grid {
        values.push(gap(m)?);
    }
    let mut sign_changes = Vec::new();
    let mut bracket = None;
    for i in 1..grid.len() {
        let (g0, g1) = (values[i - 1], values[i]);
        if (g0 > 0.0) != (g1 > 0.0) {
            sign_changes.push(0.5 * (grid[i - 1] + grid[i]));
            if bracket.is_none() && g0 > 0.0 {
                bracket = Some((grid[i - 1], grid[i]));
            }
        }
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Err(Error::solver(
            "moment fixed point",
            format!(
                "no downward crossing of the diagonal on [{from}, {to}]; \
                 gap at ends ({}, {}), sign changes at {sign_changes:?}",
                values[0],
                values[values.len() - 1]
            ),
        ));
    };
    // Bisection to float exhaustion; the gap is continuous in the moment.
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (g_lo, g_hi) = (gap(lo)?, gap(hi)?);
    let moment = if g_lo.abs() <= g_hi.abs() { lo } else { hi };
    let residual = g_lo.abs().min(g_hi.abs());
    if residual > opts.tolerance {
        return Err(Error::solver(
            "moment fixed point",
            format!("residual {residual} above tolerance {} at moment {moment}", opts.tolerance),
        ));
    }
    Ok(BuyerFrame {
        belief: buyer_belief(family, low, moment, top, bidders)?,
        diagnostics: Diagnostics {
            iterations,
            residual,
            sign_changes,
            pooling: false,
        },
    })
}

fn reflect_belief(belief: &Belief, pivot: f64) -> Result<Belief> {
    let orientation = belief.orientation().flipped();
    Belief::new(
        belief.family(),
        pivot - belief.high(),
        pivot - belief.moment(),
        pivot - belief.low(),
        belief.bidders(),
        orientation,
    )
}

fn solve_general(
    family: Family,
    dist: &ValueDistribution,
    bidders: usize,
    bounds: SupportBounds,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    opts.validate()?;
    if bidders < 2 {
        return Err(Error::InvalidBelief(format!(
            "need at least two bidders, got {bidders}"
        )));
    }
    let pivot = bounds.low + bounds.high;
    let (frame_dist, frame_bounds) = match opts.orientation {
        Orientation::BuyerAuction => (dist.clone(), bounds),
        Orientation::Procurement => (
            dist.reflect(pivot)?,
            SupportBounds {
                low: pivot - bounds.high,
                high: pivot - bounds.low,
            },
        ),
    };
    let frame = solve_buyer_frame(family, &frame_dist, bidders, frame_bounds, opts)?;
    let rule = GaussLegendre::try_new(opts.quadrature_nodes)?;
    let breaks = if frame.diagnostics.pooling {
        Vec::new()
    } else {
        vec![kink(&frame.belief)?]
    };
    let mean_bid = frame_dist.integrate_max(1, |v| buyer_bid(&frame.belief, v), &breaks, &rule)?;
    let winning_bid =
        frame_dist.integrate_max(bidders, |v| buyer_bid(&frame.belief, v), &breaks, &rule)?;

    let (belief, mean_bid, winning_bid, mut diagnostics) = match opts.orientation {
        Orientation::BuyerAuction => (frame.belief, mean_bid, winning_bid, frame.diagnostics),
        Orientation::Procurement => {
            let mut diag = frame.diagnostics;
            diag.sign_changes = diag.sign_changes.iter().map(|m| pivot - m).collect();
            (
                reflect_belief(&frame.belief, pivot)?,
                pivot - mean_bid,
                pivot - winning_bid,
                diag,
            )
        }
    };
    let function = BiddingFunction::new(belief);
    let rows = opts.table_points;
    let values: Vec<f64> = (0..rows)
        .map(|i| bounds.low + (bounds.high - bounds.low) * i as f64 / (rows - 1) as f64)
        .collect();
    let bids = function.bid_all(&values)?;
    let bid_table = values
        .into_iter()
        .zip(bids)
        .map(|(value, bid)| BidPoint { value, bid })
        .collect();
    if diagnostics.pooling {
        diagnostics.residual = 0.0;
    }
    Ok(EquilibriumSolution {
        family,
        orientation: opts.orientation,
        bidders,
        belief,
        value_bounds: bounds,
        value_dist: dist.clone(),
        bid_table,
        mean_bid,
        winning_bid,
        diagnostics,
    })
}

/// Aggregate moment equilibrium for value (or, in procurement, cost)
/// distribution `dist` with `bidders` bidders.
pub fn solve_equilibrium_agg(
    dist: &ValueDistribution,
    bidders: usize,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    solve_general(Family::Aggregate, dist, bidders, dist.bounds(), opts)
}

/// Individual moment equilibrium.
pub fn solve_equilibrium_ind(
    dist: &ValueDistribution,
    bidders: usize,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    solve_general(Family::Individual, dist, bidders, dist.bounds(), opts)
}

pub fn solve_equilibrium(
    family: Family,
    dist: &ValueDistribution,
    bidders: usize,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    solve_general(family, dist, bidders, dist.bounds(), opts)
}

/// Bounds of a pseudo-value sample, with the extreme type pinned by the data
/// optionally moved outward: the highest cost in procurement, the lowest
/// value for buyers.
fn sample_bounds(
    pseudo: &EmpiricalDistribution,
    extreme: Option<f64>,
    orientation: Orientation,
) -> Result<SupportBounds> {
    let mut bounds = pseudo.bounds();
    if let Some(x) = extreme {
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!("extreme type {x} is not finite")));
        }
        match orientation {
            Orientation::Procurement if x >= bounds.high => bounds.high = x,
            Orientation::BuyerAuction if x <= bounds.low => bounds.low = x,
            Orientation::Procurement => {
                return Err(Error::CostAboveSupport {
                    cost: bounds.high,
                    high: x,
                })
            }
            Orientation::BuyerAuction => {
                return Err(Error::ValueBelowSupport {
                    value: bounds.low,
                    low: x,
                })
            }
        }
    }
    Ok(bounds)
}

fn solve_sample(
    family: Family,
    pseudo: &EmpiricalDistribution,
    bidders: usize,
    extreme: Option<f64>,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    let bounds = sample_bounds(pseudo, extreme, opts.orientation)?;
    let dist = ValueDistribution::discrete(pseudo.clone());
    let mut solution = solve_general(family, &dist, bidders, bounds, opts)?;
    if !solution.is_pooling() {
        let (extreme_bid, statistic) = sample_moment_map(&solution.belief, pseudo)?;
        let fixed = match opts.orientation {
            Orientation::BuyerAuction => solution.belief.high(),
            Orientation::Procurement => solution.belief.low(),
        };
        let residual = (extreme_bid - fixed)
            .abs()
            .max((statistic - solution.belief.moment()).abs());
        solution.diagnostics.residual = residual;
        if residual > opts.tolerance && extreme.is_none() {
            return Err(Error::solver(
                "sample fixed point",
                format!("residual {residual} above tolerance {}", opts.tolerance),
            ));
        }
    }
    Ok(solution)
}

/// Sample aggregate equilibrium for pooled pseudo-values (buyer) or
/// pseudo-costs (procurement). `extreme` overrides the type whose bid equals
/// its value-side bound: the highest cost in procurement (defaults to the
/// sample maximum) or the lowest value for buyers (defaults to the sample
/// minimum).
pub fn solve_sample_equilibrium_agg(
    pseudo: &EmpiricalDistribution,
    bidders: usize,
    extreme: Option<f64>,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    solve_sample(Family::Aggregate, pseudo, bidders, extreme, opts)
}

/// Sample individual equilibrium; see [`solve_sample_equilibrium_agg`].
pub fn solve_sample_equilibrium_ind(
    pseudo: &EmpiricalDistribution,
    bidders: usize,
    extreme: Option<f64>,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution> {
    solve_sample(Family::Individual, pseudo, bidders, extreme, opts)
}

/// The sample map whose fixed point defines a sample equilibrium: the bid of
/// the extreme type (the lowest cost in procurement, the highest value for
/// buyers) and the implied moment. For aggregate beliefs the moment is
/// `sum_t p(c_t) beta(c_t)` with `p` the pmf of the winning type among
/// `bidders` draws from the sample; for individual beliefs it is the average
/// bid.
pub fn sample_moment_map(belief: &Belief, pseudo: &EmpiricalDistribution) -> Result<(f64, f64)> {
    let function = BiddingFunction::new(*belief);
    let orientation = belief.orientation();
    let extreme_type = match orientation {
        Orientation::BuyerAuction => pseudo.max(),
        Orientation::Procurement => pseudo.min(),
    };
    let extreme_bid = function.bid(extreme_type)?;
    let bids = function.bid_all(pseudo.support())?;
    let weights = match (belief.family(), orientation) {
        (Family::Individual, _) => pseudo.weights().to_vec(),
        (Family::Aggregate, Orientation::BuyerAuction) => {
            pseudo.max_order_stat_pmf_all(belief.bidders())?
        }
        (Family::Aggregate, Orientation::Procurement) => {
            pseudo.min_order_stat_pmf_all(belief.bidders())?
        }
    };
    let statistic = bids.iter().zip(&weights).map(|(b, w)| b * w).sum();
    Ok((extreme_bid, statistic))
}

/// Simulated check that equilibrium play reproduces the believed moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCheck {
    pub auctions: usize,
    pub target: f64,
    pub simulated: f64,
    pub standard_error: f64,
}

impl ConsistencyCheck {
    /// Distance from the target in standard errors.
    pub fn z_score(&self) -> f64 {
        let gap = (self.simulated - self.target).abs();
        if self.standard_error > 0.0 {
            gap / self.standard_error
        } else if gap <= 1e-12 * self.target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, standard_errors: f64) -> bool {
        self.z_score() <= standard_errors
    }
}

/// Rows of the dense interpolation table used for continuous distributions.
const SIMULATION_TABLE: usize = 4097;
const SIMULATION_CHUNKS: u64 = 64;

enum BidSampler {
    Constant(f64),
    /// Bids on an even value grid, interpolated linearly.
    Table(Vec<f64>),
    Discrete {
        dist: EmpiricalDistribution,
        bids: Vec<f64>,
    },
}

impl BidSampler {
    fn new(solution: &EquilibriumSolution) -> Result<Self> {
        let function = solution.bidding_function();
        Ok(match &solution.value_dist {
            ValueDistribution::Point { value } => BidSampler::Constant(function.bid(*value)?),
            ValueDistribution::Discrete { distribution } => BidSampler::Discrete {
                bids: function.bid_all(distribution.support())?,
                dist: distribution.clone(),
            },
            ValueDistribution::Uniform { low, high } => {
                let step = (high - low) / (SIMULATION_TABLE - 1) as f64;
                let values: Vec<f64> = (0..SIMULATION_TABLE)
                    .map(|i| low + step * i as f64)
                    .collect();
                BidSampler::Table(function.bid_all(&values)?)
            }
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            BidSampler::Constant(b) => *b,
            BidSampler::Table(bids) => {
                let u: f64 = rng.gen();
                let x = u * (bids.len() - 1) as f64;
                let i = (x.floor() as usize).min(bids.len() - 2);
                let t = x - i as f64;
                bids[i] + t * (bids[i + 1] - bids[i])
            }
            BidSampler::Discrete { dist, bids } => {
                let u: f64 = rng.gen();
                let k = dist.cumulative().partition_point(|c| *c < u);
                bids[k.min(bids.len() - 1)]
            }
        }
    }
}

/// Simulates `auctions` auctions under the solved bidding function and
/// compares the average winning bid (aggregate) or average bid (individual)
/// with the equilibrium moment. Deterministic for a fixed seed.
pub fn monte_carlo_consistency(
    solution: &EquilibriumSolution,
    auctions: usize,
    seed: u64,
) -> Result<ConsistencyCheck> {
    if auctions < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two simulated auctions, got {auctions}"
        )));
    }
    let sampler = BidSampler::new(solution)?;
    let bidders = solution.bidders;
    let family = solution.family;
    let orientation = solution.orientation;
    let chunk = (auctions as u64).div_ceil(SIMULATION_CHUNKS);
    let (sum, sum_sq) = (0..SIMULATION_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            let end = ((c + 1) * chunk).min(auctions as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in start..end {
                let stat = match family {
                    Family::Individual => {
                        (0..bidders).map(|_| sampler.draw(&mut rng)).sum::<f64>() / bidders as f64
                    }
                    Family::Aggregate => {
                        let draws = (0..bidders).map(|_| sampler.draw(&mut rng));
                        match orientation {
                            Orientation::BuyerAuction => draws.fold(f64::NEG_INFINITY, f64::max),
                            Orientation::Procurement => draws.fold(f64::INFINITY, f64::min),
                        }
                    }
                };
                s += stat;
                s2 += stat * stat;
            }
            (s, s2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let count = auctions as f64;
    let mean = sum / count;
    let variance = ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0);
    Ok(ConsistencyCheck {
        auctions,
        target: solution.moment(),
        simulated: mean,
        standard_error: (variance / count).sqrt(),
    })
}
