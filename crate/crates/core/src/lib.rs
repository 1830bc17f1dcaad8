//! Minimax-loss bidding, moment equilibria and non-parametric estimation for
//! first-price auctions.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bidding;
pub mod distributions;
pub mod empirics;
pub mod equilibrium;
pub mod error;
pub mod estimation;
pub mod loss;
pub mod quadrature;
pub mod roots;

pub use bidding::BiddingFunction;
pub use distributions::{EmpiricalDistribution, Orientation, SupportBounds, ValueDistribution};
pub use equilibrium::{EquilibriumOptions, EquilibriumSolution};
pub use error::{Error, Result};
pub use estimation::{BeliefEstimate, BidSample, OutlierRule, PseudoValueSet};
pub use loss::{AggregateBelief, Belief, Family, IndividualBelief, TwoPointDistribution};
pub use quadrature::GaussLegendre;
