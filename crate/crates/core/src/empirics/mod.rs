//! Bid homogenization, out-of-sample prediction and fit metrics for
//! procurement auction data.

pub mod homogenize;
pub mod metrics;
pub mod predict;
pub mod records;
pub mod synthetic;

pub use homogenize::{fit_homogenization, homogenize, HomogenizationModel, HomogenizedBid};
pub use metrics::{
    l1_distance, moment_distance, weighted_fit_report, FitReport, FitRow, WeightedFit,
};
pub use predict::{
    leave_one_n_out_predict, run_pipeline, BidderClass, ClassData, ClassSummary, Estimator,
    PipelineConfig, PipelineOutput, Prediction, TukeyScope, UpperPooling,
};
pub use records::{reconcile_bidder_counts, validate_records, BidRecord};
pub use synthetic::{generate, SyntheticConfig, SyntheticTruth};
