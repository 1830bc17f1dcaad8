use std::path::PathBuf;

use moment_eq::loss::oracle_worst_loss;
use moment_eq::{Belief, Family, Orientation};
use rayon::prelude::*;
use serde::Serialize;

use super::solve::BeliefSummary;
use crate::error::{CliError, CliResult};
use crate::io::{Metadata, Sink};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    low: f64,
    /// Expected winning bid (agg) or expected bid (ind).
    #[arg(long)]
    moment: f64,
    #[arg(long)]
    high: f64,
    #[arg(long = "n")]
    bidders: usize,
    /// buyer (default) or procurement.
    #[arg(long, default_value = "buyer")]
    orientation: Orientation,
    /// Value (or cost) at which to evaluate; by default each bid is paired
    /// with a value half the belief width away on the profitable side.
    #[arg(long)]
    value: Option<f64>,
    /// Grid points per opponent support point in the brute-force search.
    #[arg(long, default_value_t = 2000)]
    grid: usize,
    /// Evenly spaced bids across the belief range.
    #[arg(long, default_value_t = 11)]
    points: usize,
    /// Largest allowed gap as a fraction of the belief width (absolute for a
    /// degenerate belief).
    #[arg(long, default_value_t = 5e-3)]
    tolerance: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Row {
    value: f64,
    bid: f64,
    closed_form: f64,
    oracle: f64,
    gap: f64,
}

#[derive(Serialize)]
struct Summary {
    metadata: Metadata,
    family: Family,
    orientation: Orientation,
    bidders: usize,
    belief: BeliefSummary,
    grid: usize,
    evaluated: usize,
    max_gap: f64,
    tolerance: f64,
    passed: bool,
    rows: Vec<Row>,
}

fn profitable(orientation: Orientation, value: f64, bid: f64) -> bool {
    match orientation {
        Orientation::BuyerAuction => value >= bid,
        Orientation::Procurement => value <= bid,
    }
}

pub fn run(args: Args) -> CliResult<()> {
    if args.points < 1 {
        return Err(CliError::input("--points must be positive"));
    }
    if args.tolerance.is_nan() || args.tolerance < 0.0 {
        return Err(CliError::input("--tolerance must be non-negative"));
    }
    let belief = Belief::new(
        args.family,
        args.low,
        args.moment,
        args.high,
        args.bidders,
        args.orientation,
    )?;
    let width = args.high - args.low;
    let offset = if width > 0.0 { 0.5 * width } else { 0.5 };
    let points = if width > 0.0 { args.points } else { 1 };
    let pairs: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let t = if points == 1 { 0.5 } else { i as f64 / (points - 1) as f64 };
            args.low + width * t
        })
        .filter_map(|bid| {
            let value = args.value.unwrap_or(match args.orientation {
                Orientation::BuyerAuction => bid + offset,
                Orientation::Procurement => bid - offset,
            });
            profitable(args.orientation, value, bid).then_some((value, bid))
        })
        .collect();
    if pairs.is_empty() {
        return Err(CliError::input(
            "no bid in the belief range is profitable at the given value",
        ));
    }
    let scale = if width > 0.0 { width } else { 1.0 };
    let rows = pairs
        .par_iter()
        .map(|&(value, bid)| {
            let closed_form = belief.worst_loss(value, bid)?;
            let oracle = oracle_worst_loss(&belief, value, bid, args.grid)?;
            Ok(Row {
                value,
                bid,
                closed_form,
                oracle,
                gap: (closed_form - oracle).abs() / scale,
            })
        })
        .collect::<moment_eq::Result<Vec<Row>>>()?;
    let max_gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
    if rows.iter().any(|r| !r.closed_form.is_finite() || !r.oracle.is_finite()) {
        return Err(CliError::Invariant("non-finite loss".into()));
    }
    let passed = max_gap <= args.tolerance;
    let sink = Sink::new(args.output)?;
    sink.csv("oracle.csv", &rows)?;
    sink.json(
        "oracle.json",
        &Summary {
            metadata: Metadata::new("oracle", None),
            family: args.family,
            orientation: args.orientation,
            bidders: args.bidders,
            belief: (&belief).into(),
            grid: args.grid,
            evaluated: rows.len(),
            max_gap,
            tolerance: args.tolerance,
            passed,
            rows,
        },
    )?;
    if !passed {
        return Err(CliError::Invariant(format!(
            "closed-form loss differs from the brute-force search by {max_gap:.3e} \
             (tolerance {:.3e})",
            args.tolerance
        )));
    }
    Ok(())
}
