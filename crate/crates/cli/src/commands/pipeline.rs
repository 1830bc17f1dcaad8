use std::path::PathBuf;

use moment_eq::empirics::{
    run_pipeline, ClassSummary, Estimator, FitRow, HomogenizationModel, PipelineConfig,
    PipelineOutput, TukeyScope, UpperPooling, WeightedFit,
};
use serde::Serialize;

use super::serde_value;
use crate::error::{CliError, CliResult};
use crate::io::{read_config, read_records, Metadata, Sink};

#[derive(clap::Args)]
pub struct Args {
    /// Bid-record CSV.
    #[arg(long)]
    bids: PathBuf,
    /// TOML pipeline configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of AGG, IND, BNE, AGG-Out, IND-Out.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<Estimator>>,
    #[arg(long)]
    tukey_k: Option<f64>,
    /// pooled or per-class.
    #[arg(long, value_parser = serde_value::<TukeyScope>)]
    tukey_scope: Option<TukeyScope>,
    /// max or min.
    #[arg(long, value_parser = serde_value::<UpperPooling>)]
    upper_pooling: Option<UpperPooling>,
    #[arg(long)]
    max_bidders_nonfringe: Option<usize>,
    #[arg(long)]
    max_bidders_fringe: Option<usize>,
    #[arg(long)]
    min_auctions: Option<usize>,
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Recorded in the report; the pipeline itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report.json and the CSV tables; the report goes to
    /// stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a> {
    metadata: Metadata,
    config: &'a PipelineConfig,
    homogenization: &'a HomogenizationModel,
    averages: &'a [WeightedFit],
    fit: &'a [FitRow],
    summaries: &'a [ClassSummary],
    adjusted_bidder_counts: usize,
    mixed_auctions_excluded: usize,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    class: &'a str,
    bidders: usize,
    estimator: &'a str,
    pseudo_cost: f64,
    predicted_bid: f64,
}

#[derive(Serialize)]
struct CoefficientRow<'a> {
    column: &'a str,
    coefficient: f64,
    standard_error: Option<f64>,
}

fn apply_flags(args: &Args, config: &mut PipelineConfig) {
    if let Some(e) = &args.estimators {
        config.estimators = e.clone();
    }
    if let Some(k) = args.tukey_k {
        config.tukey_k = k;
    }
    if let Some(s) = args.tukey_scope {
        config.tukey_scope = s;
    }
    if let Some(p) = args.upper_pooling {
        config.upper_pooling = p;
    }
    if args.max_bidders_nonfringe.is_some() {
        config.max_bidders_nonfringe = args.max_bidders_nonfringe;
    }
    if args.max_bidders_fringe.is_some() {
        config.max_bidders_fringe = args.max_bidders_fringe;
    }
    if let Some(m) = args.min_auctions {
        config.min_auctions = m;
    }
    if args.bandwidth.is_some() {
        config.bandwidth = args.bandwidth;
    }
}

fn write_tables(sink: &Sink, out: &PipelineOutput) -> CliResult<()> {
    sink.csv("fit.csv", &out.report.rows)?;
    sink.csv("averages.csv", &out.report.averages)?;
    sink.csv("summary.csv", &out.summaries)?;
    let predictions: Vec<PredictionRow> = out
        .predictions
        .iter()
        .flat_map(|p| {
            p.pseudo_costs
                .iter()
                .zip(&p.predicted_bids)
                .map(move |(&c, &b)| PredictionRow {
                    class: p.class.label(),
                    bidders: p.target,
                    estimator: p.estimator.label(),
                    pseudo_cost: c,
                    predicted_bid: b,
                })
        })
        .collect();
    sink.csv("predictions.csv", &predictions)?;
    let model = &out.model;
    let coefficients: Vec<CoefficientRow> = model
        .columns
        .iter()
        .zip(&model.coefficients)
        .zip(&model.standard_errors)
        .map(|((c, &b), &se)| CoefficientRow {
            column: c,
            coefficient: b,
            standard_error: se,
        })
        .collect();
    sink.csv("homogenization.csv", &coefficients)
}

pub fn run(args: Args) -> CliResult<()> {
    let mut config: PipelineConfig = read_config(args.config.as_deref())?;
    apply_flags(&args, &mut config);
    if config.estimators.is_empty() {
        return Err(CliError::input("no estimators selected"));
    }
    let file = read_records(&args.bids, true)?;
    let out = run_pipeline(&file.records, &config)
        .map_err(|e| CliError::context(args.bids.display(), e))?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let sink = Sink::new(args.output.clone())?;
    sink.json(
        "report.json",
        &Report {
            metadata: Metadata::new("pipeline", args.seed),
            config: &config,
            homogenization: &out.model,
            averages: &out.report.averages,
            fit: &out.report.rows,
            summaries: &out.summaries,
            adjusted_bidder_counts: out.adjusted_bidder_counts,
            mixed_auctions_excluded: out.mixed_auctions_excluded,
            warnings: &out.warnings,
        },
    )?;
    write_tables(&sink, &out)
}
