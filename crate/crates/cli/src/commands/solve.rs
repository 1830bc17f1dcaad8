use std::path::PathBuf;

use moment_eq::equilibrium::{monte_carlo_consistency, solve_equilibrium, ConsistencyCheck};
use moment_eq::{
    Belief, EquilibriumOptions, EquilibriumSolution, Family, Orientation, ValueDistribution,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_config, read_distribution, Metadata, Sink};

#[derive(clap::Args)]
pub struct Args {
    /// Belief family: agg or ind.
    #[arg(long)]
    family: Option<Family>,
    /// Distribution: uniform:a,b or point:x.
    #[arg(long, conflicts_with = "dist_file")]
    dist: Option<String>,
    /// CSV with a `value` column and an optional `weight` column.
    #[arg(long)]
    dist_file: Option<PathBuf>,
    /// Number of bidders.
    #[arg(long = "n")]
    bidders: Option<usize>,
    /// buyer (default) or procurement.
    #[arg(long)]
    orientation: Option<Orientation>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    quadrature_nodes: Option<usize>,
    #[arg(long)]
    table_points: Option<usize>,
    #[arg(long)]
    scan_points: Option<usize>,
    /// Simulated auctions for a consistency check (0 disables it).
    #[arg(long)]
    monte_carlo: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for equilibrium.json and bid_table.csv; JSON goes to
    /// stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    family: Option<Family>,
    dist: Option<String>,
    dist_file: Option<PathBuf>,
    bidders: Option<usize>,
    monte_carlo: Option<usize>,
    seed: Option<u64>,
    equilibrium: Option<EquilibriumOptions>,
}

#[derive(Serialize)]
struct Report<'a> {
    metadata: Metadata,
    family: Family,
    orientation: Orientation,
    bidders: usize,
    distribution: &'a ValueDistribution,
    belief: BeliefSummary,
    mean_bid: f64,
    winning_bid: f64,
    pooling: bool,
    diagnostics: &'a moment_eq::equilibrium::Diagnostics,
    options: &'a EquilibriumOptions,
    monte_carlo: Option<MonteCarlo>,
}

#[derive(Serialize)]
pub struct BeliefSummary {
    pub low: f64,
    pub moment: f64,
    pub high: f64,
}

impl From<&Belief> for BeliefSummary {
    fn from(b: &Belief) -> Self {
        BeliefSummary {
            low: b.low(),
            moment: b.moment(),
            high: b.high(),
        }
    }
}

#[derive(Serialize)]
struct MonteCarlo {
    #[serde(flatten)]
    check: ConsistencyCheck,
    z_score: f64,
    within_three_standard_errors: bool,
}

fn parse_dist(spec: &str) -> CliResult<ValueDistribution> {
    spec.parse()
        .map_err(|e: moment_eq::Error| CliError::input(format!("--dist {spec}: {e}")))
}

fn check_table(sol: &EquilibriumSolution) -> CliResult<()> {
    let table = &sol.bid_table;
    if table.iter().any(|p| !p.value.is_finite() || !p.bid.is_finite()) {
        return Err(CliError::Invariant("non-finite entry in the bid table".into()));
    }
    let tol = 1e-12 * sol.belief.high().abs().max(1.0);
    if table.windows(2).any(|w| w[1].bid < w[0].bid - tol) {
        return Err(CliError::Invariant("bid table is not monotone".into()));
    }
    Ok(())
}

pub fn run(args: Args) -> CliResult<()> {
    let cfg: SolveConfig = read_config(args.config.as_deref())?;
    let family = args
        .family
        .or(cfg.family)
        .ok_or_else(|| CliError::input("--family is required"))?;
    let bidders = args
        .bidders
        .or(cfg.bidders)
        .ok_or_else(|| CliError::input("--n is required"))?;
    let dist = match (args.dist, args.dist_file) {
        (Some(d), _) => parse_dist(&d)?,
        (None, Some(f)) => ValueDistribution::discrete(read_distribution(&f)?),
        (None, None) => match (cfg.dist, cfg.dist_file) {
            (Some(d), _) => parse_dist(&d)?,
            (None, Some(f)) => ValueDistribution::discrete(read_distribution(&f)?),
            (None, None) => return Err(CliError::input("--dist or --dist-file is required")),
        },
    };
    let mut opts = cfg.equilibrium.unwrap_or_default();
    if let Some(o) = args.orientation {
        opts.orientation = o;
    }
    if let Some(t) = args.tolerance {
        opts.tolerance = t;
    }
    if let Some(q) = args.quadrature_nodes {
        opts.quadrature_nodes = q;
    }
    if let Some(t) = args.table_points {
        opts.table_points = t;
    }
    if let Some(s) = args.scan_points {
        opts.scan_points = s;
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let auctions = args.monte_carlo.or(cfg.monte_carlo).unwrap_or(0);

    let sol = solve_equilibrium(family, &dist, bidders, &opts)?;
    check_table(&sol)?;
    let monte_carlo = if auctions > 0 {
        let check = monte_carlo_consistency(&sol, auctions, seed)?;
        Some(MonteCarlo {
            z_score: check.z_score(),
            within_three_standard_errors: check.within(3.0),
            check,
        })
    } else {
        None
    };
    let sink = Sink::new(args.output)?;
    sink.json(
        "equilibrium.json",
        &Report {
            metadata: Metadata::new("solve", (auctions > 0).then_some(seed)),
            family,
            orientation: opts.orientation,
            bidders,
            distribution: &dist,
            belief: (&sol.belief).into(),
            mean_bid: sol.mean_bid,
            winning_bid: sol.winning_bid,
            pooling: sol.is_pooling(),
            diagnostics: &sol.diagnostics,
            options: &opts,
            monte_carlo,
        },
    )?;
    sink.csv("bid_table.csv", &sol.bid_table)
}
