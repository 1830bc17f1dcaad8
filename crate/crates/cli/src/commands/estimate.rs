use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use moment_eq::empirics::{fit_homogenization, homogenize, HomogenizationModel};
use moment_eq::estimation::{
    estimate_beliefs, gpv_pseudo_values, pseudo_values, Method, PseudoValueSet,
};
use moment_eq::{BeliefEstimate, BidSample, Family, OutlierRule, Orientation};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_config, read_records, Metadata, Sink, RECORD_COLUMNS};

#[derive(clap::Args)]
pub struct Args {
    /// Bid CSV: either the full record format or `auction_id,bid` with an
    /// optional `bidder_id` column.
    #[arg(long)]
    bids: PathBuf,
    /// agg, ind or bne.
    #[arg(long)]
    method: Option<MethodArg>,
    /// procurement (default) or buyer.
    #[arg(long)]
    orientation: Option<Orientation>,
    /// none, tukey or tukey:k.
    #[arg(long)]
    outlier: Option<OutlierRule>,
    /// Kernel bandwidth for bne; Silverman's rule when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Estimate each bidder count separately instead of requiring one.
    #[arg(long)]
    per_n: bool,
    /// Homogenize bids with the covariate regression first (full record
    /// format only).
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for beliefs.json and pseudo_values.csv; JSON goes to
    /// stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Agg,
    Ind,
    Bne,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Agg => Method::Agg,
            MethodArg::Ind => Method::Ind,
            MethodArg::Bne => Method::Bne,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    method: Option<MethodArg>,
    orientation: Option<Orientation>,
    outlier: Option<String>,
    bandwidth: Option<f64>,
    per_n: Option<bool>,
    normalize: Option<bool>,
}

/// One bid with its identifiers.
struct Bid {
    auction_id: String,
    bidder_id: String,
    bid: f64,
}

#[derive(Debug, Deserialize)]
struct MinimalBid {
    auction_id: String,
    #[serde(default)]
    bidder_id: Option<String>,
    bid: f64,
}

fn read_bids(path: &Path, normalize: bool) -> CliResult<(Vec<Bid>, Option<HomogenizationModel>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .clone();
    let full = RECORD_COLUMNS.iter().all(|c| headers.iter().any(|h| h == *c));
    if full {
        let file = read_records(path, false)?;
        if normalize {
            let model =
                fit_homogenization(&file.records).map_err(|e| CliError::context(path.display(), e))?;
            let bids = homogenize(&file.records, &model)
                .map_err(|e| CliError::context(path.display(), e))?
                .into_iter()
                .map(|h| Bid {
                    auction_id: h.auction_id,
                    bidder_id: h.bidder_id,
                    bid: h.homogenized,
                })
                .collect();
            return Ok((bids, Some(model)));
        }
        let bids = file
            .records
            .into_iter()
            .map(|r| Bid {
                auction_id: r.auction_id,
                bidder_id: r.bidder_id,
                bid: r.bid,
            })
            .collect();
        return Ok((bids, None));
    }
    if normalize {
        return Err(CliError::input(format!(
            "{}: --normalize needs the columns {}",
            path.display(),
            RECORD_COLUMNS.join(",")
        )));
    }
    for col in ["auction_id", "bid"] {
        if !headers.iter().any(|h| h == col) {
            return Err(CliError::input(format!(
                "{}: line 1: missing column `{col}`",
                path.display()
            )));
        }
    }
    let mut bids = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut raw = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut raw).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(format!("{}: line {line}: {e}", path.display()))
        })?;
        if !more {
            break;
        }
        let line = raw.position().map_or(0, |p| p.line());
        let r: MinimalBid = raw
            .deserialize(Some(&headers))
            .map_err(|e| CliError::input(format!("{}: line {line}: {e}", path.display())))?;
        if !r.bid.is_finite() {
            return Err(CliError::input(format!(
                "{}: line {line}: bid is not finite",
                path.display()
            )));
        }
        let k = seen.entry(r.auction_id.clone()).or_default();
        *k += 1;
        let bidder_id = r.bidder_id.unwrap_or_else(|| format!("{}-{k}", r.auction_id));
        bids.push(Bid {
            auction_id: r.auction_id,
            bidder_id,
            bid: r.bid,
        });
    }
    if bids.is_empty() {
        return Err(CliError::input(format!("{}: no records", path.display())));
    }
    Ok((bids, None))
}

/// Auctions (as positions into the bid list) grouped by bidder count, in
/// order of first appearance within each count.
fn group_by_count(bids: &[Bid]) -> BTreeMap<usize, Vec<Vec<usize>>> {
    let mut order: Vec<&str> = Vec::new();
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, b) in bids.iter().enumerate() {
        let entry = members.entry(b.auction_id.as_str()).or_default();
        if entry.is_empty() {
            order.push(b.auction_id.as_str());
        }
        entry.push(i);
    }
    let mut groups: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for id in order {
        let rows = members.remove(id).unwrap_or_default();
        groups.entry(rows.len()).or_default().push(rows);
    }
    groups
}

#[derive(Serialize)]
struct GroupReport {
    bidders: usize,
    auctions: usize,
    bids: usize,
    belief: Option<BeliefEstimate>,
    bandwidth: Option<f64>,
    recovered: usize,
    mean_pseudo_value: Option<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct Report {
    metadata: Metadata,
    method: Method,
    orientation: Orientation,
    outlier: OutlierRule,
    normalized: bool,
    groups: Vec<GroupReport>,
    homogenization: Option<HomogenizationModel>,
}

#[derive(Serialize)]
struct PseudoRow<'a> {
    auction_id: &'a str,
    bidder_id: &'a str,
    n_bidders: usize,
    bid: f64,
    pseudo_value: Option<f64>,
    status: &'static str,
}

fn estimate_group(
    rows: &[Vec<f64>],
    method: Method,
    orientation: Orientation,
    outlier: OutlierRule,
    bandwidth: Option<f64>,
) -> moment_eq::Result<PseudoValueSet> {
    let bids: Vec<f64> = rows.iter().flatten().copied().collect();
    let family = match method {
        Method::Agg => Family::Aggregate,
        Method::Ind => Family::Individual,
        Method::Bne => return gpv_pseudo_values(&bids, rows[0].len(), orientation, bandwidth),
    };
    let sample = BidSample::structured(rows.to_vec())?;
    let estimate = estimate_beliefs(&sample, orientation, outlier)?;
    pseudo_values(&bids, &estimate, family)
}

pub fn run(args: Args) -> CliResult<()> {
    let cfg: EstimateConfig = read_config(args.config.as_deref())?;
    let method: Method = args
        .method
        .or(cfg.method)
        .ok_or_else(|| CliError::input("--method is required"))?
        .into();
    let orientation = args
        .orientation
        .or(cfg.orientation)
        .unwrap_or(Orientation::Procurement);
    let outlier = match (args.outlier, cfg.outlier) {
        (Some(o), _) => o,
        (None, Some(s)) => s
            .parse()
            .map_err(|e| CliError::input(format!("outlier: {e}")))?,
        (None, None) => OutlierRule::None,
    };
    if method == Method::Bne && outlier != OutlierRule::None {
        return Err(CliError::input("outlier removal applies to agg and ind only"));
    }
    let bandwidth = args.bandwidth.or(cfg.bandwidth);
    let per_n = args.per_n || cfg.per_n.unwrap_or(false);
    let normalize = args.normalize || cfg.normalize.unwrap_or(false);

    let (bids, model) = read_bids(&args.bids, normalize)?;
    let groups = group_by_count(&bids);
    if groups.len() > 1 && !per_n {
        let counts: Vec<String> = groups.keys().map(|n| n.to_string()).collect();
        return Err(CliError::input(format!(
            "auctions have different bidder counts ({}); pass --per-n",
            counts.join(", ")
        )));
    }
    if let Some(&n) = groups.keys().next().filter(|n| **n < 2) {
        return Err(CliError::input(format!(
            "auctions with {n} bid cannot be estimated"
        )));
    }

    let mut pseudo: Vec<Option<f64>> = vec![None; bids.len()];
    let mut counts = vec![0usize; bids.len()];
    let mut reports = Vec::new();
    for (&n, auctions) in &groups {
        let rows: Vec<Vec<f64>> = auctions
            .iter()
            .map(|a| a.iter().map(|&i| bids[i].bid).collect())
            .collect();
        let positions: Vec<usize> = auctions.iter().flatten().copied().collect();
        for &i in &positions {
            counts[i] = n;
        }
        let set = estimate_group(&rows, method, orientation, outlier, bandwidth)
            .map_err(|e| CliError::context(format!("n={n}"), e))?;
        for (&k, &v) in set.indices.iter().zip(&set.values) {
            pseudo[positions[k]] = Some(v);
        }
        let recovered = set.values.len();
        reports.push(GroupReport {
            bidders: n,
            auctions: rows.len(),
            bids: positions.len(),
            belief: set.belief_used,
            bandwidth: set.bandwidth,
            recovered,
            mean_pseudo_value: (recovered > 0)
                .then(|| set.values.iter().sum::<f64>() / recovered as f64),
            warnings: set.warnings,
        });
    }

    let skipped = if method == Method::Bne { "trimmed" } else { "outlier" };
    let table: Vec<PseudoRow> = bids
        .iter()
        .zip(pseudo.iter().zip(&counts))
        .map(|(b, (v, &n))| PseudoRow {
            auction_id: &b.auction_id,
            bidder_id: &b.bidder_id,
            n_bidders: n,
            bid: b.bid,
            pseudo_value: *v,
            status: if v.is_some() { "ok" } else { skipped },
        })
        .collect();

    let sink = Sink::new(args.output)?;
    sink.json(
        "beliefs.json",
        &Report {
            metadata: Metadata::new("estimate", None),
            method,
            orientation,
            outlier,
            normalized: normalize,
            groups: reports,
            homogenization: model,
        },
    )?;
    sink.csv("pseudo_values.csv", &table)
}
