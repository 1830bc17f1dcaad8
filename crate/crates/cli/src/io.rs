//! File formats: bid-record CSV in, JSON reports and CSV tables out.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use moment_eq::empirics::{validate_records, BidRecord};
use moment_eq::{EmpiricalDistribution, Error};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, CliResult};

pub const RECORD_COLUMNS: [&str; 10] = [
    "auction_id",
    "bidder_id",
    "bid",
    "eng",
    "dist",
    "util",
    "rdist",
    "rutil",
    "fringe",
    "n_bidders",
];

#[derive(Debug, Deserialize)]
struct RawRecord {
    auction_id: String,
    bidder_id: String,
    bid: f64,
    eng: f64,
    dist: f64,
    util: f64,
    rdist: f64,
    rutil: f64,
    #[serde(deserialize_with = "flag")]
    fringe: bool,
    n_bidders: usize,
}

fn flag<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(serde::de::Error::custom(format!(
            "fringe must be 0/1 or true/false, got `{other}`"
        ))),
    }
}

/// Bid records with the file line of each.
pub struct RecordFile {
    pub records: Vec<BidRecord>,
    pub lines: Vec<u64>,
}

impl RecordFile {
    /// Library error with record positions translated to file lines.
    pub fn locate(&self, path: &Path, e: Error) -> CliError {
        match e {
            Error::InvalidRecord { index, reason } => CliError::input(format!(
                "{}: line {}: {reason}",
                path.display(),
                self.lines.get(index).copied().unwrap_or(0)
            )),
            other => CliError::context(path.display(), other),
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    match line {
        Some(line) => CliError::input(format!("{}: line {line}: {e}", path.display())),
        None => CliError::input(format!("{}: {e}", path.display())),
    }
}

/// Reads and validates a bid-record CSV. Records whose bidder count does not
/// match the number of rows in their auction are rejected unless `reconcile`
/// is set, in which case the count is adjusted.
pub fn read_records(path: &Path, reconcile: bool) -> CliResult<RecordFile> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for col in RECORD_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(CliError::input(format!(
                "{}: line 1: missing column `{col}` (expected {})",
                path.display(),
                RECORD_COLUMNS.join(",")
            )));
        }
    }
    let mut records = Vec::new();
    let mut lines = Vec::new();
    let mut raw = csv::StringRecord::new();
    while reader.read_record(&mut raw).map_err(|e| csv_error(path, e))? {
        let line = raw.position().map_or(0, |p| p.line());
        let r: RawRecord = raw.deserialize(Some(&headers)).map_err(|e| {
            CliError::input(format!("{}: line {line}: {e}", path.display()))
        })?;
        lines.push(line);
        records.push(BidRecord {
            auction_id: r.auction_id,
            bidder_id: r.bidder_id,
            bid: r.bid,
            eng: r.eng,
            dist: r.dist,
            util: r.util,
            rdist: r.rdist,
            rutil: r.rutil,
            fringe: r.fringe,
            n_bidders: r.n_bidders,
        });
    }
    let file = RecordFile { records, lines };
    if file.records.is_empty() {
        return Err(CliError::input(format!("{}: no records", path.display())));
    }
    if reconcile {
        let mut records = file.records.clone();
        moment_eq::empirics::reconcile_bidder_counts(&mut records)
            .map_err(|e| file.locate(path, e))?;
        return Ok(RecordFile {
            records,
            lines: file.lines,
        });
    }
    validate_records(&file.records).map_err(|e| file.locate(path, e))?;
    Ok(file)
}

#[derive(Debug, Deserialize)]
struct WeightedValue {
    value: f64,
    #[serde(default)]
    weight: Option<f64>,
}

/// Reads a `value[,weight]` CSV; missing weights count as one.
pub fn read_distribution(path: &Path) -> CliResult<EmpiricalDistribution> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for row in reader.deserialize::<WeightedValue>() {
        let r = row.map_err(|e| csv_error(path, e))?;
        points.push(r.value);
        weights.push(r.weight.unwrap_or(1.0));
    }
    EmpiricalDistribution::from_weighted(&points, &weights)
        .map_err(|e| CliError::context(path.display(), e))
}

/// Where a command writes its results.
pub enum Sink {
    Stdout,
    Directory(PathBuf),
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> CliResult<Self> {
        match dir {
            None => Ok(Sink::Stdout),
            Some(d) => {
                fs::create_dir_all(&d).map_err(|e| {
                    CliError::input(format!("cannot create {}: {e}", d.display()))
                })?;
                Ok(Sink::Directory(d))
            }
        }
    }

    /// The primary JSON report; printed when there is no output directory.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Invariant(format!("serializing {name}: {e}")))?;
        match self {
            Sink::Stdout => {
                let mut out = std::io::stdout().lock();
                writeln!(out, "{text}")?;
                Ok(())
            }
            Sink::Directory(d) => write_file(&d.join(name), format!("{text}\n").as_bytes()),
        }
    }

    /// A table; only written when there is an output directory.
    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> CliResult<()> {
        match self {
            Sink::Stdout => Ok(()),
            Sink::Directory(d) => write_csv(&d.join(name), rows),
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::Invariant(format!("csv row for {}: {e}", path.display())))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Invariant(format!("csv buffer: {e}")))?;
    write_file(path, &bytes)
}

/// Reads an optional TOML config file into `T`, rejecting unknown keys.
pub fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::input(format!("{}: {e}", p.display())))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
}

impl Metadata {
    pub fn new(command: &'static str, seed: Option<u64>) -> Self {
        Metadata {
            tool: "moment-eq",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
        }
    }
}
