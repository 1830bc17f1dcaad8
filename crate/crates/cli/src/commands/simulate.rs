use std::path::PathBuf;

use moment_eq::empirics::{generate, SyntheticConfig};
use moment_eq::Family;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{read_config, write_csv, write_file, Metadata};

#[derive(clap::Args)]
pub struct Args {
    /// Output bid-record CSV.
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth JSON; defaults to `<output stem>.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// TOML generator configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    auctions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Belief family of the generating equilibrium.
    #[arg(long)]
    family: Option<Family>,
    /// Share of all-fringe auctions.
    #[arg(long)]
    fringe_share: Option<f64>,
    /// Share of auctions mixing fringe and non-fringe bidders.
    #[arg(long)]
    mixed_share: Option<f64>,
    #[arg(long)]
    outlier_probability: Option<f64>,
}

#[derive(Serialize)]
struct Truth<'a, T: Serialize> {
    metadata: Metadata,
    #[serde(flatten)]
    truth: &'a T,
}

pub fn run(args: Args) -> CliResult<()> {
    let mut config: SyntheticConfig = read_config(args.config.as_deref())?;
    if let Some(a) = args.auctions {
        config.auctions = a;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(f) = args.family {
        config.family = f;
    }
    if let Some(s) = args.fringe_share {
        config.fringe_share = s;
    }
    if let Some(s) = args.mixed_share {
        config.mixed_share = s;
    }
    if let Some(p) = args.outlier_probability {
        config.outlier_probability = p;
    }
    let (records, truth) = generate(&config)?;
    let truth_path = args.truth.clone().unwrap_or_else(|| {
        let stem = args
            .output
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "synthetic".into());
        args.output.with_file_name(format!("{stem}.truth.json"))
    });
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    }
    write_csv(&args.output, &records)?;
    let text = serde_json::to_string_pretty(&Truth {
        metadata: Metadata::new("simulate", Some(config.seed)),
        truth: &truth,
    })
    .map_err(|e| CliError::Invariant(format!("serializing truth: {e}")))?;
    write_file(&truth_path, format!("{text}\n").as_bytes())?;
    eprintln!(
        "wrote {} bids from {} auctions to {}",
        records.len(),
        config.auctions,
        args.output.display()
    );
    Ok(())
}
