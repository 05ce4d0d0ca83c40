//! `generate`: sample a synthetic piece-wise constant scenario and write the
//! ground-truth model plus train/holdout datasets. Re-running with the same
//! config reproduces every file byte for byte.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use tvising::io::{write_dataset_csv, write_dataset_json, write_model};
use tvising::{generate_scenario, Result, ScenarioConfig};

use crate::support;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scenario TOML config
    #[arg(long)]
    pub config: PathBuf,

    /// Output directory (created if absent)
    #[arg(long = "output-dir")]
    pub output_dir: PathBuf,
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let config: ScenarioConfig = support::read_toml(&args.config)?;
    let scenario = generate_scenario(&config)?;
    fs::create_dir_all(&args.output_dir)?;

    write_model(args.output_dir.join("model.json"), &scenario.model)?;
    write_dataset_csv(args.output_dir.join("train.csv"), &scenario.train)?;
    write_dataset_json(args.output_dir.join("train.json"), &scenario.train)?;
    if let Some(holdout) = &scenario.holdout {
        write_dataset_csv(args.output_dir.join("holdout.csv"), holdout)?;
        write_dataset_json(args.output_dir.join("holdout.json"), holdout)?;
    }

    println!(
        "generated p = {}, n = {}, change points {:?}, {} train obs/timestamp{} -> {}",
        config.p,
        config.n,
        scenario.model.change_points(),
        config.obs_per_timestamp,
        if scenario.holdout.is_some() {
            format!(" (+{} holdout)", config.holdout_per_timestamp)
        } else {
            String::new()
        },
        args.output_dir.display()
    );
    Ok(())
}
