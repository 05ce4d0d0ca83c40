//! `ingest`: convert a raw observation matrix into a dataset file. The
//! input CSV has one observation row per time step and one column per node,
//! no header; fields are `+1`/`1`, `-1`, or blank (missing). Missing entries
//! are handled by the selected policy, then `--bin B` groups each run of
//! `B` consecutive surviving rows into one timestamp with `B` replicates
//! (the final group may be smaller).

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ndarray::Array2;

use tvising::{Error, Result, SpinDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MissingPolicy {
    /// Drop any row containing a missing entry.
    Drop,
    /// Impute each missing entry with the majority of its column group
    /// within the same row; rows where a whole group is missing or the
    /// group vote ties are dropped (no majority exists).
    GroupMajority,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw CSV input: ±1 or blank fields, one row per time step, no header
    #[arg(long)]
    pub input: PathBuf,

    /// Dataset output (.csv or .json)
    #[arg(long)]
    pub output: PathBuf,

    /// Missing-entry policy
    #[arg(long = "missing-policy", value_enum, default_value_t = MissingPolicy::Drop)]
    pub missing_policy: MissingPolicy,

    /// Column-group labels, one per line (required by group-majority)
    #[arg(long)]
    pub groups: Option<PathBuf>,

    /// Consecutive rows binned into one timestamp
    #[arg(long, default_value_t = 1)]
    pub bin: usize,
}

pub fn run(args: &IngestArgs) -> Result<()> {
    if args.bin == 0 {
        return Err(Error::InvalidConfig("--bin must be ≥ 1".into()));
    }
    let rows = read_raw_matrix(&args.input)?;
    let p = rows[0].len();

    let groups = match args.missing_policy {
        MissingPolicy::Drop => None,
        MissingPolicy::GroupMajority => {
            let path = args.groups.as_ref().ok_or_else(|| {
                Error::InvalidConfig(
                    "--missing-policy group-majority requires --groups".into(),
                )
            })?;
            Some(read_groups(path, p)?)
        }
    };

    let total = rows.len();
    let resolved: Vec<Vec<i8>> = rows
        .into_iter()
        .filter_map(|row| resolve_row(row, groups.as_deref()))
        .collect();
    let dropped = total - resolved.len();
    if resolved.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "all {total} rows were dropped by the missing-entry policy"
        )));
    }

    let blocks: Vec<Array2<i8>> = resolved
        .chunks(args.bin)
        .map(|chunk| {
            let flat: Vec<i8> = chunk.iter().flatten().copied().collect();
            Array2::from_shape_vec((chunk.len(), p), flat)
                .map_err(|e| Error::DimensionMismatch(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let dataset = SpinDataset::new(p, blocks)?;

    crate::support::write_dataset(&args.output, &dataset)?;
    println!(
        "read {} rows, dropped {}, wrote n = {} timestamps (bin {}) × p = {} -> {}",
        total,
        dropped,
        dataset.n(),
        args.bin,
        p,
        args.output.display()
    );
    Ok(())
}

/// Parse the raw matrix: `None` marks a missing entry. Any value other than
/// ±1/blank — including `0` — is rejected with its location.
fn read_raw_matrix(path: &PathBuf) -> Result<Vec<Vec<Option<i8>>>> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut rows: Vec<Vec<Option<i8>>> = Vec::new();
    let mut width = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = idx + 1;
        if idx == 0 {
            width = record.len();
            if width < 2 {
                return Err(Error::InvalidConfig(
                    "ingest input needs ≥ 2 columns (one per node)".into(),
                ));
            }
        } else if record.len() != width {
            return Err(Error::DimensionMismatch(format!(
                "row {row_no} has {} fields, expected {width}",
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (c, field) in record.iter().enumerate() {
            let trimmed = field.trim();
            let cell = match trimmed {
                "" => None,
                "1" | "+1" => Some(1),
                "-1" => Some(-1),
                _ => {
                    return Err(Error::InvalidSpin {
                        row: row_no,
                        column: c + 1,
                        value: trimmed.to_string(),
                    })
                }
            };
            row.push(cell);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig("ingest input has no rows".into()));
    }
    Ok(rows)
}

/// One group label per line, in column order.
fn read_groups(path: &PathBuf, p: usize) -> Result<Vec<String>> {
    let labels: Vec<String> = fs::read_to_string(path)?
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    if labels.len() != p {
        return Err(Error::InvalidConfig(format!(
            "groups file has {} labels but the input has {p} columns",
            labels.len()
        )));
    }
    Ok(labels)
}

/// Complete one row under the policy; `None` means the row is dropped.
/// `groups == None` is the drop policy: only fully observed rows survive.
fn resolve_row(row: Vec<Option<i8>>, groups: Option<&[String]>) -> Option<Vec<i8>> {
    let Some(groups) = groups else {
        return row.into_iter().collect::<Option<Vec<i8>>>();
    };
    let mut filled = Vec::with_capacity(row.len());
    for (c, cell) in row.iter().enumerate() {
        match cell {
            Some(v) => filled.push(*v),
            None => {
                let vote: i64 = row
                    .iter()
                    .zip(groups)
                    .filter(|&(_, g)| *g == groups[c])
                    .filter_map(|(cell, _)| cell.map(i64::from))
                    .sum();
                match vote.signum() {
                    1 => filled.push(1),
                    -1 => filled.push(-1),
                    _ => return None,
                }
            }
        }
    }
    Some(filled)
}
