//! `panelks report`: render a results.csv back into the plain-text sector
//! table, p-values at three decimals, skipped sectors as comment lines.

use std::path::PathBuf;

use anyhow::{Context, Result};

use crate::table::{self, SkippedRow, TableRow};

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// A results.csv written by `panelks test`.
    #[arg(long)]
    pub input: PathBuf,
}

pub fn run(args: &ReportArgs) -> Result<()> {
    let mut rdr = csv::Reader::from_path(&args.input)
        .with_context(|| format!("cannot read {}", args.input.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: missing column {name:?}", args.input.display()))
    };
    let (sector, status) = (col("sector")?, col("status")?);
    let (p_value, n_amd, n_bmd, note) =
        (col("p_value")?, col("n_amd")?, col("n_bmd")?, col("note")?);

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |idx: usize| record.get(idx).unwrap_or("").to_string();
        if field(status) == "tested" {
            let row = (|| {
                Some(TableRow {
                    sector: field(sector),
                    p_value: record.get(p_value)?.parse().ok()?,
                    n_amd: record.get(n_amd)?.parse().ok()?,
                    n_bmd: record.get(n_bmd)?.parse().ok()?,
                })
            })()
            .with_context(|| {
                format!("{}: row {} is not a valid tested row", args.input.display(), i + 1)
            })?;
            rows.push(row);
        } else {
            skipped.push(SkippedRow { sector: field(sector), reason: field(note) });
        }
    }
    print!("{}", table::render(&rows, &skipped));
    Ok(())
}
