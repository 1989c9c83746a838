//! `vitcod compare`: speedup table across report files.

use std::path::PathBuf;

use clap::Args;
use vitcod::analysis::{compare, speedup_table_csv};
use vitcod::sim::SimReport;
use vitcod::{Error, Result};

use crate::out::write_atomic;

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Report JSON files (at least two).
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,

    /// Baseline report: matched against the report name or its prefix
    /// before ':'.
    #[arg(long, default_value = "s-stationary")]
    pub baseline: String,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn run(args: &CompareArgs) -> Result<()> {
    let mut named: Vec<(String, u64)> = Vec::new();
    for path in &args.reports {
        let report = SimReport::from_json_str(&std::fs::read_to_string(path)?)?;
        named.push((report.name.clone(), report.overlapped_total_cycles()));
    }

    let baseline_name = named
        .iter()
        .map(|(name, _)| name.clone())
        .find(|name| name == &args.baseline || name.split(':').next() == Some(&args.baseline))
        .ok_or_else(|| {
            Error::Argument(format!(
                "baseline '{}' not among the report names: {}",
                args.baseline,
                named
                    .iter()
                    .map(|(n, _)| n.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;

    let rows = compare(&named, &baseline_name)?;
    println!(
        "{:<28} {:>16} {:>10}",
        "name", "overlapped_cycles", "speedup"
    );
    for row in &rows {
        println!(
            "{:<28} {:>16} {:>10.4}",
            row.name, row.overlapped_total_cycles, row.speedup
        );
    }
    if baseline_name.starts_with("s-stationary") {
        println!(
            "note: speedups are vs. the dense S-stationary model, a simplified \
             baseline; they are not comparable to measured silicon."
        );
    }
    write_atomic(
        &args.out,
        "speedup.csv",
        speedup_table_csv(&rows).as_bytes(),
    )?;
    Ok(())
}
