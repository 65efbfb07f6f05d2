//! Command-line harness around `mamba-core`: training runs from config
//! files, the exact verification suites, oracle fabrication and export of
//! seed-aggregated learning curves.

pub mod config;
pub mod export;
pub mod oracles;
pub mod run;

use std::str::FromStr;

use anyhow::Result;
use mamba_core::verify::{all_passed, run_suite, Suite};

/// Prints the check table and reports whether every check passed.
pub fn cmd_verify(suite: &str, seed: u64) -> Result<bool> {
    let suite = Suite::from_str(suite)?;
    let rows = run_suite(suite, seed)?;
    println!(
        "{:<54} {:>7} {:>11} {:>2} {:<9} result",
        "check", "n", "residual", "", "tolerance"
    );
    for row in &rows {
        println!("{row}");
    }
    Ok(all_passed(&rows))
}
