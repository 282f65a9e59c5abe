use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::ExperimentResult;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "period,mean_throughput,sm_fraction,mean_alpha_ratio,policy";

const SIGNIFICANT_DIGITS: i32 = 9;

/// Plain decimal notation with nine significant digits; `NaN` for NaN.
pub fn format_decimal(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (SIGNIFICANT_DIGITS - 1) as usize, x);
    let exponent: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    let decimals = (SIGNIFICANT_DIGITS - 1 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    if result.periods.is_empty() {
        return Err(Error::Structural("no periods to write".into()));
    }
    let policy = result.policy().name();
    let mut text = String::with_capacity(64 * (result.periods.len() + 1));
    text.push_str(CSV_HEADER);
    text.push('\n');
    for p in &result.periods {
        writeln!(
            text,
            "{},{},{},{},{policy}",
            p.t,
            format_decimal(p.mean_throughput),
            format_decimal(p.sm_fraction),
            format_decimal(p.mean_alpha_ratio)
        )
        .expect("writing to a string");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The fully resolved configuration, as TOML.
pub fn write_manifest(result: &ExperimentResult, path: &Path) -> Result<()> {
    let text = format!(
        "# relaymatch {}\n# policy = {}, seed = {}\n{}",
        env!("CARGO_PKG_VERSION"),
        result.policy(),
        result.config.experiment.seed,
        result.config.to_toml_string()
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `<policy>.csv` and `<policy>.manifest.toml` into `dir`, creating
/// it if needed. Returns the CSV path.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let policy = result.policy().name();
    let csv = dir.join(format!("{policy}.csv"));
    emit_csv(result, &csv)?;
    write_manifest(result, &dir.join(format!("{policy}.manifest.toml")))?;
    Ok(csv)
}
