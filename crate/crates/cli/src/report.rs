//! Report envelopes, output files and the summary table.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use sfit::engine::SfitFirstOrderReport;

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct Envelope<'a, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config_hash: String,
    pub config: &'a RunConfig,
    pub seeds: &'a [(&'a str, u64)],
    /// Seconds since the Unix epoch. The only field that differs between
    /// otherwise identical runs, and not part of the hash.
    pub generated_at: u64,
    pub result: &'a R,
}

/// SHA-256 of the config's JSON form.
pub fn config_hash(config: &RunConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_report<R: Serialize>(
    path: &Path,
    command: &str,
    config: &RunConfig,
    seeds: &[(&str, u64)],
    result: &R,
) -> Result<(), CliError> {
    let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config_hash: config_hash(config),
        config,
        seeds,
        generated_at,
        result,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(CliError::runtime)?;
    text.push('\n');
    write_file(path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Four significant digits, switching to exponent form outside `[1e-3, 1e5)`.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-3..5).contains(&mag) {
        return format!("{x:.3e}");
    }
    format!("{x:.*}", (3 - mag).max(0) as usize)
}

/// Significant features by decreasing statistic.
pub fn summary_table(report: &SfitFirstOrderReport) -> String {
    let ranked = report.ranking();
    let mut out = format!(
        "first order: {} of {} significant (alpha {}, beta {}, n2 {}, loss {})\n",
        ranked.len(),
        report.features.len(),
        sig4(report.alpha),
        sig4(report.beta),
        report.n2,
        report.loss
    );
    if ranked.is_empty() {
        return out;
    }
    let width = ranked.iter().map(|f| f.name.len()).max().unwrap_or(7).max(7);
    out.push_str(&format!("{:<width$}  {:>10}  {:>10}  {:>23}  {:>6}\n", "feature", "median", "p-value", "interval", "n+"));
    for f in ranked {
        let ci = f.outcome.ci.as_ref().map_or("-".to_string(), |c| format!("[{}, {}]", sig4(c.lower), sig4(c.upper)));
        out.push_str(&format!(
            "{:<width$}  {:>10}  {:>10}  {:>23}  {:>6}\n",
            f.name,
            sig4(f.outcome.statistic),
            sig4(f.outcome.p_value),
            ci,
            f.outcome.n_plus
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(1.131_72), "1.132");
        assert_eq!(sig4(0.224_49), "0.2245");
        assert_eq!(sig4(0.048_01), "0.04801");
        assert_eq!(sig4(1234.4), "1234");
        assert_eq!(sig4(-12.345), "-12.35");
        assert_eq!(sig4(1.5e-7), "1.500e-7");
        assert_eq!(sig4(0.0), "0");
    }

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.test.alpha = 0.1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
