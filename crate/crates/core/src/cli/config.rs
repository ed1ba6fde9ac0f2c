//! Flag parsing helpers and the merged run configuration.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::spectrum::DEFAULT_MAX_N;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Phase,
    Sweep,
    Exponents,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluator {
    Meanfield,
    Truncated,
    Exact,
    All,
}

impl Evaluator {
    pub fn meanfield(self) -> bool {
        matches!(self, Evaluator::Meanfield | Evaluator::All)
    }

    pub fn truncated(self) -> bool {
        matches!(self, Evaluator::Truncated | Evaluator::All)
    }

    pub fn exact(self) -> bool {
        matches!(self, Evaluator::Exact | Evaluator::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// `--n-list` accepts either a comma list or a JSON array in the file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NList {
    Text(String),
    Values(Vec<usize>),
}

/// Contents of `--config`; every key mirrors a flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gamma_x: Option<f64>,
    pub gamma_x_range: Option<String>,
    pub gamma_y: Option<f64>,
    pub epsilon: Option<f64>,
    pub n: Option<usize>,
    pub n_list: Option<NList>,
    pub evaluator: Option<Evaluator>,
    pub special_line: Option<bool>,
    pub window: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub dump: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub drop_smallest: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub epsilon: f64,
    pub gamma_y: f64,
    pub gamma_x: Vec<f64>,
    pub n_list: Vec<usize>,
    pub evaluator: Evaluator,
    pub special_line: bool,
    pub window: Option<(f64, f64)>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: Option<usize>,
    pub seed: u64,
    pub dump: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub drop_smallest: bool,
    pub max_n: usize,
}

/// `a:b:steps`, `steps` points including both ends.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("bad range '{s}', expected a:b:steps"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok(match steps {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..steps)
            .map(|i| a + (b - a) * i as f64 / (steps - 1) as f64)
            .collect(),
    })
}

/// `a:b` search window.
pub fn parse_window(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("bad window '{s}', expected a:b with a < b"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

/// Comma list of sizes, each either an integer or `2^k`.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_size(t.trim()))
        .collect()
}

fn parse_size(t: &str) -> Result<usize, CliError> {
    let bad = || CliError::Config(format!("bad size '{t}'"));
    if let Some((base, exp)) = t.split_once('^') {
        let base: usize = base.parse().map_err(|_| bad())?;
        let exp: u32 = exp.parse().map_err(|_| bad())?;
        base.checked_pow(exp).ok_or_else(bad)
    } else {
        t.parse().map_err(|_| bad())
    }
}

/// Safety cap on `N`, overridable through `LIPKIN_MAX_N`.
pub fn max_n_from_env(value: Option<String>) -> Result<usize, CliError> {
    match value {
        None => Ok(DEFAULT_MAX_N),
        Some(v) => v
            .trim()
            .parse()
            .ok()
            .filter(|&n: &usize| n > 0)
            .ok_or_else(|| CliError::Config(format!("LIPKIN_MAX_N must be a positive integer, got '{v}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-2:0:5").unwrap(), vec![-2.0, -1.5, -1.0, -0.5, 0.0]);
        assert_eq!(parse_range("1:2:1").unwrap(), vec![1.0]);
        assert!(parse_range("1:2:0").unwrap().is_empty());
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("a:2:3").is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_n_list("2^10, 2^11,3000").unwrap(), vec![1024, 2048, 3000]);
        assert!(parse_n_list("2^x").is_err());
        assert!(parse_n_list("2^99").is_err());
        assert!(parse_n_list("").unwrap().is_empty());
    }

    #[test]
    fn windows() {
        assert_eq!(parse_window("-1.5:-0.5").unwrap(), (-1.5, -0.5));
        assert!(parse_window("1:1").is_err());
        assert!(parse_window("1").is_err());
    }

    #[test]
    fn env_cap() {
        assert_eq!(max_n_from_env(None).unwrap(), DEFAULT_MAX_N);
        assert_eq!(max_n_from_env(Some("500".into())).unwrap(), 500);
        assert!(max_n_from_env(Some("0".into())).is_err());
        assert!(max_n_from_env(Some("lots".into())).is_err());
    }

    #[test]
    fn file_config_rejects_unknown_keys() {
        let ok: FileConfig = serde_json::from_str(r#"{"gamma_y": 2.0, "n_list": [8, 16]}"#).unwrap();
        assert_eq!(ok.n_list, Some(NList::Values(vec![8, 16])));
        assert!(serde_json::from_str::<FileConfig>(r#"{"gama_y": 2.0}"#).is_err());
    }
}
