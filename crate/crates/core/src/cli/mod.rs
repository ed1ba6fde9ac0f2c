//! Batch front-end: `phase`, `sweep`, `exponents` and `compare`.
//!
//! Exit codes: 0 success, 2 configuration, 3 solver, 4 fit precondition,
//! 5 validation failure.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;

use crate::error::Error;
use config::{parse_n_list, parse_range, parse_window, Command, Evaluator, FileConfig, Format, NList, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_FIT: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;

const DEFAULT_N: usize = 100;
const DEFAULT_EXPONENT_SIZES: [usize; 5] = [1 << 10, 1 << 11, 1 << 12, 1 << 13, 1 << 14];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Core(e) => match e {
                Error::InvalidParams(_)
                | Error::RegionIII
                | Error::NotSpecialLine { .. }
                | Error::NotDeformed { .. }
                | Error::EmptyWindow { .. }
                | Error::SurfaceDomain { .. } => EXIT_CONFIG,
                Error::TooFewPoints(_) | Error::NonPositive { .. } => EXIT_FIT,
                _ => EXIT_SOLVER,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lipkin", version, about = "Lipkin model: mean field, Bogoliubov and exact finite-N spectra")]
#[command(allow_negative_numbers = true)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,

    #[arg(long)]
    pub gamma_x: Option<f64>,
    /// `a:b:steps`, inclusive of both ends
    #[arg(long, value_name = "A:B:STEPS", allow_hyphen_values = true)]
    pub gamma_x_range: Option<String>,
    #[arg(long)]
    pub gamma_y: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// comma list, entries like `1024` or `2^10`
    #[arg(long, value_name = "LIST")]
    pub n_list: Option<String>,
    #[arg(long, value_enum)]
    pub evaluator: Option<Evaluator>,
    /// pin gamma_y to gamma_c (exponents)
    #[arg(long)]
    pub special_line: bool,
    /// peak-search window `a:b` (exponents)
    #[arg(long, value_name = "A:B", allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// write parity blocks and ground vectors of exact evaluations
    #[arg(long, value_name = "PATH")]
    pub dump: Option<PathBuf>,
    /// JSON file with the same keys as the flags; flags win
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// override every tolerance of `compare`
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// discard the smallest N before fitting (exponents)
    #[arg(long)]
    pub drop_smallest: bool,
}

impl Args {
    /// Merges flags over the optional config file.
    pub fn resolve(self, env_max_n: Option<String>) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let max_n = config::max_n_from_env(env_max_n)?;

        let epsilon = self.epsilon.or(file.epsilon).unwrap_or(1.0);
        let gamma_y = self.gamma_y.or(file.gamma_y).unwrap_or(1.0);

        // the most specific source wins: flag range, flag value, file range, file value
        let gamma_x = if let Some(r) = &self.gamma_x_range {
            parse_range(r)?
        } else if let Some(g) = self.gamma_x {
            vec![g]
        } else if let Some(r) = &file.gamma_x_range {
            parse_range(r)?
        } else if let Some(g) = file.gamma_x {
            vec![g]
        } else {
            match self.command {
                Command::Phase | Command::Sweep => {
                    return Err(CliError::Config("--gamma-x or --gamma-x-range is required".into()))
                }
                _ => Vec::new(),
            }
        };
        if matches!(self.command, Command::Phase | Command::Sweep) && gamma_x.is_empty() {
            return Err(CliError::Config("gamma_x grid is empty".into()));
        }

        let n_list = if let Some(s) = &self.n_list {
            parse_n_list(s)?
        } else if let Some(n) = self.n {
            vec![n]
        } else if let Some(l) = &file.n_list {
            match l {
                NList::Text(s) => parse_n_list(s)?,
                NList::Values(v) => v.clone(),
            }
        } else if let Some(n) = file.n {
            vec![n]
        } else {
            match self.command {
                Command::Exponents => DEFAULT_EXPONENT_SIZES.to_vec(),
                _ => vec![DEFAULT_N],
            }
        };
        if n_list.is_empty() {
            return Err(CliError::Config("N list is empty".into()));
        }
        if let Some(&n) = n_list.iter().find(|&&n| n == 0) {
            return Err(CliError::Config(format!("N must be positive, got {n}")));
        }
        if let Some(&n) = n_list.iter().find(|&&n| n > max_n) {
            return Err(CliError::Config(format!(
                "N = {n} exceeds the safety cap {max_n} (set LIPKIN_MAX_N to raise it)"
            )));
        }

        let window = match self.window.as_ref().or(file.window.as_ref()) {
            Some(w) => Some(parse_window(w)?),
            None => None,
        };
        let jobs = self.jobs.or(file.jobs);
        if jobs == Some(0) {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        let tolerance = self.tolerance.or(file.tolerance);
        if let Some(t) = tolerance {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::Config(format!("bad tolerance {t}")));
            }
        }

        let rc = RunConfig {
            command: self.command,
            epsilon,
            gamma_y,
            gamma_x,
            n_list,
            evaluator: self.evaluator.or(file.evaluator).unwrap_or(Evaluator::All),
            special_line: self.special_line || file.special_line.unwrap_or(false),
            window,
            out: self.out.or(file.out),
            format: self.format.or(file.format).unwrap_or(match self.command {
                // the validation report is a JSON document unless asked otherwise
                Command::Compare => Format::Json,
                _ => Format::Csv,
            }),
            jobs,
            seed: self.seed.or(file.seed).unwrap_or(0),
            dump: self.dump.or(file.dump),
            tolerance,
            drop_smallest: self.drop_smallest || file.drop_smallest.unwrap_or(false),
            max_n,
        };
        // reject bad couplings before any work starts
        crate::model::ModelParams::new(rc.epsilon, rc.gamma_x.first().copied().unwrap_or(0.0), rc.gamma_y, 1)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(g) = rc.gamma_x.iter().find(|g| !g.is_finite()) {
            return Err(CliError::Config(format!("gamma_x must be finite, got {g}")));
        }
        Ok(rc)
    }
}

/// Output of a command: the main payload plus an optional side file.
pub struct Output {
    pub main: String,
    /// Written next to `--out` with this suffix, or to stderr without it.
    pub side: Option<(&'static str, String)>,
    pub exit_code: i32,
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, env_max_n: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(args, env_max_n) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lipkin: {e}");
            e.exit_code()
        }
    }
}

pub fn run_from_env() -> i32 {
    run(std::env::args_os(), std::env::var("LIPKIN_MAX_N").ok())
}

fn execute(args: Args, env_max_n: Option<String>) -> Result<i32, CliError> {
    let cfg = args.resolve(env_max_n)?;
    let out = commands::dispatch(&cfg)?;
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, &out.main)?;
            if let Some((suffix, text)) = &out.side {
                let mut side = path.clone().into_os_string();
                side.push(suffix);
                std::fs::write(side, text)?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(out.main.as_bytes())?;
            lock.flush()?;
            if let Some((_, text)) = &out.side {
                eprint!("{text}");
            }
        }
    }
    Ok(out.exit_code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        let mut v = vec!["lipkin"];
        v.extend_from_slice(args);
        Args::try_parse_from(v).unwrap().resolve(None)
    }

    #[test]
    fn defaults_and_overrides() {
        let c = parse(&["phase", "--gamma-x=-2"]).unwrap();
        assert_eq!((c.epsilon, c.gamma_y, c.n_list.clone()), (1.0, 1.0, vec![DEFAULT_N]));
        assert_eq!(c.gamma_x, vec![-2.0]);
        let c = parse(&["exponents", "--special-line"]).unwrap();
        assert_eq!(c.n_list, DEFAULT_EXPONENT_SIZES.to_vec());
        assert!(c.special_line);
        let c = parse(&["sweep", "--gamma-x-range", "-2:0:3", "--n", "10"]).unwrap();
        assert_eq!(c.gamma_x, vec![-2.0, -1.0, 0.0]);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(parse(&["sweep", "--gamma-x-range=-2:0:0"]), Err(CliError::Config(_))));
        assert!(matches!(parse(&["phase"]), Err(CliError::Config(_))));
        assert!(matches!(parse(&["phase", "--gamma-x=1", "--epsilon=-1"]), Err(CliError::Config(_))));
        assert!(matches!(parse(&["phase", "--gamma-x=1", "--n=0"]), Err(CliError::Config(_))));
        assert!(matches!(parse(&["exponents", "--window=1:0"]), Err(CliError::Config(_))));
        let capped = Args::try_parse_from(["lipkin", "phase", "--gamma-x=1", "--n=64"])
            .unwrap()
            .resolve(Some("32".into()));
        assert!(matches!(capped, Err(CliError::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::Core(Error::TooFewPoints(1)).exit_code(), EXIT_FIT);
        assert_eq!(
            CliError::Core(Error::Eigensolver {
                block: crate::Parity::Even,
                n_atoms: 4
            })
            .exit_code(),
            EXIT_SOLVER
        );
        assert_eq!(CliError::Validation("x".into()).exit_code(), EXIT_VALIDATION);
    }
}
