//! Command-line front end.
//!
//! ```text
//! bandit-lab run    [--scenario NAME] [--arms N] [--horizon T] [--runs R]
//!                   [--seed S] [--out PATH] [--policies a,b,...]
//! bandit-lab sweep  [same flags; --scenario is ignored]
//! bandit-lab verify [--seed S] [--arms N] [--horizon T] [--runs R]
//! ```
//!
//! Exit statuses: 0 success, 1 verification failure, 2 usage error, 3 I/O
//! error. `BANDIT_LAB_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};

use crate::env::{format_f64, write_atomically};
use crate::error::{Error, Result};
use crate::harness::{
    run_experiment, sweep_static_r, ExperimentResult, ExperimentSpec, Scenario, SweepRow,
    DEFAULT_SWEEP_GRID,
};
use crate::policies::PolicyKind;
use crate::verify::{run_all, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const THREADS_ENV: &str = "BANDIT_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "bandit-lab",
    version,
    about = "Adversarial bandits with side observations"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Run one scenario and write mean/std regret curves as CSV.
    Run(CommonArgs),
    /// Final regret over a grid of constant observation rates.
    Sweep(CommonArgs),
    /// Run the analytic and Monte Carlo self-checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long, default_value = "static006", value_parser = PossibleValuesParser::new(Scenario::CATALOG_NAMES))]
    scenario: String,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(2..))]
    arms: u32,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
    horizon: u32,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "exp3res,exp3r,exp3,oracle",
        value_parser = parse_policy
    )]
    policies: Vec<PolicyKind>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Perturb the closed-form second moment by this relative amount.
    #[arg(long, hide = true, default_value_t = 0.0)]
    inject_fault: f64,
}

fn parse_policy(s: &str) -> std::result::Result<PolicyKind, String> {
    s.parse::<PolicyKind>()
        .map_err(|_| format!("expected one of exp3res, exp3r, exp3, oracle; got {s:?}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Verify,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub scenario: String,
    pub arms: usize,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub out_path: Option<PathBuf>,
    pub policies: Vec<PolicyKind>,
    pub inject_fault: f64,
}

impl CliConfig {
    pub fn experiment_spec(&self, threads: Option<usize>) -> ExperimentSpec {
        let mut policies = self.policies.clone();
        policies.sort();
        policies.dedup();
        ExperimentSpec {
            n_arms: self.arms,
            horizon: self.horizon,
            runs: self.runs,
            scenario: Scenario::by_name(&self.scenario).expect("validated by the parser"),
            policies,
            master_seed: self.seed,
            threads,
        }
    }
}

/// Parses a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (command, common, inject_fault) = match cli.command {
        CommandArgs::Run(c) => (Command::Run, c, 0.0),
        CommandArgs::Sweep(c) => (Command::Sweep, c, 0.0),
        CommandArgs::Verify(v) => (Command::Verify, v.common, v.inject_fault),
    };
    Ok(CliConfig {
        command,
        scenario: common.scenario,
        arms: common.arms as usize,
        horizon: common.horizon as usize,
        runs: common.runs as usize,
        seed: common.seed,
        out_path: common.out,
        policies: common.policies,
        inject_fault,
    })
}

/// Reads the worker cap from the environment.
pub fn threads_from_env() -> std::result::Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("{THREADS_ENV}: {e}")),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            )),
        },
    }
}

/// Regret curves as CSV: `scenario,policy,t,mean_regret,std_regret`, rows
/// sorted by policy name then round, `t` counted from 1.
pub fn render_curves_csv(result: &ExperimentResult) -> String {
    let mut curves: Vec<_> = result.curves.iter().collect();
    curves.sort_by_key(|c| c.kind.name());
    let mut out = String::from("scenario,policy,t,mean_regret,std_regret\n");
    for c in curves {
        for (t, (m, s)) in c.mean.iter().zip(&c.std).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                result.scenario,
                c.kind.name(),
                t + 1,
                format_f64(*m),
                format_f64(*s)
            ));
        }
    }
    out
}

/// Sweep table as CSV: `r,policy,mean_final_regret,std_final_regret`, rows in
/// grid order then policy name.
pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut rows: Vec<_> = rows.iter().collect();
    rows.sort_by(|a, b| a.r.total_cmp(&b.r).then(a.kind.name().cmp(b.kind.name())));
    let mut out = String::from("r,policy,mean_final_regret,std_final_regret\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_f64(row.r),
            row.kind.name(),
            format_f64(row.mean_final_regret),
            format_f64(row.std_final_regret)
        ));
    }
    out
}

/// Writes regret curves to `path` (see [`render_curves_csv`]).
pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_atomically(path, render_curves_csv(result).as_bytes())
}

fn deliver(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_atomically(path, text.as_bytes()),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".to_string(),
                source,
            }),
    }
}

fn exit_for(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Csv { .. } | Error::Format { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Runs a parsed configuration and returns the process exit status.
pub fn execute(config: &CliConfig, threads: Option<usize>) -> i32 {
    let outcome = match config.command {
        Command::Run => run_experiment(&config.experiment_spec(threads))
            .and_then(|r| deliver(&render_curves_csv(&r), config.out_path.as_deref())),
        Command::Sweep => sweep_static_r(&config.experiment_spec(threads), &DEFAULT_SWEEP_GRID)
            .and_then(|rows| deliver(&render_sweep_csv(&rows), config.out_path.as_deref())),
        Command::Verify => {
            let opts = VerifyOptions {
                seed: config.seed,
                n_arms: config.arms,
                horizon: config.horizon,
                runs: config.runs,
                threads,
                lemma1_perturbation: config.inject_fault,
            };
            return match run_all(&opts) {
                Ok(reports) => {
                    for r in &reports {
                        println!("{r}");
                    }
                    if reports.iter().all(|r| r.passed) {
                        EXIT_OK
                    } else {
                        EXIT_VERIFY_FAILED
                    }
                }
                Err(e) => {
                    eprintln!("bandit-lab: {e}");
                    exit_for(&e)
                }
            };
        }
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("bandit-lab: {e}");
            exit_for(&e)
        }
    }
}

/// Entry point shared by the binary: parse, read the environment, execute.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("bandit-lab: {msg}");
            return EXIT_USAGE;
        }
    };
    execute(&config, threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::RegretCurve;

    fn argv(args: &[&str]) -> Vec<String> {
        std::iter::once("bandit-lab")
            .chain(args.iter().copied())
            .map(String::from)
            .collect()
    }

    #[test]
    fn run_with_scenario_takes_defaults() {
        let c = parse_args(argv(&["run", "--scenario", "static006"])).unwrap();
        assert_eq!(c.command, Command::Run);
        assert_eq!(c.scenario, "static006");
        assert_eq!((c.arms, c.horizon, c.runs, c.seed), (50, 500, 100, 0));
        assert_eq!(c.policies, PolicyKind::ALL.to_vec());
        assert_eq!(c.out_path, None);
    }

    #[test]
    fn zero_arms_is_a_usage_error() {
        let err = parse_args(argv(&["run", "--arms", "0"])).unwrap_err();
        assert!(err.use_stderr());
        assert!(err.to_string().contains("--arms"), "{err}");
        assert_eq!(main_with_args(argv(&["run", "--arms", "1"])), EXIT_USAGE);
    }

    #[test]
    fn sweep_with_seed() {
        let c = parse_args(argv(&["sweep", "--seed", "7"])).unwrap();
        assert_eq!(c.command, Command::Sweep);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn unknown_flags_and_values_are_rejected() {
        assert!(parse_args(argv(&["run", "--bogus", "1"])).is_err());
        assert!(parse_args(argv(&["run", "--scenario", "static1"])).is_err());
        let err = parse_args(argv(&["run", "--policies", "exp3,hedge"])).unwrap_err();
        assert!(err.to_string().contains("--policies"), "{err}");
        assert!(parse_args(argv(&[])).is_err());
    }

    #[test]
    fn policies_list() {
        let c = parse_args(argv(&["run", "--policies", "oracle,exp3res"])).unwrap();
        assert_eq!(
            c.policies,
            vec![PolicyKind::HedgeOracle, PolicyKind::Exp3Res]
        );
    }

    fn toy_result(horizon: usize) -> ExperimentResult {
        let mk = |kind, base: f64| RegretCurve {
            kind,
            mean: (0..horizon).map(|t| base + t as f64 / 3.0).collect(),
            std: (0..horizon).map(|t| 0.1 * t as f64).collect(),
            finals: vec![],
        };
        ExperimentResult {
            scenario: "static006".into(),
            curves: vec![
                mk(PolicyKind::HedgeOracle, 0.5),
                mk(PolicyKind::Exp3, 1.0 / 7.0),
            ],
        }
    }

    #[test]
    fn csv_layout() {
        let one = ExperimentResult {
            curves: toy_result(2).curves.into_iter().take(1).collect(),
            ..toy_result(2)
        };
        let text = render_curves_csv(&one);
        assert_eq!(text.lines().count(), 3);
        assert!(text.ends_with('\n'));
        let text = render_curves_csv(&toy_result(2));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scenario,policy,t,mean_regret,std_regret");
        assert!(lines[1].starts_with("static006,exp3,1,"));
        assert!(lines[3].starts_with("static006,oracle,1,"));
        assert_eq!(text, render_curves_csv(&toy_result(2)));
    }

    #[test]
    fn csv_round_trips_exactly() {
        let result = toy_result(5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        emit_csv(&result, &path).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let mut means: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
        for rec in reader.records() {
            let rec = rec.unwrap();
            means
                .entry(rec[1].to_string())
                .or_default()
                .push(rec[3].parse().unwrap());
        }
        for c in &result.curves {
            assert_eq!(means[c.kind.name()], c.mean);
        }
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("x.csv");
        let err = emit_csv(&toy_result(2), &path).unwrap_err();
        assert_eq!(exit_for(&err), EXIT_IO);
        assert!(err.to_string().contains("x.csv"));
        assert!(!path.exists());
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = vec![
            SweepRow {
                r: 1.0,
                kind: PolicyKind::Exp3,
                mean_final_regret: 2.0,
                std_final_regret: 0.5,
            },
            SweepRow {
                r: 0.1,
                kind: PolicyKind::HedgeOracle,
                mean_final_regret: 1.0,
                std_final_regret: 0.0,
            },
            SweepRow {
                r: 0.1,
                kind: PolicyKind::Exp3Res,
                mean_final_regret: 3.0,
                std_final_regret: 0.1,
            },
        ];
        let text = render_sweep_csv(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "r,policy,mean_final_regret,std_final_regret");
        assert!(lines[1].contains(",exp3res,"));
        assert!(lines[2].contains(",oracle,"));
        assert!(lines[3].contains(",exp3,"));
    }
}
