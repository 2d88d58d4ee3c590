use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsys::commands::{self, CliError, CliResult, Options};
use lsys::report::write_report;
use lsys::spec::{parse_assignments, Spec};
use lsys::scenarios;
use lsys_core::Tolerances;
use serde_json::Value;

/// Analysis, simulation and symmetry checks for linearly singular and
/// generalized nonholonomic systems.
#[derive(Parser, Debug)]
#[command(name = "lsys", version)]
struct Cli {
    /// Run the declared checks of every built-in scenario.
    #[arg(long)]
    self_test: bool,

    /// Relative factor of the rank threshold.
    #[arg(long, global = true, value_name = "X")]
    tol_rank: Option<f64>,

    /// Relative factor of the image-membership threshold.
    #[arg(long, global = true, value_name = "X")]
    tol_img: Option<f64>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct Source {
    /// Built-in scenario name (see `scenario --list`).
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    scenario: Option<String>,

    /// Path to a `.lss` file.
    #[arg(long)]
    spec: Option<PathBuf>,

    /// Parameter overrides, `name=expr,...`; may be repeated.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ranks, consistency, classification, multipliers and constrained field per point.
    Analyze {
        #[command(flatten)]
        source: Source,
        /// Point as `name=value,...`; may be repeated. Defaults to sampled points.
        #[arg(long)]
        at: Vec<String>,
        /// Number of sampled points when no `--at` is given.
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Depth limit of the constraint algorithm.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the (constrained) dynamics and write a CSV trajectory.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Initial point as `name=value,...`.
        #[arg(long)]
        x0: String,
        #[arg(long, allow_negative_numbers = true)]
        t1: f64,
        #[arg(long, allow_negative_numbers = true)]
        dt: f64,
        /// CSV destination; a summary is then printed on stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the `[symmetry]` candidates on sampled points.
    CheckSymmetry {
        #[command(flatten)]
        source: Source,
        /// Only this candidate.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the `[constant]` candidates on sampled points of the constraint set.
    CheckConstant {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List or print the built-in scenarios.
    Scenario {
        #[arg(long)]
        list: bool,
        /// Print the source of this scenario.
        name: Option<String>,
    },
}

fn load(source: &Source) -> CliResult<Spec> {
    let mut overrides = Vec::new();
    for p in &source.params {
        overrides.extend(parse_assignments(p)?);
    }
    Ok(match (&source.scenario, &source.spec) {
        (Some(name), _) => scenarios::load(name, &overrides)?,
        (None, Some(path)) => Spec::load(path, &overrides)?,
        (None, None) => return Err(CliError::Usage("one of --scenario or --spec is required".into())),
    })
}

fn emit(report: &Value, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => write_report(BufWriter::new(File::create(path)?), report)?,
        None => write_report(io::stdout().lock(), report)?,
    }
    Ok(())
}

fn tolerance(value: Option<f64>, default: f64, flag: &str) -> CliResult<f64> {
    match value {
        None => Ok(default),
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(CliError::Usage(format!("{flag} must be positive, got {v}"))),
    }
}

fn run(cli: Cli) -> CliResult<u8> {
    let defaults = Tolerances::default();
    let tol = Tolerances {
        rank_rel: tolerance(cli.tol_rank, defaults.rank_rel, "--tol-rank")?,
        img_rel: tolerance(cli.tol_img, defaults.img_rel, "--tol-img")?,
    };
    let mut opts = Options { tol, ..Options::default() };
    let verdict = |passed: bool| if passed { 0 } else { 1 };

    if cli.self_test {
        if cli.command.is_some() {
            return Err(CliError::Usage("--self-test takes no subcommand".into()));
        }
        let outcome = commands::self_test(&opts)?;
        emit(&outcome.report, None)?;
        return Ok(verdict(outcome.passed));
    }

    match cli.command {
        None => Err(CliError::Usage("no command given (try --help)".into())),
        Some(Command::Analyze { source, at, points, levels, out }) => {
            let spec = load(&source)?;
            opts.levels = levels;
            let pts = if at.is_empty() {
                commands::sample_points(&spec, points, &opts)?
            } else {
                commands::points_from_assignments(&spec, &at, &opts)?
            };
            emit(&commands::analyze(&spec, &pts, &opts)?, out.as_ref())?;
            Ok(0)
        }
        Some(Command::Simulate { source, x0, t1, dt, out }) => {
            let spec = load(&source)?;
            let x0 = commands::points_from_assignments(&spec, &[x0], &opts)?.remove(0);
            let (traj, summary) = commands::simulate(&spec, &x0, t1, dt, &opts)?;
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(&path)?);
                    traj.write_csv(&mut w)?;
                    w.flush()?;
                    emit(&summary, None)?;
                }
                None => {
                    let mut w = io::stdout().lock();
                    traj.write_csv(&mut w)?;
                }
            }
            Ok(0)
        }
        Some(Command::CheckSymmetry { source, name, points, out }) => {
            let spec = load(&source)?;
            let outcome = commands::check_symmetries(&spec, name.as_deref(), points, &opts)?;
            emit(&outcome.report, out.as_ref())?;
            Ok(verdict(outcome.passed))
        }
        Some(Command::CheckConstant { source, name, points, out }) => {
            let spec = load(&source)?;
            let outcome = commands::check_constants(&spec, name.as_deref(), points, &opts)?;
            emit(&outcome.report, out.as_ref())?;
            Ok(verdict(outcome.passed))
        }
        Some(Command::Scenario { list, name }) => {
            let mut stdout = io::stdout().lock();
            match (list, name) {
                (true, None) => {
                    for s in scenarios::SCENARIOS {
                        writeln!(stdout, "{:<16}{}", s.name, s.summary)?;
                    }
                }
                (false, Some(name)) => {
                    let sc = scenarios::find(&name).ok_or_else(|| CliError::Usage(format!("unknown scenario `{name}`")))?;
                    stdout.write_all(sc.text.as_bytes())?;
                }
                _ => return Err(CliError::Usage("use `scenario --list` or `scenario NAME`".into())),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
