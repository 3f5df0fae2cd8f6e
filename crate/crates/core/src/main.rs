use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corrvote::config::load_config;
use corrvote::experiments::{sweep, Figure, Parameter, ScenarioConfig, SweepResult, DEFAULT_SEED};
use corrvote::report::{summary_table, write_csv, write_diagnostics};
use corrvote::rule::Rule;
use corrvote::Error;

#[derive(Debug, Parser)]
#[command(name = "corrvote", version, about = "Aggregate scores from correlated noisy agents and evaluate the rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one of the catalogued experiments and write `<figure>.csv`.
    Reproduce {
        /// fig1, fig2, fig3, fig4, fig5, fig6a or fig6b
        #[arg(value_parser = parse_figure)]
        figure: Figure,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Output CSV file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Vary one parameter of a config file's scenario.
    Sweep {
        config: PathBuf,
        /// group_size, n_independent, m, sigma_d, sigma_f, alpha or beta
        #[arg(long, value_parser = parse_parameter)]
        parameter: Parameter,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Output CSV file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the rule names.
    ListRules,
}

#[derive(Debug, Args)]
struct Common {
    /// Trials per scenario point.
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed.
    #[arg(long, env = "CORRVOTE_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write `<output>.diagnostics.csv` with fallback, negative-weight
    /// and k_hat counters.
    #[arg(long)]
    diagnostics: bool,
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_parameter(s: &str) -> Result<Parameter, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn apply_common(mut config: ScenarioConfig, common: &Common) -> ScenarioConfig {
    if let Some(t) = common.trials {
        config.n_trials = t;
    }
    if let Some(s) = common.seed {
        config.master_seed = s;
    }
    config
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn diagnostics_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    out.with_file_name(format!("{stem}.diagnostics.csv"))
}

fn write_outputs(
    sweep_id: &str,
    results: &[SweepResult],
    out: Option<&Path>,
    diagnostics: bool,
) -> Result<(), Failure> {
    let io = |e: Error, path: &Path| Failure::Io(format!("{}: {e}", path.display()));
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io(e.into(), path))?;
            write_csv(BufWriter::new(file), sweep_id, results).map_err(|e| io(e, path))?;
            if diagnostics {
                let dpath = diagnostics_path(path);
                let file = File::create(&dpath).map_err(|e| io(e.into(), &dpath))?;
                write_diagnostics(BufWriter::new(file), sweep_id, results).map_err(|e| io(e, &dpath))?;
            }
        }
        None => {
            if diagnostics {
                return Err(Failure::Usage("--diagnostics needs --out".into()));
            }
            write_csv(io::stdout().lock(), sweep_id, results)?;
        }
    }
    Ok(())
}

fn config_id(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_owned()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::ListRules => {
            let mut stdout = io::stdout().lock();
            for r in Rule::ALL {
                writeln!(stdout, "{:<4} {}", r.name(), r.description()).map_err(|e| Failure::Io(e.to_string()))?;
            }
        }
        Command::Reproduce { figure, out, common } => {
            let base = apply_common(
                ScenarioConfig {
                    master_seed: DEFAULT_SEED,
                    ..ScenarioConfig::default()
                },
                &common,
            );
            let results = with_workers(common.workers, || figure.run(&base))??;
            let path = out.join(format!("{}.csv", figure.id()));
            write_outputs(figure.id(), &results, Some(&path), common.diagnostics)?;
            println!("{} ({}), {} trials per point -> {}", figure.id(), figure.title(), base.n_trials, path.display());
            print!("{}", summary_table(&results));
        }
        Command::Run { config, out, common } => {
            let base = apply_common(load_config(&config)?, &common);
            let results = with_workers(common.workers, || corrvote::experiments::sweep_points(&base, &[vec![]]))??;
            write_outputs(&config_id(&config), &results, out.as_deref(), common.diagnostics)?;
            if out.is_some() {
                print!("{}", summary_table(&results));
            }
        }
        Command::Sweep { config, parameter, values, out, common } => {
            let base = apply_common(load_config(&config)?, &common);
            let results = with_workers(common.workers, || sweep(&base, parameter, &values))??;
            write_outputs(&config_id(&config), &results, out.as_deref(), common.diagnostics)?;
            if out.is_some() {
                print!("{}", summary_table(&results));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
