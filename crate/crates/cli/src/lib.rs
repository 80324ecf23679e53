//! Command-line front end for `latcorr`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 malformed input or arguments,
//! 3 validation failure, 4 configuration error.

pub mod analyze;
pub mod error;
pub mod input;
pub mod simulate;
pub mod thresholds;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latcorr::simulation::Experiment;
use latcorr::Lambda;

pub use analyze::{analyze, render_human, AnalysisReport, AnalyzeOptions, CiChoice};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "latcorr",
    version,
    about = "Latent correlation measures for contingency tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate ρ_(λ) with intervals, thresholds and baselines for a count table.
    Analyze(AnalyzeArgs),
    /// Print the detectable-correlation threshold grid as CSV.
    Thresholds(ThresholdArgs),
    /// Run a simulation experiment and write its results as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// CSV of nonnegative counts; header row and label column are optional.
    pub input: PathBuf,
    /// Comma-separated λ values; fractions such as 2/3 are exact.
    #[arg(long, default_value = "0,2/3,1", allow_hyphen_values = true)]
    pub lambda: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CiChoice::Both)]
    pub ci_method: CiChoice,
    /// Emit JSON instead of the text table.
    #[arg(long)]
    pub json: bool,
    /// Also compute the two-step polychoric correlation.
    #[arg(long)]
    pub polychoric: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value = "0.05,0.01")]
    pub alpha: String,
    #[arg(long, default_value = "1000,3000,5000")]
    pub n: String,
    #[arg(long, default_value = "1,2,3,4,5,6,7,8,9,10,15,20,25")]
    pub df: String,
    #[arg(long, default_value = "-1/2,0,2/3,1", allow_hyphen_values = true)]
    pub lambda: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExperimentArg {
    Perf,
    Coverage,
    Boundary,
    Runtime,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Perf => Experiment::Performance,
            ExperimentArg::Coverage => Experiment::Coverage,
            ExperimentArg::Boundary => Experiment::Boundary,
            ExperimentArg::Runtime => Experiment::Runtime,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub experiment: ExperimentArg,
    /// JSON or TOML file overriding the experiment's default grid.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, env = "LATCORR_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Evaluate exact probability tables instead of sampling.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub polychoric: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| CliError::Argument(format!("--{what}: {s:?}: {e}")))
        })
        .collect()
}

/// λ tokens: a syntax error is a parse failure, a value outside [-1, 1] a
/// validation failure.
fn parse_lambdas(text: &str) -> Result<Vec<Lambda>, CliError> {
    let values: Vec<String> = parse_list(text, "lambda")?;
    values
        .iter()
        .map(|s| match s.parse::<Lambda>() {
            Ok(l) => Ok(l),
            Err(latcorr::DivergenceError::InvalidLambda(v)) => Err(CliError::Validation(format!(
                "lambda {v} is outside [-1, 1]"
            ))),
            Err(e) => Err(CliError::Argument(format!("--lambda: {e}"))),
        })
        .collect()
}

fn open_out<'a>(
    path: Option<&Path>,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(CliError::io(format!("creating {}", p.display())))?,
        )),
        None => Box::new(stdout),
    })
}

/// Parses `args` and runs the command. Help and version requests print to
/// `stdout` and succeed.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(stdout, "{}", e.render()).map_err(CliError::io("writing help"))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Argument(e.render().to_string())),
    };
    match cli.command {
        Command::Analyze(a) => cmd_analyze(a, stdout, stderr),
        Command::Thresholds(a) => cmd_thresholds(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout, stderr),
    }
}

fn cmd_analyze(
    a: AnalyzeArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let lambdas = parse_lambdas(&a.lambda)?;
    if lambdas.is_empty() {
        return Err(CliError::Validation("no lambda values given".into()));
    }
    let table = input::read_counts(&a.input)?;
    let opts = AnalyzeOptions {
        lambdas,
        alpha: a.alpha,
        ci: a.ci_method,
        polychoric: a.polychoric,
    };
    let report = analyze(&table, &opts)?;
    for w in &report.warnings {
        writeln!(stderr, "warning: {w}").map_err(CliError::io("writing warnings"))?;
    }
    let mut out = open_out(a.out.as_deref(), stdout)?;
    let text = if a.json {
        let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
        s.push('\n');
        s
    } else {
        render_human(&report)
    };
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(CliError::io("writing report"))
}

fn cmd_thresholds(a: ThresholdArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let lambdas = parse_lambdas(&a.lambda)?;
    let alphas: Vec<f64> = parse_list(&a.alpha, "alpha")?;
    let ns: Vec<u64> = parse_list(&a.n, "n")?;
    let dfs: Vec<u32> = parse_list(&a.df, "df")?;
    let rows = thresholds::threshold_grid(&lambdas, &alphas, &ns, &dfs)?;
    let out = open_out(a.out.as_deref(), stdout)?;
    let mut w = csv::Writer::from_writer(out);
    for row in &rows {
        w.serialize(row)
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    w.flush().map_err(CliError::io("writing thresholds"))
}

fn cmd_simulate(
    a: SimulateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let experiment = Experiment::from(a.experiment);
    let mut cfg = simulate::load_config(a.config.as_deref(), experiment)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = a.reps {
        cfg.reps = reps;
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    if let Some(l) = &a.lambda {
        cfg.lambda_list = parse_lambdas(l)?;
    }
    cfg.exact |= a.exact;
    cfg.polychoric |= a.polychoric;

    let result = simulate::run(experiment, &cfg)?;
    let to_file = a.out.is_some();
    {
        let out = open_out(a.out.as_deref(), stdout)?;
        simulate::write_csv(&result, out)?;
    }
    let failures = result.failures();
    if failures > 0 {
        writeln!(
            stderr,
            "warning: {failures} failed or non-converged evaluations"
        )
        .map_err(CliError::io("writing summary"))?;
    }
    if to_file {
        let path = a.out.as_deref().map(Path::display);
        writeln!(
            stdout,
            "{:?}: {} rows written to {}",
            experiment,
            result.rows.len(),
            path.expect("checked above")
        )
        .map_err(CliError::io("writing summary"))?;
    }
    Ok(())
}
