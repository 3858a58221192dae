//! Command-line front end for `dfroute`: network files, rate and route
//! queries, and seeded experiment sweeps.

pub mod netfile;
pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dfroute::experiments::{
    self, ExperimentConfig, ExperimentError, ExperimentKind, LineSpacing,
};
use dfroute::rate::{self, DEFAULT_TOLERANCE};
use dfroute::search::{self, NnaOutcome, SearchError};
use dfroute::{CodewordMode, Network, RateError, Route, RouteError, Strategy};
use thiserror::Error;

use netfile::LoadError;
use output::{Algo, ResultBody, ResultDocument, SearchOutput, StatsRow, TrialRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_GUARD: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("bad route: {0}")]
    Route(#[from] RouteError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Load(_) | Self::Route(_) => EXIT_VALIDATION,
            Self::Rate(e) => rate_exit(e),
            Self::Search(SearchError::TooLarge { .. }) => EXIT_GUARD,
            Self::Search(SearchError::Rate(e)) => rate_exit(e),
            Self::Search(_) => EXIT_VALIDATION,
            Self::Experiment(ExperimentError::Rate(e)) => rate_exit(e),
            Self::Experiment(ExperimentError::Search(SearchError::TooLarge { .. })) => EXIT_GUARD,
            Self::Experiment(_) => EXIT_VALIDATION,
            Self::Write { .. } | Self::Csv(_) => EXIT_FAILURE,
        }
    }
}

fn rate_exit(e: &RateError) -> i32 {
    match e {
        RateError::DidNotConverge { .. } => EXIT_GUARD,
        _ => EXIT_VALIDATION,
    }
}

#[derive(Debug, Parser)]
#[command(name = "dfroute", version, about = "Decode-and-forward route rates and optimal route search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Supported rate of one route.
    Rate(RateArgs),
    /// Find a rate-maximizing route.
    Search(SearchArgs),
    /// Rate ratios on random line routes (CSV).
    Sweep(SweepArgs),
    /// NNSA candidate-set size statistics on random square networks (CSV).
    Stats(StatsArgs),
    /// Compare NNA, NNSA and MSPA against brute force (JSON).
    Agree(AgreeArgs),
    /// Write a random square network file.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Sh,
    Mh,
    Df,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Sh => Strategy::SingleHop,
            StrategyArg::Mh => Strategy::MultiHop,
            StrategyArg::Df => Strategy::DecodeForward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ind,
    Corr,
}

impl From<ModeArg> for CodewordMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ind => CodewordMode::Independent,
            ModeArg::Corr => CodewordMode::Correlated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Network file.
    pub network: PathBuf,
    /// Comma-separated node ids; defaults to the direct route.
    #[arg(long, value_delimiter = ',')]
    pub route: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "df")]
    pub strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "ind")]
    pub mode: ModeArg,
    /// Rate tolerance for correlated-codeword split optimization.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    pub network: PathBuf,
    #[arg(long, value_enum, default_value = "nnsa")]
    pub algo: Algo,
    #[arg(long, value_enum, default_value = "ind")]
    pub mode: ModeArg,
    /// Strategy for brute force; the other algorithms are decode-and-forward.
    #[arg(long, value_enum, default_value = "df")]
    pub strategy: StrategyArg,
    /// Let brute force run on networks above the size guard.
    #[arg(long)]
    pub allow_large: bool,
    /// Include wall-clock time in the output.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Comma-separated node counts (route lengths for sweeps).
    #[arg(long, visible_alias = "d", value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write to a file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// One row per trial instead of per size.
    #[arg(long)]
    pub per_trial: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// 1: routes span 10 m; 2: routes span |M|-1 m.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub case: u8,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Side of the square area in meters.
    #[arg(long, default_value_t = 1.0)]
    pub side: f64,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "ind")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Extra network files evaluated before the random population.
    #[arg(long)]
    pub fixture: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub side: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command and returns what it prints.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Rate(a) => cmd_rate(a),
        Command::Search(a) => cmd_search(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Agree(a) => cmd_agree(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// Parses `args`, runs the command, writes output, and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => match stdout.write_all(text.as_bytes()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_FAILURE
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_rate(a: &RateArgs) -> Result<String, CliError> {
    let net = netfile::load_network(&a.network)?;
    let strategy = Strategy::from(a.strategy);
    let route = match &a.route {
        Some(ids) => Route::new(&net, ids.clone())?,
        None => Route::direct(&net),
    };
    if strategy == Strategy::SingleHop && route.len() != 2 {
        return Err(CliError::Usage("single-hop takes only the direct route".into()));
    }
    if !(a.tol.is_finite() && a.tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let report = match (strategy, CodewordMode::from(a.mode)) {
        (Strategy::DecodeForward, CodewordMode::Correlated) => rate::optimize_splits(&net, &route, a.tol)?,
        (s, m) => rate::rate(&net, &route, s, m)?,
    };
    Ok(ResultDocument::new(ResultBody::Rate { report }).to_json())
}

fn cmd_search(a: &SearchArgs) -> Result<String, CliError> {
    let net = netfile::load_network(&a.network)?;
    let mode = CodewordMode::from(a.mode);
    let strategy = Strategy::from(a.strategy);
    if a.algo != Algo::Brute && strategy != Strategy::DecodeForward {
        return Err(CliError::Usage("--strategy applies to brute force only".into()));
    }
    let started = Instant::now();
    let mut out = match a.algo {
        Algo::Brute => {
            let r = search::brute_force_optimum_with(&net, strategy, mode, a.allow_large)?;
            SearchOutput {
                algorithm: a.algo,
                strategy,
                mode: r.mode,
                summary: format!("best {} @ {}", join_routes(&r.best_routes), r.max_rate),
                best_routes: r.best_routes,
                max_rate: Some(r.max_rate),
                routes_evaluated: r.routes_evaluated,
                failed: r.failed,
                candidates: None,
                nna: None,
                elapsed_secs: None,
            }
        }
        Algo::Nna => {
            let outcome = search::run_nna(&net);
            let (summary, best, rate) = match &outcome {
                NnaOutcome::Completed { route } => {
                    let r = rate::rate_df(&net, route, mode)?.supported_rate;
                    (format!("completed {route} @ {r}"), vec![route.clone()], Some(r))
                }
                NnaOutcome::Premature { partial, ties } => (
                    format!("premature at {}, tie {}", braces(partial), braces(ties)),
                    vec![],
                    None,
                ),
            };
            SearchOutput {
                algorithm: a.algo,
                strategy,
                mode: Some(mode),
                summary,
                routes_evaluated: best.len(),
                best_routes: best,
                max_rate: rate,
                failed: vec![],
                candidates: None,
                nna: Some(outcome),
                elapsed_secs: None,
            }
        }
        Algo::Nnsa => {
            let cands = search::run_nnsa(&net);
            let r = search::best_candidates(&net, &cands, mode)?;
            SearchOutput {
                algorithm: a.algo,
                strategy,
                mode: Some(mode),
                summary: format!(
                    "{} candidates {}; best {} @ {}",
                    cands.len(),
                    join_routes(&cands.candidates),
                    join_routes(&r.best_routes),
                    r.max_rate
                ),
                best_routes: r.best_routes,
                max_rate: Some(r.max_rate),
                routes_evaluated: r.routes_evaluated,
                failed: r.failed,
                candidates: Some(cands),
                nna: None,
                elapsed_secs: None,
            }
        }
        Algo::Mspa => {
            let route = search::run_mspa(&net);
            let r = rate::rate_df(&net, &route, mode)?.supported_rate;
            SearchOutput {
                algorithm: a.algo,
                strategy,
                mode: Some(mode),
                summary: format!("route {route} @ {r}"),
                best_routes: vec![route],
                max_rate: Some(r),
                routes_evaluated: 1,
                failed: vec![],
                candidates: None,
                nna: None,
                elapsed_secs: None,
            }
        }
    };
    if a.timing {
        out.elapsed_secs = Some(started.elapsed().as_secs_f64());
    }
    Ok(ResultDocument::new(ResultBody::Search(out)).to_json())
}

fn braces(ids: &[usize]) -> String {
    let inner: Vec<String> = ids.iter().map(usize::to_string).collect();
    format!("{{{}}}", inner.join(","))
}

fn join_routes(routes: &[Route]) -> String {
    routes.iter().map(Route::to_string).collect::<Vec<_>>().join(",")
}

fn config(kind: ExperimentKind, run: &RunArgs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, run.sizes.clone(), run.trials, run.seed);
    cfg.jobs = run.jobs;
    cfg
}

fn cmd_sweep(a: &SweepArgs) -> Result<String, CliError> {
    let mut cfg = config(ExperimentKind::RatioSweep, &a.run);
    cfg.spacing = LineSpacing::from_case(a.case).expect("clap restricts the case");
    let sweep = experiments::ratio_sweep(&cfg)?;
    let text = match (a.run.format, a.run.per_trial) {
        (Format::Csv, false) => output::to_csv(&sweep.rows)?,
        (Format::Csv, true) => output::to_csv(&trial_rows(&sweep.records))?,
        (Format::Json, false) => ResultDocument::new(ResultBody::Sweep { rows: sweep.rows }).to_json(),
        (Format::Json, true) => ResultDocument::new(ResultBody::Trials {
            records: trial_rows(&sweep.records),
        })
        .to_json(),
    };
    emit(text, a.run.out.as_deref())
}

fn cmd_stats(a: &StatsArgs) -> Result<String, CliError> {
    let mut cfg = config(ExperimentKind::NnsaStats, &a.run);
    cfg.side = a.side;
    let stats = experiments::nnsa_size_stats(&cfg)?;
    let text = match (a.run.format, a.run.per_trial) {
        (Format::Csv, false) => {
            let rows: Vec<StatsRow> = stats.rows.iter().map(StatsRow::from).collect();
            output::to_csv(&rows)?
        }
        (Format::Csv, true) => output::to_csv(&trial_rows(&stats.records))?,
        (Format::Json, false) => ResultDocument::new(ResultBody::Stats { rows: stats.rows }).to_json(),
        (Format::Json, true) => ResultDocument::new(ResultBody::Trials {
            records: trial_rows(&stats.records),
        })
        .to_json(),
    };
    emit(text, a.run.out.as_deref())
}

fn trial_rows(records: &[experiments::TrialRecord]) -> Vec<TrialRow> {
    records.iter().map(TrialRow::from).collect()
}

fn cmd_agree(a: &AgreeArgs) -> Result<String, CliError> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::OracleAgreement, a.sizes.clone(), a.trials, a.seed);
    cfg.mode = a.mode.into();
    cfg.jobs = a.jobs;
    let fixtures = a
        .fixture
        .iter()
        .map(|p| netfile::load_network(p))
        .collect::<Result<Vec<Network>, _>>()?;
    let report = experiments::oracle_agreement_trials(&cfg, &fixtures)?;
    emit(
        ResultDocument::new(ResultBody::Agreement { report }).to_json(),
        a.out.as_deref(),
    )
}

fn cmd_gen(a: &GenArgs) -> Result<String, CliError> {
    let net = experiments::gen_square_network_with(a.nodes, a.side, a.seed)?;
    let mut text = format!(
        "# {} nodes uniform on a {} m square, seed {}\n",
        a.nodes, a.side, a.seed
    );
    text.push_str(&netfile::write_network(&net));
    emit(text, a.out.as_deref())
}

/// Writes `text` to `out` (returning nothing to print) or hands it back.
fn emit(text: String, out: Option<&Path>) -> Result<String, CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|source| CliError::Write {
                path: path.to_owned(),
                source,
            })?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}
