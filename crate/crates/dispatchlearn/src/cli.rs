//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 for configuration and input errors, 2 when
//! training aborts.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dispatchlearn_core::market::simulate_hour;
use dispatchlearn_core::opt::BarrierSettings;
use dispatchlearn_core::regret::PriceBook;
use dispatchlearn_core::training::{evaluate, train, Forecaster, TrainingError};
use dispatchlearn_core::{ContextSample, PenaltySetting};

use crate::checkpoint::{Checkpoint, CheckpointError, StoredForecaster};
use crate::config::{
    parse_case, parse_family, parse_pipeline, preset_name, ConfigError, PenaltySpec, ResolvedConfig, RunConfig,
    DEFAULT_SEED, SEED_ENV,
};
use crate::data_io::{save_csv, synth_generate, DataError, Dataset};
use crate::report::{self, CompareRow, ReportError, SimulatedHour};
use crate::run::{check_compatible, default_grid, load_dataset, load_grid, prepare, scenario_for, split_for, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_TRAINING: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dispatchlearn", version, about = "Decision-focused load and impedance forecasting for dispatch")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one pipeline and write a checkpoint, history and log.
    Train(TrainArgs),
    /// Write a checkpoint that forecasts the realized values.
    Oracle(OracleArgs),
    /// Evaluate ILO and SLO checkpoints under every preset of a penalty family.
    Compare(CompareArgs),
    /// Replay a checkpoint through the real-time market.
    Simulate(SimulateArgs),
    /// Write a synthetic hourly dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// ilo or slo.
    #[arg(long)]
    pub pipeline: Option<String>,
    /// ed-1h, ed-24h or dcopf.
    #[arg(long)]
    pub case: Option<String>,
    /// Preset name such as table1-settings2.
    #[arg(long)]
    pub penalties: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Hourly CSV; synthetic data when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// ILO checkpoint; repeat to give one per preset.
    #[arg(long, required = true)]
    pub ilo: Vec<PathBuf>,
    /// SLO checkpoint; repeat to give one per preset.
    #[arg(long, required = true)]
    pub slo: Vec<PathBuf>,
    /// Hourly CSV; the checkpoint's own data when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// table1 or case2; the case's family when absent.
    #[arg(long)]
    pub penalties: Option<String>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub days: usize,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::bench::ZONES)]
    pub zones: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("training aborted: {0}")]
    Training(#[from] TrainingError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Training(_) => EXIT_TRAINING,
            _ => EXIT_CONFIG,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Parses `args` and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a.run),
        Command::Oracle(a) => cmd_oracle(&a.run),
        Command::Compare(a) => cmd_compare(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

/// Config file, then `DISPATCH_SEED`/`DISPATCH_OUT`, then flags.
fn resolve_run(args: &RunArgs) -> Result<ResolvedConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    if let Some(p) = &args.pipeline {
        config.pipeline = Some(parse_pipeline(p)?);
    }
    if let Some(c) = &args.case {
        config.case = Some(parse_case(c)?);
    }
    if let Some(p) = &args.penalties {
        config.penalties = Some(PenaltySpec::Preset(p.clone()));
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if args.epochs.is_some() {
        config.epochs = args.epochs;
    }
    if args.dataset.is_some() {
        config.data.csv = args.dataset.clone();
    }
    if args.out.is_some() {
        config.out = args.out.clone();
    }
    // Penalty presets expand to the size of the fleet.
    let case = config.case.ok_or_else(|| ConfigError::Invalid("case is not set".into()))?;
    let gens = match &config.grid.file {
        Some(path) => crate::gridfile::load(path).map_err(RunError::from)?.fleet.len(),
        None => default_grid(case).fleet.len(),
    };
    Ok(config.resolve(gens)?)
}

fn out_dir(config: &ResolvedConfig, default: String) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(default))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Logs to stderr and to `file` when given.
fn init_logging(file: Option<&Path>) -> Result<(), CliError> {
    struct Tee(Option<File>);
    impl Write for Tee {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            std::io::stderr().write_all(buf)?;
            if let Some(f) = &mut self.0 {
                f.write_all(buf)?;
            }
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            if let Some(f) = &mut self.0 {
                f.flush()?;
            }
            std::io::stderr().flush()
        }
    }
    let file = match file {
        Some(p) => Some(File::create(p).map_err(io_err(p))?),
        None => None,
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(Tee(file))))
        .try_init();
    Ok(())
}

fn cmd_train(args: &RunArgs) -> Result<(), CliError> {
    let config = resolve_run(args)?;
    let t = &config.training;
    let dir = out_dir(
        &config,
        format!("{}-{}", crate::config::pipeline_name(t.pipeline), t.case.name()),
    );
    create_dir(&dir)?;
    init_logging(Some(&dir.join("train.log")))?;
    let header = config.header_lines();
    for line in &header {
        log::info!("{line}");
    }

    let dataset = load_dataset(&config.data, t.seed)?;
    let prepared = prepare(&config, &dataset)?;
    log::info!("{} training and {} test samples", prepared.train.len(), prepared.test.len());

    let start = Instant::now();
    let clock = move || start.elapsed().as_secs_f64();
    let (models, history) = train(t, &prepared.scenario, &prepared.train, Some(&prepared.test), &clock)?;
    if let Some(test) = &history.test {
        log::info!(
            "best epoch {}, test regret {:.6}, test mse {:.6}",
            history.best_epoch,
            test.mean_regret,
            test.mean_mse
        );
    }

    let ckpt = Checkpoint::new(
        StoredForecaster::Trained { models, best_epoch: history.best_epoch },
        config.clone(),
        prepared.scenario,
    );
    ckpt.save(&dir.join("checkpoint.json"))?;
    report::write_with_header(&dir.join("history.csv"), &header, &report::history_csv(&history)?)?;
    let json_path = dir.join("history.json");
    fs::write(&json_path, report::history_json(&history, &header)? + "\n").map_err(io_err(&json_path))?;
    log::info!("wrote {}", dir.display());
    Ok(())
}

fn cmd_oracle(args: &RunArgs) -> Result<(), CliError> {
    let mut args = args.clone();
    args.pipeline.get_or_insert_with(|| "ilo".into());
    let config = resolve_run(&args)?;
    let dir = out_dir(&config, format!("oracle-{}", config.training.case.name()));
    create_dir(&dir)?;
    init_logging(None)?;
    let scenario = scenario_for(config.training.case, load_grid(&config)?, config.regularization);
    let ckpt = Checkpoint::new(StoredForecaster::TruthOracle, config, scenario);
    ckpt.save(&dir.join("checkpoint.json"))?;
    log::info!("wrote {}", dir.join("checkpoint.json").display());
    Ok(())
}

/// Train and test samples of a checkpoint's data setup, optionally on a
/// different dataset.
fn checkpoint_samples(
    ckpt: &Checkpoint,
    dataset: Option<&Path>,
) -> Result<(Vec<ContextSample>, Vec<ContextSample>), CliError> {
    let mut config = ckpt.config.clone();
    if let Some(p) = dataset {
        config.data.csv = Some(p.to_path_buf());
    }
    let data: Dataset = load_dataset(&config.data, config.training.seed)?;
    check_compatible(&ckpt.scenario, &data, config.training.case)?;
    Ok(split_for(&data, config.training.case, &config.data)?)
}

/// Index of the checkpoint trained under `label`, or of the only one given.
fn pick(ckpts: &[Checkpoint], label: &str, side: &str) -> Result<usize, CliError> {
    if ckpts.len() == 1 {
        return Ok(0);
    }
    ckpts
        .iter()
        .position(|c| c.config.penalty_label == label)
        .ok_or_else(|| CliError::Usage(format!("no {side} checkpoint was trained with {label}")))
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    init_logging(None)?;
    let load_all = |paths: &[PathBuf]| -> Result<Vec<Checkpoint>, CliError> {
        paths.iter().map(|p| Ok(Checkpoint::load(p)?)).collect()
    };
    let ilo = load_all(&args.ilo)?;
    let slo = load_all(&args.slo)?;
    let case = ilo[0].config.training.case;
    if ilo.iter().chain(&slo).any(|c| c.config.training.case != case) {
        return Err(CliError::Usage("checkpoints were trained on different cases".into()));
    }
    let family = match &args.penalties {
        Some(f) => parse_family(f)?,
        None => crate::bench::penalty_family(case),
    };
    let gens = ilo[0].scenario.fleet.len();

    let samples = |set: &[Checkpoint]| -> Result<Vec<_>, CliError> {
        set.iter().map(|c| checkpoint_samples(c, args.dataset.as_deref())).collect()
    };
    let (ilo_data, slo_data) = (samples(&ilo)?, samples(&slo)?);

    let mut rows = Vec::new();
    for k in 1..=5 {
        let label = preset_name(family, k);
        let penalties = PenaltySetting::preset(family, k, gens)
            .ok_or_else(|| CliError::Usage(format!("{label} does not fit a fleet of {gens} units")))?;
        let mut regrets = Vec::with_capacity(4);
        for (set, data, side) in [(&ilo, &ilo_data, "ilo"), (&slo, &slo_data, "slo")] {
            let i = pick(set, &label, side)?;
            let (ckpt, (tr, te)) = (&set[i], &data[i]);
            let mu = ckpt.config.training.mu_eval;
            for part in [tr, te] {
                regrets.push(evaluate(&ckpt.forecaster, &ckpt.scenario, part, &penalties, mu)?.mean_regret);
            }
        }
        rows.push(CompareRow {
            setting: label,
            regret_ilo_train: regrets[0],
            regret_ilo_test: regrets[1],
            regret_slo_train: regrets[2],
            regret_slo_test: regrets[3],
        });
    }
    let body = report::compare_csv(&rows)?;
    match &args.out {
        Some(path) => {
            let header = vec![
                format!("case = {}", case.name()),
                format!("penalties = {}", crate::config::family_name(family)),
            ];
            report::write_with_header(path, &header, &body)?;
        }
        None => std::io::stdout()
            .write_all(&body)
            .map_err(|e| CliError::Io { path: "stdout".into(), source: e })?,
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    init_logging(None)?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    create_dir(&args.report)?;
    let (train_set, test_set) = checkpoint_samples(&ckpt, args.dataset.as_deref())?;
    let prices = PriceBook::from_fleet(&ckpt.scenario.fleet);
    let settings = BarrierSettings::with_mu(ckpt.config.training.mu_eval);
    let penalties = &ckpt.config.training.penalties;

    let mut hours = Vec::new();
    let mut failed = 0;
    for (part, set) in [("train", &train_set), ("test", &test_set)] {
        for sample in set.iter() {
            let (load, x) = ckpt
                .forecaster
                .forecast(sample)
                .map_err(|e| CliError::Training(e.into()))?;
            match simulate_hour(&ckpt.scenario, &load, x.as_deref(), sample, &prices, penalties, &settings) {
                Ok(report) => hours.push(SimulatedHour { part, report }),
                Err(e) => {
                    log::warn!("hour {} not simulated: {e}", sample.timestamp);
                    failed += 1;
                }
            }
        }
    }

    let header = ckpt.config.header_lines();
    let dir = &args.report;
    report::write_with_header(&dir.join("settlement.csv"), &header, &report::settlement_csv(&hours)?)?;
    report::write_with_header(&dir.join("hourly.csv"), &header, &report::hourly_csv(&hours)?)?;
    if ckpt.scenario.network.is_some() {
        report::write_with_header(&dir.join("congestion.csv"), &header, &report::congestion_csv(&hours)?)?;
        report::write_with_header(
            &dir.join("operational_cost.csv"),
            &header,
            &report::operational_cost_csv(&hours)?,
        )?;
        report::write_with_header(&dir.join("impedance.csv"), &header, &report::impedance_csv(&hours)?)?;
    }
    let summary = report::summarize(&hours, failed);
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(ReportError::from)? + "\n";
    fs::write(&path, text).map_err(io_err(&path))?;
    log::info!(
        "{} hours, settlement {:.6}, regret {:.6}",
        summary.hours,
        summary.total_settlement,
        summary.total_regret
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.days == 0 || args.zones == 0 {
        return Err(CliError::Usage("days and zones must be at least 1".into()));
    }
    let data = synth_generate(args.seed, args.days, args.zones);
    save_csv(&data, &args.out)?;
    Ok(())
}
