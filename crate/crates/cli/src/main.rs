//! `mare-forge`: fit conditional error laws, retarget them to a MAPE,
//! simulate scenarios and score them.

mod config;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand, ValueEnum};

use mare_forge::arma::{fit_arma, to_base_process, DEFAULT_MAX_ORDER};
use mare_forge::curvature::{mean_abs_second_difference, smooth, CurvatureSpec};
use mare_forge::dataio::{load_csv, parse_datetime, save_csv, CsvOptions, Role};
use mare_forge::eval::{score_report, Aggregation, Curvature, ScoreInputs};
use mare_forge::fit::{fit_all, select_a, FittedModel};
use mare_forge::fixture::{make_fixture, FixtureKind};
use mare_forge::scenario::{simulate, Mode, ScenarioTable, SimulationRequest};
use mare_forge::target::{adjust_params, feasible_region, target_function, weight_function, WeightFunction};
use mare_forge::{Error, PairedSeries, SidSelection};

use output::{write_atomic, write_json, Log};

const THREADS_ENV: &str = "MARE_FORGE_THREADS";
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "mare-forge", version, about = "Power scenarios with a target MAPE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit, retarget, simulate and score; writes every artifact to --output-dir
    Run(RunArgs),
    /// Fit the conditional error laws and write model.json
    Fit(RunArgs),
    /// Report SID feasibility and write the per-level targets
    Target(RunArgs),
    /// Curvature-smooth every scenario of a scenario CSV
    Smooth(SmoothArgs),
    /// Score a scenario CSV against historical data
    Score(ScoreArgs),
    /// Write a synthetic forecast/actual CSV
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    /// Forecasts are the input, simulate actuals
    ForecastsToActuals,
    /// Actuals are the input, simulate forecasts
    ActualsToForecasts,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Iid,
    Arma,
    Curvature,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Iid => Mode::Iid,
            ModeArg::Arma => Mode::Arma,
            ModeArg::Curvature => Mode::Curvature,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Rms,
    Sum,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurvatureArg {
    Absolute,
    Signed,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    IidError,
    Ar1Error,
    Heteroscedastic,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Historical CSV with datetime, forecast and actual columns
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "datetime")]
    datetime_column: String,
    #[arg(long, default_value = "forecasts")]
    forecast_column: String,
    #[arg(long, default_value = "actuals")]
    actual_column: String,
    /// Which column is the simulation input
    #[arg(long, value_enum, default_value_t = RoleArg::ForecastsToActuals)]
    role: RoleArg,
    /// Production capacity; inferred from the data when omitted
    #[arg(long)]
    cap: Option<f64>,
}

#[derive(Args, Clone)]
#[command(args_override_self = true)]
struct RunArgs {
    /// Flat TOML file of flag values; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Target MAPE in percent
    #[arg(long)]
    target_mape: Option<f64>,
    /// Window fraction, or "auto" to select it
    #[arg(long, default_value = "0.05")]
    a: String,
    /// Select the window fraction from --a-grid
    #[arg(long)]
    select_a: bool,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.025,0.05,0.1,0.2,0.5")]
    a_grid: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Arma)]
    mode: ModeArg,
    /// Number of scenarios
    #[arg(long, default_value_t = 10)]
    scenarios: usize,
    /// First SID timestamp (inclusive)
    #[arg(long)]
    sid_start: Option<String>,
    /// Last SID timestamp (inclusive)
    #[arg(long)]
    sid_end: Option<String>,
    /// External SID CSV with the datetime column and --sid-column
    #[arg(long)]
    sid_csv: Option<PathBuf>,
    #[arg(long, default_value = "x")]
    sid_column: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest ARMA order tried for both p and q
    #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
    max_order: usize,
    #[command(flatten)]
    curvature: CurvatureArgs,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Args, Clone)]
struct CurvatureArgs {
    /// Target |second difference| in MW; default: mean |second difference| of the historical outputs
    #[arg(long)]
    curvature_d: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    ws: f64,
    #[arg(long, default_value_t = 1.0)]
    weps: f64,
    /// Relative optimality gap of the curvature solver
    #[arg(long, default_value_t = 0.05)]
    gap: f64,
    #[arg(long, default_value_t = 10_000)]
    node_limit: usize,
}

#[derive(Args, Clone)]
struct ScoringArgs {
    /// Largest autocorrelation lag scored
    #[arg(long, default_value_t = 5)]
    score_lags: usize,
    /// Weights wm,wac,wsd of the composite score
    #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
    score_weights: Vec<f64>,
    #[arg(long, value_enum, default_value_t = AggregationArg::Rms)]
    score_aggregation: AggregationArg,
    #[arg(long, value_enum, default_value_t = CurvatureArg::Absolute)]
    score_curvature: CurvatureArg,
}

#[derive(Args)]
struct SmoothArgs {
    /// Scenario CSV (datetime, x, scenario_1, ...)
    #[arg(long)]
    scenarios: PathBuf,
    /// Historical CSV, used for the default curvature target
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    curvature: CurvatureArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Scenario CSV (datetime, x, scenario_1, ...)
    #[arg(long)]
    scenarios: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Target MAPE in percent the scenarios were generated for
    #[arg(long)]
    target_mape: f64,
    /// Label stored in the report
    #[arg(long, default_value = "unknown")]
    mode: String,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Report JSON; the table always goes to stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Infeasible>().is_some() {
                ExitCode::from(EXIT_INFEASIBLE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn real_main() -> Result<()> {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = match config::find_config(&argv) {
        Some(path) => {
            let extra = config::config_args(Path::new(&path))?;
            Cli::try_parse_from(config::insert_config(&argv, extra)).unwrap_or_else(|e| e.exit())
        }
        None => Cli::parse(),
    };
    init_threads()?;
    match cli.command {
        Command::Run(args) => run(&args),
        Command::Fit(args) => fit(&args),
        Command::Target(args) => target(&args),
        Command::Smooth(args) => smooth_cmd(&args),
        Command::Score(args) => score_cmd(&args),
        Command::Fixture(args) => fixture_cmd(&args),
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Infeasible target, reported with exit status 2.
#[derive(Debug)]
struct Infeasible(String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

fn csv_options(d: &DataArgs) -> CsvOptions {
    CsvOptions {
        datetime_column: d.datetime_column.clone(),
        forecast_column: d.forecast_column.clone(),
        actual_column: d.actual_column.clone(),
        role: match d.role {
            RoleArg::ForecastsToActuals => Role::ForecastsToActuals,
            RoleArg::ActualsToForecasts => Role::ActualsToForecasts,
        },
    }
}

fn load_series(d: &DataArgs, log: &mut Log) -> Result<PairedSeries> {
    let Some(path) = &d.input else {
        bail!("--input is required");
    };
    let series = load_csv(path, d.cap, &csv_options(d)).with_context(|| format!("loading {}", path.display()))?;
    let role = match d.role {
        RoleArg::ForecastsToActuals => "forecasts-to-actuals",
        RoleArg::ActualsToForecasts => "actuals-to-forecasts",
    };
    log.event(
        "input",
        &[
            ("path", path.display().to_string()),
            ("n", series.len().to_string()),
            ("n_positive", series.x().iter().filter(|&&v| v > 0.0).count().to_string()),
            ("cap", series.cap().to_string()),
            ("role", role.to_string()),
        ],
    );
    Ok(series)
}

fn prepare_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn fit_model(args: &RunArgs, series: &PairedSeries, log: &mut Log) -> Result<FittedModel> {
    let auto = args.select_a || args.a.eq_ignore_ascii_case("auto");
    let a = if auto {
        let sel = select_a(series, &args.a_grid)?;
        for &(a, d2) in &sel.curve {
            log.event("a_curve", &[("a", a.to_string()), ("d2", format!("{d2:e}"))]);
        }
        write_json(&args.output_dir.join("a_selection.json"), &sel)?;
        sel.best
    } else {
        args.a
            .parse::<f64>()
            .with_context(|| format!("--a must be a number or \"auto\", got {:?}", args.a))?
    };
    let model = fit_all(series, a)?;
    log.event(
        "fit",
        &[
            ("a", a.to_string()),
            ("selected", auto.to_string()),
            ("levels", model.levels.len().to_string()),
            ("fallbacks", model.levels.iter().filter(|l| l.fallback).count().to_string()),
        ],
    );
    write_atomic(&args.output_dir.join("model.json"), model.to_json()?.as_bytes())?;
    Ok(model)
}

fn weights_of(model: &FittedModel, series: &PairedSeries, log: &mut Log) -> Result<WeightFunction> {
    let weights = weight_function(model, series)?;
    log.event("weights", &[("r_mhat", weights.r_mhat.to_string()), ("levels", weights.levels.len().to_string())]);
    Ok(weights)
}

fn parse_time(flag: &str, v: &Option<String>) -> Result<Option<NaiveDateTime>> {
    v.as_deref()
        .map(|s| parse_datetime(s).with_context(|| format!("{flag}: malformed datetime {s:?}")))
        .transpose()
}

fn sid_of(args: &RunArgs, series: &PairedSeries) -> Result<SidSelection> {
    if let Some(path) = &args.sid_csv {
        if args.sid_start.is_some() || args.sid_end.is_some() {
            bail!("--sid-csv cannot be combined with --sid-start/--sid-end");
        }
        return SidSelection::load_csv(path, &args.data.datetime_column, &args.sid_column, series.cap())
            .with_context(|| format!("loading SID {}", path.display()));
    }
    let start = parse_time("--sid-start", &args.sid_start)?;
    let end = parse_time("--sid-end", &args.sid_end)?;
    let (first, last) = (series.timestamps()[0], series.timestamps()[series.len() - 1]);
    for (flag, t) in [("--sid-start", start), ("--sid-end", end)] {
        if let Some(t) = t {
            if t < first || t > last {
                bail!("{flag} {t} is outside the input data ({first} to {last}); use --sid-csv for external inputs");
            }
        }
    }
    Ok(SidSelection::from_range(series, start, end)?)
}

fn target_ratio(args: &RunArgs) -> Result<f64> {
    match args.target_mape {
        Some(v) if v.is_finite() && v >= 0.0 => Ok(v / 100.0),
        Some(v) => bail!("--target-mape must be a finite percentage >= 0, got {v}"),
        None => bail!("--target-mape is required"),
    }
}

fn infeasible(log: &mut Log, e: Error) -> anyhow::Error {
    match e {
        Error::Infeasible { r_tilde, r_max, binding_x } => {
            let msg = format!(
                "target MAPE {}% is infeasible: the maximum feasible MAPE for this SID is {:.4}% (R~ = {}, binding input x = {})",
                100.0 * r_tilde,
                100.0 * r_max,
                r_max,
                binding_x
            );
            log.event("infeasible", &[("target_mape", (100.0 * r_tilde).to_string()), ("r_max", r_max.to_string())]);
            anyhow::Error::new(Infeasible(msg))
        }
        other => other.into(),
    }
}

fn curvature_spec(c: &CurvatureArgs, series: Option<&PairedSeries>, cap: f64) -> Result<CurvatureSpec> {
    let d = match (c.curvature_d, series) {
        (Some(d), _) => d,
        (None, Some(s)) => mean_abs_second_difference(s.y())?,
        (None, None) => bail!("--curvature-d is required without --input"),
    };
    let spec = CurvatureSpec {
        w_s: c.ws,
        w_eps: c.weps,
        gap: c.gap,
        node_limit: c.node_limit,
        ..CurvatureSpec::new(d, cap)
    };
    spec.validate(cap)?;
    Ok(spec)
}

fn score_weights(s: &ScoringArgs) -> Result<[f64; 3]> {
    match s.score_weights[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => bail!("--score-weights needs three values wm,wac,wsd, got {}", s.score_weights.len()),
    }
}

fn aggregation(s: &ScoringArgs) -> Aggregation {
    match s.score_aggregation {
        AggregationArg::Rms => Aggregation::Rms,
        AggregationArg::Sum => Aggregation::Sum,
    }
}

fn curvature_kind(s: &ScoringArgs) -> Curvature {
    match s.score_curvature {
        CurvatureArg::Absolute => Curvature::Absolute,
        CurvatureArg::Signed => Curvature::Signed,
    }
}

fn with_log(output_dir: &Path, f: impl FnOnce(&mut Log) -> Result<()>) -> Result<()> {
    prepare_output_dir(output_dir)?;
    let mut log = Log::to_file(output_dir.join("run.log"));
    let result = f(&mut log);
    if let Err(e) = &result {
        log.event("error", &[("message", format!("{e:#}"))]);
    }
    log.flush()?;
    result
}

fn fit(args: &RunArgs) -> Result<()> {
    with_log(&args.output_dir, |log| {
        let series = load_series(&args.data, log)?;
        let model = fit_model(args, &series, log)?;
        weights_of(&model, &series, log)?;
        log.event("done", &[("output_dir", args.output_dir.display().to_string())]);
        Ok(())
    })
}

fn target(args: &RunArgs) -> Result<()> {
    with_log(&args.output_dir, |log| {
        let series = load_series(&args.data, log)?;
        let model = fit_model(args, &series, log)?;
        let weights = weights_of(&model, &series, log)?;
        let sid = sid_of(args, &series)?;
        let feas = feasible_region(&weights, &sid, &model)?;
        log_feasibility(log, &sid, &weights, feas.plausibility, feas.r_max, feas.binding_x);
        if args.target_mape.is_some() {
            let r = target_ratio(args)?;
            let tf = target_function(&weights, &sid, &model, r).map_err(|e| infeasible(log, e))?;
            let adjusted = adjust_params(&tf)?;
            write_json(&args.output_dir.join("target.json"), &tf)?;
            write_json(&args.output_dir.join("adjusted.json"), &adjusted)?;
            log.event(
                "target",
                &[("r_tilde", r.to_string()), ("expected_mape", (100.0 * tf.expected_mare(&sid)).to_string())],
            );
        }
        log.event("done", &[("output_dir", args.output_dir.display().to_string())]);
        Ok(())
    })
}

fn log_feasibility(log: &mut Log, sid: &SidSelection, w: &WeightFunction, p: f64, r_max: f64, binding: Option<f64>) {
    log.event(
        "feasibility",
        &[
            ("n_sid", sid.len().to_string()),
            ("p_sid", p.to_string()),
            ("r_mhat", w.r_mhat.to_string()),
            ("r_max", r_max.to_string()),
            ("max_mape", (100.0 * r_max).to_string()),
            ("binding_x", binding.map_or("none".into(), |x| x.to_string())),
        ],
    );
}

fn run(args: &RunArgs) -> Result<()> {
    with_log(&args.output_dir, |log| {
        let series = load_series(&args.data, log)?;
        let r_tilde = target_ratio(args)?;
        let model = fit_model(args, &series, log)?;
        let weights = weights_of(&model, &series, log)?;
        let sid = sid_of(args, &series)?;
        let feas = feasible_region(&weights, &sid, &model)?;
        log_feasibility(log, &sid, &weights, feas.plausibility, feas.r_max, feas.binding_x);
        // fail before the ARMA fit, which is the slow part
        target_function(&weights, &sid, &model, r_tilde).map_err(|e| infeasible(log, e))?;

        let mode: Mode = args.mode.into();
        let arma = if mode == Mode::Iid {
            log.event("arma", &[("skipped", "iid".into())]);
            None
        } else {
            let fitted = fit_arma(&to_base_process(&series, &model), args.max_order, args.max_order)?;
            let m = &fitted.model;
            log.event(
                "arma",
                &[
                    ("p", m.p.to_string()),
                    ("q", m.q.to_string()),
                    ("sigma_delta", m.sigma_delta.to_string()),
                    ("bic", m.bic.map_or("none".into(), |b| b.to_string())),
                    ("candidates", fitted.candidates.len().to_string()),
                ],
            );
            write_json(&args.output_dir.join("arma.json"), &fitted)?;
            Some(fitted.model)
        };
        let curvature = match mode {
            Mode::Curvature => Some(curvature_spec(&args.curvature, Some(&series), series.cap())?),
            _ => None,
        };
        let req = SimulationRequest {
            sid: sid.clone(),
            r_tilde,
            n_scenarios: args.scenarios,
            mode,
            seed: args.seed,
            curvature,
        };
        let set = simulate(&model, &weights, arma.as_ref(), &req).map_err(|e| infeasible(log, e))?;
        log.event(
            "simulate",
            &[
                ("mode", mode.to_string()),
                ("scenarios", set.len().to_string()),
                ("n_sid", set.x.len().to_string()),
                ("seed", args.seed.to_string()),
                ("expected_mape", (100.0 * set.target.expected_mare(&sid)).to_string()),
            ],
        );
        for (k, c) in set.curvature_stats.iter().enumerate() {
            log.event(
                "curvature",
                &[
                    ("scenario", (k + 1).to_string()),
                    ("objective", c.objective.to_string()),
                    ("bound", c.bound.to_string()),
                    ("gap", c.gap_achieved.to_string()),
                    ("nodes", c.nodes.to_string()),
                    ("budget_exhausted", c.budget_exhausted.to_string()),
                ],
            );
        }
        if !set.curvature_stats.is_empty() {
            let worst = set.curvature_stats.iter().map(|c| c.gap_achieved).fold(0.0, f64::max);
            let exhausted = set.curvature_stats.iter().filter(|c| c.budget_exhausted).count();
            log.event("curvature_summary", &[("max_gap", worst.to_string()), ("budget_exhausted", exhausted.to_string())]);
        }

        write_atomic(&args.output_dir.join("scenarios.csv"), set.to_csv_string()?.as_bytes())?;
        write_atomic(&args.output_dir.join("provenance.json"), set.provenance_json()?.as_bytes())?;
        write_json(&args.output_dir.join("target.json"), &set.target)?;
        write_json(&args.output_dir.join("adjusted.json"), &set.adjusted)?;

        let errors = series.errors();
        let report = score_report(
            ScoreInputs {
                scenarios: &set.scenarios,
                x: &set.x,
                r_tilde,
                input_errors: &errors,
                reference: series.y(),
            },
            mode.as_str(),
            args.scoring.score_lags,
            score_weights(&args.scoring)?,
            aggregation(&args.scoring),
            curvature_kind(&args.scoring),
        );
        match report {
            Ok(report) => {
                log_score(log, &report);
                print!("{}", report.table());
                write_json(&args.output_dir.join("scores.json"), &report)?;
            }
            Err(e) => log.event("score", &[("skipped", format!("{e}"))]),
        }
        log.event("done", &[("output_dir", args.output_dir.display().to_string())]);
        Ok(())
    })
}

fn log_score(log: &mut Log, r: &mare_forge::ScoreReport) {
    log.event(
        "score",
        &[
            ("s_mare", r.s_mare.to_string()),
            ("s_autocorr", r.s_autocorr.to_string()),
            ("s_second_diff", r.s_second_diff.to_string()),
            ("composite", r.composite.to_string()),
        ],
    );
}

fn smooth_cmd(args: &SmoothArgs) -> Result<()> {
    let mut log = Log::default();
    let table = ScenarioTable::load_csv(&args.scenarios).with_context(|| format!("loading {}", args.scenarios.display()))?;
    let series = match &args.data.input {
        Some(_) => Some(load_series(&args.data, &mut log)?),
        None => None,
    };
    let cap = match (args.data.cap, &series) {
        (Some(c), _) => c,
        (None, Some(s)) => s.cap(),
        (None, None) => bail!("--cap is required without --input"),
    };
    let spec = curvature_spec(&args.curvature, series.as_ref(), cap)?;
    let results = table
        .scenarios
        .iter()
        .map(|s| {
            let eps: Vec<f64> = s.iter().zip(&table.x).map(|(y, x)| y - x).collect();
            smooth(&table.x, &eps, &spec, cap)
        })
        .collect::<mare_forge::Result<Vec<_>>>()?;
    for (k, sol) in results.iter().enumerate() {
        log.event(
            "curvature",
            &[
                ("scenario", (k + 1).to_string()),
                ("objective", sol.objective.to_string()),
                ("gap", sol.gap_achieved.to_string()),
                ("nodes", sol.nodes.to_string()),
                ("budget_exhausted", sol.budget_exhausted.to_string()),
            ],
        );
    }
    let out = ScenarioTable {
        scenarios: results.into_iter().map(|s| s.y).collect(),
        ..table
    };
    let mut buf = Vec::new();
    out.write_csv(&mut buf)?;
    write_atomic(&args.output, &buf)?;
    log.event("done", &[("output", args.output.display().to_string())]);
    Ok(())
}

fn score_cmd(args: &ScoreArgs) -> Result<()> {
    let mut log = Log::default();
    let table = ScenarioTable::load_csv(&args.scenarios).with_context(|| format!("loading {}", args.scenarios.display()))?;
    let series = load_series(&args.data, &mut log)?;
    if !(args.target_mape >= 0.0) {
        bail!("--target-mape must be >= 0, got {}", args.target_mape);
    }
    let errors = series.errors();
    let report = score_report(
        ScoreInputs {
            scenarios: &table.scenarios,
            x: &table.x,
            r_tilde: args.target_mape / 100.0,
            input_errors: &errors,
            reference: series.y(),
        },
        &args.mode,
        args.scoring.score_lags,
        score_weights(&args.scoring)?,
        aggregation(&args.scoring),
        curvature_kind(&args.scoring),
    )?;
    log_score(&mut log, &report);
    print!("{}", report.table());
    if let Some(path) = &args.output {
        write_json(path, &report)?;
    }
    Ok(())
}

fn fixture_cmd(args: &FixtureArgs) -> Result<()> {
    let kind = match args.kind {
        KindArg::IidError => FixtureKind::IidError,
        KindArg::Ar1Error => FixtureKind::Ar1Error,
        KindArg::Heteroscedastic => FixtureKind::Heteroscedastic,
    };
    let series = make_fixture(kind, args.n, args.seed)?;
    let dir = args.output.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    save_csv(&series, tmp.path(), &CsvOptions::default())?;
    tmp.persist(&args.output).with_context(|| format!("writing {}", args.output.display()))?;
    let mut log = Log::default();
    log.event(
        "fixture",
        &[
            ("kind", kind.as_str().to_string()),
            ("n", args.n.to_string()),
            ("seed", args.seed.to_string()),
            ("cap", series.cap().to_string()),
            ("output", args.output.display().to_string()),
        ],
    );
    Ok(())
}
