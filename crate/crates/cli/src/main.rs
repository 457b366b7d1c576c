//! Command-line front end: smooth series, run backtests, search
//! parameters, and replay precomputed ledgers.
//!
//! Set `KALMAN_TREND_LOG=debug` for search progress logging.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use kalman_trend::backtest::{
    compute_report, execute, replay_ledger, Direction, ExecutionConfig, ReplayRow,
};
use kalman_trend::kalman::filter_series;
use kalman_trend::lag_algebra::{dema, ema, sma, tema, weighted_ma};
use kalman_trend::market_data::{parse_csv, BarSeries};
use kalman_trend::models::{build_spec, ModelConfig, ModelKind, ModelParams};
use kalman_trend::optimizer::{optimize, OptimizeConfig};
use kalman_trend::strategy::{run_strategy, StrategyConfig};

use output::{equity_csv, overlay_csv, trades_csv, Outputs};

#[derive(Parser)]
#[command(
    name = "kalman-trend",
    version,
    about = "Kalman-filter smoothing and trend backtesting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smooth a price series and emit overlay plot data
    Smooth(SmoothArgs),
    /// Run the prediction strategy and write ledger, report, and equity
    Backtest(BacktestArgs),
    /// Search model parameters for the best backtest objective
    Optimize(OptimizeArgs),
    /// Recompute profit columns for a precomputed trade list
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SmoothArgs {
    /// Input bar CSV (date,open,high,low,close[,volume])
    #[arg(long)]
    input: PathBuf,
    /// One of: sma, ema, dema, tema, kf1, kf2, kf3, kf4
    #[arg(long)]
    indicator: String,
    /// Moving-average period (sma/ema/dema/tema)
    #[arg(long, default_value_t = 12)]
    period: usize,
    /// Inline model parameters, comma-separated (kf indicators)
    #[arg(long)]
    params: Option<String>,
    /// Model config JSON path (alternative to --params)
    #[arg(long)]
    model: Option<String>,
    /// Filter warm-up bars (default: max(20, oscillator period))
    #[arg(long)]
    warmup: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BacktestArgs {
    /// Input bar CSV
    #[arg(long)]
    input: PathBuf,
    /// Model kind (one..four) with --params, or a model config JSON path
    #[arg(long)]
    model: String,
    /// Inline model parameters, comma-separated
    #[arg(long)]
    params: Option<String>,
    /// Entry dead band in index points
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    /// Warm-up bars (default: max(20, oscillator period))
    #[arg(long)]
    warmup: Option<usize>,
    /// Currency value of one index point per contract
    #[arg(long, default_value_t = 50.0)]
    point_value: f64,
    /// Round-trip commission per contract
    #[arg(long, default_value_t = 4.0)]
    commission: f64,
    /// Contracts per position
    #[arg(long, default_value_t = 1)]
    contracts: u32,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Input bar CSV
    #[arg(long)]
    input: PathBuf,
    /// Search-space JSON (model, bounds, grid, objective, budget, seed)
    #[arg(long)]
    space: PathBuf,
    /// Override the budget from the space file
    #[arg(long)]
    budget: Option<usize>,
    /// Override the seed from the space file
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trade list CSV (direction,entry_date,entry_price,exit_date,exit_price)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    point_value: f64,
    #[arg(long, default_value_t = 4.0)]
    commission: f64,
    #[arg(long, default_value_t = 1)]
    contracts: u32,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KALMAN_TREND_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Smooth(args) => cmd_smooth(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Replay(args) => cmd_replay(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_series(path: &Path) -> Result<BarSeries> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let instrument = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("SERIES")
        .to_string();
    Ok(parse_csv(file, instrument)?)
}

fn parse_inline_params(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .with_context(|| format!("bad parameter `{f}`"))
        })
        .collect()
}

/// Accepts either a model kind name plus inline parameters, or a path to
/// a model config JSON.
fn resolve_model(model: &str, params: Option<&str>) -> Result<ModelParams> {
    if let Ok(kind) = ModelKind::from_str(model) {
        let Some(text) = params else {
            bail!(
                "model `{model}` needs --params with {} comma-separated values",
                kind.param_count()
            )
        };
        return Ok(ModelParams::new(kind, parse_inline_params(text)?)?);
    }
    let text =
        fs::read_to_string(model).with_context(|| format!("reading model config {model}"))?;
    Ok(ModelConfig::from_json(&text)?.into_params()?)
}

fn cmd_smooth(args: SmoothArgs) -> Result<ExitCode> {
    let series = read_series(&args.input)?;
    let closes = series.closes();
    let mut outputs = Outputs::new(&args.out)?;

    let written = (|| -> Result<PathBuf> {
        let overlay = match args.indicator.as_str() {
            "sma" => overlay_csv(
                &series,
                Some(&weighted_ma(&closes, &sma(args.period)?)?),
                None,
            ),
            "ema" => overlay_csv(
                &series,
                Some(&weighted_ma(&closes, &ema(args.period)?)?),
                None,
            ),
            "dema" => overlay_csv(&series, Some(&dema(&closes, args.period)?), None),
            "tema" => overlay_csv(&series, Some(&tema(&closes, args.period)?), None),
            kf @ ("kf1" | "kf2" | "kf3" | "kf4") => {
                let kind = ModelKind::from_str(&kf[2..])?;
                let params = match (&args.model, &args.params) {
                    (Some(path), _) => {
                        let loaded = resolve_model(path, None)?;
                        if loaded.kind() != kind {
                            bail!(
                                "model config is `{}` but the indicator is {kf}",
                                loaded.kind()
                            );
                        }
                        loaded
                    }
                    (None, Some(inline)) => ModelParams::new(kind, parse_inline_params(inline)?)?,
                    (None, None) => bail!("{kf} needs --params or --model"),
                };
                let warmup = args
                    .warmup
                    .unwrap_or_else(|| StrategyConfig::for_model(&params).warmup);
                let spec = build_spec(&params, &series)?;
                let run = filter_series(&spec, &closes, warmup)?;
                overlay_csv(&series, None, Some(&run))
            }
            other => bail!("unknown indicator `{other}`"),
        };
        outputs.write("overlay.csv", &overlay)
    })();

    match written {
        Ok(path) => {
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            outputs.remove_all();
            Err(err)
        }
    }
}

fn cmd_backtest(args: BacktestArgs) -> Result<ExitCode> {
    let series = read_series(&args.input)?;
    let params = resolve_model(&args.model, args.params.as_deref())?;
    let warmup = args
        .warmup
        .unwrap_or_else(|| StrategyConfig::for_model(&params).warmup);
    let strategy_cfg = StrategyConfig::new(args.offset, warmup)?;
    let exec = ExecutionConfig {
        point_value: args.point_value,
        commission_round_trip: args.commission,
        contracts: args.contracts,
    };
    exec.check()?;

    let mut outputs = Outputs::new(&args.out)?;
    let result = (|| -> Result<ExitCode> {
        let signals = run_strategy(&series, &params, &strategy_cfg)?;
        let (trades, equity) = execute(&signals, &series, &exec);
        outputs.write("trades.csv", &trades_csv(&trades))?;
        outputs.write("equity.csv", &equity_csv(&equity))?;
        if trades.is_empty() {
            // Ledger and equity files stay for inspection.
            eprintln!(
                "no trades were closed (offset too wide?): {}",
                kalman_trend::Error::EmptyLedger
            );
            return Ok(ExitCode::from(2));
        }
        let span = (trades[0].entry_date, trades.last().unwrap().exit_date);
        let report = compute_report(&trades, &equity, span)?;
        outputs.write("report.json", &serde_json::to_string_pretty(&report)?)?;
        println!(
            "{} trades, net profit {:.1}, drawdown {:.1}, wrote {}",
            trades.len(),
            report.all.net_profit,
            report.all.drawdown,
            args.out.display()
        );
        Ok(ExitCode::SUCCESS)
    })();
    if result.is_err() {
        outputs.remove_all();
    }
    result
}

fn cmd_optimize(args: OptimizeArgs) -> Result<ExitCode> {
    let series = read_series(&args.input)?;
    let text = fs::read_to_string(&args.space)
        .with_context(|| format!("reading {}", args.space.display()))?;
    let mut cfg = OptimizeConfig::from_json(&text)?;
    if let Some(budget) = args.budget {
        cfg.budget = budget;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let space = cfg.space()?;

    let mut outputs = Outputs::new(&args.out)?;
    let result = (|| -> Result<ExitCode> {
        let result = optimize(
            &series,
            cfg.model,
            &space,
            cfg.objective,
            cfg.budget,
            cfg.seed,
        )?;

        let summary = serde_json::json!({
            "model": cfg.model,
            "objective": cfg.objective,
            "budget": cfg.budget,
            "seed": cfg.seed,
            "best_params": result.best_params.params(),
            "best_objective": result.best_objective,
            "evaluations": result.evaluations,
        });
        outputs.write("result.json", &serde_json::to_string_pretty(&summary)?)?;

        let mut trace = String::from("evaluation,");
        trace.push_str(
            &(1..=space.dim())
                .map(|i| format!("p{i}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        trace.push_str(",objective\n");
        for (i, e) in result.trace.iter().enumerate() {
            let params: Vec<String> = e.params.iter().map(|p| format!("{p}")).collect();
            trace.push_str(&format!("{},{},{}\n", i + 1, params.join(","), e.objective));
        }
        outputs.write("trace.csv", &trace)?;

        println!(
            "best {} = {:.1} after {} evaluations",
            cfg.objective.name(),
            result.best_objective,
            result.evaluations
        );
        Ok(ExitCode::SUCCESS)
    })();
    if result.is_err() {
        outputs.remove_all();
    }
    result
}

fn parse_ledger_csv(path: &Path) -> Result<Vec<ReplayRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header))
            if header.trim() == "direction,entry_date,entry_price,exit_date,exit_price" => {}
        Some((_, other)) => bail!("unexpected ledger header `{other}`"),
        None => bail!("empty ledger file"),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            bail!("line {}: expected 5 fields, got {}", idx + 1, fields.len());
        }
        rows.push(ReplayRow {
            direction: Direction::from_str(fields[0])?,
            entry_date: NaiveDate::from_str(fields[1])
                .with_context(|| format!("line {}: bad date", idx + 1))?,
            entry_price: fields[2]
                .parse()
                .with_context(|| format!("line {}: bad price", idx + 1))?,
            exit_date: NaiveDate::from_str(fields[3])
                .with_context(|| format!("line {}: bad date", idx + 1))?,
            exit_price: fields[4]
                .parse()
                .with_context(|| format!("line {}: bad price", idx + 1))?,
        });
    }
    Ok(rows)
}

fn cmd_replay(args: ReplayArgs) -> Result<ExitCode> {
    let rows = parse_ledger_csv(&args.input)?;
    let exec = ExecutionConfig {
        point_value: args.point_value,
        commission_round_trip: args.commission,
        contracts: args.contracts,
    };
    exec.check()?;
    let trades = replay_ledger(&rows, &exec);

    let mut outputs = Outputs::new(&args.out)?;
    let result = (|| -> Result<ExitCode> {
        outputs.write("trades.csv", &trades_csv(&trades))?;
        if let Some(last) = trades.last() {
            let span = (trades[0].entry_date, last.exit_date);
            let report = compute_report(&trades, &[], span)?;
            outputs.write("report.json", &serde_json::to_string_pretty(&report)?)?;
            println!(
                "{} trades, final PnL {:.1}",
                trades.len(),
                last.cumulative_pnl
            );
        } else {
            println!("0 trades, final PnL 0.0");
        }
        Ok(ExitCode::SUCCESS)
    })();
    if result.is_err() {
        outputs.remove_all();
    }
    result
}
