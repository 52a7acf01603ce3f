//! Command-line front end for the margin risk engine: price ingestion,
//! chain diagnostics, loan call and loss probabilities, margin-system
//! search, and backtest reports.
//!
//! Reports are deterministic: JSON is emitted with sorted keys and fixed
//! six-decimal floats, CSV with the same float formatting, so identical
//! inputs and flags produce byte-identical output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use margin_engine::backtest::{
    compare_systems, run_out_of_sample, BacktestConfig, CallPolicy, QuantileTable, SystemSource,
};
use margin_engine::cpnr::{cpnr, LoanQuery};
use margin_engine::margin::{
    deduce_margin_system, indifference_set, individualized_maintenance, margin_dynamics,
    required_system, MarginSystem, OptimizerConfig,
};
use margin_engine::markov::{count_transitions, fit, markov_chi_square_test, StateSpace, TransitionModel};
use margin_engine::price::{
    generate_synthetic, load_price_csv, write_price_csv, PriceSeries, PriceWindow, SyntheticSpec,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "margin-engine",
    version,
    about = "Margin lending risk engine: fitted price chains, margin call and loss probabilities, \
             margin system search, and loan backtests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FitArgs {
    /// Price history CSV with a date,close header
    #[arg(long, value_name = "PATH")]
    prices: PathBuf,
    /// Trading days in the fitting window
    #[arg(long, default_value_t = 800)]
    depth: usize,
    /// Distinct sorted prices merged into one chain state
    #[arg(long, default_value_t = 25)]
    group: usize,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report to this file instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Borrower defaults at the first call; collateral is liquidated
    Default,
    /// Borrower deposits every shortfall and the loan runs to term
    Topup,
}

impl From<Mode> for CallPolicy {
    fn from(mode: Mode) -> CallPolicy {
        match mode {
            Mode::Default => CallPolicy::DefaultAndLiquidate,
            Mode::Topup => CallPolicy::TopUp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load a price CSV and report its shape
    Ingest {
        /// Price history CSV with a date,close header
        #[arg(long, value_name = "PATH")]
        prices: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Chi-square screen of the fitted chain against independence
    MarkovTest {
        #[command(flatten)]
        fit: FitArgs,
        /// Transaction date (ISO); defaults to the last date in the file
        #[arg(long)]
        date: Option<NaiveDate>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Margin call and liquidation loss probabilities for one loan
    Cpnr {
        #[command(flatten)]
        fit: FitArgs,
        /// Initial margin deposit (cash amount)
        #[arg(long)]
        q0: f64,
        /// Maintenance margin ratio
        #[arg(long)]
        w: f64,
        /// Daily interest rate on deposit and loan
        #[arg(long, default_value_t = 0.0001)]
        r: f64,
        /// Loan period in trading days
        #[arg(long, default_value_t = 30)]
        horizon: usize,
        /// Transaction date (ISO); defaults to the last date in the file
        #[arg(long)]
        date: Option<NaiveDate>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Search maintenance ratios and deduce a margin system at one date
    Margin {
        #[command(flatten)]
        fit: FitArgs,
        /// Largest acceptable conditional probability of negative return
        #[arg(long, default_value_t = 0.05)]
        target: f64,
        /// Initial margin deposit; when given, only its maintenance ratio is searched
        #[arg(long)]
        q0: Option<f64>,
        /// Daily interest rate on deposit and loan
        #[arg(long, default_value_t = 0.0001)]
        r: f64,
        /// Loan period in trading days
        #[arg(long, default_value_t = 30)]
        horizon: usize,
        /// Transaction date (ISO); defaults to the last date in the file
        #[arg(long)]
        date: Option<NaiveDate>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Deduce margin systems over the most recent run of dates
    Dynamics {
        #[command(flatten)]
        fit: FitArgs,
        /// Number of most recent eligible dates to cover
        #[arg(long, default_value_t = 30)]
        last: usize,
        /// Largest acceptable conditional probability of negative return
        #[arg(long, default_value_t = 0.05)]
        target: f64,
        /// Daily interest rate on deposit and loan
        #[arg(long, default_value_t = 0.0001)]
        r: f64,
        /// Loan period in trading days
        #[arg(long, default_value_t = 30)]
        horizon: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Backtest a block of consecutive loans on one stock
    Backtest {
        #[command(flatten)]
        fit: FitArgs,
        /// What happens at a margin call
        #[arg(long, value_enum, default_value_t = Mode::Default)]
        mode: Mode,
        /// Margin system per loan: deduced, required, or fixed:m,w
        #[arg(long, value_parser = parse_system, default_value = "deduced")]
        system: SystemSource,
        /// Largest acceptable conditional probability of negative return
        #[arg(long, default_value_t = 0.05)]
        target: f64,
        /// Number of consecutive loans
        #[arg(long, default_value_t = 200)]
        loans: usize,
        /// Daily interest rate on deposit and loan
        #[arg(long, default_value_t = 0.0001)]
        r: f64,
        /// Loan period in trading days
        #[arg(long, default_value_t = 30)]
        horizon: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run deduced and required systems over identical loans and compare
    Compare {
        #[command(flatten)]
        fit: FitArgs,
        /// Largest acceptable conditional probability of negative return
        #[arg(long, default_value_t = 0.05)]
        target: f64,
        /// Number of consecutive loans
        #[arg(long, default_value_t = 200)]
        loans: usize,
        /// Daily interest rate on deposit and loan
        #[arg(long, default_value_t = 0.0001)]
        r: f64,
        /// Loan period in trading days
        #[arg(long, default_value_t = 30)]
        horizon: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Generate a seeded synthetic price CSV
    Synth {
        /// Number of trading days
        #[arg(long, default_value_t = 1030)]
        length: usize,
        /// Price on the first day
        #[arg(long, default_value_t = 10.0)]
        start_price: f64,
        /// Daily multiplicative moves as step:probability pairs
        #[arg(long, value_parser = parse_steps, default_value = "0.99:0.5,1.01:0.5")]
        steps: Steps,
        /// Random seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the series to this file instead of stdout
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn parse_system(text: &str) -> Result<SystemSource, String> {
    match text {
        "deduced" => Ok(SystemSource::Deduced),
        "required" => Ok(SystemSource::Required),
        other => {
            let rest = other
                .strip_prefix("fixed:")
                .ok_or("expected deduced, required, or fixed:m,w")?;
            let (margin, maintenance) = rest
                .split_once(',')
                .ok_or("a fixed system needs two ratios, like fixed:0.5,1.3")?;
            let number = |value: &str, name: &str| {
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| format!("{name} ratio {value:?} is not a number"))
            };
            let system = MarginSystem::new(
                number(margin, "initial margin")?,
                number(maintenance, "maintenance")?,
            )
            .map_err(|e| e.to_string())?;
            Ok(SystemSource::Fixed(system))
        }
    }
}

#[derive(Clone, Debug)]
struct Steps(Vec<(f64, f64)>);

fn parse_steps(text: &str) -> Result<Steps, String> {
    let mut moves = Vec::new();
    for part in text.split(',') {
        let (step, probability) = part
            .split_once(':')
            .ok_or_else(|| format!("move {part:?} is not a step:probability pair"))?;
        let step = step
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("step {step:?} is not a number"))?;
        let probability = probability
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("probability {probability:?} is not a number"))?;
        moves.push((step, probability));
    }
    Ok(Steps(moves))
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("MARGIN_ENGINE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("MARGIN_ENGINE_THREADS must be a non-negative integer, got {raw:?}"))?;
    if threads > 0 {
        // A failure here means a pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

/// Serializes with sorted object keys and fixed six-decimal floats, so the
/// same report always produces the same bytes.
fn write_canonical(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(v) = n.as_i64() {
                let _ = write!(out, "{v}");
            } else if let Some(v) = n.as_u64() {
                let _ = write!(out, "{v}");
            } else {
                let _ = write!(out, "{:.6}", n.as_f64().expect("numeric value"));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings always encode"))
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_canonical(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&serde_json::to_string(key).expect("strings always encode"));
                out.push_str(": ");
                write_canonical(&map[key], indent + 1, out);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, 0, &mut out);
    out.push('\n');
    out
}

fn csv_escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn leaf_text(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if let Some(v) = n.as_i64() {
                v.to_string()
            } else if let Some(v) = n.as_u64() {
                v.to_string()
            } else {
                format!("{:.6}", n.as_f64().expect("numeric value"))
            }
        }
        Value::String(s) => s.clone(),
        _ => unreachable!("containers are flattened before this point"),
    }
}

fn flatten_value(value: &Value, path: &str, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for key in keys {
                let child = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                flatten_value(&map[key], &child, rows);
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                let child = if path.is_empty() {
                    i.to_string()
                } else {
                    format!("{path}.{i}")
                };
                flatten_value(item, &child, rows);
            }
        }
        leaf => rows.push((path.to_string(), leaf_text(leaf))),
    }
}

/// Fallback CSV shape for scalar reports: one key,value row per leaf.
fn key_value_csv(value: &Value) -> String {
    let mut rows = Vec::new();
    flatten_value(value, "", &mut rows);
    let mut out = String::from("key,value\n");
    for (key, cell) in rows {
        out.push_str(&csv_escape(&key));
        out.push(',');
        out.push_str(&csv_escape(&cell));
        out.push('\n');
    }
    out
}

/// Quantile tables flatten to one statistic per row under this header; a
/// table without a 70..95% level leaves that cell empty.
const TABLE_HEADER: &str = "statistic,min,max,mean,q70,q80,q90,q95";

fn table_csv_row(label: &str, table: &QuantileTable) -> String {
    let cell = |level: f64| {
        table
            .quantile_at(level)
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default()
    };
    format!(
        "{},{:.6},{:.6},{:.6},{},{},{},{}",
        csv_escape(label),
        table.min,
        table.max,
        table.mean,
        cell(0.7),
        cell(0.8),
        cell(0.9),
        cell(0.95)
    )
}

fn emit(text: String, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_value(value: &Value, output: &OutputArgs) -> Result<(), String> {
    let text = match output.format {
        Format::Json => canonical_json(value),
        Format::Csv => key_value_csv(value),
    };
    emit(text, output.out.as_deref())
}

fn load_series(path: &Path) -> Result<PriceSeries, String> {
    load_price_csv(path).map_err(|e| e.to_string())
}

fn resolve_end(series: &PriceSeries, date: Option<NaiveDate>) -> Result<usize, String> {
    match date {
        None => Ok(series.len() - 1),
        Some(date) => series
            .index_of(date)
            .ok_or_else(|| format!("date {date} is not a trading day in the series")),
    }
}

fn fit_at(
    series: &PriceSeries,
    args: &FitArgs,
    date: Option<NaiveDate>,
) -> Result<(usize, PriceWindow, StateSpace, TransitionModel), String> {
    let end = resolve_end(series, date)?;
    let window = series.window(end, args.depth).map_err(|e| e.to_string())?;
    let (space, model) = fit(&window, args.group).map_err(|e| e.to_string())?;
    Ok((end, window, space, model))
}

fn run_ingest(prices: &Path, output: &OutputArgs) -> Result<(), String> {
    let series = load_series(prices)?;
    let closes = series.closes();
    let min = closes.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = closes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let value = json!({
        "ticker": series.ticker(),
        "rows": series.len(),
        "first_date": series.date(0).to_string(),
        "last_date": series.date(series.len() - 1).to_string(),
        "min_close": min,
        "max_close": max,
    });
    emit_value(&value, output)
}

fn run_markov_test(
    fit_args: &FitArgs,
    date: Option<NaiveDate>,
    output: &OutputArgs,
) -> Result<(), String> {
    let series = load_series(&fit_args.prices)?;
    let (end, window, space, _) = fit_at(&series, fit_args, date)?;
    let counts = count_transitions(&window, &space).map_err(|e| e.to_string())?;
    let result = markov_chi_square_test(&counts).map_err(|e| e.to_string())?;
    let value = json!({
        "date": series.date(end).to_string(),
        "depth": fit_args.depth,
        "group": fit_args.group,
        "states": space.len(),
        "chi_square": result.chi_square,
        "degrees_of_freedom": result.degrees_of_freedom,
        "p_value": result.p_value,
        "effective_states": result.effective_states,
    });
    emit_value(&value, output)
}

#[allow(clippy::too_many_arguments)]
fn run_cpnr(
    fit_args: &FitArgs,
    q0: f64,
    w: f64,
    r: f64,
    horizon: usize,
    date: Option<NaiveDate>,
    output: &OutputArgs,
) -> Result<(), String> {
    let series = load_series(&fit_args.prices)?;
    let (end, window, space, model) = fit_at(&series, fit_args, date)?;
    let transaction_price = window.transaction_price();
    let query = LoanQuery::for_price(&space, transaction_price, q0, w, r, horizon);
    let result = cpnr(&model, &space, &query);
    let mut value = serde_json::to_value(&result).map_err(|e| e.to_string())?;
    let map = value.as_object_mut().expect("result serializes to an object");
    map.insert("date".into(), json!(series.date(end).to_string()));
    map.insert("transaction_price".into(), json!(transaction_price));
    map.insert("start_state".into(), json!(query.start_state));
    map.insert("states".into(), json!(space.len()));
    emit_value(&value, output)
}

#[allow(clippy::too_many_arguments)]
fn run_margin(
    fit_args: &FitArgs,
    target: f64,
    q0: Option<f64>,
    r: f64,
    horizon: usize,
    date: Option<NaiveDate>,
    output: &OutputArgs,
) -> Result<(), String> {
    let series = load_series(&fit_args.prices)?;
    let (end, window, space, model) = fit_at(&series, fit_args, date)?;
    let transaction_price = window.transaction_price();
    let config = OptimizerConfig {
        horizon,
        daily_rate: r,
        cpnr_target: target,
    };
    let value = match q0 {
        Some(q0) => {
            if !(q0.is_finite() && q0 > 0.0) {
                return Err(format!("initial margin must be positive, got {q0}"));
            }
            let ratio = q0 / transaction_price;
            let point = individualized_maintenance(&model, &space, transaction_price, ratio, &config);
            let mut value = json!({
                "date": series.date(end).to_string(),
                "transaction_price": transaction_price,
                "initial_margin": q0,
                "initial_margin_ratio": ratio,
                "found": point.is_some(),
            });
            if let Some(point) = point {
                let map = value.as_object_mut().expect("object");
                map.insert("maintenance_ratio".into(), json!(point.maintenance_ratio));
                map.insert("cpnr".into(), json!(point.cpnr));
            }
            value
        }
        None => {
            let points = indifference_set(&model, &space, transaction_price, &config);
            let (system, fallback) = match deduce_margin_system(&points) {
                Some(system) => (system, false),
                None => (required_system(), true),
            };
            json!({
                "date": series.date(end).to_string(),
                "transaction_price": transaction_price,
                "fallback": fallback,
                "initial_margin_ratio": system.initial_margin_ratio,
                "maintenance_ratio": system.maintenance_ratio,
                "indifference_set": serde_json::to_value(&points).map_err(|e| e.to_string())?,
            })
        }
    };
    emit_value(&value, output)
}

fn run_dynamics(
    fit_args: &FitArgs,
    last: usize,
    target: f64,
    r: f64,
    horizon: usize,
    output: &OutputArgs,
) -> Result<(), String> {
    let series = load_series(&fit_args.prices)?;
    if series.len() < fit_args.depth {
        return Err(format!(
            "series holds {} closes but the fitting window needs {}",
            series.len(),
            fit_args.depth
        ));
    }
    if last == 0 {
        return Err("at least one date is required".into());
    }
    let eligible: Vec<usize> = (fit_args.depth - 1..series.len()).collect();
    let tail = eligible.len().saturating_sub(last);
    let ends = &eligible[tail..];
    let config = OptimizerConfig {
        horizon,
        daily_rate: r,
        cpnr_target: target,
    };
    let points = margin_dynamics(&series, ends, fit_args.depth, fit_args.group, &config)
        .map_err(|e| e.to_string())?;
    match output.format {
        Format::Json => {
            let value = serde_json::to_value(&points).map_err(|e| e.to_string())?;
            emit(canonical_json(&value), output.out.as_deref())
        }
        Format::Csv => {
            let mut text = String::from("date,initial_margin_ratio,maintenance_ratio,fallback\n");
            for point in &points {
                let _ = writeln!(
                    text,
                    "{},{:.6},{:.6},{}",
                    point.date, point.initial_margin_ratio, point.maintenance_ratio, point.fallback
                );
            }
            emit(text, output.out.as_deref())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_backtest(
    fit_args: &FitArgs,
    mode: Mode,
    system: SystemSource,
    target: f64,
    loans: usize,
    r: f64,
    horizon: usize,
    output: &OutputArgs,
) -> Result<(), String> {
    let series = load_series(&fit_args.prices)?;
    let config = BacktestConfig {
        depth: fit_args.depth,
        group_size: fit_args.group,
        horizon,
        loans,
        daily_rate: r,
        cpnr_target: target,
        policy: mode.into(),
        system_source: system,
    };
    let report = run_out_of_sample(&series, &config).map_err(|e| e.to_string())?;
    match output.format {
        Format::Json => {
            let value = serde_json::to_value(&report).map_err(|e| e.to_string())?;
            emit(canonical_json(&value), output.out.as_deref())
        }
        Format::Csv => {
            let mut text = String::from(TABLE_HEADER);
            text.push('\n');
            for table in &report.tables {
                text.push_str(&table_csv_row(&table.label, table));
                text.push('\n');
            }
            emit(text, output.out.as_deref())
        }
    }
}

fn run_compare(
    fit_args: &FitArgs,
    target: f64,
    loans: usize,
    r: f64,
    horizon: usize,
    output: &OutputArgs,
) -> Result<(), String> {
    let series = load_series(&fit_args.prices)?;
    let config = BacktestConfig {
        depth: fit_args.depth,
        group_size: fit_args.group,
        horizon,
        loans,
        daily_rate: r,
        cpnr_target: target,
        ..BacktestConfig::default()
    };
    let report = compare_systems(&series, &config).map_err(|e| e.to_string())?;
    match output.format {
        Format::Json => {
            let value = serde_json::to_value(&report).map_err(|e| e.to_string())?;
            emit(canonical_json(&value), output.out.as_deref())
        }
        Format::Csv => {
            let mut text = String::from(TABLE_HEADER);
            text.push('\n');
            for (label, table) in [
                ("deduced_margin_calls", &report.deduced.call_table),
                ("deduced_cost", &report.deduced.cost_table),
                ("required_margin_calls", &report.required.call_table),
                ("required_cost", &report.required.cost_table),
            ] {
                text.push_str(&table_csv_row(label, table));
                text.push('\n');
            }
            emit(text, output.out.as_deref())
        }
    }
}

fn run_synth(
    length: usize,
    start_price: f64,
    steps: &Steps,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), String> {
    let spec = SyntheticSpec {
        length,
        start_price,
        daily_move_distribution: steps.0.clone(),
        seed,
    };
    let series = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    match out {
        Some(path) => write_price_csv(&series, path).map_err(|e| e.to_string()),
        None => {
            let mut text = String::from("date,close\n");
            for i in 0..series.len() {
                let _ = writeln!(text, "{},{}", series.date(i), series.close(i));
            }
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    configure_threads()?;
    match &cli.command {
        Command::Ingest { prices, output } => run_ingest(prices, output),
        Command::MarkovTest { fit, date, output } => run_markov_test(fit, *date, output),
        Command::Cpnr {
            fit,
            q0,
            w,
            r,
            horizon,
            date,
            output,
        } => run_cpnr(fit, *q0, *w, *r, *horizon, *date, output),
        Command::Margin {
            fit,
            target,
            q0,
            r,
            horizon,
            date,
            output,
        } => run_margin(fit, *target, *q0, *r, *horizon, *date, output),
        Command::Dynamics {
            fit,
            last,
            target,
            r,
            horizon,
            output,
        } => run_dynamics(fit, *last, *target, *r, *horizon, output),
        Command::Backtest {
            fit,
            mode,
            system,
            target,
            loans,
            r,
            horizon,
            output,
        } => run_backtest(fit, *mode, *system, *target, *loans, *r, *horizon, output),
        Command::Compare {
            fit,
            target,
            loans,
            r,
            horizon,
            output,
        } => run_compare(fit, *target, *loans, *r, *horizon, output),
        Command::Synth {
            length,
            start_price,
            steps,
            seed,
            out,
        } => run_synth(*length, *start_price, steps, *seed, out.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(message) = run(cli) {
        eprint!("{}", canonical_json(&json!({ "error": message })));
        std::process::exit(1);
    }
}
