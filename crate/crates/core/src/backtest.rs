//! Out-of-sample margin loan simulation and quantile reporting.
//!
//! Loans are simulated on realized prices under two policies:
//!
//! - default-and-liquidate: the borrower walks away at the first margin
//!   call and the collateral is sold one trading day later (same day when
//!   the call lands on the final day);
//! - top-up: the borrower deposits exactly the shortfall whenever the
//!   account dips to the maintenance line, and the cost of the loan is the
//!   terminal account value.
//!
//! A backtest runs a block of consecutive loan start dates, resolving the
//! margin system per date (searched from the trailing price window, the
//! regulatory benchmark, or a fixed pair) and aggregating outcomes into
//! quantile tables.

use crate::margin::{
    deduce_margin_system, indifference_set, required_system, MarginError, MarginSystem,
    OptimizerConfig, ADEQUACY_SLACK,
};
use crate::markov::{fit, MarkovError};
use crate::price::{PriceError, PriceSeries};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Quantile levels observed per stock: with min, max, and mean they make
/// the twelve statistics each stock reports.
pub const STOCK_LEVELS: [f64; 9] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
/// Quantile levels used when summarizing a statistic across stocks.
pub const SUMMARY_LEVELS: [f64; 4] = [0.7, 0.8, 0.9, 0.95];
/// Quantile levels for margin-call counts.
pub const CALL_LEVELS: [f64; 6] = [0.3, 0.5, 0.8, 0.9, 0.95, 0.99];

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest configuration: {0}")]
    InvalidConfig(String),
    #[error("series supplies {got} closes but the backtest needs {needed}")]
    InsufficientData { needed: usize, got: usize },
    #[error(
        "initial margin ratio {initial_margin_ratio} cannot support maintenance ratio \
         {maintenance_ratio}: deposit plus stock must cover the maintenance line at inception"
    )]
    InadequateInitialMargin {
        initial_margin_ratio: f64,
        maintenance_ratio: f64,
    },
    #[error("a loan needs the transaction price plus at least one later close, got {got}")]
    ShortPricePath { got: usize },
    #[error("quantile analysis needs at least one sample")]
    EmptySample,
    #[error("quantile level {0} outside [0, 1]")]
    InvalidLevel(f64),
    #[error(transparent)]
    Price(#[from] PriceError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Margin(#[from] MarginError),
}

/// What happens when a margin call arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CallPolicy {
    /// Borrower defaults; collateral is liquidated within one trading day.
    DefaultAndLiquidate,
    /// Borrower deposits the shortfall and the loan continues.
    TopUp,
}

impl CallPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            CallPolicy::DefaultAndLiquidate => "default",
            CallPolicy::TopUp => "topup",
        }
    }
}

/// Where each loan's margin system comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemSource {
    /// Search the trailing window and collapse the indifference set.
    Deduced,
    /// The regulatory benchmark (0.5, 1.3).
    Required,
    /// One fixed pair for every date.
    Fixed(MarginSystem),
}

impl SystemSource {
    pub fn label(&self) -> &'static str {
        match self {
            SystemSource::Deduced => "deduced",
            SystemSource::Required => "required",
            SystemSource::Fixed(_) => "fixed",
        }
    }
}

/// Backtest parameters. Defaults follow the engine's standard setup:
/// 800-day fitting windows grouped by 25, 30-day loans, 200 loans per
/// stock, and a 5% probability target for the search.
#[derive(Debug, Clone)]
pub struct BacktestConfig {
    pub depth: usize,
    pub group_size: usize,
    pub horizon: usize,
    pub loans: usize,
    pub daily_rate: f64,
    pub cpnr_target: f64,
    pub policy: CallPolicy,
    pub system_source: SystemSource,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            depth: 800,
            group_size: 25,
            horizon: 30,
            loans: 200,
            daily_rate: 0.0001,
            cpnr_target: 0.05,
            policy: CallPolicy::DefaultAndLiquidate,
            system_source: SystemSource::Deduced,
        }
    }
}

impl BacktestConfig {
    fn validate(&self) -> Result<(), BacktestError> {
        if self.depth < 2 {
            return Err(BacktestError::InvalidConfig(
                "window depth must be at least 2".into(),
            ));
        }
        if self.group_size == 0 {
            return Err(BacktestError::InvalidConfig(
                "group size must be positive".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(BacktestError::InvalidConfig(
                "loan horizon must be at least 1 day".into(),
            ));
        }
        if self.loans == 0 {
            return Err(BacktestError::InvalidConfig(
                "at least one loan is required".into(),
            ));
        }
        if !self.daily_rate.is_finite() || self.daily_rate <= -1.0 {
            return Err(BacktestError::InvalidConfig(format!(
                "daily rate must be a finite value above -1, got {}",
                self.daily_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.cpnr_target) {
            return Err(BacktestError::InvalidConfig(format!(
                "probability target must lie in [0, 1], got {}",
                self.cpnr_target
            )));
        }
        Ok(())
    }

    /// Closes the series must supply: full history for the first start
    /// date, one start per loan, and a full horizon after the last.
    pub fn required_series_length(&self) -> usize {
        self.depth + self.loans + self.horizon - 1
    }

    fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            horizon: self.horizon,
            daily_rate: self.daily_rate,
            cpnr_target: self.cpnr_target,
        }
    }
}

/// Result of simulating one loan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LoanOutcome {
    /// First day the remaining margin reached the line, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub call_day: Option<usize>,
    /// Day the collateral was sold (default policy only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub liquidation_day: Option<usize>,
    pub margin_called: bool,
    /// Lender's terminal position: liquidation proceeds plus the grown
    /// deposit minus the grown loan, or the end-of-horizon value when the
    /// loan ran to term.
    pub return_amount: f64,
    pub negative_return: bool,
    /// Days on which a positive deposit was demanded (top-up policy only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_calls: Option<usize>,
    /// Terminal account value: deposit and all top-ups, grown (top-up
    /// policy only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

/// A simulated loan with its date and system context.
#[derive(Debug, Clone, Serialize)]
pub struct LoanRecord {
    pub start_date: NaiveDate,
    pub start_index: usize,
    pub horizon: usize,
    pub initial_margin_ratio: f64,
    pub maintenance_ratio: f64,
    /// True when the search produced no candidates and the benchmark
    /// system was substituted.
    pub fallback: bool,
    #[serde(flatten)]
    pub outcome: LoanOutcome,
}

fn check_loan_inputs(
    prices: &[f64],
    initial_margin: f64,
    maintenance_ratio: f64,
) -> Result<(), BacktestError> {
    if prices.len() < 2 {
        return Err(BacktestError::ShortPricePath { got: prices.len() });
    }
    let ratio = initial_margin / prices[0];
    if ratio + 1.0 < maintenance_ratio - ADEQUACY_SLACK {
        return Err(BacktestError::InadequateInitialMargin {
            initial_margin_ratio: ratio,
            maintenance_ratio,
        });
    }
    Ok(())
}

/// Simulates a loan whose borrower defaults at the first margin call.
///
/// `prices` holds the transaction-day close followed by the close of every
/// loan day. A call lands on the first day the remaining margin
/// `Q0*(1+r)^i - (w*P0*(1+r)^i - P_i)` is zero or negative; the collateral
/// is then sold the next day, or the same day when the call arrives at the
/// end of the horizon.
pub fn simulate_loan_default(
    prices: &[f64],
    initial_margin: f64,
    maintenance_ratio: f64,
    daily_rate: f64,
) -> Result<LoanOutcome, BacktestError> {
    check_loan_inputs(prices, initial_margin, maintenance_ratio)?;
    let horizon = prices.len() - 1;
    let transaction_price = prices[0];
    let growth = 1.0 + daily_rate;
    let mut factor = 1.0;
    let mut call_day = None;
    // The day number drives the growth factor, so the indexed loop stays.
    #[allow(clippy::needless_range_loop)]
    for day in 1..=horizon {
        factor *= growth;
        let required = maintenance_ratio * transaction_price * factor - prices[day];
        let remaining = initial_margin * factor - required;
        if remaining <= 0.0 {
            call_day = Some(day);
            break;
        }
    }
    let settlement_day = match call_day {
        Some(day) => (day + 1).min(horizon),
        None => horizon,
    };
    let settlement_factor = growth.powi(settlement_day as i32);
    let return_amount = prices[settlement_day] + initial_margin * settlement_factor
        - transaction_price * settlement_factor;
    let margin_called = call_day.is_some();
    Ok(LoanOutcome {
        call_day,
        liquidation_day: call_day.map(|_| settlement_day),
        margin_called,
        return_amount,
        negative_return: margin_called && return_amount < 0.0,
        margin_calls: None,
        cost: None,
    })
}

/// Simulates a loan whose borrower meets every margin call.
///
/// The account starts at the deposit and grows daily; whenever it sinks to
/// the maintenance line the exact shortfall is added, so at most one
/// deposit per day and the remaining margin is restored to zero. The cost
/// is the terminal account value.
pub fn simulate_loan_topup(
    prices: &[f64],
    initial_margin: f64,
    maintenance_ratio: f64,
    daily_rate: f64,
) -> Result<LoanOutcome, BacktestError> {
    check_loan_inputs(prices, initial_margin, maintenance_ratio)?;
    let horizon = prices.len() - 1;
    let transaction_price = prices[0];
    let growth = 1.0 + daily_rate;
    let mut account = initial_margin;
    let mut factor = 1.0;
    let mut deposits = 0usize;
    let mut call_day = None;
    #[allow(clippy::needless_range_loop)]
    for day in 1..=horizon {
        account *= growth;
        factor *= growth;
        let required = maintenance_ratio * transaction_price * factor - prices[day];
        if account <= required {
            call_day = call_day.or(Some(day));
            if required - account > 0.0 {
                deposits += 1;
            }
            account = required;
        }
    }
    let settlement_factor = growth.powi(horizon as i32);
    let return_amount = prices[horizon] + initial_margin * settlement_factor
        - transaction_price * settlement_factor;
    Ok(LoanOutcome {
        call_day,
        liquidation_day: None,
        margin_called: deposits > 0,
        return_amount,
        negative_return: false,
        margin_calls: Some(deposits),
        cost: Some(account),
    })
}

/// Labeled summary of one sample set: min, max, mean, and quantiles by
/// linear interpolation between order statistics (position `p * (N-1)`,
/// zero-based).
#[derive(Debug, Clone, Serialize)]
pub struct QuantileTable {
    pub label: String,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
}

impl QuantileTable {
    /// Row labels in report order: min, max, mean, then one per level
    /// ("q20" for 0.20 and so on).
    pub fn statistic_labels(&self) -> Vec<String> {
        let mut labels = vec!["min".to_string(), "max".to_string(), "mean".to_string()];
        labels.extend(self.levels.iter().map(|&l| level_label(l)));
        labels
    }

    /// Values in the same order as [`statistic_labels`].
    ///
    /// [`statistic_labels`]: QuantileTable::statistic_labels
    pub fn statistic_values(&self) -> Vec<f64> {
        let mut values = vec![self.min, self.max, self.mean];
        values.extend(&self.quantiles);
        values
    }

    /// The quantile at an exact level from this table, if present.
    pub fn quantile_at(&self, level: f64) -> Option<f64> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .map(|i| self.quantiles[i])
    }
}

/// "q70" for 0.70, "q95" for 0.95, and so on.
pub fn level_label(level: f64) -> String {
    format!("q{}", (level * 100.0).round() as u32)
}

fn interpolated_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let position = level * (n - 1) as f64;
    let lower = position.floor() as usize;
    let upper = position.ceil() as usize;
    if lower == upper {
        sorted[lower]
    } else {
        let weight = position - lower as f64;
        sorted[lower] * (1.0 - weight) + sorted[upper] * weight
    }
}

/// Summarizes samples at the given levels. Errors on an empty sample set
/// or a level outside `[0, 1]`.
pub fn quantile_analysis(
    label: &str,
    samples: &[f64],
    levels: &[f64],
) -> Result<QuantileTable, BacktestError> {
    if samples.is_empty() {
        return Err(BacktestError::EmptySample);
    }
    for &level in levels {
        if !(0.0..=1.0).contains(&level) {
            return Err(BacktestError::InvalidLevel(level));
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let quantiles = levels
        .iter()
        .map(|&l| interpolated_quantile(&sorted, l))
        .collect();
    Ok(QuantileTable {
        label: label.to_string(),
        count: samples.len(),
        min,
        max,
        mean,
        levels: levels.to_vec(),
        quantiles,
    })
}

/// Full backtest of one stock: per-loan records plus aggregates and
/// quantile tables.
#[derive(Debug, Clone, Serialize)]
pub struct StockReport {
    pub ticker: String,
    pub policy: String,
    pub system_source: String,
    pub loan_count: usize,
    pub called_loans: usize,
    /// Total margin calls across loans: top-up deposits, or called loans
    /// under the default policy.
    pub total_margin_calls: usize,
    pub negative_returns: usize,
    pub negative_frequency: f64,
    pub tables: Vec<QuantileTable>,
    pub loans: Vec<LoanRecord>,
}

fn resolve_system(
    series: &PriceSeries,
    end_index: usize,
    config: &BacktestConfig,
) -> Result<(MarginSystem, bool), BacktestError> {
    match config.system_source {
        SystemSource::Required => Ok((required_system(), false)),
        SystemSource::Fixed(system) => Ok((system, false)),
        SystemSource::Deduced => deduced_system(series, end_index, config),
    }
}

fn deduced_system(
    series: &PriceSeries,
    end_index: usize,
    config: &BacktestConfig,
) -> Result<(MarginSystem, bool), BacktestError> {
    let window = series.window(end_index, config.depth)?;
    let (space, model) = fit(&window, config.group_size)?;
    let points = indifference_set(&model, &space, window.transaction_price(), &config.optimizer());
    Ok(match deduce_margin_system(&points) {
        Some(system) => (system, false),
        None => (required_system(), true),
    })
}

fn simulate_record(
    series: &PriceSeries,
    start_index: usize,
    system: &MarginSystem,
    fallback: bool,
    policy: CallPolicy,
    config: &BacktestConfig,
) -> Result<LoanRecord, BacktestError> {
    let closes = series.closes();
    let path = &closes[start_index..=start_index + config.horizon];
    let initial_margin = system.initial_margin_ratio * path[0];
    let outcome = match policy {
        CallPolicy::DefaultAndLiquidate => {
            simulate_loan_default(path, initial_margin, system.maintenance_ratio, config.daily_rate)?
        }
        CallPolicy::TopUp => {
            simulate_loan_topup(path, initial_margin, system.maintenance_ratio, config.daily_rate)?
        }
    };
    Ok(LoanRecord {
        start_date: series.date(start_index),
        start_index,
        horizon: config.horizon,
        initial_margin_ratio: system.initial_margin_ratio,
        maintenance_ratio: system.maintenance_ratio,
        fallback,
        outcome,
    })
}

fn loan_starts(config: &BacktestConfig) -> Vec<usize> {
    (0..config.loans).map(|k| config.depth - 1 + k).collect()
}

fn check_series(series: &PriceSeries, config: &BacktestConfig) -> Result<(), BacktestError> {
    config.validate()?;
    let needed = config.required_series_length();
    if series.len() < needed {
        return Err(BacktestError::InsufficientData {
            needed,
            got: series.len(),
        });
    }
    Ok(())
}

fn loan_calls(record: &LoanRecord) -> usize {
    record
        .outcome
        .margin_calls
        .unwrap_or(usize::from(record.outcome.margin_called))
}

fn stock_tables(
    records: &[LoanRecord],
    policy: CallPolicy,
) -> Result<Vec<QuantileTable>, BacktestError> {
    let margins: Vec<f64> = records.iter().map(|r| r.initial_margin_ratio).collect();
    let maintenances: Vec<f64> = records.iter().map(|r| r.maintenance_ratio).collect();
    let returns: Vec<f64> = records.iter().map(|r| r.outcome.return_amount).collect();
    let mut tables = vec![
        quantile_analysis("initial_margin_ratio", &margins, &STOCK_LEVELS)?,
        quantile_analysis("maintenance_ratio", &maintenances, &STOCK_LEVELS)?,
        quantile_analysis("return_amount", &returns, &STOCK_LEVELS)?,
    ];
    if policy == CallPolicy::TopUp {
        let calls: Vec<f64> = records.iter().map(|r| loan_calls(r) as f64).collect();
        let costs: Vec<f64> = records
            .iter()
            .map(|r| r.outcome.cost.expect("top-up outcome carries a cost"))
            .collect();
        tables.push(quantile_analysis("margin_calls", &calls, &CALL_LEVELS)?);
        tables.push(quantile_analysis("cost", &costs, &STOCK_LEVELS)?);
    }
    Ok(tables)
}

fn build_report(
    series: &PriceSeries,
    config: &BacktestConfig,
    records: Vec<LoanRecord>,
) -> Result<StockReport, BacktestError> {
    let called_loans = records.iter().filter(|r| r.outcome.margin_called).count();
    let total_margin_calls = records.iter().map(loan_calls).sum();
    let negative_returns = records
        .iter()
        .filter(|r| r.outcome.negative_return)
        .count();
    let tables = stock_tables(&records, config.policy)?;
    Ok(StockReport {
        ticker: series.ticker().to_string(),
        policy: config.policy.label().to_string(),
        system_source: config.system_source.label().to_string(),
        loan_count: records.len(),
        called_loans,
        total_margin_calls,
        negative_returns,
        negative_frequency: negative_returns as f64 / records.len() as f64,
        tables,
        loans: records,
    })
}

/// Backtests one stock: simulates a block of consecutive loans starting at
/// the first date with a full fitting window, resolving the margin system
/// per date. Loans run in parallel; the report is deterministic.
pub fn run_out_of_sample(
    series: &PriceSeries,
    config: &BacktestConfig,
) -> Result<StockReport, BacktestError> {
    check_series(series, config)?;
    let records: Result<Vec<LoanRecord>, BacktestError> = loan_starts(config)
        .par_iter()
        .map(|&start| {
            let (system, fallback) = resolve_system(series, start, config)?;
            simulate_record(series, start, &system, fallback, config.policy, config)
        })
        .collect();
    build_report(series, config, records?)
}

/// True when the share of negative returns stays within the target
/// (boundary inclusive). The report must hold at least one loan.
pub fn pass_test(report: &StockReport, target: f64) -> bool {
    assert!(report.loan_count > 0, "report holds no loans");
    report.negative_returns as f64 / report.loan_count as f64 <= target
}

/// One side of a two-system comparison.
#[derive(Debug, Clone, Serialize)]
pub struct SystemComparison {
    pub label: String,
    /// Margin calls per loan, averaged (top-up policy).
    pub mean_margin_calls: f64,
    pub total_margin_calls: usize,
    /// Negative returns under the default policy.
    pub negative_returns: usize,
    pub negative_frequency: f64,
    pub call_table: QuantileTable,
    pub cost_table: QuantileTable,
}

/// Relative difference of one statistic between the two systems.
#[derive(Debug, Clone, Serialize)]
pub struct RdEntry {
    pub statistic: String,
    pub deduced: f64,
    pub required: f64,
    /// `(deduced - required) / required`.
    pub rd: f64,
}

/// Two margin systems run over identical loan dates, each under both
/// policies: the default policy supplies negative-return counts, the
/// top-up policy supplies call counts and costs.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub ticker: String,
    pub loan_count: usize,
    pub deduced: SystemComparison,
    pub required: SystemComparison,
    /// Relative differences for every cost statistic.
    pub cost_rd: Vec<RdEntry>,
}

fn compare_side(
    series: &PriceSeries,
    config: &BacktestConfig,
    systems: &[(MarginSystem, bool)],
    label: &str,
) -> Result<SystemComparison, BacktestError> {
    let starts = loan_starts(config);
    let mut calls = Vec::with_capacity(starts.len());
    let mut costs = Vec::with_capacity(starts.len());
    let mut negative_returns = 0usize;
    let mut total_calls = 0usize;
    for (&start, (system, fallback)) in starts.iter().zip(systems) {
        let defaulting =
            simulate_record(series, start, system, *fallback, CallPolicy::DefaultAndLiquidate, config)?;
        if defaulting.outcome.negative_return {
            negative_returns += 1;
        }
        let topped =
            simulate_record(series, start, system, *fallback, CallPolicy::TopUp, config)?;
        let deposits = loan_calls(&topped);
        total_calls += deposits;
        calls.push(deposits as f64);
        costs.push(topped.outcome.cost.expect("top-up outcome carries a cost"));
    }
    let loan_count = starts.len();
    Ok(SystemComparison {
        label: label.to_string(),
        mean_margin_calls: total_calls as f64 / loan_count as f64,
        total_margin_calls: total_calls,
        negative_returns,
        negative_frequency: negative_returns as f64 / loan_count as f64,
        call_table: quantile_analysis("margin_calls", &calls, &CALL_LEVELS)?,
        cost_table: quantile_analysis("cost", &costs, &STOCK_LEVELS)?,
    })
}

fn cost_rd_entries(deduced: &QuantileTable, required: &QuantileTable) -> Vec<RdEntry> {
    deduced
        .statistic_labels()
        .into_iter()
        .zip(deduced.statistic_values())
        .zip(required.statistic_values())
        .map(|((statistic, d), r)| RdEntry {
            statistic,
            deduced: d,
            required: r,
            rd: if d == r { 0.0 } else { (d - r) / r },
        })
        .collect()
}

/// Compares two margin-system sources over identical loan dates. The
/// first source fills the report's `deduced` slot and the second its
/// `required` slot; labels carry the actual sources.
pub fn compare_sources(
    series: &PriceSeries,
    config: &BacktestConfig,
    first: SystemSource,
    second: SystemSource,
) -> Result<ComparisonReport, BacktestError> {
    check_series(series, config)?;
    let starts = loan_starts(config);
    let resolve_all = |source: SystemSource| -> Result<Vec<(MarginSystem, bool)>, BacktestError> {
        let source_config = BacktestConfig {
            system_source: source,
            ..config.clone()
        };
        starts
            .par_iter()
            .map(|&start| resolve_system(series, start, &source_config))
            .collect()
    };
    let first_systems = resolve_all(first)?;
    let second_systems = resolve_all(second)?;
    let deduced = compare_side(series, config, &first_systems, first.label())?;
    let required = compare_side(series, config, &second_systems, second.label())?;
    let cost_rd = cost_rd_entries(&deduced.cost_table, &required.cost_table);
    Ok(ComparisonReport {
        ticker: series.ticker().to_string(),
        loan_count: starts.len(),
        deduced,
        required,
        cost_rd,
    })
}

/// Searched systems against the regulatory benchmark over identical loan
/// dates.
pub fn compare_systems(
    series: &PriceSeries,
    config: &BacktestConfig,
) -> Result<ComparisonReport, BacktestError> {
    compare_sources(series, config, SystemSource::Deduced, SystemSource::Required)
}

/// One cost statistic summarized across stocks under both systems, with
/// the relative difference of the two 95% quantiles.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusCostRow {
    pub statistic: String,
    pub deduced: QuantileTable,
    pub required: QuantileTable,
    /// `(q95_deduced - q95_required) / q95_required`.
    pub rd: f64,
}

/// Corpus-level comparison: call counts and cost statistics aggregated
/// over stocks.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusComparison {
    pub stocks: usize,
    /// Per-stock total margin calls under each system.
    pub deduced_calls: QuantileTable,
    pub required_calls: QuantileTable,
    pub mean_calls_deduced: f64,
    pub mean_calls_required: f64,
    pub cost_rows: Vec<CorpusCostRow>,
}

/// Aggregates per-stock comparisons: the call-count tables summarize each
/// stock's total calls, and every cost statistic is summarized across
/// stocks with min, max, mean, and the 70/80/90/95% quantiles.
pub fn compare_corpus(reports: &[ComparisonReport]) -> Result<CorpusComparison, BacktestError> {
    if reports.is_empty() {
        return Err(BacktestError::EmptySample);
    }
    let deduced_totals: Vec<f64> = reports
        .iter()
        .map(|r| r.deduced.total_margin_calls as f64)
        .collect();
    let required_totals: Vec<f64> = reports
        .iter()
        .map(|r| r.required.total_margin_calls as f64)
        .collect();
    let deduced_calls = quantile_analysis("margin_calls", &deduced_totals, &CALL_LEVELS)?;
    let required_calls = quantile_analysis("margin_calls", &required_totals, &CALL_LEVELS)?;
    let labels = reports[0].deduced.cost_table.statistic_labels();
    let mut cost_rows = Vec::with_capacity(labels.len());
    for (index, statistic) in labels.iter().enumerate() {
        let deduced_samples: Vec<f64> = reports
            .iter()
            .map(|r| r.deduced.cost_table.statistic_values()[index])
            .collect();
        let required_samples: Vec<f64> = reports
            .iter()
            .map(|r| r.required.cost_table.statistic_values()[index])
            .collect();
        let deduced = quantile_analysis(statistic, &deduced_samples, &SUMMARY_LEVELS)?;
        let required = quantile_analysis(statistic, &required_samples, &SUMMARY_LEVELS)?;
        let d95 = deduced
            .quantile_at(0.95)
            .expect("summary levels include 0.95");
        let r95 = required
            .quantile_at(0.95)
            .expect("summary levels include 0.95");
        let rd = if d95 == r95 { 0.0 } else { (d95 - r95) / r95 };
        cost_rows.push(CorpusCostRow {
            statistic: statistic.clone(),
            deduced,
            required,
            rd,
        });
    }
    let mean_calls_deduced =
        deduced_totals.iter().sum::<f64>() / deduced_totals.len() as f64;
    let mean_calls_required =
        required_totals.iter().sum::<f64>() / required_totals.len() as f64;
    Ok(CorpusComparison {
        stocks: reports.len(),
        deduced_calls,
        required_calls,
        mean_calls_deduced,
        mean_calls_required,
        cost_rows,
    })
}
