//! Margin-lending risk engine.
//!
//! The library models a stock's daily closes as a finite-state chain over
//! grouped historical prices, evaluates the probability that a margin loan
//! ends with a loss given that a margin call occurs, searches initial and
//! maintenance margin grids for the cheapest pair meeting a probability
//! target, and backtests the resulting systems on out-of-sample prices.
//!
//! Modules build on one another in order: [`price`] ingests and generates
//! series, [`markov`] fits the chain and tests it, [`cpnr`] runs the loan
//! probability recursion, [`margin`] searches the grids, and [`backtest`]
//! simulates loans and aggregates reports. [`matrix`] and [`gamma`] are
//! the small numerical kernels underneath.

pub mod backtest;
pub mod cpnr;
pub mod gamma;
pub mod margin;
pub mod markov;
pub mod matrix;
pub mod price;

pub use backtest::{
    compare_corpus, compare_sources, compare_systems, pass_test, quantile_analysis,
    run_out_of_sample, BacktestConfig, BacktestError, CallPolicy, ComparisonReport,
    CorpusComparison, LoanOutcome, LoanRecord, QuantileTable, StockReport, SystemSource,
};
pub use cpnr::{
    cpnr, cpnr_exact_enumeration, prob_first_call, prob_loss_and_call, CpnrError,
    CpnrEvaluator, CpnrResult, LoanQuery,
};
pub use margin::{
    deduce_margin_system, indifference_set, individualized_maintenance, margin_dynamics,
    margin_schedule, required_system, DynamicsPoint, IndifferencePoint, MarginError,
    MarginSystem, OptimizerConfig,
};
pub use markov::{
    build_state_space, count_transitions, estimate_one_step, fit, markov_chi_square_test,
    CountMatrix, MarkovError, MarkovTestResult, StateSpace, TransitionModel,
};
pub use matrix::SquareMatrix;
pub use price::{
    generate_synthetic, load_price_csv, write_price_csv, PriceError, PriceSeries,
    PriceWindow, SyntheticSpec,
};
