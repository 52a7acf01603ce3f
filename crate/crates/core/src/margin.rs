//! Margin systems and the search for individualized margin requirements.
//!
//! A margin system is a pair `(initial margin ratio, maintenance ratio)`.
//! For a loan on stock worth `P0`, the borrower deposits `Q0 = m * P0` and
//! must keep the collateral value above `w * P0`, both sides accruing at
//! the daily rate. For each initial margin ratio on a fixed grid, the
//! search finds the smallest adequate maintenance ratio whose conditional
//! probability of negative return stays within a target; the resulting set
//! of pairs is collapsed to the member closest to its centroid, which is
//! the margin system the engine recommends for that stock and date.

use crate::cpnr::{CpnrEvaluator, LoanQuery};
use crate::markov::{fit, MarkovError, StateSpace, TransitionModel};
use crate::price::{PriceError, PriceSeries};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Tolerance for the adequacy comparison, so grid points that sit exactly
/// on the boundary (for example 0.3 and 1.3) are not rejected over float
/// rounding.
pub const ADEQUACY_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MarginError {
    #[error("invalid margin system: {0}")]
    InvalidSystem(String),
    #[error(transparent)]
    Price(#[from] PriceError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// Initial margin ratios searched: 0.01, 0.02, ..., 1.00.
pub fn initial_margin_grid() -> impl Iterator<Item = f64> {
    (1..=100).map(|i| i as f64 / 100.0)
}

/// Maintenance ratios searched: 1.01, 1.02, ..., 1.50.
pub fn maintenance_grid() -> impl Iterator<Item = f64> {
    (101..=150).map(|i| i as f64 / 100.0)
}

/// An initial margin ratio paired with a maintenance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginSystem {
    pub initial_margin_ratio: f64,
    pub maintenance_ratio: f64,
}

impl MarginSystem {
    /// Validates the ranges: the initial margin ratio must be positive and
    /// the maintenance ratio above 1 (otherwise a call could never bind).
    pub fn new(initial_margin_ratio: f64, maintenance_ratio: f64) -> Result<Self, MarginError> {
        if !initial_margin_ratio.is_finite() || initial_margin_ratio <= 0.0 {
            return Err(MarginError::InvalidSystem(format!(
                "initial margin ratio must be positive, got {initial_margin_ratio}"
            )));
        }
        if !maintenance_ratio.is_finite() || maintenance_ratio <= 1.0 {
            return Err(MarginError::InvalidSystem(format!(
                "maintenance ratio must exceed 1, got {maintenance_ratio}"
            )));
        }
        Ok(MarginSystem {
            initial_margin_ratio,
            maintenance_ratio,
        })
    }

    /// A system is adequate when the deposit plus the stock covers the
    /// maintenance requirement at inception: `m + 1 >= w`, with slack for
    /// float rounding on the boundary.
    pub fn is_adequate(&self) -> bool {
        self.initial_margin_ratio + 1.0 >= self.maintenance_ratio - ADEQUACY_SLACK
    }
}

/// The margin system mandated for Chinese margin accounts: 50% initial
/// margin and a 130% maintenance line. Used as the benchmark the deduced
/// systems are compared against, and as the fallback when the search
/// produces no candidates.
pub fn required_system() -> MarginSystem {
    MarginSystem {
        initial_margin_ratio: 0.5,
        maintenance_ratio: 1.3,
    }
}

/// One day of a margin account's bookkeeping on a realized price path.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScheduleRow {
    /// Trading day, 1-based from the transaction date.
    pub day: usize,
    /// Stock price on that day.
    pub price: f64,
    /// Additional margin the maintenance line demands:
    /// `w * P0 * (1+r)^day - price`.
    pub required_margin: f64,
    /// Margin still in hand before a call:
    /// `Q0 * (1+r)^day - required_margin`.
    pub remaining_margin: f64,
}

/// Book the account day by day along `prices` (day 1 onward). The two
/// columns always satisfy `required + remaining = Q0 * (1+r)^day`.
pub fn margin_schedule(
    transaction_price: f64,
    system: &MarginSystem,
    daily_rate: f64,
    prices: &[f64],
) -> Vec<ScheduleRow> {
    let deposit = system.initial_margin_ratio * transaction_price;
    let maintenance = system.maintenance_ratio * transaction_price;
    let growth = 1.0 + daily_rate;
    let mut factor = 1.0;
    prices
        .iter()
        .enumerate()
        .map(|(i, &price)| {
            factor *= growth;
            let required_margin = maintenance * factor - price;
            let remaining_margin = deposit * factor - required_margin;
            ScheduleRow {
                day: i + 1,
                price,
                required_margin,
                remaining_margin,
            }
        })
        .collect()
}

/// Parameters of the maintenance-ratio search.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    /// Loan period in trading days.
    pub horizon: usize,
    /// Daily rate applied to deposit and loan alike.
    pub daily_rate: f64,
    /// Largest acceptable conditional probability of negative return.
    pub cpnr_target: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            horizon: 30,
            daily_rate: 0.0001,
            cpnr_target: 0.05,
        }
    }
}

/// A grid pair that meets the target, with the probability it achieved.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IndifferencePoint {
    pub initial_margin_ratio: f64,
    pub maintenance_ratio: f64,
    pub cpnr: f64,
}

fn maintenance_for_margin(
    evaluator: &CpnrEvaluator,
    transaction_price: f64,
    initial_margin_ratio: f64,
    config: &OptimizerConfig,
) -> Option<IndifferencePoint> {
    for maintenance_ratio in maintenance_grid() {
        let candidate = MarginSystem {
            initial_margin_ratio,
            maintenance_ratio,
        };
        if !candidate.is_adequate() {
            // The grid ascends, so every later ratio is inadequate too.
            break;
        }
        let query = LoanQuery {
            transaction_price,
            initial_margin: initial_margin_ratio * transaction_price,
            maintenance_ratio,
            daily_rate: config.daily_rate,
            horizon: config.horizon,
            start_state: evaluator.start_state(),
        };
        let result = evaluator.evaluate(&query);
        if result.cpnr <= config.cpnr_target {
            return Some(IndifferencePoint {
                initial_margin_ratio,
                maintenance_ratio,
                cpnr: result.cpnr,
            });
        }
    }
    None
}

/// Smallest adequate maintenance ratio on the grid whose conditional
/// probability of negative return meets the target, for one initial margin
/// ratio. `None` when no grid ratio qualifies.
pub fn individualized_maintenance(
    model: &TransitionModel,
    space: &StateSpace,
    transaction_price: f64,
    initial_margin_ratio: f64,
    config: &OptimizerConfig,
) -> Option<IndifferencePoint> {
    let start = space.state_of(transaction_price);
    let evaluator = CpnrEvaluator::new(model, space, start, config.horizon);
    maintenance_for_margin(&evaluator, transaction_price, initial_margin_ratio, config)
}

/// Runs the maintenance search for every initial margin ratio on the grid,
/// sharing one set of precomputed state distributions.
pub fn indifference_set(
    model: &TransitionModel,
    space: &StateSpace,
    transaction_price: f64,
    config: &OptimizerConfig,
) -> Vec<IndifferencePoint> {
    let start = space.state_of(transaction_price);
    let evaluator = CpnrEvaluator::new(model, space, start, config.horizon);
    initial_margin_grid()
        .filter_map(|m| maintenance_for_margin(&evaluator, transaction_price, m, config))
        .collect()
}

fn micro_units(value: f64) -> i128 {
    (value * 1e6).round() as i128
}

/// Collapses an indifference set to the member nearest its centroid,
/// breaking distance ties toward the smaller initial margin ratio, then
/// the smaller maintenance ratio. Distances are compared in exact integer
/// micro-units so grid symmetry cannot be upset by float dust. `None` on
/// an empty set.
pub fn deduce_margin_system(points: &[IndifferencePoint]) -> Option<MarginSystem> {
    if points.is_empty() {
        return None;
    }
    let count = points.len() as i128;
    let margins: Vec<i128> = points
        .iter()
        .map(|p| micro_units(p.initial_margin_ratio))
        .collect();
    let maintenances: Vec<i128> = points
        .iter()
        .map(|p| micro_units(p.maintenance_ratio))
        .collect();
    let margin_sum: i128 = margins.iter().sum();
    let maintenance_sum: i128 = maintenances.iter().sum();
    let mut best: Option<(i128, i128, i128, usize)> = None;
    for i in 0..points.len() {
        // Squared distance from the centroid, scaled by count^2.
        let dm = count * margins[i] - margin_sum;
        let dw = count * maintenances[i] - maintenance_sum;
        let key = (dm * dm + dw * dw, margins[i], maintenances[i]);
        match best {
            Some((d, m, w, _)) if (key.0, key.1, key.2) >= (d, m, w) => {}
            _ => best = Some((key.0, key.1, key.2, i)),
        }
    }
    let (_, _, _, index) = best.expect("non-empty set has a nearest member");
    let chosen = points[index];
    Some(MarginSystem {
        initial_margin_ratio: chosen.initial_margin_ratio,
        maintenance_ratio: chosen.maintenance_ratio,
    })
}

/// Deduced margin system for one transaction date.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DynamicsPoint {
    pub date: NaiveDate,
    pub initial_margin_ratio: f64,
    pub maintenance_ratio: f64,
    /// True when the search produced no candidates and the benchmark
    /// system was substituted.
    pub fallback: bool,
}

/// Deduces a margin system independently at each of the given end indices:
/// fit a chain on the trailing window, search the grids, collapse. Dates
/// are processed in parallel; results keep the input order.
pub fn margin_dynamics(
    series: &PriceSeries,
    end_indices: &[usize],
    depth: usize,
    group_size: usize,
    config: &OptimizerConfig,
) -> Result<Vec<DynamicsPoint>, MarginError> {
    end_indices
        .par_iter()
        .map(|&end| {
            let window = series.window(end, depth)?;
            let (space, model) = fit(&window, group_size)?;
            let price = window.transaction_price();
            let points = indifference_set(&model, &space, price, config);
            let (system, fallback) = match deduce_margin_system(&points) {
                Some(system) => (system, false),
                None => (required_system(), true),
            };
            Ok(DynamicsPoint {
                date: series.date(end),
                initial_margin_ratio: system.initial_margin_ratio,
                maintenance_ratio: system.maintenance_ratio,
                fallback,
            })
        })
        .collect()
}
