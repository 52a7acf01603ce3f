//! Conditional probability of negative return (CPNR) for a margin loan.
//!
//! A margin call lands on the first day the remaining margin is exhausted;
//! collateral is liquidated one trading day later, or on the final day of
//! the loan if the call arrives then. Working day by day on the fitted
//! chain, the engine accumulates:
//!
//! - `prob_call`: total probability that a first margin call occurs during
//!   the loan, built from one-day conditional steps times the running
//!   survival (no-call-yet) product;
//! - `prob_loss_and_call`: the recursion's estimate of the joint
//!   probability that a call occurs and the sale price is too low to repay
//!   principal and interest;
//! - `cpnr = prob_loss_and_call / prob_call` (zero when no call can occur).
//!
//! Threshold prices are translated to state indices through the state
//! space's representatives, so each day's events reduce to prefix sums of
//! transition rows. A brute-force path enumeration of the same quantities
//! is provided as a cross-check for small chains.

use crate::markov::{StateSpace, TransitionModel};
use serde::Serialize;
use thiserror::Error;

/// Path enumeration refuses chains larger than this.
pub const ENUMERATION_MAX_STATES: usize = 8;
/// Path enumeration refuses horizons longer than this.
pub const ENUMERATION_MAX_HORIZON: usize = 8;

#[derive(Debug, Error)]
pub enum CpnrError {
    #[error(
        "path enumeration limited to {max_states} states and {max_horizon} days, \
         got {states} states over {horizon} days"
    )]
    EnumerationTooLarge {
        states: usize,
        horizon: usize,
        max_states: usize,
        max_horizon: usize,
    },
}

/// One margin loan evaluated against a fitted chain.
#[derive(Debug, Clone)]
pub struct LoanQuery {
    /// Stock price on the transaction date.
    pub transaction_price: f64,
    /// Cash initial margin deposited with the broker.
    pub initial_margin: f64,
    /// Minimum maintenance margin ratio (> 1).
    pub maintenance_ratio: f64,
    /// Daily rate at which both the deposit and the loan accrue.
    pub daily_rate: f64,
    /// Loan period in trading days (>= 1).
    pub horizon: usize,
    /// 1-based state of the transaction price.
    pub start_state: usize,
}

impl LoanQuery {
    /// Builds a query with the start state resolved from the price.
    pub fn for_price(
        space: &StateSpace,
        transaction_price: f64,
        initial_margin: f64,
        maintenance_ratio: f64,
        daily_rate: f64,
        horizon: usize,
    ) -> Self {
        LoanQuery {
            transaction_price,
            initial_margin,
            maintenance_ratio,
            daily_rate,
            horizon,
            start_state: space.state_of(transaction_price),
        }
    }
}

/// Highest 1-based state whose representative price would trigger a margin
/// call on the given day (0 when even the lowest state would not). A call
/// triggers when the price falls below `(w*P0 - Q0) * (1+r)^day`.
pub fn call_threshold_index(space: &StateSpace, query: &LoanQuery, day: usize) -> usize {
    let threshold = (query.maintenance_ratio * query.transaction_price - query.initial_margin)
        * (1.0 + query.daily_rate).powi(day as i32);
    space.states_below(threshold)
}

/// Highest 1-based state whose representative price would leave the broker
/// with a loss at liquidation on the given day (0 when none). Liquidation
/// loses money when the price falls below `(P0 - Q0) * (1+r)^day`.
pub fn loss_threshold_index(space: &StateSpace, query: &LoanQuery, day: usize) -> usize {
    let threshold = (query.transaction_price - query.initial_margin)
        * (1.0 + query.daily_rate).powi(day as i32);
    space.states_below(threshold)
}

/// Call and loss probabilities for one loan.
#[derive(Debug, Clone, Serialize)]
pub struct CpnrResult {
    /// Probability a first margin call occurs during the loan.
    pub prob_call: f64,
    /// Joint probability of a call and a liquidation loss.
    pub prob_loss_and_call: f64,
    /// `prob_loss_and_call / prob_call`; 0 when no call can occur.
    pub cpnr: f64,
    /// Probability the first call lands on day t, for t = 1..=horizon.
    pub per_day_call_probs: Vec<f64>,
    /// Probability the loan finishes with no call at all.
    pub survival_product: f64,
}

/// First-call probabilities alone (the call leg of [`CpnrResult`]).
#[derive(Debug, Clone, Serialize)]
pub struct FirstCallProbs {
    pub total: f64,
    pub per_day: Vec<f64>,
    pub survival_product: f64,
}

/// Precomputed day-by-day state distributions for one start state, reused
/// across many `(Q0, w)` queries on the same fitted chain (the margin grid
/// search evaluates thousands per transaction date).
pub struct CpnrEvaluator<'a> {
    space: &'a StateSpace,
    start_state: usize,
    max_horizon: usize,
    /// `day_rows[t-1][i]`: probability of being in 0-based state `i` on day
    /// `t`, starting from `start_state` on day 0.
    day_rows: Vec<Vec<f64>>,
    /// `day_prefix[t-1][c]`: sum of the first `c` entries of `day_rows[t-1]`.
    day_prefix: Vec<Vec<f64>>,
    /// `step_prefix[i][c]`: sum of the first `c` entries of one-step row `i`.
    step_prefix: Vec<Vec<f64>>,
}

fn prefix_sums(row: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(row.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for &v in row {
        acc += v;
        out.push(acc);
    }
    out
}

impl<'a> CpnrEvaluator<'a> {
    /// Prepares distributions for days `1..=max_horizon` from `start_state`
    /// (1-based).
    pub fn new(
        model: &TransitionModel,
        space: &'a StateSpace,
        start_state: usize,
        max_horizon: usize,
    ) -> Self {
        assert!(max_horizon >= 1, "horizon must be at least 1");
        assert!(
            start_state >= 1 && start_state <= space.len(),
            "start state {start_state} outside 1..={}",
            space.len()
        );
        let n = space.len();
        let one = model.one_step();
        let mut day_rows: Vec<Vec<f64>> = Vec::with_capacity(max_horizon);
        day_rows.push(one.row(start_state - 1).to_vec());
        for _ in 1..max_horizon {
            let prev = day_rows.last().expect("day 1 row present");
            let mut next = vec![0.0; n];
            for (i, &weight) in prev.iter().enumerate() {
                let row = one.row(i);
                for j in 0..n {
                    next[j] += weight * row[j];
                }
            }
            day_rows.push(next);
        }
        let day_prefix = day_rows.iter().map(|r| prefix_sums(r)).collect();
        let step_prefix = (0..n).map(|i| prefix_sums(one.row(i))).collect();
        CpnrEvaluator {
            space,
            start_state,
            max_horizon,
            day_rows,
            day_prefix,
            step_prefix,
        }
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn max_horizon(&self) -> usize {
        self.max_horizon
    }

    /// Runs the day-by-day recursion for one query. The query must use this
    /// evaluator's start state and a horizon within `max_horizon`.
    pub fn evaluate(&self, query: &LoanQuery) -> CpnrResult {
        assert_eq!(
            query.start_state, self.start_state,
            "query start state differs from evaluator"
        );
        assert!(
            query.horizon >= 1 && query.horizon <= self.max_horizon,
            "horizon {} outside 1..={}",
            query.horizon,
            self.max_horizon
        );
        let horizon = query.horizon;
        let call_cuts: Vec<usize> = (1..=horizon)
            .map(|day| call_threshold_index(self.space, query, day))
            .collect();
        let loss_cuts: Vec<usize> = (1..=horizon)
            .map(|day| loss_threshold_index(self.space, query, day))
            .collect();

        let mut survival = 1.0;
        let mut per_day = Vec::with_capacity(horizon);
        let mut prob_call = 0.0;
        let mut prob_loss_and_call = 0.0;

        for day in 1..=horizon {
            let cut = call_cuts[day - 1];
            let conditional_call = if day == 1 {
                // Day 1 is unconditional: mass at or below the cut.
                self.day_prefix[0][cut]
            } else {
                if survival == 0.0 {
                    // No surviving mass: every later first-call probability
                    // is zero.
                    per_day.push(0.0);
                    continue;
                }
                let prev_cut = call_cuts[day - 2];
                let row = &self.day_rows[day - 2];
                let mut surviving_mass = 0.0;
                for &p in &row[prev_cut..] {
                    surviving_mass += p;
                }
                if surviving_mass <= 0.0 {
                    // A call was already certain by the previous day.
                    survival = 0.0;
                    per_day.push(0.0);
                    continue;
                }
                let mut crossing_mass = 0.0;
                for (p, prefix) in row.iter().zip(&self.step_prefix).skip(prev_cut) {
                    crossing_mass += p * prefix[cut];
                }
                crossing_mass / surviving_mass
            };

            let first_call_today = survival * conditional_call;
            per_day.push(first_call_today);
            prob_call += first_call_today;
            survival *= 1.0 - conditional_call;
            if survival < 0.0 {
                survival = 0.0;
            }

            if first_call_today > 0.0 {
                let called_mass = self.day_prefix[day - 1][cut];
                if called_mass > 0.0 {
                    let loss_cut = loss_cuts[day - 1];
                    let conditional_loss = if day < horizon {
                        // Called states step once more toward liquidation,
                        // but the loss set is priced with the call day's
                        // threshold. With interest accruing that threshold
                        // differs slightly from the liquidation day's; the
                        // path enumeration measures the true one and the
                        // difference is reported as a diagnostic (see
                        // cpnr_exact_enumeration).
                        let row = &self.day_rows[day - 1];
                        let mut loss_mass = 0.0;
                        for (p, prefix) in row.iter().zip(&self.step_prefix).take(cut) {
                            loss_mass += p * prefix[loss_cut];
                        }
                        loss_mass / called_mass
                    } else {
                        // A final-day call liquidates the same day.
                        self.day_prefix[day - 1][loss_cut] / called_mass
                    };
                    prob_loss_and_call += first_call_today * conditional_loss;
                }
            }
        }

        let cpnr = if prob_call > 0.0 {
            (prob_loss_and_call / prob_call).clamp(0.0, 1.0)
        } else {
            0.0
        };
        CpnrResult {
            prob_call,
            prob_loss_and_call,
            cpnr,
            per_day_call_probs: per_day,
            survival_product: survival,
        }
    }
}

/// Convenience wrapper: evaluates one query end to end.
pub fn cpnr(model: &TransitionModel, space: &StateSpace, query: &LoanQuery) -> CpnrResult {
    CpnrEvaluator::new(model, space, query.start_state, query.horizon).evaluate(query)
}

/// First-call probabilities for one query.
pub fn prob_first_call(
    model: &TransitionModel,
    space: &StateSpace,
    query: &LoanQuery,
) -> FirstCallProbs {
    let result = cpnr(model, space, query);
    FirstCallProbs {
        total: result.prob_call,
        per_day: result.per_day_call_probs,
        survival_product: result.survival_product,
    }
}

/// Joint call-and-loss probability for one query.
pub fn prob_loss_and_call(
    model: &TransitionModel,
    space: &StateSpace,
    query: &LoanQuery,
) -> f64 {
    cpnr(model, space, query).prob_loss_and_call
}

/// Exact probabilities from brute-force path enumeration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExactCpnr {
    pub prob_call: f64,
    pub prob_loss_and_call: f64,
    pub cpnr: f64,
}

#[derive(Clone, Copy)]
enum PathStatus {
    NoCallYet,
    AwaitingLiquidation,
    Resolved { loss: bool },
}

struct Enumeration<'a> {
    one_step: &'a crate::matrix::SquareMatrix,
    call_cuts: &'a [usize],
    loss_cuts: &'a [usize],
    horizon: usize,
    states: usize,
    prob_call: f64,
    prob_loss_and_call: f64,
}

impl Enumeration<'_> {
    fn walk(&mut self, day: usize, state: usize, weight: f64, status: PathStatus) {
        if day > self.horizon {
            match status {
                PathStatus::Resolved { loss } => {
                    self.prob_call += weight;
                    if loss {
                        self.prob_loss_and_call += weight;
                    }
                }
                PathStatus::NoCallYet => {}
                PathStatus::AwaitingLiquidation => {
                    unreachable!("final-day calls resolve immediately")
                }
            }
            return;
        }
        for next in 0..self.states {
            let step_weight = weight * self.one_step.get(state, next);
            if step_weight == 0.0 {
                continue;
            }
            let next_status = match status {
                PathStatus::NoCallYet => {
                    if next < self.call_cuts[day - 1] {
                        if day == self.horizon {
                            // Liquidation happens on the call day itself.
                            PathStatus::Resolved {
                                loss: next < self.loss_cuts[day - 1],
                            }
                        } else {
                            PathStatus::AwaitingLiquidation
                        }
                    } else {
                        PathStatus::NoCallYet
                    }
                }
                PathStatus::AwaitingLiquidation => PathStatus::Resolved {
                    loss: next < self.loss_cuts[day - 1],
                },
                resolved @ PathStatus::Resolved { .. } => resolved,
            };
            self.walk(day + 1, next, step_weight, next_status);
        }
    }
}

/// Enumerates every state path of the loan horizon and classifies it by
/// its true first-call day and liquidation outcome. Exponential in the
/// horizon, so limited to small chains; used to measure how close the
/// day-by-day recursion is to the exact first-passage probabilities.
pub fn cpnr_exact_enumeration(
    model: &TransitionModel,
    space: &StateSpace,
    query: &LoanQuery,
) -> Result<ExactCpnr, CpnrError> {
    let states = space.len();
    let horizon = query.horizon;
    if states > ENUMERATION_MAX_STATES || horizon > ENUMERATION_MAX_HORIZON {
        return Err(CpnrError::EnumerationTooLarge {
            states,
            horizon,
            max_states: ENUMERATION_MAX_STATES,
            max_horizon: ENUMERATION_MAX_HORIZON,
        });
    }
    let call_cuts: Vec<usize> = (1..=horizon)
        .map(|day| call_threshold_index(space, query, day))
        .collect();
    let loss_cuts: Vec<usize> = (1..=horizon)
        .map(|day| loss_threshold_index(space, query, day))
        .collect();
    let mut enumeration = Enumeration {
        one_step: model.one_step(),
        call_cuts: &call_cuts,
        loss_cuts: &loss_cuts,
        horizon,
        states,
        prob_call: 0.0,
        prob_loss_and_call: 0.0,
    };
    enumeration.walk(1, query.start_state - 1, 1.0, PathStatus::NoCallYet);
    let cpnr = if enumeration.prob_call > 0.0 {
        enumeration.prob_loss_and_call / enumeration.prob_call
    } else {
        0.0
    };
    Ok(ExactCpnr {
        prob_call: enumeration.prob_call,
        prob_loss_and_call: enumeration.prob_loss_and_call,
        cpnr,
    })
}
