//! Shared helpers for the integration suites: an independently coded
//! dense-matrix evaluation of the loan probability recursion, a quadrature
//! check for the chi-square tail, and random model builders.
//!
//! The oracle here deliberately repeats no engine code: matrices are plain
//! nested vectors multiplied in textbook order, thresholds come from a
//! linear scan, and every sum in the recursion is written out directly
//! from its definition.

#![allow(dead_code)]
// The textbook index style is the point of this oracle, and its argument
// list mirrors the loan parameters one-for-one on purpose.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

use chrono::{Duration, NaiveDate};
use margin_engine::markov::build_state_space;
use margin_engine::price::PriceSeries;
use margin_engine::StateSpace;
use rand::Rng;

/// Multiplies two row-major square matrices the straightforward way.
pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Reference output of the loan probability recursion.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub prob_call: f64,
    pub prob_loss_and_call: f64,
    pub cpnr: f64,
    pub per_day: Vec<f64>,
}

/// Evaluates the recursion from dense matrix powers and literal sums.
///
/// The per-day conditional call probability divides the mass that crosses
/// the threshold by the mass that was still above it a day earlier, both
/// taken from unconditional day distributions; the loss leg weights each
/// first-call day by the fraction of called states that sit in the loss
/// set, priced with the call day's threshold (final-day calls compare the
/// two same-day prefixes directly). A zero surviving mass ends the loan:
/// every later first-call probability is zero.
pub fn oracle_cpnr(
    one_step: &[Vec<f64>],
    representatives: &[f64],
    start_state: usize,
    transaction_price: f64,
    initial_margin: f64,
    maintenance_ratio: f64,
    daily_rate: f64,
    horizon: usize,
) -> OracleResult {
    let n = representatives.len();
    let mut powers: Vec<Vec<Vec<f64>>> = vec![one_step.to_vec()];
    for _ in 2..=horizon {
        let next = mat_mul(powers.last().unwrap(), one_step);
        powers.push(next);
    }
    let power = |t: usize| -> &Vec<Vec<f64>> { &powers[t - 1] };
    let highest_below = |bound: f64| -> usize {
        let mut best = 0;
        for (index, &q) in representatives.iter().enumerate() {
            if q < bound {
                best = index + 1;
            }
        }
        best
    };
    let growth = 1.0 + daily_rate;
    let call_cut: Vec<usize> = (1..=horizon)
        .map(|m| {
            highest_below(
                (maintenance_ratio * transaction_price - initial_margin) * growth.powi(m as i32),
            )
        })
        .collect();
    let loss_cut: Vec<usize> = (1..=horizon)
        .map(|t| highest_below((transaction_price - initial_margin) * growth.powi(t as i32)))
        .collect();

    let h = start_state - 1;
    let mut survival = 1.0;
    let mut per_day = vec![0.0; horizon];
    let mut prob_call = 0.0;
    let mut prob_loss_and_call = 0.0;
    for t in 1..=horizon {
        let conditional = if t == 1 {
            (0..call_cut[0]).map(|i| power(1)[h][i]).sum::<f64>()
        } else {
            let above: f64 = (call_cut[t - 2]..n).map(|i| power(t - 1)[h][i]).sum();
            if above <= 0.0 {
                // A call was already certain; the rest of the loan
                // contributes nothing.
                break;
            }
            let mut crossing = 0.0;
            for i in call_cut[t - 2]..n {
                for j in 0..call_cut[t - 1] {
                    crossing += power(t - 1)[h][i] * one_step[i][j];
                }
            }
            crossing / above
        };
        let first_call = survival * conditional;
        per_day[t - 1] = first_call;
        prob_call += first_call;
        if first_call > 0.0 {
            let called: f64 = (0..call_cut[t - 1]).map(|j| power(t)[h][j]).sum();
            if called > 0.0 {
                let loss_fraction = if t < horizon {
                    let mut mass = 0.0;
                    for j in 0..call_cut[t - 1] {
                        for l in 0..loss_cut[t - 1] {
                            mass += power(t)[h][j] * one_step[j][l];
                        }
                    }
                    mass / called
                } else {
                    (0..loss_cut[t - 1]).map(|j| power(t)[h][j]).sum::<f64>() / called
                };
                prob_loss_and_call += first_call * loss_fraction;
            }
        }
        survival *= 1.0 - conditional;
        if survival < 0.0 {
            survival = 0.0;
        }
    }
    let cpnr = if prob_call > 0.0 {
        (prob_loss_and_call / prob_call).clamp(0.0, 1.0)
    } else {
        0.0
    };
    OracleResult {
        prob_call,
        prob_loss_and_call,
        cpnr,
        per_day,
    }
}

/// Gamma(df / 2) for integer df, climbed from Gamma(1) or Gamma(1/2).
fn gamma_of_half_df(degrees_of_freedom: u64) -> f64 {
    let (mut x, mut value) = if degrees_of_freedom.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    let target = degrees_of_freedom as f64 / 2.0;
    while x < target - 0.25 {
        value *= x;
        x += 1.0;
    }
    value
}

/// Upper tail of the chi-square distribution by composite Simpson
/// quadrature over the density, independent of the library's series and
/// continued-fraction evaluation.
pub fn quadrature_chi_square_upper(statistic: f64, degrees_of_freedom: u64) -> f64 {
    assert!(statistic > 0.0);
    let half_df = degrees_of_freedom as f64 / 2.0;
    let norm = 2f64.powf(half_df) * gamma_of_half_df(degrees_of_freedom);
    let density = |t: f64| t.powf(half_df - 1.0) * (-t / 2.0).exp();
    // The integrand decays like exp(-t/2); a span of 300 past the mode
    // leaves a remainder far below quadrature error.
    let span = 300.0 + 2.0 * degrees_of_freedom as f64;
    let steps = 200_000usize;
    let width = span / steps as f64;
    let mut acc = density(statistic) + density(statistic + span);
    for i in 1..steps {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * density(statistic + i as f64 * width);
    }
    (acc * width / 3.0) / norm
}

/// Builds a state space whose representatives are exactly `prices`
/// (distinct, ascending), via a single-member grouping.
pub fn space_with_representatives(prices: &[f64]) -> StateSpace {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let rows: Vec<_> = prices
        .iter()
        .enumerate()
        .map(|(i, &close)| (start + Duration::days(i as i64), close))
        .collect();
    let series = PriceSeries::new("oracle", rows).unwrap();
    let window = series.window(prices.len() - 1, prices.len()).unwrap();
    build_state_space(&window, 1).unwrap()
}

/// Strictly positive row-stochastic matrix with uniform-ish entries.
pub fn random_stochastic_rows(rng: &mut impl Rng, size: usize) -> Vec<Vec<f64>> {
    (0..size)
        .map(|_| {
            let mut row: Vec<f64> = (0..size).map(|_| rng.gen::<f64>() + 0.01).collect();
            let total: f64 = row.iter().sum();
            for value in &mut row {
                *value /= total;
            }
            row
        })
        .collect()
}

/// Distinct ascending positive representative prices.
pub fn random_representatives(rng: &mut impl Rng, size: usize) -> Vec<f64> {
    let mut prices = Vec::with_capacity(size);
    let mut level = 1.0 + rng.gen::<f64>();
    for _ in 0..size {
        prices.push(level);
        level += 0.1 + rng.gen::<f64>();
    }
    prices
}
