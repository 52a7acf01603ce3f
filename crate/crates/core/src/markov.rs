//! Finite-state price chains fitted from a history window.
//!
//! - distinct observed closes, sorted ascending, are chunked into groups of
//!   fixed size; each group is one state, represented by its mean price;
//! - one-step transition probabilities are row-normalized counts of
//!   consecutive closes (states with no outgoing observations keep an
//!   identity row);
//! - multi-step matrices are iterated products of the one-step matrix,
//!   cached per step count;
//! - a chi-square statistic against the independence hypothesis screens
//!   whether the chain structure is worth using at all.

use crate::gamma::chi_square_upper_tail;
use crate::matrix::SquareMatrix;
use crate::price::PriceWindow;
use serde::Serialize;
use std::sync::RwLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("cannot build a state space from an empty window")]
    EmptyWindow,
    #[error("group size must be at least 1")]
    ZeroGroup,
    #[error("transition counting needs at least 2 prices, got {got}")]
    WindowTooShort { got: usize },
    #[error("chi-square test undefined: {effective} effective state(s), need at least 2")]
    TestUndefined { effective: usize },
}

/// One state's price band: the lowest and highest member price, and how
/// many distinct prices the band holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub low: f64,
    pub high: f64,
    pub members: usize,
}

/// Ordered partition of the distinct observed prices into bands, with one
/// representative price (the band mean) per state. States are 1-based.
#[derive(Debug, Clone)]
pub struct StateSpace {
    bands: Vec<Band>,
    representatives: Vec<f64>,
    group_size: usize,
}

impl StateSpace {
    /// Number of states.
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn representatives(&self) -> &[f64] {
        &self.representatives
    }

    /// Representative price of a 1-based state index.
    pub fn representative(&self, state: usize) -> f64 {
        self.representatives[state - 1]
    }

    /// Maps a price to its 1-based state: band containment if the price
    /// falls inside a band, otherwise the nearest representative (ties go
    /// to the lower state). Prices outside the observed range clamp to the
    /// first or last state.
    pub fn state_of(&self, price: f64) -> usize {
        let n = self.bands.len();
        let idx = self.bands.partition_point(|b| b.high < price);
        if idx == n {
            return n;
        }
        if price >= self.bands[idx].low {
            return idx + 1;
        }
        if idx == 0 {
            return 1;
        }
        let below = price - self.representatives[idx - 1];
        let above = self.representatives[idx] - price;
        if below <= above {
            idx
        } else {
            idx + 1
        }
    }

    /// Number of states whose representative lies strictly below the
    /// threshold. Doubles as the highest qualifying 1-based state index
    /// (0 when none qualifies).
    pub fn states_below(&self, threshold: f64) -> usize {
        self.representatives.partition_point(|&q| q < threshold)
    }
}

/// Groups the window's distinct closes into states of `group_size`
/// ascending prices (the last group may be smaller).
pub fn build_state_space(
    window: &PriceWindow,
    group_size: usize,
) -> Result<StateSpace, MarkovError> {
    if group_size == 0 {
        return Err(MarkovError::ZeroGroup);
    }
    if window.closes().is_empty() {
        return Err(MarkovError::EmptyWindow);
    }
    let mut distinct = window.closes().to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    let mut bands = Vec::new();
    let mut representatives = Vec::new();
    for chunk in distinct.chunks(group_size) {
        bands.push(Band {
            low: chunk[0],
            high: *chunk.last().expect("chunks are non-empty"),
            members: chunk.len(),
        });
        representatives.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
    }
    Ok(StateSpace {
        bands,
        representatives,
        group_size,
    })
}

/// Transition counts between consecutive closes, with margins.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    size: usize,
    counts: Vec<u64>,
    row_totals: Vec<u64>,
    col_totals: Vec<u64>,
    total: u64,
}

impl CountMatrix {
    /// Builds a count matrix directly from rows (mainly for tests and
    /// diagnostics on externally tabulated data).
    pub fn from_counts(rows: &[Vec<u64>]) -> Self {
        let size = rows.len();
        let mut counts = Vec::with_capacity(size * size);
        for row in rows {
            assert_eq!(row.len(), size, "count rows must all have length {size}");
            counts.extend_from_slice(row);
        }
        let mut m = CountMatrix {
            size,
            counts,
            row_totals: vec![0; size],
            col_totals: vec![0; size],
            total: 0,
        };
        m.recompute_margins();
        m
    }

    fn recompute_margins(&mut self) {
        self.row_totals = vec![0; self.size];
        self.col_totals = vec![0; self.size];
        self.total = 0;
        for i in 0..self.size {
            for j in 0..self.size {
                let c = self.counts[i * self.size + j];
                self.row_totals[i] += c;
                self.col_totals[j] += c;
                self.total += c;
            }
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Count of transitions from row state to column state (0-based).
    pub fn count(&self, from: usize, to: usize) -> u64 {
        self.counts[from * self.size + to]
    }

    pub fn row_total(&self, from: usize) -> u64 {
        self.row_totals[from]
    }

    pub fn col_total(&self, to: usize) -> u64 {
        self.col_totals[to]
    }

    /// Total number of observed transitions (window length minus one).
    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Tallies the consecutive-day state transitions of a window under a
/// fitted state space.
pub fn count_transitions(
    window: &PriceWindow,
    space: &StateSpace,
) -> Result<CountMatrix, MarkovError> {
    let closes = window.closes();
    if closes.len() < 2 {
        return Err(MarkovError::WindowTooShort { got: closes.len() });
    }
    let n = space.len();
    let mut counts = vec![0u64; n * n];
    let mut prev = space.state_of(closes[0]) - 1;
    for &price in &closes[1..] {
        let next = space.state_of(price) - 1;
        counts[prev * n + next] += 1;
        prev = next;
    }
    let mut m = CountMatrix {
        size: n,
        counts,
        row_totals: vec![0; n],
        col_totals: vec![0; n],
        total: 0,
    };
    m.recompute_margins();
    Ok(m)
}

/// One-step transition matrix plus a cache of its iterated powers.
///
/// The cache behaves as if every power were computed once up front:
/// whichever thread fills a slot produces the identical matrix, since
/// each power is always the previous power times the one-step matrix.
pub struct TransitionModel {
    one_step: SquareMatrix,
    powers: RwLock<Vec<SquareMatrix>>,
}

impl TransitionModel {
    /// Wraps a row-stochastic one-step matrix.
    pub fn new(one_step: SquareMatrix) -> Self {
        TransitionModel {
            powers: RwLock::new(vec![one_step.clone()]),
            one_step,
        }
    }

    pub fn size(&self) -> usize {
        self.one_step.size()
    }

    pub fn one_step(&self) -> &SquareMatrix {
        &self.one_step
    }

    /// Number of powers currently cached.
    pub fn cached_steps(&self) -> usize {
        self.powers.read().expect("power cache poisoned").len()
    }

    /// The `steps`-day transition matrix (`steps >= 1`), extending the
    /// power cache as needed.
    pub fn n_step(&self, steps: usize) -> SquareMatrix {
        assert!(steps >= 1, "steps must be at least 1");
        {
            let cache = self.powers.read().expect("power cache poisoned");
            if steps <= cache.len() {
                return cache[steps - 1].clone();
            }
        }
        let mut cache = self.powers.write().expect("power cache poisoned");
        while cache.len() < steps {
            let next = cache.last().expect("cache holds P(1)").multiply(&self.one_step);
            cache.push(next);
        }
        cache[steps - 1].clone()
    }
}

impl Clone for TransitionModel {
    fn clone(&self) -> Self {
        let cache = self.powers.read().expect("power cache poisoned");
        TransitionModel {
            one_step: self.one_step.clone(),
            powers: RwLock::new(cache.clone()),
        }
    }
}

impl std::fmt::Debug for TransitionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransitionModel")
            .field("one_step", &self.one_step)
            .field("cached_steps", &self.cached_steps())
            .finish()
    }
}

/// Row-normalizes transition counts into a one-step model. Rows with no
/// observations become identity rows (the state holds with probability 1).
pub fn estimate_one_step(counts: &CountMatrix) -> TransitionModel {
    let n = counts.size();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        let row_total = counts.row_total(i);
        if row_total == 0 {
            m.set(i, i, 1.0);
        } else {
            for j in 0..n {
                m.set(i, j, counts.count(i, j) as f64 / row_total as f64);
            }
        }
    }
    TransitionModel::new(m)
}

/// Chi-square screen of the chain against the independence hypothesis.
#[derive(Debug, Clone, Serialize)]
pub struct MarkovTestResult {
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// States with at least one observation entering or leaving.
    pub effective_states: usize,
}

/// Computes the independence chi-square statistic over cells with positive
/// expected count, with `(effective - 1)^2` degrees of freedom. A tiny
/// p-value rejects independence in favor of the chain structure.
pub fn markov_chi_square_test(counts: &CountMatrix) -> Result<MarkovTestResult, MarkovError> {
    let n = counts.size();
    let effective = (0..n)
        .filter(|&i| counts.row_total(i) > 0 || counts.col_total(i) > 0)
        .count();
    if effective < 2 {
        return Err(MarkovError::TestUndefined { effective });
    }
    let total = counts.total() as f64;
    let mut chi_square = 0.0;
    for i in 0..n {
        for j in 0..n {
            let expected = counts.row_total(i) as f64 * counts.col_total(j) as f64 / total;
            if expected > 0.0 {
                let deviation = counts.count(i, j) as f64 - expected;
                chi_square += deviation * deviation / expected;
            }
        }
    }
    let degrees_of_freedom = (effective - 1) * (effective - 1);
    Ok(MarkovTestResult {
        chi_square,
        degrees_of_freedom,
        p_value: chi_square_upper_tail(chi_square, degrees_of_freedom),
        effective_states: effective,
    })
}

/// Fits state space, transition counts, and one-step model in one call.
pub fn fit(
    window: &PriceWindow,
    group_size: usize,
) -> Result<(StateSpace, TransitionModel), MarkovError> {
    let space = build_state_space(window, group_size)?;
    let counts = count_transitions(window, &space)?;
    Ok((space, estimate_one_step(&counts)))
}
