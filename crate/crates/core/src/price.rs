//! Daily closing-price series: CSV ingestion and validation, rolling
//! history windows, and a seeded synthetic random-walk generator.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PriceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing required column `{column}` in header")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path}: line {line}: {message}")]
    Malformed {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: line {line}: close must be a positive finite number, got `{value}`")]
    NonPositiveClose {
        path: String,
        line: u64,
        value: String,
    },
    #[error("duplicate trading date {date}")]
    DuplicateDate { date: NaiveDate },
    #[error("price series must be non-empty")]
    Empty,
    #[error("close must be positive and finite, got {value}")]
    InvalidClose { value: f64 },
    #[error("dates must be strictly increasing, violated at {date}")]
    UnorderedDates { date: NaiveDate },
    #[error("window depth must be at least 1")]
    ZeroDepth,
    #[error("index {index} out of range for series of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("insufficient history: need at least {needed} prices, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("invalid synthetic spec: {reason}")]
    InvalidSyntheticSpec { reason: String },
}

/// A validated daily closing-price history for one instrument:
/// strictly increasing dates, strictly positive closes.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    ticker: String,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series from dated observations, validating ordering and
    /// positivity.
    pub fn new(
        ticker: impl Into<String>,
        observations: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, PriceError> {
        if observations.is_empty() {
            return Err(PriceError::Empty);
        }
        let mut dates = Vec::with_capacity(observations.len());
        let mut closes = Vec::with_capacity(observations.len());
        for (date, close) in observations {
            if !(close.is_finite() && close > 0.0) {
                return Err(PriceError::InvalidClose { value: close });
            }
            if let Some(&prev) = dates.last() {
                if date == prev {
                    return Err(PriceError::DuplicateDate { date });
                }
                if date < prev {
                    return Err(PriceError::UnorderedDates { date });
                }
            }
            dates.push(date);
            closes.push(close);
        }
        Ok(PriceSeries {
            ticker: ticker.into(),
            dates,
            closes,
        })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.dates[index]
    }

    pub fn close(&self, index: usize) -> f64 {
        self.closes[index]
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    /// Position of a trading date, if present.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// The trailing window of `depth` closes ending at `end_index`
    /// (inclusive). The close at `end_index` is the transaction-date price.
    pub fn window(&self, end_index: usize, depth: usize) -> Result<PriceWindow, PriceError> {
        if depth == 0 {
            return Err(PriceError::ZeroDepth);
        }
        if end_index >= self.len() {
            return Err(PriceError::IndexOutOfRange {
                index: end_index,
                len: self.len(),
            });
        }
        if end_index + 1 < depth {
            return Err(PriceError::InsufficientHistory {
                needed: depth,
                got: end_index + 1,
            });
        }
        Ok(PriceWindow {
            closes: self.closes[end_index + 1 - depth..=end_index].to_vec(),
            end_index,
            depth,
        })
    }
}

/// A contiguous slice of history used to fit one price model. The last
/// entry is the close on the transaction date itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceWindow {
    closes: Vec<f64>,
    end_index: usize,
    depth: usize,
}

impl PriceWindow {
    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn end_index(&self) -> usize {
        self.end_index
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Close on the transaction date (the last element of the window).
    pub fn transaction_price(&self) -> f64 {
        *self.closes.last().expect("window is never empty")
    }
}

/// Loads `date,close` CSV (extra columns ignored, any order of rows) and
/// returns the series sorted by date. The ticker is the file stem.
pub fn load_price_csv(path: &Path) -> Result<PriceSeries, PriceError> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|source| PriceError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| csv_error(&shown, e))?
        .clone();
    let find = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(PriceError::MissingColumn {
                path: shown.clone(),
                column: name,
            })
    };
    let date_col = find("date")?;
    let close_col = find("close")?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&shown, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: usize, name: &str| {
            record.get(col).ok_or_else(|| PriceError::Malformed {
                path: shown.clone(),
                line,
                message: format!("missing `{name}` field"),
            })
        };
        let date_text = field(date_col, "date")?;
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d").map_err(|e| {
            PriceError::Malformed {
                path: shown.clone(),
                line,
                message: format!("invalid date `{date_text}`: {e}"),
            }
        })?;
        let close_text = field(close_col, "close")?;
        let close: f64 = close_text.parse().map_err(|e| PriceError::Malformed {
            path: shown.clone(),
            line,
            message: format!("invalid close `{close_text}`: {e}"),
        })?;
        if !(close.is_finite() && close > 0.0) {
            return Err(PriceError::NonPositiveClose {
                path: shown.clone(),
                line,
                value: close_text.to_string(),
            });
        }
        rows.push((date, close));
    }
    rows.sort_by_key(|&(date, _)| date);

    let ticker = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unknown".to_string());
    PriceSeries::new(ticker, rows)
}

fn csv_error(path: &str, e: csv::Error) -> PriceError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    PriceError::Malformed {
        path: path.to_string(),
        line,
        message: e.to_string(),
    }
}

/// Writes a series back out as `date,close` CSV. Closes use the shortest
/// round-trip decimal form, so load(write(s)) == s.
pub fn write_price_csv(series: &PriceSeries, path: &Path) -> Result<(), PriceError> {
    let shown = path.display().to_string();
    let wrap = |source: std::io::Error| PriceError::Io {
        path: shown.clone(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "date,close").map_err(wrap)?;
    for i in 0..series.len() {
        writeln!(out, "{},{}", series.date(i), series.close(i)).map_err(wrap)?;
    }
    out.flush().map_err(wrap)
}

/// Recipe for a seeded multiplicative random walk: each day the price is
/// multiplied by one step drawn from a finite distribution.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub length: usize,
    pub start_price: f64,
    /// `(step, probability)` pairs; probabilities must sum to 1.
    pub daily_move_distribution: Vec<(f64, f64)>,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), PriceError> {
        let bad = |reason: String| PriceError::InvalidSyntheticSpec { reason };
        if self.length == 0 {
            return Err(bad("length must be at least 1".into()));
        }
        if !(self.start_price.is_finite() && self.start_price > 0.0) {
            return Err(bad(format!(
                "start price must be positive, got {}",
                self.start_price
            )));
        }
        if self.daily_move_distribution.is_empty() {
            return Err(bad("daily move distribution is empty".into()));
        }
        let mut total = 0.0;
        for &(step, prob) in &self.daily_move_distribution {
            if !(step.is_finite() && step > 0.0) {
                return Err(bad(format!("step must be positive, got {step}")));
            }
            if !(prob.is_finite() && prob >= 0.0) {
                return Err(bad(format!("probability must be non-negative, got {prob}")));
            }
            total += prob;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(bad(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(())
    }
}

fn next_trading_day(day: NaiveDate) -> NaiveDate {
    let mut next = day + Duration::days(1);
    while matches!(next.weekday(), Weekday::Sat | Weekday::Sun) {
        next += Duration::days(1);
    }
    next
}

/// Generates a synthetic series on consecutive weekdays. Bit-reproducible
/// for a fixed spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PriceSeries, PriceError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut date = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid epoch");
    let mut price = spec.start_price;
    let mut observations = Vec::with_capacity(spec.length);
    for _ in 0..spec.length {
        observations.push((date, price));
        let draw: f64 = rng.gen();
        let mut cumulative = 0.0;
        let mut step = spec.daily_move_distribution.last().expect("non-empty").0;
        for &(s, p) in &spec.daily_move_distribution {
            cumulative += p;
            if draw < cumulative {
                step = s;
                break;
            }
        }
        price *= step;
        date = next_trading_day(date);
    }
    PriceSeries::new(format!("synthetic-{}", spec.seed), observations)
}
