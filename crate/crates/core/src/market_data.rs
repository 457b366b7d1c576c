//! OHLCV bar series: CSV ingestion, validation, and synthetic generators.
//!
//! The CSV wire format is `date,open,high,low,close[,volume]` with ISO-8601
//! dates and decimal prices. Serialization writes the same format with at
//! most 6 decimal places, trailing zeros trimmed, so any series whose prices
//! carry no more than 6 decimals round-trips exactly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One daily OHLCV observation.
///
/// Prices are index points; `volume` is optional and unused by the filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: Option<f64>,
}

impl Bar {
    /// Checks the bar invariants: strictly positive finite prices,
    /// `low <= open <= high`, `low <= close <= high`, non-negative volume.
    pub fn check(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be a strictly positive price, got {v}"));
            }
        }
        if self.low > self.high {
            return Err(format!("high {} is below low {}", self.high, self.low));
        }
        if self.open < self.low || self.open > self.high {
            return Err(format!(
                "open {} outside [low {}, high {}]",
                self.open, self.low, self.high
            ));
        }
        if self.close < self.low || self.close > self.high {
            return Err(format!(
                "close {} outside [low {}, high {}]",
                self.close, self.low, self.high
            ));
        }
        if let Some(v) = self.volume {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("volume must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// An ordered, validated series of daily bars for one instrument.
///
/// Immutable after construction; timestamps are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    instrument: String,
    bars: Vec<Bar>,
}

impl BarSeries {
    /// Validates and wraps a bar list. `Err` positions are reported as
    /// 1-based bar indices.
    pub fn new(instrument: impl Into<String>, bars: Vec<Bar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::InvalidArgument(
                "bar series must be non-empty".into(),
            ));
        }
        for (i, bar) in bars.iter().enumerate() {
            bar.check().map_err(|reason| Error::RangeViolation {
                line: i + 1,
                reason,
            })?;
            if i > 0 && bar.date <= bars[i - 1].date {
                return Err(Error::OrderViolation { line: i + 1 });
            }
        }
        Ok(Self {
            instrument: instrument.into(),
            bars,
        })
    }

    pub fn instrument(&self) -> &str {
        &self.instrument
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    /// Optional strictness check: every price must sit on the given tick
    /// grid (e.g. 0.25 for the E-mini). Not enforced on input because
    /// synthetic fixtures need not be tick-aligned.
    pub fn check_tick_alignment(&self, tick: f64) -> Result<()> {
        if !tick.is_finite() || tick <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tick must be positive, got {tick}"
            )));
        }
        for (i, bar) in self.bars.iter().enumerate() {
            for price in [bar.open, bar.high, bar.low, bar.close] {
                let steps = price / tick;
                if (steps - steps.round()).abs() > 1e-9 {
                    return Err(Error::RangeViolation {
                        line: i + 1,
                        reason: format!("price {price} is not aligned to tick {tick}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Serializes to the CSV wire format (6 decimals max, trailing zeros
    /// trimmed). The volume column is written iff the series carries volume.
    pub fn to_csv(&self) -> String {
        let with_volume = self.bars[0].volume.is_some();
        let mut out = String::new();
        out.push_str(if with_volume {
            "date,open,high,low,close,volume\n"
        } else {
            "date,open,high,low,close\n"
        });
        for bar in &self.bars {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                bar.date,
                format_price(bar.open),
                format_price(bar.high),
                format_price(bar.low),
                format_price(bar.close)
            );
            if with_volume {
                let _ = write!(out, ",{}", format_price(bar.volume.unwrap_or(0.0)));
            }
            out.push('\n');
        }
        out
    }
}

/// Formats a value with at most 6 decimal places, trailing zeros trimmed.
pub fn format_price(x: f64) -> String {
    let mut s = format!("{x:.6}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Parses the CSV wire format into a validated series. Errors carry the
/// 1-based file line number (the header is line 1).
pub fn parse_csv(source: impl Read, instrument: impl Into<String>) -> Result<BarSeries> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: "empty input".into(),
    })?;
    let header = header?;
    let with_volume = match header.trim() {
        "date,open,high,low,close" => false,
        "date,open,high,low,close,volume" => true,
        other => {
            return Err(Error::MalformedRow {
                line: 1,
                reason: format!("unexpected header `{other}`"),
            })
        }
    };
    let expected_fields = if with_volume { 6 } else { 5 };

    let mut bars: Vec<Bar> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected_fields {
            return Err(Error::MalformedRow {
                line: line_no,
                reason: format!("expected {expected_fields} fields, got {}", fields.len()),
            });
        }
        let date = NaiveDate::from_str(fields[0]).map_err(|e| Error::MalformedRow {
            line: line_no,
            reason: format!("bad date `{}`: {e}", fields[0]),
        })?;
        let mut prices = [0.0f64; 4];
        for (slot, field) in prices.iter_mut().zip(&fields[1..5]) {
            *slot = field.parse().map_err(|e| Error::MalformedRow {
                line: line_no,
                reason: format!("bad number `{field}`: {e}"),
            })?;
        }
        let volume = if with_volume {
            Some(fields[5].parse().map_err(|e| Error::MalformedRow {
                line: line_no,
                reason: format!("bad number `{}`: {e}", fields[5]),
            })?)
        } else {
            None
        };
        let bar = Bar {
            date,
            open: prices[0],
            high: prices[1],
            low: prices[2],
            close: prices[3],
            volume,
        };
        bar.check().map_err(|reason| Error::RangeViolation {
            line: line_no,
            reason,
        })?;
        if let Some(prev) = bars.last() {
            if bar.date <= prev.date {
                return Err(Error::OrderViolation { line: line_no });
            }
        }
        bars.push(bar);
    }
    if bars.is_empty() {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "no data rows".into(),
        });
    }
    Ok(BarSeries {
        instrument: instrument.into(),
        bars,
    })
}

/// Close-price process used by [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    RandomWalk,
    Trend,
    Range,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::RandomWalk => "random-walk",
            SynthKind::Trend => "trend",
            SynthKind::Range => "range",
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-walk" | "random_walk" => Ok(SynthKind::RandomWalk),
            "trend" => Ok(SynthKind::Trend),
            "range" => Ok(SynthKind::Range),
            other => Err(Error::InvalidArgument(format!(
                "unknown synth kind `{other}`"
            ))),
        }
    }
}

/// Base level for synthetic closes, index-point scale.
pub const SYNTH_BASE_PRICE: f64 = 2000.0;
/// Per-bar drift of the `trend` process.
pub const TREND_SLOPE: f64 = 2.0;
/// Sine amplitude of the `range` process.
pub const RANGE_AMPLITUDE: f64 = 50.0;
/// Sine period of the `range` process, in bars.
pub const RANGE_PERIOD_BARS: f64 = 40.0;

/// Band that every `range` close is clamped into.
pub fn range_band(noise: f64) -> (f64, f64) {
    (
        SYNTH_BASE_PRICE - RANGE_AMPLITUDE - 4.0 * noise,
        SYNTH_BASE_PRICE + RANGE_AMPLITUDE + 4.0 * noise,
    )
}

/// Generates a deterministic synthetic daily series.
///
/// Closes follow the named process; open/high/low are derived so the bar
/// invariants hold. Dates are consecutive weekdays starting 2015-03-02 and
/// all prices are rounded to 6 decimals so the series round-trips through
/// the CSV format.
pub fn synthesize(kind: SynthKind, n: usize, seed: u64, noise: f64) -> Result<BarSeries> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 bars, got {n}"
        )));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise must be >= 0, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };

    let mut closes = Vec::with_capacity(n);
    match kind {
        SynthKind::RandomWalk => {
            let mut c = SYNTH_BASE_PRICE;
            for _ in 0..n {
                closes.push(c);
                c = (c + noise * normal()).max(1.0);
            }
        }
        SynthKind::Trend => {
            for t in 0..n {
                closes
                    .push((SYNTH_BASE_PRICE + TREND_SLOPE * t as f64 + noise * normal()).max(1.0));
            }
        }
        SynthKind::Range => {
            let (lo, hi) = range_band(noise);
            for t in 0..n {
                let wave = RANGE_AMPLITUDE
                    * (2.0 * std::f64::consts::PI * t as f64 / RANGE_PERIOD_BARS).sin();
                closes.push((SYNTH_BASE_PRICE + wave + noise * normal()).clamp(lo.max(1.0), hi));
            }
        }
    }

    let mut date = NaiveDate::from_ymd_opt(2015, 3, 2).expect("valid seed date");
    let mut bars = Vec::with_capacity(n);
    for (t, &close) in closes.iter().enumerate() {
        let open = if t == 0 { close } else { closes[t - 1] };
        let spread = (noise * normal()).abs() * 0.5;
        let body_high = open.max(close);
        let body_low = open.min(close);
        let mut bar = Bar {
            date,
            open: round6(open),
            high: round6(body_high + spread),
            low: round6((body_low - spread).max(body_low * 0.5)),
            close: round6(close),
            volume: None,
        };
        // Rounding can nudge an extreme past the body; re-clamp.
        bar.high = bar.high.max(bar.open).max(bar.close);
        bar.low = bar.low.min(bar.open).min(bar.close);
        bars.push(bar);
        date = next_weekday(date);
    }

    BarSeries::new(format!("SYN-{}-{seed}", kind.name()), bars)
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn next_weekday(d: NaiveDate) -> NaiveDate {
    let mut next = d + Days::new(1);
    while matches!(next.weekday(), Weekday::Sat | Weekday::Sun) {
        next = next + Days::new(1);
    }
    next
}
