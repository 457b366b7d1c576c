//! Prediction-driven long/short signal rule.
//!
//! On each bar the filter's one-step-ahead price forecast is compared with
//! the bar's close: a forecast more than `offset` above the close targets a
//! long position, more than `offset` below targets a short, anything inside
//! the band holds whatever position is on. Execution is stop-and-reverse:
//! an opposite signal closes the current position and opens the new one at
//! the same close (see [`crate::backtest::execute`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::filter_series;
use crate::market_data::BarSeries;
use crate::models::{build_spec, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    Long,
    Short,
    Hold,
}

/// A position target emitted at one bar index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signal {
    pub at: usize,
    pub target: SignalKind,
}

/// Default warm-up when a model has no oscillator lookback.
pub const DEFAULT_WARMUP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    /// Dead band around the close, in index points. May be infinite, which
    /// silences every signal.
    pub offset: f64,
    /// Leading bars on which the filter runs but emits no signals.
    pub warmup: usize,
}

impl StrategyConfig {
    pub fn new(offset: f64, warmup: usize) -> Result<Self> {
        if offset.is_nan() || offset < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "offset must be >= 0, got {offset}"
            )));
        }
        Ok(Self { offset, warmup })
    }

    /// Zero offset and a warm-up of `max(20, d)` where `d` is the model's
    /// oscillator lookback, if any.
    pub fn for_model(params: &ModelParams) -> Self {
        let warmup = DEFAULT_WARMUP.max(params.oscillator_period().unwrap_or(0));
        Self {
            offset: 0.0,
            warmup,
        }
    }
}

/// The bar-level entry rule: long above `close + offset`, short below
/// `close - offset`, hold inside the band. Non-finite forecasts hold.
pub fn decide(prediction: f64, last_close: f64, cfg: &StrategyConfig) -> SignalKind {
    if prediction > last_close + cfg.offset {
        SignalKind::Long
    } else if prediction < last_close - cfg.offset {
        SignalKind::Short
    } else {
        SignalKind::Hold
    }
}

/// Runs the model's filter over the closes and emits one signal per bar
/// from the warm-up boundary on.
///
/// The signal at bar `t` compares the forecast for bar `t+1` (formed from
/// closes up to `t` only) against `close[t]`. The final bar gets a signal
/// from the filter's one-step-ahead forecast even though no further bar
/// exists; execution force-closes at that same bar. Signals start at
/// `max(warmup, 1)` because the initial filter state is seeded from the
/// first closes.
pub fn run_strategy(
    bars: &BarSeries,
    params: &ModelParams,
    cfg: &StrategyConfig,
) -> Result<Vec<Signal>> {
    if cfg.offset.is_nan() || cfg.offset < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "offset must be >= 0, got {}",
            cfg.offset
        )));
    }
    let spec = build_spec(params, bars)?;
    let closes = bars.closes();
    let start = cfg.warmup.max(1);
    if start >= closes.len() {
        return Err(Error::InsufficientHistory {
            have: closes.len(),
            needed: start + 1,
        });
    }
    let run = filter_series(&spec, &closes, cfg.warmup)?;
    let mut signals = Vec::with_capacity(closes.len() - start);
    for t in start..closes.len() {
        let prediction = if t + 1 < closes.len() {
            run.predicted[t + 1]
        } else {
            run.next_prediction
        };
        signals.push(Signal {
            at: t,
            target: decide(prediction, closes[t], cfg),
        });
    }
    Ok(signals)
}
