//! Price-series filtering and trend-strategy backtesting.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`market_data`]: OHLCV bars, CSV ingestion, validation, and synthetic
//!   series for experiments.
//! * [`lag_algebra`]: moving-average weight vectors, recursive composition,
//!   exact lag arithmetic, and the zero-lag DEMA/TEMA combinations.
//! * [`kalman`]: a generic linear-Gaussian Kalman filter (predict, update,
//!   whole-series filtering with warm-up).
//! * [`models`]: the four price models (constant velocity, local linear
//!   trend, two-factor, two-factor with an oscillator control term) built
//!   from flat parameter vectors.
//! * [`strategy`]: the prediction-vs-close signal rule.
//! * [`backtest`]: signal execution into a futures trade ledger plus the
//!   performance statistics block.
//! * [`optimizer`]: derivative-free parameter search over a backtest
//!   objective.

pub mod backtest;
pub mod error;
pub mod kalman;
pub mod lag_algebra;
pub mod market_data;
pub mod models;
pub mod optimizer;
pub mod strategy;

pub use error::{Error, Result};
