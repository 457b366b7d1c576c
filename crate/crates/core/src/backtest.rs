//! Signal execution into a futures trade ledger, plus the performance
//! statistics block.
//!
//! Fills happen at the decision bar's close with no slippage; positions are
//! stop-and-reverse, so the entry of each trade equals the exit of the
//! previous one; any open position is force-closed on the final bar.
//! Profit is `sign * (exit - entry) * point_value * contracts - commission`
//! with a per-round-trip commission.

use chrono::{Datelike, Months, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::BarSeries;
use crate::strategy::{Signal, SignalKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Long => 1.0,
            Direction::Short => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Long => "Long",
            Direction::Short => "Short",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Long" | "long" => Ok(Direction::Long),
            "Short" | "short" => Ok(Direction::Short),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction `{other}`"
            ))),
        }
    }
}

/// Futures accounting knobs. Defaults are one E-mini contract: 50 USD per
/// index point and a 4 USD round-trip commission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionConfig {
    pub point_value: f64,
    pub commission_round_trip: f64,
    pub contracts: u32,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            point_value: 50.0,
            commission_round_trip: 4.0,
            contracts: 1,
        }
    }
}

impl ExecutionConfig {
    pub fn check(&self) -> Result<()> {
        if !self.point_value.is_finite() || self.point_value <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "point value must be > 0, got {}",
                self.point_value
            )));
        }
        if !self.commission_round_trip.is_finite() || self.commission_round_trip < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "commission must be >= 0, got {}",
                self.commission_round_trip
            )));
        }
        if self.contracts < 1 {
            return Err(Error::InvalidArgument("contracts must be >= 1".into()));
        }
        Ok(())
    }

    fn profit(&self, direction: Direction, entry: f64, exit: f64) -> f64 {
        direction.sign() * (exit - entry) * self.point_value * self.contracts as f64
            - self.commission_round_trip
    }
}

/// One closed round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub direction: Direction,
    pub entry_date: NaiveDate,
    pub entry_price: f64,
    pub exit_date: NaiveDate,
    pub exit_price: f64,
    /// Net of commission.
    pub profit: f64,
    /// Running net total over the ledger.
    pub cumulative_pnl: f64,
    pub commission: f64,
    /// Weekdays from entry to exit, both endpoints included, minimum 1.
    pub days_in_position: u32,
}

/// Equity sampled at one bar: realized PnL of closed trades, and the same
/// plus the open position marked at the bar close (pending commission not
/// deducted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityPoint {
    pub date: NaiveDate,
    pub closed_pnl: f64,
    pub mtm_pnl: f64,
}

/// Weekdays in `[from, to]` inclusive, clamped to at least 1. This is the
/// ledger's holding-period convention (holidays are not excluded).
pub fn weekdays_inclusive(from: NaiveDate, to: NaiveDate) -> u32 {
    if to < from {
        return 1;
    }
    let mut count = 0u32;
    let mut d = from;
    while d <= to {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            count += 1;
        }
        d = d + chrono::Days::new(1);
    }
    count.max(1)
}

/// Executes a signal stream against its bar series.
///
/// The first non-hold signal opens a position; an opposite signal closes it
/// and opens the reverse at the same close; the final bar force-closes.
/// Returns the closed-trade ledger and the per-bar equity series.
pub fn execute(
    signals: &[Signal],
    bars: &BarSeries,
    cfg: &ExecutionConfig,
) -> (Vec<Trade>, Vec<EquityPoint>) {
    let mut trades: Vec<Trade> = Vec::new();
    let mut equity = Vec::with_capacity(bars.len());
    let mut open: Option<(Direction, NaiveDate, f64)> = None;
    let mut cumulative = 0.0;
    let mut next_signal = signals.iter().peekable();
    let last = bars.len() - 1;

    let close_position = |open: &mut Option<(Direction, NaiveDate, f64)>,
                          cumulative: &mut f64,
                          trades: &mut Vec<Trade>,
                          date: NaiveDate,
                          price: f64| {
        if let Some((direction, entry_date, entry_price)) = open.take() {
            let profit = cfg.profit(direction, entry_price, price);
            *cumulative += profit;
            trades.push(Trade {
                direction,
                entry_date,
                entry_price,
                exit_date: date,
                exit_price: price,
                profit,
                cumulative_pnl: *cumulative,
                commission: cfg.commission_round_trip,
                days_in_position: weekdays_inclusive(entry_date, date),
            });
        }
    };

    for (t, bar) in bars.bars().iter().enumerate() {
        while next_signal.peek().is_some_and(|s| s.at <= t) {
            let signal = next_signal.next().unwrap();
            if signal.at < t {
                continue;
            }
            let target = match signal.target {
                SignalKind::Long => Some(Direction::Long),
                SignalKind::Short => Some(Direction::Short),
                SignalKind::Hold => None,
            };
            if let Some(direction) = target {
                match open {
                    Some((current, _, _)) if current == direction => {}
                    Some(_) => {
                        close_position(
                            &mut open,
                            &mut cumulative,
                            &mut trades,
                            bar.date,
                            bar.close,
                        );
                        open = Some((direction, bar.date, bar.close));
                    }
                    None => open = Some((direction, bar.date, bar.close)),
                }
            }
        }
        if t == last {
            close_position(&mut open, &mut cumulative, &mut trades, bar.date, bar.close);
        }
        let unrealized = open
            .map(|(direction, _, entry)| {
                direction.sign() * (bar.close - entry) * cfg.point_value * cfg.contracts as f64
            })
            .unwrap_or(0.0);
        equity.push(EquityPoint {
            date: bar.date,
            closed_pnl: cumulative,
            mtm_pnl: cumulative + unrealized,
        });
    }
    (trades, equity)
}

/// One row of a precomputed ledger: prices and dates only; the money
/// columns are recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub direction: Direction,
    pub entry_date: NaiveDate,
    pub entry_price: f64,
    pub exit_date: NaiveDate,
    pub exit_price: f64,
}

/// Recomputes profit and cumulative PnL for a list of (direction, entry,
/// exit) rows.
pub fn replay_ledger(rows: &[ReplayRow], cfg: &ExecutionConfig) -> Vec<Trade> {
    let mut cumulative = 0.0;
    rows.iter()
        .map(|row| {
            let profit = cfg.profit(row.direction, row.entry_price, row.exit_price);
            cumulative += profit;
            Trade {
                direction: row.direction,
                entry_date: row.entry_date,
                entry_price: row.entry_price,
                exit_date: row.exit_date,
                exit_price: row.exit_price,
                profit,
                cumulative_pnl: cumulative,
                commission: cfg.commission_round_trip,
                days_in_position: weekdays_inclusive(row.entry_date, row.exit_date),
            }
        })
        .collect()
}

/// Statistics for one subset (all trades, longs only, shorts only).
///
/// `drawdown` is measured on the mark-to-market equity when one is
/// available (the all-trades subset of a bar-driven run), otherwise on the
/// closed-trade cumulative PnL; `closed_trade_drawdown` always carries the
/// latter.
/// Ratios that would divide by zero are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub net_profit: f64,
    pub gross_profit: f64,
    pub gross_loss: f64,
    pub total_commission: f64,
    pub drawdown: f64,
    pub closed_trade_drawdown: f64,
    pub sharpe_ratio: Option<f64>,
    pub profit_factor: Option<f64>,
    pub num_trades: usize,
    pub winning_trades: usize,
    pub avg_trade_profit: f64,
    pub avg_winning_trade: f64,
    pub largest_winning_trade: f64,
    pub max_consecutive_winners: usize,
    pub losing_trades: usize,
    pub avg_losing_trade: f64,
    pub largest_losing_trade: f64,
    pub max_consecutive_losers: usize,
    pub ratio_avg_win_avg_loss: Option<f64>,
    pub winning_over_total: f64,
    pub avg_time_in_market_days: f64,
    pub profit_per_month: f64,
    pub max_time_to_recover_days: Option<i64>,
}

/// The full statistics block, computed for all trades and for the long and
/// short subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub all: SubsetStats,
    pub long: SubsetStats,
    pub short: SubsetStats,
}

const DAYS_PER_MONTH: f64 = 30.4375;

/// Aggregates a closed-trade ledger into the statistics block.
///
/// `span` is the date range the money was made over (conventionally first
/// entry to last exit); it drives `profit_per_month` and the monthly
/// buckets behind the Sharpe ratio. Trades must be ordered by exit date.
pub fn compute_report(
    trades: &[Trade],
    equity: &[EquityPoint],
    span: (NaiveDate, NaiveDate),
) -> Result<PerformanceReport> {
    if trades.is_empty() {
        return Err(Error::EmptyLedger);
    }
    if span.1 < span.0 {
        return Err(Error::InvalidArgument(
            "span end precedes span start".into(),
        ));
    }
    let longs: Vec<&Trade> = trades
        .iter()
        .filter(|t| t.direction == Direction::Long)
        .collect();
    let shorts: Vec<&Trade> = trades
        .iter()
        .filter(|t| t.direction == Direction::Short)
        .collect();
    let all: Vec<&Trade> = trades.iter().collect();
    Ok(PerformanceReport {
        all: subset_stats(&all, Some(equity), span),
        long: subset_stats(&longs, None, span),
        short: subset_stats(&shorts, None, span),
    })
}

fn subset_stats(
    trades: &[&Trade],
    equity: Option<&[EquityPoint]>,
    span: (NaiveDate, NaiveDate),
) -> SubsetStats {
    let n = trades.len();
    let net_profit: f64 = trades.iter().map(|t| t.profit).sum();
    let gross_profit: f64 = trades.iter().map(|t| t.profit.max(0.0)).sum();
    let gross_loss: f64 = trades.iter().map(|t| t.profit.min(0.0)).sum();
    let total_commission: f64 = trades.iter().map(|t| t.commission).sum();

    let winners: Vec<f64> = trades
        .iter()
        .map(|t| t.profit)
        .filter(|p| *p > 0.0)
        .collect();
    // Break-even trades count as losers.
    let losers: Vec<f64> = trades
        .iter()
        .map(|t| t.profit)
        .filter(|p| *p <= 0.0)
        .collect();

    let (max_consecutive_winners, max_consecutive_losers) = streaks(trades);

    // Closed-trade curve of this subset, dated by exits and anchored at
    // zero on the span start.
    let mut closed_curve: Vec<(NaiveDate, f64)> = vec![(span.0, 0.0)];
    let mut acc = 0.0;
    for t in trades {
        acc += t.profit;
        closed_curve.push((t.exit_date, acc));
    }
    let closed_trade_drawdown = drawdown(closed_curve.iter().map(|(_, v)| *v));

    let mtm_curve: Option<Vec<(NaiveDate, f64)>> = equity
        .filter(|e| !e.is_empty())
        .map(|e| e.iter().map(|p| (p.date, p.mtm_pnl)).collect());
    let drawdown_value = match &mtm_curve {
        Some(curve) => drawdown(curve.iter().map(|(_, v)| *v)),
        None => closed_trade_drawdown,
    };
    let recovery_curve = mtm_curve.as_deref().unwrap_or(&closed_curve);
    let max_time_to_recover_days = max_time_between_highs(recovery_curve);

    let span_days = (span.1 - span.0).num_days().max(1) as f64;
    let months = span_days / DAYS_PER_MONTH;
    let monthly = monthly_pnl(trades, span);
    let sharpe_ratio = sharpe(&monthly);

    let avg_win = if winners.is_empty() {
        0.0
    } else {
        winners.iter().sum::<f64>() / winners.len() as f64
    };
    let avg_loss = if losers.is_empty() {
        0.0
    } else {
        losers.iter().sum::<f64>() / losers.len() as f64
    };

    SubsetStats {
        net_profit,
        gross_profit,
        gross_loss,
        total_commission,
        drawdown: drawdown_value,
        closed_trade_drawdown,
        sharpe_ratio,
        profit_factor: (gross_loss < 0.0).then(|| gross_profit / gross_loss.abs()),
        num_trades: n,
        winning_trades: winners.len(),
        avg_trade_profit: if n == 0 { 0.0 } else { net_profit / n as f64 },
        avg_winning_trade: avg_win,
        largest_winning_trade: winners.iter().copied().fold(0.0, f64::max),
        max_consecutive_winners,
        losing_trades: losers.len(),
        avg_losing_trade: avg_loss,
        largest_losing_trade: losers.iter().copied().fold(0.0, f64::min),
        max_consecutive_losers,
        ratio_avg_win_avg_loss: (!winners.is_empty() && avg_loss < 0.0)
            .then(|| avg_win / avg_loss.abs()),
        winning_over_total: if n == 0 {
            0.0
        } else {
            winners.len() as f64 / n as f64
        },
        avg_time_in_market_days: if n == 0 {
            0.0
        } else {
            trades
                .iter()
                .map(|t| (t.exit_date - t.entry_date).num_days() as f64)
                .sum::<f64>()
                / n as f64
        },
        profit_per_month: net_profit / months,
        max_time_to_recover_days,
    }
}

fn streaks(trades: &[&Trade]) -> (usize, usize) {
    let mut max_wins = 0usize;
    let mut max_losses = 0usize;
    let mut wins = 0usize;
    let mut losses = 0usize;
    for t in trades {
        if t.profit > 0.0 {
            wins += 1;
            losses = 0;
        } else {
            losses += 1;
            wins = 0;
        }
        max_wins = max_wins.max(wins);
        max_losses = max_losses.max(losses);
    }
    (max_wins, max_losses)
}

/// Most negative peak-to-trough move; zero or negative.
fn drawdown(values: impl Iterator<Item = f64>) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for v in values {
        peak = peak.max(v);
        worst = worst.min(v - peak);
    }
    worst
}

/// Longest gap in days between consecutive equity highs; `None` when the
/// curve never sets more than one high. An unrecovered final drawdown is
/// not counted.
fn max_time_between_highs(curve: &[(NaiveDate, f64)]) -> Option<i64> {
    let mut peak = f64::NEG_INFINITY;
    let mut peak_date: Option<NaiveDate> = None;
    let mut max_gap: Option<i64> = None;
    for &(date, v) in curve {
        if v >= peak {
            if let Some(prev) = peak_date {
                let gap = (date - prev).num_days();
                max_gap = Some(max_gap.map_or(gap, |g| g.max(gap)));
            }
            peak = v;
            peak_date = Some(date);
        }
    }
    max_gap
}

/// Closed-trade PnL bucketed by exit month over the span, zero-filled for
/// months without trades.
fn monthly_pnl(trades: &[&Trade], span: (NaiveDate, NaiveDate)) -> Vec<f64> {
    let first = span.0.with_day(1).expect("first of month");
    let mut months: Vec<(i32, u32)> = Vec::new();
    let mut cursor = first;
    while cursor <= span.1 {
        months.push((cursor.year(), cursor.month()));
        cursor = cursor + Months::new(1);
    }
    let mut buckets = vec![0.0; months.len()];
    for t in trades {
        let key = (t.exit_date.year(), t.exit_date.month());
        if let Some(idx) = months.iter().position(|m| *m == key) {
            buckets[idx] += t.profit;
        }
    }
    buckets
}

/// Annualized mean-over-stddev of the monthly PnL (sample stddev, no
/// risk-free deduction). `None` with fewer than two months or zero spread.
fn sharpe(monthly: &[f64]) -> Option<f64> {
    if monthly.len() < 2 {
        return None;
    }
    let n = monthly.len() as f64;
    let mean = monthly.iter().sum::<f64>() / n;
    let var = monthly.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    (std > 0.0).then(|| mean / std * 12f64.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{synthesize, SynthKind};
    use crate::models::{ModelKind, ModelParams};
    use crate::strategy::{run_strategy, StrategyConfig};
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn row(direction: Direction, entry: f64, exit: f64) -> ReplayRow {
        ReplayRow {
            direction,
            entry_date: date(2015, 4, 1),
            entry_price: entry,
            exit_date: date(2015, 4, 2),
            exit_price: exit,
        }
    }

    #[test]
    fn short_profit_arithmetic() {
        let cfg = ExecutionConfig::default();
        let trades = replay_ledger(&[row(Direction::Short, 2033.5, 2026.0)], &cfg);
        assert_eq!(trades[0].profit, 371.0);
    }

    #[test]
    fn flat_trade_costs_commission() {
        let cfg = ExecutionConfig::default();
        let trades = replay_ledger(&[row(Direction::Long, 2000.0, 2000.0)], &cfg);
        assert_eq!(trades[0].profit, -4.0);
    }

    #[test]
    fn large_short_profit_pins_point_value() {
        // Point value back-solved from the ledger: (2043 - 1924.5) * 50 - 4.
        let cfg = ExecutionConfig::default();
        let trades = replay_ledger(&[row(Direction::Short, 2043.0, 1924.5)], &cfg);
        assert_eq!(trades[0].profit, 5921.0);
    }

    #[test]
    fn cumulative_pnl_chains() {
        let cfg = ExecutionConfig::default();
        let trades = replay_ledger(
            &[
                row(Direction::Long, 2000.0, 2010.0),
                row(Direction::Short, 2010.0, 2005.0),
            ],
            &cfg,
        );
        assert_eq!(trades[0].cumulative_pnl, 496.0);
        assert_eq!(trades[1].cumulative_pnl, 496.0 + 246.0);
    }

    #[test]
    fn weekday_count_is_inclusive() {
        // Fri 2015-04-10 .. Tue 2015-04-21 spans 8 weekdays.
        assert_eq!(weekdays_inclusive(date(2015, 4, 10), date(2015, 4, 21)), 8);
        // Mon 2015-10-19 .. Tue 2015-12-15 spans 42 weekdays.
        assert_eq!(
            weekdays_inclusive(date(2015, 10, 19), date(2015, 12, 15)),
            42
        );
        // Same day.
        assert_eq!(weekdays_inclusive(date(2016, 2, 26), date(2016, 2, 26)), 1);
        // Consecutive days.
        assert_eq!(weekdays_inclusive(date(2015, 3, 31), date(2015, 4, 1)), 2);
    }

    #[test]
    fn execute_stop_and_reverse_chains_prices() {
        let bars = synthesize(SynthKind::Range, 160, 8, 3.0).unwrap();
        let params = ModelParams::new(ModelKind::One, vec![5.0, 5.0, 45.0, 10.0]).unwrap();
        let signals = run_strategy(&bars, &params, &StrategyConfig::new(0.0, 20).unwrap()).unwrap();
        let (trades, equity) = execute(&signals, &bars, &ExecutionConfig::default());
        assert!(trades.len() >= 2, "expected some flips on a range market");
        for pair in trades.windows(2) {
            assert_eq!(pair[0].exit_price, pair[1].entry_price);
            assert_eq!(pair[0].exit_date, pair[1].entry_date);
            assert_ne!(pair[0].direction, pair[1].direction);
        }
        // Force-closed on the last bar.
        assert_eq!(
            trades.last().unwrap().exit_date,
            bars.bars().last().unwrap().date
        );
        assert_eq!(equity.len(), bars.len());
        assert_eq!(
            equity.last().unwrap().closed_pnl,
            trades.last().unwrap().cumulative_pnl
        );
    }

    #[test]
    fn equity_is_reconstructible_from_trades() {
        let bars = synthesize(SynthKind::RandomWalk, 140, 77, 6.0).unwrap();
        let params = ModelParams::new(ModelKind::Two, vec![5.0, 5.0, 41.0, 1.0, 1.0]).unwrap();
        let signals = run_strategy(&bars, &params, &StrategyConfig::new(0.0, 20).unwrap()).unwrap();
        let cfg = ExecutionConfig::default();
        let (trades, equity) = execute(&signals, &bars, &cfg);
        for (t, point) in equity.iter().enumerate() {
            let bar = &bars.bars()[t];
            let closed: f64 = trades
                .iter()
                .filter(|tr| tr.exit_date <= bar.date)
                .map(|tr| tr.profit)
                .sum();
            let open = trades
                .iter()
                .find(|tr| tr.entry_date <= bar.date && tr.exit_date > bar.date)
                .map(|tr| tr.direction.sign() * (bar.close - tr.entry_price) * cfg.point_value)
                .unwrap_or(0.0);
            assert!((point.closed_pnl - closed).abs() < 1e-9, "bar {t} closed");
            assert!(
                (point.mtm_pnl - (closed + open)).abs() < 1e-9,
                "bar {t} mtm"
            );
        }
    }

    #[test]
    fn empty_signals_make_empty_ledger() {
        let bars = synthesize(SynthKind::Trend, 30, 2, 0.0).unwrap();
        let (trades, equity) = execute(&[], &bars, &ExecutionConfig::default());
        assert!(trades.is_empty());
        assert!(equity
            .iter()
            .all(|p| p.closed_pnl == 0.0 && p.mtm_pnl == 0.0));
    }

    #[test]
    fn report_requires_trades() {
        assert!(matches!(
            compute_report(&[], &[], (date(2015, 1, 1), date(2015, 12, 31))),
            Err(Error::EmptyLedger)
        ));
    }

    #[test]
    fn single_winner_has_unbounded_profit_factor() {
        let cfg = ExecutionConfig::default();
        let trades = replay_ledger(&[row(Direction::Long, 2000.0, 2010.0)], &cfg);
        let report = compute_report(&trades, &[], (date(2015, 4, 1), date(2015, 4, 2))).unwrap();
        assert_eq!(report.all.gross_loss, 0.0);
        assert_eq!(report.all.profit_factor, None);
        assert_eq!(report.all.winning_trades, 1);
    }

    #[test]
    fn report_identities_hold() {
        let cfg = ExecutionConfig::default();
        let rows = vec![
            row(Direction::Long, 2000.0, 2010.0),
            row(Direction::Short, 2010.0, 2004.0),
            row(Direction::Long, 2004.0, 1998.0),
            row(Direction::Short, 1998.0, 2001.0),
        ];
        let trades = replay_ledger(&rows, &cfg);
        let report = compute_report(&trades, &[], (date(2015, 4, 1), date(2015, 4, 2))).unwrap();
        let a = &report.all;
        assert!((a.net_profit - (a.gross_profit + a.gross_loss)).abs() < 1e-9);
        assert_eq!(a.num_trades, a.winning_trades + a.losing_trades);
        assert_eq!(a.total_commission, 16.0);
        assert_eq!(
            report.long.num_trades + report.short.num_trades,
            a.num_trades
        );
        assert!(a.drawdown <= 0.0);
    }

    #[test]
    fn drawdown_scans_peak_to_trough() {
        assert_eq!(drawdown([0.0, 10.0, 4.0, 12.0, 3.0, 5.0].into_iter()), -9.0);
        assert_eq!(drawdown([0.0, 1.0, 2.0].into_iter()), 0.0);
    }

    #[test]
    fn time_between_highs() {
        let curve = vec![
            (date(2015, 1, 1), 0.0),
            (date(2015, 1, 10), 5.0),
            (date(2015, 1, 20), -1.0),
            (date(2015, 2, 19), 6.0),
        ];
        assert_eq!(max_time_between_highs(&curve), Some(40));
        let flat = vec![(date(2015, 1, 1), 0.0)];
        assert_eq!(max_time_between_highs(&flat), None);
    }

    proptest! {
        /// Flipping every direction negates the pre-commission PnL.
        #[test]
        fn direction_flip_negates_gross_pnl(
            prices in proptest::collection::vec((1000.0f64..3000.0, 1000.0f64..3000.0), 1..30)
        ) {
            let cfg = ExecutionConfig::default();
            let rows: Vec<ReplayRow> =
                prices.iter().map(|&(e, x)| row(Direction::Long, e, x)).collect();
            let flipped: Vec<ReplayRow> =
                prices.iter().map(|&(e, x)| row(Direction::Short, e, x)).collect();
            let a = replay_ledger(&rows, &cfg);
            let b = replay_ledger(&flipped, &cfg);
            for (ta, tb) in a.iter().zip(&b) {
                let gross_a = ta.profit + cfg.commission_round_trip;
                let gross_b = tb.profit + cfg.commission_round_trip;
                prop_assert!((gross_a + gross_b).abs() < 1e-9);
            }
        }

        /// Ledger identity: the report's net equals the final cumulative
        /// PnL and the summed profits.
        #[test]
        fn ledger_identity(
            prices in proptest::collection::vec((1000.0f64..3000.0, 1000.0f64..3000.0), 1..30)
        ) {
            let cfg = ExecutionConfig::default();
            let rows: Vec<ReplayRow> = prices
                .iter()
                .enumerate()
                .map(|(i, &(e, x))| {
                    let dir = if i % 2 == 0 { Direction::Long } else { Direction::Short };
                    row(dir, e, x)
                })
                .collect();
            let trades = replay_ledger(&rows, &cfg);
            let report = compute_report(&trades, &[], (date(2015, 4, 1), date(2015, 4, 2))).unwrap();
            let total: f64 = trades.iter().map(|t| t.profit).sum();
            prop_assert!((report.all.net_profit - total).abs() < 1e-9);
            prop_assert!((report.all.net_profit - trades.last().unwrap().cumulative_pnl).abs() < 1e-9);
            prop_assert!(
                (report.all.total_commission - cfg.commission_round_trip * trades.len() as f64).abs() < 1e-9
            );
            prop_assert!(
                (report.all.net_profit - (report.long.net_profit + report.short.net_profit)).abs() < 1e-9
            );
            // A closed-trade drawdown can never exceed the total losses.
            prop_assert!(report.all.drawdown <= 0.0);
            prop_assert!(report.all.closed_trade_drawdown.abs() <= report.all.gross_loss.abs() + 1e-9);
        }
    }
}
