//! Output file writers. Currency columns carry 1 decimal, prices 2.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kalman_trend::backtest::{EquityPoint, Trade};
use kalman_trend::kalman::FilterRun;
use kalman_trend::lag_algebra::Smoothed;
use kalman_trend::market_data::BarSeries;

/// Tracks written files so a failing command can remove its partial
/// outputs.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn remove_all(&mut self) {
        for path in self.written.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

pub fn trades_csv(trades: &[Trade]) -> String {
    let mut out = String::from(
        "Trade,Direction,Entry date,Entry price,Exit date,Exit price,Profit,PnL,Commission,Days in position\n",
    );
    for (i, t) in trades.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{:.2},{},{:.2},{:.1},{:.1},{:.1},{}",
            i + 1,
            t.direction,
            t.entry_date,
            t.entry_price,
            t.exit_date,
            t.exit_price,
            t.profit,
            t.cumulative_pnl,
            t.commission,
            t.days_in_position
        );
    }
    out
}

pub fn equity_csv(equity: &[EquityPoint]) -> String {
    let mut out = String::from("date,closed_pnl,mtm_pnl\n");
    for p in equity {
        let _ = writeln!(out, "{},{:.1},{:.1}", p.date, p.closed_pnl, p.mtm_pnl);
    }
    out
}

/// The `smooth` overlay: one row per bar with whichever columns the chosen
/// indicator produces.
pub fn overlay_csv(
    series: &BarSeries,
    indicator: Option<&Smoothed>,
    filter: Option<&FilterRun>,
) -> String {
    let mut out = String::from("date,close,indicator,predicted,corrected,warmup\n");
    for (t, bar) in series.bars().iter().enumerate() {
        let indicator_col = indicator.map_or(String::new(), |s| format!("{:.2}", s.values[t]));
        let (predicted, corrected) = filter.map_or((String::new(), String::new()), |r| {
            (
                format!("{:.2}", r.predicted[t]),
                format!("{:.2}", r.corrected[t]),
            )
        });
        let warm =
            indicator.is_some_and(|s| s.is_warmup(t)) || filter.is_some_and(|r| t < r.warmup);
        let _ = writeln!(
            out,
            "{},{:.2},{},{},{},{}",
            bar.date, bar.close, indicator_col, predicted, corrected, warm
        );
    }
    out
}
