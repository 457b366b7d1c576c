//! Derivative-free parameter search over a backtest objective.
//!
//! Two phases: a coarse exploration pass (cartesian grid when grid counts
//! are given, otherwise Latin-hypercube blocks) followed by Nelder-Mead
//! refinement from the best explored point. The objective is
//! piecewise-constant in the parameters (trades flip discretely), so
//! gradient-free search is the only option and the grid pass mitigates
//! plateaus.
//!
//! The evaluation sequence is a deterministic stream that does not depend
//! on the budget (a larger budget only extends it), so the best objective
//! is monotone in the budget for a fixed seed.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backtest::{compute_report, execute, ExecutionConfig};
use crate::error::{Error, Result};
use crate::market_data::BarSeries;
use crate::models::{ModelKind, ModelParams};
use crate::strategy::{run_strategy, StrategyConfig};

/// What the search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    NetProfit,
    RecoveryRatio,
    ProfitFactor,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::NetProfit => "net_profit",
            Objective::RecoveryRatio => "recovery_ratio",
            Objective::ProfitFactor => "profit_factor",
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "net_profit" => Ok(Objective::NetProfit),
            "recovery_ratio" => Ok(Objective::RecoveryRatio),
            "profit_factor" => Ok(Objective::ProfitFactor),
            other => Err(Error::InvalidArgument(format!(
                "unknown objective `{other}`"
            ))),
        }
    }
}

/// Per-parameter bounds with optional per-dimension grid counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    bounds: Vec<(f64, f64)>,
    grid: Option<Vec<usize>>,
}

impl SearchSpace {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidSpace("bounds must be non-empty".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidSpace(format!(
                    "dimension {i}: bad bounds ({lo}, {hi})"
                )));
            }
        }
        Ok(Self { bounds, grid: None })
    }

    pub fn with_grid(mut self, grid: Vec<usize>) -> Result<Self> {
        if grid.len() != self.bounds.len() {
            return Err(Error::InvalidSpace(format!(
                "grid has {} entries for {} dimensions",
                grid.len(),
                self.bounds.len()
            )));
        }
        if grid.contains(&0) {
            return Err(Error::InvalidSpace("grid counts must be >= 1".into()));
        }
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn grid(&self) -> Option<&[usize]> {
        self.grid.as_deref()
    }
}

/// One objective evaluation, in evaluation order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub params: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_params: ModelParams,
    pub best_objective: f64,
    pub evaluations: usize,
    pub trace: Vec<Evaluation>,
}

/// JSON wire format of a search request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub model: ModelKind,
    pub bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub grid: Option<Vec<usize>>,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_objective() -> Objective {
    Objective::NetProfit
}

fn default_budget() -> usize {
    1000
}

impl OptimizeConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn space(&self) -> Result<SearchSpace> {
        let space = SearchSpace::new(self.bounds.iter().map(|b| (b[0], b[1])).collect())?;
        match &self.grid {
            Some(grid) => space.with_grid(grid.clone()),
            None => Ok(space),
        }
    }
}

/// Searches the parameter space of `kind` for the best backtest objective
/// on `bars`. Deterministic for a fixed seed; parameter vectors that fail
/// to build or filter score negative infinity instead of aborting.
pub fn optimize(
    bars: &BarSeries,
    kind: ModelKind,
    space: &SearchSpace,
    objective: Objective,
    budget: usize,
    seed: u64,
) -> Result<OptimizationResult> {
    if space.dim() != kind.param_count() {
        return Err(Error::InvalidSpace(format!(
            "model {kind} has {} parameters, space has {}",
            kind.param_count(),
            space.dim()
        )));
    }
    if budget < 1 {
        return Err(Error::InvalidArgument("budget must be >= 1".into()));
    }

    let bounds = sanitize_bounds(kind, space.bounds());
    let integer_dims = integer_dims(kind);
    let exec = ExecutionConfig::default();

    let mut f = |x: &[f64]| -> f64 {
        let params = match ModelParams::new(kind, x.to_vec()) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let strat = StrategyConfig::for_model(&params);
        let signals = match run_strategy(bars, &params, &strat) {
            Ok(s) => s,
            Err(_) => return f64::NEG_INFINITY,
        };
        let (trades, equity) = execute(&signals, bars, &exec);
        if trades.is_empty() {
            // A silent parameter set earns nothing; it is not a failure.
            return 0.0;
        }
        let span = (trades[0].entry_date, trades.last().unwrap().exit_date);
        let report = match compute_report(&trades, &equity, span) {
            Ok(r) => r,
            Err(_) => return f64::NEG_INFINITY,
        };
        match objective {
            Objective::NetProfit => report.all.net_profit,
            Objective::RecoveryRatio => {
                let dd = report.all.drawdown.abs();
                if dd < 1e-9 {
                    if report.all.net_profit > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    report.all.net_profit / dd
                }
            }
            Objective::ProfitFactor => {
                report
                    .all
                    .profit_factor
                    .unwrap_or(if report.all.gross_profit > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    })
            }
        }
    };

    let outcome = search(&mut f, &bounds, space.grid(), &integer_dims, budget, seed);
    let best_params = ModelParams::new(kind, outcome.best.clone())?;
    Ok(OptimizationResult {
        best_params,
        best_objective: outcome.best_value,
        evaluations: outcome.trace.len(),
        trace: outcome.trace,
    })
}

/// Clamps bounds so every point in the space yields valid parameters:
/// measurement variances strictly positive, initial variances
/// non-negative, the oscillator period an integer at least 1.
fn sanitize_bounds(kind: ModelKind, bounds: &[(f64, f64)]) -> Vec<(f64, f64)> {
    const MIN_VARIANCE: f64 = 1e-6;
    let mut out = bounds.to_vec();
    let mut raise = |idx: usize, floor: f64| {
        out[idx].0 = out[idx].0.max(floor);
        out[idx].1 = out[idx].1.max(out[idx].0);
    };
    match kind {
        ModelKind::One => {
            raise(2, MIN_VARIANCE);
            raise(3, 0.0);
        }
        ModelKind::Two => {
            raise(2, MIN_VARIANCE);
            raise(3, 0.0);
            raise(4, 0.0);
        }
        ModelKind::Three => {
            raise(7, MIN_VARIANCE);
            raise(8, 0.0);
            raise(9, 0.0);
        }
        ModelKind::Four => {
            raise(7, MIN_VARIANCE);
            raise(8, 0.0);
            raise(9, 0.0);
            raise(14, 1.0);
        }
    }
    out
}

fn integer_dims(kind: ModelKind) -> Vec<bool> {
    let mut dims = vec![false; kind.param_count()];
    if kind == ModelKind::Four {
        dims[14] = true;
    }
    dims
}

struct SearchOutcome {
    best: Vec<f64>,
    best_value: f64,
    trace: Vec<Evaluation>,
}

/// Exploration size when no grid is given. Fixed per space (never per
/// budget) to keep the evaluation stream budget-independent.
fn lhs_exploration_budget(dim: usize) -> usize {
    (16 * dim).clamp(32, 256)
}

const LHS_BLOCK: usize = 16;

/// The generic maximizer: exploration stream, then Nelder-Mead from the
/// best explored point. `f` is called at most `budget` times.
fn search(
    f: &mut dyn FnMut(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    grid: Option<&[usize]>,
    integer_dims: &[bool],
    budget: usize,
    seed: u64,
) -> SearchOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator {
        f,
        bounds,
        integer_dims,
        budget,
        trace: Vec::new(),
        best: None,
    };

    match grid {
        Some(counts) => {
            let total: usize = counts
                .iter()
                .copied()
                .fold(1usize, |acc, n| acc.saturating_mul(n));
            for index in 0..total.min(budget) {
                eval.run(grid_point(bounds, counts, index));
            }
        }
        None => {
            let target = lhs_exploration_budget(bounds.len()).min(budget);
            'blocks: while eval.trace.len() < target {
                for point in lhs_block(&mut rng, bounds) {
                    if eval.trace.len() >= target {
                        break 'blocks;
                    }
                    eval.run(point);
                }
            }
        }
    }

    // Refine the free (continuous, non-degenerate) dimensions.
    let free: Vec<usize> = bounds
        .iter()
        .enumerate()
        .filter(|(i, (lo, hi))| !integer_dims[*i] && hi > lo)
        .map(|(i, _)| i)
        .collect();
    if !free.is_empty() {
        // Restart on convergence until the budget is spent; every restart
        // draws fresh simplex steps from the same deterministic stream.
        while !eval.exhausted() {
            let start = eval
                .best
                .as_ref()
                .map(|b| b.0.clone())
                .expect("explored at least once");
            nelder_mead(&mut eval, &start, &free, &mut rng);
        }
    }

    let (best, best_value) = eval.best.expect("at least one evaluation");
    SearchOutcome {
        best,
        best_value,
        trace: eval.trace,
    }
}

struct Evaluator<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    bounds: &'a [(f64, f64)],
    integer_dims: &'a [bool],
    budget: usize,
    trace: Vec<Evaluation>,
    best: Option<(Vec<f64>, f64)>,
}

impl Evaluator<'_> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    /// Clamps, snaps integer dimensions, evaluates, and records. Returns
    /// `None` once the budget is spent.
    fn run(&mut self, mut x: Vec<f64>) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.bounds[i].0, self.bounds[i].1);
            if self.integer_dims[i] {
                *v = v.round().clamp(self.bounds[i].0, self.bounds[i].1);
            }
        }
        let mut value = (self.f)(&x);
        if value.is_nan() {
            value = f64::NEG_INFINITY;
        }
        let better = match &self.best {
            None => true,
            Some((bx, bv)) => value > *bv || (value == *bv && x < *bx),
        };
        if better {
            self.best = Some((x.clone(), value));
            log::debug!("new best {value} at {x:?}");
        }
        self.trace.push(Evaluation {
            params: x,
            objective: value,
        });
        Some(value)
    }
}

/// The `index`-th point of the cartesian grid, row-major with the last
/// dimension fastest. A one-count dimension sits at the bounds midpoint.
fn grid_point(bounds: &[(f64, f64)], counts: &[usize], index: usize) -> Vec<f64> {
    let mut remainder = index;
    let mut point = vec![0.0; bounds.len()];
    for dim in (0..bounds.len()).rev() {
        let n = counts[dim];
        let j = remainder % n;
        remainder /= n;
        let (lo, hi) = bounds[dim];
        point[dim] = if n == 1 {
            (lo + hi) / 2.0
        } else {
            lo + j as f64 * (hi - lo) / (n - 1) as f64
        };
    }
    point
}

/// Latin hypercube block: every dimension is stratified into
/// [`LHS_BLOCK`] bins, shuffled independently.
fn lhs_block(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let dim = bounds.len();
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut order: Vec<usize> = (0..LHS_BLOCK).collect();
        order.shuffle(rng);
        strata.push(order);
    }
    (0..LHS_BLOCK)
        .map(|row| {
            (0..dim)
                .map(|d| {
                    let (lo, hi) = bounds[d];
                    let u: f64 = rng.random();
                    lo + (strata[d][row] as f64 + u) / LHS_BLOCK as f64 * (hi - lo)
                })
                .collect()
        })
        .collect()
}

/// Bounded Nelder-Mead maximization over the free dimensions, with the
/// remaining coordinates frozen at the start point. Runs until the simplex
/// collapses or the budget is spent.
fn nelder_mead(eval: &mut Evaluator<'_>, start: &[f64], free: &[usize], rng: &mut ChaCha8Rng) {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;
    const TOLERANCE: f64 = 1e-10;

    let free_bounds: Vec<(f64, f64)> = free.iter().map(|&d| eval.bounds[d]).collect();
    let embed = |reduced: &[f64]| -> Vec<f64> {
        let mut full = start.to_vec();
        for (slot, &dim) in free.iter().enumerate() {
            full[dim] = reduced[slot];
        }
        full
    };
    let clamped = |mut reduced: Vec<f64>| -> Vec<f64> {
        for (slot, &(lo, hi)) in free_bounds.iter().enumerate() {
            reduced[slot] = reduced[slot].clamp(lo, hi);
        }
        reduced
    };

    // Initial simplex: the start plus one jittered step per free dimension.
    let x0: Vec<f64> = free.iter().map(|&d| start[d]).collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(free.len() + 1);
    match eval.run(embed(&x0)) {
        Some(v) => simplex.push((x0.clone(), v)),
        None => return,
    }
    for slot in 0..free.len() {
        let (lo, hi) = free_bounds[slot];
        let step = rng.random_range(0.05..0.25) * (hi - lo);
        let mut point = x0.clone();
        point[slot] = if point[slot] + step <= hi {
            point[slot] + step
        } else {
            point[slot] - step
        };
        let point = clamped(point);
        match eval.run(embed(&point)) {
            Some(v) => simplex.push((point, v)),
            None => return,
        }
    }

    loop {
        // Best first: we maximize.
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let spread = simplex[0].1 - simplex.last().unwrap().1;
        let geom_spread: f64 = (0..free.len())
            .map(|slot| {
                let values: Vec<f64> = simplex.iter().map(|(p, _)| p[slot]).collect();
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - values.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread < TOLERANCE) || geom_spread < TOLERANCE {
            return;
        }

        let worst = simplex.len() - 1;
        let worst_point = simplex[worst].0.clone();
        let centroid: Vec<f64> = (0..free.len())
            .map(|slot| simplex[..worst].iter().map(|(p, _)| p[slot]).sum::<f64>() / worst as f64)
            .collect();
        let offset = |scale: f64| -> Vec<f64> {
            clamped(
                centroid
                    .iter()
                    .zip(&worst_point)
                    .map(|(c, w)| c + scale * (c - w))
                    .collect(),
            )
        };

        let reflected = offset(REFLECT);
        let Some(fr) = eval.run(embed(&reflected)) else {
            return;
        };

        if fr > simplex[0].1 {
            let expanded = offset(EXPAND);
            let Some(fe) = eval.run(embed(&expanded)) else {
                return;
            };
            simplex[worst] = if fe > fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr > simplex[worst - 1].1 {
            simplex[worst] = (reflected, fr);
        } else {
            let contracted = offset(-CONTRACT);
            let Some(fc) = eval.run(embed(&contracted)) else {
                return;
            };
            if fc > simplex[worst].1 {
                simplex[worst] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[0].0.clone();
                for idx in 1..simplex.len() {
                    let point = clamped(
                        anchor
                            .iter()
                            .zip(&simplex[idx].0)
                            .map(|(a, p)| a + SHRINK * (p - a))
                            .collect(),
                    );
                    let Some(v) = eval.run(embed(&point)) else {
                        return;
                    };
                    simplex[idx] = (point, v);
                }
            }
        }
    }
}
