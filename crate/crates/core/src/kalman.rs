//! Generic linear-Gaussian Kalman filter.
//!
//! State propagation `x' = phi*x + c_t`, `P' = phi*P*phi^T + Q`, followed by
//! a scalar measurement correction through `H` with noise variance `R`.
//! Drifts are time-indexed callbacks so a model can inject an exogenous
//! control term without changing the core.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Drift added to the state when forming the prediction of measurement `t`.
///
/// Implementations must draw only on information available before
/// measurement `t` (the filter consumes the value ahead of seeing `y_t`).
pub type StateDrift = Arc<dyn Fn(usize) -> DVector<f64> + Send + Sync>;

/// Drift added to the predicted measurement at step `t`.
pub type MeasurementDrift = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const PSD_TOLERANCE: f64 = -1e-10;

/// Immutable description of one filter: matrices, noise covariances,
/// drift providers, and the initial state.
#[derive(Clone)]
pub struct KalmanSpec {
    phi: DMatrix<f64>,
    h: DMatrix<f64>,
    q: DMatrix<f64>,
    r: f64,
    state_drift: StateDrift,
    measurement_drift: MeasurementDrift,
    x0: DVector<f64>,
    p0: DMatrix<f64>,
}

impl fmt::Debug for KalmanSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KalmanSpec")
            .field("phi", &self.phi)
            .field("h", &self.h)
            .field("q", &self.q)
            .field("r", &self.r)
            .field("x0", &self.x0)
            .field("p0", &self.p0)
            .finish_non_exhaustive()
    }
}

impl KalmanSpec {
    /// Builds a drift-free spec. `h` is the single measurement row.
    pub fn new(
        phi: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        r: f64,
        x0: DVector<f64>,
        p0: DMatrix<f64>,
    ) -> Result<Self> {
        let n = phi.nrows();
        Self::with_drifts(
            phi,
            h,
            q,
            r,
            x0,
            p0,
            Arc::new(move |_| DVector::zeros(n)),
            Arc::new(|_| 0.0),
        )
    }

    /// Builds a spec with time-indexed state and measurement drifts.
    #[allow(clippy::too_many_arguments)]
    pub fn with_drifts(
        phi: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        r: f64,
        x0: DVector<f64>,
        p0: DMatrix<f64>,
        state_drift: StateDrift,
        measurement_drift: MeasurementDrift,
    ) -> Result<Self> {
        let n = phi.nrows();
        if phi.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "phi must be square, got {}x{}",
                phi.nrows(),
                phi.ncols()
            )));
        }
        if h.nrows() != 1 || h.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "h must be 1x{n}, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "q must be {n}x{n}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if p0.nrows() != n || p0.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "p0 must be {n}x{n}, got {}x{}",
                p0.nrows(),
                p0.ncols()
            )));
        }
        if x0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x0 must have length {n}, got {}",
                x0.len()
            )));
        }
        for (name, m) in [("phi", &phi), ("h", &h), ("q", &q), ("p0", &p0)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("x0 must be finite".into()));
        }
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::InvalidArgument(format!("r must be > 0, got {r}")));
        }
        check_symmetric_psd("q", &q)?;
        check_symmetric_psd("p0", &p0)?;
        Ok(Self {
            phi,
            h,
            q,
            r,
            state_drift,
            measurement_drift,
            x0,
            p0,
        })
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn p0(&self) -> &DMatrix<f64> {
        &self.p0
    }

    pub fn state_drift_at(&self, t: usize) -> DVector<f64> {
        (self.state_drift)(t)
    }

    pub fn measurement_drift_at(&self, t: usize) -> f64 {
        (self.measurement_drift)(t)
    }

    /// Filter state before any measurement has been folded in.
    pub fn initial_state(&self) -> FilterState {
        FilterState {
            x: self.x0.clone(),
            p: self.p0.clone(),
            step: 0,
        }
    }
}

fn check_symmetric_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let max_asym = (m - m.transpose()).abs().max();
    if max_asym > SYMMETRY_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "{name} must be symmetric (max asymmetry {max_asym:e})"
        )));
    }
    let min_eig = min_symmetric_eigenvalue(m);
    if min_eig < PSD_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "{name} must be positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of a (near-)symmetric matrix, computed on its
/// symmetrized form.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let eigen = sym.symmetric_eigen();
    eigen.eigenvalues.min()
}

/// Evolving state estimate: mean, covariance, and the number of
/// measurements folded in so far.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
    pub step: usize,
}

/// Scalar by-products of one correction step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Predicted measurement before the correction, `H*x_pred + d_t`.
    pub predicted_measurement: f64,
    /// Measurement-space estimate after the correction, `H*x_upd + d_t`.
    pub corrected_measurement: f64,
    /// Measurement minus predicted measurement.
    pub innovation: f64,
    /// Predicted variance of the innovation, `H*P*H^T + R`.
    pub residual_variance: f64,
    pub gain: DVector<f64>,
}

/// Propagates the state one step: `x' = phi*x + c_t`, `P' = phi*P*phi^T + Q`.
/// The step counter is unchanged; the correction advances it.
pub fn predict(state: &FilterState, spec: &KalmanSpec) -> Result<FilterState> {
    let n = spec.dim();
    if state.x.len() != n || state.p.nrows() != n || state.p.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} does not match spec dimension {n}",
            state.x.len()
        )));
    }
    let c = spec.state_drift_at(state.step);
    if c.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "state drift has length {}, expected {n}",
            c.len()
        )));
    }
    let x = &spec.phi * &state.x + c;
    let p = &spec.phi * &state.p * spec.phi.transpose() + &spec.q;
    Ok(FilterState {
        x,
        p,
        step: state.step,
    })
}

/// Folds one measurement into a post-predict state. The updated covariance
/// `(I - K*H)*P` is re-symmetrized to control round-off drift.
pub fn update(state: &FilterState, spec: &KalmanSpec, y: f64) -> Result<(FilterState, StepOutput)> {
    let n = spec.dim();
    if state.x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} does not match spec dimension {n}",
            state.x.len()
        )));
    }
    let d = spec.measurement_drift_at(state.step);
    let predicted_measurement = (&spec.h * &state.x)[(0, 0)] + d;
    let s = (&spec.h * &state.p * spec.h.transpose())[(0, 0)] + spec.r;
    if !s.is_finite() || s <= 1e-300 {
        return Err(Error::SingularResidual(s));
    }
    let innovation = y - predicted_measurement;
    let gain: DVector<f64> = (&state.p * spec.h.transpose()).column(0) / s;
    let x = &state.x + &gain * innovation;
    let identity = DMatrix::<f64>::identity(n, n);
    let p_raw = (&identity - &gain * &spec.h) * &state.p;
    let p = (&p_raw + p_raw.transpose()) * 0.5;
    let corrected_measurement = (&spec.h * &x)[(0, 0)] + d;
    let next = FilterState {
        x,
        p,
        step: state.step + 1,
    };
    let output = StepOutput {
        predicted_measurement,
        corrected_measurement,
        innovation,
        residual_variance: s,
        gain,
    };
    Ok((next, output))
}

/// Whole-series filter output. For the first `warmup` slots both columns
/// copy the raw measurement while the filter keeps running underneath;
/// afterwards `predicted[t]` is the pre-update forecast of `y_t` (causal:
/// it uses measurements up to `t-1` only) and `corrected[t]` the
/// post-update estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub predicted: Vec<f64>,
    pub corrected: Vec<f64>,
    pub warmup: usize,
    /// One-step-ahead forecast for the bar after the series ends.
    pub next_prediction: f64,
}

impl FilterRun {
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.predicted
            .iter()
            .copied()
            .zip(self.corrected.iter().copied())
    }
}

/// Runs predict/update across a measurement series.
pub fn filter_series(spec: &KalmanSpec, measurements: &[f64], warmup: usize) -> Result<FilterRun> {
    if measurements.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, needed: 1 });
    }
    let mut state = spec.initial_state();
    let mut predicted = Vec::with_capacity(measurements.len());
    let mut corrected = Vec::with_capacity(measurements.len());
    for (i, &y) in measurements.iter().enumerate() {
        state = predict(&state, spec)?;
        let (next, out) = update(&state, spec, y)?;
        if i < warmup {
            predicted.push(y);
            corrected.push(y);
        } else {
            predicted.push(out.predicted_measurement);
            corrected.push(out.corrected_measurement);
        }
        state = next;
    }
    let ahead = predict(&state, spec)?;
    let next_prediction = (spec.h() * &ahead.x)[(0, 0)] + spec.measurement_drift_at(ahead.step);
    Ok(FilterRun {
        predicted,
        corrected,
        warmup: warmup.min(measurements.len()),
        next_prediction,
    })
}
