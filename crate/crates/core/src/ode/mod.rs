//! Numerical infrastructure: adaptive integration with dense output,
//! quadrature on dense output, safeguarded Newton, drift monitoring.

mod dopri;
mod newton;
mod quadrature;

use std::collections::BTreeMap;

use thiserror::Error;

pub use dopri::{integrate_fixed, integrate_ivp, integrate_ivp_guarded, OdeOptions, Rhs};
pub use newton::{newton_2d, newton_scalar, NewtonError, NewtonOptions, NewtonReport};
pub use quadrature::{adaptive_simpson, cumulative_quadrature, quadrature, QUADRATURE_TOL};

use dopri::DenseSegment;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("invalid span [{s0}, {s1}]")]
    InvalidSpan { s0: f64, s1: f64 },
    #[error("tolerances must be positive")]
    InvalidTolerance,
    #[error("step size underflow at s = {s}")]
    StepUnderflow { s: f64, partial: Box<Trajectory> },
    #[error("maximum number of steps exceeded at s = {s}")]
    MaxStepsExceeded { s: f64, partial: Box<Trajectory> },
    #[error("right-hand side failed at s = {s}: {reason}")]
    RhsFailure { s: f64, reason: String },
    #[error("s = {s} outside [{s0}, {s1}]")]
    OutOfSpan { s: f64, s0: f64, s1: f64 },
}

/// Why an integration stopped.
#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Completed,
    /// The guard hook halted integration after an accepted step.
    Guard { s: f64, reason: String },
    /// The right-hand side kept failing until the step size underflowed.
    RhsFailure { s: f64, reason: String },
    MaxSteps { s: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Knots, states, dense interpolant and named per-knot diagnostic channels.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    segments: Vec<DenseSegment>,
    pub channels: BTreeMap<String, Vec<f64>>,
    pub termination: Termination,
    pub stats: Stats,
}

impl Trajectory {
    pub(crate) fn start(s0: f64, y0: Vec<f64>) -> Self {
        Trajectory {
            s: vec![s0],
            states: vec![y0],
            segments: Vec::new(),
            channels: BTreeMap::new(),
            termination: Termination::Completed,
            stats: Stats::default(),
        }
    }

    pub(crate) fn push(&mut self, s: f64, y: Vec<f64>, seg: DenseSegment) {
        self.s.push(s);
        self.states.push(y);
        self.segments.push(seg);
    }

    /// A trajectory over an empty state (purely algebraic problems): knots only.
    pub fn knots_only(s: Vec<f64>) -> Self {
        let n = s.len();
        let segments = s
            .windows(2)
            .map(|w| DenseSegment {
                s0: w[0],
                h: w[1] - w[0],
                r: std::array::from_fn(|_| Vec::new()),
                y1: Vec::new(),
            })
            .collect();
        Trajectory {
            s,
            states: vec![Vec::new(); n],
            segments,
            channels: BTreeMap::new(),
            termination: Termination::Completed,
            stats: Stats::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.s[0], *self.s.last().unwrap())
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    fn segment_index(&self, s: f64) -> Result<usize, OdeError> {
        let (s0, s1) = self.span();
        if !(s >= s0 && s <= s1) {
            return Err(OdeError::OutOfSpan { s, s0, s1 });
        }
        if self.segments.is_empty() {
            return Ok(0);
        }
        let i = self.s.partition_point(|&k| k <= s);
        Ok(i.saturating_sub(1).min(self.segments.len() - 1))
    }

    /// Dense-output state at `s`; exact at knots.
    pub fn eval(&self, s: f64) -> Result<Vec<f64>, OdeError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(s, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, s: f64, out: &mut [f64]) -> Result<(), OdeError> {
        let i = self.segment_index(s)?;
        if self.segments.is_empty() {
            out.copy_from_slice(&self.states[0]);
            return Ok(());
        }
        self.segments[i].eval_into(s, out);
        Ok(())
    }

    /// Uniform resampling including both endpoints.
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        let (a, b) = self.span();
        if n < 2 {
            return vec![a];
        }
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

/// Per-quantity drift of a conserved series relative to its first value.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftEntry {
    pub name: String,
    pub initial: f64,
    pub max_abs: f64,
    /// `max_abs / |initial|`, or `max_abs` itself when `|initial| <= 1e-12`.
    pub max_rel: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DriftReport {
    pub entries: Vec<DriftEntry>,
}

impl DriftReport {
    pub fn push_series(&mut self, name: &str, values: &[f64]) {
        let initial = values.first().copied().unwrap_or(0.0);
        let max_abs = values
            .iter()
            .map(|v| (v - initial).abs())
            .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
        let max_rel = if initial.abs() > 1e-12 {
            max_abs / initial.abs()
        } else {
            max_abs
        };
        self.entries.push(DriftEntry {
            name: name.to_string(),
            initial,
            max_abs,
            max_rel,
        });
    }

    pub fn get(&self, name: &str) -> Option<&DriftEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.max_abs).fold(0.0, f64::max)
    }
}

/// Evaluates each conserved function at every knot and reports its drift.
pub fn drift_monitor(traj: &Trajectory, fns: &[(&str, &dyn Fn(f64, &[f64]) -> f64)]) -> DriftReport {
    let mut report = DriftReport::default();
    for (name, f) in fns {
        let series: Vec<f64> = traj
            .s
            .iter()
            .zip(&traj.states)
            .map(|(s, y)| f(*s, y))
            .collect();
        report.push_series(name, &series);
    }
    report
}
