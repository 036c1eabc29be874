//! Data-parallel fan-out over independent evaluations and solves.
//!
//! Every function takes a [`Mode`]. `Mode::Parallel` uses rayon when the
//! `parallel` feature is enabled and silently runs sequentially otherwise,
//! so results never depend on the mode.

use crate::error::SolverError;
use crate::expr::{Compiled, EvalError, InvariantJet};
use crate::ode::{DriftReport, OdeOptions};
use crate::se2::{solve_se2, Se2Derivation};
use crate::se3::{solve_se3, Se3Derivation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

impl Default for Mode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

/// True when `Mode::Parallel` actually runs on a thread pool.
pub const fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Order-preserving map.
pub fn map<T, R, F>(items: &[T], mode: Mode, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// One compiled expression at many jets.
pub fn evaluate_many(e: &Compiled, jets: &[InvariantJet], mode: Mode) -> Vec<Result<f64, EvalError>> {
    map(jets, mode, |j| e.eval(j))
}

/// Drift report of one solve in a sweep.
pub type SweepResult = Result<DriftReport, SolverError>;

/// Planar solves from many initial jets; each returns its first-integral drift.
pub fn sweep_se2(
    d: &Se2Derivation,
    jets0: &[InvariantJet],
    span: (f64, f64),
    opts: &OdeOptions,
    mode: Mode,
) -> Vec<SweepResult> {
    map(jets0, mode, |j| solve_se2(d, j, span, opts).map(|t| t.drift))
}

/// Spatial solves from many initial jets; each returns its `F1`/`F2` drift.
pub fn sweep_se3(
    d: &Se3Derivation,
    jets0: &[InvariantJet],
    span: (f64, f64),
    opts: &OdeOptions,
    mode: Mode,
) -> Vec<SweepResult> {
    map(jets0, mode, |j| solve_se3(d, j, span, opts).map(|t| t.drift))
}
