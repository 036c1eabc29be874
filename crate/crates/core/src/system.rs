//! Euler–Lagrange residuals turned into explicit ODEs in the curvature (and
//! torsion) jets.
//!
//! The residuals are solved for their highest derivatives by a safeguarded
//! Newton iteration at every right-hand-side evaluation. Jet orders above the
//! state come from prolonging the residuals with `D_s`; each prolongation is
//! linear in its new top derivative, with the same Jacobian.

use std::cell::RefCell;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{d_s, partial, Compiled, EvalError, Expr, Family, InvariantJet, JetVar};
use crate::ode::{
    integrate_ivp_guarded, newton_2d, DriftReport, newton_scalar, NewtonError, NewtonOptions, OdeError,
    OdeOptions, Termination, Trajectory,
};

/// Integration halts once κ drops below this in the spatial problem.
pub const KAPPA_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("Euler-Lagrange equation is identically zero; every curve is extremal")]
    NullLagrangian,
    #[error("no equation determines the {family} jet")]
    Underdetermined { family: &'static str },
    #[error("cannot solve for the highest derivative at s = {s}: {reason}")]
    DegenerateLeadingCoefficient { s: f64, reason: String },
    #[error("highest-derivative system is singular at s = {s}: {reason}")]
    SingularHighestDerivativeSystem { s: f64, reason: String },
    #[error("curvature {kappa:e} below the floor at s = {s}")]
    CurvatureCollapse { s: f64, kappa: f64 },
    #[error("jet order {order} beyond the {available} prolongations prepared")]
    ProlongationTooDeep { order: usize, available: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

struct Level {
    residuals: Vec<Compiled>,
    jacobian: Vec<Vec<Compiled>>,
}

/// One or two residuals together with the unknown family attached to each.
pub struct EulerLagrangeSystem {
    families: Vec<Family>,
    top: Vec<u8>,
    levels: Vec<Level>,
}

impl std::fmt::Debug for EulerLagrangeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EulerLagrangeSystem")
            .field("families", &self.families)
            .field("top", &self.top)
            .field("prolongations", &(self.levels.len() - 1))
            .finish()
    }
}

impl EulerLagrangeSystem {
    /// `residuals[i] = 0` determines the highest derivative of `families[i]`.
    /// `extra` prolongation levels are prepared for jets above the state.
    pub fn new(
        residuals: &[Expr],
        families: &[Family],
        extra: usize,
    ) -> Result<Self, SystemError> {
        assert_eq!(residuals.len(), families.len());
        if residuals.iter().all(Expr::is_zero) {
            return Err(SystemError::NullLagrangian);
        }
        let mut top = Vec::new();
        for &f in families {
            let n = residuals
                .iter()
                .filter_map(|r| r.max_orders().get(f))
                .max()
                .ok_or(SystemError::Underdetermined { family: f.name() })?;
            top.push(n);
        }
        let mut exprs: Vec<Expr> = residuals.iter().map(Expr::simplify).collect();
        let mut levels = Vec::with_capacity(extra + 1);
        for k in 0..=extra {
            let jacobian = exprs
                .iter()
                .map(|r| {
                    families
                        .iter()
                        .zip(&top)
                        .map(|(&f, &n)| {
                            let v = JetVar {
                                family: f,
                                order: n + k as u8,
                            };
                            Compiled::new(&partial(r, v))
                        })
                        .collect()
                })
                .collect();
            levels.push(Level {
                residuals: exprs.iter().map(Compiled::new).collect(),
                jacobian,
            });
            if k < extra {
                exprs = exprs.iter().map(d_s).collect();
            }
        }
        Ok(EulerLagrangeSystem {
            families: families.to_vec(),
            top,
            levels,
        })
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    /// Order of the highest derivative solved for, per family.
    pub fn top_orders(&self) -> &[u8] {
        &self.top
    }

    pub fn prolongations(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.top.iter().map(|&n| n as usize).sum()
    }

    /// Names of the state components, e.g. `kappa, kappa_s, tau`.
    pub fn state_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (&f, &n) in self.families.iter().zip(&self.top) {
            for m in 0..n {
                out.push(Expr::var(JetVar { family: f, order: m }).to_string());
            }
        }
        out
    }

    /// The initial state read from a jet; missing orders default to zero.
    pub fn initial_state(&self, jet0: &InvariantJet) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.state_dim());
        for (&f, &n) in self.families.iter().zip(&self.top) {
            let vals = jet0.family(f);
            for m in 0..n as usize {
                y.push(vals.get(m).copied().unwrap_or(0.0));
            }
        }
        y
    }

    pub fn jet_solver(&self) -> JetSolver<'_> {
        JetSolver {
            sys: self,
            warm: vec![vec![0.0; self.families.len()]; self.levels.len()],
            max_iterations: 0,
            opts: NewtonOptions::default(),
        }
    }

    fn kappa_index(&self) -> Option<usize> {
        let i = self.families.iter().position(|&f| f == Family::Kappa)?;
        if self.top[i] == 0 {
            return None;
        }
        Some(self.top[..i].iter().map(|&n| n as usize).sum())
    }

    /// Integrates the system from `jet0` over `span`. With a `kappa_floor`, a
    /// start below it is an error and a collapse mid-run stops with a partial
    /// trajectory whose termination says so.
    pub fn solve(
        self: &Arc<Self>,
        jet0: &InvariantJet,
        span: (f64, f64),
        opts: &OdeOptions,
        kappa_floor: Option<f64>,
    ) -> Result<InvariantTrajectory, SystemError> {
        let y0 = self.initial_state(jet0);
        let kappa_idx = self.kappa_index();
        if let (Some(floor), Some(i)) = (kappa_floor, kappa_idx) {
            if !(y0[i] >= floor) {
                return Err(SystemError::CurvatureCollapse {
                    s: span.0,
                    kappa: y0[i],
                });
            }
        }
        let mut solver = self.jet_solver();
        for (j, (&f, &n)) in self.families.iter().zip(&self.top).enumerate() {
            if let Some(v) = jet0.family(f).get(n as usize) {
                solver.warm[0][j] = *v;
            }
        }
        let start = solver.complete(span.0, &y0, self.prolongations())?;
        if let Some(floor) = kappa_floor {
            let k = start.kappa.first().copied().unwrap_or(0.0);
            if !(k >= floor) {
                return Err(SystemError::CurvatureCollapse { s: span.0, kappa: k });
            }
        }
        let initial_warm = solver.warm.clone();

        if y0.is_empty() {
            let traj = Trajectory::knots_only(vec![span.0, span.1]);
            return Ok(InvariantTrajectory {
                traj,
                system: Arc::clone(self),
                initial_warm,
                newton_max_iterations: solver.max_iterations,
                initial_jet: start,
                drift: DriftReport::default(),
            });
        }

        let tops = self.top.clone();
        let floor = kappa_floor;
        let mut rhs_solver = self.jet_solver();
        rhs_solver.warm = initial_warm.clone();
        let result = {
            let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
                let roots = rhs_solver.solve_top(s, y).map_err(|e| e.to_string())?;
                let mut off = 0;
                for (j, &n) in tops.iter().enumerate() {
                    let n = n as usize;
                    if n == 0 {
                        continue;
                    }
                    dy[off..off + n - 1].copy_from_slice(&y[off + 1..off + n]);
                    dy[off + n - 1] = roots[j];
                    off += n;
                }
                Ok(())
            };
            let guard = |_s: f64, y: &[f64]| -> Option<String> {
                match (floor, kappa_idx) {
                    (Some(fl), Some(i)) if !(y[i] >= fl) => {
                        Some(format!("CurvatureCollapse: kappa = {:e}", y[i]))
                    }
                    _ => None,
                }
            };
            integrate_ivp_guarded(rhs, &y0, span, opts, guard)
        };
        let traj = result?;
        Ok(InvariantTrajectory {
            traj,
            system: Arc::clone(self),
            initial_warm,
            newton_max_iterations: rhs_solver.max_iterations.max(solver.max_iterations),
            initial_jet: start,
            drift: DriftReport::default(),
        })
    }
}

/// Per-solve Newton state: warm starts for every prolongation level.
pub struct JetSolver<'a> {
    sys: &'a EulerLagrangeSystem,
    warm: Vec<Vec<f64>>,
    /// Largest iteration count seen by any solve.
    pub max_iterations: usize,
    opts: NewtonOptions,
}

impl JetSolver<'_> {
    fn base_jet(&self, s: f64, state: &[f64], extra: usize) -> InvariantJet {
        let mut jet = InvariantJet::new(Vec::new(), Vec::new(), s);
        let mut off = 0;
        for (j, (&f, &n)) in self.sys.families.iter().zip(&self.sys.top).enumerate() {
            let n = n as usize;
            let mut vals = state[off..off + n].to_vec();
            for k in 0..=extra {
                vals.push(self.warm[k][j]);
            }
            off += n;
            match f {
                Family::Kappa => jet.kappa = vals,
                Family::Tau => jet.tau = vals,
            }
        }
        jet
    }

    fn slot(jet: &mut InvariantJet, f: Family, idx: usize) -> &mut f64 {
        match f {
            Family::Kappa => &mut jet.kappa[idx],
            Family::Tau => &mut jet.tau[idx],
        }
    }

    fn solve_level(&mut self, jet: &mut InvariantJet, k: usize) -> Result<(), SystemError> {
        let sys = self.sys;
        let level = &sys.levels[k];
        let idx: Vec<(Family, usize)> = sys
            .families
            .iter()
            .zip(&sys.top)
            .map(|(&f, &n)| (f, n as usize + k))
            .collect();
        // Surface evaluation errors (e.g. a division by κ = 0) before Newton
        // turns them into NaN.
        for r in &level.residuals {
            r.eval(jet)?;
        }
        let s = jet.s;
        let cell = RefCell::new(std::mem::take(jet));
        let set = |x: &[f64]| {
            let mut j = cell.borrow_mut();
            for (i, &(f, p)) in idx.iter().enumerate() {
                *Self::slot(&mut j, f, p) = x[i];
            }
        };
        let nan = f64::NAN;
        let result = if idx.len() == 1 {
            let mut f = |x: f64| {
                set(&[x]);
                level.residuals[0].eval(&cell.borrow()).unwrap_or(nan)
            };
            let mut df = |x: f64| {
                set(&[x]);
                level.jacobian[0][0].eval(&cell.borrow()).unwrap_or(nan)
            };
            newton_scalar(&mut f, Some(&mut df), self.warm[k][0], &self.opts).map(|r| {
                set(&[r.root]);
                (vec![r.root], r.iterations)
            })
        } else {
            let mut f = |x: [f64; 2]| {
                set(&x);
                let j = cell.borrow();
                [
                    level.residuals[0].eval(&j).unwrap_or(nan),
                    level.residuals[1].eval(&j).unwrap_or(nan),
                ]
            };
            let mut jac = |x: [f64; 2]| {
                set(&x);
                let j = cell.borrow();
                let e = |a: usize, b: usize| level.jacobian[a][b].eval(&j).unwrap_or(nan);
                [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
            };
            let guess = [self.warm[k][0], self.warm[k][1]];
            newton_2d(&mut f, Some(&mut jac), guess, &self.opts).map(|r| {
                set(&r.root);
                (r.root.to_vec(), r.iterations)
            })
        };
        *jet = cell.into_inner();
        match result {
            Ok((root, it)) => {
                self.max_iterations = self.max_iterations.max(it);
                self.warm[k] = root;
                Ok(())
            }
            Err(e) => Err(self.newton_failure(s, e)),
        }
    }

    fn newton_failure(&self, s: f64, e: NewtonError) -> SystemError {
        let reason = e.to_string();
        if self.sys.families.len() == 1 {
            SystemError::DegenerateLeadingCoefficient { s, reason }
        } else {
            SystemError::SingularHighestDerivativeSystem { s, reason }
        }
    }

    /// Highest derivatives at a state, one per family.
    pub fn solve_top(&mut self, s: f64, state: &[f64]) -> Result<Vec<f64>, SystemError> {
        let mut jet = self.base_jet(s, state, 0);
        self.solve_level(&mut jet, 0)?;
        Ok(self.warm[0].clone())
    }

    /// Full jet at a state including `extra` orders above the solved top.
    pub fn complete(&mut self, s: f64, state: &[f64], extra: usize) -> Result<InvariantJet, SystemError> {
        if extra > self.sys.prolongations() {
            return Err(SystemError::ProlongationTooDeep {
                order: extra,
                available: self.sys.prolongations(),
            });
        }
        let mut jet = self.base_jet(s, state, extra);
        for k in 0..=extra {
            self.solve_level(&mut jet, k)?;
        }
        Ok(jet)
    }
}

/// A solved curvature (and torsion) trajectory together with its system, so
/// full jets can be recovered anywhere on the span.
pub struct InvariantTrajectory {
    pub traj: Trajectory,
    pub system: Arc<EulerLagrangeSystem>,
    initial_warm: Vec<Vec<f64>>,
    pub newton_max_iterations: usize,
    /// Full jet at the start of the span.
    pub initial_jet: InvariantJet,
    /// Drift of the conserved scalars along the knots, filled by the solvers.
    pub drift: DriftReport,
}

impl std::fmt::Debug for InvariantTrajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InvariantTrajectory")
            .field("knots", &self.traj.len())
            .field("termination", &self.traj.termination)
            .finish()
    }
}

impl InvariantTrajectory {
    pub fn span(&self) -> (f64, f64) {
        self.traj.span()
    }

    pub fn completed(&self) -> bool {
        self.traj.completed()
    }

    pub fn termination(&self) -> &Termination {
        &self.traj.termination
    }

    /// A reusable evaluator that keeps warm starts between calls.
    pub fn evaluator(&self) -> JetEvaluator<'_> {
        let mut solver = self.system.jet_solver();
        solver.warm = self.initial_warm.clone();
        JetEvaluator {
            traj: self,
            solver: RefCell::new(solver),
            state: RefCell::new(vec![0.0; self.traj.dim()]),
        }
    }

    /// Full jet at `s`, with `extra` orders beyond the solved top.
    pub fn jet_at(&self, s: f64, extra: usize) -> Result<InvariantJet, SystemError> {
        self.evaluator().jet_at(s, extra)
    }

    /// Full jets at every knot.
    pub fn knot_jets(&self, extra: usize) -> Result<Vec<InvariantJet>, SystemError> {
        let mut solver = self.system.jet_solver();
        solver.warm = self.initial_warm.clone();
        self.traj
            .s
            .iter()
            .zip(&self.traj.states)
            .map(|(&s, y)| solver.complete(s, y, extra))
            .collect()
    }
}

/// Evaluates full jets on dense output. Interior mutability keeps it usable
/// from `Fn` closures such as quadrature integrands.
pub struct JetEvaluator<'a> {
    traj: &'a InvariantTrajectory,
    solver: RefCell<JetSolver<'a>>,
    state: RefCell<Vec<f64>>,
}

impl JetEvaluator<'_> {
    pub fn jet_at(&self, s: f64, extra: usize) -> Result<InvariantJet, SystemError> {
        let mut y = self.state.borrow_mut();
        self.traj.traj.eval_into(s, &mut y)?;
        self.solver.borrow_mut().complete(s, &y, extra)
    }

    pub fn max_iterations(&self) -> usize {
        self.solver.borrow().max_iterations
    }
}
