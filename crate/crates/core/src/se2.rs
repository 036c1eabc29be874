//! Planar pipeline: Euler–Lagrange equation, conservation laws, first
//! integral, curvature solve and reconstruction by quadratures.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};

use crate::error::SolverError;
use crate::expr::{
    d_s, euler_operator, lambda_se2, Compiled, EvalError, Expr, Family, InvariantJet,
};
use crate::geometry::{adjoint_se2, CurveJet, Pose2, Se2};
use crate::ode::{
    cumulative_quadrature, integrate_ivp, DriftReport, OdeOptions, Termination, QUADRATURE_TOL,
};
use crate::system::{EulerLagrangeSystem, InvariantTrajectory, SystemError};

/// Noether constants `c` (3 entries for SE(2), 6 for SE(3)).
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedVector {
    pub c: Vec<f64>,
}

impl ConservedVector {
    pub fn new(c: Vec<f64>) -> Self {
        assert!(c.len() == 3 || c.len() == 6, "conserved vector has 3 or 6 entries");
        ConservedVector { c }
    }

    /// `|c₁|`: the length of the translational part.
    pub fn c1_norm(&self) -> f64 {
        if self.c.len() == 3 {
            self.c[0].hypot(self.c[1])
        } else {
            Vector3::new(self.c[0], self.c[1], self.c[2]).norm()
        }
    }

    /// `c₁ᵀ D c₂` for SE(3); zero for SE(2).
    pub fn c1_d_c2(&self) -> f64 {
        if self.c.len() == 3 {
            0.0
        } else {
            self.c[0] * self.c[3] - self.c[1] * self.c[4] + self.c[2] * self.c[5]
        }
    }
}

/// Symbolic artifacts of a planar Lagrangian `L(κ, κ_s, ...)`.
pub struct Se2Derivation {
    pub lagrangian: Expr,
    pub e_kappa: Expr,
    pub lambda: Expr,
    /// The Euler–Lagrange residual `E^y(L)`.
    pub e_y: Expr,
    /// `κ_s E^κ + D_s λ`, which vanishes identically.
    pub e_x: Expr,
    pub upsilon: [Expr; 3],
    pub first_integral: Expr,
    upsilon_c: [Compiled; 3],
    first_integral_c: Compiled,
    system: Option<Arc<EulerLagrangeSystem>>,
    extra: usize,
}

impl std::fmt::Debug for Se2Derivation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Se2Derivation")
            .field("lagrangian", &self.lagrangian.to_string())
            .field("e_y", &self.e_y.to_string())
            .finish()
    }
}

pub fn derive_el_se2(l: &Expr) -> Result<Se2Derivation, SolverError> {
    if l.contains_family(Family::Tau) {
        return Err(SolverError::TauNotAllowed);
    }
    let lagrangian = l.simplify();
    let e_kappa = euler_operator(&lagrangian, Family::Kappa);
    let lambda = lambda_se2(&lagrangian);
    let k = Expr::kappa(0);
    let e_y = (d_s(&d_s(&e_kappa))
        + k.clone().pow(2) * e_kappa.clone()
        + lambda.clone() * k.clone())
    .simplify();
    let e_x = (Expr::kappa(1) * e_kappa.clone() + d_s(&lambda)).simplify();
    let upsilon = [
        (-lambda.clone() - k * e_kappa.clone()).simplify(),
        (-d_s(&e_kappa)).simplify(),
        e_kappa.clone(),
    ];
    let first_integral =
        (upsilon[0].clone().pow(2) + upsilon[1].clone().pow(2)).simplify();

    let needed = upsilon
        .iter()
        .chain(std::iter::once(&first_integral))
        .filter_map(|e| e.max_orders().kappa)
        .max()
        .unwrap_or(0);
    let top = e_y.max_orders().kappa.unwrap_or(0);
    let extra = needed.saturating_sub(top) as usize;
    let system = EulerLagrangeSystem::new(&[e_y.clone()], &[Family::Kappa], extra)
        .ok()
        .map(Arc::new);

    Ok(Se2Derivation {
        upsilon_c: std::array::from_fn(|i| Compiled::new(&upsilon[i])),
        first_integral_c: Compiled::new(&first_integral),
        lagrangian,
        e_kappa,
        lambda,
        e_y,
        e_x,
        upsilon,
        first_integral,
        system,
        extra,
    })
}

impl Se2Derivation {
    /// Jet orders above the solved top needed to evaluate the laws.
    pub fn extra_orders(&self) -> usize {
        self.extra
    }

    pub fn system(&self) -> Result<&Arc<EulerLagrangeSystem>, SolverError> {
        match &self.system {
            Some(s) => Ok(s),
            None => Err(EulerLagrangeSystem::new(&[self.e_y.clone()], &[Family::Kappa], 0)
                .err()
                .map(SolverError::from)
                .unwrap_or(SolverError::System(SystemError::NullLagrangian))),
        }
    }
}

/// The vector of invariants `υ(I)` at a jet.
pub fn conservation_vector_se2(d: &Se2Derivation, jet: &InvariantJet) -> Result<[f64; 3], EvalError> {
    Ok([
        d.upsilon_c[0].eval(jet)?,
        d.upsilon_c[1].eval(jet)?,
        d.upsilon_c[2].eval(jet)?,
    ])
}

/// `(λ + κE^κ)² + (D_s E^κ)²`, equal to `c₁² + c₂²` along solutions.
pub fn first_integral_se2(d: &Se2Derivation, jet: &InvariantJet) -> Result<f64, EvalError> {
    d.first_integral_c.eval(jet)
}

/// Integrates `E^y(L) = 0` for κ. The first integral is recorded at every
/// knot in the channel `first_integral` and in the drift report.
pub fn solve_se2(
    d: &Se2Derivation,
    jet0: &InvariantJet,
    span: (f64, f64),
    opts: &OdeOptions,
) -> Result<InvariantTrajectory, SolverError> {
    let sys = d.system()?;
    let mut traj = sys.solve(jet0, span, opts, None)?;
    if let Termination::RhsFailure { s, reason } = &traj.traj.termination {
        return Err(SystemError::DegenerateLeadingCoefficient {
            s: *s,
            reason: reason.clone(),
        }
        .into());
    }
    let jets = traj.knot_jets(d.extra)?;
    let series = jets
        .iter()
        .map(|j| first_integral_se2(d, j))
        .collect::<Result<Vec<_>, _>>()?;
    traj.drift.push_series("first_integral", &series);
    traj.traj.channels.insert("first_integral".into(), series);
    Ok(traj)
}

/// `c = Ad(ρ(z₀))⁻¹ υ(I)(s₀)` for an arc-length initial pose. `jet0` must carry
/// every order the laws reference (e.g. `InvariantTrajectory::initial_jet`).
pub fn constants_from_initial_se2(
    d: &Se2Derivation,
    jet0: &InvariantJet,
    pose0: &CurveJet,
) -> Result<ConservedVector, SolverError> {
    let ad = adjoint_se2(pose0)?;
    let u = conservation_vector_se2(d, jet0)?;
    let c = ad * Vector3::from(u);
    Ok(ConservedVector::new(c.iter().copied().collect()))
}

#[derive(Clone, Debug)]
pub struct ReconstructOptions {
    /// Output on this many uniform points instead of the solver knots.
    pub uniform: Option<usize>,
    /// Integrate the Frenet equations when the constants are degenerate.
    pub frenet_fallback: bool,
    pub ode: OdeOptions,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            uniform: None,
            frenet_fallback: true,
            ode: OdeOptions::default(),
        }
    }
}

/// Compares the closed form printed for `y(s)` with the linear solve. The two
/// differ by a constant, expected to be `c₃/c₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormDiagnostic {
    pub expected_offset: f64,
    pub min_offset: f64,
    pub max_offset: f64,
}

#[derive(Clone, Debug)]
pub struct Se2Curve {
    pub s: Vec<f64>,
    pub kappa: Vec<f64>,
    pub position: Vec<Vector2<f64>>,
    /// Derivative of the reconstructed position (unit only on solutions).
    pub tangent: Vec<Vector2<f64>>,
    pub frenet_fallback: bool,
    /// Drift of each component of `Ad(ρ)⁻¹υ(I)` recomputed from the curve.
    pub law_drift: DriftReport,
    /// Sup-norm residuals of the three conservation laws.
    pub law_residuals: BTreeMap<String, f64>,
    /// `max ||x_s| − 1|`.
    pub speed_defect: f64,
    pub closed_form: Option<ClosedFormDiagnostic>,
}

pub(crate) fn sample_grid(traj: &InvariantTrajectory, uniform: Option<usize>) -> Vec<f64> {
    match uniform {
        Some(n) => traj.traj.uniform_grid(n),
        None if traj.traj.dim() == 0 => traj.traj.uniform_grid(201),
        None => traj.traj.s.clone(),
    }
}

/// Antiderivative of `f` from the start of the span, at `grid` points. Panels
/// follow the union of knots and grid so each lies inside one dense segment.
pub(crate) fn antiderivative_on(
    traj: &InvariantTrajectory,
    grid: &[f64],
    f: &dyn Fn(f64) -> f64,
) -> Vec<f64> {
    let mut pts: Vec<f64> = traj.traj.s.iter().chain(grid).copied().collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    let cum = cumulative_quadrature(&pts, f, QUADRATURE_TOL);
    grid.iter()
        .map(|g| {
            let i = pts.partition_point(|p| p < g);
            cum[i]
        })
        .collect()
}

/// Positions from `x c₁ + y c₂ = ∫υ⁽¹⁾ds + K` and `y c₁ − x c₂ = E^κ − c₃`, with
/// `K` fixed so the curve passes through `pose0` at the start.
pub fn reconstruct_se2(
    traj: &InvariantTrajectory,
    d: &Se2Derivation,
    c: &ConservedVector,
    pose0: &Pose2,
    opts: &ReconstructOptions,
) -> Result<Se2Curve, SolverError> {
    let (c1, c2, c3) = (c.c[0], c.c[1], c.c[2]);
    let delta = c1 * c1 + c2 * c2;
    let grid = sample_grid(traj, opts.uniform);
    let eval = traj.evaluator();
    let jets = grid
        .iter()
        .map(|&s| eval.jet_at(s, d.extra))
        .collect::<Result<Vec<_>, _>>()?;
    let ups = jets
        .iter()
        .map(|j| conservation_vector_se2(d, j))
        .collect::<Result<Vec<_>, _>>()?;
    let kappa: Vec<f64> = jets.iter().map(|j| j.kappa[0]).collect();

    let degenerate = delta <= 1e-12;
    if degenerate && !opts.frenet_fallback {
        return Err(SolverError::DegenerateConstants { value: delta });
    }

    let mut closed_form = None;
    let (position, tangent) = if degenerate {
        frenet_planar(traj, d, pose0, &grid, &opts.ode)?
    } else {
        let failure: RefCell<Option<SolverError>> = RefCell::new(None);
        let integrand = |s: f64| -> f64 {
            let r = eval
                .jet_at(s, d.extra)
                .map_err(SolverError::from)
                .and_then(|j| d.upsilon_c[0].eval(&j).map_err(SolverError::from));
            r.unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            })
        };
        let integral = antiderivative_on(traj, &grid, &integrand);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let k = pose0.x.x * c1 + pose0.x.y * c2;
        let mut pos = Vec::with_capacity(grid.len());
        let mut tan = Vec::with_capacity(grid.len());
        let mut offsets = Vec::new();
        for (i, u) in ups.iter().enumerate() {
            let a = integral[i] + k;
            let b = u[2] - c3;
            let x = (c1 * a - c2 * b) / delta;
            let y = (c2 * a + c1 * b) / delta;
            pos.push(Vector2::new(x, y));
            tan.push(Vector2::new(
                (c1 * u[0] + c2 * u[1]) / delta,
                (c2 * u[0] - c1 * u[1]) / delta,
            ));
            if c1.abs() > 1e-12 {
                let y_closed = (c2 * a + c1 * u[2] + c2 * c2 * c3 / c1) / delta;
                offsets.push(y_closed - y);
            }
        }
        if !offsets.is_empty() {
            closed_form = Some(ClosedFormDiagnostic {
                expected_offset: c3 / c1,
                min_offset: offsets.iter().copied().fold(f64::INFINITY, f64::min),
                max_offset: offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        (pos, tan)
    };

    let mut series: [Vec<f64>; 3] = Default::default();
    let mut res = [0.0f64; 3];
    let mut speed_defect = 0.0f64;
    for ((p, t), u) in position.iter().zip(&tangent).zip(&ups) {
        let g = Se2::new(t.y.atan2(t.x), *p);
        let cs = g.adjoint() * Vector3::from(*u);
        for k in 0..3 {
            series[k].push(cs[k]);
        }
        res[0] = res[0].max((u[0] - (t.x * c1 + t.y * c2)).abs());
        res[1] = res[1].max((u[1] - (t.x * c2 - t.y * c1)).abs());
        res[2] = res[2].max((u[2] - (p.y * c1 - p.x * c2 + c3)).abs());
        speed_defect = speed_defect.max((t.norm() - 1.0).abs());
    }
    let mut law_drift = DriftReport::default();
    for (k, name) in ["c1", "c2", "c3"].iter().enumerate() {
        law_drift.push_series(name, &series[k]);
    }
    let law_residuals = ["first", "second", "third"]
        .iter()
        .zip(res)
        .map(|(n, r)| (n.to_string(), r))
        .collect();

    Ok(Se2Curve {
        s: grid,
        kappa,
        position,
        tangent,
        frenet_fallback: degenerate,
        law_drift,
        law_residuals,
        speed_defect,
        closed_form,
    })
}

/// `θ_s = κ`, `x_s = (cos θ, sin θ)` from the initial pose.
fn frenet_planar(
    traj: &InvariantTrajectory,
    d: &Se2Derivation,
    pose0: &Pose2,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vector2<f64>>, Vec<Vector2<f64>>), SolverError> {
    let eval = traj.evaluator();
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
        let j = eval.jet_at(s, d.extra).map_err(|e| e.to_string())?;
        dy[0] = j.kappa[0];
        dy[1] = y[0].cos();
        dy[2] = y[0].sin();
        Ok(())
    };
    let y0 = [pose0.theta, pose0.x.x, pose0.x.y];
    let sol = integrate_ivp(rhs, &y0, traj.span(), opts)?;
    let mut pos = Vec::with_capacity(grid.len());
    let mut tan = Vec::with_capacity(grid.len());
    for &s in grid {
        let y = sol.eval(s)?;
        pos.push(Vector2::new(y[1], y[2]));
        tan.push(Vector2::new(y[0].cos(), y[0].sin()));
    }
    Ok((pos, tan))
}

/// Everything produced by one planar run.
#[derive(Debug)]
pub struct Se2Run {
    pub trajectory: InvariantTrajectory,
    pub constants: ConservedVector,
    pub curve: Se2Curve,
    /// Relative gap between the first integral at the start and `c₁² + c₂²`.
    pub first_integral_gap: f64,
}

/// Solve, fix the constants from `pose0`, reconstruct.
pub fn run_se2(
    d: &Se2Derivation,
    jet0: &InvariantJet,
    pose0: &Pose2,
    span: (f64, f64),
    ode: &OdeOptions,
    recon: &ReconstructOptions,
) -> Result<Se2Run, SolverError> {
    let trajectory = solve_se2(d, jet0, span, ode)?;
    let start = &trajectory.initial_jet;
    let constants = constants_from_initial_se2(d, start, &pose0.jet(start))?;
    let curve = reconstruct_se2(&trajectory, d, &constants, pose0, recon)?;
    let fi = first_integral_se2(d, start)?;
    let cc = constants.c[0].powi(2) + constants.c[1].powi(2);
    let first_integral_gap = (fi - cc).abs() / fi.abs().max(f64::MIN_POSITIVE).max(cc.abs());
    let first_integral_gap = if fi == 0.0 && cc == 0.0 { 0.0 } else { first_integral_gap };
    Ok(Se2Run {
        trajectory,
        constants,
        curve,
        first_integral_gap,
    })
}
