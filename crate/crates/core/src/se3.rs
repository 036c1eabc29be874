//! Spatial pipeline: the Euler–Lagrange pair after eliminating λ, the six
//! invariants of the conservation laws, canonical constants, first
//! integrals, the elimination identity and cylindrical reconstruction.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::error::SolverError;
use crate::expr::{
    d_s, euler_operator, lambda_se3, Compiled, Expr, Family, InvariantJet,
};
use crate::geometry::{d_matrix, rotation_from_angles, Pose3, Se3, CURVATURE_TOL};
use crate::ode::{integrate_ivp, DriftReport, OdeOptions, Termination};
use crate::se2::{sample_grid, ConservedVector, ReconstructOptions};
use crate::system::{EulerLagrangeSystem, InvariantTrajectory, SystemError, KAPPA_FLOOR};

/// Symbolic artifacts of a spatial Lagrangian `L(κ, κ_s, ..., τ, τ_s, ...)`.
pub struct Se3Derivation {
    pub lagrangian: Expr,
    pub e_kappa: Expr,
    pub e_tau: Expr,
    pub lambda: Expr,
    /// `κ_s E^κ + τ_s E^τ − D_s(2τE^τ) + D_s λ`, identically zero.
    pub e_x: Expr,
    pub e_y: Expr,
    pub e_z: Expr,
    pub upsilon: [Expr; 6],
    /// `D_s υ(I)`, used by the reconstruction and the elimination identity.
    pub d_upsilon: [Expr; 6],
    pub f1: Expr,
    pub f2: Expr,
    upsilon_c: [Compiled; 6],
    d_upsilon_c: [Compiled; 6],
    f1_c: Compiled,
    f2_c: Compiled,
    divides_by_kappa: bool,
    system: Option<Arc<EulerLagrangeSystem>>,
    residuals: [Expr; 2],
    extra: usize,
}

impl std::fmt::Debug for Se3Derivation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Se3Derivation")
            .field("lagrangian", &self.lagrangian.to_string())
            .field("e_y", &self.e_y.to_string())
            .field("e_z", &self.e_z.to_string())
            .finish()
    }
}

fn has_denominator(e: &Expr) -> bool {
    match e {
        Expr::Num(_) | Expr::Var(_) => false,
        Expr::Div(..) => true,
        Expr::Pow(b, n) => *n < 0 || has_denominator(b),
        Expr::Add(xs) | Expr::Mul(xs) => xs.iter().any(has_denominator),
        Expr::Func(_, a) => has_denominator(a),
    }
}

impl Se3Derivation {
    pub fn new(l: &Expr) -> Self {
        let lagrangian = l.simplify();
        let p = euler_operator(&lagrangian, Family::Kappa);
        let q = euler_operator(&lagrangian, Family::Tau);
        let lambda = lambda_se3(&lagrangian);
        let k = || Expr::kappa(0);
        let t = || Expr::tau(0);
        let ks = || Expr::kappa(1);
        let ts = || Expr::tau(1);
        let kss = || Expr::kappa(2);
        let dp = d_s(&p);
        let ddp = d_s(&dp);
        let dq = d_s(&q);
        let ddq = d_s(&dq);
        let dddq = d_s(&ddq);
        let two = || Expr::int(2);

        let e_y = (ddp.clone()
            + two() * t() / k() * ddq.clone()
            + (ts() / k() - two() * t() * ks() / k().pow(2)) * dq.clone()
            + (k().pow(2) - t().pow(2)) * p.clone()
            + lambda.clone() * k())
        .simplify();
        let e_z = (-(dddq / k())
            + two() * ks() / k().pow(2) * ddq.clone()
            + (kss() / k().pow(2) + t().pow(2) / k()
                - two() * ks().pow(2) / k().pow(3)
                - k())
                * dq.clone()
            - ks() * q.clone()
            + two() * t() * dp.clone()
            + ts() * p.clone())
        .simplify();
        let e_x = (ks() * p.clone() + ts() * q.clone() - d_s(&(two() * t() * q.clone()))
            + d_s(&lambda))
        .simplify();

        let upsilon = [
            (t() * q.clone() - k() * p.clone() - lambda.clone()).simplify(),
            (-dp.clone() - t() / k() * dq.clone()).simplify(),
            (ddq.clone() / k() - ks() / k().pow(2) * dq.clone() + k() * q.clone() - t() * p.clone())
                .simplify(),
            q.clone(),
            (-(dq.clone() / k())).simplify(),
            p.clone(),
        ];
        let d_upsilon: [Expr; 6] = std::array::from_fn(|i| d_s(&upsilon[i]));
        let f1 = (upsilon[0].clone().pow(2) + upsilon[1].clone().pow(2) + upsilon[2].clone().pow(2))
            .simplify();
        let f2 = (upsilon[0].clone() * upsilon[3].clone() - upsilon[1].clone() * upsilon[4].clone()
            + upsilon[2].clone() * upsilon[5].clone())
        .simplify();

        // A constant Lagrangian leaves torsion free (E^z ≡ 0); the extremal is
        // a line, and τ = 0 is taken as its torsion.
        let second = if e_z.is_zero() { Expr::tau(0) } else { e_z.clone() };
        let residuals = [e_y.clone(), second];

        let mut needed = crate::expr::MaxOrders::default();
        for e in upsilon.iter().chain(&d_upsilon).chain([&f1, &f2]) {
            needed = needed.merge(e.max_orders());
        }
        let mut top = crate::expr::MaxOrders::default();
        for r in &residuals {
            top = top.merge(r.max_orders());
        }
        let extra = [Family::Kappa, Family::Tau]
            .iter()
            .map(|&f| match (needed.get(f), top.get(f)) {
                (Some(n), Some(t)) => n.saturating_sub(t) as usize,
                _ => 0,
            })
            .max()
            .unwrap_or(0);
        let system = EulerLagrangeSystem::new(&residuals, &[Family::Kappa, Family::Tau], extra)
            .ok()
            .map(Arc::new);

        Se3Derivation {
            upsilon_c: std::array::from_fn(|i| Compiled::new(&upsilon[i])),
            d_upsilon_c: std::array::from_fn(|i| Compiled::new(&d_upsilon[i])),
            f1_c: Compiled::new(&f1),
            f2_c: Compiled::new(&f2),
            divides_by_kappa: upsilon.iter().any(has_denominator),
            lagrangian,
            e_kappa: p,
            e_tau: q,
            lambda,
            e_x,
            e_y,
            e_z,
            upsilon,
            d_upsilon,
            f1,
            f2,
            system,
            residuals,
            extra,
        }
    }

    pub fn extra_orders(&self) -> usize {
        self.extra
    }

    /// True when `E^κ` and `E^τ` both vanish (constant Lagrangians): the
    /// extremals are straight lines.
    pub fn is_line_lagrangian(&self) -> bool {
        self.e_kappa.is_zero() && self.e_tau.is_zero()
    }

    pub fn system(&self) -> Result<&Arc<EulerLagrangeSystem>, SolverError> {
        match &self.system {
            Some(s) => Ok(s),
            None => Err(
                EulerLagrangeSystem::new(&self.residuals, &[Family::Kappa, Family::Tau], 0)
                    .err()
                    .map(SolverError::from)
                    .unwrap_or(SolverError::System(SystemError::NullLagrangian)),
            ),
        }
    }

    fn check_kappa(&self, jet: &InvariantJet) -> Result<(), SolverError> {
        let kappa = jet.kappa.first().copied().unwrap_or(0.0);
        if self.divides_by_kappa && !(kappa.abs() > CURVATURE_TOL) {
            return Err(crate::geometry::GeometryError::DegenerateCurvature { kappa }.into());
        }
        Ok(())
    }

    fn upsilon_at(&self, jet: &InvariantJet) -> Result<[f64; 6], SolverError> {
        let mut u = [0.0; 6];
        for (o, c) in u.iter_mut().zip(&self.upsilon_c) {
            *o = c.eval(jet)?;
        }
        Ok(u)
    }

    fn d_upsilon_at(&self, jet: &InvariantJet) -> Result<[f64; 6], SolverError> {
        let mut u = [0.0; 6];
        for (o, c) in u.iter_mut().zip(&self.d_upsilon_c) {
            *o = c.eval(jet)?;
        }
        Ok(u)
    }
}

/// Derives every symbolic artifact of a spatial Lagrangian.
pub fn derive_el_se3(l: &Expr) -> Se3Derivation {
    Se3Derivation::new(l)
}

/// The six-vector `υ(I)` at a jet.
pub fn conservation_vector_se3(d: &Se3Derivation, jet: &InvariantJet) -> Result<[f64; 6], SolverError> {
    d.check_kappa(jet)?;
    d.upsilon_at(jet)
}

/// `(F1, F2) = (υ₁² + υ₂² + υ₃², υ₁υ₄ − υ₂υ₅ + υ₃υ₆)`.
pub fn first_integrals_se3(d: &Se3Derivation, jet: &InvariantJet) -> Result<(f64, f64), SolverError> {
    d.check_kappa(jet)?;
    Ok((d.f1_c.eval(jet)?, d.f2_c.eval(jet)?))
}

/// Integrates the Euler–Lagrange pair for (κ, τ) with the κ-floor guard. A
/// collapse mid-run returns the partial trajectory; check `completed()`.
pub fn solve_se3(
    d: &Se3Derivation,
    jet0: &InvariantJet,
    span: (f64, f64),
    opts: &OdeOptions,
) -> Result<InvariantTrajectory, SolverError> {
    solve_se3_with_floor(d, jet0, span, opts, Some(KAPPA_FLOOR))
}

fn solve_se3_with_floor(
    d: &Se3Derivation,
    jet0: &InvariantJet,
    span: (f64, f64),
    opts: &OdeOptions,
    floor: Option<f64>,
) -> Result<InvariantTrajectory, SolverError> {
    let sys = d.system()?;
    let mut traj = sys.solve(jet0, span, opts, floor)?;
    if let Termination::RhsFailure { s, reason } = &traj.traj.termination {
        return Err(SystemError::SingularHighestDerivativeSystem {
            s: *s,
            reason: reason.clone(),
        }
        .into());
    }
    let jets = traj.knot_jets(d.extra)?;
    let mut f1 = Vec::with_capacity(jets.len());
    let mut f2 = Vec::with_capacity(jets.len());
    for j in &jets {
        let (a, b) = first_integrals_se3(d, j)?;
        f1.push(a);
        f2.push(b);
    }
    traj.drift.push_series("F1", &f1);
    traj.drift.push_series("F2", &f2);
    traj.traj.channels.insert("F1".into(), f1);
    traj.traj.channels.insert("F2".into(), f2);
    Ok(traj)
}

/// `c = Ad(ρ(z₀))⁻¹ υ(I)(s₀)` with `ρ` the pose frame (tangent, normal,
/// binormal). `jet0` must carry every order the laws reference.
pub fn constants_from_initial_se3(
    d: &Se3Derivation,
    jet0: &InvariantJet,
    pose0: &Pose3,
) -> Result<ConservedVector, SolverError> {
    let u = conservation_vector_se3(d, jet0)?;
    let c = pose0.element().adjoint() * Vector6::from(u);
    Ok(ConservedVector::new(c.iter().copied().collect()))
}

/// Constants moved to the `z`-axis and the rigid motion that undoes it.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalConstants {
    pub c: [f64; 6],
    pub c1_norm: f64,
    pub c1_d_c2: f64,
    /// `(0, 0, |c₁|, 0, 0, c₁ᵀDc₂/|c₁|)`.
    pub canonical: [f64; 6],
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Translation `(a, b, c)` of the recovery motion.
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    /// `c₁` was already along the `z`-axis, where the angle formulas
    /// degenerate; the rotation is then the identity (or a half turn when
    /// `c₁` points down).
    pub branch_failure: bool,
}

impl CanonicalConstants {
    /// The group element whose Adjoint sends the canonical constants back to `c`.
    pub fn element(&self) -> Se3 {
        Se3::new(self.rotation, self.translation)
    }
}

/// Rotation with `β = 0` taking `ẑ` to `c₁/|c₁|`, and the translation `a`
/// solving `a × c₁ = D c₂ − (c₁ᵀDc₂/|c₁|²) c₁` with no component along `c₁`.
pub fn canonicalize_constants(c: &ConservedVector) -> Result<CanonicalConstants, SolverError> {
    assert_eq!(c.c.len(), 6, "SE(3) constants have six entries");
    let c1 = Vector3::new(c.c[0], c.c[1], c.c[2]);
    let c2 = Vector3::new(c.c[3], c.c[4], c.c[5]);
    let n = c1.norm();
    if !(n > 1e-12) {
        return Err(SolverError::DegenerateC1 { norm: n });
    }
    let j = d_matrix() * c2;
    let q = c1.dot(&j);
    let planar = c1.x.hypot(c1.y);
    let branch_failure = planar <= 1e-12 * n;
    let (alpha, gamma) = if branch_failure {
        if c1.z > 0.0 {
            (0.0, 0.0)
        } else {
            (std::f64::consts::PI, 0.0)
        }
    } else {
        ((-planar).atan2(c1.z), (-c1.x).atan2(c1.y))
    };
    let rotation = rotation_from_angles(alpha, 0.0, gamma);
    let translation = c1.cross(&j) / (n * n);
    Ok(CanonicalConstants {
        c: [c.c[0], c.c[1], c.c[2], c.c[3], c.c[4], c.c[5]],
        c1_norm: n,
        c1_d_c2: q,
        canonical: [0.0, 0.0, n, 0.0, 0.0, q / n],
        alpha,
        beta: 0.0,
        gamma,
        translation,
        rotation,
        branch_failure,
    })
}

/// The matrix `M(κ, τ)` of `D_s υ = M υ`.
pub fn elimination_matrix(kappa: f64, tau: f64) -> Matrix6<f64> {
    let (k, t) = (kappa, tau);
    Matrix6::from_row_slice(&[
        0.0, k, 0.0, 0.0, 0.0, 0.0, //
        -k, 0.0, t, 0.0, 0.0, 0.0, //
        0.0, -t, 0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0, -k, 0.0, //
        0.0, 0.0, -1.0, k, 0.0, -t, //
        0.0, -1.0, 0.0, 0.0, t, 0.0,
    ])
}

/// Step of the centered differences in the elimination residual.
pub const ELIMINATION_FD_STEP: f64 = 1e-4;

/// Sup-norm of `D_s υ − M υ` along the trajectory, with `D_s υ` from centered
/// differences of `υ` over dense output at segment midpoints.
pub fn elimination_residual(d: &Se3Derivation, traj: &InvariantTrajectory) -> Result<f64, SolverError> {
    elimination_residual_scaled(d, traj, 1.0)
}

/// As [`elimination_residual`], for the off-solution curvature `scale · κ(s)`
/// (every κ derivative scaled, τ unchanged).
pub fn elimination_residual_scaled(
    d: &Se3Derivation,
    traj: &InvariantTrajectory,
    scale: f64,
) -> Result<f64, SolverError> {
    let h = ELIMINATION_FD_STEP;
    let eval = traj.evaluator();
    let ups = |s: f64| -> Result<([f64; 6], f64, f64), SolverError> {
        let mut j = eval.jet_at(s, d.extra)?;
        j.kappa.iter_mut().for_each(|k| *k *= scale);
        let u = conservation_vector_se3(d, &j)?;
        Ok((u, j.kappa[0], j.tau[0]))
    };
    let mut worst = 0.0f64;
    for w in traj.traj.s.windows(2) {
        if w[1] - w[0] <= 2.0 * h {
            continue;
        }
        let m = 0.5 * (w[0] + w[1]);
        let (u, k, t) = ups(m)?;
        let (up, _, _) = ups(m + h)?;
        let (um, _, _) = ups(m - h)?;
        let du = Vector6::from_fn(|i, _| (up[i] - um[i]) / (2.0 * h));
        let r = du - elimination_matrix(k, t) * Vector6::from(u);
        worst = worst.max(r.amax());
    }
    Ok(worst)
}

/// Pointwise `D_s υ − M υ` from the symbolic derivative, at one jet.
pub fn elimination_residual_at(d: &Se3Derivation, jet: &InvariantJet) -> Result<f64, SolverError> {
    let u = conservation_vector_se3(d, jet)?;
    let du = d.d_upsilon_at(jet)?;
    let r = Vector6::from(du) - elimination_matrix(jet.kappa[0], jet.tau[0]) * Vector6::from(u);
    Ok(r.amax())
}

#[derive(Clone, Debug)]
pub struct Se3Curve {
    pub s: Vec<f64>,
    pub kappa: Vec<f64>,
    pub tau: Vec<f64>,
    pub position: Vec<Vector3<f64>>,
    pub tangent: Vec<Vector3<f64>>,
    /// Position in the canonical coordinates `x̃ = Rᵀ(x − a)`.
    pub canonical: Vec<Vector3<f64>>,
    pub r2: Vec<f64>,
    pub theta: Vec<f64>,
    pub h: Vec<f64>,
    pub frenet_fallback: bool,
    /// Drift of each component of `Ad(ρ)⁻¹υ(I)` recomputed from the curve.
    pub law_drift: DriftReport,
    /// Sup-norm residuals of the two laws eliminated by the reconstruction.
    pub law_residuals: BTreeMap<String, f64>,
    pub speed_defect: f64,
}

/// Frame `(T, N, B)` from the first two derivatives of a curve.
fn frame_of(xs: &Vector3<f64>, xss: &Vector3<f64>) -> Matrix3<f64> {
    let t = xs.normalize();
    let nd = xss - t * t.dot(xss);
    let n = nd.normalize();
    Matrix3::from_columns(&[t, n, t.cross(&n)])
}

fn law_drift(ups: &[[f64; 6]], pos: &[Vector3<f64>], frames: &[Matrix3<f64>]) -> DriftReport {
    let mut series: [Vec<f64>; 6] = Default::default();
    for ((u, x), f) in ups.iter().zip(pos).zip(frames) {
        let c = Se3::new(*f, *x).adjoint() * Vector6::from(*u);
        for k in 0..6 {
            series[k].push(c[k]);
        }
    }
    let mut r = DriftReport::default();
    for (k, s) in series.iter().enumerate() {
        r.push_series(&format!("c{}", k + 1), s);
    }
    r
}

/// Cylindrical reconstruction about the canonical axis:
/// `z̃ = (1/|c₁|)∫υ⁽¹⁾`, `h = D_s|x̃|²` from its linear ODE, `r² = ∫h − z̃²`,
/// `θ` from `r²θ_s = (υ⁽⁴⁾ − (c₁ᵀDc₂/|c₁|²)υ⁽¹⁾)/|c₁|`; every additive
/// constant is fixed by `pose0`. The four quantities are integrated as one
/// ODE driven by the dense invariant trajectory.
pub fn reconstruct_se3(
    traj: &InvariantTrajectory,
    d: &Se3Derivation,
    cc: &CanonicalConstants,
    pose0: &Pose3,
    opts: &ReconstructOptions,
) -> Result<Se3Curve, SolverError> {
    let n = cc.c1_norm;
    let qn = cc.c1_d_c2 / (n * n);
    let rot = cc.rotation;
    let a = cc.translation;
    let xt0 = rot.transpose() * (pose0.x - a);
    let tt0 = rot.transpose() * pose0.tangent();
    let w0 = xt0.norm_squared();
    let r20 = w0 - xt0.z * xt0.z;
    if !(r20 > 1e-12 * w0.max(1.0)) {
        if opts.frenet_fallback {
            return frenet_reconstruct_se3(traj, d, &ConservedVector::new(cc.c.to_vec()), pose0, opts);
        }
        return Err(SolverError::NegativeRadiusSquared {
            s: traj.span().0,
            value: r20,
        });
    }
    let y0 = [xt0.z, 2.0 * xt0.dot(&tt0), w0, xt0.y.atan2(xt0.x)];

    let eval = traj.evaluator();
    let failure: RefCell<Option<SolverError>> = RefCell::new(None);
    // Returns (z', h', w', θ') and records typed failures.
    let field = |s: f64, y: &[f64]| -> Result<[f64; 4], SolverError> {
        let jet = eval.jet_at(s, d.extra)?;
        let u = conservation_vector_se3(d, &jet)?;
        let du1 = d.d_upsilon_c[0].eval(&jet)?;
        if !(u[0].abs() > 1e-12) {
            return Err(SolverError::UpsilonOneVanishes { s });
        }
        let r2 = y[2] - y[0] * y[0];
        if !(r2 > 0.0) {
            return Err(SolverError::NegativeRadiusSquared { s, value: r2 });
        }
        let k = jet.kappa[0];
        Ok([
            u[0] / n,
            du1 / u[0] * y[1] + 2.0 * k * (u[5] - qn * u[2]) / u[0] + 2.0,
            y[1],
            (u[3] - qn * u[0]) / (n * r2),
        ])
    };
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
        match field(s, y) {
            Ok(v) => {
                dy.copy_from_slice(&v);
                Ok(())
            }
            Err(e) => {
                let msg = e.to_string();
                failure.borrow_mut().replace(e);
                Err(msg)
            }
        }
    };
    let sol = integrate_ivp(rhs, &y0, traj.span(), &opts.ode)?;
    if !sol.completed() {
        return Err(failure
            .into_inner()
            .unwrap_or(SolverError::Ode(crate::ode::OdeError::RhsFailure {
                s: sol.span().1,
                reason: format!("{:?}", sol.termination),
            })));
    }

    let grid = sample_grid(traj, opts.uniform);
    let mut out = Se3Curve {
        s: grid.clone(),
        kappa: Vec::new(),
        tau: Vec::new(),
        position: Vec::new(),
        tangent: Vec::new(),
        canonical: Vec::new(),
        r2: Vec::new(),
        theta: Vec::new(),
        h: Vec::new(),
        frenet_fallback: false,
        law_drift: DriftReport::default(),
        law_residuals: BTreeMap::new(),
        speed_defect: 0.0,
    };
    let mut ups = Vec::with_capacity(grid.len());
    let mut frames = Vec::with_capacity(grid.len());
    let (mut in2, mut in5) = (0.0f64, 0.0f64);
    for &s in &grid {
        let y = sol.eval(s)?;
        let jet = eval.jet_at(s, d.extra)?;
        let u = conservation_vector_se3(d, &jet)?;
        let du = d.d_upsilon_at(&jet)?;
        let k = jet.kappa[0];
        let (z, h, w, th) = (y[0], y[1], y[2], y[3]);
        let r2 = w - z * z;
        let r = r2.sqrt();
        let z_s = u[0] / n;
        let z_ss = du[0] / n;
        let h_s = du[0] / u[0] * h + 2.0 * k * (u[5] - qn * u[2]) / u[0] + 2.0;
        let r_s = (h - 2.0 * z * z_s) / (2.0 * r);
        let r_ss = (h_s - 2.0 * z_s * z_s - 2.0 * z * z_ss - 2.0 * r_s * r_s) / (2.0 * r);
        let th_s = (u[3] - qn * u[0]) / (n * r2);
        let th_ss = (du[3] - qn * du[0]) / (n * r2) - 2.0 * r_s * th_s / r;
        let (st, ct) = th.sin_cos();
        let xt = Vector3::new(r * ct, r * st, z);
        let xt_s = Vector3::new(r_s * ct - r * th_s * st, r_s * st + r * th_s * ct, z_s);
        let rad = r_ss - r * th_s * th_s;
        let tan_acc = 2.0 * r_s * th_s + r * th_ss;
        let xt_ss = Vector3::new(rad * ct - tan_acc * st, rad * st + tan_acc * ct, z_ss);

        in2 = in2.max((n / k * z_ss - u[1]).abs());
        in5 = in5.max(
            (n / k * (xt_ss.x * xt.y - xt_ss.y * xt.x) - cc.c1_d_c2 / (k * n) * z_ss - u[4]).abs(),
        );

        let x = rot * xt + a;
        let xs = rot * xt_s;
        let xss = rot * xt_ss;
        out.speed_defect = out.speed_defect.max((xs.norm() - 1.0).abs());
        frames.push(frame_of(&xs, &xss));
        ups.push(u);
        out.kappa.push(k);
        out.tau.push(jet.tau[0]);
        out.position.push(x);
        out.tangent.push(xs);
        out.canonical.push(xt);
        out.r2.push(r2);
        out.theta.push(th);
        out.h.push(h);
    }
    out.law_drift = law_drift(&ups, &out.position, &frames);
    out.law_residuals.insert("IN2".into(), in2);
    out.law_residuals.insert("IN5".into(), in5);
    Ok(out)
}

/// Direct Frenet–Serret integration from `pose0`, used where the canonical
/// reconstruction degenerates (straight lines).
pub fn frenet_reconstruct_se3(
    traj: &InvariantTrajectory,
    d: &Se3Derivation,
    c: &ConservedVector,
    pose0: &Pose3,
    opts: &ReconstructOptions,
) -> Result<Se3Curve, SolverError> {
    let eval = traj.evaluator();
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
        let j = eval.jet_at(s, d.extra).map_err(|e| e.to_string())?;
        let (k, t) = (j.kappa[0], j.tau[0]);
        for i in 0..3 {
            let (tt, nn, bb) = (y[3 + i], y[6 + i], y[9 + i]);
            dy[i] = tt;
            dy[3 + i] = k * nn;
            dy[6 + i] = -k * tt + t * bb;
            dy[9 + i] = -t * nn;
        }
        Ok(())
    };
    let mut y0 = Vec::with_capacity(12);
    y0.extend(pose0.x.iter());
    y0.extend(pose0.tangent().iter());
    y0.extend(pose0.normal().iter());
    y0.extend(pose0.binormal().iter());
    let sol = integrate_ivp(rhs, &y0, traj.span(), &opts.ode)?;

    let cc = canonicalize_constants(c).ok();
    let grid = sample_grid(traj, opts.uniform);
    let mut out = Se3Curve {
        s: grid.clone(),
        kappa: Vec::new(),
        tau: Vec::new(),
        position: Vec::new(),
        tangent: Vec::new(),
        canonical: Vec::new(),
        r2: Vec::new(),
        theta: Vec::new(),
        h: Vec::new(),
        frenet_fallback: true,
        law_drift: DriftReport::default(),
        law_residuals: BTreeMap::new(),
        speed_defect: 0.0,
    };
    let mut ups = Vec::new();
    let mut frames = Vec::new();
    for &s in &grid {
        let y = sol.eval(s)?;
        let jet = eval.jet_at(s, d.extra)?;
        let v = |i: usize| Vector3::new(y[i], y[i + 1], y[i + 2]);
        let (x, t, nn, b) = (v(0), v(3), v(6), v(9));
        let xt = match &cc {
            Some(cc) => cc.rotation.transpose() * (x - cc.translation),
            None => x,
        };
        out.speed_defect = out.speed_defect.max((t.norm() - 1.0).abs());
        frames.push(Matrix3::from_columns(&[t, nn, b]));
        ups.push(conservation_vector_se3(d, &jet)?);
        out.kappa.push(jet.kappa[0]);
        out.tau.push(jet.tau[0]);
        out.position.push(x);
        out.tangent.push(t);
        out.canonical.push(xt);
        out.r2.push(xt.x * xt.x + xt.y * xt.y);
        out.theta.push(xt.y.atan2(xt.x));
        out.h.push(2.0 * xt.dot(&t));
    }
    out.law_drift = law_drift(&ups, &out.position, &frames);
    Ok(out)
}

/// Everything produced by one spatial run.
#[derive(Debug)]
pub struct Se3Run {
    pub trajectory: InvariantTrajectory,
    pub constants: ConservedVector,
    pub canonical: Option<CanonicalConstants>,
    pub curve: Se3Curve,
    /// Relative gaps between `(F1, F2)` at the start and the values from `c`.
    pub first_integral_gaps: (f64, f64),
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else if scale < 1.0 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Solve, fix the constants from `pose0`, canonicalize and reconstruct.
/// Constant Lagrangians skip the κ-floor and go straight to the Frenet path
/// when fallback is enabled.
pub fn run_se3(
    d: &Se3Derivation,
    jet0: &InvariantJet,
    pose0: &Pose3,
    span: (f64, f64),
    ode: &OdeOptions,
    recon: &ReconstructOptions,
) -> Result<Se3Run, SolverError> {
    let line = d.is_line_lagrangian() && recon.frenet_fallback;
    let floor = if line { None } else { Some(KAPPA_FLOOR) };
    let trajectory = solve_se3_with_floor(d, jet0, span, ode, floor)?;
    if let Termination::Guard { s, .. } = trajectory.termination() {
        let s = *s;
        let kappa = trajectory.traj.states.last().map(|y| y[0]).unwrap_or(0.0);
        return Err(SolverError::CurvatureCollapse { s, kappa });
    }
    let start = &trajectory.initial_jet;
    let constants = constants_from_initial_se3(d, start, pose0)?;
    let (canonical, curve) = match canonicalize_constants(&constants) {
        Ok(cc) => {
            let curve = if line {
                frenet_reconstruct_se3(&trajectory, d, &constants, pose0, recon)?
            } else {
                reconstruct_se3(&trajectory, d, &cc, pose0, recon)?
            };
            (Some(cc), curve)
        }
        Err(SolverError::DegenerateC1 { .. }) if recon.frenet_fallback => {
            (None, frenet_reconstruct_se3(&trajectory, d, &constants, pose0, recon)?)
        }
        Err(e) => return Err(e),
    };
    let (f1, f2) = first_integrals_se3(d, start)?;
    let c = &constants.c;
    let first_integral_gaps = (
        rel_gap(f1, c[0] * c[0] + c[1] * c[1] + c[2] * c[2]),
        rel_gap(f2, c[0] * c[3] - c[1] * c[4] + c[2] * c[5]),
    );
    Ok(Se3Run {
        trajectory,
        constants,
        canonical,
        curve,
        first_integral_gaps,
    })
}
