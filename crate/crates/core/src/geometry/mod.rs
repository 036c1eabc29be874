//! Differential geometry of plane and space curves: curvature and torsion,
//! moving frames, invariantization and the Adjoint matrices of the laws.

mod group;
mod syzygy;

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3};
use thiserror::Error;

use crate::expr::InvariantJet;

pub use group::{cross_matrix, d_matrix, rotation_from_angles, wrap_angle, Se2, Se3};
pub use syzygy::{syzygy_residual_se2, SyzygyResidual};

/// Below this `‖x_s × x_ss‖` the torsion is reported undefined.
pub const TORSION_TOL: f64 = 1e-12;
/// Curvature threshold for frames that need a normal direction.
pub const CURVATURE_TOL: f64 = 1e-12;
/// Allowed deviation of `|x_s|²` from one for arc-length jets.
pub const ARC_LENGTH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("tangent vector vanishes")]
    DegenerateTangent,
    #[error("curvature {kappa:e} too small for a normal direction")]
    DegenerateCurvature { kappa: f64 },
    #[error("torsion undefined: |x_s × x_ss| = {norm:e}")]
    UndefinedTorsion { norm: f64 },
    #[error("jet is not arc-length parametrized: |x_s| = {speed}")]
    NotArcLength { speed: f64 },
}

/// Position and first three parameter derivatives of a curve. Planar jets
/// keep `z = 0` in every slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveJet {
    pub dim: usize,
    pub x: Vector3<f64>,
    pub xs: Vector3<f64>,
    pub xss: Vector3<f64>,
    pub xsss: Vector3<f64>,
}

fn lift(v: [f64; 2]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], 0.0)
}

impl CurveJet {
    pub fn planar(x: [f64; 2], xs: [f64; 2], xss: [f64; 2], xsss: [f64; 2]) -> Self {
        CurveJet {
            dim: 2,
            x: lift(x),
            xs: lift(xs),
            xss: lift(xss),
            xsss: lift(xsss),
        }
    }

    pub fn spatial(x: Vector3<f64>, xs: Vector3<f64>, xss: Vector3<f64>, xsss: Vector3<f64>) -> Self {
        CurveJet {
            dim: 3,
            x,
            xs,
            xss,
            xsss,
        }
    }

    pub fn speed(&self) -> f64 {
        self.xs.norm()
    }

    pub fn is_arc_length(&self, tol: f64) -> bool {
        (self.xs.norm_squared() - 1.0).abs() <= tol
    }

    fn require_arc_length(&self) -> Result<(), GeometryError> {
        if self.is_arc_length(ARC_LENGTH_TOL) {
            Ok(())
        } else {
            Err(GeometryError::NotArcLength {
                speed: self.speed(),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureTorsion {
    pub kappa: f64,
    /// `None` when `‖x_s × x_ss‖ ≤ TORSION_TOL`.
    pub tau: Option<f64>,
}

/// Signed curvature in the plane (torsion zero); unsigned curvature and
/// torsion in space.
pub fn curvature_torsion(j: &CurveJet) -> Result<CurvatureTorsion, GeometryError> {
    let speed = j.speed();
    if speed <= f64::EPSILON {
        return Err(GeometryError::DegenerateTangent);
    }
    if j.dim == 2 {
        let k = (j.xs.x * j.xss.y - j.xs.y * j.xss.x) / speed.powi(3);
        return Ok(CurvatureTorsion {
            kappa: k,
            tau: Some(0.0),
        });
    }
    let c = j.xs.cross(&j.xss);
    let n = c.norm();
    let kappa = n / speed.powi(3);
    let tau = (n > TORSION_TOL).then(|| j.xsss.dot(&c) / (n * n));
    Ok(CurvatureTorsion { kappa, tau })
}

/// Frame parameters `(a, b, theta)` of the planar action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se2Frame {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Se2Frame {
    /// Group element carrying the canonical jet (origin, tangent `e1`) onto the curve.
    pub fn element(&self) -> Se2 {
        Se2::new(self.theta, Vector2::new(self.a, self.b))
    }
}

/// Frame parameters `(a, b, c, alpha, beta, gamma)` of the spatial action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se3Frame {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Se3Frame {
    pub fn element(&self) -> Se3 {
        Se3::new(
            rotation_from_angles(self.alpha, self.beta, self.gamma),
            Vector3::new(self.a, self.b, self.c),
        )
    }
}

/// `a = x, b = y, theta = atan2(y_s, x_s)`.
pub fn moving_frame_se2(j: &CurveJet) -> Result<Se2Frame, GeometryError> {
    if j.xs.x.hypot(j.xs.y) <= f64::EPSILON {
        return Err(GeometryError::DegenerateTangent);
    }
    Ok(Se2Frame {
        a: j.x.x,
        b: j.x.y,
        theta: j.xs.y.atan2(j.xs.x),
    })
}

/// Solves the normalization equations of the spatial action; the rotation
/// sends the tangent to the x-axis and the principal normal to the y-axis.
pub fn moving_frame_se3(j: &CurveJet) -> Result<Se3Frame, GeometryError> {
    let ct = curvature_torsion(j)?;
    if ct.kappa <= CURVATURE_TOL {
        return Err(GeometryError::DegenerateCurvature { kappa: ct.kappa });
    }
    let (xs, xss) = (&j.xs, &j.xss);
    let num = xs.y * (xs.y * xss.z - xs.z * xss.y) - xs.x * (xs.z * xss.x - xs.x * xss.z);
    let den = xs.norm() * (xs.x * xss.y - xs.y * xss.x);
    Ok(Se3Frame {
        a: j.x.x,
        b: j.x.y,
        c: j.x.z,
        alpha: num.atan2(den),
        beta: xs.z.atan2(xs.x.hypot(xs.y)),
        gamma: xs.y.atan2(xs.x),
    })
}

/// Lowest-order planar invariants `(I^x_1, I^y_11)`, read off the jet after
/// moving it onto the cross-section.
pub fn invariantize_se2(j: &CurveJet) -> Result<(f64, f64), GeometryError> {
    let g = moving_frame_se2(j)?.element().inverse();
    let n = g.act_jet(j);
    Ok((n.xs.x, n.xss.y))
}

/// The jet moved onto the spatial cross-section (origin, tangent on the
/// x-axis, normal in the xy-plane).
pub fn normalize_jet_se3(j: &CurveJet) -> Result<CurveJet, GeometryError> {
    let g = moving_frame_se3(j)?.element().inverse();
    Ok(g.act_jet(j))
}

pub fn adjoint_se2(j: &CurveJet) -> Result<Matrix3<f64>, GeometryError> {
    j.require_arc_length()?;
    Ok(Se2::new(j.xs.y.atan2(j.xs.x), Vector2::new(j.x.x, j.x.y)).adjoint())
}

/// Frenet–Serret frame `(x_s, x_ss/κ, x_s × x_ss/κ)` of an arc-length jet.
pub fn frenet_frame(j: &CurveJet) -> Result<Matrix3<f64>, GeometryError> {
    j.require_arc_length()?;
    let kappa = j.xss.norm();
    if kappa <= CURVATURE_TOL {
        return Err(GeometryError::DegenerateCurvature { kappa });
    }
    let t = j.xs;
    let n = j.xss / kappa;
    let b = t.cross(&j.xss) / kappa;
    Ok(Matrix3::from_columns(&[t, n, b]))
}

pub fn adjoint_se3(j: &CurveJet) -> Result<Matrix6<f64>, GeometryError> {
    let rho = frenet_frame(j)?;
    Ok(Se3::new(rho, j.x).adjoint())
}

/// Either group's Adjoint matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum AdjointMatrix {
    Se2(Matrix3<f64>),
    Se3(Matrix6<f64>),
}

/// `diag(1,1,0)` for SE(2), `diag(1,1,1,0,0,0)` for SE(3).
pub fn b_form_se2() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0))
}

pub fn b_form_se3() -> Matrix6<f64> {
    let mut b = Matrix6::zeros();
    for i in 0..3 {
        b[(i, i)] = 1.0;
    }
    b
}

/// `[[0, D], [D, 0]]`.
pub fn d_form_se3() -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let d = d_matrix();
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&d);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&d);
    m
}

/// Planar initial pose: position and tangent angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub x: Vector2<f64>,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x: Vector2::new(x, y),
            theta,
        }
    }

    pub fn canonical() -> Self {
        Pose2::new(0.0, 0.0, 0.0)
    }

    pub fn from_jet(j: &CurveJet) -> Result<Self, GeometryError> {
        let f = moving_frame_se2(j)?;
        Ok(Pose2::new(f.a, f.b, f.theta))
    }

    pub fn element(&self) -> Se2 {
        Se2::new(self.theta, self.x)
    }

    /// Arc-length jet of a curve through this pose with the given invariants.
    pub fn jet(&self, inv: &InvariantJet) -> CurveJet {
        let k = inv.kappa.first().copied().unwrap_or(0.0);
        let ks = inv.kappa.get(1).copied().unwrap_or(0.0);
        let (s, c) = self.theta.sin_cos();
        let t = [c, s];
        let n = [-s, c];
        CurveJet::planar(
            [self.x.x, self.x.y],
            t,
            [k * n[0], k * n[1]],
            [ks * n[0] - k * k * t[0], ks * n[1] - k * k * t[1]],
        )
    }
}

/// Spatial initial pose: position and an orthonormal frame with columns
/// tangent, normal, binormal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose3 {
    pub x: Vector3<f64>,
    pub frame: Matrix3<f64>,
}

impl Pose3 {
    pub fn new(x: Vector3<f64>, frame: Matrix3<f64>) -> Self {
        Pose3 { x, frame }
    }

    pub fn canonical() -> Self {
        Pose3::new(Vector3::zeros(), Matrix3::identity())
    }

    /// Builds a right-handed frame from a tangent and a (not necessarily
    /// orthogonal) normal hint.
    pub fn from_tangent_normal(x: Vector3<f64>, t: Vector3<f64>, n_hint: Vector3<f64>) -> Option<Self> {
        let t = t.try_normalize(1e-14)?;
        let n = (n_hint - t * t.dot(&n_hint)).try_normalize(1e-14)?;
        Some(Pose3::new(x, Matrix3::from_columns(&[t, n, t.cross(&n)])))
    }

    /// Planar pose embedded in the xy-plane.
    pub fn from_planar(p: &Pose2) -> Self {
        let (s, c) = p.theta.sin_cos();
        Pose3::new(
            Vector3::new(p.x.x, p.x.y, 0.0),
            Matrix3::from_columns(&[
                Vector3::new(c, s, 0.0),
                Vector3::new(-s, c, 0.0),
                Vector3::z(),
            ]),
        )
    }

    pub fn from_jet(j: &CurveJet) -> Result<Self, GeometryError> {
        if j.speed() <= f64::EPSILON {
            return Err(GeometryError::DegenerateTangent);
        }
        let t = j.xs / j.speed();
        let n_dir = j.xss - t * t.dot(&j.xss);
        if n_dir.norm() <= CURVATURE_TOL {
            return Err(GeometryError::DegenerateCurvature { kappa: 0.0 });
        }
        Ok(Pose3::from_tangent_normal(j.x, t, n_dir).expect("nonzero normal"))
    }

    pub fn element(&self) -> Se3 {
        Se3::new(self.frame, self.x)
    }

    pub fn tangent(&self) -> Vector3<f64> {
        self.frame.column(0).into()
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.frame.column(1).into()
    }

    pub fn binormal(&self) -> Vector3<f64> {
        self.frame.column(2).into()
    }

    /// Arc-length jet from the Frenet–Serret equations at this pose.
    pub fn jet(&self, inv: &InvariantJet) -> CurveJet {
        let k = inv.kappa.first().copied().unwrap_or(0.0);
        let ks = inv.kappa.get(1).copied().unwrap_or(0.0);
        let tau = inv.tau.first().copied().unwrap_or(0.0);
        let (t, n, b) = (self.tangent(), self.normal(), self.binormal());
        CurveJet::spatial(self.x, t, n * k, n * ks + (b * tau - t * k) * k)
    }
}
