//! Concrete SE(2) and SE(3) elements acting on the left: `x -> R x + t`.

use nalgebra::{Matrix3, Matrix6, Rotation3, Vector2, Vector3};

use super::CurveJet;

/// `D = diag(1, -1, 1)`.
pub fn d_matrix() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0))
}

/// Cross-product matrix `X v = x × v`.
pub fn cross_matrix(x: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -x.z, x.y, x.z, 0.0, -x.x, -x.y, x.x, 0.0)
}

/// Rotation parametrized by the angles of the SE(3) action (alpha, beta, gamma).
pub fn rotation_from_angles(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    Matrix3::new(
        cb * cg,
        -sa * sb * cg - ca * sg,
        -ca * sb * cg + sa * sg,
        cb * sg,
        -sa * sb * sg + ca * cg,
        -ca * sb * sg - sa * cg,
        sb,
        sa * cb,
        ca * cb,
    )
}

/// Normalizes an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se2 {
    pub theta: f64,
    pub t: Vector2<f64>,
}

impl Se2 {
    pub fn new(theta: f64, t: Vector2<f64>) -> Self {
        Se2 { theta, t }
    }

    pub fn identity() -> Self {
        Se2::new(0.0, Vector2::zeros())
    }

    pub fn rotation(&self) -> nalgebra::Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        nalgebra::Matrix2::new(c, -s, s, c)
    }

    pub fn compose(&self, other: &Se2) -> Se2 {
        Se2::new(
            wrap_angle(self.theta + other.theta),
            self.rotation() * other.t + self.t,
        )
    }

    pub fn inverse(&self) -> Se2 {
        let rt = self.rotation().transpose();
        Se2::new(wrap_angle(-self.theta), -(rt * self.t))
    }

    pub fn act_point(&self, p: &Vector2<f64>) -> Vector2<f64> {
        self.rotation() * p + self.t
    }

    pub fn act_jet(&self, j: &CurveJet) -> CurveJet {
        let r = self.rotation();
        let lift = |v: &Vector3<f64>| {
            let w = r * Vector2::new(v.x, v.y);
            Vector3::new(w.x, w.y, 0.0)
        };
        let p = self.act_point(&Vector2::new(j.x.x, j.x.y));
        CurveJet {
            dim: 2,
            x: Vector3::new(p.x, p.y, 0.0),
            xs: lift(&j.xs),
            xss: lift(&j.xss),
            xsss: lift(&j.xsss),
        }
    }

    /// Matrix multiplying the vector of invariants in the planar laws:
    /// rows `(c, -s, 0)`, `(s, c, 0)`, `(t × R e1, t × R e2, 1)`.
    pub fn adjoint(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        let (x, y) = (self.t.x, self.t.y);
        Matrix3::new(c, -s, 0.0, s, c, 0.0, x * s - y * c, x * c + y * s, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se3 {
    pub rot: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl Se3 {
    pub fn new(rot: Matrix3<f64>, t: Vector3<f64>) -> Self {
        Se3 { rot, t }
    }

    pub fn identity() -> Self {
        Se3::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, t: Vector3<f64>) -> Self {
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Se3::new(*r.matrix(), t)
    }

    pub fn compose(&self, other: &Se3) -> Se3 {
        Se3::new(self.rot * other.rot, self.rot * other.t + self.t)
    }

    pub fn inverse(&self) -> Se3 {
        let rt = self.rot.transpose();
        Se3::new(rt, -(rt * self.t))
    }

    pub fn act_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rot * p + self.t
    }

    pub fn act_jet(&self, j: &CurveJet) -> CurveJet {
        CurveJet {
            dim: 3,
            x: self.act_point(&j.x),
            xs: self.rot * j.xs,
            xss: self.rot * j.xss,
            xsss: self.rot * j.xsss,
        }
    }

    /// `[[R, 0], [D X(t) R, D R D]]`.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let d = d_matrix();
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rot);
        m.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(d * cross_matrix(&self.t) * self.rot));
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(d * self.rot * d));
        m
    }
}
