//! Oracles shared by the integration tests. Nothing here calls the library's
//! integrators: the Frenet oracle is a fixed-step classical RK4.
#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};

/// Classical RK4 for `y' = f(s, y)` on `n` uniform steps; returns all nodes.
pub fn rk4(f: &dyn Fn(f64, &[f64]) -> Vec<f64>, y0: &[f64], s0: f64, s1: f64, n: usize) -> Vec<Vec<f64>> {
    let h = (s1 - s0) / n as f64;
    let mut out = vec![y0.to_vec()];
    let mut y = y0.to_vec();
    for i in 0..n {
        let s = s0 + i as f64 * h;
        let k1 = f(s, &y);
        let t: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
        let k2 = f(s + 0.5 * h, &t);
        let t: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
        let k3 = f(s + 0.5 * h, &t);
        let t: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
        let k4 = f(s + h, &t);
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out.push(y.clone());
    }
    out
}

/// Integrates the curvature ODE and the Frenet–Serret equations together.
/// `curv` maps the curvature state to `(y', κ, τ)`; the frame state is
/// `(x, T, N, B)` appended after the curvature state.
pub fn frenet_rk4(
    curv: &dyn Fn(&[f64]) -> (Vec<f64>, f64, f64),
    c0: &[f64],
    x0: Vector3<f64>,
    frame0: Matrix3<f64>,
    s1: f64,
    n: usize,
) -> Vec<Vector3<f64>> {
    let m = c0.len();
    let mut y0 = c0.to_vec();
    y0.extend(x0.iter());
    for col in 0..3 {
        y0.extend(frame0.column(col).iter());
    }
    let f = |_s: f64, y: &[f64]| {
        let (dc, k, t) = curv(&y[..m]);
        let v = |i: usize| Vector3::new(y[m + i], y[m + i + 1], y[m + i + 2]);
        let (tt, nn, bb) = (v(3), v(6), v(9));
        let mut out = dc;
        out.extend(tt.iter());
        out.extend((nn * k).iter());
        out.extend((tt * (-k) + bb * t).iter());
        out.extend((nn * (-t)).iter());
        out
    };
    rk4(&f, &y0, 0.0, s1, n)
        .into_iter()
        .map(|y| Vector3::new(y[m], y[m + 1], y[m + 2]))
        .collect()
}

/// RMS distance after the optimal rigid alignment of `a` onto `b` (Kabsch).
pub fn aligned_rms(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ca = a.iter().sum::<Vector3<f64>>() / n;
    let cb = b.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in a.iter().zip(b) {
        h += (p - ca) * (q - cb).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = vt.transpose() * d * u.transpose();
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (r * (p - ca) - (q - cb)).norm_squared())
        .sum();
    (sum / n).sqrt()
}

/// Max distance from the least-squares line through the points.
pub fn line_deviation(p: &[Vector3<f64>]) -> f64 {
    let n = p.len() as f64;
    let c = p.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for q in p {
        cov += (q - c) * (q - c).transpose();
    }
    let eig = cov.symmetric_eigen();
    let i = eig.eigenvalues.imax();
    let dir: Vector3<f64> = eig.eigenvectors.column(i).into();
    p.iter()
        .map(|q| {
            let v = q - c;
            (v - dir * dir.dot(&v)).norm()
        })
        .fold(0.0, f64::max)
}

/// Largest deviation of a series from its first value.
pub fn drift(v: &[f64]) -> f64 {
    v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max)
}

/// RK4 on the Frenet–Serret equations driven by given `s ↦ (κ, τ)`.
pub fn frenet_driven(
    kt: &dyn Fn(f64) -> (f64, f64),
    x0: Vector3<f64>,
    frame0: Matrix3<f64>,
    s1: f64,
    n: usize,
) -> Vec<Vector3<f64>> {
    let mut y0: Vec<f64> = x0.iter().copied().collect();
    for col in 0..3 {
        y0.extend(frame0.column(col).iter());
    }
    let f = |s: f64, y: &[f64]| {
        let (k, t) = kt(s.min(s1));
        let v = |i: usize| Vector3::new(y[i], y[i + 1], y[i + 2]);
        let (tt, nn, bb) = (v(3), v(6), v(9));
        let mut out: Vec<f64> = tt.iter().copied().collect();
        out.extend((nn * k).iter());
        out.extend((tt * (-k) + bb * t).iter());
        out.extend((nn * (-t)).iter());
        out
    };
    rk4(&f, &y0, 0.0, s1, n)
        .into_iter()
        .map(|y| Vector3::new(y[0], y[1], y[2]))
        .collect()
}
