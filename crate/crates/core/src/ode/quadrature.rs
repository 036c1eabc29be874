//! Adaptive Simpson quadrature over dense output.

use super::{OdeError, Trajectory};

pub const QUADRATURE_TOL: f64 = 1e-11;

const MAX_DEPTH: u32 = 40;

fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Antiderivative values at each knot, anchored to zero at the first.
/// Each knot interval is integrated separately so the interpolant is smooth
/// on every panel.
pub fn cumulative_quadrature(knots: &[f64], f: &dyn Fn(f64) -> f64, tol: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(knots.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in knots.windows(2) {
        acc += adaptive_simpson(f, w[0], w[1], tol);
        out.push(acc);
    }
    out
}

/// `∫_{s0}^{s} f(σ) dσ` over the trajectory's span, panel by panel.
pub fn quadrature(traj: &Trajectory, f: &dyn Fn(f64) -> f64, s: f64) -> Result<f64, OdeError> {
    let (s0, s1) = traj.span();
    if !(s >= s0 && s <= s1) {
        return Err(OdeError::OutOfSpan { s, s0, s1 });
    }
    let mut acc = 0.0;
    for w in traj.s.windows(2) {
        if w[0] >= s {
            break;
        }
        acc += adaptive_simpson(f, w[0], w[1].min(s), QUADRATURE_TOL);
    }
    Ok(acc)
}
