//! Safeguarded Newton iterations for one and two unknowns.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("Newton did not converge in {iterations} iterations (|r| = {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian (det = {det:e})")]
    SingularJacobian { det: f64 },
    #[error("non-finite residual")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    /// Also converged once the Newton step is below `x_tol * (1 + |x|)`,
    /// which covers residuals whose rounding floor sits above `tol`.
    pub x_tol: f64,
    pub max_iter: usize,
    /// Finite-difference step when no Jacobian is supplied.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            x_tol: 1e-13,
            max_iter: 50,
            fd_step: 1e-7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonReport<T> {
    pub root: T,
    pub iterations: usize,
    pub residual: f64,
}

/// Scalar Newton with backtracking on `|f|`; when a sign change has been seen
/// the iterate is kept inside the bracket and bisection takes over if the
/// Newton step leaves it.
pub fn newton_scalar(
    f: &mut dyn FnMut(f64) -> f64,
    df: Option<&mut dyn FnMut(f64) -> f64>,
    guess: f64,
    opts: &NewtonOptions,
) -> Result<NewtonReport<f64>, NewtonError> {
    let mut df = df;
    let mut x = guess;
    let mut fx = f(x);
    if !fx.is_finite() {
        return Err(NewtonError::NonFinite);
    }
    let mut bracket: Option<(f64, f64)> = None;
    for it in 0..opts.max_iter {
        if fx.abs() <= opts.tol {
            return Ok(NewtonReport {
                root: x,
                iterations: it,
                residual: fx.abs(),
            });
        }
        let d = match df.as_mut() {
            Some(g) => g(x),
            None => {
                let h = opts.fd_step * x.abs().max(1.0);
                (f(x + h) - f(x - h)) / (2.0 * h)
            }
        };
        let mut step = if d != 0.0 && d.is_finite() { -fx / d } else { f64::NAN };
        if let Some((a, b)) = bracket {
            let cand = x + step;
            if !cand.is_finite() || cand <= a.min(b) || cand >= a.max(b) {
                step = 0.5 * (a + b) - x;
            }
        }
        if !step.is_finite() {
            return Err(NewtonError::NoConvergence {
                iterations: it,
                residual: fx.abs(),
            });
        }
        if step.abs() <= opts.x_tol * (1.0 + x.abs()) {
            return Ok(NewtonReport {
                root: x + step,
                iterations: it + 1,
                residual: fx.abs(),
            });
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let xn = x + lambda * step;
            let fxn = f(xn);
            if fxn.is_finite() && fxn.abs() < fx.abs() {
                accepted = Some((xn, fxn));
                break;
            }
            if fxn.is_finite() && fxn.signum() != fx.signum() {
                bracket = Some((x, xn));
            }
            lambda *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            return Err(NewtonError::NoConvergence {
                iterations: it,
                residual: fx.abs(),
            });
        };
        if fxn.signum() != fx.signum() {
            bracket = Some((x, xn));
        } else if let Some((a, b)) = bracket {
            bracket = Some(if (a - x).abs() < (b - x).abs() { (xn, b) } else { (a, xn) });
        }
        x = xn;
        fx = fxn;
    }
    if fx.abs() <= opts.tol {
        Ok(NewtonReport {
            root: x,
            iterations: opts.max_iter,
            residual: fx.abs(),
        })
    } else {
        Err(NewtonError::NoConvergence {
            iterations: opts.max_iter,
            residual: fx.abs(),
        })
    }
}

type Jac2 = [[f64; 2]; 2];

/// Two-unknown Newton with backtracking on the max-norm of the residual.
pub fn newton_2d(
    f: &mut dyn FnMut([f64; 2]) -> [f64; 2],
    jac: Option<&mut dyn FnMut([f64; 2]) -> Jac2>,
    guess: [f64; 2],
    opts: &NewtonOptions,
) -> Result<NewtonReport<[f64; 2]>, NewtonError> {
    let mut jac = jac;
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut x = guess;
    let mut r = f(x);
    if !(r[0].is_finite() && r[1].is_finite()) {
        return Err(NewtonError::NonFinite);
    }
    for it in 0..opts.max_iter {
        let rn = norm(r);
        if rn <= opts.tol {
            return Ok(NewtonReport {
                root: x,
                iterations: it,
                residual: rn,
            });
        }
        let j = match jac.as_mut() {
            Some(g) => g(x),
            None => {
                let mut j = [[0.0; 2]; 2];
                for c in 0..2 {
                    let h = opts.fd_step * x[c].abs().max(1.0);
                    let mut xp = x;
                    let mut xm = x;
                    xp[c] += h;
                    xm[c] -= h;
                    let (rp, rm) = (f(xp), f(xm));
                    for row in 0..2 {
                        j[row][c] = (rp[row] - rm[row]) / (2.0 * h);
                    }
                }
                j
            }
        };
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let scale = j.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(NewtonError::SingularJacobian { det });
        }
        let dx = [
            -(j[1][1] * r[0] - j[0][1] * r[1]) / det,
            -(-j[1][0] * r[0] + j[0][0] * r[1]) / det,
        ];
        if dx[0].abs() <= opts.x_tol * (1.0 + x[0].abs())
            && dx[1].abs() <= opts.x_tol * (1.0 + x[1].abs())
        {
            return Ok(NewtonReport {
                root: [x[0] + dx[0], x[1] + dx[1]],
                iterations: it + 1,
                residual: rn,
            });
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let xn = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            let rn2 = f(xn);
            if rn2[0].is_finite() && rn2[1].is_finite() && norm(rn2) < rn {
                accepted = Some((xn, rn2));
                break;
            }
            lambda *= 0.5;
        }
        let Some((xn, rn2)) = accepted else {
            return Err(NewtonError::NoConvergence {
                iterations: it,
                residual: rn,
            });
        };
        x = xn;
        r = rn2;
    }
    let rn = norm(r);
    if rn <= opts.tol {
        Ok(NewtonReport {
            root: x,
            iterations: opts.max_iter,
            residual: rn,
        })
    } else {
        Err(NewtonError::NoConvergence {
            iterations: opts.max_iter,
            residual: rn,
        })
    }
}
