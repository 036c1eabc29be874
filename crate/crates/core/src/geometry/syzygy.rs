//! Finite-difference residuals of the two planar syzygies, used as
//! numerical oracles for the invariant differentiation formulas.

use super::GeometryError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyzygyResidual {
    pub r1: f64,
    pub r2: f64,
}

struct Fd<'a> {
    f: &'a dyn Fn(f64, f64) -> [f64; 2],
    h: f64,
}

#[derive(Clone, Copy)]
struct Local {
    eta: f64,
    kappa: f64,
    ix2: f64,
    iy2: f64,
    iy11: f64,
}

impl Fd<'_> {
    fn local(&self, s: f64, t: f64) -> Result<Local, GeometryError> {
        let h = self.h;
        let f = self.f;
        let (p0, sp, sm, tp, tm) = (f(s, t), f(s + h, t), f(s - h, t), f(s, t + h), f(s, t - h));
        let d1 = |a: [f64; 2], b: [f64; 2], i: usize| (a[i] - b[i]) / (2.0 * h);
        let (xs, ys) = (d1(sp, sm, 0), d1(sp, sm, 1));
        let (xt, yt) = (d1(tp, tm, 0), d1(tp, tm, 1));
        let xss = (sp[0] - 2.0 * p0[0] + sm[0]) / (h * h);
        let yss = (sp[1] - 2.0 * p0[1] + sm[1]) / (h * h);
        let eta = xs.hypot(ys);
        if eta <= f64::EPSILON {
            return Err(GeometryError::DegenerateTangent);
        }
        let cross = xs * yss - ys * xss;
        Ok(Local {
            eta,
            kappa: cross / eta.powi(3),
            ix2: (xs * xt + ys * yt) / eta,
            iy2: (xs * yt - ys * xt) / eta,
            iy11: cross / eta,
        })
    }
}

/// Residuals of
/// `D_t η = D_s I^x_2 − κ η I^y_2` and
/// `D_t I^y_11 = D_s² I^y_2 − (η_s/η) D_s I^y_2 − κ²η² I^y_2 + 2κη D_s I^x_2 + κ_s η I^x_2`
/// for a two-parameter family `(s, t) -> (x, y)`, every derivative taken by
/// centered differences of step `h` (nested for the outer derivatives).
pub fn syzygy_residual_se2(
    surface: &dyn Fn(f64, f64) -> [f64; 2],
    s0: f64,
    t0: f64,
    h: f64,
) -> Result<SyzygyResidual, GeometryError> {
    let fd = Fd { f: surface, h };
    let c = fd.local(s0, t0)?;
    let sp = fd.local(s0 + h, t0)?;
    let sm = fd.local(s0 - h, t0)?;
    let tp = fd.local(s0, t0 + h)?;
    let tm = fd.local(s0, t0 - h)?;
    let ds = |g: fn(&Local) -> f64| (g(&sp) - g(&sm)) / (2.0 * h);
    let dt = |g: fn(&Local) -> f64| (g(&tp) - g(&tm)) / (2.0 * h);
    let dss_iy2 = (sp.iy2 - 2.0 * c.iy2 + sm.iy2) / (h * h);

    let r1 = dt(|l| l.eta) - (ds(|l| l.ix2) - c.kappa * c.eta * c.iy2);
    let rhs2 = dss_iy2 - ds(|l| l.eta) / c.eta * ds(|l| l.iy2)
        - c.kappa * c.kappa * c.eta * c.eta * c.iy2
        + 2.0 * c.kappa * c.eta * ds(|l| l.ix2)
        + ds(|l| l.kappa) * c.eta * c.ix2;
    let r2 = dt(|l| l.iy11) - rhs2;
    Ok(SyzygyResidual { r1, r2 })
}
