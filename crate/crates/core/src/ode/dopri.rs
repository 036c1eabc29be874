//! Dormand–Prince 5(4) with Hairer's quartic dense output.

use super::{OdeError, Termination, Trajectory};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Right-hand side `y' = f(s, y)`. An `Err` rejects the step being attempted.
pub trait Rhs {
    fn eval(&mut self, s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    fn eval(&mut self, s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        self(s, y, dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        OdeOptions {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }
}

/// Stored interpolation data of one accepted step.
#[derive(Clone, Debug)]
pub(crate) struct DenseSegment {
    pub(crate) s0: f64,
    pub(crate) h: f64,
    pub(crate) r: [Vec<f64>; 5],
    pub(crate) y1: Vec<f64>,
}

impl DenseSegment {
    pub(crate) fn eval_into(&self, s: f64, out: &mut [f64]) {
        let theta = (s - self.s0) / self.h;
        if theta >= 1.0 {
            out.copy_from_slice(&self.y1);
            return;
        }
        if theta <= 0.0 {
            out.copy_from_slice(&self.r[0]);
            return;
        }
        let t1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + t1 * (self.r[2][i] + theta * (self.r[3][i] + t1 * self.r[4][i])));
        }
    }
}

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y5: Vec<f64>,
    err: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y5: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    // Stages 2..7 given k[0] = f(s, y). Fills y5 (propagated) and err (y5 - y4).
    fn step<R: Rhs>(&mut self, rhs: &mut R, s: f64, y: &[f64], h: f64) -> Result<(), String> {
        let n = y.len();
        let combos: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        for (stage, (c, a)) in combos.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, aj) in a.iter().enumerate() {
                    acc += aj * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let (head, tail) = self.k.split_at_mut(stage + 1);
            let _ = head;
            rhs.eval(s + c * h, &self.tmp, &mut tail[0])?;
        }
        for i in 0..n {
            self.y5[i] = y[i]
                + h * (A71 * self.k[0][i]
                    + A73 * self.k[2][i]
                    + A74 * self.k[3][i]
                    + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        let (_, last) = self.k.split_at_mut(6);
        rhs.eval(s + h, &self.y5, &mut last[0])?;
        for i in 0..n {
            self.err[i] = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
        }
        Ok(())
    }

    fn dense(&self, s0: f64, h: f64, y0: &[f64]) -> DenseSegment {
        let n = y0.len();
        let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let ydiff = self.y5[i] - y0[i];
            let bspl = h * self.k[0][i] - ydiff;
            r[0][i] = y0[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * self.k[6][i] - bspl;
            r[4][i] = h
                * (D1 * self.k[0][i]
                    + D3 * self.k[2][i]
                    + D4 * self.k[3][i]
                    + D5 * self.k[4][i]
                    + D6 * self.k[5][i]
                    + D7 * self.k[6][i]);
        }
        DenseSegment {
            s0,
            h,
            r,
            y1: self.y5.clone(),
        }
    }
}

fn err_norm(err: &[f64], y0: &[f64], y1: &[f64], opts: &OdeOptions) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..err.len() {
        let sc = opts.abs_tol + opts.rel_tol * y0[i].abs().max(y1[i].abs());
        m = m.max((err[i] / sc).abs());
    }
    m
}

fn initial_step<R: Rhs>(
    rhs: &mut R,
    s0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    opts: &OdeOptions,
) -> f64 {
    let n = y0.len();
    if n == 0 {
        return span;
    }
    let sc: Vec<f64> = y0.iter().map(|y| opts.abs_tol + opts.rel_tol * y.abs()).collect();
    let nrm = |v: &[f64]| v.iter().zip(&sc).map(|(a, s)| (a / s).abs()).fold(0.0, f64::max);
    let d0 = nrm(y0);
    let d1 = nrm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    if rhs.eval(s0 + h0, &y1, &mut f1).is_err() {
        return h0 * 0.1;
    }
    let diff: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = nrm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).min(opts.h_max)
}

/// Adaptive integration from `span.0` to `span.1`. `guard` is consulted after
/// every accepted step; returning `Some(reason)` halts with a partial result.
pub fn integrate_ivp_guarded<R: Rhs, G: FnMut(f64, &[f64]) -> Option<String>>(
    mut rhs: R,
    y0: &[f64],
    span: (f64, f64),
    opts: &OdeOptions,
    mut guard: G,
) -> Result<Trajectory, OdeError> {
    let (s0, s1) = span;
    if !(s1 > s0) {
        return Err(OdeError::InvalidSpan { s0, s1 });
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(OdeError::InvalidTolerance);
    }
    let n = y0.len();
    let mut st = Stages::new(n);
    let mut traj = Trajectory::start(s0, y0.to_vec());
    rhs.eval(s0, y0, &mut st.k[0])
        .map_err(|reason| OdeError::RhsFailure { s: s0, reason })?;
    if let Some(reason) = guard(s0, y0) {
        traj.termination = Termination::Guard { s: s0, reason };
        return Ok(traj);
    }
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&mut rhs, s0, y0, &st.k[0].clone(), s1 - s0, opts));
    let h_floor = 1e-14 * (s1 - s0).abs().max(s0.abs()).max(1.0);
    let mut s = s0;
    let mut y = y0.to_vec();
    let mut last_reject = false;
    let mut e_old: f64 = 1e-4;
    loop {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            traj.termination = Termination::MaxSteps { s };
            return Err(OdeError::MaxStepsExceeded {
                s,
                partial: Box::new(traj),
            });
        }
        let mut last = false;
        if s + h * 1.0001 >= s1 {
            h = s1 - s;
            last = true;
        }
        h = h.min(opts.h_max);
        if h < h_floor {
            return Err(OdeError::StepUnderflow {
                s,
                partial: Box::new(traj),
            });
        }
        traj.stats.rhs_evals += 6;
        match st.step(&mut rhs, s, &y, h) {
            Err(reason) => {
                traj.stats.rejected += 1;
                h *= 0.5;
                last_reject = true;
                if h < h_floor {
                    traj.termination = Termination::RhsFailure { s, reason };
                    return Ok(traj);
                }
                continue;
            }
            Ok(()) => {}
        }
        let e = err_norm(&st.err, &y, &st.y5, opts);
        if !e.is_finite() {
            traj.stats.rejected += 1;
            h *= 0.25;
            last_reject = true;
            continue;
        }
        if e <= 1.0 {
            let s_new = if last { s1 } else { s + h };
            let seg = st.dense(s, s_new - s, &y);
            y.copy_from_slice(&st.y5);
            s = s_new;
            let k7 = st.k[6].clone();
            st.k[0].copy_from_slice(&k7);
            traj.push(s, y.clone(), seg);
            traj.stats.accepted += 1;
            if let Some(reason) = guard(s, &y) {
                traj.termination = Termination::Guard { s, reason };
                return Ok(traj);
            }
            if last {
                traj.termination = Termination::Completed;
                return Ok(traj);
            }
            // PI control as in Hairer's DOPRI5. The safety factor is below the usual
            // 0.9 so that global drift at the default tolerances stays near rel_tol.
            let e = e.max(1e-10);
            let mut fac = 0.75 * e.powf(-0.17) * e_old.powf(0.04);
            e_old = e.max(1e-4);
            fac = fac.clamp(0.2, 10.0);
            if last_reject {
                fac = fac.min(1.0);
            }
            last_reject = false;
            h *= fac;
        } else {
            traj.stats.rejected += 1;
            let fac = (0.9 * e.powf(-0.2)).max(0.2);
            h *= fac;
            last_reject = true;
        }
    }
}

pub fn integrate_ivp<R: Rhs>(
    rhs: R,
    y0: &[f64],
    span: (f64, f64),
    opts: &OdeOptions,
) -> Result<Trajectory, OdeError> {
    integrate_ivp_guarded(rhs, y0, span, opts, |_, _| None)
}

/// Fixed-step run returning the fifth- and embedded fourth-order endpoints,
/// used to verify the pair's convergence orders.
pub fn integrate_fixed<R: Rhs>(
    mut rhs: R,
    y0: &[f64],
    span: (f64, f64),
    steps: usize,
) -> Result<(Vec<f64>, Vec<f64>), OdeError> {
    let n = y0.len();
    let h = (span.1 - span.0) / steps as f64;
    let mut st = Stages::new(n);
    let mut y = y0.to_vec();
    let mut y4 = y0.to_vec();
    let mut s = span.0;
    for _ in 0..steps {
        rhs.eval(s, &y, &mut st.k[0])
            .map_err(|reason| OdeError::RhsFailure { s, reason })?;
        st.step(&mut rhs, s, &y, h)
            .map_err(|reason| OdeError::RhsFailure { s, reason })?;
        // Propagate the embedded solution on its own to expose its order.
        let mut st4 = Stages::new(n);
        rhs.eval(s, &y4, &mut st4.k[0])
            .map_err(|reason| OdeError::RhsFailure { s, reason })?;
        st4.step(&mut rhs, s, &y4, h)
            .map_err(|reason| OdeError::RhsFailure { s, reason })?;
        for i in 0..n {
            y4[i] = st4.y5[i] - st4.err[i];
        }
        y.copy_from_slice(&st.y5);
        s += h;
    }
    Ok((y, y4))
}
