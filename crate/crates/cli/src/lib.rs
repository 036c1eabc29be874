//! The `mfsolve` front end: `derive`, `solve` and `check` over a run
//! configuration. The binary is a thin wrapper; everything here is callable
//! in-process.

pub mod config;

use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use thiserror::Error;

use moving_frames::expr::{evaluate, Expr};
use moving_frames::ode::{DriftReport, OdeOptions, Termination};
use moving_frames::se2::{derive_el_se2, run_se2, solve_se2, Se2Derivation, Se2Run};
use moving_frames::se3::{derive_el_se3, elimination_residual, run_se3, solve_se3, Se3Derivation, Se3Run};
use moving_frames::system::{InvariantTrajectory, SystemError};
use moving_frames::SolverError;

pub use config::{Format, Group, Opts, Pose, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{code}: {message}")]
    Numeric { code: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration (and output path) problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric { .. } => 3,
        }
    }

    pub fn code(&self) -> &str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Io(_) => "IoError",
            CliError::Numeric { code, .. } => code,
        }
    }

    pub fn to_json(&self) -> Value {
        let message = match self {
            CliError::Numeric { message, .. } => message.clone(),
            other => other.to_string(),
        };
        json!({ "status": "error", "code": self.code(), "message": message })
    }
}

/// Problems with the Lagrangian itself are configuration errors; everything
/// else the pipeline reports is numeric.
impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match &e {
            SolverError::TauNotAllowed
            | SolverError::System(SystemError::NullLagrangian)
            | SolverError::System(SystemError::Underdetermined { .. }) => CliError::Config(e.to_string()),
            _ => CliError::Numeric {
                code: e.code().to_string(),
                message: e.to_string(),
            },
        }
    }
}

enum Derivation {
    Se2(Se2Derivation),
    Se3(Box<Se3Derivation>),
}

fn derivation(cfg: &RunConfig) -> Result<Derivation, CliError> {
    Ok(match cfg.group {
        Group::Se2 => Derivation::Se2(derive_el_se2(&cfg.lagrangian)?),
        Group::Se3 => Derivation::Se3(Box::new(derive_el_se3(&cfg.lagrangian))),
    })
}

/// Symbolic artifacts as ordered `(name, expression)` pairs.
pub fn derive_entries(cfg: &RunConfig) -> Result<Vec<(String, String)>, CliError> {
    let mut out: Vec<(String, String)> = vec![
        ("group".into(), cfg.group.name().into()),
        ("lagrangian".into(), cfg.lagrangian.simplify().to_string()),
    ];
    let mut push = |k: &str, e: &Expr| out.push((k.to_string(), e.to_string()));
    match derivation(cfg)? {
        Derivation::Se2(d) => {
            push("E_kappa", &d.e_kappa);
            push("lambda", &d.lambda);
            push("EL", &d.e_y);
            for (i, u) in d.upsilon.iter().enumerate() {
                push(&format!("upsilon_{}", i + 1), u);
            }
            push("first_integral", &d.first_integral);
        }
        Derivation::Se3(d) => {
            push("E_kappa", &d.e_kappa);
            push("E_tau", &d.e_tau);
            push("lambda", &d.lambda);
            push("EL_y", &d.e_y);
            push("EL_z", &d.e_z);
            for (i, u) in d.upsilon.iter().enumerate() {
                push(&format!("upsilon_{}", i + 1), u);
            }
            push("F1", &d.f1);
            push("F2", &d.f2);
        }
    }
    Ok(out)
}

pub fn derive_text(entries: &[(String, String)]) -> String {
    entries.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k}: {v}");
        s
    })
}

pub fn derive_json(entries: &[(String, String)]) -> Value {
    let map: Map<String, Value> = entries.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    Value::Object(map)
}

/// Fixed scientific notation with `precision` significant digits.
pub fn fmt_float(v: f64, precision: usize) -> String {
    // `+ 0.0` folds a negative zero into a positive one.
    format!("{:.*e}", precision.saturating_sub(1), v + 0.0)
}

fn drift_json(r: &DriftReport) -> Value {
    let map: Map<String, Value> = r
        .entries
        .iter()
        .map(|e| {
            (
                e.name.clone(),
                json!({ "initial": e.initial, "max_abs": e.max_abs, "max_rel": e.max_rel }),
            )
        })
        .collect();
    Value::Object(map)
}

fn termination_json(t: &Termination) -> Value {
    match t {
        Termination::Completed => json!({ "kind": "completed" }),
        Termination::Guard { s, reason } => json!({ "kind": "guard", "s": s, "reason": reason }),
        Termination::RhsFailure { s, reason } => json!({ "kind": "rhs_failure", "s": s, "reason": reason }),
        Termination::MaxSteps { s } => json!({ "kind": "max_steps", "s": s }),
    }
}

/// One finished pipeline run of either group.
pub enum Run {
    Se2(Box<Se2Run>),
    Se3(Box<Se3Run>),
}

impl Run {
    pub fn trajectory(&self) -> &InvariantTrajectory {
        match self {
            Run::Se2(r) => &r.trajectory,
            Run::Se3(r) => &r.trajectory,
        }
    }

    pub fn s(&self) -> &[f64] {
        match self {
            Run::Se2(r) => &r.curve.s,
            Run::Se3(r) => &r.curve.s,
        }
    }

    /// Reconstructed points, planar ones with `z = 0`.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        match self {
            Run::Se2(r) => r.curve.position.iter().map(|p| [p.x, p.y, 0.0]).collect(),
            Run::Se3(r) => r.curve.position.iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Run, CliError> {
    Ok(match (derivation(cfg)?, &cfg.pose) {
        (Derivation::Se2(d), Pose::Planar(p)) => {
            Run::Se2(Box::new(run_se2(&d, &cfg.jet0, p, cfg.span, &cfg.ode, &cfg.recon)?))
        }
        (Derivation::Se3(d), Pose::Spatial(p)) => {
            Run::Se3(Box::new(run_se3(&d, &cfg.jet0, p, cfg.span, &cfg.ode, &cfg.recon)?))
        }
        _ => return Err(CliError::Config("pose does not match the group".into())),
    })
}

/// Trajectory CSV: `s`, the curvature (and torsion) state columns, then the
/// reconstructed coordinates.
pub fn trajectory_csv(run: &Run, precision: usize) -> Result<String, CliError> {
    let traj = run.trajectory();
    let names = traj.system.state_names();
    let spatial = matches!(run, Run::Se3(_));
    let mut kappa_cols: Vec<String> = names.iter().filter(|n| n.starts_with("kappa")).cloned().collect();
    let mut tau_cols: Vec<String> = names.iter().filter(|n| n.starts_with("tau")).cloned().collect();
    if kappa_cols.is_empty() {
        kappa_cols.push("kappa".into());
    }
    if spatial && tau_cols.is_empty() {
        tau_cols.push("tau".into());
    }
    let (kappa, tau): (&[f64], &[f64]) = match run {
        Run::Se2(r) => (&r.curve.kappa, &[]),
        Run::Se3(r) => (&r.curve.kappa, &r.curve.tau),
    };
    let mut header = vec!["s".to_string()];
    header.extend(kappa_cols.iter().cloned());
    header.extend(tau_cols.iter().cloned());
    header.extend(["x", "y"].map(String::from));
    if spatial {
        header.push("z".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    let positions = run.positions();
    let mut state = vec![0.0; traj.system.state_dim()];
    for (i, &s) in run.s().iter().enumerate() {
        if !state.is_empty() {
            traj.traj
                .eval_into(s, &mut state)
                .map_err(|e| CliError::from(SolverError::from(e)))?;
        }
        let mut row = vec![fmt_float(s, precision)];
        for c in kappa_cols.iter().chain(&tau_cols) {
            let v = match names.iter().position(|n| n == c) {
                Some(k) => state[k],
                None if c == "kappa" => kappa[i],
                None => tau[i],
            };
            row.push(fmt_float(v, precision));
        }
        let p = positions[i];
        let dims = if spatial { 3 } else { 2 };
        row.extend(p[..dims].iter().map(|v| fmt_float(*v, precision)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn diagnostics(cfg: &RunConfig, run: &Run) -> Value {
    let traj = run.trajectory();
    let mut d = json!({
        "status": "ok",
        "group": cfg.group.name(),
        "lagrangian": cfg.lagrangian.simplify().to_string(),
        "span": [traj.span().0, traj.span().1],
        "completed": traj.completed(),
        "termination": termination_json(traj.termination()),
        "knots": traj.traj.len(),
        "newton_max_iterations": traj.newton_max_iterations,
        "drift": drift_json(&traj.drift),
    });
    let obj = d.as_object_mut().expect("object");
    match run {
        Run::Se2(r) => {
            obj.insert("constants".into(), json!(r.constants.c));
            obj.insert("first_integral_gap".into(), json!(r.first_integral_gap));
            obj.insert("law_drift".into(), drift_json(&r.curve.law_drift));
            obj.insert("law_residuals".into(), json!(r.curve.law_residuals));
            obj.insert("speed_defect".into(), json!(r.curve.speed_defect));
            obj.insert("frenet_fallback".into(), json!(r.curve.frenet_fallback));
            if let Some(p) = &r.curve.closed_form {
                obj.insert(
                    "y_offset_vs_closed_form".into(),
                    json!({ "expected": p.expected_offset, "min": p.min_offset, "max": p.max_offset }),
                );
            }
        }
        Run::Se3(r) => {
            obj.insert("constants".into(), json!(r.constants.c));
            obj.insert("c1_norm".into(), json!(r.constants.c1_norm()));
            obj.insert("c1_D_c2".into(), json!(r.constants.c1_d_c2()));
            if let Some(cc) = &r.canonical {
                obj.insert(
                    "canonical".into(),
                    json!({
                        "C": cc.canonical,
                        "alpha": cc.alpha,
                        "beta": cc.beta,
                        "gamma": cc.gamma,
                        "translation": [cc.translation.x, cc.translation.y, cc.translation.z],
                        "branch_failure": cc.branch_failure,
                    }),
                );
            }
            obj.insert(
                "first_integral_gaps".into(),
                json!([r.first_integral_gaps.0, r.first_integral_gaps.1]),
            );
            obj.insert("law_drift".into(), drift_json(&r.curve.law_drift));
            obj.insert("law_residuals".into(), json!(r.curve.law_residuals));
            obj.insert("speed_defect".into(), json!(r.curve.speed_defect));
            obj.insert("frenet_fallback".into(), json!(r.curve.frenet_fallback));
        }
    }
    d
}

pub struct SolveOutput {
    pub csv: String,
    pub diagnostics: Value,
}

pub fn solve(cfg: &RunConfig) -> Result<SolveOutput, CliError> {
    let r = run(cfg)?;
    Ok(SolveOutput {
        csv: trajectory_csv(&r, cfg.precision)?,
        diagnostics: diagnostics(cfg, &r),
    })
}

/// One verification check: `value` must not exceed `limit`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "check": self.name, "value": self.value, "limit": self.limit, "pass": self.pass })
    }
}

pub const FIRST_INTEGRAL_TOL: f64 = 1e-8;
pub const LAW_TOL: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const SELF_ORACLE_TOL: f64 = 1e-7;

fn max_abs_at_knots(e: &Expr, traj: &InvariantTrajectory, extra: usize) -> Result<f64, CliError> {
    let mut m: f64 = 0.0;
    for j in traj.knot_jets(extra).map_err(SolverError::from)? {
        let v = evaluate(e, &j).map_err(SolverError::from)?;
        m = if v.is_nan() { f64::NAN } else { m.max(v.abs()) };
    }
    Ok(m)
}

/// Sup-norm distance between two state trajectories on the reference's knots.
fn state_gap(a: &InvariantTrajectory, b: &InvariantTrajectory) -> Result<f64, CliError> {
    let mut m: f64 = 0.0;
    for &s in &a.traj.s {
        let (x, y) = (
            a.traj.eval(s).map_err(SolverError::from)?,
            b.traj.eval(s).map_err(SolverError::from)?,
        );
        for (p, q) in x.iter().zip(&y) {
            m = m.max((p - q).abs());
        }
    }
    Ok(m)
}

fn tight() -> OdeOptions {
    OdeOptions::with_tolerances(1e-12, 1e-14)
}

/// Runs the invariant suite for the configured problem. A pipeline error is
/// returned as `Err`; failed checks are reported in the list.
pub fn check(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let d = derivation(cfg)?;
    let r = run(cfg)?;
    let traj = r.trajectory();
    let mut out = vec![Check::new("span_completed", cfg.span.1 - traj.traj.span().1, 0.0)];
    let drift = |name: &str| traj.drift.get(name).map(|e| e.max_rel).unwrap_or(f64::NAN);
    match (&d, &r) {
        (Derivation::Se2(d), Run::Se2(run)) => {
            out.push(Check::new("first_integral_drift", drift("first_integral"), FIRST_INTEGRAL_TOL));
            out.push(Check::new("first_integral_vs_constants", run.first_integral_gap, FIRST_INTEGRAL_TOL));
            out.push(Check::new("conservation_law_drift", run.curve.law_drift.max_abs(), LAW_TOL));
            for (k, v) in &run.curve.law_residuals {
                out.push(Check::new(format!("law_residual_{k}"), *v, LAW_TOL));
            }
            out.push(Check::new("speed_defect", run.curve.speed_defect, LAW_TOL));
            out.push(Check::new(
                "multiplier_identity",
                max_abs_at_knots(&d.e_x, traj, d.extra_orders())?,
                IDENTITY_TOL,
            ));
            let reference = solve_se2(d, &cfg.jet0, cfg.span, &tight())?;
            out.push(Check::new("self_oracle", state_gap(traj, &reference)?, SELF_ORACLE_TOL));
        }
        (Derivation::Se3(d), Run::Se3(run)) => {
            out.push(Check::new("F1_drift", drift("F1"), FIRST_INTEGRAL_TOL));
            out.push(Check::new("F2_drift", drift("F2"), FIRST_INTEGRAL_TOL));
            out.push(Check::new("F1_vs_constants", run.first_integral_gaps.0, FIRST_INTEGRAL_TOL));
            out.push(Check::new("F2_vs_constants", run.first_integral_gaps.1, FIRST_INTEGRAL_TOL));
            out.push(Check::new("conservation_law_drift", run.curve.law_drift.max_abs(), LAW_TOL));
            for (k, v) in &run.curve.law_residuals {
                out.push(Check::new(format!("law_residual_{k}"), *v, LAW_TOL));
            }
            out.push(Check::new("speed_defect", run.curve.speed_defect, LAW_TOL));
            if !d.is_line_lagrangian() {
                out.push(Check::new(
                    "multiplier_identity",
                    max_abs_at_knots(&d.e_x, traj, d.extra_orders())?,
                    IDENTITY_TOL,
                ));
                out.push(Check::new("elimination_residual", elimination_residual(d, traj)?, LAW_TOL));
                let reference = solve_se3(d, &cfg.jet0, cfg.span, &tight())?;
                out.push(Check::new("self_oracle", state_gap(traj, &reference)?, SELF_ORACLE_TOL));
            }
        }
        _ => unreachable!("derivation and run share the group"),
    }
    Ok(out)
}
