use thiserror::Error;

use crate::expr::EvalError;
use crate::geometry::GeometryError;
use crate::ode::OdeError;
use crate::system::SystemError;

/// Errors of the SE(2) and SE(3) pipelines.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("tau is not allowed in an SE(2) Lagrangian")]
    TauNotAllowed,
    #[error("c1^2 + c2^2 = {value:e} is too small for the linear reconstruction")]
    DegenerateConstants { value: f64 },
    #[error("|c1| = {norm:e} is too small to canonicalize")]
    DegenerateC1 { norm: f64 },
    #[error("upsilon_1 vanishes at s = {s}")]
    UpsilonOneVanishes { s: f64 },
    #[error("r^2 = {value:e} is not positive at s = {s}")]
    NegativeRadiusSquared { s: f64, value: f64 },
    #[error("curvature {kappa:e} below the floor at s = {s}")]
    CurvatureCollapse { s: f64, kappa: f64 },
    #[error(transparent)]
    System(SystemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

impl From<SystemError> for SolverError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::CurvatureCollapse { s, kappa } => SolverError::CurvatureCollapse { s, kappa },
            SystemError::Eval(e) => SolverError::Eval(e),
            SystemError::Ode(e) => SolverError::Ode(e),
            other => SolverError::System(other),
        }
    }
}

impl SolverError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            SolverError::TauNotAllowed => "TauNotAllowed",
            SolverError::DegenerateConstants { .. } => "DegenerateConstants",
            SolverError::DegenerateC1 { .. } => "DegenerateC1",
            SolverError::UpsilonOneVanishes { .. } => "UpsilonOneVanishes",
            SolverError::NegativeRadiusSquared { .. } => "NegativeRadiusSquared",
            SolverError::CurvatureCollapse { .. } => "CurvatureCollapse",
            SolverError::System(e) => match e {
                SystemError::NullLagrangian => "NullLagrangian",
                SystemError::Underdetermined { .. } => "Underdetermined",
                SystemError::DegenerateLeadingCoefficient { .. } => "DegenerateLeadingCoefficient",
                SystemError::SingularHighestDerivativeSystem { .. } => {
                    "SingularHighestDerivativeSystem"
                }
                SystemError::CurvatureCollapse { .. } => "CurvatureCollapse",
                SystemError::ProlongationTooDeep { .. } => "ProlongationTooDeep",
                SystemError::Eval(_) => "EvalError",
                SystemError::Ode(_) => "OdeError",
            },
            SolverError::Geometry(e) => match e {
                GeometryError::DegenerateTangent => "DegenerateTangent",
                GeometryError::DegenerateCurvature { .. } => "DegenerateCurvature",
                GeometryError::UndefinedTorsion { .. } => "UndefinedTorsion",
                GeometryError::NotArcLength { .. } => "NotArcLength",
            },
            SolverError::Eval(e) => match e {
                EvalError::MissingJetOrder { .. } => "MissingJetOrder",
                EvalError::DivisionByZero { .. } => "DivisionByZero",
            },
            SolverError::Ode(e) => match e {
                OdeError::StepUnderflow { .. } => "StiffnessFailure",
                OdeError::MaxStepsExceeded { .. } => "MaxStepsExceeded",
                OdeError::InvalidSpan { .. } => "InvalidSpan",
                OdeError::InvalidTolerance => "InvalidTolerance",
                OdeError::RhsFailure { .. } => "RhsFailure",
                OdeError::OutOfSpan { .. } => "OutOfSpan",
            },
        }
    }
}
