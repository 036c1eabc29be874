//! Run configuration: a flat `key = value` file overlaid by command-line
//! flags. Every key is spelled exactly like its flag without the dashes
//! prefix (`s-max = 20` ⇔ `--s-max 20`); underscores are accepted too.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::Vector3;

use moving_frames::expr::{parse, Expr, Family, InvariantJet};
use moving_frames::geometry::{Pose2, Pose3};
use moving_frames::ode::OdeOptions;
use moving_frames::se2::ReconstructOptions;

use crate::CliError;

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Opts {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// se2 or se3.
    #[arg(long)]
    pub group: Option<String>,
    /// Lagrangian in kappa, kappa_s, ..., tau, tau_s, ...
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub lagrangian: Option<String>,
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    pub kappa0: Option<String>,
    #[arg(long = "kappa-s0", value_name = "X", allow_hyphen_values = true)]
    pub kappa_s0: Option<String>,
    #[arg(long = "kappa-ss0", value_name = "X", allow_hyphen_values = true)]
    pub kappa_ss0: Option<String>,
    #[arg(long = "kappa-sss0", value_name = "X", allow_hyphen_values = true)]
    pub kappa_sss0: Option<String>,
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    pub tau0: Option<String>,
    #[arg(long = "tau-s0", value_name = "X", allow_hyphen_values = true)]
    pub tau_s0: Option<String>,
    #[arg(long = "tau-ss0", value_name = "X", allow_hyphen_values = true)]
    pub tau_ss0: Option<String>,
    /// Initial position.
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, value_name = "Y", allow_hyphen_values = true)]
    pub y0: Option<String>,
    /// se3 only.
    #[arg(long, value_name = "Z", allow_hyphen_values = true)]
    pub z0: Option<String>,
    /// Initial tangent angle (se2 only).
    #[arg(long, value_name = "RAD", allow_hyphen_values = true)]
    pub theta0: Option<String>,
    /// Initial tangent `tx,ty,tz` (se3 only).
    #[arg(long, value_name = "T", allow_hyphen_values = true)]
    pub tangent0: Option<String>,
    /// Initial normal direction `nx,ny,nz` (se3 only); orthogonalized against the tangent.
    #[arg(long, value_name = "N", allow_hyphen_values = true)]
    pub normal0: Option<String>,
    #[arg(long, value_name = "S", allow_hyphen_values = true)]
    pub s0: Option<String>,
    #[arg(long = "s-max", value_name = "S", allow_hyphen_values = true)]
    pub s_max: Option<String>,
    #[arg(long = "rel-tol", value_name = "TOL")]
    pub rel_tol: Option<String>,
    #[arg(long = "abs-tol", value_name = "TOL")]
    pub abs_tol: Option<String>,
    /// Uniform output samples instead of solver knots.
    #[arg(long, value_name = "N")]
    pub samples: Option<String>,
    /// Integrate the Frenet equations when the constants degenerate (true/false).
    #[arg(long = "frenet-fallback", value_name = "BOOL")]
    pub frenet_fallback: Option<String>,
    /// Trajectory CSV (solve) or report (derive); stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<String>,
    /// JSON diagnostics file.
    #[arg(long = "diag-out", value_name = "FILE")]
    pub diag_out: Option<String>,
    /// Significant digits of CSV floats.
    #[arg(long, value_name = "DIGITS")]
    pub precision: Option<String>,
    /// Report format of derive: text or json.
    #[arg(long, value_name = "FMT")]
    pub format: Option<String>,
}

const KEYS: &[&str] = &[
    "group",
    "lagrangian",
    "kappa0",
    "kappa-s0",
    "kappa-ss0",
    "kappa-sss0",
    "tau0",
    "tau-s0",
    "tau-ss0",
    "x0",
    "y0",
    "z0",
    "theta0",
    "tangent0",
    "normal0",
    "s0",
    "s-max",
    "rel-tol",
    "abs-tol",
    "samples",
    "frenet-fallback",
    "out",
    "diag-out",
    "precision",
    "format",
];

impl Opts {
    fn flag_values(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("group", &self.group),
            ("lagrangian", &self.lagrangian),
            ("kappa0", &self.kappa0),
            ("kappa-s0", &self.kappa_s0),
            ("kappa-ss0", &self.kappa_ss0),
            ("kappa-sss0", &self.kappa_sss0),
            ("tau0", &self.tau0),
            ("tau-s0", &self.tau_s0),
            ("tau-ss0", &self.tau_ss0),
            ("x0", &self.x0),
            ("y0", &self.y0),
            ("z0", &self.z0),
            ("theta0", &self.theta0),
            ("tangent0", &self.tangent0),
            ("normal0", &self.normal0),
            ("s0", &self.s0),
            ("s-max", &self.s_max),
            ("rel-tol", &self.rel_tol),
            ("abs-tol", &self.abs_tol),
            ("samples", &self.samples),
            ("frenet-fallback", &self.frenet_fallback),
            ("out", &self.out),
            ("diag-out", &self.diag_out),
            ("precision", &self.precision),
            ("format", &self.format),
        ]
    }

    /// The file's entries overlaid by the flags that were given.
    pub fn merged(&self) -> Result<BTreeMap<String, String>, CliError> {
        let mut map = match &self.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        for (k, v) in self.flag_values() {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        Ok(map)
    }
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let ini = ini::Ini::load_from_file(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (section, props) in ini.iter() {
        if let Some(name) = section {
            return Err(CliError::Config(format!("sections are not supported: [{name}]")));
        }
        for (k, v) in props.iter() {
            let key = k.trim().to_ascii_lowercase().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown key `{k}` in {}", path.display())));
            }
            map.insert(key, v.trim().to_string());
        }
    }
    Ok(map)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Se2,
    Se3,
}

impl Group {
    pub fn name(self) -> &'static str {
        match self {
            Group::Se2 => "se2",
            Group::Se3 => "se3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Debug)]
pub enum Pose {
    Planar(Pose2),
    Spatial(Pose3),
}

/// A validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub group: Group,
    pub lagrangian: Expr,
    pub jet0: InvariantJet,
    pub pose: Pose,
    pub span: (f64, f64),
    pub ode: OdeOptions,
    pub recon: ReconstructOptions,
    pub out: Option<PathBuf>,
    pub diag_out: Option<PathBuf>,
    pub precision: usize,
    pub format: Format,
}

fn num(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::Config(format!("{key}: `{v}` is not a finite number"))),
    }
}

fn vec3(map: &BTreeMap<String, String>, key: &str, default: Vector3<f64>) -> Result<Vector3<f64>, CliError> {
    let Some(v) = map.get(key) else {
        return Ok(default);
    };
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("{key}: `{v}` is not three comma-separated numbers")))?;
    if parts.len() != 3 || parts.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config(format!("{key}: `{v}` is not three comma-separated numbers")));
    }
    Ok(Vector3::new(parts[0], parts[1], parts[2]))
}

/// Initial derivatives; omitted orders are zero.
fn orders(map: &BTreeMap<String, String>, keys: &[&str], first_default: f64) -> Result<Vec<f64>, CliError> {
    let mut v = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        v.push(num(map, k, if i == 0 { first_default } else { 0.0 })?);
    }
    Ok(v)
}

impl RunConfig {
    pub fn from_opts(opts: &Opts) -> Result<Self, CliError> {
        Self::from_map(&opts.merged()?)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let group = match map.get("group").map(|s| s.to_ascii_lowercase()).as_deref() {
            None | Some("se2") => Group::Se2,
            Some("se3") => Group::Se3,
            Some(g) => return Err(CliError::Config(format!("group must be se2 or se3, got `{g}`"))),
        };
        let text = map.get("lagrangian").map(String::as_str).unwrap_or("kappa^2");
        let lagrangian = parse(text).map_err(|e| CliError::Config(format!("lagrangian: {e}")))?;

        let forbidden: &[&str] = match group {
            Group::Se2 => &["tau0", "tau-s0", "tau-ss0", "z0", "tangent0", "normal0"],
            Group::Se3 => &["theta0"],
        };
        if let Some(k) = forbidden.iter().find(|k| map.contains_key(**k)) {
            return Err(CliError::Config(format!("`{k}` is not valid for group {}", group.name())));
        }
        if group == Group::Se2 && lagrangian.contains_family(Family::Tau) {
            return Err(CliError::Config("tau is not allowed in an se2 Lagrangian".into()));
        }

        let kappa = orders(map, &["kappa0", "kappa-s0", "kappa-ss0", "kappa-sss0"], 1.0)?;
        let tau = match group {
            Group::Se2 => Vec::new(),
            Group::Se3 => orders(map, &["tau0", "tau-s0", "tau-ss0"], 0.0)?,
        };
        let s0 = num(map, "s0", 0.0)?;
        let s1 = num(map, "s-max", 20.0)?;
        if !(s1 > s0) {
            return Err(CliError::Config(format!("s-max ({s1}) must exceed s0 ({s0})")));
        }
        let jet0 = InvariantJet::new(kappa, tau, s0);

        let (x, y) = (num(map, "x0", 0.0)?, num(map, "y0", 0.0)?);
        let pose = match group {
            Group::Se2 => Pose::Planar(Pose2::new(x, y, num(map, "theta0", 0.0)?)),
            Group::Se3 => {
                let p = Vector3::new(x, y, num(map, "z0", 0.0)?);
                let t = vec3(map, "tangent0", Vector3::x())?;
                let n = vec3(map, "normal0", Vector3::y())?;
                Pose::Spatial(Pose3::from_tangent_normal(p, t, n).ok_or_else(|| {
                    CliError::Config("tangent0 must be nonzero and normal0 not parallel to it".into())
                })?)
            }
        };

        let defaults = OdeOptions::default();
        let ode = OdeOptions {
            rel_tol: num(map, "rel-tol", defaults.rel_tol)?,
            abs_tol: num(map, "abs-tol", defaults.abs_tol)?,
            ..defaults
        };
        if !(ode.rel_tol > 0.0 && ode.abs_tol > 0.0) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        let uniform = match map.get("samples") {
            None => None,
            Some(v) => match v.parse::<usize>() {
                Ok(n) if n >= 2 => Some(n),
                _ => return Err(CliError::Config(format!("samples: `{v}` is not an integer ≥ 2"))),
            },
        };
        let frenet_fallback = match map.get("frenet-fallback").map(|s| s.to_ascii_lowercase()).as_deref() {
            None | Some("true") | Some("1") | Some("yes") => true,
            Some("false") | Some("0") | Some("no") => false,
            Some(v) => return Err(CliError::Config(format!("frenet-fallback: `{v}` is not a boolean"))),
        };
        let precision = match map.get("precision") {
            None => 17,
            Some(v) => match v.parse::<usize>() {
                Ok(p) if (1..=17).contains(&p) => p,
                _ => return Err(CliError::Config(format!("precision: `{v}` is not in 1..=17"))),
            },
        };
        let format = match map.get("format").map(|s| s.to_ascii_lowercase()).as_deref() {
            None | Some("text") => Format::Text,
            Some("json") => Format::Json,
            Some(v) => return Err(CliError::Config(format!("format: `{v}` is not text or json"))),
        };
        Ok(RunConfig {
            group,
            lagrangian,
            jet0,
            pose,
            span: (s0, s1),
            ode,
            recon: ReconstructOptions {
                uniform,
                frenet_fallback,
                ode,
            },
            out: map.get("out").map(PathBuf::from),
            diag_out: map.get("diag-out").map(PathBuf::from),
            precision,
            format,
        })
    }
}
