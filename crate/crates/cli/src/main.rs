use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use mfsolve::{check, derive_entries, derive_json, derive_text, solve, CliError, Format, Opts, RunConfig};

#[derive(Parser)]
#[command(name = "mfsolve", version, about = "Invariant Euler-Lagrange equations and curve reconstruction for SE(2) and SE(3)")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the symbolic Euler-Lagrange equations and conservation laws.
    Derive(Opts),
    /// Integrate and reconstruct; CSV trajectory plus JSON diagnostics.
    Solve(Opts),
    /// Run the invariant checks; exits 3 if any fails.
    Check(Opts),
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn run(cmd: &Cmd) -> Result<ExitCode, CliError> {
    let (Cmd::Derive(opts) | Cmd::Solve(opts) | Cmd::Check(opts)) = cmd;
    let cfg = RunConfig::from_opts(opts)?;
    let diag_out = cfg.diag_out.as_deref();
    match cmd {
        Cmd::Derive(_) => {
            let entries = derive_entries(&cfg)?;
            let text = match cfg.format {
                Format::Text => derive_text(&entries),
                Format::Json => pretty(&derive_json(&entries)),
            };
            emit(&text, cfg.out.as_deref())?;
        }
        Cmd::Solve(_) => match solve(&cfg) {
            Ok(o) => {
                emit(&o.csv, cfg.out.as_deref())?;
                let diag = pretty(&o.diagnostics);
                match diag_out {
                    Some(p) => fs::write(p, diag)?,
                    None => eprint!("{diag}"),
                }
            }
            Err(e) => {
                if let Some(p) = diag_out {
                    fs::write(p, pretty(&e.to_json()))?;
                }
                return Err(e);
            }
        },
        Cmd::Check(_) => {
            let checks = check(&cfg)?;
            let lines: String = checks.iter().map(|c| format!("{}\n", c.to_json())).collect();
            emit(&lines, cfg.out.as_deref())?;
            if let Some(p) = diag_out {
                let all: Vec<Value> = checks.iter().map(|c| c.to_json()).collect();
                fs::write(p, pretty(&Value::Array(all)))?;
            }
            if checks.iter().any(|c| !c.pass) {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
