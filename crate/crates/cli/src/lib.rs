//! The `pgt` command-line tool.

pub mod commands;
pub mod config;
pub mod heatmap;
pub mod report;
pub mod suites;

use clap::{Parser, Subcommand};

pub use config::Settings;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] pgt_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "pgt", version, about = "Projective and conformal structures on the flat torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run verification suites and report each invariant.
    Verify(Settings),
    /// Energy of a projective structure relative to a conformal structure.
    Energy(Settings),
    /// Hopf coefficient and descent direction.
    Extremality(Settings),
    /// Solve Wang's equation for a cubic differential.
    Wang(Settings),
    /// Build the constant-coefficient convex structure and its Blaschke class.
    Titeica(Settings),
    /// Descend the energy over conformal structures.
    Flow(Settings),
    /// Liouville curvature and the flatness verdict.
    Flatness(Settings),
    /// Integral identities on the torus.
    GaussBonnet(Settings),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Energy(_) => "energy",
            Command::Extremality(_) => "extremality",
            Command::Wang(_) => "wang",
            Command::Titeica(_) => "titeica",
            Command::Flow(_) => "flow",
            Command::Flatness(_) => "flatness",
            Command::GaussBonnet(_) => "gauss-bonnet",
        }
    }

    pub fn settings(&self) -> &Settings {
        match self {
            Command::Verify(s)
            | Command::Energy(s)
            | Command::Extremality(s)
            | Command::Wang(s)
            | Command::Titeica(s)
            | Command::Flow(s)
            | Command::Flatness(s)
            | Command::GaussBonnet(s) => s,
        }
    }
}

/// Result of a run: the JSON report and the process exit code.
pub struct RunOutput {
    pub stdout: String,
    pub stderr: String,
    pub code: u8,
}

fn dispatch(name: &str, s: &Settings) -> Result<commands::Outcome, CliError> {
    match name {
        "verify" => commands::verify(s),
        "energy" => commands::energy_cmd(s),
        "extremality" => commands::extremality(s),
        "wang" => commands::wang(s),
        "titeica" => commands::titeica_cmd(s),
        "flow" => commands::flow(s),
        "flatness" => commands::flatness(s),
        "gauss-bonnet" => commands::gauss_bonnet(s),
        _ => unreachable!("clap only yields known commands"),
    }
}

/// Exit 0 on success, 1 when a check fails, 2 on usage, domain or
/// parse errors.
pub fn run(cli: &Cli) -> RunOutput {
    let name = cli.command.name();
    let result = cli.command.settings().clone().resolve().and_then(|s| {
        let threads = s.threads()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(name, &s))
    });
    match result {
        Ok(out) => {
            let stdout = report::to_string(&report::envelope(name, out.body)) + "\n";
            match out.failure {
                Some(what) => RunOutput {
                    stdout,
                    stderr: format!("verification failed: {what}\n"),
                    code: 1,
                },
                None => RunOutput {
                    stdout,
                    stderr: String::new(),
                    code: 0,
                },
            }
        }
        Err(e) => RunOutput {
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
            code: 2,
        },
    }
}
