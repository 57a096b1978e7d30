//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use num_complex::Complex64;
use serde::Deserialize;

use crate::CliError;

/// Every knob any command accepts. Flags and config-file keys share names
/// (`tau-re` on the command line, `tau_re` in JSON).
#[derive(Args, Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// JSON file supplying defaults for any flag below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Grid resolution (even, at least 8).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau_re: Option<f64>,
    #[arg(long)]
    pub tau_im: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads; falls back to `PGT_THREADS`, then 1.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Verification suite name or `all`.
    #[arg(long)]
    pub suite: Option<String>,
    /// Projective structure (PGFB connection).
    #[arg(long)]
    pub p: Option<PathBuf>,
    /// Conformal structure (PGFB metric; rescaled to unit determinant).
    #[arg(long)]
    pub m: Option<PathBuf>,
    /// Starting conformal structure for `flow`.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_p: Option<PathBuf>,
    #[arg(long)]
    pub out_m: Option<PathBuf>,
    /// Trajectory CSV for `flow`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Prefix for `<prefix>.csv` and `<prefix>.ppm` heatmaps.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    /// Directory receiving the frame scalars as PGFB plus a JSON sidecar.
    #[arg(long)]
    pub scalars_dir: Option<PathBuf>,
    /// Real cubic coefficient; shorthand for `--c-re` with `--c-im 0`.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c_im: Option<f64>,
    /// Nonconstant cubic coefficient (PGFB complex scalar) for `wang`.
    #[arg(long)]
    pub c_field: Option<PathBuf>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol_q: Option<f64>,
    /// Sobolev smoothing length of the descent direction (0 for plain L²).
    #[arg(long)]
    pub sobolev: Option<f64>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Settings { $($f: $hi.$f.clone().or_else(|| $lo.$f.clone()),)* }
    };
}

impl Settings {
    /// Fields set in `self` win over `base`.
    pub fn overlay(&self, base: &Settings) -> Settings {
        overlay!(
            self, base, config, n, tau_re, tau_im, seed, tol, threads, suite, p, m, init, out,
            out_p, out_m, trace, heatmap, scalars_dir, c, c_re, c_im, c_field, step, max_iter,
            tol_q, sobolev
        )
    }

    pub fn from_json(text: &str) -> Result<Settings, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// Load the `--config` file, if any, under the flags.
    pub fn resolve(self) -> Result<Settings, CliError> {
        match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
                Ok(self.overlay(&Settings::from_json(&text)?))
            }
            None => Ok(self),
        }
    }

    pub fn n_or(&self, default: usize) -> Result<usize, CliError> {
        let n = self.n.unwrap_or(default);
        if n < 8 || n % 2 != 0 {
            return Err(CliError::Usage(format!("--n must be even and at least 8, got {n}")));
        }
        Ok(n)
    }

    pub fn tau(&self) -> Result<Complex64, CliError> {
        let tau = Complex64::new(self.tau_re.unwrap_or(0.0), self.tau_im.unwrap_or(1.0));
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(CliError::Usage(format!("tau must have positive imaginary part, got {tau}")));
        }
        Ok(tau)
    }

    pub fn tol_or(&self, default: f64) -> Result<f64, CliError> {
        let tol = self.tol.unwrap_or(default);
        if !(tol > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
        }
        Ok(tol)
    }

    pub fn threads(&self) -> Result<usize, CliError> {
        let k = match self.threads {
            Some(k) => k,
            None => match std::env::var("PGT_THREADS") {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("PGT_THREADS is not a count: {v}")))?,
                Err(_) => 1,
            },
        };
        if k == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        Ok(k)
    }

    /// Cubic coefficient from `--c` or `--c-re/--c-im`.
    pub fn cubic(&self) -> Result<Complex64, CliError> {
        match (self.c, self.c_re, self.c_im) {
            (Some(_), Some(_), _) => Err(CliError::Usage("give --c or --c-re, not both".into())),
            (Some(c), None, im) => Ok(Complex64::new(c, im.unwrap_or(0.0))),
            (None, re, im) => Ok(Complex64::new(re.unwrap_or(0.0), im.unwrap_or(0.0))),
        }
    }
}

/// `Some(path)` or a usage error naming the flag.
pub fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings::from_json(r#"{"n": 16, "seed": 3, "tau_im": 2.0}"#).unwrap();
        let flags = Settings {
            n: Some(32),
            ..Default::default()
        };
        let s = flags.overlay(&file);
        assert_eq!(s.n, Some(32));
        assert_eq!(s.seed, Some(3));
        assert_eq!(s.tau().unwrap(), Complex64::new(0.0, 2.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Settings::from_json(r#"{"size": 4}"#), Err(CliError::Usage(_))));
    }

    #[test]
    fn domain_checks() {
        let odd = Settings {
            n: Some(9),
            ..Default::default()
        };
        assert!(odd.n_or(32).is_err());
        let flat = Settings {
            tau_im: Some(0.0),
            ..Default::default()
        };
        assert!(flat.tau().is_err());
        let both = Settings {
            c: Some(1.0),
            c_re: Some(1.0),
            ..Default::default()
        };
        assert!(both.cubic().is_err());
    }
}
