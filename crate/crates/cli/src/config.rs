use anyhow::{bail, Context, Result};
use bellhd_core::convex::Tolerances;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Settings readable from `--config`. Every field is optional; flags win.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub tol_lp: Option<f64>,
    pub tol_sdp: Option<f64>,
    pub threads: Option<usize>,
    pub restarts: Option<usize>,
    pub trials: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Resolved run settings, embedded in every manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub tol: Tolerances,
    pub threads: Option<usize>,
    /// See-saw restarts unless a command overrides it.
    pub restarts: usize,
    pub trials: usize,
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub tol_lp: Option<f64>,
    pub tol_sdp: Option<f64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// flags > config file > defaults; CLI_THREADS only fills a missing thread count.
    pub fn resolve(flags: Overrides, file: FileConfig, env_threads: Option<String>) -> Result<Self> {
        let defaults = Tolerances::default();
        let env_threads = match env_threads {
            Some(s) => Some(s.trim().parse::<usize>().with_context(|| format!("CLI_THREADS='{s}' is not a thread count"))?),
            None => None,
        };
        let cfg = RunConfig {
            seed: flags.seed.or(file.seed).unwrap_or(0),
            tol: Tolerances {
                lp: flags.tol_lp.or(file.tol_lp).unwrap_or(defaults.lp),
                sdp: flags.tol_sdp.or(file.tol_sdp).unwrap_or(defaults.sdp),
                ..defaults
            },
            threads: flags.threads.or(file.threads).or(env_threads),
            restarts: file.restarts.unwrap_or(50),
            trials: file.trials.unwrap_or(10_000),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for (name, t) in [("LP", self.tol.lp), ("SDP", self.tol.sdp)] {
            if !(t > 0.0 && t < 1.0) {
                bail!("{name} tolerance {t} must lie in (0,1)");
            }
        }
        if self.threads == Some(0) {
            bail!("thread count must be positive");
        }
        if self.restarts == 0 || self.trials < 2 {
            bail!("need at least one restart and two Monte-Carlo trials");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none() -> Overrides {
        Overrides { seed: None, tol_lp: None, tol_sdp: None, threads: None }
    }

    #[test]
    fn precedence() {
        let file = FileConfig { seed: Some(5), tol_lp: Some(1e-7), threads: Some(2), ..Default::default() };
        let c = RunConfig::resolve(Overrides { seed: Some(9), ..none() }, file.clone(), Some("3".into())).unwrap();
        assert_eq!((c.seed, c.tol.lp, c.threads), (9, 1e-7, Some(2)));
        let c = RunConfig::resolve(none(), FileConfig::default(), Some("3".into())).unwrap();
        assert_eq!((c.seed, c.threads), (0, Some(3)));
        assert!(RunConfig::resolve(none(), FileConfig::default(), Some("x".into())).is_err());
        assert!(RunConfig::resolve(Overrides { tol_sdp: Some(0.0), ..none() }, file, None).is_err());
    }
}
