//! Effective settings: command-line flags over config file over defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use fairdg::sweep::{Grid, GridAxis, NormSelection, DEFAULT_THRESHOLD};
use fairdg::{ModelParams, Scenario};

#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// benchmark, dictator-opt-out or recipient-opt-out
    #[arg(long)]
    pub scenario: Option<String>,
    /// Population size
    #[arg(long)]
    pub z: Option<usize>,
    /// Execution error rate
    #[arg(long)]
    pub eps: Option<f64>,
    /// Selection intensity
    #[arg(long)]
    pub beta: Option<f64>,
    /// Share offered by an unfair split
    #[arg(long)]
    pub p: Option<f64>,
    /// Payoff of both players when the dictator opts out
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Dictator opt-out probability
    #[arg(long)]
    pub p1: Option<f64>,
    /// Recipient opt-out probability
    #[arg(long)]
    pub p2: Option<f64>,
    /// Mutation probability
    #[arg(long)]
    pub mu: Option<f64>,
    /// `all`, a pattern like `[1,0,*,*;*,1,*,1]`, or a list of labels/matrices
    #[arg(long)]
    pub norms: Option<String>,
    /// `start:step:end` or a comma-separated list
    #[arg(long)]
    pub grid: Option<String>,
    /// Parameter the grid runs over (p1, p2 or beta); defaults to the scenario's
    #[arg(long)]
    pub axis: Option<String>,
    /// Fairness level above which a norm is flagged
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output path (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (all cores when absent)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seed for simulations
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with any of the above keys
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<String>,
    z: Option<usize>,
    eps: Option<f64>,
    beta: Option<f64>,
    p: Option<f64>,
    sigma: Option<f64>,
    p1: Option<f64>,
    p2: Option<f64>,
    mu: Option<f64>,
    norms: Option<String>,
    grid: Option<String>,
    axis: Option<String>,
    threshold: Option<f64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    seed: Option<u64>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub scenario: Scenario,
    pub params: ModelParams,
    pub norms: NormSelection,
    pub grid: Option<Grid>,
    pub axis: GridAxis,
    pub threshold: f64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: u64,
}

pub struct Defaults {
    pub z: usize,
    pub norms: &'static str,
}

impl Settings {
    pub fn resolve(args: &CommonArgs, defaults: Defaults) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        macro_rules! pick {
            ($field:ident, $default:expr) => {
                args.$field.clone().or(file.$field.clone()).unwrap_or($default)
            };
        }

        let base = ModelParams::default();
        let params = ModelParams {
            z: pick!(z, defaults.z),
            eps: pick!(eps, base.eps),
            p: pick!(p, base.p),
            beta: pick!(beta, base.beta),
            mu: pick!(mu, base.mu),
        };
        params.validate()?;

        let scenario = match pick!(scenario, "benchmark".to_owned()).as_str() {
            "benchmark" => Scenario::Benchmark,
            "dictator-opt-out" => Scenario::DictatorOptOut {
                p1: pick!(p1, 0.5),
                sigma: pick!(sigma, 0.1),
            },
            "recipient-opt-out" => Scenario::RecipientOptOut { p2: pick!(p2, 0.5) },
            other => bail!(fairdg::ParseError::Scenario(other.to_owned())),
        };
        scenario.validate()?;

        let norms: NormSelection = pick!(norms, defaults.norms.to_owned()).parse()?;
        let grid = match args.grid.clone().or(file.grid.clone()) {
            Some(g) => Some(g.parse::<Grid>()?),
            None => None,
        };
        let axis = match args.axis.clone().or(file.axis.clone()).as_deref() {
            None => GridAxis::for_scenario(&scenario),
            Some("p1") => GridAxis::P1,
            Some("p2") => GridAxis::P2,
            Some("beta") => GridAxis::Beta,
            Some(other) => bail!("unknown grid axis {other:?}: expected p1, p2 or beta"),
        };
        let threshold = pick!(threshold, DEFAULT_THRESHOLD);
        if !threshold.is_finite() {
            bail!("threshold must be finite");
        }
        let workers = args.workers.or(file.workers);
        if workers == Some(0) {
            bail!("--workers must be at least 1");
        }

        Ok(Settings {
            scenario,
            params,
            norms,
            grid,
            axis,
            threshold,
            out: args.out.clone().or(file.out),
            workers,
            seed: pick!(seed, 1),
        })
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers {
            b = b.num_threads(n);
        }
        Ok(b.build()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Defaults {
        Defaults { z: 50, norms: "all" }
    }

    #[test]
    fn defaults_apply() {
        let s = Settings::resolve(&CommonArgs::default(), defaults()).unwrap();
        assert_eq!(s.params, ModelParams::default());
        assert_eq!(s.scenario, Scenario::Benchmark);
        assert_eq!(s.threshold, 0.55);
        assert_eq!(s.norms, NormSelection::All);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "scenario = \"dictator-opt-out\"\nz = 20\np1 = 0.3\nbeta = 2.0\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            z: Some(12),
            ..CommonArgs::default()
        };
        let s = Settings::resolve(&args, defaults()).unwrap();
        assert_eq!(s.params.z, 12);
        assert_eq!(s.params.beta, 2.0);
        assert_eq!(s.scenario, Scenario::DictatorOptOut { p1: 0.3, sigma: 0.1 });
        assert_eq!(s.axis, GridAxis::P1);
    }

    #[test]
    fn bad_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "zz = 3\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        assert!(Settings::resolve(&args, defaults()).is_err());
        let args = CommonArgs {
            eps: Some(1.5),
            ..CommonArgs::default()
        };
        assert!(Settings::resolve(&args, defaults()).is_err());
        let args = CommonArgs {
            scenario: Some("nope".into()),
            ..CommonArgs::default()
        };
        assert!(Settings::resolve(&args, defaults()).is_err());
    }
}
