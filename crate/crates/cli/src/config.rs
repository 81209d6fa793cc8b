//! Run configuration: a JSON file (or a previous manifest) overlaid by
//! command-line flags, then resolved to concrete values.

use std::path::{Path, PathBuf};

use kac_core::fourier::SolverConfig;
use kac_core::simulate::{DEFAULT_CHUNK_SIZE, DEFAULT_NU_CAP};
use kac_core::stats::DEFAULT_BERRY_ESSEEN_C1;
use kac_core::{Error, InitialLaw, Result, Theorem2Params};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "KAC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Wild,
    Ode,
    Both,
}

/// Every knob of every command. Fields a command does not use stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub law: Option<String>,
    pub t: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    pub nu_cap: Option<u64>,
    pub chunk_size: Option<usize>,
    pub format: Option<SampleFormat>,
    pub method: Option<SolveMethod>,
    pub xi_max: Option<f64>,
    pub n_points: Option<usize>,
    pub theta_nodes: Option<usize>,
    pub step: Option<f64>,
    pub wild_terms: Option<usize>,
    pub a: Option<f64>,
    pub p: Option<f64>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
    pub c_delta: Option<f64>,
    pub x: Option<f64>,
    pub sigma: Option<f64>,
    pub n: Option<usize>,
    pub samples: Option<usize>,
    pub quick: Option<bool>,
    pub svg: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub name: Option<String>,
}

#[derive(Deserialize)]
struct ManifestShape {
    config: RunConfig,
}

macro_rules! overlay_fields {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Reads a bare config or the `config` member of a manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("config").is_some() {
            Ok(serde_json::from_value::<ManifestShape>(value)?.config)
        } else {
            Ok(serde_json::from_value(value)?)
        }
    }

    /// Fields set in `flags` win.
    pub fn overlay(&mut self, flags: &RunConfig) {
        overlay_fields!(self, flags;
            command, law, t, t_grid, size, seed, nu_cap, chunk_size, format, method,
            xi_max, n_points, theta_nodes, step, wild_terms, a, p, c, delta, c_delta,
            x, sigma, n, samples, quick, svg, output_dir, name);
    }

    pub fn require_law(&self) -> Result<InitialLaw> {
        self.law
            .as_deref()
            .ok_or_else(|| Error::Argument("--law is required".into()))?
            .parse()
    }

    pub fn require_t(&self) -> Result<f64> {
        self.t
            .ok_or_else(|| Error::Argument("--t is required".into()))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Argument("--seed is required for simulation commands".into()))
    }

    pub fn require_size(&self) -> Result<usize> {
        self.size
            .ok_or_else(|| Error::Argument("--size is required".into()))
    }

    pub fn t_grid(&self) -> Result<Vec<f64>> {
        match (&self.t_grid, self.t) {
            (Some(g), _) => Ok(g.clone()),
            (None, Some(t)) => Ok(vec![t]),
            (None, None) => Err(Error::Argument("--t-grid or --t is required".into())),
        }
    }

    pub fn fill_simulation_defaults(&mut self) {
        self.nu_cap.get_or_insert(DEFAULT_NU_CAP);
        self.chunk_size.get_or_insert(DEFAULT_CHUNK_SIZE);
    }

    /// Solver settings with defaults written back, so the manifest is complete.
    pub fn solver(&mut self, law: &InitialLaw) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let mut cfg = SolverConfig {
            xi_max: self.xi_max,
            n_points: *self.n_points.get_or_insert(d.n_points),
            theta_nodes: *self.theta_nodes.get_or_insert(d.theta_nodes),
            step: *self.step.get_or_insert(d.step),
            wild_terms: *self.wild_terms.get_or_insert(d.wild_terms),
        };
        let xi_max = cfg.resolve_xi_max(law)?;
        cfg.xi_max = Some(xi_max);
        self.xi_max = Some(xi_max);
        Ok(cfg)
    }

    /// Bound parameters, validated here so bad values fail at parse time.
    pub fn theorem2_params(&mut self) -> Result<Theorem2Params> {
        let d = Theorem2Params::default();
        let params = Theorem2Params::new(
            *self.a.get_or_insert(d.a()),
            *self.p.get_or_insert(d.p()),
            *self.c.get_or_insert(d.c()),
        )?;
        let delta = *self.delta.get_or_insert(1.0);
        self.c_delta.get_or_insert(DEFAULT_BERRY_ESSEEN_C1);
        params.with_delta(delta)
    }

    pub fn output_dir(&mut self) -> PathBuf {
        self.output_dir
            .get_or_insert_with(|| {
                std::env::var_os(OUTPUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            })
            .clone()
    }

    pub fn name(&mut self, default: &str) -> String {
        self.name.get_or_insert_with(|| default.to_string()).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let mut base = RunConfig {
            law: Some("gaussian".into()),
            size: Some(10),
            ..Default::default()
        };
        let flags = RunConfig {
            size: Some(20),
            seed: Some(3),
            ..Default::default()
        };
        base.overlay(&flags);
        assert_eq!(base.law.as_deref(), Some("gaussian"));
        assert_eq!(base.size, Some(20));
        assert_eq!(base.seed, Some(3));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"lawz":"x"}"#).is_err());
    }

    #[test]
    fn invalid_theorem2_params_fail_early() {
        let mut cfg = RunConfig {
            c: Some(10.0),
            ..Default::default()
        };
        assert!(cfg.theorem2_params().is_err());
    }
}
