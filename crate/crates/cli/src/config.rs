//! Encoder configuration: defaults, flat `key = value` config files, and
//! flag overrides (flags win).

use gssp_core::cluster::ClusterParams;
use gssp_core::container::LayerPlan;
use gssp_core::patch::PruneSpec;
use gssp_core::refine::RefineParams;
use gssp_core::{Error, Result};
use std::fmt::Write as _;

/// Full pipeline configuration. `eps_spatial` is optional: when unset it is
/// derived from the scene as 0.005 x bbox diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub eps_spatial: Option<f64>,
    pub eps_direction: f64,
    pub eps_color: f64,
    pub min_samples: usize,
    pub tau_max: f64,
    pub beta: f64,
    pub s_min: usize,
    pub t_max: usize,
    pub downsample: u64,
    pub fractions: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let cluster = ClusterParams::default();
        let refine = RefineParams::default();
        Config {
            seed: 0,
            eps_spatial: None,
            eps_direction: cluster.eps_direction,
            eps_color: cluster.eps_color,
            min_samples: cluster.min_samples,
            tau_max: refine.tau_max,
            beta: refine.beta,
            s_min: refine.s_min,
            t_max: refine.t_max,
            downsample: 1,
            fractions: LayerPlan::default().fractions,
        }
    }
}

pub fn parse_fractions(text: &str) -> Result<Vec<f64>> {
    let fractions: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("invalid fraction '{t}'")))
        })
        .collect::<Result<_>>()?;
    let plan = LayerPlan {
        fractions: fractions.clone(),
    };
    plan.validate()?;
    Ok(fractions)
}

impl Config {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Input(format!("invalid {what} value '{value}'"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "eps_spatial" => {
                self.eps_spatial = Some(value.parse().map_err(|_| bad("eps_spatial"))?)
            }
            "eps_direction" => {
                self.eps_direction = value.parse().map_err(|_| bad("eps_direction"))?
            }
            "eps_color" => self.eps_color = value.parse().map_err(|_| bad("eps_color"))?,
            "min_samples" => self.min_samples = value.parse().map_err(|_| bad("min_samples"))?,
            "tau_max" => self.tau_max = value.parse().map_err(|_| bad("tau_max"))?,
            "beta" => self.beta = value.parse().map_err(|_| bad("beta"))?,
            "s_min" => self.s_min = value.parse().map_err(|_| bad("s_min"))?,
            "t_max" => self.t_max = value.parse().map_err(|_| bad("t_max"))?,
            "downsample" => {
                self.downsample = value.parse().map_err(|_| bad("downsample"))?;
                if self.downsample < 1 {
                    return Err(Error::Input("downsample must be >= 1".into()));
                }
            }
            "fractions" => self.fractions = parse_fractions(value)?,
            other => return Err(Error::Input(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a flat config file: one `key = value` per line, `#` comments.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Input(format!(
                    "config line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Canonical flat-text form, embedded in containers for provenance.
    pub fn to_provenance_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(eps) = self.eps_spatial {
            let _ = writeln!(out, "eps_spatial = {eps}");
        }
        let _ = writeln!(out, "eps_direction = {}", self.eps_direction);
        let _ = writeln!(out, "eps_color = {}", self.eps_color);
        let _ = writeln!(out, "min_samples = {}", self.min_samples);
        let _ = writeln!(out, "tau_max = {}", self.tau_max);
        let _ = writeln!(out, "beta = {}", self.beta);
        let _ = writeln!(out, "s_min = {}", self.s_min);
        let _ = writeln!(out, "t_max = {}", self.t_max);
        let _ = writeln!(out, "downsample = {}", self.downsample);
        let fractions: Vec<String> = self.fractions.iter().map(|f| f.to_string()).collect();
        let _ = writeln!(out, "fractions = {}", fractions.join(","));
        out
    }

    pub fn cluster_params(&self, bbox_diagonal: f64) -> ClusterParams {
        ClusterParams {
            eps_spatial: self
                .eps_spatial
                .unwrap_or_else(|| ClusterParams::scaled(bbox_diagonal).eps_spatial),
            eps_direction: self.eps_direction,
            eps_color: self.eps_color,
            min_samples: self.min_samples,
        }
    }

    /// Stage seeds are derived from the global seed by fixed offsets so each
    /// stage is independently reproducible.
    pub fn refine_params(&self) -> RefineParams {
        RefineParams {
            tau_max: self.tau_max,
            beta: self.beta,
            s_min: self.s_min,
            t_max: self.t_max,
            kmeans_seed: self.seed.wrapping_add(2),
        }
    }

    pub fn prune_spec(&self) -> PruneSpec {
        PruneSpec {
            downsample_factor: self.downsample,
            seed: self.seed.wrapping_add(1),
        }
    }

    pub fn codebook_seed(&self) -> u64 {
        self.seed.wrapping_add(3)
    }

    pub fn layer_plan(&self) -> LayerPlan {
        LayerPlan {
            fractions: self.fractions.clone(),
        }
    }
}
