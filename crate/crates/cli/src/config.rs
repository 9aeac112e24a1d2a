//! TOML run configuration. Every section is optional; missing values fall
//! back to the reference setup (d = 50, gamma^2 = 0.5, p = 0.4, n = 300,
//! margin Unif[0, 4], identity covariance off the signal axis).

use std::path::Path;

use serde::{Deserialize, Serialize};

use retrain_core::bounds::BoundGrid;
use retrain_core::datagen::{MarginDist, NoiseSpec, ProblemSpec};
use retrain_core::experiments::{PhaseConfig, Strategy, SweepGrid, TestMode, DEFAULT_TRIALS};

use crate::manifest::RunManifest;
use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spec: SpecSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub figure1: Figure1Section,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub phase: PhaseSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Give at most one of `gamma` and `gamma_sq`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_sq: Option<f64>,
    /// Isotropic eigenvalue on the complement of `mu`; ignored when
    /// `covariance_spectrum` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance_spectrum: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<MarginDist>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_pos: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Symmetric flip probability.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Randomized-response privacy level; excludes `p`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure1Section {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_axis: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_axis: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_axis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_axis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_axis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<Strategy>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<TestMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_c2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_axis: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_axis: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_axis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_axis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_curve_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_c2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_axis: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_c2: Option<f64>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl Config {
    /// Reads a TOML config, or the configuration echo of a `.json` run
    /// manifest.
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|ext| ext == "json") {
            let manifest: RunManifest = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{} is not a run manifest: {e}", path.display())))?;
            return Ok(manifest.config);
        }
        Config::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Config, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Seed precedence: flag, then config file, then 42.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> u64 {
        let seed = flag.or(self.seed).unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        seed
    }

    fn gamma(&self) -> Result<f64, CliError> {
        match (self.spec.gamma, self.spec.gamma_sq) {
            (Some(_), Some(_)) => Err(usage("spec: give gamma or gamma_sq, not both")),
            (Some(g), None) => Ok(g),
            (None, Some(g2)) if g2 > 0.0 => Ok(g2.sqrt()),
            (None, Some(g2)) => Err(usage(format!("spec.gamma_sq must be positive, got {g2}"))),
            (None, None) => Ok(0.5f64.sqrt()),
        }
    }

    fn margin(&self) -> MarginDist {
        self.spec.margin.unwrap_or(MarginDist::Uniform { low: 0.0, high: 4.0 })
    }

    fn lambda(&self) -> f64 {
        self.spec.lambda.unwrap_or(1.0)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, CliError> {
        let d = self.spec.d.unwrap_or(50);
        let spec = ProblemSpec {
            d,
            gamma: self.gamma()?,
            covariance_spectrum: self
                .spec
                .covariance_spectrum
                .clone()
                .unwrap_or_else(|| vec![self.lambda(); d.saturating_sub(1)]),
            margin_dist: self.margin(),
            prior_pos: self.spec.prior_pos.unwrap_or(0.5),
        };
        spec.validate().map_err(|e| usage(format!("spec: {e}")))?;
        Ok(spec)
    }

    pub fn noise(&self) -> Result<NoiseSpec, CliError> {
        let n = &self.noise;
        let noise = match (n.p, n.epsilon) {
            (Some(_), Some(_)) => return Err(usage("noise: give p or epsilon, not both")),
            (Some(p), None) => {
                if n.num_classes.is_some() {
                    return Err(usage("noise.num_classes only applies with noise.epsilon"));
                }
                NoiseSpec::flip(p)
            }
            (None, Some(epsilon)) => NoiseSpec::RandomizedResponse {
                epsilon,
                num_classes: n.num_classes.unwrap_or(2),
            },
            (None, None) => NoiseSpec::flip(0.4),
        };
        noise.validate().map_err(|e| usage(format!("noise: {e}")))?;
        Ok(noise)
    }

    pub fn n(&self) -> Result<usize, CliError> {
        match self.data.n.unwrap_or(300) {
            0 => Err(usage("data.n must be positive")),
            n => Ok(n),
        }
    }

    pub fn sweep_grid(&self, master_seed: u64) -> Result<SweepGrid, CliError> {
        if self.spec.covariance_spectrum.is_some() {
            return Err(usage(
                "sweep: spec.covariance_spectrum is not supported, sweeps use the isotropic spec.lambda",
            ));
        }
        let s = &self.sweep;
        let noise_axis = match (&s.p_axis, &s.epsilon_axis) {
            (Some(_), Some(_)) => return Err(usage("sweep: give p_axis or epsilon_axis, not both")),
            (Some(ps), None) => ps.iter().map(|&p| NoiseSpec::flip(p)).collect(),
            (None, Some(eps)) => eps.iter().map(|&e| NoiseSpec::randomized_response(e)).collect(),
            (None, None) => vec![self.noise()?],
        };
        for noise in &noise_axis {
            noise.validate().map_err(|e| usage(format!("sweep: {e}")))?;
        }
        let grid = SweepGrid {
            n_axis: s.n_axis.clone().unwrap_or(vec![self.n()?]),
            d_axis: s.d_axis.clone().unwrap_or(vec![self.spec.d.unwrap_or(50)]),
            noise_axis,
            gamma_axis: s.gamma_axis.clone().unwrap_or(vec![self.gamma()?]),
            margin_dist: self.margin(),
            lambda: self.lambda(),
            prior_pos: self.spec.prior_pos.unwrap_or(0.5),
            strategies: s.strategies.clone().unwrap_or(vec![
                Strategy::Full,
                Strategy::Consensus,
                Strategy::Confidence {
                    keep_fraction: retrain_core::linear::DEFAULT_KEEP_FRACTION,
                },
            ]),
            test_mode: s.test.unwrap_or(TestMode::Exact),
            master_seed,
            window_c1: s.window_c1.unwrap_or(1.0),
            window_c2: s.window_c2.unwrap_or(1.0),
        };
        if grid.cell_count() == 0 {
            return Err(usage("sweep: every axis needs at least one value"));
        }
        for cell in grid.cells() {
            if cell.n == 0 {
                return Err(usage("sweep: n_axis values must be positive"));
            }
            cell.spec.validate().map_err(|e| usage(format!("sweep: {e}")))?;
        }
        Ok(grid)
    }

    pub fn sweep_trials(&self, flag: Option<usize>) -> Result<usize, CliError> {
        positive_trials(flag.or(self.sweep.trials).unwrap_or(DEFAULT_TRIALS))
    }

    pub fn bound_grid(&self) -> Result<BoundGrid, CliError> {
        let b = &self.bounds;
        let lambda = self.lambda();
        let grid = BoundGrid {
            n_axis: b.n_axis.clone().unwrap_or(vec![self.n()? as u64]),
            d_axis: b.d_axis.clone().unwrap_or(vec![self.spec.d.unwrap_or(50) as u64]),
            p_axis: match &b.p_axis {
                Some(ps) => ps.clone(),
                None => vec![self.noise()?.flip_probability()],
            },
            gamma_axis: b.gamma_axis.clone().unwrap_or(vec![self.gamma()?]),
            lambda_min: b.lambda_min.unwrap_or(lambda),
            lambda_max: b.lambda_max.unwrap_or(lambda),
            delta: b.delta.unwrap_or(0.05),
            lower_curve_c: b.lower_curve_c.unwrap_or(1.0),
            window_c1: b.window_c1.unwrap_or(1.0),
            window_c2: b.window_c2.unwrap_or(1.0),
        };
        if let Some(p) = grid.p_axis.iter().find(|p| !(**p >= 0.0 && **p < 0.5)) {
            return Err(usage(format!(
                "bounds: flip probability must satisfy 0 <= p < 1/2, got {p}"
            )));
        }
        if !(grid.delta > 0.0 && grid.delta < 1.0) {
            return Err(usage(format!("bounds.delta must lie in (0, 1), got {}", grid.delta)));
        }
        Ok(grid)
    }

    pub fn phase_config(&self, master_seed: u64, trials_flag: Option<usize>) -> Result<PhaseConfig, CliError> {
        let s = &self.phase;
        let p = s.p.unwrap_or(0.45);
        NoiseSpec::flip(p)
            .validate()
            .map_err(|e| usage(format!("phase: {e}")))?;
        let mut config = PhaseConfig::new(
            s.d.unwrap_or(100),
            p,
            s.gamma.unwrap_or(1.0),
            s.n_axis.clone().unwrap_or(vec![100, 1_000, 10_000, 100_000]),
            positive_trials(trials_flag.or(s.trials).unwrap_or(DEFAULT_TRIALS))?,
            master_seed,
        );
        config.margin_dist = self.margin();
        config.lambda = self.lambda();
        if let Some(alpha) = s.alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(usage(format!("phase.alpha must lie in (0, 1), got {alpha}")));
            }
            config.alpha = alpha;
        }
        config.window_c1 = s.window_c1.unwrap_or(1.0);
        config.window_c2 = s.window_c2.unwrap_or(1.0);
        if config.n_axis.is_empty() || config.n_axis.contains(&0) {
            return Err(usage("phase.n_axis needs positive values"));
        }
        let spec = ProblemSpec {
            d: config.d,
            gamma: config.gamma,
            covariance_spectrum: vec![config.lambda; config.d.saturating_sub(1)],
            margin_dist: config.margin_dist,
            prior_pos: 0.5,
        };
        spec.validate().map_err(|e| usage(format!("phase: {e}")))?;
        Ok(config)
    }
}

fn positive_trials(trials: usize) -> Result<usize, CliError> {
    if trials == 0 {
        Err(usage("trials must be positive"))
    } else {
        Ok(trials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_setup() {
        let config = Config::parse("").unwrap();
        let spec = config.problem_spec().unwrap();
        assert_eq!(spec, ProblemSpec::figure1(0.5));
        assert_eq!(config.noise().unwrap(), NoiseSpec::flip(0.4));
        assert_eq!(config.n().unwrap(), 300);
    }

    #[test]
    fn dotted_sections_parse() {
        let config = Config::parse(
            r#"
seed = 7
[spec]
d = 10
gamma = 1.5
margin = { kind = "half_normal", sigma = 2.0 }
[noise]
epsilon = 1.0
[sweep]
n_axis = [10, 20]
strategies = ["full", "confidence:0.25"]
test = { kind = "monte_carlo", samples = 1000, seeds = { kind = "fixed", seed = 3 } }
"#,
        )
        .unwrap();
        assert_eq!(config.seed, Some(7));
        let spec = config.problem_spec().unwrap();
        assert_eq!(spec.margin_dist, MarginDist::HalfNormal { sigma: 2.0 });
        let grid = config.sweep_grid(1).unwrap();
        assert_eq!(grid.cell_count(), 2);
        assert_eq!(grid.strategies[1], Strategy::Confidence { keep_fraction: 0.25 });
        assert!(matches!(grid.test_mode, TestMode::MonteCarlo { samples: 1000, .. }));
    }

    #[test]
    fn seed_precedence() {
        let mut config = Config::parse("seed = 7").unwrap();
        assert_eq!(config.clone().resolve_seed(Some(9)), 9);
        assert_eq!(config.resolve_seed(None), 7);
        assert_eq!(Config::default().resolve_seed(None), DEFAULT_SEED);
    }

    #[test]
    fn rejections_name_the_problem() {
        let err = Config::parse("[noise]\np = 0.6").unwrap().noise().unwrap_err();
        assert!(err.to_string().contains("p < 1/2"), "{err}");
        assert!(Config::parse("[spec]\nbogus = 1").is_err());
        assert!(Config::parse("[spec]\ngamma = 1.0\ngamma_sq = 1.0")
            .unwrap()
            .problem_spec()
            .is_err());
        assert!(Config::parse("[data]\nn = 0").unwrap().n().is_err());
    }

    #[test]
    fn echo_roundtrips() {
        let config = Config::parse("seed = 3\n[spec]\nd = 4\n[bounds]\nn_axis = [1, 2, 3]").unwrap();
        assert_eq!(Config::parse(&toml::to_string(&config).unwrap()).unwrap(), config);
        let json = serde_json::to_string(&config).unwrap();
        assert_eq!(serde_json::from_str::<Config>(&json).unwrap(), config);
    }
}
