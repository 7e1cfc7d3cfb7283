use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::neural::NetworkSpec;
use crate::replicate::Combine;
use crate::sequential::{BoundsRule, ParamBounds, SequentialConfig};
use crate::simulators::{
    fit_powexp, Ar1Model, BrownResnickModel, GaussianModel, Grid2D, SeriesSimulator, Simulator, SvolModel,
};
use crate::math::Tensor;
use crate::transforms::{logit2, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    GaussVar,
    GaussMeanvar,
    GaussMoments,
    BrownResnick,
    Svol,
    Ar1Replication,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::GaussVar,
        Preset::GaussMeanvar,
        Preset::GaussMoments,
        Preset::BrownResnick,
        Preset::Svol,
        Preset::Ar1Replication,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Preset::GaussVar => "gauss-var",
            Preset::GaussMeanvar => "gauss-meanvar",
            Preset::GaussMoments => "gauss-moments",
            Preset::BrownResnick => "brown-resnick",
            Preset::Svol => "svol",
            Preset::Ar1Replication => "ar1-replication",
        }
    }

    /// Series presets train one network and reuse it for every replicate.
    pub fn is_series(self) -> bool {
        matches!(self, Preset::Svol | Preset::Ar1Replication)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Seconds; for checking that everything runs.
    Smoke,
    #[default]
    Small,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "small" => Ok(Scale::Small),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::Config(format!("unknown scale '{s}' (smoke|small|paper)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesEstimator {
    #[default]
    Network,
    /// Closed-form AR(1) estimate; only for `ar1-replication`.
    Mle,
}

/// Model settings. Each preset reads only the fields that apply to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Gaussian sample size.
    pub j: usize,
    /// Sort Gaussian samples before they reach the network.
    pub sorted: bool,
    /// `gauss-moments`: learn `(μ, μ² + σ²)` instead of `(μ, log(μ² + σ²))`.
    pub raw_moments: bool,
    /// Brown-Resnick grid side and domain side length.
    pub grid: usize,
    pub extent: f64,
    /// SVOL innovation sd, held fixed.
    pub sigma: f64,
    pub scaled: bool,
    /// Observed series lengths.
    pub lengths: Vec<usize>,
    /// Training length for series presets.
    pub t_k: usize,
    /// Half-width of initial boxes built around a pilot or true value.
    pub offset: f64,
    pub estimator: SeriesEstimator,
    pub combine: Combine,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            j: 20,
            sorted: true,
            raw_moments: false,
            grid: 16,
            extent: 30.0,
            sigma: 0.1,
            scaled: true,
            lengths: vec![],
            t_k: 1000,
            offset: 2.0,
            estimator: SeriesEstimator::Network,
            combine: Combine::Mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub scale: Scale,
    pub seed: u64,
    /// Independent observed datasets.
    pub replicates: usize,
    /// True parameters on the natural scale.
    pub truth: Vec<f64>,
    pub model: ModelConfig,
    /// Initial box on the network's target scale; `None` uses the preset rule.
    pub init: Option<Vec<(f64, f64)>>,
    pub network: NetworkSpec,
    /// For series presets `n0`, `b` and `train` configure the single fit.
    pub sequential: SequentialConfig,
}

/// A model built from a config, in the form each preset needs.
pub enum BuiltModel {
    Plain(Box<dyn Simulator>),
    Series(Box<dyn SeriesSimulator>),
}

impl BuiltModel {
    pub fn simulator(&self) -> &dyn Simulator {
        match self {
            BuiltModel::Plain(s) => s.as_ref(),
            BuiltModel::Series(s) => as_simulator(s.as_ref()),
        }
    }
}

fn as_simulator(s: &dyn SeriesSimulator) -> &dyn Simulator {
    s
}

impl ExperimentConfig {
    /// Defaults for `preset` at `scale`.
    pub fn preset(preset: Preset, scale: Scale) -> Self {
        let mut model = ModelConfig::default();
        let mut seq = SequentialConfig::default();
        let pick = |smoke: usize, small: usize, paper: usize| match scale {
            Scale::Smoke => smoke,
            Scale::Small => small,
            Scale::Paper => paper,
        };
        if scale == Scale::Smoke {
            seq.train.epochs = 10;
        }
        let (truth, network, replicates);
        match preset {
            Preset::GaussVar | Preset::GaussMeanvar | Preset::GaussMoments => {
                let p = if preset == Preset::GaussVar { 1 } else { 2 };
                truth = if p == 1 { vec![1f64.exp()] } else { vec![1.0, 1f64.exp()] };
                network = NetworkSpec::mlp(model.j, &[50], p);
                replicates = pick(2, 20, 20);
                seq.n0 = pick(500, 2000, 10_000);
                seq.b = pick(100, 2000, 10_000);
                seq.max_iterations = pick(3, 10, 20);
                seq.growth = true;
                seq.replay = true;
            }
            Preset::BrownResnick => {
                model.grid = pick(8, 16, 30);
                truth = vec![6.2, 1.0];
                network = NetworkSpec::cnn2d(model.grid, model.grid, &[(16, 3), (8, 3)], 4, 2);
                replicates = pick(2, 20, 100);
                seq.n0 = pick(200, 1500, 6000);
                seq.b = pick(50, 500, 1000);
                seq.max_iterations = pick(2, 8, 20);
                seq.replay = true;
            }
            Preset::Svol => {
                model.t_k = pick(100, 1000, 5000);
                model.lengths = match scale {
                    Scale::Smoke => vec![50, 100, 150],
                    Scale::Small => vec![250, 500, 1000],
                    Scale::Paper => vec![500, 1000, 2000, 3000, 4000, 5000],
                };
                truth = vec![0.8, 6.0];
                network = NetworkSpec::cnn1d(model.t_k, &[(4, 3), (4, 3), (4, 3)], 4, 2);
                replicates = pick(2, 10, 30);
                seq.n0 = pick(200, 2000, 10_000);
                seq.b = pick(50, 1000, 10_000);
                seq.train.batch_size = 50;
            }
            Preset::Ar1Replication => {
                model.t_k = pick(250, 1000, 1000);
                model.lengths = vec![pick(50, 200, 200)];
                model.estimator = SeriesEstimator::Mle;
                truth = vec![0.9];
                network = NetworkSpec::cnn1d(model.t_k, &[(4, 3), (4, 3), (4, 3)], 4, 1);
                replicates = pick(3, 200, 200);
                seq.n0 = pick(200, 2000, 10_000);
                seq.b = pick(50, 1000, 1000);
                seq.train.batch_size = 50;
            }
        }
        Self {
            preset,
            scale,
            seed: 1,
            replicates,
            truth,
            model,
            init: None,
            network,
            sequential: seq,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies `path=value`, where `path` is a dotted field path and `value`
    /// is JSON (bare words are taken as strings).
    pub fn apply_set(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{assignment}'")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut root = serde_json::to_value(&*self)?;
        let mut node = &mut root;
        for key in path.split('.') {
            node = node
                .as_object_mut()
                .and_then(|m| m.get_mut(key))
                .ok_or_else(|| Error::Config(format!("unknown field '{path}'")))?;
        }
        *node = value;
        let next: Self =
            serde_json::from_value(root).map_err(|e| Error::Config(format!("invalid value for '{path}': {e}")))?;
        *self = next;
        Ok(())
    }

    pub fn set_bounds_rule(&mut self, rule: BoundsRule) {
        self.sequential.bounds_rule = rule;
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        self.sequential.validate()?;
        let m = &self.model;
        match self.preset {
            Preset::GaussVar | Preset::GaussMeanvar | Preset::GaussMoments if m.j < 2 => {
                return bad(format!("model.j must be >= 2, got {}", m.j));
            }
            Preset::BrownResnick if m.grid < 3 || !(m.extent > 0.0) => {
                return bad("model.grid must be >= 3 and model.extent > 0".into());
            }
            Preset::Svol | Preset::Ar1Replication => {
                if m.lengths.is_empty() || m.lengths.contains(&0) || m.t_k == 0 {
                    return bad("model.lengths must be non-empty and positive, model.t_k >= 1".into());
                }
            }
            _ => {}
        }
        if m.estimator == SeriesEstimator::Mle && self.preset != Preset::Ar1Replication {
            return bad("model.estimator = mle is only available for ar1-replication".into());
        }
        if !(m.offset > 0.0) {
            return bad(format!("model.offset must be > 0, got {}", m.offset));
        }
        let built = self.build_model()?;
        let sim = built.simulator();
        sim.transform()
            .apply(&self.truth)
            .and_then(|t| sim.validate(&t))
            .map_err(|e| Error::Config(format!("truth {:?} outside the model domain: {e}", self.truth)))?;
        if self.uses_network() {
            if self.network.output_dim != sim.param_dim() || self.network.input_len() != sim.data_len() {
                return bad(format!(
                    "network maps {} inputs to {} outputs, model needs {} to {}",
                    self.network.input_len(),
                    self.network.output_dim,
                    sim.data_len(),
                    sim.param_dim()
                ));
            }
            self.network.parameter_count().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(init) = &self.init {
            ParamBounds::from_pairs(init).map_err(|e| Error::Config(e.to_string()))?;
            if init.len() != sim.param_dim() {
                return bad(format!("init has {} pairs, model has {} parameters", init.len(), sim.param_dim()));
            }
        }
        Ok(())
    }

    pub fn uses_network(&self) -> bool {
        self.model.estimator == SeriesEstimator::Network
    }

    pub fn grid(&self) -> Grid2D {
        Grid2D {
            nx: self.model.grid,
            ny: self.model.grid,
            spacing: self.model.extent / self.model.grid as f64,
        }
    }

    /// The simulator, at the training length for series presets.
    pub fn build_model(&self) -> Result<BuiltModel> {
        let m = &self.model;
        Ok(match self.preset {
            Preset::GaussVar => {
                let mut g = GaussianModel::log_variance(m.j, 1.0);
                g.sorted = m.sorted;
                BuiltModel::Plain(Box::new(g))
            }
            Preset::GaussMeanvar => {
                let mut g = GaussianModel::mean_log_variance(m.j);
                g.sorted = m.sorted;
                BuiltModel::Plain(Box::new(g))
            }
            Preset::GaussMoments => {
                let mut g = GaussianModel::moments(m.j, m.raw_moments);
                g.sorted = m.sorted;
                BuiltModel::Plain(Box::new(g))
            }
            Preset::BrownResnick => BuiltModel::Plain(Box::new(BrownResnickModel::new(self.grid(), true))),
            Preset::Svol => BuiltModel::Series(Box::new(SvolModel::new(m.t_k, m.sigma, m.scaled))),
            Preset::Ar1Replication => {
                BuiltModel::Series(Box::new(Ar1Model::with_transform(m.t_k, Transform::Identity)))
            }
        })
    }

    /// Truth on the network's target scale.
    pub fn truth_target(&self) -> Result<Vec<f64>> {
        let built = self.build_model()?;
        built.simulator().transform().apply(&self.truth)
    }

    /// Starting box for one replicate with observed data `x0`.
    pub fn initial_bounds(&self, x0: &[f64]) -> Result<ParamBounds> {
        if let Some(init) = &self.init {
            return ParamBounds::from_pairs(init);
        }
        let c = self.model.offset;
        match self.preset {
            Preset::GaussVar => ParamBounds::from_pairs(&[(-2.0, 1.0)]),
            Preset::GaussMeanvar => ParamBounds::from_pairs(&[(-0.5, 0.5), (-2.0, 1.0)]),
            Preset::GaussMoments => {
                let (lo, hi) = (0.25 + (-2f64).exp(), 0.25 + 1f64.exp());
                if self.model.raw_moments {
                    ParamBounds::from_pairs(&[(-0.5, 0.5), (lo, hi)])
                } else {
                    ParamBounds::from_pairs(&[(-0.5, 0.5), (lo.ln(), hi.ln())])
                }
            }
            Preset::BrownResnick => {
                let grid = self.grid();
                // The fitted range is invariant to the monotone log transform of the data.
                let field = Tensor::new(vec![grid.ny, grid.nx], x0.to_vec())?;
                let fit = fit_powexp(&[field], &grid)?;
                let la = fit.alpha.ln();
                ParamBounds::from_pairs(&[(la - c, la + c), (logit2(0.1)?, logit2(1.9)?)])
            }
            Preset::Svol | Preset::Ar1Replication => {
                let t = self.truth_target()?;
                ParamBounds::around(&t, c)
            }
        }
    }
}
