use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use gifting::dynamics::FlowConfig;
use gifting::experiments::{table2_environments, Arm, EnvSpec, StudySpec, TransientSpec};
use gifting::game::CoordinationKind;
use gifting::learner::TrainConfig;
use gifting::{Error, Result};

/// Named 2x2 coordination games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    StagHunt,
    Bos,
    PureCoordination,
    Assurance,
}

impl GameKind {
    pub fn coordination(self, r: f64) -> CoordinationKind {
        match self {
            GameKind::StagHunt => CoordinationKind::StagHunt { r },
            GameKind::Bos => CoordinationKind::Bos,
            GameKind::PureCoordination => CoordinationKind::PureCoordination,
            GameKind::Assurance => CoordinationKind::Assurance,
        }
    }
}

/// Training environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Bos,
    PureCoordination,
    Assurance,
    StagHunt,
    #[value(name = "fc-3")]
    #[serde(rename = "fc-3")]
    Fc3,
    #[value(name = "fc-4")]
    #[serde(rename = "fc-4")]
    Fc4,
    RepeatedStagHunt,
}

impl EnvKind {
    pub fn spec(self, r: f64, horizon: usize) -> EnvSpec {
        let matrix = |game| EnvSpec::Matrix { game };
        match self {
            EnvKind::Bos => matrix(CoordinationKind::Bos),
            EnvKind::PureCoordination => matrix(CoordinationKind::PureCoordination),
            EnvKind::Assurance => matrix(CoordinationKind::Assurance),
            EnvKind::StagHunt => EnvSpec::stag_hunt(r),
            EnvKind::Fc3 | EnvKind::Fc4 => EnvSpec::Graph {
                agents: if self == EnvKind::Fc3 { 3 } else { 4 },
                r,
                edges: None,
            },
            EnvKind::RepeatedStagHunt => EnvSpec::Repeated { r, horizon },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSection {
    pub kind: GameKind,
    /// Stag Hunt payoff for hunting alone.
    pub r: f64,
    /// Gift amount; 0 disables gifting.
    pub gamma: f64,
    /// Game definition file, used instead of `kind` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for GameSection {
    fn default() -> Self {
        Self {
            kind: GameKind::StagHunt,
            r: -6.0,
            gamma: 10.0,
            file: None,
        }
    }
}

impl GameSection {
    pub fn arm(&self) -> Arm {
        if self.gamma == 0.0 {
            Arm::Off
        } else {
            Arm::Gift { gamma: self.gamma }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    /// Grid points per logit axis on [-3, 3].
    pub resolution: usize,
    /// Evenly spaced values per gift logit.
    pub gift_samples: usize,
    /// Risk levels of the frequency table.
    pub r_values: Vec<f64>,
    /// Gift amounts of the frequency table.
    pub gammas: Vec<f64>,
    /// Gift logits relative to the reference action, held fixed in the portrait.
    pub gift_offsets: Vec<f64>,
    pub flow: FlowConfig,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            resolution: 21,
            gift_samples: 5,
            r_values: vec![-10.0, -6.0, -2.0],
            gammas: (1..=20).map(f64::from).collect(),
            gift_offsets: vec![0.0; 4],
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub env: EnvKind,
    pub seed: u64,
    /// Horizon of the repeated environment.
    pub horizon: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            env: EnvKind::StagHunt,
            seed: 0,
            horizon: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub seeds: usize,
    /// Episodes for repeated environments; 0 uses `train.episodes`.
    pub repeated_episodes: u64,
    /// Risk levels of the risk/gift study.
    pub r_values: Vec<f64>,
    /// Gift amounts of the risk/gift study.
    pub gammas: Vec<f64>,
}

impl Default for StudySection {
    fn default() -> Self {
        let spec = StudySpec::default();
        Self {
            seeds: spec.seeds,
            repeated_episodes: spec.repeated_episodes.unwrap_or(0),
            r_values: vec![-10.0, -6.0, -2.0],
            gammas: vec![1.0, 2.0, 5.0, 10.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransientSection {
    pub r: f64,
    pub gamma: f64,
    pub seeds: usize,
    pub episodes: u64,
    pub warmup: usize,
    /// Initial advantage of gifting actions.
    pub gift_bias: f64,
    /// Optimization steps per averaged curve point.
    pub curve_block: usize,
}

impl Default for TransientSection {
    fn default() -> Self {
        let spec = TransientSpec::default();
        Self {
            r: spec.r,
            gamma: spec.gamma,
            seeds: spec.seeds,
            episodes: spec.train.episodes,
            warmup: spec.train.warmup,
            gift_bias: spec.train.gift_bias,
            curve_block: spec.curve_block,
        }
    }
}

/// Everything a command needs; loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub out_dir: PathBuf,
    pub study_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub game: GameSection,
    pub dynamics: DynamicsSection,
    pub train: TrainConfig,
    pub run: RunSection,
    pub study: StudySection,
    pub transient: TransientSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("results"),
            study_seed: 0,
            workers: None,
            game: GameSection::default(),
            dynamics: DynamicsSection::default(),
            train: TrainConfig::default(),
            run: RunSection::default(),
            study: StudySection::default(),
            transient: TransientSection::default(),
        }
    }
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Training settings for `spec`, with the repeated episode count applied.
    pub fn train_for(&self, spec: &EnvSpec) -> TrainConfig {
        let mut cfg = self.train.clone();
        if let (EnvSpec::Repeated { .. }, Some(e)) = (spec, self.repeated_episodes()) {
            cfg.episodes = e;
        }
        cfg
    }

    fn repeated_episodes(&self) -> Option<u64> {
        (self.study.repeated_episodes > 0).then_some(self.study.repeated_episodes)
    }

    pub fn study_spec(&self) -> StudySpec {
        let arms = vec![Arm::Off, self.game.arm()];
        StudySpec {
            environments: table2_environments(),
            arms,
            seeds: self.study.seeds,
            study_seed: self.study_seed,
            train: self.train.clone(),
            repeated_episodes: self.repeated_episodes(),
            workers: self.workers,
        }
    }

    pub fn transient_spec(&self) -> TransientSpec {
        let t = &self.transient;
        TransientSpec {
            r: t.r,
            gamma: t.gamma,
            seeds: t.seeds,
            study_seed: self.study_seed,
            train: TrainConfig {
                episodes: t.episodes,
                warmup: t.warmup,
                gift_bias: t.gift_bias,
                ..self.train.clone()
            },
            curve_block: t.curve_block,
            workers: self.workers,
        }
    }
}

/// Parses `a,b,c` and integer ranges `lo..hi` (inclusive), mixed freely.
pub fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((lo, hi)) => {
                let lo: i64 = lo.trim().parse().map_err(|_| format!("bad range start in '{part}'"))?;
                let hi: i64 = hi.trim().parse().map_err(|_| format!("bad range end in '{part}'"))?;
                if hi < lo {
                    return Err(format!("empty range '{part}'"));
                }
                out.extend((lo..=hi).map(|v| v as f64));
            }
            None => out.push(part.parse().map_err(|_| format!("not a number: '{part}'"))?),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = CliConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(CliConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn overridden_values_round_trip() {
        let mut cfg = CliConfig::default();
        cfg.study.repeated_episodes = 0;
        cfg.workers = Some(2);
        cfg.game.file = Some("g.toml".into());
        cfg.train.backend = gifting::learner::Backend::Mlp;
        let back = CliConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.study_spec().repeated_episodes, None);
    }

    #[test]
    fn partial_documents_keep_defaults() {
        let cfg = CliConfig::from_toml("study_seed = 3\n[train]\nepisodes = 10\n").unwrap();
        assert_eq!(cfg.study_seed, 3);
        assert_eq!(cfg.train.episodes, 10);
        assert_eq!(cfg.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(cfg.game.gamma, 10.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(CliConfig::from_toml("seeds = 3\n").is_err());
        assert!(CliConfig::from_toml("[train]\nlearning_rate = 0.1\n").is_err());
    }

    #[test]
    fn list_syntax() {
        assert_eq!(parse_list("-10,-6,-2").unwrap(), vec![-10.0, -6.0, -2.0]);
        assert_eq!(parse_list("1..3,7.5").unwrap(), vec![1.0, 2.0, 3.0, 7.5]);
        assert!(parse_list("3..1").is_err());
        assert!(parse_list("x").is_err());
        assert!(parse_list("").is_err());
    }
}
