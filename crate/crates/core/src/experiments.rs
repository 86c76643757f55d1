//! Multi-seed studies: the convergence table, the risk/gift sweep and the
//! transient gifting traces.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    coordination_game, extend_with_gifting, fully_connected_edges, make_graph_stag_hunt, CoordinationKind, GiftSet,
    NormalFormGame, RepeatedGame,
};
use crate::learner::{train_run, Environment, OutcomeClass, RunResult, TraceLevel, TrainConfig};

/// A training environment before gifting is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    /// A 2x2 coordination game with its default payoffs.
    Matrix { game: CoordinationKind },
    /// Stag Hunt on a graph; no edges means fully connected.
    Graph {
        agents: usize,
        r: f64,
        #[serde(default)]
        edges: Option<Vec<(usize, usize)>>,
    },
    /// Stag Hunt repeated over a finite horizon, observing the opponent's last action.
    Repeated { r: f64, horizon: usize },
}

impl EnvSpec {
    pub fn stag_hunt(r: f64) -> Self {
        Self::Matrix {
            game: CoordinationKind::StagHunt { r },
        }
    }

    pub fn base_game(&self) -> Result<NormalFormGame> {
        match self {
            Self::Matrix { game } => coordination_game(*game, &game.default_params()),
            Self::Graph { agents, r, edges } => {
                let edges = edges.clone().unwrap_or_else(|| fully_connected_edges(*agents));
                make_graph_stag_hunt(*agents, &edges, *r)
            }
            Self::Repeated { r, .. } => coordination_game(
                CoordinationKind::StagHunt { r: *r },
                &CoordinationKind::StagHunt { r: *r }.default_params(),
            ),
        }
    }

    /// Builds the environment with every agent offered gift set `{0, arm.gamma()}`.
    pub fn build(&self, arm: Arm) -> Result<Environment> {
        let base = self.base_game()?;
        let gifts = GiftSet::uniform(base.num_players(), arm.gamma())?;
        let stage = extend_with_gifting(&base, &gifts)?;
        match self {
            Self::Repeated { horizon, .. } => Environment::repeated(RepeatedGame::new(stage, *horizon)?),
            _ => Ok(Environment::one_shot(stage)),
        }
    }
}

/// Gifting off, or gifting with amount `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arm", rename_all = "lowercase")]
pub enum Arm {
    Off,
    Gift { gamma: f64 },
}

impl Arm {
    pub fn gamma(self) -> f64 {
        match self {
            Arm::Off => 0.0,
            Arm::Gift { gamma } => gamma,
        }
    }

    pub fn label(self) -> String {
        match self {
            Arm::Off => "off".to_string(),
            Arm::Gift { gamma } => format!("gift({gamma})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedEnv {
    pub name: String,
    #[serde(flatten)]
    pub spec: EnvSpec,
}

/// The nine environments of the convergence table.
pub fn table2_environments() -> Vec<NamedEnv> {
    let named = |name: &str, spec| NamedEnv {
        name: name.to_string(),
        spec,
    };
    vec![
        named("Bach or Stravinsky", EnvSpec::Matrix { game: CoordinationKind::Bos }),
        named(
            "Pure Coordination",
            EnvSpec::Matrix {
                game: CoordinationKind::PureCoordination,
            },
        ),
        named(
            "Assurance",
            EnvSpec::Matrix {
                game: CoordinationKind::Assurance,
            },
        ),
        named("High Risk Stag Hunt", EnvSpec::stag_hunt(-10.0)),
        named("Med. Risk Stag Hunt", EnvSpec::stag_hunt(-6.0)),
        named("Low Risk Stag Hunt", EnvSpec::stag_hunt(-2.0)),
        named(
            "FC-3 Stag Hunt",
            EnvSpec::Graph {
                agents: 3,
                r: -6.0,
                edges: None,
            },
        ),
        named(
            "FC-4 Stag Hunt",
            EnvSpec::Graph {
                agents: 4,
                r: -6.0,
                edges: None,
            },
        ),
        named("Repeated Stag Hunt", EnvSpec::Repeated { r: -6.0, horizon: 10 }),
    ]
}

/// Seed of one run, mixed from the study seed, environment name, gift
/// amount and run index. The arm enters only through its gift amount, so
/// gifting off and `gamma = 0` share seeds.
pub fn derive_seed(study_seed: u64, env_name: &str, arm: Arm, run: u64) -> u64 {
    // FNV-1a over the name, then splitmix64 finalization of each field
    let mut name_hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in env_name.bytes() {
        name_hash ^= b as u64;
        name_hash = name_hash.wrapping_mul(0x0100_0000_01b3);
    }
    let gamma = arm.gamma();
    let gamma_bits = if gamma == 0.0 { 0 } else { gamma.to_bits() };
    [name_hash, gamma_bits, run]
        .into_iter()
        .fold(splitmix(study_seed), |acc, x| splitmix(acc ^ splitmix(x)))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Wilson score interval for `k` successes in `n` trials at the given normal quantile.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub const Z_95: f64 = 1.959_963_984_540_054;

/// Maximum share of failed runs for a healthy study.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySpec {
    pub environments: Vec<NamedEnv>,
    pub arms: Vec<Arm>,
    pub seeds: usize,
    pub study_seed: u64,
    pub train: TrainConfig,
    /// Episode count for repeated environments (defaults to `train.episodes`).
    pub repeated_episodes: Option<u64>,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            environments: table2_environments(),
            arms: vec![Arm::Off, Arm::Gift { gamma: 10.0 }],
            seeds: 256,
            study_seed: 0,
            train: TrainConfig::default(),
            repeated_episodes: Some(4_500),
            workers: None,
        }
    }
}

impl StudySpec {
    fn config_for(&self, spec: &EnvSpec) -> TrainConfig {
        let mut cfg = self.train.clone();
        if let (EnvSpec::Repeated { .. }, Some(e)) = (spec, self.repeated_episodes) {
            cfg.episodes = e;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub prosocial: usize,
    pub risk_dominant: usize,
    pub other_pne: usize,
    pub unconverged: usize,
    pub failed: usize,
}

impl OutcomeCounts {
    pub fn add(&mut self, class: OutcomeClass) {
        match class {
            OutcomeClass::Prosocial => self.prosocial += 1,
            OutcomeClass::RiskDominant => self.risk_dominant += 1,
            OutcomeClass::OtherPne => self.other_pne += 1,
            OutcomeClass::Unconverged => self.unconverged += 1,
            OutcomeClass::Failed => self.failed += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.prosocial + self.risk_dominant + self.other_pne + self.unconverged + self.failed
    }

    /// Runs that finished without a numerical failure.
    pub fn completed(&self) -> usize {
        self.total() - self.failed
    }

    pub fn pne(&self) -> usize {
        self.prosocial + self.risk_dominant + self.other_pne
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub environment: String,
    pub arm: Arm,
    pub counts: OutcomeCounts,
    /// Prosocial share of completed runs.
    pub prosocial_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Share of completed runs reaching any equilibrium.
    pub pne_rate: f64,
    pub seeds: Vec<u64>,
    pub outcomes: Vec<OutcomeClass>,
    pub seconds: f64,
}

impl StudyRow {
    fn new(environment: String, arm: Arm, runs: Vec<(u64, OutcomeClass)>, seconds: f64) -> Self {
        let mut counts = OutcomeCounts::default();
        runs.iter().for_each(|&(_, c)| counts.add(c));
        let done = counts.completed();
        let rate = |k: usize| if done == 0 { 0.0 } else { k as f64 / done as f64 };
        let (ci_low, ci_high) = wilson_interval(counts.prosocial, done, Z_95);
        Self {
            environment,
            arm,
            prosocial_rate: rate(counts.prosocial),
            pne_rate: rate(counts.pne()),
            ci_low,
            ci_high,
            counts,
            seeds: runs.iter().map(|r| r.0).collect(),
            outcomes: runs.into_iter().map(|r| r.1).collect(),
            seconds,
        }
    }

    /// Half-width of the 95% interval.
    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub seconds: f64,
}

impl StudyResult {
    pub fn row(&self, environment: &str, arm: Arm) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.environment == environment && r.arm == arm)
    }

    pub fn failure_rate(&self) -> f64 {
        let (failed, total) = self
            .rows
            .iter()
            .fold((0, 0), |(f, t), r| (f + r.counts.failed, t + r.counts.total()));
        if total == 0 {
            0.0
        } else {
            failed as f64 / total as f64
        }
    }

    /// True when at most 1% of all runs failed.
    pub fn is_healthy(&self) -> bool {
        self.failure_rate() <= MAX_FAILURE_RATE
    }
}

/// Runs `f` on a pool of `workers` threads (or the global pool).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("worker count must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}"))),
    }
}

/// Trains every (environment, arm, seed) combination and tallies outcomes.
pub fn convergence_table(spec: &StudySpec) -> Result<StudyResult> {
    if spec.seeds == 0 || spec.arms.is_empty() || spec.environments.is_empty() {
        return Err(Error::Config("a study needs environments, arms and seeds".into()));
    }
    spec.train.validate()?;
    let start = Instant::now();
    let mut cells = Vec::new();
    for named in &spec.environments {
        for &arm in &spec.arms {
            let env = named.spec.build(arm)?;
            let cfg = spec.config_for(&named.spec);
            let seeds: Vec<u64> = (0..spec.seeds as u64)
                .map(|run| derive_seed(spec.study_seed, &named.name, arm, run))
                .collect();
            cells.push((named.name.clone(), arm, env, cfg, seeds));
        }
    }
    let rows = with_workers(spec.workers, || {
        cells
            .into_iter()
            .map(|(name, arm, env, cfg, seeds)| {
                let t0 = Instant::now();
                let runs = seeds
                    .par_iter()
                    .map(|&seed| train_run(&env, &cfg, seed).map(|r| (seed, r.outcome.class)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(StudyRow::new(name, arm, runs, t0.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(StudyResult {
        rows,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskGiftResult {
    pub r_values: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Prosocial rate without gifting, per r.
    pub baseline: Vec<f64>,
    /// Prosocial rate per (r, gamma).
    pub rates: Vec<Vec<f64>>,
    pub study: StudyResult,
}

/// Prosocial rate of the one-shot Stag Hunt for every risk level and gift amount.
pub fn risk_gift_sweep(
    r_values: &[f64],
    gammas: &[f64],
    seeds: usize,
    study_seed: u64,
    train: &TrainConfig,
    workers: Option<usize>,
) -> Result<RiskGiftResult> {
    let environments: Vec<NamedEnv> = r_values
        .iter()
        .map(|&r| NamedEnv {
            name: format!("Stag Hunt r={r}"),
            spec: EnvSpec::stag_hunt(r),
        })
        .collect();
    let mut arms = vec![Arm::Off];
    arms.extend(gammas.iter().map(|&gamma| Arm::Gift { gamma }));
    let study = convergence_table(&StudySpec {
        environments: environments.clone(),
        arms: arms.clone(),
        seeds,
        study_seed,
        train: train.clone(),
        repeated_episodes: None,
        workers,
    })?;
    let rate = |env: &NamedEnv, arm: Arm| study.row(&env.name, arm).map_or(0.0, |r| r.prosocial_rate);
    let baseline = environments.iter().map(|e| rate(e, Arm::Off)).collect();
    let rates = environments
        .iter()
        .map(|e| arms[1..].iter().map(|&a| rate(e, a)).collect())
        .collect();
    Ok(RiskGiftResult {
        r_values: r_values.to_vec(),
        gammas: gammas.to_vec(),
        baseline,
        rates,
        study,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientRun {
    pub seed: u64,
    pub class: OutcomeClass,
    pub gift_start: Option<f64>,
    pub gift_end: Option<f64>,
    pub env_gift_end: Option<f64>,
    /// Batch gifting fraction averaged over consecutive blocks of optimization steps.
    pub curve: Vec<f64>,
    /// Starts above 50% batch gifting, ends below 1%, and is prosocial.
    pub transient_shape: bool,
}

impl TransientRun {
    fn from_result(seed: u64, result: RunResult, block: usize) -> Self {
        let t = result.traces;
        let class = result.outcome.class;
        let transient_shape = class == OutcomeClass::Prosocial
            && t.gift_start.is_some_and(|g| g > 0.5)
            && t.gift_end.is_some_and(|g| g < 0.01);
        let curve = t
            .gift_curve
            .chunks(block.max(1))
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        Self {
            seed,
            class,
            gift_start: t.gift_start,
            gift_end: t.gift_end,
            env_gift_end: t.env_gift_end,
            curve,
            transient_shape,
        }
    }

    /// Ends below 1% batch gifting.
    pub fn ends_without_gifting(&self) -> bool {
        self.gift_end.is_some_and(|g| g < 0.01)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransientSpec {
    pub r: f64,
    pub gamma: f64,
    pub seeds: usize,
    pub study_seed: u64,
    pub train: TrainConfig,
    /// Optimization steps per averaged curve point.
    pub curve_block: usize,
    pub workers: Option<usize>,
}

impl Default for TransientSpec {
    fn default() -> Self {
        Self {
            r: -6.0,
            gamma: 10.0,
            seeds: 64,
            study_seed: 0,
            train: TrainConfig {
                episodes: 150_000,
                warmup: 5_000,
                gift_bias: 1.0,
                ..TrainConfig::default()
            },
            curve_block: 100,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientResult {
    pub runs: Vec<TransientRun>,
    pub seconds: f64,
}

impl TransientResult {
    pub fn shaped_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.transient_shape).count()
    }

    /// Every run that reached an equilibrium ends below 1% batch gifting.
    pub fn converged_runs_stop_gifting(&self) -> bool {
        self.runs
            .iter()
            .filter(|r| r.class.is_pne())
            .all(TransientRun::ends_without_gifting)
    }
}

/// Trains the gifted Stag Hunt with gift-biased initial values and records
/// each run's batch gifting curve.
pub fn transient_trace(spec: &TransientSpec) -> Result<TransientResult> {
    if spec.seeds == 0 {
        return Err(Error::Config("transient study needs at least one seed".into()));
    }
    let start = Instant::now();
    let env = EnvSpec::stag_hunt(spec.r).build(Arm::Gift { gamma: spec.gamma })?;
    let mut cfg = spec.train.clone();
    if cfg.trace == TraceLevel::Summary {
        cfg.trace = TraceLevel::Curve;
    }
    cfg.validate()?;
    let name = format!("Transient Stag Hunt r={}", spec.r);
    let arm = Arm::Gift { gamma: spec.gamma };
    let runs = with_workers(spec.workers, || {
        (0..spec.seeds as u64)
            .into_par_iter()
            .map(|run| {
                let seed = derive_seed(spec.study_seed, &name, arm, run);
                train_run(&env, &cfg, seed).map(|r| TransientRun::from_result(seed, r, spec.curve_block))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(TransientResult {
        runs,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_reference_values() {
        // closed-form check: k=0, n=256 gives upper bound z^2 / (n + z^2)
        let (lo, hi) = wilson_interval(0, 256, Z_95);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, Z_95 * Z_95 / (256.0 + Z_95 * Z_95), epsilon = 1e-12);
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert_abs_diff_eq!(lo, 0.403_831, epsilon = 1e-5);
        assert_abs_diff_eq!(hi, 0.596_169, epsilon = 1e-5);
        assert_eq!(wilson_interval(3, 0, Z_95), (0.0, 1.0));
    }

    #[test]
    fn seeds_are_distinct_and_arm_keyed() {
        let mut all = std::collections::HashSet::new();
        for env in table2_environments() {
            for arm in [Arm::Off, Arm::Gift { gamma: 10.0 }, Arm::Gift { gamma: 2.0 }] {
                for run in 0..256 {
                    assert!(all.insert(derive_seed(9, &env.name, arm, run)));
                }
            }
        }
        assert_eq!(
            derive_seed(1, "x", Arm::Off, 5),
            derive_seed(1, "x", Arm::Gift { gamma: 0.0 }, 5)
        );
        assert_ne!(derive_seed(1, "x", Arm::Off, 5), derive_seed(2, "x", Arm::Off, 5));
    }

    #[test]
    fn every_table_environment_builds() {
        for env in table2_environments() {
            for arm in [Arm::Off, Arm::Gift { gamma: 10.0 }] {
                let e = env.spec.build(arm).unwrap();
                let expected = if arm == Arm::Off { 2 } else { 4 };
                assert_eq!(e.num_actions(0), expected, "{}", env.name);
            }
        }
        let fc4 = table2_environments()[7].spec.build(Arm::Off).unwrap();
        assert_eq!(fc4.num_agents(), 4);
        assert!(table2_environments()[8].spec.build(Arm::Off).unwrap().is_repeated());
    }

    #[test]
    fn small_study_is_reproducible_and_arms_match() {
        let spec = StudySpec {
            environments: vec![NamedEnv {
                name: "sh".into(),
                spec: EnvSpec::stag_hunt(-6.0),
            }],
            arms: vec![Arm::Off, Arm::Gift { gamma: 0.0 }, Arm::Gift { gamma: 10.0 }],
            seeds: 8,
            train: TrainConfig {
                episodes: 2000,
                ..TrainConfig::default()
            },
            workers: Some(2),
            ..StudySpec::default()
        };
        let a = convergence_table(&spec).unwrap();
        let b = convergence_table(&spec).unwrap();
        assert_eq!(a.rows.len(), 3);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.counts, y.counts);
            assert_eq!(x.outcomes, y.outcomes);
            assert_eq!(x.counts.total(), 8);
        }
        assert_eq!(a.rows[0].outcomes, a.rows[1].outcomes);
        assert_eq!(a.rows[0].seeds, a.rows[1].seeds);
        assert!(a.is_healthy());
    }

    #[test]
    fn rows_exclude_failures_from_rates() {
        let runs = vec![
            (1, OutcomeClass::Prosocial),
            (2, OutcomeClass::Failed),
            (3, OutcomeClass::RiskDominant),
        ];
        let row = StudyRow::new("x".into(), Arm::Off, runs, 0.0);
        assert_eq!(row.prosocial_rate, 0.5);
        assert_eq!(row.pne_rate, 1.0);
        assert_eq!(row.counts.total(), 3);
        let result = StudyResult {
            rows: vec![row],
            seconds: 0.0,
        };
        assert!(!result.is_healthy());
    }
}
