//! Monte Carlo experiments.
//!
//! Every trial draws its own seed from the master seed, the experiment, a
//! label naming the grid point and the trial index, so adding grid points
//! never changes the rows already produced. Trials run on the current rayon
//! pool and are aggregated in input order, which makes every report
//! independent of the worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use stratdetect_core::aggregate::aggregate;
use stratdetect_core::assign::{enumerate_assignments, sample_assignment};
use stratdetect_core::detect::{run_test_with, truthful_profile};
use stratdetect_core::presets::instance_preset;
use stratdetect_core::rng::{derive_seed, mix64, random_permutation, rng_from_seed};
use stratdetect_core::strategy::{apply_strategy, perceive_with};
use stratdetect_core::{
    AggregationRule, Assignment, Error as CoreError, NoiseModel, NoiseSchedule, ProblemInstance,
    ReviewProfile, StrategyKind, StrategyMix, Supervision, TestConfig,
};

use crate::error::{AppError, AppResult};
use crate::formats::ReportRow;

const POWER: u64 = 1;
const NOISY_SUPERVISION: u64 = 2;
const FALSE_ALARM: u64 = 3;
const GAIN: u64 = 4;
const RUNTIME: u64 = 5;

const STREAM_ASSIGNMENT: u64 = 1;
const STREAM_STRATEGY: u64 = 2;
const STREAM_PERCEPTION: u64 = 3;
const STREAM_SUPERVISION: u64 = 4;
const STREAM_TEST: u64 = 5;

/// Largest assignment set enumerated by exact gain curves.
pub const GAIN_ENUMERATION_LIMIT: usize = 100_000;

/// Noise level that may be infinite; written as a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sigma(pub f64);

impl Sigma {
    pub const INFINITE: Sigma = Sigma(f64::INFINITY);

    fn label(self) -> String {
        if self.0.is_infinite() {
            "inf".into()
        } else {
            self.0.to_string()
        }
    }
}

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Sigma(v)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity") => Ok(Sigma::INFINITE),
            Raw::Text(t) => Err(de::Error::custom(format!("invalid sigma {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupervisionKind {
    None,
    GroundTruth,
}

impl SupervisionKind {
    fn label(self) -> &'static str {
        match self {
            SupervisionKind::None => "none",
            SupervisionKind::GroundTruth => "ground-truth",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setup {
    TopHalfZero,
    LinearInRank,
}

impl From<Setup> for NoiseSchedule {
    fn from(s: Setup) -> Self {
        match s {
            Setup::TopHalfZero => NoiseSchedule::TopHalfZero,
            Setup::LinearInRank => NoiseSchedule::LinearInRank,
        }
    }
}

fn default_preset() -> String {
    "game20".into()
}
fn default_alpha() -> f64 {
    0.05
}
fn default_k() -> usize {
    100
}
fn default_fractions() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}
fn default_supervision() -> Vec<SupervisionKind> {
    vec![SupervisionKind::None, SupervisionKind::GroundTruth]
}
fn default_distance() -> String {
    "distance".into()
}
fn default_supervision_sigmas() -> Vec<Sigma> {
    vec![
        Sigma(0.0),
        Sigma(1.0),
        Sigma(3.0),
        Sigma(5.0),
        Sigma::INFINITE,
    ]
}
fn default_setups() -> Vec<Setup> {
    vec![Setup::TopHalfZero, Setup::LinearInRank]
}
fn default_sigmas() -> Vec<f64> {
    vec![0.0, 2.0, 4.0, 6.0]
}
fn default_strategies() -> Vec<String> {
    StrategyKind::ALL[1..]
        .iter()
        .map(|k| k.name().to_string())
        .collect()
}
fn default_sizes() -> Vec<usize> {
    vec![20, 50, 100, 200, 500, 1000]
}
fn default_load() -> usize {
    4
}
fn default_one() -> usize {
    1
}

/// Rejection rate of the test when a share of reviewers follows a strategy
/// mix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    #[serde(default = "default_preset")]
    pub preset: String,
    /// Strategy mixes: `round1`..`round5`, their `-unclassified-truthful`
    /// variants, or a single strategy name.
    pub populations: Vec<String>,
    #[serde(default = "default_fractions")]
    pub truthful_fractions: Vec<f64>,
    #[serde(default = "default_supervision")]
    pub supervision: Vec<SupervisionKind>,
    /// Gaussian noise added to the values every reviewer perceives.
    #[serde(default)]
    pub reviewer_sigma: f64,
    /// Noise of the impartial rankings used for ground-truth supervision.
    #[serde(default = "zero_sigma")]
    pub supervision_sigma: Sigma,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

fn zero_sigma() -> Sigma {
    Sigma(0.0)
}

/// Power of the supervised test as the impartial rankings get noisier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisySupervisionConfig {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "default_distance")]
    pub population: String,
    #[serde(default = "default_fractions")]
    pub truthful_fractions: Vec<f64>,
    #[serde(default = "default_supervision_sigmas")]
    pub supervision_sigmas: Vec<Sigma>,
    #[serde(default)]
    pub reviewer_sigma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Rejection rate when reviewer noise depends on the quality of the
/// reviewer's own work. Impartial rankings carry half the base noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalseAlarmConfig {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "default_setups")]
    pub setups: Vec<Setup>,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_supervision")]
    pub supervision: Vec<SupervisionKind>,
    /// Every reviewer plays Distance on its noisy values instead of
    /// ranking truthfully.
    #[serde(default)]
    pub manipulate: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Expected gain in final position of one strategic reviewer among
/// truthful ones, per true rank of its work.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    #[serde(default = "default_preset")]
    pub preset: String,
    /// Strategy names or fixed rearrangements of the truthful ranking such
    /// as `fixed:2,1,0` (third-best first).
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    /// True ranks (1 = best) of the strategic reviewer's work; all by
    /// default.
    #[serde(default)]
    pub positions: Option<Vec<usize>>,
    /// Average over every valid assignment instead of sampling.
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub trials: usize,
    pub seed: u64,
}

/// Wall time of single test runs on growing identity instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeConfig {
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_load")]
    pub load: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_one")]
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Power(PowerConfig),
    NoisySupervision(NoisySupervisionConfig),
    FalseAlarm(FalseAlarmConfig),
    Gain(GainConfig),
    Runtime(RuntimeConfig),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        serde_json::from_str(text).map_err(|e| AppError::Config(format!("experiment config: {e}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Power(_) => "power",
            ExperimentConfig::NoisySupervision(_) => "noisy_supervision",
            ExperimentConfig::FalseAlarm(_) => "false_alarm",
            ExperimentConfig::Gain(_) => "gain",
            ExperimentConfig::Runtime(_) => "runtime",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Power(c) => c.seed,
            ExperimentConfig::NoisySupervision(c) => c.seed,
            ExperimentConfig::FalseAlarm(c) => c.seed,
            ExperimentConfig::Gain(c) => c.seed,
            ExperimentConfig::Runtime(c) => c.seed,
        }
    }

    /// Whether rows depend only on the config (wall-time reports do not).
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, ExperimentConfig::Runtime(_))
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> AppResult<Vec<ReportRow>> {
    match config {
        ExperimentConfig::Power(c) => power_experiment(c),
        ExperimentConfig::NoisySupervision(c) => noisy_supervision_experiment(c),
        ExperimentConfig::FalseAlarm(c) => false_alarm_experiment(c),
        ExperimentConfig::Gain(c) => expected_gain_curve(c),
        ExperimentConfig::Runtime(c) => runtime_bench(c),
    }
}

fn label_key(label: &str) -> u64 {
    label
        .bytes()
        .fold(mix64(label.len() as u64), |h, b| mix64(h ^ u64::from(b)))
}

fn trial_seed(master: u64, experiment: u64, label: &str, trial: usize) -> u64 {
    derive_seed(&[master, experiment, label_key(label), trial as u64])
}

fn check_trials(trials: usize) -> AppResult<()> {
    if trials == 0 {
        return Err(AppError::InvalidGrid("trials must be at least 1".into()));
    }
    Ok(())
}

fn check_nonempty<T>(what: &str, v: &[T]) -> AppResult<()> {
    if v.is_empty() {
        return Err(AppError::InvalidGrid(format!("{what} must not be empty")));
    }
    Ok(())
}

fn check_fractions(v: &[f64]) -> AppResult<()> {
    check_nonempty("truthful_fractions", v)?;
    if let Some(f) = v.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(AppError::InvalidGrid(format!(
            "truthful fraction {f} outside [0, 1]"
        )));
    }
    Ok(())
}

fn check_sigma(s: f64) -> AppResult<()> {
    if s.is_nan() || s < 0.0 {
        return Err(CoreError::InvalidNoise(s).into());
    }
    Ok(())
}

fn test_config(alpha: f64, k: usize) -> AppResult<TestConfig> {
    let c = TestConfig {
        alpha,
        k,
        ..TestConfig::default()
    };
    c.validate()?;
    Ok(c)
}

/// How reviewers behave in a simulated round.
#[derive(Clone, Debug)]
pub struct Agents {
    pub mix: StrategyMix,
    /// Share of reviewers forced to be truthful; the rest draw from `mix`.
    pub truthful_fraction: f64,
    pub noise: NoiseModel,
}

/// Strategy of every reviewer: exactly `round(fraction * m)` reviewers,
/// chosen uniformly, are truthful and the others draw from the mix.
pub fn assign_strategies(m: usize, agents: &Agents, seed: u64) -> Vec<StrategyKind> {
    let mut rng = rng_from_seed(seed);
    let truthful = ((agents.truthful_fraction * m as f64).round() as usize).min(m);
    let order = random_permutation(m, &mut rng);
    let mut kinds = vec![StrategyKind::Truthful; m];
    let drawn = agents.mix.sample_with(m - truthful, &mut rng);
    for (&i, k) in order[truthful..].iter().zip(drawn) {
        kinds[i] = k;
    }
    kinds
}

/// Rankings produced by `agents` on `assignment`. Each reviewer perceives
/// the values of its works with its own noise level and knows the true
/// value of the first work it authors; reviewers without one are truthful.
pub fn simulate_profile(
    inst: &ProblemInstance,
    assignment: &Assignment,
    agents: &Agents,
    seed: u64,
) -> AppResult<ReviewProfile> {
    simulate_agents(inst, assignment, agents, seed).map(|(_, p)| p)
}

/// [`simulate_profile`] together with the strategy each reviewer played.
pub fn simulate_agents(
    inst: &ProblemInstance,
    assignment: &Assignment,
    agents: &Agents,
    seed: u64,
) -> AppResult<(Vec<StrategyKind>, ReviewProfile)> {
    let mut kinds = assign_strategies(inst.m, agents, derive_seed(&[seed, STREAM_STRATEGY]));
    let ranks = inst.true_ranks();
    let mut orders = Vec::with_capacity(inst.m);
    for (i, kind) in kinds.iter_mut().enumerate() {
        let own = inst.authorship.row(i).first().copied();
        let sigma = agents.noise.sigma_for(own.map(|w| ranks[w]), inst.n)?;
        let works = assignment.works(i);
        let values: Vec<f64> = works.iter().map(|&w| inst.qualities[w]).collect();
        let mut rng = rng_from_seed(derive_seed(&[seed, STREAM_PERCEPTION, i as u64]));
        let perceived = perceive_with(&values, sigma, &mut rng)?;
        let seen: Vec<(usize, f64)> = works.iter().copied().zip(perceived).collect();
        let own_value = match own {
            Some(w) => inst.qualities[w],
            None => {
                *kind = StrategyKind::Truthful;
                0.0
            }
        };
        orders.push(apply_strategy(*kind, own_value, &seen, inst.n));
    }
    Ok((kinds, ReviewProfile::new(orders)))
}

/// Impartial rankings from the random utility model with noise `sigma`;
/// an infinite level gives uniformly random rankings.
pub fn impartial_profile(
    inst: &ProblemInstance,
    assignment: &Assignment,
    sigma: Sigma,
    seed: u64,
) -> AppResult<ReviewProfile> {
    let mut rng = rng_from_seed(seed);
    let orders = (0..inst.m)
        .map(|i| {
            let works = assignment.works(i);
            if sigma.0.is_infinite() {
                return Ok(random_permutation(works.len(), &mut rng)
                    .into_iter()
                    .map(|k| works[k])
                    .collect());
            }
            let values: Vec<f64> = works.iter().map(|&w| inst.qualities[w]).collect();
            let seen: Vec<(usize, f64)> = works
                .iter()
                .copied()
                .zip(perceive_with(&values, sigma.0, &mut rng)?)
                .collect();
            Ok(apply_strategy(StrategyKind::Truthful, 0.0, &seen, inst.n))
        })
        .collect::<AppResult<Vec<_>>>()?;
    Ok(ReviewProfile::new(orders))
}

fn supervision(
    kind: SupervisionKind,
    sigma: Sigma,
    inst: &ProblemInstance,
    assignment: &Assignment,
    seed: u64,
) -> AppResult<Supervision> {
    Ok(match kind {
        SupervisionKind::None => Supervision::None,
        SupervisionKind::GroundTruth if sigma.0 == 0.0 => Supervision::GroundTruth,
        SupervisionKind::GroundTruth => {
            Supervision::Impartial(impartial_profile(inst, assignment, sigma, seed)?)
        }
    })
}

/// Null statistics evaluated in parallel, in input order.
pub fn parallel_phi(
    table: &stratdetect_core::detect::ImpactTable,
    nulls: &[stratdetect_core::BinaryMatrix],
) -> Vec<i64> {
    nulls.par_iter().map(|a| table.statistic(a)).collect()
}

struct RateSeries {
    label: String,
    kind: SupervisionKind,
    sigma: Sigma,
}

struct RatePoint {
    /// Seeds the trials; unique within the experiment.
    key: String,
    x: String,
    agents: Agents,
    series: Vec<RateSeries>,
}

/// One simulated round, tested once per series on the same data.
fn rate_trial(
    inst: &ProblemInstance,
    point: &RatePoint,
    config: &TestConfig,
    seed: u64,
) -> AppResult<Vec<bool>> {
    let assignment = sample_assignment(inst, derive_seed(&[seed, STREAM_ASSIGNMENT]))?;
    let profile = simulate_profile(inst, &assignment, &point.agents, seed)?;
    let test_seed = derive_seed(&[seed, STREAM_TEST]);
    point
        .series
        .iter()
        .map(|s| {
            let sup = supervision(
                s.kind,
                s.sigma,
                inst,
                &assignment,
                derive_seed(&[seed, STREAM_SUPERVISION]),
            )?;
            let cfg = TestConfig {
                supervision: sup,
                seed: test_seed,
                ..config.clone()
            };
            Ok(run_test_with(inst, &assignment, &profile, &cfg, |t, n| {
                n.iter().map(|a| t.statistic(a)).collect()
            })?
            .reject)
        })
        .collect()
}

fn rate_row(series: &str, x: &str, hits: u64, trials: u64) -> ReportRow {
    let p = hits as f64 / trials as f64;
    ReportRow {
        series: series.to_string(),
        x: x.to_string(),
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    }
}

fn run_rates(
    experiment: u64,
    master: u64,
    trials: usize,
    inst: &ProblemInstance,
    config: &TestConfig,
    points: &[RatePoint],
) -> AppResult<Vec<ReportRow>> {
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(p, t)| {
            let seed = trial_seed(master, experiment, &points[p].key, t);
            rate_trial(inst, &points[p], config, seed)
        })
        .collect::<AppResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (p, point) in points.iter().enumerate() {
        let chunk = &outcomes[p * trials..(p + 1) * trials];
        for (s, series) in point.series.iter().enumerate() {
            let hits = chunk.iter().filter(|o| o[s]).count() as u64;
            rows.push(rate_row(&series.label, &point.x, hits, trials as u64));
        }
    }
    Ok(rows)
}

pub fn power_experiment(c: &PowerConfig) -> AppResult<Vec<ReportRow>> {
    check_trials(c.trials)?;
    check_nonempty("populations", &c.populations)?;
    check_nonempty("supervision", &c.supervision)?;
    check_fractions(&c.truthful_fractions)?;
    check_sigma(c.reviewer_sigma)?;
    check_sigma(c.supervision_sigma.0)?;
    let inst = instance_preset(&c.preset)?;
    let config = test_config(c.alpha, c.k)?;
    let mut points = Vec::new();
    for pop in &c.populations {
        let mix = StrategyMix::preset(pop)?;
        for &f in &c.truthful_fractions {
            points.push(RatePoint {
                key: format!("{pop}|{f}"),
                x: f.to_string(),
                agents: Agents {
                    mix: mix.clone(),
                    truthful_fraction: f,
                    noise: NoiseModel::Gaussian(c.reviewer_sigma),
                },
                series: c
                    .supervision
                    .iter()
                    .map(|&kind| RateSeries {
                        label: format!("{pop}|{}", kind.label()),
                        kind,
                        sigma: c.supervision_sigma,
                    })
                    .collect(),
            });
        }
    }
    run_rates(POWER, c.seed, c.trials, &inst, &config, &points)
}

pub fn noisy_supervision_experiment(c: &NoisySupervisionConfig) -> AppResult<Vec<ReportRow>> {
    check_trials(c.trials)?;
    check_fractions(&c.truthful_fractions)?;
    check_nonempty("supervision_sigmas", &c.supervision_sigmas)?;
    check_sigma(c.reviewer_sigma)?;
    for s in &c.supervision_sigmas {
        check_sigma(s.0)?;
    }
    let inst = instance_preset(&c.preset)?;
    let config = test_config(c.alpha, c.k)?;
    let mix = StrategyMix::preset(&c.population)?;
    let points: Vec<RatePoint> = c
        .truthful_fractions
        .iter()
        .map(|&f| RatePoint {
            key: format!("{}|{f}", c.population),
            x: f.to_string(),
            agents: Agents {
                mix: mix.clone(),
                truthful_fraction: f,
                noise: NoiseModel::Gaussian(c.reviewer_sigma),
            },
            series: c
                .supervision_sigmas
                .iter()
                .map(|&sigma| RateSeries {
                    label: format!("sigma={}", sigma.label()),
                    kind: SupervisionKind::GroundTruth,
                    sigma,
                })
                .collect(),
        })
        .collect();
    run_rates(NOISY_SUPERVISION, c.seed, c.trials, &inst, &config, &points)
}

pub fn false_alarm_experiment(c: &FalseAlarmConfig) -> AppResult<Vec<ReportRow>> {
    check_trials(c.trials)?;
    check_nonempty("setups", &c.setups)?;
    check_nonempty("sigmas", &c.sigmas)?;
    check_nonempty("supervision", &c.supervision)?;
    for &s in &c.sigmas {
        check_sigma(s)?;
        if s.is_infinite() {
            return Err(CoreError::InvalidNoise(s).into());
        }
    }
    let inst = instance_preset(&c.preset)?;
    let config = test_config(c.alpha, c.k)?;
    let mut points = Vec::new();
    for &setup in &c.setups {
        let name = serde_json::to_value(setup).expect("setup serializes");
        let name = name.as_str().expect("setup is a string");
        for &sigma in &c.sigmas {
            points.push(RatePoint {
                key: format!("{name}|{sigma}"),
                x: sigma.to_string(),
                agents: Agents {
                    mix: StrategyMix::pure(StrategyKind::Distance),
                    truthful_fraction: if c.manipulate { 0.0 } else { 1.0 },
                    noise: NoiseModel::PerReviewer {
                        schedule: setup.into(),
                        sigma,
                    },
                },
                series: c
                    .supervision
                    .iter()
                    .map(|&kind| RateSeries {
                        label: format!("{name}|{}", kind.label()),
                        kind,
                        sigma: Sigma(sigma / 2.0),
                    })
                    .collect(),
            });
        }
    }
    run_rates(FALSE_ALARM, c.seed, c.trials, &inst, &config, &points)
}

/// A strategy of the gain experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum GainStrategy {
    Kind(StrategyKind),
    /// Output position `k` holds the `order[k]`-th best work (0-based).
    Fixed(Vec<usize>),
}

impl GainStrategy {
    pub fn parse(s: &str, mu: usize) -> AppResult<Self> {
        if let Some(spec) = s.strip_prefix("fixed:") {
            let order: Vec<usize> = spec
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| AppError::Config(format!("invalid fixed strategy {s:?}")))?;
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..mu).collect::<Vec<_>>() {
                return Err(AppError::Config(format!(
                    "fixed strategy {s:?} is not a permutation of 0..{mu}"
                )));
            }
            return Ok(GainStrategy::Fixed(order));
        }
        Ok(GainStrategy::Kind(StrategyKind::parse(s)?))
    }

    fn rank(&self, inst: &ProblemInstance, own_value: f64, works: &[usize]) -> Vec<usize> {
        let seen: Vec<(usize, f64)> = works.iter().map(|&w| (w, inst.qualities[w])).collect();
        match self {
            GainStrategy::Kind(k) => apply_strategy(*k, own_value, &seen, inst.n),
            GainStrategy::Fixed(order) => {
                let truthful = apply_strategy(StrategyKind::Truthful, own_value, &seen, inst.n);
                order.iter().map(|&k| truthful[k]).collect()
            }
        }
    }
}

/// Gains of every strategy at every position for one assignment.
fn gain_trial(
    inst: &ProblemInstance,
    assignment: &Assignment,
    targets: &[(usize, usize)],
    strategies: &[GainStrategy],
) -> AppResult<Vec<Vec<f64>>> {
    let rule = AggregationRule::Borda;
    let truthful = truthful_profile(assignment, &inst.qualities);
    let base = aggregate(&truthful, &rule, inst.n)?.positions;
    let mut out = vec![vec![0.0; targets.len()]; strategies.len()];
    for (p, &(work, reviewer)) in targets.iter().enumerate() {
        for (s, strategy) in strategies.iter().enumerate() {
            let mut profile = truthful.clone();
            let order = strategy.rank(inst, inst.qualities[work], assignment.works(reviewer));
            profile.set_order(reviewer, order);
            let now = aggregate(&profile, &rule, inst.n)?.positions;
            out[s][p] = base[work] as f64 - now[work] as f64;
        }
    }
    Ok(out)
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, count: usize, exact: bool) -> (f64, f64) {
    let n = count as f64;
    let mean = values.clone().sum::<f64>() / n;
    if exact || count < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Rows per strategy: one per position, then `x = "mean"` for the
/// average over positions (its standard error comes from per-trial
/// averages). Exact curves report a standard error of 0 and the number of
/// assignments as `trials`.
pub fn expected_gain_curve(c: &GainConfig) -> AppResult<Vec<ReportRow>> {
    let inst = instance_preset(&c.preset)?;
    check_nonempty("strategies", &c.strategies)?;
    if !c.exact {
        check_trials(c.trials)?;
    }
    let strategies = c
        .strategies
        .iter()
        .map(|s| GainStrategy::parse(s, inst.mu))
        .collect::<AppResult<Vec<_>>>()?;
    let positions = c
        .positions
        .clone()
        .unwrap_or_else(|| (1..=inst.n).collect());
    check_nonempty("positions", &positions)?;
    let ranks = inst.true_ranks();
    let targets = positions
        .iter()
        .map(|&p| {
            let work = ranks.iter().position(|&r| r == p).ok_or_else(|| {
                AppError::InvalidGrid(format!("position {p} outside 1..={}", inst.n))
            })?;
            let reviewer = (0..inst.m)
                .find(|&i| inst.authorship.row(i).contains(&work))
                .ok_or_else(|| {
                    AppError::InvalidGrid(format!("work at position {p} has no author"))
                })?;
            Ok((work, reviewer))
        })
        .collect::<AppResult<Vec<_>>>()?;

    let per_trial: Vec<Vec<Vec<f64>>> = if c.exact {
        let all = enumerate_assignments(&inst, GAIN_ENUMERATION_LIMIT)?;
        all.par_iter()
            .map(|a| gain_trial(&inst, a, &targets, &strategies))
            .collect::<AppResult<_>>()?
    } else {
        (0..c.trials)
            .into_par_iter()
            .map(|t| {
                let a = sample_assignment(&inst, trial_seed(c.seed, GAIN, "assignment", t))?;
                gain_trial(&inst, &a, &targets, &strategies)
            })
            .collect::<AppResult<_>>()?
    };
    let count = per_trial.len();
    let mut rows = Vec::new();
    for (s, label) in c.strategies.iter().enumerate() {
        for (p, pos) in positions.iter().enumerate() {
            let (mean, se) = mean_and_se(per_trial.iter().map(|t| t[s][p]), count, c.exact);
            rows.push(ReportRow {
                series: label.clone(),
                x: pos.to_string(),
                estimate: mean,
                stderr: se,
                trials: count as u64,
            });
        }
        let averages = per_trial
            .iter()
            .map(|t| t[s].iter().sum::<f64>() / positions.len() as f64);
        let (mean, se) = mean_and_se(averages, count, c.exact);
        rows.push(ReportRow {
            series: label.clone(),
            x: "mean".into(),
            estimate: mean,
            stderr: se,
            trials: count as u64,
        });
    }
    Ok(rows)
}

/// Wall-clock seconds per test run. Null statistics are evaluated on the
/// current rayon pool.
pub fn runtime_bench(c: &RuntimeConfig) -> AppResult<Vec<ReportRow>> {
    check_trials(c.trials)?;
    check_nonempty("sizes", &c.sizes)?;
    let config = test_config(c.alpha, c.k)?;
    let mut rows = Vec::new();
    for &n in &c.sizes {
        if c.load >= n {
            return Err(AppError::InvalidGrid(format!(
                "load {} too large for n = {n}",
                c.load
            )));
        }
        let inst = ProblemInstance::identity(n, c.load);
        let mut times = Vec::with_capacity(c.trials);
        for t in 0..c.trials {
            let seed = trial_seed(c.seed, RUNTIME, &n.to_string(), t);
            let a = sample_assignment(&inst, derive_seed(&[seed, STREAM_ASSIGNMENT]))?;
            let p = truthful_profile(&a, &inst.qualities);
            let cfg = TestConfig {
                seed: derive_seed(&[seed, STREAM_TEST]),
                ..config.clone()
            };
            let start = Instant::now();
            run_test_with(&inst, &a, &p, &cfg, parallel_phi)?;
            times.push(start.elapsed().as_secs_f64());
        }
        let (mean, se) = mean_and_se(times.iter().copied(), times.len(), false);
        rows.push(ReportRow {
            series: "runtime".into(),
            x: n.to_string(),
            estimate: mean,
            stderr: se,
            trials: c.trials as u64,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_with_defaults() {
        let c = ExperimentConfig::parse(
            r#"{"experiment":"power","populations":["round4"],"trials":3,"seed":1}"#,
        )
        .unwrap();
        let ExperimentConfig::Power(p) = &c else {
            panic!("wrong variant")
        };
        assert_eq!(p.truthful_fractions.len(), 11);
        assert_eq!(p.supervision, default_supervision());
        assert_eq!(p.k, 100);
        assert_eq!(c.name(), "power");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::parse(
            r#"{"experiment":"power","populations":["round4"],"trials":3,"seed":1,"bogus":2}"#
        )
        .is_err());
    }

    #[test]
    fn infinite_sigma_round_trips() {
        let c = ExperimentConfig::parse(
            r#"{"experiment":"noisy_supervision","supervision_sigmas":[0,"inf"],"trials":1,"seed":1}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"inf\""));
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn zero_trials_is_invalid_grid() {
        let c = PowerConfig {
            preset: "game20".into(),
            populations: vec!["round1".into()],
            truthful_fractions: vec![0.5],
            supervision: default_supervision(),
            reviewer_sigma: 0.0,
            supervision_sigma: Sigma(0.0),
            alpha: 0.05,
            k: 100,
            trials: 0,
            seed: 1,
        };
        assert!(matches!(
            power_experiment(&c),
            Err(AppError::InvalidGrid(_))
        ));
    }

    #[test]
    fn unknown_preset() {
        let c = GainConfig {
            preset: "game21".into(),
            strategies: vec!["reverse".into()],
            positions: None,
            exact: false,
            trials: 1,
            seed: 0,
        };
        let e = expected_gain_curve(&c).unwrap_err();
        assert_eq!(e.code(), "UnknownPreset");
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn truthful_share_is_exact() {
        let agents = Agents {
            mix: StrategyMix::pure(StrategyKind::Distance),
            truthful_fraction: 0.3,
            noise: NoiseModel::None,
        };
        let kinds = assign_strategies(20, &agents, 9);
        assert_eq!(
            kinds
                .iter()
                .filter(|&&k| k == StrategyKind::Truthful)
                .count(),
            6
        );
    }

    #[test]
    fn noiseless_truthful_agents_rank_by_value() {
        let inst = ProblemInstance::identity(20, 4);
        let a = sample_assignment(&inst, 2).unwrap();
        let agents = Agents {
            mix: StrategyMix::pure(StrategyKind::Reverse),
            truthful_fraction: 1.0,
            noise: NoiseModel::None,
        };
        let p = simulate_profile(&inst, &a, &agents, 3).unwrap();
        assert_eq!(p, truthful_profile(&a, &inst.qualities));
        let zero = impartial_profile(&inst, &a, Sigma(0.0), 4).unwrap();
        assert_eq!(zero, p);
    }

    #[test]
    fn fixed_strategy_parse() {
        assert_eq!(
            GainStrategy::parse("fixed:2,0,1", 3).unwrap(),
            GainStrategy::Fixed(vec![2, 0, 1])
        );
        assert!(GainStrategy::parse("fixed:2,2,1", 3).is_err());
        assert!(GainStrategy::parse("bogus", 3).is_err());
    }

    #[test]
    fn identity_fixed_strategy_has_no_gain() {
        let c = GainConfig {
            preset: "toy5".into(),
            strategies: vec!["fixed:0,1,2".into(), "truthful".into()],
            positions: None,
            exact: true,
            trials: 0,
            seed: 0,
        };
        let rows = expected_gain_curve(&c).unwrap();
        assert!(rows.iter().all(|r| r.estimate == 0.0 && r.trials == 44));
    }
}
