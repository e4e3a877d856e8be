//! Reviewer behaviour: noisy perception of quality, the truthful ranking and
//! the manipulation strategies observed in the peer-grading game.
//!
//! Strategies rank a reviewer's assigned works from the values the reviewer
//! perceives and, for the manipulative ones, the reviewer's own value `v*`.
//! Values live on the game's `1..=n` scale where that matters (See-Saw's
//! threshold and the 2x-Distance reflection).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Truthful,
    Reverse,
    Distance,
    SeeSaw,
    BetterToBottom,
    WorseToBottom,
    TwoXDistance,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Truthful,
        StrategyKind::Reverse,
        StrategyKind::Distance,
        StrategyKind::SeeSaw,
        StrategyKind::BetterToBottom,
        StrategyKind::WorseToBottom,
        StrategyKind::TwoXDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Truthful => "truthful",
            StrategyKind::Reverse => "reverse",
            StrategyKind::Distance => "distance",
            StrategyKind::SeeSaw => "see-saw",
            StrategyKind::BetterToBottom => "better-to-bottom",
            StrategyKind::WorseToBottom => "worse-to-bottom",
            StrategyKind::TwoXDistance => "2x-distance",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match key.as_str() {
            "truthful" => StrategyKind::Truthful,
            "reverse" => StrategyKind::Reverse,
            "distance" => StrategyKind::Distance,
            "seesaw" => StrategyKind::SeeSaw,
            "bettertobottom" => StrategyKind::BetterToBottom,
            "worsetobottom" => StrategyKind::WorseToBottom,
            "2xdistance" | "twoxdistance" => StrategyKind::TwoXDistance,
            _ => return Err(Error::UnknownStrategy(name.into())),
        })
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a reviewer's noise level depends on the rank of its own work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseSchedule {
    /// Authors of the top half are noiseless, the rest have `sigma`.
    TopHalfZero,
    /// `sigma * k / n` for an author whose work has true rank `k`.
    LinearInRank,
}

impl NoiseSchedule {
    pub fn name(self) -> &'static str {
        match self {
            NoiseSchedule::TopHalfZero => "top-half-zero",
            NoiseSchedule::LinearInRank => "linear-in-rank",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "top-half-zero" => Some(NoiseSchedule::TopHalfZero),
            "linear-in-rank" => Some(NoiseSchedule::LinearInRank),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    None,
    /// Independent Gaussian noise with the same standard deviation for
    /// every reviewer.
    Gaussian(f64),
    PerReviewer {
        schedule: NoiseSchedule,
        sigma: f64,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::Gaussian(s) | NoiseModel::PerReviewer { sigma: s, .. } => {
                if s.is_finite() && s >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidNoise(s))
                }
            }
        }
    }

    /// Noise level of a reviewer whose own work has true rank
    /// `reviewer_rank` (1 = best). Reviewers without an authored work get
    /// the base level.
    pub fn sigma_for(&self, reviewer_rank: Option<usize>, n: usize) -> Result<f64> {
        self.validate()?;
        match *self {
            NoiseModel::None => Ok(0.0),
            NoiseModel::Gaussian(s) => Ok(s),
            NoiseModel::PerReviewer { schedule, sigma } => match reviewer_rank {
                Some(k) => noise_level(schedule, k, n, sigma),
                None => Ok(sigma),
            },
        }
    }
}

pub fn noise_level(schedule: NoiseSchedule, rank: usize, n: usize, sigma: f64) -> Result<f64> {
    if rank == 0 || rank > n {
        return Err(Error::RankOutOfRange { rank, n });
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidNoise(sigma));
    }
    Ok(match schedule {
        NoiseSchedule::TopHalfZero => {
            if 2 * rank <= n {
                0.0
            } else {
                sigma
            }
        }
        NoiseSchedule::LinearInRank => sigma * rank as f64 / n as f64,
    })
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every value.
pub fn perceive_with<R: Rng + ?Sized>(values: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidNoise(sigma));
    }
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| Error::InvalidNoise(sigma))?;
    Ok(values.iter().map(|v| v + normal.sample(rng)).collect())
}

/// Perceived utilities of `values` for a reviewer whose own work has true
/// rank `reviewer_rank`, under `model`.
pub fn perceive(
    values: &[f64],
    model: &NoiseModel,
    reviewer_rank: Option<usize>,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let sigma = model.sigma_for(reviewer_rank, n)?;
    perceive_with(values, sigma, &mut rng_from_seed(seed))
}

/// `min(n - v, v - 1)`: distance of `v` from the nearer end of `1..=n`.
pub fn reflect(value: f64, n: usize) -> f64 {
    (n as f64 - value).min(value - 1.0)
}

fn by_value_desc(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

fn by_value_asc(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Decreasing distance from `own`; equidistant works put the higher value
/// first, then the lower id. With own value 2 out of 20 this keeps the work
/// valued 1, the only one below, at the bottom.
fn by_distance(own: f64) -> impl Fn(&(usize, f64), &(usize, f64)) -> Ordering {
    move |a, b| {
        (b.1 - own)
            .abs()
            .total_cmp(&(a.1 - own).abs())
            .then(b.1.total_cmp(&a.1))
            .then(a.0.cmp(&b.0))
    }
}

/// Ranks `assigned` (work id, perceived value) best first.
///
/// Works valued exactly `own_value` count as "better" in the two
/// bottom-placing strategies.
pub fn apply_strategy(
    kind: StrategyKind,
    own_value: f64,
    assigned: &[(usize, f64)],
    n: usize,
) -> Vec<usize> {
    let mut items = assigned.to_vec();
    match kind {
        StrategyKind::Truthful => items.sort_by(by_value_desc),
        StrategyKind::Reverse => items.sort_by(by_value_asc),
        StrategyKind::Distance => items.sort_by(by_distance(own_value)),
        StrategyKind::SeeSaw => {
            let kind = if own_value > n as f64 / 2.0 {
                StrategyKind::Reverse
            } else {
                StrategyKind::Truthful
            };
            return apply_strategy(kind, own_value, assigned, n);
        }
        StrategyKind::BetterToBottom | StrategyKind::WorseToBottom => {
            let (mut lower, mut upper): (Vec<_>, Vec<_>) =
                items.into_iter().partition(|&(_, v)| v < own_value);
            if kind == StrategyKind::BetterToBottom {
                lower.sort_by(by_value_asc);
                upper.sort_by(by_value_desc);
                lower.extend(upper);
                items = lower;
            } else {
                upper.sort_by(by_value_asc);
                lower.sort_by(by_value_desc);
                upper.extend(lower);
                items = upper;
            }
        }
        StrategyKind::TwoXDistance => {
            let own = reflect(own_value, n);
            let mut mapped: Vec<(usize, f64)> =
                items.iter().map(|&(w, v)| (w, reflect(v, n))).collect();
            mapped.sort_by(by_distance(own));
            return mapped.into_iter().map(|(w, _)| w).collect();
        }
    }
    items.into_iter().map(|(w, _)| w).collect()
}

/// Probability of each strategy among strategic reviewers.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyMix {
    weights: Vec<(StrategyKind, f64)>,
}

/// Per-round strategy shares among classified manipulators, and the number
/// of unclassified participants out of 55.
const ROUNDS: [(&[(StrategyKind, f64)], u32); 5] = {
    use StrategyKind::*;
    [
        (
            &[
                (Reverse, 0.50),
                (Distance, 0.37),
                (SeeSaw, 0.09),
                (BetterToBottom, 0.02),
                (WorseToBottom, 0.02),
            ],
            5,
        ),
        (
            &[
                (Reverse, 0.33),
                (Distance, 0.53),
                (SeeSaw, 0.08),
                (BetterToBottom, 0.04),
                (WorseToBottom, 0.02),
            ],
            7,
        ),
        (&[(Reverse, 0.05), (Distance, 0.93), (SeeSaw, 0.02)], 4),
        (&[(Reverse, 0.03), (Distance, 0.96), (SeeSaw, 0.01)], 4),
        (
            &[(Reverse, 0.06), (Distance, 0.78), (TwoXDistance, 0.16)],
            18,
        ),
    ]
};

const PARTICIPANTS: u32 = 55;

impl StrategyMix {
    /// Normalizes non-negative weights. Repeated kinds are merged.
    pub fn new(weights: &[(StrategyKind, f64)]) -> Result<Self> {
        if weights.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::EmptyMix);
        }
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::EmptyMix);
        }
        let mut merged: Vec<(StrategyKind, f64)> = Vec::new();
        for &(k, w) in weights {
            if w == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(m, _)| *m == k) {
                Some(slot) => slot.1 += w / total,
                None => merged.push((k, w / total)),
            }
        }
        merged.sort_by_key(|(k, _)| *k);
        Ok(Self { weights: merged })
    }

    pub fn pure(kind: StrategyKind) -> Self {
        Self {
            weights: vec![(kind, 1.0)],
        }
    }

    pub fn weights(&self) -> &[(StrategyKind, f64)] {
        &self.weights
    }

    /// Named mixes: `round1`..`round5` (unclassified participants dropped),
    /// `round1-unclassified-truthful`..`round5-unclassified-truthful`
    /// (unclassified participants play truthfully), and every strategy name
    /// as a pure mix.
    pub fn preset(name: &str) -> Result<Self> {
        if let Some(rest) = name.strip_prefix("round") {
            let (digit, truthful) = match rest.strip_suffix("-unclassified-truthful") {
                Some(d) => (d, true),
                None => (rest, false),
            };
            let round: usize = digit
                .parse()
                .ok()
                .filter(|r| (1..=5).contains(r))
                .ok_or_else(|| Error::UnknownPreset(name.into()))?;
            let (shares, unclassified) = ROUNDS[round - 1];
            if !truthful {
                return Self::new(shares);
            }
            let classified = f64::from(PARTICIPANTS - unclassified) / f64::from(PARTICIPANTS);
            let mut w: Vec<(StrategyKind, f64)> =
                shares.iter().map(|&(k, s)| (k, s * classified)).collect();
            w.push((
                StrategyKind::Truthful,
                f64::from(unclassified) / f64::from(PARTICIPANTS),
            ));
            return Self::new(&w);
        }
        StrategyKind::parse(name)
            .map(Self::pure)
            .map_err(|_| Error::UnknownPreset(name.into()))
    }

    pub fn preset_names() -> Vec<String> {
        let mut out = Vec::new();
        for r in 1..=5 {
            out.push(alloc::format!("round{r}"));
            out.push(alloc::format!("round{r}-unclassified-truthful"));
        }
        out.extend(StrategyKind::ALL.iter().map(|k| String::from(k.name())));
        out
    }

    /// One categorical draw per reviewer.
    pub fn sample_with<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<StrategyKind> {
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(k, w) in &self.weights {
                    acc += w;
                    if u < acc {
                        return k;
                    }
                }
                self.weights.last().expect("mix is non-empty").0
            })
            .collect()
    }
}

/// Draws a strategy for each of `m` reviewers.
pub fn sample_mix(mix: &StrategyMix, m: usize, seed: u64) -> Result<Vec<StrategyKind>> {
    if mix.weights.is_empty() {
        return Err(Error::EmptyMix);
    }
    Ok(mix.sample_with(m, &mut rng_from_seed(seed)))
}
