//! Positional-scoring aggregation and expected positions when one reviewer's
//! ranking is replaced by a uniformly random ranking.
//!
//! A work's score is the sum, over the reviewers assigned to it, of the
//! weight of the position it received. Smaller scores are better and tied
//! works share a position: `position = 1 + #{works with strictly smaller
//! score}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Assignment, ReviewProfile};
use crate::rng::{derive_seed, factorial, next_permutation, rng_from_seed, shuffle};

/// Maps rank position (0 = best) to a score contribution.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum AggregationRule {
    /// Weight equals the 1-based position.
    #[default]
    Borda,
    /// Explicit weights for positions `0..len`; must be strictly increasing.
    Positional(Vec<i64>),
}

impl AggregationRule {
    #[inline]
    pub fn weight(&self, position: usize) -> i64 {
        match self {
            AggregationRule::Borda => position as i64 + 1,
            AggregationRule::Positional(w) => w[position],
        }
    }

    /// Checks that rankings of length up to `max_len` can be scored.
    pub fn check(&self, max_len: usize) -> Result<()> {
        if let AggregationRule::Positional(w) = self {
            if w.len() < max_len {
                return Err(Error::InvalidWeights(format!(
                    "{} weights for rankings of length {max_len}",
                    w.len()
                )));
            }
            if w.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::InvalidWeights(
                    "weights must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Aggregated outcome: total score and shared-tie position of every work.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalOrdering {
    pub scores: Vec<i64>,
    /// 1-based positions, competition numbering ("1, 1, 3").
    pub positions: Vec<usize>,
}

pub fn scores(profile: &ReviewProfile, rule: &AggregationRule, n: usize) -> Vec<i64> {
    let mut s = vec![0i64; n];
    for order in profile.orders() {
        for (pos, &w) in order.iter().enumerate() {
            s[w] += rule.weight(pos);
        }
    }
    s
}

/// `1 + #{k : scores[k] < scores[j]}` for every `j`.
pub fn competition_positions(scores: &[i64]) -> Vec<usize> {
    let mut sorted = scores.to_vec();
    sorted.sort_unstable();
    scores
        .iter()
        .map(|&s| 1 + sorted.partition_point(|&x| x < s))
        .collect()
}

pub fn aggregate(
    profile: &ReviewProfile,
    rule: &AggregationRule,
    n: usize,
) -> Result<FinalOrdering> {
    let longest = profile.orders().iter().map(Vec::len).max().unwrap_or(0);
    rule.check(longest)?;
    if let Some(&w) = profile.orders().iter().flatten().find(|&&w| w >= n) {
        return Err(Error::ShapeMismatch(format!("work {w} ranked but n = {n}")));
    }
    let scores = scores(profile, rule, n);
    let positions = competition_positions(&scores);
    Ok(FinalOrdering { scores, positions })
}

/// How the uniform average over `|M(i)|!` rankings is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpectationMode {
    /// Largest ranking count averaged exactly.
    pub enumeration_cap: u128,
    /// Sample count used above the cap.
    pub samples: usize,
    /// Seed for the sampled average; required above the cap.
    pub seed: Option<u64>,
}

impl Default for ExpectationMode {
    fn default() -> Self {
        Self {
            enumeration_cap: 5040,
            samples: 10_000,
            seed: None,
        }
    }
}

/// Rankings averaged over when replacing one reviewer. Each entry gives the
/// position (0-based) of every item of the reviewer's ascending `M(i)`.
pub(crate) struct ReplacementRankings {
    len: usize,
    flat: Vec<u8>,
}

impl ReplacementRankings {
    pub(crate) fn new(len: usize, mode: &ExpectationMode, reviewer: usize) -> Result<Self> {
        let total = factorial(len);
        if len > u8::MAX as usize {
            return Err(Error::InvalidWeights(format!(
                "ranking length {len} too large"
            )));
        }
        let mut flat = Vec::new();
        if total <= mode.enumeration_cap {
            let mut perm: Vec<usize> = (0..len).collect();
            loop {
                flat.extend(perm.iter().map(|&p| p as u8));
                if !next_permutation(&mut perm) {
                    break;
                }
            }
        } else {
            let seed = mode
                .seed
                .ok_or(Error::CapExceededWithoutSeed { count: total })?;
            let mut rng = rng_from_seed(derive_seed(&[seed, reviewer as u64]));
            let mut perm: Vec<u8> = (0..len as u8).collect();
            flat.reserve(mode.samples * len);
            for _ in 0..mode.samples {
                shuffle(&mut perm, &mut rng);
                flat.extend_from_slice(&perm);
            }
        }
        Ok(Self { len, flat })
    }

    pub(crate) fn count(&self) -> usize {
        self.flat.len().checked_div(self.len).unwrap_or(1)
    }

    fn iter(&self) -> impl Iterator<Item = &[u8]> {
        // A zero-length ranking still has exactly one (empty) ordering.
        let empty: &[u8] = &[];
        let single = (self.len == 0).then_some(empty);
        self.flat
            .chunks_exact(self.len.max(1))
            .filter(move |_| self.len > 0)
            .chain(single)
    }
}

/// Scores of a reference profile, indexed for fast "how many works score
/// below x" queries.
pub(crate) struct ScoreIndex {
    pub(crate) scores: Vec<i64>,
    sorted: Vec<i64>,
    by_score: Vec<usize>,
}

impl ScoreIndex {
    pub(crate) fn new(scores: Vec<i64>) -> Self {
        let mut by_score: Vec<usize> = (0..scores.len()).collect();
        by_score.sort_unstable_by_key(|&w| (scores[w], w));
        let sorted = by_score.iter().map(|&w| scores[w]).collect();
        Self {
            scores,
            sorted,
            by_score,
        }
    }

    fn below(&self, x: i64) -> usize {
        self.sorted.partition_point(|&s| s < x)
    }

    /// Works with score in `(lo, hi]`, ascending by score.
    fn window(&self, lo: i64, hi: i64) -> &[usize] {
        let a = self.sorted.partition_point(|&s| s <= lo);
        let b = self.sorted.partition_point(|&s| s <= hi);
        &self.by_score[a..b]
    }
}

/// Reviewer `i`'s scored works with its own contribution removed.
pub(crate) struct ReviewerSlice<'a> {
    index: &'a ScoreIndex,
    works: &'a [usize],
    /// Score of each work in `works` without reviewer `i`.
    base: Vec<i64>,
    /// Reference-profile scores of `works`, for `count_outside`.
    reference: Vec<i64>,
    weights: Vec<i64>,
}

impl<'a> ReviewerSlice<'a> {
    /// `reference_order` is reviewer `i`'s ranking inside the profile that
    /// produced `index`.
    pub(crate) fn new(
        index: &'a ScoreIndex,
        works: &'a [usize],
        reference_order: &[usize],
        rule: &AggregationRule,
    ) -> Self {
        let reference: Vec<i64> = works.iter().map(|&w| index.scores[w]).collect();
        let mut base = reference.clone();
        for (pos, w) in reference_order.iter().enumerate() {
            let k = works.binary_search(w).expect("ranking matches assignment");
            base[k] -= rule.weight(pos);
        }
        let weights = (0..works.len()).map(|p| rule.weight(p)).collect();
        Self {
            index,
            works,
            base,
            reference,
            weights,
        }
    }

    /// Number of works outside `M(i)` scoring strictly below `x`.
    #[inline]
    fn count_outside(&self, x: i64) -> usize {
        self.index.below(x) - self.reference.iter().filter(|&&s| s < x).count()
    }

    /// Scores of `M(i)` when the reviewer's ranking is `order`.
    pub(crate) fn scores_for_order(&self, order: &[usize]) -> Vec<i64> {
        let mut t = self.base.clone();
        for (pos, w) in order.iter().enumerate() {
            let k = self
                .works
                .binary_search(w)
                .expect("ranking matches assignment");
            t[k] += self.weights[pos];
        }
        t
    }

    fn scores_for_positions(&self, positions: &[u8], out: &mut [i64]) {
        for (k, &p) in positions.iter().enumerate() {
            out[k] = self.base[k] + self.weights[p as usize];
        }
    }

    /// Position of `work` given the reviewer's works score `t`.
    #[inline]
    fn position(&self, work: usize, t: &[i64]) -> usize {
        match self.works.binary_search(&work) {
            Ok(k) => {
                let own = t[k];
                1 + self.count_outside(own) + t.iter().filter(|&&s| s < own).count()
            }
            Err(_) => {
                let s = self.index.scores[work];
                1 + self.count_outside(s) + t.iter().filter(|&&x| x < s).count()
            }
        }
    }

    /// Works whose position can change with reviewer `i`'s ranking: `M(i)`
    /// and the outside works whose score lies in the reachable window.
    pub(crate) fn affected(&self) -> Vec<usize> {
        if self.works.is_empty() {
            return Vec::new();
        }
        let w_min = self.weights[0];
        let w_max = *self.weights.last().unwrap();
        let lo = self.base.iter().min().unwrap() + w_min;
        let hi = self.base.iter().max().unwrap() + w_max;
        let mut out: Vec<usize> = self
            .index
            .window(lo, hi)
            .iter()
            .copied()
            .filter(|w| self.works.binary_search(w).is_err())
            .collect();
        out.extend_from_slice(self.works);
        out.sort_unstable();
        out
    }

    /// For each of `targets`: (position under `actual` scores, sum of
    /// positions over all `rankings`).
    pub(crate) fn position_sums(
        &self,
        actual: &[i64],
        rankings: &ReplacementRankings,
        targets: &[usize],
    ) -> Vec<(usize, u64)> {
        let mut sums = vec![0u64; targets.len()];
        let mut t = vec![0i64; self.works.len()];
        for positions in rankings.iter() {
            self.scores_for_positions(positions, &mut t);
            for (slot, &j) in sums.iter_mut().zip(targets) {
                *slot += self.position(j, &t) as u64;
            }
        }
        targets
            .iter()
            .zip(sums)
            .map(|(&j, s)| (self.position(j, actual), s))
            .collect()
    }
}

/// Expected final position of every work when reviewer `reviewer`'s ranking
/// is drawn uniformly from all orderings of `M(reviewer)` and every other
/// reviewer keeps its ranking in `profile` (the reviewer's own entry in
/// `profile` is ignored).
///
/// The average is exact when `|M(i)|! <= mode.enumeration_cap`; otherwise it
/// is a seeded Monte Carlo average over `mode.samples` rankings.
pub fn expected_positions_under_uniform(
    reviewer: usize,
    profile: &ReviewProfile,
    rule: &AggregationRule,
    assignment: &Assignment,
    mode: &ExpectationMode,
) -> Result<Vec<f64>> {
    let n = assignment.n();
    let works = assignment.works(reviewer);
    rule.check(works.len())?;
    let rankings = ReplacementRankings::new(works.len(), mode, reviewer)?;
    let index = ScoreIndex::new(scores(profile, rule, n));
    let slice = ReviewerSlice::new(&index, works, profile.order(reviewer), rule);
    let actual = slice.scores_for_order(profile.order(reviewer));
    let targets: Vec<usize> = (0..n).collect();
    let count = rankings.count() as f64;
    Ok(slice
        .position_sums(&actual, &rankings, &targets)
        .into_iter()
        .map(|(_, s)| s as f64 / count)
        .collect())
}
