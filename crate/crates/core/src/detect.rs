//! Permutation test for strategic behaviour.
//!
//! For every reviewer `i` and authored work `j`, the statistic compares the
//! final position of `j` with the position it would take, on average, had
//! reviewer `i` submitted a uniformly random ranking of `M(i)`. All other
//! reviewers contribute either their own rankings or, with supervision, an
//! impartial ranking of the same works. Strategic reviewers who succeed pull
//! the statistic below zero.
//!
//! The null distribution recomputes the statistic for authorship matrices
//! obtained by permuting the rows and columns of `(C, A)`, keeping only
//! permutations whose conflicts avoid the assignment. The test rejects when
//! the observed statistic is strictly below the `(floor(alpha |Phi|) + 1)`-th
//! smallest null value.
//!
//! Positions are integers, so every expectation is a rational with
//! denominator equal to the number of rankings averaged. The statistic is
//! kept as an integer multiple of `1 / scale` and all comparisons are exact.

use alloc::vec::Vec;

use rand::Rng;

use crate::aggregate::{
    AggregationRule, ExpectationMode, ReplacementRankings, ReviewerSlice, ScoreIndex,
};
use crate::error::{Error, Result};
use crate::model::{
    validate_assignment, validate_instance, validate_profile, Assignment, BinaryMatrix,
    ProblemInstance, ReviewProfile,
};
use crate::rng::{derive_seed, factorial, mix64, next_permutation, rng_from_seed, shuffle};

/// Rejected draws allowed per accepted null matrix.
pub const NULL_ATTEMPTS_PER_SAMPLE: u64 = 100_000;
/// Largest `m! * n!` for which the null set is enumerated exactly.
pub const NULL_ENUMERATION_CAP: u128 = 10_000_000;

const NULL_STREAM: u64 = 0x4E55_4C4C;

/// Source of the rankings that stand in for everyone but the reviewer being
/// scored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Supervision {
    /// Use the submitted rankings themselves.
    #[default]
    None,
    /// Rank each `M(i)` by true quality.
    GroundTruth,
    /// Rankings supplied by impartial agents.
    Impartial(ReviewProfile),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestConfig {
    pub alpha: f64,
    /// Null matrices to sample; 0 enumerates all of them.
    pub k: usize,
    pub supervision: Supervision,
    pub seed: u64,
    pub rule: AggregationRule,
    /// Expectation settings. A missing seed is derived from the assignment
    /// and the reference profile.
    pub expectation: ExpectationMode,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            k: 100,
            supervision: Supervision::None,
            seed: 0,
            rule: AggregationRule::Borda,
            expectation: ExpectationMode::default(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if self.k > 0 && threshold_index(self.alpha, self.k) < 2 {
            return Err(Error::InsufficientNullSamples {
                alpha: self.alpha,
                k: self.k,
            });
        }
        Ok(())
    }
}

/// `floor(alpha * len) + 1`, guarded against representation error in
/// products such as `0.29 * 100`.
pub fn threshold_index(alpha: f64, len: usize) -> usize {
    // Non-negative, so truncation is the floor.
    (alpha * len as f64 + 1e-9) as usize + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestResult {
    pub tau: f64,
    pub phi: Vec<f64>,
    pub reject: bool,
    /// 1-based order statistic of `phi` used as the threshold.
    pub threshold_index: usize,
    pub threshold: f64,
    /// `tau / authored_count`; `None` when nothing is authored.
    pub effect_size: Option<f64>,
    pub authored_count: usize,
    /// `(1 + #{phi <= tau}) / (1 + |phi|)`. Diagnostic only.
    pub p_value: f64,
    /// Exact values: `tau = tau_scaled / scale`, likewise for `phi`.
    pub tau_scaled: i64,
    pub phi_scaled: Vec<i64>,
    pub scale: u64,
}

/// Impact of each reviewer's ranking on the position of every work it can
/// move, in units of `1 / scale`.
#[derive(Clone, Debug)]
pub struct ImpactTable {
    scale: u64,
    per_reviewer: Vec<Vec<(usize, i64)>>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl ImpactTable {
    /// `impartial` replaces every ranking but the scored reviewer's own.
    pub fn build(
        assignment: &Assignment,
        profile: &ReviewProfile,
        rule: &AggregationRule,
        impartial: Option<&ReviewProfile>,
        mode: &ExpectationMode,
    ) -> Result<Self> {
        validate_profile(assignment, profile)?;
        if let Some(p) = impartial {
            check_supervision(assignment, p)?;
        }
        let reference = impartial.unwrap_or(profile);
        let m = assignment.m();
        let longest = (0..m).map(|i| assignment.works(i).len()).max().unwrap_or(0);
        rule.check(longest)?;

        let index = ScoreIndex::new(crate::aggregate::scores(reference, rule, assignment.n()));
        let mut raw: Vec<(u64, Vec<(usize, i64)>)> = Vec::with_capacity(m);
        for i in 0..m {
            let works = assignment.works(i);
            let rankings = ReplacementRankings::new(works.len(), mode, i)?;
            let count = rankings.count() as u64;
            let slice = ReviewerSlice::new(&index, works, reference.order(i), rule);
            let actual = slice.scores_for_order(profile.order(i));
            let targets = slice.affected();
            let entries = targets
                .iter()
                .zip(slice.position_sums(&actual, &rankings, &targets))
                .filter_map(|(&j, (pos, sum))| {
                    let d = pos as i64 * count as i64 - sum as i64;
                    (d != 0).then_some((j, d))
                })
                .collect();
            raw.push((count, entries));
        }
        let scale = raw.iter().fold(1u64, |l, &(c, _)| l / gcd(l, c) * c);
        let per_reviewer = raw
            .into_iter()
            .map(|(c, mut e)| {
                let f = (scale / c) as i64;
                e.iter_mut().for_each(|(_, d)| *d *= f);
                e
            })
            .collect();
        Ok(Self {
            scale,
            per_reviewer,
        })
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// Position of `work` under the reviewer's actual ranking minus its
    /// expectation under a uniform ranking, scaled.
    pub fn impact(&self, reviewer: usize, work: usize) -> i64 {
        let row = &self.per_reviewer[reviewer];
        row.binary_search_by_key(&work, |&(w, _)| w)
            .map_or(0, |k| row[k].1)
    }

    /// Scaled statistic for the given authorship matrix.
    pub fn statistic(&self, authorship: &BinaryMatrix) -> i64 {
        authorship.pairs().map(|(i, j)| self.impact(i, j)).sum()
    }

    pub fn null_distribution(&self, nulls: &[BinaryMatrix]) -> Vec<i64> {
        nulls.iter().map(|a| self.statistic(a)).collect()
    }
}

fn check_supervision(assignment: &Assignment, impartial: &ReviewProfile) -> Result<()> {
    validate_profile(assignment, impartial).map_err(|e| match e.reviewer() {
        Some(reviewer) => Error::SupervisionAssignmentMismatch { reviewer },
        None => Error::SupervisionAssignmentMismatch {
            reviewer: impartial.len().min(assignment.m()),
        },
    })
}

/// Hash of an assignment and a profile; seeds sampled expectations so the
/// statistic stays a deterministic function of its inputs.
pub fn profile_digest(assignment: &Assignment, profile: &ReviewProfile) -> u64 {
    let mut h = mix64(assignment.n() as u64);
    for i in 0..assignment.m() {
        h = mix64(h ^ 0xA5A5_0000 ^ i as u64);
        for &w in assignment.works(i) {
            h = mix64(h ^ w as u64);
        }
        h = mix64(h ^ 0x5A5A);
        for &w in profile.order(i) {
            h = mix64(h ^ w as u64);
        }
    }
    h
}

/// Exact statistic value `scaled / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Statistic {
    pub scaled: i64,
    pub scale: u64,
}

impl Statistic {
    pub fn value(self) -> f64 {
        self.scaled as f64 / self.scale as f64
    }
}

pub fn compute_statistic(
    profile: &ReviewProfile,
    authorship: &BinaryMatrix,
    assignment: &Assignment,
    rule: &AggregationRule,
    supervision: Option<&ReviewProfile>,
    mode: &ExpectationMode,
) -> Result<Statistic> {
    let table = ImpactTable::build(assignment, profile, rule, supervision, mode)?;
    Ok(Statistic {
        scaled: table.statistic(authorship),
        scale: table.scale(),
    })
}

/// Statistic value for every matrix in `nulls`, in input order.
pub fn null_distribution(
    profile: &ReviewProfile,
    nulls: &[BinaryMatrix],
    assignment: &Assignment,
    rule: &AggregationRule,
    supervision: Option<&ReviewProfile>,
    mode: &ExpectationMode,
) -> Result<Vec<f64>> {
    let table = ImpactTable::build(assignment, profile, rule, supervision, mode)?;
    let scale = table.scale() as f64;
    Ok(table
        .null_distribution(nulls)
        .into_iter()
        .map(|s| s as f64 / scale)
        .collect())
}

/// True if the permuted `(C', A')` declares no conflict or authorship on an
/// assigned pair.
fn admits(
    conflicts: &BinaryMatrix,
    authorship: &BinaryMatrix,
    assignment: &Assignment,
    row_to: &[usize],
    col_to: &[usize],
) -> bool {
    let clear = |m: &BinaryMatrix| {
        m.rows().enumerate().all(|(r, row)| {
            row.iter()
                .all(|&c| !assignment.contains(row_to[r], col_to[c]))
        })
    };
    clear(conflicts) && clear(authorship)
}

pub fn sample_null_matrices(
    conflicts: &BinaryMatrix,
    authorship: &BinaryMatrix,
    assignment: &Assignment,
    k: usize,
    seed: u64,
) -> Result<Vec<BinaryMatrix>> {
    sample_null_matrices_with(
        conflicts,
        authorship,
        assignment,
        k,
        &mut rng_from_seed(seed),
        NULL_ATTEMPTS_PER_SAMPLE,
        NULL_ENUMERATION_CAP,
    )
}

/// Draws `k` authorship matrices uniformly from the admissible multiset, or
/// enumerates the whole multiset when `k == 0`.
pub fn sample_null_matrices_with<R: Rng + ?Sized>(
    conflicts: &BinaryMatrix,
    authorship: &BinaryMatrix,
    assignment: &Assignment,
    k: usize,
    rng: &mut R,
    attempts_per_sample: u64,
    enumeration_cap: u128,
) -> Result<Vec<BinaryMatrix>> {
    let m = assignment.m();
    let n = assignment.n();
    if conflicts.n_rows() != m
        || conflicts.n_cols() != n
        || authorship.n_rows() != m
        || authorship.n_cols() != n
    {
        return Err(Error::ShapeMismatch(
            "conflict/authorship shape differs from assignment".into(),
        ));
    }
    if k == 0 {
        let items = factorial(m).saturating_mul(factorial(n));
        if items > enumeration_cap {
            return Err(Error::EnumerationTooLarge {
                items,
                cap: enumeration_cap,
            });
        }
        let mut out = Vec::new();
        let mut row_to: Vec<usize> = (0..m).collect();
        loop {
            let mut col_to: Vec<usize> = (0..n).collect();
            loop {
                if admits(conflicts, authorship, assignment, &row_to, &col_to) {
                    out.push(authorship.permuted(&row_to, &col_to));
                }
                if !next_permutation(&mut col_to) {
                    break;
                }
            }
            if !next_permutation(&mut row_to) {
                break;
            }
        }
        return Ok(out);
    }

    let mut out = Vec::with_capacity(k);
    let mut row_to: Vec<usize> = (0..m).collect();
    let mut col_to: Vec<usize> = (0..n).collect();
    while out.len() < k {
        let mut accepted = false;
        for _ in 0..attempts_per_sample {
            shuffle(&mut row_to, rng);
            shuffle(&mut col_to, rng);
            if admits(conflicts, authorship, assignment, &row_to, &col_to) {
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::RejectionBudgetExhausted {
                attempts: attempts_per_sample,
            });
        }
        out.push(authorship.permuted(&row_to, &col_to));
    }
    Ok(out)
}

/// Applies the rejection rule to exact scaled values.
pub fn decide(
    tau_scaled: i64,
    phi_scaled: &[i64],
    scale: u64,
    alpha: f64,
    authored_count: usize,
) -> Result<TestResult> {
    if phi_scaled.is_empty() {
        return Err(Error::EmptyNullDistribution);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let mut sorted = phi_scaled.to_vec();
    sorted.sort_unstable();
    let idx = threshold_index(alpha, sorted.len()).min(sorted.len());
    let threshold = sorted[idx - 1];
    let s = scale as f64;
    let tau = tau_scaled as f64 / s;
    let at_or_below = sorted.partition_point(|&x| x <= tau_scaled);
    Ok(TestResult {
        tau,
        phi: phi_scaled.iter().map(|&x| x as f64 / s).collect(),
        reject: tau_scaled < threshold,
        threshold_index: idx,
        threshold: threshold as f64 / s,
        effect_size: (authored_count > 0).then(|| tau / authored_count as f64),
        authored_count,
        p_value: (1 + at_or_below) as f64 / (1 + sorted.len()) as f64,
        tau_scaled,
        phi_scaled: phi_scaled.to_vec(),
        scale,
    })
}

/// Reference rankings implied by the supervision setting.
pub fn supervision_profile(
    inst: &ProblemInstance,
    assignment: &Assignment,
    supervision: &Supervision,
) -> Result<Option<ReviewProfile>> {
    match supervision {
        Supervision::None => Ok(None),
        Supervision::GroundTruth => Ok(Some(ReviewProfile::sorted_by_quality(
            assignment,
            &inst.qualities,
        ))),
        Supervision::Impartial(p) => {
            check_supervision(assignment, p)?;
            Ok(Some(p.clone()))
        }
    }
}

pub fn run_test(
    inst: &ProblemInstance,
    assignment: &Assignment,
    profile: &ReviewProfile,
    config: &TestConfig,
) -> Result<TestResult> {
    run_test_with(inst, assignment, profile, config, |table, nulls| {
        table.null_distribution(nulls)
    })
}

/// [`run_test`] with a caller-supplied evaluator for the null statistics,
/// which must return one value per matrix in input order.
pub fn run_test_with<F>(
    inst: &ProblemInstance,
    assignment: &Assignment,
    profile: &ReviewProfile,
    config: &TestConfig,
    evaluate: F,
) -> Result<TestResult>
where
    F: FnOnce(&ImpactTable, &[BinaryMatrix]) -> Vec<i64>,
{
    config.validate()?;
    validate_instance(inst)?;
    validate_assignment(inst, assignment)?;
    validate_profile(assignment, profile)?;
    let impartial = supervision_profile(inst, assignment, &config.supervision)?;
    let reference = impartial.as_ref().unwrap_or(profile);
    let mut mode = config.expectation;
    mode.seed = Some(
        mode.seed
            .unwrap_or_else(|| profile_digest(assignment, reference)),
    );

    let table = ImpactTable::build(assignment, profile, &config.rule, impartial.as_ref(), &mode)?;
    let tau = table.statistic(&inst.authorship);
    let nulls = sample_null_matrices_with(
        &inst.conflicts,
        &inst.authorship,
        assignment,
        config.k,
        &mut rng_from_seed(derive_seed(&[config.seed, NULL_STREAM])),
        NULL_ATTEMPTS_PER_SAMPLE,
        NULL_ENUMERATION_CAP,
    )?;
    let phi = evaluate(&table, &nulls);
    debug_assert_eq!(phi.len(), nulls.len());
    decide(
        tau,
        &phi,
        table.scale(),
        config.alpha,
        inst.authorship.count(),
    )
}

/// Truthful rankings of every `M(i)` by `qualities`; convenience for tests
/// and simulations.
pub fn truthful_profile(assignment: &Assignment, qualities: &[f64]) -> ReviewProfile {
    ReviewProfile::sorted_by_quality(assignment, qualities)
}
