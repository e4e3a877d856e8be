//! Error type shared by every module of the core crate.

use alloc::string::String;

/// Coarse grouping used by front ends to pick an exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Input data violates a structural invariant.
    Validation,
    /// A sampler ran out of attempts or the problem has no solution.
    Infeasible,
    /// Parameters or names supplied by the caller are unusable.
    Config,
}

/// All failures reported by the core crate. Reviewer and work ids are the
/// dense 0-based indices used internally.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("load mismatch: n*lambda = {n}*{lambda} != m*mu = {m}*{mu}")]
    LoadMismatch {
        n: usize,
        m: usize,
        lambda: usize,
        mu: usize,
    },
    #[error("reviewer {reviewer} authors work {work} without a conflict entry")]
    AuthorshipOutsideConflict { reviewer: usize, work: usize },
    #[error("reviewer {reviewer} has {load} works, expected {expected}")]
    RowLoadViolation {
        reviewer: usize,
        load: usize,
        expected: usize,
    },
    #[error("work {work} has {load} reviewers, expected {expected}")]
    ColumnLoadViolation {
        work: usize,
        load: usize,
        expected: usize,
    },
    #[error("reviewer {reviewer} is assigned work {work} more than once")]
    DuplicateAssignment { reviewer: usize, work: usize },
    #[error("reviewer {reviewer} is assigned conflicting work {work}")]
    ConflictAssigned { reviewer: usize, work: usize },
    #[error("ranking of reviewer {reviewer} is not a permutation of its assigned works")]
    NotAPermutation { reviewer: usize },
    #[error("reviewer {reviewer} ranks unassigned work {work}")]
    UnassignedWorkRanked { reviewer: usize, work: usize },
    #[error("no ranking for reviewer {reviewer}")]
    MissingReviewer { reviewer: usize },
    #[error("reviewer {reviewer} has more than one ranking")]
    DuplicateReviewer { reviewer: usize },
    #[error("no valid assignment found after {attempts} attempts")]
    InfeasibleOrRejectionBudgetExhausted { attempts: u64 },
    #[error("topology does not match the instance: {0}")]
    TopologyDegreeMismatch(String),
    #[error("rejection budget of {attempts} attempts exhausted")]
    RejectionBudgetExhausted { attempts: u64 },
    #[error("full enumeration of {items} items exceeds the cap of {cap}")]
    EnumerationTooLarge { items: u128, cap: u128 },
    #[error("{count} rankings exceed the enumeration cap and no sampling seed was supplied")]
    CapExceededWithoutSeed { count: u128 },
    #[error("rank {rank} outside 1..={n}")]
    RankOutOfRange { rank: usize, n: usize },
    #[error("invalid noise level {0}")]
    InvalidNoise(f64),
    #[error("strategy mix has no positive weight")]
    EmptyMix,
    #[error("invalid aggregation weights: {0}")]
    InvalidWeights(String),
    #[error("impartial ranking of reviewer {reviewer} does not match its assignment")]
    SupervisionAssignmentMismatch { reviewer: usize },
    #[error("null distribution is empty")]
    EmptyNullDistribution,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("floor(alpha * k) must be at least 1 (alpha = {alpha}, k = {k})")]
    InsufficientNullSamples { alpha: f64, k: usize },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InfeasibleOrRejectionBudgetExhausted { .. }
            | RejectionBudgetExhausted { .. }
            | EnumerationTooLarge { .. } => ErrorCategory::Infeasible,
            CapExceededWithoutSeed { .. }
            | RankOutOfRange { .. }
            | InvalidNoise(_)
            | EmptyMix
            | InvalidWeights(_)
            | InvalidAlpha(_)
            | InsufficientNullSamples { .. }
            | UnknownPreset(_)
            | UnknownStrategy(_) => ErrorCategory::Config,
            _ => ErrorCategory::Validation,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            ShapeMismatch(_) => "ShapeMismatch",
            LoadMismatch { .. } => "LoadMismatch",
            AuthorshipOutsideConflict { .. } => "AuthorshipOutsideConflict",
            RowLoadViolation { .. } => "RowLoadViolation",
            ColumnLoadViolation { .. } => "ColumnLoadViolation",
            DuplicateAssignment { .. } => "DuplicateAssignment",
            ConflictAssigned { .. } => "ConflictAssigned",
            NotAPermutation { .. } => "NotAPermutation",
            UnassignedWorkRanked { .. } => "UnassignedWorkRanked",
            MissingReviewer { .. } => "MissingReviewer",
            DuplicateReviewer { .. } => "DuplicateReviewer",
            InfeasibleOrRejectionBudgetExhausted { .. } => "InfeasibleOrRejectionBudgetExhausted",
            TopologyDegreeMismatch(_) => "TopologyDegreeMismatch",
            RejectionBudgetExhausted { .. } => "RejectionBudgetExhausted",
            EnumerationTooLarge { .. } => "EnumerationTooLarge",
            CapExceededWithoutSeed { .. } => "CapExceededWithoutSeed",
            RankOutOfRange { .. } => "RankOutOfRange",
            InvalidNoise(_) => "InvalidNoise",
            EmptyMix => "EmptyMix",
            InvalidWeights(_) => "InvalidWeights",
            SupervisionAssignmentMismatch { .. } => "SupervisionAssignmentMismatch",
            EmptyNullDistribution => "EmptyNullDistribution",
            InvalidAlpha(_) => "InvalidAlpha",
            InsufficientNullSamples { .. } => "InsufficientNullSamples",
            UnknownPreset(_) => "UnknownPreset",
            UnknownStrategy(_) => "UnknownStrategy",
        }
    }

    /// Reviewer index the error refers to, if any.
    pub fn reviewer(&self) -> Option<usize> {
        use Error::*;
        match *self {
            AuthorshipOutsideConflict { reviewer, .. }
            | RowLoadViolation { reviewer, .. }
            | DuplicateAssignment { reviewer, .. }
            | ConflictAssigned { reviewer, .. }
            | NotAPermutation { reviewer }
            | UnassignedWorkRanked { reviewer, .. }
            | MissingReviewer { reviewer }
            | DuplicateReviewer { reviewer }
            | SupervisionAssignmentMismatch { reviewer } => Some(reviewer),
            _ => None,
        }
    }

    /// Work index the error refers to, if any.
    pub fn work(&self) -> Option<usize> {
        use Error::*;
        match *self {
            AuthorshipOutsideConflict { work, .. }
            | ColumnLoadViolation { work, .. }
            | DuplicateAssignment { work, .. }
            | ConflictAssigned { work, .. }
            | UnassignedWorkRanked { work, .. } => Some(work),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
