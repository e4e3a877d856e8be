//! Detecting strategic behaviour in peer assessment.
//!
//! Reviewers who also author works rank a handful of their peers' works and
//! the rankings are aggregated into one ordering. A reviewer can try to help
//! their own work by ranking strong competitors low. This crate implements a
//! permutation test that detects such behaviour given the conflict and
//! authorship structure, together with the pieces needed to simulate it:
//! random assignments, Borda aggregation, manipulation strategies and noisy
//! perception.
//!
//! ```
//! use stratdetect_core::{detect, presets, assign, strategy};
//!
//! let inst = presets::game20();
//! let assignment = assign::sample_assignment(&inst, 7).unwrap();
//! let profile = detect::truthful_profile(&assignment, &inst.qualities);
//! let config = detect::TestConfig { seed: 1, ..Default::default() };
//! let result = detect::run_test(&inst, &assignment, &profile, &config).unwrap();
//! assert_eq!(result.phi.len(), 100);
//! # let _ = strategy::StrategyKind::Truthful;
//! ```
//!
//! The crate is `no_std` (with `alloc`). All randomness is driven by explicit
//! `u64` seeds.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod aggregate;
pub mod assign;
pub mod detect;
pub mod error;
pub mod model;
pub mod presets;
pub mod rng;
pub mod strategy;

pub use aggregate::{aggregate, AggregationRule, ExpectationMode, FinalOrdering};
pub use detect::{run_test, Supervision, TestConfig, TestResult};
pub use error::{Error, ErrorCategory, Result};
pub use model::{Assignment, BinaryMatrix, ProblemInstance, Ranking, ReviewProfile, Topology};
pub use strategy::{NoiseModel, NoiseSchedule, StrategyKind, StrategyMix};
