//! File formats, experiment harness and command implementations on top of
//! `stratdetect-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod sim;

pub use error::{AppError, AppResult};
