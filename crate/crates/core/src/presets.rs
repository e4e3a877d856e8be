//! Named problem instances.
//!
//! Both built-in presets have `n = m`, `C = A = I` and qualities `1..=n`, so
//! reviewer `i` authors work `i` whose value is `i + 1`. A generic
//! `identity:<size>:<load>` form covers other sizes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

/// Five reviewers and works, three per reviewer.
pub fn toy5() -> ProblemInstance {
    ProblemInstance::identity(5, 3)
}

/// Twenty players, each ranking four others.
pub fn game20() -> ProblemInstance {
    ProblemInstance::identity(20, 4)
}

pub fn preset_names() -> Vec<String> {
    ["toy5", "game20"].iter().map(|s| s.to_string()).collect()
}

pub fn instance_preset(name: &str) -> Result<ProblemInstance> {
    match name {
        "toy5" => Ok(toy5()),
        "game20" => Ok(game20()),
        _ => parse_identity(name).ok_or_else(|| Error::UnknownPreset(name.to_string())),
    }
}

fn parse_identity(name: &str) -> Option<ProblemInstance> {
    let mut parts = name.strip_prefix("identity:")?.split(':');
    let size: usize = parts.next()?.parse().ok()?;
    let load: usize = parts.next()?.parse().ok()?;
    if parts.next().is_some() || size == 0 || load >= size {
        return None;
    }
    Some(ProblemInstance::identity(size, load))
}

/// Canonical name of an instance built by [`instance_preset`].
pub fn identity_name(size: usize, load: usize) -> String {
    format!("identity:{size}:{load}")
}
