//! On-disk formats.
//!
//! * Instance: JSON object with `n`, `m`, `lambda`, `mu`, `qualities`
//!   (one per work), `conflicts` and `authorship` as lists of
//!   `[reviewer, work]` id pairs, and optional `reviewers` / `works` id
//!   lists. Ids default to `"1"..="m"` and `"1"..="n"`.
//! * Assignment: one line per reviewer, `reviewer: work work work`.
//! * Profile: one line per reviewer, best first, `reviewer: work > work`.
//! * Topology: one `reviewer_node work_node` pair of 0-based integers per
//!   line.
//!
//! In the text formats blank lines and anything after `#` are ignored.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stratdetect_core::model::{validate_assignment, validate_instance, validate_profile};
use stratdetect_core::{
    Assignment, BinaryMatrix, Error as CoreError, ProblemInstance, ReviewProfile, Topology,
};

use crate::error::{AppError, AppResult};

/// External string ids of reviewers and works.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ids {
    reviewers: Vec<String>,
    works: Vec<String>,
    reviewer_index: HashMap<String, usize>,
    work_index: HashMap<String, usize>,
}

fn index_of(ids: &[String]) -> AppResult<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (k, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), k).is_some() {
            return Err(AppError::DuplicateId(id.clone()));
        }
    }
    Ok(map)
}

impl Ids {
    pub fn new(reviewers: Vec<String>, works: Vec<String>) -> AppResult<Self> {
        Ok(Self {
            reviewer_index: index_of(&reviewers)?,
            work_index: index_of(&works)?,
            reviewers,
            works,
        })
    }

    /// `"1".."m"` and `"1".."n"`.
    pub fn numbered(m: usize, n: usize) -> Self {
        let seq = |k: usize| (1..=k).map(|i| i.to_string()).collect();
        Self::new(seq(m), seq(n)).expect("numbered ids are distinct")
    }

    /// `"r1".."rm"` and `"w1".."wn"`.
    pub fn prefixed(m: usize, n: usize) -> Self {
        Self::new(
            (1..=m).map(|i| format!("r{i}")).collect(),
            (1..=n).map(|i| format!("w{i}")).collect(),
        )
        .expect("prefixed ids are distinct")
    }

    pub fn reviewer(&self, index: usize) -> &str {
        &self.reviewers[index]
    }

    pub fn work(&self, index: usize) -> &str {
        &self.works[index]
    }

    pub fn reviewer_index(&self, id: &str) -> AppResult<usize> {
        self.reviewer_index
            .get(id)
            .copied()
            .ok_or_else(|| AppError::UnknownReviewer(id.to_string()))
    }

    pub fn work_index(&self, id: &str) -> AppResult<usize> {
        self.work_index
            .get(id)
            .copied()
            .ok_or_else(|| AppError::UnknownWork(id.to_string()))
    }
}

/// Ids may be written as JSON strings or non-negative integers.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum Id {
    Text(String),
    Number(u64),
}

impl Id {
    fn into_string(self) -> String {
        match self {
            Id::Text(s) => s,
            Id::Number(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    n: usize,
    m: usize,
    lambda: usize,
    mu: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reviewers: Option<Vec<Id>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    works: Option<Vec<Id>>,
    qualities: Vec<f64>,
    conflicts: Vec<(Id, Id)>,
    authorship: Vec<(Id, Id)>,
}

pub fn read_file(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path.display().to_string(), e))
}

pub fn write_file(path: &Path, contents: &str) -> AppResult<()> {
    fs::write(path, contents).map_err(|e| AppError::io(path.display().to_string(), e))
}

pub fn parse_instance(text: &str, path: &str) -> AppResult<(ProblemInstance, Ids)> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| AppError::Document {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    let strings = |v: Option<Vec<Id>>| v.map(|v| v.into_iter().map(Id::into_string).collect());
    let defaults = Ids::numbered(doc.m, doc.n);
    let reviewers: Vec<String> = strings(doc.reviewers).unwrap_or(defaults.reviewers);
    let works: Vec<String> = strings(doc.works).unwrap_or(defaults.works);
    if reviewers.len() != doc.m || works.len() != doc.n || doc.qualities.len() != doc.n {
        return Err(CoreError::ShapeMismatch(format!(
            "expected {} reviewer ids, {} work ids and {} qualities; got {}, {} and {}",
            doc.m,
            doc.n,
            doc.n,
            reviewers.len(),
            works.len(),
            doc.qualities.len()
        ))
        .into());
    }
    let ids = Ids::new(reviewers, works)?;
    let matrix = |pairs: Vec<(Id, Id)>| -> AppResult<BinaryMatrix> {
        let idx = pairs
            .into_iter()
            .map(|(r, w)| {
                Ok((
                    ids.reviewer_index(&r.into_string())?,
                    ids.work_index(&w.into_string())?,
                ))
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(BinaryMatrix::from_pairs(doc.m, doc.n, &idx)?)
    };
    let inst = ProblemInstance {
        n: doc.n,
        m: doc.m,
        lambda: doc.lambda,
        mu: doc.mu,
        conflicts: matrix(doc.conflicts)?,
        authorship: matrix(doc.authorship)?,
        qualities: doc.qualities,
    };
    validate_instance(&inst)?;
    Ok((inst, ids))
}

pub fn write_instance(inst: &ProblemInstance, ids: &Ids) -> String {
    let pairs = |m: &BinaryMatrix| {
        m.pairs()
            .map(|(r, w)| {
                (
                    Id::Text(ids.reviewer(r).to_string()),
                    Id::Text(ids.work(w).to_string()),
                )
            })
            .collect()
    };
    let doc = InstanceDoc {
        n: inst.n,
        m: inst.m,
        lambda: inst.lambda,
        mu: inst.mu,
        reviewers: Some(ids.reviewers.iter().cloned().map(Id::Text).collect()),
        works: Some(ids.works.iter().cloned().map(Id::Text).collect()),
        qualities: inst.qualities.clone(),
        conflicts: pairs(&inst.conflicts),
        authorship: pairs(&inst.authorship),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("instance serializes");
    s.push('\n');
    s
}

/// Non-empty lines with comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((k + 1, line))
    })
}

/// Splits `reviewer: rest` lines, resolving the reviewer id and rejecting
/// repeats.
fn reviewer_lines<'a>(
    text: &'a str,
    path: &str,
    ids: &Ids,
    m: usize,
) -> AppResult<Vec<(usize, Option<&'a str>)>> {
    let mut rows: Vec<Option<&str>> = vec![None; m];
    for (line_no, line) in content_lines(text) {
        let (head, rest) = line.split_once(':').ok_or_else(|| AppError::Parse {
            path: path.to_string(),
            line: line_no,
            message: "expected `reviewer: ...`".into(),
        })?;
        let r = ids.reviewer_index(head.trim())?;
        if rows[r].is_some() {
            return Err(CoreError::DuplicateReviewer { reviewer: r }.into());
        }
        rows[r] = Some(rest.trim());
    }
    Ok(rows.into_iter().enumerate().collect())
}

pub fn parse_assignment(
    text: &str,
    path: &str,
    inst: &ProblemInstance,
    ids: &Ids,
) -> AppResult<Assignment> {
    let mut rows = vec![Vec::new(); inst.m];
    for (r, rest) in reviewer_lines(text, path, ids, inst.m)? {
        if let Some(rest) = rest {
            for w in rest.split_whitespace() {
                let w = ids.work_index(w)?;
                if rows[r].contains(&w) {
                    return Err(CoreError::DuplicateAssignment {
                        reviewer: r,
                        work: w,
                    }
                    .into());
                }
                rows[r].push(w);
            }
        }
    }
    let a = Assignment::from_rows(inst.n, rows)?;
    validate_assignment(inst, &a)?;
    Ok(a)
}

pub fn write_assignment(a: &Assignment, ids: &Ids) -> String {
    let mut s = String::new();
    for i in 0..a.m() {
        s.push_str(ids.reviewer(i));
        s.push(':');
        for &w in a.works(i) {
            s.push(' ');
            s.push_str(ids.work(w));
        }
        s.push('\n');
    }
    s
}

pub fn parse_profile(
    text: &str,
    path: &str,
    assignment: &Assignment,
    ids: &Ids,
) -> AppResult<ReviewProfile> {
    let mut orders = Vec::with_capacity(assignment.m());
    for (r, rest) in reviewer_lines(text, path, ids, assignment.m())? {
        let rest = rest.ok_or(CoreError::MissingReviewer { reviewer: r })?;
        let order = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split('>')
                .map(|w| match w.trim() {
                    "" => Err(CoreError::NotAPermutation { reviewer: r }.into()),
                    w => ids.work_index(w),
                })
                .collect::<AppResult<Vec<_>>>()?
        };
        orders.push(order);
    }
    let p = ReviewProfile::new(orders);
    validate_profile(assignment, &p)?;
    Ok(p)
}

pub fn write_profile(p: &ReviewProfile, ids: &Ids) -> String {
    let mut s = String::new();
    for (i, order) in p.orders().iter().enumerate() {
        s.push_str(ids.reviewer(i));
        s.push(':');
        for (k, &w) in order.iter().enumerate() {
            s.push_str(if k == 0 { " " } else { " > " });
            s.push_str(ids.work(w));
        }
        s.push('\n');
    }
    s
}

pub fn parse_topology(text: &str, path: &str, m: usize, n: usize) -> AppResult<Topology> {
    let mut edges = Vec::new();
    for (line_no, line) in content_lines(text) {
        let bad = |message: &str| AppError::Parse {
            path: path.to_string(),
            line: line_no,
            message: message.to_string(),
        };
        let nums: Vec<usize> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| bad("expected two non-negative integers"))
            })
            .collect::<AppResult<_>>()?;
        match nums[..] {
            [l, r] if l < m && r < n => edges.push((l, r)),
            [_, _] => return Err(bad("node index out of range")),
            _ => return Err(bad("expected two non-negative integers")),
        }
    }
    Ok(Topology { m, n, edges })
}

pub fn write_topology(t: &Topology) -> String {
    t.edges.iter().map(|(l, r)| format!("{l} {r}\n")).collect()
}

/// One row of an experiment report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub series: String,
    pub x: String,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
}

pub fn write_csv(rows: &[ReportRow]) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| AppError::Config(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| AppError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_csv(text: &str) -> AppResult<Vec<ReportRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()
        .map_err(|e| AppError::Config(format!("csv: {e}")))
}
