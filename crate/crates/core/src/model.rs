//! Domain types: problem instances, assignments, rankings and topologies,
//! plus their structural validation.
//!
//! Reviewers and works are dense 0-based indices. Higher quality is better,
//! and position 0 of a ranking is its best item.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Sparse binary matrix with `rows` rows and `cols` columns. Each row holds
/// the sorted, deduplicated column indices of its non-zero entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryMatrix {
    cols: usize,
    rows: Vec<Vec<usize>>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: vec![Vec::new(); rows],
        }
    }

    /// Square identity: row `i` has a single entry at column `i`.
    pub fn identity(size: usize) -> Self {
        Self {
            cols: size,
            rows: (0..size).map(|i| vec![i]).collect(),
        }
    }

    pub fn from_pairs(rows: usize, cols: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut m = Self::zeros(rows, cols);
        for &(r, c) in pairs {
            if r >= rows || c >= cols {
                return Err(Error::ShapeMismatch(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            m.rows[r].push(c);
        }
        for row in &mut m.rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(m)
    }

    pub fn from_rows(cols: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&c| (r, c)))
            .collect();
        Self::from_pairs(rows.len(), cols, &pairs)
    }

    pub fn from_dense(dense: &[Vec<bool>]) -> Result<Self> {
        let cols = dense.first().map_or(0, Vec::len);
        if dense.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged dense matrix".into()));
        }
        let rows = dense
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(c, _)| c)
                    .collect()
            })
            .collect();
        Ok(Self { cols, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.rows[r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].binary_search(&c).is_ok()
    }

    pub fn count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Non-zero entries in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&c| (r, c)))
    }

    pub fn to_dense(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![false; self.cols];
                for &c in row {
                    d[c] = true;
                }
                d
            })
            .collect()
    }

    /// Moves entry `(r, c)` to `(row_to[r], col_to[c])`.
    pub fn permuted(&self, row_to: &[usize], col_to: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows.len(), self.cols);
        for (r, row) in self.rows.iter().enumerate() {
            let target = &mut out.rows[row_to[r]];
            target.extend(row.iter().map(|&c| col_to[c]));
            target.sort_unstable();
        }
        out
    }

    /// True if every entry of `self` is also an entry of `other`.
    pub fn is_subset_of(&self, other: &BinaryMatrix) -> bool {
        self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.iter().all(|c| b.binary_search(c).is_ok()))
    }
}

/// Parameters of a peer-assessment round.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    /// Number of works.
    pub n: usize,
    /// Number of reviewers.
    pub m: usize,
    /// Reviewers per work.
    pub lambda: usize,
    /// Works per reviewer.
    pub mu: usize,
    /// `m x n` conflict matrix.
    pub conflicts: BinaryMatrix,
    /// `m x n` authorship matrix, a subset of `conflicts`.
    pub authorship: BinaryMatrix,
    /// Ground-truth quality of each work, higher is better.
    pub qualities: Vec<f64>,
}

impl ProblemInstance {
    /// `n = m` works and reviewers where reviewer `i` authors (and only
    /// conflicts with) work `i`, qualities `1..=n`.
    pub fn identity(size: usize, load: usize) -> Self {
        Self {
            n: size,
            m: size,
            lambda: load,
            mu: load,
            conflicts: BinaryMatrix::identity(size),
            authorship: BinaryMatrix::identity(size),
            qualities: (1..=size).map(|v| v as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_instance(self)
    }

    /// 1-based rank of every work in the ground-truth ordering (1 = best).
    /// Equal qualities are ordered by ascending work id.
    pub fn true_ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| {
            self.qualities[b]
                .total_cmp(&self.qualities[a])
                .then(a.cmp(&b))
        });
        let mut ranks = vec![0; self.n];
        for (pos, &w) in order.iter().enumerate() {
            ranks[w] = pos + 1;
        }
        ranks
    }
}

pub fn validate_instance(inst: &ProblemInstance) -> Result<()> {
    let shape = |what: &str, r: usize, c: usize| -> Result<()> {
        if r != inst.m || c != inst.n {
            Err(Error::ShapeMismatch(format!(
                "{what} is {r}x{c}, expected {}x{}",
                inst.m, inst.n
            )))
        } else {
            Ok(())
        }
    };
    shape(
        "conflicts",
        inst.conflicts.n_rows(),
        inst.conflicts.n_cols(),
    )?;
    shape(
        "authorship",
        inst.authorship.n_rows(),
        inst.authorship.n_cols(),
    )?;
    if inst.qualities.len() != inst.n {
        return Err(Error::ShapeMismatch(format!(
            "{} qualities for {} works",
            inst.qualities.len(),
            inst.n
        )));
    }
    if inst.qualities.iter().any(|q| !q.is_finite()) {
        return Err(Error::ShapeMismatch("non-finite quality".into()));
    }
    if inst.n * inst.lambda != inst.m * inst.mu {
        return Err(Error::LoadMismatch {
            n: inst.n,
            m: inst.m,
            lambda: inst.lambda,
            mu: inst.mu,
        });
    }
    for (r, c) in inst.authorship.pairs() {
        if !inst.conflicts.get(r, c) {
            return Err(Error::AuthorshipOutsideConflict {
                reviewer: r,
                work: c,
            });
        }
    }
    Ok(())
}

/// Review assignment. `works(i)` is the ascending list `M(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    n: usize,
    per_reviewer: Vec<Vec<usize>>,
}

impl Assignment {
    /// Builds an assignment from per-reviewer work lists. Lists are sorted;
    /// duplicates and out-of-range ids are kept for `validate_assignment` to
    /// report, except that ids `>= n` are rejected immediately.
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut per_reviewer = rows;
        for (i, row) in per_reviewer.iter_mut().enumerate() {
            if let Some(&w) = row.iter().find(|&&w| w >= n) {
                return Err(Error::ShapeMismatch(format!(
                    "reviewer {i} assigned work {w} but n = {n}"
                )));
            }
            row.sort_unstable();
        }
        Ok(Self { n, per_reviewer })
    }

    pub fn from_matrix(matrix: &BinaryMatrix) -> Self {
        Self {
            n: matrix.n_cols(),
            per_reviewer: matrix.rows().map(<[usize]>::to_vec).collect(),
        }
    }

    pub fn matrix(&self) -> BinaryMatrix {
        let pairs: Vec<(usize, usize)> = self.pairs().collect();
        // Rows are in range by construction.
        BinaryMatrix::from_pairs(self.m(), self.n, &pairs).expect("assignment entries in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.per_reviewer.len()
    }

    pub fn works(&self, reviewer: usize) -> &[usize] {
        &self.per_reviewer[reviewer]
    }

    pub fn contains(&self, reviewer: usize, work: usize) -> bool {
        self.per_reviewer[reviewer].binary_search(&work).is_ok()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.per_reviewer
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&w| (r, w)))
    }

    /// Reviewers of every work, each list ascending.
    pub fn reviewers_per_work(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (r, w) in self.pairs() {
            out[w].push(r);
        }
        out
    }
}

pub fn validate_assignment(inst: &ProblemInstance, assignment: &Assignment) -> Result<()> {
    if assignment.m() != inst.m || assignment.n() != inst.n {
        return Err(Error::ShapeMismatch(format!(
            "assignment is {}x{}, instance is {}x{}",
            assignment.m(),
            assignment.n(),
            inst.m,
            inst.n
        )));
    }
    for i in 0..inst.m {
        let works = assignment.works(i);
        if let Some(w) = works.windows(2).find(|p| p[0] == p[1]) {
            return Err(Error::DuplicateAssignment {
                reviewer: i,
                work: w[0],
            });
        }
        if works.len() != inst.mu {
            return Err(Error::RowLoadViolation {
                reviewer: i,
                load: works.len(),
                expected: inst.mu,
            });
        }
    }
    let mut column = vec![0usize; inst.n];
    for (_, w) in assignment.pairs() {
        column[w] += 1;
    }
    if let Some((w, &load)) = column.iter().enumerate().find(|(_, &c)| c != inst.lambda) {
        return Err(Error::ColumnLoadViolation {
            work: w,
            load,
            expected: inst.lambda,
        });
    }
    for (i, w) in assignment.pairs() {
        if inst.conflicts.get(i, w) {
            return Err(Error::ConflictAssigned {
                reviewer: i,
                work: w,
            });
        }
    }
    Ok(())
}

/// One reviewer's total order over its assigned works, best first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranking {
    pub reviewer: usize,
    pub order: Vec<usize>,
}

/// One ranking per reviewer, indexed by reviewer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReviewProfile {
    orders: Vec<Vec<usize>>,
}

impl ReviewProfile {
    /// Profile whose `i`-th entry is the ranking of reviewer `i`.
    pub fn new(orders: Vec<Vec<usize>>) -> Self {
        Self { orders }
    }

    /// Collects rankings given in any order; every reviewer in `0..m` must
    /// appear exactly once.
    pub fn from_rankings(m: usize, rankings: Vec<Ranking>) -> Result<Self> {
        let mut slots: Vec<Option<Vec<usize>>> = vec![None; m];
        for r in rankings {
            if r.reviewer >= m {
                return Err(Error::ShapeMismatch(format!(
                    "ranking for reviewer {} but m = {m}",
                    r.reviewer
                )));
            }
            if slots[r.reviewer].is_some() {
                return Err(Error::DuplicateReviewer {
                    reviewer: r.reviewer,
                });
            }
            slots[r.reviewer] = Some(r.order);
        }
        let orders = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or(Error::MissingReviewer { reviewer: i }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { orders })
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn order(&self, reviewer: usize) -> &[usize] {
        &self.orders[reviewer]
    }

    pub fn orders(&self) -> &[Vec<usize>] {
        &self.orders
    }

    pub fn set_order(&mut self, reviewer: usize, order: Vec<usize>) {
        self.orders[reviewer] = order;
    }

    pub fn rankings(&self) -> impl Iterator<Item = Ranking> + '_ {
        self.orders.iter().enumerate().map(|(i, o)| Ranking {
            reviewer: i,
            order: o.clone(),
        })
    }

    /// Ranks every `M(i)` by descending `qualities`, ties by ascending id.
    pub fn sorted_by_quality(assignment: &Assignment, qualities: &[f64]) -> Self {
        let orders = (0..assignment.m())
            .map(|i| {
                let mut o = assignment.works(i).to_vec();
                o.sort_by(|&a, &b| qualities[b].total_cmp(&qualities[a]).then(a.cmp(&b)));
                o
            })
            .collect();
        Self { orders }
    }
}

pub fn validate_profile(assignment: &Assignment, profile: &ReviewProfile) -> Result<()> {
    if profile.len() < assignment.m() {
        return Err(Error::MissingReviewer {
            reviewer: profile.len(),
        });
    }
    if profile.len() > assignment.m() {
        return Err(Error::ShapeMismatch(format!(
            "{} rankings for {} reviewers",
            profile.len(),
            assignment.m()
        )));
    }
    for i in 0..assignment.m() {
        let works = assignment.works(i);
        let order = profile.order(i);
        if let Some(&w) = order.iter().find(|w| works.binary_search(w).is_err()) {
            return Err(Error::UnassignedWorkRanked {
                reviewer: i,
                work: w,
            });
        }
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != works {
            return Err(Error::NotAPermutation { reviewer: i });
        }
    }
    Ok(())
}

/// Bipartite assignment structure: `m` left (reviewer) nodes, `n` right
/// (work) nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub m: usize,
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Checks node ranges, simplicity and the `mu`/`lambda` degrees.
    pub fn validate(&self, mu: usize, lambda: usize) -> Result<()> {
        let mismatch = |s: alloc::string::String| Err(Error::TopologyDegreeMismatch(s));
        let mut left = vec![0usize; self.m];
        let mut right = vec![0usize; self.n];
        let mut sorted = self.edges.clone();
        sorted.sort_unstable();
        if let Some(d) = sorted.windows(2).find(|p| p[0] == p[1]) {
            return mismatch(format!("duplicate edge {:?}", d[0]));
        }
        for &(l, r) in &self.edges {
            if l >= self.m || r >= self.n {
                return mismatch(format!("edge ({l}, {r}) outside {}x{}", self.m, self.n));
            }
            left[l] += 1;
            right[r] += 1;
        }
        if let Some((l, d)) = left.iter().enumerate().find(|(_, &d)| d != mu) {
            return mismatch(format!("left node {l} has degree {d}, expected {mu}"));
        }
        if let Some((r, d)) = right.iter().enumerate().find(|(_, &d)| d != lambda) {
            return mismatch(format!("right node {r} has degree {d}, expected {lambda}"));
        }
        Ok(())
    }

    pub fn from_assignment(a: &Assignment) -> Self {
        Self {
            m: a.m(),
            n: a.n(),
            edges: a.pairs().collect(),
        }
    }
}
