//! Random review assignments.
//!
//! [`sample_assignment`] draws uniformly from all valid assignments of an
//! instance using the configuration model: the `n * lambda` work stubs are
//! shuffled onto the `m * mu` reviewer slots and the draw is rejected if it
//! repeats a (reviewer, work) pair or hits a conflict. Every simple
//! conflict-free assignment corresponds to the same number of stub
//! permutations, so an accepted draw is exactly uniform.
//!
//! [`sample_assignment_on_topology`] keeps a fixed bipartite structure and
//! only randomizes which reviewer and work sit on which node.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{validate_instance, Assignment, ProblemInstance, Topology};
use crate::rng::{rng_from_seed, shuffle};

pub const DEFAULT_MAX_ATTEMPTS: u64 = 100_000;

pub fn sample_assignment(inst: &ProblemInstance, seed: u64) -> Result<Assignment> {
    sample_assignment_with(inst, &mut rng_from_seed(seed), DEFAULT_MAX_ATTEMPTS)
}

pub fn sample_assignment_with<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    rng: &mut R,
    max_attempts: u64,
) -> Result<Assignment> {
    validate_instance(inst)?;
    let mu = inst.mu;
    let mut stubs: Vec<usize> = (0..inst.n)
        .flat_map(|w| core::iter::repeat_n(w, inst.lambda))
        .collect();
    let total = stubs.len();

    'attempt: for _ in 0..max_attempts {
        // Forward Fisher–Yates, stopping at the first bad slot. Aborting
        // early rejects exactly the permutations a full check would.
        for t in 0..total {
            let j = rng.random_range(t..total);
            stubs.swap(t, j);
            let reviewer = t / mu;
            let work = stubs[t];
            let first = reviewer * mu;
            if inst.conflicts.get(reviewer, work) || stubs[first..t].contains(&work) {
                continue 'attempt;
            }
        }
        let rows = stubs.chunks(mu.max(1)).map(<[usize]>::to_vec).collect();
        let rows = if mu == 0 {
            vec![Vec::new(); inst.m]
        } else {
            rows
        };
        return Assignment::from_rows(inst.n, rows);
    }
    Err(Error::InfeasibleOrRejectionBudgetExhausted {
        attempts: max_attempts,
    })
}

pub fn sample_assignment_on_topology(
    inst: &ProblemInstance,
    topology: &Topology,
    seed: u64,
) -> Result<Assignment> {
    sample_assignment_on_topology_with(
        inst,
        topology,
        &mut rng_from_seed(seed),
        DEFAULT_MAX_ATTEMPTS,
    )
}

pub fn sample_assignment_on_topology_with<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    topology: &Topology,
    rng: &mut R,
    max_attempts: u64,
) -> Result<Assignment> {
    validate_instance(inst)?;
    if topology.m != inst.m || topology.n != inst.n {
        return Err(Error::TopologyDegreeMismatch(format!(
            "topology is {}x{}, instance is {}x{}",
            topology.m, topology.n, inst.m, inst.n
        )));
    }
    topology.validate(inst.mu, inst.lambda)?;

    let mut reviewer_at: Vec<usize> = (0..inst.m).collect();
    let mut work_at: Vec<usize> = (0..inst.n).collect();
    for _ in 0..max_attempts {
        shuffle(&mut reviewer_at, rng);
        shuffle(&mut work_at, rng);
        let clash = topology
            .edges
            .iter()
            .any(|&(l, r)| inst.conflicts.get(reviewer_at[l], work_at[r]));
        if clash {
            continue;
        }
        let mut rows = vec![Vec::with_capacity(inst.mu); inst.m];
        for &(l, r) in &topology.edges {
            rows[reviewer_at[l]].push(work_at[r]);
        }
        return Assignment::from_rows(inst.n, rows);
    }
    Err(Error::RejectionBudgetExhausted {
        attempts: max_attempts,
    })
}

/// Every valid assignment of `inst`, in lexicographic order of rows.
/// Fails once more than `limit` have been found.
pub fn enumerate_assignments(inst: &ProblemInstance, limit: usize) -> Result<Vec<Assignment>> {
    validate_instance(inst)?;
    let mut out = Vec::new();
    let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(inst.mu); inst.m];
    let mut load = vec![0usize; inst.n];
    extend(inst, 0, 0, &mut rows, &mut load, &mut out, limit)?;
    Ok(out)
}

fn extend(
    inst: &ProblemInstance,
    reviewer: usize,
    from: usize,
    rows: &mut Vec<Vec<usize>>,
    load: &mut [usize],
    out: &mut Vec<Assignment>,
    limit: usize,
) -> Result<()> {
    if reviewer == inst.m {
        if load.iter().all(|&l| l == inst.lambda) {
            if out.len() == limit {
                return Err(Error::EnumerationTooLarge {
                    items: limit as u128 + 1,
                    cap: limit as u128,
                });
            }
            out.push(Assignment::from_rows(inst.n, rows.clone())?);
        }
        return Ok(());
    }
    if rows[reviewer].len() == inst.mu {
        return extend(inst, reviewer + 1, 0, rows, load, out, limit);
    }
    // Remaining works must still be able to absorb the column loads.
    let left = (inst.m - reviewer) * inst.mu - rows[reviewer].len();
    let missing: usize = load.iter().map(|&l| inst.lambda - l).sum();
    if left != missing {
        return Ok(());
    }
    for w in from..inst.n {
        if load[w] < inst.lambda && !inst.conflicts.get(reviewer, w) {
            load[w] += 1;
            rows[reviewer].push(w);
            extend(inst, reviewer, w + 1, rows, load, out, limit)?;
            rows[reviewer].pop();
            load[w] -= 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_assignment, BinaryMatrix};

    #[test]
    fn game_preset_draw_is_valid() {
        let inst = ProblemInstance::identity(20, 4);
        let a = sample_assignment(&inst, 1).unwrap();
        validate_assignment(&inst, &a).unwrap();
        for i in 0..20 {
            assert_eq!(a.works(i).len(), 4);
            assert!(!a.contains(i, i));
        }
        assert!(a.reviewers_per_work().iter().all(|r| r.len() == 4));
    }

    #[test]
    fn all_conflicts_is_infeasible() {
        let mut inst = ProblemInstance::identity(3, 1);
        let all: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        inst.conflicts = BinaryMatrix::from_pairs(3, 3, &all).unwrap();
        let r = sample_assignment_with(&inst, &mut rng_from_seed(0), 1000);
        assert_eq!(
            r,
            Err(Error::InfeasibleOrRejectionBudgetExhausted { attempts: 1000 })
        );
    }

    #[test]
    fn seed_determinism() {
        let inst = ProblemInstance::identity(20, 4);
        assert_eq!(
            sample_assignment(&inst, 99).unwrap(),
            sample_assignment(&inst, 99).unwrap()
        );
        assert_ne!(
            sample_assignment(&inst, 99).unwrap(),
            sample_assignment(&inst, 100).unwrap()
        );
    }

    #[test]
    fn topology_without_conflicts_is_preserved() {
        let mut inst = ProblemInstance::identity(6, 2);
        inst.conflicts = BinaryMatrix::zeros(6, 6);
        inst.authorship = BinaryMatrix::zeros(6, 6);
        // Two disjoint 3x3 blocks, each a 2-regular bipartite graph.
        let mut edges = Vec::new();
        for b in 0..2 {
            for i in 0..3 {
                edges.push((3 * b + i, 3 * b + i));
                edges.push((3 * b + i, 3 * b + (i + 1) % 3));
            }
        }
        let t = Topology { m: 6, n: 6, edges };
        let a = sample_assignment_on_topology(&inst, &t, 5).unwrap();
        validate_assignment(&inst, &a).unwrap();
        // Isomorphic to T: reviewers pair up into two groups of three
        // sharing the same three works.
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..6 {
            let mut block = a.works(i).to_vec();
            for &w in a.works(i) {
                for r in &a.reviewers_per_work()[w] {
                    block.extend_from_slice(a.works(*r));
                }
            }
            block.sort_unstable();
            block.dedup();
            assert_eq!(block.len(), 3);
            groups.push(block);
        }
        groups.sort();
        groups.dedup();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn enumeration_counts() {
        // Derangements of three items.
        assert_eq!(
            enumerate_assignments(&ProblemInstance::identity(3, 1), 100)
                .unwrap()
                .len(),
            2
        );
        assert_eq!(
            enumerate_assignments(&ProblemInstance::identity(4, 1), 100)
                .unwrap()
                .len(),
            9
        );
        let toy = enumerate_assignments(&ProblemInstance::identity(5, 3), 1000).unwrap();
        // Complements of the 44 derangements of five items.
        assert_eq!(toy.len(), 44);
        assert!(matches!(
            enumerate_assignments(&ProblemInstance::identity(5, 3), 10),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn topology_degree_mismatch() {
        let inst = ProblemInstance::identity(3, 1);
        let t = Topology {
            m: 3,
            n: 3,
            edges: vec![(0, 0), (0, 1), (1, 1), (2, 2)],
        };
        assert!(matches!(
            sample_assignment_on_topology(&inst, &t, 0),
            Err(Error::TopologyDegreeMismatch(_))
        ));
    }
}
