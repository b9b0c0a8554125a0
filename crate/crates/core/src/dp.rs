//! Representative-family dynamic program over a preprocessed leaf, and the whole FPT pipeline.
//!
//! For a fixed set `Y` of allowed extra permissions, cell `(W, i)` holds a (kr-i)-representative
//! subfamily of the size-`i` role sets that are independent in the constraint matroid, use only
//! roles with `P(r) ⊆ P_lb ∪ Y`, and cover `W ⊆ P_lb`. A cell is built by extending every set of
//! `(W ∖ P(r), i - 1)` by an eligible role `r`. Cells are computed on demand from the query
//! `(P_lb, i)`, so only reachable `W` are materialized.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use thiserror::Error;

use crate::matroid::{build_csm, MatroidError, PartitionMatroid};
use crate::model::{ClassParams, ClassReport, Instance, PermSet, RoleId, Solution};
use crate::reduce::{preprocess, reduction0, BranchLeaf, ReduceError};
use crate::repfam::{combinations, compute_repfam, Family, RepConfig, RepFamError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("instance is outside the requested class: {}", .0.summary())]
    ClassViolation(ClassReport),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    RepFam(#[from] RepFamError),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Result of the DP on one leaf. `r2` is in leaf role ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafResult {
    pub r2: Option<Solution>,
    pub table_cells: usize,
}

struct Slice<'a> {
    inst: &'a Instance,
    csm: &'a PartitionMatroid,
    cfg: &'a RepConfig,
    eligible: Vec<RoleId>,
    kr: usize,
    memo: HashMap<(FixedBitSet, usize), Family>,
}

impl Slice<'_> {
    fn cell(&mut self, w: &FixedBitSet, i: usize) -> Result<Family, RepFamError> {
        if i == 0 {
            return Ok(if w.is_clear() {
                Family::unit()
            } else {
                Family::empty(0)
            });
        }
        let key = (w.clone(), i);
        if let Some(f) = self.memo.get(&key) {
            return Ok(f.clone());
        }
        let mut seen: HashSet<Vec<RoleId>> = HashSet::new();
        let mut extended = Vec::new();
        for idx in 0..self.eligible.len() {
            let r = self.eligible[idx];
            let mut rest = w.clone();
            rest.difference_with(self.inst.perms(r));
            let prev = self.cell(&rest, i - 1)?;
            for a in prev.sets() {
                if a.contains(&r) {
                    continue;
                }
                let mut cand = a.clone();
                let pos = cand.partition_point(|&x| x < r);
                cand.insert(pos, r);
                if !seen.contains(&cand) && self.csm.is_independent(&cand) {
                    seen.insert(cand.clone());
                    extended.push(cand);
                }
            }
        }
        let rep = compute_repfam(self.csm, &Family::new(i, extended), self.kr - i, self.cfg)?;
        self.memo.insert(key, rep.clone());
        Ok(rep)
    }
}

fn allowed_extras(inst: &Instance) -> Vec<usize> {
    let mut extras = inst.upper_bound().clone();
    extras.difference_with(inst.lower_bound());
    extras.ones().collect()
}

/// Runs the DP on one leaf. `Y` ranges over sets of at most `kp` permissions of `P_ub ∖ P_lb`,
/// by size and then lexicographically; within a `Y`, `i` ascends. The first nonempty
/// `(P_lb, i)` cell yields `r2`.
///
/// Two exact prunes skip whole `Y` slices: `Y` must be tight (each of its permissions carried
/// by some eligible role), since a solution is found at `Y` equal to its own extra permissions,
/// and the eligible roles must jointly cover `P_lb`.
pub fn solve_leaf(
    leaf: &BranchLeaf,
    csm: &PartitionMatroid,
    cfg: &RepConfig,
) -> Result<LeafResult, RepFamError> {
    let inst = &leaf.inst;
    let plb = inst.lower_bound();
    if plb.is_clear() {
        return Ok(LeafResult {
            r2: Some(Solution::new([])),
            table_cells: 0,
        });
    }
    let extras = allowed_extras(inst);
    let mut table_cells = 0;
    for size in 0..=inst.kp().min(extras.len()) {
        for pick in combinations(extras.len(), size) {
            let mut allowed: PermSet = plb.clone();
            allowed.extend(pick.iter().map(|&j| extras[j]));
            let eligible: Vec<RoleId> = (0..inst.n_roles())
                .filter(|&r| inst.perms(r).is_subset(&allowed))
                .collect();
            let mut reach = inst.empty_perms();
            for &r in &eligible {
                reach.union_with(inst.perms(r));
            }
            if !plb.is_subset(&reach) || !pick.iter().all(|&j| reach.contains(extras[j])) {
                continue;
            }
            let mut slice = Slice {
                inst,
                csm,
                cfg,
                eligible,
                kr: inst.kr(),
                memo: HashMap::new(),
            };
            for i in 1..=inst.kr() {
                let top = slice.cell(plb, i)?;
                if let Some(found) = top.first() {
                    table_cells += slice.memo.len();
                    return Ok(LeafResult {
                        r2: Some(Solution::new(found.iter().copied())),
                        table_cells,
                    });
                }
            }
            table_cells += slice.memo.len();
        }
    }
    Ok(LeafResult {
        r2: None,
        table_cells,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    /// Role ids of the original instance.
    pub solution: Option<Solution>,
    pub leaves: usize,
    pub table_cells: usize,
}

/// Lifts a leaf solution to the original instance: the forced roles plus the DP roles, mapped
/// through the reduced root by label.
fn compose(
    original: &Instance,
    root: &Instance,
    leaf: &BranchLeaf,
    r2: &Solution,
) -> Result<Solution, SolveError> {
    let mut root_ids = leaf.r1.clone();
    root_ids.extend(leaf.lift(r2.roles()));
    root_ids
        .into_iter()
        .map(|r| {
            let label = root.role_label(r);
            original
                .role_id(label)
                .ok_or_else(|| SolveError::Internal(format!("role `{label}` vanished")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Solution::new)
}

/// The FPT pipeline: class check, reduction 0, preprocessing, then the DP on each feasible leaf
/// in order. With `threads > 1` leaves are solved concurrently and the first successful leaf in
/// tree order wins, so the answer does not depend on scheduling (the cell count may).
pub fn solve(
    inst: &Instance,
    params: &ClassParams,
    cfg: &RepConfig,
    threads: usize,
) -> Result<SolveOutcome, SolveError> {
    let report = inst.check_class(params);
    if !report.passes() {
        return Err(SolveError::ClassViolation(report));
    }
    let root = reduction0(inst);
    let tree = preprocess(&root, params)?;
    let feasible: Vec<&BranchLeaf> = tree.feasible_leaves().collect();
    let leaves = tree.leaves.len();

    let run = |leaf: &BranchLeaf| -> Result<LeafResult, SolveError> {
        let csm = build_csm(leaf)?;
        Ok(solve_leaf(leaf, &csm, cfg)?)
    };

    let (hit, table_cells) = if threads <= 1 {
        let mut cells = 0;
        let mut hit = None;
        for leaf in &feasible {
            let res = run(leaf)?;
            cells += res.table_cells;
            if let Some(r2) = res.r2 {
                hit = Some((*leaf, r2));
                break;
            }
        }
        (hit, cells)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| SolveError::Internal(e.to_string()))?;
        let cells = AtomicUsize::new(0);
        let found = pool.install(|| {
            feasible
                .par_iter()
                .map(|leaf| {
                    run(leaf).map(|res| {
                        cells.fetch_add(res.table_cells, Ordering::Relaxed);
                        res.r2.map(|r2| (*leaf, r2))
                    })
                })
                .find_first(|res| !matches!(res, Ok(None)))
        });
        (found.transpose()?.flatten(), cells.into_inner())
    };

    let solution = match hit {
        None => None,
        Some((leaf, r2)) => {
            let sol = compose(inst, &root, leaf, &r2)?;
            let verdict = inst
                .verify_solution(&sol)
                .map_err(|e| SolveError::Internal(e.to_string()))?;
            if !verdict.ok {
                let reasons: Vec<String> =
                    verdict.violations.iter().map(ToString::to_string).collect();
                return Err(SolveError::Internal(format!(
                    "composed solution fails verification: {}",
                    reasons.join("; ")
                )));
            }
            Some(sol)
        }
    };
    Ok(SolveOutcome {
        solution,
        leaves,
        table_cells,
    })
}

/// Every role set stored in a DP cell of the leaf for extra set `y`, for invariant checks.
/// Returns `(W, i, set)` triples after solving all `i` up to `kr` for `W = P_lb`.
pub fn table_snapshot(
    leaf: &BranchLeaf,
    csm: &PartitionMatroid,
    cfg: &RepConfig,
    y: &PermSet,
) -> Result<Vec<(PermSet, usize, Vec<RoleId>)>, RepFamError> {
    let inst = &leaf.inst;
    let mut allowed = inst.lower_bound().clone();
    allowed.union_with(y);
    let eligible = (0..inst.n_roles())
        .filter(|&r| inst.perms(r).is_subset(&allowed))
        .collect();
    let mut slice = Slice {
        inst,
        csm,
        cfg,
        eligible,
        kr: inst.kr(),
        memo: HashMap::new(),
    };
    for i in 1..=inst.kr() {
        slice.cell(inst.lower_bound(), i)?;
    }
    let mut out: Vec<_> = slice
        .memo
        .into_iter()
        .flat_map(|((w, i), fam)| {
            fam.sets()
                .iter()
                .map(|s| (w.clone(), i, s.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort_by(|a, b| {
        (a.1, a.0.ones().collect::<Vec<_>>(), &a.2).cmp(&(b.1, b.0.ones().collect(), &b.2))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceBuilder;

    fn params() -> ClassParams {
        ClassParams::new(2, 2, 3).unwrap()
    }

    #[test]
    fn empty_lower_bound_is_trivially_solved() {
        let inst = InstanceBuilder::new()
            .role("r")
            .permission("p")
            .assign("r", "p")
            .kr(1)
            .build()
            .unwrap();
        let leaf = BranchLeaf::root(inst);
        let csm = build_csm(&leaf).unwrap();
        let res = solve_leaf(&leaf, &csm, &RepConfig::exact()).unwrap();
        assert_eq!(res.r2, Some(Solution::new([])));
    }

    #[test]
    fn constraint_forbids_only_cover() {
        let inst = InstanceBuilder::new()
            .role("r1")
            .role("r2")
            .permission("p1")
            .permission("p2")
            .assign("r1", "p1")
            .assign("r2", "p2")
            .require("p1")
            .require("p2")
            .constraint(["r1", "r2"], 2)
            .kr(2)
            .build()
            .unwrap();
        let leaf = BranchLeaf::root(inst.clone());
        let csm = build_csm(&leaf).unwrap();
        assert_eq!(
            solve_leaf(&leaf, &csm, &RepConfig::exact()).unwrap().r2,
            None
        );
        assert_eq!(
            solve(&inst, &params(), &RepConfig::exact(), 1)
                .unwrap()
                .solution,
            None
        );
    }

    #[test]
    fn single_role_exact_cover() {
        let inst = InstanceBuilder::new()
            .role("r1")
            .permission("p1")
            .assign("r1", "p1")
            .require("p1")
            .kr(1)
            .build()
            .unwrap();
        let out = solve(&inst, &params(), &RepConfig::exact(), 1).unwrap();
        assert_eq!(out.solution, Some(Solution::new([0])));
    }

    #[test]
    fn leaf_dp_prefers_fewer_extras() {
        // r0 covers both required permissions with one extra, r1 + r2 cover them with none.
        let inst = InstanceBuilder::new()
            .role("r0")
            .role("r1")
            .role("r2")
            .permission("a")
            .permission("b")
            .permission("x")
            .assign("r0", "a")
            .assign("r0", "b")
            .assign("r0", "x")
            .assign("r1", "a")
            .assign("r2", "b")
            .require("a")
            .require("b")
            .kr(2)
            .kp(1)
            .build()
            .unwrap();
        let leaf = BranchLeaf::root(inst);
        let csm = build_csm(&leaf).unwrap();
        let res = solve_leaf(&leaf, &csm, &RepConfig::exact()).unwrap();
        assert_eq!(res.r2, Some(Solution::new([1, 2])));
        assert!(res.table_cells > 0);
    }

    #[test]
    fn class_violations_are_refused() {
        let inst = InstanceBuilder::new()
            .role("r1")
            .role("r2")
            .permission("p1")
            .permission("p2")
            .assign("r1", "p1")
            .assign("r1", "p2")
            .assign("r2", "p1")
            .assign("r2", "p2")
            .require("p1")
            .kr(1)
            .build()
            .unwrap();
        assert!(matches!(
            solve(&inst, &params(), &RepConfig::exact(), 1),
            Err(SolveError::ClassViolation(_))
        ));
    }

    #[test]
    fn snapshot_cells_are_sound() {
        let inst = InstanceBuilder::new()
            .role("r1")
            .role("r2")
            .role("r3")
            .permission("a")
            .permission("b")
            .permission("c")
            .assign("r1", "a")
            .assign("r2", "b")
            .assign("r3", "c")
            .assign("r3", "a")
            .require("a")
            .require("b")
            .require("c")
            .constraint(["r1", "r3"], 2)
            .kr(3)
            .build()
            .unwrap();
        let leaf = BranchLeaf::root(inst.clone());
        let csm = build_csm(&leaf).unwrap();
        for (w, i, set) in
            table_snapshot(&leaf, &csm, &RepConfig::exact(), &inst.empty_perms()).unwrap()
        {
            assert_eq!(set.len(), i);
            assert!(csm.is_independent(&set));
            let covered = inst.permissions_of(&set).unwrap();
            assert!(w.is_subset(&covered));
        }
    }
}
