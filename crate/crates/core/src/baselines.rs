//! Reference solvers: exhaustive subset search, the 2^r̂ solver for instances without
//! constraints or role budget, and single-rule drivers for checking the reduction rules.

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::model::{ClassParams, Instance, PermSet, RoleId, Solution};
use crate::reduce::{
    branching_applies, branching_rule, reduction0, rule1, rule2, rule3, rule4, BranchLeaf,
    ReduceError,
};
use crate::repfam::binomial;

/// Default cap on the number of subsets [`brute_force`] may enumerate.
pub const DEFAULT_SUBSET_CAP: u128 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("brute force would enumerate {subsets} subsets, above the cap of {cap}")]
    ScaleGuard { subsets: u128, cap: u128 },
    #[error("not a constraint-free full-budget instance: {0}")]
    NotType1(String),
    #[error("{r_hat} roles carry extra permissions; at most 63 can be enumerated")]
    TooManyCostlyRoles { r_hat: usize },
    #[error(transparent)]
    Reduce(#[from] ReduceError),
}

struct Search<'a> {
    inst: &'a Instance,
    candidates: Vec<RoleId>,
    /// Constraint indices containing each role.
    member_of: Vec<Vec<usize>>,
    counts: Vec<usize>,
    covers: Vec<PermSet>,
    chosen: Vec<RoleId>,
}

impl Search<'_> {
    fn extras(&self, cover: &PermSet) -> usize {
        cover.difference_count(self.inst.lower_bound())
    }

    fn dfs(&mut self, from: usize, size: usize) -> bool {
        let depth = self.chosen.len();
        if depth == size {
            return self.inst.lower_bound().is_subset(&self.covers[depth]);
        }
        for i in from..self.candidates.len() {
            if self.candidates.len() - i < size - depth {
                return false;
            }
            let r = self.candidates[i];
            let blocked = self.member_of[r]
                .iter()
                .any(|&c| self.counts[c] + 1 >= self.inst.constraints()[c].threshold);
            if blocked {
                continue;
            }
            let (head, tail) = self.covers.split_at_mut(depth + 1);
            tail[0].clone_from(&head[depth]);
            tail[0].union_with(self.inst.perms(r));
            if self.extras(&self.covers[depth + 1]) > self.inst.kp() {
                continue;
            }
            for &c in &self.member_of[r] {
                self.counts[c] += 1;
            }
            self.chosen.push(r);
            if self.dfs(i + 1, size) {
                return true;
            }
            self.chosen.pop();
            for &c in &self.member_of[r] {
                self.counts[c] -= 1;
            }
        }
        false
    }
}

/// Role subsets of size at most `kr` that [`brute_force`] would consider.
pub fn brute_force_subsets(inst: &Instance) -> u128 {
    let n = candidates(inst).len();
    (0..=inst.kr().min(n)).map(|s| binomial(n, s)).sum()
}

fn candidates(inst: &Instance) -> Vec<RoleId> {
    (0..inst.n_roles())
        .filter(|&r| inst.perms(r).is_subset(inst.upper_bound()))
        .collect()
}

/// Exhaustive search with the default cap.
pub fn brute_force(inst: &Instance) -> Result<Option<Solution>, BaselineError> {
    brute_force_with_cap(inst, DEFAULT_SUBSET_CAP)
}

/// Returns the first valid role set in size-then-lexicographic order. Branches that already
/// exceed `kp` or reach a constraint threshold are cut, which never skips a valid set.
pub fn brute_force_with_cap(inst: &Instance, cap: u128) -> Result<Option<Solution>, BaselineError> {
    let subsets = brute_force_subsets(inst);
    if subsets > cap {
        return Err(BaselineError::ScaleGuard { subsets, cap });
    }
    let mut member_of = vec![Vec::new(); inst.n_roles()];
    for (c, con) in inst.constraints().iter().enumerate() {
        for &r in &con.roles {
            member_of[r].push(c);
        }
    }
    let cands = candidates(inst);
    let max = inst.kr().min(cands.len());
    let mut search = Search {
        inst,
        candidates: cands,
        member_of,
        counts: vec![0; inst.constraints().len()],
        covers: vec![inst.empty_perms(); max + 1],
        chosen: Vec::with_capacity(max),
    };
    for size in 0..=max {
        if search.dfs(0, size) {
            let sol = Solution::new(search.chosen.iter().copied());
            debug_assert!(inst.verify_solution(&sol).map(|v| v.ok).unwrap_or(false));
            return Ok(Some(sol));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Type1Outcome {
    pub solution: Option<Solution>,
    /// Candidate subsets examined; never more than 2^r̂.
    pub enumerated: u64,
}

/// Exact solver for instances with no constraints and `kr = |R|`. Roles inside `P_lb` are
/// always taken; every subset of the remaining roles is tried in increasing bitmask order.
pub fn type1_solver(inst: &Instance) -> Result<Type1Outcome, BaselineError> {
    if !inst.constraints().is_empty() {
        return Err(BaselineError::NotType1(format!(
            "{} constraints present",
            inst.constraints().len()
        )));
    }
    if inst.kr() != inst.n_roles() {
        return Err(BaselineError::NotType1(format!(
            "kr = {} but there are {} roles",
            inst.kr(),
            inst.n_roles()
        )));
    }
    let plb = inst.lower_bound();
    let (inside, costly): (Vec<RoleId>, Vec<RoleId>) =
        (0..inst.n_roles()).partition(|&r| inst.perms(r).is_subset(plb));
    if costly.len() > 63 {
        return Err(BaselineError::TooManyCostlyRoles {
            r_hat: costly.len(),
        });
    }
    let mut base = inst.empty_perms();
    for &r in &inside {
        base.union_with(inst.perms(r));
    }
    let limit = plb.count_ones(..) + inst.kp();
    let mut enumerated = 0u64;
    let mut cover = FixedBitSet::with_capacity(inst.n_perms());
    for mask in 0..(1u64 << costly.len()) {
        enumerated += 1;
        cover.clone_from(&base);
        for (j, &r) in costly.iter().enumerate() {
            if mask >> j & 1 == 1 {
                cover.union_with(inst.perms(r));
            }
        }
        if plb.is_subset(&cover)
            && cover.count_ones(..) <= limit
            && cover.is_subset(inst.upper_bound())
        {
            let picked = costly
                .iter()
                .enumerate()
                .filter(|&(j, _)| mask >> j & 1 == 1)
                .map(|(_, &r)| r);
            let solution = Solution::new(inside.iter().copied().chain(picked));
            return Ok(Type1Outcome {
                solution: Some(solution),
                enumerated,
            });
        }
    }
    Ok(Type1Outcome {
        solution: None,
        enumerated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleUnderTest {
    Rule1,
    Rule2,
    Branch,
    Rule3,
    Rule4,
}

impl RuleUnderTest {
    pub const ALL: [RuleUnderTest; 5] = [
        RuleUnderTest::Rule1,
        RuleUnderTest::Rule2,
        RuleUnderTest::Branch,
        RuleUnderTest::Rule3,
        RuleUnderTest::Rule4,
    ];
}

/// Applies one rule (to its own fixpoint where the rule defines one) to the output of
/// reduction 0, after bringing the prerequisites of that rule to fixpoint: rules 1 and 2 before
/// branching and rule 3, rule 1 before rule 4. Rule 3 is skipped while branching still
/// applies. Returns the root and the resulting leaves.
pub fn apply_single_rule(
    inst: &Instance,
    params: &ClassParams,
    rule: RuleUnderTest,
) -> Result<(Instance, Vec<BranchLeaf>), BaselineError> {
    let root = reduction0(inst);
    let mut leaf = BranchLeaf::root(root.clone());
    let leaves = match rule {
        RuleUnderTest::Rule1 => {
            rule1(&mut leaf);
            vec![leaf]
        }
        RuleUnderTest::Rule2 => {
            rule2(&mut leaf);
            vec![leaf]
        }
        RuleUnderTest::Branch => {
            rule2(&mut leaf);
            if leaf.infeasible {
                vec![leaf]
            } else {
                branching_rule(leaf, params)?
            }
        }
        RuleUnderTest::Rule3 => {
            rule2(&mut leaf);
            if !leaf.infeasible && !branching_applies(&leaf, params)? {
                rule3(&mut leaf, params)?;
            }
            vec![leaf]
        }
        RuleUnderTest::Rule4 => {
            rule1(&mut leaf);
            rule4(&mut leaf);
            rule1(&mut leaf);
            vec![leaf]
        }
    };
    Ok((root, leaves))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSafety {
    pub original_sat: bool,
    pub leaves_sat: bool,
    /// Every composed leaf solution verifies on the original instance.
    pub composed_ok: bool,
}

impl RuleSafety {
    pub fn holds(&self) -> bool {
        self.original_sat == self.leaves_sat && self.composed_ok
    }
}

/// Checks one rule against brute force: the instance is satisfiable iff some resulting leaf is,
/// and `r1` plus any leaf solution solves the original.
pub fn check_rule_safety(
    inst: &Instance,
    params: &ClassParams,
    rule: RuleUnderTest,
) -> Result<RuleSafety, BaselineError> {
    let original_sat = brute_force(inst)?.is_some();
    let (root, leaves) = apply_single_rule(inst, params, rule)?;
    let mut leaves_sat = false;
    let mut composed_ok = true;
    for leaf in leaves.iter().filter(|l| !l.infeasible) {
        let Some(sol) = brute_force(&leaf.inst)? else {
            continue;
        };
        leaves_sat = true;
        let mut ids: Vec<RoleId> = leaf.r1.clone();
        ids.extend(leaf.lift(sol.roles()));
        let lifted: Option<Vec<RoleId>> = ids
            .iter()
            .map(|&r| inst.role_id(root.role_label(r)))
            .collect();
        composed_ok &= match lifted {
            Some(ids) => inst
                .verify_solution(&Solution::new(ids))
                .map(|v| v.ok)
                .unwrap_or(false),
            None => false,
        };
    }
    Ok(RuleSafety {
        original_sat,
        leaves_sat,
        composed_ok,
    })
}
