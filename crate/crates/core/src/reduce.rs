//! Preprocessing for K_{alpha,beta}-free instances with disjoint constraints.
//!
//! [`preprocess`] drives the reduction rules and the bounded-depth branching rule. Every leaf
//! of the resulting [`BranchTree`] carries a reduced instance together with the roles that
//! were forced into the solution on the way (`r1`, in root ids). Any solution of a feasible
//! leaf, mapped back through `origin` and joined with `r1`, solves the root instance.
//!
//! After any change the driver restarts from rule 1, so the rules are always evaluated in
//! the order rule 1, rule 2, branching, rule 3, rule 4, followed by the kernel-size gate.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ClassParams, Instance, PermSet, RoleId, RoleSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("threshold arithmetic overflows for kr={kr}, alpha={alpha}, beta={beta}")]
    Overflow {
        kr: usize,
        alpha: usize,
        beta: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Reduction0,
    Update,
    Rule1,
    Rule2,
    Branch,
    Rule3,
    Rule4,
    KernelGate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    DeleteRole {
        role: String,
    },
    DropConstraint {
        roles: Vec<String>,
        t: usize,
    },
    /// UPDATE: the role joins the partial solution.
    Force {
        role: String,
    },
    /// One child of a branching step on `on`.
    Branch {
        q: usize,
        on: Vec<String>,
        chose: String,
    },
    Infeasible {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub rule: Rule,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone)]
pub struct BranchLeaf {
    pub inst: Instance,
    /// Root id of every role of `inst`.
    pub origin: Vec<RoleId>,
    /// Forced roles, in root ids.
    pub r1: Vec<RoleId>,
    pub trace: Vec<TraceEntry>,
    pub infeasible: bool,
}

#[derive(Debug, Clone)]
pub struct BranchTree {
    pub root: Instance,
    pub leaves: Vec<BranchLeaf>,
}

impl BranchTree {
    pub fn feasible_leaves(&self) -> impl Iterator<Item = &BranchLeaf> {
        self.leaves.iter().filter(|l| !l.infeasible)
    }
}

impl BranchLeaf {
    pub fn root(inst: Instance) -> Self {
        let origin = (0..inst.n_roles()).collect();
        BranchLeaf {
            inst,
            origin,
            r1: Vec::new(),
            trace: Vec::new(),
            infeasible: false,
        }
    }

    /// Maps leaf role ids to root ids.
    pub fn lift(&self, roles: &[RoleId]) -> Vec<RoleId> {
        roles.iter().map(|&r| self.origin[r]).collect()
    }

    fn log(&mut self, rule: Rule, action: Action) {
        self.trace.push(TraceEntry { rule, action });
    }

    fn mark_infeasible(&mut self, rule: Rule, reason: impl Into<String>) {
        self.infeasible = true;
        self.log(
            rule,
            Action::Infeasible {
                reason: reason.into(),
            },
        );
    }

    /// Deletes `roles` without touching the budgets. Constraints keep their thresholds.
    fn delete_roles(&mut self, rule: Rule, roles: &RoleSet) {
        for r in roles.ones() {
            let role = self.inst.role_label(r).to_owned();
            self.log(rule, Action::DeleteRole { role });
        }
        let mut keep = roles.clone();
        keep.toggle_range(..);
        let kept = self.inst.retain_roles(&keep);
        self.origin = kept.iter().map(|&old| self.origin[old]).collect();
    }

    /// Drops every constraint with fewer roles than its threshold. Returns whether any was dropped.
    fn drop_slack_constraints(&mut self, rule: Rule) -> bool {
        let before = self.inst.constraints.len();
        let (keep, dropped): (Vec<_>, Vec<_>) = std::mem::take(&mut self.inst.constraints)
            .into_iter()
            .partition(|c| c.roles.len() >= c.threshold);
        for c in &dropped {
            let roles = c
                .roles
                .iter()
                .map(|&r| self.inst.role_label(r).to_owned())
                .collect();
            self.log(
                rule,
                Action::DropConstraint {
                    roles,
                    t: c.threshold,
                },
            );
        }
        self.inst.constraints = keep;
        self.inst.constraints.len() != before
    }
}

/// Reduction 0, applied once to a raw instance: drops roles that touch no required permission
/// or exceed the upper bound, shrinks constraints accordingly, drops slack constraints, and
/// finally removes every permission outside P_ub so that P_ub = P afterwards.
pub fn reduction0(inst: &Instance) -> Instance {
    let mut leaf = BranchLeaf::root(inst.clone());
    loop {
        let mut doomed = leaf.inst.empty_roles();
        for r in 0..leaf.inst.n_roles() {
            let perms = leaf.inst.perms(r);
            if perms.is_disjoint(leaf.inst.lower_bound())
                || !perms.is_subset(leaf.inst.upper_bound())
            {
                doomed.insert(r);
            }
        }
        let deleted = !doomed.is_clear();
        if deleted {
            leaf.delete_roles(Rule::Reduction0, &doomed);
        }
        let dropped = leaf.drop_slack_constraints(Rule::Reduction0);
        if !deleted && !dropped {
            break;
        }
    }
    let mut outside = leaf.inst.upper_bound().clone();
    outside.toggle_range(..);
    leaf.inst.remove_permissions(&outside);
    leaf.inst
}

/// Procedure UPDATE: moves `r` (a leaf id) into the partial solution and charges the budgets.
/// Marks the leaf infeasible when `kr` is exhausted, when `kp` cannot pay for the role's extra
/// permissions, or when a constraint threshold reaches zero.
pub fn update_role(leaf: &mut BranchLeaf, r: RoleId) {
    force_role(leaf, r, Rule::Update);
}

fn force_role(leaf: &mut BranchLeaf, r: RoleId, rule: Rule) {
    if leaf.infeasible {
        return;
    }
    let label = leaf.inst.role_label(r).to_owned();
    if leaf.inst.kr == 0 {
        leaf.mark_infeasible(rule, format!("cannot force `{label}`: kr is exhausted"));
        return;
    }
    let extras = leaf.inst.extra_degree(r);
    if extras > leaf.inst.kp {
        leaf.mark_infeasible(
            rule,
            format!(
                "cannot force `{label}`: {extras} extra permissions exceed kp={}",
                leaf.inst.kp
            ),
        );
        return;
    }
    leaf.log(
        rule,
        Action::Force {
            role: label.clone(),
        },
    );
    leaf.r1.push(leaf.origin[r]);
    leaf.inst.kr -= 1;
    leaf.inst.kp -= extras;

    let mut exhausted = false;
    for c in &mut leaf.inst.constraints {
        if c.contains(r) {
            c.threshold -= 1;
            exhausted |= c.threshold == 0;
        }
    }

    let granted: PermSet = leaf.inst.perms(r).clone();
    let mut keep = leaf.inst.empty_roles();
    keep.insert_range(..);
    keep.set(r, false);
    let kept = leaf.inst.retain_roles(&keep);
    leaf.origin = kept.iter().map(|&old| leaf.origin[old]).collect();
    leaf.inst.remove_permissions(&granted);

    if exhausted {
        leaf.mark_infeasible(
            rule,
            format!("forcing `{label}` exhausts a separation-of-duty constraint"),
        );
    }
}

/// Reduction rule 1 to fixpoint: deletes roles with no required permission and roles inside a
/// constraint of threshold 1, then drops slack constraints. Returns whether anything changed.
pub fn rule1(leaf: &mut BranchLeaf) -> bool {
    let mut changed = false;
    loop {
        let mut doomed = leaf.inst.empty_roles();
        for r in 0..leaf.inst.n_roles() {
            if leaf.inst.perms(r).is_disjoint(leaf.inst.lower_bound()) {
                doomed.insert(r);
            }
        }
        for c in leaf.inst.constraints.iter().filter(|c| c.threshold == 1) {
            for &r in &c.roles {
                doomed.insert(r);
            }
        }
        let deleted = !doomed.is_clear();
        if deleted {
            leaf.delete_roles(Rule::Rule1, &doomed);
        }
        let dropped = leaf.drop_slack_constraints(Rule::Rule1);
        if !deleted && !dropped {
            return changed;
        }
        changed = true;
    }
}

/// One application of reduction rule 2 (a required permission held by a single role).
fn rule2_step(leaf: &mut BranchLeaf) -> bool {
    let inst = &leaf.inst;
    let unique = inst.lower_bound().ones().find_map(|p| {
        let mut holders = inst.holders(p);
        match (holders.next(), holders.next()) {
            (Some(r), None) => Some(r),
            _ => None,
        }
    });
    let Some(r) = unique else { return false };
    if inst.extra_degree(r) > inst.kp {
        let label = inst.role_label(r).to_owned();
        leaf.mark_infeasible(
            Rule::Rule2,
            format!("`{label}` is the only holder of a required permission but is too costly"),
        );
    } else {
        force_role(leaf, r, Rule::Rule2);
    }
    true
}

/// Reduction rule 2 interleaved with rule 1, to fixpoint.
pub fn rule2(leaf: &mut BranchLeaf) -> bool {
    let mut changed = rule1(leaf);
    while !leaf.infeasible && rule2_step(leaf) {
        changed = true;
        rule1(leaf);
    }
    changed
}

fn overflow(kr: usize, alpha: usize, beta: usize) -> ReduceError {
    ReduceError::Overflow { kr, alpha, beta }
}

/// `sum_{a=from}^{to} kr^a`, zero when `from > to`.
fn power_sum(kr: u64, from: u32, to: u32) -> Option<u64> {
    (from..=to).try_fold(0u64, |acc, a| acc.checked_add(kr.checked_pow(a)?))
}

/// b(q) = beta * kr^q + sum_{a=1}^{q-1} kr^a.
pub fn threshold_b(q: usize, kr: usize, beta: usize) -> Result<u64, ReduceError> {
    let err = || overflow(kr, q + 2, beta);
    let qq = u32::try_from(q).map_err(|_| err())?;
    let k = kr as u64;
    let lead = k
        .checked_pow(qq)
        .and_then(|x| x.checked_mul(beta as u64))
        .ok_or_else(err)?;
    let tail = if qq >= 1 {
        power_sum(k, 1, qq - 1).ok_or_else(err)?
    } else {
        0
    };
    lead.checked_add(tail).ok_or_else(err)
}

/// h = beta * kr^(alpha-1) + kr^(alpha-2) + ... + kr + 1.
pub fn threshold_h(kr: usize, alpha: usize, beta: usize) -> Result<u64, ReduceError> {
    let err = || overflow(kr, alpha, beta);
    let a = u32::try_from(alpha).map_err(|_| err())?;
    let k = kr as u64;
    let lead = k
        .checked_pow(a - 1)
        .and_then(|x| x.checked_mul(beta as u64))
        .ok_or_else(err)?;
    let tail = power_sum(k, 0, a - 2).ok_or_else(err)?;
    lead.checked_add(tail).ok_or_else(err)
}

/// Largest |P_lb| an irreducible yes-instance can have:
/// beta * kr^alpha + kr^(alpha-1) + ... + kr.
pub fn kernel_bound(kr: usize, alpha: usize, beta: usize) -> Result<u64, ReduceError> {
    let err = || overflow(kr, alpha, beta);
    let a = u32::try_from(alpha).map_err(|_| err())?;
    let k = kr as u64;
    let lead = k
        .checked_pow(a)
        .and_then(|x| x.checked_mul(beta as u64))
        .ok_or_else(err)?;
    let tail = power_sum(k, 1, a - 1).ok_or_else(err)?;
    lead.checked_add(tail).ok_or_else(err)
}

/// First (lexicographic) set of `size` roles sharing more than `b` required permissions.
fn find_heavy_set(inst: &Instance, size: usize, b: u64) -> Option<Vec<RoleId>> {
    let candidates: Vec<RoleId> = (0..inst.n_roles())
        .filter(|&r| inst.lower_degree(r) as u64 > b)
        .collect();
    let mut chosen = Vec::with_capacity(size);
    heavy_dfs(
        inst,
        &candidates,
        0,
        size,
        b,
        inst.lower_bound(),
        &mut chosen,
    )
    .then_some(chosen)
}

fn heavy_dfs(
    inst: &Instance,
    candidates: &[RoleId],
    from: usize,
    size: usize,
    b: u64,
    common: &PermSet,
    chosen: &mut Vec<RoleId>,
) -> bool {
    if chosen.len() == size {
        return true;
    }
    for i in from..candidates.len() {
        if candidates.len() - i < size - chosen.len() {
            return false;
        }
        let mut next = common.clone();
        next.intersect_with(inst.perms(candidates[i]));
        if next.count_ones(..) as u64 <= b {
            continue;
        }
        chosen.push(candidates[i]);
        if heavy_dfs(inst, candidates, i + 1, size, b, &next, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// One step of branching rule 1: the smallest `q` in `1..=alpha-2` for which some set `L` of
/// `alpha - q` roles shares more than `b(q)` required permissions. Returns `None` if no such
/// set exists; otherwise one child per role of `L` that fits in `kp`, each with that role
/// forced. If no role of `L` is affordable, or `kr` is already exhausted, the single child is
/// infeasible.
fn branch_step(
    leaf: &BranchLeaf,
    params: &ClassParams,
) -> Result<Option<Vec<BranchLeaf>>, ReduceError> {
    for q in 1..params.alpha.saturating_sub(1) {
        let b = threshold_b(q, leaf.inst.kr, params.beta)?;
        let Some(set) = find_heavy_set(&leaf.inst, params.alpha - q, b) else {
            continue;
        };
        let on: Vec<String> = set
            .iter()
            .map(|&r| leaf.inst.role_label(r).to_owned())
            .collect();
        let eligible: Vec<RoleId> = set
            .iter()
            .copied()
            .filter(|&r| leaf.inst.extra_degree(r) <= leaf.inst.kp)
            .collect();
        if eligible.is_empty() || leaf.inst.kr == 0 {
            let mut child = leaf.clone();
            let reason = if leaf.inst.kr == 0 {
                format!("branching on {{{}}} with kr exhausted", on.join(", "))
            } else {
                format!(
                    "no role of {{{}}} fits within kp={}",
                    on.join(", "),
                    leaf.inst.kp
                )
            };
            child.mark_infeasible(Rule::Branch, reason);
            return Ok(Some(vec![child]));
        }
        let children = eligible
            .into_iter()
            .map(|r| {
                let mut child = leaf.clone();
                let chose = child.inst.role_label(r).to_owned();
                child.log(
                    Rule::Branch,
                    Action::Branch {
                        q,
                        on: on.clone(),
                        chose,
                    },
                );
                force_role(&mut child, r, Rule::Branch);
                child
            })
            .collect();
        return Ok(Some(children));
    }
    Ok(None)
}

/// Branching rule 1. Expects rules 1 and 2 at fixpoint. Returns the input leaf unchanged (as a
/// single-element list) when no `L` qualifies.
pub fn branching_rule(
    leaf: BranchLeaf,
    params: &ClassParams,
) -> Result<Vec<BranchLeaf>, ReduceError> {
    Ok(branch_step(&leaf, params)?.unwrap_or_else(|| vec![leaf]))
}

/// Whether the branching rule would fire on `leaf`.
pub fn branching_applies(leaf: &BranchLeaf, params: &ClassParams) -> Result<bool, ReduceError> {
    for q in 1..params.alpha.saturating_sub(1) {
        let b = threshold_b(q, leaf.inst.kr, params.beta)?;
        if find_heavy_set(&leaf.inst, params.alpha - q, b).is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// One application of reduction rule 3 (a role holding at least `h` required permissions).
fn rule3_step(leaf: &mut BranchLeaf, params: &ClassParams) -> Result<bool, ReduceError> {
    let h = threshold_h(leaf.inst.kr, params.alpha, params.beta)?;
    let inst = &leaf.inst;
    let Some(s) = (0..inst.n_roles()).find(|&s| inst.lower_degree(s) as u64 >= h) else {
        return Ok(false);
    };
    if inst.extra_degree(s) > inst.kp {
        let label = inst.role_label(s).to_owned();
        leaf.mark_infeasible(
            Rule::Rule3,
            format!("`{label}` holds at least {h} required permissions but is too costly"),
        );
    } else {
        force_role(leaf, s, Rule::Rule3);
    }
    Ok(true)
}

/// Reduction rule 3 interleaved with rule 1, to fixpoint. Expects the branching rule to be
/// inapplicable (always the case when alpha = 2).
pub fn rule3(leaf: &mut BranchLeaf, params: &ClassParams) -> Result<bool, ReduceError> {
    let mut changed = false;
    while !leaf.infeasible && rule3_step(leaf, params)? {
        changed = true;
        rule1(leaf);
    }
    Ok(changed)
}

/// Reduction rule 4: deletes every role with more than `kp` extra permissions. Constraint
/// thresholds are left unchanged; slack constraints are cleaned up by the next rule-1 pass.
pub fn rule4(leaf: &mut BranchLeaf) -> bool {
    let mut doomed = leaf.inst.empty_roles();
    for r in 0..leaf.inst.n_roles() {
        if leaf.inst.extra_degree(r) > leaf.inst.kp {
            doomed.insert(r);
        }
    }
    if doomed.is_clear() {
        return false;
    }
    leaf.delete_roles(Rule::Rule4, &doomed);
    true
}

fn kernel_gate(leaf: &mut BranchLeaf, params: &ClassParams) -> Result<(), ReduceError> {
    let bound = kernel_bound(leaf.inst.kr, params.alpha, params.beta)?;
    let size = leaf.inst.lower_bound().count_ones(..) as u64;
    if size > bound {
        leaf.mark_infeasible(
            Rule::KernelGate,
            format!("|P_lb| = {size} exceeds the kernel bound {bound}"),
        );
    }
    Ok(())
}

/// Runs the reduction and branching rules to exhaustion. `inst` should already be the output
/// of [`reduction0`]. Leaves are listed depth-first, children in branching order.
pub fn preprocess(inst: &Instance, params: &ClassParams) -> Result<BranchTree, ReduceError> {
    let mut stack = vec![BranchLeaf::root(inst.clone())];
    let mut leaves = Vec::new();
    'leaves: while let Some(mut leaf) = stack.pop() {
        loop {
            if leaf.infeasible {
                break;
            }
            rule1(&mut leaf);
            if rule2_step(&mut leaf) {
                continue;
            }
            if let Some(children) = branch_step(&leaf, params)? {
                stack.extend(children.into_iter().rev());
                continue 'leaves;
            }
            if rule3_step(&mut leaf, params)? {
                continue;
            }
            if rule4(&mut leaf) {
                continue;
            }
            kernel_gate(&mut leaf, params)?;
            break;
        }
        leaves.push(leaf);
    }
    Ok(BranchTree {
        root: inst.clone(),
        leaves,
    })
}
