//! RBAC configurations, user authorization query instances and their derived views.
//!
//! Roles and permissions are interned to dense indices; every role or permission set is a
//! [`FixedBitSet`] keyed by those indices. Instances are immutable from the outside. The
//! reduction rules in [`crate::reduce`] rewrite them through crate-private helpers that keep
//! the index spaces dense.

use std::collections::HashMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type RoleId = usize;
pub type PermId = usize;
pub type RoleSet = FixedBitSet;
pub type PermSet = FixedBitSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown role id {0}")]
    UnknownRoleId(RoleId),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("unknown permission `{0}`")]
    UnknownPermission(String),
    #[error("duplicate role `{0}`")]
    DuplicateRole(String),
    #[error("duplicate permission `{0}`")]
    DuplicatePermission(String),
    #[error("constraint {index} lists role `{role}` more than once")]
    DuplicateConstraintRole { index: usize, role: String },
    #[error("constraint {index} has threshold 0; thresholds start at 1")]
    ZeroThreshold { index: usize },
    #[error("lower-bound permission `{0}` is not in the upper bound")]
    LowerNotInUpper(String),
    #[error("invalid class parameters: {0}")]
    InvalidParams(String),
}

/// A separation-of-duty constraint: a solution may hold at most `threshold - 1` roles of `roles`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SodConstraint {
    /// Sorted, distinct.
    pub roles: Vec<RoleId>,
    pub threshold: usize,
}

impl SodConstraint {
    pub fn new(mut roles: Vec<RoleId>, threshold: usize) -> Self {
        roles.sort_unstable();
        roles.dedup();
        SodConstraint { roles, threshold }
    }

    pub fn contains(&self, role: RoleId) -> bool {
        self.roles.binary_search(&role).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub(crate) role_labels: Vec<String>,
    pub(crate) perm_labels: Vec<String>,
    pub(crate) role_perms: Vec<PermSet>,
    pub(crate) plb: PermSet,
    pub(crate) pub_: PermSet,
    pub(crate) constraints: Vec<SodConstraint>,
    pub(crate) kr: usize,
    pub(crate) kp: usize,
}

/// A candidate set of roles. Kept sorted and duplicate-free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution {
    roles: Vec<RoleId>,
}

impl Solution {
    pub fn new(roles: impl IntoIterator<Item = RoleId>) -> Self {
        let mut roles: Vec<_> = roles.into_iter().collect();
        roles.sort_unstable();
        roles.dedup();
        Solution { roles }
    }

    pub fn roles(&self) -> &[RoleId] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TooManyRoles {
        count: usize,
        kr: usize,
    },
    MissingPermission {
        permission: String,
    },
    OutsideUpperBound {
        permission: String,
    },
    TooManyExtraPermissions {
        count: usize,
        kp: usize,
    },
    Separation {
        constraint: usize,
        active: Vec<String>,
        threshold: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooManyRoles { count, kr } => {
                write!(f, "{count} roles selected but at most {kr} allowed")
            }
            Violation::MissingPermission { permission } => {
                write!(f, "required permission `{permission}` is not covered")
            }
            Violation::OutsideUpperBound { permission } => {
                write!(f, "permission `{permission}` is outside the upper bound")
            }
            Violation::TooManyExtraPermissions { count, kp } => {
                write!(f, "{count} extra permissions but at most {kp} allowed")
            }
            Violation::Separation {
                constraint,
                active,
                threshold,
            } => write!(
                f,
                "constraint {constraint} activates {} roles ({}) but the threshold is {threshold}",
                active.len(),
                active.join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// The fixed `(alpha, beta)` of the K_{alpha,beta}-free class and the maximum constraint width `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassParams {
    pub alpha: usize,
    pub beta: usize,
    pub c: usize,
}

impl ClassParams {
    pub fn new(alpha: usize, beta: usize, c: usize) -> Result<Self, ModelError> {
        if alpha < 2 || beta < 2 {
            return Err(ModelError::InvalidParams(format!(
                "alpha and beta must be at least 2 (got alpha={alpha}, beta={beta})"
            )));
        }
        if c == 0 {
            return Err(ModelError::InvalidParams("c must be positive".into()));
        }
        Ok(ClassParams { alpha, beta, c })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassWitness {
    /// `roles` share `common` permissions, at least beta of them.
    Biclique {
        roles: Vec<String>,
        common: Vec<String>,
    },
    WideConstraint {
        constraint: usize,
        width: usize,
    },
    Overlap {
        first: usize,
        second: usize,
        role: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassReport {
    pub kab_free: bool,
    pub widths_ok: bool,
    pub disjoint_ok: bool,
    pub witnesses: Vec<ClassWitness>,
}

impl ClassReport {
    pub fn passes(&self) -> bool {
        self.kab_free && self.widths_ok && self.disjoint_ok
    }

    /// One line per witness.
    pub fn summary(&self) -> String {
        if self.passes() {
            return "ok".into();
        }
        self.witnesses
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl fmt::Display for ClassWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassWitness::Biclique { roles, common } => {
                write!(
                    f,
                    "roles {{{}}} share permissions {{{}}}",
                    roles.join(", "),
                    common.join(", ")
                )
            }
            ClassWitness::WideConstraint { constraint, width } => {
                write!(f, "constraint {constraint} has {width} roles")
            }
            ClassWitness::Overlap {
                first,
                second,
                role,
            } => {
                write!(f, "constraints {first} and {second} share role `{role}`")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub k_hat: usize,
    pub r_hat: usize,
    pub n_roles: usize,
    pub n_perms: usize,
    pub n_constraints: usize,
}

impl Instance {
    pub fn n_roles(&self) -> usize {
        self.role_labels.len()
    }

    pub fn n_perms(&self) -> usize {
        self.perm_labels.len()
    }

    pub fn role_label(&self, r: RoleId) -> &str {
        &self.role_labels[r]
    }

    pub fn perm_label(&self, p: PermId) -> &str {
        &self.perm_labels[p]
    }

    pub fn role_labels(&self) -> &[String] {
        &self.role_labels
    }

    pub fn perm_labels(&self) -> &[String] {
        &self.perm_labels
    }

    pub fn role_id(&self, label: &str) -> Option<RoleId> {
        self.role_labels.iter().position(|l| l == label)
    }

    pub fn perm_id(&self, label: &str) -> Option<PermId> {
        self.perm_labels.iter().position(|l| l == label)
    }

    /// P(r).
    pub fn perms(&self, r: RoleId) -> &PermSet {
        &self.role_perms[r]
    }

    pub fn lower_bound(&self) -> &PermSet {
        &self.plb
    }

    pub fn upper_bound(&self) -> &PermSet {
        &self.pub_
    }

    pub fn constraints(&self) -> &[SodConstraint] {
        &self.constraints
    }

    pub fn kr(&self) -> usize {
        self.kr
    }

    pub fn kp(&self) -> usize {
        self.kp
    }

    pub fn with_budgets(mut self, kr: usize, kp: usize) -> Self {
        self.kr = kr;
        self.kp = kp;
        self
    }

    /// Sets `kr = |R|`, i.e. no restriction on the number of roles.
    pub fn with_unbounded_kr(mut self) -> Self {
        self.kr = self.n_roles();
        self
    }

    pub fn empty_roles(&self) -> RoleSet {
        FixedBitSet::with_capacity(self.n_roles())
    }

    pub fn empty_perms(&self) -> PermSet {
        FixedBitSet::with_capacity(self.n_perms())
    }

    /// |P(r) \ P_lb|.
    pub fn extra_degree(&self, r: RoleId) -> usize {
        self.role_perms[r].difference_count(&self.plb)
    }

    /// |P(r) ∩ P_lb|.
    pub fn lower_degree(&self, r: RoleId) -> usize {
        self.role_perms[r].intersection_count(&self.plb)
    }

    /// Roles assigned to permission `p`.
    pub fn holders(&self, p: PermId) -> impl Iterator<Item = RoleId> + '_ {
        (0..self.n_roles()).filter(move |&r| self.role_perms[r].contains(p))
    }

    /// P(R') = union of P(r) over `roles`.
    pub fn permissions_of(&self, roles: &[RoleId]) -> Result<PermSet, ModelError> {
        let mut out = self.empty_perms();
        for &r in roles {
            let perms = self.role_perms.get(r).ok_or(ModelError::UnknownRoleId(r))?;
            out.union_with(perms);
        }
        Ok(out)
    }

    /// Checks the four clauses of the query literally and lists every failed one.
    pub fn verify_solution(&self, sol: &Solution) -> Result<Verdict, ModelError> {
        let granted = self.permissions_of(sol.roles())?;
        let mut violations = Vec::new();
        if sol.len() > self.kr {
            violations.push(Violation::TooManyRoles {
                count: sol.len(),
                kr: self.kr,
            });
        }
        for p in self.plb.difference(&granted) {
            violations.push(Violation::MissingPermission {
                permission: self.perm_labels[p].clone(),
            });
        }
        for p in granted.difference(&self.pub_) {
            violations.push(Violation::OutsideUpperBound {
                permission: self.perm_labels[p].clone(),
            });
        }
        let extras = granted.difference_count(&self.plb);
        if extras > self.kp {
            violations.push(Violation::TooManyExtraPermissions {
                count: extras,
                kp: self.kp,
            });
        }
        for (index, c) in self.constraints.iter().enumerate() {
            let active: Vec<RoleId> = sol
                .roles()
                .iter()
                .copied()
                .filter(|&r| c.contains(r))
                .collect();
            if active.len() >= c.threshold {
                violations.push(Violation::Separation {
                    constraint: index,
                    active: active
                        .iter()
                        .map(|&r| self.role_labels[r].clone())
                        .collect(),
                    threshold: c.threshold,
                });
            }
        }
        Ok(Verdict {
            ok: violations.is_empty(),
            violations,
        })
    }

    /// Membership in the `(alpha, beta)` class: K_{alpha,beta}-freeness of the role-permission
    /// graph, constraint widths at most `c`, and pairwise-disjoint constraint role sets.
    pub fn check_class(&self, params: &ClassParams) -> ClassReport {
        let mut witnesses = Vec::new();

        let kab = self.find_biclique(params.alpha, params.beta);
        let kab_free = kab.is_none();
        if let Some((roles, common)) = kab {
            witnesses.push(ClassWitness::Biclique {
                roles: roles.iter().map(|&r| self.role_labels[r].clone()).collect(),
                common: common.ones().map(|p| self.perm_labels[p].clone()).collect(),
            });
        }

        let mut widths_ok = true;
        for (index, c) in self.constraints.iter().enumerate() {
            if c.roles.len() > params.c {
                widths_ok = false;
                witnesses.push(ClassWitness::WideConstraint {
                    constraint: index,
                    width: c.roles.len(),
                });
            }
        }

        let mut disjoint_ok = true;
        let mut owner: HashMap<RoleId, usize> = HashMap::new();
        for (index, c) in self.constraints.iter().enumerate() {
            for &r in &c.roles {
                if let Some(&first) = owner.get(&r) {
                    disjoint_ok = false;
                    witnesses.push(ClassWitness::Overlap {
                        first,
                        second: index,
                        role: self.role_labels[r].clone(),
                    });
                } else {
                    owner.insert(r, index);
                }
            }
        }

        ClassReport {
            kab_free,
            widths_ok,
            disjoint_ok,
            witnesses,
        }
    }

    /// First `alpha`-subset of roles (in lexicographic order) whose permission sets share at
    /// least `beta` permissions.
    fn find_biclique(&self, alpha: usize, beta: usize) -> Option<(Vec<RoleId>, PermSet)> {
        if alpha == 0 || alpha > self.n_roles() {
            return None;
        }
        let candidates: Vec<RoleId> = (0..self.n_roles())
            .filter(|&r| self.role_perms[r].count_ones(..) >= beta)
            .collect();
        let mut chosen = Vec::with_capacity(alpha);
        let mut all = self.empty_perms();
        all.insert_range(..);
        self.biclique_dfs(&candidates, 0, alpha, beta, &all, &mut chosen)
    }

    fn biclique_dfs(
        &self,
        candidates: &[RoleId],
        from: usize,
        alpha: usize,
        beta: usize,
        common: &PermSet,
        chosen: &mut Vec<RoleId>,
    ) -> Option<(Vec<RoleId>, PermSet)> {
        if chosen.len() == alpha {
            return Some((chosen.clone(), common.clone()));
        }
        let needed = alpha - chosen.len();
        for i in from..candidates.len() {
            if candidates.len() - i < needed {
                break;
            }
            let r = candidates[i];
            let mut next = common.clone();
            next.intersect_with(&self.role_perms[r]);
            if next.count_ones(..) < beta {
                continue;
            }
            chosen.push(r);
            if let Some(found) = self.biclique_dfs(candidates, i + 1, alpha, beta, &next, chosen) {
                return Some(found);
            }
            chosen.pop();
        }
        None
    }

    pub fn stats(&self) -> Stats {
        Stats {
            k_hat: self.n_perms() - self.plb.count_ones(..),
            r_hat: (0..self.n_roles())
                .filter(|&r| !self.role_perms[r].is_subset(&self.plb))
                .count(),
            n_roles: self.n_roles(),
            n_perms: self.n_perms(),
            n_constraints: self.constraints.len(),
        }
    }

    /// Keeps the roles in `keep`, renumbering them densely in their current order. Constraints
    /// lose the dropped roles but keep their thresholds. Returns, for every new id, the old id.
    pub(crate) fn retain_roles(&mut self, keep: &RoleSet) -> Vec<RoleId> {
        let kept: Vec<RoleId> = keep.ones().filter(|&r| r < self.n_roles()).collect();
        let mut remap = vec![usize::MAX; self.n_roles()];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new;
        }
        self.role_labels = kept
            .iter()
            .map(|&r| std::mem::take(&mut self.role_labels[r]))
            .collect();
        self.role_perms = kept
            .iter()
            .map(|&r| std::mem::take(&mut self.role_perms[r]))
            .collect();
        for c in &mut self.constraints {
            c.roles = c
                .roles
                .iter()
                .filter(|&&r| remap[r] != usize::MAX)
                .map(|&r| remap[r])
                .collect();
        }
        kept
    }

    /// Removes the permissions in `drop` from P, P_lb, P_ub and every role, renumbering densely.
    pub(crate) fn remove_permissions(&mut self, drop: &PermSet) {
        if drop.is_clear() {
            return;
        }
        let kept: Vec<PermId> = (0..self.n_perms()).filter(|&p| !drop.contains(p)).collect();
        let project = |set: &PermSet| {
            let mut out = FixedBitSet::with_capacity(kept.len());
            for (new, &old) in kept.iter().enumerate() {
                if set.contains(old) {
                    out.insert(new);
                }
            }
            out
        };
        self.role_perms = self.role_perms.iter().map(project).collect();
        self.plb = project(&self.plb);
        self.pub_ = project(&self.pub_);
        self.perm_labels = kept
            .iter()
            .map(|&p| std::mem::take(&mut self.perm_labels[p]))
            .collect();
    }
}

/// Label-keyed construction of an [`Instance`]. Identifiers are interned in declaration order.
#[derive(Debug, Clone, Default)]
pub struct InstanceBuilder {
    roles: Vec<String>,
    perms: Vec<String>,
    rp: Vec<(String, String)>,
    plb: Vec<String>,
    pub_: Option<Vec<String>>,
    constraints: Vec<(Vec<String>, usize)>,
    kr: usize,
    kp: usize,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn role(&mut self, label: impl Into<String>) -> &mut Self {
        self.roles.push(label.into());
        self
    }

    pub fn permission(&mut self, label: impl Into<String>) -> &mut Self {
        self.perms.push(label.into());
        self
    }

    pub fn assign(&mut self, role: impl Into<String>, perm: impl Into<String>) -> &mut Self {
        self.rp.push((role.into(), perm.into()));
        self
    }

    pub fn require(&mut self, perm: impl Into<String>) -> &mut Self {
        self.plb.push(perm.into());
        self
    }

    /// Sets P_ub explicitly; without it P_ub is the whole permission set.
    pub fn upper_bound<S: Into<String>>(
        &mut self,
        perms: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.pub_ = Some(perms.into_iter().map(Into::into).collect());
        self
    }

    pub fn constraint<S: Into<String>>(
        &mut self,
        roles: impl IntoIterator<Item = S>,
        t: usize,
    ) -> &mut Self {
        self.constraints
            .push((roles.into_iter().map(Into::into).collect(), t));
        self
    }

    pub fn kr(&mut self, kr: usize) -> &mut Self {
        self.kr = kr;
        self
    }

    pub fn kp(&mut self, kp: usize) -> &mut Self {
        self.kp = kp;
        self
    }

    pub fn build(&self) -> Result<Instance, ModelError> {
        let mut role_ids = HashMap::new();
        for (i, r) in self.roles.iter().enumerate() {
            if role_ids.insert(r.as_str(), i).is_some() {
                return Err(ModelError::DuplicateRole(r.clone()));
            }
        }
        let mut perm_ids = HashMap::new();
        for (i, p) in self.perms.iter().enumerate() {
            if perm_ids.insert(p.as_str(), i).is_some() {
                return Err(ModelError::DuplicatePermission(p.clone()));
            }
        }
        let role = |l: &String| {
            role_ids
                .get(l.as_str())
                .copied()
                .ok_or_else(|| ModelError::UnknownRole(l.clone()))
        };
        let perm = |l: &String| {
            perm_ids
                .get(l.as_str())
                .copied()
                .ok_or_else(|| ModelError::UnknownPermission(l.clone()))
        };

        let n_perms = self.perms.len();
        let mut role_perms = vec![FixedBitSet::with_capacity(n_perms); self.roles.len()];
        for (r, p) in &self.rp {
            let (r, p) = (role(r)?, perm(p)?);
            role_perms[r].insert(p);
        }
        let mut plb = FixedBitSet::with_capacity(n_perms);
        for p in &self.plb {
            plb.insert(perm(p)?);
        }
        let pub_ = match &self.pub_ {
            Some(list) => {
                let mut set = FixedBitSet::with_capacity(n_perms);
                for p in list {
                    set.insert(perm(p)?);
                }
                set
            }
            None => {
                let mut all = FixedBitSet::with_capacity(n_perms);
                all.insert_range(..);
                all
            }
        };
        if let Some(p) = plb.difference(&pub_).next() {
            return Err(ModelError::LowerNotInUpper(self.perms[p].clone()));
        }
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for (index, (labels, t)) in self.constraints.iter().enumerate() {
            if *t == 0 {
                return Err(ModelError::ZeroThreshold { index });
            }
            let mut ids = Vec::with_capacity(labels.len());
            for l in labels {
                let id = role(l)?;
                if ids.contains(&id) {
                    return Err(ModelError::DuplicateConstraintRole {
                        index,
                        role: l.clone(),
                    });
                }
                ids.push(id);
            }
            constraints.push(SodConstraint::new(ids, *t));
        }
        Ok(Instance {
            role_labels: self.roles.clone(),
            perm_labels: self.perms.clone(),
            role_perms,
            plb,
            pub_,
            constraints,
            kr: self.kr,
            kp: self.kp,
        })
    }
}
