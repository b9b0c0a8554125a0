//! Instance generators: reductions from red-blue dominating set and multicolored biclique, and
//! a seeded random generator for the (alpha, beta) class with an optional planted solution.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ClassParams, ClassWitness, Instance, InstanceBuilder, ModelError, RoleId, Solution,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error("no instance found after {attempts} attempts: {reason}")]
    Exhausted { attempts: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A bipartite graph with labelled sides; edges are `(a index, b index)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn new(
        a: Vec<String>,
        b: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GenError> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= a.len() || v >= b.len()) {
            return Err(GenError::Graph(format!(
                "edge ({u}, {v}) leaves the vertex range"
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = a.iter().chain(&b).find(|l| !seen.insert(l.as_str())) {
            return Err(GenError::Graph(format!("duplicate vertex `{dup}`")));
        }
        Ok(BipartiteGraph { a, b, edges })
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }
}

/// A bipartite graph whose sides are split into `k` nonempty blocks each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteInstance {
    pub a_blocks: Vec<Vec<String>>,
    pub b_blocks: Vec<Vec<String>>,
    pub edges: BTreeSet<(String, String)>,
}

impl BipartiteInstance {
    pub fn new(
        a_blocks: Vec<Vec<String>>,
        b_blocks: Vec<Vec<String>>,
        edges: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, GenError> {
        let g = BipartiteInstance {
            a_blocks,
            b_blocks,
            edges: edges.into_iter().collect(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.a_blocks.len() != self.b_blocks.len() {
            return Err(GenError::Graph(format!(
                "{} A-blocks but {} B-blocks",
                self.a_blocks.len(),
                self.b_blocks.len()
            )));
        }
        if self
            .a_blocks
            .iter()
            .chain(&self.b_blocks)
            .any(Vec::is_empty)
        {
            return Err(GenError::Graph("empty block".into()));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = self
            .a_blocks
            .iter()
            .chain(&self.b_blocks)
            .flatten()
            .find(|l| !seen.insert(l.as_str()))
        {
            return Err(GenError::Graph(format!("duplicate vertex `{dup}`")));
        }
        let a: BTreeSet<&str> = self.a_blocks.iter().flatten().map(String::as_str).collect();
        let b: BTreeSet<&str> = self.b_blocks.iter().flatten().map(String::as_str).collect();
        if let Some((u, v)) = self
            .edges
            .iter()
            .find(|(u, v)| !a.contains(u.as_str()) || !b.contains(v.as_str()))
        {
            return Err(GenError::Graph(format!(
                "edge ({u}, {v}) does not join A to B"
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.a_blocks.len()
    }

    pub fn a_vertices(&self) -> impl Iterator<Item = &String> {
        self.a_blocks.iter().flatten()
    }

    pub fn b_vertices(&self) -> impl Iterator<Item = &String> {
        self.b_blocks.iter().flatten()
    }

    pub fn has_edge(&self, u: &str, v: &str) -> bool {
        self.edges.contains(&(u.to_owned(), v.to_owned()))
    }
}

/// Roles are the A-vertices, required permissions the B-vertices, and every role carries one
/// private extra permission `p_{v}`. `kp = k`, `kr = |A|`, no constraints.
pub fn gen_rbds_type1(g: &BipartiteGraph, k: usize) -> Result<Instance, GenError> {
    let mut b = InstanceBuilder::new();
    for v in &g.a {
        b.role(v.as_str())
            .permission(format!("p_{v}"))
            .assign(v.as_str(), format!("p_{v}"));
    }
    for w in &g.b {
        b.permission(w.as_str()).require(w.as_str());
    }
    for &(u, v) in &g.edges {
        b.assign(g.a[u].as_str(), g.b[v].as_str());
    }
    Ok(b.kr(g.a.len()).kp(k).build()?)
}

/// Roles are the A-vertices and `P = P_lb` the B-vertices. `kr = k`, `kp = 0`.
pub fn gen_rbds_type2(g: &BipartiteGraph, k: usize) -> Result<Instance, GenError> {
    let mut b = InstanceBuilder::new();
    for v in &g.a {
        b.role(v.as_str());
    }
    for w in &g.b {
        b.permission(w.as_str()).require(w.as_str());
    }
    for &(u, v) in &g.edges {
        b.assign(g.a[u].as_str(), g.b[v].as_str());
    }
    Ok(b.kr(k).kp(0).build()?)
}

pub fn edge_role(u: &str, v: &str) -> String {
    format!("r_{u}_{v}")
}

pub fn pair_permission(i: usize, j: usize) -> String {
    format!("p_{i}_{j}")
}

/// One role `r_{u}_{v}` per edge holding `{u, v, p_{i}_{j}}` where `u ∈ A_i`, `v ∈ B_j`
/// (blocks numbered from 1). `P_lb` is the `k^2` pair permissions, `kr = k^2`, `kp = 2k`.
pub fn gen_mcb_nosod(g: &BipartiteInstance) -> Result<Instance, GenError> {
    g.validate()?;
    let k = g.k();
    let block = |blocks: &[Vec<String>], x: &str| {
        blocks
            .iter()
            .position(|bl| bl.iter().any(|y| y == x))
            .map(|i| i + 1)
    };
    let mut b = InstanceBuilder::new();
    for i in 1..=k {
        for j in 1..=k {
            b.permission(pair_permission(i, j))
                .require(pair_permission(i, j));
        }
    }
    for v in g.a_vertices().chain(g.b_vertices()) {
        b.permission(v.as_str());
    }
    for (u, v) in &g.edges {
        let (Some(i), Some(j)) = (block(&g.a_blocks, u), block(&g.b_blocks, v)) else {
            unreachable!("validated")
        };
        let r = edge_role(u, v);
        b.role(r.as_str())
            .assign(r.as_str(), u.as_str())
            .assign(r.as_str(), v.as_str())
            .assign(r.as_str(), pair_permission(i, j));
    }
    Ok(b.kr(k * k).kp(2 * k).build()?)
}

/// Roles `r_{v}` per vertex plus `s`; permissions `p_{v}` per vertex, one block permission
/// `block_{i}` per block (A-blocks first) and `q`, all required. `r_{v}` holds its vertex and
/// block permissions, `s` holds every vertex permission and `q`. Every non-adjacent pair
/// `u ∈ A`, `v ∈ B` gets the constraint `<{r_u, r_v}, 2>`. `kr = 2k + 1`, `kp = 0`.
pub fn gen_mcb_k22(g: &BipartiteInstance) -> Result<Instance, GenError> {
    g.validate()?;
    let k = g.k();
    let mut b = InstanceBuilder::new();
    b.role("s").permission("q").assign("s", "q").require("q");
    for (i, blk) in g.a_blocks.iter().chain(&g.b_blocks).enumerate() {
        let bp = format!("block_{}", i + 1);
        b.permission(bp.as_str()).require(bp.as_str());
        for v in blk {
            let (r, p) = (format!("r_{v}"), format!("p_{v}"));
            b.role(r.as_str())
                .permission(p.as_str())
                .require(p.as_str());
            b.assign(r.as_str(), p.as_str())
                .assign(r.as_str(), bp.as_str())
                .assign("s", p.as_str());
        }
    }
    for u in g.a_vertices() {
        for v in g.b_vertices() {
            if !g.has_edge(u, v) {
                b.constraint([format!("r_{u}"), format!("r_{v}")], 2);
            }
        }
    }
    Ok(b.kr(2 * k + 1).kp(0).build()?)
}

/// Each of the `n_a * n_b` pairs is an edge with probability `p`. Vertices are `a{i}`, `b{j}`.
pub fn random_bipartite(n_a: usize, n_b: usize, p: f64, rng: &mut impl Rng) -> BipartiteGraph {
    let a = (0..n_a).map(|i| format!("a{i}")).collect();
    let b = (0..n_b).map(|j| format!("b{j}")).collect();
    let edges: Vec<(usize, usize)> = (0..n_a)
        .flat_map(|u| (0..n_b).map(move |v| (u, v)))
        .filter(|_| rng.random_bool(p))
        .collect();
    BipartiteGraph {
        a,
        b,
        edges: edges.into_iter().collect(),
    }
}

fn blocked_labels(sizes: &[usize], side: char) -> Vec<Vec<String>> {
    let mut next = 0;
    sizes
        .iter()
        .map(|&s| {
            let blk = (next..next + s).map(|x| format!("{side}{x}")).collect();
            next += s;
            blk
        })
        .collect()
}

/// Block sizes uniform in `1..=max_per_block`, edges with probability `p`. With
/// `plant_biclique`, one random vertex per block is fully wired to the other side's picks.
pub fn random_blocked(
    k: usize,
    max_per_block: usize,
    p: f64,
    plant_biclique: bool,
    rng: &mut impl Rng,
) -> BipartiteInstance {
    let mut sizes = || {
        (0..k)
            .map(|_| rng.random_range(1..=max_per_block))
            .collect::<Vec<_>>()
    };
    let (sa, sb) = (sizes(), sizes());
    let a_blocks = blocked_labels(&sa, 'a');
    let b_blocks = blocked_labels(&sb, 'b');
    let mut edges = BTreeSet::new();
    for u in a_blocks.iter().flatten() {
        for v in b_blocks.iter().flatten() {
            if rng.random_bool(p) {
                edges.insert((u.clone(), v.clone()));
            }
        }
    }
    if plant_biclique {
        let pick = |blocks: &[Vec<String>], rng: &mut dyn rand::RngCore| -> Vec<String> {
            blocks
                .iter()
                .map(|bl| bl[rng.random_range(0..bl.len())].clone())
                .collect()
        };
        let (pa, pb) = (pick(&a_blocks, rng), pick(&b_blocks, rng));
        for u in &pa {
            for v in &pb {
                edges.insert((u.clone(), v.clone()));
            }
        }
    }
    BipartiteInstance {
        a_blocks,
        b_blocks,
        edges,
    }
}

/// Calls `f` on every blocked graph with `k` blocks per side, block sizes in
/// `1..=max_per_block`, and every edge subset. Returns the number of graphs visited.
pub fn for_each_blocked_graph(
    k: usize,
    max_per_block: usize,
    mut f: impl FnMut(&BipartiteInstance),
) -> usize {
    let size_vectors: Vec<Vec<usize>> = {
        let mut all = vec![Vec::new()];
        for _ in 0..k {
            all = all
                .into_iter()
                .flat_map(|v: Vec<usize>| {
                    (1..=max_per_block).map(move |s| [v.clone(), vec![s]].concat())
                })
                .collect();
        }
        all
    };
    let mut count = 0;
    for sa in &size_vectors {
        for sb in &size_vectors {
            let a_blocks = blocked_labels(sa, 'a');
            let b_blocks = blocked_labels(sb, 'b');
            let pairs: Vec<(String, String)> = a_blocks
                .iter()
                .flatten()
                .flat_map(|u| {
                    b_blocks
                        .iter()
                        .flatten()
                        .map(move |v| (u.clone(), v.clone()))
                })
                .collect();
            assert!(pairs.len() < 32, "too many vertex pairs to enumerate");
            for mask in 0u32..(1 << pairs.len()) {
                let edges = pairs
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| mask >> i & 1 == 1)
                    .map(|(_, e)| e.clone())
                    .collect();
                f(&BipartiteInstance {
                    a_blocks: a_blocks.clone(),
                    b_blocks: b_blocks.clone(),
                    edges,
                });
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub n_roles: usize,
    pub n_perms: usize,
    pub plb_size: usize,
    pub max_role_degree: usize,
    pub alpha: usize,
    pub beta: usize,
    /// Largest constraint width.
    pub c: usize,
    pub n_constraints: usize,
    pub kr: usize,
    pub kp: usize,
    pub plant: bool,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: Instance,
    pub planted: Option<Solution>,
}

const ATTEMPTS: usize = 32;

impl RandomSpec {
    fn check(&self) -> Result<ClassParams, GenError> {
        let params = ClassParams::new(self.alpha, self.beta, self.c)
            .map_err(|e| GenError::Spec(e.to_string()))?;
        let fail = |m: &str| Err(GenError::Spec(m.into()));
        if self.plb_size > self.n_perms {
            return fail("plb_size exceeds n_perms");
        }
        if self.max_role_degree == 0 {
            return fail("max_role_degree must be positive");
        }
        if self.n_constraints > 0 && self.c < 2 {
            return fail("constraints need c >= 2");
        }
        if 2 * self.n_constraints > self.n_roles {
            return fail("not enough roles for disjoint constraints of width 2");
        }
        if self.plant && self.plb_size > 0 && (self.kr == 0 || self.n_roles == 0) {
            return fail("a planted solution needs kr >= 1 and at least one role");
        }
        Ok(params)
    }
}

/// Label of permission `p`: required permissions are `l{i}`, the rest `x{j}`.
fn perm_label(spec: &RandomSpec, p: usize) -> String {
    if p < spec.plb_size {
        format!("l{p}")
    } else {
        format!("x{}", p - spec.plb_size)
    }
}

struct Draft {
    perms: Vec<BTreeSet<usize>>,
    constraints: Vec<(Vec<RoleId>, usize)>,
    planted: Vec<RoleId>,
}

impl Draft {
    fn build(&self, spec: &RandomSpec) -> Result<Instance, GenError> {
        let mut b = InstanceBuilder::new();
        for r in 0..spec.n_roles {
            b.role(format!("r{r}"));
        }
        for p in 0..spec.n_perms {
            b.permission(perm_label(spec, p));
        }
        for p in 0..spec.plb_size {
            b.require(perm_label(spec, p));
        }
        for (r, ps) in self.perms.iter().enumerate() {
            for &p in ps {
                b.assign(format!("r{r}"), perm_label(spec, p));
            }
        }
        for (roles, t) in &self.constraints {
            b.constraint(roles.iter().map(|r| format!("r{r}")), *t);
        }
        Ok(b.kr(spec.kr).kp(spec.kp).build()?)
    }
}

fn draft(spec: &RandomSpec, rng: &mut ChaCha8Rng) -> Result<Draft, String> {
    let mut order: Vec<RoleId> = (0..spec.n_roles).collect();
    order.shuffle(rng);
    let mut constraints = Vec::new();
    let mut rest = order.as_slice();
    for left in (1..=spec.n_constraints).rev() {
        // Leave at least two roles for each remaining constraint.
        let room = rest.len() - 2 * (left - 1);
        let width = rng.random_range(2..=spec.c.min(room));
        let (head, tail) = rest.split_at(width);
        let mut roles = head.to_vec();
        roles.sort_unstable();
        constraints.push((roles, rng.random_range(1..=width)));
        rest = tail;
    }

    let mut perms = vec![BTreeSet::new(); spec.n_roles];
    let mut planted = Vec::new();
    if spec.plant {
        let mut used = vec![0usize; constraints.len()];
        let target = rng.random_range(1..=spec.kr.min(spec.n_roles).max(1));
        let mut pool: Vec<RoleId> = (0..spec.n_roles).collect();
        pool.shuffle(rng);
        for r in pool {
            if planted.len() == target {
                break;
            }
            if let Some(c) = constraints.iter().position(|(roles, _)| roles.contains(&r)) {
                if used[c] + 1 >= constraints[c].1 {
                    continue;
                }
                used[c] += 1;
            }
            planted.push(r);
        }
        if planted.is_empty() && spec.plb_size > 0 {
            return Err("no role can join the planted solution".into());
        }
        let n_extra = rng.random_range(0..=spec.kp.min(spec.n_perms - spec.plb_size));
        let mut extras: Vec<usize> = (spec.plb_size..spec.n_perms).collect();
        extras.shuffle(rng);
        let wanted = (0..spec.plb_size).chain(extras.into_iter().take(n_extra));
        for (idx, p) in wanted.enumerate() {
            // Round-robin first so every planted role gets something, then random.
            let open: Vec<RoleId> = planted
                .iter()
                .copied()
                .filter(|&r| perms[r].len() < spec.max_role_degree)
                .collect();
            if open.is_empty() {
                return Err("planted roles cannot hold every required permission".into());
            }
            let r = if idx < planted.len() && open.contains(&planted[idx]) {
                planted[idx]
            } else {
                open[rng.random_range(0..open.len())]
            };
            perms[r].insert(p);
        }
    }

    let planted_set: BTreeSet<RoleId> = planted.iter().copied().collect();
    for r in (0..spec.n_roles).filter(|r| !planted_set.contains(r)) {
        if spec.n_perms == 0 {
            break;
        }
        let degree = rng.random_range(1..=spec.max_role_degree.min(spec.n_perms));
        let mut all: Vec<usize> = (0..spec.n_perms).collect();
        all.shuffle(rng);
        perms[r].extend(all.into_iter().take(degree));
    }
    planted.sort_unstable();
    Ok(Draft {
        perms,
        constraints,
        planted,
    })
}

/// Seeded random instance in the (alpha, beta, c) class with pairwise-disjoint constraints.
///
/// With `plant`, a solution of at most `kr` pairwise-disjoint roles is embedded first: every
/// required permission and up to `kp` extra ones go to exactly one planted role. Other roles get
/// random permission sets. Any `K_{alpha,beta}` is then broken by removing a shared permission
/// from one of its unplanted roles; planted roles share nothing, so this never touches them.
pub fn gen_random(spec: &RandomSpec) -> Result<GeneratedInstance, GenError> {
    let params = spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut last = String::new();
    for _ in 0..ATTEMPTS {
        let mut d = match draft(spec, &mut rng) {
            Ok(d) => d,
            Err(reason) => {
                last = reason;
                continue;
            }
        };
        let planted: BTreeSet<RoleId> = d.planted.iter().copied().collect();
        loop {
            let inst = d.build(spec)?;
            let report = inst.check_class(&params);
            let biclique = report.witnesses.iter().find_map(|w| match w {
                ClassWitness::Biclique { roles, common } => Some((roles.clone(), common.clone())),
                _ => None,
            });
            let Some((roles, common)) = biclique else {
                debug_assert!(report.passes());
                let planted = spec.plant.then(|| Solution::new(d.planted.iter().copied()));
                return Ok(GeneratedInstance {
                    instance: inst,
                    planted,
                });
            };
            let ids: Vec<RoleId> = roles
                .iter()
                .filter_map(|l| inst.role_id(l))
                .filter(|r| !planted.contains(r))
                .collect();
            let victim = ids[rng.random_range(0..ids.len())];
            let drop = &common[rng.random_range(0..common.len())];
            let p = inst.perm_id(drop).expect("witness permission exists");
            d.perms[victim].remove(&p);
        }
    }
    Err(GenError::Exhausted {
        attempts: ATTEMPTS,
        reason: last,
    })
}
