//! Independent oracles shared by the integration tests. None of them call the solvers.
#![allow(dead_code)]

use rand::Rng;
use uaq_core::generators::{BipartiteGraph, BipartiteInstance, RandomSpec};
use uaq_core::matroid::PartitionMatroid;
use uaq_core::model::{Instance, RoleId};

/// Direct validity check of a role set, written against the raw accessors only.
pub fn is_valid(inst: &Instance, roles: &[RoleId]) -> bool {
    if roles.len() > inst.kr() {
        return false;
    }
    let mut granted = vec![false; inst.n_perms()];
    for &r in roles {
        for p in inst.perms(r).ones() {
            granted[p] = true;
        }
    }
    let covered = inst.lower_bound().ones().all(|p| granted[p]);
    let inside = (0..inst.n_perms()).all(|p| !granted[p] || inst.upper_bound().contains(p));
    let extras = (0..inst.n_perms())
        .filter(|&p| granted[p] && !inst.lower_bound().contains(p))
        .count();
    let separated = inst
        .constraints()
        .iter()
        .all(|c| roles.iter().filter(|r| c.roles.contains(r)).count() < c.threshold);
    covered && inside && extras <= inst.kp() && separated
}

/// Satisfiability by enumerating every role bitmask.
pub fn naive_sat(inst: &Instance) -> bool {
    let n = inst.n_roles();
    assert!(n <= 22, "naive oracle limited to 22 roles");
    (0u32..(1 << n)).any(|mask| {
        let roles: Vec<RoleId> = (0..n).filter(|&r| mask >> r & 1 == 1).collect();
        roles.len() <= inst.kr() && is_valid(inst, &roles)
    })
}

/// One vertex per block on each side, all chosen A-vertices adjacent to all chosen B-vertices.
pub fn has_multicolored_biclique(g: &BipartiteInstance) -> bool {
    fn picks(blocks: &[Vec<String>]) -> Vec<Vec<&str>> {
        let mut out: Vec<Vec<&str>> = vec![Vec::new()];
        for blk in blocks {
            out = out
                .into_iter()
                .flat_map(|p| {
                    blk.iter()
                        .map(move |v| [p.clone(), vec![v.as_str()]].concat())
                })
                .collect();
        }
        out
    }
    let bs = picks(&g.b_blocks);
    picks(&g.a_blocks).iter().any(|a| {
        bs.iter()
            .any(|b| a.iter().all(|u| b.iter().all(|v| g.has_edge(u, v))))
    })
}

/// Some `S ⊆ A` with `|S| <= k` dominates every vertex of `B`.
pub fn has_red_blue_dominating_set(g: &BipartiteGraph, k: usize) -> bool {
    let n = g.a.len();
    (0u32..(1 << n)).any(|mask| {
        mask.count_ones() as usize <= k
            && (0..g.b.len()).all(|v| (0..n).any(|u| mask >> u & 1 == 1 && g.has_edge(u, v)))
    })
}

/// The two-block example graph with a biclique on {a2, a3} x {b2, b3}.
pub fn two_block_graph() -> BipartiteInstance {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let edges = [
        ("a1", "b1"),
        ("a1", "b2"),
        ("a1", "b4"),
        ("a2", "b2"),
        ("a2", "b3"),
        ("a3", "b2"),
        ("a3", "b3"),
        ("a4", "b1"),
        ("a4", "b4"),
        ("a5", "b1"),
        ("a5", "b4"),
    ];
    BipartiteInstance::new(
        vec![s(&["a1", "a2"]), s(&["a3", "a4", "a5"])],
        vec![s(&["b1", "b2"]), s(&["b3", "b4"])],
        edges.iter().map(|&(u, v)| (u.to_string(), v.to_string())),
    )
    .unwrap()
}

/// Random spec inside the desk-scale envelope: alpha = beta = 2, c <= 3, |R| <= 12, |P| <= 14,
/// kr <= 4, kp <= 3.
pub fn desk_spec(rng: &mut impl Rng, seed: u64) -> RandomSpec {
    let n_roles = rng.random_range(3..=12);
    let n_perms = rng.random_range(3..=14);
    let c = rng.random_range(2..=3);
    RandomSpec {
        n_roles,
        n_perms,
        plb_size: rng.random_range(1..=n_perms.min(8)),
        max_role_degree: rng.random_range(1..=4),
        alpha: 2,
        beta: 2,
        c,
        n_constraints: rng.random_range(0..=(n_roles / 2).min(3)),
        kr: rng.random_range(1..=4),
        kp: rng.random_range(0..=3),
        plant: rng.random_bool(0.5),
        seed,
    }
}

/// Rank of the columns `cols` of the representation by plain Gaussian elimination.
pub fn column_rank(m: &PartitionMatroid, cols: &[RoleId]) -> usize {
    let p = m.field().modulus() as u128;
    let rows = m.rep().rows();
    let mut a: Vec<Vec<u128>> = cols
        .iter()
        .map(|&c| (0..rows).map(|r| m.rep().get(r, c) as u128).collect())
        .collect();
    let pow = |mut b: u128, mut e: u128| {
        let mut acc = 1u128;
        b %= p;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % p;
            }
            b = b * b % p;
            e >>= 1;
        }
        acc
    };
    let mut rank = 0;
    for col in 0..rows {
        let Some(piv) = (rank..a.len()).find(|&i| a[i][col] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        let inv = pow(a[rank][col], p - 2);
        for i in 0..a.len() {
            if i != rank && a[i][col] != 0 {
                let f = a[i][col] * inv % p;
                for j in 0..rows {
                    a[i][j] = (a[i][j] + p * p - f * a[rank][j] % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Block-count independence, from the block list alone.
pub fn block_independent(m: &PartitionMatroid, s: &[RoleId]) -> bool {
    let mut seen = s.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len() == s.len()
        && m.blocks()
            .iter()
            .all(|b| s.iter().filter(|r| b.roles.contains(r)).count() <= b.capacity)
}

/// Every subset of `0..n` as a sorted vector.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect()
}
