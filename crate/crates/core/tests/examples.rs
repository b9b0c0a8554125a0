mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use uaq_core::baselines::brute_force;
use uaq_core::dp::{solve, solve_leaf};
use uaq_core::generators::*;
use uaq_core::io::{parse_instance, serialize_instance};
use uaq_core::matroid::build_csm;
use uaq_core::model::{ClassParams, ClassWitness, Instance, InstanceBuilder, Solution, Violation};
use uaq_core::reduce::{
    branching_rule, preprocess, reduction0, rule1, rule2, rule3, update_role, BranchLeaf,
};
use uaq_core::repfam::RepConfig;

fn two_block() -> Instance {
    gen_mcb_nosod(&two_block_graph()).unwrap()
}

fn ids(inst: &Instance, labels: &[&str]) -> Vec<usize> {
    labels.iter().map(|l| inst.role_id(l).unwrap()).collect()
}

fn perm_labels(inst: &Instance, roles: &[usize]) -> Vec<String> {
    let mut out: Vec<String> = inst
        .permissions_of(roles)
        .unwrap()
        .ones()
        .map(|p| inst.perm_label(p).to_owned())
        .collect();
    out.sort();
    out
}

/// Every solution found by exhaustive search over subsets contains `role`.
fn in_every_solution(inst: &Instance, role: usize) -> bool {
    all_subsets(inst.n_roles())
        .iter()
        .filter(|s| is_valid(inst, s))
        .all(|s| s.contains(&role))
}

#[test]
fn permissions_of_edge_roles() {
    let inst = two_block();
    assert!(inst.permissions_of(&[]).unwrap().is_clear());
    assert_eq!(
        perm_labels(&inst, &ids(&inst, &["r_a2_b2"])),
        ["a2", "b2", "p_1_1"]
    );
    assert_eq!(
        perm_labels(&inst, &ids(&inst, &["r_a2_b2", "r_a3_b3"])),
        ["a2", "a3", "b2", "b3", "p_1_1", "p_2_2"]
    );
    assert!(inst.permissions_of(&[99]).is_err());
}

#[test]
fn verify_biclique_solution_and_partial_one() {
    let inst = two_block();
    let full = Solution::new(ids(&inst, &["r_a2_b2", "r_a2_b3", "r_a3_b2", "r_a3_b3"]));
    assert!(inst.verify_solution(&full).unwrap().ok);

    let partial = inst
        .verify_solution(&Solution::new(ids(&inst, &["r_a2_b2"])))
        .unwrap();
    assert!(!partial.ok);
    let missing: Vec<&str> = partial
        .violations
        .iter()
        .filter_map(|v| match v {
            Violation::MissingPermission { permission } => Some(permission.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(missing, ["p_1_2", "p_2_1", "p_2_2"]);
}

#[test]
fn stats_of_the_example() {
    let s = two_block().stats();
    assert_eq!((s.k_hat, s.r_hat), (9, 11));
    let empty = InstanceBuilder::new().build().unwrap().stats();
    assert_eq!(
        (
            empty.k_hat,
            empty.r_hat,
            empty.n_roles,
            empty.n_perms,
            empty.n_constraints
        ),
        (0, 0, 0, 0, 0)
    );
    let inside = InstanceBuilder::new()
        .role("r")
        .permission("p")
        .assign("r", "p")
        .require("p")
        .kr(1)
        .build()
        .unwrap();
    assert_eq!((inside.stats().k_hat, inside.stats().r_hat), (0, 0));
}

#[test]
fn class_check_examples() {
    let p22 = ClassParams::new(2, 2, 1).unwrap();
    let report = two_block().check_class(&p22);
    assert!(report.widths_ok && report.disjoint_ok);

    let shared = InstanceBuilder::new()
        .role("r1")
        .role("r2")
        .permission("p1")
        .permission("p2")
        .assign("r1", "p1")
        .assign("r1", "p2")
        .assign("r2", "p1")
        .assign("r2", "p2")
        .build()
        .unwrap();
    let report = shared.check_class(&p22);
    assert!(!report.kab_free);
    assert!(
        matches!(&report.witnesses[0], ClassWitness::Biclique { roles, .. } if roles == &["r1", "r2"])
    );
}

#[test]
fn example_stats_survive_round_trip() {
    let inst = two_block();
    let back = parse_instance(&serialize_instance(&inst)).unwrap();
    assert_eq!(inst.stats(), back.stats());
}

#[test]
fn update_then_rule1_deletes_partner() {
    let inst = InstanceBuilder::new()
        .role("r")
        .role("s")
        .role("u")
        .permission("p1")
        .permission("p2")
        .assign("r", "p1")
        .assign("s", "p2")
        .assign("u", "p2")
        .require("p1")
        .require("p2")
        .constraint(["r", "s"], 2)
        .kr(2)
        .build()
        .unwrap();
    let mut leaf = BranchLeaf::root(inst.clone());
    update_role(&mut leaf, 0);
    assert_eq!(leaf.inst.constraints()[0].threshold, 1);
    rule1(&mut leaf);
    assert_eq!(leaf.inst.role_labels(), ["u"]);
    assert!(leaf.inst.constraints().is_empty());
}

#[test]
fn update_with_too_many_extras_matches_brute_force() {
    let inst = InstanceBuilder::new()
        .role("r")
        .role("s")
        .permission("p")
        .permission("x1")
        .permission("x2")
        .assign("r", "p")
        .assign("r", "x1")
        .assign("r", "x2")
        .assign("s", "p")
        .require("p")
        .kr(2)
        .kp(1)
        .build()
        .unwrap();
    let mut leaf = BranchLeaf::root(inst.clone());
    update_role(&mut leaf, 0);
    assert!(leaf.infeasible);
    assert!(all_subsets(2)
        .iter()
        .filter(|s| is_valid(&inst, s))
        .all(|s| !s.contains(&0)));
}

#[test]
fn rule2_forces_the_only_holder() {
    let inst = InstanceBuilder::new()
        .role("r1")
        .role("r2")
        .permission("p1")
        .permission("p2")
        .assign("r1", "p1")
        .assign("r1", "p2")
        .assign("r2", "p2")
        .require("p1")
        .require("p2")
        .kr(2)
        .build()
        .unwrap();
    let mut leaf = BranchLeaf::root(inst.clone());
    rule2(&mut leaf);
    assert_eq!(leaf.r1, [0]);
    assert!(in_every_solution(&inst, 0));
}

#[test]
fn rule3_forced_role_is_in_every_solution() {
    // alpha = beta = 2, kr = 2 gives h = 5.
    let mut b = InstanceBuilder::new();
    b.role("s").role("t1").role("t2").kr(2).kp(0);
    for i in 0..6 {
        b.permission(format!("p{i}")).require(format!("p{i}"));
    }
    for i in 0..5 {
        b.assign("s", format!("p{i}"));
    }
    b.assign("t1", "p0")
        .assign("t1", "p5")
        .assign("t2", "p5")
        .assign("t2", "p1");
    let inst = b.build().unwrap();
    let params = ClassParams::new(2, 2, 1).unwrap();
    assert!(inst.check_class(&params).passes());
    let mut leaf = BranchLeaf::root(inst.clone());
    rule3(&mut leaf, &params).unwrap();
    assert_eq!(leaf.r1, [0]);
    assert!(in_every_solution(&inst, 0));
}

#[test]
fn two_role_overlap_branch_children_match_brute_force() {
    // alpha = 3, beta = 2, kr = 2: b(1) = 4, so two roles sharing 5 required permissions.
    let mut b = InstanceBuilder::new();
    b.role("r1").role("r2").role("r3").kr(2).kp(1);
    for i in 0..7 {
        b.permission(format!("p{i}")).require(format!("p{i}"));
    }
    b.permission("x");
    for i in 0..5 {
        b.assign("r1", format!("p{i}"))
            .assign("r2", format!("p{i}"));
    }
    b.assign("r1", "p5")
        .assign("r2", "p6")
        .assign("r3", "p5")
        .assign("r3", "p6")
        .assign("r3", "x");
    let inst = b.build().unwrap();
    let params = ClassParams::new(3, 2, 1).unwrap();
    assert!(inst.check_class(&params).passes());
    let root = reduction0(&inst);
    let children = branching_rule(BranchLeaf::root(root.clone()), &params).unwrap();
    assert_eq!(children.len(), 2);
    let original = brute_force(&inst).unwrap().is_some();
    let mut any = false;
    for child in &children {
        if let Some(sol) = brute_force(&child.inst).unwrap() {
            any = true;
            let mut all = child.r1.clone();
            all.extend(child.lift(sol.roles()));
            assert!(inst.verify_solution(&Solution::new(all)).unwrap().ok);
        }
    }
    assert_eq!(original, any);
}

#[test]
fn example_graph_preprocesses_to_one_leaf() {
    let inst = two_block();
    let tree = preprocess(&reduction0(&inst), &ClassParams::new(2, 3, 1).unwrap()).unwrap();
    assert_eq!(tree.leaves.len(), 1);
    let leaf = &tree.leaves[0];
    assert!(!leaf.infeasible);
    assert_eq!(leaf.inst.lower_bound().count_ones(..), 4);
    assert_eq!(
        uaq_core::reduce::kernel_bound(leaf.inst.kr(), 2, 3).unwrap(),
        52
    );
}

#[test]
fn table_on_example_leaf_finds_a_four_role_cover() {
    let inst = two_block();
    let leaf = BranchLeaf::root(reduction0(&inst));
    let csm = build_csm(&leaf).unwrap();
    let r2 = solve_leaf(&leaf, &csm, &RepConfig::exact())
        .unwrap()
        .r2
        .unwrap();
    assert_eq!(r2.len(), 4);
    let granted = leaf.inst.permissions_of(r2.roles()).unwrap();
    assert!(leaf.inst.lower_bound().is_subset(&granted));
    assert!(granted.difference_count(leaf.inst.lower_bound()) <= 4);
}

#[test]
fn brute_force_on_example_finds_four_roles() {
    let inst = two_block();
    let sol = brute_force(&inst).unwrap().unwrap();
    assert_eq!(sol.len(), 4);
    assert!(inst.verify_solution(&sol).unwrap().ok);
}

#[test]
fn edgeless_graphs_are_no_instances() {
    let g = BipartiteGraph::new(vec!["a".into()], vec!["b".into()], []).unwrap();
    assert!(brute_force(&gen_rbds_type1(&g, 1).unwrap())
        .unwrap()
        .is_none());
    assert!(brute_force(&gen_rbds_type2(&g, 1).unwrap())
        .unwrap()
        .is_none());
}

#[test]
fn edge_role_instances_respect_degree_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let g = random_blocked(3, 3, 0.6, true, &mut rng);
        let inst = gen_mcb_nosod(&g).unwrap();
        for r in 0..inst.n_roles() {
            assert_eq!(inst.perms(r).count_ones(..), 3);
            assert_eq!(inst.lower_degree(r), 1);
            for s in r + 1..inst.n_roles() {
                assert!(inst.perms(r).intersection_count(inst.perms(s)) <= 2);
            }
        }
    }
}

#[test]
fn truncated_mode_solves_planted_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..100 {
        let mut spec = desk_spec(&mut rng, seed);
        spec.plant = true;
        let Ok(g) = gen_random(&spec) else { continue };
        let params = ClassParams::new(2, 2, spec.c).unwrap();
        let out = solve(&g.instance, &params, &RepConfig::truncated(seed), 1).unwrap();
        let sol = out.solution.expect("planted instances are satisfiable");
        assert!(is_valid(&g.instance, sol.roles()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn permissions_of_is_monotone(seed in any::<u64>(), mask in any::<u16>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Ok(g) = gen_random(&desk_spec(&mut rng, seed)) else { return Ok(()) };
        let n = g.instance.n_roles();
        let big: Vec<usize> = (0..n).filter(|&r| mask >> r & 1 == 1).collect();
        let small: Vec<usize> = big.iter().copied().step_by(2).collect();
        let (ps, pb) = (g.instance.permissions_of(&small).unwrap(), g.instance.permissions_of(&big).unwrap());
        prop_assert!(ps.is_subset(&pb));
    }

    #[test]
    fn k22_freeness_implies_larger_classes(seed in any::<u64>(), alpha in 2usize..5, beta in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_blocked(2, 3, 0.7, false, &mut rng);
        let inst = gen_mcb_k22(&g).unwrap();
        prop_assert!(inst.check_class(&ClassParams::new(2, 2, 64).unwrap()).kab_free);
        prop_assert!(inst.check_class(&ClassParams::new(alpha, beta, 64).unwrap()).kab_free);
    }
}
