mod common;

use common::{brute_force_cpdag, past, present};
use gce_core::evaluate::{f1_scores, OracleTester, ScoringMode};
use gce_core::graph::{default_names, ExtendedSummaryGraph, Mark, SliceNode};
use gce_core::orient_fci::{apply_fci_rules_in_order, fci_colliders, fcigce_with, possible_dsep, FciRule};
use gce_core::orient_pc::{orient_temporal, pcgce_with};
use gce_core::skeleton::{build_skeleton, complexity_bound};
use gce_core::SkeletonOptions;
use proptest::prelude::*;

/// Random two-slice DAG on `d` series; present-slice edges follow index order.
fn random_dag(d: usize, lagged: &[bool], inst: &[bool]) -> ExtendedSummaryGraph {
    let mut g = ExtendedSummaryGraph::empty(d).unwrap();
    for p in 0..d {
        for q in 0..d {
            if lagged[p * d + q] {
                g.add_edge(past(p), present(q), Mark::Tail, Mark::Arrow).unwrap();
            }
        }
    }
    let mut k = 0;
    for p in 0..d {
        for q in p + 1..d {
            if inst[k] {
                g.add_edge(present(p), present(q), Mark::Tail, Mark::Arrow).unwrap();
            }
            k += 1;
        }
    }
    g
}

fn dag_strategy() -> impl Strategy<Value = ExtendedSummaryGraph> {
    (2usize..=4).prop_flat_map(|d| {
        (
            Just(d),
            proptest::collection::vec(proptest::bool::weighted(0.3), d * d),
            proptest::collection::vec(proptest::bool::weighted(0.4), d * (d - 1) / 2),
        )
            .prop_map(|(d, l, i)| random_dag(d, &l, &i))
    })
}

fn random_graph(d: usize, marks: &[u8]) -> ExtendedSummaryGraph {
    let mark = |m: u8| match m % 3 {
        0 => Mark::Tail,
        1 => Mark::Arrow,
        _ => Mark::Circle,
    };
    let mut g = ExtendedSummaryGraph::empty(d).unwrap();
    let mut it = marks.chunks(3);
    for p in 0..d {
        for q in 0..d {
            let c = it.next().unwrap();
            if c[0].is_multiple_of(2) {
                let end = if c[1].is_multiple_of(2) { Mark::Tail } else { Mark::Circle };
                g.add_edge(past(p), present(q), end, mark(c[2])).unwrap();
            }
        }
    }
    for p in 0..d {
        for q in p + 1..d {
            let c = it.next().unwrap();
            if c[0].is_multiple_of(2) {
                g.add_edge(present(p), present(q), mark(c[1]), mark(c[2])).unwrap();
            }
        }
    }
    g
}

fn graph_strategy() -> impl Strategy<Value = ExtendedSummaryGraph> {
    (1usize..=4).prop_flat_map(|d| {
        let n = 3 * (d * d + d * (d - 1) / 2);
        (Just(d), proptest::collection::vec(any::<u8>(), n)).prop_map(|(d, m)| random_graph(d, &m))
    })
}

fn tester(dag: &ExtendedSummaryGraph) -> OracleTester {
    OracleTester::new(dag, default_names(dag.d())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pcgce_recovers_the_cpdag(dag in dag_strategy()) {
        let found = pcgce_with(&tester(&dag), &SkeletonOptions::default()).unwrap();
        prop_assert_eq!(&found.graph, &brute_force_cpdag(&dag));
        prop_assert!(found.conflicts.is_empty());
    }

    #[test]
    fn skeleton_is_the_truth_and_within_bound(dag in dag_strategy()) {
        let s = build_skeleton(&tester(&dag), &SkeletonOptions::default()).unwrap();
        for n in dag.nodes() {
            for m in dag.nodes() {
                prop_assert_eq!(s.graph.adjacent(n, m), dag.adjacent(n, m));
            }
        }
        // a removed pair has a sepset, a kept pair none
        for (key, _) in s.sepsets.iter() {
            let (a, b) = key.nodes();
            prop_assert!(!s.graph.adjacent(a, b));
        }
        let kappa = s.log.max_level().map_or(0, |l| l + 1);
        prop_assert!(s.log.skeleton_tests() as f64 <= complexity_bound(dag.d(), kappa));
    }

    #[test]
    fn fcigce_output_is_admissible(dag in dag_strategy()) {
        let t = tester(&dag);
        let skeleton = build_skeleton(&t, &SkeletonOptions::default()).unwrap();
        let pag = fcigce_with(&t, &SkeletonOptions::default()).unwrap().graph;
        prop_assert!(pag.validate().is_ok());
        for e in pag.edges() {
            prop_assert!(skeleton.graph.adjacent(e.a, e.b));
            prop_assert!(!(e.a.is_past() && e.mark_a == Mark::Arrow));
            prop_assert!(!(e.b.is_past() && e.mark_b == Mark::Arrow));
        }
    }

    #[test]
    fn early_rules_are_order_insensitive(dag in dag_strategy(), orders in proptest::collection::vec(Just(()).prop_perturb(|_, mut rng| {
        let mut v = vec![FciRule::R1, FciRule::R2, FciRule::R3];
        for i in (1..v.len()).rev() {
            let j = (rng.next_u32() as usize) % (i + 1);
            v.swap(i, j);
        }
        v
    }), 10)) {
        let s = build_skeleton(&tester(&dag), &SkeletonOptions::default()).unwrap();
        let start = fci_colliders(&orient_temporal(&s.graph), &s.sepsets);
        let reference = apply_fci_rules_in_order(&start, &s.sepsets, &[FciRule::R1, FciRule::R2, FciRule::R3]);
        for order in orders {
            prop_assert_eq!(&apply_fci_rules_in_order(&start, &s.sepsets, &order), &reference);
        }
    }

    #[test]
    fn possible_dsep_is_symmetric(g in graph_strategy()) {
        let d = g.d();
        for p in 0..d {
            for q in 0..d {
                if p != q {
                    prop_assert_eq!(possible_dsep(&g, present(p), present(q)), possible_dsep(&g, present(q), present(p)));
                }
            }
        }
    }

    #[test]
    fn graph_json_round_trip(g in graph_strategy()) {
        prop_assert_eq!(ExtendedSummaryGraph::from_json(&g.to_json()).unwrap(), g.clone());
        prop_assert!(g.validate().is_ok());
    }

    #[test]
    fn self_score_is_one(g in graph_strategy()) {
        for mode in [ScoringMode::Compatible, ScoringMode::Strict] {
            let r = f1_scores(&g, &g, mode).unwrap();
            prop_assert_eq!(r.f1_cross, 1.0);
            prop_assert!(r.f1_self.is_none_or(|f| f == 1.0));
        }
    }

    #[test]
    fn relabeling_preserves_the_skeleton(dag in dag_strategy(), seed in any::<u64>()) {
        let d = dag.d();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut s = seed;
        for i in (1..d).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let original = build_skeleton(&tester(&dag), &SkeletonOptions::default()).unwrap().graph;
        let moved_dag = dag.relabel(&perm).unwrap();
        let moved = build_skeleton(&tester(&moved_dag), &SkeletonOptions::default()).unwrap().graph;
        prop_assert_eq!(original.relabel(&perm).unwrap().edges(), moved.edges());
    }
}

#[test]
fn past_nodes_never_take_arrowheads() {
    let mut g = ExtendedSummaryGraph::empty(2).unwrap();
    assert!(g.add_edge(past(0), present(1), Mark::Arrow, Mark::Tail).is_err());
    assert!(g.add_edge(past(0), past(1), Mark::Tail, Mark::Tail).is_err());
    let _: SliceNode = present(0);
}
