mod common;

use std::collections::BTreeSet;

use pathfocus::ir::{choose_abstraction_points, disconnect, parse_program, select_widening_points, DNodeKind, NodeId, Program};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

/// True iff some cycle avoids every node of `cut`, by repeatedly pruning
/// nodes without a live predecessor.
fn has_cycle_avoiding(p: &Program, cut: &BTreeSet<NodeId>) -> bool {
    let mut live: BTreeSet<NodeId> = p.node_ids().filter(|n| !cut.contains(n)).collect();
    loop {
        let prunable: Vec<NodeId> = live
            .iter()
            .copied()
            .filter(|&n| !p.incoming(n).any(|e| live.contains(&e.src) && live.contains(&e.dst)))
            .collect();
        if prunable.is_empty() {
            return !live.is_empty();
        }
        for n in prunable {
            live.remove(&n);
        }
    }
}

fn on_cycle(p: &Program, n: NodeId) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<NodeId> = p.outgoing(n).map(|e| e.dst).collect();
    while let Some(m) = stack.pop() {
        if m == n {
            return true;
        }
        if seen.insert(m) {
            stack.extend(p.outgoing(m).map(|e| e.dst));
        }
    }
    false
}

fn program_strategy() -> impl Strategy<Value = Program> {
    (any::<u64>(), 1usize..=50, 0usize..=40).prop_map(|(seed, nodes, extra)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_program(&mut rng, 1, nodes, extra, true)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn widening_points_cut_every_cycle(p in program_strategy()) {
        let pw = select_widening_points(&p);
        prop_assert!(!has_cycle_avoiding(&p, &pw.points));
        // generated programs are connected from the initial node
        prop_assert!(pw.unreachable_cycles.is_empty());
        for &n in &pw.points {
            prop_assert!(on_cycle(&p, n), "{n:?} is on no cycle");
        }
    }

    #[test]
    fn disconnected_graph_is_a_dag_preserving_edges(p in program_strategy(), extra_seed in any::<u64>()) {
        let pw = select_widening_points(&p).points;
        let extra: BTreeSet<NodeId> = p.node_ids().filter(|n| (extra_seed >> (n.index() % 64)) & 1 == 1).collect();
        let cuts = choose_abstraction_points(&p, &pw, &extra).unwrap();
        prop_assert!(cuts.abstraction.is_superset(&pw));
        prop_assert!(cuts.abstraction.is_superset(&extra));
        prop_assert!(p.initial_nodes().all(|n| cuts.is_abstraction(n)));
        let g = disconnect(&p, &cuts).unwrap();

        let position: Vec<usize> = {
            let mut pos = vec![usize::MAX; g.nodes.len()];
            for (i, d) in g.topo.iter().enumerate() {
                pos[d.index()] = i;
            }
            pos
        };
        prop_assert!(position.iter().all(|&i| i != usize::MAX));
        prop_assert_eq!(g.edges.len(), p.edges.len());
        for (de, e) in g.edges.iter().zip(&p.edges) {
            prop_assert_eq!(de.orig, e.id);
            prop_assert!(position[de.src.index()] < position[de.dst.index()]);
            prop_assert_eq!(g.kind(de.src).original(), e.src);
            prop_assert_eq!(g.kind(de.dst).original(), e.dst);
        }
        for n in p.node_ids() {
            if cuts.is_abstraction(n) {
                let (s, d) = (g.source(n).unwrap(), g.sink(n).unwrap());
                prop_assert!(g.incoming[s.index()].is_empty());
                prop_assert!(g.outgoing[d.index()].is_empty());
                prop_assert_eq!(g.kind(s), DNodeKind::Source(n));
                prop_assert_eq!(g.kind(d), DNodeKind::Sink(n));
                prop_assert!(g.inner(n).is_none());
            } else {
                prop_assert_eq!(g.kind(g.inner(n).unwrap()), DNodeKind::Inner(n));
            }
        }
    }

    #[test]
    fn dag_paths_are_cycle_free_program_paths(p in program_strategy()) {
        let cuts = choose_abstraction_points(&p, &select_widening_points(&p).points, &BTreeSet::new()).unwrap();
        let g = disconnect(&p, &cuts).unwrap();
        for (n, s) in g.sources() {
            let reachable = g.reachable_sinks(n);
            let mut ends = BTreeSet::new();
            for (edges, end) in dag_paths(&g, s).into_iter().take(2000) {
                // consecutive in the original graph, no abstraction point inside
                let mut at = n;
                for (i, e) in edges.iter().enumerate() {
                    let e = p.edge(*e);
                    prop_assert_eq!(e.src, at);
                    if i + 1 < edges.len() {
                        prop_assert!(!cuts.is_abstraction(e.dst));
                    }
                    at = e.dst;
                }
                if let DNodeKind::Sink(m) = g.kind(end) {
                    prop_assert_eq!(m, at);
                    ends.insert(m);
                }
            }
            prop_assert!(ends.is_subset(&reachable));
        }
    }
}

#[test]
fn circular_cut_sets() {
    let p = load("circular");
    let pw = select_widening_points(&p).points;
    let p2 = p.node_by_name("p2").unwrap();
    assert_eq!(pw, BTreeSet::from([p2]));
    let cuts = choose_abstraction_points(&p, &pw, &BTreeSet::new()).unwrap();
    assert_eq!(cuts.abstraction, BTreeSet::from([p.node_by_name("p1").unwrap(), p2]));
}

#[test]
fn cut_missing_a_cycle_is_rejected() {
    let p = parse_program(
        "vars x:int; node a init {}; node b; node c;
         from a to b { }; from b to c { }; from c to b { }; from c to c { };",
    )
    .unwrap();
    let c = p.node_by_name("c").unwrap();
    assert!(choose_abstraction_points(&p, &BTreeSet::from([p.node_by_name("b").unwrap()]), &BTreeSet::new()).is_err());
    assert!(choose_abstraction_points(&p, &BTreeSet::from([c]), &BTreeSet::new()).is_ok());
}

#[test]
fn unreachable_cycles_are_reported() {
    let p = parse_program("vars x:int; node a init {}; node b; node c; from b to c { }; from c to b { };").unwrap();
    let pw = select_widening_points(&p);
    assert_eq!(pw.unreachable_cycles.len(), 1);
    assert!(pw.points.is_superset(&pw.unreachable_cycles.iter().copied().collect()));
}
