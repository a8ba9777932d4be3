use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use ctbt::convergence::{
    build_prepares_graph, chain_bounds, check_acyclic, check_lambda_invariance, certify, PartialOrder, PreparesGraph, SinkLabel,
};
use ctbt::{batch_integrate, dsl, models, IntegratorConfig, NodeId, Status, Trajectory};
use proptest::prelude::*;

fn n(i: usize) -> NodeId {
    NodeId(i)
}

fn cfg(t_end: f64) -> IntegratorConfig {
    IntegratorConfig {
        dt: 0.01,
        t_end,
        ..IntegratorConfig::default()
    }
}

/// Every subset of the nodes that is totally ordered by reachability.
fn brute_force_chains(g: &PreparesGraph, tau: &BTreeMap<NodeId, f64>) -> (usize, f64) {
    // Independent reachability by repeated relaxation.
    let nodes: Vec<NodeId> = g.nodes.iter().copied().collect();
    let mut reach: BTreeSet<(NodeId, NodeId)> = nodes.iter().map(|&v| (v, v)).collect();
    loop {
        let before = reach.len();
        for e in &g.edges {
            let from_to: Vec<(NodeId, NodeId)> = reach.iter().filter(|p| p.1 == e.from).map(|p| (p.0, e.to)).collect();
            reach.extend(from_to);
        }
        if reach.len() == before {
            break;
        }
    }
    let mut best = (0, 0.0f64);
    for mask in 0u32..(1 << nodes.len()) {
        let subset: Vec<NodeId> = (0..nodes.len()).filter(|k| mask & (1 << k) != 0).map(|k| nodes[k]).collect();
        let chain = subset
            .iter()
            .all(|&a| subset.iter().all(|&b| reach.contains(&(a, b)) || reach.contains(&(b, a))));
        if chain {
            let weight: f64 = subset.iter().map(|v| tau.get(v).copied().unwrap_or(0.0)).sum();
            best.0 = best.0.max(subset.len());
            best.1 = best.1.max(weight);
        }
    }
    best
}

fn random_dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<f64>)> {
    (1usize..=10).prop_flat_map(|size| {
        let pairs: Vec<(usize, usize)> = (0..size).flat_map(|a| (a + 1..size).map(move |b| (a, b))).collect();
        let m = pairs.len();
        (
            Just(size),
            proptest::sample::subsequence(pairs, 0..=m),
            proptest::collection::vec(0.0f64..5.0, size),
            // Relabel so that edge direction is not tied to id order.
            Just((0..size).collect::<Vec<usize>>()).prop_shuffle(),
        )
            .prop_map(|(size, edges, tau, perm)| (size, edges.into_iter().map(|(a, b)| (perm[a], perm[b])).collect(), tau))
    })
}

fn kitchen_batch() -> &'static [Trajectory] {
    static BATCH: OnceLock<Vec<Trajectory>> = OnceLock::new();
    BATCH.get_or_init(|| {
        let m = models::kitchen_lamp();
        let inits: Vec<Vec<f64>> = [-4.0, -2.0, 2.0, 4.5, 6.0, 7.5].iter().map(|&x| vec![x, 0.0]).collect();
        batch_integrate(&m.plant, &m.bt, &inits, &cfg(10.0))
            .into_iter()
            .map(|r| r.unwrap().with_model("kitchen_lamp"))
            .collect()
    })
}

proptest! {
    #[test]
    fn chain_bounds_match_brute_force((size, edges, tau) in random_dag()) {
        let edges: Vec<(NodeId, NodeId)> = edges.into_iter().map(|(a, b)| (n(a), n(b))).collect();
        let g = PreparesGraph::from_edges((0..size).map(n), &edges);
        let tau: BTreeMap<NodeId, f64> = tau.iter().enumerate().map(|(k, t)| (n(k), *t)).collect();
        let a = check_acyclic(&g);
        prop_assert!(a.acyclic);
        // The order is topological.
        let pos: BTreeMap<NodeId, usize> = a.order.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        for (from, to) in &edges {
            prop_assert!(pos[from] < pos[to]);
        }
        let ((count, longest), (t_prime, slowest)) = chain_bounds(&a.order, &g, &tau);
        let (bf_count, bf_time) = brute_force_chains(&g, &tau);
        prop_assert_eq!(count, bf_count);
        prop_assert!((t_prime - bf_time).abs() < 1e-9, "{} vs {}", t_prime, bf_time);
        prop_assert!(count <= size);
        prop_assert!(t_prime <= tau.values().sum::<f64>() + 1e-9);
        // The reported chains are paths realizing the bounds.
        prop_assert_eq!(longest.len(), count);
        for w in longest.windows(2).chain(slowest.windows(2)) {
            prop_assert!(g.has_edge(w[0], w[1]));
        }
        let sum: f64 = slowest.iter().map(|v| tau[v]).sum();
        prop_assert!((sum - t_prime).abs() < 1e-9);
    }

    #[test]
    fn graph_ignores_batch_order(seed in any::<u64>()) {
        let batch = kitchen_batch();
        let mut shuffled = batch.to_vec();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(build_prepares_graph(batch).unwrap(), build_prepares_graph(&shuffled).unwrap());
    }
}

#[test]
fn kitchen_lamp_prepares_graph() {
    // Leaf 1 walks to the kitchen; 3 and 4 are lamps A and B.
    let m = models::kitchen_lamp();
    let inits: Vec<Vec<f64>> = [-4.0, -2.0, 0.0, 2.0, 4.5, 6.0, 7.5, -6.0].iter().map(|&x| vec![x, 0.0]).collect();
    let batch: Vec<_> = batch_integrate(&m.plant, &m.bt, &inits, &cfg(10.0))
        .into_iter()
        .map(|r| r.map(|t| t.with_model("kitchen_lamp")))
        .collect();
    let c = certify(&batch, &m.bt).unwrap();
    let edges: Vec<(NodeId, NodeId)> = c.graph.edges.iter().map(|e| (e.from, e.to)).collect();
    // Walk then lamp A; walk then lamp B (wrong side); lamp A fails over to B.
    assert_eq!(edges, vec![(n(1), n(3)), (n(1), n(4)), (n(3), n(4))]);
    assert_eq!(c.graph.sink_labels[&n(4)], SinkLabel::RootSuccess);
    assert_eq!(c.graph.sink_labels[&n(3)], SinkLabel::RootSuccess);
    assert_eq!(c.n, Some(3));
    assert!(c.pass, "{}", c.summary(Some(&m.bt)));
}

#[test]
fn thermostat_never_certifies() {
    let m = models::thermostat();
    let inits: Vec<Vec<f64>> = [12.0, 18.0, 19.0, 23.0, 30.0].iter().map(|&x| vec![x]).collect();
    let batch: Vec<_> = batch_integrate(&m.plant, &m.bt, &inits, &cfg(15.0))
        .into_iter()
        .map(|r| r.map(|t| t.with_model("thermostat")))
        .collect();
    let c = certify(&batch, &m.bt).unwrap();
    assert!(!c.sinks_reach_success);
    assert!(!c.pass);
    assert!(c.graph.sink_labels.values().any(|l| *l == SinkLabel::Elsewhere));
}

#[test]
fn ejecting_controller_breaks_invariance() {
    // Leaf 2 pushes the state back below the threshold where leaf 1 rules.
    let src = r#"model "eject" {
        state_dim = 1;
        control_dim = 1;
        plant { dx0 = u0; }
        leaf climb { u = [1]; status = if x0 >= 1 then S else R; }
        leaf eject { u = [-1]; status = if x0 >= 2 then S else R; }
        seq main = [climb, eject];
        root = main;
    }"#;
    let m = dsl::load(src).unwrap();
    let batch: Vec<_> = batch_integrate(&m.plant, &m.bt, &[vec![0.0]], &cfg(3.0))
        .into_iter()
        .map(|r| r.map(|t| t.with_model("eject")))
        .collect();
    let tr = batch[0].as_ref().unwrap();
    // The observed graph has the back edge, so the certificate fails.
    let c = certify(&batch, &m.bt).unwrap();
    assert!(!c.acyclic && !c.pass);
    // Against the intended order climb ≤ eject, the return is a violation.
    let order = PartialOrder::closure(&PreparesGraph::from_edges([], &[(n(1), n(2))]));
    let v = check_lambda_invariance(&[(0, tr)], &order);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].leaf, n(2));
    assert_eq!(v[0].exit_leaf, n(1));
    assert!(v[0].x[0] < 1.0 && v[0].x[0] > 0.99, "{:?}", v[0]);
}

#[test]
fn never_switching_trajectory() {
    let m = models::pendulum();
    // Already in the balance band: no switch, one node, no edges.
    let batch: Vec<_> = batch_integrate(&m.plant, &m.bt, &[vec![0.2, 0.0]], &cfg(20.0))
        .into_iter()
        .map(|r| r.map(|t| t.with_model("pendulum")))
        .collect();
    let g = build_prepares_graph(&[batch[0].clone().unwrap()]).unwrap();
    assert_eq!(g.nodes, [n(2)].into_iter().collect());
    assert!(g.edges.is_empty());
    assert_eq!(batch[0].as_ref().unwrap().last().status, Status::Success);
    let c = certify(&batch, &m.bt).unwrap();
    assert_eq!(c.n, Some(1));
    assert!(c.invariance_violations.is_empty() && c.pass);
}
