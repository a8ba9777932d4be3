//! Empirical convergence certificates built from simulated batches.
//!
//! Everything here is measured, not proven: the prepares graph holds the
//! transitions that were observed, dwell bounds are batch maxima, and the
//! invariance check only sees sampled states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{BehaviorTree, Status};
use crate::executor::ExecError;
use crate::trajectory::{EventKind, Trajectory};
use crate::tree::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError {
    #[error("trajectory batch is empty")]
    EmptyBatch,
    #[error("trajectory {index} comes from model `{found}`, expected `{expected}`")]
    MixedModels {
        index: usize,
        expected: String,
        found: String,
    },
}

/// Where trajectories went when they left the running part of the state
/// space from a given leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SinkLabel {
    /// No trajectory left from this leaf; every visit ended in a switch.
    Transient,
    /// Every exit landed in the root success region.
    RootSuccess,
    /// Every exit landed in the root failure region.
    RootFailure,
    /// Some trajectory was still running here at its end, or exits were mixed.
    Elsewhere,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparesGraph {
    pub nodes: BTreeSet<NodeId>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<Edge>,
    pub sink_labels: BTreeMap<NodeId, SinkLabel>,
}

impl PreparesGraph {
    /// A graph with the given edges (count 1 each) and no labels.
    pub fn from_edges(nodes: impl IntoIterator<Item = NodeId>, edges: &[(NodeId, NodeId)]) -> Self {
        let mut n: BTreeSet<NodeId> = nodes.into_iter().collect();
        let mut counts: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
        for &(a, b) in edges {
            n.insert(a);
            n.insert(b);
            *counts.entry((a, b)).or_default() += 1;
        }
        PreparesGraph {
            nodes: n,
            edges: counts
                .into_iter()
                .map(|((from, to), count)| Edge { from, to, count })
                .collect(),
            sink_labels: BTreeMap::new(),
        }
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    fn successors(&self) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        let mut out: BTreeMap<NodeId, BTreeSet<NodeId>> = self.nodes.iter().map(|&n| (n, BTreeSet::new())).collect();
        for e in &self.edges {
            out.entry(e.from).or_default().insert(e.to);
        }
        out
    }
}

/// Builds the prepares graph from `Switch` events and exits.
///
/// Each trajectory is read up to its first sample in the root success or
/// failure region. A switch landing there is the exiting leaf's sink, not an
/// edge: when the last running leaf succeeds, the tick may hand control to
/// another leaf at that same instant. The result does not depend on the order
/// of `trajectories`.
pub fn build_prepares_graph(trajectories: &[Trajectory]) -> Result<PreparesGraph, ConvergenceError> {
    check_same_model(trajectories.iter().enumerate())?;
    let mut nodes = BTreeSet::new();
    let mut counts: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    let mut exits: BTreeMap<NodeId, BTreeSet<u8>> = BTreeMap::new();
    for tr in trajectories {
        let s = &tr.samples;
        let exit = s.iter().position(|p| p.status != Status::Running);
        let running = match exit {
            Some(0) => 1,
            Some(k) => k,
            None => s.len(),
        };
        nodes.extend(s[..running].iter().map(|p| p.leaf));
        let t_exit = exit.map_or(f64::INFINITY, |k| s[k].t);
        for e in tr.events_of(EventKind::Switch).filter(|e| e.t < t_exit) {
            *counts.entry((e.from, e.to)).or_default() += 1;
        }
        let (leaf, code) = match exit {
            Some(k) => (s[k.saturating_sub(1)].leaf, if s[k].status == Status::Success { 0 } else { 1 }),
            None => (s[s.len() - 1].leaf, 2),
        };
        exits.entry(leaf).or_default().insert(code);
    }
    let sink_labels = nodes
        .iter()
        .map(|n| {
            let label = match exits.get(n).map(|s| s.iter().copied().collect::<Vec<_>>()) {
                None => SinkLabel::Transient,
                Some(v) if v == [0] => SinkLabel::RootSuccess,
                Some(v) if v == [1] => SinkLabel::RootFailure,
                Some(_) => SinkLabel::Elsewhere,
            };
            (*n, label)
        })
        .collect();
    Ok(PreparesGraph {
        nodes,
        edges: counts
            .into_iter()
            .map(|((from, to), count)| Edge { from, to, count })
            .collect(),
        sink_labels,
    })
}

fn check_same_model<'a>(mut trs: impl Iterator<Item = (usize, &'a Trajectory)>) -> Result<(), ConvergenceError> {
    let Some((_, first)) = trs.next() else { return Ok(()) };
    let dim = first.samples[0].x.len();
    for (index, tr) in trs {
        if tr.meta.model != first.meta.model || tr.samples[0].x.len() != dim {
            return Err(ConvergenceError::MixedModels {
                index,
                expected: first.meta.model.clone(),
                found: tr.meta.model.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acyclicity {
    pub acyclic: bool,
    /// Topological order (smallest id first among ready nodes) when acyclic.
    pub order: Vec<NodeId>,
    /// A closed walk `[v, …, v]` when cyclic.
    pub cycle: Option<Vec<NodeId>>,
}

pub fn check_acyclic(g: &PreparesGraph) -> Acyclicity {
    let succ = g.successors();
    let mut indegree: BTreeMap<NodeId, usize> = g.nodes.iter().map(|&n| (n, 0)).collect();
    for targets in succ.values() {
        for t in targets {
            *indegree.get_mut(t).expect("edge endpoints are nodes") += 1;
        }
    }
    let mut ready: BTreeSet<NodeId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut order = Vec::new();
    while let Some(n) = ready.pop_first() {
        order.push(n);
        for t in &succ[&n] {
            let d = indegree.get_mut(t).expect("edge endpoints are nodes");
            *d -= 1;
            if *d == 0 {
                ready.insert(*t);
            }
        }
    }
    if order.len() == g.nodes.len() {
        return Acyclicity {
            acyclic: true,
            order,
            cycle: None,
        };
    }
    // Kahn leaves every node that has a leftover predecessor. Peeling off
    // nodes with no leftover successor too leaves only nodes that have both,
    // so a forward walk inside that core must close a cycle.
    let placed: BTreeSet<NodeId> = order.iter().copied().collect();
    let mut core: BTreeSet<NodeId> = g.nodes.difference(&placed).copied().collect();
    loop {
        let dead: Vec<NodeId> = core
            .iter()
            .copied()
            .filter(|v| !succ[v].iter().any(|t| core.contains(t)))
            .collect();
        if dead.is_empty() {
            break;
        }
        for v in dead {
            core.remove(&v);
        }
    }
    let mut cur = *core.first().expect("a cyclic graph has a non-empty core");
    let mut walk = vec![cur];
    loop {
        let next = *succ[&cur]
            .iter()
            .find(|t| core.contains(t))
            .expect("core nodes have a successor in the core");
        if let Some(i) = walk.iter().position(|&v| v == next) {
            let mut cycle = walk[i..].to_vec();
            cycle.push(next);
            return Acyclicity {
                acyclic: false,
                order: Vec::new(),
                cycle: Some(cycle),
            };
        }
        walk.push(next);
        cur = next;
    }
}

/// Reflexive-transitive closure of an edge relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialOrder {
    pub nodes: BTreeSet<NodeId>,
    pub pairs: BTreeSet<(NodeId, NodeId)>,
}

impl PartialOrder {
    pub fn closure(g: &PreparesGraph) -> Self {
        let succ = g.successors();
        let mut pairs = BTreeSet::new();
        for &s in &g.nodes {
            let mut stack = vec![s];
            let mut seen = BTreeSet::new();
            while let Some(v) = stack.pop() {
                if seen.insert(v) {
                    pairs.insert((s, v));
                    stack.extend(succ[&v].iter().copied());
                }
            }
        }
        PartialOrder {
            nodes: g.nodes.clone(),
            pairs,
        }
    }

    /// `a ≤ b`.
    pub fn leq(&self, a: NodeId, b: NodeId) -> bool {
        a == b || self.pairs.contains(&(a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceViolation {
    /// Leaf whose constraint region was left.
    pub leaf: NodeId,
    pub trajectory: usize,
    pub t: f64,
    /// First sampled state outside the constraint region.
    pub x: Vec<f64>,
    pub exit_leaf: NodeId,
    pub exit_status: Status,
}

/// Checks that once leaf `i` is active outside the root failure region, no
/// later sample leaves `⋃_{j ≥ i} Ω_j` minus the root failure region.
///
/// Reaching the root success region discharges the obligation: the check
/// stops at the first such sample, whichever leaf owns it (a fallback may
/// hand control to an earlier, now successful, child at that instant).
/// One violation is reported per trajectory and leaf.
pub fn check_lambda_invariance(trajectories: &[(usize, &Trajectory)], leq_f: &PartialOrder) -> Vec<InvarianceViolation> {
    let mut out = Vec::new();
    for &(id, tr) in trajectories {
        let mut reported = BTreeSet::new();
        // Leaves that were active (outside F₀) so far; each imposes a constraint.
        let mut active: BTreeSet<NodeId> = BTreeSet::new();
        for s in &tr.samples {
            if s.status == Status::Success {
                break;
            }
            for &i in &active {
                let inside = leq_f.leq(i, s.leaf) && s.status != Status::Failure;
                if !inside && reported.insert(i) {
                    out.push(InvarianceViolation {
                        leaf: i,
                        trajectory: id,
                        t: s.t,
                        x: s.x.clone(),
                        exit_leaf: s.leaf,
                        exit_status: s.status,
                    });
                }
            }
            if s.status != Status::Failure {
                active.insert(s.leaf);
            }
        }
    }
    out
}

/// Longest run of consecutive samples per leaf outside the root success
/// region, measured until the next sample (the exit point) when there is one.
pub fn dwell_times(trajectories: &[&Trajectory]) -> BTreeMap<NodeId, f64> {
    let mut tau: BTreeMap<NodeId, f64> = BTreeMap::new();
    for tr in trajectories {
        let s = &tr.samples;
        let mut k = 0;
        while k < s.len() {
            if s[k].status == Status::Success {
                tau.entry(s[k].leaf).or_insert(0.0);
                k += 1;
                continue;
            }
            let leaf = s[k].leaf;
            let start = s[k].t;
            let mut j = k;
            while j + 1 < s.len() && s[j + 1].leaf == leaf && s[j + 1].status != Status::Success {
                j += 1;
            }
            let end = if j + 1 < s.len() { s[j + 1].t } else { s[j].t };
            let entry = tau.entry(leaf).or_insert(0.0);
            *entry = entry.max(end - start);
            k = j + 1;
        }
    }
    tau
}

/// Longest chain by node count and the chain with the largest `tau` sum,
/// by dynamic programming over a topological order.
pub fn chain_bounds(order: &[NodeId], g: &PreparesGraph, tau: &BTreeMap<NodeId, f64>) -> ((usize, Vec<NodeId>), (f64, Vec<NodeId>)) {
    let mut preds: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for e in &g.edges {
        preds.entry(e.to).or_default().push(e.from);
    }
    let weight = |n: NodeId| tau.get(&n).copied().unwrap_or(0.0);
    let mut count: BTreeMap<NodeId, (usize, Option<NodeId>)> = BTreeMap::new();
    let mut time: BTreeMap<NodeId, (f64, Option<NodeId>)> = BTreeMap::new();
    for &v in order {
        let mut best_c = (1, None);
        let mut best_t = (weight(v), None);
        for &u in preds.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if count[&u].0 + 1 > best_c.0 {
                best_c = (count[&u].0 + 1, Some(u));
            }
            if time[&u].0 + weight(v) > best_t.0 {
                best_t = (time[&u].0 + weight(v), Some(u));
            }
        }
        count.insert(v, best_c);
        time.insert(v, best_t);
    }
    fn trace<T: Copy>(table: &BTreeMap<NodeId, (T, Option<NodeId>)>, end: Option<NodeId>) -> Vec<NodeId> {
        let mut chain = Vec::new();
        let mut cur = end;
        while let Some(v) = cur {
            chain.push(v);
            cur = table[&v].1;
        }
        chain.reverse();
        chain
    }
    // Ties go to the earliest node in topological order.
    let mut end_c: Option<NodeId> = None;
    let mut end_t: Option<NodeId> = None;
    for &v in order {
        if end_c.is_none_or(|e| count[&v].0 > count[&e].0) {
            end_c = Some(v);
        }
        if end_t.is_none_or(|e| time[&v].0 > time[&e].0) {
            end_t = Some(v);
        }
    }
    let n = end_c.map_or(0, |e| count[&e].0);
    let t = end_t.map_or(0.0, |e| time[&e].0);
    ((n, trace(&count, end_c)), (t, trace(&time, end_t)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCertificate {
    pub model: String,
    pub batch_size: usize,
    pub assessed: usize,
    /// Batch indices whose integration failed; excluded from the analysis.
    pub unassessed: Vec<usize>,
    /// Bounding box of the assessed initial conditions.
    pub initial_condition_box: Vec<(f64, f64)>,
    pub graph: PreparesGraph,
    pub acyclic: bool,
    pub topological_order: Vec<NodeId>,
    pub cycle: Option<Vec<NodeId>>,
    pub tau: BTreeMap<NodeId, f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub t_prime: Option<f64>,
    pub longest_chain: Vec<NodeId>,
    pub slowest_chain: Vec<NodeId>,
    pub invariance_checked: bool,
    pub invariance_violations: Vec<InvarianceViolation>,
    pub sinks_reach_success: bool,
    pub pass: bool,
}

/// Composes graph construction, acyclicity, dwell times, chain bounds and
/// the invariance check. The certificate passes iff at least one trajectory
/// was assessed, the graph is acyclic, no invariance violation was seen and
/// every trajectory left the running region into the root success region.
pub fn certify(batch: &[Result<Trajectory, ExecError>], _bt: &BehaviorTree) -> Result<ConvergenceCertificate, ConvergenceError> {
    if batch.is_empty() {
        return Err(ConvergenceError::EmptyBatch);
    }
    let ok: Vec<(usize, &Trajectory)> = batch
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().ok().map(|t| (i, t)))
        .collect();
    let unassessed: Vec<usize> = batch
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_err())
        .map(|(i, _)| i)
        .collect();
    check_same_model(ok.iter().copied())?;
    let trajectories: Vec<Trajectory> = ok.iter().map(|(_, t)| (*t).clone()).collect();
    let graph = build_prepares_graph(&trajectories)?;
    let acyc = check_acyclic(&graph);
    let refs: Vec<&Trajectory> = ok.iter().map(|(_, t)| *t).collect();
    let tau = dwell_times(&refs);

    let (n, t_prime, longest_chain, slowest_chain, violations) = if acyc.acyclic {
        let ((n, lc), (tp, sc)) = chain_bounds(&acyc.order, &graph, &tau);
        let leq = PartialOrder::closure(&graph);
        (Some(n), Some(tp), lc, sc, check_lambda_invariance(&ok, &leq))
    } else {
        (None, None, Vec::new(), Vec::new(), Vec::new())
    };
    let sinks_reach_success = graph
        .sink_labels
        .values()
        .all(|l| matches!(l, SinkLabel::Transient | SinkLabel::RootSuccess));
    let dim = refs.first().map_or(0, |t| t.samples[0].x.len());
    let initial_condition_box = (0..dim)
        .map(|k| {
            refs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                let v = t.samples[0].x[k];
                (lo.min(v), hi.max(v))
            })
        })
        .collect();
    let pass = !ok.is_empty() && acyc.acyclic && violations.is_empty() && sinks_reach_success;
    Ok(ConvergenceCertificate {
        model: refs.first().map(|t| t.meta.model.clone()).unwrap_or_default(),
        batch_size: batch.len(),
        assessed: ok.len(),
        unassessed,
        initial_condition_box,
        graph,
        acyclic: acyc.acyclic,
        topological_order: acyc.order,
        cycle: acyc.cycle,
        tau,
        n,
        t_prime,
        longest_chain,
        slowest_chain,
        invariance_checked: acyc.acyclic,
        invariance_violations: violations,
        sinks_reach_success,
        pass,
    })
}

fn ids(v: &[NodeId]) -> String {
    v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" -> ")
}

impl ConvergenceCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates are always serializable")
    }

    /// Human-readable report.
    pub fn summary(&self, bt: Option<&BehaviorTree>) -> String {
        let name = |n: NodeId| match bt.and_then(|b| b.label(n).ok()) {
            Some(l) => format!("{n} ({l})"),
            None => n.to_string(),
        };
        let mut s = String::new();
        let w = &mut s;
        writeln!(w, "model: {}", self.model).unwrap();
        writeln!(w, "trajectories: {} assessed of {}", self.assessed, self.batch_size).unwrap();
        if !self.unassessed.is_empty() {
            writeln!(w, "unassessed (integration failed): {:?}", self.unassessed).unwrap();
        }
        writeln!(w, "leaves: {}", self.graph.nodes.iter().map(|&n| name(n)).collect::<Vec<_>>().join(", ")).unwrap();
        writeln!(w, "transitions:").unwrap();
        if self.graph.edges.is_empty() {
            writeln!(w, "  (none)").unwrap();
        }
        for e in &self.graph.edges {
            writeln!(w, "  {} -> {}  x{}", e.from, e.to, e.count).unwrap();
        }
        for (n, l) in &self.graph.sink_labels {
            writeln!(w, "ending in {n}: {l:?}").unwrap();
        }
        match &self.cycle {
            None => writeln!(w, "acyclic: yes, order {}", ids(&self.topological_order)).unwrap(),
            Some(c) => writeln!(w, "acyclic: no, cycle {}", ids(c)).unwrap(),
        }
        for (n, t) in &self.tau {
            writeln!(w, "tau[{n}] = {t:.6}").unwrap();
        }
        if let (Some(n), Some(t)) = (self.n, self.t_prime) {
            writeln!(w, "N = {n} (chain {})", ids(&self.longest_chain)).unwrap();
            writeln!(w, "t' = {t:.6} (chain {})", ids(&self.slowest_chain)).unwrap();
        }
        if self.invariance_checked {
            writeln!(w, "invariance violations: {}", self.invariance_violations.len()).unwrap();
        } else {
            writeln!(w, "invariance: not checked (graph is cyclic)").unwrap();
        }
        writeln!(w, "bounds are empirical maxima over this batch, not proofs").unwrap();
        writeln!(w, "result: {}", if self.pass { "PASS" } else { "FAIL" }).unwrap();
        s
    }
}
