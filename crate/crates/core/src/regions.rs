//! Influence regions, success/failure pathways and operating regions.
//!
//! Regions are never represented symbolically. Every set is realized as a
//! membership predicate built from node statuses, where composite statuses
//! come from the closed-form child-region formulas
//! ([`BehaviorTree::composed_status`]) rather than from delegation. This keeps
//! the region side independent of [`BehaviorTree::active_leaf`], which the
//! partition check compares it against.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{BehaviorTree, BtError, Composition, NodeBody, NodeKind, Status};
use crate::sampling::{DomainBox, Sampler, SamplingError};
use crate::tree::{NodeId, OrderedTree, TreeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("node {0} has children but is not tagged Sequence or Fallback")]
    UnknownNodeKind(NodeId),
    #[error("sampler yielded no points")]
    EmptySampler,
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

impl From<TreeError> for RegionError {
    fn from(e: TreeError) -> Self {
        RegionError::Bt(BtError::Tree(e))
    }
}

/// Success pathway 𝔖 and failure pathway 𝔉.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwaySets {
    pub success: BTreeSet<NodeId>,
    pub failure: BTreeSet<NodeId>,
}

/// `i ∈ 𝔖` iff no right uncle of `i` has a Sequence parent; `i ∈ 𝔉` iff no
/// right uncle has a Fallback parent.
pub fn pathways(tree: &OrderedTree, kinds: &[NodeKind]) -> Result<PathwaySets, RegionError> {
    let composition_of = |p: NodeId| -> Result<Composition, RegionError> {
        kinds
            .get(p.0)
            .and_then(|k| k.composition())
            .ok_or(RegionError::UnknownNodeKind(p))
    };
    for id in tree.nodes() {
        if !tree.is_leaf(id)? {
            composition_of(id)?;
        }
    }
    let mut success = BTreeSet::new();
    let mut failure = BTreeSet::new();
    for i in tree.nodes() {
        let mut blocked_s = false;
        let mut blocked_f = false;
        for j in tree.right_uncles(i)? {
            let p = tree.parent(j)?.expect("an uncle always has a parent");
            match composition_of(p)? {
                Composition::Sequence => blocked_s = true,
                Composition::Fallback => blocked_f = true,
            }
        }
        if !blocked_s {
            success.insert(i);
        }
        if !blocked_f {
            failure.insert(i);
        }
    }
    Ok(PathwaySets { success, failure })
}

/// Status of node `j` from leaf metadata, or from the composed child-region
/// formulas for composites.
fn node_status(bt: &BehaviorTree, j: NodeId, x: &[f64]) -> Result<Status, BtError> {
    match bt.body(j)? {
        NodeBody::Leaf(_) => bt.status(j, x),
        NodeBody::Composite(_) => bt.composed_status(j, x),
    }
}

/// Membership predicates for the regions of one tree, with the structural
/// parts (pathways, left-uncle requirements) precomputed.
#[derive(Debug, Clone)]
pub struct RegionAnalyzer<'a> {
    bt: &'a BehaviorTree,
    pathways: PathwaySets,
    /// Per node: each left uncle and the status its parent requires of it.
    influence: Vec<Vec<(NodeId, Status)>>,
}

impl<'a> RegionAnalyzer<'a> {
    pub fn new(bt: &'a BehaviorTree) -> Result<Self, RegionError> {
        let tree = bt.tree();
        let pathways = pathways(tree, &bt.kinds())?;
        let influence = tree
            .nodes()
            .map(|i| {
                tree.left_uncles(i)?
                    .into_iter()
                    .map(|j| {
                        let parent = bt.parent_composition(j)?.expect("an uncle always has a parent");
                        Ok((j, parent.pass_status()))
                    })
                    .collect::<Result<Vec<_>, RegionError>>()
            })
            .collect::<Result<Vec<_>, RegionError>>()?;
        Ok(RegionAnalyzer {
            bt,
            pathways,
            influence,
        })
    }

    pub fn pathways(&self) -> &PathwaySets {
        &self.pathways
    }

    pub fn behavior_tree(&self) -> &BehaviorTree {
        self.bt
    }

    fn check(&self, i: NodeId) -> Result<(), RegionError> {
        if i.0 < self.influence.len() {
            Ok(())
        } else {
            Err(TreeError::InvalidNodeId(i).into())
        }
    }

    /// `x ∈ I_i`.
    pub fn in_influence_region(&self, i: NodeId, x: &[f64]) -> Result<bool, RegionError> {
        self.check(i)?;
        self.bt.check_state(x)?;
        for &(j, required) in &self.influence[i.0] {
            if node_status(self.bt, j, x)? != required {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `x ∈ Ω_i`.
    pub fn in_operating_region(&self, i: NodeId, x: &[f64]) -> Result<bool, RegionError> {
        if !self.in_influence_region(i, x)? {
            return Ok(false);
        }
        let on_s = self.pathways.success.contains(&i);
        let on_f = self.pathways.failure.contains(&i);
        if on_s && on_f {
            return Ok(true);
        }
        let status = node_status(self.bt, i, x)?;
        Ok(match status {
            Status::Running => true,
            Status::Success => on_s,
            Status::Failure => on_f,
        })
    }

    /// Leaves whose operating region contains `x`, ascending.
    pub fn owners(&self, x: &[f64]) -> Result<Vec<NodeId>, RegionError> {
        let mut out = Vec::new();
        for leaf in self.bt.leaves() {
            if self.in_operating_region(leaf, x)? {
                out.push(leaf);
            }
        }
        Ok(out)
    }

    fn sibling_violation(&self, x: &[f64]) -> Result<Option<SiblingViolation>, RegionError> {
        let tree = self.bt.tree();
        for i in tree.nodes() {
            let children = tree.children(i)?;
            if children.is_empty() {
                continue;
            }
            let inside = self.in_operating_region(i, x)?;
            let mut owners = Vec::new();
            for &c in children {
                if self.in_operating_region(c, x)? {
                    owners.push(c);
                }
            }
            let expected = usize::from(inside);
            if owners.len() != expected {
                return Ok(Some(SiblingViolation {
                    x: x.to_vec(),
                    parent: i,
                    parent_contains: inside,
                    children: owners,
                }));
            }
        }
        Ok(None)
    }
}

/// Free-function form of [`RegionAnalyzer::in_influence_region`].
pub fn in_influence_region(bt: &BehaviorTree, i: NodeId, x: &[f64]) -> Result<bool, RegionError> {
    RegionAnalyzer::new(bt)?.in_influence_region(i, x)
}

/// `x ∈ Ω_i` using caller-supplied pathways.
pub fn in_operating_region(
    bt: &BehaviorTree,
    pathways: &PathwaySets,
    i: NodeId,
    x: &[f64],
) -> Result<bool, RegionError> {
    let mut analyzer = RegionAnalyzer::new(bt)?;
    analyzer.pathways = pathways.clone();
    analyzer.in_operating_region(i, x)
}

/// Leaves with a sampled witness in their operating region, and those without.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemLeaves {
    pub witnessed: BTreeSet<NodeId>,
    /// No sample landed in these operating regions; they may still be non-empty.
    pub no_witness: BTreeSet<NodeId>,
}

pub fn subsystem_leaves(bt: &BehaviorTree, sampler: &Sampler) -> Result<SubsystemLeaves, RegionError> {
    let points = sampler.points();
    if points.is_empty() {
        return Err(RegionError::EmptySampler);
    }
    let analyzer = RegionAnalyzer::new(bt)?;
    let owner_sets = points
        .par_iter()
        .map(|x| analyzer.owners(x))
        .collect::<Result<Vec<_>, _>>()?;
    let witnessed: BTreeSet<NodeId> = owner_sets.into_iter().flatten().collect();
    let no_witness = bt.leaves().into_iter().filter(|l| !witnessed.contains(l)).collect();
    Ok(SubsystemLeaves { witnessed, no_witness })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjointnessViolation {
    pub x: Vec<f64>,
    pub leaves: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceViolation {
    pub x: Vec<f64>,
    pub active_leaf: NodeId,
    pub region_owner: NodeId,
}

/// A composite whose children's operating regions fail to partition its own
/// at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiblingViolation {
    pub x: Vec<f64>,
    pub parent: NodeId,
    pub parent_contains: bool,
    pub children: Vec<NodeId>,
}

/// Outcome of a sampled partition/equivalence check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub samples_tested: usize,
    pub disjointness_violations: Vec<DisjointnessViolation>,
    pub coverage_violations: Vec<Vec<f64>>,
    pub equivalence_violations: Vec<EquivalenceViolation>,
    pub sibling_violations: Vec<SiblingViolation>,
    pub witnessed_leaves: BTreeSet<NodeId>,
    pub unwitnessed_leaves: BTreeSet<NodeId>,
}

impl RegionReport {
    pub fn passed(&self) -> bool {
        self.disjointness_violations.is_empty()
            && self.coverage_violations.is_empty()
            && self.equivalence_violations.is_empty()
            && self.sibling_violations.is_empty()
    }
}

#[derive(Default)]
struct SampleOutcome {
    owners: Vec<NodeId>,
    disjoint: Option<DisjointnessViolation>,
    uncovered: Option<Vec<f64>>,
    mismatch: Option<EquivalenceViolation>,
    sibling: Option<SiblingViolation>,
}

/// Checks at every sampled `x` that exactly one leaf operating region
/// contains `x`, that this leaf is the one the root delegates to, and that
/// sibling operating regions partition their parent's.
///
/// Samples are evaluated in parallel; violations keep sample order, so the
/// report does not depend on the worker count.
pub fn check_partition(bt: &BehaviorTree, sampler: &Sampler) -> Result<RegionReport, RegionError> {
    let points = sampler.points();
    if points.is_empty() {
        return Err(RegionError::EmptySampler);
    }
    let analyzer = RegionAnalyzer::new(bt)?;
    let outcomes = points
        .par_iter()
        .map(|x| -> Result<SampleOutcome, RegionError> {
            let owners = analyzer.owners(x)?;
            let active = bt.active_leaf(x)?;
            let mut out = SampleOutcome {
                sibling: analyzer.sibling_violation(x)?,
                ..Default::default()
            };
            match owners.as_slice() {
                [] => out.uncovered = Some(x.clone()),
                [only] if *only != active => {
                    out.mismatch = Some(EquivalenceViolation {
                        x: x.clone(),
                        active_leaf: active,
                        region_owner: *only,
                    })
                }
                [_] => {}
                many => {
                    out.disjoint = Some(DisjointnessViolation {
                        x: x.clone(),
                        leaves: many.to_vec(),
                    })
                }
            }
            out.owners = owners;
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = RegionReport {
        samples_tested: points.len(),
        disjointness_violations: Vec::new(),
        coverage_violations: Vec::new(),
        equivalence_violations: Vec::new(),
        sibling_violations: Vec::new(),
        witnessed_leaves: BTreeSet::new(),
        unwitnessed_leaves: BTreeSet::new(),
    };
    for o in outcomes {
        report.witnessed_leaves.extend(o.owners);
        report.disjointness_violations.extend(o.disjoint);
        report.coverage_violations.extend(o.uncovered);
        report.equivalence_violations.extend(o.mismatch);
        report.sibling_violations.extend(o.sibling);
    }
    report.unwitnessed_leaves = bt
        .leaves()
        .into_iter()
        .filter(|l| !report.witnessed_leaves.contains(l))
        .collect();
    Ok(report)
}

/// CSV dump of the operating-region owner and root status over a grid.
///
/// Columns: `x1..xn,owner_leaf_id,root_status`. Points with no unique owner
/// get an empty owner field.
pub fn region_grid_csv(bt: &BehaviorTree, domain: &DomainBox, per_axis: usize) -> Result<String, RegionError> {
    if domain.dim() != bt.state_dim() {
        return Err(BtError::DimensionMismatch {
            expected: bt.state_dim(),
            found: domain.dim(),
        }
        .into());
    }
    let points = Sampler::grid(domain.clone(), per_axis)?.points();
    let analyzer = RegionAnalyzer::new(bt)?;
    let rows = points
        .par_iter()
        .map(|x| -> Result<String, RegionError> {
            let owners = analyzer.owners(x)?;
            let status = bt.root_status(x)?;
            let mut row = String::new();
            for v in x {
                write!(row, "{v},").expect("write to String");
            }
            if let [only] = owners.as_slice() {
                write!(row, "{only}").expect("write to String");
            }
            write!(row, ",{status}").expect("write to String");
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = String::new();
    for k in 1..=bt.state_dim() {
        write!(out, "x{k},").expect("write to String");
    }
    out.push_str("owner_leaf_id,root_status\n");
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::tests::{thermostat, T};
    use crate::bt::{BtNode, LeafBehavior};

    fn n(v: usize) -> NodeId {
        NodeId(v)
    }

    fn set(v: &[usize]) -> BTreeSet<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    #[test]
    fn thermostat_pathways_by_enumeration() {
        let bt = thermostat();
        let tree = bt.tree();
        let kinds = bt.kinds();
        let p = pathways(tree, &kinds).unwrap();
        // Oracle: scan every (node, right uncle) pair and the uncle's parent kind.
        let mut s = BTreeSet::new();
        let mut f = BTreeSet::new();
        for i in tree.nodes() {
            let mut seq_uncle = false;
            let mut fal_uncle = false;
            for j in tree.nodes() {
                let right_of_ancestor = tree
                    .nodes()
                    .any(|a| tree.leq_p(a, i).unwrap() && tree.lt_s(a, j).unwrap());
                if right_of_ancestor {
                    match kinds[tree.parent(j).unwrap().unwrap().0] {
                        NodeKind::Sequence => seq_uncle = true,
                        NodeKind::Fallback => fal_uncle = true,
                        NodeKind::Leaf => unreachable!(),
                    }
                }
            }
            if !seq_uncle {
                s.insert(i);
            }
            if !fal_uncle {
                f.insert(i);
            }
        }
        assert_eq!(p.success, s);
        assert_eq!(p.failure, f);
        assert_eq!(p.success, set(&[0, 4]));
        assert_eq!(p.failure, set(&[0, 1, 3, 4]));
        for i in tree.nodes() {
            for a in tree.ancestors_or_self(i).unwrap() {
                if p.success.contains(&i) {
                    assert!(p.success.contains(&a));
                }
                if p.failure.contains(&i) {
                    assert!(p.failure.contains(&a));
                }
            }
        }
    }

    #[test]
    fn single_leaf_pathways() {
        let p = pathways(&OrderedTree::single(), &[NodeKind::Leaf]).unwrap();
        assert_eq!(p.success, set(&[0]));
        assert_eq!(p.failure, set(&[0]));
    }

    #[test]
    fn untagged_composite_rejected() {
        let bt = thermostat();
        let mut kinds = bt.kinds();
        kinds[1] = NodeKind::Leaf;
        assert_eq!(pathways(bt.tree(), &kinds), Err(RegionError::UnknownNodeKind(n(1))));
        assert_eq!(pathways(bt.tree(), &kinds[..2]), Err(RegionError::UnknownNodeKind(n(1))));
    }

    #[test]
    fn thermostat_regions() {
        let bt = thermostat();
        let a = RegionAnalyzer::new(&bt).unwrap();
        assert_eq!(a.owners(&[T + 0.5]).unwrap(), vec![n(4)]);
        assert_eq!(a.owners(&[T]).unwrap(), vec![n(3)]);
        assert_eq!(a.owners(&[T - 3.0]).unwrap(), vec![n(3)]);
        for x in [-5.0, T, 40.0] {
            assert!(a.in_operating_region(n(0), &[x]).unwrap());
            assert!(a.in_influence_region(n(0), &[x]).unwrap());
            assert!(!a.in_operating_region(n(2), &[x]).unwrap());
        }
        assert!(a.in_operating_region(n(9), &[0.0]).is_err());
    }

    #[test]
    fn thermostat_subsystem_leaves() {
        let bt = thermostat();
        let domain = DomainBox::new(vec![(T - 10.0, T + 10.0)]).unwrap();
        let sampler = Sampler::uniform(domain, 1000, 3);
        let p = subsystem_leaves(&bt, &sampler).unwrap();
        // Oracle: the set of leaves the root actually delegates to.
        let active: BTreeSet<_> = sampler.points().iter().map(|x| bt.active_leaf(x).unwrap()).collect();
        assert_eq!(p.witnessed, active);
        assert_eq!(p.witnessed, set(&[3, 4]));
        assert_eq!(p.no_witness, set(&[2]));
        assert_eq!(
            subsystem_leaves(&bt, &Sampler::Points(vec![])),
            Err(RegionError::EmptySampler)
        );
    }

    #[test]
    fn thermostat_partition_split_at_threshold() {
        let bt = thermostat();
        let domain = DomainBox::new(vec![(T - 10.0, T + 10.0)]).unwrap();
        let report = check_partition(&bt, &Sampler::uniform(domain.clone(), 1000, 11)).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.samples_tested, 1000);
        let csv = region_grid_csv(&bt, &domain, 21).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1,owner_leaf_id,root_status");
        assert_eq!(lines[10], "20,3,Running");
        assert_eq!(lines[11], "21,3,Running");
        assert_eq!(lines[12], "22,4,Running");
    }

    #[test]
    fn single_leaf_partition() {
        let bt = BehaviorTree::new(
            BtNode::Leaf(LeafBehavior::new("a", |_| vec![0.0], |_| Status::Running)),
            1,
            1,
        )
        .unwrap();
        let domain = DomainBox::new(vec![(0.0, 1.0)]).unwrap();
        let p = subsystem_leaves(&bt, &Sampler::grid(domain.clone(), 5).unwrap()).unwrap();
        assert_eq!(p.witnessed, set(&[0]));
        assert!(check_partition(&bt, &Sampler::grid(domain, 5).unwrap()).unwrap().passed());
    }

    #[test]
    fn impure_metadata_is_caught() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;
        // A deliberately broken condition that alternates Success and Failure
        // on successive calls, so region predicates disagree with each other.
        let calls = Arc::new(AtomicUsize::new(0));
        let flip = LeafBehavior::new("broken", |_| vec![0.0], move |_| {
            if calls.fetch_add(1, Ordering::SeqCst).is_multiple_of(2) {
                Status::Success
            } else {
                Status::Failure
            }
        });
        let bt = BehaviorTree::new(
            BtNode::seq(vec![
                BtNode::fal(vec![
                    BtNode::Leaf(flip),
                    BtNode::Leaf(LeafBehavior::new("on", |_| vec![1.0], |_| Status::Running)),
                ]),
                BtNode::Leaf(LeafBehavior::new("off", |_| vec![-1.0], |_| Status::Running)),
            ]),
            1,
            1,
        )
        .unwrap();
        let report = check_partition(&bt, &Sampler::Points(vec![vec![0.0]; 8])).unwrap();
        assert!(!report.passed());
        assert!(!report.disjointness_violations.is_empty() || !report.coverage_violations.is_empty());
    }
}
