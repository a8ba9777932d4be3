//! Leaf behaviors, Sequence/Fallback composition and pointwise evaluation.
//!
//! A behavior tree maps a state `x` to a pair `(u, r)` of a control vector and
//! a [`Status`]. Leaves carry a state-feedback controller and a metadata
//! function; composites delegate to exactly one child chosen by the children's
//! statuses. Evaluation never invokes more than one controller per tick.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{NodeId, OrderedTree, TreeError};

/// Progress reported by a node's metadata function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Running,
    Success,
    Failure,
}

impl Status {
    pub fn letter(self) -> char {
        match self {
            Status::Running => 'R',
            Status::Success => 'S',
            Status::Failure => 'F',
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Running => "Running",
            Status::Success => "Success",
            Status::Failure => "Failure",
        };
        f.write_str(s)
    }
}

/// Composite node type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Composition {
    Sequence,
    Fallback,
}

impl Composition {
    /// The child status that lets a composite move on to the next child.
    pub fn pass_status(self) -> Status {
        match self {
            Composition::Sequence => Status::Success,
            Composition::Fallback => Status::Failure,
        }
    }
}

/// Error raised by a leaf function or plant field while evaluating.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound identifier `{0}`")]
    UnboundIdentifier(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BtError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state contains a non-finite coordinate")]
    NonFiniteState,
    #[error("node {0} is not a composite")]
    NotComposite(NodeId),
    #[error("composite node {0} has no children")]
    EmptyComposite(NodeId),
    #[error("node kinds do not match the tree structure at node {0}")]
    StructureMismatch(NodeId),
    #[error("children of node {0} do not determine exactly one status")]
    InconsistentStatus(NodeId),
    #[error("evaluation failed at node {node}: {source}")]
    Eval {
        node: NodeId,
        #[source]
        source: EvalError,
    },
    #[error("plant evaluation failed: {0}")]
    Plant(#[source] EvalError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

pub type ControlFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>, EvalError> + Send + Sync>;
pub type MetadataFn = Arc<dyn Fn(&[f64]) -> Result<Status, EvalError> + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>, EvalError> + Send + Sync>;

/// A state-feedback controller paired with its metadata function.
///
/// Both functions must be pure.
#[derive(Clone)]
pub struct LeafBehavior {
    pub label: String,
    controller: ControlFn,
    metadata: MetadataFn,
}

impl LeafBehavior {
    pub fn new<C, M>(label: impl Into<String>, controller: C, metadata: M) -> Self
    where
        C: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        M: Fn(&[f64]) -> Status + Send + Sync + 'static,
    {
        LeafBehavior {
            label: label.into(),
            controller: Arc::new(move |x| Ok(controller(x))),
            metadata: Arc::new(move |x| Ok(metadata(x))),
        }
    }

    pub fn fallible(label: impl Into<String>, controller: ControlFn, metadata: MetadataFn) -> Self {
        LeafBehavior {
            label: label.into(),
            controller,
            metadata,
        }
    }

    pub fn control(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        (self.controller)(x)
    }

    pub fn status(&self, x: &[f64]) -> Result<Status, EvalError> {
        (self.metadata)(x)
    }
}

impl fmt::Debug for LeafBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeafBehavior").field("label", &self.label).finish_non_exhaustive()
    }
}

/// Recursive description of a behavior tree, used to build a [`BehaviorTree`].
#[derive(Clone, Debug)]
pub enum BtNode {
    Leaf(LeafBehavior),
    Composite {
        kind: Composition,
        label: String,
        children: Vec<BtNode>,
    },
}

impl BtNode {
    pub fn seq(children: Vec<BtNode>) -> Self {
        BtNode::Composite {
            kind: Composition::Sequence,
            label: "seq".into(),
            children,
        }
    }

    pub fn fal(children: Vec<BtNode>) -> Self {
        BtNode::Composite {
            kind: Composition::Fallback,
            label: "fal".into(),
            children,
        }
    }

    pub fn labeled(mut self, name: impl Into<String>) -> Self {
        match &mut self {
            BtNode::Leaf(leaf) => leaf.label = name.into(),
            BtNode::Composite { label, .. } => *label = name.into(),
        }
        self
    }
}

/// Per-node payload of a flattened tree.
#[derive(Clone, Debug)]
pub enum NodeBody {
    Leaf(LeafBehavior),
    Composite(Composition),
}

/// Structural tag of a node, without its behavior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf,
    Sequence,
    Fallback,
}

impl NodeKind {
    pub fn composition(self) -> Option<Composition> {
        match self {
            NodeKind::Leaf => None,
            NodeKind::Sequence => Some(Composition::Sequence),
            NodeKind::Fallback => Some(Composition::Fallback),
        }
    }
}

/// The controlled vector field `f(x, u)`.
#[derive(Clone)]
pub struct Plant {
    state_dim: usize,
    control_dim: usize,
    field: FieldFn,
}

impl Plant {
    pub fn new<F>(state_dim: usize, control_dim: usize, field: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Plant {
            state_dim,
            control_dim,
            field: Arc::new(move |x, u| Ok(field(x, u))),
        }
    }

    pub fn fallible(state_dim: usize, control_dim: usize, field: FieldFn) -> Self {
        Plant {
            state_dim,
            control_dim,
            field,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, BtError> {
        if u.len() != self.control_dim {
            return Err(BtError::DimensionMismatch {
                expected: self.control_dim,
                found: u.len(),
            });
        }
        let dx = (self.field)(x, u).map_err(BtError::Plant)?;
        if dx.len() != self.state_dim {
            return Err(BtError::DimensionMismatch {
                expected: self.state_dim,
                found: dx.len(),
            });
        }
        Ok(dx)
    }
}

impl fmt::Debug for Plant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Plant")
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .finish_non_exhaustive()
    }
}

/// A behavior tree flattened onto an [`OrderedTree`]; node ids index `bodies`.
#[derive(Clone, Debug)]
pub struct BehaviorTree {
    tree: OrderedTree,
    bodies: Vec<NodeBody>,
    labels: Vec<String>,
    state_dim: usize,
    control_dim: usize,
}

impl BehaviorTree {
    /// Flattens `root`, numbering nodes in depth-first pre-order.
    pub fn new(root: BtNode, state_dim: usize, control_dim: usize) -> Result<Self, BtError> {
        let mut bodies = Vec::new();
        let mut labels = Vec::new();
        let mut edges = Vec::new();
        let mut stack = vec![(root, None::<NodeId>)];
        // Explicit stack keeps pre-order numbering: pop the node, then push children reversed.
        let mut child_lists: Vec<Vec<NodeId>> = Vec::new();
        while let Some((node, parent)) = stack.pop() {
            let id = NodeId(bodies.len());
            child_lists.push(Vec::new());
            if let Some(p) = parent {
                child_lists[p.0].push(id);
            }
            match node {
                BtNode::Leaf(leaf) => {
                    labels.push(leaf.label.clone());
                    bodies.push(NodeBody::Leaf(leaf));
                }
                BtNode::Composite {
                    kind,
                    label,
                    children,
                } => {
                    if children.is_empty() {
                        return Err(BtError::EmptyComposite(id));
                    }
                    labels.push(label);
                    bodies.push(NodeBody::Composite(kind));
                    for child in children.into_iter().rev() {
                        stack.push((child, Some(id)));
                    }
                }
            }
        }
        for (p, cs) in child_lists.into_iter().enumerate() {
            if !cs.is_empty() {
                edges.push((NodeId(p), cs));
            }
        }
        let tree = OrderedTree::build(edges)?;
        Self::from_parts(tree, bodies, labels, state_dim, control_dim)
    }

    /// Pairs an existing tree with per-node bodies.
    pub fn from_parts(
        tree: OrderedTree,
        bodies: Vec<NodeBody>,
        labels: Vec<String>,
        state_dim: usize,
        control_dim: usize,
    ) -> Result<Self, BtError> {
        if bodies.len() != tree.node_count() || labels.len() != tree.node_count() {
            return Err(BtError::DimensionMismatch {
                expected: tree.node_count(),
                found: bodies.len(),
            });
        }
        for id in tree.nodes() {
            let leaf = tree.is_leaf(id)?;
            match (&bodies[id.0], leaf) {
                (NodeBody::Leaf(_), true) | (NodeBody::Composite(_), false) => {}
                (NodeBody::Composite(_), true) => return Err(BtError::EmptyComposite(id)),
                (NodeBody::Leaf(_), false) => return Err(BtError::StructureMismatch(id)),
            }
        }
        Ok(BehaviorTree {
            tree,
            bodies,
            labels,
            state_dim,
            control_dim,
        })
    }

    pub fn tree(&self) -> &OrderedTree {
        &self.tree
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn label(&self, id: NodeId) -> Result<&str, BtError> {
        self.labels
            .get(id.0)
            .map(String::as_str)
            .ok_or(BtError::Tree(TreeError::InvalidNodeId(id)))
    }

    pub fn body(&self, id: NodeId) -> Result<&NodeBody, BtError> {
        self.bodies
            .get(id.0)
            .ok_or(BtError::Tree(TreeError::InvalidNodeId(id)))
    }

    pub fn kind(&self, id: NodeId) -> Result<NodeKind, BtError> {
        Ok(match self.body(id)? {
            NodeBody::Leaf(_) => NodeKind::Leaf,
            NodeBody::Composite(Composition::Sequence) => NodeKind::Sequence,
            NodeBody::Composite(Composition::Fallback) => NodeKind::Fallback,
        })
    }

    pub fn kinds(&self) -> Vec<NodeKind> {
        self.tree.nodes().map(|id| self.kind(id).expect("valid id")).collect()
    }

    /// Composition type of the parent of `id`, `None` for the root.
    pub fn parent_composition(&self, id: NodeId) -> Result<Option<Composition>, BtError> {
        match self.tree.parent(id)? {
            None => Ok(None),
            Some(p) => match self.body(p)? {
                NodeBody::Composite(c) => Ok(Some(*c)),
                NodeBody::Leaf(_) => Err(BtError::StructureMismatch(p)),
            },
        }
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.tree.leaves()
    }

    /// Rejects states of the wrong dimension or with NaN/Inf coordinates.
    pub fn check_state(&self, x: &[f64]) -> Result<(), BtError> {
        if x.len() != self.state_dim {
            return Err(BtError::DimensionMismatch {
                expected: self.state_dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BtError::NonFiniteState);
        }
        Ok(())
    }

    fn leaf(&self, id: NodeId) -> Result<&LeafBehavior, BtError> {
        match self.body(id)? {
            NodeBody::Leaf(l) => Ok(l),
            NodeBody::Composite(_) => Err(BtError::StructureMismatch(id)),
        }
    }

    fn leaf_status(&self, id: NodeId, x: &[f64]) -> Result<Status, BtError> {
        self.leaf(id)?
            .status(x)
            .map_err(|source| BtError::Eval { node: id, source })
    }

    /// Controller output of leaf `id` at `x`.
    pub fn leaf_control(&self, id: NodeId, x: &[f64]) -> Result<Vec<f64>, BtError> {
        let u = self
            .leaf(id)?
            .control(x)
            .map_err(|source| BtError::Eval { node: id, source })?;
        if u.len() != self.control_dim {
            return Err(BtError::DimensionMismatch {
                expected: self.control_dim,
                found: u.len(),
            });
        }
        Ok(u)
    }

    /// The leaf whose controller node `id` delegates to at `x`, and the status
    /// node `id` reports. Only metadata functions are evaluated.
    pub fn resolve_node(&self, id: NodeId, x: &[f64]) -> Result<(NodeId, Status), BtError> {
        match self.body(id)? {
            NodeBody::Leaf(_) => Ok((id, self.leaf_status(id, x)?)),
            NodeBody::Composite(kind) => {
                let children = self.tree.children(id)?;
                let pass = kind.pass_status();
                let (last, init) = children.split_last().ok_or(BtError::EmptyComposite(id))?;
                for &c in init {
                    let (leaf, status) = self.resolve_node(c, x)?;
                    if status != pass {
                        return Ok((leaf, status));
                    }
                }
                self.resolve_node(*last, x)
            }
        }
    }

    /// Validated form of [`resolve_node`](Self::resolve_node) at the root.
    pub fn resolve(&self, x: &[f64]) -> Result<(NodeId, Status), BtError> {
        self.check_state(x)?;
        self.resolve_node(NodeId::ROOT, x)
    }

    /// Status of node `id` at `x` by direct delegation.
    pub fn status(&self, id: NodeId, x: &[f64]) -> Result<Status, BtError> {
        self.check_state(x)?;
        Ok(self.resolve_node(id, x)?.1)
    }

    /// `(u, r)` of node `id` at `x`.
    pub fn tick_node(&self, id: NodeId, x: &[f64]) -> Result<(Vec<f64>, Status), BtError> {
        self.check_state(x)?;
        let (leaf, status) = self.resolve_node(id, x)?;
        Ok((self.leaf_control(leaf, x)?, status))
    }

    /// `(u₀(x), r₀(x))` of the root.
    pub fn tick(&self, x: &[f64]) -> Result<(Vec<f64>, Status), BtError> {
        self.tick_node(NodeId::ROOT, x)
    }

    pub fn root_status(&self, x: &[f64]) -> Result<Status, BtError> {
        self.status(NodeId::ROOT, x)
    }

    /// Id of the leaf whose controller the root executes at `x`.
    pub fn active_leaf(&self, x: &[f64]) -> Result<NodeId, BtError> {
        Ok(self.resolve(x)?.0)
    }

    /// Status of composite `id` from its children's statuses via the closed
    /// set formulas, recursing through composite children the same way.
    ///
    /// For a Sequence: Success iff every child succeeds; Failure (Running)
    /// iff some child fails (runs) while all children to its left succeed.
    /// A Fallback is the dual with Success and Failure exchanged.
    pub fn composed_status(&self, id: NodeId, x: &[f64]) -> Result<Status, BtError> {
        self.check_state(x)?;
        match self.body(id)? {
            NodeBody::Leaf(_) => Err(BtError::NotComposite(id)),
            NodeBody::Composite(_) => self.composed_inner(id, x),
        }
    }

    fn composed_inner(&self, id: NodeId, x: &[f64]) -> Result<Status, BtError> {
        let kind = match self.body(id)? {
            NodeBody::Leaf(_) => return self.leaf_status(id, x),
            NodeBody::Composite(kind) => *kind,
        };
        let child_status = self
            .tree
            .children(id)?
            .iter()
            .map(|&c| self.composed_inner(c, x))
            .collect::<Result<Vec<_>, _>>()?;

        let pass = kind.pass_status();
        let (absorbing, other) = match kind {
            Composition::Sequence => (Status::Success, Status::Failure),
            Composition::Fallback => (Status::Failure, Status::Success),
        };
        // Membership in the "all children" region.
        let in_all = child_status.iter().all(|&s| s == absorbing);
        // Membership in the union regions: child j has status s and every
        // left sibling k <_S j is in the pass region.
        let union_with = |target: Status| {
            child_status.iter().enumerate().any(|(j, &s)| {
                s == target && child_status[..j].iter().all(|&k| k == pass)
            })
        };
        let in_other = union_with(other);
        let in_running = union_with(Status::Running);

        match (in_all, in_other, in_running) {
            (true, false, false) => Ok(absorbing),
            (false, true, false) => Ok(other),
            (false, false, true) => Ok(Status::Running),
            _ => Err(BtError::InconsistentStatus(id)),
        }
    }
}
