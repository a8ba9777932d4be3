//! Rooted ordered trees viewed as a vertex set with two partial orders.
//!
//! The parent order `≤_P` relates a node to its descendants and the sibling
//! order `≤_S` relates children of the same parent by their left-to-right
//! position. Composing the strict sibling order with the parent order yields
//! the left-uncle and right-uncle relations used by the region calculus:
//! `j <_LU i` iff `j` is a left sibling of `i` or of one of its ancestors, and
//! symmetrically for `>_RU`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node index. Id 0 is always the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(value: usize) -> Self {
        NodeId(value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("cycle detected through node {0}")]
    CycleDetected(NodeId),
    #[error("node {0} has no parent but is not the root")]
    MultipleRoots(NodeId),
    #[error("node {0} is listed as a child more than once")]
    DuplicateChild(NodeId),
    #[error("node {0} is not connected to the tree")]
    OrphanNode(NodeId),
    #[error("invalid node id {0}")]
    InvalidNodeId(NodeId),
}

/// A rooted ordered tree with dense ids `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedTree {
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    /// Position of each node within its parent's child list.
    sibling_index: Vec<usize>,
}

impl OrderedTree {
    /// A tree consisting of the root only.
    pub fn single() -> Self {
        OrderedTree {
            parent: vec![None],
            children: vec![Vec::new()],
            sibling_index: vec![0],
        }
    }

    /// Builds a tree from `(parent, ordered children)` pairs.
    ///
    /// The node count is one more than the largest id mentioned. Node 0 must
    /// be the root.
    pub fn build<I>(edges: I) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = (NodeId, Vec<NodeId>)>,
    {
        let edges: Vec<(NodeId, Vec<NodeId>)> = edges.into_iter().collect();
        let node_count = edges
            .iter()
            .flat_map(|(p, cs)| std::iter::once(p.0).chain(cs.iter().map(|c| c.0)))
            .max()
            .map_or(1, |m| m + 1);

        let mut parent: Vec<Option<NodeId>> = vec![None; node_count];
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); node_count];
        let mut mentioned = vec![false; node_count];
        mentioned[0] = true;
        let mut has_child_list = vec![false; node_count];

        for (p, cs) in &edges {
            mentioned[p.0] = true;
            if has_child_list[p.0] {
                // Two child lists for one parent would make the order ambiguous.
                return Err(TreeError::DuplicateChild(cs.first().copied().unwrap_or(*p)));
            }
            has_child_list[p.0] = true;
            for &c in cs {
                mentioned[c.0] = true;
                if parent[c.0].is_some() || c == *p {
                    return Err(if c == *p {
                        TreeError::CycleDetected(c)
                    } else {
                        TreeError::DuplicateChild(c)
                    });
                }
                parent[c.0] = Some(*p);
                children[p.0].push(c);
            }
        }

        // Every chain of parents must terminate within node_count steps.
        for start in 0..node_count {
            let mut cur = NodeId(start);
            let mut steps = 0;
            while let Some(p) = parent[cur.0] {
                cur = p;
                steps += 1;
                if steps > node_count {
                    return Err(TreeError::CycleDetected(NodeId(start)));
                }
            }
        }

        if let Some(i) = mentioned.iter().position(|m| !m) {
            return Err(TreeError::OrphanNode(NodeId(i)));
        }
        if let Some(i) = (1..node_count).find(|&i| parent[i].is_none()) {
            return Err(TreeError::MultipleRoots(NodeId(i)));
        }
        if parent[0].is_some() {
            // Acyclic but the root has a parent: the true root is elsewhere.
            let mut cur = NodeId(0);
            while let Some(p) = parent[cur.0] {
                cur = p;
            }
            return Err(TreeError::MultipleRoots(cur));
        }

        let mut sibling_index = vec![0; node_count];
        for cs in &children {
            for (k, c) in cs.iter().enumerate() {
                sibling_index[c.0] = k;
            }
        }
        Ok(OrderedTree {
            parent,
            children,
            sibling_index,
        })
    }

    /// Builds a tree from a map of child lists, mostly convenient in tests.
    pub fn from_child_lists(lists: &BTreeMap<usize, Vec<usize>>) -> Result<Self, TreeError> {
        Self::build(
            lists
                .iter()
                .map(|(p, cs)| (NodeId(*p), cs.iter().copied().map(NodeId).collect())),
        )
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId)
    }

    fn check(&self, id: NodeId) -> Result<(), TreeError> {
        if id.0 < self.node_count() {
            Ok(())
        } else {
            Err(TreeError::InvalidNodeId(id))
        }
    }

    pub fn parent(&self, id: NodeId) -> Result<Option<NodeId>, TreeError> {
        self.check(id)?;
        Ok(self.parent[id.0])
    }

    pub fn children(&self, id: NodeId) -> Result<&[NodeId], TreeError> {
        self.check(id)?;
        Ok(&self.children[id.0])
    }

    pub fn is_leaf(&self, id: NodeId) -> Result<bool, TreeError> {
        Ok(self.children(id)?.is_empty())
    }

    /// Leaves in ascending id order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.nodes().filter(|n| self.children[n.0].is_empty()).collect()
    }

    /// The node followed by its ancestors up to and including the root.
    pub fn ancestors_or_self(&self, id: NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.check(id)?;
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.parent[cur.0] {
            chain.push(p);
            cur = p;
        }
        Ok(chain)
    }

    /// Nodes in depth-first pre-order starting at the root.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack = vec![NodeId::ROOT];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children[n.0].iter().rev());
        }
        out
    }

    /// `a ≤_P b`: `a` is an ancestor of `b` or equal to it.
    pub fn leq_p(&self, a: NodeId, b: NodeId) -> Result<bool, TreeError> {
        self.check(a)?;
        Ok(self.ancestors_or_self(b)?.contains(&a))
    }

    /// `a <_S b`: same parent and `a` strictly left of `b`.
    pub fn lt_s(&self, a: NodeId, b: NodeId) -> Result<bool, TreeError> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (self.parent[a.0], self.parent[b.0]) {
            (Some(pa), Some(pb)) => pa == pb && self.sibling_index[a.0] < self.sibling_index[b.0],
            _ => false,
        })
    }

    /// `a ≤_S b`.
    pub fn leq_s(&self, a: NodeId, b: NodeId) -> Result<bool, TreeError> {
        Ok(a == b || self.lt_s(a, b)?)
    }

    /// All `j` with `j <_LU i`, ascending.
    pub fn left_uncles(&self, i: NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.uncles(i, |k, pos| k < pos)
    }

    /// All `j` with `j >_RU i`, ascending.
    pub fn right_uncles(&self, i: NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.uncles(i, |k, pos| k > pos)
    }

    fn uncles(&self, i: NodeId, keep: impl Fn(usize, usize) -> bool) -> Result<Vec<NodeId>, TreeError> {
        let mut out = Vec::new();
        for a in self.ancestors_or_self(i)? {
            if let Some(p) = self.parent[a.0] {
                let pos = self.sibling_index[a.0];
                out.extend(
                    self.children[p.0]
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| keep(*k, pos))
                        .map(|(_, c)| *c),
                );
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn depth(&self, id: NodeId) -> Result<usize, TreeError> {
        Ok(self.ancestors_or_self(id)?.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: usize) -> NodeId {
        NodeId(v)
    }

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    pub(crate) fn thermostat() -> OrderedTree {
        OrderedTree::build([(n(0), ids(&[1, 4])), (n(1), ids(&[2, 3]))]).unwrap()
    }

    fn kitchen_lamp() -> OrderedTree {
        OrderedTree::build([(n(0), ids(&[1, 2])), (n(2), ids(&[3, 4]))]).unwrap()
    }

    #[test]
    fn builds_thermostat() {
        let t = thermostat();
        assert_eq!(t.node_count(), 5);
        assert_eq!(t.children(n(0)).unwrap(), &ids(&[1, 4])[..]);
        assert_eq!(t.parent(n(3)).unwrap(), Some(n(1)));
        assert_eq!(t.leaves(), ids(&[2, 3, 4]));
        assert_eq!(t.preorder(), ids(&[0, 1, 2, 3, 4]));
    }

    #[test]
    fn root_only_tree() {
        let t = OrderedTree::build(Vec::new()).unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t, OrderedTree::single());
        assert!(t.is_leaf(n(0)).unwrap());
    }

    #[test]
    fn structural_errors() {
        assert_eq!(
            OrderedTree::build([(n(0), ids(&[1])), (n(1), ids(&[0]))]),
            Err(TreeError::CycleDetected(n(0)))
        );
        assert_eq!(
            OrderedTree::build([(n(0), ids(&[1, 1]))]),
            Err(TreeError::DuplicateChild(n(1)))
        );
        assert_eq!(
            OrderedTree::build([(n(0), ids(&[1])), (n(2), ids(&[3]))]),
            Err(TreeError::MultipleRoots(n(2)))
        );
        assert_eq!(
            OrderedTree::build([(n(0), ids(&[1, 3]))]),
            Err(TreeError::OrphanNode(n(2)))
        );
        assert_eq!(
            OrderedTree::build([(n(0), ids(&[0]))]),
            Err(TreeError::CycleDetected(n(0)))
        );
    }

    #[test]
    fn parent_and_sibling_orders() {
        let t = thermostat();
        assert!(t.leq_p(n(0), n(3)).unwrap());
        assert!(!t.leq_p(n(1), n(4)).unwrap());
        for i in 0..5 {
            assert!(t.leq_p(n(i), n(i)).unwrap());
            assert!(!t.lt_s(n(i), n(i)).unwrap());
        }
        assert!(t.lt_s(n(1), n(4)).unwrap());
        assert!(!t.lt_s(n(4), n(1)).unwrap());
        assert!(!t.lt_s(n(0), n(1)).unwrap());
        assert!(!t.lt_s(n(2), n(4)).unwrap());
        assert_eq!(t.leq_p(n(9), n(0)), Err(TreeError::InvalidNodeId(n(9))));
        assert_eq!(t.lt_s(n(0), n(7)), Err(TreeError::InvalidNodeId(n(7))));
    }

    #[test]
    fn uncles() {
        let t = thermostat();
        assert_eq!(t.left_uncles(n(3)).unwrap(), ids(&[2]));
        assert_eq!(t.left_uncles(n(0)).unwrap(), ids(&[]));
        assert!(t.right_uncles(n(2)).unwrap().contains(&n(3)));
        assert!(t.right_uncles(n(2)).unwrap().contains(&n(4)));
        assert_eq!(t.right_uncles(n(3)).unwrap(), ids(&[4]));
        assert_eq!(t.right_uncles(n(0)).unwrap(), ids(&[]));

        let k = kitchen_lamp();
        assert_eq!(k.left_uncles(n(4)).unwrap(), ids(&[1, 3]));
        assert_eq!(k.right_uncles(n(1)).unwrap(), ids(&[2]));
        assert_eq!(k.left_uncles(n(9)), Err(TreeError::InvalidNodeId(n(9))));
    }
}
