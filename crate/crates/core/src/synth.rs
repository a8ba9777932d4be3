//! Seeded random behavior trees with half-space leaf metadata, for
//! exercising the region analysis against direct tick evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bt::{BehaviorTree, BtNode, LeafBehavior, Status};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTreeConfig {
    /// Depth of the deepest node; the root has depth 0.
    pub max_depth: usize,
    pub max_leaves: usize,
    pub state_dim: usize,
    /// Probability that a non-root node above `max_depth` becomes a leaf.
    pub leaf_probability: f64,
}

impl Default for RandomTreeConfig {
    fn default() -> Self {
        RandomTreeConfig {
            max_depth: 4,
            max_leaves: 10,
            state_dim: 2,
            leaf_probability: 0.45,
        }
    }
}

/// `w·x >= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub w: Vec<f64>,
    pub b: f64,
}

impl HalfSpace {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() >= self.b
    }
}

/// Leaf metadata: Success on `success`, else Failure on `failure`, else
/// Running. `None` means the half-space is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceMetadata {
    pub success: Option<HalfSpace>,
    pub failure: Option<HalfSpace>,
}

impl HalfSpaceMetadata {
    pub fn status(&self, x: &[f64]) -> Status {
        if self.success.as_ref().is_some_and(|h| h.contains(x)) {
            Status::Success
        } else if self.failure.as_ref().is_some_and(|h| h.contains(x)) {
            Status::Failure
        } else {
            Status::Running
        }
    }
}

fn half_space(rng: &mut ChaCha8Rng, n: usize) -> Option<HalfSpace> {
    // One in eight regions is empty, so some leaves never succeed or fail.
    if rng.gen_bool(0.125) {
        return None;
    }
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Some(HalfSpace { w, b: rng.gen_range(-0.5..0.5) })
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    cfg: &'a RandomTreeConfig,
    leaves: usize,
    composites: usize,
}

impl Builder<'_> {
    fn node(&mut self, depth: usize) -> BtNode {
        let leaf = depth == self.cfg.max_depth || (depth > 0 && self.rng.gen_bool(self.cfg.leaf_probability));
        if leaf {
            let k = self.leaves;
            self.leaves += 1;
            let meta = HalfSpaceMetadata {
                success: half_space(&mut self.rng, self.cfg.state_dim),
                failure: half_space(&mut self.rng, self.cfg.state_dim),
            };
            return BtNode::Leaf(LeafBehavior::new(format!("l{k}"), move |_| vec![k as f64], move |x| meta.status(x)));
        }
        let k = self.composites;
        self.composites += 1;
        let arity = self.rng.gen_range(1..=3);
        let children = (0..arity).map(|_| self.node(depth + 1)).collect();
        if self.rng.gen_bool(0.5) {
            BtNode::seq(children).labeled(format!("s{k}"))
        } else {
            BtNode::fal(children).labeled(format!("f{k}"))
        }
    }
}

/// A random tree with a composite root; shapes with too many leaves are
/// redrawn from the same stream, so the result depends only on `seed`.
pub fn random_tree(seed: u64, cfg: &RandomTreeConfig) -> BehaviorTree {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg,
        leaves: 0,
        composites: 0,
    };
    loop {
        b.leaves = 0;
        b.composites = 0;
        let root = b.node(0);
        if b.leaves <= cfg.max_leaves {
            return BehaviorTree::new(root, cfg.state_dim, 1).expect("generated trees are well formed");
        }
    }
}
