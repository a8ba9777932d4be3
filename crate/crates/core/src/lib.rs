//! Continuous-time behavior trees executed as discontinuous dynamical systems.

pub mod boundary;
pub mod convergence;
pub mod bt;
pub mod dsl;
pub mod executor;
pub mod models;
pub mod regions;
pub mod sampling;
pub mod synth;
pub mod trajectory;
pub mod tree;

pub use bt::{BehaviorTree, BtError, BtNode, Composition, LeafBehavior, NodeKind, Plant, Status};
pub use regions::{check_partition, pathways, subsystem_leaves, RegionAnalyzer, RegionError, RegionReport};
pub use sampling::{initial_conditions, Ball, DomainBox, InitKind, Sampler};
pub use tree::{NodeId, OrderedTree, TreeError};
pub use executor::{batch_integrate, check_transversality, integrate, ExecError, IntegratorConfig};
pub use trajectory::{Event, EventKind, Sample, Trajectory};
pub use convergence::{certify, check_acyclic, ConvergenceCertificate, ConvergenceError, PreparesGraph};
