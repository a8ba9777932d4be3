//! Recorded executions and their JSON/CSV forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bt::Status;
use crate::tree::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub leaf: NodeId,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Switch,
    SlideEnter,
    SlideExit,
    RootSuccess,
    RootFailure,
}

/// `from`/`to` are the leaves on either side of a switch or sliding surface;
/// for root events both name the active leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub model: String,
    pub dt: f64,
    pub t_end: f64,
    pub event_tol: f64,
    pub sliding_eps: f64,
    pub max_chatter: usize,
    pub stop_on_root_success: bool,
    pub seed: Option<u64>,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.meta.model = model.into();
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.meta.seed = seed;
        self
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory always holds its initial sample")
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.samples[0].t
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn switch_count(&self) -> usize {
        self.events_of(EventKind::Switch).count()
    }

    /// Time of the first sample with root status Success.
    pub fn root_success_time(&self) -> Option<f64> {
        self.samples.iter().find(|s| s.status == Status::Success).map(|s| s.t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectories are always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One row per sample: `t,x1..xn,leaf,status`.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut out = String::from("t");
        for k in 1..=n {
            write!(out, ",x{k}").expect("write to String");
        }
        out.push_str(",leaf,status\n");
        for s in &self.samples {
            write!(out, "{}", s.t).expect("write to String");
            for v in &s.x {
                write!(out, ",{v}").expect("write to String");
            }
            writeln!(out, ",{},{}", s.leaf, s.status).expect("write to String");
        }
        out
    }
}
