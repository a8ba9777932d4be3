//! Integration of `ẋ = f(x, u₀(x))` with event localization and Filippov
//! sliding on chattering boundaries.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{dot, estimate_normal, normalize, probe_scale, project_to_boundary};
use crate::bt::{BehaviorTree, BtError, Plant, Status};
use crate::sampling::DomainBox;
use crate::trajectory::{Event, EventKind, Sample, Trajectory, TrajectoryMeta};
use crate::tree::NodeId;

/// States with any coordinate beyond this magnitude are treated as blow-up.
pub const OVERFLOW_GUARD: f64 = 1e12;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("state became non-finite or exceeded {OVERFLOW_GUARD:e} at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("could not localize a leaf change to the event tolerance at t = {t}")]
    BisectionFailed { t: f64 },
    #[error("sliding between leaves {a} and {b} at t = {t}: fields have no normal difference at {x:?}")]
    ZeroDenominatorInSliding {
        t: f64,
        x: Vec<f64>,
        a: NodeId,
        b: NodeId,
    },
    #[error("chattering among {leaves:?} at t = {t}: three or more regions meet")]
    TripleJunction { t: f64, leaves: Vec<NodeId> },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("no boundary points to test")]
    EmptySampler,
    #[error(transparent)]
    Bt(BtError),
}

impl From<BtError> for ExecError {
    fn from(e: BtError) -> Self {
        match e {
            BtError::NonFiniteState => ExecError::NonFiniteState { t: f64::NAN },
            other => ExecError::Bt(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub event_tol: f64,
    pub sliding_eps: f64,
    pub max_chatter: usize,
    pub stop_on_root_success: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            t_end: 30.0,
            event_tol: 1e-6,
            sliding_eps: 1e-3,
            max_chatter: 4,
            stop_on_root_success: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), ExecError> {
        let bad = |m: &str| Err(ExecError::InvalidConfig(m.to_string()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad("t_end must be finite and non-negative");
        }
        if !(self.event_tol > 0.0 && self.event_tol < self.dt) {
            return bad("event_tol must lie in (0, dt)");
        }
        if !(self.sliding_eps.is_finite() && self.sliding_eps > 0.0) {
            return bad("sliding_eps must be positive");
        }
        if self.max_chatter < 2 {
            return bad("max_chatter must be at least 2");
        }
        Ok(())
    }

    fn meta(&self, x0: &[f64]) -> TrajectoryMeta {
        TrajectoryMeta {
            model: String::new(),
            dt: self.dt,
            t_end: self.t_end,
            event_tol: self.event_tol,
            sliding_eps: self.sliding_eps,
            max_chatter: self.max_chatter,
            stop_on_root_success: self.stop_on_root_success,
            seed: None,
            x0: x0.to_vec(),
        }
    }
}

fn guard(x: &[f64], t: f64) -> Result<(), ExecError> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= OVERFLOW_GUARD) {
        Ok(())
    } else {
        Err(ExecError::NonFiniteState { t })
    }
}

/// One classical RK4 step of `ẏ = g(y)`.
pub fn rk4_step<G>(g: G, x: &[f64], h: f64) -> Result<Vec<f64>, ExecError>
where
    G: Fn(&[f64]) -> Result<Vec<f64>, ExecError>,
{
    let shift = |k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = g(x)?;
    let k2 = g(&shift(&k1, h / 2.0))?;
    let k3 = g(&shift(&k2, h / 2.0))?;
    let k4 = g(&shift(&k3, h))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

enum Mode {
    Normal,
    Sliding { a: NodeId, b: NodeId },
}

struct Run<'a> {
    plant: &'a Plant,
    bt: &'a BehaviorTree,
    cfg: &'a IntegratorConfig,
    t: f64,
    x: Vec<f64>,
    leaf: NodeId,
    status: Status,
    samples: Vec<Sample>,
    events: Vec<Event>,
    recent_switches: VecDeque<(f64, NodeId, NodeId)>,
}

impl<'a> Run<'a> {
    fn field(&self, leaf: NodeId, x: &[f64]) -> Result<Vec<f64>, ExecError> {
        guard(x, self.t)?;
        let u = self.bt.leaf_control(leaf, x)?;
        Ok(self.plant.eval(x, &u)?)
    }

    fn pair(&self, x: &[f64]) -> Result<(NodeId, Status), ExecError> {
        guard(x, self.t)?;
        Ok(self.bt.resolve(x)?)
    }

    fn owner(&self) -> impl Fn(&[f64]) -> Result<NodeId, BtError> + 'a {
        let bt = self.bt;
        move |y: &[f64]| bt.active_leaf(y)
    }

    /// Next grid time strictly after `t`, capped at `t_end`.
    fn next_target(&self) -> f64 {
        let dt = self.cfg.dt;
        let k = (self.t / dt).floor();
        let mut target = (k + 1.0) * dt;
        if target - self.t <= 1e-9 * dt {
            target = (k + 2.0) * dt;
        }
        target.min(self.cfg.t_end)
    }

    fn record(&mut self) {
        self.samples.push(Sample {
            t: self.t,
            x: self.x.clone(),
            leaf: self.leaf,
            status: self.status,
        });
    }

    fn event(&mut self, kind: EventKind, from: NodeId, to: NodeId) {
        self.events.push(Event {
            t: self.t,
            kind,
            from,
            to,
        });
    }

    /// Emits root events for a status change; true if integration should stop.
    fn root_changed(&mut self, old: Status) -> bool {
        if self.status == old {
            return false;
        }
        match self.status {
            Status::Success => {
                self.event(EventKind::RootSuccess, self.leaf, self.leaf);
                self.cfg.stop_on_root_success
            }
            Status::Failure => {
                self.event(EventKind::RootFailure, self.leaf, self.leaf);
                false
            }
            Status::Running => false,
        }
    }

    /// Smallest sub-step (to within `event_tol`) after which the
    /// (leaf, root status) pair differs from the one at the step start.
    fn localize(&self, h: f64) -> Result<(f64, Vec<f64>), ExecError> {
        let start = (self.leaf, self.status);
        let flow = |s: f64| rk4_step(|y| self.field(self.leaf, y), &self.x, s);
        let (mut lo, mut hi) = (0.0_f64, h);
        let mut x_hi = flow(hi)?;
        for _ in 0..MAX_BISECTIONS {
            if hi - lo <= self.cfg.event_tol {
                return Ok((hi, x_hi));
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let x_mid = flow(mid)?;
            if self.pair(&x_mid)? == start {
                lo = mid;
            } else {
                hi = mid;
                x_hi = x_mid;
            }
        }
        Err(ExecError::BisectionFailed { t: self.t + lo })
    }

    /// Records a switch; returns the leaf pair to slide on if chattering.
    fn note_switch(&mut self, from: NodeId, to: NodeId) -> Result<Option<(NodeId, NodeId)>, ExecError> {
        self.event(EventKind::Switch, from, to);
        self.recent_switches.push_back((self.t, from, to));
        while let Some(&(t0, _, _)) = self.recent_switches.front() {
            if t0 < self.t - self.cfg.dt {
                self.recent_switches.pop_front();
            } else {
                break;
            }
        }
        if self.recent_switches.len() < self.cfg.max_chatter {
            return Ok(None);
        }
        let leaves: BTreeSet<NodeId> = self.recent_switches.iter().flat_map(|&(_, f, t)| [f, t]).collect();
        if leaves.len() >= 3 {
            return Err(ExecError::TripleJunction {
                t: self.t,
                leaves: leaves.into_iter().collect(),
            });
        }
        self.recent_switches.clear();
        Ok(Some((from, to)))
    }

    fn normal_step(&mut self, target: f64) -> Result<(Mode, bool), ExecError> {
        let h = target - self.t;
        let x_new = rk4_step(|y| self.field(self.leaf, y), &self.x, h)?;
        guard(&x_new, target)?;
        if self.pair(&x_new)? == (self.leaf, self.status) {
            self.t = target;
            self.x = x_new;
            self.record();
            return Ok((Mode::Normal, false));
        }
        let (hc, xc) = self.localize(h)?;
        let (old_leaf, old_status) = (self.leaf, self.status);
        self.t += hc;
        self.x = xc;
        (self.leaf, self.status) = self.pair(&self.x)?;
        self.record();
        let mut mode = Mode::Normal;
        if self.leaf != old_leaf {
            if let Some((a, b)) = self.note_switch(old_leaf, self.leaf)? {
                self.event(EventKind::SlideEnter, a, b);
                mode = Mode::Sliding { a, b };
            }
        }
        let stop = self.root_changed(old_status);
        Ok((mode, stop))
    }

    fn alpha(&self, n: &[f64], fa: &[f64], fb: &[f64], a: NodeId, b: NodeId, x: &[f64]) -> Result<f64, ExecError> {
        let na = dot(n, fa);
        let nb = dot(n, fb);
        let den = nb - na;
        let scale = fa.iter().chain(fb).fold(0.0_f64, |m, v| m.max(v.abs()));
        if den.abs() <= 1e-12 * scale || den == 0.0 {
            return Err(ExecError::ZeroDenominatorInSliding {
                t: self.t,
                x: x.to_vec(),
                a,
                b,
            });
        }
        Ok(nb / den)
    }

    /// Leaves sliding: moves just onto `side`'s region and resumes there.
    fn exit_sliding(&mut self, a: NodeId, b: NodeId, side: NodeId, n: &[f64]) -> Result<(), ExecError> {
        let sign = if side == a { -1.0 } else { 1.0 };
        let mut d = 1e-3 * probe_scale(&self.x);
        let owner = self.owner();
        while owner(&self.x)? != side && d <= 64.0 * probe_scale(&self.x) {
            let y: Vec<f64> = self.x.iter().zip(n).map(|(v, c)| v + sign * d * c).collect();
            if owner(&y)? == side {
                self.x = y;
                break;
            }
            d *= 2.0;
        }
        self.event(EventKind::SlideExit, a, b);
        (self.leaf, self.status) = self.pair(&self.x)?;
        Ok(())
    }

    fn sliding_step(&mut self, a: NodeId, b: NodeId, target: f64) -> Result<(Mode, bool), ExecError> {
        let owner = self.owner();
        let fa = self.field(a, &self.x)?;
        let fb = self.field(b, &self.x)?;
        let chord: Vec<f64> = fa.iter().zip(&fb).map(|(p, q)| p - q).collect();
        let n = match normalize(&chord) {
            Some(c) => estimate_normal(&owner, &self.x, a, b, &c)?,
            None => {
                return Err(ExecError::ZeroDenominatorInSliding {
                    t: self.t,
                    x: self.x.clone(),
                    a,
                    b,
                })
            }
        };
        let alpha = self.alpha(&n, &fa, &fb, a, b, &self.x)?;
        if alpha > 1.0 + self.cfg.sliding_eps {
            self.exit_sliding(a, b, a, &n)?;
            return Ok((Mode::Normal, false));
        }
        if alpha < -self.cfg.sliding_eps {
            self.exit_sliding(a, b, b, &n)?;
            return Ok((Mode::Normal, false));
        }

        let h = target - self.t;
        let filippov = |y: &[f64]| -> Result<Vec<f64>, ExecError> {
            let fa = self.field(a, y)?;
            let fb = self.field(b, y)?;
            let al = self.alpha(&n, &fa, &fb, a, b, y)?.clamp(0.0, 1.0);
            Ok(fa.iter().zip(&fb).map(|(p, q)| al * p + (1.0 - al) * q).collect())
        };
        let y = rk4_step(filippov, &self.x, h)?;
        guard(&y, target)?;
        let speed = fa.iter().chain(&fb).fold(0.0_f64, |m, v| m.max(v.abs()));
        let reach = 16.0 * (h * speed + probe_scale(&y));
        let tol = 1e-9 * (1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let old_status = self.status;
        self.t = target;
        match project_to_boundary(&owner, &y, &n, a, b, reach, tol)? {
            Some(p) => {
                self.x = p;
                (self.leaf, self.status) = self.pair(&self.x)?;
                self.record();
                let stop = self.root_changed(old_status);
                Ok((Mode::Sliding { a, b }, stop))
            }
            None => {
                // The surface ended or bent away; continue with whatever owns y.
                self.x = y;
                (self.leaf, self.status) = self.pair(&self.x)?;
                self.record();
                self.event(EventKind::SlideExit, a, b);
                let stop = self.root_changed(old_status);
                Ok((Mode::Normal, stop))
            }
        }
    }
}

/// Integrates from `x0` until `t_end` (or the first root Success when
/// `stop_on_root_success` is set).
pub fn integrate(plant: &Plant, bt: &BehaviorTree, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory, ExecError> {
    cfg.validate()?;
    bt.check_state(x0).map_err(|e| match e {
        BtError::NonFiniteState => ExecError::NonFiniteState { t: 0.0 },
        other => ExecError::Bt(other),
    })?;
    guard(x0, 0.0)?;
    if plant.state_dim() != bt.state_dim() || plant.control_dim() != bt.control_dim() {
        return Err(ExecError::Bt(BtError::DimensionMismatch {
            expected: bt.state_dim(),
            found: plant.state_dim(),
        }));
    }
    let (leaf, status) = bt.resolve(x0)?;
    let mut run = Run {
        plant,
        bt,
        cfg,
        t: 0.0,
        x: x0.to_vec(),
        leaf,
        status,
        samples: Vec::new(),
        events: Vec::new(),
        recent_switches: VecDeque::new(),
    };
    run.record();
    let mut stop = run.root_changed(Status::Running);
    let mut mode = Mode::Normal;
    while !stop && run.t < cfg.t_end {
        let target = run.next_target();
        if target <= run.t {
            break;
        }
        let t_before = run.t;
        (mode, stop) = match mode {
            Mode::Normal => run.normal_step(target),
            Mode::Sliding { a, b } => run.sliding_step(a, b, target),
        }
        .map_err(|e| match e {
            ExecError::NonFiniteState { t } if t.is_nan() => ExecError::NonFiniteState { t: t_before },
            other => other,
        })?;
    }
    Ok(Trajectory {
        meta: cfg.meta(x0),
        samples: run.samples,
        events: run.events,
    })
}

/// Integrates every initial condition independently, in parallel. Results
/// keep input order and do not depend on the worker count.
pub fn batch_integrate(
    plant: &Plant,
    bt: &BehaviorTree,
    initial_conditions: &[Vec<f64>],
    cfg: &IntegratorConfig,
) -> Vec<Result<Trajectory, ExecError>> {
    initial_conditions
        .par_iter()
        .map(|x0| integrate(plant, bt, x0, cfg))
        .collect()
}

/// Two points within `probe_eps` of each other, owned by different leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPair {
    pub inner: Vec<f64>,
    pub inner_leaf: NodeId,
    pub outer: Vec<f64>,
    pub outer_leaf: NodeId,
}

/// Finds boundary pairs by bisecting random segments whose endpoints have
/// different owners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySampler {
    pub domain: DomainBox,
    pub count: usize,
    pub seed: u64,
    pub probe_eps: f64,
    /// Segment draws allowed per requested pair.
    pub attempts_per_pair: usize,
}

impl BoundarySampler {
    pub fn new(domain: DomainBox, count: usize, seed: u64, probe_eps: f64) -> Self {
        BoundarySampler {
            domain,
            count,
            seed,
            probe_eps,
            attempts_per_pair: 100,
        }
    }

    pub fn pairs(&self, bt: &BehaviorTree) -> Result<Vec<BoundaryPair>, ExecError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            self.domain
                .lo()
                .iter()
                .zip(self.domain.hi())
                .map(|(&lo, &hi)| if lo < hi { rng.gen_range(lo..hi) } else { lo })
                .collect()
        };
        let mut out = Vec::with_capacity(self.count);
        for _ in 0..self.count.saturating_mul(self.attempts_per_pair) {
            if out.len() == self.count {
                break;
            }
            let mut lo = draw(&mut rng);
            let mut hi = draw(&mut rng);
            let lo_leaf = bt.active_leaf(&lo)?;
            let mut hi_leaf = bt.active_leaf(&hi)?;
            if lo_leaf == hi_leaf {
                continue;
            }
            loop {
                let dist = lo.iter().zip(&hi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if dist <= self.probe_eps {
                    break;
                }
                let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
                if mid == lo || mid == hi {
                    break;
                }
                let m = bt.active_leaf(&mid)?;
                if m == lo_leaf {
                    lo = mid;
                } else {
                    hi = mid;
                    hi_leaf = m;
                }
            }
            out.push(BoundaryPair {
                inner: lo,
                inner_leaf: lo_leaf,
                outer: hi,
                outer_leaf: hi_leaf,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityViolation {
    pub pair: BoundaryPair,
    pub normal: Vec<f64>,
    /// `n·f` for the inner leaf's field at the inner point; `n` points outward.
    pub inner_normal_speed: f64,
    pub outer_normal_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub boundary_points_tested: usize,
    pub ok: usize,
    pub violations: Vec<TransversalityViolation>,
}

impl TransversalityReport {
    pub fn ok_fraction(&self) -> f64 {
        self.ok as f64 / self.boundary_points_tested as f64
    }
}

/// At each pair, passes if the inner field crosses toward the outer region
/// or the outer field crosses toward the inner one.
pub fn check_transversality(plant: &Plant, bt: &BehaviorTree, pairs: &[BoundaryPair]) -> Result<TransversalityReport, ExecError> {
    if pairs.is_empty() {
        return Err(ExecError::EmptySampler);
    }
    let owner = |y: &[f64]| bt.active_leaf(y);
    let field = |leaf: NodeId, y: &[f64]| -> Result<Vec<f64>, ExecError> {
        let u = bt.leaf_control(leaf, y)?;
        Ok(plant.eval(y, &u)?)
    };
    let verdicts = pairs
        .par_iter()
        .map(|p| -> Result<Option<TransversalityViolation>, ExecError> {
            let chord: Vec<f64> = p.outer.iter().zip(&p.inner).map(|(a, b)| a - b).collect();
            let n = estimate_normal(&owner, &p.outer, p.inner_leaf, p.outer_leaf, &chord)?;
            let fi = dot(&n, &field(p.inner_leaf, &p.inner)?);
            let fo = dot(&n, &field(p.outer_leaf, &p.outer)?);
            Ok(if fi > 0.0 || fo < 0.0 {
                None
            } else {
                Some(TransversalityViolation {
                    pair: p.clone(),
                    normal: n,
                    inner_normal_speed: fi,
                    outer_normal_speed: fo,
                })
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let violations: Vec<_> = verdicts.into_iter().flatten().collect();
    Ok(TransversalityReport {
        boundary_points_tested: pairs.len(),
        ok: pairs.len() - violations.len(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::tests::{thermostat, T};
    use crate::bt::{BtNode, LeafBehavior};

    fn ramp_plant() -> Plant {
        Plant::new(1, 1, |_, u| vec![u[0]])
    }

    fn cfg(dt: f64, t_end: f64) -> IntegratorConfig {
        IntegratorConfig {
            dt,
            t_end,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        for bad in [
            IntegratorConfig { dt: 0.0, ..Default::default() },
            IntegratorConfig { event_tol: 0.01, ..Default::default() },
            IntegratorConfig { sliding_eps: 0.0, ..Default::default() },
            IntegratorConfig { max_chatter: 1, ..Default::default() },
            IntegratorConfig { t_end: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(ExecError::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn rk4_is_fourth_order_on_exponential() {
        // ẏ = y, y(0) = 1: one step has local error ~ h⁵/120.
        let g = |y: &[f64]| Ok(vec![y[0]]);
        let e1 = (rk4_step(g, &[1.0], 0.1).unwrap()[0] - 0.1_f64.exp()).abs();
        let e2 = (rk4_step(g, &[1.0], 0.05).unwrap()[0] - 0.05_f64.exp()).abs();
        assert!(e1 / e2 > 28.0 && e1 / e2 < 36.0, "{}", e1 / e2);
    }

    #[test]
    fn thermostat_ramp_then_slide() {
        let bt = thermostat();
        let traj = integrate(&ramp_plant(), &bt, &[T - 2.0], &cfg(0.01, 5.0)).unwrap();
        let first_switch = traj.events_of(EventKind::Switch).next().unwrap();
        assert!((first_switch.t - 2.0).abs() <= 1e-5, "{}", first_switch.t);
        let enter = traj.events_of(EventKind::SlideEnter).next().unwrap();
        assert!((enter.t - 2.0).abs() <= 1e-4);
        assert_eq!(traj.events_of(EventKind::SlideEnter).count(), 1);
        assert_eq!(traj.events_of(EventKind::SlideExit).count(), 0);
        for s in &traj.samples {
            if s.t < 2.0 - 1e-6 {
                assert!((s.x[0] - (T - 2.0 + s.t)).abs() < 1e-9);
            }
            if s.t >= enter.t {
                assert!((s.x[0] - T).abs() <= 1e-5, "{s:?}");
            }
        }
        assert_eq!(traj.last().t, 5.0);
        assert!(traj.samples.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn thermostat_starting_on_surface_slides() {
        let bt = thermostat();
        let traj = integrate(&ramp_plant(), &bt, &[T], &cfg(0.01, 1.0)).unwrap();
        assert!(traj.events_of(EventKind::SlideEnter).next().unwrap().t < 0.01);
        assert!(traj.samples.iter().all(|s| (s.x[0] - T).abs() <= 1e-5));
    }

    #[test]
    fn switch_events_are_bracketed() {
        let bt = thermostat();
        let traj = integrate(&ramp_plant(), &bt, &[T + 3.0], &cfg(0.01, 4.0)).unwrap();
        for e in traj.events_of(EventKind::Switch) {
            let i = traj.samples.iter().position(|s| s.t == e.t).unwrap();
            assert_eq!(traj.samples[i].leaf, e.to);
            assert_ne!(e.from, e.to);
            assert!(e.t - traj.samples[i - 1].t <= 0.01 + 1e-12);
        }
        let first = traj.events_of(EventKind::Switch).next().unwrap();
        assert!((first.t - 3.0).abs() <= 1e-5);
    }

    #[test]
    fn repelling_boundary_is_a_transversality_violation() {
        // x < 0 runs left, x ≥ 0 runs right: both fields leave the surface.
        let bt = BehaviorTree::new(
            BtNode::fal(vec![
                BtNode::Leaf(LeafBehavior::new(
                    "left",
                    |_| vec![-1.0],
                    |x| if x[0] < 0.0 { Status::Running } else { Status::Failure },
                )),
                BtNode::Leaf(LeafBehavior::new("right", |_| vec![1.0], |_| Status::Running)),
            ]),
            1,
            1,
        )
        .unwrap();
        let domain = DomainBox::new(vec![(-1.0, 1.0)]).unwrap();
        let pairs = BoundarySampler::new(domain, 20, 1, 1e-6).pairs(&bt).unwrap();
        assert_eq!(pairs.len(), 20);
        let report = check_transversality(&ramp_plant(), &bt, &pairs).unwrap();
        assert_eq!(report.ok, 0);
        assert_eq!(report.violations.len(), 20);
        assert!(matches!(check_transversality(&ramp_plant(), &bt, &[]), Err(ExecError::EmptySampler)));
    }

    #[test]
    fn thermostat_transversality() {
        let bt = thermostat();
        let domain = DomainBox::new(vec![(T - 10.0, T + 10.0)]).unwrap();
        let pairs = BoundarySampler::new(domain, 100, 5, 1e-6).pairs(&bt).unwrap();
        assert_eq!(pairs.len(), 100);
        for p in &pairs {
            assert!((p.inner[0] - T).abs() < 1e-6 && (p.outer[0] - T).abs() < 1e-6);
        }
        let report = check_transversality(&ramp_plant(), &bt, &pairs).unwrap();
        assert_eq!(report.ok, 100);
    }

    #[test]
    fn blow_up_is_reported() {
        let bt = BehaviorTree::new(BtNode::Leaf(LeafBehavior::new("grow", |_| vec![0.0], |_| Status::Running)), 1, 1).unwrap();
        let plant = Plant::new(1, 1, |x, _| vec![x[0] * x[0]]);
        let err = integrate(&plant, &bt, &[1.0], &cfg(0.01, 5.0)).unwrap_err();
        assert!(matches!(err, ExecError::NonFiniteState { t } if t > 0.9 && t <= 1.02), "{err:?}");
    }

    #[test]
    fn batch_isolates_errors() {
        let bt = thermostat();
        let inits = vec![vec![T - 1.0], vec![f64::NAN], vec![T + 1.0]];
        let out = batch_integrate(&ramp_plant(), &bt, &inits, &cfg(0.01, 2.0));
        assert_eq!(out.len(), 3);
        assert!(out[0].is_ok() && out[2].is_ok());
        assert!(matches!(out[1], Err(ExecError::NonFiniteState { t }) if t == 0.0));
        assert!(batch_integrate(&ramp_plant(), &bt, &[], &cfg(0.01, 2.0)).is_empty());
        let again = batch_integrate(&ramp_plant(), &bt, &inits[..1], &cfg(0.01, 2.0));
        assert_eq!(again[0], out[0]);
    }

    #[test]
    fn triple_junction_aborts() {
        // Quadrant I (a), quadrant II (b) and the lower half-plane (c) all
        // drive the state toward the origin, where the three regions meet.
        let bt = BehaviorTree::new(
            BtNode::fal(vec![
                BtNode::Leaf(LeafBehavior::new(
                    "a",
                    |_| vec![1.0, 1.0],
                    |x| if x[0] > 0.0 && x[1] > 0.0 { Status::Running } else { Status::Failure },
                )),
                BtNode::Leaf(LeafBehavior::new(
                    "b",
                    |_| vec![-1.0, 0.5],
                    |x| if x[0] <= 0.0 && x[1] > 0.0 { Status::Running } else { Status::Failure },
                )),
                BtNode::Leaf(LeafBehavior::new("c", |_| vec![0.0, -1.0], |_| Status::Running)),
            ]),
            2,
            2,
        )
        .unwrap();
        let plant = Plant::new(2, 2, |_, u| vec![-u[0], -u[1]]);
        let err = integrate(&plant, &bt, &[0.05, 0.07], &cfg(0.01, 1.0)).unwrap_err();
        assert!(matches!(err, ExecError::TripleJunction { ref leaves, .. } if leaves.len() == 3), "{err:?}");
    }
}
