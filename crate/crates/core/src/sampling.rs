//! Seeded point samplers over axis-aligned boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("box bound {axis} is invalid: [{lo}, {hi}]")]
    InvalidBounds { axis: usize, lo: f64, hi: f64 },
    #[error("cannot parse box `{0}`; expected lo:hi,lo:hi,...")]
    BadBoxSyntax(String),
    #[error("grid needs at least 2 points per axis, got {0}")]
    GridTooSmall(usize),
    #[error("sampler yielded no points")]
    Empty,
}

/// Axis-aligned box `[lo₁,hi₁] × … × [loₙ,hiₙ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, SamplingError> {
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SamplingError::InvalidBounds { axis, lo, hi });
            }
        }
        let (lo, hi) = bounds.into_iter().unzip();
        Ok(DomainBox { lo, hi })
    }

    /// Parses `lo1:hi1,lo2:hi2,...`.
    pub fn parse(text: &str) -> Result<Self, SamplingError> {
        let bad = || SamplingError::BadBoxSyntax(text.to_string());
        let bounds = text
            .split(',')
            .map(|axis| {
                let (lo, hi) = axis.split_once(':').ok_or_else(bad)?;
                let lo = lo.trim().parse::<f64>().map_err(|_| bad())?;
                let hi = hi.trim().parse::<f64>().map_err(|_| bad())?;
                Ok((lo, hi))
            })
            .collect::<Result<Vec<_>, SamplingError>>()?;
        Self::new(bounds)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lo).zip(&self.hi).all(|((v, lo), hi)| lo <= v && v <= hi)
    }
}

/// Closed ball to keep sampled points away from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    /// Moves `x` radially onto the sphere if it lies strictly inside the ball.
    /// A point at the exact center is pushed along the last axis.
    pub fn push_out(&self, x: &mut [f64]) {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= self.radius {
            return;
        }
        if norm == 0.0 {
            if let Some(last) = x.last_mut() {
                *last += self.radius;
            }
            return;
        }
        for (xi, (ci, di)) in x.iter_mut().zip(self.center.iter().zip(&d)) {
            *xi = ci + di * self.radius / norm;
        }
    }
}

/// Source of sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sampler {
    /// `count` independent uniform draws from a ChaCha8 stream seeded with `seed`.
    Uniform {
        domain: DomainBox,
        count: usize,
        seed: u64,
    },
    /// Regular grid with `per_axis` points per axis; the last axis varies fastest.
    Grid { domain: DomainBox, per_axis: usize },
    Points(Vec<Vec<f64>>),
    Chain(Vec<Sampler>),
}

impl Sampler {
    pub fn uniform(domain: DomainBox, count: usize, seed: u64) -> Self {
        Sampler::Uniform { domain, count, seed }
    }

    pub fn grid(domain: DomainBox, per_axis: usize) -> Result<Self, SamplingError> {
        if per_axis < 2 {
            return Err(SamplingError::GridTooSmall(per_axis));
        }
        Ok(Sampler::Grid { domain, per_axis })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Sampler::Uniform { domain, count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|_| {
                        domain
                            .lo
                            .iter()
                            .zip(&domain.hi)
                            .map(|(&lo, &hi)| if lo < hi { rng.gen_range(lo..hi) } else { lo })
                            .collect()
                    })
                    .collect()
            }
            Sampler::Grid { domain, per_axis } => grid_points(domain, *per_axis),
            Sampler::Points(p) => p.clone(),
            Sampler::Chain(parts) => parts.iter().flat_map(Sampler::points).collect(),
        }
    }
}

/// How a batch of initial conditions is laid out over a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitKind {
    /// The smallest regular grid with at least `count` points.
    Grid,
    Random,
}

/// Initial conditions over `domain`, each pushed out of every `avoid` ball.
pub fn initial_conditions(
    domain: &DomainBox,
    avoid: &[Ball],
    kind: InitKind,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, SamplingError> {
    if count == 0 {
        return Err(SamplingError::Empty);
    }
    let sampler = match kind {
        InitKind::Random => Sampler::uniform(domain.clone(), count, seed),
        InitKind::Grid => {
            let n = domain.dim() as u32;
            let mut per_axis: usize = 2;
            while per_axis.pow(n) < count {
                per_axis += 1;
            }
            Sampler::grid(domain.clone(), per_axis)?
        }
    };
    let mut points = sampler.points();
    for p in &mut points {
        for ball in avoid {
            ball.push_out(p);
        }
    }
    Ok(points)
}

fn grid_points(domain: &DomainBox, per_axis: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    if per_axis == 0 || n == 0 {
        return Vec::new();
    }
    let coord = |axis: usize, k: usize| {
        if per_axis == 1 {
            domain.lo[axis]
        } else {
            let (lo, hi) = (domain.lo[axis], domain.hi[axis]);
            // Exact endpoints regardless of rounding.
            if k + 1 == per_axis {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (per_axis - 1) as f64
            }
        }
    };
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; n];
            for axis in (0..n).rev() {
                p[axis] = coord(axis, flat % per_axis);
                flat /= per_axis;
            }
            p
        })
        .collect()
}
