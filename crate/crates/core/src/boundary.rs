//! Numerical geometry of the surface separating two operating regions.
//!
//! Regions are only available through a membership oracle (`owner(x)` names
//! the leaf whose region contains `x`), so normals and projections are found
//! by line searches and bisection.

use crate::bt::BtError;
use crate::tree::NodeId;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n.is_finite() && n > 0.0).then(|| v.iter().map(|a| a / n).collect())
}

fn axpy(p: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    p.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// Local length scale for probes around `p`.
pub(crate) fn probe_scale(p: &[f64]) -> f64 {
    1e-4 * (1.0 + p.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Two-leaf membership oracle: `Some(false)` on `a`'s side, `Some(true)` on
/// `b`'s, `None` if a third region is hit.
struct Sides<'f, F> {
    owner: &'f F,
    a: NodeId,
    b: NodeId,
}

impl<F> Sides<'_, F>
where
    F: Fn(&[f64]) -> Result<NodeId, BtError>,
{
    fn side(&self, x: &[f64]) -> Result<Option<bool>, BtError> {
        let o = (self.owner)(x)?;
        Ok(if o == self.a {
            Some(false)
        } else if o == self.b {
            Some(true)
        } else {
            None
        })
    }

    /// Parameter `s` with `q + s·d` on the a→b boundary, searching
    /// outward from `s = 0` up to `reach`.
    fn crossing(&self, q: &[f64], d: &[f64], reach: f64, tol: f64) -> Result<Option<f64>, BtError> {
        let mut span = reach / 64.0;
        let (mut lo, mut hi) = loop {
            let below = self.side(&axpy(q, -span, d))?;
            let above = self.side(&axpy(q, span, d))?;
            if below == Some(false) && above == Some(true) {
                break (-span, span);
            }
            if span >= reach {
                return Ok(None);
            }
            span *= 2.0;
        };
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            match self.side(&axpy(q, mid, d))? {
                Some(false) => lo = mid,
                Some(true) => hi = mid,
                None => return Ok(None),
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }
}

/// Unit normal of the `a`/`b` boundary near `p`, oriented from `a` to `b`.
///
/// `chord` is any direction transversal to the boundary; it is flipped if it
/// points from `b` to `a`. For each
/// axis `k`, the crossings of lines parallel to `chord` through `p ± h·e_k`
/// give the slope of the surface; the gradient of the implicit surface is
/// minus the vector of those slopes. Falls back to `chord` if a probe misses
/// the boundary or leaves the two regions.
pub fn estimate_normal<F>(owner: &F, p: &[f64], a: NodeId, b: NodeId, chord: &[f64]) -> Result<Vec<f64>, BtError>
where
    F: Fn(&[f64]) -> Result<NodeId, BtError>,
{
    let mut c = match normalize(chord) {
        Some(c) => c,
        None => return Ok(chord.to_vec()),
    };
    let sides = Sides { owner, a, b };
    let h = probe_scale(p);
    let reach = 64.0 * h;
    // Orient the chord from a to b if it visibly points the other way.
    let mut s = h;
    while s <= reach {
        match (sides.side(&axpy(p, -s, &c))?, sides.side(&axpy(p, s, &c))?) {
            (Some(false), Some(true)) => break,
            (Some(true), Some(false)) => {
                c.iter_mut().for_each(|v| *v = -*v);
                break;
            }
            _ => s *= 2.0,
        }
    }
    let tol = h * 1e-6;
    let mut g = vec![0.0; p.len()];
    for k in 0..p.len() {
        let mut plus = p.to_vec();
        plus[k] += h;
        let mut minus = p.to_vec();
        minus[k] -= h;
        match (
            sides.crossing(&plus, &c, reach, tol)?,
            sides.crossing(&minus, &c, reach, tol)?,
        ) {
            (Some(sp), Some(sm)) => g[k] = -(sp - sm) / 2.0,
            _ => return Ok(c),
        }
    }
    match normalize(&g) {
        Some(n) if dot(&n, &c) > 0.0 => Ok(n),
        Some(n) if dot(&n, &c) < 0.0 => Ok(n.iter().map(|v| -v).collect()),
        _ => Ok(c),
    }
}

/// Point on `b`'s side of the boundary within `tol` of it, found by
/// bisecting along `n` through `p`. `None` if the segment
/// `p ± reach·n` does not straddle the boundary.
pub fn project_to_boundary<F>(
    owner: &F,
    p: &[f64],
    n: &[f64],
    a: NodeId,
    b: NodeId,
    reach: f64,
    tol: f64,
) -> Result<Option<Vec<f64>>, BtError>
where
    F: Fn(&[f64]) -> Result<NodeId, BtError>,
{
    let sides = Sides { owner, a, b };
    let mut span = reach / 1024.0;
    let (mut lo, mut hi) = loop {
        let below = sides.side(&axpy(p, -span, n))?;
        let above = sides.side(&axpy(p, span, n))?;
        if below == Some(false) && above == Some(true) {
            break (-span, span);
        }
        if span >= reach {
            return Ok(None);
        }
        span *= 2.0;
    };
    // Keep the bracket tight around the closest crossing to `p`.
    if sides.side(p)? == Some(true) {
        hi = 0.0;
    } else if sides.side(p)? == Some(false) {
        lo = 0.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match sides.side(&axpy(p, mid, n))? {
            Some(false) => lo = mid,
            Some(true) => hi = mid,
            None => return Ok(None),
        }
    }
    Ok(Some(axpy(p, hi, n)))
}
