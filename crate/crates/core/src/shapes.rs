//! Initial boundary builders. All shapes come back arc-equispaced so the
//! stepper starts from well-conditioned marker distributions.

use crate::error::{Error, Result};
use crate::geometry::MarkerCurve;
use crate::vec2::Vec2;
use std::f64::consts::PI;

/// One cosine perturbation mode of a circle radius.
#[derive(Clone, Copy, Debug)]
pub struct FourierMode {
    pub k: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// Circle with `n` markers at exactly equal angles.
pub fn circle(center: Vec2, r: f64, n: usize) -> Result<MarkerCurve> {
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::InvalidInput(format!("circle radius must be positive, got {r}")));
    }
    let pts = (0..n)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / n as f64;
            center + Vec2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    MarkerCurve::new(pts)
}

/// Axis-aligned ellipse with `n` markers equispaced in arc length.
pub fn ellipse(center: Vec2, a: f64, b: f64, n: usize) -> Result<MarkerCurve> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput(format!(
            "ellipse semi-axes must be positive, got a={a}, b={b}"
        )));
    }
    let dense = dense_polygon(n, |th| center + Vec2::new(a * th.cos(), b * th.sin()));
    MarkerCurve::new(equipartition_closed(&dense, n))
}

/// Circle of base radius `r0` with radius perturbation
/// `r(theta) = r0 (1 + sum_m amplitude_m cos(k_m theta + phase_m))`,
/// markers equispaced in arc length.
pub fn fourier_circle(
    center: Vec2,
    r0: f64,
    modes: &[FourierMode],
    n: usize,
) -> Result<MarkerCurve> {
    if r0 <= 0.0 || !r0.is_finite() {
        return Err(Error::InvalidInput(format!("base radius must be positive, got {r0}")));
    }
    let radius = |th: f64| {
        let mut r = 1.0;
        for m in modes {
            r += m.amplitude * (m.k as f64 * th + m.phase).cos();
        }
        r0 * r
    };
    let probes = 8192.max(16 * n);
    let min_r = (0..probes)
        .map(|i| radius(2.0 * PI * i as f64 / probes as f64))
        .fold(f64::INFINITY, f64::min);
    if min_r <= 0.01 * r0 {
        return Err(Error::InvalidInput(format!(
            "perturbed radius reaches {min_r:.3e}, too close to zero (base {r0})"
        )));
    }
    let dense = dense_polygon(n, |th| {
        let r = radius(th);
        center + Vec2::new(r * th.cos(), r * th.sin())
    });
    MarkerCurve::new(equipartition_closed(&dense, n))
}

fn dense_polygon(n: usize, f: impl Fn(f64) -> Vec2) -> Vec<Vec2> {
    let m = 8192.max(32 * n);
    (0..m).map(|i| f(2.0 * PI * i as f64 / m as f64)).collect()
}

/// `n` points of a dense closed polygon equispaced in cumulative chord
/// length, anchored at vertex 0.
pub(crate) fn equipartition_closed(dense: &[Vec2], n: usize) -> Vec<Vec2> {
    let m = dense.len();
    let mut cum = vec![0.0f64; m + 1];
    for i in 0..m {
        cum[i + 1] = cum[i] + dense[i].dist(dense[(i + 1) % m]);
    }
    let total = cum[m];
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let target = total * k as f64 / n as f64;
        while seg + 1 < m && cum[seg + 1] <= target {
            seg += 1;
        }
        let t = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
        out.push(dense[seg] + (dense[(seg + 1) % m] - dense[seg]) * t);
    }
    out
}
