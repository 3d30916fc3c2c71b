//! Closed marker curves: validation, normals, metrics, arc-length
//! redistribution, and regularity diagnostics.

use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;
use crate::vec2::{Kahan, Vec2};

/// Closed boundary curve sampled by markers, ordered counterclockwise.
///
/// Markers are the vertices of a simple polygon; the edge from the last
/// marker back to the first closes the curve. Construction enforces: at
/// least 8 markers, finite coordinates, positive signed area
/// (counterclockwise order), and no two consecutive markers closer than
/// 1e-12 of the bounding-box diagonal.
#[derive(Clone, Debug)]
pub struct MarkerCurve {
    pts: Vec<Vec2>,
}

/// Cheap per-curve summary; everything here is O(N).
#[derive(Clone, Copy, Debug)]
pub struct CurveMetrics {
    /// Enclosed (signed, positive) polygon area.
    pub area: f64,
    /// Polygon centroid (area-weighted, not the vertex mean).
    pub centroid: Vec2,
    /// Polygon perimeter.
    pub perimeter: f64,
    pub min_spacing: f64,
    pub max_spacing: f64,
}

impl MarkerCurve {
    pub fn new(pts: Vec<Vec2>) -> Result<Self> {
        if pts.len() < 8 {
            return Err(Error::InvalidCurve(format!(
                "need at least 8 markers, got {}",
                pts.len()
            )));
        }
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidCurve("non-finite marker coordinates".into()));
        }
        let (lo, hi) = bbox_of(&pts);
        let diag = (hi - lo).norm();
        if diag == 0.0 {
            return Err(Error::InvalidCurve("all markers coincide".into()));
        }
        let n = pts.len();
        for i in 0..n {
            let d = pts[i].dist(pts[(i + 1) % n]);
            if d <= 1e-12 * diag {
                return Err(Error::InvalidCurve(format!(
                    "markers {i} and {} nearly coincide (spacing {d:.3e})",
                    (i + 1) % n
                )));
            }
        }
        if polygon_area(&pts) <= 0.0 {
            return Err(Error::InvalidCurve(
                "markers must be ordered counterclockwise (signed area <= 0)".into(),
            ));
        }
        Ok(MarkerCurve { pts })
    }

    /// Construction without the validity checks, for internal intermediate
    /// curves (Runge-Kutta stages, history interpolants) that are built from
    /// already-validated data.
    pub(crate) fn from_points_unchecked(pts: Vec<Vec2>) -> Self {
        debug_assert!(pts.len() >= 8);
        MarkerCurve { pts }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[Vec2] {
        &self.pts
    }

    pub fn point(&self, i: usize) -> Vec2 {
        self.pts[i]
    }

    /// Axis-aligned bounding box (min corner, max corner).
    pub fn bbox(&self) -> (Vec2, Vec2) {
        bbox_of(&self.pts)
    }

    /// Unit outward normal at marker i from the periodic 4-point tangent
    /// stencil 8(p_{i+1} - p_{i-1}) - (p_{i+2} - p_{i-2}), which is exact on
    /// equispaced circles and O(h^4) on smooth equispaced curves.
    pub fn outward_normal(&self, i: usize) -> Result<Vec2> {
        let n = self.pts.len();
        if i >= n {
            return Err(Error::InvalidInput(format!("marker index {i} out of range {n}")));
        }
        stencil_normal(&self.pts, i)
    }

    /// Outward normals at every marker.
    pub fn outward_normals(&self) -> Result<Vec<Vec2>> {
        (0..self.pts.len()).map(|i| stencil_normal(&self.pts, i)).collect()
    }

    pub fn metrics(&self) -> CurveMetrics {
        let pts = &self.pts;
        let n = pts.len();
        let mut area = Kahan::default();
        let mut cx = Kahan::default();
        let mut cy = Kahan::default();
        let mut perim = Kahan::default();
        let mut min_sp = f64::INFINITY;
        let mut max_sp = 0.0f64;
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            let cr = a.cross(b);
            area.add(cr);
            cx.add((a.x + b.x) * cr);
            cy.add((a.y + b.y) * cr);
            let d = a.dist(b);
            perim.add(d);
            min_sp = min_sp.min(d);
            max_sp = max_sp.max(d);
        }
        let area2 = area.value();
        CurveMetrics {
            area: 0.5 * area2,
            centroid: Vec2::new(cx.value(), cy.value()) / (3.0 * area2),
            perimeter: perim.value(),
            min_spacing: min_sp,
            max_spacing: max_sp,
        }
    }

    /// Largest pairwise marker distance. O(N^2); use `bbox` when an
    /// equivalent scale is enough.
    pub fn diameter(&self) -> f64 {
        let mut d2 = 0.0f64;
        for (i, &p) in self.pts.iter().enumerate() {
            for &q in &self.pts[i + 1..] {
                d2 = d2.max((p - q).norm_sq());
            }
        }
        d2.sqrt()
    }

    /// Cumulative chord arc length at each marker plus the total perimeter.
    pub(crate) fn chord_arcs(&self) -> (Vec<f64>, f64) {
        let n = self.pts.len();
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            cum.push(acc);
            acc += self.pts[i].dist(self.pts[(i + 1) % n]);
        }
        (cum, acc)
    }

    /// Resample to `n_target` markers equispaced in arc length along a
    /// periodic cubic spline through the current markers.
    ///
    /// The first new marker stays anchored at marker 0, so an already
    /// equispaced curve is a fixed point. Errors with a self-intersection if
    /// the resampled polygon crosses itself, which is how an unresolvable
    /// (near blow-up) state announces itself.
    pub fn redistribute(&self, n_target: usize) -> Result<MarkerCurve> {
        if n_target < 8 {
            return Err(Error::InvalidInput(format!(
                "redistribution target must be at least 8 markers, got {n_target}"
            )));
        }
        let spline = PeriodicSpline::fit(&self.pts)?;
        let pts = spline.equispaced(n_target);
        let curve = MarkerCurve::new(pts)?;
        if let Some((i, j)) = curve.find_self_intersection() {
            return Err(Error::SelfIntersection(i, j));
        }
        Ok(curve)
    }

    /// First pair of non-adjacent edges that intersect, if any. O(N^2).
    pub fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let pts = &self.pts;
        let n = pts.len();
        for i in 0..n {
            let a1 = pts[i];
            let a2 = pts[(i + 1) % n];
            for j in i + 2..n {
                // Skip the shared-vertex neighbours, including the wrap pair.
                if i == 0 && j == n - 1 {
                    continue;
                }
                let b1 = pts[j];
                let b2 = pts[(j + 1) % n];
                if segments_intersect(a1, a2, b1, b2) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Winding number of the curve around p: 1 inside (counterclockwise),
    /// 0 outside. Points on the boundary land on either side by exact sign
    /// comparisons; callers that care keep their distance.
    pub fn winding_number(&self, p: Vec2) -> i32 {
        let pts = &self.pts;
        let n = pts.len();
        let mut wn = 0i32;
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            if a.y <= p.y {
                if b.y > p.y && (b - a).cross(p - a) > 0.0 {
                    wn += 1;
                }
            } else if b.y <= p.y && (b - a).cross(p - a) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.winding_number(p) != 0
    }

    /// Holder-gamma seminorm of the unit tangent field with respect to
    /// periodic arc-length distance: sup |t_i - t_j| / dist_arc(i,j)^gamma.
    ///
    /// This is the chart-free stand-in for the C^{1+gamma} norm of the
    /// boundary; it is reported as a proxy diagnostic, never asserted equal
    /// to a chart-based norm. For the unit circle at gamma = 1/2 the value
    /// is sup 2 sin(u/2)/sqrt(u) = 1.203837...
    pub fn tangent_holder(&self, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        let n = self.pts.len();
        let tangents: Vec<Vec2> = (0..n)
            .map(|i| stencil_normal(&self.pts, i).map(|nrm| Vec2::new(-nrm.y, nrm.x)))
            .collect::<Result<_>>()?;
        let (cum, total) = self.chord_arcs();
        let mut sup = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let along = cum[j] - cum[i];
                let dist = along.min(total - along);
                if dist <= 1e-14 * total {
                    continue;
                }
                let v = tangents[i].dist(tangents[j]) / dist.powf(gamma);
                sup = sup.max(v);
            }
        }
        Ok(sup)
    }
}

/// Worst-case inverse-bilipschitz constant between labels and current marker
/// positions: the smallest mu with |X_i - X_j| >= |a_i - a_j|/mu over all
/// pairs. Infinite when two distinct labels collide.
pub fn bilipschitz_lower(labels: &MarkerCurve, current: &MarkerCurve) -> Result<f64> {
    if labels.len() != current.len() {
        return Err(Error::MarkerCountMismatch(labels.len(), current.len()));
    }
    Ok(bilipschitz_points(labels.points(), current.points()))
}

pub(crate) fn bilipschitz_points(labels: &[Vec2], current: &[Vec2]) -> f64 {
    let n = labels.len();
    let mut mu = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let da = labels[i].dist(labels[j]);
            if da == 0.0 {
                continue;
            }
            let dx = current[i].dist(current[j]);
            if dx == 0.0 {
                return f64::INFINITY;
            }
            mu = mu.max(da / dx);
        }
    }
    mu
}

/// Value types the Holder seminorm can compare.
pub trait HolderValue: Copy {
    fn value_dist(self, other: Self) -> f64;
}

impl HolderValue for f64 {
    fn value_dist(self, other: Self) -> f64 {
        (self - other).abs()
    }
}

impl HolderValue for Vec2 {
    fn value_dist(self, other: Self) -> f64 {
        self.dist(other)
    }
}

/// Brute-force Holder-gamma seminorm sup |v_i - v_j| / |p_i - p_j|^gamma
/// over all sample pairs. Coincident points with different values give
/// infinity.
pub fn holder_seminorm<T: HolderValue>(points: &[Vec2], values: &[T], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if points.len() != values.len() {
        return Err(Error::MarkerCountMismatch(points.len(), values.len()));
    }
    if points.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let mut sup = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dv = values[i].value_dist(values[j]);
            let dp = points[i].dist(points[j]);
            if dp == 0.0 {
                if dv > 0.0 {
                    return Ok(f64::INFINITY);
                }
                continue;
            }
            sup = sup.max(dv / dp.powf(gamma));
        }
    }
    Ok(sup)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "Holder exponent must lie in (0, 1], got {gamma}"
        )));
    }
    Ok(())
}

fn bbox_of(pts: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

pub(crate) fn polygon_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    let mut acc = Kahan::default();
    for i in 0..n {
        acc.add(pts[i].cross(pts[(i + 1) % n]));
    }
    0.5 * acc.value()
}

fn stencil_normal(pts: &[Vec2], i: usize) -> Result<Vec2> {
    let n = pts.len();
    let p = |k: i64| pts[(i as i64 + k).rem_euclid(n as i64) as usize];
    let t = 8.0 * (p(1) - p(-1)) - (p(2) - p(-2));
    let span = (p(1) - p(-1)).norm() + (p(2) - p(-2)).norm();
    match t.normalized(1e-12 * span.max(1e-300)) {
        Some(unit) => Ok(unit.rot_cw()),
        None => Err(Error::DegenerateTangent(i)),
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, c: Vec2) -> bool {
    c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
}

/// Segment intersection with collinear-touch handling.
fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Periodic cubic spline through a closed marker polygon, chord-length
/// parametrized. Used only by redistribution; stepping never touches it.
struct PeriodicSpline {
    pts: Vec<Vec2>,
    /// Knot parameters, cumulative chord length, length n+1 with t[n] = period.
    knots: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<Vec2>,
    /// Arc length of each spline segment by 16-point Gauss quadrature.
    seg_arc: Vec<f64>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl PeriodicSpline {
    fn fit(pts: &[Vec2]) -> Result<Self> {
        let n = pts.len();
        let mut knots = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for i in 0..n {
            knots.push(acc);
            acc += pts[i].dist(pts[(i + 1) % n]);
        }
        knots.push(acc);

        // Cyclic tridiagonal system for the second derivatives.
        let h = |i: usize| knots[i + 1] - knots[i];
        let hm = |i: usize| if i == 0 { h(n - 1) } else { h(i - 1) };
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![Vec2::ZERO; n];
        for i in 0..n {
            sub[i] = hm(i) / 6.0;
            diag[i] = (hm(i) + h(i)) / 3.0;
            sup[i] = h(i) / 6.0;
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            rhs[i] = (next - pts[i]) / h(i) - (pts[i] - prev) / hm(i);
        }
        let m = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs)?;

        let (gl_nodes, gl_weights) = gauss_legendre(16);
        let mut spline = PeriodicSpline {
            pts: pts.to_vec(),
            knots,
            m,
            seg_arc: Vec::new(),
            gl_nodes,
            gl_weights,
        };
        let seg_arc: Vec<f64> =
            (0..n).map(|i| spline.partial_arc(i, spline.knots[i + 1])).collect();
        spline.seg_arc = seg_arc;
        Ok(spline)
    }

    fn endpoints(&self, seg: usize) -> (Vec2, Vec2, Vec2, Vec2, f64) {
        let n = self.pts.len();
        let p0 = self.pts[seg];
        let p1 = self.pts[(seg + 1) % n];
        let m0 = self.m[seg];
        let m1 = self.m[(seg + 1) % n];
        (p0, p1, m0, m1, self.knots[seg + 1] - self.knots[seg])
    }

    fn position(&self, seg: usize, t: f64) -> Vec2 {
        let (p0, p1, m0, m1, h) = self.endpoints(seg);
        let a = self.knots[seg + 1] - t;
        let b = t - self.knots[seg];
        m0 * (a * a * a / (6.0 * h))
            + m1 * (b * b * b / (6.0 * h))
            + (p0 / h - m0 * (h / 6.0)) * a
            + (p1 / h - m1 * (h / 6.0)) * b
    }

    fn derivative(&self, seg: usize, t: f64) -> Vec2 {
        let (p0, p1, m0, m1, h) = self.endpoints(seg);
        let a = self.knots[seg + 1] - t;
        let b = t - self.knots[seg];
        m0 * (-a * a / (2.0 * h)) + m1 * (b * b / (2.0 * h)) + (p1 - p0) / h
            + (m0 - m1) * (h / 6.0)
    }

    /// Arc length of segment `seg` from its left knot to parameter t.
    fn partial_arc(&self, seg: usize, t: f64) -> f64 {
        let t0 = self.knots[seg];
        if t <= t0 {
            return 0.0;
        }
        let half = 0.5 * (t - t0);
        let mid = 0.5 * (t + t0);
        self.gl_nodes
            .iter()
            .zip(&self.gl_weights)
            .map(|(&x, &w)| w * self.derivative(seg, mid + half * x).norm())
            .sum::<f64>()
            * half
    }

    /// `count` points equispaced in spline arc length, starting at marker 0.
    fn equispaced(&self, count: usize) -> Vec<Vec2> {
        let n = self.pts.len();
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for i in 0..n {
            cum.push(acc);
            acc += self.seg_arc[i];
        }
        cum.push(acc);
        let total = acc;

        let mut out = Vec::with_capacity(count);
        let mut seg = 0usize;
        for k in 0..count {
            let target = total * k as f64 / count as f64;
            while seg + 1 < n && cum[seg + 1] <= target {
                seg += 1;
            }
            let want = target - cum[seg];
            // Newton on partial_arc with bisection fallback; the integrand
            // |S'| is bounded away from zero for valid curves.
            let (mut lo, mut hi) = (self.knots[seg], self.knots[seg + 1]);
            let mut t = lo + (hi - lo) * want / self.seg_arc[seg].max(1e-300);
            for _ in 0..40 {
                let f = self.partial_arc(seg, t) - want;
                if f > 0.0 {
                    hi = t;
                } else {
                    lo = t;
                }
                let d = self.derivative(seg, t).norm();
                let mut next = t - f / d.max(1e-300);
                if !(next > lo && next < hi) {
                    next = 0.5 * (lo + hi);
                }
                if (next - t).abs() < 1e-13 * self.knots[n].max(1.0) {
                    t = next;
                    break;
                }
                t = next;
            }
            out.push(self.position(seg, t));
        }
        out
    }
}

/// Thomas algorithm plus a Sherman-Morrison corner correction for the
/// periodic closure. Coefficients are scalars, the right-hand side carries
/// 2-vectors.
fn solve_cyclic_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[Vec2],
) -> Result<Vec<Vec2>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::InvalidInput("cyclic system needs at least 3 rows".into()));
    }
    let corner_top = sub[0]; // A[0][n-1]
    let corner_bot = sup[n - 1]; // A[n-1][0]
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= corner_top * corner_bot / gamma;

    let tri = |d: &[f64], rhs_x: &mut Vec<f64>| -> Result<()> {
        // In-place Thomas solve with scratch superdiagonal.
        let mut c = vec![0.0; n];
        let mut denom = d[0];
        if denom.abs() < 1e-300 {
            return Err(Error::InvalidCurve("singular spline system".into()));
        }
        c[0] = sup[0] / denom;
        rhs_x[0] /= denom;
        for i in 1..n {
            denom = d[i] - sub[i] * c[i - 1];
            if denom.abs() < 1e-300 {
                return Err(Error::InvalidCurve("singular spline system".into()));
            }
            c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
            rhs_x[i] = (rhs_x[i] - sub[i] * rhs_x[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            let next = rhs_x[i + 1];
            rhs_x[i] -= c[i] * next;
        }
        Ok(())
    };

    // Solve for both coordinates and for the Sherman-Morrison column u.
    let mut yx: Vec<f64> = rhs.iter().map(|v| v.x).collect();
    let mut yy: Vec<f64> = rhs.iter().map(|v| v.y).collect();
    let mut z = vec![0.0; n];
    z[0] = gamma;
    z[n - 1] = corner_bot;
    tri(&d, &mut yx)?;
    tri(&d, &mut yy)?;
    tri(&d, &mut z)?;

    let vy_x = yx[0] + corner_top / gamma * yx[n - 1];
    let vy_y = yy[0] + corner_top / gamma * yy[n - 1];
    let vz = z[0] + corner_top / gamma * z[n - 1];
    let fac_x = vy_x / (1.0 + vz);
    let fac_y = vy_y / (1.0 + vz);
    Ok((0..n)
        .map(|i| Vec2::new(yx[i] - fac_x * z[i], yy[i] - fac_y * z[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn circle(center: Vec2, r: f64, n: usize) -> MarkerCurve {
        let pts = (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                center + Vec2::new(r * th.cos(), r * th.sin())
            })
            .collect();
        MarkerCurve::new(pts).unwrap()
    }

    fn clustered_circle(n: usize) -> MarkerCurve {
        // Angles bunched by a smooth reparametrization, spacing ratio ~2.
        let pts = (0..n)
            .map(|i| {
                let u = 2.0 * PI * i as f64 / n as f64;
                let th = u + 0.35 * u.sin();
                Vec2::new(th.cos(), th.sin())
            })
            .collect();
        MarkerCurve::new(pts).unwrap()
    }

    #[test]
    fn constructor_rejections() {
        let few: Vec<Vec2> = (0..5)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / 5.0;
                Vec2::new(th.cos(), th.sin())
            })
            .collect();
        assert!(matches!(MarkerCurve::new(few), Err(Error::InvalidCurve(_))));

        let mut cw: Vec<Vec2> = circle(Vec2::ZERO, 1.0, 16).points().to_vec();
        cw.reverse();
        assert!(matches!(MarkerCurve::new(cw), Err(Error::InvalidCurve(_))));

        let mut dup = circle(Vec2::ZERO, 1.0, 16).points().to_vec();
        dup[3] = dup[4];
        assert!(matches!(MarkerCurve::new(dup), Err(Error::InvalidCurve(_))));

        let mut nan = circle(Vec2::ZERO, 1.0, 16).points().to_vec();
        nan[0].x = f64::NAN;
        assert!(matches!(MarkerCurve::new(nan), Err(Error::InvalidCurve(_))));
    }

    #[test]
    fn circle_normal_is_radial() {
        let c = circle(Vec2::ZERO, 1.0, 64);
        let n0 = c.outward_normal(0).unwrap();
        assert_relative_eq!(n0.x, 1.0, epsilon = 1e-10);
        assert_relative_eq!(n0.y, 0.0, epsilon = 1e-10);
        for (i, p) in c.points().iter().enumerate() {
            let nrm = c.outward_normal(i).unwrap();
            // The stencil is symmetric, so the direction is exactly radial.
            assert!(nrm.dist(*p) < 1e-13);
        }
    }

    #[test]
    fn metrics_match_polygon_closed_forms() {
        let n = 256;
        let r = 1.7;
        let center = Vec2::new(0.3, -1.1);
        let c = circle(center, r, n);
        let m = c.metrics();
        let nf = n as f64;
        assert_relative_eq!(m.area, 0.5 * nf * (2.0 * PI / nf).sin() * r * r, epsilon = 1e-12);
        assert_relative_eq!(m.perimeter, 2.0 * nf * (PI / nf).sin() * r, epsilon = 1e-12);
        assert!(m.centroid.dist(center) < 1e-13);
        assert_relative_eq!(m.min_spacing, m.max_spacing, epsilon = 1e-12);
        assert_relative_eq!(c.diameter(), 2.0 * r, epsilon = 1e-4);
    }

    #[test]
    fn redistribute_is_fixed_point_on_equispaced_circle() {
        let c = circle(Vec2::ZERO, 1.0, 64);
        let r = c.redistribute(64).unwrap();
        let max_move = c
            .points()
            .iter()
            .zip(r.points())
            .map(|(a, b)| a.dist(*b))
            .fold(0.0f64, f64::max);
        assert!(max_move < 1e-10, "markers moved by {max_move}");
    }

    #[test]
    fn redistribute_equalizes_clustered_spacing() {
        let c = clustered_circle(128);
        let before = c.metrics();
        assert!(before.max_spacing / before.min_spacing > 1.5);
        let r = c.redistribute(128).unwrap();
        let after = r.metrics();
        assert!(
            after.max_spacing / after.min_spacing <= 1.01,
            "ratio {}",
            after.max_spacing / after.min_spacing
        );
        // Orientation preserved.
        assert!(after.area > 0.0);
    }

    #[test]
    fn redistribute_preserves_area_of_resolved_curves() {
        // Smooth oval, arc-equispaced markers at N = 256 (equipartition of a
        // dense polygon), as the resolved-curve contract requires.
        let n = 256usize;
        let dense: Vec<Vec2> = (0..64 * n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / (64 * n) as f64;
                Vec2::new(1.5 * th.cos(), 0.8 * th.sin())
            })
            .collect();
        let c = MarkerCurve::new(equipartition(&dense, n)).unwrap();
        let ratio = c.metrics().max_spacing / c.metrics().min_spacing;
        assert!(ratio < 1.001, "setup not equispaced, ratio {ratio}");
        let a0 = c.metrics().area;
        let r = c.redistribute(n).unwrap();
        assert_relative_eq!(r.metrics().area, a0, max_relative = 1e-6);
    }

    /// Pick `n` points of a dense closed polygon equispaced in cumulative
    /// chord length (test helper; production resampling is the spline).
    fn equipartition(dense: &[Vec2], n: usize) -> Vec<Vec2> {
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

    /// Limacon with an inner loop: smooth markers, positive total signed
    /// area, but the polygon crosses itself.
    fn inner_loop_curve(n: usize) -> MarkerCurve {
        let pts: Vec<Vec2> = (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                let r = 0.35 + th.cos();
                Vec2::new(r * th.cos() + 0.1, r * th.sin())
            })
            .collect();
        MarkerCurve::new(pts).unwrap()
    }

    #[test]
    fn self_intersection_detects_inner_loop() {
        let c = inner_loop_curve(48);
        assert!(c.find_self_intersection().is_some());
        match c.redistribute(48) {
            Err(Error::SelfIntersection(_, _)) => {}
            other => panic!("expected self-intersection, got {other:?}"),
        }
    }

    #[test]
    fn simple_curves_have_no_self_intersection() {
        assert!(circle(Vec2::ZERO, 1.0, 64).find_self_intersection().is_none());
        assert!(clustered_circle(64).find_self_intersection().is_none());
    }

    #[test]
    fn winding_classifies_inside_and_outside() {
        let c = circle(Vec2::new(1.0, 2.0), 1.5, 64);
        assert_eq!(c.winding_number(Vec2::new(1.0, 2.0)), 1);
        assert_eq!(c.winding_number(Vec2::new(1.0, 3.3)), 1);
        assert_eq!(c.winding_number(Vec2::new(4.0, 2.0)), 0);
        assert_eq!(c.winding_number(Vec2::new(1.0, -1.0)), 0);
        assert!(c.contains(Vec2::new(0.2, 1.4)));
    }

    #[test]
    fn bilipschitz_identity_and_scaling() {
        let c = circle(Vec2::ZERO, 1.0, 32);
        assert_relative_eq!(bilipschitz_lower(&c, &c).unwrap(), 1.0, epsilon = 1e-12);
        let half = MarkerCurve::new(c.points().iter().map(|&p| p * 0.5).collect()).unwrap();
        assert_relative_eq!(bilipschitz_lower(&c, &half).unwrap(), 2.0, epsilon = 1e-12);
        let other = circle(Vec2::ZERO, 1.0, 16);
        assert!(bilipschitz_lower(&c, &other).is_err());
    }

    #[test]
    fn holder_seminorm_linear_function() {
        // f(x) = x on 1001 equispaced points of [0,1], gamma = 1/2: the sup
        // of |dx|^{1/2} is 1 at the endpoint pair.
        let points: Vec<Vec2> = (0..=1000).map(|i| Vec2::new(i as f64 / 1000.0, 0.0)).collect();
        let values: Vec<f64> = points.iter().map(|p| p.x).collect();
        let s = holder_seminorm(&points, &values, 0.5).unwrap();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn holder_seminorm_vector_values_and_guards() {
        let points = vec![Vec2::ZERO, Vec2::new(1.0, 0.0)];
        let values = vec![Vec2::ZERO, Vec2::new(0.0, 3.0)];
        assert_relative_eq!(holder_seminorm(&points, &values, 1.0).unwrap(), 3.0);
        let coincident = vec![Vec2::ZERO, Vec2::ZERO];
        assert!(holder_seminorm(&coincident, &values, 1.0).unwrap().is_infinite());
        assert!(holder_seminorm(&points, &values, 1.5).is_err());
        assert!(holder_seminorm(&points, &values[..1], 0.5).is_err());
    }

    #[test]
    fn tangent_holder_of_circle_matches_closed_form() {
        // sup over u of 2 sin(u/2)/u^{1/2} = 1.203837 at u = 2.3311.
        let c = circle(Vec2::ZERO, 1.0, 4096);
        let v = c.tangent_holder(0.5).unwrap();
        assert_relative_eq!(v, 1.203837, epsilon = 1e-3);
        // Scale invariance in gamma = 1: circle tangents are 1-Lipschitz in
        // arc length with constant 1 (attained as u -> 0).
        let v1 = c.tangent_holder(1.0).unwrap();
        assert_relative_eq!(v1, 1.0, epsilon = 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        /// Star-shaped random polygons: winding sees the center, normals are
        /// unit, redistribution keeps orientation and roughly the area.
        #[test]
        fn random_star_polygon_invariants(seed in 0u64..1000) {
            let n = 48usize;
            let mut radii = Vec::with_capacity(n);
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            for _ in 0..n {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (state >> 11) as f64 / (1u64 << 53) as f64;
                radii.push(0.8 + 0.4 * u);
            }
            // Smooth the radii so the curve stays resolved at n markers.
            let smooth: Vec<f64> = (0..n)
                .map(|i| (radii[i] + radii[(i + 1) % n] + radii[(i + n - 1) % n]) / 3.0)
                .collect();
            let pts: Vec<Vec2> = (0..n)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / n as f64;
                    Vec2::new(smooth[i] * th.cos(), smooth[i] * th.sin())
                })
                .collect();
            let c = MarkerCurve::new(pts).unwrap();
            prop_assert_eq!(c.winding_number(Vec2::ZERO), 1);
            for i in 0..n {
                let nrm = c.outward_normal(i).unwrap();
                prop_assert!((nrm.norm() - 1.0).abs() < 1e-12);
            }
            let a0 = c.metrics().area;
            let r = c.redistribute(96).unwrap();
            let a1 = r.metrics().area;
            prop_assert!(a1 > 0.0);
            prop_assert!((a1 - a0).abs() / a0 < 0.05);
        }
    }
}
