//! Defining functions on grids: transport under the inverse patch flow,
//! interior correction, gradient-jump measurement across the boundary, and
//! the Holder quotient q that feeds the logarithmic gradient bound.

use crate::contour::CurveGeom;
use crate::error::{Error, Result};
use crate::field::{distance_to_polyline, velocity_anywhere};
use crate::geometry::{check_gamma, holder_seminorm, MarkerCurve};
use crate::vec2::Vec2;
use rayon::prelude::*;

/// Axis-aligned uniform node lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Position of node (0, 0).
    pub origin: Vec2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || !self.spacing.is_finite() || !self.origin.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid needs a finite origin and positive spacing, got {:?} / {}",
                self.origin, self.spacing
            )));
        }
        if self.nx < 8 || self.ny < 8 {
            return Err(Error::InvalidInput(format!(
                "grid must be at least 8x8 nodes, got {}x{}",
                self.nx, self.ny
            )));
        }
        if self.nx.saturating_mul(self.ny) > 40_000_000 {
            return Err(Error::InvalidInput("grid exceeds 4e7 nodes".into()));
        }
        Ok(())
    }

    pub fn node(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + self.spacing * ix as f64,
            self.origin.y + self.spacing * iy as f64,
        )
    }
}

/// Scalar samples of a defining function on a lattice, stamped with the
/// rescaled time they belong to. NaN marks nodes with no data (outside a
/// tube, or transported from beyond the source grid); interpolation touching
/// them yields NaN rather than an error.
#[derive(Clone, Debug)]
pub struct DefiningGrid {
    pub spec: GridSpec,
    pub s: f64,
    values: Vec<f64>,
}

/// Catmull-Rom weights: C^1 cardinal interpolation, exact on quadratics.
fn cr_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

fn cr_dweights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        -1.5 * t2 + 2.0 * t - 0.5,
        4.5 * t2 - 5.0 * t,
        -4.5 * t2 + 4.0 * t + 0.5,
        1.5 * t2 - t,
    ]
}

impl DefiningGrid {
    pub fn new(spec: GridSpec, s: f64, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!("grid time must be finite, got {s}")));
        }
        if values.len() != spec.nx * spec.ny {
            return Err(Error::InvalidInput(format!(
                "value count {} does not match {}x{} grid",
                values.len(),
                spec.nx,
                spec.ny
            )));
        }
        Ok(DefiningGrid { spec, s, values })
    }

    pub fn from_fn<F: Fn(Vec2) -> f64 + Sync>(spec: GridSpec, s: f64, f: F) -> Result<Self> {
        spec.validate()?;
        let nx = spec.nx;
        let values: Vec<f64> = (0..spec.ny)
            .into_par_iter()
            .flat_map_iter(|iy| (0..nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| f(spec.node(ix, iy)))
            .collect();
        DefiningGrid::new(spec, s, values)
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.nx + ix]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Base cell and fractional offsets for interpolation at x. The stencil
    /// needs one node beyond the cell on each side, so queries inside the
    /// outermost cell ring are out of range.
    fn locate(&self, x: Vec2) -> Result<(usize, usize, f64, f64)> {
        let fx = (x.x - self.spec.origin.x) / self.spec.spacing;
        let fy = (x.y - self.spec.origin.y) / self.spec.spacing;
        if !fx.is_finite() || !fy.is_finite() {
            return Err(Error::OutsideGrid(x.x, x.y));
        }
        let ix = fx.floor() as isize;
        let iy = fy.floor() as isize;
        if ix < 1 || iy < 1 || ix > self.spec.nx as isize - 3 || iy > self.spec.ny as isize - 3 {
            return Err(Error::OutsideGrid(x.x, x.y));
        }
        Ok((ix as usize, iy as usize, fx - ix as f64, fy - iy as f64))
    }

    /// Bicubic interpolation at x.
    pub fn eval(&self, x: Vec2) -> Result<f64> {
        let (ix, iy, tx, ty) = self.locate(x)?;
        let wx = cr_weights(tx);
        let wy = cr_weights(ty);
        let mut acc = 0.0;
        for (r, wyr) in wy.iter().enumerate() {
            let row = (iy + r - 1) * self.spec.nx + ix - 1;
            let mut line = 0.0;
            for (c, wxc) in wx.iter().enumerate() {
                line += wxc * self.values[row + c];
            }
            acc += wyr * line;
        }
        Ok(acc)
    }

    /// Gradient of the bicubic interpolant at x.
    pub fn eval_grad(&self, x: Vec2) -> Result<Vec2> {
        let (ix, iy, tx, ty) = self.locate(x)?;
        let wx = cr_weights(tx);
        let wy = cr_weights(ty);
        let dx = cr_dweights(tx);
        let dy = cr_dweights(ty);
        let mut gx = 0.0;
        let mut gy = 0.0;
        for r in 0..4 {
            let row = (iy + r - 1) * self.spec.nx + ix - 1;
            let mut line = 0.0;
            let mut dline = 0.0;
            for c in 0..4 {
                let v = self.values[row + c];
                line += wx[c] * v;
                dline += dx[c] * v;
            }
            gx += wy[r] * dline;
            gy += dy[r] * line;
        }
        Ok(Vec2::new(gx, gy) / self.spec.spacing)
    }
}

/// Signed distance to the marker polyline, negative inside, sampled on a
/// lattice at rescaled time `s`.
pub fn signed_distance_grid(curve: &MarkerCurve, spec: GridSpec, s: f64) -> Result<DefiningGrid> {
    spec.validate()?;
    let pts = curve.points();
    let nx = spec.nx;
    let values: Vec<f64> = (0..spec.ny)
        .into_par_iter()
        .flat_map_iter(|iy| (0..nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| {
            let p = spec.node(ix, iy);
            let d = distance_to_polyline(pts, p);
            if curve.contains(p) {
                -d
            } else {
                d
            }
        })
        .collect();
    DefiningGrid::new(spec, s, values)
}

/// Boundary snapshots of one evolution, addressable in rescaled time. The
/// trace integrators interpolate markers linearly between snapshots, so the
/// recording gap must stay at or below the stepper's own ds.
#[derive(Clone, Debug)]
pub struct FlowHistory {
    max_gap: f64,
    s: Vec<f64>,
    curves: Vec<Vec<Vec2>>,
}

impl FlowHistory {
    pub fn new(max_gap: f64) -> Result<Self> {
        if !(max_gap > 0.0) || !max_gap.is_finite() {
            return Err(Error::InvalidInput(format!(
                "history gap budget must be positive, got {max_gap}"
            )));
        }
        Ok(FlowHistory { max_gap, s: Vec::new(), curves: Vec::new() })
    }

    pub fn push(&mut self, s: f64, curve: &MarkerCurve) -> Result<()> {
        if !s.is_finite() {
            return Err(Error::InvalidInput("snapshot time must be finite".into()));
        }
        if let Some(&last) = self.s.last() {
            if s <= last {
                return Err(Error::InvalidInput(format!(
                    "snapshot times must increase, got {s} after {last}"
                )));
            }
            if s - last > self.max_gap * (1.0 + 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "snapshot gap {} exceeds budget {}",
                    s - last,
                    self.max_gap
                )));
            }
        }
        self.s.push(s);
        self.curves.push(curve.points().to_vec());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Covered rescaled-time interval.
    pub fn s_range(&self) -> Result<(f64, f64)> {
        match (self.s.first(), self.s.last()) {
            (Some(&a), Some(&b)) => Ok((a, b)),
            _ => Err(Error::InvalidInput("history holds no snapshots".into())),
        }
    }

    fn check_covered(&self, s: f64) -> Result<()> {
        let (a, b) = self.s_range()?;
        let slack = 1e-9 * (1.0 + b.abs().max(a.abs()));
        if s < a - slack || s > b + slack {
            return Err(Error::HistoryCoverage(s));
        }
        Ok(())
    }

    fn points_at(&self, s: f64) -> Result<Vec<Vec2>> {
        self.check_covered(s)?;
        let idx = match self.s.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => return Ok(self.curves[i].clone()),
            Err(i) => i,
        };
        if idx == 0 {
            return Ok(self.curves[0].clone());
        }
        if idx == self.s.len() {
            return Ok(self.curves[idx - 1].clone());
        }
        let (s0, s1) = (self.s[idx - 1], self.s[idx]);
        let (a, b) = (&self.curves[idx - 1], &self.curves[idx]);
        if a.len() != b.len() {
            // Marker counts changed (redistribution); take the closer
            // snapshot instead of blending incompatible samplings.
            let pick = if s - s0 <= s1 - s { a } else { b };
            return Ok(pick.clone());
        }
        let w = (s - s0) / (s1 - s0);
        Ok(a.iter().zip(b).map(|(p, q)| *p + (*q - *p) * w).collect())
    }

    /// Boundary curve at time s, interpolated marker-wise between snapshots.
    pub fn curve_at(&self, s: f64) -> Result<MarkerCurve> {
        Ok(MarkerCurve::from_points_unchecked(self.points_at(s)?))
    }

    fn geom_at(&self, s: f64) -> Result<CurveGeom> {
        CurveGeom::from_points(&self.points_at(s)?)
    }
}

/// Knobs for the backward characteristic tracer.
#[derive(Clone, Copy, Debug)]
pub struct TraceOptions {
    /// Step in rescaled time; the span is divided evenly into steps of at
    /// most this size.
    pub step: f64,
    /// A trajectory leaving this multiple of the initial curve radius about
    /// its centroid aborts the trace.
    pub bbox_scale: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { step: 0.02, bbox_scale: 8.0 }
    }
}

impl TraceOptions {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() || !(self.bbox_scale > 1.0) {
            return Err(Error::InvalidInput(format!(
                "trace options need step > 0 and bbox_scale > 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Trace every point backward from s_hi to s_lo through the recorded flow,
/// all points in lockstep so the per-step curve geometries are shared.
fn trace_batch(
    history: &FlowHistory,
    pts: &[Vec2],
    s_hi: f64,
    s_lo: f64,
    opts: &TraceOptions,
) -> Result<Vec<Vec2>> {
    opts.validate()?;
    history.check_covered(s_hi)?;
    history.check_covered(s_lo)?;
    if s_lo > s_hi {
        return Err(Error::InvalidInput(format!(
            "trace runs backward in s, need s_lo <= s_hi, got {s_lo} > {s_hi}"
        )));
    }
    let span = s_hi - s_lo;
    let mut cur: Vec<Vec2> = pts.to_vec();
    if span == 0.0 {
        return Ok(cur);
    }
    let m = (span / opts.step).ceil().max(1.0) as usize;
    let h = span / m as f64;

    let base = history.geom_at(s_lo)?;
    let escape_r = opts.bbox_scale * base.r_max.max(base.max_spacing);
    let center = base.centroid_hint;

    for k in 0..m {
        let sa = s_hi - h * k as f64;
        let sb = if k + 1 == m { s_lo } else { s_hi - h * (k + 1) as f64 };
        let sm = 0.5 * (sa + sb);
        let ga = history.geom_at(sa)?;
        let gm = history.geom_at(sm)?;
        let gb = history.geom_at(sb)?;
        cur = cur
            .par_iter()
            .map(|&p| {
                let k1 = velocity_anywhere(&ga, p);
                let k2 = velocity_anywhere(&gm, p - k1 * (0.5 * h));
                let k3 = velocity_anywhere(&gm, p - k2 * (0.5 * h));
                let k4 = velocity_anywhere(&gb, p - k3 * h);
                let q = p - (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
                if !q.is_finite() {
                    return Err(Error::NonFiniteVelocity(0));
                }
                if q.dist(center) > escape_r {
                    return Err(Error::TrajectoryEscape(sb));
                }
                Ok(q)
            })
            .collect::<Result<Vec<Vec2>>>()?;
    }
    Ok(cur)
}

/// Preimage of x at the start of the recorded flow: x is interpreted at
/// rescaled time s, and traced back to the history's first snapshot.
pub fn inverse_flow_point(
    history: &FlowHistory,
    x: Vec2,
    s: f64,
    opts: &TraceOptions,
) -> Result<Vec2> {
    if !x.is_finite() {
        return Err(Error::InvalidInput("trace point must be finite".into()));
    }
    let (s0, _) = history.s_range()?;
    Ok(trace_batch(history, &[x], s, s0, opts)?[0])
}

/// Multiply the defining function by e^{-(s - s_ref)} at nodes inside the
/// curve, turning a merely transported function into one whose gradient
/// magnitude matches across the boundary.
pub fn apply_interior_correction(
    phi: &DefiningGrid,
    curve: &MarkerCurve,
    s_ref: f64,
) -> DefiningGrid {
    let factor = (-(phi.s - s_ref)).exp();
    let nx = phi.spec.nx;
    let values: Vec<f64> = (0..phi.spec.ny)
        .into_par_iter()
        .flat_map_iter(|iy| (0..nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| {
            let v = phi.value(ix, iy);
            if v.is_finite() && curve.contains(phi.spec.node(ix, iy)) {
                v * factor
            } else {
                v
            }
        })
        .collect();
    DefiningGrid { spec: phi.spec, s: phi.s, values }
}

fn transport_values(
    history: &FlowHistory,
    phi0: &DefiningGrid,
    nodes: &[Option<Vec2>],
    s: f64,
    opts: &TraceOptions,
) -> Result<Vec<f64>> {
    let (s0, _) = history.s_range()?;
    if (phi0.s - s0).abs() > 1e-9 * (1.0 + s0.abs()) {
        return Err(Error::InvalidInput(format!(
            "source grid is stamped s={}, history starts at s={s0}",
            phi0.s
        )));
    }
    let active: Vec<Vec2> = nodes.iter().flatten().copied().collect();
    let pre = trace_batch(history, &active, s, s0, opts)?;
    let mut it = pre.iter();
    Ok(nodes
        .iter()
        .map(|n| match n {
            Some(_) => phi0.eval(*it.next().unwrap()).unwrap_or(f64::NAN),
            None => f64::NAN,
        })
        .collect())
}

/// Transport a defining function from the start of the flow to rescaled
/// time s, evaluating phi0 at the traced preimage of every output node.
/// Nodes whose preimage leaves the source grid come back NaN. With
/// `corrected` the interior values additionally carry the e^{-(s-s0)}
/// factor that removes the gradient jump across the boundary.
pub fn transport_phi(
    history: &FlowHistory,
    phi0: &DefiningGrid,
    out: GridSpec,
    s: f64,
    corrected: bool,
    opts: &TraceOptions,
) -> Result<DefiningGrid> {
    out.validate()?;
    let nodes: Vec<Option<Vec2>> = (0..out.ny)
        .flat_map(|iy| (0..out.nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| Some(out.node(ix, iy)))
        .collect();
    let values = transport_values(history, phi0, &nodes, s, opts)?;
    let grid = DefiningGrid::new(out, s, values)?;
    if corrected {
        let (s0, _) = history.s_range()?;
        Ok(apply_interior_correction(&grid, &history.curve_at(s)?, s0))
    } else {
        Ok(grid)
    }
}

/// Like `transport_phi` but only nodes within `tube_width` of the boundary
/// at time s are traced; everything else is NaN. This is what the per-run
/// regularity diagnostics use, since both the gradient jump and q only look
/// near the boundary.
pub fn transport_phi_tube(
    history: &FlowHistory,
    phi0: &DefiningGrid,
    out: GridSpec,
    s: f64,
    corrected: bool,
    tube_width: f64,
    opts: &TraceOptions,
) -> Result<DefiningGrid> {
    out.validate()?;
    if !(tube_width > 0.0) || !tube_width.is_finite() {
        return Err(Error::InvalidInput(format!(
            "tube width must be positive, got {tube_width}"
        )));
    }
    let curve = history.curve_at(s)?;
    let pts = curve.points();
    let nodes: Vec<Option<Vec2>> = (0..out.ny)
        .into_par_iter()
        .flat_map_iter(|iy| (0..out.nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| {
            let p = out.node(ix, iy);
            if distance_to_polyline(pts, p) <= tube_width {
                Some(p)
            } else {
                None
            }
        })
        .collect();
    let values = transport_values(history, phi0, &nodes, s, opts)?;
    let grid = DefiningGrid::new(out, s, values)?;
    if corrected {
        let (s0, _) = history.s_range()?;
        Ok(apply_interior_correction(&grid, &curve, s0))
    } else {
        Ok(grid)
    }
}

/// One-sided gradient magnitudes across the boundary, anchored at the
/// markers where the defining function vanishes by construction.
#[derive(Clone, Debug)]
pub struct JumpReport {
    pub h: f64,
    /// |slope_in| - |slope_out| magnitude per marker.
    pub jumps: Vec<f64>,
    /// slope_in / slope_out per marker.
    pub ratios: Vec<f64>,
    pub max_jump: f64,
    pub mean_ratio: f64,
}

/// Measure the normal-derivative mismatch of `phi` across the curve by
/// one-sided slopes at offset h along each marker normal. The function is
/// zero on the boundary, so the slopes need no interpolated center value,
/// which would otherwise smear the kink.
pub fn gradient_jump(phi: &DefiningGrid, curve: &MarkerCurve, h: f64) -> Result<JumpReport> {
    let lo = 2.0 * phi.spec.spacing;
    let hi = 0.1 * curve.diameter();
    if !(h >= lo && h <= hi) {
        return Err(Error::InvalidInput(format!(
            "offset h={h} must lie in [2*spacing, diameter/10] = [{lo}, {hi}]"
        )));
    }
    let n = curve.len();
    let mut jumps = Vec::with_capacity(n);
    let mut ratios = Vec::with_capacity(n);
    for i in 0..n {
        let x = curve.point(i);
        let nrm = curve.outward_normal(i)?;
        let out = phi.eval(x + nrm * h)?;
        let inn = phi.eval(x - nrm * h)?;
        if !out.is_finite() || !inn.is_finite() {
            return Err(Error::InvalidInput(format!(
                "defining function has no data at offset {h} from marker {i}"
            )));
        }
        let slope_out = out.abs() / h;
        let slope_in = inn.abs() / h;
        jumps.push((slope_in - slope_out).abs());
        ratios.push(slope_in / slope_out);
    }
    let max_jump = jumps.iter().cloned().fold(0.0f64, f64::max);
    let mean_ratio = ratios.iter().sum::<f64>() / n as f64;
    Ok(JumpReport { h, jumps, ratios, max_jump, mean_ratio })
}

/// Holder quotient of the defining function on a boundary tube:
/// the gamma-seminorm of its gradient over tube nodes divided by the
/// smallest gradient magnitude along the curve itself.
pub fn q_of_domain(
    phi: &DefiningGrid,
    curve: &MarkerCurve,
    gamma: f64,
    tube_width: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    if !(tube_width >= 4.0 * phi.spec.spacing) {
        return Err(Error::InvalidInput(format!(
            "tube width {tube_width} must be at least 4 grid spacings ({})",
            4.0 * phi.spec.spacing
        )));
    }
    let pts = curve.points();

    let mut nodes = Vec::new();
    for iy in 1..phi.spec.ny.saturating_sub(2) {
        for ix in 1..phi.spec.nx.saturating_sub(2) {
            let p = phi.spec.node(ix, iy);
            if distance_to_polyline(pts, p) <= tube_width {
                nodes.push(p);
            }
        }
    }
    // The seminorm scan is quadratic in node count; cap it with a
    // deterministic stride.
    let cap = 10_000usize;
    if nodes.len() > cap {
        let stride = nodes.len().div_ceil(cap);
        nodes = nodes.into_iter().step_by(stride).collect();
    }

    let mut tube_pts = Vec::with_capacity(nodes.len());
    let mut grads = Vec::with_capacity(nodes.len());
    for p in nodes {
        if let Ok(g) = phi.eval_grad(p) {
            if g.is_finite() {
                tube_pts.push(p);
                grads.push(g);
            }
        }
    }
    if tube_pts.len() < 2 {
        return Err(Error::InvalidInput(
            "tube holds fewer than two usable grid nodes".into(),
        ));
    }
    let seminorm = holder_seminorm(&tube_pts, &grads, gamma)?;

    let mut inf = f64::INFINITY;
    for i in 0..curve.len() {
        let g = phi.eval_grad(curve.point(i))?;
        if !g.is_finite() {
            return Err(Error::InvalidInput(format!(
                "defining function has no data at marker {i}"
            )));
        }
        inf = inf.min(g.norm());
    }
    if inf < 1e-10 {
        return Err(Error::InvalidInput(format!(
            "defining function is degenerate on the boundary: min |grad| = {inf}"
        )));
    }
    Ok(seminorm / inf)
}

/// Graph radius delta with delta^gamma * q = 1/2, and the working radius
/// r0 = delta / 6 used by the covering argument.
pub fn graph_radius(q: f64, gamma: f64) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidInput(format!("q must be positive and finite, got {q}")));
    }
    let delta = (0.5 / q).powf(1.0 / gamma);
    Ok((delta, delta / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{run, PatchState, StepperConfig};
    use crate::shapes;
    use approx::assert_relative_eq;

    fn spec_centered(half: f64, n: usize) -> GridSpec {
        let spacing = 2.0 * half / (n - 1) as f64;
        GridSpec { origin: Vec2::new(-half, -half), spacing, nx: n, ny: n }
    }

    #[test]
    fn bicubic_reproduces_quadratics_with_gradient() {
        let spec = spec_centered(2.0, 41);
        let f = |p: Vec2| 1.5 + 2.0 * p.x - p.y + p.x * p.x - 0.5 * p.x * p.y + 2.0 * p.y * p.y;
        let g = DefiningGrid::from_fn(spec, 0.0, f).unwrap();
        for p in [
            Vec2::new(0.31, -0.74),
            Vec2::new(1.23, 1.41),
            Vec2::new(-1.57, 0.02),
        ] {
            assert_relative_eq!(g.eval(p).unwrap(), f(p), epsilon = 1e-12);
            let grad = g.eval_grad(p).unwrap();
            let want = Vec2::new(2.0 + 2.0 * p.x - 0.5 * p.y, -1.0 - 0.5 * p.x + 4.0 * p.y);
            assert!(grad.dist(want) < 1e-11, "grad {grad:?} vs {want:?}");
        }
    }

    #[test]
    fn grid_margins_are_out_of_range() {
        let spec = spec_centered(1.0, 21);
        let g = DefiningGrid::from_fn(spec, 0.0, |p| p.x).unwrap();
        assert!(matches!(g.eval(Vec2::new(0.98, 0.0)), Err(Error::OutsideGrid(_, _))));
        assert!(g.eval(Vec2::new(0.89, 0.0)).is_ok());
        assert!(g.eval(Vec2::new(3.0, 0.0)).is_err());
        assert!(g.eval(Vec2::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn nan_nodes_poison_interpolation_quietly() {
        let spec = spec_centered(1.0, 21);
        let mut vals: Vec<f64> = (0..21 * 21).map(|_| 1.0).collect();
        vals[10 * 21 + 10] = f64::NAN;
        let g = DefiningGrid::new(spec, 0.0, vals).unwrap();
        assert!(g.eval(Vec2::new(0.01, 0.01)).unwrap().is_nan());
        assert_relative_eq!(g.eval(Vec2::new(0.51, 0.5)).unwrap(), 1.0);
    }

    #[test]
    fn signed_distance_grid_matches_the_disc() {
        let c = shapes::circle(Vec2::ZERO, 1.0, 256).unwrap();
        let g = signed_distance_grid(&c, spec_centered(1.6, 65), 0.0).unwrap();
        let probe = |x: f64, y: f64| g.eval(Vec2::new(x, y)).unwrap();
        assert_relative_eq!(probe(0.0, 0.0), -1.0, epsilon = 2e-3);
        assert_relative_eq!(probe(0.5, 0.0), -0.5, epsilon = 2e-3);
        assert_relative_eq!(probe(0.0, 1.25), 0.25, epsilon = 2e-3);
    }

    #[test]
    fn history_validates_ordering_and_gaps() {
        let c = shapes::circle(Vec2::ZERO, 1.0, 32).unwrap();
        let mut h = FlowHistory::new(0.1).unwrap();
        h.push(0.0, &c).unwrap();
        assert!(h.push(0.0, &c).is_err());
        assert!(h.push(0.25, &c).is_err());
        h.push(0.1, &c).unwrap();
        assert_eq!(h.len(), 2);
        assert!(matches!(h.curve_at(0.5), Err(Error::HistoryCoverage(_))));
    }

    #[test]
    fn history_interpolates_markerwise() {
        let a = shapes::circle(Vec2::ZERO, 1.0, 64).unwrap();
        let b = shapes::circle(Vec2::ZERO, 0.9, 64).unwrap();
        let mut h = FlowHistory::new(1.0).unwrap();
        h.push(0.0, &a).unwrap();
        h.push(1.0, &b).unwrap();
        let mid = h.curve_at(0.5).unwrap();
        for p in mid.points() {
            assert_relative_eq!(p.norm(), 0.95, epsilon = 1e-12);
        }
        // Mismatched counts fall back to the nearer snapshot.
        let c = shapes::circle(Vec2::ZERO, 0.8, 96).unwrap();
        h.push(2.0, &c).unwrap();
        assert_eq!(h.curve_at(1.2).unwrap().len(), 64);
        assert_eq!(h.curve_at(1.9).unwrap().len(), 96);
    }

    /// Record a real disc collapse and invert it: interior points scale by
    /// 1/sqrt(1-t), exterior ones slide along sqrt(|x|^2 + t).
    #[test]
    fn inverse_flow_reproduces_disc_preimages() {
        let n = 128;
        let c = shapes::circle(Vec2::ZERO, 1.0, n).unwrap();
        let cfg = StepperConfig::new(5e-3, 0, n).unwrap();
        let mut h = FlowHistory::new(5e-3).unwrap();
        let s_end = std::f64::consts::LN_2;
        run(PatchState::initial(c), &cfg, s_end, |st, _| {
            h.push(st.s, &st.curve).unwrap();
        })
        .unwrap();
        let opts = TraceOptions::default();
        let y_in = inverse_flow_point(&h, Vec2::new(0.3, 0.0), s_end, &opts).unwrap();
        assert!(y_in.dist(Vec2::new(0.3 / 0.5f64.sqrt(), 0.0)) < 1e-4, "{y_in:?}");
        let y_out = inverse_flow_point(&h, Vec2::new(2.0, 0.0), s_end, &opts).unwrap();
        assert!(y_out.dist(Vec2::new(4.5f64.sqrt(), 0.0)) < 1e-4, "{y_out:?}");
        // A point at the current boundary pulls back to the initial one.
        let y_bd = inverse_flow_point(&h, Vec2::new(0.0, 0.5f64.sqrt()), s_end, &opts).unwrap();
        assert!((y_bd.norm() - 1.0).abs() < 1e-4);
    }

    fn disc_history(n: usize, s_end: f64) -> FlowHistory {
        let c = shapes::circle(Vec2::ZERO, 1.0, n).unwrap();
        let cfg = StepperConfig::new(5e-3, 0, n).unwrap();
        let mut h = FlowHistory::new(5e-3).unwrap();
        run(PatchState::initial(c), &cfg, s_end, |st, _| {
            h.push(st.s, &st.curve).unwrap();
        })
        .unwrap();
        h
    }

    #[test]
    fn transported_defining_function_hits_disc_values() {
        let s_end = std::f64::consts::LN_2;
        let h = disc_history(128, s_end);
        let phi0 =
            DefiningGrid::from_fn(spec_centered(2.6, 121), 0.0, |p| p.norm_sq() - 1.0).unwrap();
        let out = spec_centered(2.2, 89);
        let opts = TraceOptions { step: 0.02, bbox_scale: 8.0 };
        let phi = transport_phi(&h, &phi0, out, s_end, false, &opts).unwrap();
        assert_relative_eq!(phi.eval(Vec2::ZERO).unwrap(), -1.0, epsilon = 1e-3);
        assert_relative_eq!(phi.eval(Vec2::new(2.0, 0.0)).unwrap(), 3.5, epsilon = 1e-3);
        let cor = transport_phi(&h, &phi0, out, s_end, true, &opts).unwrap();
        assert_relative_eq!(cor.eval(Vec2::ZERO).unwrap(), -0.5, epsilon = 1e-3);
        assert_relative_eq!(cor.eval(Vec2::new(2.0, 0.0)).unwrap(), 3.5, epsilon = 1e-3);

        // Zero level sits on the collapsed boundary, radius sqrt(1/2). The
        // interpolant smears the kink over its own cell (spacing 0.05), so
        // probe one full cell to either side.
        let r = 0.5f64.sqrt();
        let near = phi.eval(Vec2::new(r + 0.06, 0.0)).unwrap();
        let nearer = phi.eval(Vec2::new(r - 0.06, 0.0)).unwrap();
        assert!(near > 0.0 && nearer < 0.0, "zero level drifted: {nearer} / {near}");
    }

    #[test]
    fn tube_transport_masks_far_nodes_and_keeps_near_values() {
        let s_end = std::f64::consts::LN_2;
        let h = disc_history(128, s_end);
        let phi0 =
            DefiningGrid::from_fn(spec_centered(2.6, 121), 0.0, |p| p.norm_sq() - 1.0).unwrap();
        let out = spec_centered(1.5, 101);
        let opts = TraceOptions::default();
        let tube =
            transport_phi_tube(&h, &phi0, out, s_end, true, 0.3, &opts).unwrap();
        assert!(tube.eval(Vec2::ZERO).unwrap().is_nan());
        let r = 0.5f64.sqrt();
        let inside = tube.eval(Vec2::new(r - 0.05, 0.0)).unwrap();
        let outside = tube.eval(Vec2::new(r + 0.05, 0.0)).unwrap();
        assert!(inside < 0.0 && outside > 0.0);
        // Corrected slopes at finite offset h from the kink: (2r - h)
        // inside versus (2r + h) outside, so the mismatch is exactly 2h and
        // the ratio approaches 1 as h shrinks.
        let jr = gradient_jump(&tube, &h.curve_at(s_end).unwrap(), 0.06).unwrap();
        let r2 = 2.0 * 0.5f64.sqrt();
        assert!((jr.max_jump - 0.12).abs() < 0.02, "corrected jump {}", jr.max_jump);
        let want = (r2 - 0.06) / (r2 + 0.06);
        assert!((jr.mean_ratio - want).abs() < 0.01, "ratio {}", jr.mean_ratio);
    }

    #[test]
    fn uncorrected_transport_shows_the_gradient_jump() {
        let s_end = std::f64::consts::LN_2;
        let h = disc_history(128, s_end);
        let phi0 =
            DefiningGrid::from_fn(spec_centered(2.6, 121), 0.0, |p| p.norm_sq() - 1.0).unwrap();
        let out = spec_centered(1.5, 151);
        let opts = TraceOptions::default();
        let phi = transport_phi_tube(&h, &phi0, out, s_end, false, 0.3, &opts).unwrap();
        let jr = gradient_jump(&phi, &h.curve_at(s_end).unwrap(), 0.05).unwrap();
        // Interior slope carries the extra 1/(1-t) = 2 of the inverse flow;
        // at finite offset the exact ratio is (2r - h)/((2r + h)(1 - t)).
        let r2 = 2.0 * 0.5f64.sqrt();
        let want = (r2 - 0.05) / ((r2 + 0.05) * 0.5);
        assert!((jr.mean_ratio - want).abs() < 0.02, "ratio {}", jr.mean_ratio);
    }

    #[test]
    fn determinant_of_inverse_flow_is_expansive() {
        let s_end = 1.0;
        let h = disc_history(128, s_end);
        let opts = TraceOptions::default();
        let d = 1e-3;
        let x = Vec2::new(0.2, -0.1);
        let probes = [
            Vec2::new(x.x + d, x.y),
            Vec2::new(x.x - d, x.y),
            Vec2::new(x.x, x.y + d),
            Vec2::new(x.x, x.y - d),
        ];
        let (s0, _) = h.s_range().unwrap();
        let pre = trace_batch(&h, &probes, s_end, s0, &opts).unwrap();
        let j00 = (pre[0].x - pre[1].x) / (2.0 * d);
        let j10 = (pre[0].y - pre[1].y) / (2.0 * d);
        let j01 = (pre[2].x - pre[3].x) / (2.0 * d);
        let j11 = (pre[2].y - pre[3].y) / (2.0 * d);
        let det = j00 * j11 - j01 * j10;
        assert!(
            (det - s_end.exp()).abs() < 0.02 * s_end.exp(),
            "det {det} vs {}",
            s_end.exp()
        );
    }

    #[test]
    fn holder_quotient_of_the_disc_defining_function() {
        let c = shapes::circle(Vec2::ZERO, 1.0, 256).unwrap();
        let g = DefiningGrid::from_fn(spec_centered(1.6, 161), 0.0, |p| p.norm_sq() - 1.0)
            .unwrap();
        let q = q_of_domain(&g, &c, 0.5, 0.25).unwrap();
        // grad = 2x: seminorm 2 (2 * 1.25)^{1/2} over the tube, inf 2 on
        // the curve, so q = (2.5)^{1/2} / ... = 1.5811 up to tube
        // discreteness.
        let want = (2.0 * 2.5f64.sqrt()) / 2.0;
        assert!((q - want).abs() < 0.05 * want, "q = {q}, want {want}");
        // Scale invariance of the quotient under phi -> 3 phi.
        let g3 = DefiningGrid::from_fn(spec_centered(1.6, 161), 0.0, |p| {
            3.0 * (p.norm_sq() - 1.0)
        })
        .unwrap();
        let q3 = q_of_domain(&g3, &c, 0.5, 0.25).unwrap();
        assert_relative_eq!(q3, q, epsilon = 1e-9);
    }

    #[test]
    fn q_of_domain_validates_inputs() {
        let c = shapes::circle(Vec2::ZERO, 1.0, 64).unwrap();
        let g = DefiningGrid::from_fn(spec_centered(1.6, 33), 0.0, |p| p.norm_sq() - 1.0)
            .unwrap();
        // Tube below four spacings.
        assert!(q_of_domain(&g, &c, 0.5, 0.3).is_err());
        // Degenerate defining function: constant.
        let flat = DefiningGrid::from_fn(spec_centered(1.6, 161), 0.0, |_| 1.0).unwrap();
        assert!(q_of_domain(&flat, &c, 0.5, 0.25).is_err());
    }

    #[test]
    fn graph_radius_inverts_the_holder_bound() {
        let (delta, r0) = graph_radius(1.5811388300841898, 0.5).unwrap();
        assert_relative_eq!(delta, 0.1, epsilon = 1e-9);
        assert_relative_eq!(r0, 0.1 / 6.0, epsilon = 1e-9);
        for (q, gamma) in [(0.2, 0.4), (3.0, 0.9), (40.0, 0.5)] {
            let (d, r) = graph_radius(q, gamma).unwrap();
            assert_relative_eq!(d.powf(gamma) * q, 0.5, epsilon = 1e-12);
            assert_relative_eq!(r * 6.0, d, epsilon = 1e-12);
        }
        assert!(graph_radius(0.0, 0.5).is_err());
        assert!(graph_radius(1.0, 0.0).is_err());
    }

    #[test]
    fn gradient_jump_validates_offsets() {
        let c = shapes::circle(Vec2::ZERO, 1.0, 64).unwrap();
        let g = DefiningGrid::from_fn(spec_centered(1.6, 33), 0.0, |p| p.norm_sq() - 1.0)
            .unwrap();
        // spacing = 0.1: h below 0.2 or above diameter/10 is rejected.
        assert!(gradient_jump(&g, &c, 0.15).is_err());
        assert!(gradient_jump(&g, &c, 0.25).is_err());
        let fine = DefiningGrid::from_fn(spec_centered(1.6, 321), 0.0, |p| p.norm_sq() - 1.0)
            .unwrap();
        let jr = gradient_jump(&fine, &c, 0.05).unwrap();
        // Smooth function: slopes differ only by curvature of |x|^2 - 1,
        // (2r +- h): jump = 2h exactly, ratio (2-h)/(2+h).
        assert_relative_eq!(jr.max_jump, 2.0 * 0.05, epsilon = 1e-3);
        assert_relative_eq!(jr.mean_ratio, 1.95 / 2.05, epsilon = 1e-3);
    }
}
