//! Contour dynamics core: marker velocities by singular quadrature of the
//! single-layer boundary integral, and Runge-Kutta evolution in rescaled
//! time with per-step diagnostics.

use crate::error::{Error, Result};
use crate::exact::t_of_s;
use crate::field::velocity_anywhere;
use crate::geometry::{bilipschitz_points, polygon_area, MarkerCurve};
use crate::vec2::{KahanVec2, Vec2};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Patch boundary plus its rescaled clock.
///
/// The derived original time is t = 1 - e^{-s}; s may be negative (spreading
/// patch) and grows without bound as t -> 1.
#[derive(Clone, Debug)]
pub struct PatchState {
    pub curve: MarkerCurve,
    pub s: f64,
    /// Area at s = 0, the reference for the e^{-s} decay diagnostics.
    pub area0: f64,
}

impl PatchState {
    /// State at s = 0; the current area becomes the decay reference.
    pub fn initial(curve: MarkerCurve) -> Self {
        let area0 = curve.metrics().area;
        PatchState { curve, s: 0.0, area0 }
    }

    pub fn new(curve: MarkerCurve, s: f64, area0: f64) -> Result<Self> {
        if !(area0 > 0.0) || !area0.is_finite() || !s.is_finite() {
            return Err(Error::InvalidInput(format!(
                "state needs finite s and positive reference area, got s={s}, area0={area0}"
            )));
        }
        Ok(PatchState { curve, s, area0 })
    }

    /// Original time of this state.
    pub fn t(&self) -> f64 {
        t_of_s(self.s)
    }
}

/// Stepper parameters. `ds = 0` is accepted so a single step can act as the
/// identity; `run` itself requires `ds > 0`.
#[derive(Clone, Copy, Debug)]
pub struct StepperConfig {
    pub ds: f64,
    /// Redistribute every this many accepted steps; 0 disables the schedule.
    /// The spacing-ratio trigger (max/min > 2) stays armed either way.
    pub redistribute_every: usize,
    /// Marker count targeted by redistribution.
    pub n_markers: usize,
}

impl StepperConfig {
    pub fn new(ds: f64, redistribute_every: usize, n_markers: usize) -> Result<Self> {
        if !(0.0..=0.1).contains(&ds) {
            return Err(Error::InvalidInput(format!(
                "ds must lie in (0, 0.1] (0 allowed for identity steps), got {ds}"
            )));
        }
        if n_markers < 8 {
            return Err(Error::InvalidInput(format!(
                "n_markers must be at least 8, got {n_markers}"
            )));
        }
        Ok(StepperConfig { ds, redistribute_every, n_markers })
    }
}

/// Cheap per-step observations handed to run observers.
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticsRecord {
    /// Accepted steps so far (0 for the initial observation).
    pub step: usize,
    pub s: f64,
    pub t: f64,
    pub area: f64,
    /// area/area0 - e^{-s}; tracks the exact decay law.
    pub area_ratio_error: f64,
    pub centroid: Vec2,
    /// Inverse-bilipschitz constant of the tracer map since s = 0.
    pub mu: f64,
    pub min_spacing: f64,
    pub max_spacing: f64,
    /// Whether redistribution ran after this step.
    pub redistributed: bool,
}

/// Result of a full run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: PatchState,
    /// Set when the curve stopped being embeddable (self-intersection at
    /// redistribution, collapsed stage geometry, or nonpositive area); the
    /// state is the last valid one.
    pub blew_up: bool,
    pub steps: usize,
}

/// Precomputed panel geometry shared by every velocity evaluation against a
/// fixed curve.
pub(crate) struct CurveGeom {
    pub pts: Vec<Vec2>,
    /// Unit outward normals at markers (4-point stencil).
    pub node_normal: Vec<Vec2>,
    /// Arc-corrected trapezoid weights at markers.
    pub node_weight: Vec<f64>,
    /// Unit outward normal of each chord panel (panel i joins marker i to i+1).
    pub panel_normal: Vec<Vec2>,
    pub panel_len: Vec<f64>,
    pub max_spacing: f64,
    /// Vertex mean and the radius band around it, for cheap distance bounds.
    pub centroid_hint: Vec2,
    pub r_min: f64,
    pub r_max: f64,
}

impl CurveGeom {
    pub fn new(curve: &MarkerCurve) -> Result<Self> {
        Self::from_points(curve.points())
    }

    pub fn from_points(pts: &[Vec2]) -> Result<Self> {
        let n = pts.len();
        debug_assert!(n >= 8);
        let mut panel_normal = Vec::with_capacity(n);
        let mut panel_len = Vec::with_capacity(n);
        let mut edge_dir = Vec::with_capacity(n);
        let mut max_spacing = 0.0f64;
        for i in 0..n {
            let e = pts[(i + 1) % n] - pts[i];
            let l = e.norm();
            let unit = e
                .normalized(0.0)
                .ok_or_else(|| Error::InvalidCurve(format!("panel {i} has zero length")))?;
            edge_dir.push(unit);
            panel_normal.push(unit.rot_cw());
            panel_len.push(l);
            max_spacing = max_spacing.max(l);
        }

        // Turning angle at each marker, then per-panel mean turning. The
        // factor psi / (2 sin(psi/2)) converts a chord length into the arc
        // length of the circle matching that turning, which is what makes
        // the trapezoid weights third-order accurate.
        let mut node_turn = Vec::with_capacity(n);
        for i in 0..n {
            let prev = edge_dir[(i + n - 1) % n];
            let cur = edge_dir[i];
            node_turn.push(prev.cross(cur).atan2(prev.dot(cur)));
        }
        let mut arc = Vec::with_capacity(n);
        for i in 0..n {
            let psi = 0.5 * (node_turn[i] + node_turn[(i + 1) % n]);
            let factor = if psi.abs() < 1e-4 {
                1.0 + psi * psi / 24.0
            } else {
                psi / (2.0 * (0.5 * psi).sin())
            };
            arc.push(panel_len[i] * factor);
        }
        let node_weight: Vec<f64> =
            (0..n).map(|i| 0.5 * (arc[(i + n - 1) % n] + arc[i])).collect();

        let mut node_normal = Vec::with_capacity(n);
        for i in 0..n {
            let p = |k: i64| pts[(i as i64 + k).rem_euclid(n as i64) as usize];
            let t = 8.0 * (p(1) - p(-1)) - (p(2) - p(-2));
            let span = (p(1) - p(-1)).norm() + (p(2) - p(-2)).norm();
            let unit = t
                .normalized(1e-12 * span.max(1e-300))
                .ok_or(Error::DegenerateTangent(i))?;
            node_normal.push(unit.rot_cw());
        }

        let inv = 1.0 / n as f64;
        let mut c = Vec2::ZERO;
        for p in pts {
            c += *p * inv;
        }
        let mut r_min = f64::INFINITY;
        let mut r_max = 0.0f64;
        for p in pts {
            let r = p.dist(c);
            r_min = r_min.min(r);
            r_max = r_max.max(r);
        }

        Ok(CurveGeom {
            pts: pts.to_vec(),
            node_normal,
            node_weight,
            panel_normal,
            panel_len,
            max_spacing,
            centroid_hint: c,
            r_min,
            r_max,
        })
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }
}

/// Velocity at marker i: corrected trapezoid over the other markers plus the
/// self term w_i ln(w_i/(2 pi)) n_i that accounts for the punctured log
/// panels. Compensated summation keeps the round-off floor below the
/// refinement signals the convergence studies measure.
pub(crate) fn marker_velocity(g: &CurveGeom, i: usize) -> Vec2 {
    let xi = g.pts[i];
    let mut acc = KahanVec2::default();
    for j in 0..g.pts.len() {
        if j == i {
            continue;
        }
        let r2 = (xi - g.pts[j]).norm_sq();
        let c = 0.5 * r2.ln() * g.node_weight[j];
        acc.add(g.node_normal[j] * c);
    }
    let wi = g.node_weight[i];
    acc.add(g.node_normal[i] * (wi * (wi / (2.0 * PI)).ln()));
    acc.value() / (2.0 * PI)
}

/// Single-layer velocity at marker `i` of the curve.
pub fn boundary_velocity(curve: &MarkerCurve, i: usize) -> Result<Vec2> {
    if i >= curve.len() {
        return Err(Error::InvalidInput(format!(
            "marker index {i} out of range {}",
            curve.len()
        )));
    }
    let g = CurveGeom::new(curve)?;
    let v = marker_velocity(&g, i);
    if !v.is_finite() {
        return Err(Error::NonFiniteVelocity(i));
    }
    Ok(v)
}

/// Velocities at every marker, in marker order.
pub fn velocity_field_on_markers(curve: &MarkerCurve) -> Result<Vec<Vec2>> {
    let g = CurveGeom::new(curve)?;
    velocities_of_geom(&g)
}

fn velocities_of_geom(g: &CurveGeom) -> Result<Vec<Vec2>> {
    (0..g.len())
        .into_par_iter()
        .map(|i| {
            let v = marker_velocity(g, i);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteVelocity(i))
            }
        })
        .collect()
}

/// One classical Runge-Kutta increment (ds times the weighted stage mean)
/// for every marker, plus optionally for a set of passive tracer points
/// carried through the same stage fields.
fn rk4_increments(
    pts: &[Vec2],
    tracers: &[Vec2],
    ds: f64,
) -> Result<(Vec<Vec2>, Vec<Vec2>)> {
    let stage = |base: &[Vec2], k: &[Vec2], h: f64| -> Vec<Vec2> {
        base.iter().zip(k).map(|(p, v)| *p + *v * h).collect()
    };
    let eval = |cur: &[Vec2]| -> Result<(Vec<Vec2>, CurveGeom)> {
        if polygon_area(cur) <= 0.0 {
            return Err(Error::InvalidCurve("stage polygon area is nonpositive".into()));
        }
        let g = CurveGeom::from_points(cur)?;
        let vm = velocities_of_geom(&g)?;
        Ok((vm, g))
    };

    let (k1, g1) = eval(pts)?;
    let t1: Vec<Vec2> = tracers.iter().map(|&p| velocity_anywhere(&g1, p)).collect();
    let p2 = stage(pts, &k1, 0.5 * ds);
    let (k2, g2) = eval(&p2)?;
    let tr2 = stage(tracers, &t1, 0.5 * ds);
    let t2: Vec<Vec2> = tr2.iter().map(|&p| velocity_anywhere(&g2, p)).collect();
    let p3 = stage(pts, &k2, 0.5 * ds);
    let (k3, g3) = eval(&p3)?;
    let tr3 = stage(tracers, &t2, 0.5 * ds);
    let t3: Vec<Vec2> = tr3.iter().map(|&p| velocity_anywhere(&g3, p)).collect();
    let p4 = stage(pts, &k3, ds);
    let (k4, g4) = eval(&p4)?;
    let tr4 = stage(tracers, &t3, ds);
    let t4: Vec<Vec2> = tr4.iter().map(|&p| velocity_anywhere(&g4, p)).collect();

    let sixth = ds / 6.0;
    let combine = |a: &[Vec2], b: &[Vec2], c: &[Vec2], d: &[Vec2]| -> Vec<Vec2> {
        (0..a.len())
            .map(|i| (a[i] + (b[i] + c[i]) * 2.0 + d[i]) * sixth)
            .collect()
    };
    let dm = combine(&k1, &k2, &k3, &k4);
    if dm.iter().any(|v| !v.is_finite()) {
        let i = dm.iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::NonFiniteVelocity(i));
    }
    let dt = combine(&t1, &t2, &t3, &t4);
    Ok((dm, dt))
}

/// One Runge-Kutta step of `cfg.ds`. With `ds = 0` the state comes back
/// unchanged. The spacing-ratio redistribution trigger applies afterwards;
/// the every-K schedule belongs to `run`.
pub fn rk4_step(state: &PatchState, cfg: &StepperConfig) -> Result<PatchState> {
    if cfg.ds == 0.0 {
        return Ok(state.clone());
    }
    let (dm, _) = rk4_increments(state.curve.points(), &[], cfg.ds)?;
    let pts: Vec<Vec2> = state.curve.points().iter().zip(&dm).map(|(p, d)| *p + *d).collect();
    let mut curve = MarkerCurve::new(pts)?;
    let m = curve.metrics();
    if m.max_spacing / m.min_spacing > 2.0 {
        curve = curve.redistribute(cfg.n_markers)?;
    }
    Ok(PatchState { curve, s: state.s + cfg.ds, area0: state.area0 })
}

/// Evolve from `state0.s` to `s_end` (either direction), invoking the
/// observer on the initial state and after every accepted step.
///
/// The last step is shortened to land exactly on `s_end`. Position updates
/// are compensated across steps so that step-size refinement studies see the
/// integrator order rather than accumulation round-off. Marker labels for
/// the mu diagnostic are carried by up to 128 passive tracers seeded on the
/// initial markers; tracers survive redistribution, which resamples markers
/// but not material points.
///
/// Topology failures (self-intersection at redistribution, degenerate stage
/// geometry, vanishing area) end the run early with `blew_up = true` and the
/// last valid state; genuinely numerical failures (non-finite velocities)
/// and invalid configurations are errors.
pub fn run<F>(state0: PatchState, cfg: &StepperConfig, s_end: f64, mut observer: F) -> Result<RunOutcome>
where
    F: FnMut(&PatchState, &DiagnosticsRecord),
{
    if cfg.ds == 0.0 {
        return Err(Error::InvalidInput("run requires ds > 0".into()));
    }
    if !s_end.is_finite() {
        return Err(Error::InvalidInput(format!("s_end must be finite, got {s_end}")));
    }

    let n0 = state0.curve.len();
    let tracer_stride = n0.div_ceil(128);
    let tracer_labels: Vec<Vec2> =
        state0.curve.points().iter().step_by(tracer_stride).copied().collect();

    let mut pos: Vec<KahanVec2> =
        state0.curve.points().iter().map(|&p| KahanVec2::with_value(p)).collect();
    let mut tracers: Vec<KahanVec2> =
        tracer_labels.iter().map(|&p| KahanVec2::with_value(p)).collect();

    let mut state = state0;
    let mut steps = 0usize;
    let dir = if s_end >= state.s { 1.0 } else { -1.0 };

    let record_of = |state: &PatchState, steps: usize, mu: f64, redistributed: bool| {
        let m = state.curve.metrics();
        DiagnosticsRecord {
            step: steps,
            s: state.s,
            t: state.t(),
            area: m.area,
            area_ratio_error: m.area / state.area0 - (-state.s).exp(),
            centroid: m.centroid,
            mu,
            min_spacing: m.min_spacing,
            max_spacing: m.max_spacing,
            redistributed,
        }
    };

    observer(&state, &record_of(&state, 0, 1.0, false));

    loop {
        let remaining = (s_end - state.s) * dir;
        if remaining <= 1e-12 * cfg.ds {
            break;
        }
        let h = dir * remaining.min(cfg.ds);
        let cur_pts: Vec<Vec2> = pos.iter().map(|k| k.value()).collect();
        let cur_tr: Vec<Vec2> = tracers.iter().map(|k| k.value()).collect();

        let (dm, dt) = match rk4_increments(&cur_pts, &cur_tr, h) {
            Ok(x) => x,
            Err(Error::NonFiniteVelocity(i)) => return Err(Error::NonFiniteVelocity(i)),
            Err(Error::InvalidCurve(_)) | Err(Error::DegenerateTangent(_)) => {
                return Ok(RunOutcome { state, blew_up: true, steps });
            }
            Err(e) => return Err(e),
        };
        for (k, d) in pos.iter_mut().zip(&dm) {
            k.add(*d);
        }
        for (k, d) in tracers.iter_mut().zip(&dt) {
            k.add(*d);
        }
        steps += 1;

        let is_last = remaining <= cfg.ds * (1.0 + 1e-12);
        let s_new = if is_last { s_end } else { state.s + h };
        let new_pts: Vec<Vec2> = pos.iter().map(|k| k.value()).collect();
        let curve = match MarkerCurve::new(new_pts) {
            Ok(c) => c,
            // Collapsed or orientation-flipped polygon: embedding lost.
            Err(_) => return Ok(RunOutcome { state, blew_up: true, steps: steps - 1 }),
        };
        let mut next = PatchState { curve, s: s_new, area0: state.area0 };

        let ratio = {
            let m = next.curve.metrics();
            m.max_spacing / m.min_spacing
        };
        let scheduled =
            cfg.redistribute_every > 0 && steps % cfg.redistribute_every == 0;
        let mut redistributed = false;
        if ratio > 2.0 || scheduled {
            match next.curve.redistribute(cfg.n_markers) {
                Ok(c) => {
                    next.curve = c;
                    pos = next.curve.points().iter().map(|&p| KahanVec2::with_value(p)).collect();
                    redistributed = true;
                }
                Err(Error::SelfIntersection(_, _)) => {
                    return Ok(RunOutcome { state: next, blew_up: true, steps });
                }
                Err(e) => return Err(e),
            }
        }

        let cur_tr: Vec<Vec2> = tracers.iter().map(|k| k.value()).collect();
        let mu = bilipschitz_points(&tracer_labels, &cur_tr);
        let rec = record_of(&next, steps, mu, redistributed);
        if rec.area <= 0.0 {
            return Ok(RunOutcome { state, blew_up: true, steps });
        }
        observer(&next, &rec);
        state = next;
    }

    Ok(RunOutcome { state, blew_up: false, steps })
}
