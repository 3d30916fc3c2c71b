//! Closed-form reference solutions: the collapsing disc/ball family and the
//! ellipse semi-axis reduction. These are the oracles every numerical module
//! is tested against.
//!
//! Formulas are kept in the original time t internally; the rescaled time
//! s = log(1/(1-t)) enters only through the converters below.

use crate::error::{Error, Result};
use crate::geometry::MarkerCurve;
use crate::shapes;
use crate::vec2::Vec2;

/// Rescaled time of an original time t < 1.
pub fn s_of_t(t: f64) -> f64 {
    -(1.0 - t).ln()
}

/// Original time of a rescaled time; t = 1 - e^{-s} < 1 always.
pub fn t_of_s(s: f64) -> f64 {
    -(-s).exp_m1()
}

/// Disc of initial radius `r0`, collapsing self-similarly onto its center.
#[derive(Clone, Copy, Debug)]
pub struct DiscSolution {
    pub center: Vec2,
    pub r0: f64,
}

impl DiscSolution {
    pub fn new(center: Vec2, r0: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::InvalidInput(format!("disc radius must be positive, got {r0}")));
        }
        Ok(DiscSolution { center, r0 })
    }

    pub fn unit() -> Self {
        DiscSolution { center: Vec2::ZERO, r0: 1.0 }
    }

    /// Radius at rescaled time s: r0 e^{-s/2}, valid for all real s.
    pub fn radius_at_s(&self, s: f64) -> f64 {
        self.r0 * (-0.5 * s).exp()
    }

    /// Radius at original time t < 1: r0 sqrt(1-t).
    pub fn radius_at_t(&self, t: f64) -> f64 {
        self.r0 * (1.0 - t).sqrt()
    }

    /// Boundary markers at rescaled time s.
    pub fn boundary(&self, s: f64, n: usize) -> Result<MarkerCurve> {
        shapes::circle(self.center, self.radius_at_s(s), n)
    }

    /// The globally continuous piecewise velocity field in original time:
    /// -(x-c)/(2(1-t)) inside the disc, -r0^2 (x-c)/(2|x-c|^2) outside.
    pub fn velocity(&self, x: Vec2, t: f64) -> Vec2 {
        let r = x - self.center;
        let rad = self.radius_at_t(t);
        if r.norm() <= rad {
            r * (-0.5 / (1.0 - t))
        } else {
            r * (-0.5 * self.r0 * self.r0 / r.norm_sq())
        }
    }

    /// Velocity in rescaled time (what the contour markers follow): -(x-c)/2
    /// inside, independent of the radius; -R_s^2 (x-c)/(2|x-c|^2) outside.
    pub fn velocity_rescaled(&self, x: Vec2, s: f64) -> Vec2 {
        let r = x - self.center;
        let rad = self.radius_at_s(s);
        if r.norm() <= rad {
            r * -0.5
        } else {
            r * (-0.5 * rad * rad / r.norm_sq())
        }
    }

    /// Inverse flow map X^{-1}(x, t): the label at time 0 of the trajectory
    /// passing through x at time t. Piecewise: x/sqrt(1-t) inside,
    /// sqrt(|x|^2 + t) x/|x| outside (unit disc; general r0 by similarity).
    pub fn inverse_flow(&self, x: Vec2, t: f64) -> Vec2 {
        let y = (x - self.center) / self.r0;
        let rho = y.norm();
        let shrink = (1.0 - t).sqrt();
        let label = if rho < shrink {
            y / shrink
        } else if rho == 0.0 {
            y
        } else {
            y * ((rho * rho + t).sqrt() / rho)
        };
        self.center + label * self.r0
    }

    /// Forward flow map X(label, t) on labels, the inverse of
    /// `inverse_flow`: sqrt(1-t) label inside the unit-label disc,
    /// sqrt(|label|^2 - t) label/|label| outside.
    pub fn forward_flow(&self, label: Vec2, t: f64) -> Vec2 {
        let y = (label - self.center) / self.r0;
        let rho = y.norm();
        let x = if rho < 1.0 {
            y * (1.0 - t).sqrt()
        } else {
            y * ((rho * rho - t).sqrt() / rho)
        };
        self.center + x * self.r0
    }
}

/// Radius of the collapsing d-dimensional ball at original time t:
/// r0 (1-t)^{1/d}, forced by mass conservation.
pub fn ball_radius(d: usize, r0: f64, t: f64) -> Result<f64> {
    if d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    Ok(r0 * (1.0 - t).powf(1.0 / d as f64))
}

/// Origin-centered axis-aligned ellipse under the patch flow. The semi-axes
/// obey da/ds = db/ds = -ab/(a+b) in rescaled time, so a - b is conserved
/// and the ellipse collapses onto a segment of half-length a0 - b0.
///
/// The rate law is a derived oracle; its independent verification (interior
/// field against area quadrature) lives in the field module tests.
#[derive(Clone, Copy, Debug)]
pub struct EllipseSolution {
    a: f64,
    b: f64,
}

impl EllipseSolution {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= b && b > 0.0) || !a.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ellipse semi-axes need a >= b > 0, got a={a}, b={b}"
            )));
        }
        Ok(EllipseSolution { a, b })
    }

    pub fn axes(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.a * self.b
    }

    /// Interior velocity field in rescaled time:
    /// (-b x / (a+b), -a y / (a+b)). Linear, divergence -1.
    pub fn interior_velocity(&self, x: Vec2) -> Vec2 {
        let denom = self.a + self.b;
        Vec2::new(-self.b * x.x / denom, -self.a * x.y / denom)
    }

    /// Boundary markers, arc-equispaced.
    pub fn boundary(&self, n: usize) -> Result<MarkerCurve> {
        shapes::ellipse(Vec2::ZERO, self.a, self.b, n)
    }

    /// One classical Runge-Kutta step of size ds on the axis ODE. Both axes
    /// share every stage derivative, so a - b is conserved bitwise.
    pub fn step(&self, ds: f64) -> Result<EllipseSolution> {
        let f = |a: f64, b: f64| -> Result<f64> {
            if b <= 0.0 || a <= 0.0 {
                return Err(Error::CollapseComplete);
            }
            Ok(-a * b / (a + b))
        };
        let k1 = f(self.a, self.b)?;
        let k2 = f(self.a + 0.5 * ds * k1, self.b + 0.5 * ds * k1)?;
        let k3 = f(self.a + 0.5 * ds * k2, self.b + 0.5 * ds * k2)?;
        let k4 = f(self.a + ds * k3, self.b + ds * k3)?;
        let dq = ds * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        let (a, b) = (self.a + dq, self.b + dq);
        if b <= 0.0 {
            return Err(Error::CollapseComplete);
        }
        Ok(EllipseSolution { a, b })
    }

    /// Integrate the axis ODE from s = 0 to `s` with uniform steps of at
    /// most `ds` (the final step shortened to land exactly).
    pub fn evolve(&self, s: f64, ds: f64) -> Result<EllipseSolution> {
        if !(ds > 0.0) {
            return Err(Error::InvalidInput(format!("ODE step must be positive, got {ds}")));
        }
        let steps = (s.abs() / ds).ceil().max(1.0) as usize;
        let h = s / steps as f64;
        let mut cur = *self;
        for _ in 0..steps {
            cur = cur.step(h)?;
        }
        Ok(cur)
    }
}
