//! Newtonian kernel, its derivatives, and hemisphere quadrature of angular
//! parts, in dimensions 2 and 3.

use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;
use std::f64::consts::PI;

/// Dimension-tagged kernel evaluator.
///
/// `omega` is the measure of the unit sphere S^(d-1): `2 pi` in the plane,
/// `4 pi` in space.
#[derive(Clone, Copy, Debug)]
pub struct KernelSpec {
    dim: usize,
    omega: f64,
}

impl KernelSpec {
    pub fn new(dim: usize) -> Result<Self> {
        let omega = match dim {
            2 => 2.0 * PI,
            3 => 4.0 * PI,
            _ => return Err(Error::UnsupportedDimension(dim)),
        };
        Ok(KernelSpec { dim, omega })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sphere_measure(&self) -> f64 {
        self.omega
    }

    fn check_point(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, kernel dimension is {}",
                y.len(),
                self.dim
            )));
        }
        let r2: f64 = y.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            return Err(Error::SingularPoint);
        }
        if !r2.is_finite() {
            return Err(Error::InvalidInput("non-finite point".into()));
        }
        Ok(r2)
    }

    /// Fundamental solution N of the Laplacian: `log|y| / (2 pi)` in the
    /// plane, `-1 / (4 pi |y|)` in space.
    pub fn newtonian_potential(&self, y: &[f64]) -> Result<f64> {
        let r2 = self.check_point(y)?;
        Ok(match self.dim {
            2 => 0.5 * r2.ln() / self.omega,
            _ => -1.0 / (self.omega * r2.sqrt()),
        })
    }

    /// Gradient of the potential, `y / (omega |y|^d)`.
    pub fn grad_newtonian(&self, y: &[f64]) -> Result<Vec<f64>> {
        let r2 = self.check_point(y)?;
        let scale = match self.dim {
            2 => 1.0 / (self.omega * r2),
            _ => 1.0 / (self.omega * r2 * r2.sqrt()),
        };
        Ok(y.iter().map(|&v| v * scale).collect())
    }

    /// Raw principal-value kernels of the second derivatives of N.
    ///
    /// For `j != k` this is the off-diagonal kernel
    /// `d x_j x_k / (omega |x|^(d+2))`; for `j == k` it is the zero-mean part
    /// `(|x|^2 - d x_j^2) / (omega |x|^(d+2))`. The full derivative of a
    /// convolution with an indicator adds the `-1/d` multiple of the
    /// indicator on the diagonal; callers assemble that themselves.
    ///
    /// Both kernels are even and have zero angular mean, so their integrals
    /// over any hemisphere vanish.
    pub fn pv_hessian_component(&self, j: usize, k: usize, x: &[f64]) -> Result<f64> {
        if j >= self.dim || k >= self.dim {
            return Err(Error::BadComponent { dim: self.dim, j, k });
        }
        let r2 = self.check_point(x)?;
        let d = self.dim as f64;
        let denom = self.omega * r2.powi((self.dim as i32 + 2) / 2) * if self.dim % 2 == 1 { r2.sqrt() } else { 1.0 };
        if j == k {
            Ok((r2 - d * x[j] * x[j]) / denom)
        } else {
            Ok(d * x[j] * x[k] / denom)
        }
    }

    /// Integral of `f` over the hemisphere of the unit sphere on which the
    /// coordinate `axis` is negative.
    ///
    /// In the plane this is the midpoint rule with `resolution` nodes on the
    /// half circle. In space it is a product rule, Gauss-Legendre in the
    /// polar direction and midpoint in azimuth, `resolution` nodes each, so
    /// the cost is quadratic in `resolution`.
    pub fn hemisphere_integral<F>(&self, f: F, axis: usize, resolution: usize) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64,
    {
        if axis >= self.dim {
            return Err(Error::BadComponent { dim: self.dim, j: axis, k: axis });
        }
        if resolution < 4 {
            return Err(Error::InvalidInput("hemisphere resolution must be at least 4".into()));
        }
        match self.dim {
            2 => {
                // Half circle where cos(theta - offset) < 0.
                let start = match axis {
                    0 => 0.5 * PI,
                    _ => PI,
                };
                let h = PI / resolution as f64;
                let mut sum = 0.0;
                let mut pt = [0.0f64; 2];
                for m in 0..resolution {
                    let th = start + (m as f64 + 0.5) * h;
                    pt[0] = th.cos();
                    pt[1] = th.sin();
                    sum += f(&pt);
                }
                Ok(sum * h)
            }
            _ => {
                // Polar coordinate c = component along `axis`, c in [-1, 0).
                let (nodes, weights) = gauss_legendre(resolution);
                let (ia, ib) = match axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let hphi = 2.0 * PI / resolution as f64;
                let mut sum = 0.0;
                let mut pt = [0.0f64; 3];
                for (c, wc) in nodes.iter().zip(&weights) {
                    // Map [-1, 1] to [-1, 0].
                    let c = 0.5 * (c - 1.0);
                    let wc = 0.5 * wc;
                    let rho = (1.0 - c * c).max(0.0).sqrt();
                    let mut ring = 0.0;
                    for m in 0..resolution {
                        let phi = (m as f64 + 0.5) * hphi;
                        pt[axis] = c;
                        pt[ia] = rho * phi.cos();
                        pt[ib] = rho * phi.sin();
                        ring += f(&pt);
                    }
                    sum += wc * ring * hphi;
                }
                Ok(sum)
            }
        }
    }
}
