//! Run configuration: JSON schema, validation with field-naming messages,
//! and construction of the initial marker curve.

use aggpatch_core::geometry::MarkerCurve;
use aggpatch_core::levelset::GridSpec;
use aggpatch_core::{shapes, Vec2};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum ShapeSpec {
    Disc { r0: f64, center: [f64; 2] },
    Ellipse { a: f64, b: f64 },
    FourierCircle { r0: f64, modes: Vec<ModeSpec> },
    PolygonFile { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: u32,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

fn default_snapshot_every() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub initial_shape: ShapeSpec,
    pub n_markers: usize,
    pub ds: f64,
    pub s_end: f64,
    #[serde(default)]
    pub redistribute_every: usize,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    pub gamma: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub svg: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("config does not parse: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-by-field checks; the message names the violated constraint.
    pub fn validate(&self) -> Result<(), String> {
        if self.n_markers < 8 {
            return Err("n_markers ≥ 8".into());
        }
        if !(self.ds > 0.0) || !self.ds.is_finite() {
            return Err("ds > 0".into());
        }
        if self.ds > 0.1 {
            return Err("ds ≤ 0.1".into());
        }
        if !self.s_end.is_finite() {
            return Err("s_end finite".into());
        }
        if self.snapshot_every == 0 {
            return Err("snapshot_every ≥ 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err("gamma ∈ (0,1)".into());
        }
        match &self.initial_shape {
            ShapeSpec::Disc { r0, .. } if !(*r0 > 0.0) => {
                return Err("initial_shape.r0 > 0".into())
            }
            ShapeSpec::Ellipse { a, b } if !(*a > 0.0 && *b > 0.0 && a >= b) => {
                return Err("initial_shape requires a ≥ b > 0".into())
            }
            ShapeSpec::FourierCircle { r0, .. } if !(*r0 > 0.0) => {
                return Err("initial_shape.r0 > 0".into())
            }
            _ => {}
        }
        if let Some(g) = &self.grid {
            if !(g.spacing > 0.0) || g.nx < 8 || g.ny < 8 {
                return Err("grid requires spacing > 0 and nx, ny ≥ 8".into());
            }
        }
        Ok(())
    }

    /// Build the initial boundary at the configured marker count.
    pub fn initial_curve(&self) -> Result<MarkerCurve, String> {
        let n = self.n_markers;
        let curve = match &self.initial_shape {
            ShapeSpec::Disc { r0, center } => {
                shapes::circle(Vec2::new(center[0], center[1]), *r0, n)
            }
            ShapeSpec::Ellipse { a, b } => shapes::ellipse(Vec2::ZERO, *a, *b, n),
            ShapeSpec::FourierCircle { r0, modes } => {
                let ms: Vec<shapes::FourierMode> = modes
                    .iter()
                    .map(|m| shapes::FourierMode {
                        k: m.k,
                        amplitude: m.amplitude,
                        phase: m.phase,
                    })
                    .collect();
                shapes::fourier_circle(Vec2::ZERO, *r0, &ms, n)
            }
            ShapeSpec::PolygonFile { path } => {
                let pts = crate::io::read_polygon(path)?;
                let raw = MarkerCurve::new(pts)
                    .map_err(|e| format!("initial_shape.path content invalid: {e}"))?;
                raw.redistribute(n)
            }
        };
        curve.map_err(|e| format!("initial_shape invalid: {e}"))
    }

    pub fn grid_spec(&self) -> Option<GridSpec> {
        self.grid.as_ref().map(|g| GridSpec {
            origin: Vec2::new(g.origin[0], g.origin[1]),
            spacing: g.spacing,
            nx: g.nx,
            ny: g.ny,
        })
    }
}

/// Analytic-solution reference for `compare` and `exact`: which closed-form
/// boundary, at which rescaled time, and how close a snapshot must sit.
#[derive(Debug, Deserialize)]
#[serde(tag = "solution", deny_unknown_fields, rename_all = "snake_case")]
pub enum ExactSpec {
    Disc {
        r0: f64,
        #[serde(default)]
        center: [f64; 2],
        s: f64,
        #[serde(default)]
        tolerance: Option<f64>,
        #[serde(default)]
        n: Option<usize>,
    },
    Ellipse {
        a: f64,
        b: f64,
        s: f64,
        #[serde(default)]
        tolerance: Option<f64>,
        #[serde(default)]
        n: Option<usize>,
    },
}

impl ExactSpec {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read exact-spec {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("exact-spec does not parse: {e}"))
    }

    pub fn s(&self) -> f64 {
        match self {
            ExactSpec::Disc { s, .. } | ExactSpec::Ellipse { s, .. } => *s,
        }
    }

    pub fn tolerance(&self) -> Option<f64> {
        match self {
            ExactSpec::Disc { tolerance, .. } | ExactSpec::Ellipse { tolerance, .. } => *tolerance,
        }
    }
}
