//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building curves, evaluating kernels,
/// stepping the flow, or querying transported grids.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad user-supplied parameter (counts, tolerances, exponents, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A marker polygon that fails the embeddedness preconditions.
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    /// Kernels are only implemented for dimensions 2 and 3.
    #[error("unsupported dimension {0}, expected 2 or 3")]
    UnsupportedDimension(usize),

    /// Kernel evaluation at its singularity.
    #[error("kernel evaluated at the origin")]
    SingularPoint,

    /// Component indices outside the dimension.
    #[error("component ({j}, {k}) out of range for dimension {dim}")]
    BadComponent { dim: usize, j: usize, k: usize },

    /// Off-boundary evaluators lose accuracy close to the curve.
    #[error("point is {dist:.3e} from the boundary, closer than the limit {limit:.3e}")]
    NearBoundary { dist: f64, limit: f64 },

    /// The four-point tangent stencil collapsed at a marker.
    #[error("degenerate tangent stencil at marker {0}")]
    DegenerateTangent(usize),

    /// Two non-adjacent boundary segments cross.
    #[error("curve self-intersection between segments {0} and {1}")]
    SelfIntersection(usize, usize),

    /// Operations pairing two curves marker by marker need equal counts.
    #[error("marker counts differ: {0} vs {1}")]
    MarkerCountMismatch(usize, usize),

    /// Interpolation query outside the valid interior of a grid.
    #[error("point ({0:.6}, {1:.6}) outside the grid interior")]
    OutsideGrid(f64, f64),

    /// A flow history that does not cover the requested time.
    #[error("flow history does not cover s = {0}")]
    HistoryCoverage(f64),

    /// A traced trajectory left the safety box around the initial domain.
    #[error("traced trajectory escaped the initial bounding box near s = {0}")]
    TrajectoryEscape(f64),

    /// The boundary integral produced a NaN or infinity.
    #[error("non-finite velocity at marker {0}")]
    NonFiniteVelocity(usize),

    /// Ellipse axis reduction drove the minor axis to zero within one step.
    #[error("ellipse collapse complete: semi-minor axis reached zero")]
    CollapseComplete,
}
