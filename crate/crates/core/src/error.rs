use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point has non-positive depth {0} in the camera frame")]
    NonPositiveDepth(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("rotation is not orthonormal with determinant +1 (deviation {0:e})")]
    NonRigidRotation(f64),
    #[error("raster shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: (usize, usize), actual: (usize, usize) },
    #[error("invalid view maps: {0}")]
    InvalidMaps(&'static str),
    #[error("normal is not unit length (norm {0})")]
    NonUnitNormal(f64),
    #[error("reflectance must have 1 or 3 channels, got {0}")]
    UnsupportedChannels(usize),
    #[error("invalid reflectance: {0}")]
    InvalidReflectance(&'static str),
    #[error("illumination matrix is singular")]
    SingularLighting,
    #[error("radiance is degenerate (near-black surface)")]
    DegenerateRadiance,
    #[error("reflectance p-norm exceeds the channel count")]
    NormOverflow,
    #[error("normal is grazing the pixel ray (|n.d| = {0:e})")]
    GrazingNormal(f64),
    #[error("integration system is singular (patch disconnected from its center)")]
    SingularSystem,
    #[error("pixel ray is parallel to the slanted patch plane")]
    RayPlaneParallel,
    #[error("only {found} control views contributed, {required} required")]
    TooFewValidViews { found: usize, required: usize },
    #[error("no depth hypothesis produced a valid cost")]
    NoValidHypothesis,
    #[error("at least {required} views are required, got {found}")]
    InsufficientViews { found: usize, required: usize },
    #[error("no pixel is valid in both rasters")]
    EmptyOverlap,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("patch center is not usable: {0}")]
    InvalidPatch(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}
