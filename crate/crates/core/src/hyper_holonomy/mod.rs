//! Hypersurfaces through tractors, and holonomy sampled on loops.

mod holonomy;
mod minimal;
mod surface;

pub(crate) use surface::surface_point;
pub use surface::{
    generalized_mean_curvature, normal_tractor, umbilicity_residual, LevelSurface, SurfacePoint, MIN_GRADIENT,
};
pub use holonomy::{
    default_loops, detect_splitting, holonomy_sample, off_block_norm, signature, HolonomySample, InvariantSubspace,
    Loop, LoopHolonomy, Splitting, SplittingOptions, SplittingVerdict,
};
pub use minimal::{
    intersection_umbilicity, mean_curvature_constancy, IntersectionReport, IntersectionStatus, MeanCurvatureReport,
};

#[cfg(test)]
mod tests;
