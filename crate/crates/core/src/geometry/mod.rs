//! Riemannian curvature on coordinate charts.

mod chart;
mod covariant;
mod curvature;
mod tensor;

pub use chart::{Chart, ChartFile, LowDimJet, MetricJet};
pub(crate) use chart::grid_points;
pub use covariant::{covariant_derivative, TensorField};
pub use curvature::{curvature, einstein_residual, CurvaturePack, IdentityResiduals, LocalGeometry};
pub use tensor::{invert, Tensor};

#[cfg(test)]
mod tests;
