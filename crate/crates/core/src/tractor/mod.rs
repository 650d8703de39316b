//! The standard tractor bundle in components.

mod circle;
mod connection;
mod transport;
mod value;

pub use circle::{circle_ode_solutions, zeros_in, CircleSolutions};
pub use connection::{
    connection_matrices, derivative_from_jet, low_dim_connection, thomas_d, thomas_d_at, tractor_connection,
    tractor_curvature, tractor_derivative, SecondJet,
};
pub use transport::{
    parallel_transport, transport_chain, transport_fixed, transport_matrix, Curve, TransportOptions, TransportResult,
};
pub(crate) use value::inverse_metric;
pub use value::{
    metric_matrix, metric_matrix_at, pair, tractor_metric, transform_slots, transform_tractor, TractorField,
    TractorValue,
};

#[cfg(test)]
mod tests;
