//! Numerical laboratory for transportation cost-information inequalities.
//!
//! The crate computes Wasserstein distances and relative entropies exactly on
//! finite metric spaces, checks `W_p(μ, ν) ≤ √(2C·H(ν|μ))` against adversarial
//! candidates, builds dependent tensorizations of such inequalities for
//! sequential models, and simulates the diffusions and path-space Gaussian
//! laws whose constants are known in closed form.

pub mod dynamics;
pub mod error;
pub mod measure;
pub mod pathspace;
pub mod stats;
pub mod tensorize;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use measure::{
    lipschitz_regularize, path_distance, product_space, DiscreteMeasure, FiniteMetricSpace,
    LipschitzFunction, PathGrid, PathMetric,
};
pub use transport::{
    gaussian_kl, gaussian_w2, kl_divergence, total_variation, transport_lp, wasserstein_exact,
    TransportPlan,
};
