//! Projections, fiber measures and dimension conservation.

pub mod experiments;
pub mod fiber;
pub mod linear;
pub mod profile;
pub mod smooth;

pub use fiber::{conservation_report, fiber_measure, ConservationReport, Verdict};
pub use linear::{coordinate_marginal, pushforward_linear, pushforward_pair_sum, LinearMap};
pub use profile::{projection_dimension_profile, sm_lower_bound_check, SmRanges, SmReport};
