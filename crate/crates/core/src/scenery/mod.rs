//! Scenery flow, magnification dynamics, centering and diagnostics.

pub mod cp;
pub mod diagnostics;
pub mod ensemble;
pub mod flow;
pub mod pointed;

pub use ensemble::{distribution_distance, EmpiricalDistribution, MetricSpec};
pub use flow::scenery_distribution;
pub use pointed::{
    b_scenery_distribution, center_continuous, center_discrete, BSceneryOptions, PointedEnsemble,
    PointedMeasure,
};
