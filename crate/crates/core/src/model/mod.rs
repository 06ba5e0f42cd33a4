//! Problem instance: dynamics, residual, policy class, cost, noise and the
//! true-parameter schedule.

mod features;
mod noise;
mod schedule;
mod sets;
mod system;

pub use features::FeatureMap;
pub use noise::{NoiseDistribution, NoiseLaw};
pub use schedule::ParamSchedule;
pub use sets::ConvexSet;
pub use system::{CostWeights, SystemSpec};

#[cfg(test)]
pub(crate) use system::tests::linear_spec;
