//! Imitation learning from multiple suboptimal oracles with a
//! max-aggregated value baseline and λ-weighted advantages, plus exact
//! dynamic programming on tabular MDPs to check every quantity involved.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

pub mod dp;
pub mod env;
pub mod error;
pub mod learner;
pub mod optim;
pub(crate) mod nn;
pub mod policy;
pub mod rollout;
pub mod scalar;
pub mod value;
pub mod verify;

pub use error::{MambaError, Result};
pub use scalar::Scalar;

pub type Mdp = env::TabularMdp<f64>;
pub type Policy = policy::PolicyParams<f64>;
pub type Table = dp::ValueTable<f64>;
pub type TablePolicy = dp::TabularPolicy<f64>;
pub type Traj = rollout::Trajectory<f64>;
pub type Obs = env::Observation<f64>;
pub type Model = value::ValueModel<f64>;
pub type Gradient = learner::GradientEstimate<f64>;
pub type Record = learner::RunRecord<f64>;
