//! Grid Bayes-filter active localization: maze maps, simulated LiDAR, scan
//! matching likelihoods, entropy lookahead and an episodic environment.

pub mod env;
pub mod error;
pub mod filter;
pub mod grid;
pub mod lidar;
pub mod likelihood;
pub mod mapgen;
pub mod num;
pub mod policy;
pub mod pose;
pub mod rng;
pub mod wire;

pub use error::{Error, Result};
pub use num::Scalar;
pub use pose::ContinuousPose;

pub type Belief = filter::BeliefGrid<f64>;
pub type Belief32 = filter::BeliefGrid<f32>;
pub type Likelihood = likelihood::LikelihoodGrid<f64>;
pub type Likelihood32 = likelihood::LikelihoodGrid<f32>;
pub type RangeScan = lidar::Scan<f64>;
pub type RangeScan32 = lidar::Scan<f32>;
pub type ScanTable = lidar::ScanMatrix<f64>;
pub type ScanTable32 = lidar::ScanMatrix<f32>;
pub type Env = env::Environment<f64>;
pub type Env32 = env::Environment<f32>;
pub type EnvServer = wire::Server<f64>;
