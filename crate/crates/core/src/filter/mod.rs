//! Discrete Bayes filter over `(heading, row, col)` poses.

mod belief;
mod motion;
mod update;

pub use belief::{entropy, map_estimate, uniform_belief, BeliefGrid, SNAPSHOT_HEADER};
pub use motion::{transition, Action, MotionNoise};
pub use update::{measurement_update, Posterior};
