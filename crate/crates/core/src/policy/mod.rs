//! Action selection: the provider interface and classical baselines.

mod aml;

pub use aml::{argmin_action, AmlPolicy, LookaheadConfig};

use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{map_estimate, Action, BeliefGrid, MotionNoise};
use crate::lidar::ScanMatrix;
use crate::mapgen::GridMap;
use crate::num::Scalar;

/// Probabilities of `[Left, Right, Forward]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionDist(pub [f64; 3]);

impl ActionDist {
    pub fn uniform() -> Self {
        Self([1.0 / 3.0; 3])
    }

    pub fn one_hot(a: Action) -> Self {
        let mut p = [0.0; 3];
        p[a.index()] = 1.0;
        Self(p)
    }

    /// Checks the entries are a distribution (to `1e-6`) and renormalizes.
    pub fn normalized(p: [f64; 3]) -> Result<Self> {
        let total: f64 = p.iter().sum();
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::Input(format!("{p:?} is not a probability distribution over actions")));
        }
        Ok(Self(p.map(|v| v / total)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for a in Action::ALL {
            acc += self.0[a.index()];
            if u < acc {
                return a;
            }
        }
        Action::ALL.into_iter().rev().find(|a| self.0[a.index()] > 0.0).unwrap_or(Action::Forward)
    }

    /// Most probable action, the earliest on ties.
    pub fn argmax(&self) -> Action {
        let mut best = Action::Left;
        for a in Action::ALL {
            if self.0[a.index()] > self.0[best.index()] {
                best = a;
            }
        }
        best
    }
}

/// What a policy sees at each step.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput<'a, T> {
    pub belief: &'a BeliefGrid<T>,
    pub map: &'a GridMap,
    /// Coarse obstacle map, `N × M`.
    pub map_low: &'a [f32],
    /// Coarse scan-endpoint image, `N × M`.
    pub scan_low: &'a [f32],
}

pub trait PolicyProvider<T: Scalar>: Send + Sync {
    fn action_dist(&self, input: &PolicyInput<'_, T>) -> Result<ActionDist>;

    fn name(&self) -> &str;
}

/// Uniform over the three actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl<T: Scalar> PolicyProvider<T> for RandomPolicy {
    fn action_dist(&self, _: &PolicyInput<'_, T>) -> Result<ActionDist> {
        Ok(ActionDist::uniform())
    }

    fn name(&self) -> &str {
        "random"
    }
}

/// Always the same action.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub Action);

impl<T: Scalar> PolicyProvider<T> for ConstantPolicy {
    fn action_dist(&self, _: &PolicyInput<'_, T>) -> Result<ActionDist> {
        Ok(ActionDist::one_hot(self.0))
    }

    fn name(&self) -> &str {
        match self.0 {
            Action::Left => "left",
            Action::Right => "right",
            Action::Forward => "forward",
        }
    }
}

/// Forward unless the most probable pose faces a blocked cell, then Left.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPolicy;

impl<T: Scalar> PolicyProvider<T> for GreedyPolicy {
    fn action_dist(&self, input: &PolicyInput<'_, T>) -> Result<ActionDist> {
        let pose = map_estimate(input.belief);
        let a = if input.map.forward_cell(pose).is_some() { Action::Forward } else { Action::Left };
        Ok(ActionDist::one_hot(a))
    }

    fn name(&self) -> &str {
        "greedy"
    }
}

/// Built-in policies by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    Random,
    Aml,
    Greedy,
    Constant(Action),
}

impl PolicyKind {
    /// Instantiates the policy for one map. Lookahead uses the map's scan
    /// matrix, temperature `beta` and transition noise `noise`.
    pub fn build<T: Scalar>(
        &self,
        matrix: &Arc<ScanMatrix<T>>,
        beta: f64,
        noise: MotionNoise,
    ) -> Result<Box<dyn PolicyProvider<T>>> {
        Ok(match self {
            PolicyKind::Random => Box::new(RandomPolicy),
            PolicyKind::Aml => Box::new(AmlPolicy::new(LookaheadConfig::new(Arc::clone(matrix), beta, noise))?),
            PolicyKind::Greedy => Box::new(GreedyPolicy),
            PolicyKind::Constant(a) => Box::new(ConstantPolicy(*a)),
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "random" | "ra" => PolicyKind::Random,
            "aml" => PolicyKind::Aml,
            "greedy" => PolicyKind::Greedy,
            "left" => PolicyKind::Constant(Action::Left),
            "right" => PolicyKind::Constant(Action::Right),
            "forward" => PolicyKind::Constant(Action::Forward),
            _ => return Err(Error::param(format!("unknown policy {s:?}"))),
        })
    }
}
