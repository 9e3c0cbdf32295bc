//! One-step entropy lookahead.

use std::collections::HashMap;
use std::sync::Arc;

use super::{ActionDist, PolicyInput, PolicyProvider};
use crate::error::{Error, Result};
use crate::filter::{entropy, measurement_update, transition, Action, BeliefGrid, MotionNoise};
use crate::lidar::ScanMatrix;
use crate::likelihood::{cosine_scores, tempered_softmax, top_indices, Level, LikelihoodGrid};
use crate::mapgen::GridMap;
use crate::num::Scalar;

#[derive(Debug, Clone)]
pub struct LookaheadConfig<T> {
    /// Most probable predicted poses evaluated per action.
    pub top_h: usize,
    /// Temperature of the simulated likelihoods.
    pub beta: f64,
    pub noise: MotionNoise,
    pub matrix: Option<Arc<ScanMatrix<T>>>,
}

impl<T> LookaheadConfig<T> {
    pub fn new(matrix: Arc<ScanMatrix<T>>, beta: f64, noise: MotionNoise) -> Self {
        Self { top_h: 16, beta, noise, matrix: Some(matrix) }
    }
}

/// Picks the action whose predicted belief, updated with the noiseless scan
/// of each likely hypothesis, has the lowest expected entropy.
#[derive(Debug, Clone)]
pub struct AmlPolicy<T> {
    top_h: usize,
    beta: f64,
    noise: MotionNoise,
    matrix: Arc<ScanMatrix<T>>,
}

impl<T: Scalar> AmlPolicy<T> {
    pub fn new(cfg: LookaheadConfig<T>) -> Result<Self> {
        let matrix = cfg.matrix.ok_or_else(|| Error::Config("lookahead needs a scan matrix".into()))?;
        if cfg.top_h == 0 {
            return Err(Error::param("top_h must be at least 1"));
        }
        if !(cfg.beta.is_finite() && cfg.beta > 0.0) {
            return Err(Error::param(format!("temperature β = {} must be positive", cfg.beta)));
        }
        cfg.noise.validate()?;
        Ok(Self { top_h: cfg.top_h, beta: cfg.beta, noise: cfg.noise, matrix })
    }

    /// Expected posterior entropy for each action, in `[Left, Right, Forward]` order.
    pub fn expected_entropies(&self, belief: &BeliefGrid<T>, map: &GridMap) -> Result<[f64; 3]> {
        let mut cache: HashMap<usize, LikelihoodGrid<T>> = HashMap::new();
        let mut out = [0.0; 3];
        for a in Action::ALL {
            let prior = transition(belief, a, &self.noise, map)?;
            let values = prior.as_slice();
            let hyps: Vec<usize> =
                top_indices(values, self.top_h).into_iter().filter(|i| values[*i] > T::zero()).collect();
            let (mut num, mut den) = (0.0, 0.0);
            for x in hyps {
                let w = values[x].f64();
                let lik = match cache.get(&x) {
                    Some(l) => l,
                    None => {
                        let scan = self.matrix.scan(prior.shape().pose(x));
                        let l = tempered_softmax(&cosine_scores(&self.matrix, &scan)?, self.beta, Level::Coarse)?;
                        cache.entry(x).or_insert(l)
                    }
                };
                let post = measurement_update(&prior, lik)?;
                num += w * entropy(&post.belief);
                den += w;
            }
            out[a.index()] = if den > 0.0 { num / den } else { entropy(&prior) };
        }
        Ok(out)
    }
}

/// Expected entropies closer than this are ties.
pub const ENTROPY_TIE_TOL: f64 = 1e-6;

/// Index of the smallest value, the earliest on ties (within
/// [`ENTROPY_TIE_TOL`]).
pub fn argmin_action(values: &[f64; 3]) -> Action {
    let mut best = Action::Left;
    for a in Action::ALL {
        if values[a.index()] < values[best.index()] - ENTROPY_TIE_TOL {
            best = a;
        }
    }
    best
}

impl<T: Scalar> PolicyProvider<T> for AmlPolicy<T> {
    fn action_dist(&self, input: &PolicyInput<'_, T>) -> Result<ActionDist> {
        let h = self.expected_entropies(input.belief, input.map)?;
        Ok(ActionDist::one_hot(argmin_action(&h)))
    }

    fn name(&self) -> &str {
        "aml"
    }
}
