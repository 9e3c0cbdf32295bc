use super::belief::BeliefGrid;
use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::likelihood::LikelihoodGrid;
use crate::num::Scalar;

/// Result of a measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    pub belief: BeliefGrid<T>,
    /// The product carried no mass; `belief` is the unchanged prior.
    pub degenerate: bool,
}

/// Elementwise product of prior and likelihood, renormalized.
pub fn measurement_update<T: Scalar>(prior: &BeliefGrid<T>, likelihood: &LikelihoodGrid<T>) -> Result<Posterior<T>> {
    if prior.shape() != likelihood.shape() {
        return Err(Error::param(format!(
            "prior shape {:?} does not match likelihood shape {:?}",
            prior.shape().as_array(),
            likelihood.shape().as_array()
        )));
    }
    let data = prior.as_slice().iter().zip(likelihood.values.as_slice()).map(|(p, l)| *p * *l).collect();
    let mut values = Grid3::from_vec(prior.shape(), data)?;
    let total = values.normalize();
    if !(total > T::zero() && total.is_finite()) {
        return Ok(Posterior { belief: prior.clone(), degenerate: true });
    }
    Ok(Posterior { belief: BeliefGrid { values, level: prior.level }, degenerate: false })
}
