use serde::{Deserialize, Serialize};

/// Continuous robot pose in the map frame: meters, `y` pointing down the
/// raster rows, heading counter-clockwise from `+x` as seen on the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl ContinuousPose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    /// Unit direction of travel in `(x, y)` raster coordinates.
    pub fn direction(&self) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (c, -s)
    }

    pub fn normalized(self) -> Self {
        Self { heading: self.heading.rem_euclid(std::f64::consts::TAU), ..self }
    }
}
