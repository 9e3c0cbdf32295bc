use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::tensor::Tensor;
use crate::env::{Observation, StepInfo};
use crate::error::Result;
use crate::grid::CellPose;
use crate::lidar::LidarConfig;
use crate::likelihood::Level;
use crate::num::Scalar;

/// Bumped on any incompatible message change.
pub const PROTOCOL_VERSION: u32 = 1;

/// One request line. The `cmd` field selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Request {
    Hello {
        version: u32,
    },
    Reset {
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map_id: Option<String>,
    },
    /// `0 = Left`, `1 = Right`, `2 = Forward`.
    Step {
        action: i64,
    },
    Close,
    PolicyQuery {
        /// `Θ × N × M`.
        belief: Tensor,
        /// `N × M` coarse obstacle map.
        map: Tensor,
        /// `N × M` coarse scan image.
        scan: Tensor,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map_id: Option<String>,
    },
    LikelihoodQuery(LikelihoodQuery),
}

/// Asks a likelihood model for a coarse `Θ × N × M` grid or, with
/// `level = fine`, the `k × k` block of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodQuery {
    pub level: Level,
    /// Ranges, `+∞` for no return.
    pub scan: Tensor,
    pub lidar: LidarConfig,
    /// Full occupancy raster (coarse) or the crop around `cell` (fine).
    pub map: Tensor,
    /// Scan endpoints drawn into a raster the size of `map`.
    pub scan_image: Tensor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_id: Option<String>,
}

pub fn ok(mut body: Value) -> Value {
    if let Value::Object(m) = &mut body {
        m.insert("ok".into(), Value::Bool(true));
    }
    body
}

pub fn error_reply(msg: impl std::fmt::Display) -> Value {
    json!({ "ok": false, "error": msg.to_string() })
}

/// Hex SHA-256 of the belief as little-endian `f32`, the bytes carried in
/// the belief tensor.
pub fn belief_checksum<T: Scalar>(values: &[T]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.f32().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn observation_json<T: Scalar>(obs: &Observation<T>) -> Result<Value> {
    let s = obs.belief.shape();
    Ok(json!({
        "belief": Tensor::from_scalars(&s.as_array(), obs.belief.as_slice())?,
        "map": Tensor::from_f32(&[s.rows, s.cols], &obs.map_low)?,
        "scan": Tensor::from_f32(&[s.rows, s.cols], &obs.scan_low)?,
    }))
}

pub fn info_json<T: Scalar>(info: &StepInfo, obs: &Observation<T>) -> Value {
    json!({
        "step": info.metrics.step,
        "metrics": info.metrics,
        "pose": info.pose,
        "blocked": info.blocked,
        "drift": info.drift,
        "belief_checksum": belief_checksum(obs.belief.as_slice()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_syntax() {
        let r: Request = serde_json::from_str(r#"{"cmd":"reset","seed":3}"#).unwrap();
        assert_eq!(r, Request::Reset { seed: 3, map_id: None });
        let r: Request = serde_json::from_str(r#"{"cmd":"step","action":2}"#).unwrap();
        assert_eq!(r, Request::Step { action: 2 });
        let r: Request = serde_json::from_str(r#"{"cmd":"close"}"#).unwrap();
        assert_eq!(r, Request::Close);
        assert!(serde_json::from_str::<Request>(r#"{"cmd":"fly"}"#).is_err());
    }

    #[test]
    fn checksum_of_empty() {
        assert_eq!(belief_checksum::<f32>(&[]), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
