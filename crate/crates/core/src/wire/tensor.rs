use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Dense float32 array on the wire: explicit shape, little-endian bytes,
/// base64 text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub data: String,
}

impl Tensor {
    pub fn from_f32(shape: &[usize], values: &[f32]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Input(format!("shape {shape:?} holds {n} values, got {}", values.len())));
        }
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Ok(Self { shape: shape.to_vec(), dtype: "f32".into(), data: STANDARD.encode(bytes) })
    }

    /// Narrows to `f32`.
    pub fn from_scalars<T: Scalar>(shape: &[usize], values: &[T]) -> Result<Self> {
        Self::from_f32(shape, &values.iter().map(|v| v.f32()).collect::<Vec<_>>())
    }

    pub fn from_u8(shape: &[usize], values: &[u8]) -> Result<Self> {
        Self::from_f32(shape, &values.iter().map(|v| f32::from(*v)).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The raw little-endian bytes.
    pub fn bytes(&self) -> Result<Vec<u8>> {
        if self.dtype != "f32" {
            return Err(Error::Protocol(format!("unsupported dtype {:?}", self.dtype)));
        }
        let bytes = STANDARD.decode(&self.data).map_err(|e| Error::Protocol(format!("bad base64 payload: {e}")))?;
        if bytes.len() != 4 * self.len() {
            return Err(Error::Protocol(format!(
                "payload of {} bytes does not match shape {:?}",
                bytes.len(),
                self.shape
            )));
        }
        Ok(bytes)
    }

    pub fn to_f32(&self) -> Result<Vec<f32>> {
        Ok(self.bytes()?.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }

    pub fn to_scalars<T: Scalar>(&self) -> Result<Vec<T>> {
        Ok(self.to_f32()?.into_iter().map(|v| T::lit(f64::from(v))).collect())
    }

    /// Errors unless the shape is exactly `expected`.
    pub fn expect_shape(&self, expected: &[usize]) -> Result<&Self> {
        if self.shape != expected {
            return Err(Error::Protocol(format!("tensor shape {:?}, expected {expected:?}", self.shape)));
        }
        Ok(self)
    }
}
