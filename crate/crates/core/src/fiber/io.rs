//! Field dumps.
//!
//! Values are flattened point-major, then form component, then matrix row and
//! column, with the real part before the imaginary part. The binary format is
//! a small little-endian header followed by the same `f64` sequence.

use serde::{Deserialize, Serialize};

use super::FiberField;
use crate::{LabError, Result, C64};

pub const FIELD_LAYOUT: &str = "point-major(i1*N2+i2), component, row, col, re/im";

const MAGIC: &[u8; 8] = b"FIBFLD01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDump {
    pub layout: String,
    pub degree: usize,
    pub matrix_size: usize,
    pub resolution: (usize, usize),
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn from_field(f: &FiberField) -> Self {
        Self {
            layout: FIELD_LAYOUT.to_string(),
            degree: f.degree(),
            matrix_size: f.matrix_size(),
            resolution: f.resolution(),
            values: f.data().iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn to_field(&self) -> Result<FiberField> {
        if !self.values.len().is_multiple_of(2) {
            return Err(LabError::Serialization("odd number of real values".into()));
        }
        let data = self.values.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        FiberField::from_data(self.degree, self.matrix_size, self.resolution, data)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| LabError::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LabError::Serialization(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        for v in [self.degree, self.matrix_size, self.resolution.0, self.resolution.1] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 40 || &bytes[..8] != MAGIC {
            return Err(LabError::Serialization("missing field dump header".into()));
        }
        let word = |i: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[8 + 8 * i..16 + 8 * i]);
            u64::from_le_bytes(b) as usize
        };
        let body = &bytes[40..];
        if !body.len().is_multiple_of(8) {
            return Err(LabError::Serialization("truncated field dump".into()));
        }
        let values = body
            .chunks(8)
            .map(|c| {
                let mut b = [0u8; 8];
                b.copy_from_slice(c);
                f64::from_le_bytes(b)
            })
            .collect();
        Ok(Self {
            layout: FIELD_LAYOUT.to_string(),
            degree: word(0),
            matrix_size: word(1),
            resolution: (word(2), word(3)),
            values,
        })
    }
}
