//! Single-file network checkpoints.
//!
//! Layout: `u32` little-endian header length, a UTF-8 JSON header, then the
//! parameters as little-endian `f32` in layer order (weights row-major, then
//! biases). Parameters are narrowed to `f32` on save, so a saved checkpoint
//! reloads and re-saves to identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{AdamState, LrSchedule};
use super::mlp::{MlpSpec, ParamSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub spec: MlpSpec,
    pub step: u64,
    pub schedule: LrSchedule,
    pub base_lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn new(spec: MlpSpec, params: ParamSet, optimizer: Option<&AdamState>) -> Self {
        let (step, schedule, base_lr) = optimizer
            .map(|o| (o.step_count(), o.schedule(), o.base_lr()))
            .unwrap_or((0, LrSchedule::Constant, 0.0));
        Self {
            header: CheckpointHeader {
                spec,
                step,
                schedule,
                base_lr,
            },
            params,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(4 + header.len() + 4 * self.params.n_params());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for &p in self.params.as_slice() {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let err = |reason: &str| Error::format(origin, reason);
        let len_bytes: [u8; 4] = bytes
            .get(..4)
            .ok_or_else(|| err("truncated header length"))?
            .try_into()
            .expect("slice of length 4");
        let header_len = u32::from_le_bytes(len_bytes) as usize;
        let header_bytes = bytes
            .get(4..4 + header_len)
            .ok_or_else(|| err("truncated header"))?;
        let header: CheckpointHeader =
            serde_json::from_slice(header_bytes).map_err(|e| err(&format!("bad header: {e}")))?;
        header.spec.validate()?;
        let mut params = ParamSet::zeros(&header.spec);
        let body = &bytes[4 + header_len..];
        if body.len() != 4 * params.n_params() {
            return Err(err(&format!(
                "expected {} parameter bytes, found {}",
                4 * params.n_params(),
                body.len()
            )));
        }
        for (p, chunk) in params.as_mut_slice().iter_mut().zip(body.chunks_exact(4)) {
            *p = f64::from(f32::from_le_bytes(chunk.try_into().expect("chunk of 4")));
        }
        Ok(Self { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?, path)
    }
}
