//! CODS v1 on-disk format.
//!
//! ```text
//! [0..8)   magic "CODSv001"
//! [8..12)  u32 LE header length H
//! [12..12+H) UTF-8 JSON header
//! f32 LE blocks: observations, actions, rewards (unscaled), next_observations
//! n bytes of dones (0/1)
//! u32 LE CRC32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetMeta, OfflineDataset};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CODSv001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodsHeader {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub n: usize,
    pub episode_starts: Vec<usize>,
    pub reward_scale: f64,
    pub random_score: f64,
    pub expert_score: f64,
    pub source: String,
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn encode(dataset: &OfflineDataset, meta: &DatasetMeta) -> Result<Vec<u8>> {
    dataset.validate()?;
    meta.validate()?;
    let header = CodsHeader {
        obs_dim: dataset.obs_dim(),
        act_dim: dataset.act_dim(),
        n: dataset.len(),
        episode_starts: dataset.episode_starts().to_vec(),
        reward_scale: meta.reward_scale,
        random_score: meta.random_score,
        expert_score: meta.expert_score,
        source: meta.source.clone(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    put_f32s(&mut out, dataset.observations());
    put_f32s(&mut out, dataset.actions());
    put_f32s(&mut out, dataset.raw_rewards());
    put_f32s(&mut out, dataset.next_observations());
    out.extend(dataset.dones().iter().map(|&d| u8::from(d)));
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub(crate) fn decode(bytes: &[u8], origin: &Path) -> Result<(OfflineDataset, DatasetMeta)> {
    let err = |reason: String| Error::format(origin, reason);
    if bytes.len() < 12 {
        return Err(err("truncated file".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(err(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..8]),
            std::str::from_utf8(MAGIC).expect("ascii")
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header_end = 12usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| err("truncated header".into()))?;
    let header: CodsHeader = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|e| err(format!("bad header: {e}")))?;

    let n = header.n;
    let floats = n
        .checked_mul(2 * header.obs_dim + header.act_dim + 1)
        .ok_or_else(|| err("header sizes overflow".into()))?;
    let expected_len = header_end + 4 * floats + n + 4;
    if bytes.len() != expected_len {
        return Err(err(format!(
            "expected {expected_len} bytes from header, file has {}",
            bytes.len()
        )));
    }
    let body_end = bytes.len() - 4;
    let stored_crc = u32::from_le_bytes(bytes[body_end..].try_into().expect("4 bytes"));
    let crc = crc32fast::hash(&bytes[..body_end]);
    if crc != stored_crc {
        return Err(err(format!(
            "checksum mismatch: stored {stored_crc:08x}, computed {crc:08x}"
        )));
    }

    let mut cursor = header_end;
    let mut take_f32 = |count: usize| -> Vec<f32> {
        let block = &bytes[cursor..cursor + 4 * count];
        cursor += 4 * count;
        block
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect()
    };
    let observations = take_f32(n * header.obs_dim);
    let actions = take_f32(n * header.act_dim);
    let rewards = take_f32(n);
    let next_observations = take_f32(n * header.obs_dim);
    let done_start = header_end + 4 * floats;
    let mut dones = Vec::with_capacity(n);
    for &b in &bytes[done_start..done_start + n] {
        match b {
            0 => dones.push(false),
            1 => dones.push(true),
            other => return Err(err(format!("invalid done byte {other}"))),
        }
    }

    let dataset = OfflineDataset::new(
        header.obs_dim,
        header.act_dim,
        observations,
        actions,
        rewards,
        next_observations,
        dones,
        header.episode_starts,
    )
    .map_err(|e| err(e.to_string()))?
    .with_reward_scale(header.reward_scale as f32)?;
    let meta = DatasetMeta {
        reward_scale: header.reward_scale,
        source: header.source,
        random_score: header.random_score,
        expert_score: header.expert_score,
        reward_scale_applied: true,
    };
    meta.validate().map_err(|e| err(e.to_string()))?;
    Ok((dataset, meta))
}

/// Writes `dataset` in CODS v1. Rewards are written unscaled, with
/// `meta.reward_scale` recorded in the header.
pub fn save_dataset(dataset: &OfflineDataset, meta: &DatasetMeta, path: &Path) -> Result<()> {
    fs::write(path, encode(dataset, meta)?)?;
    Ok(())
}

/// Reads and validates a CODS v1 file, applying the reward scale once.
pub fn load_dataset(path: &Path) -> Result<(OfflineDataset, DatasetMeta)> {
    decode(&fs::read(path)?, path)
}

/// Parses only the header, skipping validation of the body.
pub fn read_header(path: &Path) -> Result<CodsHeader> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::format(path, "not a CODS v1 file"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header = bytes
        .get(12..12 + len)
        .ok_or_else(|| Error::format(path, "truncated header"))?;
    serde_json::from_slice(header).map_err(|e| Error::format(path, format!("bad header: {e}")))
}
