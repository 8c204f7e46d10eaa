//! Policy evaluation, run records, Expected Online Performance and sweeps.

mod eop;
mod sweep;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::envs::{rollout, Env, Policy};
use crate::rng::seeded;
use crate::{Error, Result};

pub use eop::{binomial, eop, eop_csv, eop_curve, eop_weights, EopRow, DEFAULT_BOOTSTRAP};
pub use sweep::{sweep, SweepAxis, SweepCell, SweepOutput, SweepSpec};

/// Mean and population std of undiscounted returns over `n_episodes`
/// episodes whose start states are drawn from `seed`.
pub fn evaluate_policy(env: &dyn Env, policy: &dyn Policy, n_episodes: usize, seed: u64) -> Result<(f64, f64)> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("n_episodes must be >= 1".into()));
    }
    let mut rng = seeded(seed);
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let start = env.reset(&mut rng);
        returns.push(rollout(env, policy, start)?);
    }
    Ok(mean_std(&returns))
}

/// Mean and population std, computed around the first element so that a
/// constant list yields exactly that constant and zero spread.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let Some(&x0) = values.first() else {
        return (f64::NAN, f64::NAN);
    };
    let n = values.len() as f64;
    let shift = values.iter().map(|v| v - x0).sum::<f64>() / n;
    let sq = values.iter().map(|v| (v - x0) * (v - x0)).sum::<f64>() / n;
    (x0 + shift, (sq - shift * shift).max(0.0).sqrt())
}

pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub mean: f64,
    pub std: f64,
    pub n_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// SHA-256 of the canonical hyperparameter JSON.
    pub fingerprint: String,
    pub seed: u64,
    pub evals: Vec<EvalPoint>,
    #[serde(with = "nan_as_null")]
    pub final_score: f64,
    /// `(step, mean online min-Q on dataset actions)` since the previous eval.
    pub q_trace: Vec<(u64, f64)>,
}

impl RunResult {
    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push('{');
            for (i, (k, v)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(v, out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Key-order independent serialization.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

pub fn fingerprint(v: &Value) -> Result<String> {
    let digest = Sha256::digest(canonical_json(v).as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        write!(hex, "{b:02x}").expect("writing to a String");
    }
    Ok(hex)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedScore {
    pub seed: u64,
    #[serde(with = "nan_as_null")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub dataset: String,
    pub fingerprint: String,
    pub scores: Vec<SeedScore>,
}

/// Final scores keyed by `(dataset id, config fingerprint)`, one per seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    entries: BTreeMap<(String, String), Vec<SeedScore>>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Errors if the seed is already present for this cell.
    pub fn insert(&mut self, dataset: &str, fingerprint: &str, seed: u64, score: f64) -> Result<()> {
        let scores = self
            .entries
            .entry((dataset.to_string(), fingerprint.to_string()))
            .or_default();
        if scores.iter().any(|s| s.seed == seed) {
            return Err(Error::InvalidArgument(format!(
                "duplicate seed {seed} for ({dataset}, {fingerprint})"
            )));
        }
        let pos = scores.partition_point(|s| s.seed < seed);
        scores.insert(pos, SeedScore { seed, score });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn datasets(&self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.keys().map(|(d, _)| d.clone()).collect();
        out.dedup();
        out
    }

    /// Fingerprints recorded for `dataset`, with their per-seed scores sorted by seed.
    pub fn configs(&self, dataset: &str) -> Vec<(&str, &[SeedScore])> {
        self.entries
            .iter()
            .filter(|((d, _), _)| d == dataset)
            .map(|((_, f), s)| (f.as_str(), s.as_slice()))
            .collect()
    }

    pub fn get(&self, dataset: &str, fingerprint: &str) -> Option<&[SeedScore]> {
        self.entries
            .get(&(dataset.to_string(), fingerprint.to_string()))
            .map(Vec::as_slice)
    }

    pub fn entries(&self) -> Vec<ScoreEntry> {
        self.entries
            .iter()
            .map(|((d, f), s)| ScoreEntry {
                dataset: d.clone(),
                fingerprint: f.clone(),
                scores: s.clone(),
            })
            .collect()
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<ScoreEntry> = serde_json::from_str(text)?;
        let mut table = Self::new();
        for e in entries {
            if e.scores.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "no scores for ({}, {})",
                    e.dataset, e.fingerprint
                )));
            }
            for s in e.scores {
                table.insert(&e.dataset, &e.fingerprint, s.seed, s.score)?;
            }
        }
        Ok(table)
    }

    /// `dataset,config,seed,score` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,config,seed,score\n");
        for ((d, f), scores) in &self.entries {
            for s in scores {
                writeln!(out, "{d},{f},{},{}", s.seed, s.score).expect("writing to a String");
            }
        }
        out
    }

    /// Parses score CSV. Only a `score` column is required; missing
    /// `dataset` defaults to `default`, missing `config` to the row number,
    /// and missing `seed` to 0.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty score CSV".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        let score_col = col("score")
            .ok_or_else(|| Error::InvalidArgument("score CSV needs a `score` column".into()))?;
        let (d_col, c_col, s_col) = (col("dataset"), col("config"), col("seed"));
        let mut table = Self::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != header.len() {
                return Err(Error::InvalidArgument(format!(
                    "score CSV row {}: expected {} fields, got {}",
                    row + 1,
                    header.len(),
                    fields.len()
                )));
            }
            let parse_err = |what: &str| Error::InvalidArgument(format!("score CSV row {}: bad {what}", row + 1));
            let score: f64 = fields[score_col].parse().map_err(|_| parse_err("score"))?;
            let dataset = d_col.map_or("default", |c| fields[c]);
            let config = c_col.map_or_else(|| row.to_string(), |c| fields[c].to_string());
            let seed = match s_col {
                Some(c) => fields[c].parse().map_err(|_| parse_err("seed"))?,
                None => 0,
            };
            table.insert(dataset, &config, seed, score)?;
        }
        if table.is_empty() {
            return Err(Error::InvalidArgument("score CSV has no rows".into()));
        }
        Ok(table)
    }
}
