//! Cartesian hyperparameter sweeps over a bounded pool of worker threads.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{fingerprint, mean_std, ScoreTable, SeedScore};
use crate::algorithms::train;
use crate::config::{set_path, RunConfig};
use crate::data::OfflineDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted config path, e.g. `classification.m`.
    pub path: String,
    pub values: Vec<Value>,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub axes: Vec<SweepAxis>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// One value per axis, in axis order.
    pub values: Vec<Value>,
    pub fingerprint: String,
    pub scores: Vec<SeedScore>,
    /// Error messages of failed runs, by seed.
    pub failures: Vec<(u64, String)>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub table: ScoreTable,
    pub cells: Vec<SweepCell>,
    pub heatmap_csv: String,
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Index tuples of the cartesian product, last axis fastest.
fn product(lens: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in lens {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one seed".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("sweep seeds must be distinct".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("axis {:?} has no values", axis.path)));
            }
        }
        Ok(())
    }

    /// Config of one grid cell for one seed.
    pub fn cell_config(&self, values: &[Value], seed: u64) -> Result<RunConfig> {
        let mut doc = serde_json::to_value(&self.base)?;
        for (axis, v) in self.axes.iter().zip(values) {
            set_path(&mut doc, &axis.path, v.clone())?;
        }
        doc["seed"] = Value::from(seed);
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Heatmap with rows over the first axis and columns over the product of
/// the remaining axes; cells hold the seed-mean final score.
fn heatmap(spec: &SweepSpec, cells: &[SweepCell]) -> String {
    let mut out = String::new();
    let rest: Vec<&SweepAxis> = spec.axes.iter().skip(1).collect();
    let corner = match spec.axes.first() {
        None => "config".to_string(),
        Some(first) if rest.is_empty() => first.path.clone(),
        Some(first) => format!(
            "{}\\{}",
            first.path,
            rest.iter().map(|a| a.path.as_str()).collect::<Vec<_>>().join(";")
        ),
    };
    out.push_str(&corner);
    let col_lens: Vec<usize> = rest.iter().map(|a| a.values.len()).collect();
    let cols = product(&col_lens);
    if rest.is_empty() {
        out.push_str(",score");
    } else {
        for c in &cols {
            let name: Vec<String> = c.iter().zip(&rest).map(|(&i, a)| label(&a.values[i])).collect();
            write!(out, ",{}", name.join(";")).expect("writing to a String");
        }
    }
    out.push('\n');
    let n_rows = spec.axes.first().map_or(1, |a| a.values.len());
    for r in 0..n_rows {
        let row_label = spec.axes.first().map_or("base".to_string(), |a| label(&a.values[r]));
        out.push_str(&row_label);
        for c in 0..cols.len() {
            let cell = &cells[r * cols.len() + c];
            let scores: Vec<f64> = cell.scores.iter().map(|s| s.score).collect();
            write!(out, ",{}", mean_std(&scores).0).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Runs every (cell, seed) pair. Training failures become NaN scores;
/// invalid cell configs abort before any run starts.
///
/// When `log_dir` is given, each run writes `cell{i}_seed{s}.csv` and
/// `cell{i}_seed{s}.json` there.
pub fn sweep(spec: &SweepSpec, dataset: &OfflineDataset, dataset_id: &str, log_dir: Option<&Path>) -> Result<SweepOutput> {
    spec.validate()?;
    let lens: Vec<usize> = spec.axes.iter().map(|a| a.values.len()).collect();
    let index_tuples = product(&lens);
    let mut cells = Vec::with_capacity(index_tuples.len());
    let mut jobs = Vec::new();
    for (ci, idx) in index_tuples.iter().enumerate() {
        let values: Vec<Value> = idx
            .iter()
            .zip(&spec.axes)
            .map(|(&i, a)| a.values[i].clone())
            .collect();
        let probe = spec.cell_config(&values, spec.seeds[0])?;
        cells.push(SweepCell {
            fingerprint: fingerprint(&probe.hyperparameters()?)?,
            values: values.clone(),
            scores: Vec::new(),
            failures: Vec::new(),
        });
        for &seed in &spec.seeds {
            jobs.push((ci, seed, spec.cell_config(&values, seed)?));
        }
    }

    let results: Mutex<Vec<Option<std::result::Result<f64, String>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = spec.workers.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                let Some((ci, seed, cfg)) = jobs.get(j) else {
                    break;
                };
                let outcome = run_one(cfg, dataset, log_dir, *ci, *seed);
                results.lock().expect("no worker panics while holding the lock")[j] = Some(outcome);
            });
        }
    });

    let mut table = ScoreTable::new();
    let results = results.into_inner().expect("workers joined");
    for ((ci, seed, _), outcome) in jobs.iter().zip(results) {
        let outcome = outcome.expect("every job ran");
        let score = match outcome {
            Ok(s) => s,
            Err(msg) => {
                log::warn!("sweep cell {ci} seed {seed} failed: {msg}");
                cells[*ci].failures.push((*seed, msg));
                f64::NAN
            }
        };
        cells[*ci].scores.push(SeedScore { seed: *seed, score });
        table.insert(dataset_id, &cells[*ci].fingerprint, *seed, score)?;
    }
    let heatmap_csv = heatmap(spec, &cells);
    Ok(SweepOutput {
        table,
        cells,
        heatmap_csv,
    })
}

fn run_one(cfg: &RunConfig, dataset: &OfflineDataset, log_dir: Option<&Path>, cell: usize, seed: u64) -> std::result::Result<f64, String> {
    let env = cfg.env.make();
    let mut log = Vec::new();
    let outcome = train(cfg, dataset, env.as_ref(), Some(&mut log));
    if let Some(dir) = log_dir {
        let stem = dir.join(format!("cell{cell}_seed{seed}"));
        std::fs::write(stem.with_extension("csv"), &log).map_err(|e| e.to_string())?;
        if let Ok((result, _)) = &outcome {
            let json = result.to_json_pretty().map_err(|e| e.to_string())?;
            std::fs::write(stem.with_extension("json"), json).map_err(|e| e.to_string())?;
        }
    }
    outcome.map(|(r, _)| r.final_score).map_err(|e| e.to_string())
}
