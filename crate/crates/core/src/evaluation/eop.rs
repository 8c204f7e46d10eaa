//! Expected Online Performance: the expected best score among `k` configs
//! drawn uniformly without replacement from a tuned set.

use std::fmt::Write as _;

use rand::Rng as _;

use super::{mean_std, ScoreTable};
use crate::rng::seeded;
use crate::{Error, Result};

pub const DEFAULT_BOOTSTRAP: usize = 200;
const MAX_N: usize = 64;

/// Exact `C(n, k)` for `n <= 64`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) is divisible by (i + 1) at every step
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if n > MAX_N {
        return Err(Error::InvalidArgument(format!("eop supports at most {MAX_N} scores, got {n}")));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={n}, got {k}")));
    }
    Ok(())
}

/// Probability that the `i`-th smallest of `n` scores (0-based) is the
/// maximum of a uniform `k`-subset.
pub fn eop_weights(n: usize, k: usize) -> Result<Vec<f64>> {
    check_k(n, k)?;
    let total = binomial(n, k) as f64;
    Ok((0..n).map(|i| binomial(i, k - 1) as f64 / total).collect())
}

pub fn eop(scores: &[f64], k: usize) -> Result<f64> {
    check_k(scores.len(), k)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("eop scores"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let top = sorted[n - 1];
    let n_top = sorted.iter().rev().take_while(|&&s| s == top).count();
    if k + n_top > n {
        // every k-subset holds a maximal score
        return Ok(top);
    }
    let mut acc = 0.0;
    for (i, &s) in sorted.iter().enumerate().skip(k - 1) {
        acc += s * binomial(i, k - 1) as f64;
    }
    // rounding must not carry the expectation past the largest score
    Ok((acc / binomial(n, k) as f64).min(top))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EopRow {
    pub k: usize,
    pub mean: f64,
    pub std: f64,
}

/// Seed-bootstrapped EOP averaged over the datasets of `group`.
///
/// Each replicate draws one seed index per config fingerprint and uses that
/// seed's score on every dataset; EOP is averaged over datasets, then mean
/// and std are taken over replicates.
pub fn eop_curve(table: &ScoreTable, group: &[String], ks: &[usize], n_boot: usize, seed: u64) -> Result<Vec<EopRow>> {
    if group.is_empty() {
        return Err(Error::InvalidArgument("empty dataset group".into()));
    }
    if n_boot == 0 {
        return Err(Error::InvalidArgument("need at least one bootstrap replicate".into()));
    }
    let mut per_dataset = Vec::with_capacity(group.len());
    let mut fingerprints: Vec<&str> = Vec::new();
    for d in group {
        let configs = table.configs(d);
        if configs.is_empty() {
            return Err(Error::InvalidArgument(format!("dataset {d:?} has no scores")));
        }
        for &k in ks {
            check_k(configs.len(), k)?;
        }
        fingerprints.extend(configs.iter().map(|(f, _)| *f));
        per_dataset.push(configs);
    }
    fingerprints.sort_unstable();
    fingerprints.dedup();
    let max_seeds: Vec<usize> = fingerprints
        .iter()
        .map(|f| {
            per_dataset
                .iter()
                .flat_map(|cs| cs.iter().filter(|(g, _)| g == f).map(|(_, s)| s.len()))
                .max()
                .unwrap_or(1)
        })
        .collect();

    let mut rng = seeded(seed);
    let mut samples = vec![Vec::with_capacity(n_boot); ks.len()];
    let mut scores = Vec::new();
    for _ in 0..n_boot {
        let pick: Vec<usize> = max_seeds.iter().map(|&m| rng.random_range(0..m)).collect();
        let mut by_k = vec![Vec::with_capacity(group.len()); ks.len()];
        for configs in &per_dataset {
            scores.clear();
            for (f, s) in configs {
                let idx = fingerprints.binary_search(f).expect("collected above");
                scores.push(s[pick[idx] % s.len()].score);
            }
            for (j, &k) in ks.iter().enumerate() {
                by_k[j].push(eop(&scores, k)?);
            }
        }
        for (j, vals) in by_k.iter().enumerate() {
            samples[j].push(mean_std(vals).0);
        }
    }
    Ok(ks.iter()
        .zip(&samples)
        .map(|(&k, s)| {
            let (mean, std) = mean_std(s);
            EopRow { k, mean, std }
        })
        .collect())
}

pub fn eop_csv(rows: &[EopRow]) -> String {
    let mut out = String::from("k,mean,std\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.k, r.mean, r.std).expect("writing to a String");
    }
    out
}
