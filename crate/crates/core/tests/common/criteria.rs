//! Criterion-level checks shared by the per-topic tests and the acceptance
//! runner. Each returns named sub-checks instead of panicking.

use std::path::Path;
use std::time::{Duration, Instant};

use clorl_core::algorithms::{train, CriticHead, FittedTd, FittedTdConfig};
use clorl_core::categorical::{
    expand_support, probs_to_value, support_from_dataset, target_to_probs, ExpandKind, ExpandStrategy,
    HlGaussParams, ValueSupport, PROB_EPS,
};
use clorl_core::config::presets::preset;
use clorl_core::config::{Algorithm, HeadKind, RunConfig};
use clorl_core::data::{load_dataset, save_dataset, DatasetBuilder, DatasetMeta, OfflineDataset};
use clorl_core::envs::{generate_dataset, Behavior, EnvKind, TabularMdp};
use clorl_core::evaluation::{binomial, eop, sweep, SweepAxis, SweepSpec};
use clorl_core::rng::{seeded, uniform};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng as _;
use serde_json::json;

use super::{gradcheck, oracle};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

fn runtime(name: &str, elapsed: Duration, limit_s: f64) -> Check {
    let s = elapsed.as_secs_f64();
    Check::new(name, s < limit_s, format!("{s:.1} s (limit {limit_s} s)"))
}

/// Panics with every failing sub-check, for use inside `#[test]`s.
pub fn assert_checks(checks: &[Check]) {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    assert!(failed.is_empty(), "failed checks:\n{}", failed.join("\n"));
}

// ---------------------------------------------------------------- HL-Gauss

pub fn hl(ratio: f64, s: &ValueSupport) -> HlGaussParams {
    HlGaussParams::new(ratio, s).unwrap()
}

/// Worst `|q - t|` over a grid of targets at least `margin` inside the
/// support, less the shrink toward zero of at most `|t| * eps` that the
/// normalization guard adds when `discount_guard` is set.
pub fn max_round_trip_error(s: &ValueSupport, p: &HlGaussParams, margin: f64, discount_guard: bool) -> f64 {
    let (lo, hi) = (s.v_min() + margin, s.v_max() - margin);
    (0..=4000)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / 4000.0;
            let q = probs_to_value(&target_to_probs(t, s, p), s).unwrap();
            let slack = if discount_guard { t.abs() * PROB_EPS } else { 0.0 };
            ((q - t).abs() - slack).max(0.0)
        })
        .fold(0.0, f64::max)
}

pub fn hl_gauss() -> Vec<Check> {
    let start = Instant::now();
    let mut out = Vec::new();
    let ms = [11, 51, 101, 401];

    let mut worst_mass: f64 = 0.0;
    for m in ms {
        let s = ValueSupport::new(-3.0, 7.0, m).unwrap();
        let p = hl(0.75, &s);
        let range = s.v_max() - s.v_min();
        for i in 0..=200 {
            let t = s.v_min() + 3.0 * p.sigma() + (range - 6.0 * p.sigma()) * i as f64 / 200.0;
            let mass: f64 = target_to_probs(t, &s, &p).iter().sum();
            if !(1.0 - 1e-4..=1.0).contains(&mass) {
                worst_mass = worst_mass.max((1.0 - mass).abs());
            }
        }
    }
    out.push(Check::new(
        "normalization",
        worst_mass == 0.0,
        if worst_mass == 0.0 {
            "sum p in [1-1e-4, 1] for interior targets, m in {11, 51, 101, 401}".to_string()
        } else {
            format!("mass off by {worst_mass:e}")
        },
    ));

    let s = ValueSupport::new(0.0, 2.0, 2).unwrap();
    let p = target_to_probs(1.0, &s, &hl(0.75, &s));
    out.push(Check::new(
        "shared edge symmetry",
        p[0] == p[1] && (p[0] - 0.5).abs() < 1e-6,
        format!("p = [{}, {}]", p[0], p[1]),
    ));

    let mut interior = Vec::new();
    let mut everywhere = Vec::new();
    let mut interior_ok = true;
    let mut everywhere_ok = true;
    for m in ms {
        let s = ValueSupport::new(-3.0, 7.0, m).unwrap();
        let p = hl(0.75, &s);
        let range = s.v_max() - s.v_min();
        let e_in = max_round_trip_error(&s, &p, 3.0 * p.sigma(), true);
        interior_ok &= e_in <= 1e-3 * range && e_in <= s.zeta() / 2.0;
        interior.push(format!("m={m}: {:.2e}", e_in / range));
        let e_all = max_round_trip_error(&s, &p, 0.0, false);
        everywhere_ok &= e_all <= s.zeta() / 2.0;
        everywhere.push(format!("m={m}: {:.3} zeta", e_all / s.zeta()));
    }
    out.push(Check::new(
        "round trip, 3 sigma interior (<= 1e-3 range and <= zeta/2)",
        interior_ok,
        format!("max |q - t| / range: {}", interior.join(", ")),
    ));
    out.push(Check::new(
        "round trip, full support (<= zeta/2)",
        everywhere_ok,
        format!("max |q - t|: {}", everywhere.join(", ")),
    ));

    let mut rng = seeded(3);
    let mut worst: f64 = 0.0;
    let mut cases = vec![(ValueSupport::new(0.0, 10.0, 10).unwrap(), 0.75, 5.2)];
    for _ in 0..20 {
        let lo = uniform(&mut rng, -100.0, 0.0);
        let s = ValueSupport::new(lo, lo + uniform(&mut rng, 1.0, 200.0), rng.random_range(2..80)).unwrap();
        let ratio = uniform(&mut rng, 0.2, 3.0);
        let t = uniform(&mut rng, s.v_min() - 2.0 * s.zeta(), s.v_max() + 2.0 * s.zeta());
        cases.push((s, ratio, t));
    }
    for (s, ratio, t) in &cases {
        let p = hl(*ratio, s);
        let want = oracle::hl_gauss_probs(*t, s.edges(), p.sigma(), PROB_EPS);
        for (g, w) in target_to_probs(*t, s, &p).iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    out.push(Check::new(
        "agreement with arbitrary-precision CDF (1e-10)",
        worst < 1e-10,
        format!("{} cases, max abs diff {worst:.2e}", cases.len()),
    ));
    out.push(runtime("runtime", start.elapsed(), 10.0));
    out
}

// ---------------------------------------------------------------- gradients

pub const GRAD_CASES: usize = 50;
pub const GRAD_TOL: f64 = 1e-4;

pub fn grad_check(name: &str, errs: &[f64]) -> Check {
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Check::new(
        name,
        errs.len() >= GRAD_CASES && worst < GRAD_TOL,
        format!("{} cases, worst relative error {worst:.2e}", errs.len()),
    )
}

pub fn gradients() -> Vec<Check> {
    let start = Instant::now();
    let n = GRAD_CASES;
    let mut out = vec![
        grad_check("softmax cross-entropy", &gradcheck::ce_cases(n)),
        grad_check("mlp backward", &gradcheck::mlp_cases(n)),
        grad_check("policy log-prob", &gradcheck::log_prob_cases(n)),
        grad_check("policy reparameterized sample", &gradcheck::sample_path_cases(n)),
        grad_check("categorical critic end to end", &gradcheck::categorical_critic_cases(n)),
        grad_check("rebrac actor", &gradcheck::rebrac_actor_cases(n)),
        grad_check("iql value and actor", &gradcheck::iql_cases(n)),
        grad_check("lbsac actor", &gradcheck::lbsac_actor_cases(n)),
    ];
    out.push(runtime("runtime", start.elapsed(), 120.0));
    out
}

// ---------------------------------------------------------------- tabular

pub const TABULAR_GAMMA: f64 = 0.9;

pub fn tabular_run(seed: u64, head_kind: HeadKind) -> (f64, f64) {
    let mdp = TabularMdp::random(5, 3, seed);
    let qstar = mdp.value_iteration(TABULAR_GAMMA, 1e-12).unwrap();
    let (lo, hi) = mdp.return_bounds(TABULAR_GAMMA);
    let pad = 0.1 * (hi - lo);
    let s = ValueSupport::new(lo - pad, hi + pad, 401).unwrap();
    let zeta = s.zeta();
    let head = match head_kind {
        HeadKind::Ce => CriticHead::categorical(s, 0.75).unwrap(),
        HeadKind::Mse => CriticHead::Scalar,
    };
    let mut f = FittedTd::new(&mdp, head, &mut seeded(seed)).unwrap();
    let cfg = FittedTdConfig {
        gamma: TABULAR_GAMMA,
        outer_iterations: 200,
        inner_steps: 200,
        lr: 0.05,
    };
    let q = f.run(&mdp, &cfg).unwrap();
    let err = q.iter().zip(&qstar).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (err, zeta)
}

pub fn tabular(seeds: &[u64]) -> Vec<Check> {
    let start = Instant::now();
    let mut out = Vec::new();
    for &seed in seeds {
        let (err, zeta) = tabular_run(seed, HeadKind::Ce);
        out.push(Check::new(
            format!("categorical m=401, mdp seed {seed} (<= 1.5 zeta)"),
            err <= 1.5 * zeta,
            format!("max |Q - Q*| = {err:.2e} = {:.4} zeta", err / zeta),
        ));
        let (err, _) = tabular_run(seed, HeadKind::Mse);
        out.push(Check::new(
            format!("scalar, mdp seed {seed} (<= 1e-3)"),
            err <= 1e-3,
            format!("max |Q - Q*| = {err:.2e}"),
        ));
    }
    out.push(runtime("runtime", start.elapsed(), 60.0));
    out
}

// ---------------------------------------------------------------- toy offline RL

pub const TOY_SEEDS: [u64; 3] = [0, 1, 2];

pub fn expert_pointmass() -> (OfflineDataset, DatasetMeta) {
    let env = EnvKind::Pointmass.make();
    generate_dataset(env.as_ref(), Behavior::Expert, 200, 0.1, 1).unwrap()
}

pub fn toy_threshold(algorithm: Algorithm) -> f64 {
    match algorithm {
        Algorithm::Rebrac => 0.9,
        Algorithm::Iql | Algorithm::Lbsac => 0.75,
    }
}

/// Mean final return over `seeds` for one preset.
pub fn toy_returns(preset_name: &str, seeds: &[u64], ds: &OfflineDataset) -> (RunConfig, Vec<f64>) {
    let base = preset(preset_name).unwrap();
    let env = base.env.make();
    let returns = seeds
        .iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            match train(&cfg, ds, env.as_ref(), None) {
                Ok((res, _)) => res.final_score,
                Err(_) => f64::NAN,
            }
        })
        .collect();
    (base, returns)
}

pub fn toy_offline(presets: &[&str]) -> Vec<Check> {
    let start = Instant::now();
    let (ds, meta) = expert_pointmass();
    let mut out = Vec::new();
    for name in presets {
        let t = Instant::now();
        let (cfg, returns) = toy_returns(name, &TOY_SEEDS, &ds);
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        let norm = (mean - meta.random_score) / (meta.expert_score - meta.random_score);
        let threshold = toy_threshold(cfg.algorithm);
        out.push(Check::new(
            format!("{name} (normalized >= {threshold})"),
            norm >= threshold,
            format!(
                "normalized {norm:.3}, mean return {mean:.2} (expert {:.2}, random {:.2}), per seed {:?}, return/expert {:.3}, {:.0} s",
                meta.expert_score,
                meta.random_score,
                returns.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>(),
                mean / meta.expert_score,
                t.elapsed().as_secs_f64()
            ),
        ));
    }
    out.push(runtime("runtime", start.elapsed(), 1200.0));
    out
}

// ---------------------------------------------------------------- support

pub fn dataset_from(episodes: &[Vec<f32>]) -> OfflineDataset {
    let mut b = DatasetBuilder::new(1, 1);
    for ep in episodes {
        b.start_episode();
        for (t, &r) in ep.iter().enumerate() {
            b.push(&[t as f64], &[0.0], f64::from(r), &[t as f64 + 1.0], t + 1 == ep.len());
        }
    }
    b.build().unwrap()
}

/// Integer rewards and dyadic discounts keep every suffix sum exactly
/// representable, so the comparison with the exact oracle is equality.
/// Returns the seeds that disagree.
pub fn support_brute_force(n: usize) -> Vec<u64> {
    let gammas = [0.5, 0.75, 0.875, 0.9375];
    let mut bad = Vec::new();
    for seed in 0..n as u64 {
        let mut rng = seeded(900 + seed);
        let gamma = gammas[rng.random_range(0..gammas.len())];
        let episodes: Vec<Vec<f32>> = (0..rng.random_range(1..6))
            .map(|_| (0..rng.random_range(1..10)).map(|_| rng.random_range(-8i32..=8) as f32).collect())
            .collect();
        let all: Vec<BigRational> = episodes.iter().flat_map(|ep| oracle::suffix_returns(ep, gamma)).collect();
        let want = (
            all.iter().min().unwrap().to_f64().unwrap(),
            all.iter().max().unwrap().to_f64().unwrap(),
        );
        if support_from_dataset(&dataset_from(&episodes), gamma).ok() != Some(want) {
            bad.push(seed);
        }
    }
    bad
}

/// Returns a description of every violated identity.
pub fn expand_violations() -> Vec<String> {
    let both = |e| ExpandStrategy { kind: ExpandKind::Both, v_expand: e };
    let min = |e| ExpandStrategy { kind: ExpandKind::Min, v_expand: e };
    let mut bad = Vec::new();
    let fixed = [
        (expand_support(0.0, 10.0, both(0.1)).ok(), Some((-0.5, 10.5))),
        (expand_support(0.0, 10.0, min(0.1)).ok(), Some((-1.0, 10.0))),
        (expand_support(0.0, 10.0, both(0.0)).ok(), Some((0.0, 10.0))),
        (expand_support(0.0, 10.0, min(0.0)).ok(), Some((0.0, 10.0))),
        (expand_support(0.0, 10.0, both(-1.0)).ok(), None),
    ];
    for (i, (got, want)) in fixed.iter().enumerate() {
        if got != want {
            bad.push(format!("example {i}: got {got:?}, want {want:?}"));
        }
    }
    // dyadic inputs keep every operation exact
    let mut rng = seeded(5);
    for _ in 0..200 {
        let lo = rng.random_range(-4096i32..4096) as f64 / 8.0;
        let hi = lo + rng.random_range(1i32..4096) as f64 / 8.0;
        let e = rng.random_range(-7i32..64) as f64 / 16.0;
        let d = e * (hi - lo);
        let m = expand_support(lo, hi, min(e)).ok();
        let b = expand_support(lo, hi, both(e)).ok();
        if m != Some((lo - d, hi)) {
            bad.push(format!("min({lo}, {hi}, {e}) = {m:?}"));
        }
        if b != Some((lo - d / 2.0, hi + d / 2.0)) {
            bad.push(format!("both({lo}, {hi}, {e}) = {b:?}"));
        }
        if let (Some((a, b_)), Some((c, f))) = (m, b) {
            if b_ - a != f - c {
                bad.push(format!("sizes differ at ({lo}, {hi}, {e})"));
            }
        }
    }
    bad
}

pub fn support() -> Vec<Check> {
    let bad = support_brute_force(100);
    let expand = expand_violations();
    vec![
        Check::new(
            "support_from_dataset equals suffix enumeration (100 datasets, exact)",
            bad.is_empty(),
            if bad.is_empty() { "all equal".to_string() } else { format!("mismatching seeds {bad:?}") },
        ),
        Check::new(
            "expand_support identities and min/both formulas (exact)",
            expand.is_empty(),
            if expand.is_empty() { "205 cases".to_string() } else { expand.join("; ") },
        ),
    ]
}

// ---------------------------------------------------------------- EOP

fn big(i: usize) -> BigInt {
    BigInt::from(i)
}

/// Integer scores: the closed form's sums are exact in f64, so the only
/// rounding is the final division and the result must equal the exact
/// rational rounded once.
fn integer_scores(rng: &mut clorl_core::rng::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1000i32..=1000) as f64).collect()
}

pub fn eop_checks() -> Vec<Check> {
    let start = Instant::now();
    let mut out = Vec::new();
    let mut rng = seeded(61);

    // closed form vs enumeration, exact
    let mut closed_bad = Vec::new();
    let mut f64_bad = Vec::new();
    let mut cases = 0;
    for n in 1..=12 {
        for rep in 0..4 {
            let scores: Vec<f64> = if rep % 2 == 0 {
                integer_scores(&mut rng, n)
            } else {
                (0..n).map(|_| uniform(&mut rng, -50.0, 150.0)).collect()
            };
            let exact: Vec<BigRational> = scores.iter().map(|&s| oracle::rational(s)).collect();
            for k in 1..=n {
                cases += 1;
                let brute = oracle::eop_enumerated(&exact, k);
                let closed = oracle::eop_closed_form_exact(&exact, k, binomial);
                if brute != closed {
                    closed_bad.push(format!("n={n} k={k}"));
                }
                let got = eop(&scores, k).unwrap();
                let want = brute.to_f64().unwrap();
                let ok = if rep % 2 == 0 {
                    got == want
                } else {
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0)
                };
                if !ok {
                    f64_bad.push(format!("n={n} k={k}: {got} vs {want}"));
                }
            }
        }
    }
    out.push(Check::new(
        "closed form equals subset enumeration, N <= 12, all k (exact rationals)",
        closed_bad.is_empty(),
        if closed_bad.is_empty() { format!("{cases} (N, k) cases") } else { closed_bad.join(", ") },
    ));
    out.push(Check::new(
        "f64 eop equals the exact value (integer scores bitwise, real scores to 1e-12)",
        f64_bad.is_empty(),
        if f64_bad.is_empty() { format!("{cases} cases") } else { f64_bad.join(", ") },
    ));

    let mut ident_bad = Vec::new();
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let scores: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -1e3, 1e3)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if eop(&scores, n).unwrap() != max {
            ident_bad.push(format!("k=N on n={n}"));
        }
        let ints = integer_scores(&mut rng, n);
        let sum: i64 = ints.iter().map(|&v| v as i64).sum();
        let mean = BigRational::new(BigInt::from(sum), big(n)).to_f64().unwrap();
        if eop(&ints, 1).unwrap() != mean {
            ident_bad.push(format!("k=1 on n={n}"));
        }
    }
    out.push(Check::new(
        "k = N gives the max and k = 1 the mean, exactly",
        ident_bad.is_empty(),
        if ident_bad.is_empty() { "1000 lists".to_string() } else { ident_bad.join(", ") },
    ));

    let mut mono_bad = 0;
    let mut perm_bad = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=40);
        let mut scores: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -100.0, 100.0)).collect();
        if rng.random_bool(0.3) {
            // ties
            for v in scores.iter_mut() {
                *v = v.round() / 10.0;
            }
        }
        let curve: Vec<f64> = (1..=n).map(|k| eop(&scores, k).unwrap()).collect();
        if curve.windows(2).any(|w| w[1] < w[0]) {
            mono_bad += 1;
        }
        let mut shuffled = scores.clone();
        shuffled.reverse();
        let k = rng.random_range(1..=n);
        if eop(&shuffled, k).unwrap() != eop(&scores, k).unwrap() {
            perm_bad += 1;
        }
    }
    out.push(Check::new(
        "monotone non-decreasing in k (1000 lists)",
        mono_bad == 0,
        format!("{mono_bad} violating lists"),
    ));
    out.push(Check::new(
        "invariant to input order (1000 lists)",
        perm_bad == 0,
        format!("{perm_bad} violating lists"),
    ));

    let ex = [
        (vec![0.0, 10.0], 1, 5.0),
        (vec![0.0, 10.0], 2, 10.0),
        (vec![1.0, 2.0, 3.0], 2, 8.0 / 3.0),
    ];
    let ex_ok = ex.iter().all(|(s, k, want)| eop(s, *k).unwrap() == *want);
    out.push(Check::new("worked examples ([0, 10] and [1, 2, 3])", ex_ok, "5, 10, 8/3"));
    out.push(runtime("runtime", start.elapsed(), 30.0));
    out
}

// ---------------------------------------------------------------- determinism

pub fn small_run_config(env: EnvKind, algorithm: Algorithm, head: HeadKind, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(algorithm, head, env, 300);
    cfg.network.hidden_dim = 16;
    cfg.network.n_hidden_layers = 2;
    cfg.rebrac.batch_size = 32;
    cfg.iql.batch_size = 32;
    cfg.lbsac.batch_size = 32;
    cfg.lbsac.n_critics = 3;
    if let Some(c) = cfg.classification.as_mut() {
        c.m = 21;
    }
    cfg.eval_every = 100;
    cfg.eval_episodes = 3;
    cfg.seed = seed;
    cfg
}

/// Log bytes and result JSON of one training run.
pub fn run_bytes(cfg: &RunConfig, ds: &OfflineDataset) -> (Vec<u8>, String) {
    let env = cfg.env.make();
    let mut log = Vec::new();
    let (res, _) = train(cfg, ds, env.as_ref(), Some(&mut log)).unwrap();
    (log, res.to_json_pretty().unwrap())
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

pub fn small_sweep(workers: usize) -> SweepSpec {
    let base = small_run_config(EnvKind::Chain, Algorithm::Rebrac, HeadKind::Ce, 0);
    SweepSpec {
        base,
        axes: vec![
            SweepAxis {
                path: "classification.m".into(),
                values: vec![json!(11), json!(21)],
            },
            SweepAxis {
                path: "classification.sigma_zeta_ratio".into(),
                values: vec![json!(0.55), json!(0.75)],
            },
        ],
        seeds: vec![0, 1],
        workers,
    }
}

pub fn determinism() -> Vec<Check> {
    let mut out = Vec::new();
    let datasets = [EnvKind::Pointmass, EnvKind::Chain].map(|kind| {
        let env = kind.make();
        (kind, generate_dataset(env.as_ref(), Behavior::Mediocre, 20, 0.3, 4).unwrap().0)
    });
    for (kind, ds) in &datasets {
        for algorithm in [Algorithm::Rebrac, Algorithm::Iql, Algorithm::Lbsac] {
            for head in [HeadKind::Mse, HeadKind::Ce] {
                let cfg = small_run_config(*kind, algorithm, head, 7);
                let a = run_bytes(&cfg, ds);
                let b = run_bytes(&cfg, ds);
                out.push(Check::new(
                    format!("train {:?}/{}/{:?} repeated", kind, algorithm.name(), head),
                    a == b,
                    format!("{} log bytes, {} result bytes", a.0.len(), a.1.len()),
                ));
            }
        }
    }

    let ds = &datasets[1].1;
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let outputs: Vec<_> = [(1, &dirs[0]), (1, &dirs[1]), (3, &dirs[2])]
        .iter()
        .map(|(workers, dir)| {
            let o = sweep(&small_sweep(*workers), ds, "chain", Some(dir.path())).unwrap();
            (o.heatmap_csv, o.table.to_json_pretty().unwrap(), read_dir_bytes(dir.path()))
        })
        .collect();
    out.push(Check::new(
        "sweep 2x2, 2 seeds, repeated",
        outputs[0] == outputs[1],
        format!("{} run files", outputs[0].2.len()),
    ));
    out.push(Check::new(
        "sweep with 3 workers matches 1 worker",
        outputs[0] == outputs[2],
        "heatmap, score table and every run file",
    ));
    out
}

// ---------------------------------------------------------------- format

pub fn format_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let env = EnvKind::Pointmass.make();
    let (ds, meta) = generate_dataset(env.as_ref(), Behavior::Mediocre, 10, 0.3, 2).unwrap();

    let path = dir.path().join("a.cods");
    save_dataset(&ds, &meta, &path).unwrap();
    let (back, back_meta) = load_dataset(&path).unwrap();
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let arrays_equal = bits(back.observations()) == bits(ds.observations())
        && bits(back.actions()) == bits(ds.actions())
        && bits(back.raw_rewards()) == bits(ds.raw_rewards())
        && bits(back.next_observations()) == bits(ds.next_observations())
        && bits(back.next_actions()) == bits(ds.next_actions())
        && back.dones() == ds.dones()
        && back.episode_starts() == ds.episode_starts();
    let path2 = dir.path().join("b.cods");
    save_dataset(&back, &back_meta, &path2).unwrap();
    let same_file = std::fs::read(&path).unwrap() == std::fs::read(&path2).unwrap();
    out.push(Check::new(
        "CODS v1 round trip is bitwise",
        arrays_equal && same_file,
        format!("{} transitions; arrays equal: {arrays_equal}, re-saved file identical: {same_file}", ds.len()),
    ));

    let bytes = std::fs::read(&path).unwrap();
    let mut rejected = 0;
    let mut tried = 0;
    let mut corrupt = |mutate: &dyn Fn(&mut Vec<u8>)| {
        let mut b = bytes.clone();
        mutate(&mut b);
        let p = dir.path().join("bad.cods");
        std::fs::write(&p, &b).unwrap();
        tried += 1;
        if load_dataset(&p).is_err() {
            rejected += 1;
        }
    };
    let len = bytes.len();
    corrupt(&|b| b[0] ^= 0x20);
    corrupt(&|b| b[9] ^= 0x01);
    corrupt(&|b| b[14] ^= 0xff);
    for frac in [0.1, 0.3, 0.5, 0.7, 0.9, 0.999] {
        let i = ((len as f64 * frac) as usize).clamp(12, len - 1);
        corrupt(&move |b| b[i] ^= 0x01);
    }
    corrupt(&|b| b.truncate(len - 1));
    corrupt(&|b| b.truncate(len / 2));
    corrupt(&|b| b.truncate(4));
    corrupt(&|b| b.push(0));
    out.push(Check::new(
        "corrupted files fail loudly",
        rejected == tried,
        format!("{rejected}/{tried} corruptions rejected"),
    ));

    let scaled_meta = DatasetMeta {
        reward_scale: 100.0,
        ..meta.clone()
    };
    let path3 = dir.path().join("scaled.cods");
    save_dataset(&ds, &scaled_meta, &path3).unwrap();
    let (loaded, loaded_meta) = load_dataset(&path3).unwrap();
    let scaled_once = loaded
        .rewards()
        .iter()
        .zip(ds.raw_rewards())
        .all(|(r, raw)| r.to_bits() == (raw * 100.0).to_bits());
    let path4 = dir.path().join("scaled2.cods");
    save_dataset(&loaded, &loaded_meta, &path4).unwrap();
    let (reloaded, _) = load_dataset(&path4).unwrap();
    let not_twice = bits(reloaded.rewards()) == bits(loaded.rewards())
        && std::fs::read(&path3).unwrap() == std::fs::read(&path4).unwrap();
    let refuses_second = loaded.clone().with_reward_scale(100.0).is_err();
    out.push(Check::new(
        "reward_scale = 100 applied exactly once",
        scaled_once && not_twice && refuses_second,
        format!(
            "scaled on load: {scaled_once}, save/load cycle keeps scale: {not_twice}, second application refused: {refuses_second}"
        ),
    ));
    out
}
