use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clorl_core::algorithms::train as train_run;
use clorl_core::categorical::{expand_support, support_from_dataset, ExpandKind, ExpandStrategy, ValueSupport};
use clorl_core::config::presets::{self, preset, PRESETS};
use clorl_core::config::{Algorithm, ClassificationConfig, HeadKind, RunConfig};
use clorl_core::data::{load_dataset, normalized_score, read_header, save_dataset, DatasetMeta, OfflineDataset};
use clorl_core::envs::{generate_dataset, Behavior, EnvKind};
use clorl_core::evaluation::{canonical_json, eop_csv, eop_curve, fingerprint, ScoreTable, SweepAxis, SweepSpec};
use serde_json::Value;

use crate::{
    output_root, write_file, AlgorithmArg, BehaviorArg, CliResult, ConfigArgs, EnvArg, EopArgs, ExpandArg, Failure,
    GenDataArgs, HeadArg, InspectArgs, PresetsArgs, SweepArgs, TrainArgs,
};

impl From<EnvArg> for EnvKind {
    fn from(e: EnvArg) -> Self {
        match e {
            EnvArg::Pointmass => EnvKind::Pointmass,
            EnvArg::Chain => EnvKind::Chain,
        }
    }
}

impl From<BehaviorArg> for Behavior {
    fn from(b: BehaviorArg) -> Self {
        match b {
            BehaviorArg::Random => Behavior::Random,
            BehaviorArg::Mediocre => Behavior::Mediocre,
            BehaviorArg::Expert => Behavior::Expert,
        }
    }
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Rebrac => Algorithm::Rebrac,
            AlgorithmArg::Iql => Algorithm::Iql,
            AlgorithmArg::Lbsac => Algorithm::Lbsac,
        }
    }
}

impl From<HeadArg> for HeadKind {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::Mse => HeadKind::Mse,
            HeadArg::Ce => HeadKind::Ce,
        }
    }
}

impl From<ExpandArg> for ExpandKind {
    fn from(e: ExpandArg) -> Self {
        match e {
            ExpandArg::Min => ExpandKind::Min,
            ExpandArg::Both => ExpandKind::Both,
        }
    }
}

fn head_name(h: HeadKind) -> &'static str {
    match h {
        HeadKind::Mse => "mse",
        HeadKind::Ce => "ce",
    }
}

fn ensure_parent(path: &Path) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

pub fn gen_data(a: GenDataArgs) -> CliResult {
    let kind: EnvKind = a.env.into();
    let behavior: Behavior = a.behavior.into();
    let path = a.output.unwrap_or_else(|| {
        output_root()
            .join("data")
            .join(format!("{}-{behavior}-{}ep-seed{}.cods", kind.make().name(), a.episodes, a.seed))
    });
    if path.exists() && !a.force {
        return Err(Failure::config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    if !(a.reward_scale.is_finite() && a.reward_scale != 0.0) {
        return Err(Failure::config("--reward-scale must be finite and non-zero"));
    }
    let env = kind.make();
    let (dataset, meta) = generate_dataset(env.as_ref(), behavior, a.episodes, a.noise, a.seed)?;
    let meta = DatasetMeta {
        reward_scale: a.reward_scale,
        ..meta
    };
    ensure_parent(&path)?;
    save_dataset(&dataset, &meta, &path)?;
    let returns = dataset.episode_returns();
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    println!("wrote {}", path.display());
    println!("source: {}", meta.source);
    println!("transitions: {}", dataset.len());
    println!("episodes: {}", returns.len());
    println!("mean episode return: {mean}");
    println!("random policy return: {}", meta.random_score);
    println!("expert policy return: {}", meta.expert_score);
    println!("normalized mean return: {}", normalized_score(mean, &meta)?);
    println!("reward scale: {}", meta.reward_scale);
    Ok(())
}

fn parse_override(raw: &str) -> CliResult<(String, String)> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| Failure::config(format!("override {raw:?} is not KEY=VALUE")))
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Base config from --config, --preset or the algorithm's default preset,
/// then every flag and dotted override applied.
fn build_config(a: &ConfigArgs) -> CliResult<RunConfig> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => preset(&format!("{}-gym-defaults", Algorithm::from(a.algorithm).name()))?,
    };
    if let Some(h) = a.head {
        cfg.head = h.into();
    }
    let touches_classification =
        a.m.is_some() || a.sigma_zeta.is_some() || a.v_expand.is_some() || a.expand_strategy.is_some();
    if cfg.classification.is_none() && (cfg.head == HeadKind::Ce || touches_classification) {
        cfg.classification = Some(ClassificationConfig::default());
    }
    if let Some(c) = cfg.classification.as_mut() {
        if let Some(m) = a.m {
            c.m = m;
        }
        if let Some(r) = a.sigma_zeta {
            c.sigma_zeta_ratio = r;
        }
        if let Some(e) = a.v_expand {
            c.v_expand = e;
        }
        if let Some(k) = a.expand_strategy {
            c.expand_strategy = k.into();
        }
    }
    if let Some(d) = &a.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(n) = a.n_steps {
        cfg.n_steps = n;
    }
    if let Some(n) = a.eval_every {
        cfg.eval_every = n;
    }
    if let Some(n) = a.eval_episodes {
        cfg.eval_episodes = n;
    }
    let overrides = a.overrides.iter().map(|o| parse_override(o)).collect::<CliResult<Vec<_>>>()?;
    Ok(cfg.with_overrides(&overrides)?)
}

/// Loads the configured dataset after checking it exists and matches the
/// evaluation environment.
fn open_dataset(cfg: &RunConfig) -> CliResult<(PathBuf, OfflineDataset, DatasetMeta)> {
    let path = cfg
        .dataset
        .clone()
        .ok_or_else(|| Failure::config("no dataset: pass --dataset or set \"dataset\" in the config"))?;
    if !path.is_file() {
        return Err(Failure::config(format!("dataset {} does not exist", path.display())));
    }
    let (dataset, meta) = load_dataset(&path)?;
    let env = cfg.env.make();
    if (env.obs_dim(), env.act_dim()) != (dataset.obs_dim(), dataset.act_dim()) {
        return Err(Failure::config(format!(
            "dataset {} has dims ({}, {}) but env {} has ({}, {})",
            path.display(),
            dataset.obs_dim(),
            dataset.act_dim(),
            env.name(),
            env.obs_dim(),
            env.act_dim()
        )));
    }
    Ok((path, dataset, meta))
}

fn validate(cfg: &RunConfig) -> CliResult {
    for w in cfg.validate()? {
        log::warn!("{w}");
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> CliResult {
    let mut cfg = build_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &a.out {
        cfg.out_dir = Some(out.clone());
    }
    validate(&cfg)?;
    let (_, dataset, meta) = open_dataset(&cfg)?;
    let fp = fingerprint(&cfg.hyperparameters()?)?;
    let dir = cfg.out_dir.clone().unwrap_or_else(|| {
        output_root().join(format!(
            "{}-{}-{}-seed{}",
            cfg.algorithm.name(),
            head_name(cfg.head),
            &fp[..12],
            cfg.seed
        ))
    });
    std::fs::create_dir_all(&dir)?;
    write_file(&dir.join("config.json"), cfg.to_json_pretty()? + "\n")?;
    let env = cfg.env.make();
    let mut log = BufWriter::new(File::create(dir.join("log.csv"))?);
    let outcome = train_run(&cfg, &dataset, env.as_ref(), Some(&mut log));
    log.flush()?;
    let (result, agent) = outcome?;
    write_file(&dir.join("result.json"), result.to_json_pretty()? + "\n")?;
    let ckpt_dir = dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir)?;
    for (name, ckpt) in agent.checkpoints() {
        ckpt.save(&ckpt_dir.join(format!("{name}.ckpt")))?;
    }
    println!("run directory: {}", dir.display());
    println!("fingerprint: {fp}");
    println!("final return: {}", result.final_score);
    println!("normalized score: {}", normalized_score(result.final_score, &meta)?);
    Ok(())
}

fn parse_axis(raw: &str) -> CliResult<SweepAxis> {
    let (path, values) = raw
        .split_once('=')
        .ok_or_else(|| Failure::config(format!("axis {raw:?} is not PATH=V1,V2,...")))?;
    let values: Vec<Value> = values.split(',').map(|v| parse_value(v.trim())).collect();
    Ok(SweepAxis {
        path: path.trim().to_string(),
        values,
    })
}

fn sweep_spec(a: &SweepArgs) -> CliResult<SweepSpec> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SweepSpec>(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => SweepSpec {
            base: build_config(&a.config)?,
            axes: a.axes.iter().map(|x| parse_axis(x)).collect::<CliResult<_>>()?,
            seeds: a.seeds.clone(),
            workers: 1,
        },
    };
    if a.spec.is_some() {
        if let Some(d) = &a.config.dataset {
            spec.base.dataset = Some(d.clone());
        }
    }
    if let Some(w) = a.workers {
        spec.workers = w;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn sweep(a: SweepArgs) -> CliResult {
    let spec = sweep_spec(&a)?;
    validate(&spec.base)?;
    let (path, dataset, _) = open_dataset(&spec.base)?;
    let dataset_id = a.dataset_id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
    });
    // the worker count changes scheduling only, never results
    let mut identity = serde_json::to_value(&spec)?;
    if let Value::Object(map) = &mut identity {
        map.remove("workers");
    }
    let fp = fingerprint(&identity)?;
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| output_root().join(format!("sweep-{}", &fp[..12])));
    let runs = dir.join("runs");
    std::fs::create_dir_all(&runs)?;
    write_file(&dir.join("spec.json"), serde_json::to_string_pretty(&spec)? + "\n")?;
    let out = clorl_core::evaluation::sweep(&spec, &dataset, &dataset_id, Some(&runs))?;
    write_file(&dir.join("heatmap.csv"), &out.heatmap_csv)?;
    write_file(&dir.join("scores.csv"), out.table.to_csv())?;
    write_file(&dir.join("scores.json"), out.table.to_json_pretty()? + "\n")?;
    write_file(&dir.join("cells.json"), serde_json::to_string_pretty(&out.cells)? + "\n")?;
    for cell in &out.cells {
        for (seed, msg) in &cell.failures {
            eprintln!("cell {} seed {seed} failed: {msg}", canonical_json(&Value::Array(cell.values.clone())));
        }
    }
    println!("sweep directory: {}", dir.display());
    print!("{}", out.heatmap_csv);
    Ok(())
}

fn load_scores(path: &Path) -> CliResult<ScoreTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let table = if path.extension().is_some_and(|e| e == "json") {
        ScoreTable::from_json(&text)
    } else {
        ScoreTable::from_csv(&text)
    };
    table.map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

pub fn eop(a: EopArgs) -> CliResult {
    let mut table = ScoreTable::new();
    for path in &a.scores {
        for entry in load_scores(path)?.entries() {
            for s in &entry.scores {
                table.insert(&entry.dataset, &entry.fingerprint, s.seed, s.score)?;
            }
        }
    }
    let group = if a.group.is_empty() { table.datasets() } else { a.group.clone() };
    for d in &group {
        let n = table.configs(d).len();
        if n == 0 {
            return Err(Failure::config(format!("dataset {d:?} has no scores")));
        }
        if let Some(&k) = a.ks.iter().find(|&&k| k == 0 || k > n) {
            return Err(Failure::config(format!(
                "k = {k} is out of range: dataset {d:?} has {n} policies (k must lie in 1..={n})"
            )));
        }
    }
    let rows = eop_curve(&table, &group, &a.ks, a.bootstrap, a.seed)?;
    let csv = eop_csv(&rows);
    if let Some(out) = &a.output {
        ensure_parent(out)?;
        write_file(out, &csv)?;
    }
    print!("{csv}");
    Ok(())
}

pub fn inspect(a: InspectArgs) -> CliResult {
    if !a.dataset.is_file() {
        return Err(Failure::config(format!("dataset {} does not exist", a.dataset.display())));
    }
    let header = read_header(&a.dataset)?;
    println!("{}", serde_json::to_string_pretty(&header)?);
    let (dataset, _) = load_dataset(&a.dataset)?;
    let returns = dataset.episode_returns();
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let (rmin, rmax) = dataset
        .rewards()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r.into()), hi.max(r.into())));
    println!("transitions: {}", dataset.len());
    println!("episodes: {}", returns.len());
    println!("mean episode return (scaled): {mean}");
    println!("reward range (scaled): [{rmin}, {rmax}]");
    let (lo, hi) = support_from_dataset(&dataset, a.gamma)?;
    println!("support at gamma {}: [{lo}, {hi}]", a.gamma);
    let strategy = ExpandStrategy {
        kind: a.expand_strategy.into(),
        v_expand: a.v_expand,
    };
    let (elo, ehi) = expand_support(lo, hi, strategy)?;
    println!("expanded support (v_expand {}, {:?}): [{elo}, {ehi}]", a.v_expand, strategy.kind);
    match ValueSupport::new(elo, ehi, a.m) {
        Ok(s) => println!("bins: {}, zeta: {}", s.m(), s.zeta()),
        Err(e) => println!("bins: {} ({e})", a.m),
    }
    Ok(())
}

pub fn presets(a: PresetsArgs) -> CliResult {
    match a.name {
        Some(name) => {
            preset(&name)?;
            let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).expect("checked above");
            print!("{text}");
        }
        None => {
            for name in presets::names() {
                let cfg = preset(name)?;
                println!("{name}: {}", cfg.note.unwrap_or_default());
            }
        }
    }
    Ok(())
}
