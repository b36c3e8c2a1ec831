//! Command-line front end. The `mgce` binary is a thin wrapper around [`run`].
//!
//! Every command writes into an output directory (`--out`, else
//! `$MGCE_OUT/<command>`, else `mgce-out/<command>`) and prints a one-line JSON
//! summary. Failures print `error_code: message` on stderr and exit nonzero.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::clustering::{dbscan, DbscanParams, DEFAULT_MIN_PTS};
use crate::config::RunConfig;
use crate::data::{generate, read_dataset_dir, read_features, write_dataset_dir, Preset, DATASET_FEATURES};
use crate::encoder::Encoder;
use crate::ensemble::{build_priority, GranularityLadder};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalResult};
use crate::numcore::{l2_normalize, FeatureMatrix, Seed};
use crate::train::{evaluate_encoder, log_to_jsonl, run_experiment, ItersPerEpoch, LossKind};

pub const OUT_ENV: &str = "MGCE_OUT";

#[derive(Debug, Parser)]
#[command(name = "mgce", version, about = "Multi-granularity cluster ensemble contrastive training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic identity dataset.
    Generate(GenerateArgs),
    /// DBSCAN at one radius.
    Cluster(ClusterArgs),
    /// Cluster at every ladder radius and write the priority matrix.
    Priority(PriorityArgs),
    /// Train an encoder and evaluate it before and after.
    Train(TrainArgs),
    /// Evaluate raw features or a saved encoder.
    Eval(EvalArgs),
    /// Train once per setting along one ablation axis.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value = "medium")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// FEATv1 or CSV file, or a dataset directory.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    d: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_PTS)]
    min_pts: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct PriorityArgs {
    #[arg(long)]
    features: PathBuf,
    /// `lo:hi:delta`
    #[arg(long, default_value = "0.4:0.6:0.05")]
    ladder: String,
    #[arg(long, default_value_t = DEFAULT_MIN_PTS)]
    min_pts: usize,
    #[command(flatten)]
    out: OutArgs,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Default, Args)]
struct RunFlags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Dataset directory written by `generate`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sets both the data and the training seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    loss: Option<String>,
    /// `lo:hi:delta`
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    min_pts: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Positive integer or `auto`.
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Comma-separated, e.g. `32,64,32`.
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    identity: bool,
    /// Record wall-clock time in the log (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunFlags,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Encoder blob from `train`; raw features are scored without one.
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// One of d, ladder_range, delta, gamma.
    #[arg(long)]
    axis: String,
    /// Comma-separated settings; ranges as `lo-hi`. Defaults depend on the axis.
    #[arg(long)]
    values: Option<String>,
    /// Comma-separated seeds; with several, mean and std rows are appended.
    #[arg(long)]
    seeds: Option<String>,
    #[command(flatten)]
    run: RunFlags,
    #[command(flatten)]
    out: OutArgs,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("usage_error: {first}");
            return 2;
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}: {}", e.code(), e.to_string().replace('\n', " "));
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<String> {
    let json = |v: &dyn erased::Json| v.to_json();
    match cmd {
        Command::Generate(a) => {
            let preset: Preset = a.preset.parse()?;
            let out = out_dir(a.out.out, "generate");
            let s = cmd_generate(preset, Seed(a.seed), &out, a.out.force)?;
            Ok(json(&s))
        }
        Command::Cluster(a) => {
            let out = out_dir(a.out.out, "cluster");
            Ok(json(&cmd_cluster(&a.features, a.d, a.min_pts, &out, a.out.force)?))
        }
        Command::Priority(a) => {
            let ladder = GranularityLadder::parse(&a.ladder)?;
            let out = out_dir(a.out.out, "priority");
            Ok(json(&cmd_priority(&a.features, &ladder, a.min_pts, &out, a.out.force)?))
        }
        Command::Train(a) => {
            let cfg = a.run.resolve()?;
            let out = out_dir(a.out.out.or_else(|| cfg.out_dir.clone()), "train");
            Ok(json(&cmd_train(&cfg, &out, a.out.force)?))
        }
        Command::Eval(a) => {
            let ds = match (&a.data, &a.preset) {
                (Some(dir), _) => read_dataset_dir(dir)?,
                (None, p) => generate(&p.as_deref().unwrap_or("medium").parse::<Preset>()?.config(Seed(a.seed)))?,
            };
            let result = match &a.encoder {
                Some(path) => evaluate_encoder(&Encoder::load(path)?, &ds)?,
                None => evaluate(&ds.eval_set(&l2_normalize(&ds.features)?)?)?,
            };
            if let Some(out) = a.out.out {
                write_outputs(&out, a.out.force, &[("eval.json", json(&result) + "\n")])?;
            }
            Ok(json(&result))
        }
        Command::Sweep(a) => {
            let axis: SweepAxis = a.axis.parse()?;
            let cfg = a.run.resolve()?;
            let values = match &a.values {
                Some(v) => split_list(v),
                None => axis.default_values().iter().map(|s| s.to_string()).collect(),
            };
            let seeds = match &a.seeds {
                Some(s) => split_list(s)
                    .iter()
                    .map(|v| v.parse::<u64>().map_err(|_| Error::Usage(format!("bad seed {v:?}"))))
                    .collect::<Result<Vec<_>>>()?,
                None => vec![cfg.train.seed.0],
            };
            let out = out_dir(a.out.out.or_else(|| cfg.out_dir.clone()), "sweep");
            let table = cmd_sweep(&cfg, axis, &values, &seeds, &out, a.out.force)?;
            Ok(json(&serde_json::json!({ "rows": table.rows.len(), "csv": out.join("sweep.csv") })))
        }
    }
}

mod erased {
    pub trait Json {
        fn to_json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn to_json(&self) -> String {
            serde_json::to_string(self).expect("summaries serialize")
        }
    }
}

fn out_dir(explicit: Option<PathBuf>, command: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("mgce-out"), PathBuf::from);
        root.join(command)
    })
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
}

/// Writes every file or none: existing targets are an error unless `force`.
fn write_outputs(dir: &Path, force: bool, files: &[(&str, String)]) -> Result<()> {
    write_output_bytes(
        dir,
        force,
        &files.iter().map(|(n, c)| (*n, c.as_bytes().to_vec())).collect::<Vec<_>>(),
    )
}

fn write_output_bytes(dir: &Path, force: bool, files: &[(&str, Vec<u8>)]) -> Result<()> {
    check_outputs(dir, force, &files.iter().map(|(n, _)| *n).collect::<Vec<_>>())?;
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn check_outputs(dir: &Path, force: bool, names: &[&str]) -> Result<()> {
    if !force {
        if let Some(existing) = names.iter().map(|n| dir.join(n)).find(|p| p.exists()) {
            return Err(Error::OutputExists(existing));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let file = if path.is_dir() { path.join(DATASET_FEATURES) } else { path.to_path_buf() };
    l2_normalize(&read_features(&file)?.features)
}

impl RunFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.preset {
            cfg.data.preset = p.parse()?;
            cfg.data.synth = None;
        }
        if let Some(dir) = &self.data {
            cfg.data.dir = Some(dir.clone());
        }
        if let Some(s) = self.seed {
            cfg.data.seed = Seed(s);
            if let Some(synth) = &mut cfg.data.synth {
                synth.seed = Seed(s);
            }
            cfg.train.seed = Seed(s);
        }
        let t = &mut cfg.train;
        if let Some(l) = &self.loss {
            t.loss = l.parse()?;
        }
        if let Some(l) = &self.ladder {
            t.ladder = GranularityLadder::parse(l)?;
        }
        set(&mut t.d, self.d);
        set(&mut t.min_pts, self.min_pts);
        set(&mut t.epochs, self.epochs);
        set(&mut t.p_identities, self.p);
        set(&mut t.k_instances, self.k);
        if let Some(it) = &self.iters {
            t.iters_per_epoch = it.parse::<ItersPerEpoch>()?;
        }
        set(&mut t.jitter_sigma, self.jitter);
        set(&mut t.tau, self.tau);
        set(&mut t.gamma, self.gamma);
        t.timing |= self.timing;
        set(&mut cfg.adam.lr, self.lr);
        set(&mut cfg.adam.weight_decay, self.weight_decay);
        if let Some(l) = &self.layers {
            let sizes = split_list(l)
                .iter()
                .map(|v| v.parse::<usize>().map_err(|_| Error::config(format!("bad layer size {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            cfg.encoder.layer_sizes = Some(sizes);
        }
        cfg.encoder.identity_mode |= self.identity;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateSummary {
    pub n: usize,
    pub dim: usize,
    pub num_ids: usize,
    pub num_queries: usize,
    pub num_gallery: usize,
}

pub fn cmd_generate(preset: Preset, seed: Seed, out: &Path, force: bool) -> Result<GenerateSummary> {
    let cfg = preset.config(seed);
    let ds = generate(&cfg)?;
    check_outputs(out, force, &[DATASET_FEATURES, crate::data::DATASET_SPLIT, "synth.json"])?;
    write_dataset_dir(out, &ds)?;
    let synth = serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n";
    write_outputs(out, true, &[("synth.json", synth)])?;
    Ok(GenerateSummary {
        n: ds.len(),
        dim: ds.features.d(),
        num_ids: cfg.num_ids,
        num_queries: ds.query.len(),
        num_gallery: ds.gallery.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub num_clusters: usize,
    pub noise_fraction: f64,
}

pub fn cmd_cluster(features: &Path, d: f64, min_pts: usize, out: &Path, force: bool) -> Result<ClusterSummary> {
    let params = DbscanParams::new(d, min_pts)?;
    let f = load_features(features)?;
    let lab = dbscan(&f, params);
    let summary = ClusterSummary {
        num_clusters: lab.num_clusters(),
        noise_fraction: lab.noise_fraction(),
    };
    let json = serde_json::to_string(&summary).expect("summary serializes") + "\n";
    write_outputs(out, force, &[("labels.csv", lab.to_csv()), ("summary.json", json)])?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct PrioritySummary {
    pub t: usize,
    pub nnz: usize,
    pub clusters_per_granularity: Vec<usize>,
}

pub fn cmd_priority(features: &Path, ladder: &GranularityLadder, min_pts: usize, out: &Path, force: bool) -> Result<PrioritySummary> {
    DbscanParams::new(ladder.lo(), min_pts)?;
    let f = load_features(features)?;
    let ens = build_priority(&f, ladder, min_pts)?;
    let summary = PrioritySummary {
        t: ladder.t(),
        nnz: ens.priority.nnz(),
        clusters_per_granularity: ens.labelings.iter().map(|l| l.num_clusters()).collect(),
    };
    let json = serde_json::to_string(&summary).expect("summary serializes") + "\n";
    write_outputs(out, force, &[("priority.csv", ens.priority.to_csv()), ("summary.json", json)])?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub initial: EvalResult,
    #[serde(rename = "final")]
    pub fin: EvalResult,
}

pub const TRAIN_FILES: [&str; 4] = ["config.toml", "encoder.bin", "train_log.jsonl", "eval.json"];

/// Writes the resolved config, encoder checkpoint, JSON-lines log and
/// before/after scores.
pub fn cmd_train(cfg: &RunConfig, out: &Path, force: bool) -> Result<TrainSummary> {
    check_outputs(out, force, &TRAIN_FILES)?;
    let ds = cfg.data.load()?;
    let enc_cfg = cfg.encoder.resolve(ds.features.d())?;
    let exp = run_experiment(&ds, enc_cfg, cfg.adam, cfg.train.clone())?;
    let summary = TrainSummary {
        epochs: exp.outcome.log.len(),
        initial: exp.initial,
        fin: exp.fin,
    };
    let eval = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_output_bytes(
        out,
        true,
        &[
            ("config.toml", cfg.to_toml().into_bytes()),
            ("encoder.bin", exp.outcome.encoder.to_bytes()),
            ("train_log.jsonl", log_to_jsonl(&exp.outcome.log).into_bytes()),
            ("eval.json", eval.into_bytes()),
        ],
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    D,
    LadderRange,
    Delta,
    Gamma,
}

impl SweepAxis {
    pub const NAMES: &'static str = "d, ladder_range, delta, gamma";

    pub fn default_values(self) -> &'static [&'static str] {
        match self {
            SweepAxis::D => &["0.40", "0.45", "0.50", "0.55", "0.60"],
            SweepAxis::LadderRange => &[
                "0.1-0.3", "0.2-0.3", "0.1-0.4", "0.2-0.4", "0.3-0.4", "0.1-0.5", "0.2-0.5", "0.3-0.5", "0.4-0.5",
                "0.1-0.6", "0.2-0.6", "0.3-0.6", "0.4-0.6", "0.5-0.6", "0.3-0.7", "0.4-0.7",
            ],
            SweepAxis::Delta => &["0.05", "0.02", "0.01"],
            SweepAxis::Gamma => &["0.1", "0.2", "0.3", "0.4", "0.5"],
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &RunConfig, value: &str) -> Result<RunConfig> {
        let mut cfg = base.clone();
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Usage(format!("bad {self:?} setting {v:?}")));
        let t = &mut cfg.train;
        match self {
            SweepAxis::D => {
                t.loss = LossKind::Hcl;
                t.d = num(value)?;
            }
            SweepAxis::LadderRange => {
                let (lo, hi) = value
                    .split_once('-')
                    .ok_or_else(|| Error::Usage(format!("ladder range must look like lo-hi, got {value:?}")))?;
                t.loss = LossKind::Pc;
                t.ladder = GranularityLadder::new(num(lo)?, num(hi)?, t.ladder.delta())?;
            }
            SweepAxis::Delta => {
                t.loss = LossKind::Pc;
                t.ladder = GranularityLadder::new(t.ladder.lo(), t.ladder.hi(), num(value)?)?;
            }
            SweepAxis::Gamma => t.gamma = num(value)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(SweepAxis::D),
            "ladder_range" => Ok(SweepAxis::LadderRange),
            "delta" => Ok(SweepAxis::Delta),
            "gamma" => Ok(SweepAxis::Gamma),
            other => Err(Error::Usage(format!("unknown sweep axis {other:?}; valid axes: {}", Self::NAMES))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub setting: String,
    pub result: EvalResult,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// `setting,map,cmc1,cmc5,cmc10,seed`; with several seeds each setting
    /// also gets a `mean` and a sample-`std` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,map,cmc1,cmc5,cmc10,seed\n");
        let mut settings: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !settings.contains(&r.setting.as_str()) {
                settings.push(&r.setting);
            }
        }
        for s in settings {
            let rows: Vec<&SweepRow> = self.rows.iter().filter(|r| r.setting == s).collect();
            for r in &rows {
                let m = r.result;
                let _ = writeln!(out, "{s},{:.6},{:.6},{:.6},{:.6},{}", m.map, m.cmc1, m.cmc5, m.cmc10, r.seed);
            }
            if rows.len() > 1 {
                let cols = |f: fn(&EvalResult) -> f64| rows.iter().map(|r| f(&r.result)).collect::<Vec<_>>();
                let stats: Vec<(f64, f64)> = [
                    cols(|m| m.map),
                    cols(|m| m.cmc1),
                    cols(|m| m.cmc5),
                    cols(|m| m.cmc10),
                ]
                .iter()
                .map(|v| mean_std(v))
                .collect();
                let _ = writeln!(out, "{s},{:.6},{:.6},{:.6},{:.6},mean", stats[0].0, stats[1].0, stats[2].0, stats[3].0);
                let _ = writeln!(out, "{s},{:.6},{:.6},{:.6},{:.6},std", stats[0].1, stats[1].1, stats[2].1, stats[3].1);
            }
        }
        out
    }

    /// Mean final mAP per setting, in setting order.
    pub fn mean_map(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, Vec<f64>)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(s, _)| *s == r.setting) {
                Some((_, v)) => v.push(r.result.map),
                None => out.push((r.setting.clone(), vec![r.result.map])),
            }
        }
        out.into_iter().map(|(s, v)| (s, mean_std(&v).0)).collect()
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every (setting, seed) pair in order and writes `sweep.csv`.
pub fn cmd_sweep(base: &RunConfig, axis: SweepAxis, values: &[String], seeds: &[u64], out: &Path, force: bool) -> Result<SweepTable> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Usage("sweep needs at least one setting and one seed".into()));
    }
    check_outputs(out, force, &["sweep.csv"])?;
    let table = sweep(base, axis, values, seeds)?;
    write_outputs(out, true, &[("sweep.csv", table.to_csv())])?;
    Ok(table)
}

/// The sweep itself, without touching the filesystem unless the data lives there.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[String], seeds: &[u64]) -> Result<SweepTable> {
    let mut table = SweepTable::default();
    let configs = values.iter().map(|v| axis.apply(base, v)).collect::<Result<Vec<_>>>()?;
    for (value, cfg) in values.iter().zip(configs) {
        for &seed in seeds {
            let mut cfg = cfg.clone();
            cfg.data.seed = Seed(seed);
            if let Some(s) = &mut cfg.data.synth {
                s.seed = Seed(seed);
            }
            cfg.train.seed = Seed(seed);
            let ds = cfg.data.load()?;
            let enc = cfg.encoder.resolve(ds.features.d())?;
            let exp = run_experiment(&ds, enc, cfg.adam, cfg.train)?;
            table.rows.push(SweepRow {
                setting: value.clone(),
                result: exp.fin,
                seed,
            });
        }
    }
    Ok(table)
}
