//! Epoch loop: recluster the memory snapshot, then P×K batches of
//! forward, loss, backward, Adam step and memory update.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{cosine_distance_matrix, dbscan_precomputed, ClusterLabeling, DbscanParams, DEFAULT_MIN_PTS};
use crate::data::LabeledDataset;
use crate::encoder::{Encoder, EncoderConfig};
use crate::ensemble::{ladder_labelings, priority, GranularityLadder, PriorityMatrix};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalResult};
use crate::losses::{centroids, cluster_nce_loss, hcl_loss, pc_loss, Batch, LossConfig, LossReport, DEFAULT_TAU};
use crate::memory::{MemoryBank, DEFAULT_GAMMA};
use crate::numcore::{FeatureMatrix, Seed};
use crate::optim::{Adam, AdamConfig};
use crate::sampler::pk_sample_members;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ClusterNce,
    Hcl,
    Pc,
}

impl LossKind {
    pub const NAMES: &'static str = "cluster_nce, hcl, pc";
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::ClusterNce => "cluster_nce",
            LossKind::Hcl => "hcl",
            LossKind::Pc => "pc",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cluster_nce" => Ok(LossKind::ClusterNce),
            "hcl" => Ok(LossKind::Hcl),
            "pc" => Ok(LossKind::Pc),
            other => Err(Error::config(format!("unknown loss {other:?}, expected one of {}", Self::NAMES))),
        }
    }
}

/// Fixed count, or `"auto"`: enough batches to cover the clustered samples once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "ItersRepr", into = "ItersRepr")]
pub enum ItersPerEpoch {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ItersRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<ItersRepr> for ItersPerEpoch {
    type Error = String;

    fn try_from(r: ItersRepr) -> std::result::Result<Self, String> {
        match r {
            ItersRepr::Count(0) => Err("iters_per_epoch must be positive".into()),
            ItersRepr::Count(n) => Ok(ItersPerEpoch::Fixed(n)),
            ItersRepr::Name(s) if s == "auto" => Ok(ItersPerEpoch::Auto),
            ItersRepr::Name(s) => Err(format!("iters_per_epoch must be a positive integer or \"auto\", got {s:?}")),
        }
    }
}

impl From<ItersPerEpoch> for ItersRepr {
    fn from(v: ItersPerEpoch) -> Self {
        match v {
            ItersPerEpoch::Auto => ItersRepr::Name("auto".into()),
            ItersPerEpoch::Fixed(n) => ItersRepr::Count(n),
        }
    }
}

impl FromStr for ItersPerEpoch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(ItersPerEpoch::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(ItersPerEpoch::Fixed(n)),
            _ => Err(Error::config(format!("iters_per_epoch must be a positive integer or auto, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub p_identities: usize,
    pub k_instances: usize,
    pub iters_per_epoch: ItersPerEpoch,
    pub loss: LossKind,
    /// Radii for `pc`.
    pub ladder: GranularityLadder,
    /// Single radius for `hcl` and `cluster_nce`.
    pub d: f64,
    pub min_pts: usize,
    pub jitter_sigma: f64,
    pub tau: f64,
    pub gamma: f64,
    pub seed: Seed,
    /// Record wall-clock time per epoch. Off by default so logs are reproducible.
    pub timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            p_identities: 16,
            k_instances: 4,
            iters_per_epoch: ItersPerEpoch::Auto,
            loss: LossKind::Pc,
            ladder: GranularityLadder::default(),
            d: 0.5,
            min_pts: DEFAULT_MIN_PTS,
            jitter_sigma: 0.05,
            tau: DEFAULT_TAU,
            gamma: DEFAULT_GAMMA,
            seed: Seed(0),
            timing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_identities == 0 || self.k_instances == 0 || self.p_identities * self.k_instances < 2 {
            return Err(Error::config("P and K must be positive with P·K >= 2"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::config(format!("jitter_sigma must be >= 0, got {}", self.jitter_sigma)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::GammaOutOfRange(self.gamma));
        }
        LossConfig::new(self.tau)?;
        DbscanParams::new(self.d, self.min_pts)?;
        Ok(())
    }

    /// Radii clustered each epoch, finest first.
    pub fn radii(&self) -> Vec<f64> {
        match self.loss {
            LossKind::Pc => self.ladder.values().to_vec(),
            _ => vec![self.d],
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// `None` when every iteration was skipped.
    pub mean_loss: Option<f64>,
    pub clusters_per_granularity: Vec<usize>,
    /// Of the labeling batches are drawn from (the coarsest for `pc`).
    pub noise_fraction: f64,
    pub iterations: usize,
    pub wall_ms: u64,
}

pub fn log_to_jsonl(log: &[EpochLog]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
        out.push('\n');
    }
    out
}

/// Pseudo labels and targets for the current epoch.
struct EpochTargets {
    labelings: Vec<ClusterLabeling>,
    priority: Option<PriorityMatrix>,
}

impl EpochTargets {
    fn sampling(&self) -> &ClusterLabeling {
        self.labelings.last().expect("at least one radius")
    }
}

#[derive(Debug)]
pub struct Trainer {
    raw: FeatureMatrix,
    config: TrainConfig,
    loss_cfg: LossConfig,
    encoder: Encoder,
    adam: Adam,
    memory: MemoryBank,
    sample_rng: ChaCha8Rng,
    jitter_rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    /// Builds the encoder from the seed and fills memory with its un-jittered
    /// output.
    pub fn new(raw: FeatureMatrix, enc_cfg: EncoderConfig, adam_cfg: AdamConfig, config: TrainConfig) -> Result<Self> {
        let encoder = Encoder::new(enc_cfg, config.seed.derive(10))?;
        Self::with_encoder(raw, encoder, adam_cfg, config)
    }

    pub fn with_encoder(raw: FeatureMatrix, encoder: Encoder, adam_cfg: AdamConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let loss_cfg = LossConfig::new(config.tau)?;
        let adam = Adam::for_encoder(adam_cfg, &encoder)?;
        let memory = MemoryBank::init(&encoder.encode(&raw)?, config.gamma)?;
        Ok(Trainer {
            sample_rng: config.seed.derive(11).rng(),
            jitter_rng: config.seed.derive(12).rng(),
            raw,
            loss_cfg,
            encoder,
            adam,
            memory,
            config,
            epoch: 0,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn memory(&self) -> &MemoryBank {
        &self.memory
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn into_parts(self) -> (Encoder, MemoryBank) {
        (self.encoder, self.memory)
    }

    fn targets(&self) -> Result<EpochTargets> {
        let dist = cosine_distance_matrix(self.memory.features());
        let radii = self.config.radii();
        let labelings = match self.config.loss {
            LossKind::Pc => ladder_labelings(&dist, &self.config.ladder, self.config.min_pts)?,
            _ => vec![dbscan_precomputed(&dist, DbscanParams::new(radii[0], self.config.min_pts)?)],
        };
        if labelings.iter().all(|l| l.num_clusters() == 0) {
            return Err(Error::DegenerateClustering { epoch: self.epoch + 1 });
        }
        let priority = match self.config.loss {
            LossKind::Pc => Some(priority(&labelings, radii.len())?),
            _ => None,
        };
        Ok(EpochTargets { labelings, priority })
    }

    fn loss(&self, batch: &Batch, targets: &EpochTargets) -> Result<LossReport> {
        let memory = self.memory.features();
        let lab = targets.sampling();
        match self.config.loss {
            LossKind::ClusterNce => cluster_nce_loss(batch, &centroids(memory, lab)?, lab, &self.loss_cfg),
            LossKind::Hcl => hcl_loss(batch, memory, lab, &centroids(memory, lab)?, &self.loss_cfg),
            LossKind::Pc => pc_loss(batch, memory, targets.priority.as_ref().expect("pc targets"), &self.loss_cfg),
        }
    }

    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        let started = Instant::now();
        let targets = self.targets()?;
        let sampling = targets.sampling();
        let members = sampling.members();
        let pk = self.config.p_identities * self.config.k_instances;
        let iterations = match self.config.iters_per_epoch {
            ItersPerEpoch::Fixed(n) => n,
            ItersPerEpoch::Auto => sampling.clustered_count().div_ceil(pk).max(1),
        };

        let mut loss_sum = 0.0;
        let mut counted = 0usize;
        if !members.is_empty() {
            for _ in 0..iterations {
                let ids = pk_sample_members(&members, self.config.p_identities, self.config.k_instances, &mut self.sample_rng)?;
                let raw_batch = self.raw.select_rows(&ids)?;
                let out = self.encoder.forward(&raw_batch, self.config.jitter_sigma, &mut self.jitter_rng)?;
                let batch = Batch::new(ids, out)?;
                let report = match self.loss(&batch, &targets) {
                    Ok(r) => r,
                    Err(Error::AllAnchorsNoise | Error::AllAnchorsIsolated) => continue,
                    Err(e) => return Err(e),
                };
                loss_sum += report.value;
                counted += 1;
                let grads = self.encoder.backward(&report.grad)?;
                self.adam.step_encoder(&mut self.encoder, &grads)?;

                // Repeated draws of a sample update memory once, with its first view.
                let mut seen = std::collections::BTreeSet::new();
                let keep: Vec<usize> = (0..batch.len()).filter(|&r| seen.insert(batch.indices()[r])).collect();
                let uniq: Vec<usize> = keep.iter().map(|&r| batch.indices()[r]).collect();
                self.memory.update(&uniq, &batch.features().select_rows(&keep)?)?;
            }
        }

        self.epoch += 1;
        Ok(EpochLog {
            epoch: self.epoch,
            mean_loss: (counted > 0).then(|| loss_sum / counted as f64),
            clusters_per_granularity: targets.labelings.iter().map(ClusterLabeling::num_clusters).collect(),
            noise_fraction: sampling.noise_fraction(),
            iterations: counted,
            wall_ms: if self.config.timing { started.elapsed().as_millis() as u64 } else { 0 },
        })
    }

    /// Runs the remaining configured epochs.
    pub fn run(&mut self) -> Result<Vec<EpochLog>> {
        let mut log = Vec::with_capacity(self.config.epochs.saturating_sub(self.epoch));
        while self.epoch < self.config.epochs {
            log.push(self.run_epoch()?);
        }
        Ok(log)
    }
}

/// Trained encoder, final memory and per-epoch log.
#[derive(Debug)]
pub struct TrainOutcome {
    pub encoder: Encoder,
    pub memory: MemoryBank,
    pub log: Vec<EpochLog>,
}

pub fn train(raw: &FeatureMatrix, enc_cfg: EncoderConfig, adam_cfg: AdamConfig, config: TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(raw.clone(), enc_cfg, adam_cfg, config)?;
    let log = trainer.run()?;
    let (encoder, memory) = trainer.into_parts();
    Ok(TrainOutcome { encoder, memory, log })
}

/// Retrieval scores of `encoder` on the dataset's query/gallery split.
pub fn evaluate_encoder(encoder: &Encoder, dataset: &LabeledDataset) -> Result<EvalResult> {
    let embedded = encoder.encode(&dataset.features)?;
    evaluate(&dataset.eval_set(&embedded)?)
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub initial: EvalResult,
    pub fin: EvalResult,
    pub outcome: TrainOutcome,
}

/// Trains on every sample of `dataset` without labels, scoring the encoder
/// before and after.
pub fn run_experiment(
    dataset: &LabeledDataset,
    enc_cfg: EncoderConfig,
    adam_cfg: AdamConfig,
    config: TrainConfig,
) -> Result<ExperimentResult> {
    let mut trainer = Trainer::new(dataset.features.clone(), enc_cfg, adam_cfg, config)?;
    let initial = evaluate_encoder(trainer.encoder(), dataset)?;
    let log = trainer.run()?;
    let (encoder, memory) = trainer.into_parts();
    let fin = evaluate_encoder(&encoder, dataset)?;
    Ok(ExperimentResult {
        initial,
        fin,
        outcome: TrainOutcome { encoder, memory, log },
    })
}
