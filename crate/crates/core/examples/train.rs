//! Unsupervised training on a synthetic identity set: per-epoch log and the
//! retrieval score before and after.
//!
//! cargo run --release --example train -- [pc|hcl|cluster_nce] [epochs]

use mgce::data::{generate, Preset};
use mgce::encoder::EncoderConfig;
use mgce::ensemble::GranularityLadder;
use mgce::numcore::Seed;
use mgce::optim::AdamConfig;
use mgce::train::{run_experiment, LossKind, TrainConfig};

fn main() -> mgce::Result<()> {
    let mut args = std::env::args().skip(1);
    let loss: LossKind = args.next().as_deref().unwrap_or("pc").parse()?;
    let epochs = args.next().map_or(20, |s| s.parse().expect("epochs must be an integer"));
    let ds = generate(&Preset::Medium.config(Seed(7)))?;
    // Radii fitted to the untrained 32-64-32 embedding of this preset.
    let cfg = TrainConfig {
        loss,
        epochs,
        seed: Seed(7),
        ladder: GranularityLadder::new(0.1, 0.2, 0.025)?,
        d: 0.2,
        ..TrainConfig::default()
    };
    let exp = run_experiment(&ds, EncoderConfig::mlp(vec![32, 64, 32]), AdamConfig::default(), cfg)?;
    for e in &exp.outcome.log {
        println!(
            "epoch {:>3} loss {:>8} clusters {:?} noise {:.3}",
            e.epoch,
            e.mean_loss.map_or("-".into(), |l| format!("{l:.4}")),
            e.clusters_per_granularity,
            e.noise_fraction
        );
    }
    println!("mAP {:.4} -> {:.4}, cmc1 {:.4} -> {:.4}", exp.initial.map, exp.fin.map, exp.initial.cmc1, exp.fin.cmc1);
    Ok(())
}
