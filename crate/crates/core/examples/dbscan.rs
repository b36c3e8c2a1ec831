//! Cosine DBSCAN on a synthetic identity set, across a few radii.
//!
//! cargo run --example dbscan -- [preset] [seed]

use mgce::clustering::{dbscan, DbscanParams, DEFAULT_MIN_PTS};
use mgce::data::{generate, Preset};
use mgce::numcore::{l2_normalize, Seed};

fn main() -> mgce::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("easy").parse()?;
    let seed = args.next().map_or(Ok(7), |s| s.parse()).expect("seed must be an integer");
    let ds = generate(&preset.config(Seed(seed)))?;
    let feats = l2_normalize(&ds.features)?;
    println!("{preset} seed {seed}: {} samples, {} identities", ds.len(), preset.config(Seed(seed)).num_ids);
    println!("{:>6} {:>9} {:>7} {:>7}", "eps", "clusters", "noise", "purity");
    for eps in [0.02, 0.05, 0.1, 0.2, 0.3, 0.4] {
        let lab = dbscan(&feats, DbscanParams::new(eps, DEFAULT_MIN_PTS)?);
        let pure = lab
            .members()
            .iter()
            .filter(|m| m.iter().all(|&i| ds.true_ids[i] == ds.true_ids[m[0]]))
            .count();
        println!(
            "{eps:>6.2} {:>9} {:>7.3} {:>7.3}",
            lab.num_clusters(),
            lab.noise_fraction(),
            pure as f64 / lab.num_clusters().max(1) as f64
        );
    }
    Ok(())
}
