//! Multi-granularity ensemble: DBSCAN along a ladder of radii, votes averaged
//! into a sparse priority matrix.
//!
//! cargo run --example priority -- [lo:hi:delta]

use mgce::data::{generate, Preset};
use mgce::ensemble::{build_priority, GranularityLadder};
use mgce::numcore::{l2_normalize, Seed};

fn main() -> mgce::Result<()> {
    let ladder = match std::env::args().nth(1) {
        Some(s) => GranularityLadder::parse(&s)?,
        None => GranularityLadder::new(0.2, 0.4, 0.05)?,
    };
    let ds = generate(&Preset::Medium.config(Seed(7)))?;
    let feats = l2_normalize(&ds.features)?;
    let ens = build_priority(&feats, &ladder, 4)?;

    println!("ladder {ladder} (T = {})", ladder.t());
    for (d, lab) in ladder.values().iter().zip(&ens.labelings) {
        println!("  d = {d:.3}: {:>3} clusters, noise {:.3}", lab.num_clusters(), lab.noise_fraction());
    }

    // Off-diagonal priority mass, split by whether the pair is a true match.
    let t = ladder.t();
    let mut same = vec![0usize; t + 1];
    let mut diff = vec![0usize; t + 1];
    for i in 0..feats.n() {
        for &(j, k) in ens.priority.row_votes(i) {
            if j > i {
                if ds.true_ids[i] == ds.true_ids[j] {
                    same[k as usize] += 1;
                } else {
                    diff[k as usize] += 1;
                }
            }
        }
    }
    println!("nonzero entries: {}", ens.priority.nnz());
    println!("{:>8} {:>10} {:>10}", "priority", "same id", "other id");
    for k in 1..=t {
        println!("{:>8.2} {:>10} {:>10}", k as f64 / t as f64, same[k], diff[k]);
    }
    Ok(())
}
