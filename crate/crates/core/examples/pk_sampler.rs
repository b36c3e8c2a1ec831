//! P identities × K instances batches drawn from a pseudo-labeling.

use mgce::clustering::ClusterLabeling;
use mgce::sampler::pk_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mgce::Result<()> {
    // Three clusters of sizes 5, 2 and 4, plus two noise samples.
    let lab = ClusterLabeling::new(vec![0, 0, 0, 0, 0, 1, 1, -1, 2, 2, 2, 2, -1])?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let batch = pk_sample(&lab, 2, 4, &mut rng)?;
        let clusters: Vec<i32> = batch.iter().map(|&i| lab.labels()[i]).collect();
        println!("samples {batch:?} clusters {clusters:?}");
    }
    Ok(())
}
