//! Momentum updates of the feature memory.

use mgce::memory::MemoryBank;
use mgce::numcore::FeatureMatrix;

fn main() -> mgce::Result<()> {
    let init = FeatureMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0])?;
    let pull = FeatureMatrix::new(1, 2, vec![0.0, 1.0])?;
    for gamma in [0.0, 0.2, 0.5, 1.0] {
        let mut bank = MemoryBank::init(&init, gamma)?;
        print!("gamma {gamma:.1}:");
        for _ in 0..4 {
            bank.update(&[0], &pull)?;
            let r = bank.features().row(0);
            print!(" [{:.4}, {:.4}]", r[0], r[1]);
        }
        println!();
    }
    Ok(())
}
