//! Retrieval scores (mAP, CMC) of raw features and of an untrained encoder.

use mgce::data::{generate, Preset};
use mgce::encoder::{Encoder, EncoderConfig};
use mgce::eval::evaluate;
use mgce::numcore::{l2_normalize, Seed};
use mgce::train::evaluate_encoder;

fn main() -> mgce::Result<()> {
    println!("{:<8} {:<10} {:>7} {:>7} {:>7} {:>7}", "preset", "features", "mAP", "cmc1", "cmc5", "cmc10");
    for preset in Preset::ALL {
        let ds = generate(&preset.config(Seed(7)))?;
        let raw = evaluate(&ds.eval_set(&l2_normalize(&ds.features)?)?)?;
        let enc = Encoder::new(EncoderConfig::mlp(vec![32, 64, 32]), Seed(7).derive(10))?;
        let mlp = evaluate_encoder(&enc, &ds)?;
        for (name, r) in [("raw", raw), ("mlp init", mlp)] {
            println!("{:<8} {:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4}", preset.to_string(), name, r.map, r.cmc1, r.cmc5, r.cmc10);
        }
    }
    Ok(())
}
