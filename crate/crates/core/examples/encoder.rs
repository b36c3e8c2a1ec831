//! Encoder forward/backward and the checkpoint format.

use mgce::encoder::{Encoder, EncoderConfig};
use mgce::numcore::{FeatureMatrix, Matrix, Seed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mgce::Result<()> {
    let mut enc = Encoder::new(EncoderConfig::mlp(vec![4, 8, 3]), Seed(1))?;
    let x = FeatureMatrix::new(2, 4, vec![1.0, 0.5, -0.2, 0.0, 0.0, 1.0, 1.0, -1.0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = enc.forward(&x, 0.0, &mut rng)?;
    for i in 0..y.n() {
        println!("y[{i}] = {:?}", y.row(i));
    }

    // Pull both outputs toward the first axis.
    let upstream = Matrix::from_vec(2, 3, vec![-1.0, 0.0, 0.0, -1.0, 0.0, 0.0])?;
    let grads = enc.backward(&upstream)?;
    for (l, g) in grads.iter().enumerate() {
        println!("layer {l}: |dW|max {:.4}, |db|max {:.4}", g.weight.max_abs(), g.bias.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }

    let bytes = enc.to_bytes();
    let back = Encoder::from_bytes(&bytes)?;
    println!("checkpoint {} bytes, {} params, round trip equal: {}", bytes.len(), back.num_params(), back.encode(&x)? == enc.encode(&x)?);
    Ok(())
}
