//! Writing and reading features: binary FEATv1 and the CSV import form.
//!
//! cargo run --example feature_file -- [dir]

use std::path::PathBuf;

use mgce::data::{generate, read_features, write_features, Preset};
use mgce::numcore::Seed;

fn main() -> mgce::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let ds = generate(&Preset::Easy.config(Seed(1)))?;

    let bin = dir.join("easy.feat");
    write_features(&bin, &ds.features, Some(&ds.true_ids), Some(&ds.cams))?;
    let back = read_features(&bin)?;
    let exact = back.features.as_slice().iter().zip(ds.features.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("{}: {} bytes, {}x{}, bit-exact {exact}", bin.display(), std::fs::metadata(&bin).map_or(0, |m| m.len()), back.features.n(), back.features.d());

    let csv = dir.join("tiny.csv");
    std::fs::write(&csv, "id,cam,f0,f1,f2\n0,0,1.0,0.0,0.0\n0,1,0.9,0.1,0.0\n1,0,0.0,0.0,1.0\n").map_err(|e| mgce::Error::io(&csv, e))?;
    let parsed = read_features(&csv)?;
    println!("{}: {} rows, ids {:?}, cams {:?}", csv.display(), parsed.features.n(), parsed.ids.unwrap(), parsed.cams.unwrap());

    std::fs::write(&csv, "id,cam,f0\n0,0,oops\n").map_err(|e| mgce::Error::io(&csv, e))?;
    println!("malformed: {}", read_features(&csv).unwrap_err());
    Ok(())
}
