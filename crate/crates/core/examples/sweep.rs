//! One ablation axis swept through the library API, printed as CSV.
//!
//! cargo run --release --example sweep -- [d|ladder_range|delta|gamma]

use mgce::cli::{sweep, SweepAxis};
use mgce::config::RunConfig;
use mgce::ensemble::GranularityLadder;

fn main() -> mgce::Result<()> {
    let axis: SweepAxis = std::env::args().nth(1).as_deref().unwrap_or("delta").parse()?;
    let mut base = RunConfig::default();
    base.train.epochs = 20;
    base.train.ladder = GranularityLadder::new(0.1, 0.2, 0.025)?;
    let values: Vec<String> = match axis {
        SweepAxis::D => ["0.1", "0.125", "0.15", "0.175", "0.2"].map(String::from).to_vec(),
        SweepAxis::LadderRange => ["0.08-0.16", "0.1-0.2", "0.12-0.2"].map(String::from).to_vec(),
        SweepAxis::Delta => ["0.025", "0.01", "0.005"].map(String::from).to_vec(),
        SweepAxis::Gamma => axis.default_values().iter().map(|s| s.to_string()).collect(),
    };
    let table = sweep(&base, axis, &values, &[7])?;
    print!("{}", table.to_csv());
    Ok(())
}
