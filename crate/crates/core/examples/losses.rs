//! The three contrastive losses on one batch, with a finite-difference check of
//! each analytic gradient.

use mgce::clustering::{dbscan, DbscanParams};
use mgce::data::{generate, Preset};
use mgce::ensemble::{build_priority, GranularityLadder};
use mgce::losses::{centroids, cluster_nce_loss, grad_check, hcl_loss, pc_loss, Batch, LossConfig};
use mgce::numcore::{l2_normalize, Seed};

fn main() -> mgce::Result<()> {
    let ds = generate(&Preset::Easy.config(Seed(7)))?;
    let memory = l2_normalize(&ds.features)?;
    let lab = dbscan(&memory, DbscanParams::new(0.1, 4)?);
    let cents = centroids(&memory, &lab)?;
    let ens = build_priority(&memory, &GranularityLadder::new(0.05, 0.15, 0.025)?, 4)?;

    let idx: Vec<usize> = (0..ds.len()).step_by(25).collect();
    let batch = Batch::new(idx.clone(), memory.select_rows(&idx)?)?;
    let cfg = LossConfig::default();

    let nce = |b: &Batch| cluster_nce_loss(b, &cents, &lab, &cfg);
    let hcl = |b: &Batch| hcl_loss(b, &memory, &lab, &cents, &cfg);
    let pc = |b: &Batch| pc_loss(b, &memory, &ens.priority, &cfg);

    println!("{} anchors, tau {}", batch.len(), cfg.tau);
    println!("cluster_nce {:.6}  fd rel err {:.1e}", nce(&batch)?.value, grad_check(&batch, 1e-6, nce)?);
    println!("hcl         {:.6}  fd rel err {:.1e}", hcl(&batch)?.value, grad_check(&batch, 1e-6, hcl)?);
    println!("pc          {:.6}  fd rel err {:.1e}", pc(&batch)?.value, grad_check(&batch, 1e-6, pc)?);
    Ok(())
}
