//! Contrastive objectives over a memory bank, with analytic gradients.
//!
//! All three losses share one per-anchor shape,
//!
//! ```text
//! ℓ = −log( e^{⟨f, w⟩/τ} / (e^{⟨f, w⟩/τ} + Σ_k e^{⟨f, v_k⟩/τ}) )
//! ```
//!
//! and differ only in the positive vector `w` and the negative set `{v_k}`:
//!
//! | loss               | positive `w`                            | negatives `v_k`               |
//! |--------------------|-----------------------------------------|-------------------------------|
//! | `cluster_nce_loss` | centroid of the anchor's cluster        | every other centroid          |
//! | `hcl_loss`         | centroid of the anchor's cluster        | memory rows outside that cluster |
//! | `pc_loss`          | priority-weighted mean of memory rows   | memory rows with zero priority |
//!
//! so `∂ℓ/∂f = (Σ_k softmax_k · v_k − (1 − softmax_0) · w) / τ`. Memory rows and
//! centroids are constants. Gradients are taken with respect to the batch rows
//! as given; backpropagation through normalization belongs to the encoder.
//!
//! Anchors without a defined positive (noise anchors for the first two, anchors
//! whose only positive is themselves for `pc_loss`) are excluded and the batch
//! mean runs over included anchors only. Negatives are always visited in
//! ascending sample order.

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterLabeling;
use crate::ensemble::PriorityMatrix;
use crate::error::{Error, Result};
use crate::numcore::{dot, lse_nonempty, FeatureMatrix, Matrix};

pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub tau: f64,
}

impl LossConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::config(format!("temperature must be positive, got {tau}")));
        }
        Ok(LossConfig { tau })
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { tau: DEFAULT_TAU }
    }
}

/// Mini-batch: dataset sample ids and their encoded rows, aligned.
#[derive(Debug, Clone)]
pub struct Batch {
    indices: Vec<usize>,
    features: FeatureMatrix,
}

impl Batch {
    pub fn new(indices: Vec<usize>, features: FeatureMatrix) -> Result<Self> {
        if indices.len() != features.n() {
            return Err(Error::LengthMismatch {
                expected: indices.len(),
                got: features.n(),
            });
        }
        Ok(Batch { indices, features })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn check(&self, memory: &FeatureMatrix) -> Result<()> {
        if self.features.d() != memory.d() {
            return Err(Error::DimMismatch {
                expected: memory.d(),
                got: self.features.d(),
            });
        }
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= memory.n()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: memory.n(),
            });
        }
        Ok(())
    }
}

/// Unnormalized per-cluster means of memory rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCentroids {
    means: Matrix,
    counts: Vec<usize>,
}

impl ClusterCentroids {
    pub fn num_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn mean(&self, c: usize) -> &[f64] {
        self.means.row(c)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn means(&self) -> &Matrix {
        &self.means
    }
}

/// Arithmetic mean of the memory rows in each cluster; noise is left out.
pub fn centroids(memory: &FeatureMatrix, labeling: &ClusterLabeling) -> Result<ClusterCentroids> {
    if labeling.len() != memory.n() {
        return Err(Error::LengthMismatch {
            expected: memory.n(),
            got: labeling.len(),
        });
    }
    let c = labeling.num_clusters();
    if c == 0 {
        return Err(Error::NoClusters);
    }
    let d = memory.d();
    let mut means = Matrix::zeros(c, d);
    let mut counts = vec![0usize; c];
    for i in 0..memory.n() {
        if let Some(k) = labeling.cluster_of(i) {
            counts[k] += 1;
            for (acc, v) in means.row_mut(k).iter_mut().zip(memory.row(i)) {
                *acc += v;
            }
        }
    }
    for (k, &cnt) in counts.iter().enumerate() {
        let cnt = cnt as f64;
        for v in means.row_mut(k) {
            *v /= cnt;
        }
    }
    Ok(ClusterCentroids { means, counts })
}

/// Positive and negative exponential scores of one anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorStats {
    pub s_plus: f64,
    pub s_minus: f64,
    pub included: bool,
}

impl AnchorStats {
    const EXCLUDED: AnchorStats = AnchorStats {
        s_plus: 0.0,
        s_minus: 0.0,
        included: false,
    };
}

#[derive(Debug, Clone)]
pub struct LossReport {
    /// Mean over included anchors.
    pub value: f64,
    /// `∂value/∂batch_row`, one row per batch entry; zero for excluded anchors.
    pub grad: Matrix,
    pub per_anchor: Vec<AnchorStats>,
}

impl LossReport {
    pub fn included(&self) -> usize {
        self.per_anchor.iter().filter(|a| a.included).count()
    }
}

/// Scratch space reused across anchors.
struct Accumulator {
    tau: f64,
    logits: Vec<f64>,
    grad: Matrix,
    stats: Vec<AnchorStats>,
    total: f64,
    included: usize,
}

impl Accumulator {
    fn new(batch: &Batch, tau: f64) -> Self {
        Accumulator {
            tau,
            logits: Vec::new(),
            grad: Matrix::zeros(batch.len(), batch.features.d()),
            stats: Vec::with_capacity(batch.len()),
            total: 0.0,
            included: 0,
        }
    }

    /// Adds one anchor's term and its unscaled gradient. `negatives` must yield
    /// the same rows, in the same order, on every call.
    fn anchor<'a, I, F>(&mut self, row: usize, f: &[f64], positive: &[f64], negatives: F)
    where
        F: Fn() -> I,
        I: Iterator<Item = &'a [f64]>,
    {
        let inv_tau = 1.0 / self.tau;
        self.logits.clear();
        let z_pos = dot(f, positive) * inv_tau;
        self.logits.push(z_pos);
        for v in negatives() {
            self.logits.push(dot(f, v) * inv_tau);
        }
        let g = self.grad.row_mut(row);
        if self.logits.len() == 1 {
            // No negatives: the softmax is saturated on the positive.
            self.included += 1;
            self.stats.push(AnchorStats {
                s_plus: z_pos.exp(),
                s_minus: 0.0,
                included: true,
            });
            g.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        // ℓ = log(1 + s⁻/s⁺) = softplus(log s⁻ − log s⁺)
        let lse_neg = lse_nonempty(&self.logits[1..]);
        let margin = lse_neg - z_pos;
        let term = softplus(margin);
        let lse_all = z_pos + term;
        self.total += term;
        self.included += 1;
        self.stats.push(AnchorStats {
            s_plus: z_pos.exp(),
            s_minus: lse_neg.exp(),
            included: true,
        });

        let w_pos = -sigmoid(margin);
        for (gd, p) in g.iter_mut().zip(positive) {
            *gd = w_pos * p;
        }
        for (k, v) in negatives().enumerate() {
            let w = (self.logits[k + 1] - lse_all).exp();
            for (gd, x) in g.iter_mut().zip(v) {
                *gd += w * x;
            }
        }
    }

    fn skip(&mut self) {
        self.stats.push(AnchorStats::EXCLUDED);
    }

    fn finish(mut self, empty: Error) -> Result<LossReport> {
        if self.included == 0 {
            return Err(empty);
        }
        let scale = 1.0 / (self.tau * self.included as f64);
        for v in self.grad.as_mut_slice() {
            *v *= scale;
        }
        Ok(LossReport {
            value: self.total / self.included as f64,
            grad: self.grad,
            per_anchor: self.stats,
        })
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_labeling(memory_n: usize, labeling: &ClusterLabeling) -> Result<()> {
    if labeling.len() != memory_n {
        return Err(Error::LengthMismatch {
            expected: memory_n,
            got: labeling.len(),
        });
    }
    Ok(())
}

/// Cluster-level InfoNCE: softmax over all centroids.
pub fn cluster_nce_loss(
    batch: &Batch,
    cents: &ClusterCentroids,
    labeling: &ClusterLabeling,
    cfg: &LossConfig,
) -> Result<LossReport> {
    if cents.num_clusters() == 0 {
        return Err(Error::NoClusters);
    }
    if cents.means.cols() != batch.features.d() {
        return Err(Error::DimMismatch {
            expected: cents.means.cols(),
            got: batch.features.d(),
        });
    }
    if let Some(&bad) = batch.indices.iter().find(|&&i| i >= labeling.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: labeling.len(),
        });
    }
    let mut acc = Accumulator::new(batch, cfg.tau);
    for (row, &id) in batch.indices.iter().enumerate() {
        let Some(c) = labeling.cluster_of(id) else {
            acc.skip();
            continue;
        };
        let others = || {
            (0..cents.num_clusters())
                .filter(move |&j| j != c)
                .map(|j| cents.mean(j))
        };
        acc.anchor(row, batch.features.row(row), cents.mean(c), others);
    }
    acc.finish(Error::AllAnchorsNoise)
}

/// Hybrid loss: the anchor's centroid against every memory row outside its
/// cluster (noise rows included).
pub fn hcl_loss(
    batch: &Batch,
    memory: &FeatureMatrix,
    labeling: &ClusterLabeling,
    cents: &ClusterCentroids,
    cfg: &LossConfig,
) -> Result<LossReport> {
    batch.check(memory)?;
    check_labeling(memory.n(), labeling)?;
    let labels = labeling.labels();
    let mut acc = Accumulator::new(batch, cfg.tau);
    for (row, &id) in batch.indices.iter().enumerate() {
        let Some(c) = labeling.cluster_of(id) else {
            acc.skip();
            continue;
        };
        let own = c as i32;
        let negatives = || {
            (0..memory.n())
                .filter(move |&j| labels[j] != own)
                .map(|j| memory.row(j))
        };
        acc.anchor(row, batch.features.row(row), cents.mean(c), negatives);
    }
    acc.finish(Error::AllAnchorsNoise)
}

/// Priority-weighted hybrid loss: the priority-weighted mean of memory rows
/// against every memory row of zero priority.
pub fn pc_loss(batch: &Batch, memory: &FeatureMatrix, prio: &PriorityMatrix, cfg: &LossConfig) -> Result<LossReport> {
    batch.check(memory)?;
    if prio.n() != memory.n() {
        return Err(Error::LengthMismatch {
            expected: memory.n(),
            got: prio.n(),
        });
    }
    let n = memory.n();
    let t = prio.t() as f64;
    let mut acc = Accumulator::new(batch, cfg.tau);
    let mut positive = vec![0.0; memory.d()];
    let mut is_positive = vec![false; n];
    for (row, &id) in batch.indices.iter().enumerate() {
        let votes = prio.row_votes(id);
        if votes.len() < 2 {
            acc.skip();
            continue;
        }
        positive.iter_mut().for_each(|v| *v = 0.0);
        let mut weight = 0.0;
        for &(j, k) in votes {
            let p = f64::from(k) / t;
            weight += p;
            for (acc_v, m) in positive.iter_mut().zip(memory.row(j)) {
                *acc_v += p * m;
            }
            is_positive[j] = true;
        }
        for v in positive.iter_mut() {
            *v /= weight;
        }
        let mask = &is_positive;
        let negatives = || (0..n).filter(move |&j| !mask[j]).map(|j| memory.row(j));
        acc.anchor(row, batch.features.row(row), &positive, negatives);
        for &(j, _) in votes {
            is_positive[j] = false;
        }
    }
    acc.finish(Error::AllAnchorsIsolated)
}

/// Largest relative error between an analytic batch gradient and central finite
/// differences of the loss value, over coordinates where the analytic entry
/// exceeds `1e-8` in magnitude.
pub fn grad_check<F>(batch: &Batch, eps_fd: f64, loss_fn: F) -> Result<f64>
where
    F: Fn(&Batch) -> Result<LossReport>,
{
    if !(1e-7..=1e-3).contains(&eps_fd) {
        return Err(Error::config(format!("finite-difference step {eps_fd} outside [1e-7, 1e-3]")));
    }
    let analytic = loss_fn(batch)?.grad;
    let (n, d) = (batch.features.n(), batch.features.d());
    let mut worst = 0.0_f64;
    let mut data = batch.features.as_slice().to_vec();
    for r in 0..n {
        for c in 0..d {
            let a = analytic.get(r, c);
            if a.abs() <= 1e-8 {
                continue;
            }
            let k = r * d + c;
            let orig = data[k];
            let mut eval = |x: f64| -> Result<f64> {
                data[k] = x;
                let b = Batch::new(batch.indices.clone(), FeatureMatrix::new(n, d, data.clone())?)?;
                Ok(loss_fn(&b)?.value)
            };
            let up = eval(orig + eps_fd)?;
            let down = eval(orig - eps_fd)?;
            data[k] = orig;
            let numeric = (up - down) / (2.0 * eps_fd);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::priority;
    use crate::numcore::l2_normalize;

    fn unit(rows: &[Vec<f64>]) -> FeatureMatrix {
        l2_normalize(&FeatureMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn lab(raw: &[i64]) -> ClusterLabeling {
        ClusterLabeling::from_raw(raw)
    }

    #[test]
    fn centroid_examples() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]);
        let c = centroids(&mem, &lab(&[0, 0, 1])).unwrap();
        assert_eq!(c.mean(0), &[0.5, 0.5]);
        assert!((crate::numcore::norm(c.mean(0)) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.mean(1), mem.row(2));
        assert_eq!(c.counts(), &[2, 1]);
        assert!(matches!(centroids(&mem, &lab(&[-1, -1, -1])), Err(Error::NoClusters)));
        assert!(matches!(centroids(&mem, &lab(&[0, 0])), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn cluster_nce_single_cluster_is_zero() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]);
        let l = lab(&[0, 0, 0]);
        let c = centroids(&mem, &l).unwrap();
        let b = Batch::new(vec![1, 2], unit(&[vec![0.3, 0.7], vec![-1.0, 0.2]])).unwrap();
        let r = cluster_nce_loss(&b, &c, &l, &LossConfig::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.grad.max_abs(), 0.0);
        let err = grad_check(&b, 1e-5, |b| cluster_nce_loss(b, &c, &l, &LossConfig::default())).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn cluster_nce_two_centroids_hand_value() {
        // centroids [1,0] and [0,1]; anchor [1,0]; e^20/(e^20+1)
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let l = lab(&[0, 1]);
        let c = centroids(&mem, &l).unwrap();
        let b = Batch::new(vec![0], unit(&[vec![1.0, 0.0]])).unwrap();
        let r = cluster_nce_loss(&b, &c, &l, &LossConfig::default()).unwrap();
        let expect = (-20.0f64).exp().ln_1p();
        assert!((r.value - expect).abs() < 1e-12 * expect);
        assert!((r.value - 2.061e-9).abs() < 1e-12);
        assert!((r.per_anchor[0].s_plus - 20f64.exp()).abs() < 1e-3);
        assert!((r.per_anchor[0].s_minus - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_anchors_share_the_mean() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let l = lab(&[0, 1]);
        let c = centroids(&mem, &l).unwrap();
        let cfg = LossConfig::default();
        let both = Batch::new(vec![0, 1], unit(&[vec![0.9, 0.1], vec![0.1, 0.9]])).unwrap();
        let one = Batch::new(vec![0], unit(&[vec![0.9, 0.1]])).unwrap();
        let a = cluster_nce_loss(&both, &c, &l, &cfg).unwrap();
        let b = cluster_nce_loss(&one, &c, &l, &cfg).unwrap();
        assert!((a.value - b.value).abs() < 1e-15);
    }

    #[test]
    fn noise_anchors_are_excluded() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let l = lab(&[0, 1, -1]);
        let c = centroids(&mem, &l).unwrap();
        let cfg = LossConfig::default();
        let b = Batch::new(vec![2, 0], unit(&[vec![1.0, 1.0], vec![1.0, 0.2]])).unwrap();
        let r = hcl_loss(&b, &mem, &l, &c, &cfg).unwrap();
        assert!(!r.per_anchor[0].included);
        assert!(r.per_anchor[1].included);
        assert_eq!(r.grad.row(0), &[0.0, 0.0]);
        assert_eq!(r.included(), 1);
        let only_noise = Batch::new(vec![2], unit(&[vec![1.0, 1.0]])).unwrap();
        assert!(matches!(hcl_loss(&only_noise, &mem, &l, &c, &cfg), Err(Error::AllAnchorsNoise)));
        assert!(matches!(cluster_nce_loss(&only_noise, &c, &l, &cfg), Err(Error::AllAnchorsNoise)));
    }

    #[test]
    fn hcl_without_negatives_is_zero() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]);
        let l = lab(&[0, 0, 0]);
        let c = centroids(&mem, &l).unwrap();
        let b = Batch::new(vec![0], unit(&[vec![0.2, 0.9]])).unwrap();
        let r = hcl_loss(&b, &mem, &l, &c, &LossConfig::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.grad.max_abs(), 0.0);
        assert_eq!(r.per_anchor[0].s_minus, 0.0);
    }

    #[test]
    fn hcl_hand_value_and_negative_monotonicity() {
        let cfg = LossConfig::default();
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let l = lab(&[0, 1]);
        let c = centroids(&mem, &l).unwrap();
        let b = Batch::new(vec![0], unit(&[vec![1.0, 0.0]])).unwrap();
        let one = hcl_loss(&b, &mem, &l, &c, &cfg).unwrap();
        assert!((one.value - 2.061e-9).abs() < 1e-12);

        let mem2 = unit(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]);
        let l2 = lab(&[0, 1, 2]);
        let c2 = centroids(&mem2, &l2).unwrap();
        let two = hcl_loss(&b, &mem2, &l2, &c2, &cfg).unwrap();
        assert!(two.value > one.value);
        let expect = (2.0 * (-20.0f64).exp()).ln_1p();
        assert!((two.value - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn pc_hand_value() {
        // self (p=1, sim 1), neighbour (p=0.5, sim 0.8), zero-priority negative (sim 0)
        let mem = unit(&[vec![1.0, 0.0, 0.0], vec![0.8, 0.6, 0.0], vec![0.0, 0.0, 1.0]]);
        let p = priority(&[lab(&[0, 0, -1]), lab(&[0, 1, -1])], 2).unwrap();
        assert_eq!(p.get(0, 1), 0.5);
        let b = Batch::new(vec![0], unit(&[vec![1.0, 0.0, 0.0]])).unwrap();
        let r = pc_loss(&b, &mem, &p, &LossConfig::default()).unwrap();
        let mean_sim = (1.0 + 0.5 * 0.8) / 1.5;
        let expect = (-mean_sim / 0.05f64).exp().ln_1p();
        assert!((r.value - expect).abs() < 1e-12 * expect);
        assert!((r.value - 7.819_332e-9).abs() < 1e-14);
        assert!((r.per_anchor[0].s_plus.ln() - mean_sim / 0.05).abs() < 1e-12);
    }

    #[test]
    fn pc_without_zero_priorities_is_zero() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let p = priority(&[lab(&[0, 0])], 1).unwrap();
        let b = Batch::new(vec![1], unit(&[vec![0.3, 0.4]])).unwrap();
        let r = pc_loss(&b, &mem, &p, &LossConfig::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.per_anchor[0].s_minus, 0.0);
    }

    #[test]
    fn pc_isolated_anchors() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let p = priority(&[lab(&[0, 1, 1])], 1).unwrap();
        let b = Batch::new(vec![0], unit(&[vec![1.0, 0.0]])).unwrap();
        assert!(matches!(
            pc_loss(&b, &mem, &p, &LossConfig::default()),
            Err(Error::AllAnchorsIsolated)
        ));
        let mixed = Batch::new(vec![0, 2], unit(&[vec![1.0, 0.0], vec![1.0, 1.0]])).unwrap();
        let r = pc_loss(&mixed, &mem, &p, &LossConfig::default()).unwrap();
        assert!(!r.per_anchor[0].included);
        assert_eq!(r.grad.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn relabeling_clusters_is_bitwise_invariant() {
        let mem = unit(&[
            vec![1.0, 0.1, 0.0],
            vec![0.9, 0.2, 0.1],
            vec![0.0, 1.0, 0.2],
            vec![0.1, 0.8, 0.0],
            vec![0.3, 0.3, 0.9],
        ]);
        let a = lab(&[7, 7, 3, 3, -1]);
        let b = lab(&[1, 1, 9, 9, -5]);
        let cfg = LossConfig::default();
        let batch = Batch::new(vec![0, 3], unit(&[vec![0.7, 0.3, 0.1], vec![0.2, 0.9, 0.3]])).unwrap();
        let ra = hcl_loss(&batch, &mem, &a, &centroids(&mem, &a).unwrap(), &cfg).unwrap();
        let rb = hcl_loss(&batch, &mem, &b, &centroids(&mem, &b).unwrap(), &cfg).unwrap();
        assert_eq!(ra.value.to_bits(), rb.value.to_bits());
        assert_eq!(ra.grad, rb.grad);
    }

    #[test]
    fn grad_check_rejects_bad_step() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let l = lab(&[0, 1]);
        let c = centroids(&mem, &l).unwrap();
        let b = Batch::new(vec![0], unit(&[vec![1.0, 0.0]])).unwrap();
        let f = |b: &Batch| cluster_nce_loss(b, &c, &l, &LossConfig::default());
        assert!(grad_check(&b, 1.0, f).is_err());
        assert!(grad_check(&b, 1e-9, f).is_err());
    }

    #[test]
    fn batch_validation() {
        let mem = unit(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let l = lab(&[0, 1]);
        let c = centroids(&mem, &l).unwrap();
        assert!(Batch::new(vec![0, 1], unit(&[vec![1.0, 0.0]])).is_err());
        let b = Batch::new(vec![5], unit(&[vec![1.0, 0.0]])).unwrap();
        assert!(matches!(
            hcl_loss(&b, &mem, &l, &c, &LossConfig::default()),
            Err(Error::IndexOutOfRange { index: 5, len: 2 })
        ));
        assert!(LossConfig::new(0.0).is_err());
    }
}
