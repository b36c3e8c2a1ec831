//! DBSCAN over cosine distance, producing canonical pseudo labels.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{dot, FeatureMatrix, Matrix};

/// Label of samples that belong to no cluster.
pub const NOISE: i32 = -1;

/// Core-point threshold used when none is configured.
pub const DEFAULT_MIN_PTS: usize = 4;

/// Neighborhood radius (cosine distance) and core-point threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        if !(eps > 0.0 && eps < 2.0) {
            return Err(Error::config(format!("eps must lie in (0, 2), got {eps}")));
        }
        if min_pts == 0 {
            return Err(Error::config("min_pts must be at least 1"));
        }
        Ok(DbscanParams { eps, min_pts })
    }
}

/// Per-sample cluster ids with [`NOISE`] for unclustered samples.
///
/// Always canonical: scanning samples in ascending order, cluster ids appear
/// for the first time in the order 0, 1, 2, ….
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterLabeling {
    labels: Vec<i32>,
    num_clusters: usize,
}

impl ClusterLabeling {
    /// Relabels arbitrary ids into canonical form. Any negative id is noise.
    pub fn from_raw(raw: &[i64]) -> Self {
        let mut map: BTreeMap<i64, i32> = BTreeMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            if r < 0 {
                labels.push(NOISE);
                continue;
            }
            let next = map.len() as i32;
            let id = *map.entry(r).or_insert(next);
            labels.push(id);
        }
        ClusterLabeling {
            labels,
            num_clusters: map.len(),
        }
    }

    /// Accepts labels that are already canonical.
    pub fn new(labels: Vec<i32>) -> Result<Self> {
        let mut next = 0i32;
        for (i, &l) in labels.iter().enumerate() {
            if l == NOISE {
                continue;
            }
            if l < 0 || l > next {
                return Err(Error::config(format!(
                    "label {l} at sample {i} is not in canonical form (next id {next})"
                )));
            }
            if l == next {
                next += 1;
            }
        }
        Ok(ClusterLabeling {
            labels,
            num_clusters: next as usize,
        })
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    /// Cluster of sample `i`, `None` for noise.
    #[inline]
    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        let l = self.labels[i];
        (l >= 0).then_some(l as usize)
    }

    /// Sorted member lists, one per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn clustered_count(&self) -> usize {
        self.len() - self.noise_count()
    }

    pub fn noise_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.noise_count() as f64 / self.len() as f64
    }

    /// Whether samples `i` and `j` share a (non-noise) cluster.
    #[inline]
    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        let a = self.labels[i];
        a >= 0 && a == self.labels[j]
    }

    /// One integer per line, line `i` holding the label of sample `i`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.labels.len() * 3);
        for l in &self.labels {
            let _ = writeln!(s, "{l}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut raw = Vec::new();
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let t = line.trim();
            if !t.is_empty() {
                let v: i64 = t
                    .parse()
                    .map_err(|_| Error::format(offset, format!("expected an integer label, got {t:?}")))?;
                raw.push(v);
            }
            offset += line.len() as u64;
        }
        Ok(Self::from_raw(&raw))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// `1 − ⟨f_i, f_j⟩` clamped to `[0, 2]`, exactly symmetric with a zero diagonal.
pub fn cosine_distance_matrix(features: &FeatureMatrix) -> Matrix {
    let n = features.n();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let fi = features.row(i);
        for j in (i + 1)..n {
            let d = (1.0 - dot(fi, features.row(j))).clamp(0.0, 2.0);
            out.set(i, j, d);
            out.set(j, i, d);
        }
    }
    out
}

/// DBSCAN on unit-norm rows under cosine distance.
pub fn dbscan(features: &FeatureMatrix, params: DbscanParams) -> ClusterLabeling {
    dbscan_precomputed(&cosine_distance_matrix(features), params)
}

/// Core flags: a point is core when at least `min_pts` points (itself included)
/// lie within `eps`.
pub fn core_points(dist: &Matrix, params: DbscanParams) -> Vec<bool> {
    (0..dist.rows())
        .map(|i| dist.row(i).iter().filter(|&&d| d <= params.eps).count() >= params.min_pts)
        .collect()
}

/// DBSCAN over a precomputed symmetric distance matrix.
///
/// Clusters are grown from core points in ascending index order, and a border
/// point reachable from several clusters joins the one whose seed has the
/// smallest index. The result is then put in canonical form.
pub fn dbscan_precomputed(dist: &Matrix, params: DbscanParams) -> ClusterLabeling {
    let core = core_points(dist, params);
    expand(dist, params.eps, &core, None)
}

/// DBSCAN at every radius of an ascending ladder.
///
/// The first run is exactly [`dbscan_precomputed`]. In later runs a border point
/// that was clustered one step finer stays with the cluster that absorbed its
/// previous cluster's core points, which is always among the clusters it can
/// reach. This keeps co-membership monotone along the ladder: a pair clustered
/// together at one radius stays together at every larger radius. Plain
/// independent runs do not guarantee that, because an ambiguous border point may
/// switch to a cluster with a smaller seed as the radius grows.
pub fn dbscan_ladder(dist: &Matrix, radii: &[f64], min_pts: usize) -> Result<Vec<ClusterLabeling>> {
    let mut out: Vec<ClusterLabeling> = Vec::with_capacity(radii.len());
    let mut prev: Option<(ClusterLabeling, Vec<bool>)> = None;
    for (step, &eps) in radii.iter().enumerate() {
        let params = DbscanParams::new(eps, min_pts)?;
        if step > 0 && eps < radii[step - 1] {
            return Err(Error::config(format!("ladder radii must ascend, {eps} follows {}", radii[step - 1])));
        }
        let core = core_points(dist, params);
        let labels = expand(dist, eps, &core, prev.as_ref().map(|(l, c)| (l, c.as_slice())));
        prev = Some((labels.clone(), core));
        out.push(labels);
    }
    Ok(out)
}

/// Core components first (seeded in ascending order), then border attachment.
fn expand(dist: &Matrix, eps: f64, core: &[bool], finer: Option<(&ClusterLabeling, &[bool])>) -> ClusterLabeling {
    let n = dist.rows();
    let unset = NOISE as i64;
    let mut labels = vec![unset; n];
    let mut queue = VecDeque::new();
    let mut next = 0i64;
    for seed in 0..n {
        if !core[seed] || labels[seed] != unset {
            continue;
        }
        labels[seed] = next;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for (q, &d) in dist.row(p).iter().enumerate() {
                if d <= eps && core[q] && labels[q] == unset {
                    labels[q] = next;
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }

    // One core point per cluster of the finer labeling, to find where it went.
    let finer_rep: Option<Vec<usize>> = finer.map(|(lab, fcore)| {
        let mut rep = vec![usize::MAX; lab.num_clusters()];
        for i in 0..n {
            if let Some(c) = lab.cluster_of(i) {
                if fcore[i] && rep[c] == usize::MAX {
                    rep[c] = i;
                }
            }
        }
        rep
    });

    let core_labels = labels.clone();
    for b in 0..n {
        if core[b] {
            continue;
        }
        let inherited = match (finer, &finer_rep) {
            (Some((lab, _)), Some(rep)) => lab.cluster_of(b).map(|c| core_labels[rep[c]]),
            _ => None,
        };
        labels[b] = match inherited {
            Some(c) => c,
            None => dist
                .row(b)
                .iter()
                .enumerate()
                .filter(|&(q, &d)| d <= eps && core[q])
                .map(|(q, _)| core_labels[q])
                .min()
                .unwrap_or(unset),
        };
    }
    ClusterLabeling::from_raw(&labels)
}
