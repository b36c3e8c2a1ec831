//! Multi-granularity cluster ensemble.
//!
//! DBSCAN runs once per radius on a ladder `d_lo, d_lo+δ, …, d_hi`; each run
//! yields a binary co-cluster affinity, and the priority of a pair is the
//! fraction of runs that put it in one cluster. Priorities are stored as integer
//! vote counts so every entry is exactly `k/T`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{cosine_distance_matrix, dbscan_ladder, ClusterLabeling};
use crate::error::{Error, Result};
use crate::numcore::{FeatureMatrix, Matrix};

/// Slack for deciding whether `d_hi` sits on the ladder.
const LADDER_SLACK: f64 = 1e-9;

/// Ascending list of DBSCAN radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LadderRepr", into = "LadderRepr")]
pub struct GranularityLadder {
    lo: f64,
    hi: f64,
    delta: f64,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LadderRepr {
    lo: f64,
    hi: f64,
    delta: f64,
}

impl TryFrom<LadderRepr> for GranularityLadder {
    type Error = Error;
    fn try_from(s: LadderRepr) -> Result<Self> {
        GranularityLadder::new(s.lo, s.hi, s.delta)
    }
}

impl From<GranularityLadder> for LadderRepr {
    fn from(l: GranularityLadder) -> Self {
        LadderRepr {
            lo: l.lo,
            hi: l.hi,
            delta: l.delta,
        }
    }
}

impl Default for GranularityLadder {
    fn default() -> Self {
        GranularityLadder::new(0.4, 0.6, 0.05).expect("default ladder is valid")
    }
}

impl GranularityLadder {
    pub fn new(lo: f64, hi: f64, delta: f64) -> Result<Self> {
        if !(lo > 0.0 && hi < 2.0 && lo <= hi) {
            return Err(Error::config(format!(
                "ladder bounds must satisfy 0 < lo <= hi < 2, got {lo}:{hi}"
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::config(format!("ladder step must be positive, got {delta}")));
        }
        let mut values = Vec::new();
        let mut k = 0u32;
        loop {
            let v = lo + f64::from(k) * delta;
            if v > hi + LADDER_SLACK {
                break;
            }
            values.push(v.min(hi));
            k += 1;
        }
        Ok(GranularityLadder {
            lo,
            hi,
            delta,
            values,
        })
    }

    /// Single-radius ladder (T = 1).
    pub fn single(d: f64) -> Result<Self> {
        Self::new(d, d, 1.0)
    }

    /// Parses `lo:hi:delta`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::config(format!("ladder must be lo:hi:delta, got {text:?}")));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad ladder number {s:?}")))
        };
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self) -> usize {
        self.values.len()
    }

    /// Largest radius.
    pub fn coarsest(&self) -> f64 {
        *self.values.last().expect("ladder is non-empty")
    }
}

impl std::fmt::Display for GranularityLadder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.delta)
    }
}

/// Binary co-cluster matrix, one sorted column list per row (diagonal included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffinityMatrix {
    rows: Vec<Vec<usize>>,
}

impl AffinityMatrix {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }
}

/// Same cluster ⇒ 1; noise points are related only to themselves.
pub fn affinity(labeling: &ClusterLabeling) -> AffinityMatrix {
    let members = labeling.members();
    let rows = (0..labeling.len())
        .map(|i| match labeling.cluster_of(i) {
            Some(c) => members[c].clone(),
            None => vec![i],
        })
        .collect();
    AffinityMatrix { rows }
}

/// Symmetric sparse matrix of co-cluster vote counts over `T` granularities.
///
/// Absent entries are exactly zero; the diagonal is always `T/T = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityMatrix {
    t: u32,
    rows: Vec<Vec<(usize, u32)>>,
}

impl PriorityMatrix {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn t(&self) -> usize {
        self.t as usize
    }

    /// Non-zero entries of row `i` as `(column, votes)`, columns ascending.
    pub fn row_votes(&self, i: usize) -> &[(usize, u32)] {
        &self.rows[i]
    }

    /// Non-zero entries of row `i` as `(column, p)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let t = f64::from(self.t);
        self.rows[i].iter().map(move |&(j, k)| (j, f64::from(k) / t))
    }

    pub fn votes(&self, i: usize, j: usize) -> u32 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        f64::from(self.votes(i, j)) / f64::from(self.t)
    }

    /// Number of stored entries, diagonal included.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Header `N,T`, then one `i,j,p` line per stored pair with `i < j`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{},{}", self.n(), self.t);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row.iter().filter(|&&(j, _)| j > i) {
                let _ = writeln!(s, "{i},{j},{}", self.get(i, j));
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.split_inclusive('\n');
        let header = lines.next().ok_or_else(|| Error::format(0, "missing N,T header"))?;
        let mut offset = header.len() as u64;
        let mut hp = header.trim().split(',');
        let parse_usize = |s: Option<&str>, off: u64, what: &str| -> Result<usize> {
            s.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::format(off, format!("expected integer {what}")))
        };
        let n = parse_usize(hp.next(), 0, "N")?;
        let t = parse_usize(hp.next(), 0, "T")?;
        if t == 0 || t > u32::MAX as usize {
            return Err(Error::format(0, "T must be a positive 32-bit integer"));
        }
        let mut rows: Vec<Vec<(usize, u32)>> = (0..n).map(|i| vec![(i, t as u32)]).collect();
        for line in lines {
            let body = line.trim();
            if !body.is_empty() {
                let mut f = body.split(',');
                let i = parse_usize(f.next(), offset, "i")?;
                let j = parse_usize(f.next(), offset, "j")?;
                let p: f64 = f
                    .next()
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::format(offset, "expected real p"))?;
                if i >= j || j >= n {
                    return Err(Error::format(offset, format!("pair ({i},{j}) must satisfy i < j < N")));
                }
                let k = (p * t as f64).round();
                if !(k >= 1.0 && k <= t as f64) || (k / t as f64 - p).abs() > 1e-9 {
                    return Err(Error::format(offset, format!("p={p} is not a positive multiple of 1/{t}")));
                }
                rows[i].push((j, k as u32));
                rows[j].push((i, k as u32));
            }
            offset += line.len() as u64;
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::format(offset, "duplicate pair"));
            }
        }
        Ok(PriorityMatrix { t: t as u32, rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Averages the affinities of `t` labelings over the same samples.
pub fn priority(labelings: &[ClusterLabeling], t: usize) -> Result<PriorityMatrix> {
    if labelings.len() != t || t == 0 {
        return Err(Error::LengthMismatch {
            expected: t,
            got: labelings.len(),
        });
    }
    let n = labelings[0].len();
    if let Some(bad) = labelings.iter().find(|l| l.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let affinities: Vec<AffinityMatrix> = labelings.iter().map(affinity).collect();
    let mut counts = vec![0u32; n];
    let mut touched = Vec::new();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        for a in &affinities {
            for &j in a.row(i) {
                if counts[j] == 0 {
                    touched.push(j);
                }
                counts[j] += 1;
            }
        }
        touched.sort_unstable();
        let row: Vec<(usize, u32)> = touched.iter().map(|&j| (j, counts[j])).collect();
        for &j in &touched {
            counts[j] = 0;
        }
        touched.clear();
        rows.push(row);
    }
    Ok(PriorityMatrix { t: t as u32, rows })
}

/// Priority matrix together with the per-granularity labelings it came from.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub priority: PriorityMatrix,
    /// One labeling per ladder value, finest first.
    pub labelings: Vec<ClusterLabeling>,
}

/// Runs DBSCAN at every ladder radius on a shared distance matrix, keeping
/// co-membership monotone along the ladder (see [`dbscan_ladder`]).
pub fn ladder_labelings(dist: &Matrix, ladder: &GranularityLadder, min_pts: usize) -> Result<Vec<ClusterLabeling>> {
    dbscan_ladder(dist, ladder.values(), min_pts)
}

pub fn build_priority(features: &FeatureMatrix, ladder: &GranularityLadder, min_pts: usize) -> Result<Ensemble> {
    let dist = cosine_distance_matrix(features);
    let labelings = ladder_labelings(&dist, ladder, min_pts)?;
    let priority = priority(&labelings, ladder.t())?;
    Ok(Ensemble { priority, labelings })
}
