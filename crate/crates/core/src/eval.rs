//! Retrieval metrics: mAP and CMC under the cross-camera protocol.
//!
//! For each query, gallery entries sharing both its identity and camera are
//! dropped, as are junk entries (identity `-1`). Queries left with no correct
//! match are skipped rather than scored zero.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{dot, l2_normalize, FeatureMatrix};

pub const JUNK_ID: i32 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    query: FeatureMatrix,
    gallery: FeatureMatrix,
    query_ids: Vec<i32>,
    gallery_ids: Vec<i32>,
    query_cams: Vec<i32>,
    gallery_cams: Vec<i32>,
}

impl EvalSet {
    /// Rows that are not already flagged unit-norm are normalized here.
    pub fn new(
        query: FeatureMatrix,
        gallery: FeatureMatrix,
        query_ids: Vec<i32>,
        gallery_ids: Vec<i32>,
        query_cams: Vec<i32>,
        gallery_cams: Vec<i32>,
    ) -> Result<Self> {
        if query.d() != gallery.d() {
            return Err(Error::DimMismatch {
                expected: query.d(),
                got: gallery.d(),
            });
        }
        for (len, want) in [
            (query_ids.len(), query.n()),
            (query_cams.len(), query.n()),
            (gallery_ids.len(), gallery.n()),
            (gallery_cams.len(), gallery.n()),
        ] {
            if len != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    got: len,
                });
            }
        }
        let unit = |m: FeatureMatrix| if m.is_unit_norm() { Ok(m) } else { l2_normalize(&m) };
        Ok(EvalSet {
            query: unit(query)?,
            gallery: unit(gallery)?,
            query_ids,
            gallery_ids,
            query_cams,
            gallery_cams,
        })
    }

    pub fn num_queries(&self) -> usize {
        self.query.n()
    }

    pub fn num_gallery(&self) -> usize {
        self.gallery.n()
    }

    /// Gallery indices by descending cosine similarity, ties by ascending index,
    /// with protocol exclusions removed.
    pub fn rank_gallery(&self, q: usize) -> Result<Vec<usize>> {
        if q >= self.num_queries() {
            return Err(Error::IndexOutOfRange {
                index: q,
                len: self.num_queries(),
            });
        }
        let (qid, qcam) = (self.query_ids[q], self.query_cams[q]);
        let qf = self.query.row(q);
        let mut scored: Vec<(f64, usize)> = (0..self.num_gallery())
            .filter(|&g| {
                let gid = self.gallery_ids[g];
                gid != JUNK_ID && !(gid == qid && self.gallery_cams[g] == qcam)
            })
            .map(|g| (dot(qf, self.gallery.row(g)), g))
            .collect();
        scored.sort_by(|a, b| match b.0.total_cmp(&a.0) {
            Ordering::Equal => a.1.cmp(&b.1),
            o => o,
        });
        Ok(scored.into_iter().map(|(_, g)| g).collect())
    }

    fn relevance(&self, q: usize) -> Result<Vec<bool>> {
        let qid = self.query_ids[q];
        Ok(self
            .rank_gallery(q)?
            .into_iter()
            .map(|g| qid != JUNK_ID && self.gallery_ids[g] == qid)
            .collect())
    }
}

/// Mean precision over the ranks of the relevant entries.
pub fn average_precision(ranking: &[bool]) -> Result<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &rel) in ranking.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::NoRelevant);
    }
    Ok(sum / hits as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub map: f64,
    pub cmc1: f64,
    pub cmc5: f64,
    pub cmc10: f64,
    /// Queries that were scored.
    pub num_queries: usize,
    pub num_skipped: usize,
}

pub fn evaluate(set: &EvalSet) -> Result<EvalResult> {
    let mut ap_sum = 0.0;
    let mut top = [0usize; 3];
    let mut scored = 0usize;
    let mut skipped = 0usize;
    for q in 0..set.num_queries() {
        let rel = set.relevance(q)?;
        let ap = match average_precision(&rel) {
            Ok(ap) => ap,
            Err(Error::NoRelevant) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        scored += 1;
        ap_sum += ap;
        let first = rel.iter().position(|&r| r).expect("has a relevant entry");
        for (slot, k) in top.iter_mut().zip([1, 5, 10]) {
            *slot += usize::from(first < k);
        }
    }
    if scored == 0 {
        return Err(Error::NoValidQueries);
    }
    let frac = |c: usize| c as f64 / scored as f64;
    Ok(EvalResult {
        map: ap_sum / scored as f64,
        cmc1: frac(top[0]),
        cmc5: frac(top[1]),
        cmc10: frac(top[2]),
        num_queries: scored,
        num_skipped: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Seed;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[true, false, false]).unwrap(), 1.0);
        let ap = average_precision(&[true, false, true, false]).unwrap();
        assert!((ap - 0.833_333_333_333).abs() < 1e-9);
        assert_eq!(average_precision(&[true; 5]).unwrap(), 1.0);
        assert!(matches!(average_precision(&[false, false]), Err(Error::NoRelevant)));
        assert!(matches!(average_precision(&[]), Err(Error::NoRelevant)));
    }

    #[test]
    fn ranking_rules() {
        let q = fm(&[vec![1.0, 0.0]]);
        let g = fm(&[
            vec![0.0, 1.0],
            vec![1.0, 0.0],  // same id, same cam: excluded
            vec![1.0, 1.0],
            vec![1.0, 1.0],  // tie with 2
            vec![1.0, 0.0],  // exact copy, other cam
            vec![1.0, 0.01], // junk
        ]);
        let set = EvalSet::new(q, g, vec![5], vec![1, 5, 2, 5, 5, -1], vec![0], vec![1, 0, 1, 2, 3, 2]).unwrap();
        assert_eq!(set.rank_gallery(0).unwrap(), vec![4, 2, 3, 0]);
        let r = evaluate(&set).unwrap();
        // relevance [T, F, T, F]
        assert!((r.map - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!((r.cmc1, r.num_queries, r.num_skipped), (1.0, 1, 0));
        assert!(set.rank_gallery(1).is_err());
    }

    #[test]
    fn copies_without_distractors_are_perfect() {
        let rows = vec![vec![1.0, 0.2, 0.0], vec![0.0, 1.0, 0.3], vec![0.2, 0.0, 1.0]];
        let set = EvalSet::new(fm(&rows), fm(&rows), vec![0, 1, 2], vec![0, 1, 2], vec![0; 3], vec![1; 3]).unwrap();
        let r = evaluate(&set).unwrap();
        assert_eq!((r.map, r.cmc1, r.cmc10), (1.0, 1.0, 1.0));
    }

    #[test]
    fn skipped_and_invalid_queries() {
        let set = EvalSet::new(
            fm(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            fm(&[vec![1.0, 0.0]]),
            vec![0, 3],
            vec![0],
            vec![0, 0],
            vec![1],
        )
        .unwrap();
        let r = evaluate(&set).unwrap();
        assert_eq!((r.num_queries, r.num_skipped), (1, 1));
        let none = EvalSet::new(fm(&[vec![1.0]]), fm(&[vec![1.0]]), vec![0], vec![0], vec![0], vec![0]).unwrap();
        assert!(matches!(evaluate(&none), Err(Error::NoValidQueries)));
        assert!(matches!(
            EvalSet::new(fm(&[vec![1.0]]), fm(&[vec![1.0, 0.0]]), vec![0], vec![0], vec![0], vec![0]),
            Err(Error::DimMismatch { .. })
        ));
    }

    /// Scores each query by counting, for every relevant position, how many
    /// relevant entries sit at or above it.
    fn brute_map(q: &[Vec<f64>], g: &[Vec<f64>], qid: &[i32], gid: &[i32], qc: &[i32], gc: &[i32]) -> (f64, f64) {
        let unit = |v: &Vec<f64>| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / n).collect::<Vec<_>>()
        };
        let (mut total, mut top1, mut count) = (0.0, 0.0, 0);
        for i in 0..q.len() {
            let qi = unit(&q[i]);
            let mut cand: Vec<(f64, usize)> = (0..g.len())
                .filter(|&j| gid[j] != -1 && !(gid[j] == qid[i] && gc[j] == qc[i]))
                .map(|j| (qi.iter().zip(unit(&g[j])).map(|(a, b)| a * b).sum(), j))
                .collect();
            cand.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let rel: Vec<bool> = cand.iter().map(|&(_, j)| gid[j] == qid[i]).collect();
            let r = rel.iter().filter(|&&x| x).count();
            if r == 0 {
                continue;
            }
            let mut ap = 0.0;
            for pos in 0..rel.len() {
                if rel[pos] {
                    ap += rel[..=pos].iter().filter(|&&x| x).count() as f64 / (pos + 1) as f64;
                }
            }
            total += ap / r as f64;
            top1 += f64::from(u8::from(rel[0]));
            count += 1;
        }
        (total / count as f64, top1 / count as f64)
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = Seed(12).rng();
        for _ in 0..20 {
            let d = 6;
            let mut gen = |n: usize| (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect::<Vec<Vec<f64>>>();
            let q = gen(20);
            let g = gen(100);
            let qid: Vec<i32> = (0..20).map(|i| i % 8).collect();
            let gid: Vec<i32> = (0..100).map(|i| (i % 10) - 1).collect();
            let qc: Vec<i32> = (0..20).map(|i| i % 3).collect();
            let gc: Vec<i32> = (0..100).map(|i| (i / 7) % 3).collect();
            let set = EvalSet::new(fm(&q), fm(&g), qid.clone(), gid.clone(), qc.clone(), gc.clone()).unwrap();
            let r = evaluate(&set).unwrap();
            let (map, top1) = brute_map(&q, &g, &qid, &gid, &qc, &gc);
            assert!((r.map - map).abs() < 1e-12);
            assert!((r.cmc1 - top1).abs() < 1e-12);
            assert!(r.cmc1 <= r.cmc5 && r.cmc5 <= r.cmc10);
            assert!((0.0..=1.0).contains(&r.map));
        }
    }

    #[test]
    fn gallery_permutation_invariant() {
        let mut rng = Seed(4).rng();
        let g: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let q: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let gid: Vec<i32> = (0..30).map(|i| i % 6).collect();
        let gc: Vec<i32> = (0..30).map(|i| i % 2).collect();
        let base = evaluate(&EvalSet::new(fm(&q), fm(&g), (0..6).collect(), gid.clone(), vec![0; 6], gc.clone()).unwrap()).unwrap();
        let mut perm: Vec<usize> = (0..30).collect();
        perm.shuffle(&mut rng);
        let pick = |v: &[i32]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let g2: Vec<Vec<f64>> = perm.iter().map(|&i| g[i].clone()).collect();
        let shuffled = evaluate(&EvalSet::new(fm(&q), fm(&g2), (0..6).collect(), pick(&gid), vec![0; 6], pick(&gc)).unwrap()).unwrap();
        assert_eq!(base, shuffled);
    }
}
