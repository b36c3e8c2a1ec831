//! P×K batch sampling over pseudo-label clusters.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::clustering::ClusterLabeling;
use crate::error::{Error, Result};

/// Picks `min(P, C)` distinct clusters, then `K` members from each.
///
/// Members are drawn without replacement when the cluster has at least `K`
/// of them and with replacement otherwise. Noise points are never sampled.
pub fn pk_sample<R: Rng + ?Sized>(labeling: &ClusterLabeling, p: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let members = labeling.members();
    pk_sample_members(&members, p, k, rng)
}

pub(crate) fn pk_sample_members<R: Rng + ?Sized>(
    members: &[Vec<usize>],
    p: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if p == 0 || k == 0 {
        return Err(Error::config(format!("P and K must be positive, got P={p} K={k}")));
    }
    if members.is_empty() {
        return Err(Error::NoClusters);
    }
    let mut order: Vec<usize> = (0..members.len()).collect();
    let (chosen, _) = order.partial_shuffle(rng, p.min(members.len()));
    let mut out = Vec::with_capacity(chosen.len() * k);
    for &c in chosen.iter() {
        let m = &members[c];
        if m.len() >= k {
            out.extend(m.choose_multiple(rng, k).copied());
        } else {
            out.extend((0..k).map(|_| *m.choose(rng).expect("clusters are non-empty")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Seed;
    use std::collections::BTreeSet;

    #[test]
    fn respects_p_and_k() {
        let lab = ClusterLabeling::from_raw(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, -1, 3, 3, 3, 3]);
        let mut rng = Seed(1).rng();
        for _ in 0..50 {
            let batch = pk_sample(&lab, 2, 3, &mut rng).unwrap();
            assert_eq!(batch.len(), 6);
            assert!(!batch.contains(&11));
            let clusters: BTreeSet<_> = batch.iter().map(|&i| lab.cluster_of(i).unwrap()).collect();
            assert_eq!(clusters.len(), 2);
            for chunk in batch.chunks(3) {
                let c = lab.cluster_of(chunk[0]).unwrap();
                assert!(chunk.iter().all(|&i| lab.cluster_of(i) == Some(c)));
                if lab.members()[c].len() >= 3 {
                    assert_eq!(chunk.iter().collect::<BTreeSet<_>>().len(), 3);
                }
            }
        }
    }

    #[test]
    fn small_clusters_sample_with_replacement() {
        let lab = ClusterLabeling::from_raw(&[0, 0, 1]);
        let batch = pk_sample(&lab, 10, 4, &mut Seed(2).rng()).unwrap();
        assert_eq!(batch.len(), 8);
        assert_eq!(batch.iter().filter(|&&i| i == 2).count(), 4);
    }

    #[test]
    fn errors() {
        let all_noise = ClusterLabeling::from_raw(&[-1, -1]);
        assert!(matches!(pk_sample(&all_noise, 2, 2, &mut Seed(0).rng()), Err(Error::NoClusters)));
        let lab = ClusterLabeling::from_raw(&[0, 0]);
        assert!(pk_sample(&lab, 0, 2, &mut Seed(0).rng()).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let lab = ClusterLabeling::from_raw(&(0..40).map(|i| i % 7).collect::<Vec<_>>());
        let a = pk_sample(&lab, 3, 4, &mut Seed(9).rng()).unwrap();
        let b = pk_sample(&lab, 3, 4, &mut Seed(9).rng()).unwrap();
        assert_eq!(a, b);
    }
}
