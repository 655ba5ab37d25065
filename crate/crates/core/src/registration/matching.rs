//! Mutual nearest-neighbour matching by Hamming distance and best-match
//! filtering.

use super::descriptor::BinaryDescriptor;
use crate::error::{Error, Result};

/// A mutually consistent descriptor pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMatch {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: u32,
}

fn nearest(query: &BinaryDescriptor, set: &[BinaryDescriptor]) -> (usize, u32) {
    let mut best = (0, u32::MAX);
    for (i, d) in set.iter().enumerate() {
        let dist = query.hamming(d);
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best
}

/// Matches every descriptor of `set_a` to its nearest neighbour in `set_b`,
/// keeping only pairs that are each other's nearest neighbour. Ties resolve
/// to the lowest index. Output is ordered by `index_a`.
pub fn match_features(set_a: &[BinaryDescriptor], set_b: &[BinaryDescriptor]) -> Result<Vec<FeatureMatch>> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::param("descriptor sets must be non-empty"));
    }
    let b_best: Vec<usize> = set_b.iter().map(|d| nearest(d, set_a).0).collect();
    Ok(set_a
        .iter()
        .enumerate()
        .filter_map(|(ia, d)| {
            let (ib, distance) = nearest(d, set_b);
            (b_best[ib] == ia).then_some(FeatureMatch {
                index_a: ia,
                index_b: ib,
                distance,
            })
        })
        .collect())
}

/// Sorts by ascending distance (stable) and keeps the first
/// `ceil(keep_fraction * len)` matches.
pub fn filter_matches(matches: &[FeatureMatch], keep_fraction: f64) -> Result<Vec<FeatureMatch>> {
    if matches.is_empty() {
        return Err(Error::param("no matches to filter"));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::param(format!("keep_fraction must be in (0, 1], got {keep_fraction}")));
    }
    let mut sorted = matches.to_vec();
    sorted.sort_by_key(|m| m.distance);
    let keep = ((keep_fraction * matches.len() as f64).ceil() as usize).clamp(1, matches.len());
    sorted.truncate(keep);
    Ok(sorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_desc(rng: &mut impl Rng) -> BinaryDescriptor {
        BinaryDescriptor([rng.random(), rng.random(), rng.random(), rng.random()])
    }

    #[test]
    fn identical_sets_match_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set: Vec<_> = (0..20).map(|_| random_desc(&mut rng)).collect();
        let m = match_features(&set, &set).unwrap();
        assert_eq!(m.len(), 20);
        assert!(m.iter().all(|m| m.index_a == m.index_b && m.distance == 0));
    }

    #[test]
    fn copy_plus_distractor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_desc(&mut rng);
        let b = vec![random_desc(&mut rng), a];
        let m = match_features(&[a], &b).unwrap();
        assert_eq!(m, vec![FeatureMatch { index_a: 0, index_b: 1, distance: 0 }]);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(match_features(&[], &[BinaryDescriptor::default()]).is_err());
        assert!(filter_matches(&[], 0.5).is_err());
    }

    #[test]
    fn random_pairs_average_half_the_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mean = (0..1000)
            .map(|_| random_desc(&mut rng).hamming(&random_desc(&mut rng)) as f64)
            .sum::<f64>()
            / 1000.0;
        assert!((mean - 128.0).abs() <= 5.0, "mean {mean}");
    }

    fn m(i: usize, d: u32) -> FeatureMatch {
        FeatureMatch { index_a: i, index_b: i, distance: d }
    }

    #[test]
    fn filter_keeps_smallest() {
        let ms: Vec<_> = [9, 3, 7, 1, 5, 8, 2, 6, 4, 0].iter().enumerate().map(|(i, &d)| m(i, d)).collect();
        let half = filter_matches(&ms, 0.5).unwrap();
        assert_eq!(half.iter().map(|m| m.distance).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        let all = filter_matches(&ms, 1.0).unwrap();
        assert_eq!(all.len(), 10);
        assert!(all.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn filter_is_stable_on_ties() {
        let ms: Vec<_> = (0..10).map(|i| m(i, 7)).collect();
        let kept = filter_matches(&ms, 0.3).unwrap();
        assert_eq!(kept.iter().map(|m| m.index_a).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn hamming_symmetric_zero_iff_equal(a in any::<[u64; 4]>(), b in any::<[u64; 4]>()) {
            let (da, db) = (BinaryDescriptor(a), BinaryDescriptor(b));
            prop_assert_eq!(da.hamming(&db), db.hamming(&da));
            prop_assert_eq!(da.hamming(&db) == 0, a == b);
            prop_assert!(da.hamming(&db) <= 256);
        }
    }
}
