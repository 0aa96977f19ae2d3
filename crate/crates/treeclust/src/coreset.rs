//! Query-time coreset extraction.
//!
//! All queries share one level formula: with `l(k)` the highest level of the
//! implicit tree holding at most `k` nodes, the extraction level is
//!
//! ```text
//! l*(eps, k) = max(l_min, l(k) - ceil(log2(8 / eps)))
//! ```
//!
//! clamped at the deepest explicit level, where every point is its own
//! implicit node and the coreset degenerates to the full pointset.

use crate::covertree::CoverTree;
use crate::matroid::{IndependentSet, MatroidOracle};
use crate::metric::PointRef;
use crate::{Error, Result};

/// Points with multiplicities: entry weights sum to the pointset size at
/// extraction time. Immutable snapshot.
#[derive(Debug, Clone)]
pub struct WeightedCoreset {
    pub entries: Vec<(PointRef, u64)>,
    pub source_level: i32,
    pub epsilon: f64,
    pub k_param: usize,
}

impl WeightedCoreset {
    pub fn points(&self) -> Vec<PointRef> {
        self.entries.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn total_weight(&self) -> u64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Deduplicated union of the per-node maximal independent sets at the
/// extraction level.
#[derive(Debug, Clone)]
pub struct MisCoreset {
    pub points: Vec<PointRef>,
    pub source_level: i32,
}

fn check_params(eps: f64, k: usize) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {eps}")));
    }
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    Ok(())
}

/// ceil(log2(8 / eps)), exact at power-of-two boundaries: the smallest m
/// with eps * 2^m >= 8.
pub(crate) fn level_offset(eps: f64) -> i32 {
    let mut m = (8.0 / eps).log2().ceil() as i32;
    while eps * 2.0f64.powi(m) < 8.0 {
        m += 1;
    }
    while eps * 2.0f64.powi(m - 1) >= 8.0 {
        m -= 1;
    }
    m
}

/// The extraction level l*(eps, k).
pub fn coreset_level(tree: &CoverTree, eps: f64, k: usize) -> Result<i32> {
    check_params(eps, k)?;
    if tree.is_empty() {
        return Err(Error::EmptyTree);
    }
    let profile = tree.level_size_profile();
    // Sizes shrink as the level climbs, so l(k) is the lowest profiled level
    // with at most k nodes.
    let l_k = profile
        .iter()
        .find(|(_, &count)| count <= k)
        .map(|(&l, _)| l)
        .expect("the top level holds a single node");
    let l_min = tree.min_level().expect("non-empty tree");
    Ok(l_min.max(l_k - level_offset(eps)))
}

/// Weighted coreset for k-center: the implicit level l*(eps, k) with subtree
/// sizes as weights.
pub fn kcenter_coreset(tree: &CoverTree, eps: f64, k: usize) -> Result<WeightedCoreset> {
    let level = coreset_level(tree, eps, k)?;
    let entries = tree
        .extract_level(level)?
        .into_iter()
        .map(|e| (e.point, e.weight))
        .collect();
    Ok(WeightedCoreset { entries, source_level: level, epsilon: eps, k_param: k })
}

/// Weighted coreset for the robust query: identical to the k-center coreset
/// with parameter k + z.
pub fn outliers_coreset(tree: &CoverTree, eps: f64, k: usize, z: u64) -> Result<WeightedCoreset> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    kcenter_coreset(tree, eps, k + z as usize)
}

/// Union of the `mis` fields at l*(eps, k_param); requires a non-null oracle
/// and, on uniform-matroid trees, k_param within the configured rank.
pub fn mis_coreset(tree: &CoverTree, eps: f64, k_param: usize) -> Result<MisCoreset> {
    match tree.oracle() {
        MatroidOracle::Null => return Err(Error::NullOracle),
        MatroidOracle::Uniform { rank } if k_param > *rank => {
            return Err(Error::RankExceeded { requested: k_param, rank: *rank })
        }
        _ => {}
    }
    let level = coreset_level(tree, eps, k_param)?;
    let mut points: Vec<PointRef> = Vec::new();
    for entry in tree.extract_level(level)? {
        for p in entry.mis.members() {
            if !points.iter().any(|q| q.id == p.id) {
                points.push(p.clone());
            }
        }
    }
    points.sort_by_key(|p| p.id);
    Ok(MisCoreset { points, source_level: level })
}

/// The per-node independent sets at a level, for callers that need them
/// grouped rather than unioned.
pub fn level_mis_sets(tree: &CoverTree, level: i32) -> Result<Vec<IndependentSet>> {
    Ok(tree.extract_level(level)?.into_iter().map(|e| e.mis).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{radius_of, Metric, PointRecord};
    use crate::oracle::{exact_kcenter, OracleBudget};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tree_1d(xs: &[f64], oracle: MatroidOracle) -> CoverTree {
        let mut t = CoverTree::standard(Metric::Euclidean, oracle);
        for (id, &x) in xs.iter().enumerate() {
            t.insert(PointRecord::new(id as u64, vec![x])).unwrap();
        }
        t
    }

    #[test]
    fn offset_arithmetic() {
        assert_eq!(level_offset(8.0), 0);
        assert_eq!(level_offset(1.0), 3);
        assert_eq!(level_offset(0.5), 4);
        assert_eq!(level_offset(2.0), 2);
        assert_eq!(level_offset(16.0), -1);
    }

    #[test]
    fn parameter_validation() {
        let t = tree_1d(&[0.0, 1.0], MatroidOracle::Null);
        assert!(matches!(coreset_level(&t, 0.0, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(coreset_level(&t, 1.0, 0), Err(Error::InvalidParameter(_))));
        let empty = CoverTree::standard(Metric::Euclidean, MatroidOracle::Null);
        assert!(matches!(coreset_level(&empty, 1.0, 1), Err(Error::EmptyTree)));
    }

    #[test]
    fn large_k_clamps_to_the_bottom() {
        let t = tree_1d(&[0.0, 1.0, 10.0, 11.0], MatroidOracle::Null);
        let l = coreset_level(&t, 1.0, 100).unwrap();
        assert_eq!(l, t.min_level().unwrap());
        let q = kcenter_coreset(&t, 1.0, 100).unwrap();
        assert_eq!(q.len(), 4);
        assert!(q.entries.iter().all(|(_, w)| *w == 1));
        let pts = q.points();
        let refs: Vec<&PointRecord> = pts.iter().map(|p| p.as_ref()).collect();
        assert_eq!(radius_of(&refs, &refs, Metric::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn coreset_radius_against_exact_kcenter() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
        let budget = OracleBudget::default();
        for trial in 0..12 {
            let n = rng.random_range(5..30usize);
            let mut t = CoverTree::standard(Metric::Euclidean, MatroidOracle::Null);
            let mut pts = Vec::new();
            for id in 0..n {
                loop {
                    let p = PointRecord::new(
                        id as u64,
                        vec![rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)],
                    );
                    match t.insert(p.clone()) {
                        Ok(()) => {
                            pts.push(std::sync::Arc::new(p));
                            break;
                        }
                        Err(Error::DuplicatePoint(_)) => continue,
                        Err(e) => panic!("{e}"),
                    }
                }
            }
            for (k, eps) in [(2usize, 0.5f64), (3, 1.0), (4, 2.0)] {
                let (_, r_star) = exact_kcenter(&pts, k, Metric::Euclidean, &budget).unwrap();
                let q = kcenter_coreset(&t, eps, k).unwrap();
                assert_eq!(q.total_weight(), n as u64, "trial {trial}");
                let qpts = q.points();
                let centers: Vec<&PointRecord> = qpts.iter().map(|p| p.as_ref()).collect();
                let all: Vec<&PointRecord> = pts.iter().map(|p| p.as_ref()).collect();
                let r_q = radius_of(&centers, &all, Metric::Euclidean).unwrap();
                assert!(
                    r_q <= eps * r_star,
                    "trial {trial} k={k} eps={eps}: r_Q={r_q} > {}",
                    eps * r_star
                );
            }
        }
    }

    #[test]
    fn outliers_coreset_reduces_to_kcenter_at_zero_z() {
        let t = tree_1d(&[0.0, 1.0, 5.0, 9.0, 22.0], MatroidOracle::Null);
        let a = outliers_coreset(&t, 1.0, 2, 0).unwrap();
        let b = kcenter_coreset(&t, 1.0, 2).unwrap();
        assert_eq!(a.source_level, b.source_level);
        let ids =
            |c: &WeightedCoreset| c.entries.iter().map(|(p, w)| (p.id, *w)).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_eq!(a.total_weight(), 5);
    }

    #[test]
    fn outliers_proxy_distance_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0127);
        let budget = OracleBudget::default();
        let n = 20usize;
        let (k, z, eps) = (2usize, 2u64, 1.0f64);
        let mut t = CoverTree::standard(Metric::Euclidean, MatroidOracle::Null);
        let mut pts = Vec::new();
        for id in 0..n {
            let p = PointRecord::new(
                id as u64,
                vec![rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0)],
            );
            t.insert(p.clone()).unwrap();
            pts.push(std::sync::Arc::new(p));
        }
        let (_, r_star) = exact_kcenter(&pts, k + z as usize, Metric::Euclidean, &budget).unwrap();
        let q = outliers_coreset(&t, eps, k, z).unwrap();
        assert_eq!(q.total_weight(), n as u64);
        let qpts = q.points();
        let centers: Vec<&PointRecord> = qpts.iter().map(|p| p.as_ref()).collect();
        for p in &pts {
            let (d, _) = crate::metric::dist_to_set(p, &centers, Metric::Euclidean).unwrap();
            assert!(d <= eps * r_star, "point {} at {} > {}", p.id, d, eps * r_star);
        }
    }

    #[test]
    fn mis_coreset_at_the_top_is_the_root_mis() {
        let t = tree_1d(&[0.0, 50.0], MatroidOracle::uniform(1));
        // k = 1 with a huge epsilon keeps l* at the top level.
        let c = mis_coreset(&t, 8.0, 1).unwrap();
        assert_eq!(c.source_level, t.ell_max().unwrap());
        let root_ids = t.root_mis().unwrap().ids();
        let ids: Vec<u64> = c.points.iter().map(|p| p.id).collect();
        assert_eq!(ids, root_ids);
    }

    #[test]
    fn mis_coreset_unions_cluster_sets() {
        let t = tree_1d(&[0.0, 1.0, 10.0, 11.0], MatroidOracle::uniform(2));
        let c = mis_coreset(&t, 8.0, 2).unwrap();
        // Two implicit nodes at the extraction level, two mis points each.
        assert_eq!(c.points.len(), 4);
    }

    #[test]
    fn mis_coreset_keeps_every_label() {
        let oracle = MatroidOracle::partition([("a".to_string(), 1), ("b".to_string(), 1)]);
        let mut t = CoverTree::standard(Metric::Euclidean, oracle);
        for (id, x, cat) in [(0u64, 0.0, "a"), (1, 1.0, "b"), (2, 10.0, "a"), (3, 11.0, "b")] {
            t.insert(PointRecord::labeled(id, vec![x], cat)).unwrap();
        }
        let rank = t.root_mis().unwrap().len();
        assert_eq!(rank, 2);
        for eps in [0.5, 1.0, 8.0] {
            let c = mis_coreset(&t, eps, rank).unwrap();
            let labels: Vec<&str> =
                c.points.iter().filter_map(|p| p.category.as_deref()).collect();
            assert!(labels.contains(&"a") && labels.contains(&"b"), "eps {eps}: {labels:?}");
        }
    }

    #[test]
    fn mis_coreset_oracle_requirements() {
        let t = tree_1d(&[0.0, 1.0], MatroidOracle::Null);
        assert!(matches!(mis_coreset(&t, 1.0, 1), Err(Error::NullOracle)));

        let t = tree_1d(&[0.0, 1.0, 2.0], MatroidOracle::uniform(2));
        assert!(matches!(
            mis_coreset(&t, 1.0, 3),
            Err(Error::RankExceeded { requested: 3, rank: 2 })
        ));
    }
}
