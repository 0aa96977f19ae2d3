//! Matroid center on the mis-union coreset: scan candidate radii upward,
//! greedily plant pivots at 2R separation, and accept the first radius where
//! a common independent set of (tree matroid) x (one-slot-per-pivot) covers
//! every pivot.

use crate::coreset::mis_coreset;
use crate::covertree::CoverTree;
use crate::matroid::{matroid_intersection, AssignedPartition};
use crate::metric::PointRef;
use crate::solvers::{Solution, SolutionMeta};
use crate::{Error, Result};

pub fn matroid_center_query(tree: &CoverTree, eps: f64) -> Result<Solution> {
    if tree.oracle().is_null() {
        return Err(Error::NullOracle);
    }
    let rank = tree.root_mis().ok_or(Error::EmptyTree)?.len();
    if rank == 0 {
        return Err(Error::InvalidParameter(
            "matroid rank over the pointset is zero; no center set exists".into(),
        ));
    }
    let coreset = mis_coreset(tree, eps, rank)?;
    let points = &coreset.points; // sorted by id
    let metric = tree.metric();

    // Candidate radii: zero plus every pairwise distance, ascending.
    let mut radii = vec![0.0f64];
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            radii.push(metric.dist_unchecked(a, b));
        }
    }
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();

    for &r in &radii {
        // Pivots: greedy scan in id order, keeping points > 2R from all
        // chosen pivots.
        let mut pivots: Vec<PointRef> = Vec::new();
        for p in points {
            if pivots.iter().all(|q| metric.dist_unchecked(p, q) > 2.0 * r) {
                pivots.push(p.clone());
            }
        }
        if pivots.len() > rank {
            continue; // no independent set can cover them all
        }
        // Ground set: coreset points within R of some pivot, each assigned to
        // its nearest pivot (ties to the lowest pivot id), one slot per pivot.
        let mut ground: Vec<PointRef> = Vec::new();
        let mut classes = std::collections::BTreeMap::new();
        for p in points {
            let mut best: Option<(f64, u64)> = None;
            for q in &pivots {
                let d = metric.dist_unchecked(p, q);
                if best.map(|(bd, bi)| (d, q.id) < (bd, bi)).unwrap_or(true) {
                    best = Some((d, q.id));
                }
            }
            let (d, pivot_id) = best.expect("at least one pivot");
            if d <= r {
                classes.insert(p.id, pivot_id);
                ground.push(p.clone());
            }
        }
        let slots = AssignedPartition {
            classes,
            capacities: pivots.iter().map(|q| (q.id, 1usize)).collect(),
        };
        let chosen = matroid_intersection(&ground, tree.oracle(), &slots)?;
        if chosen.len() == pivots.len() {
            let center_pts: Vec<PointRef> = chosen.members().to_vec();
            let mut radius = 0.0f64;
            for p in points {
                let d = center_pts
                    .iter()
                    .map(|c| metric.dist_unchecked(c, p))
                    .fold(f64::INFINITY, f64::min);
                radius = radius.max(d);
            }
            return Ok(Solution {
                centers: chosen.ids(),
                objective: radius,
                meta: SolutionMeta {
                    coreset_level: Some(coreset.source_level),
                    coreset_size: Some(points.len()),
                    guess_radius: Some(r),
                    residual_weight: None,
                    certified: None,
                },
            });
        }
    }
    unreachable!("the largest pairwise distance always admits one pivot and one center")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matroid::{Independence, MatroidOracle};
    use crate::metric::{Metric, PointRecord};
    use crate::oracle::{exact_kcenter, exact_matroid_center, OracleBudget};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn rank_one_tree_picks_a_near_optimal_point() {
        let mut t = CoverTree::standard(Metric::Euclidean, MatroidOracle::uniform(1));
        let mut pts = Vec::new();
        for (id, x) in [(0u64, 0.0f64), (1, 2.0), (2, 3.0), (3, 9.0)] {
            let p = PointRecord::new(id, vec![x]);
            t.insert(p.clone()).unwrap();
            pts.push(Arc::new(p));
        }
        let eps = 0.5;
        let sol = matroid_center_query(&t, eps).unwrap();
        assert_eq!(sol.centers.len(), 1);
        let budget = OracleBudget::default();
        let (_, r1) = exact_kcenter(&pts, 1, Metric::Euclidean, &budget).unwrap();
        // certify over the full pointset
        let c = pts.iter().find(|p| p.id == sol.centers[0]).unwrap();
        let radius = pts
            .iter()
            .map(|p| Metric::Euclidean.dist_unchecked(c, p))
            .fold(0.0f64, f64::max);
        assert!(radius <= (3.0 + 9.0 * eps) * r1, "{radius} vs optimum {r1}");
    }

    #[test]
    fn partition_instance_respects_labels() {
        let oracle = MatroidOracle::partition([("a".to_string(), 1), ("b".to_string(), 1)]);
        let mut t = CoverTree::standard(Metric::Euclidean, oracle.clone());
        let mut pts = Vec::new();
        for (id, x, cat) in [(0u64, 0.0, "a"), (1, 1.0, "b"), (2, 10.0, "a"), (3, 11.0, "b")] {
            let p = PointRecord::labeled(id, vec![x], cat);
            t.insert(p.clone()).unwrap();
            pts.push(Arc::new(p));
        }
        let eps = 0.5;
        let sol = matroid_center_query(&t, eps).unwrap();
        let chosen: Vec<&PointRecord> =
            sol.centers.iter().map(|id| pts[*id as usize].as_ref()).collect();
        assert!(oracle.is_independent(&chosen).unwrap());

        let budget = OracleBudget::default();
        let (_, r_star) = exact_matroid_center(&pts, &oracle, Metric::Euclidean, &budget).unwrap();
        assert_eq!(r_star, 1.0);
        let mut radius = 0.0f64;
        for p in &pts {
            let d = chosen
                .iter()
                .map(|c| Metric::Euclidean.dist_unchecked(c, p))
                .fold(f64::INFINITY, f64::min);
            radius = radius.max(d);
        }
        assert!(radius <= (3.0 + 9.0 * eps) * r_star);
    }

    #[test]
    fn single_category_capacity_one_returns_one_center() {
        let oracle = MatroidOracle::partition([("only".to_string(), 1)]);
        let mut t = CoverTree::standard(Metric::Euclidean, oracle);
        for (id, x) in [(0u64, 0.0), (1, 4.0), (2, 9.0)] {
            t.insert(PointRecord::labeled(id, vec![x], "only")).unwrap();
        }
        let sol = matroid_center_query(&t, 1.0).unwrap();
        assert_eq!(sol.centers.len(), 1);
    }

    #[test]
    fn null_oracle_is_rejected() {
        let mut t = CoverTree::standard(Metric::Euclidean, MatroidOracle::Null);
        t.insert(PointRecord::new(0, vec![0.0])).unwrap();
        assert!(matches!(matroid_center_query(&t, 1.0), Err(Error::NullOracle)));
    }

    #[test]
    fn random_partition_instances_stay_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xAB5);
        let budget = OracleBudget::default();
        let cats = ["a", "b", "c"];
        for _ in 0..15 {
            let n = rng.random_range(3..12usize);
            let caps = [
                ("a".to_string(), rng.random_range(0..2usize)),
                ("b".to_string(), rng.random_range(1..2usize)),
                ("c".to_string(), rng.random_range(0..2usize)),
            ];
            let oracle = MatroidOracle::partition(caps);
            let mut t = CoverTree::standard(Metric::Euclidean, oracle.clone());
            let mut pts = Vec::new();
            for id in 0..n {
                loop {
                    let p = PointRecord {
                        id: id as u64,
                        coords: vec![rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)],
                        category: Some(cats[rng.random_range(0..3)].to_string()),
                    };
                    match t.insert(p.clone()) {
                        Ok(()) => {
                            pts.push(Arc::new(p));
                            break;
                        }
                        Err(Error::DuplicatePoint(_)) => continue,
                        Err(e) => panic!("{e}"),
                    }
                }
            }
            if t.root_mis().unwrap().is_empty() {
                continue;
            }
            let eps = 0.5;
            let sol = matroid_center_query(&t, eps).unwrap();
            let chosen: Vec<&PointRecord> = sol
                .centers
                .iter()
                .map(|id| pts.iter().find(|p| p.id == *id).unwrap().as_ref())
                .collect();
            assert!(oracle.is_independent(&chosen).unwrap());
            let (_, r_star) =
                exact_matroid_center(&pts, &oracle, Metric::Euclidean, &budget).unwrap();
            let mut radius = 0.0f64;
            for p in &pts {
                let d = chosen
                    .iter()
                    .map(|c| Metric::Euclidean.dist_unchecked(c, p))
                    .fold(f64::INFINITY, f64::min);
                radius = radius.max(d);
            }
            assert!(
                radius <= (3.0 + 9.0 * eps) * r_star || r_star == 0.0,
                "{radius} vs {r_star}"
            );
        }
    }
}
