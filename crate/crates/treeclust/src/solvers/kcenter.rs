//! k-center on a coreset: Gonzalez's farthest-point greedy, plus an ensemble
//! mode that rebuilds the coreset into rescaled trees and reads the answer
//! off a level.

use crate::coreset::kcenter_coreset;
use crate::covertree::CoverTree;
use crate::matroid::MatroidOracle;
use crate::metric::{Metric, PointRef};
use crate::solvers::{Solution, SolutionMeta};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KCenterMode {
    Gonzalez,
    Ensemble { m: usize },
}

/// m = ceil((1/eps) * ln(1/eps)), at least 1.
pub fn default_ensemble_m(eps: f64) -> usize {
    let v = ((1.0 / eps) * (1.0 / eps).ln()).ceil();
    if v < 1.0 {
        1
    } else {
        v as usize
    }
}

/// Farthest-point selection: first the lowest id, then k-1 rounds of the
/// point farthest from the chosen set, ties to the lowest id. Returns the
/// selection and each remaining point's distance to it.
pub(crate) fn farthest_selection(
    points: &[PointRef],
    k: usize,
    metric: Metric,
) -> (Vec<PointRef>, Vec<f64>) {
    debug_assert!(!points.is_empty() && k >= 1);
    let first = points
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| p.id)
        .map(|(i, _)| i)
        .unwrap();
    let mut chosen = vec![points[first].clone()];
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| metric.dist_unchecked(p, &points[first]))
        .collect();
    while chosen.len() < k.min(points.len()) {
        let mut best: Option<(f64, u64, usize)> = None;
        for (i, p) in points.iter().enumerate() {
            let candidate = (dist[i], p.id);
            let better = match best {
                None => true,
                // larger distance wins; on a tie the lower id
                Some((bd, bi, _)) => candidate.0 > bd || (candidate.0 == bd && candidate.1 < bi),
            };
            if better {
                best = Some((candidate.0, candidate.1, i));
            }
        }
        let (_, _, idx) = best.unwrap();
        let next = points[idx].clone();
        for (i, p) in points.iter().enumerate() {
            let d = metric.dist_unchecked(p, &next);
            if d < dist[i] {
                dist[i] = d;
            }
        }
        chosen.push(next);
    }
    (chosen, dist)
}

/// Gonzalez's 2-approximation for k-center on an explicit pointset.
pub fn gonzalez(points: &[PointRef], k: usize, metric: Metric) -> Result<Solution> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let (chosen, dist) = farthest_selection(points, k, metric);
    let radius = dist.iter().copied().fold(0.0f64, f64::max);
    Ok(Solution {
        centers: chosen.iter().map(|p| p.id).collect(),
        objective: radius,
        meta: SolutionMeta::default(),
    })
}

/// k-center on the tree: extract the (eps, k) coreset, then solve on it.
///
/// Gonzalez mode runs the greedy directly. Ensemble mode rebuilds the coreset
/// into `m` trees with base 2/eps and scales alpha^(p/m), and returns the
/// level whose scale bound is smallest among levels with at most k nodes.
pub fn kcenter_query(
    tree: &CoverTree,
    k: usize,
    eps: f64,
    mode: KCenterMode,
) -> Result<Solution> {
    let coreset = kcenter_coreset(tree, eps, k)?;
    let points = coreset.points();
    let mut solution = match mode {
        KCenterMode::Gonzalez => gonzalez(&points, k, tree.metric())?,
        KCenterMode::Ensemble { m } => {
            if eps >= 2.0 {
                return Err(Error::InvalidParameter(
                    "ensemble mode needs eps < 2 so the rebased tree has base > 1".into(),
                ));
            }
            if m < 1 {
                return Err(Error::InvalidParameter("ensemble size must be >= 1".into()));
            }
            let alpha = 2.0 / eps;
            let mut best: Option<(f64, Vec<PointRef>)> = None;
            for p in 1..=m {
                let beta = alpha.powf(p as f64 / m as f64);
                let mut rebuilt =
                    CoverTree::new(tree.metric(), MatroidOracle::Null, alpha, beta)?;
                for q in &points {
                    rebuilt.insert(q.as_ref().clone())?;
                }
                let profile = rebuilt.level_size_profile();
                let level = profile
                    .iter()
                    .find(|(_, &count)| count <= k)
                    .map(|(&l, _)| l)
                    .expect("top level is a single node");
                let score = alpha.powf(level as f64 + p as f64 / m as f64);
                if best.as_ref().map(|(s, _)| score < *s).unwrap_or(true) {
                    let centers = rebuilt
                        .extract_level(level)?
                        .into_iter()
                        .map(|e| e.point)
                        .collect();
                    best = Some((score, centers));
                }
            }
            let (_, centers) = best.expect("m >= 1 produces a candidate");
            let center_refs: Vec<&crate::metric::PointRecord> =
                centers.iter().map(|p| p.as_ref()).collect();
            let point_refs: Vec<&crate::metric::PointRecord> =
                points.iter().map(|p| p.as_ref()).collect();
            let radius =
                crate::metric::radius_of(&center_refs, &point_refs, tree.metric())?;
            Solution {
                centers: centers.iter().map(|p| p.id).collect(),
                objective: radius,
                meta: SolutionMeta::default(),
            }
        }
    };
    solution.meta.coreset_level = Some(coreset.source_level);
    solution.meta.coreset_size = Some(coreset.len());
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::PointRecord;
    use crate::oracle::{exact_kcenter, OracleBudget};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn pts_1d(xs: &[f64]) -> Vec<PointRef> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| Arc::new(PointRecord::new(i as u64, vec![x])))
            .collect()
    }

    #[test]
    fn gonzalez_on_three_points() {
        let pts = pts_1d(&[0.0, 1.0, 10.0]);
        let sol = gonzalez(&pts, 2, Metric::Euclidean).unwrap();
        assert_eq!(sol.centers, vec![0, 2]);
        assert_eq!(sol.objective, 1.0);
    }

    #[test]
    fn gonzalez_degenerate_cases() {
        let pts = pts_1d(&[0.0, 1.0, 10.0]);
        let all = gonzalez(&pts, 5, Metric::Euclidean).unwrap();
        assert_eq!(all.centers.len(), 3);
        assert_eq!(all.objective, 0.0);

        let one = gonzalez(&pts, 1, Metric::Euclidean).unwrap();
        assert_eq!(one.centers, vec![0]);
        assert_eq!(one.objective, 10.0);

        assert!(matches!(gonzalez(&pts, 0, Metric::Euclidean), Err(Error::InvalidParameter(_))));
        assert!(matches!(gonzalez(&[], 1, Metric::Euclidean), Err(Error::EmptySet)));
    }

    #[test]
    fn gonzalez_ratio_within_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x60A5);
        let budget = OracleBudget::default();
        for _ in 0..100 {
            let n = rng.random_range(2..30usize);
            let k = rng.random_range(1..=4usize.min(n));
            let pts: Vec<PointRef> = (0..n)
                .map(|i| {
                    Arc::new(PointRecord::new(
                        i as u64,
                        vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
                    ))
                })
                .collect();
            let sol = gonzalez(&pts, k, Metric::Euclidean).unwrap();
            let (_, r_star) = exact_kcenter(&pts, k, Metric::Euclidean, &budget).unwrap();
            assert!(
                sol.objective <= 2.0 * r_star,
                "ratio {} > 2",
                sol.objective / r_star
            );
        }
    }

    fn tree_1d(xs: &[f64]) -> CoverTree {
        let mut t = CoverTree::standard(Metric::Euclidean, MatroidOracle::Null);
        for (i, &x) in xs.iter().enumerate() {
            t.insert(PointRecord::new(i as u64, vec![x])).unwrap();
        }
        t
    }

    #[test]
    fn query_examples() {
        let t = tree_1d(&[0.0, 1.0, 10.0]);
        let sol = kcenter_query(&t, 2, 0.5, KCenterMode::Gonzalez).unwrap();
        // exact optimum is 1; the bound allows (2 + 3 * 0.5) * 1
        assert!(sol.objective <= 3.5);
        assert_eq!(sol.meta.coreset_size.map(|s| s >= 2), Some(true));

        let all = kcenter_query(&t, 5, 1.0, KCenterMode::Gonzalez).unwrap();
        assert_eq!(all.objective, 0.0);

        assert!(matches!(
            kcenter_query(&t, 2, 2.0, KCenterMode::Ensemble { m: 1 }),
            Err(Error::InvalidParameter(_))
        ));

        let ens = kcenter_query(&t, 2, 1.0, KCenterMode::Ensemble { m: 1 }).unwrap();
        assert!(ens.centers.len() <= 2);
        // 2-approximate on the coreset plus coreset slack
        assert!(ens.objective <= (2.0 + 9.0) * 1.0);
    }

    #[test]
    fn ensemble_m_defaults() {
        assert_eq!(default_ensemble_m(1.0), 1);
        assert_eq!(default_ensemble_m(0.5), 2);
        assert_eq!(default_ensemble_m(1.5), 1);
    }
}
