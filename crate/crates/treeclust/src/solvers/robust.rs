//! k-center with z outliers: greedy weighted clustering on the coreset under
//! a guessed radius, wrapped in a geometric guess schedule.

use crate::coreset::{outliers_coreset, WeightedCoreset};
use crate::covertree::CoverTree;
use crate::metric::{Metric, PointRef};
use crate::solvers::{Solution, SolutionMeta};
use crate::{Error, Result};

/// Output of one clustering pass at a fixed radius guess: centers, the
/// residual (never-covered) weighted points, and their aggregate weight.
#[derive(Debug, Clone)]
pub struct OutliersClusterResult {
    pub centers: Vec<u64>,
    pub residual: Vec<(PointRef, u64)>,
    pub residual_weight: u64,
}

/// Greedy weighted outliers clustering. Up to k rounds: pick the coreset
/// point whose (1+2eps)r-ball covers the most uncovered weight (ties to the
/// lowest id), then discard everything within (3+4eps)r of it. Whatever was
/// never discarded comes back as the residual.
///
/// When r is at least the optimal robust radius, the residual weight is at
/// most z; that is the property the guess loop relies on.
pub fn outliers_cluster(
    coreset: &WeightedCoreset,
    k: usize,
    r: f64,
    eps: f64,
    metric: Metric,
) -> Result<OutliersClusterResult> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("radius guess must be > 0, got {r}")));
    }
    if eps < 0.0 {
        return Err(Error::InvalidParameter("eps must be >= 0".into()));
    }
    let inner = (1.0 + 2.0 * eps) * r;
    let outer = (3.0 + 4.0 * eps) * r;
    let n = coreset.entries.len();
    let mut uncovered = vec![true; n];
    let mut centers = Vec::new();
    while centers.len() < k && uncovered.iter().any(|&u| u) {
        let mut best: Option<(u64, u64, usize)> = None; // (weight, id, index)
        for (i, (cand, _)) in coreset.entries.iter().enumerate() {
            let mut w = 0u64;
            for (j, (p, pw)) in coreset.entries.iter().enumerate() {
                if uncovered[j] && metric.dist_unchecked(cand, p) <= inner {
                    w += pw;
                }
            }
            let better = match best {
                None => true,
                Some((bw, bi, _)) => w > bw || (w == bw && cand.id < bi),
            };
            if better {
                best = Some((w, cand.id, i));
            }
        }
        let (_, id, idx) = best.expect("coreset is non-empty");
        centers.push(id);
        let center = coreset.entries[idx].0.clone();
        for (j, (p, _)) in coreset.entries.iter().enumerate() {
            if uncovered[j] && metric.dist_unchecked(&center, p) <= outer {
                uncovered[j] = false;
            }
        }
    }
    let residual: Vec<(PointRef, u64)> = coreset
        .entries
        .iter()
        .zip(uncovered.iter())
        .filter(|(_, &u)| u)
        .map(|((p, w), _)| (p.clone(), *w))
        .collect();
    let residual_weight = residual.iter().map(|(_, w)| w).sum();
    Ok(OutliersClusterResult { centers, residual, residual_weight })
}

/// Robust (k, z)-center on the tree: extract the (eps, k+z) weighted coreset,
/// then shrink the radius guess geometrically while the residual weight stays
/// within z, answering with the last accepted guess.
pub fn robust_query(tree: &CoverTree, k: usize, z: u64, eps: f64) -> Result<Solution> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    let coreset = outliers_coreset(tree, eps, k, z)?;
    let metric = tree.metric();
    let top = tree.ell_max().ok_or(Error::EmptyTree)?;
    let base = tree.scale(top);

    // Smallest meaningful guess: below half the closest coreset pair, shrinking
    // further cannot change any ball's contents.
    let mut d_min = f64::INFINITY;
    for (i, (a, _)) in coreset.entries.iter().enumerate() {
        for (b, _) in &coreset.entries[i + 1..] {
            d_min = d_min.min(metric.dist_unchecked(a, b));
        }
    }
    let floor = if d_min.is_finite() { d_min / 4.0 } else { base / 2.0 };

    let run = |r: f64| outliers_cluster(&coreset, k, r, eps, metric);

    let accepted = {
        let first = run(base)?;
        if first.residual_weight <= z {
            // Shrink while the guess keeps succeeding; the answer is the last
            // success before the first failure.
            let mut held = (first, base);
            let mut i = 1;
            loop {
                let r = base / (1.0 + eps).powi(i);
                let res = run(r)?;
                if res.residual_weight > z {
                    break;
                }
                held = (res, r);
                if r < floor {
                    break;
                }
                i += 1;
            }
            held
        } else {
            // The top-of-tree guess can undershoot the optimum; grow until the
            // contract holds, which is guaranteed once r reaches it.
            let mut i = 1;
            loop {
                let r = base * (1.0 + eps).powi(i);
                let res = run(r)?;
                if res.residual_weight <= z {
                    break (res, r);
                }
                i += 1;
                assert!(i < 10_000, "guess schedule failed to terminate");
            }
        }
    };
    let (result, guess) = accepted;

    // Objective: the realized covered radius on the coreset.
    let residual_ids: Vec<u64> = result.residual.iter().map(|(p, _)| p.id).collect();
    let center_pts: Vec<PointRef> = result
        .centers
        .iter()
        .map(|id| {
            coreset
                .entries
                .iter()
                .find(|(p, _)| p.id == *id)
                .map(|(p, _)| p.clone())
                .expect("centers come from the coreset")
        })
        .collect();
    let mut covered_radius = 0.0f64;
    for (p, _) in &coreset.entries {
        if residual_ids.contains(&p.id) {
            continue;
        }
        let d = center_pts
            .iter()
            .map(|c| metric.dist_unchecked(c, p))
            .fold(f64::INFINITY, f64::min);
        covered_radius = covered_radius.max(d);
    }

    Ok(Solution {
        centers: result.centers.clone(),
        objective: covered_radius,
        meta: SolutionMeta {
            coreset_level: Some(coreset.source_level),
            coreset_size: Some(coreset.len()),
            guess_radius: Some(guess),
            residual_weight: Some(result.residual_weight),
            certified: None,
        },
    })
}
