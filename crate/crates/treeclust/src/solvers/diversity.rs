//! Diversity maximization over coresets: remote-edge, remote-clique,
//! remote-tree, and remote-cycle objectives with their classical sequential
//! approximations.

use crate::coreset::{kcenter_coreset, mis_coreset};
use crate::covertree::CoverTree;
use crate::matroid::MatroidOracle;
use crate::metric::{Metric, PointRef};
use crate::solvers::kcenter::farthest_selection;
use crate::solvers::{Solution, SolutionMeta};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiversityMeasure {
    /// min pairwise distance of the chosen set
    RemoteEdge,
    /// sum of pairwise distances
    RemoteClique,
    /// weight of a minimum spanning tree
    RemoteTree,
    /// weight of the tour obtained by doubling the spanning tree
    RemoteCycle,
}

impl DiversityMeasure {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(Self::RemoteEdge),
            "clique" => Ok(Self::RemoteClique),
            "tree" => Ok(Self::RemoteTree),
            "cycle" => Ok(Self::RemoteCycle),
            other => Err(Error::InvalidParameter(format!(
                "unknown diversity measure `{other}` (expected edge, clique, tree or cycle)"
            ))),
        }
    }

    /// Best sequential approximation factor for this measure.
    pub fn alpha_div(&self) -> f64 {
        match self {
            Self::RemoteEdge | Self::RemoteClique => 2.0,
            Self::RemoteTree => 4.0,
            Self::RemoteCycle => 3.0,
        }
    }

    /// Evaluate the measure's objective on an explicit set.
    pub fn evaluate(&self, points: &[PointRef], metric: Metric) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(match self {
            Self::RemoteEdge => {
                let mut best = f64::INFINITY;
                for (i, a) in points.iter().enumerate() {
                    for b in &points[i + 1..] {
                        best = best.min(metric.dist_unchecked(a, b));
                    }
                }
                if best.is_finite() {
                    best
                } else {
                    0.0 // singleton
                }
            }
            Self::RemoteClique => {
                let mut sum = 0.0;
                for (i, a) in points.iter().enumerate() {
                    for b in &points[i + 1..] {
                        sum += metric.dist_unchecked(a, b);
                    }
                }
                sum
            }
            Self::RemoteTree => mst_weight(points, metric)?,
            Self::RemoteCycle => tour_weight_2approx(points, metric)?,
        })
    }
}

impl std::fmt::Display for DiversityMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::RemoteEdge => "edge",
            Self::RemoteClique => "clique",
            Self::RemoteTree => "tree",
            Self::RemoteCycle => "cycle",
        };
        write!(f, "{s}")
    }
}

/// Exact minimum-spanning-tree weight of the complete graph on `points`
/// (dense Prim).
pub fn mst_weight(points: &[PointRef], metric: Metric) -> Result<f64> {
    Ok(mst_edges(points, metric)?.iter().map(|&(_, _, w)| w).sum())
}

fn mst_edges(points: &[PointRef], metric: Metric) -> Result<Vec<(usize, usize, f64)>> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    // Deterministic root: lowest id.
    let root = (0..n).min_by_key(|&i| points[i].id).unwrap();
    in_tree[root] = true;
    for i in 0..n {
        if i != root {
            best_dist[i] = metric.dist_unchecked(&points[root], &points[i]);
            best_from[i] = root;
        }
    }
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut pick: Option<(f64, u64, usize)> = None;
        for i in 0..n {
            if in_tree[i] {
                continue;
            }
            let cand = (best_dist[i], points[i].id);
            if pick.map(|(d, id, _)| cand < (d, id)).unwrap_or(true) {
                pick = Some((cand.0, cand.1, i));
            }
        }
        let (d, _, i) = pick.unwrap();
        in_tree[i] = true;
        edges.push((best_from[i], i, d));
        for j in 0..n {
            if !in_tree[j] {
                let w = metric.dist_unchecked(&points[i], &points[j]);
                if w < best_dist[j] {
                    best_dist[j] = w;
                    best_from[j] = i;
                }
            }
        }
    }
    Ok(edges)
}

/// Weight of the preorder-shortcut tour over the minimum spanning tree, the
/// classical 2-approximation of the optimal cycle. Degenerates to twice the
/// spanning-tree weight below three points.
pub fn tour_weight_2approx(points: &[PointRef], metric: Metric) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    if points.len() < 3 {
        return Ok(2.0 * mst_weight(points, metric)?);
    }
    let n = points.len();
    let edges = mst_edges(points, metric)?;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b, _) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for nb in adj.iter_mut() {
        nb.sort_by_key(|&i| points[i].id);
    }
    let root = (0..n).min_by_key(|&i| points[i].id).unwrap();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        order.push(v);
        // push reversed so the lowest-id neighbor is visited first
        for &w in adj[v].iter().rev() {
            if !seen[w] {
                stack.push(w);
            }
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        let a = order[i];
        let b = order[(i + 1) % n];
        total += metric.dist_unchecked(&points[a], &points[b]);
    }
    Ok(total)
}

/// Max-sum greedy: repeatedly take the farthest remaining pair; an odd slot
/// is filled by the point with the largest summed distance to the chosen set.
fn farthest_pairs_selection(points: &[PointRef], k: usize, metric: Metric) -> Vec<PointRef> {
    let mut remaining: Vec<PointRef> = points.to_vec();
    remaining.sort_by_key(|p| p.id);
    let mut chosen: Vec<PointRef> = Vec::new();
    while chosen.len() + 2 <= k && remaining.len() >= 2 {
        let mut best: Option<(f64, u64, u64, usize, usize)> = None;
        for i in 0..remaining.len() {
            for j in i + 1..remaining.len() {
                let d = metric.dist_unchecked(&remaining[i], &remaining[j]);
                let key = (d, remaining[i].id, remaining[j].id);
                let better = match best {
                    None => true,
                    Some((bd, bi, bj, _, _)) => {
                        d > bd || (d == bd && (key.1, key.2) < (bi, bj))
                    }
                };
                if better {
                    best = Some((d, key.1, key.2, i, j));
                }
            }
        }
        let (_, _, _, i, j) = best.unwrap();
        // remove j first; it is the larger index
        chosen.push(remaining[i].clone());
        chosen.push(remaining[j].clone());
        remaining.remove(j);
        remaining.remove(i);
    }
    if chosen.len() < k && !remaining.is_empty() {
        let mut best: Option<(f64, u64, usize)> = None;
        for (i, p) in remaining.iter().enumerate() {
            let s: f64 = chosen.iter().map(|c| metric.dist_unchecked(c, p)).sum();
            let better = match best {
                None => true,
                Some((bs, bi, _)) => s > bs || (s == bs && p.id < bi),
            };
            if better {
                best = Some((s, p.id, i));
            }
        }
        let (_, _, i) = best.unwrap();
        chosen.push(remaining[i].clone());
    }
    chosen
}

/// Diversity maximization on the tree: extract the measure's coreset (plain
/// level points for edge/cycle, mis union for clique/tree), run the classical
/// greedy, and evaluate the objective exactly on the chosen set.
pub fn diversity_query(
    tree: &CoverTree,
    measure: DiversityMeasure,
    k: usize,
    eps: f64,
) -> Result<Solution> {
    if k < 2 {
        return Err(Error::InvalidParameter("diversity needs k >= 2".into()));
    }
    let (points, level) = match measure {
        DiversityMeasure::RemoteEdge | DiversityMeasure::RemoteCycle => {
            let q = kcenter_coreset(tree, eps, k)?;
            (q.points(), q.source_level)
        }
        DiversityMeasure::RemoteClique | DiversityMeasure::RemoteTree => {
            match tree.oracle() {
                MatroidOracle::Uniform { .. } => {}
                MatroidOracle::Null => return Err(Error::NullOracle),
                MatroidOracle::Partition { .. } => {
                    return Err(Error::InvalidParameter(
                        "clique/tree diversity needs a k-bounded (uniform) matroid tree".into(),
                    ))
                }
            }
            let q = mis_coreset(tree, eps, k)?;
            (q.points.clone(), q.source_level)
        }
    };
    let chosen = match measure {
        DiversityMeasure::RemoteClique => farthest_pairs_selection(&points, k, tree.metric()),
        _ => farthest_selection(&points, k, tree.metric()).0,
    };
    let objective = measure.evaluate(&chosen, tree.metric())?;
    Ok(Solution {
        centers: chosen.iter().map(|p| p.id).collect(),
        objective,
        meta: SolutionMeta {
            coreset_level: Some(level),
            coreset_size: Some(points.len()),
            ..SolutionMeta::default()
        },
    })
}
