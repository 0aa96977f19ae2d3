//! Matroid independence oracles, maximal-independent-set maintenance, and
//! matroid intersection.
//!
//! Oracles are intensional (rules, not enumerations) so that they apply to
//! points the tree has not seen yet. The merge of per-block maximal
//! independent sets is a greedy scan in a fixed order, which keeps the
//! per-node `mis` fields reproducible across runs.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::metric::{PointRecord, PointRef};
use crate::{Error, Result};

/// Independence test over subsets of points.
pub trait Independence {
    fn is_independent(&self, points: &[&PointRecord]) -> Result<bool>;
}

/// The built-in oracle kinds.
///
/// `Null` stands for "no matroid": only the empty set is independent, so the
/// per-node `mis` fields stay empty and cost nothing to maintain.
#[derive(Debug, Clone, PartialEq)]
pub enum MatroidOracle {
    Null,
    Uniform { rank: usize },
    Partition { capacities: BTreeMap<String, usize> },
}

impl MatroidOracle {
    pub fn uniform(rank: usize) -> Self {
        MatroidOracle::Uniform { rank }
    }

    pub fn partition<I: IntoIterator<Item = (String, usize)>>(caps: I) -> Self {
        MatroidOracle::Partition { capacities: caps.into_iter().collect() }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, MatroidOracle::Null)
    }
}

impl Independence for MatroidOracle {
    fn is_independent(&self, points: &[&PointRecord]) -> Result<bool> {
        match self {
            MatroidOracle::Null => Ok(points.is_empty()),
            MatroidOracle::Uniform { rank } => Ok(points.len() <= *rank),
            MatroidOracle::Partition { capacities } => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for p in points {
                    let label = p.category.as_deref().ok_or(Error::UnlabeledPoint(p.id))?;
                    let c = counts.entry(label).or_insert(0);
                    *c += 1;
                    if *c > capacities.get(label).copied().unwrap_or(0) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// A partition matroid over an explicit id -> class assignment, independent
/// of the points' category labels. Used as the second matroid in the
/// matroid-center feasibility test (one slot per pivot).
#[derive(Debug, Clone)]
pub struct AssignedPartition {
    pub classes: BTreeMap<u64, u64>,
    pub capacities: BTreeMap<u64, usize>,
}

impl Independence for AssignedPartition {
    fn is_independent(&self, points: &[&PointRecord]) -> Result<bool> {
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for p in points {
            let class = self.classes.get(&p.id).copied().ok_or(Error::UnlabeledPoint(p.id))?;
            let c = counts.entry(class).or_insert(0);
            *c += 1;
            if *c > self.capacities.get(&class).copied().unwrap_or(0) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// An independent set, insertion order preserved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndependentSet {
    members: Vec<PointRef>,
}

impl IndependentSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn singleton(p: PointRef) -> Self {
        Self { members: vec![p] }
    }

    pub fn members(&self) -> &[PointRef] {
        &self.members
    }

    pub fn ids(&self) -> Vec<u64> {
        self.members.iter().map(|p| p.id).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Append `p` if the set stays independent; reports whether it was kept.
    pub fn try_insert(&mut self, p: &PointRef, oracle: &dyn Independence) -> Result<bool> {
        let mut refs: Vec<&PointRecord> = self.members.iter().map(|r| r.as_ref()).collect();
        refs.push(p.as_ref());
        if oracle.is_independent(&refs)? {
            self.members.push(p.clone());
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub(crate) fn from_members(members: Vec<PointRef>) -> Self {
        Self { members }
    }
}

/// Greedy scan of the concatenation of `parts` (parts in the given order,
/// members in stored order): keep an element if the set stays independent.
///
/// When the parts are maximal independent sets of blocks partitioning some
/// ground set, the result is maximal within that ground set.
pub fn merge_maximal(parts: &[&IndependentSet], oracle: &dyn Independence) -> Result<IndependentSet> {
    let mut kept: Vec<PointRef> = Vec::new();
    for part in parts {
        for p in part.members() {
            let mut candidate: Vec<&PointRecord> = kept.iter().map(|r| r.as_ref()).collect();
            candidate.push(p.as_ref());
            if oracle.is_independent(&candidate)? {
                kept.push(p.clone());
            }
        }
    }
    Ok(IndependentSet { members: kept })
}

/// Rank of the oracle restricted to `points`: the size of a maximal
/// independent subset, built by a greedy scan in the given order.
pub fn rank(oracle: &dyn Independence, points: &[PointRef]) -> Result<usize> {
    let mut kept: Vec<&PointRecord> = Vec::new();
    for p in points {
        kept.push(p.as_ref());
        if !oracle.is_independent(&kept)? {
            kept.pop();
        }
    }
    Ok(kept.len())
}

/// Maximum-cardinality subset of `ground` independent in both matroids,
/// by the classical exchange-graph augmenting-path algorithm.
///
/// Breadth-first search explores vertices in ascending point-id order, so the
/// chosen augmenting path (and hence the output) is deterministic.
pub fn matroid_intersection(
    ground: &[PointRef],
    o1: &dyn Independence,
    o2: &dyn Independence,
) -> Result<IndependentSet> {
    let n = ground.len();
    // Work over indices into `ground`, sorted by id for determinism.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ground[i].id);

    let mut in_set = vec![false; n];

    let independent = |o: &dyn Independence, members: &[usize]| -> Result<bool> {
        let refs: Vec<&PointRecord> = members.iter().map(|&i| ground[i].as_ref()).collect();
        o.is_independent(&refs)
    };

    loop {
        let current: Vec<usize> = order.iter().copied().filter(|&i| in_set[i]).collect();

        // Candidate extensions on each side.
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        for &i in &order {
            if in_set[i] {
                continue;
            }
            let mut ext = current.clone();
            ext.push(i);
            if independent(o1, &ext)? {
                x1.push(i);
            }
            if independent(o2, &ext)? {
                x2.push(i);
            }
        }

        // Free augmentation: an element addable to both sides.
        if let Some(&i) = x1.iter().find(|i| x2.contains(i)) {
            in_set[i] = true;
            continue;
        }
        if x1.is_empty() || x2.is_empty() {
            break;
        }

        // Exchange graph; arcs y->x (swap keeps M1) and x->y (swap keeps M2).
        let swap = |o: &dyn Independence, out_y: usize, in_x: usize| -> Result<bool> {
            let mut ext: Vec<usize> =
                current.iter().copied().filter(|&j| j != out_y).collect();
            ext.push(in_x);
            independent(o, &ext)
        };

        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut visited = vec![false; n];
        let mut queue = VecDeque::new();
        for &i in &x1 {
            visited[i] = true;
            queue.push_back(i);
        }
        let mut reached_sink = None;
        'bfs: while let Some(v) = queue.pop_front() {
            if !in_set[v] && x2.contains(&v) {
                reached_sink = Some(v);
                break 'bfs;
            }
            for &w in &order {
                if visited[w] || w == v {
                    continue;
                }
                let arc = if in_set[v] && !in_set[w] {
                    swap(o1, v, w)?
                } else if !in_set[v] && in_set[w] {
                    swap(o2, w, v)?
                } else {
                    false
                };
                if arc {
                    visited[w] = true;
                    parent[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }

        match reached_sink {
            None => break,
            Some(sink) => {
                let mut v = sink;
                loop {
                    in_set[v] = !in_set[v];
                    match parent[v] {
                        Some(u) => v = u,
                        None => break,
                    }
                }
            }
        }
    }

    let members: Vec<PointRef> =
        order.iter().copied().filter(|&i| in_set[i]).map(|i| ground[i].clone()).collect();
    Ok(IndependentSet { members })
}

/// Parse the capacities file of a partition matroid: lines `<label> <count>`.
pub fn parse_partition_capacities(text: &str) -> Result<BTreeMap<String, usize>> {
    let mut caps = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let label = it.next().unwrap().to_string();
        let count: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse { line: lineno + 1, msg: "expected `<label> <capacity>`".into() })?;
        if it.next().is_some() {
            return Err(Error::Parse { line: lineno + 1, msg: "trailing tokens".into() });
        }
        caps.insert(label, count);
    }
    Ok(caps)
}
