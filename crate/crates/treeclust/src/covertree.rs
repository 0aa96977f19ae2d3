//! The augmented cover tree in explicit (chain-coalesced) representation.
//!
//! A tree with base `alpha` and scale `beta` keeps, for every level `l` of
//! its implicit expansion:
//!
//! 1. nesting: points of level `l` also appear at level `l-1`;
//! 2. proximity: a level-`l` node is within `beta * alpha^(l+1)` of its parent;
//! 3. separation: level-`l` nodes are pairwise more than `beta * alpha^l` apart.
//!
//! The explicit form stores one node per maximal single-point chain, so a
//! node's children may sit many levels below it; the chain in between is
//! implied. Every node additionally carries the size of its subtree and a
//! maximal independent set of the subtree's points under the tree's matroid
//! oracle, both maintained incrementally by `insert` and `delete`.
//!
//! Deletion is supported on standard-parameter trees (`alpha = 2`,
//! `beta = 1`); generalized trees are insert-only throwaways built per query
//! by the ensemble k-center mode.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::matroid::{merge_maximal, rank, Independence, IndependentSet, MatroidOracle};
use crate::metric::{Metric, PointRecord, PointRef};
use crate::{Error, Result};

/// Arena index of an explicit node. Stable for the node's lifetime; slots of
/// deleted nodes are recycled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

/// One explicit node.
#[derive(Debug, Clone)]
pub struct TreeNode {
    point: PointRef,
    level: i32,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    weight: u64,
    mis: IndependentSet,
}

impl TreeNode {
    pub fn point(&self) -> &PointRef {
        &self.point
    }
    pub fn level(&self) -> i32 {
        self.level
    }
    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }
    pub fn children(&self) -> &[NodeId] {
        &self.children
    }
    pub fn weight(&self) -> u64 {
        self.weight
    }
    pub fn mis(&self) -> &IndependentSet {
        &self.mis
    }
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// One entry of a cover set: the explicit node standing in for an implicit
/// node, plus the explicit node's own level (>= the represented level when
/// the entry is a chain head).
#[derive(Debug, Clone)]
pub struct CoverEntry {
    pub node: NodeId,
    pub node_level: i32,
    pub point: PointRef,
}

/// The cover set for a probe point at one level of a top-down descent.
/// `relocations` is used by the deletion sweep: nodes whose level was raised
/// to `level` because no new parent was found below.
#[derive(Debug, Clone)]
pub struct CoverSetCursor {
    pub level: i32,
    pub entries: Vec<CoverEntry>,
    pub relocations: Vec<NodeId>,
}

/// Outcome of `validate_invariants`: `violation` carries the first problem
/// found, if any.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violation: Option<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violation.is_none()
    }
}

/// One implicit node of an extracted level: point, subtree weight, subtree
/// maximal independent set.
#[derive(Debug, Clone)]
pub struct LevelEntry {
    pub point: PointRef,
    pub weight: u64,
    pub mis: IndependentSet,
}

#[derive(Clone, Copy)]
enum DescentMode {
    /// Descend until the first empty cover set (emitted), optionally not
    /// below `floor`. `reject_duplicate` errors out on a zero-distance node.
    FirstEmpty { floor: Option<i32>, reject_duplicate: bool },
    /// Descend to exactly this level (the probe's leaf level on deletes).
    ToLevel(i32),
}

#[derive(Debug, Clone)]
pub struct CoverTree {
    nodes: Vec<Option<TreeNode>>,
    free: Vec<usize>,
    root: Option<NodeId>,
    ell_max: i32,
    alpha: f64,
    beta: f64,
    metric: Metric,
    oracle: MatroidOracle,
    registry: BTreeMap<u64, NodeId>,
    dim: Option<usize>,
}

impl CoverTree {
    /// Empty tree with base `alpha > 1` and scale `beta > 0`.
    pub fn new(metric: Metric, oracle: MatroidOracle, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be > 1, got {alpha}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        Ok(Self {
            nodes: Vec::new(),
            free: Vec::new(),
            root: None,
            ell_max: 0,
            alpha,
            beta,
            metric,
            oracle,
            registry: BTreeMap::new(),
            dim: None,
        })
    }

    /// Standard tree: alpha = 2, beta = 1.
    pub fn standard(metric: Metric, oracle: MatroidOracle) -> Self {
        Self::new(metric, oracle, 2.0, 1.0).expect("standard parameters are valid")
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    pub fn ell_max(&self) -> Option<i32> {
        self.root.map(|_| self.ell_max)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn oracle(&self) -> &MatroidOracle {
        &self.oracle
    }

    pub fn contains(&self, id: u64) -> bool {
        self.registry.contains_key(&id)
    }

    pub fn point(&self, id: u64) -> Option<PointRef> {
        self.registry.get(&id).map(|nid| self.node(*nid).point.clone())
    }

    /// All live points, ascending by id.
    pub fn points(&self) -> Vec<PointRef> {
        self.registry.values().map(|nid| self.node(*nid).point.clone()).collect()
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        self.nodes[id.0].as_ref().expect("dangling node id")
    }

    pub fn root_node(&self) -> Option<&TreeNode> {
        self.root.map(|r| self.node(r))
    }

    /// Maximal independent set of the whole pointset (the root's `mis`).
    pub fn root_mis(&self) -> Option<&IndependentSet> {
        self.root.map(|r| &self.node(r).mis)
    }

    /// Deepest explicit level; at that depth every point is its own implicit
    /// node.
    pub fn min_level(&self) -> Option<i32> {
        self.alive_nodes().map(|(_, n)| n.level).min()
    }

    /// `beta * alpha^level`, the separation threshold of a level.
    pub fn scale(&self, level: i32) -> f64 {
        self.beta * self.alpha.powi(level)
    }

    fn node_mut(&mut self, id: NodeId) -> &mut TreeNode {
        self.nodes[id.0].as_mut().expect("dangling node id")
    }

    fn alive_nodes(&self) -> impl Iterator<Item = (NodeId, &TreeNode)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.as_ref().map(|n| (NodeId(i), n)))
    }

    fn alloc(&mut self, node: TreeNode) -> NodeId {
        match self.free.pop() {
            Some(slot) => {
                self.nodes[slot] = Some(node);
                NodeId(slot)
            }
            None => {
                self.nodes.push(Some(node));
                NodeId(self.nodes.len() - 1)
            }
        }
    }

    fn release(&mut self, id: NodeId) {
        self.nodes[id.0] = None;
        self.free.push(id.0);
    }

    fn dist(&self, a: &PointRecord, b: &PointRecord) -> f64 {
        self.metric.dist_unchecked(a, b)
    }

    /// floor(log_alpha(x / beta)), by the exponent field for the standard
    /// parameters and by log-plus-correction otherwise. The corrections make
    /// the result exact at threshold boundaries: scale(r) <= x < scale(r+1).
    fn floor_log(&self, x: f64) -> i32 {
        debug_assert!(x > 0.0 && x.is_finite());
        if self.alpha == 2.0 && self.beta == 1.0 {
            let exp = ((x.to_bits() >> 52) & 0x7ff) as i64;
            if exp != 0 {
                return (exp - 1023) as i32;
            }
        }
        let mut r = ((x / self.beta).ln() / self.alpha.ln()).floor() as i32;
        while self.scale(r + 1) <= x {
            r += 1;
        }
        while self.scale(r) > x {
            r -= 1;
        }
        r
    }

    fn leaf_mis(&self, p: &PointRef) -> Result<IndependentSet> {
        if self.oracle.is_independent(&[p.as_ref()])? {
            Ok(IndependentSet::singleton(p.clone()))
        } else {
            Ok(IndependentSet::empty())
        }
    }

    /// Recompute `weight` and `mis` of a node from its children (leaf rule
    /// for childless nodes).
    fn recompute_fields(&mut self, nid: NodeId) -> Result<()> {
        let node = self.node(nid);
        if node.children.is_empty() {
            let point = node.point.clone();
            let mis = self.leaf_mis(&point)?;
            let node = self.node_mut(nid);
            node.weight = 1;
            node.mis = mis;
            return Ok(());
        }
        let children = node.children.clone();
        let weight: u64 = children.iter().map(|c| self.node(*c).weight).sum();
        let parts: Vec<&IndependentSet> = children.iter().map(|c| &self.node(*c).mis).collect();
        let mis = merge_maximal(&parts, &self.oracle)?;
        let node = self.node_mut(nid);
        node.weight = weight;
        node.mis = mis;
        Ok(())
    }

    fn cursor(&self, level: i32, nodes: &[NodeId]) -> CoverSetCursor {
        CoverSetCursor {
            level,
            entries: nodes
                .iter()
                .map(|&n| CoverEntry {
                    node: n,
                    node_level: self.node(n).level,
                    point: self.node(n).point.clone(),
                })
                .collect(),
            relocations: Vec::new(),
        }
    }

    /// Top-down cover-set construction from `start_level`. An explicit node
    /// whose children sit below `level - 1` (or a leaf) stands for its own
    /// chain and survives as long as it is within threshold.
    fn descend_from(
        &self,
        probe: &PointRecord,
        start_level: i32,
        mode: DescentMode,
    ) -> Result<Vec<CoverSetCursor>> {
        let root = self.root.ok_or(Error::EmptyTree)?;
        let mut cursors = Vec::new();
        let mut current = vec![root];
        let mut level = start_level;
        loop {
            cursors.push(self.cursor(level, &current));
            match mode {
                DescentMode::ToLevel(stop) if level == stop => break,
                DescentMode::FirstEmpty { floor: Some(f), .. } if level == f => break,
                _ => {}
            }
            let threshold = self.scale(level); // = beta * alpha^((level-1)+1)
            let mut next = Vec::new();
            for &nid in &current {
                let node = self.node(nid);
                let expands = node
                    .children
                    .first()
                    .map(|c| self.node(*c).level == level - 1)
                    .unwrap_or(false);
                if expands {
                    for &c in &node.children {
                        let child = self.node(c);
                        let d = self.dist(probe, &child.point);
                        if let DescentMode::FirstEmpty { reject_duplicate: true, .. } = mode {
                            if d == 0.0 && child.point.id != probe.id {
                                return Err(Error::DuplicatePoint(child.point.id));
                            }
                        }
                        if d <= threshold {
                            next.push(c);
                        }
                    }
                } else {
                    let d = self.dist(probe, &node.point);
                    if let DescentMode::FirstEmpty { reject_duplicate: true, .. } = mode {
                        if d == 0.0 && node.point.id != probe.id {
                            return Err(Error::DuplicatePoint(node.point.id));
                        }
                    }
                    if d <= threshold {
                        next.push(nid);
                    }
                }
            }
            level -= 1;
            if next.is_empty() {
                match mode {
                    DescentMode::FirstEmpty { .. } => {
                        cursors.push(self.cursor(level, &[]));
                        break;
                    }
                    // Unreachable on delete descents: the probe's own chain
                    // is at distance 0 and survives every threshold.
                    DescentMode::ToLevel(_) => break,
                }
            }
            current = next;
        }
        Ok(cursors)
    }

    /// Cover sets for a probe, from the top of the tree down to the first
    /// empty level (inclusive), never below the deepest explicit level.
    pub fn descend(&self, probe: &PointRecord) -> Result<Vec<CoverSetCursor>> {
        let floor = self.min_level();
        self.descend_from(
            probe,
            self.ell_max,
            DescentMode::FirstEmpty { floor, reject_duplicate: false },
        )
    }

    /// Insert a point. Errors (duplicate id or coordinates, dimension
    /// mismatch) leave the tree untouched.
    pub fn insert(&mut self, point: PointRecord) -> Result<()> {
        if point.coords.is_empty() {
            return Err(Error::InvalidParameter("point has no coordinates".into()));
        }
        if point.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "point {} has a non-finite coordinate",
                point.id
            )));
        }
        if let Some(d) = self.dim {
            if point.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: point.dim() });
            }
        }
        if self.registry.contains_key(&point.id) {
            return Err(Error::DuplicateId(point.id));
        }
        let p: PointRef = Arc::new(point);

        let root = match self.root {
            None => {
                // First point: root at level 0 by convention; ell_max adjusts
                // on the second insertion.
                let mis = self.leaf_mis(&p)?;
                let nid = self.alloc(TreeNode {
                    point: p.clone(),
                    level: 0,
                    parent: None,
                    children: Vec::new(),
                    weight: 1,
                    mis,
                });
                self.root = Some(nid);
                self.ell_max = 0;
                self.dim = Some(p.dim());
                self.registry.insert(p.id, nid);
                return Ok(());
            }
            Some(r) => r,
        };

        let d_root = self.dist(&p, &self.node(root).point);
        if d_root == 0.0 {
            return Err(Error::DuplicatePoint(self.node(root).point.id));
        }

        // Stage the top-level raise; it is only committed once the insertion
        // is known to succeed.
        let mut ell_max = self.ell_max;
        if d_root > self.scale(ell_max) {
            ell_max = self.floor_log(d_root);
        }

        let cursors = self.descend_from(
            &p,
            ell_max,
            DescentMode::FirstEmpty { floor: None, reject_duplicate: true },
        )?;
        let first_empty = cursors.last().expect("descent yields at least one cursor").level;
        debug_assert!(cursors.last().unwrap().entries.is_empty());

        // The new leaf's independent set; computed before any mutation so a
        // failing oracle (unlabeled point under a partition matroid) cannot
        // leave the tree half-updated.
        let new_mis = self.leaf_mis(&p)?;

        // Smallest level >= first_empty whose parent cover set has a node
        // within threshold. Cover sets above ell_max are the root alone.
        let mut new_level = first_empty;
        let parent = loop {
            let above = new_level + 1;
            let bound = self.scale(above);
            let idx = ell_max - above;
            let candidates: Vec<NodeId> = if idx < 0 {
                vec![root]
            } else {
                cursors[idx as usize].entries.iter().map(|e| e.node).collect()
            };
            let mut best: Option<(f64, u64, NodeId)> = None;
            for nid in candidates {
                let cand = self.node(nid);
                let d = self.dist(&p, &cand.point);
                if d <= bound && best.map(|(bd, bi, _)| (d, cand.point.id) < (bd, bi)).unwrap_or(true)
                {
                    best = Some((d, cand.point.id, nid));
                }
            }
            if let Some((_, _, v)) = best {
                break v;
            }
            new_level += 1;
            debug_assert!(new_level <= ell_max, "no parent found up to the root");
        };

        // Commit: raise the root if needed.
        if new_level == ell_max {
            ell_max += 1;
        }
        if ell_max != self.ell_max {
            self.ell_max = ell_max;
            self.node_mut(root).level = ell_max;
        }

        let u = self.alloc(TreeNode {
            point: p.clone(),
            level: new_level,
            parent: Some(parent),
            children: Vec::new(),
            weight: 1,
            mis: new_mis,
        });

        let (v_point, v_children, v_weight, v_mis) = {
            let v = self.node(parent);
            (v.point.clone(), v.children.clone(), v.weight, v.mis.clone())
        };
        let needs_split =
            v_children.first().map(|c| self.node(*c).level != new_level).unwrap_or(true);
        if needs_split {
            // Materialize the parent's self-child at the new level; it takes
            // over the parent's former children and stored fields.
            let w = self.alloc(TreeNode {
                point: v_point.clone(),
                level: new_level,
                parent: Some(parent),
                children: v_children.clone(),
                weight: v_weight,
                mis: v_mis,
            });
            for g in v_children {
                self.node_mut(g).parent = Some(w);
            }
            if self.node(w).children.is_empty() {
                // The parent was a leaf; its point's deepest node is now w.
                self.registry.insert(v_point.id, w);
            }
            self.node_mut(parent).children = vec![u, w];
        } else {
            self.node_mut(parent).children.push(u);
        }

        self.registry.insert(p.id, u);
        if self.dim.is_none() {
            self.dim = Some(p.dim());
        }

        // Walk to the root: bump weights, extend independent sets greedily.
        let mut t = Some(parent);
        while let Some(nid) = t {
            self.node_mut(nid).weight += 1;
            let mut mis = std::mem::take(&mut self.node_mut(nid).mis);
            mis.try_insert(&p, &self.oracle)?;
            self.node_mut(nid).mis = mis;
            t = self.node(nid).parent;
        }
        Ok(())
    }

    /// Delete a point by id. Only standard-parameter trees support deletion.
    pub fn delete(&mut self, id: u64) -> Result<()> {
        if self.alpha != 2.0 || self.beta != 1.0 {
            return Err(Error::UnsupportedParameters(
                "delete requires a standard (alpha = 2, beta = 1) tree".into(),
            ));
        }
        let leaf = *self.registry.get(&id).ok_or(Error::UnknownId(id))?;

        if self.registry.len() == 1 {
            let root = self.root.take().expect("non-empty tree has a root");
            debug_assert_eq!(root, leaf);
            self.release(root);
            self.ell_max = 0;
            self.registry.clear();
            return Ok(());
        }

        let probe = self.node(leaf).point.clone();
        let leaf_level = self.node(leaf).level;
        let root = self.root.expect("non-empty tree has a root");

        // The point's explicit nodes form a chain from its leaf upward.
        let mut chain = vec![leaf];
        loop {
            let top = *chain.last().unwrap();
            match self.node(top).parent {
                Some(par) if self.node(par).point.id == id => chain.push(par),
                _ => break,
            }
        }

        let mut cursors = self.descend_from(&probe, self.ell_max, DescentMode::ToLevel(leaf_level))?;
        let top = self.ell_max;
        let idx_of = move |l: i32| (top - l) as usize;

        let mut removed: Vec<NodeId> = Vec::new();
        let mut relocated: Vec<NodeId> = Vec::new(); // R at the current level

        let mut level = leaf_level;
        while level <= self.ell_max - 1 {
            // Remove the point's explicit node at this level, if any.
            if let Some(&u) = chain.iter().find(|&&u| self.node(u).level == level && u != root) {
                let v = self.node(u).parent.expect("non-root node has a parent");
                let pos = self.node(v).children.iter().position(|&c| c == u).unwrap();
                self.node_mut(v).children.remove(pos);
                removed.push(u);
                if self.node(v).point.id == id {
                    // Orphaned siblings await relocation; v itself goes at
                    // its own level.
                    let orphans = std::mem::take(&mut self.node_mut(v).children);
                    for &w in &orphans {
                        self.node_mut(w).parent = None;
                    }
                    relocated.extend(orphans);
                } else if self.node(v).children.len() == 1 {
                    // Only the self-child is left: coalesce the chain.
                    let sc = self.node(v).children[0];
                    debug_assert_eq!(self.node(sc).point.id, self.node(v).point.id);
                    let grand = self.node(sc).children.clone();
                    for &g in &grand {
                        self.node_mut(g).parent = Some(v);
                    }
                    self.node_mut(v).children = grand;
                    removed.push(sc);
                    if self.node(v).children.is_empty() {
                        let pid = self.node(v).point.id;
                        self.registry.insert(pid, v);
                    }
                }
            }

            // Re-home relocated nodes: first cover-set members above, then
            // already-promoted peers, first fit within threshold.
            let bound = self.scale(level + 1);
            let above_entries: Vec<NodeId> = cursors[idx_of(level + 1)]
                .entries
                .iter()
                .map(|e| e.node)
                .filter(|&n| self.node(n).point.id != id)
                .collect();
            let mut promoted: Vec<NodeId> = Vec::new();
            for w in relocated.drain(..) {
                let wp = self.node(w).point.clone();
                let home = above_entries
                    .iter()
                    .chain(promoted.iter())
                    .copied()
                    .find(|&h| self.dist(&wp, &self.node(h).point) <= bound);
                match home {
                    Some(h) => {
                        let fits = self
                            .node(h)
                            .children
                            .first()
                            .map(|c| self.node(*c).level == level)
                            .unwrap_or(false);
                        if fits {
                            self.node_mut(h).children.push(w);
                        } else {
                            // Split h's chain at this level; the new node's
                            // fields are rebuilt from its (settled) children.
                            let z = self.alloc(TreeNode {
                                point: self.node(h).point.clone(),
                                level,
                                parent: Some(h),
                                children: self.node(h).children.clone(),
                                weight: 0,
                                mis: IndependentSet::empty(),
                            });
                            let grand = self.node(z).children.clone();
                            for g in grand {
                                self.node_mut(g).parent = Some(z);
                            }
                            if self.node(z).children.is_empty() {
                                let pid = self.node(z).point.id;
                                self.registry.insert(pid, z);
                            }
                            self.recompute_fields(z)?;
                            self.node_mut(h).children = vec![z, w];
                        }
                        self.node_mut(w).parent = Some(h);
                    }
                    None => {
                        self.node_mut(w).level = level + 1;
                        promoted.push(w);
                    }
                }
            }

            // Refresh the augmented fields of every node that now tops out
            // at level + 1; their children are settled.
            let to_refresh: Vec<NodeId> = above_entries
                .iter()
                .copied()
                .chain(promoted.iter().copied())
                .filter(|&n| self.node(n).level == level + 1)
                .collect();
            for n in to_refresh {
                self.recompute_fields(n)?;
            }

            cursors[idx_of(level + 1)].relocations = promoted.clone();
            relocated = promoted;
            level += 1;
        }

        if self.node(root).point.id != id {
            if relocated.is_empty() {
                // Tighten the root's level to just above its children.
                match self.node(root).children.first() {
                    Some(&c) => {
                        let l = self.node(c).level + 1;
                        self.node_mut(root).level = l;
                        self.ell_max = l;
                    }
                    None => {
                        // The tree shrank to a single point.
                        self.node_mut(root).level = 0;
                        self.ell_max = 0;
                    }
                }
            } else {
                // Stragglers at the top: a new root one level up adopts the
                // old root and all of them.
                let new_level = self.ell_max + 1;
                let mut children = vec![root];
                children.extend(relocated.iter().copied());
                let r_new = self.alloc(TreeNode {
                    point: self.node(root).point.clone(),
                    level: new_level,
                    parent: None,
                    children: children.clone(),
                    weight: 0,
                    mis: IndependentSet::empty(),
                });
                for c in children {
                    self.node_mut(c).parent = Some(r_new);
                }
                self.root = Some(r_new);
                self.ell_max = new_level;
                self.recompute_fields(r_new)?;
            }
        } else {
            // The deleted point owned the root. Everything now hangs off the
            // relocated list, which cannot be empty.
            debug_assert!(self.node(root).children.is_empty());
            removed.push(root);
            assert!(!relocated.is_empty(), "root deletion left no survivors");
            if relocated.len() == 1 {
                let v = relocated[0];
                self.node_mut(v).parent = None;
                self.root = Some(v);
                match self.node(v).children.first() {
                    Some(&c) => {
                        let l = self.node(c).level + 1;
                        self.node_mut(v).level = l;
                        self.ell_max = l;
                    }
                    None => {
                        self.node_mut(v).level = 0;
                        self.ell_max = 0;
                    }
                }
                self.recompute_fields(v)?;
            } else {
                let anchor = relocated
                    .iter()
                    .copied()
                    .min_by_key(|&n| self.node(n).point.id)
                    .unwrap();
                let new_level = self.ell_max + 1;
                let r_new = self.alloc(TreeNode {
                    point: self.node(anchor).point.clone(),
                    level: new_level,
                    parent: None,
                    children: relocated.clone(),
                    weight: 0,
                    mis: IndependentSet::empty(),
                });
                for &c in &relocated {
                    self.node_mut(c).parent = Some(r_new);
                }
                self.root = Some(r_new);
                self.ell_max = new_level;
                self.recompute_fields(r_new)?;
            }
        }

        self.registry.remove(&id);
        for n in removed {
            self.release(n);
        }
        Ok(())
    }

    /// Size of every implicit level in [min explicit level, ell_max],
    /// computed from the topmost occurrence of each point. Empty map for an
    /// empty tree.
    pub fn level_size_profile(&self) -> BTreeMap<i32, usize> {
        let mut profile = BTreeMap::new();
        if self.root.is_none() {
            return profile;
        }
        let mut tops: BTreeMap<i32, usize> = BTreeMap::new();
        for (_, node) in self.alive_nodes() {
            let is_top = match node.parent {
                None => true,
                Some(par) => self.node(par).point.id != node.point.id,
            };
            if is_top {
                *tops.entry(node.level).or_insert(0) += 1;
            }
        }
        let lo = self.min_level().unwrap();
        let mut acc = 0usize;
        for l in (lo..=self.ell_max).rev() {
            acc += tops.get(&l).copied().unwrap_or(0);
            profile.insert(l, acc);
        }
        profile
    }

    /// Materialize implicit level `l`: one entry per implicit node, carrying
    /// the owning chain head's weight and independent set. Sorted by point id.
    pub fn extract_level(&self, l: i32) -> Result<Vec<LevelEntry>> {
        let root = self.root.ok_or(Error::EmptyTree)?;
        if l > self.ell_max {
            return Err(Error::LevelOutOfRange { level: l, ell_max: self.ell_max });
        }
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(nid) = stack.pop() {
            let node = self.node(nid);
            debug_assert!(node.level >= l);
            let covers = match node.children.first() {
                None => true,
                Some(&c) => self.node(c).level < l,
            };
            if covers {
                out.push(LevelEntry {
                    point: node.point.clone(),
                    weight: node.weight,
                    mis: node.mis.clone(),
                });
            } else {
                stack.extend(node.children.iter().copied());
            }
        }
        out.sort_by_key(|e| e.point.id);
        Ok(out)
    }

    /// Pre-order debug dump: `indent level point_id weight [mis ids]`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let Some(root) = self.root {
            self.dump_node(root, 0, &mut out);
        }
        out
    }

    fn dump_node(&self, nid: NodeId, depth: usize, out: &mut String) {
        let node = self.node(nid);
        let ids: Vec<String> = node.mis.ids().iter().map(u64::to_string).collect();
        out.push_str(&format!(
            "{}{} {} {} [{}]\n",
            "  ".repeat(depth),
            node.level,
            node.point.id,
            node.weight,
            ids.join(" ")
        ));
        for &c in &node.children {
            self.dump_node(c, depth + 1, out);
        }
    }

    /// Full structural audit: expands the implicit levels and checks the
    /// three cover-tree properties, the augmented fields, and the registry.
    /// Violations come back in the report; this never errors.
    pub fn validate_invariants(&self) -> ValidationReport {
        let violation = self.find_violation().err();
        ValidationReport { violation }
    }

    fn find_violation(&self) -> std::result::Result<(), String> {
        let root = match self.root {
            None => {
                if !self.registry.is_empty() {
                    return Err("empty tree with non-empty registry".into());
                }
                return Ok(());
            }
            Some(r) => r,
        };
        if !self.registry.is_empty() && self.node(root).parent.is_some() {
            return Err("root has a parent".into());
        }
        if self.node(root).level != self.ell_max {
            return Err(format!(
                "root level {} != ell_max {}",
                self.node(root).level,
                self.ell_max
            ));
        }

        // Per explicit node: child structure, proximity, weight, mis.
        let mut live_points: BTreeMap<u64, PointRef> = BTreeMap::new();
        let mut leaves: BTreeMap<u64, NodeId> = BTreeMap::new();
        let mut stack = vec![root];
        while let Some(nid) = stack.pop() {
            let node = self.node(nid);
            if let Some(d) = self.dim {
                if node.point.dim() != d {
                    return Err(format!("point {} has wrong dimension", node.point.id));
                }
            }
            if node.children.is_empty() {
                if leaves.insert(node.point.id, nid).is_some() {
                    return Err(format!("point {} has two leaves", node.point.id));
                }
                live_points.insert(node.point.id, node.point.clone());
                if node.weight != 1 {
                    return Err(format!("leaf {} weight {} != 1", node.point.id, node.weight));
                }
            } else {
                let child_level = self.node(node.children[0]).level;
                if child_level >= node.level {
                    return Err(format!(
                        "node {}@{} has children at level {}",
                        node.point.id, node.level, child_level
                    ));
                }
                let mut self_children = 0;
                let mut weight_sum = 0u64;
                for &c in &node.children {
                    let child = self.node(c);
                    if child.level != child_level {
                        return Err(format!(
                            "node {}@{} has children at mixed levels",
                            node.point.id, node.level
                        ));
                    }
                    if child.parent != Some(nid) {
                        return Err(format!("child {} has a stale parent link", child.point.id));
                    }
                    if child.point.id == node.point.id {
                        self_children += 1;
                    }
                    let d = self.dist(&node.point, &child.point);
                    if d > self.scale(child_level + 1) {
                        return Err(format!(
                            "proximity violated: {}@{} -> child {} at distance {} > {}",
                            node.point.id,
                            node.level,
                            child.point.id,
                            d,
                            self.scale(child_level + 1)
                        ));
                    }
                    weight_sum += child.weight;
                }
                if self_children != 1 {
                    return Err(format!(
                        "node {}@{} has {} self-children",
                        node.point.id, node.level, self_children
                    ));
                }
                if node.weight != weight_sum {
                    return Err(format!(
                        "weight mismatch at {}@{}: stored {} != children sum {}",
                        node.point.id, node.level, node.weight, weight_sum
                    ));
                }
                stack.extend(node.children.iter().copied());
            }
        }

        // mis fields: independent, within the subtree, maximal.
        let mut stack = vec![root];
        while let Some(nid) = stack.pop() {
            let node = self.node(nid);
            let subtree = self.subtree_points(nid);
            let refs: Vec<&PointRecord> = node.mis.members().iter().map(|p| p.as_ref()).collect();
            match self.oracle.is_independent(&refs) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(format!("mis of {}@{} not independent", node.point.id, node.level))
                }
                Err(e) => return Err(format!("oracle failure: {e}")),
            }
            let mis_ids = node.mis.ids();
            for p in node.mis.members() {
                if !subtree.contains_key(&p.id) {
                    return Err(format!(
                        "mis of {}@{} contains foreign point {}",
                        node.point.id, node.level, p.id
                    ));
                }
            }
            for (id, p) in &subtree {
                if mis_ids.contains(id) {
                    continue;
                }
                let mut with = refs.clone();
                with.push(p.as_ref());
                match self.oracle.is_independent(&with) {
                    Ok(false) => {}
                    Ok(true) => {
                        return Err(format!(
                            "mis of {}@{} not maximal: {} still addable",
                            node.point.id, node.level, id
                        ))
                    }
                    Err(e) => return Err(format!("oracle failure: {e}")),
                }
            }
            stack.extend(self.node(nid).children.iter().copied());
        }

        // Registry: exactly the live points, each mapped to its leaf.
        if self.registry.len() != live_points.len() {
            return Err(format!(
                "registry has {} entries, tree has {} points",
                self.registry.len(),
                live_points.len()
            ));
        }
        for (&id, &nid) in &self.registry {
            match leaves.get(&id) {
                Some(&leaf) if leaf == nid => {}
                _ => return Err(format!("registry entry {} does not point at a leaf", id)),
            }
        }

        // Implicit levels: nesting, separation, top-level singleton.
        let lo = self.min_level().unwrap();
        let mut above: Option<Vec<LevelEntry>> = None;
        for l in (lo..=self.ell_max).rev() {
            let entries = self.extract_level(l).map_err(|e| e.to_string())?;
            if l == self.ell_max && entries.len() != 1 {
                return Err(format!("top level has {} nodes", entries.len()));
            }
            if let Some(up) = &above {
                for e in up {
                    if !entries.iter().any(|f| f.point.id == e.point.id) {
                        return Err(format!(
                            "nesting violated: point {} at level {} missing at level {}",
                            e.point.id,
                            l + 1,
                            l
                        ));
                    }
                }
            }
            let sep = self.scale(l);
            for (i, a) in entries.iter().enumerate() {
                for b in &entries[i + 1..] {
                    let d = self.dist(&a.point, &b.point);
                    if d <= sep {
                        return Err(format!(
                            "separation violated at level {}: {} and {} at distance {} <= {}",
                            l, a.point.id, b.point.id, d, sep
                        ));
                    }
                }
            }
            above = Some(entries);
        }
        let bottom = above.expect("at least one level");
        if bottom.len() != self.registry.len() {
            return Err(format!(
                "bottom level has {} nodes for {} points",
                bottom.len(),
                self.registry.len()
            ));
        }
        Ok(())
    }

    fn subtree_points(&self, nid: NodeId) -> BTreeMap<u64, PointRef> {
        let mut out = BTreeMap::new();
        let mut stack = vec![nid];
        while let Some(n) = stack.pop() {
            let node = self.node(n);
            out.insert(node.point.id, node.point.clone());
            stack.extend(node.children.iter().copied());
        }
        out
    }

    /// Rank of the tree's oracle over the live pointset, via a fresh greedy
    /// scan (not the maintained root mis). Test/diagnostic helper.
    pub fn oracle_rank(&self) -> Result<usize> {
        rank(&self.oracle, &self.points())
    }
}
