//! Points, distance functions, and dataset-level statistics.
//!
//! Distances are plain `f64` and comparisons against cover-tree thresholds
//! are exact (no epsilon): thresholds are powers of the tree base, which for
//! the default base 2 are exactly representable, and exact comparison keeps
//! the structure deterministic.

use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// A point of the universe: stable external id, coordinates, and an optional
/// category label used by partition matroids.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub id: u64,
    pub coords: Vec<f64>,
    pub category: Option<String>,
}

impl PointRecord {
    pub fn new(id: u64, coords: Vec<f64>) -> Self {
        Self { id, coords, category: None }
    }

    pub fn labeled(id: u64, coords: Vec<f64>, category: &str) -> Self {
        Self { id, coords, category: Some(category.to_string()) }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Shared handle; tree nodes and independent sets alias the same record.
pub type PointRef = Arc<PointRecord>;

/// Distance function kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl Metric {
    /// Parse a CLI metric name.
    pub fn parse(s: &str) -> Result<Metric> {
        match s {
            "l2" => Ok(Metric::Euclidean),
            "l1" => Ok(Metric::Manhattan),
            "linf" => Ok(Metric::Chebyshev),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric `{other}` (expected l2, l1 or linf)"
            ))),
        }
    }

    /// Distance between two points of equal dimension.
    pub fn dist(&self, a: &PointRecord, b: &PointRecord) -> Result<f64> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
        }
        Ok(self.dist_unchecked(a, b))
    }

    /// Distance without the dimension check; callers guarantee equal dims.
    pub fn dist_unchecked(&self, a: &PointRecord, b: &PointRecord) -> f64 {
        debug_assert_eq!(a.dim(), b.dim());
        let xs = a.coords.iter().zip(b.coords.iter());
        match self {
            Metric::Euclidean => xs.map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Manhattan => xs.map(|(x, y)| (x - y).abs()).sum(),
            Metric::Chebyshev => xs.map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => write!(f, "l2"),
            Metric::Manhattan => write!(f, "l1"),
            Metric::Chebyshev => write!(f, "linf"),
        }
    }
}

/// Aspect-ratio statistics of a dataset, by full pairwise scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub n: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub aspect_ratio: f64,
}

/// Minimum distance from `p` to a non-empty set `set`, together with the id
/// of the nearest point (ties broken towards the lowest id).
pub fn dist_to_set(p: &PointRecord, set: &[&PointRecord], metric: Metric) -> Result<(f64, u64)> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best = f64::INFINITY;
    let mut best_id = u64::MAX;
    for q in set {
        let d = metric.dist(p, q)?;
        if d < best || (d == best && q.id < best_id) {
            best = d;
            best_id = q.id;
        }
    }
    Ok((best, best_id))
}

/// Radius of `centers` with respect to `points`: the maximum over `points`
/// of the distance to the closest center.
pub fn radius_of(centers: &[&PointRecord], points: &[&PointRecord], metric: Metric) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut r = 0.0f64;
    for p in points {
        let (d, _) = dist_to_set(p, centers, metric)?;
        if d > r {
            r = d;
        }
    }
    Ok(r)
}

/// Exact d_min / d_max / aspect ratio over all pairs. O(n^2) scan, intended
/// for diagnostics and tests. Rejects duplicate points.
pub fn dataset_stats(points: &[&PointRecord], metric: Metric) -> Result<DatasetStats> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints);
    }
    let mut d_min = f64::INFINITY;
    let mut d_max = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = metric.dist(a, b)?;
            if d == 0.0 {
                return Err(Error::DuplicatePoint(b.id));
            }
            if d < d_min {
                d_min = d;
            }
            if d > d_max {
                d_max = d;
            }
        }
    }
    Ok(DatasetStats { n: points.len(), d_min, d_max, aspect_ratio: d_max / d_min })
}

/// Parse a dataset file: one point per line, whitespace-separated reals,
/// optional trailing `cat:<label>` token; `#` starts a comment line. Ids are
/// assigned 0, 1, 2, ... in file order.
pub fn parse_dataset(text: &str) -> Result<Vec<PointRecord>> {
    let mut out = Vec::new();
    let mut next_id = 0u64;
    let mut dim: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut coords = Vec::new();
        let mut category = None;
        for tok in line.split_whitespace() {
            if let Some(label) = tok.strip_prefix("cat:") {
                category = Some(label.to_string());
            } else {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad coordinate `{tok}`"),
                })?;
                if category.is_some() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "cat:<label> must be the final token".to_string(),
                    });
                }
                coords.push(v);
            }
        }
        if coords.is_empty() {
            return Err(Error::Parse { line: lineno + 1, msg: "no coordinates".to_string() });
        }
        match dim {
            None => dim = Some(coords.len()),
            Some(d) if d != coords.len() => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("dimension {} != dataset dimension {}", coords.len(), d),
                })
            }
            _ => {}
        }
        out.push(PointRecord { id: next_id, coords, category });
        next_id += 1;
    }
    Ok(out)
}
