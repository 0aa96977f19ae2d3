//! Query pipelines over extracted coresets: k-center, robust k-center,
//! matroid center, diversity maximization.
//!
//! Solvers are pure functions over immutable snapshots; any number may run
//! concurrently against the same tree under shared read access.

mod diversity;
mod kcenter;
mod matroid_center;
mod robust;

pub use diversity::{diversity_query, mst_weight, tour_weight_2approx, DiversityMeasure};
pub use kcenter::{default_ensemble_m, gonzalez, kcenter_query, KCenterMode};
pub use matroid_center::matroid_center_query;
pub use robust::{outliers_cluster, robust_query, OutliersClusterResult};

use serde::Serialize;

/// A query answer: chosen point ids, the objective value (radius for the
/// center problems, diversity value otherwise), and query bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub centers: Vec<u64>,
    pub objective: f64,
    pub meta: SolutionMeta,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolutionMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coreset_level: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coreset_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guess_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_weight: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
}
