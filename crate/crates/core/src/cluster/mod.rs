//! Density-based clustering of embedded patches and cluster-to-type mapping.

mod hdbscan;
mod metrics;
mod types;

pub use hdbscan::{
    condense_tree, core_distances, hdbscan, label_points, minimum_spanning_tree, mutual_reachability,
    select_clusters, ClusterLabeling, ClusterParams, CondensedEntry, CondensedTree, MstEdge,
};
pub use metrics::{adjusted_rand_index, intra_inter_distances, silhouette};
pub use types::{assign_types, cluster_stats, ClusterStats, TypeAssignment, AREA_TIE, LONE_BPD_LENGTHINESS};
