//! Equivariance measurement through fitted linear maps, and dendrogram
//! analysis of how early same-class images cluster.

pub mod dendrogram;
pub mod equivariance;

pub use dendrogram::{cluster_contrast, linkage, ClusterContrastReport, ContrastStats, Dendrogram, Linkage, Merge};
pub use equivariance::{
    default_lambda, equivariance_error, equivariance_error_pairs, estimate_map, mean_abs_magnitude, read_feature_csv,
    run_sweep, EquivarianceMap, EquivarianceReport, FamilyAverage, RepFn, Ridge, TransformRow,
};
