//! Interpretable three-layer image classification prototype.
//!
//! * Layer 1 ([`represent`]): a translation-stable scattering representation
//!   built from Morlet wavelets, and an isometry-equivariant representation
//!   built from radial, non-expansive convolution operators selected by
//!   persistent homology and validation accuracy.
//! * Layer 2 ([`reduce`]): PCA with variance-retention component selection,
//!   followed by per-block standardization and fusion.
//! * Layer 3 ([`classify`]): kNN, RBF-kernel SVM (SMO) and random forests.
//!
//! [`audit`] measures how well a representation's response to image
//! transformations ([`transform`]) is captured by a linear map, and compares
//! dendrogram structure of raw and transformed images. [`pipeline`] wires it
//! all together for the `icnn` binary.

pub mod audit;
pub mod binfmt;
pub mod classify;
pub mod data;
pub mod error;
pub mod pipeline;
pub mod reduce;
pub mod represent;
pub mod seeding;
pub mod transform;

pub use error::{Error, Result};
