//! Layer 1 representations.
//!
//! The invariant path is a first-order scattering transform; the
//! equivariant path is a radial, L1-normalized convolution ("IENEO")
//! chosen from random candidates by persistence-diagram separation and
//! validation accuracy.

mod fft;
pub mod ieneo;
pub mod persistence;
pub mod scattering;
pub mod selection;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ieneo::{apply_ieneo, apply_ieneo_grid, sample_ieneo, Bump, IeneoOperator};
pub use persistence::{diagram_distance, persistence_diagram, persistence_diagram_grid, Bar, PersistenceDiagram};
pub use scattering::{build_filter_bank, scatter, FilterBank};
pub use selection::{select_operator, separation_score, Selection, SelectionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Invariant,
    Equivariant,
    Fused,
    External,
}

/// A flat feature vector together with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub values: Vec<f64>,
    pub provenance: Provenance,
    /// Image side for image-derived representations, otherwise the
    /// original external dimension.
    pub source_dims: usize,
}

impl Representation {
    pub fn new(values: Vec<f64>, provenance: Provenance, source_dims: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("representation must not be empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("representation contains non-finite values"));
        }
        Ok(Representation { values, provenance, source_dims })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
