//! Layer 3 classifiers over fused features and the accuracy metric.

pub mod forest;
pub mod knn;
pub mod metrics;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{fit_rf, predict_rf, ForestModel};
pub use knn::{fit_knn, predict_knn, KnnModel};
pub use metrics::{accuracy, confusion, ConfusionMatrix};
pub use svm::{fit_svm_rbf, predict_svm, SvmModel, SvmParams};

pub(crate) fn check_training(x: &[Vec<f64>], y: &[u8]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    if x.len() != y.len() {
        return Err(Error::input(format!("{} samples but {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::input("training rows must share a non-zero length"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::input("training features contain non-finite values"));
    }
    if let Some(l) = y.iter().find(|&&l| l > 1) {
        return Err(Error::input(format!("label {l} is not binary")));
    }
    Ok(())
}

/// Classifier choice plus hyperparameters, as written in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClassifierSpec {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Svm {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default)]
        max_passes: Option<usize>,
    },
    Forest {
        #[serde(default = "default_trees")]
        n_trees: usize,
    },
}

fn default_k() -> usize {
    knn::DEFAULT_K
}

fn default_c() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-3
}

fn default_trees() -> usize {
    forest::DEFAULT_TREES
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::svm()
    }
}

impl ClassifierSpec {
    pub fn knn() -> Self {
        ClassifierSpec::Knn { k: knn::DEFAULT_K }
    }

    pub fn svm() -> Self {
        ClassifierSpec::Svm { c: 1.0, gamma: None, tol: 1e-3, max_passes: None }
    }

    pub fn forest() -> Self {
        ClassifierSpec::Forest { n_trees: forest::DEFAULT_TREES }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Knn { .. } => "knn",
            ClassifierSpec::Svm { .. } => "svm",
            ClassifierSpec::Forest { .. } => "forest",
        }
    }

    /// Train on `x`, `y`; `seed` only matters for the forest.
    pub fn fit(&self, x: &[Vec<f64>], y: &[u8], seed: u64) -> Result<Classifier> {
        Ok(match *self {
            ClassifierSpec::Knn { k } => Classifier::Knn(fit_knn(x, y, k)?),
            ClassifierSpec::Svm { c, gamma, tol, max_passes } => {
                Classifier::Svm(fit_svm_rbf(x, y, &SvmParams { c, gamma, tol, max_passes })?)
            }
            ClassifierSpec::Forest { n_trees } => Classifier::Forest(fit_rf(x, y, n_trees, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Knn(KnnModel),
    Svm(SvmModel),
    Forest(ForestModel),
}

impl Classifier {
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        match self {
            Classifier::Knn(m) => m.predict(x),
            Classifier::Svm(m) => m.predict(x),
            Classifier::Forest(m) => m.predict(x),
        }
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<u8>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Accuracy of the predictions on `xs` against `labels`.
    pub fn evaluate(&self, xs: &[Vec<f64>], labels: &[u8]) -> Result<(ConfusionMatrix, f64)> {
        let cm = confusion(&self.predict_all(xs)?, labels)?;
        Ok((cm, accuracy(&cm)))
    }

    /// `false` only for an SVM that hit its pass cap.
    pub fn converged(&self) -> bool {
        match self {
            Classifier::Svm(m) => m.converged,
            _ => true,
        }
    }
}
