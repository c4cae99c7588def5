//! Two-stage operator selection: a persistence-based prefilter followed by
//! validation accuracy of the full downstream pipeline.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ieneo::{apply_ieneo_grid, IeneoOperator};
use super::persistence::{diagram_distance, persistence_diagram_grid, PersistenceDiagram};
use crate::classify::ClassifierSpec;
use crate::data::task::split_indices;
use crate::data::LabeledImageSet;
use crate::error::{Error, Result};
use crate::reduce::{fit_pca, BlockStats};
use crate::seeding::{derive_seed, rng};

const EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    /// Images per class used for persistence scoring.
    pub per_class_prefilter: usize,
    pub k_prefilter: usize,
    pub validation_fraction: f64,
    pub retention: f64,
    pub classifier: ClassifierSpec,
    /// Take the absolute value of operator outputs.
    pub modulus: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            per_class_prefilter: 20,
            k_prefilter: 20,
            validation_fraction: 0.7,
            retention: 0.8,
            classifier: ClassifierSpec::default(),
            modulus: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub operator: IeneoOperator,
    pub index: usize,
    /// Separation score of every candidate, by candidate index; empty when
    /// there was only one candidate.
    pub scores: Vec<f64>,
    /// `(candidate index, validation accuracy)` for each prefilter survivor.
    pub val_accuracies: Vec<(usize, f64)>,
}

/// Flat operator output, optionally rectified.
pub fn equivariant_values(op: &IeneoOperator, x: &crate::data::Image, modulus: bool) -> Result<Vec<f64>> {
    let mut v = apply_ieneo_grid(op, &x.to_grid())?.values;
    if modulus {
        v.iter_mut().for_each(|x| *x = x.abs());
    }
    Ok(v)
}

fn diagrams(op: &IeneoOperator, sample: &LabeledImageSet) -> Result<Vec<PersistenceDiagram>> {
    sample
        .images
        .iter()
        .map(|im| Ok(persistence_diagram_grid(&apply_ieneo_grid(op, &im.to_grid())?)))
        .collect()
}

/// Mean inter-class over mean intra-class diagram distance of the operator
/// outputs (`+1e-9` in the denominator).
pub fn separation_score(op: &IeneoOperator, sample: &LabeledImageSet) -> Result<f64> {
    let first = sample.labels.first().ok_or_else(|| Error::input("separation score needs a sample"))?;
    if sample.labels.iter().all(|l| l == first) {
        return Err(Error::input("separation score needs at least two classes"));
    }
    let d = diagrams(op, sample)?;
    let (mut inter, mut n_inter, mut intra, mut n_intra) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            let dist = diagram_distance(&d[i], &d[j]);
            if sample.labels[i] == sample.labels[j] {
                intra += dist;
                n_intra += 1;
            } else {
                inter += dist;
                n_inter += 1;
            }
        }
    }
    let intra = if n_intra == 0 { 0.0 } else { intra / n_intra as f64 };
    Ok(inter / n_inter as f64 / (intra + EPSILON))
}

/// Up to `per_class` images of each class, drawn without replacement.
fn prefilter_sample(train: &LabeledImageSet, per_class: usize, seed: u64) -> LabeledImageSet {
    let mut r = rng(seed);
    let mut classes: Vec<u32> = train.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let mut picked = Vec::new();
    for c in classes {
        let mut idx: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == c).collect();
        idx.shuffle(&mut r);
        idx.truncate(per_class);
        idx.sort_unstable();
        picked.extend(idx);
    }
    train.select(&picked)
}

/// Validation accuracy of operator -> PCA -> standardize -> classifier.
pub fn validation_accuracy(
    op: &IeneoOperator,
    fit: &LabeledImageSet,
    val: &LabeledImageSet,
    config: &SelectionConfig,
    seed: u64,
) -> Result<f64> {
    let features = |set: &LabeledImageSet| -> Result<Vec<Vec<f64>>> {
        set.images.iter().map(|im| equivariant_values(op, im, config.modulus)).collect()
    };
    let train_raw = features(fit)?;
    let pca = fit_pca(&train_raw, config.retention)?;
    let project = |rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> { rows.iter().map(|r| pca.project_values(r)).collect() };
    let train_z = project(&train_raw)?;
    let stats = BlockStats::fit(&train_z)?;
    let standardize = |rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> { rows.iter().map(|r| stats.standardize(r)).collect() };
    let train_f = standardize(&train_z)?;
    let model = config.classifier.fit(&train_f, &fit.binary_labels()?, seed)?;
    let val_f = standardize(&project(&features(val)?)?)?;
    Ok(model.evaluate(&val_f, &val.binary_labels()?)?.1)
}

/// Pick one operator from `candidates` for the binary training set `train`.
pub fn select_operator(
    candidates: &[IeneoOperator],
    train: &LabeledImageSet,
    seed: u64,
    config: &SelectionConfig,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::input("no candidate operators"));
    }
    if config.k_prefilter == 0 || config.per_class_prefilter == 0 {
        return Err(Error::param("k_prefilter and per_class_prefilter must be at least 1"));
    }
    let labels = train.binary_labels()?;
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::input("operator selection needs both classes in the training set"));
    }
    if candidates.len() == 1 {
        return Ok(Selection { operator: candidates[0].clone(), index: 0, scores: Vec::new(), val_accuracies: Vec::new() });
    }

    let sample = prefilter_sample(train, config.per_class_prefilter, derive_seed(seed, 1));
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|op| separation_score(op, &sample))
        .collect::<Result<_>>()?;
    let mut ranked: Vec<usize> = (0..candidates.len()).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ranked.truncate(config.k_prefilter);
    log::debug!("prefilter survivors: {ranked:?}");

    let (fit_idx, val_idx) = split_indices(&train.labels, config.validation_fraction, derive_seed(seed, 2))?;
    let (fit, val) = (train.select(&fit_idx), train.select(&val_idx));
    let classifier_seed = derive_seed(seed, 3);
    let val_accuracies: Vec<(usize, f64)> = ranked
        .par_iter()
        .map(|&i| Ok((i, validation_accuracy(&candidates[i], &fit, &val, config, classifier_seed)?)))
        .collect::<Result<_>>()?;
    let &(index, _) = val_accuracies
        .iter()
        .max_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(scores[a.0].total_cmp(&scores[b.0]))
                .then(b.0.cmp(&a.0))
        })
        .expect("at least one survivor");
    Ok(Selection { operator: candidates[index].clone(), index, scores, val_accuracies })
}
