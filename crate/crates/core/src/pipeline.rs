//! End-to-end experiments: configuration, the per-seed pipeline with its
//! raw-pixel baseline, optional audits, and report emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{cluster_contrast, linkage, run_sweep, ClusterContrastReport, Dendrogram, EquivarianceReport, Linkage, Ridge};
use crate::classify::{ClassifierSpec, ConfusionMatrix};
use crate::data::{load_cifar10, load_idx, load_image_folder, make_binary_task, BinaryTask, Image, LabeledImageSet};
use crate::error::{Error, Result};
use crate::reduce::{fit_pca, fuse, FuseStats, PcaModel};
use crate::represent::selection::equivariant_values;
use crate::represent::{build_filter_bank, sample_ieneo, scatter, select_operator, FilterBank, IeneoOperator, Provenance, SelectionConfig};
use crate::seeding::{derive_seed, rng};

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_retention() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Idx { images: PathBuf, labels: PathBuf },
    Cifar10 { batches: Vec<PathBuf> },
    Folder { root: PathBuf, side: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub source: DataSource,
    pub class_a: u32,
    pub class_b: u32,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringParams {
    pub scales: u32,
    pub orientations: u32,
    pub order: u8,
}

impl Default for ScatteringParams {
    fn default() -> Self {
        ScatteringParams { scales: 2, orientations: 8, order: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IeneoParams {
    pub radius: usize,
    pub max_bumps: usize,
    pub candidates: usize,
    pub k_prefilter: usize,
    pub per_class_prefilter: usize,
    pub validation_fraction: f64,
    pub modulus: bool,
}

impl Default for IeneoParams {
    fn default() -> Self {
        IeneoParams {
            radius: 4,
            max_bumps: 3,
            candidates: 200,
            k_prefilter: 20,
            per_class_prefilter: 20,
            validation_fraction: 0.7,
            modulus: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditParams {
    pub sweep: bool,
    pub n_fit: usize,
    pub n_eval: usize,
    pub ridge: Ridge,
    pub dendrogram: bool,
    pub dendrogram_per_class: usize,
    pub linkage: Linkage,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams {
            sweep: false,
            n_fit: 100,
            n_eval: 100,
            ridge: Ridge::default(),
            dendrogram: false,
            dendrogram_per_class: 10,
            linkage: Linkage::Average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub scattering: ScatteringParams,
    #[serde(default)]
    pub ieneo: IeneoParams,
    #[serde(default = "default_retention")]
    pub retention: f64,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub audit: AuditParams,
    /// Wall-clock stage timings make reports non-reproducible, so they are
    /// off unless requested.
    #[serde(default)]
    pub record_timings: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec) -> Self {
        ExperimentConfig {
            dataset,
            scattering: ScatteringParams::default(),
            ieneo: IeneoParams::default(),
            retention: default_retention(),
            classifier: ClassifierSpec::default(),
            seeds: default_seeds(),
            audit: AuditParams::default(),
            record_timings: false,
        }
    }

    /// Parse JSON; relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            match &mut cfg.dataset.source {
                DataSource::Idx { images, labels } => {
                    fix(images);
                    fix(labels);
                }
                DataSource::Cifar10 { batches } => batches.iter_mut().for_each(fix),
                DataSource::Folder { root, .. } => fix(root),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        let missing = |p: &Path| Error::Config(format!("path {} does not exist", p.display()));
        match &self.dataset.source {
            DataSource::Idx { images, labels } => {
                for p in [images, labels] {
                    if !p.exists() {
                        return Err(missing(p));
                    }
                }
            }
            DataSource::Cifar10 { batches } => {
                if batches.is_empty() {
                    return Err(Error::Config("no CIFAR-10 batch files listed".into()));
                }
                if let Some(p) = batches.iter().find(|p| !p.exists()) {
                    return Err(missing(p));
                }
            }
            DataSource::Folder { root, side } => {
                if !root.is_dir() {
                    return Err(missing(root));
                }
                if *side == 0 {
                    return Err(Error::Config("folder side must be positive".into()));
                }
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed (run) is required".into()));
        }
        if self.dataset.class_a == self.dataset.class_b {
            return Err(Error::Config("class_a and class_b must differ".into()));
        }
        if self.dataset.n_train < 2 || self.dataset.n_test < 2 {
            return Err(Error::Config("n_train and n_test must be at least 2".into()));
        }
        if !(self.retention > 0.0 && self.retention <= 1.0) {
            return Err(Error::Config(format!("retention {} outside (0, 1]", self.retention)));
        }
        if self.ieneo.candidates == 0 {
            return Err(Error::Config("at least one IENEO candidate is required".into()));
        }
        Ok(())
    }

    pub fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            per_class_prefilter: self.ieneo.per_class_prefilter,
            k_prefilter: self.ieneo.k_prefilter,
            validation_fraction: self.ieneo.validation_fraction,
            retention: self.retention,
            classifier: self.classifier,
            modulus: self.ieneo.modulus,
        }
    }
}

pub fn load_dataset(source: &DataSource) -> Result<LabeledImageSet> {
    match source {
        DataSource::Idx { images, labels } => load_idx(images, labels),
        DataSource::Cifar10 { batches } => load_cifar10(batches),
        DataSource::Folder { root, side } => load_image_folder(root, *side),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Instrumentation hook called as a run moves through its stages.
pub trait StageObserver: Sync {
    fn stage(&self, _run: usize, _stage: &'static str) {}
    /// `count` images of `split` were read while in the current stage.
    fn read(&self, _run: usize, _split: Split, _count: usize) {}
}

pub struct NoObserver;

impl StageObserver for NoObserver {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Stage(usize, &'static str),
    Read(usize, Split, usize),
}

/// Records every event in arrival order.
#[derive(Debug, Default)]
pub struct RecordingObserver {
    pub events: Mutex<Vec<Event>>,
}

impl StageObserver for RecordingObserver {
    fn stage(&self, run: usize, stage: &'static str) {
        self.events.lock().expect("observer lock").push(Event::Stage(run, stage));
    }

    fn read(&self, run: usize, split: Split, count: usize) {
        self.events.lock().expect("observer lock").push(Event::Read(run, split, count));
    }
}

/// Everything learned from the training images that is needed to turn an
/// image into fused features.
#[derive(Debug, Clone)]
pub struct FittedRepresentation {
    pub bank: FilterBank,
    pub order: u8,
    pub operator: IeneoOperator,
    pub modulus: bool,
    pub pca_invariant: PcaModel,
    pub pca_equivariant: PcaModel,
    pub stats: FuseStats,
}

impl FittedRepresentation {
    pub fn fit(
        train: &[Image],
        bank: FilterBank,
        order: u8,
        operator: IeneoOperator,
        modulus: bool,
        retention: f64,
    ) -> Result<Self> {
        let inv: Vec<Vec<f64>> = train
            .par_iter()
            .map(|im| Ok(scatter(im, &bank, order)?.values))
            .collect::<Result<_>>()
            .map_err(|e: Error| e.in_stage("invariant"))?;
        let eq: Vec<Vec<f64>> = train
            .par_iter()
            .map(|im| equivariant_values(&operator, im, modulus))
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("equivariant"))?;
        let pca_invariant = fit_pca(&inv, retention).map_err(|e| e.in_stage("pca"))?;
        let pca_equivariant = fit_pca(&eq, retention).map_err(|e| e.in_stage("pca"))?;
        let zi: Vec<Vec<f64>> = inv.iter().map(|r| pca_invariant.project_values(r)).collect::<Result<_>>()?;
        let ze: Vec<Vec<f64>> = eq.iter().map(|r| pca_equivariant.project_values(r)).collect::<Result<_>>()?;
        let stats = FuseStats::fit(&zi, &ze).map_err(|e| e.in_stage("fuse"))?;
        Ok(FittedRepresentation { bank, order, operator, modulus, pca_invariant, pca_equivariant, stats })
    }

    pub fn block_sizes(&self) -> (usize, usize) {
        (self.pca_invariant.k(), self.pca_equivariant.k())
    }

    pub fn invariant(&self, x: &Image) -> Result<Vec<f64>> {
        self.pca_invariant.project_values(&scatter(x, &self.bank, self.order)?.values)
    }

    pub fn equivariant(&self, x: &Image) -> Result<Vec<f64>> {
        self.pca_equivariant.project_values(&equivariant_values(&self.operator, x, self.modulus)?)
    }

    pub fn fused(&self, x: &Image) -> Result<Vec<f64>> {
        Ok(fuse(&self.invariant(x)?, &self.equivariant(x)?, &self.stats)?.values)
    }

    pub fn fused_all(&self, xs: &[Image]) -> Result<Vec<Vec<f64>>> {
        xs.par_iter().map(|x| self.fused(x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub pipeline_accuracy: f64,
    pub baseline_accuracy: f64,
    pub pipeline_confusion: ConfusionMatrix,
    pub baseline_confusion: ConfusionMatrix,
    pub operator_index: usize,
    pub operator: IeneoOperator,
    pub operator_summary: String,
    pub inv_k: usize,
    pub eq_k: usize,
    /// False when an SVM stopped at its pass cap.
    pub classifier_converged: bool,
    pub baseline_converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramArtifacts {
    pub labels: Vec<u32>,
    pub raw: Dendrogram,
    pub transformed: Dendrogram,
    pub contrast: ClusterContrastReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub classifier: String,
    pub class_a: u32,
    pub class_b: u32,
    pub runs: Vec<RunResult>,
    pub mean_pipeline_accuracy: f64,
    pub mean_baseline_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivariance: Option<EquivarianceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dendrogram: Option<DendrogramArtifacts>,
    pub notes: Vec<String>,
}

struct Clock {
    enabled: bool,
    start: Instant,
    times: BTreeMap<String, f64>,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Clock { enabled, start: Instant::now(), times: BTreeMap::new() }
    }

    fn lap(&mut self, stage: &str) {
        if self.enabled {
            self.times.insert(stage.to_string(), self.start.elapsed().as_secs_f64());
            self.start = Instant::now();
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.times)
    }
}

/// Candidates for one run, seeded from the run seed.
pub fn sample_candidates(params: &IeneoParams, seed: u64) -> Result<Vec<IeneoOperator>> {
    (0..params.candidates as u64)
        .map(|i| sample_ieneo(params.radius, params.max_bumps, derive_seed(seed, 1000 + i)))
        .collect()
}

/// State of one finished run, kept for the audits.
pub struct RunState {
    pub result: RunResult,
    pub task: BinaryTask,
    pub representation: FittedRepresentation,
}

pub fn run_once(
    config: &ExperimentConfig,
    source: &LabeledImageSet,
    bank: &FilterBank,
    run: usize,
    observer: &dyn StageObserver,
) -> Result<RunState> {
    let seed = config.seeds[run];
    let mut clock = Clock::new(config.record_timings);
    let ds = &config.dataset;

    observer.stage(run, "task");
    let task = make_binary_task(source, ds.class_a, ds.class_b, ds.n_train, ds.n_test, derive_seed(seed, 0))
        .map_err(|e| e.in_stage("task"))?;
    clock.lap("task");

    observer.stage(run, "select-operator");
    let candidates = sample_candidates(&config.ieneo, seed).map_err(|e| e.in_stage("sample-operators"))?;
    observer.read(run, Split::Train, task.train.len());
    let selection = select_operator(&candidates, &task.train, derive_seed(seed, 1), &config.selection_config())
        .map_err(|e| e.in_stage("select-operator"))?;
    clock.lap("select-operator");

    observer.stage(run, "represent");
    observer.read(run, Split::Train, task.train.len());
    let rep = FittedRepresentation::fit(
        &task.train.images,
        bank.clone(),
        config.scattering.order,
        selection.operator.clone(),
        config.ieneo.modulus,
        config.retention,
    )?;
    let train_x = rep.fused_all(&task.train.images).map_err(|e| e.in_stage("fuse"))?;
    let train_y = task.train.binary_labels()?;
    clock.lap("represent");

    observer.stage(run, "classify-fit");
    let model = config.classifier.fit(&train_x, &train_y, derive_seed(seed, 2)).map_err(|e| e.in_stage("classify-fit"))?;
    clock.lap("classify-fit");

    observer.stage(run, "evaluate");
    observer.read(run, Split::Test, task.test.len());
    let test_x = rep.fused_all(&task.test.images).map_err(|e| e.in_stage("evaluate"))?;
    let test_y = task.test.binary_labels()?;
    let (pipeline_confusion, pipeline_accuracy) = model.evaluate(&test_x, &test_y).map_err(|e| e.in_stage("evaluate"))?;
    clock.lap("evaluate");

    observer.stage(run, "baseline-fit");
    observer.read(run, Split::Train, task.train.len());
    let baseline = config
        .classifier
        .fit(&task.train.flattened(), &train_y, derive_seed(seed, 2))
        .map_err(|e| e.in_stage("baseline"))?;
    observer.stage(run, "baseline-evaluate");
    observer.read(run, Split::Test, task.test.len());
    let (baseline_confusion, baseline_accuracy) =
        baseline.evaluate(&task.test.flattened(), &test_y).map_err(|e| e.in_stage("baseline"))?;
    clock.lap("baseline");

    let (inv_k, eq_k) = rep.block_sizes();
    log::info!(
        "run {run} (seed {seed}): pipeline {pipeline_accuracy:.4}, baseline {baseline_accuracy:.4}, features {inv_k}+{eq_k}"
    );
    let result = RunResult {
        run,
        seed,
        pipeline_accuracy,
        baseline_accuracy,
        pipeline_confusion,
        baseline_confusion,
        operator_index: selection.index,
        operator_summary: selection.operator.summary(),
        operator: selection.operator,
        inv_k,
        eq_k,
        classifier_converged: model.converged(),
        baseline_converged: baseline.converged(),
        timings: clock.finish(),
    };
    Ok(RunState { result, task, representation: rep })
}

/// Source images of the two task classes that were not used for training,
/// shuffled with `seed`.
pub fn held_out_pool(source: &LabeledImageSet, task: &BinaryTask, seed: u64) -> Vec<usize> {
    let used: std::collections::HashSet<usize> = task.train_indices.iter().copied().collect();
    let mut pool: Vec<usize> = (0..source.len())
        .filter(|&i| (source.labels[i] == task.class_a || source.labels[i] == task.class_b) && !used.contains(&i))
        .collect();
    pool.shuffle(&mut rng(seed));
    pool
}

pub fn audit_sweep(
    rep: &FittedRepresentation,
    source: &LabeledImageSet,
    task: &BinaryTask,
    params: &AuditParams,
    seed: u64,
) -> Result<EquivarianceReport> {
    let pool = held_out_pool(source, task, derive_seed(seed, 10));
    if pool.len() < params.n_fit + params.n_eval {
        return Err(Error::input(format!(
            "audit needs {} held-out images but only {} are available",
            params.n_fit + params.n_eval,
            pool.len()
        )));
    }
    let pick = |idx: &[usize]| -> Vec<Image> { idx.iter().map(|&i| source.images[i].clone()).collect() };
    let fit = pick(&pool[..params.n_fit]);
    let eval = pick(&pool[params.n_fit..params.n_fit + params.n_eval]);
    let f = |x: &Image| rep.fused(x);
    run_sweep(&f, Provenance::Fused, &fit, &eval, params.ridge, derive_seed(seed, 11))
}

pub fn audit_dendrogram(
    operator: &IeneoOperator,
    modulus: bool,
    source: &LabeledImageSet,
    task: &BinaryTask,
    params: &AuditParams,
    seed: u64,
) -> Result<DendrogramArtifacts> {
    let pool = held_out_pool(source, task, derive_seed(seed, 12));
    let mut chosen = Vec::new();
    for class in [task.class_a, task.class_b] {
        let members: Vec<usize> =
            pool.iter().copied().filter(|&i| source.labels[i] == class).take(params.dendrogram_per_class).collect();
        if members.len() < params.dendrogram_per_class {
            return Err(Error::input(format!("not enough held-out images of class {class} for the dendrogram")));
        }
        chosen.extend(members);
    }
    let labels: Vec<u32> = chosen.iter().map(|&i| u32::from(source.labels[i] == task.class_b)).collect();
    let raw_vecs: Vec<Vec<f64>> = chosen.iter().map(|&i| source.images[i].pixels().to_vec()).collect();
    let eq_vecs: Vec<Vec<f64>> =
        chosen.iter().map(|&i| equivariant_values(operator, &source.images[i], modulus)).collect::<Result<_>>()?;
    let raw = linkage(&raw_vecs, params.linkage)?;
    let transformed = linkage(&eq_vecs, params.linkage)?;
    let contrast = cluster_contrast((&raw, &labels), (&transformed, &labels))?;
    Ok(DendrogramArtifacts { labels, raw, transformed, contrast })
}

/// Run every seed of `config` and assemble the report. Runs are
/// independent; `parallel` executes them concurrently.
pub fn run_pipeline(config: &ExperimentConfig, parallel: bool, observer: &dyn StageObserver) -> Result<RunReport> {
    config.validate()?;
    let source = load_dataset(&config.dataset.source).map_err(|e| e.in_stage("load"))?;
    run_pipeline_on(config, &source, parallel, observer)
}

/// As [`run_pipeline`] with the source set already in memory.
pub fn run_pipeline_on(
    config: &ExperimentConfig,
    source: &LabeledImageSet,
    parallel: bool,
    observer: &dyn StageObserver,
) -> Result<RunReport> {
    if config.seeds.is_empty() {
        return Err(Error::Config("at least one seed (run) is required".into()));
    }
    let side = source.images.first().ok_or_else(|| Error::input("dataset is empty"))?.side().map_err(|e| e.in_stage("filter-bank"))?;
    let bank = build_filter_bank(side, config.scattering.scales, config.scattering.orientations)
        .map_err(|e| e.in_stage("filter-bank"))?;
    let runs: Vec<usize> = (0..config.seeds.len()).collect();
    let states: Vec<RunState> = if parallel {
        runs.par_iter().map(|&r| run_once(config, source, &bank, r, observer)).collect::<Result<_>>()?
    } else {
        runs.iter().map(|&r| run_once(config, source, &bank, r, observer)).collect::<Result<_>>()?
    };

    let first = &states[0];
    let equivariance = if config.audit.sweep {
        Some(audit_sweep(&first.representation, source, &first.task, &config.audit, first.result.seed).map_err(|e| e.in_stage("audit"))?)
    } else {
        None
    };
    let dendrogram = if config.audit.dendrogram {
        Some(
            audit_dendrogram(&first.result.operator, config.ieneo.modulus, source, &first.task, &config.audit, first.result.seed)
                .map_err(|e| e.in_stage("dendrogram"))?,
        )
    } else {
        None
    };
    let runs: Vec<RunResult> = states.into_iter().map(|s| s.result).collect();
    let n = runs.len() as f64;
    Ok(RunReport {
        classifier: config.classifier.name().to_string(),
        class_a: config.dataset.class_a,
        class_b: config.dataset.class_b,
        mean_pipeline_accuracy: runs.iter().map(|r| r.pipeline_accuracy).sum::<f64>() / n,
        mean_baseline_accuracy: runs.iter().map(|r| r.baseline_accuracy).sum::<f64>() / n,
        runs,
        equivariance,
        dendrogram,
        notes: vec!["each seed reseeds both the train/test sampling and the operator candidates".to_string()],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn accuracy_csv(report: &RunReport) -> String {
    let mut out = String::from("run,pipeline_acc,baseline_acc\n");
    for r in &report.runs {
        out.push_str(&format!("{},{},{}\n", r.run + 1, r.pipeline_accuracy, r.baseline_accuracy));
    }
    out
}

/// Write the report artifacts and a `manifest.json` with their hashes.
pub fn emit_report(report: &RunReport, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out = out_dir.as_ref();
    fs::create_dir_all(out)?;
    let mut files: Vec<(String, Vec<u8>)> = vec![
        ("report.json".into(), serde_json::to_vec_pretty(report)?),
        ("accuracy.csv".into(), accuracy_csv(report).into_bytes()),
    ];
    if let Some(eq) = &report.equivariance {
        files.push(("equivariance.csv".into(), eq.to_csv().into_bytes()));
    }
    if let Some(d) = &report.dendrogram {
        let names: Vec<String> = d.labels.iter().enumerate().map(|(i, l)| format!("{i}:{l}")).collect();
        files.push(("dendrogram_raw.svg".into(), d.raw.to_svg(Some(&names)).into_bytes()));
        files.push(("dendrogram_raw.json".into(), serde_json::to_vec_pretty(&d.raw)?));
        files.push(("dendrogram_transformed.svg".into(), d.transformed.to_svg(Some(&names)).into_bytes()));
        files.push(("dendrogram_transformed.json".into(), serde_json::to_vec_pretty(&d.transformed)?));
    }
    let mut manifest = Manifest { files: Vec::new() };
    for (name, bytes) in files {
        fs::write(out.join(&name), &bytes)?;
        manifest.files.push(ManifestEntry { path: name, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
    }
    fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_unknown_keys() {
        let text = r#"{"dataset":{"source":{"format":"idx","images":"a","labels":"b"},
            "class_a":0,"class_b":1,"n_train":10,"n_test":4}}"#;
        let cfg = ExperimentConfig::from_json(text, Some(Path::new("/base"))).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.retention, 0.8);
        assert_eq!(cfg.ieneo.k_prefilter, 20);
        assert!(matches!(&cfg.dataset.source, DataSource::Idx { images, .. } if images == Path::new("/base/a")));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let typo = text.replacen("\"dataset\"", "\"retenton\":0.5,\"dataset\"", 1);
        let err = ExperimentConfig::from_json(&typo, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)) && err.exit_code() == 2);
    }

    #[test]
    fn accuracy_csv_rows() {
        let report = RunReport {
            classifier: "knn".into(),
            class_a: 0,
            class_b: 1,
            runs: Vec::new(),
            mean_pipeline_accuracy: 0.0,
            mean_baseline_accuracy: 0.0,
            equivariance: None,
            dendrogram: None,
            notes: Vec::new(),
        };
        assert_eq!(accuracy_csv(&report), "run,pipeline_acc,baseline_acc\n");
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
