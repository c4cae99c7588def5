use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use icnn::audit::{equivariance_error_pairs, estimate_map, mean_abs_magnitude, read_feature_csv, Ridge};
use icnn::data::make_binary_task;
use icnn::error::{Error, Result};
use icnn::pipeline::{
    audit_dendrogram, audit_sweep, emit_report, load_dataset, run_once, run_pipeline, sample_candidates, sha256_hex,
    ExperimentConfig, Manifest, ManifestEntry, NoObserver, RunReport,
};
use icnn::represent::{build_filter_bank, select_operator, Selection};
use icnn::seeding::derive_seed;

#[derive(Parser)]
#[command(name = "icnn", version, about = "Interpretable image classification experiments")]
struct Cli {
    /// Log progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of runs; seeds become seed-base, seed-base+1, ...
    #[arg(long)]
    runs: Option<usize>,
    /// First seed when --runs or --seed-base is given (default 1).
    #[arg(long)]
    seed_base: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load the dataset and check that the configured task can be built.
    IngestCheck(Common),
    /// Select an IENEO operator for each run and write the selections.
    SelectOperator(Common),
    /// Full pipeline with baseline; writes the report and manifest.
    Run {
        #[command(flatten)]
        common: Common,
        /// Execute runs concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Equivariance sweep, on the first run's fused representation or on
    /// precomputed feature pairs.
    Audit {
        #[arg(long, required_unless_present = "phi_x")]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed_base: Option<u64>,
        /// CSV of features of the untransformed images, one row per image.
        #[arg(long, requires = "phi_gx")]
        phi_x: Option<PathBuf>,
        /// CSV of features of the transformed images, row-aligned with --phi-x.
        #[arg(long, requires = "phi_x")]
        phi_gx: Option<PathBuf>,
        /// Rows used to fit the map; the rest are evaluated (default: half).
        #[arg(long)]
        fit_rows: Option<usize>,
        /// Absolute ridge coefficient; default is relative 1e-3.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Dendrograms of raw pixels and operator outputs for the first run.
    Dendrogram(Common),
    /// Re-emit artifacts and manifest from a saved report.json.
    Report {
        /// Path to a report.json written by `run`.
        #[arg(long)]
        from: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    apply_seeds(&mut cfg, c.runs, c.seed_base);
    cfg.validate()?;
    Ok(cfg)
}

fn apply_seeds(cfg: &mut ExperimentConfig, runs: Option<usize>, seed_base: Option<u64>) {
    if runs.is_some() || seed_base.is_some() {
        let n = runs.unwrap_or(cfg.seeds.len()) as u64;
        let base = seed_base.unwrap_or(1);
        cfg.seeds = (base..base + n).collect();
    }
}

fn write_json(out: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    fs::create_dir_all(out)?;
    let bytes = serde_json::to_vec_pretty(value)?;
    fs::write(out.join(name), &bytes)?;
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary {
    images: usize,
    height: usize,
    width: usize,
    class_counts: BTreeMap<u32, usize>,
    train: usize,
    test: usize,
}

fn ingest_check(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let source = load_dataset(&cfg.dataset.source)?;
    let first = source.images.first().ok_or_else(|| Error::Input("dataset is empty".into()))?;
    let mut class_counts = BTreeMap::new();
    for &l in &source.labels {
        *class_counts.entry(l).or_insert(0) += 1;
    }
    let ds = &cfg.dataset;
    let task = make_binary_task(&source, ds.class_a, ds.class_b, ds.n_train, ds.n_test, derive_seed(cfg.seeds[0], 0))?;
    let summary = IngestSummary {
        images: source.len(),
        height: first.height(),
        width: first.width(),
        class_counts,
        train: task.train.len(),
        test: task.test.len(),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    write_json(&c.out, "ingest.json", &summary)
}

fn select_operators(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let source = load_dataset(&cfg.dataset.source)?;
    let ds = &cfg.dataset;
    let mut selections: Vec<Selection> = Vec::new();
    for &seed in &cfg.seeds {
        let task = make_binary_task(&source, ds.class_a, ds.class_b, ds.n_train, ds.n_test, derive_seed(seed, 0))?;
        let candidates = sample_candidates(&cfg.ieneo, seed)?;
        let sel = select_operator(&candidates, &task.train, derive_seed(seed, 1), &cfg.selection_config())?;
        println!("seed {seed}: candidate {} {}", sel.index, sel.operator.summary());
        selections.push(sel);
    }
    write_json(&c.out, "selection.json", &selections)
}

fn run(c: &Common, parallel: bool) -> Result<()> {
    let cfg = load_config(c)?;
    let report = run_pipeline(&cfg, parallel, &NoObserver)?;
    print_summary(&report);
    emit_report(&report, &c.out)?;
    Ok(())
}

fn print_summary(report: &RunReport) {
    println!("run,pipeline_acc,baseline_acc");
    for r in &report.runs {
        println!("{},{:.4},{:.4}", r.run + 1, r.pipeline_accuracy, r.baseline_accuracy);
    }
    println!("mean,{:.4},{:.4}", report.mean_pipeline_accuracy, report.mean_baseline_accuracy);
}

#[derive(Serialize)]
struct PairAudit {
    n_fit: usize,
    n_eval: usize,
    lambda: f64,
    fit_residual: f64,
    e_q: f64,
    identity_map_e_q: f64,
    scale: f64,
}

fn audit_pairs(phi_x: &Path, phi_gx: &Path, fit_rows: Option<usize>, lambda: Option<f64>, out: &Path) -> Result<()> {
    let x = read_feature_csv(&fs::read_to_string(phi_x)?)?;
    let gx = read_feature_csv(&fs::read_to_string(phi_gx)?)?;
    if x.len() != gx.len() {
        return Err(Error::Input(format!("{} rows in --phi-x but {} in --phi-gx", x.len(), gx.len())));
    }
    let n_fit = fit_rows.unwrap_or(x.len() / 2);
    if n_fit == 0 || n_fit >= x.len() {
        return Err(Error::Parameter(format!("fit rows {n_fit} must be between 1 and {}", x.len().saturating_sub(1))));
    }
    let ridge = lambda.map_or(Ridge::default(), Ridge::Absolute);
    let lambda = ridge.resolve(&x[..n_fit]);
    let map = estimate_map(&x[..n_fit], &gx[..n_fit], lambda)?;
    // Pairs (x, gx) are (g^-1 y, y) with y = gx.
    let e_q = equivariance_error_pairs(&gx[n_fit..], &x[n_fit..], &map)?;
    let identity = icnn::audit::EquivarianceMap::identity(map.dims());
    let summary = PairAudit {
        n_fit,
        n_eval: x.len() - n_fit,
        lambda,
        fit_residual: map.fit_residual,
        e_q,
        identity_map_e_q: equivariance_error_pairs(&gx[n_fit..], &x[n_fit..], &identity)?,
        scale: mean_abs_magnitude(&gx[n_fit..]),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    write_json(out, "audit_pairs.json", &summary)?;
    write_json(out, "map.json", &map)
}

fn audit_config(config: &Path, seed_base: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    apply_seeds(&mut cfg, Some(1), seed_base);
    cfg.validate()?;
    let source = load_dataset(&cfg.dataset.source)?;
    let side = source.images.first().ok_or_else(|| Error::Input("dataset is empty".into()))?.side()?;
    let bank = build_filter_bank(side, cfg.scattering.scales, cfg.scattering.orientations)?;
    let state = run_once(&cfg, &source, &bank, 0, &NoObserver)?;
    let report = audit_sweep(&state.representation, &source, &state.task, &cfg.audit, state.result.seed)?;
    println!("transform,e_q,control_e_q,identity_map_e_q");
    for r in &report.rows {
        println!("{},{:.6},{:.6},{:.6}", r.transform, r.e_q, r.control_e_q, r.identity_map_e_q);
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("equivariance.csv"), report.to_csv())?;
    write_json(out, "equivariance.json", &report)
}

fn dendrogram(c: &Common) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    apply_seeds(&mut cfg, Some(1), c.seed_base);
    cfg.validate()?;
    let source = load_dataset(&cfg.dataset.source)?;
    let ds = &cfg.dataset;
    let seed = cfg.seeds[0];
    let task = make_binary_task(&source, ds.class_a, ds.class_b, ds.n_train, ds.n_test, derive_seed(seed, 0))?;
    let candidates = sample_candidates(&cfg.ieneo, seed)?;
    let sel = select_operator(&candidates, &task.train, derive_seed(seed, 1), &cfg.selection_config())?;
    let art = audit_dendrogram(&sel.operator, cfg.ieneo.modulus, &source, &task, &cfg.audit, seed)?;
    let names: Vec<String> = art.labels.iter().enumerate().map(|(i, l)| format!("{i}:{l}")).collect();
    fs::create_dir_all(&c.out)?;
    fs::write(c.out.join("dendrogram_raw.svg"), art.raw.to_svg(Some(&names)))?;
    fs::write(c.out.join("dendrogram_transformed.svg"), art.transformed.to_svg(Some(&names)))?;
    write_json(&c.out, "dendrogram.json", &art)?;
    let k = &art.contrast;
    println!("raw ratio {:.4}, transformed ratio {:.4}, difference {:.4}", k.raw.ratio, k.transformed.ratio, k.difference);
    Ok(())
}

fn report(from: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(from)?;
    let report: RunReport = serde_json::from_str(&text)?;
    print_summary(&report);
    let manifest = emit_report(&report, out)?;
    check_manifest(&manifest, out)
}

fn check_manifest(manifest: &Manifest, dir: &Path) -> Result<()> {
    for ManifestEntry { path, sha256, .. } in &manifest.files {
        if &sha256_hex(&fs::read(dir.join(path))?) != sha256 {
            return Err(Error::Consistency(format!("{path} does not match its manifest hash")));
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestCheck(c) => ingest_check(&c),
        Command::SelectOperator(c) => select_operators(&c),
        Command::Run { common, parallel } => run(&common, parallel),
        Command::Audit { phi_x: Some(x), phi_gx: Some(gx), fit_rows, lambda, out, .. } => {
            audit_pairs(&x, &gx, fit_rows, lambda, &out)
        }
        Command::Audit { config: Some(config), seed_base, out, .. } => audit_config(&config, seed_base, &out),
        Command::Audit { .. } => Err(Error::Config("audit needs --config or --phi-x/--phi-gx".into())),
        Command::Dendrogram(c) => dendrogram(&c),
        Command::Report { from, out } => report(&from, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
