//! Run orchestration: a config describes datasets, generators, classifiers,
//! and the weight fit; a run executes every (dataset, generator) task, fits
//! per-dataset composite weights, and materializes a result tree of JSON
//! records, CSV tables, and SVG figures. Everything under the run directory
//! is a pure function of the config, so reruns and recomputes are
//! byte-identical regardless of worker count.

pub mod builtin;
pub mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::analysis::{
    build_boxplot_table, build_heatmap_table, build_property_table, build_target_heatmap,
    per_generator_correlations, CorrelationCell, HeatmapTable, StudySummary, Target,
};
use crate::data::{class_counts, load_csv, load_csv_with_schema, Dataset};
use crate::error::{Error, Result};
use crate::fidelity::FidelityVector;
use crate::generators::{GeneratorKind, GeneratorSpec};
use crate::rng::{derive_seed, fnv1a64, RngSeed};
use crate::supermetric::{fit_weights, FitConfig, FitResult, RunRecord, WeightVector};
use crate::utility::classifiers::ClassifierKind;
use crate::utility::{run_tstr, run_tstr_external, Strategy, TstrOutcome, UtilityReport};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Builtin { builtin: String },
    Csv { path: PathBuf, label: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub id: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub id: String,
    #[serde(flatten)]
    pub kind: GeneratorKind,
    /// Defaults to the kind's family when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
}

impl GeneratorConfig {
    pub fn family(&self) -> String {
        self.family
            .clone()
            .unwrap_or_else(|| self.kind.default_family().to_string())
    }

    fn spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            kind: self.kind,
            family: self.family(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: RngSeed,
    pub k_folds: usize,
    pub out_dir: PathBuf,
    pub datasets: Vec<DatasetConfig>,
    pub generators: Vec<GeneratorConfig>,
    pub classifiers: Vec<ClassifierKind>,
    /// Weight-fit settings. The fit seed in here is ignored: each dataset's
    /// fit derives its own seed from the run seed.
    pub fit: FitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        default_config()
    }
}

/// The stock benchmark: five planted datasets, ten generators spanning three
/// families (with a noise ladder over the perturbation family), all four
/// classifiers, five folds.
pub fn default_config() -> RunConfig {
    let gen = |id: &str, kind: GeneratorKind| GeneratorConfig {
        id: id.to_string(),
        kind,
        family: None,
    };
    let mut generators = vec![
        gen("im", GeneratorKind::IndependentMarginals),
        gen("copula", GeneratorKind::GaussianCopula),
        gen("smote_k3", GeneratorKind::Smote { k_neighbors: 3 }),
        gen("smote_k5", GeneratorKind::Smote { k_neighbors: 5 }),
    ];
    for (suffix, rate) in [
        ("000", 0.0),
        ("005", 0.05),
        ("010", 0.10),
        ("020", 0.20),
        ("030", 0.30),
        ("040", 0.40),
    ] {
        generators.push(gen(
            &format!("noisy_{suffix}"),
            GeneratorKind::NoisyCopy { flip_rate: rate },
        ));
    }
    RunConfig {
        seed: RngSeed(0),
        k_folds: 5,
        out_dir: PathBuf::from("runs"),
        datasets: builtin::BUILTIN_NAMES
            .iter()
            .map(|name| DatasetConfig {
                id: name.to_string(),
                source: DatasetSource::Builtin {
                    builtin: name.to_string(),
                },
            })
            .collect(),
        generators,
        classifiers: ClassifierKind::ALL.to_vec(),
        fit: FitConfig::default(),
    }
}

/// Ids double as directory names and CSV column headers.
fn validate_id(id: &str, what: &str) -> Result<()> {
    if id.is_empty()
        || !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(Error::ConfigInvalid(format!(
            "{what} id '{id}' must be nonempty and use only [A-Za-z0-9_-]"
        )));
    }
    Ok(())
}

pub fn validate_config(cfg: &RunConfig) -> Result<()> {
    if cfg.k_folds < 2 {
        return Err(Error::ConfigInvalid(format!(
            "k_folds must be at least 2, got {}",
            cfg.k_folds
        )));
    }
    if cfg.datasets.is_empty() {
        return Err(Error::ConfigInvalid("no datasets configured".into()));
    }
    if cfg.generators.is_empty() {
        return Err(Error::ConfigInvalid("no generators configured".into()));
    }
    if cfg.classifiers.is_empty() {
        return Err(Error::ConfigInvalid("no classifiers configured".into()));
    }
    let mut seen = BTreeSet::new();
    for d in &cfg.datasets {
        validate_id(&d.id, "dataset")?;
        if !seen.insert(&d.id) {
            return Err(Error::ConfigInvalid(format!("duplicate dataset id '{}'", d.id)));
        }
    }
    let mut seen = BTreeSet::new();
    for g in &cfg.generators {
        validate_id(&g.id, "generator")?;
        if !seen.insert(&g.id) {
            return Err(Error::ConfigInvalid(format!("duplicate generator id '{}'", g.id)));
        }
        g.spec().validate()?;
    }
    let mut seen = BTreeSet::new();
    for c in &cfg.classifiers {
        if !seen.insert(c) {
            return Err(Error::ConfigInvalid(format!(
                "duplicate classifier '{}'",
                c.name()
            )));
        }
    }
    let fit = &cfg.fit;
    if !fit.lambda_gap.is_finite() || fit.lambda_gap < 0.0 {
        return Err(Error::ConfigInvalid(format!(
            "lambda_gap must be finite and >= 0, got {}",
            fit.lambda_gap
        )));
    }
    if fit.n_random == 0 {
        return Err(Error::ConfigInvalid("n_random must be >= 1".into()));
    }
    if !fit.refine_step.is_finite() || fit.refine_step <= 0.0 {
        return Err(Error::ConfigInvalid(format!(
            "refine_step must be finite and > 0, got {}",
            fit.refine_step
        )));
    }
    Ok(())
}

/// Content-derived run id. out_dir is excluded: where results land is not
/// part of what was computed, so moving the output root keeps the id.
pub fn run_id_for(cfg: &RunConfig) -> String {
    let mut identity = cfg.clone();
    identity.out_dir = PathBuf::new();
    let canon = serde_json::to_string(&identity).expect("config serializes");
    format!("run-{:016x}", fnv1a64(canon.as_bytes()))
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    match &cfg.source {
        DatasetSource::Builtin { builtin: name } => builtin::builtin(name)?.synthesize(),
        DatasetSource::Csv { path, label } => load_csv(path, label),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub class0: usize,
    pub class1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskError {
    pub dataset: String,
    pub generator: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitError {
    pub dataset: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalEntry {
    pub id: String,
    pub family: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub run_id: String,
    pub config: RunConfig,
    pub classifier_hyperparameters: BTreeMap<String, serde_json::Value>,
    pub datasets: Vec<DatasetSummary>,
    pub task_errors: Vec<TaskError>,
    pub fit_errors: Vec<FitError>,
    #[serde(default)]
    pub external: Vec<ExternalEntry>,
}

/// Fitted weights for one dataset as persisted under analysis/.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsDoc {
    pub dataset_id: String,
    pub lambda_gap: f64,
    pub weights: WeightVector,
    pub objective: f64,
    pub corr_recall: f64,
    pub corr_f1: f64,
}

impl WeightsDoc {
    fn new(dataset_id: &str, lambda_gap: f64, fit: &FitResult) -> Self {
        WeightsDoc {
            dataset_id: dataset_id.to_string(),
            lambda_gap,
            weights: fit.weights,
            objective: fit.objective,
            corr_recall: fit.corr_recall,
            corr_f1: fit.corr_f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub run_id: String,
    pub tasks_ok: usize,
    pub tasks_failed: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn manifest_path(run_dir: &Path) -> PathBuf {
    run_dir.join("manifest.json")
}

fn weights_path(run_dir: &Path, dataset_id: &str) -> PathBuf {
    run_dir.join("analysis").join(format!("weights_{dataset_id}.json"))
}

/// Mean recall and f1 over classifiers, always iterated in name order so the
/// floating-point sum is identical no matter where the inputs came from.
fn mean_recall_f1(by_classifier: &BTreeMap<String, (f64, f64)>) -> (f64, f64) {
    let n = by_classifier.len() as f64;
    let (sum_r, sum_f) = by_classifier
        .values()
        .fold((0.0, 0.0), |(ar, af), (r, f)| (ar + r, af + f));
    (sum_r / n, sum_f / n)
}

fn records_from_outcome(dataset_id: &str, generator_id: &str, outcome: &TstrOutcome) -> Vec<RunRecord> {
    (0..outcome.fold_fidelity.len())
        .map(|fold| {
            let mut by_classifier = BTreeMap::new();
            for r in &outcome.reports {
                if r.fold == fold && r.strategy == Strategy::Tstr {
                    by_classifier.insert(r.classifier.name().to_string(), (r.recall, r.f1));
                }
            }
            let (recall, f1) = mean_recall_f1(&by_classifier);
            RunRecord {
                dataset_id: dataset_id.to_string(),
                generator_id: generator_id.to_string(),
                fold,
                fidelity: outcome.fold_fidelity[fold],
                recall,
                f1,
            }
        })
        .collect()
}

fn write_outcome(
    run_dir: &Path,
    dataset_id: &str,
    generator_id: &str,
    outcome: &TstrOutcome,
) -> Result<()> {
    let base = run_dir.join("runs").join(dataset_id).join(generator_id);
    for (fold, fid) in outcome.fold_fidelity.iter().enumerate() {
        write_json(&base.join("fidelity").join(format!("fold_{fold}.json")), fid)?;
    }
    for report in &outcome.reports {
        let strategy_dir = match report.strategy {
            Strategy::Tstr => "tstr",
            Strategy::Trtr => "trtr",
        };
        write_json(
            &base
                .join(strategy_dir)
                .join(report.classifier.name())
                .join(format!("fold_{}.json", report.fold)),
            report,
        )?;
    }
    Ok(())
}

/// Canonical record order: analysis consumes records sorted by (dataset,
/// generator, fold) so the same floating-point reductions happen whether the
/// records came from a live run or were read back from the tree.
fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        (&a.dataset_id, &a.generator_id, a.fold).cmp(&(&b.dataset_id, &b.generator_id, b.fold))
    });
}

fn fit_dataset_weights(
    records: &[RunRecord],
    dataset_id: &str,
    fit: &FitConfig,
    base_seed: RngSeed,
) -> Result<FitResult> {
    let ds_records: Vec<RunRecord> = records
        .iter()
        .filter(|r| r.dataset_id == dataset_id)
        .cloned()
        .collect();
    let cfg = FitConfig {
        seed: derive_seed(base_seed, &["fit", dataset_id]),
        ..*fit
    };
    fit_weights(&ds_records, &cfg)
}

fn write_heatmap_csv(path: &Path, table: &HeatmapTable) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["metric".to_string()];
    header.extend(table.col_labels.iter().cloned());
    w.write_record(&header)?;
    for (i, label) in table.row_labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        for j in 0..table.col_labels.len() {
            rec.push(match table.get(i, j) {
                Some(v) => format!("{v}"),
                None => String::new(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_properties_csv(path: &Path, rows: &[StudySummary]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "metric",
        "target",
        "sign_consistency",
        "stability_std",
        "robustness_range",
        "n_defined",
        "n_undefined",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for row in rows {
        w.write_record([
            row.metric.name().to_string(),
            row.target.name().to_string(),
            opt(row.sign_consistency),
            opt(row.stability_std),
            opt(row.robustness_range),
            row.n_defined.to_string(),
            row.n_undefined.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_boxplot_csv(path: &Path, rows: &[crate::analysis::BoxplotRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["metric", "target", "min", "q1", "median", "q3", "max", "n_defined"])?;
    for row in rows {
        let target = row.target.map(|t| t.name()).unwrap_or("pooled");
        w.write_record([
            row.metric.name().to_string(),
            target.to_string(),
            format!("{}", row.min),
            format!("{}", row.q1),
            format!("{}", row.median),
            format!("{}", row.q3),
            format!("{}", row.max),
            row.n_defined.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Rewrite everything downstream of the correlation cells: cells.json, the
/// three heatmap CSVs, boxplot and property tables, and both figures.
fn write_analysis_outputs(
    run_dir: &Path,
    cells: &[CorrelationCell],
    families: &BTreeMap<String, String>,
) -> Result<()> {
    let analysis = run_dir.join("analysis");
    fs::create_dir_all(&analysis).map_err(|e| Error::io(&analysis, e))?;
    write_json(&analysis.join("cells.json"), &cells)?;

    let combined = build_heatmap_table(cells)?;
    write_heatmap_csv(&analysis.join("heatmap.csv"), &combined)?;
    write_heatmap_csv(
        &analysis.join("heatmap_recall.csv"),
        &build_target_heatmap(cells, Target::Recall)?,
    )?;
    write_heatmap_csv(
        &analysis.join("heatmap_f1.csv"),
        &build_target_heatmap(cells, Target::F1)?,
    )?;

    let boxplot = build_boxplot_table(cells)?;
    write_boxplot_csv(&analysis.join("boxplot.csv"), &boxplot)?;
    write_properties_csv(&analysis.join("properties.csv"), &build_property_table(cells, families))?;

    write_text(&run_dir.join("figures").join("heatmap.svg"), &svg::render_heatmap_svg(&combined)?)?;
    write_text(&run_dir.join("figures").join("boxplot.svg"), &svg::render_boxplot_svg(&boxplot)?)?;
    Ok(())
}

/// Fit weights for every dataset appearing in `records`, writing one weights
/// doc per success. Datasets whose fit fails are reported, not fatal, unless
/// none survive.
fn fit_all_weights(
    run_dir: &Path,
    records: &[RunRecord],
    fit: &FitConfig,
    base_seed: RngSeed,
) -> Result<(BTreeMap<String, WeightVector>, Vec<FitError>)> {
    let dataset_ids: BTreeSet<&str> = records.iter().map(|r| r.dataset_id.as_str()).collect();
    let mut weights = BTreeMap::new();
    let mut errors = Vec::new();
    for ds in dataset_ids {
        match fit_dataset_weights(records, ds, fit, base_seed) {
            Ok(res) => {
                write_json(&weights_path(run_dir, ds), &WeightsDoc::new(ds, fit.lambda_gap, &res))?;
                weights.insert(ds.to_string(), res.weights);
            }
            Err(e) => errors.push(FitError {
                dataset: ds.to_string(),
                message: e.to_string(),
            }),
        }
    }
    if weights.is_empty() {
        let detail = errors
            .first()
            .map(|e| format!("{}: {}", e.dataset, e.message))
            .unwrap_or_else(|| "no records".into());
        return Err(Error::InsufficientVariation(format!(
            "weight fitting failed for every dataset ({detail})"
        )));
    }
    Ok((weights, errors))
}

fn analysis_records(records: &[RunRecord], weights: &BTreeMap<String, WeightVector>) -> Vec<RunRecord> {
    records
        .iter()
        .filter(|r| weights.contains_key(&r.dataset_id))
        .cloned()
        .collect()
}

/// Execute a full run. `jobs` bounds the worker threads (0 = one per CPU);
/// the output is byte-identical for any value because tasks are seeded by
/// coordinate and all writes happen serially in config order afterwards.
pub fn run_pipeline(cfg: &RunConfig, jobs: usize) -> Result<RunSummary> {
    validate_config(cfg)?;
    let run_id = run_id_for(cfg);

    let mut datasets: Vec<(String, Dataset)> = Vec::with_capacity(cfg.datasets.len());
    for d in &cfg.datasets {
        datasets.push((d.id.clone(), load_dataset(d)?));
    }

    let run_dir = cfg.out_dir.join(&run_id);
    if run_dir.exists() {
        fs::remove_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    }
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("worker pool: {e}")))?;
    let tasks: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|di| (0..cfg.generators.len()).map(move |gi| (di, gi)))
        .collect();
    let outcomes: Vec<Result<TstrOutcome>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(di, gi)| {
                let (ds_id, data) = &datasets[di];
                let gen = &cfg.generators[gi];
                run_tstr(
                    data,
                    &gen.spec(),
                    &cfg.classifiers,
                    cfg.k_folds,
                    derive_seed(cfg.seed, &[ds_id, &gen.id]),
                )
            })
            .collect()
    });

    let mut records: Vec<RunRecord> = Vec::new();
    let mut task_errors = Vec::new();
    let mut first_failure = None;
    for (&(di, gi), outcome) in tasks.iter().zip(outcomes) {
        let ds_id = &datasets[di].0;
        let gen_id = &cfg.generators[gi].id;
        match outcome {
            Ok(outcome) => {
                write_outcome(&run_dir, ds_id, gen_id, &outcome)?;
                records.extend(records_from_outcome(ds_id, gen_id, &outcome));
            }
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(e.to_string());
                }
                task_errors.push(TaskError {
                    dataset: ds_id.clone(),
                    generator: gen_id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    if records.is_empty() {
        let detail = first_failure.unwrap_or_else(|| "no tasks".into());
        return Err(Error::InsufficientVariation(format!(
            "every task failed ({detail})"
        )));
    }
    sort_records(&mut records);

    let (weights, fit_errors) = fit_all_weights(&run_dir, &records, &cfg.fit, cfg.seed)?;
    let cells = per_generator_correlations(&analysis_records(&records, &weights), &weights)?;
    let families: BTreeMap<String, String> = cfg
        .generators
        .iter()
        .map(|g| (g.id.clone(), g.family()))
        .collect();
    write_analysis_outputs(&run_dir, &cells, &families)?;

    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        run_id: run_id.clone(),
        config: cfg.clone(),
        classifier_hyperparameters: cfg
            .classifiers
            .iter()
            .map(|c| (c.name().to_string(), c.hyperparameters()))
            .collect(),
        datasets: datasets
            .iter()
            .map(|(id, data)| {
                let (class0, class1) = class_counts(data);
                DatasetSummary {
                    id: id.clone(),
                    n_rows: data.n_rows(),
                    n_features: data.n_features(),
                    class0,
                    class1,
                }
            })
            .collect(),
        task_errors: task_errors.clone(),
        fit_errors,
        external: Vec::new(),
    };
    write_json(&manifest_path(&run_dir), &manifest)?;

    Ok(RunSummary {
        run_dir,
        run_id,
        tasks_ok: tasks.len() - task_errors.len(),
        tasks_failed: task_errors.len(),
    })
}

fn sorted_subdirs(path: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort_unstable();
    Ok(names)
}

fn read_fold_json<T: DeserializeOwned>(dir: &Path, fold: usize) -> Result<T> {
    let path = dir.join(format!("fold_{fold}.json"));
    if !path.is_file() {
        return Err(Error::RunTreeInvalid(format!("missing {}", path.display())));
    }
    read_json(&path)
}

/// Rebuild run records from the files alone. Fold files must be complete for
/// every classifier directory present; means are taken over classifier names
/// in sorted order, matching the live pipeline exactly.
fn read_records_from_tree(run_dir: &Path, k_folds: usize) -> Result<Vec<RunRecord>> {
    let runs = run_dir.join("runs");
    if !runs.is_dir() {
        return Err(Error::RunTreeInvalid(format!("missing {}", runs.display())));
    }
    let mut records = Vec::new();
    for ds_id in sorted_subdirs(&runs)? {
        for gen_id in sorted_subdirs(&runs.join(&ds_id))? {
            let base = runs.join(&ds_id).join(&gen_id);
            let classifier_names = sorted_subdirs(&base.join("tstr")).map_err(|_| {
                Error::RunTreeInvalid(format!("missing tstr/ under {}", base.display()))
            })?;
            if classifier_names.is_empty() {
                return Err(Error::RunTreeInvalid(format!(
                    "no classifier results under {}",
                    base.join("tstr").display()
                )));
            }
            for fold in 0..k_folds {
                let fidelity: FidelityVector = read_fold_json(&base.join("fidelity"), fold)?;
                let mut by_classifier = BTreeMap::new();
                for name in &classifier_names {
                    let report: UtilityReport =
                        read_fold_json(&base.join("tstr").join(name), fold)?;
                    by_classifier.insert(name.clone(), (report.recall, report.f1));
                }
                let (recall, f1) = mean_recall_f1(&by_classifier);
                records.push(RunRecord {
                    dataset_id: ds_id.clone(),
                    generator_id: gen_id.clone(),
                    fold,
                    fidelity,
                    recall,
                    f1,
                });
            }
        }
    }
    sort_records(&mut records);
    Ok(records)
}

fn family_map(manifest: &Manifest) -> BTreeMap<String, String> {
    manifest
        .config
        .generators
        .iter()
        .map(|g| (g.id.clone(), g.family()))
        .chain(
            manifest
                .external
                .iter()
                .map(|e| (e.id.clone(), e.family.clone())),
        )
        .collect()
}

/// Recompute the canonical analysis (weights, cells, tables, figures) from
/// the result tree and manifest. Idempotent over an untouched run and the
/// way ingested generators get folded into the study.
pub fn recompute_report(run_dir: &Path) -> Result<()> {
    let manifest: Manifest = read_json(&manifest_path(run_dir))?;
    let records = read_records_from_tree(run_dir, manifest.config.k_folds)?;
    if records.is_empty() {
        return Err(Error::RunTreeInvalid("result tree holds no records".into()));
    }
    let (weights, _fit_errors) =
        fit_all_weights(run_dir, &records, &manifest.config.fit, manifest.config.seed)?;
    let cells = per_generator_correlations(&analysis_records(&records, &weights), &weights)?;
    write_analysis_outputs(run_dir, &cells, &family_map(&manifest))
}

/// Score an externally produced synthetic CSV against one of the run's real
/// datasets, file it in the tree as generator `generator_id` (family
/// "external"), and fold it into the recomputed analysis.
pub fn ingest_external_synthetic(
    run_dir: &Path,
    real_id: &str,
    syn_csv: &Path,
    generator_id: &str,
) -> Result<()> {
    let mut manifest: Manifest = read_json(&manifest_path(run_dir))?;
    validate_id(generator_id, "generator")?;
    let taken = manifest.config.generators.iter().any(|g| g.id == generator_id)
        || manifest.external.iter().any(|e| e.id == generator_id);
    if taken {
        return Err(Error::ConfigInvalid(format!(
            "generator id '{generator_id}' already exists in this run"
        )));
    }
    let ds_cfg = manifest
        .config
        .datasets
        .iter()
        .find(|d| d.id == real_id)
        .ok_or_else(|| Error::UnknownDataset(real_id.to_string()))?;
    let real = load_dataset(ds_cfg)?;
    let synthetic = load_csv_with_schema(syn_csv, real.schema())?;
    let outcome = run_tstr_external(
        &real,
        &synthetic,
        &manifest.config.classifiers,
        manifest.config.k_folds,
        derive_seed(manifest.config.seed, &[real_id, generator_id]),
    )?;
    write_outcome(run_dir, real_id, generator_id, &outcome)?;
    manifest.external.push(ExternalEntry {
        id: generator_id.to_string(),
        family: "external".to_string(),
        source: syn_csv.display().to_string(),
    });
    write_json(&manifest_path(run_dir), &manifest)?;
    recompute_report(run_dir)
}

/// Refit one dataset's weights, optionally overriding the gap penalty, then
/// rebuild the cells and tables using the weights docs now on disk (the
/// override survives until the next full recompute).
pub fn refit_weights(
    run_dir: &Path,
    dataset_id: &str,
    lambda_override: Option<f64>,
) -> Result<FitResult> {
    let manifest: Manifest = read_json(&manifest_path(run_dir))?;
    let records = read_records_from_tree(run_dir, manifest.config.k_folds)?;
    if !records.iter().any(|r| r.dataset_id == dataset_id) {
        return Err(Error::UnknownDataset(dataset_id.to_string()));
    }
    let lambda = lambda_override.unwrap_or(manifest.config.fit.lambda_gap);
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let fit = FitConfig {
        lambda_gap: lambda,
        ..manifest.config.fit
    };
    let result = fit_dataset_weights(&records, dataset_id, &fit, manifest.config.seed)?;
    write_json(
        &weights_path(run_dir, dataset_id),
        &WeightsDoc::new(dataset_id, lambda, &result),
    )?;

    let dataset_ids: BTreeSet<&str> = records.iter().map(|r| r.dataset_id.as_str()).collect();
    let mut weights = BTreeMap::new();
    for ds in dataset_ids {
        let doc: WeightsDoc = read_json(&weights_path(run_dir, ds)).map_err(|_| {
            Error::RunTreeInvalid(format!("missing weights doc for dataset '{ds}'"))
        })?;
        weights.insert(ds.to_string(), doc.weights);
    }
    let cells = per_generator_correlations(&analysis_records(&records, &weights), &weights)?;
    write_analysis_outputs(run_dir, &cells, &family_map(&manifest))?;
    Ok(result)
}
