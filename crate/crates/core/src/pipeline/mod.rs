//! End-to-end runs: ingest, transform, embed, cross-validate with per-fold
//! oversampling, and assemble the report bundle.
//!
//! Every random stream is seeded with `derive_seed(master, stage, index)`:
//! `subsample/0`, `folds/0`, `adasyn/<fold>`, `model/<fold>`, and for
//! whole-dataset training `final-adasyn/0`, `final-model/0`.

mod config;
mod output;

pub use config::{AdasynSettings, EmbeddingSettings, EvalSettings, PipelineConfig, Provider};
pub use output::write_bundle;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, Axis};
use serde::Serialize;

use crate::corpus::{
    class_stats, parse_corpus, subsample_class, to_context_target, ClassStats,
    ContextTargetSample, RoleLabel, NUM_ROLES,
};
use crate::embedding::{fuse, hash_embed, tokenize_baseline, EmbeddingTable, FusionConfig};
use crate::error::{Error, Result};
use crate::eval::{
    calibrate_threshold, ecdf, evaluate, stratified_kfold, Labeled, MetricsReport, Prediction,
    ThresholdPolicy,
};
use crate::model::{FitInfo, Model, TrainingSet};
use crate::neural::stratified_tail_split;
use crate::oversample::adasyn;
use crate::seed::derive_seed;
use crate::Real;

const THRESHOLD_NOTE: &str = "thresholded metrics swap an incorrect below-threshold top-1 \
for the second choice using the true label; they measure near misses and are not a \
deployable decision rule";

/// Progress sink for human-readable status lines.
pub type Progress<'a> = &'a dyn Fn(&str);

pub fn silent(_: &str) {}

/// Samples after transformation and capping, with their fused features.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<ContextTargetSample>,
    /// Before the bystander-other cap.
    pub corpus_stats: ClassStats,
    pub sample_stats: ClassStats,
    /// Comment vectors the features were built from.
    pub table: EmbeddingTable,
    pub features: Array2<Real>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn truth(&self, idx: &[usize]) -> Vec<Labeled> {
        idx.iter()
            .map(|&i| Labeled::new(self.samples[i].sample_id.clone(), self.samples[i].label))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn token_count_stats(samples: &[ContextTargetSample]) -> Result<ClassStats> {
    class_stats(samples, tokenize_baseline)
}

/// Parses the corpus, builds directed samples and applies the cap.
pub fn load_samples(cfg: &PipelineConfig) -> Result<(Vec<ContextTargetSample>, ClassStats)> {
    let path = &cfg.dataset;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let pairs = parse_corpus(BufReader::new(file))?;
    if pairs.is_empty() {
        return Err(Error::Validation(format!("{}: corpus is empty", path.display())));
    }
    let all = to_context_target(&pairs);
    let before = token_count_stats(&all)?;
    let capped = subsample_class(
        &all,
        RoleLabel::BYSTANDER_OTHER,
        cfg.bystander_other_cap,
        cfg.cap_unit,
        derive_seed(cfg.seed, "subsample", 0),
    );
    Ok((capped, before))
}

/// Vectors for every target and context comment of `samples`.
pub fn embed_comments(
    cfg: &PipelineConfig,
    samples: &[ContextTargetSample],
    file_override: Option<&Path>,
) -> Result<EmbeddingTable> {
    let path = file_override.or(match cfg.embedding.provider {
        Provider::File => cfg.embedding.path.as_deref(),
        Provider::Baseline => None,
    });
    if let Some(path) = path {
        let source = EmbeddingTable::load(path)?;
        if let Some(d) = cfg.embedding.dim.filter(|_| file_override.is_none()) {
            if cfg.embedding.provider == Provider::File && d != source.dim() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: source.dim(),
                });
            }
        }
        let mut table = EmbeddingTable::new(source.dim(), source.metadata());
        for (id, _) in comment_texts(samples) {
            let v = source.get(&id).ok_or_else(|| {
                Error::Validation(format!("{}: no vector for comment `{id}`", path.display()))
            })?;
            table.insert(id, v)?;
        }
        return Ok(table);
    }
    let dim = cfg.embedding.dim.unwrap_or(256);
    let mut table = EmbeddingTable::new(
        dim,
        format!("provider=baseline dim={dim} hash_seed={}", cfg.embedding.hash_seed),
    );
    for (id, text) in comment_texts(samples) {
        let v = hash_embed::<f32>(text, dim, cfg.embedding.hash_seed)?;
        table.insert(id, v.as_slice())?;
    }
    Ok(table)
}

/// `(comment id, text)` for each distinct comment, in sample order.
fn comment_texts(samples: &[ContextTargetSample]) -> Vec<(String, &str)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in samples {
        for (id, text) in [
            (s.target_id().to_string(), s.target_text.as_str()),
            (s.context_id(), s.context_text.as_str()),
        ] {
            if seen.insert(id.clone()) {
                out.push((id, text));
            }
        }
    }
    out
}

pub fn featurize(
    samples: &[ContextTargetSample],
    table: &EmbeddingTable,
    fusion: FusionConfig,
) -> Result<Array2<Real>> {
    let mut x = Array2::zeros((samples.len(), table.dim()));
    for (i, s) in samples.iter().enumerate() {
        let missing = |id: &str| Error::Validation(format!("no vector for comment `{id}`"));
        let t = table.get(s.target_id()).ok_or_else(|| missing(s.target_id()))?;
        let c = table.get(&s.context_id()).ok_or_else(|| missing(&s.context_id()))?;
        let v = fuse(t, c, fusion)?;
        x.row_mut(i).assign(&ndarray::ArrayView1::from(v.as_slice()));
    }
    Ok(x)
}

/// Loads, transforms and embeds the configured dataset.
pub fn prepare(cfg: &PipelineConfig, embeddings: Option<&Path>) -> Result<Dataset> {
    let (samples, corpus_stats) = load_samples(cfg).map_err(|e| e.in_stage("ingest"))?;
    let sample_stats = token_count_stats(&samples).map_err(|e| e.in_stage("transform"))?;
    let table = embed_comments(cfg, &samples, embeddings).map_err(|e| e.in_stage("embed"))?;
    let features = featurize(&samples, &table, cfg.fusion()).map_err(|e| e.in_stage("embed"))?;
    let labels = samples.iter().map(|s| s.label.index()).collect();
    Ok(Dataset {
        samples,
        corpus_stats,
        sample_stats,
        table,
        features,
        labels,
    })
}

/// One synthetic training row, traced back to dataset rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticOrigin {
    pub label: RoleLabel,
    pub seed_id: String,
    pub neighbor_id: String,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub real_rows: usize,
    pub validation_rows: usize,
    pub counts_before: [usize; NUM_ROLES],
    pub counts_after: [usize; NUM_ROLES],
    #[serde(skip)]
    pub synthetic: Vec<SyntheticOrigin>,
    pub fit: FitInfo,
}

fn class_counts(labels: &[usize]) -> [usize; NUM_ROLES] {
    let mut c = [0; NUM_ROLES];
    for &l in labels {
        c[l] += 1;
    }
    c
}

/// Fits the configured model on dataset rows `rows`: holds out a
/// validation tail for dense heads, then oversamples what remains.
pub fn fit_rows(
    cfg: &PipelineConfig,
    data: &Dataset,
    rows: &[usize],
    adasyn_seed: u64,
    model_seed: u64,
) -> Result<(Model<Real>, TrainingSummary)> {
    let (fit_rows, val_rows): (Vec<usize>, Vec<usize>) = if cfg.model.needs_validation_split() {
        let local: Vec<usize> = rows.iter().map(|&i| data.labels[i]).collect();
        let (tr, va) = stratified_tail_split(&local, cfg.model.validation_fraction());
        (tr.iter().map(|&i| rows[i]).collect(), va.iter().map(|&i| rows[i]).collect())
    } else {
        (rows.to_vec(), Vec::new())
    };
    let x = data.features.select(Axis(0), &fit_rows);
    let y: Vec<usize> = fit_rows.iter().map(|&i| data.labels[i]).collect();
    let counts_before = class_counts(&y);

    let (x, y, synthetic) = if cfg.adasyn.enabled {
        let over = adasyn(x.view(), &y, &cfg.adasyn.with_seed(adasyn_seed))
            .map_err(|e| e.in_stage("oversample"))?;
        let origins = over
            .synthetic
            .provenance
            .iter()
            .zip(&over.synthetic.labels)
            .map(|(p, &l)| SyntheticOrigin {
                label: RoleLabel::ALL[l],
                seed_id: data.samples[fit_rows[p.seed_index]].sample_id.clone(),
                neighbor_id: data.samples[fit_rows[p.neighbor_index]].sample_id.clone(),
                u: p.u,
            })
            .collect();
        (over.features, over.labels, origins)
    } else {
        (x, y, Vec::new())
    };

    let val_x = data.features.select(Axis(0), &val_rows);
    let val_y: Vec<usize> = val_rows.iter().map(|&i| data.labels[i]).collect();
    let set = TrainingSet {
        x: x.view(),
        y: &y,
        val_x: val_x.view(),
        val_y: &val_y,
    };
    let (model, fit) = Model::fit(&cfg.model.with_seed(model_seed), &set, NUM_ROLES)
        .map_err(|e| e.in_stage("train"))?;
    Ok((
        model,
        TrainingSummary {
            real_rows: fit_rows.len(),
            validation_rows: val_rows.len(),
            counts_before,
            counts_after: class_counts(&y),
            synthetic,
            fit,
        },
    ))
}

pub fn predict_rows(model: &Model<Real>, data: &Dataset, rows: &[usize]) -> Result<Vec<Prediction>> {
    let x = data.features.select(Axis(0), rows);
    let probs = model.predict_proba(x.view())?;
    rows.iter()
        .zip(probs.rows())
        .map(|(&i, p)| Prediction::from_row(data.samples[i].sample_id.clone(), &p.to_vec()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_rows: usize,
    pub training: TrainingSummary,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldMean {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub top2_f1: f64,
    pub thresholded_accuracy: f64,
    pub thresholded_f1: f64,
    pub rejection_rate: f64,
}

impl FoldMean {
    fn of(folds: &[FoldResult]) -> Self {
        let mean = |f: fn(&MetricsReport) -> f64| {
            folds.iter().map(|r| f(&r.metrics)).sum::<f64>() / folds.len() as f64
        };
        FoldMean {
            accuracy: mean(|m| m.top1.accuracy),
            precision: mean(|m| m.top1.precision),
            recall: mean(|m| m.top1.recall),
            f1: mean(|m| m.top1.f1),
            top2_f1: mean(|m| m.top2.f1),
            thresholded_accuracy: mean(|m| m.thresholded.accuracy),
            thresholded_f1: mean(|m| m.thresholded.f1),
            rejection_rate: mean(|m| m.rejection_rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub class: RoleLabel,
    pub percentile: f64,
    pub tau: f64,
}

/// Everything in `metrics.json`. Contains no wall-clock values, so equal
/// (config, seed) give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub model: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub n_samples: usize,
    pub corpus_stats: ClassStats,
    pub sample_stats: ClassStats,
    pub threshold: ThresholdSummary,
    pub pooled: MetricsReport,
    pub fold_mean: FoldMean,
    pub folds: Vec<FoldResult>,
    pub warnings: Vec<String>,
    pub notes: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub scalar_bits: u32,
    pub seed: u64,
    pub config: PipelineConfig,
    pub derived_seeds: BTreeMap<String, u64>,
    pub timings_seconds: BTreeMap<String, f64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub metrics: RunMetrics,
    pub manifest: Manifest,
    /// Pooled test predictions with their fold, in output order.
    pub predictions: Vec<(usize, Prediction, RoleLabel)>,
    pub target_lengths: Vec<f64>,
}

fn config_echo(cfg: &PipelineConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("output");
    }
    v
}

struct Timer(BTreeMap<String, f64>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(BTreeMap::new(), Instant::now())
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        *self.0.entry(stage.to_string()).or_default() += (now - self.1).as_secs_f64();
        self.1 = now;
    }
}

/// Stratified cross-validation of the configured model.
pub fn run(cfg: &PipelineConfig, progress: Progress<'_>) -> Result<RunReport> {
    cfg.validate()?;
    let mut timer = Timer::new();
    let mut seeds = BTreeMap::new();
    seeds.insert("subsample/0".to_string(), derive_seed(cfg.seed, "subsample", 0));

    let data = prepare(cfg, None)?;
    timer.lap("prepare");
    progress(&format!(
        "{} samples, {} features per sample",
        data.len(),
        data.features.ncols()
    ));

    let fold_seed = derive_seed(cfg.seed, "folds", 0);
    seeds.insert("folds/0".into(), fold_seed);
    let folds = stratified_kfold(&data.labels, cfg.eval.folds, fold_seed).map_err(|e| e.in_stage("folds"))?;

    let mut pooled_preds = Vec::new();
    let mut pooled_rows = Vec::new();
    let mut fold_of = Vec::new();
    let mut fold_parts = Vec::new();
    for (f, test) in folds.folds.iter().enumerate() {
        if test.is_empty() {
            continue;
        }
        let train = folds.train_indices(f);
        let a_seed = derive_seed(cfg.seed, "adasyn", f as u64);
        let m_seed = derive_seed(cfg.seed, "model", f as u64);
        seeds.insert(format!("adasyn/{f}"), a_seed);
        seeds.insert(format!("model/{f}"), m_seed);
        let (model, training) = fit_rows(cfg, &data, &train, a_seed, m_seed)
            .map_err(|e| Error::Stage { stage: "fold", source: Box::new(e) })?;
        let preds = predict_rows(&model, &data, test).map_err(|e| e.in_stage("evaluate"))?;
        progress(&format!(
            "fold {}/{}: trained on {} rows (+{} synthetic), tested on {}",
            f + 1,
            folds.folds.len(),
            training.real_rows,
            training.synthetic.len(),
            test.len()
        ));
        pooled_preds.extend(preds.iter().cloned());
        pooled_rows.extend(test.iter().copied());
        fold_of.extend(std::iter::repeat_n(f, test.len()));
        fold_parts.push((f, test.clone(), preds, training));
    }
    timer.lap("cross-validation");

    let pooled_truth = data.truth(&pooled_rows);
    let policy: ThresholdPolicy = cfg.eval.policy();
    let tau = calibrate_threshold(&pooled_preds, &pooled_truth, &policy).map_err(|e| e.in_stage("evaluate"))?;
    let pooled = evaluate(&pooled_preds, &pooled_truth, tau)?;
    let mut fold_results = Vec::new();
    for (f, test, preds, training) in fold_parts {
        let metrics = evaluate(&preds, &data.truth(&test), tau)?;
        fold_results.push(FoldResult {
            fold: f,
            test_rows: test.len(),
            training,
            metrics,
        });
    }
    timer.lap("evaluate");
    progress(&format!(
        "pooled weighted F1 {:.4}, top-2 F1 {:.4}, thresholded F1 {:.4} at tau {:.4}",
        pooled.top1.f1, pooled.top2.f1, pooled.thresholded.f1, tau
    ));

    let metrics = RunMetrics {
        model: cfg.model.kind(),
        seed: cfg.seed,
        config: config_echo(cfg),
        n_samples: data.len(),
        corpus_stats: data.corpus_stats.clone(),
        sample_stats: data.sample_stats.clone(),
        threshold: ThresholdSummary {
            class: policy.class,
            percentile: policy.percentile,
            tau,
        },
        pooled,
        fold_mean: FoldMean::of(&fold_results),
        folds: fold_results,
        warnings: folds.warnings.clone(),
        notes: vec![THRESHOLD_NOTE],
    };
    let predictions = pooled_preds
        .into_iter()
        .zip(pooled_truth)
        .zip(fold_of)
        .map(|((p, t), f)| (f, p, t.label))
        .collect();
    let target_lengths = data
        .samples
        .iter()
        .map(|s| tokenize_baseline(&s.target_text).len() as f64)
        .collect();
    let manifest = Manifest {
        tool: "rolesense",
        version: env!("CARGO_PKG_VERSION"),
        scalar_bits: <Real as crate::Scalar>::BITS,
        seed: cfg.seed,
        config: cfg.clone(),
        derived_seeds: seeds,
        timings_seconds: timer.0,
        files: Vec::new(),
    };
    Ok(RunReport {
        metrics,
        manifest,
        predictions,
        target_lengths,
    })
}

fn ecdf_csv(values: &[f64]) -> Result<String> {
    let mut out = String::from("value,fraction\n");
    for (v, f) in ecdf(values)? {
        writeln!(out, "{v},{f}").expect("string write");
    }
    Ok(out)
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

pub fn predictions_csv<'a>(rows: impl IntoIterator<Item = (Option<usize>, &'a Prediction, RoleLabel)>) -> String {
    let mut out = String::from("sample_id,fold,label,top1,confidence");
    for r in RoleLabel::ALL {
        write!(out, ",p_{}", r.name()).expect("string write");
    }
    out.push('\n');
    for (fold, p, label) in rows {
        let fold = fold.map(|f| f.to_string()).unwrap_or_default();
        write!(out, "{},{fold},{},{},{}", p.sample_id, label.index(), p.top1.index(), p.top1_confidence)
            .expect("string write");
        for v in p.probs {
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn synthetic_csv(origins: &[SyntheticOrigin]) -> String {
    let mut out = String::from("label,seed_id,neighbor_id,u\n");
    for o in origins {
        writeln!(out, "{},{},{},{}", o.label.index(), o.seed_id, o.neighbor_id, o.u).expect("string write");
    }
    out
}

impl RunReport {
    /// File name and contents of every output, `metrics.json` first and
    /// `manifest.json` last.
    pub fn files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut files = vec![("metrics.json".to_string(), json_bytes(&self.metrics))];
        files.push(("confusion_pooled.csv".into(), self.metrics.pooled.confusion.to_csv().into_bytes()));
        for f in &self.metrics.folds {
            files.push((
                format!("confusion_fold_{:02}.csv", f.fold),
                f.metrics.confusion.to_csv().into_bytes(),
            ));
            files.push((
                format!("synthetic_fold_{:02}.csv", f.fold),
                synthetic_csv(&f.training.synthetic).into_bytes(),
            ));
        }
        let confidences: Vec<f64> = self.predictions.iter().map(|(_, p, _)| p.top1_confidence).collect();
        files.push(("ecdf_confidence.csv".into(), ecdf_csv(&confidences)?.into_bytes()));
        files.push(("ecdf_length.csv".into(), ecdf_csv(&self.target_lengths)?.into_bytes()));
        files.push((
            "predictions.csv".into(),
            predictions_csv(self.predictions.iter().map(|(f, p, l)| (Some(*f), p, *l))).into_bytes(),
        ));
        let mut manifest = self.manifest.clone();
        manifest.files = files.iter().map(|(n, _)| n.clone()).collect();
        manifest.files.push("manifest.json".into());
        files.push(("manifest.json".into(), json_bytes(&manifest)));
        Ok(files)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_bundle(dir, &self.files()?)
    }
}

/// Metrics of `model` over every row of `data`, with the threshold
/// calibrated on those same rows.
pub fn evaluate_model(
    model: &Model<Real>,
    data: &Dataset,
    policy: &ThresholdPolicy,
) -> Result<(Vec<Prediction>, MetricsReport)> {
    let rows: Vec<usize> = (0..data.len()).collect();
    let preds = predict_rows(model, data, &rows)?;
    let truth = data.truth(&rows);
    let tau = calibrate_threshold(&preds, &truth, policy)?;
    let report = evaluate(&preds, &truth, tau)?;
    Ok((preds, report))
}

/// Model fitted on the whole dataset, plus its in-sample metrics.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model<Real>,
    pub training: TrainingSummary,
    pub data: Dataset,
    pub in_sample: MetricsReport,
}

pub fn train_full(cfg: &PipelineConfig, progress: Progress<'_>) -> Result<TrainedModel> {
    cfg.validate()?;
    let data = prepare(cfg, None)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let (model, training) = fit_rows(
        cfg,
        &data,
        &rows,
        derive_seed(cfg.seed, "final-adasyn", 0),
        derive_seed(cfg.seed, "final-model", 0),
    )?;
    progress(&format!(
        "trained {} on {} rows (+{} synthetic)",
        cfg.model.kind(),
        training.real_rows,
        training.synthetic.len()
    ));
    let (_, in_sample) = evaluate_model(&model, &data, &cfg.eval.policy()).map_err(|e| e.in_stage("evaluate"))?;
    Ok(TrainedModel {
        model,
        training,
        data,
        in_sample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OversamplePreview {
    pub counts_before: [usize; NUM_ROLES],
    pub counts_after: [usize; NUM_ROLES],
    #[serde(skip)]
    pub synthetic: Vec<SyntheticOrigin>,
}

/// ADASYN over the whole capped dataset, for auditing what it generates.
pub fn oversample_preview(cfg: &PipelineConfig) -> Result<OversamplePreview> {
    cfg.validate()?;
    let data = prepare(cfg, None)?;
    let over = adasyn(
        data.features.view(),
        &data.labels,
        &cfg.adasyn.with_seed(derive_seed(cfg.seed, "preview-adasyn", 0)),
    )
    .map_err(|e| e.in_stage("oversample"))?;
    let synthetic = over
        .synthetic
        .provenance
        .iter()
        .zip(&over.synthetic.labels)
        .map(|(p, &l)| SyntheticOrigin {
            label: RoleLabel::ALL[l],
            seed_id: data.samples[p.seed_index].sample_id.clone(),
            neighbor_id: data.samples[p.neighbor_index].sample_id.clone(),
            u: p.u,
        })
        .collect();
    Ok(OversamplePreview {
        counts_before: class_counts(&data.labels),
        counts_after: class_counts(&over.labels),
        synthetic,
    })
}

pub fn json_file<T: Serialize>(value: &T) -> Vec<u8> {
    json_bytes(value)
}
