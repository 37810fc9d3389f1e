//! Seed summaries, permutation importance, per-topic robustness,
//! feature correlations and the CSV report writers.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::DialogueFeatureMatrix;
use crate::corpus::FoldAssignment;
use crate::metrics::{mean_std, spearman, Metric, MetricError};
use crate::models::{
    fit_fold, CvResult, FitSettings, FittedLinearModel, FoldDesign, Hyperparams, ModelError,
};

/// Pseudo-column naming the prediction target in correlation requests.
pub const TARGET_COLUMN: &str = "target";

/// Pairing unit of the significance tests.
pub const FOLD_SEED_PAIRING: &str = "fold x seed";

pub const DEFAULT_IMPORTANCE_REPEATS: usize = 10;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("row {0} has no topic")]
    MissingTopic(usize),
    #[error("{what}: expected {expected} values, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("fold designs disagree on columns; importance needs a fixed column set")]
    ColumnsDiffer,
    #[error("no runs to summarize")]
    NoRuns,
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), EvaluationError> {
    if expected == got {
        Ok(())
    } else {
        Err(EvaluationError::Length {
            what,
            expected,
            got,
        })
    }
}

/// A metric over every (seed, fold) held-out score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    /// Scores in seed-major, fold-minor order; the pairing order for
    /// significance tests.
    pub scores: Vec<f64>,
}

impl MetricSummary {
    pub fn formatted(&self) -> String {
        format_mean_std(self.mean, self.std)
    }
}

/// `metric` on each fold's held-out rows; NaN where undefined.
pub fn held_out_fold_scores(
    preds: &[f64],
    folds: &[usize],
    k: usize,
    metric: Metric,
    y: &[f64],
) -> Vec<f64> {
    (0..k)
        .map(|f| {
            let rows: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == f).collect();
            let p: Vec<f64> = rows.iter().map(|&i| preds[i]).collect();
            let t: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            metric.compute(&p, &t).map(|v| v.value).unwrap_or(f64::NAN)
        })
        .collect()
}

pub fn summarize_scores(metric: Metric, scores: Vec<f64>) -> MetricSummary {
    let (mean, std) = mean_std(&scores);
    MetricSummary {
        metric,
        mean,
        std,
        scores,
    }
}

/// Summarizes per-seed cross-validation runs of one model.
pub fn summarize_runs(
    runs: &[CvResult],
    metric: Metric,
    y: &[f64],
) -> Result<MetricSummary, EvaluationError> {
    if runs.is_empty() {
        return Err(EvaluationError::NoRuns);
    }
    let mut scores = Vec::new();
    for run in runs {
        check_len("targets", run.oof_predictions.len(), y.len())?;
        scores.extend(held_out_fold_scores(
            &run.oof_predictions,
            &run.folds,
            run.k,
            metric,
            y,
        ));
    }
    Ok(summarize_scores(metric, scores))
}

/// `"0.123 (0.045)"`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.3} ({std:.3})")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceData {
    /// Shuffle pooled held-out rows, each predicted by its own fold's model.
    HeldOut,
    /// Shuffle the training rows of a model fitted on all rows.
    Training,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceOptions {
    pub repeats: usize,
    pub seed: u64,
    pub data: ImportanceData,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        ImportanceOptions {
            repeats: DEFAULT_IMPORTANCE_REPEATS,
            seed: 0,
            data: ImportanceData::HeldOut,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub column: String,
    pub coefficient: f64,
    pub fi_percent: f64,
    /// Metric loss from shuffling, before flooring at 0. Oriented so that
    /// positive means the column helps, for both score and error metrics.
    pub raw_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub metric: Metric,
    pub baseline: f64,
    pub entries: Vec<ImportanceEntry>,
    /// No column had a positive drop; every `fi_percent` is 0.
    pub degenerate: bool,
    pub repeats: usize,
    pub seed: u64,
    pub data: ImportanceData,
}

impl ImportanceReport {
    /// Entries by descending `fi_percent`, column name among equals.
    pub fn ranked(&self) -> Vec<&ImportanceEntry> {
        let mut out: Vec<&ImportanceEntry> = self.entries.iter().collect();
        out.sort_by(|a, b| {
            b.fi_percent
                .total_cmp(&a.fi_percent)
                .then(a.column.cmp(&b.column))
        });
        out
    }
}

/// Row order used for shuffle `repeat` of `column`. Each (column, repeat)
/// has its own ChaCha stream, so results do not depend on scheduling.
pub fn shuffle_permutation(seed: u64, column: usize, repeat: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((column as u64) << 32) | repeat as u64);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Rows scored by per-group models: row `i` is predicted by
/// `models[group[i]]`.
struct PooledRows<'a> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    group: &'a [usize],
    models: &'a [FittedLinearModel],
}

impl PooledRows<'_> {
    fn score(&self, x: &Array2<f64>, metric: Metric) -> Result<f64, EvaluationError> {
        let mut preds = vec![0.0; x.nrows()];
        for (g, model) in self.models.iter().enumerate() {
            let rows: Vec<usize> = (0..x.nrows()).filter(|&i| self.group[i] == g).collect();
            if rows.is_empty() {
                continue;
            }
            let sub = x.select(Axis(0), &rows);
            for (&i, p) in rows.iter().zip(model.predict(sub.view())?) {
                preds[i] = p;
            }
        }
        Ok(metric.compute(&preds, self.y)?.value)
    }

    fn importance(
        &self,
        columns: &[String],
        coefficients: &[f64],
        metric: Metric,
        options: ImportanceOptions,
    ) -> Result<ImportanceReport, EvaluationError> {
        if options.repeats == 0 {
            return Err(EvaluationError::NoRepeats);
        }
        let n = self.x.nrows();
        let baseline = self.score(self.x, metric)?;
        let drops: Vec<f64> = (0..self.x.ncols())
            .into_par_iter()
            .map(|j| {
                let original = self.x.column(j);
                let mut shuffled = self.x.clone();
                let mut total = 0.0;
                for r in 0..options.repeats {
                    let perm = shuffle_permutation(options.seed, j, r, n);
                    for (i, &p) in perm.iter().enumerate() {
                        shuffled[[i, j]] = original[p];
                    }
                    total += self.score(&shuffled, metric)?;
                }
                let mean = total / options.repeats as f64;
                Ok(if metric.higher_is_better() {
                    baseline - mean
                } else {
                    mean - baseline
                })
            })
            .collect::<Result<_, EvaluationError>>()?;
        Ok(normalize_importance(
            columns,
            coefficients,
            &drops,
            baseline,
            metric,
            options,
        ))
    }
}

fn normalize_importance(
    columns: &[String],
    coefficients: &[f64],
    drops: &[f64],
    baseline: f64,
    metric: Metric,
    options: ImportanceOptions,
) -> ImportanceReport {
    let floored: Vec<f64> = drops.iter().map(|d| d.max(0.0)).collect();
    let total: f64 = floored.iter().sum();
    let degenerate = total <= 0.0;
    let entries = columns
        .iter()
        .enumerate()
        .map(|(j, c)| ImportanceEntry {
            column: c.clone(),
            coefficient: coefficients[j],
            fi_percent: if degenerate {
                0.0
            } else {
                floored[j] / total * 100.0
            },
            raw_drop: drops[j],
        })
        .collect();
    ImportanceReport {
        metric,
        baseline,
        entries,
        degenerate,
        repeats: options.repeats,
        seed: options.seed,
        data: options.data,
    }
}

/// Permutation importance of one fitted model on `x`.
pub fn permutation_importance(
    model: &FittedLinearModel,
    x: &Array2<f64>,
    y: &[f64],
    metric: Metric,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, EvaluationError> {
    check_len("targets", x.nrows(), y.len())?;
    let group = vec![0; x.nrows()];
    let rows = PooledRows {
        x,
        y,
        group: &group,
        models: std::slice::from_ref(model),
    };
    let options = ImportanceOptions {
        repeats,
        seed,
        data: ImportanceData::Training,
    };
    rows.importance(&model.columns, &model.weights, metric, options)
}

/// Permutation importance for a design under cross-validation. The
/// reported coefficients come from a model fitted on all rows with `hp`.
/// Returns that model alongside the report.
pub fn cv_permutation_importance(
    design: &dyn FoldDesign,
    y: &[f64],
    settings: FitSettings,
    hp: Hyperparams,
    folds: &FoldAssignment,
    metric: Metric,
    options: ImportanceOptions,
) -> Result<(ImportanceReport, FittedLinearModel), EvaluationError> {
    check_len("targets", design.n_rows(), y.len())?;
    let all: Vec<usize> = (0..y.len()).collect();
    let (full, _, full_data) = fit_fold(design, y, settings, hp, &all, &[])?;
    let report = match options.data {
        ImportanceData::Training => {
            let group = vec![0; y.len()];
            PooledRows {
                x: &full_data.x_train,
                y,
                group: &group,
                models: std::slice::from_ref(&full),
            }
            .importance(&full.columns, &full.weights, metric, options)?
        }
        ImportanceData::HeldOut => {
            let fits = (0..folds.k)
                .into_par_iter()
                .map(|f| {
                    fit_fold(
                        design,
                        y,
                        settings,
                        hp,
                        &folds.train_rows(f),
                        &folds.test_rows(f),
                    )
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            let d = full.columns.len();
            let mut x = Array2::zeros((0, d));
            let mut pooled_y = Vec::new();
            let mut group = Vec::new();
            let mut models = Vec::new();
            for (f, (model, _, data)) in fits.into_iter().enumerate() {
                if data.columns != full.columns {
                    return Err(EvaluationError::ColumnsDiffer);
                }
                x.append(Axis(0), data.x_test.view())
                    .expect("column counts checked");
                for i in folds.test_rows(f) {
                    pooled_y.push(y[i]);
                    group.push(f);
                }
                models.push(model);
            }
            PooledRows {
                x: &x,
                y: &pooled_y,
                group: &group,
                models: &models,
            }
            .importance(&full.columns, &full.weights, metric, options)?
        }
    };
    Ok((report, full))
}

/// One metric on one topic's held-out predictions. `value` is `None` when
/// the metric is undefined on the subset; `note` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMetric {
    pub topic: String,
    pub metric: Metric,
    pub value: Option<f64>,
    pub n: usize,
    pub note: Option<String>,
}

/// Metrics within each topic subset, topics in sorted order.
pub fn topic_robustness(
    preds: &[f64],
    targets: &[f64],
    topics: &[Option<String>],
    metrics: &[Metric],
) -> Result<Vec<TopicMetric>, EvaluationError> {
    check_len("predictions", targets.len(), preds.len())?;
    check_len("topics", targets.len(), topics.len())?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in topics.iter().enumerate() {
        let t = t.as_deref().ok_or(EvaluationError::MissingTopic(i))?;
        groups.entry(t).or_default().push(i);
    }
    let mut out = Vec::new();
    for (topic, rows) in groups {
        let p: Vec<f64> = rows.iter().map(|&i| preds[i]).collect();
        let y: Vec<f64> = rows.iter().map(|&i| targets[i]).collect();
        for &metric in metrics {
            let (value, note) = match metric.compute(&p, &y) {
                Ok(v) => (Some(v.value), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(TopicMetric {
                topic: topic.to_string(),
                metric,
                value,
                n: rows.len(),
                note,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub name_a: String,
    pub name_b: String,
    /// `None` when either column is constant over the shared rows.
    pub spearman: Option<f64>,
    /// Rows where both values are present.
    pub n: usize,
}

fn named_column(matrix: &DialogueFeatureMatrix, name: &str) -> Result<Vec<f64>, EvaluationError> {
    if name == TARGET_COLUMN {
        return Ok(matrix.targets.clone());
    }
    matrix
        .column(name)
        .map_err(|_| EvaluationError::UnknownColumn(name.to_string()))
}

/// Tie-aware Spearman correlation per requested pair of columns (or
/// [`TARGET_COLUMN`]), over rows where both values are present.
pub fn feature_correlations(
    matrix: &DialogueFeatureMatrix,
    pairs: &[(String, String)],
) -> Result<Vec<CorrelationEntry>, EvaluationError> {
    pairs
        .iter()
        .map(|(a, b)| {
            let xa = named_column(matrix, a)?;
            let xb = named_column(matrix, b)?;
            let (pa, pb): (Vec<f64>, Vec<f64>) = xa
                .iter()
                .zip(&xb)
                .filter(|(u, v)| u.is_finite() && v.is_finite())
                .map(|(u, v)| (*u, *v))
                .unzip();
            let spearman = spearman(&pa, &pb).ok().map(|v| v.value);
            Ok(CorrelationEntry {
                name_a: a.clone(),
                name_b: b.clone(),
                spearman,
                n: pa.len(),
            })
        })
        .collect()
}

/// Every feature column against the target.
pub fn target_correlations(
    matrix: &DialogueFeatureMatrix,
) -> Result<Vec<CorrelationEntry>, EvaluationError> {
    let pairs: Vec<(String, String)> = matrix
        .column_names
        .iter()
        .map(|c| (c.clone(), TARGET_COLUMN.to_string()))
        .collect();
    feature_correlations(matrix, &pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub dataset: String,
    /// A seed, or `all` for the aggregate over seeds.
    pub seed: String,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub formatted: String,
}

impl MetricsRow {
    pub fn new(model: &str, dataset: &str, seed: &str, summary: &MetricSummary) -> Self {
        MetricsRow {
            model: model.to_string(),
            dataset: dataset.to_string(),
            seed: seed.to_string(),
            metric: summary.metric,
            mean: summary.mean,
            std: summary.std,
            n: summary.scores.len(),
            formatted: summary.formatted(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub dataset: String,
    pub metric: Metric,
    pub model_a: String,
    pub model_b: String,
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: usize,
    pub mean_difference: f64,
    pub pairing: String,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRow {
    pub model: String,
    pub dataset: String,
    /// A seed, or `all` for the mean over seeds.
    pub seed: String,
    pub topic: String,
    pub metric: Metric,
    pub value: Option<f64>,
    pub n: usize,
    pub note: Option<String>,
}

/// One point of a plotted series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

/// Target (x) against held-out prediction (y), one series per topic.
pub fn score_vs_topic_points(
    preds: &[f64],
    targets: &[f64],
    topics: &[Option<String>],
) -> Vec<PlotPoint> {
    preds
        .iter()
        .zip(targets)
        .zip(topics)
        .map(|((&p, &t), topic)| PlotPoint {
            series: topic.clone().unwrap_or_default(),
            x: t,
            y: p,
        })
        .collect()
}

/// Writes `rows` as a headed CSV file.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), EvaluationError> {
    let file = std::fs::File::create(path).map_err(|source| EvaluationError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| EvaluationError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit_ridge, DenseDesign, ModelKind};
    use ndarray::Array2;
    use rand::Rng;

    fn planted(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
        let y: Vec<f64> = (0..n).map(|i| 3.0 * x[[i, 0]] + 1.0 * x[[i, 1]]).collect();
        (x, y)
    }

    #[test]
    fn fi_matches_replayed_permutations() {
        let (x, y) = planted(80, 1);
        let model = fit_ridge(x.view(), &y, 1e-6, true).unwrap();
        let report = permutation_importance(&model, &x, &y, Metric::Mae, 4, 9).unwrap();
        let base = Metric::Mae
            .compute(&model.predict(x.view()).unwrap(), &y)
            .unwrap()
            .value;
        let mut oracle = Vec::new();
        for j in 0..3 {
            let mut sum = 0.0;
            for r in 0..4 {
                let perm = shuffle_permutation(9, j, r, 80);
                let mut xs = x.clone();
                for i in 0..80 {
                    xs[[i, j]] = x[[perm[i], j]];
                }
                sum += Metric::Mae
                    .compute(&model.predict(xs.view()).unwrap(), &y)
                    .unwrap()
                    .value;
            }
            oracle.push(sum / 4.0 - base);
        }
        for (e, o) in report.entries.iter().zip(&oracle) {
            assert!((e.raw_drop - o).abs() < 1e-12);
        }
        let ranked: Vec<&str> = report.ranked().iter().map(|e| e.column.as_str()).collect();
        assert_eq!(ranked[..2], ["x0", "x1"]);
        let total: f64 = report.entries.iter().map(|e| e.fi_percent).sum();
        assert!((total - 100.0).abs() < 1e-6);
        assert!(report.entries[2].fi_percent < 1.0);
    }

    #[test]
    fn single_informative_column_takes_everything() {
        let (x, _) = planted(60, 2);
        let y: Vec<f64> = (0..60).map(|i| x[[i, 1]]).collect();
        let mut model = fit_ridge(x.view(), &y, 1e-6, true).unwrap();
        model.weights[0] = 0.0;
        model.weights[2] = 0.0;
        let report = permutation_importance(&model, &x, &y, Metric::SpearmanRs, 10, 3).unwrap();
        assert!((report.entries[1].fi_percent - 100.0).abs() < 1e-9);
        assert_eq!(report.entries[0].raw_drop, 0.0);
        let again = permutation_importance(&model, &x, &y, Metric::SpearmanRs, 10, 3).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn zero_drops_are_degenerate() {
        let (x, y) = planted(30, 4);
        let mut model = fit_ridge(x.view(), &y, 1.0, true).unwrap();
        model.weights = vec![0.0; 3];
        let y: Vec<f64> = y.iter().map(|v| v + 0.0).collect();
        let report = permutation_importance(&model, &x, &y, Metric::Mae, 3, 0).unwrap();
        assert!(report.degenerate);
        assert!(report.entries.iter().all(|e| e.fi_percent == 0.0));
    }

    #[test]
    fn held_out_importance_finds_planted_columns() {
        let (x, y) = planted(70, 5);
        let design = DenseDesign {
            columns: vec!["a".into(), "b".into(), "c".into()],
            x,
        };
        let ids: Vec<String> = (0..70).map(|i| i.to_string()).collect();
        let fold_of: Vec<usize> = (0..70).map(|i| i % 5).collect();
        let folds = FoldAssignment::from_folds(5, 0, ids, fold_of);
        let settings = FitSettings {
            kind: ModelKind::Ridge,
            standardize: true,
        };
        for data in [ImportanceData::HeldOut, ImportanceData::Training] {
            let options = ImportanceOptions {
                repeats: 5,
                seed: 1,
                data,
            };
            let (report, _) = cv_permutation_importance(
                &design,
                &y,
                settings,
                Hyperparams::Alpha(0.01),
                &folds,
                Metric::Mae,
                options,
            )
            .unwrap();
            assert_eq!(report.ranked()[0].column, "a");
            assert_eq!(report.ranked()[1].column, "b");
        }
    }

    #[test]
    fn topic_means_have_no_within_topic_signal() {
        let topics: Vec<Option<String>> = (0..30).map(|i| Some(format!("t{}", i % 3))).collect();
        let targets: Vec<f64> = (0..30)
            .map(|i| (i % 3) as f64 * 2.0 + ((i * 7) % 5) as f64 * 0.1)
            .collect();
        let preds: Vec<f64> = (0..30).map(|i| (i % 3) as f64 * 2.0 + 0.2).collect();
        assert!(spearman(&preds, &targets).unwrap().value > 0.8);
        let cells = topic_robustness(
            &preds,
            &targets,
            &topics,
            &[Metric::SpearmanRs, Metric::Mae],
        )
        .unwrap();
        for c in &cells {
            match c.metric {
                Metric::SpearmanRs => {
                    assert_eq!(c.value, None);
                    assert!(c.note.is_some());
                }
                _ => {
                    let rows: Vec<usize> = (0..30)
                        .filter(|i| topics[*i].as_deref() == Some(&c.topic))
                        .collect();
                    let direct = rows
                        .iter()
                        .map(|&i| (preds[i] - targets[i]).abs())
                        .sum::<f64>()
                        / rows.len() as f64;
                    assert!((c.value.unwrap() - direct).abs() < 1e-12);
                }
            }
        }
        assert!(matches!(
            topic_robustness(&preds, &targets, &vec![None; 30], &[Metric::Mae]),
            Err(EvaluationError::MissingTopic(0))
        ));
    }

    #[test]
    fn single_topic_equals_aggregate() {
        let targets = [1.0, 3.0, 2.0, 5.0];
        let preds = [1.5, 2.0, 2.5, 4.0];
        let topics = vec![Some("x".to_string()); 4];
        let cells = topic_robustness(&preds, &targets, &topics, &[Metric::SpearmanRs]).unwrap();
        assert_eq!(
            cells[0].value,
            Some(spearman(&preds, &targets).unwrap().value)
        );
    }

    #[test]
    fn summary_formats() {
        assert_eq!(format_mean_std(0.41234, 0.0456), "0.412 (0.046)");
    }
}
