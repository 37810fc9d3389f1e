use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{fit_model, FittedLinearModel, Hyperparams, ModelKind};
use super::ModelError;
use crate::aggregate::{DialogueFeatureMatrix, ImputationRecord};
use crate::corpus::FoldAssignment;
use crate::metrics::Metric;

/// Train and test inputs for one fold, built from training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData {
    pub columns: Vec<String>,
    pub x_train: Array2<f64>,
    pub x_test: Array2<f64>,
    pub imputation_log: Vec<ImputationRecord>,
}

/// Source of per-fold design matrices. Anything fitted on data (imputation
/// means, vocabularies) must use `train_rows` only.
pub trait FoldDesign: Sync {
    fn n_rows(&self) -> usize;
    fn build(&self, train_rows: &[usize], test_rows: &[usize]) -> Result<FoldData, ModelError>;
}

/// Aggregated feature matrix with per-fold mean imputation.
pub struct MatrixDesign<'a>(pub &'a DialogueFeatureMatrix);

impl FoldDesign for MatrixDesign<'_> {
    fn n_rows(&self) -> usize {
        self.0.n_rows()
    }

    fn build(&self, train_rows: &[usize], test_rows: &[usize]) -> Result<FoldData, ModelError> {
        let (x, log) = self.0.impute(train_rows);
        Ok(FoldData {
            columns: self.0.column_names.clone(),
            x_train: x.select(Axis(0), train_rows),
            x_test: x.select(Axis(0), test_rows),
            imputation_log: log,
        })
    }
}

/// A fixed dense matrix with no fitted preprocessing.
pub struct DenseDesign {
    pub columns: Vec<String>,
    pub x: Array2<f64>,
}

impl FoldDesign for DenseDesign {
    fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    fn build(&self, train_rows: &[usize], test_rows: &[usize]) -> Result<FoldData, ModelError> {
        Ok(FoldData {
            columns: self.columns.clone(),
            x_train: self.x.select(Axis(0), train_rows),
            x_test: self.x.select(Axis(0), test_rows),
            imputation_log: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitSettings {
    pub kind: ModelKind,
    /// Standardize columns (false: center only).
    pub standardize: bool,
}

/// Fits on the fold's training rows and predicts its test rows. Targets of
/// test rows are never read.
pub fn fit_fold(
    design: &dyn FoldDesign,
    y: &[f64],
    settings: FitSettings,
    hp: Hyperparams,
    train_rows: &[usize],
    test_rows: &[usize],
) -> Result<(FittedLinearModel, Vec<f64>, FoldData), ModelError> {
    let data = design.build(train_rows, test_rows)?;
    let y_train: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
    let (model, preds) = fit_on(&data, &y_train, settings, hp)?;
    Ok((model, preds, data))
}

fn fit_on(
    data: &FoldData,
    y_train: &[f64],
    settings: FitSettings,
    hp: Hyperparams,
) -> Result<(FittedLinearModel, Vec<f64>), ModelError> {
    let model = fit_model(
        settings.kind,
        data.x_train.view(),
        y_train,
        hp,
        settings.standardize,
    )?
    .with_columns(data.columns.clone())?;
    let preds = model.predict(data.x_test.view())?;
    Ok((model, preds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub hyperparams: Hyperparams,
    pub fold_scores: Vec<f64>,
    /// NaN when any fold could not be scored.
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub seed: u64,
    pub k: usize,
    pub selection_metric: Metric,
    pub candidates: Vec<Candidate>,
    pub best: Hyperparams,
    /// Selection-metric score of the winner on each held-out fold.
    pub fold_scores: Vec<f64>,
    /// Winner's held-out prediction for every row.
    pub oof_predictions: Vec<f64>,
    /// Fold of every row.
    pub folds: Vec<usize>,
    pub imputed_cells: usize,
}

impl CvResult {
    /// `metric` on each held-out fold of the winning model; NaN where undefined.
    pub fn fold_metric(&self, metric: Metric, y: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|f| {
                let rows: Vec<usize> = (0..self.folds.len())
                    .filter(|&i| self.folds[i] == f)
                    .collect();
                let p: Vec<f64> = rows.iter().map(|&i| self.oof_predictions[i]).collect();
                let t: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
                metric.compute(&p, &t).map(|v| v.value).unwrap_or(f64::NAN)
            })
            .collect()
    }

    /// `metric` over all pooled held-out predictions.
    pub fn pooled_metric(&self, metric: Metric, y: &[f64]) -> Result<f64, ModelError> {
        Ok(metric.compute(&self.oof_predictions, y)?.value)
    }
}

/// Removes repeated grid values, keeping first occurrences.
fn dedup(grid: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &g in grid {
        if !out.iter().any(|o| o.to_bits() == g.to_bits()) {
            out.push(g);
        }
    }
    out
}

/// Whether `a` beats the incumbent `b`: better mean score, or an equal
/// score with stronger regularization. NaN never wins.
fn better(a: &Candidate, b: &Candidate, higher_is_better: bool) -> bool {
    if a.mean_score.is_nan() {
        return false;
    }
    if b.mean_score.is_nan() {
        return true;
    }
    if a.mean_score == b.mean_score {
        return a.hyperparams.strength() > b.hyperparams.strength();
    }
    (a.mean_score > b.mean_score) == higher_is_better
}

/// Flat k-fold grid search: every grid value is scored by its mean held-out
/// metric over the same folds, and the winner's fold scores and
/// predictions are reported as they are.
pub fn grid_search_flat_cv(
    design: &dyn FoldDesign,
    y: &[f64],
    settings: FitSettings,
    grid: &[f64],
    folds: &FoldAssignment,
    metric: Metric,
) -> Result<CvResult, ModelError> {
    if design.n_rows() != y.len() || folds.n_rows() != y.len() {
        return Err(ModelError::ShapeMismatch {
            rows: design.n_rows(),
            targets: y.len(),
        });
    }
    let values: Vec<Hyperparams> = if settings.kind == ModelKind::Constant {
        vec![Hyperparams::None]
    } else {
        if grid.is_empty() {
            return Err(ModelError::EmptyGrid);
        }
        dedup(grid)
            .into_iter()
            .map(|v| Hyperparams::for_kind(settings.kind, v))
            .collect()
    };
    let k = folds.k;
    let fold_data: Vec<(Vec<usize>, Vec<usize>, FoldData)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train = folds.train_rows(f);
            let test = folds.test_rows(f);
            let data = design.build(&train, &test)?;
            Ok((train, test, data))
        })
        .collect::<Result<_, ModelError>>()?;

    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|g| (0..k).map(move |f| (g, f)))
        .collect();
    let fits: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, _, data) = &fold_data[f];
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let (_, preds) = fit_on(data, &y_train, settings, values[g])?;
            Ok(preds)
        })
        .collect::<Result<_, ModelError>>()?;

    let mut candidates = Vec::new();
    for (g, hp) in values.iter().enumerate() {
        let fold_scores: Vec<f64> = (0..k)
            .map(|f| {
                let (_, test, _) = &fold_data[f];
                let t: Vec<f64> = test.iter().map(|&i| y[i]).collect();
                metric
                    .compute(&fits[g * k + f], &t)
                    .map(|v| v.value)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        let mean_score = fold_scores.iter().sum::<f64>() / k as f64;
        candidates.push(Candidate {
            hyperparams: *hp,
            fold_scores,
            mean_score,
        });
    }
    let mut best = 0;
    for g in 1..candidates.len() {
        if better(&candidates[g], &candidates[best], metric.higher_is_better()) {
            best = g;
        }
    }

    let mut oof = vec![f64::NAN; y.len()];
    for f in 0..k {
        let (_, test, _) = &fold_data[f];
        for (&i, &p) in test.iter().zip(&fits[best * k + f]) {
            oof[i] = p;
        }
    }
    Ok(CvResult {
        seed: folds.seed,
        k,
        selection_metric: metric,
        best: candidates[best].hyperparams,
        fold_scores: candidates[best].fold_scores.clone(),
        candidates,
        oof_predictions: oof,
        folds: folds.folds().to_vec(),
        imputed_cells: fold_data
            .iter()
            .map(|(_, _, d)| d.imputation_log.len())
            .sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> (DenseDesign, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y = (0..n)
            .map(|i| 2.0 * x[[i, 0]] - x[[i, 1]] + rng.random_range(-0.3..0.3))
            .collect();
        (
            DenseDesign {
                columns: vec!["a".into(), "b".into(), "c".into()],
                x,
            },
            y,
        )
    }

    fn folds(n: usize, k: usize) -> FoldAssignment {
        FoldAssignment::from_folds(
            k,
            0,
            (0..n).map(|i| i.to_string()).collect(),
            (0..n).map(|i| i % k).collect(),
        )
    }

    const RIDGE: FitSettings = FitSettings {
        kind: ModelKind::Ridge,
        standardize: true,
    };

    #[test]
    fn single_value_grid_equals_plain_cv() {
        let (design, y) = data(42, 1);
        let f = folds(42, 7);
        let r = grid_search_flat_cv(&design, &y, RIDGE, &[1.0], &f, Metric::SpearmanRs).unwrap();
        assert_eq!(r.best, Hyperparams::Alpha(1.0));
        assert_eq!(r.fold_scores.len(), 7);
        for fold in 0..7 {
            let (_, preds, _) = fit_fold(
                &design,
                &y,
                RIDGE,
                Hyperparams::Alpha(1.0),
                &f.train_rows(fold),
                &f.test_rows(fold),
            )
            .unwrap();
            let t: Vec<f64> = f.test_rows(fold).iter().map(|&i| y[i]).collect();
            let s = Metric::SpearmanRs.compute(&preds, &t).unwrap().value;
            assert_eq!(s, r.fold_scores[fold]);
        }
        assert!(r.oof_predictions.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn duplicates_do_not_change_the_result() {
        let (design, y) = data(35, 2);
        let f = folds(35, 5);
        let a =
            grid_search_flat_cv(&design, &y, RIDGE, &[0.1, 1.0, 10.0], &f, Metric::Mae).unwrap();
        let b = grid_search_flat_cv(
            &design,
            &y,
            RIDGE,
            &[0.1, 1.0, 1.0, 10.0, 0.1],
            &f,
            Metric::Mae,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(grid_search_flat_cv(&design, &y, RIDGE, &[], &f, Metric::Mae).is_err());
    }

    #[test]
    fn ties_prefer_stronger_regularization() {
        let mk = |hp, s| Candidate {
            hyperparams: hp,
            fold_scores: vec![],
            mean_score: s,
        };
        assert!(better(
            &mk(Hyperparams::Alpha(10.0), 0.5),
            &mk(Hyperparams::Alpha(1.0), 0.5),
            true
        ));
        assert!(better(
            &mk(Hyperparams::C(0.1), 0.5),
            &mk(Hyperparams::C(1.0), 0.5),
            true
        ));
        assert!(!better(
            &mk(Hyperparams::C(0.1), f64::NAN),
            &mk(Hyperparams::C(1.0), 0.1),
            true
        ));
        assert!(better(
            &mk(Hyperparams::Alpha(1.0), 0.2),
            &mk(Hyperparams::Alpha(1.0), 0.3),
            false
        ));
    }

    #[test]
    fn deterministic_results() {
        let (design, y) = data(28, 3);
        let f = folds(28, 7);
        let a = grid_search_flat_cv(
            &design,
            &y,
            RIDGE,
            &[0.1, 1.0, 10.0, 100.0],
            &f,
            Metric::SpearmanRs,
        )
        .unwrap();
        let b = grid_search_flat_cv(
            &design,
            &y,
            RIDGE,
            &[0.1, 1.0, 10.0, 100.0],
            &f,
            Metric::SpearmanRs,
        )
        .unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn poisoned_test_targets_do_not_touch_the_fit() {
        let (design, y) = data(30, 4);
        let f = folds(30, 5);
        let mut poisoned = y.clone();
        for &i in &f.test_rows(0) {
            poisoned[i] = 1e6;
        }
        let (a, _, _) = fit_fold(
            &design,
            &y,
            RIDGE,
            Hyperparams::Alpha(1.0),
            &f.train_rows(0),
            &f.test_rows(0),
        )
        .unwrap();
        let (b, _, _) = fit_fold(
            &design,
            &poisoned,
            RIDGE,
            Hyperparams::Alpha(1.0),
            &f.train_rows(0),
            &f.test_rows(0),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
