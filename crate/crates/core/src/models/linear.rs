use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, cholesky_solve, gram_t, spd_solve};
use super::ModelError;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Newton iterations stop once the gradient infinity-norm falls below this.
pub const LOGISTIC_TOLERANCE: f64 = 1e-8;
pub const LOGISTIC_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ridge,
    Logistic,
    /// Training mean (regression) or training positive rate (binary).
    Constant,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Logistic => "logistic",
            ModelKind::Constant => "constant",
        })
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ridge" => Ok(ModelKind::Ridge),
            "logistic" => Ok(ModelKind::Logistic),
            "constant" => Ok(ModelKind::Constant),
            other => Err(ModelError::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hyperparams {
    Alpha(f64),
    C(f64),
    None,
}

impl Hyperparams {
    /// Larger means stronger regularization.
    pub fn strength(&self) -> f64 {
        match *self {
            Hyperparams::Alpha(a) => a,
            Hyperparams::C(c) => 1.0 / c,
            Hyperparams::None => 0.0,
        }
    }

    pub fn for_kind(kind: ModelKind, value: f64) -> Self {
        match kind {
            ModelKind::Ridge => Hyperparams::Alpha(value),
            ModelKind::Logistic => Hyperparams::C(value),
            ModelKind::Constant => Hyperparams::None,
        }
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperparams::Alpha(a) => write!(f, "alpha={a}"),
            Hyperparams::C(c) => write!(f, "C={c}"),
            Hyperparams::None => f.write_str("none"),
        }
    }
}

/// Per-column centering and scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1 for constant columns and in raw mode.
    pub std: Vec<f64>,
    /// Columns with zero variance on the training rows.
    pub constant: Vec<bool>,
    /// False in raw-scale mode: columns are only centered.
    pub scaled: bool,
}

impl Standardization {
    pub fn fit(x: ArrayView2<f64>, scaled: bool) -> Result<Self, ModelError> {
        check_finite(x)?;
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        let mut constant = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            let is_constant = !(sd > 1e-12 * m.abs().max(1.0));
            mean.push(m);
            constant.push(is_constant);
            std.push(if is_constant || !scaled { 1.0 } else { sd });
        }
        Ok(Standardization {
            mean,
            std,
            constant,
            scaled,
        })
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, ModelError> {
        if x.ncols() != self.mean.len() {
            return Err(ModelError::ColumnMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        check_finite(x)?;
        let mut z = x.to_owned();
        for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
            if self.constant[j] {
                col.fill(0.0);
            } else {
                let (m, s) = (self.mean[j], self.std[j]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        Ok(z)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub converged: bool,
    /// Objective value after each accepted logistic step.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLinearModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub columns: Vec<String>,
    /// Coefficients on standardized columns.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub hyperparams: Hyperparams,
    pub standardization: Standardization,
    pub seed: u64,
    pub diagnostics: FitDiagnostics,
}

fn check_finite(x: ArrayView2<f64>) -> Result<(), ModelError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite)
    }
}

fn check_xy(x: ArrayView2<f64>, y: &[f64]) -> Result<(), ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::ShapeMismatch {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    if x.nrows() < 2 {
        return Err(ModelError::TooFewRows(x.nrows()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    check_finite(x)
}

fn default_columns(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Ridge regression with an unpenalized intercept. Solves the normal
/// equations in whichever of the primal (d x d) or dual (n x n) form is
/// smaller.
pub fn fit_ridge(
    x: ArrayView2<f64>,
    y: &[f64],
    alpha: f64,
    standardize: bool,
) -> Result<FittedLinearModel, ModelError> {
    check_xy(x, y)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ModelError::InvalidHyperparameter(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    let standardization = Standardization::fit(x, standardize)?;
    let z = standardization.transform(x)?;
    let (n, d) = z.dim();
    let y_bar = y.iter().sum::<f64>() / n as f64;
    let yc = Array1::from_iter(y.iter().map(|v| v - y_bar));

    let w = if d <= n {
        let mut a = gram_t(z.view());
        a.diag_mut().mapv_inplace(|v| v + alpha);
        spd_solve(&a, z.t().dot(&yc).view()).ok_or(ModelError::Singular)?
    } else {
        let mut k = z.dot(&z.t());
        k.diag_mut().mapv_inplace(|v| v + alpha);
        let dual = spd_solve(&k, yc.view()).ok_or(ModelError::Singular)?;
        z.t().dot(&dual)
    };

    Ok(FittedLinearModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Ridge,
        columns: default_columns(d),
        weights: w.to_vec(),
        intercept: y_bar,
        hyperparams: Hyperparams::Alpha(alpha),
        standardization,
        seed: 0,
        diagnostics: FitDiagnostics {
            converged: true,
            ..Default::default()
        },
    })
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_binary(y: &[f64]) -> Result<(), ModelError> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(ModelError::NotBinary);
    }
    let pos = y.iter().filter(|&&v| v == 1.0).count();
    if pos == 0 || pos == y.len() {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

/// `Σ log(1 + exp(-ỹ (z·w + b))) + ||w||² / (2C)` with `ỹ = 2y - 1`.
pub fn logistic_objective(
    z: ArrayView2<f64>,
    y: &[f64],
    w: ArrayView1<f64>,
    b: f64,
    c: f64,
) -> f64 {
    let margins = z.dot(&w);
    let loss: f64 = margins
        .iter()
        .zip(y)
        .map(|(m, &yi)| softplus(-(2.0 * yi - 1.0) * (m + b)))
        .sum();
    loss + w.dot(&w) / (2.0 * c)
}

/// Gradient of [`logistic_objective`] with respect to `(w, b)`.
pub fn logistic_gradient(
    z: ArrayView2<f64>,
    y: &[f64],
    w: ArrayView1<f64>,
    b: f64,
    c: f64,
) -> (Array1<f64>, f64) {
    let margins = z.dot(&w);
    let r = Array1::from_iter(margins.iter().zip(y).map(|(m, yi)| sigmoid(m + b) - yi));
    let gw = z.t().dot(&r) + &w.mapv(|v| v / c);
    (gw, r.sum())
}

/// Newton direction solving `H d = g` for the logistic Hessian with an
/// unpenalized intercept. With more columns than rows the penalized block is
/// inverted through the Woodbury identity on the n x n kernel.
fn newton_direction(
    z: ArrayView2<f64>,
    kernel: Option<&Array2<f64>>,
    dvec: &Array1<f64>,
    lambda: f64,
    gw: &Array1<f64>,
    gb: f64,
) -> Option<(Array1<f64>, f64)> {
    let d = z.ncols();
    match kernel {
        None => {
            let mut h = Array2::<f64>::zeros((d + 1, d + 1));
            let zd = &z * &dvec.view().insert_axis(Axis(1));
            h.slice_mut(ndarray::s![..d, ..d]).assign(&z.t().dot(&zd));
            let u = zd.sum_axis(Axis(0));
            h.slice_mut(ndarray::s![..d, d]).assign(&u);
            h.slice_mut(ndarray::s![d, ..d]).assign(&u);
            h[[d, d]] = dvec.sum();
            for j in 0..d {
                h[[j, j]] += lambda;
            }
            let mut g = Array1::<f64>::zeros(d + 1);
            g.slice_mut(ndarray::s![..d]).assign(gw);
            g[d] = gb;
            let step = spd_solve(&h, g.view())?;
            Some((step.slice(ndarray::s![..d]).to_owned(), step[d]))
        }
        Some(k) => {
            let s = dvec.mapv(f64::sqrt);
            let mut m = k * &s.view().insert_axis(Axis(1)) * s.view().insert_axis(Axis(0));
            m.diag_mut().mapv_inplace(|v| v + lambda);
            let l = cholesky(&m)?;
            // A⁻¹ v with A = ZᵀDZ + λI.
            let woodbury = |v: &Array1<f64>| -> Array1<f64> {
                let t = &z.dot(v) * &s;
                let inner = cholesky_solve(&l, t.view());
                let back = z.t().dot(&(&inner * &s));
                (v - &back) / lambda
            };
            let apply_a =
                |v: &Array1<f64>| -> Array1<f64> { z.t().dot(&(&z.dot(v) * dvec)) + &(v * lambda) };
            // The subtraction above cancels badly for small λ; refine.
            let a_inv = |v: &Array1<f64>| -> Array1<f64> {
                let mut x = woodbury(v);
                for _ in 0..3 {
                    let r = v - &apply_a(&x);
                    x = &x + &woodbury(&r);
                }
                x
            };
            let u = z.t().dot(dvec);
            let a_inv_g = a_inv(gw);
            let a_inv_u = a_inv(&u);
            let schur = dvec.sum() - u.dot(&a_inv_u);
            if !(schur > 0.0) {
                return None;
            }
            let db = (gb - u.dot(&a_inv_g)) / schur;
            let dw = &a_inv_g - &(&a_inv_u * db);
            Some((dw, db))
        }
    }
}

/// L2-regularized logistic regression by damped Newton from a zero start.
pub fn fit_logistic(
    x: ArrayView2<f64>,
    y: &[f64],
    c: f64,
    standardize: bool,
) -> Result<FittedLinearModel, ModelError> {
    check_xy(x, y)?;
    check_binary(y)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(ModelError::InvalidHyperparameter(format!(
            "C must be > 0, got {c}"
        )));
    }
    let standardization = Standardization::fit(x, standardize)?;
    let z = standardization.transform(x)?;
    let (n, d) = z.dim();
    let lambda = 1.0 / c;
    let kernel = (d > n).then(|| z.dot(&z.t()));

    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    let mut f = logistic_objective(z.view(), y, w.view(), b, c);
    let mut diagnostics = FitDiagnostics {
        objective_trace: vec![f],
        ..Default::default()
    };
    loop {
        let (gw, gb) = logistic_gradient(z.view(), y, w.view(), b, c);
        let gnorm = gw.iter().fold(gb.abs(), |m, v| m.max(v.abs()));
        diagnostics.grad_inf_norm = gnorm;
        if gnorm < LOGISTIC_TOLERANCE {
            diagnostics.converged = true;
            break;
        }
        if diagnostics.iterations >= LOGISTIC_MAX_ITERATIONS {
            break;
        }
        diagnostics.iterations += 1;

        let margins = z.dot(&w);
        let dvec = margins.mapv(|m| {
            let p = sigmoid(m + b);
            (p * (1.0 - p)).max(1e-300)
        });
        let Some((dw, db)) = newton_direction(z.view(), kernel.as_ref(), &dvec, lambda, &gw, gb)
        else {
            return Err(ModelError::Singular);
        };
        let slope = gw.dot(&dw) + gb * db;
        if slope <= 1e-12 * f.abs().max(1.0) {
            // Decrease is below the resolution of the objective; in the
            // quadratic region the full step is safe.
            w = &w - &dw;
            b -= db;
            f = logistic_objective(z.view(), y, w.view(), b, c);
            diagnostics.objective_trace.push(f);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new = &w - &(&dw * t);
            let b_new = b - db * t;
            let f_new = logistic_objective(z.view(), y, w_new.view(), b_new, c);
            if f_new <= f - 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                f = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // The objective can no longer be decreased in floating point.
            diagnostics.converged = gnorm < LOGISTIC_TOLERANCE * 1e2;
            break;
        }
        diagnostics.objective_trace.push(f);
    }
    if !diagnostics.converged {
        return Err(ModelError::NotConverged {
            iterations: diagnostics.iterations,
            grad_norm: diagnostics.grad_inf_norm,
        });
    }
    Ok(FittedLinearModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Logistic,
        columns: default_columns(d),
        weights: w.to_vec(),
        intercept: b,
        hyperparams: Hyperparams::C(c),
        standardization,
        seed: 0,
        diagnostics,
    })
}

/// Constant predictor: the training mean (regression) or positive rate.
pub fn constant_baseline(train_targets: &[f64], d: usize) -> Result<FittedLinearModel, ModelError> {
    if train_targets.is_empty() {
        return Err(ModelError::TooFewRows(0));
    }
    let mean = train_targets.iter().sum::<f64>() / train_targets.len() as f64;
    Ok(FittedLinearModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Constant,
        columns: default_columns(d),
        weights: vec![0.0; d],
        intercept: mean,
        hyperparams: Hyperparams::None,
        standardization: Standardization {
            mean: vec![0.0; d],
            std: vec![1.0; d],
            constant: vec![true; d],
            scaled: false,
        },
        seed: 0,
        diagnostics: FitDiagnostics {
            converged: true,
            ..Default::default()
        },
    })
}

/// Fits `kind` with hyperparameter `hp`.
pub fn fit_model(
    kind: ModelKind,
    x: ArrayView2<f64>,
    y: &[f64],
    hp: Hyperparams,
    standardize: bool,
) -> Result<FittedLinearModel, ModelError> {
    match (kind, hp) {
        (ModelKind::Ridge, Hyperparams::Alpha(a)) => fit_ridge(x, y, a, standardize),
        (ModelKind::Logistic, Hyperparams::C(c)) => fit_logistic(x, y, c, standardize),
        (ModelKind::Constant, _) => constant_baseline(y, x.ncols()),
        (kind, hp) => Err(ModelError::InvalidHyperparameter(format!(
            "{hp} does not apply to {kind}"
        ))),
    }
}

impl FittedLinearModel {
    pub fn with_columns(mut self, columns: Vec<String>) -> Result<Self, ModelError> {
        if columns.len() != self.weights.len() {
            return Err(ModelError::ColumnMismatch {
                expected: self.weights.len(),
                got: columns.len(),
            });
        }
        self.columns = columns;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Linear scores `z·w + b` on standardized inputs.
    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
        if self.kind == ModelKind::Constant {
            if x.ncols() != self.weights.len() {
                return Err(ModelError::ColumnMismatch {
                    expected: self.weights.len(),
                    got: x.ncols(),
                });
            }
            return Ok(vec![self.intercept; x.nrows()]);
        }
        let z = self.standardization.transform(x)?;
        let w = ArrayView1::from(&self.weights);
        Ok(z.dot(&w).iter().map(|m| m + self.intercept).collect())
    }

    /// Ridge: scores. Logistic: probabilities. Constant: the stored value.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
        let scores = self.decision_function(x)?;
        Ok(match self.kind {
            ModelKind::Logistic => scores.into_iter().map(sigmoid).collect(),
            _ => scores,
        })
    }

    /// Weights and intercept expressed on the original column scale.
    pub fn raw_scale_coefficients(&self) -> (Vec<f64>, f64) {
        let s = &self.standardization;
        let w: Vec<f64> = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| if s.constant[j] { 0.0 } else { w / s.std[j] })
            .collect();
        let b = self.intercept - w.iter().zip(&s.mean).map(|(w, m)| w * m).sum::<f64>();
        (w, b)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let body = serde_json::to_vec_pretty(self).expect("model serializes");
        std::fs::write(path, body).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model: FittedLinearModel = serde_json::from_str(&text)
            .map_err(|e| ModelError::Format(format!("{}: {e}", path.display())))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Format(format!(
                "{}: unsupported model format version {}",
                path.display(),
                model.format_version
            )));
        }
        if model.weights.len() != model.columns.len()
            || model.standardization.mean.len() != model.columns.len()
        {
            return Err(ModelError::Format(format!(
                "{}: inconsistent column counts",
                path.display()
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
    }

    fn norm(w: &[f64]) -> f64 {
        w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn ridge_recovers_exact_line() {
        let x = random(30, 1, 1);
        let y: Vec<f64> = x.column(0).iter().map(|v| 3.0 * v + 1.0).collect();
        let m = fit_ridge(x.view(), &y, 1e-8, false).unwrap();
        assert!((m.weights[0] - 3.0).abs() < 1e-6);
        let (w, b) = m.raw_scale_coefficients();
        assert!((w[0] - 3.0).abs() < 1e-6 && (b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ridge_shrinks_with_alpha() {
        let x = random(40, 4, 2);
        let y: Vec<f64> = (0..40)
            .map(|i| x[[i, 0]] - 2.0 * x[[i, 2]] + 0.1 * i as f64)
            .collect();
        let small = fit_ridge(x.view(), &y, 0.1, true).unwrap();
        let large = fit_ridge(x.view(), &y, 100.0, true).unwrap();
        assert!(norm(&large.weights) <= norm(&small.weights));
        assert!(fit_ridge(x.view(), &y, 0.0, true).is_err());
    }

    #[test]
    fn ridge_dual_matches_primal() {
        let x = random(6, 10, 3);
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let dual = fit_ridge(x.view(), &y, 0.7, true).unwrap();
        let z = dual.standardization.transform(x.view()).unwrap();
        let mut a = z.t().dot(&z);
        a.diag_mut().mapv_inplace(|v| v + 0.7);
        let yc = Array1::from_iter(y.iter().map(|v| v - 2.5));
        let primal = spd_solve(&a, z.t().dot(&yc).view()).unwrap();
        for (p, q) in primal.iter().zip(&dual.weights) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn standardization_round_trip() {
        let mut x = random(25, 3, 4);
        x.column_mut(1).fill(5.0);
        let s = Standardization::fit(x.view(), true).unwrap();
        assert_eq!(s.constant, vec![false, true, false]);
        assert_eq!(s.std[1], 1.0);
        let z = s.transform(x.view()).unwrap();
        for j in [0, 2] {
            let col = z.column(j);
            let m = col.sum() / 25.0;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 25.0).sqrt();
            assert!(m.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn logistic_separable_data() {
        let x = array![
            [0.0, 0.1],
            [0.2, 0.0],
            [0.1, 0.3],
            [2.0, 2.1],
            [2.2, 1.9],
            [1.8, 2.0]
        ];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let m = fit_logistic(x.view(), &y, 100.0, true).unwrap();
        let p = m.predict(x.view()).unwrap();
        assert!(p.iter().zip(&y).all(|(p, y)| (*p > 0.5) == (*y == 1.0)));
        assert!(p.iter().all(|p| *p > 0.0 && *p < 1.0));
        let weak = fit_logistic(x.view(), &y, 0.1, true).unwrap();
        assert!(norm(&weak.weights) <= norm(&m.weights));
    }

    #[test]
    fn logistic_objective_is_monotone_and_gradient_vanishes() {
        let x = random(20, 3, 5);
        let y: Vec<f64> = (0..20)
            .map(|i| f64::from(x[[i, 0]] + 0.5 * x[[i, 1]] > 0.2))
            .collect();
        let m = fit_logistic(x.view(), &y, 1.0, true).unwrap();
        let trace = &m.diagnostics.objective_trace;
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        let z = m.standardization.transform(x.view()).unwrap();
        let (gw, gb) =
            logistic_gradient(z.view(), &y, ArrayView1::from(&m.weights), m.intercept, 1.0);
        assert!(gw.iter().chain([gb].iter()).all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn logistic_woodbury_matches_primal() {
        let x = random(8, 12, 6);
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let wide = fit_logistic(x.view(), &y, 0.5, true).unwrap();
        let z = wide.standardization.transform(x.view()).unwrap();
        let (gw, gb) = logistic_gradient(
            z.view(),
            &y,
            ArrayView1::from(&wide.weights),
            wide.intercept,
            0.5,
        );
        assert!(gw.iter().chain([gb].iter()).all(|g| g.abs() < 1e-8));
    }

    #[test]
    fn intercept_only_logistic_is_logit_prevalence() {
        let x = Array2::<f64>::zeros((10, 1));
        let y = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let m = fit_logistic(x.view(), &y, 1.0, true).unwrap();
        assert!((m.intercept - (0.3f64 / 0.7).ln()).abs() < 1e-6);
        let p = m.predict(x.view()).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn logistic_rejects_single_class() {
        let x = random(4, 2, 7);
        assert!(matches!(
            fit_logistic(x.view(), &[1.0; 4], 1.0, true),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn predict_checks_columns_and_constant_model() {
        let x = random(10, 2, 8);
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = fit_ridge(x.view(), &y, 1.0, true).unwrap();
        assert!(matches!(
            m.predict(random(2, 3, 9).view()),
            Err(ModelError::ColumnMismatch {
                expected: 2,
                got: 3
            })
        ));
        let c = constant_baseline(&[4.0, 4.4, 4.2], 2).unwrap();
        assert!(c
            .predict(x.view())
            .unwrap()
            .iter()
            .all(|p| (p - 4.2).abs() < 1e-12));
    }

    #[test]
    fn save_and_load() {
        let x = random(10, 2, 10);
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = fit_ridge(x.view(), &y, 1.0, true)
            .unwrap()
            .with_columns(vec!["a".into(), "b".into()])
            .unwrap()
            .with_seed(7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(FittedLinearModel::load(&path).unwrap(), m);
        std::fs::write(&path, "{}").unwrap();
        assert!(FittedLinearModel::load(&path).is_err());
    }
}
