//! Evaluation metrics and the paired t-test.
//!
//! AUROC gives half credit to tied scores; AUPR is average precision with
//! tied scores sharing one threshold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::corpus::TaskKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("length mismatch: {0} predictions vs {1} targets")]
    LengthMismatch(usize, usize),
    #[error("metric of an empty sample")]
    Empty,
    #[error("correlation undefined for a constant vector")]
    Constant,
    #[error("both classes must be present")]
    SingleClass,
    #[error("no positive labels")]
    NoPositives,
    #[error("labels must be 0 or 1")]
    NonBinaryLabels,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("unknown metric '{0}'")]
    Unknown(String),
    #[error("metric {metric} does not apply to {task} tasks")]
    TaskMismatch { metric: Metric, task: TaskKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SpearmanRs,
    Mae,
    Auroc,
    Aupr,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SpearmanRs => "spearman_rs",
            Metric::Mae => "mae",
            Metric::Auroc => "auroc",
            Metric::Aupr => "aupr",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self != Metric::Mae
    }

    pub fn task(self) -> TaskKind {
        match self {
            Metric::SpearmanRs | Metric::Mae => TaskKind::Regression,
            Metric::Auroc | Metric::Aupr => TaskKind::Binary,
        }
    }

    /// Metrics reported for a task, primary first.
    pub fn for_task(task: TaskKind) -> [Metric; 2] {
        match task {
            TaskKind::Regression => [Metric::SpearmanRs, Metric::Mae],
            TaskKind::Binary => [Metric::Auroc, Metric::Aupr],
        }
    }

    pub fn compute(self, preds: &[f64], targets: &[f64]) -> Result<MetricValue, MetricError> {
        match self {
            Metric::SpearmanRs => spearman(preds, targets),
            Metric::Mae => mae(preds, targets),
            Metric::Auroc => auroc(preds, targets),
            Metric::Aupr => aupr(preds, targets),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Metric::SpearmanRs, Metric::Mae, Metric::Auroc, Metric::Aupr]
            .into_iter()
            .find(|m| m.as_str() == s || (s == "spearman" && *m == Metric::SpearmanRs))
            .ok_or_else(|| MetricError::Unknown(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: Metric,
    pub value: f64,
    pub n: usize,
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

fn check_labels(labels: &[f64]) -> Result<(usize, usize), MetricError> {
    let mut pos = 0;
    for &l in labels {
        if l == 1.0 {
            pos += 1;
        } else if l != 0.0 {
            return Err(MetricError::NonBinaryLabels);
        }
    }
    Ok((pos, labels.len() - pos))
}

/// 1-based ranks; tied values share the mean of their rank range.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either vector is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(preds: &[f64], targets: &[f64]) -> Result<MetricValue, MetricError> {
    check_pair(preds, targets)?;
    let value =
        pearson(&average_ranks(preds), &average_ranks(targets)).ok_or(MetricError::Constant)?;
    Ok(MetricValue {
        metric: Metric::SpearmanRs,
        value,
        n: preds.len(),
    })
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<MetricValue, MetricError> {
    check_pair(preds, targets)?;
    let value = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / preds.len() as f64;
    Ok(MetricValue {
        metric: Metric::Mae,
        value,
        n: preds.len(),
    })
}

/// Mann-Whitney AUROC via average ranks, which credits tied pairs by half.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<MetricValue, MetricError> {
    check_pair(scores, labels)?;
    let (pos, neg) = check_labels(labels)?;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1.0)
        .map(|(r, _)| r)
        .sum();
    let (p, q) = (pos as f64, neg as f64);
    let value = (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
    Ok(MetricValue {
        metric: Metric::Auroc,
        value,
        n: scores.len(),
    })
}

/// Average precision over descending score thresholds.
pub fn aupr(scores: &[f64], labels: &[f64]) -> Result<MetricValue, MetricError> {
    check_pair(scores, labels)?;
    let (pos, _) = check_labels(labels)?;
    if pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut value) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut group_pos = 0;
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1.0 {
                group_pos += 1;
            }
            j += 1;
        }
        tp += group_pos;
        seen += j - i;
        value += (group_pos as f64 / pos as f64) * (tp as f64 / seen as f64);
        i = j;
    }
    Ok(MetricValue {
        metric: Metric::Aupr,
        value,
        n: scores.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: usize,
    pub mean_difference: f64,
    /// What one pair is, e.g. "fold x seed".
    pub pairing: String,
    /// Differences had zero variance; t is 0 (p = 1) or infinite (p = 0).
    pub degenerate: bool,
}

/// Two-sided Student-t tail probability `P(|T| >= |t|)`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Paired t-test on `a - b`.
pub fn paired_t_test(
    a: &[f64],
    b: &[f64],
    pairing: &str,
) -> Result<SignificanceResult, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricError::TooFewPairs(n));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        };
        return Ok(SignificanceResult {
            t_statistic: t,
            p_value: p,
            df,
            mean_difference: mean,
            pairing: pairing.to_string(),
            degenerate: true,
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(SignificanceResult {
        t_statistic: t,
        p_value: student_t_two_sided(t, df as f64),
        df,
        mean_difference: mean,
        pairing: pairing.to_string(),
        degenerate: false,
    })
}

/// Population mean and standard deviation (ddof = 0).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
