//! Dialogue-level feature matrix.
//!
//! Every utterance-level feature becomes two columns, the mean over the
//! dialogue's utterances and the least-squares slope against utterance
//! position. Dialogue-level features (QoA) enter as one raw column. With
//! participant disaggregation, the statistics are computed separately for
//! each of the two speakers, in order of first appearance.
//!
//! Missing annotations are kept as NaN in the matrix and filled per fold
//! with the training-split column mean by [`DialogueFeatureMatrix::impute`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::AnnotationStore;
use crate::corpus::{Corpus, TaskKind};
use crate::lexical::DiscreteFeatures;
use crate::registry::{FeatureSet, Level, Registry};

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("statistic of an empty series")]
    EmptySeries,
    #[error("dialogue {dialogue_id} has {speakers} speakers; disaggregation needs exactly 2")]
    SpeakerCount {
        dialogue_id: String,
        speakers: usize,
    },
    #[error("dialogue {dialogue_id}: no {set} features available")]
    MissingSource {
        dialogue_id: String,
        set: FeatureSet,
    },
    #[error("feature {set} - {name} is not produced by its extractor")]
    UnknownFeature { set: FeatureSet, name: String },
    #[error("dialogue {dialogue_id}: {set} vectors cover {got} of {expected} utterances")]
    LengthMismatch {
        dialogue_id: String,
        set: FeatureSet,
        got: usize,
        expected: usize,
    },
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("matrix file: {0}")]
    Format(String),
    #[error("matrix file: {0}")]
    Csv(#[from] csv::Error),
    #[error("matrix file: {0}")]
    Io(#[from] std::io::Error),
}

/// Arithmetic mean.
pub fn mean_stat(series: &[f64]) -> Result<f64, AggregationError> {
    if series.is_empty() {
        return Err(AggregationError::EmptySeries);
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

/// Least-squares slope of `(i, series[i])` for `i = 0..n`; 0 for one point.
pub fn gradient_stat(series: &[f64]) -> Result<f64, AggregationError> {
    if series.is_empty() {
        return Err(AggregationError::EmptySeries);
    }
    let positions: Vec<f64> = (0..series.len()).map(|i| i as f64).collect();
    Ok(slope(&positions, series))
}

/// Least-squares slope of `ys` against `xs`; 0 when `xs` has no spread.
/// `ys` is not centered: the centered x deviations already sum to zero, and
/// skipping the y mean keeps integer-valued series exact under shifts.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - x_bar) * y;
        sxx += (x - x_bar) * (x - x_bar);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Grad,
}

pub fn column_name(set: FeatureSet, name: &str, stat: Statistic, speaker: Option<usize>) -> String {
    let stat = match stat {
        Statistic::Mean => "mean",
        Statistic::Grad => "grad",
    };
    match speaker {
        Some(s) => format!("{set} - {name}, {stat} (speaker {})", s + 1),
        None => format!("{set} - {name}, {stat}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationOptions {
    pub sets: BTreeSet<FeatureSet>,
    pub disaggregate_by_participant: bool,
    /// Include registry entries flagged optional (Frazier/Yngve).
    pub include_optional: bool,
}

impl AggregationOptions {
    pub fn new(sets: impl IntoIterator<Item = FeatureSet>) -> Self {
        AggregationOptions {
            sets: sets.into_iter().collect(),
            disaggregate_by_participant: false,
            include_optional: false,
        }
    }
}

/// Column names the options produce, in registry order.
pub fn planned_columns(registry: &Registry, options: &AggregationOptions) -> Vec<String> {
    let mut out = Vec::new();
    for entry in registry.select(&options.sets, options.include_optional) {
        match entry.level {
            Level::Dialogue => out.push(entry.name.clone()),
            Level::Utterance => {
                for stat in [Statistic::Mean, Statistic::Grad] {
                    if options.disaggregate_by_participant {
                        for s in 0..2 {
                            out.push(column_name(entry.set, &entry.name, stat, Some(s)));
                        }
                    } else {
                        out.push(column_name(entry.set, &entry.name, stat, None));
                    }
                }
            }
        }
    }
    out
}

/// Per-utterance inputs for [`build_matrix`]; either may be absent when no
/// requested set needs it.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureSources<'a> {
    pub discrete: Option<&'a BTreeMap<String, Vec<DiscreteFeatures>>>,
    pub annotations: Option<&'a AnnotationStore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationRecord {
    pub dialogue_id: String,
    pub column: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueFeatureMatrix {
    pub column_names: Vec<String>,
    pub dialogue_ids: Vec<String>,
    /// Rows follow `dialogue_ids`; NaN marks a missing value.
    pub values: Array2<f64>,
    pub targets: Vec<f64>,
    pub task_kind: TaskKind,
    pub topics: Vec<Option<String>>,
    pub registry_version: String,
    pub options: AggregationOptions,
}

fn missing_source(dialogue_id: &str, set: FeatureSet) -> AggregationError {
    AggregationError::MissingSource {
        dialogue_id: dialogue_id.to_string(),
        set,
    }
}

/// Per-utterance values of one feature; `None` where the annotation is missing.
fn series_for(
    set: FeatureSet,
    name: &str,
    dialogue_id: &str,
    n: usize,
    sources: &FeatureSources<'_>,
) -> Result<Vec<Option<f64>>, AggregationError> {
    let unknown = || AggregationError::UnknownFeature {
        set,
        name: name.to_string(),
    };
    let check_len = |got: usize| {
        if got == n {
            Ok(())
        } else {
            Err(AggregationError::LengthMismatch {
                dialogue_id: dialogue_id.to_string(),
                set,
                got,
                expected: n,
            })
        }
    };
    match set {
        FeatureSet::PM | FeatureSet::CM => {
            let vectors = sources
                .discrete
                .and_then(|d| d.get(dialogue_id))
                .ok_or_else(|| missing_source(dialogue_id, set))?;
            check_len(vectors.len())?;
            vectors
                .iter()
                .map(|v| {
                    let vec = if set == FeatureSet::PM {
                        &v.politeness
                    } else {
                        &v.collaboration
                    };
                    vec.get(name).map(Some).ok_or_else(unknown)
                })
                .collect()
        }
        FeatureSet::DT => {
            let slots = sources
                .annotations
                .and_then(|a| a.get(dialogue_id))
                .and_then(|d| d.dispute_tactics.as_ref())
                .ok_or_else(|| missing_source(dialogue_id, set))?;
            check_len(slots.len())?;
            let pos = crate::annotation::DISPUTE_FEATURES
                .iter()
                .position(|f| *f == name)
                .ok_or_else(unknown)?;
            Ok(slots
                .iter()
                .map(|s| s.map(|a| a.features()[pos].1))
                .collect())
        }
        FeatureSet::IC | FeatureSet::ST => {
            let slots = sources
                .annotations
                .and_then(|a| a.get(dialogue_id))
                .and_then(|d| d.info_style.as_ref())
                .ok_or_else(|| missing_source(dialogue_id, set))?;
            check_len(slots.len())?;
            let lookup = |a: &crate::annotation::InfoStyleAnnotation| {
                let features = if set == FeatureSet::IC {
                    a.ic_features(true)
                } else {
                    a.st_features()
                };
                features
                    .into_iter()
                    .find(|(f, _)| *f == name)
                    .map(|(_, v)| v)
            };
            slots
                .iter()
                .map(|s| match s {
                    Some(a) => lookup(a).map(Some).ok_or_else(unknown),
                    None => Ok(None),
                })
                .collect()
        }
        FeatureSet::QoA => Err(unknown()),
    }
}

/// Mean and gradient over the available points of `series` restricted to
/// `members` (utterance indices), with positions 0.. within `members`.
fn stats(series: &[Option<f64>], members: &[usize]) -> (f64, f64) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (pos, &i) in members.iter().enumerate() {
        if let Some(v) = series[i] {
            xs.push(pos as f64);
            ys.push(v);
        }
    }
    if ys.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    (mean, slope(&xs, &ys))
}

/// Assembles the dialogue-level matrix in corpus order and registry order.
pub fn build_matrix(
    corpus: &Corpus,
    sources: FeatureSources<'_>,
    registry: &Registry,
    options: &AggregationOptions,
) -> Result<DialogueFeatureMatrix, AggregationError> {
    let entries = registry.select(&options.sets, options.include_optional);
    let column_names = planned_columns(registry, options);
    let n = corpus.len();
    let mut values = Array2::<f64>::from_elem((n, column_names.len()), f64::NAN);

    for (row, d) in corpus.dialogues().iter().enumerate() {
        let groups: Vec<Vec<usize>> = if options.disaggregate_by_participant {
            let speakers = d.speakers();
            if speakers.len() != 2 {
                return Err(AggregationError::SpeakerCount {
                    dialogue_id: d.id.clone(),
                    speakers: speakers.len(),
                });
            }
            speakers
                .iter()
                .map(|s| {
                    d.utterances
                        .iter()
                        .filter(|u| u.speaker_id == *s)
                        .map(|u| u.index)
                        .collect()
                })
                .collect()
        } else {
            vec![(0..d.len()).collect()]
        };

        let mut col = 0;
        for entry in &entries {
            if entry.level == Level::Dialogue {
                let qoa = sources
                    .annotations
                    .and_then(|a| a.get(&d.id))
                    .and_then(|a| a.qoa)
                    .ok_or_else(|| missing_source(&d.id, entry.set))?;
                values[[row, col]] = qoa.unwrap_or(f64::NAN);
                col += 1;
                continue;
            }
            let series = series_for(entry.set, &entry.name, &d.id, d.len(), &sources)?;
            let per_group: Vec<(f64, f64)> = groups.iter().map(|g| stats(&series, g)).collect();
            for (g, (mean, _)) in per_group.iter().enumerate() {
                values[[row, col + g]] = *mean;
            }
            col += per_group.len();
            for (g, (_, grad)) in per_group.iter().enumerate() {
                values[[row, col + g]] = *grad;
            }
            col += per_group.len();
        }
        debug_assert_eq!(col, column_names.len());
    }

    Ok(DialogueFeatureMatrix {
        column_names,
        dialogue_ids: corpus.dialogues().iter().map(|d| d.id.clone()).collect(),
        values,
        targets: corpus.targets(),
        task_kind: corpus.task_kind(),
        topics: corpus.dialogues().iter().map(|d| d.topic.clone()).collect(),
        registry_version: registry.version.clone(),
        options: options.clone(),
    })
}

/// Sidecar written next to an exported matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixManifest {
    pub registry_version: String,
    pub options: AggregationOptions,
    pub task_kind: TaskKind,
    pub columns: Vec<String>,
    pub topics: BTreeMap<String, String>,
    /// Cells left empty in the CSV; each is imputed at training time with
    /// the training-split column mean.
    pub missing_cells: Vec<(String, String)>,
}

impl DialogueFeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, AggregationError> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| AggregationError::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, AggregationError> {
        let j = self.column_index(name)?;
        Ok(self.values.column(j).to_vec())
    }

    /// `(dialogue_id, column)` of every NaN cell, row-major.
    pub fn missing_cells(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for ((i, j), v) in self.values.indexed_iter() {
            if v.is_nan() {
                out.push((self.dialogue_ids[i].clone(), self.column_names[j].clone()));
            }
        }
        out
    }

    /// Fills NaN cells with the column mean over `train_rows` (0 when a
    /// column has no observed training value) and logs every filled cell.
    pub fn impute(&self, train_rows: &[usize]) -> (Array2<f64>, Vec<ImputationRecord>) {
        let mut x = self.values.clone();
        let mut log = Vec::new();
        for j in 0..self.n_cols() {
            let col = self.values.column(j);
            if !col.iter().any(|v| v.is_nan()) {
                continue;
            }
            let observed: Vec<f64> = train_rows
                .iter()
                .map(|&i| col[i])
                .filter(|v| !v.is_nan())
                .collect();
            let fill = if observed.is_empty() {
                0.0
            } else {
                observed.iter().sum::<f64>() / observed.len() as f64
            };
            for i in 0..self.n_rows() {
                if x[[i, j]].is_nan() {
                    x[[i, j]] = fill;
                    log.push(ImputationRecord {
                        dialogue_id: self.dialogue_ids[i].clone(),
                        column: self.column_names[j].clone(),
                        value: fill,
                    });
                }
            }
        }
        (x, log)
    }

    /// Keeps the named columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<Self, AggregationError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<_, _>>()?;
        let values = self.values.select(ndarray::Axis(1), &idx);
        Ok(DialogueFeatureMatrix {
            column_names: names.to_vec(),
            values,
            ..self.clone()
        })
    }

    pub fn manifest(&self) -> MatrixManifest {
        MatrixManifest {
            registry_version: self.registry_version.clone(),
            options: self.options.clone(),
            task_kind: self.task_kind,
            columns: self.column_names.clone(),
            topics: self
                .dialogue_ids
                .iter()
                .zip(&self.topics)
                .filter_map(|(id, t)| t.as_ref().map(|t| (id.clone(), t.clone())))
                .collect(),
            missing_cells: self.missing_cells(),
        }
    }

    /// CSV with header `dialogue_id,target,<columns...>`; missing cells empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AggregationError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["dialogue_id".to_string(), "target".to_string()];
        header.extend(self.column_names.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.dialogue_ids.iter().enumerate() {
            let mut record = vec![id.clone(), format!("{}", self.targets[i])];
            record.extend(self.values.row(i).iter().map(|v| {
                if v.is_nan() {
                    String::new()
                } else {
                    format!("{v}")
                }
            }));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, manifest: MatrixManifest) -> Result<Self, AggregationError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let columns: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        if header.get(0) != Some("dialogue_id") || header.get(1) != Some("target") {
            return Err(AggregationError::Format(
                "header must start with dialogue_id,target".into(),
            ));
        }
        if columns != manifest.columns {
            return Err(AggregationError::Format(
                "CSV columns differ from the manifest".into(),
            ));
        }
        let mut ids = Vec::new();
        let mut targets = Vec::new();
        let mut flat = Vec::new();
        for record in r.records() {
            let record = record?;
            let num = |s: &str| -> Result<f64, AggregationError> {
                if s.is_empty() {
                    return Ok(f64::NAN);
                }
                s.parse()
                    .map_err(|_| AggregationError::Format(format!("bad number '{s}'")))
            };
            ids.push(record[0].to_string());
            targets.push(num(&record[1])?);
            for field in record.iter().skip(2) {
                flat.push(num(field)?);
            }
        }
        let values = Array2::from_shape_vec((ids.len(), columns.len()), flat)
            .map_err(|e| AggregationError::Format(e.to_string()))?;
        let topics = ids
            .iter()
            .map(|id| manifest.topics.get(id).cloned())
            .collect();
        Ok(DialogueFeatureMatrix {
            column_names: columns,
            dialogue_ids: ids,
            values,
            targets,
            task_kind: manifest.task_kind,
            topics,
            registry_version: manifest.registry_version,
            options: manifest.options,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{DialogueAnnotations, DisputeTacticsAnnotation};
    use crate::corpus::{Dialogue, Target};
    use crate::lexical::MarkerExtractor;

    #[test]
    fn statistic_examples() {
        assert_eq!(mean_stat(&[0.0, 1.0, 0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(mean_stat(&[0.22]).unwrap(), 0.22);
        let mut nine = [0.0; 9];
        nine[4] = 1.0;
        assert!((mean_stat(&nine).unwrap() - 0.111).abs() < 1e-3);
        assert_eq!(gradient_stat(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(gradient_stat(&[0.0, 1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(gradient_stat(&[5.0]).unwrap(), 0.0);
        assert!(mean_stat(&[]).is_err());
        assert!(gradient_stat(&[]).is_err());
    }

    fn corpus() -> Corpus {
        let d1 = Dialogue::new(
            "a",
            "synthetic",
            Some("t1".into()),
            [
                ("x", "Thanks, that helps."),
                ("y", "Why though?"),
                ("x", "Thanks again."),
            ],
            Target::binary(true),
        )
        .unwrap();
        let d2 = Dialogue::new(
            "b",
            "synthetic",
            Some("t2".into()),
            [("p", "No."), ("q", "Please explain the street map.")],
            Target::binary(false),
        )
        .unwrap();
        Corpus::new(vec![d1, d2], TaskKind::Binary).unwrap()
    }

    fn discrete(c: &Corpus) -> BTreeMap<String, Vec<DiscreteFeatures>> {
        let ex = MarkerExtractor::default();
        c.dialogues()
            .iter()
            .map(|d| (d.id.clone(), ex.extract_dialogue(d).unwrap()))
            .collect()
    }

    fn annotations(c: &Corpus, qoa_b: Option<f64>) -> AnnotationStore {
        let mut store = AnnotationStore::default();
        for d in c.dialogues() {
            let mut labels = [0u8; 9];
            labels[2] = 1;
            let flags = DisputeTacticsAnnotation {
                levels: [0; 9],
                labels,
            };
            let mut slots = vec![Some(flags); d.len()];
            if d.id == "a" {
                slots[1] = None;
            }
            store.dialogues.insert(
                d.id.clone(),
                DialogueAnnotations {
                    dispute_tactics: Some(slots),
                    info_style: None,
                    qoa: Some(if d.id == "a" { Some(6.0) } else { qoa_b }),
                    history_dropped: vec![],
                },
            );
        }
        store
    }

    #[test]
    fn pm_cm_columns_and_values() {
        let c = corpus();
        let disc = discrete(&c);
        let reg = Registry::builtin();
        let opts = AggregationOptions::new([FeatureSet::PM, FeatureSet::CM]);
        let m = build_matrix(
            &c,
            FeatureSources {
                discrete: Some(&disc),
                annotations: None,
            },
            &reg,
            &opts,
        )
        .unwrap();
        assert_eq!(m.n_cols(), 66);
        assert_eq!(m.column_names[0], "PM - Please, mean");
        let gratitude = m.column("PM - Gratitude, mean").unwrap();
        assert!((gratitude[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(gratitude[1], 0.0);
        assert_eq!(m.column("PM - Gratitude, grad").unwrap()[0], 0.0);
        assert!(m.missing_cells().is_empty());

        let pm_only = build_matrix(
            &c,
            FeatureSources {
                discrete: Some(&disc),
                annotations: None,
            },
            &reg,
            &AggregationOptions::new([FeatureSet::PM]),
        )
        .unwrap();
        assert_eq!(pm_only.n_cols(), 42);
    }

    #[test]
    fn missing_source_is_an_error() {
        let c = corpus();
        let reg = Registry::builtin();
        let err = build_matrix(
            &c,
            FeatureSources::default(),
            &reg,
            &AggregationOptions::new([FeatureSet::PM]),
        )
        .unwrap_err();
        assert!(matches!(err, AggregationError::MissingSource { .. }));
    }

    #[test]
    fn missing_annotations_are_skipped_then_imputed() {
        let c = corpus();
        let store = annotations(&c, None);
        let reg = Registry::builtin();
        let opts = AggregationOptions::new([FeatureSet::DT, FeatureSet::QoA]);
        let m = build_matrix(
            &c,
            FeatureSources {
                discrete: None,
                annotations: Some(&store),
            },
            &reg,
            &opts,
        )
        .unwrap();
        assert_eq!(m.n_cols(), 37);
        // Utterance 1 of "a" is missing: mean over utterances 0 and 2.
        assert_eq!(m.column("DT - Asking questions, mean").unwrap()[0], 1.0);
        assert_eq!(
            m.missing_cells(),
            vec![("b".to_string(), "QoA".to_string())]
        );
        let (x, log) = m.impute(&[0]);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].value, 6.0);
        assert_eq!(x[[1, 36]], 6.0);
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn disaggregation_doubles_utterance_columns() {
        let c = corpus();
        let disc = discrete(&c);
        let store = annotations(&c, Some(2.0));
        let reg = Registry::builtin();
        let mut opts = AggregationOptions::new([FeatureSet::PM, FeatureSet::DT, FeatureSet::QoA]);
        let plain = planned_columns(&reg, &opts).len();
        opts.disaggregate_by_participant = true;
        let sources = FeatureSources {
            discrete: Some(&disc),
            annotations: Some(&store),
        };
        let m = build_matrix(&c, sources, &reg, &opts).unwrap();
        assert_eq!(m.n_cols(), 2 * (plain - 1) + 1);
        assert_eq!(m.column_names[0], "PM - Please, mean (speaker 1)");
        // Speaker x says "thanks" in both turns; speaker y never does.
        assert_eq!(
            m.column("PM - Gratitude, mean (speaker 1)").unwrap()[0],
            1.0
        );
        assert_eq!(
            m.column("PM - Gratitude, mean (speaker 2)").unwrap()[0],
            0.0
        );

        let three = Dialogue::new(
            "c",
            "synthetic",
            None,
            [("a", "hi"), ("b", "hi"), ("c", "hi")],
            Target::binary(true),
        )
        .unwrap();
        let c3 = Corpus::new(vec![three], TaskKind::Binary).unwrap();
        let d3 = discrete(&c3);
        let err = build_matrix(
            &c3,
            FeatureSources {
                discrete: Some(&d3),
                annotations: None,
            },
            &reg,
            &AggregationOptions {
                disaggregate_by_participant: true,
                ..AggregationOptions::new([FeatureSet::PM])
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AggregationError::SpeakerCount { speakers: 3, .. }
        ));
    }

    #[test]
    fn full_registry_column_counts() {
        let reg = Registry::builtin();
        let mut opts = AggregationOptions::new(FeatureSet::ALL);
        assert_eq!(planned_columns(&reg, &opts).len(), 135);
        opts.include_optional = true;
        assert_eq!(planned_columns(&reg, &opts).len(), 143);
        opts.disaggregate_by_participant = true;
        assert_eq!(planned_columns(&reg, &opts).len(), 285);
    }

    #[test]
    fn csv_round_trip() {
        let c = corpus();
        let store = annotations(&c, None);
        let reg = Registry::builtin();
        let m = build_matrix(
            &c,
            FeatureSources {
                discrete: None,
                annotations: Some(&store),
            },
            &reg,
            &AggregationOptions::new([FeatureSet::DT, FeatureSet::QoA]),
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("dialogue_id,target,\"DT - Name calling/hostility, mean\""));
        let back = DialogueFeatureMatrix::read_csv(buf.as_slice(), m.manifest()).unwrap();
        assert_eq!(back.column_names, m.column_names);
        assert_eq!(back.topics, m.topics);
        assert_eq!(back.missing_cells(), m.missing_cells());
        let same = back
            .values
            .iter()
            .zip(m.values.iter())
            .all(|(a, b)| a == b || (a.is_nan() && b.is_nan()));
        assert!(same);
    }
}
