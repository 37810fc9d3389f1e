use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::runner::AnnotationStore;
use super::AnnotationError;
use crate::registry::FeatureSet;

/// Feature label used for pairwise quality-of-arguments rows. Their
/// `dialogue_id` holds `<first>|<second>` and the value is `first`,
/// `second` or `equal` (which dialogue argued better).
pub const QOA_PAIR_FEATURE: &str = "QoA pair";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub dialogue_id: String,
    pub utterance_index: Option<usize>,
    pub feature: String,
    pub model_value: String,
    pub human_value: Option<String>,
}

/// Every flag of `n` randomly chosen annotated utterances.
pub fn audit_sample(
    store: &AnnotationStore,
    n: usize,
    seed: u64,
) -> Result<Vec<AuditRow>, AnnotationError> {
    let mut population = Vec::new();
    for (id, d) in &store.dialogues {
        let len = d
            .dispute_tactics
            .as_ref()
            .map(Vec::len)
            .or(d.info_style.as_ref().map(Vec::len))
            .unwrap_or(0);
        for i in 0..len {
            let has_dt = d.dispute_tactics.as_ref().is_some_and(|v| v[i].is_some());
            let has_is = d.info_style.as_ref().is_some_and(|v| v[i].is_some());
            if has_dt || has_is {
                population.push((id.as_str(), i));
            }
        }
    }
    if population.len() < n {
        return Err(AnnotationError::Audit(format!(
            "requested {n} utterances but only {} are annotated",
            population.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, population.len(), n).into_vec();
    chosen.sort_unstable();

    let mut rows = Vec::new();
    for idx in chosen {
        let (id, i) = population[idx];
        let d = &store.dialogues[id];
        let mut push = |set: FeatureSet, name: &str, value: f64| {
            rows.push(AuditRow {
                dialogue_id: id.to_string(),
                utterance_index: Some(i),
                feature: format!("{set} - {name}"),
                model_value: format!("{value}"),
                human_value: None,
            })
        };
        if let Some(Some(a)) = d.dispute_tactics.as_ref().map(|v| v[i]) {
            for (name, v) in a.features() {
                push(FeatureSet::DT, name, v);
            }
        }
        if let Some(Some(a)) = d.info_style.as_ref().map(|v| v[i]) {
            for (name, v) in a.ic_features(true) {
                push(FeatureSet::IC, name, v);
            }
            for (name, v) in a.st_features() {
                push(FeatureSet::ST, name, v);
            }
        }
    }
    Ok(rows)
}

fn order(a: f64, b: f64) -> &'static str {
    if a > b {
        "first"
    } else if b > a {
        "second"
    } else {
        "equal"
    }
}

/// `n` distinct dialogue pairs with the order implied by parsed scores.
pub fn audit_qoa_pairs(
    store: &AnnotationStore,
    n: usize,
    seed: u64,
) -> Result<Vec<AuditRow>, AnnotationError> {
    let scored: Vec<(&str, f64)> = store
        .dialogues
        .iter()
        .filter_map(|(id, d)| d.qoa.flatten().map(|s| (id.as_str(), s)))
        .collect();
    let m = scored.len();
    let pairs = m * m.saturating_sub(1) / 2;
    if pairs < n {
        return Err(AnnotationError::Audit(format!(
            "requested {n} pairs but only {pairs} exist among {m} scored dialogues"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, pairs, n).into_vec();
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|p| {
            // Row-major index over the strict upper triangle.
            let mut i = 0;
            let mut rest = p;
            while rest >= m - 1 - i {
                rest -= m - 1 - i;
                i += 1;
            }
            let j = i + 1 + rest;
            let (a, sa) = scored[i];
            let (b, sb) = scored[j];
            AuditRow {
                dialogue_id: format!("{a}|{b}"),
                utterance_index: None,
                feature: QOA_PAIR_FEATURE.into(),
                model_value: order(sa, sb).into(),
                human_value: None,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub matches: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    /// Flag accuracy per feature.
    pub features: BTreeMap<String, Agreement>,
    /// Pairwise order agreement for quality of arguments.
    pub qoa_pairs: Option<Agreement>,
}

fn same(model: &str, human: &str) -> bool {
    match (model.trim().parse::<f64>(), human.trim().parse::<f64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => model.trim().eq_ignore_ascii_case(human.trim()),
    }
}

/// Compares model and human values. A score tie only agrees with a human
/// "equal".
pub fn audit_agreement(rows: &[AuditRow]) -> Result<AuditReport, AnnotationError> {
    let mut tallies: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut pairs = (0usize, 0usize);
    for (i, row) in rows.iter().enumerate() {
        let human = row
            .human_value
            .as_deref()
            .filter(|h| !h.trim().is_empty())
            .ok_or(AnnotationError::MissingHumanLabel { row: i + 1 })?;
        let hit = usize::from(same(&row.model_value, human));
        if row.feature == QOA_PAIR_FEATURE {
            pairs.0 += hit;
            pairs.1 += 1;
        } else {
            let t = tallies.entry(row.feature.clone()).or_default();
            t.0 += hit;
            t.1 += 1;
        }
    }
    let agreement = |(matches, total): (usize, usize)| Agreement {
        matches,
        total,
        rate: matches as f64 / total as f64,
    };
    Ok(AuditReport {
        features: tallies
            .into_iter()
            .map(|(k, v)| (k, agreement(v)))
            .collect(),
        qoa_pairs: (pairs.1 > 0).then(|| agreement(pairs)),
    })
}

pub fn write_audit_sheet<W: Write>(rows: &[AuditRow], out: W) -> Result<(), AnnotationError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| AnnotationError::Io {
        path: "audit sheet".into(),
        source,
    })
}

pub fn read_audit_sheet<R: Read>(input: R) -> Result<Vec<AuditRow>, AnnotationError> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::parse::DisputeTacticsAnnotation;
    use crate::annotation::runner::DialogueAnnotations;

    fn store(dialogues: usize, utterances: usize) -> AnnotationStore {
        let mut s = AnnotationStore::default();
        for d in 0..dialogues {
            s.dialogues.insert(
                format!("d{d:03}"),
                DialogueAnnotations {
                    dispute_tactics: Some(vec![
                        Some(DisputeTacticsAnnotation {
                            levels: [0; 9],
                            labels: [1; 9],
                        });
                        utterances
                    ]),
                    info_style: None,
                    qoa: Some(Some(d as f64 % 7.0)),
                    history_dropped: vec![],
                },
            );
        }
        s
    }

    #[test]
    fn sample_size_and_determinism() {
        let s = store(20, 10);
        let a = audit_sample(&s, 100, 7).unwrap();
        assert_eq!(a.len(), 100 * 18);
        assert_eq!(a, audit_sample(&s, 100, 7).unwrap());
        assert!(audit_sample(&s, 201, 7).is_err());
    }

    #[test]
    fn accuracy_is_a_ratio() {
        let rows: Vec<AuditRow> = (0..100)
            .map(|i| AuditRow {
                dialogue_id: "d".into(),
                utterance_index: Some(i),
                feature: "DT - Other".into(),
                model_value: "1".into(),
                human_value: Some(if i < 93 { "1" } else { "0" }.into()),
            })
            .collect();
        let report = audit_agreement(&rows).unwrap();
        assert_eq!(report.features["DT - Other"].rate, 0.93);
        assert!(report.qoa_pairs.is_none());
    }

    #[test]
    fn identical_sheets_agree_fully() {
        let mut rows = audit_sample(&store(5, 4), 10, 1).unwrap();
        rows.extend(audit_qoa_pairs(&store(5, 4), 10, 1).unwrap());
        for r in &mut rows {
            r.human_value = Some(r.model_value.clone());
        }
        let report = audit_agreement(&rows).unwrap();
        assert!(report.features.values().all(|a| a.rate == 1.0));
        assert_eq!(report.qoa_pairs.unwrap().rate, 1.0);
    }

    #[test]
    fn pairs_are_distinct_and_ties_need_equal() {
        let rows = audit_qoa_pairs(&store(8, 1), 28, 3).unwrap();
        let ids: std::collections::BTreeSet<_> = rows.iter().map(|r| &r.dialogue_id).collect();
        assert_eq!(ids.len(), 28);
        assert!(audit_qoa_pairs(&store(8, 1), 29, 3).is_err());

        let tie = AuditRow {
            dialogue_id: "a|b".into(),
            utterance_index: None,
            feature: QOA_PAIR_FEATURE.into(),
            model_value: "equal".into(),
            human_value: Some("first".into()),
        };
        assert_eq!(
            audit_agreement(&[tie]).unwrap().qoa_pairs.unwrap().matches,
            0
        );
    }

    #[test]
    fn missing_human_label_is_an_error() {
        let mut rows = audit_sample(&store(2, 2), 2, 0).unwrap();
        let csv_rows = rows.clone();
        let mut buf = Vec::new();
        write_audit_sheet(&csv_rows, &mut buf).unwrap();
        assert_eq!(read_audit_sheet(buf.as_slice()).unwrap(), csv_rows);
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("dialogue_id,utterance_index,feature,model_value,human_value\n"));
        rows[0].human_value = Some("1".into());
        assert!(matches!(
            audit_agreement(&rows),
            Err(AnnotationError::MissingHumanLabel { row: 2 })
        ));
    }
}
