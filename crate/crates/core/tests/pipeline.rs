use std::fs;
use std::path::Path;

use constructive::annotation::MockStyle;
use constructive::corpus::TaskKind;
use constructive::metrics::Metric;
use constructive::models::ModelKind;
use constructive::pipeline::{
    cmd_audit, cmd_robustness, cmd_synth, run_all, verify_manifest, BaselineKind, ExperimentConfig,
    MAIN_MODEL,
};
use constructive::registry::FeatureSet;
use constructive::synth::{SynthParams, TopicSpec};

fn setup(dir: &Path, sets: Vec<FeatureSet>) -> ExperimentConfig {
    let mut params = SynthParams::planted_binary(120, 11);
    params.topics = ["a", "b"]
        .iter()
        .map(|t| TopicSpec {
            name: t.to_string(),
            offset: 0.0,
        })
        .collect();
    cmd_synth(&params, &dir.join("data")).unwrap();
    let mut c = ExperimentConfig::new(
        dir.join("data/corpus.jsonl"),
        TaskKind::Binary,
        dir.join("out"),
        ModelKind::Logistic,
    );
    c.dataset = "wikitactics".into();
    c.feature_sets = sets;
    c.k = 3;
    c.seeds = vec![0, 1];
    c.importance.repeats = 3;
    c.nshot_examples = 2;
    c.baselines = vec![
        BaselineKind::Constant,
        BaselineKind::Bow,
        BaselineKind::Topic,
        BaselineKind::Discrete,
        BaselineKind::Nshot,
    ];
    c.significance_against = vec!["constant".into(), "bow".into()];
    c
}

#[test]
fn full_pipeline_with_mock_annotator() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path(), FeatureSet::ALL.to_vec());
    config.provider.mock_style = MockStyle::Random;
    let report = run_all(&config).unwrap();

    let main = report.run(MAIN_MODEL).unwrap();
    // ~150 random mock columns against 80 training rows per fold
    assert!(main.summary(Metric::Auroc).mean > 0.75);
    let constant = report.run("constant").unwrap().summary(Metric::Auroc);
    assert!(constant.scores.iter().all(|&s| s == 0.5));
    assert_eq!(report.runs.len(), 6);
    // two seeds by three folds per metric
    assert_eq!(main.summary(Metric::Aupr).scores.len(), 6);
    assert_eq!(report.significance.len(), 4);

    let out = config.layout();
    for f in [
        "metrics.csv",
        "significance.csv",
        "predictions.csv",
        "per_topic.csv",
        "plot_score_vs_topic.csv",
        "importance.csv",
        "importance_top10.csv",
        "correlations.csv",
        "summary.csv",
        "summary.md",
    ] {
        assert!(out.report(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(out.report("summary.md")).unwrap();
    assert!(summary.contains("| features |"));
    assert!(verify_manifest(&config).unwrap().is_empty());

    let rows = cmd_robustness(&config).unwrap();
    assert!(rows.iter().any(|r| r.topic == "a" && r.seed == "all"));

    fs::write(out.report("summary.md"), "tampered").unwrap();
    assert_eq!(
        verify_manifest(&config).unwrap(),
        vec!["reports/summary.md".to_string()]
    );

    assert!(cmd_audit(&config, 5, 0, None).unwrap().is_none());
    assert!(out.report("audit_sheet.csv").exists());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let mut c = setup(d, vec![FeatureSet::PM, FeatureSet::CM]);
        c.baselines = vec![BaselineKind::Constant, BaselineKind::Bow];
        run_all(&c).unwrap();
    }
    for f in [
        "metrics.csv",
        "significance.csv",
        "predictions.csv",
        "importance.csv",
        "correlations.csv",
    ] {
        let x = fs::read(a.path().join("out/reports").join(f)).unwrap();
        let y = fs::read(b.path().join("out/reports").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    assert_eq!(
        fs::read(a.path().join("out/model.json")).unwrap(),
        fs::read(b.path().join("out/model.json")).unwrap()
    );
}

#[test]
fn invalid_significance_target_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path(), vec![FeatureSet::PM]);
    config.significance_against = vec!["embedding".into()];
    let err = run_all(&config).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(!dir.path().join("out").exists());
}
