mod common;

use std::fs;
use std::path::Path;

use ampgan::classifiers::{ClassifierKind, ClassifierSpec};
use ampgan::evaluation::{evaluate_features, BalanceMode, CvConfig, EvaluationReport, ExperimentSetup, ModelChoice};
use ampgan::gan::GanConfig;
use ampgan::par::Exec;
use ampgan::pipeline::{
    cmd_encode, cmd_report, cmd_run, load_reports, mcc_table, read_features, report_file_name,
    Overrides, ReportEnvelope, RunConfig,
};
use ampgan::toy::{generate_toy, ToySpec};
use ampgan::Error;
use serde_json::json;

const TWO_SEQS: &str = ">a|1\nKWKLFKKIGAVLKVL\n>b|0\nDESTPGSGEAAQ\n>c|1\nGLLKKLKKLLKK\n>d|0\nSPEDNQTDAGSA\n";

fn config(dir: &Path, body: &str) -> RunConfig {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    RunConfig::load(&path).unwrap().resolve(&Overrides::default()).unwrap()
}

fn sample_reports(models: &[ModelChoice], balance: BalanceMode) -> Vec<EvaluationReport> {
    let (x, y) = common::blobs(20, 30, 1.0, 3);
    let setup = ExperimentSetup {
        balance,
        gan: GanConfig { generator_steps: 5, ..GanConfig::default() },
        cv: CvConfig { n_folds: 2, ..CvConfig::default() },
        seed: 1,
        exec: Exec::Sequential,
    };
    evaluate_features("blobs", &common::feature_matrix(x, y), models, &setup).unwrap()
}

fn nb() -> ModelChoice {
    ModelChoice::Base(ClassifierSpec::default_for(ClassifierKind::GaussianNb, 0))
}

fn write_envelope(dir: &Path, r: &EvaluationReport) {
    let env = ReportEnvelope {
        toolkit: "ampgan".into(),
        version: "test".into(),
        generated_at: 0,
        config: json!({}),
        report: r.clone(),
    };
    fs::write(dir.join(report_file_name(r)), serde_json::to_string(&env).unwrap()).unwrap();
}

#[test]
fn encode_aac_only_gives_twenty_columns() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.fasta"), TWO_SEQS).unwrap();
    let cfg = config(
        tmp.path(),
        "output_dir = \"out\"\n[[datasets]]\nname = \"s\"\npath = \"s.fasta\"\n[encoders]\nenabled = [\"aac\"]\n",
    );
    let s = cmd_encode(&cfg).unwrap();
    assert!(s.ok());
    let (fm, prov) = read_features(&s.written[0]).unwrap();
    assert_eq!(fm.n_features(), 20);
    assert_eq!(fm.n_samples(), 4);
    assert!(prov.is_none());
    assert!(tmp.path().join("out/features/s.meta.json").exists());
}

#[test]
fn missing_dataset_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "output_dir = \"out\"\n[[datasets]]\nname = \"gone\"\npath = \"nowhere.fasta\"\n",
    );
    let s = cmd_encode(&cfg).unwrap();
    assert_eq!(s.failures.len(), 1);
    let (name, err) = &s.failures[0];
    assert_eq!(name, "gone");
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
    assert!(err.to_string().contains("nowhere.fasta"), "{err}");
}

#[test]
fn single_report_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    write_envelope(tmp.path(), &sample_reports(&[nb()], BalanceMode::Off)[0]);
    let (table, summary) = cmd_report(tmp.path()).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines, vec!["dataset,GN-G", lines[1]]);
    assert!(lines[1].starts_with("blobs,"));
    assert!(lines[1].contains(" ± "));
    assert!(summary.contains("blobs"));
}

#[test]
fn paired_table_over_three_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    let reports_dir = tmp.path().join("reports");
    fs::create_dir(&reports_dir).unwrap();
    let tree = ModelChoice::Base(ClassifierSpec::default_for(ClassifierKind::Tree, 0));
    let minus = sample_reports(&[nb(), tree.clone()], BalanceMode::Off);
    let plus = sample_reports(&[nb(), tree], BalanceMode::PerFold);
    for d in ["d1", "d2", "d3"] {
        for r in minus.iter().chain(&plus) {
            let mut r = r.clone();
            r.dataset = d.into();
            write_envelope(&reports_dir, &r);
        }
    }
    let reports = load_reports(tmp.path()).unwrap();
    assert_eq!(reports.len(), 12);
    let table = mcc_table(&reports);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "dataset,GN-G,GN+G,DT-G,DT+G");
    assert_eq!(lines.len(), 4);
    for (line, d) in lines[1..].iter().zip(["d1", "d2", "d3"]) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], d);
        assert!(cells[1..].iter().all(|c| c.contains(" ± ")));
    }
}

#[test]
fn empty_report_dir_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = cmd_report(tmp.path()).unwrap_err();
    assert!(err.to_string().contains("no reports found"), "{err}");
}

#[test]
fn mixed_schema_versions_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut r = sample_reports(&[nb()], BalanceMode::Off).remove(0);
    write_envelope(tmp.path(), &r);
    r.schema_version = 99;
    r.dataset = "other".into();
    write_envelope(tmp.path(), &r);
    assert!(matches!(load_reports(tmp.path()), Err(Error::Schema(_))));
}

#[test]
fn model_choice_survives_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let ens = ModelChoice::Ensemble {
        bases: vec![
            ClassifierSpec::default_for(ClassifierKind::GaussianNb, 1),
            ClassifierSpec::default_for(ClassifierKind::Tree, 2),
        ],
        meta: ClassifierSpec::default_for(ClassifierKind::Logistic, 3),
        mode: Default::default(),
    };
    let written = sample_reports(&[nb(), ens], BalanceMode::Off);
    for r in &written {
        write_envelope(tmp.path(), r);
    }
    let mut back = load_reports(tmp.path()).unwrap();
    back.sort_by(|a, b| a.classifier.cmp(&b.classifier));
    let mut expected = written.clone();
    expected.sort_by(|a, b| a.classifier.cmp(&b.classifier));
    assert_eq!(back, expected);
}

#[test]
fn balance_off_run_has_no_plus_columns() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("toy.fasta"),
        generate_toy(&ToySpec { n_pos: 20, n_neg: 30, ..ToySpec::imbalanced() })
            .unwrap()
            .to_fasta(),
    )
    .unwrap();
    let cfg = config(
        tmp.path(),
        "output_dir = \"out\"\nbalance = \"off\"\n\
         [[datasets]]\nname = \"toy\"\npath = \"toy.fasta\"\n\
         [encoders]\nenabled = [\"aac\", \"physchem\"]\n\
         [classifiers]\nbase = [\"gaussian_nb\", \"tree\"]\n\
         [cv]\nn_folds = 2\n",
    );
    let out = cmd_run(&cfg).unwrap();
    assert!(out.failures.is_empty());
    assert!(out.reports.iter().all(|r| r.balancing == "-G"));
    assert!(out.checks.is_empty());
    let table = fs::read_to_string(tmp.path().join("out/table_mcc.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "dataset,GN-G,DT-G,Ensemble-G");
    for f in ["summary.txt", "config.resolved.toml", "run_summary.json", "table_mcc.meta.json"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
    let resolved = RunConfig::from_toml(
        &fs::read_to_string(tmp.path().join("out/config.resolved.toml")).unwrap(),
    )
    .unwrap();
    assert_eq!(resolved, cfg);
}

#[test]
fn shipped_toy_files_match_generator() {
    for spec in [ToySpec::balanced(), ToySpec::imbalanced()] {
        let shipped = fs::read_to_string(common::toy_dir().join(format!("{}.fasta", spec.name))).unwrap();
        assert_eq!(generate_toy(&spec).unwrap().to_fasta(), shipped, "{}", spec.name);
    }
}

#[test]
fn toy_config_loads() {
    let cfg = RunConfig::load(&common::toy_dir().join("toy.toml")).unwrap();
    assert_eq!(cfg.datasets.len(), 2);
    for d in &cfg.datasets {
        assert!(d.path.exists(), "{}", d.path.display());
    }
}
