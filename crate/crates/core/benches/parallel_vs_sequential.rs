use ampgan::classifiers::{train_with, ClassifierKind, ClassifierSpec};
use ampgan::encoding::{Encoder, EncoderConfigs, EncoderKind};
use ampgan::evaluation::{evaluate_features, BalanceMode, CvConfig, ExperimentSetup, ModelChoice};
use ampgan::gan::GanConfig;
use ampgan::par::Exec;
use ampgan::toy::{generate_toy, ToySpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench(c: &mut Criterion) {
    let ds = generate_toy(&ToySpec::balanced()).unwrap();
    let encoder = Encoder::new(EncoderConfigs::default(), &EncoderKind::ALL).unwrap();
    let fm = encoder.encode_dataset(&ds, Exec::Sequential).unwrap();

    let mut g = c.benchmark_group("encode_dataset");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| encoder.encode_dataset(black_box(&ds), exec).unwrap())
        });
    }
    g.finish();

    let forest = ClassifierSpec::default_for(ClassifierKind::Forest, 0);
    let mut g = c.benchmark_group("forest_fit");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_with(&forest, fm.rows.view(), &fm.labels, exec).unwrap())
        });
    }
    g.finish();

    let models = [
        ModelChoice::Base(ClassifierSpec::default_for(ClassifierKind::GaussianNb, 0)),
        ModelChoice::Base(ClassifierSpec::default_for(ClassifierKind::Tree, 0)),
    ];
    let mut g = c.benchmark_group("mccv_folds");
    g.sample_size(10);
    for (name, exec) in MODES {
        let setup = ExperimentSetup {
            balance: BalanceMode::Off,
            gan: GanConfig::default(),
            cv: CvConfig::default(),
            seed: 0,
            exec,
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_features("toy", &fm, &models, &setup).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
