mod common;

use ampgan::classifiers::stacking::{fit_meta, meta_features};
use ampgan::classifiers::{
    predict_stacking, train, train_stacking, ClassifierKind, ClassifierSpec, FittedParams,
    ForestParams, Hyperparams, LogisticModel, StackingMode, StackingModel, TrainedModel,
    TreeParams,
};
use ampgan::evaluation::{confusion, mcc};
use ndarray::{array, Array1, Array2};

fn training_mcc(p: &Array1<f64>, y: &[u8]) -> f64 {
    let pred: Vec<u8> = p.iter().map(|&v| u8::from(v >= 0.5)).collect();
    mcc(&confusion(y, &pred).unwrap())
}

fn all_specs(seed: u64) -> Vec<ClassifierSpec> {
    ClassifierKind::ALL
        .iter()
        .map(|&k| ClassifierSpec::default_for(k, seed))
        .collect()
}

#[test]
fn logistic_fits_blobs_to_tolerance() {
    let (x, y) = common::blobs(100, 100, 2.0, 1);
    let spec = ClassifierSpec::default_for(ClassifierKind::Logistic, 0);
    let m = train(&spec, x.view(), &y).unwrap();
    let FittedParams::Logistic(lr) = &m.fitted else { unreachable!() };
    assert!(lr.converged);
    assert!(lr.gradient_norm <= 1e-6, "gradient norm {}", lr.gradient_norm);
    assert!(training_mcc(&m.predict_proba(x.view()).unwrap(), &y) >= 0.95);
}

#[test]
fn single_tree_forest_equals_tree() {
    let (x, y) = common::blobs(40, 50, 0.7, 2);
    let tree = train(
        &ClassifierSpec { params: Hyperparams::Tree(TreeParams::default()), seed: 0 },
        x.view(),
        &y,
    )
    .unwrap();
    let forest = train(
        &ClassifierSpec {
            params: Hyperparams::Forest(ForestParams {
                n_trees: 1,
                max_features: Some(2),
                bootstrap: false,
                tree: TreeParams::default(),
            }),
            seed: 9,
        },
        x.view(),
        &y,
    )
    .unwrap();
    let probe = Array2::from_shape_fn((200, 2), |(i, j)| (i as f64 * 0.37 + j as f64 * 1.3).sin() * 3.0);
    assert_eq!(
        tree.predict_proba(probe.view()).unwrap(),
        forest.predict_proba(probe.view()).unwrap()
    );
}

#[test]
fn every_kind_is_deterministic_and_bounded() {
    let (x, y) = common::blobs(30, 40, 0.8, 3);
    for spec in all_specs(17) {
        let a = train(&spec, x.view(), &y).unwrap();
        let b = train(&spec, x.view(), &y).unwrap();
        assert_eq!(a.to_checkpoint(), b.to_checkpoint(), "{}", spec.kind());
        let p = a.predict_proba(x.view()).unwrap();
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)), "{}", spec.kind());
    }
}

#[test]
fn tree_probabilities_are_leaf_fractions() {
    let x = array![[0.0], [0.0], [0.0], [1.0]];
    let spec = ClassifierSpec::default_for(ClassifierKind::Tree, 0);
    let m = train(&spec, x.view(), &[0, 1, 1, 0]).unwrap();
    let p = m.predict_proba(array![[0.0], [1.0]].view()).unwrap();
    assert_eq!(p.to_vec(), vec![2.0 / 3.0, 0.0]);
}

#[test]
fn nb_identical_classes_predict_half() {
    let x = array![[1.0, 2.0], [3.0, -1.0], [1.0, 2.0], [3.0, -1.0]];
    let spec = ClassifierSpec::default_for(ClassifierKind::GaussianNb, 0);
    let m = train(&spec, x.view(), &[0, 0, 1, 1]).unwrap();
    let probe = array![[0.0, 0.0], [5.0, 7.0], [2.0, 0.5]];
    assert!(m.predict_proba(probe.view()).unwrap().iter().all(|&p| p == 0.5));
}

#[test]
fn stacking_fits_blobs() {
    let (x, y) = common::blobs(100, 100, 2.0, 4);
    let meta = ClassifierSpec::default_for(ClassifierKind::Logistic, 1);
    let m = train_stacking(&all_specs(2), &meta, x.view(), &y, StackingMode::Paper).unwrap();
    assert_eq!(m.meta.feature_dim, 5);
    assert!(training_mcc(&predict_stacking(&m, x.view()).unwrap(), &y) >= 0.95);
}

#[test]
fn out_of_fold_stacking_fits_blobs() {
    let (x, y) = common::blobs(60, 60, 2.0, 5);
    let meta = ClassifierSpec::default_for(ClassifierKind::Logistic, 1);
    let specs = vec![
        ClassifierSpec::default_for(ClassifierKind::GaussianNb, 0),
        ClassifierSpec::default_for(ClassifierKind::Tree, 0),
    ];
    let m = train_stacking(&specs, &meta, x.view(), &y, StackingMode::OutOfFold).unwrap();
    assert_eq!(m.mode, StackingMode::OutOfFold);
    assert!(training_mcc(&m.predict_proba(x.view()).unwrap(), &y) >= 0.95);
}

#[test]
fn duplicate_bases_still_train() {
    let (x, y) = common::blobs(40, 40, 1.5, 6);
    let spec = ClassifierSpec::default_for(ClassifierKind::Tree, 3);
    let meta = ClassifierSpec::default_for(ClassifierKind::Logistic, 0);
    let m = train_stacking(&[spec.clone(), spec], &meta, x.view(), &y, StackingMode::Paper).unwrap();
    let z = meta_features(&m.base, x.view()).unwrap();
    assert_eq!(z.column(0), z.column(1));
    assert!(m.meta.predict_proba(z.view()).unwrap().iter().all(|p| p.is_finite()));
}

#[test]
fn meta_on_one_base_preserves_its_order() {
    let (x, y) = common::blobs(40, 40, 0.8, 7);
    let specs = all_specs(4);
    let meta = ClassifierSpec::default_for(ClassifierKind::Logistic, 0);
    let mut m = train_stacking(&specs, &meta, x.view(), &y, StackingMode::Paper).unwrap();
    let k = 2;
    let mut w = LogisticModel::zeros(specs.len());
    w.weights[k] = 3.0;
    m.meta.fitted = FittedParams::Logistic(w);
    let out = m.predict_proba(x.view()).unwrap();
    let base = m.base[k].predict_proba(x.view()).unwrap();
    for i in 0..out.len() {
        for j in 0..out.len() {
            if base[i] < base[j] {
                assert!(out[i] < out[j]);
            }
        }
    }
}

#[test]
fn ensemble_equals_manual_two_step() {
    let (x, y) = common::blobs(50, 30, 0.6, 8);
    let meta = ClassifierSpec::default_for(ClassifierKind::Logistic, 5);
    let m = train_stacking(&all_specs(6), &meta, x.view(), &y, StackingMode::Paper).unwrap();
    let probe = Array2::from_shape_fn((30, 2), |(i, j)| (i * 7 + j * 3) as f64 / 10.0 - 1.5);
    let mut z = Array2::zeros((30, m.base.len()));
    for (k, b) in m.base.iter().enumerate() {
        z.column_mut(k).assign(&b.predict_proba(probe.view()).unwrap());
    }
    assert_eq!(
        m.predict_proba(probe.view()).unwrap(),
        m.meta.predict_proba(z.view()).unwrap()
    );
}

#[test]
fn fit_meta_matches_paper_mode() {
    let (x, y) = common::blobs(40, 40, 1.0, 9);
    let specs = all_specs(3);
    let meta = ClassifierSpec::default_for(ClassifierKind::Logistic, 0);
    let full = train_stacking(&specs, &meta, x.view(), &y, StackingMode::Paper).unwrap();
    let bases: Vec<TrainedModel> = specs.iter().map(|s| train(s, x.view(), &y).unwrap()).collect();
    let reused = fit_meta(bases, &meta, x.view(), &y).unwrap();
    assert_eq!(full, reused);
}

#[test]
fn stacking_checkpoint_round_trip() {
    let (x, y) = common::blobs(20, 20, 1.0, 10);
    let specs = vec![
        ClassifierSpec::default_for(ClassifierKind::Tree, 0),
        ClassifierSpec::default_for(ClassifierKind::GaussianNb, 0),
    ];
    let meta = ClassifierSpec::default_for(ClassifierKind::Logistic, 0);
    let m = train_stacking(&specs, &meta, x.view(), &y, StackingMode::Paper).unwrap();
    assert_eq!(StackingModel::from_checkpoint(&m.to_checkpoint()).unwrap(), m);
    assert!(TrainedModel::from_checkpoint(&m.to_checkpoint()).is_err());
}
