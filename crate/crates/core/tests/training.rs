//! Convergence and determinism fixtures for MLP training.

use impactfuse_core::linalg::Matrix;
use impactfuse_core::mlp::{train, MlpError, LabeledSet, MlpConfig, MlpModel};
use impactfuse_core::CanonicalLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two well separated Gaussian blobs labeled Opportunity / Risk; class 2 is empty.
fn separable(n: usize, seed: u64) -> (Matrix, Vec<CanonicalLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = if i % 2 == 0 { CanonicalLabel::Opportunity } else { CanonicalLabel::Risk };
        let center = if i % 2 == 0 { 2.0 } else { -2.0 };
        rows.push(vec![center + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0), center * 0.5]);
        labels.push(label);
    }
    (Matrix::from_rows(3, &rows), labels)
}

fn xor() -> (Matrix, Vec<CanonicalLabel>) {
    let pts = [([0.0, 0.0], 0), ([1.0, 1.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..8 {
        for (p, l) in pts {
            rows.push(p.to_vec());
            labels.push(CanonicalLabel::ALL[l]);
        }
    }
    (Matrix::from_rows(2, &rows), labels)
}

fn accuracy(model: &MlpModel, x: &Matrix, y: &[CanonicalLabel]) -> f64 {
    let preds = model.predict_batch(x).unwrap();
    preds.iter().zip(y).filter(|(p, g)| p == g).count() as f64 / y.len() as f64
}

#[test]
fn separable_fixture_reaches_full_train_accuracy() {
    let (x, y) = separable(64, 1);
    let cfg = MlpConfig {
        input_dim: 3,
        hidden_dims: vec![16],
        learning_rate: 1e-2,
        batch_size: 8,
        seed: 3,
        ..MlpConfig::default()
    };
    let set = LabeledSet::new(&x, &y).unwrap();
    let (model, report) = train(MlpModel::init(cfg).unwrap(), set, set).unwrap();
    assert_eq!(accuracy(&model, &x, &y), 1.0);
    assert!(report.epochs[0].train_loss < report.initial_loss);
    assert!(report.best_epoch >= 1 && report.best_epoch <= report.epochs.len());
    assert!(report.epochs.iter().all(|e| e.train_loss.is_finite()));
    assert!(model.is_finite());
}

#[test]
fn first_epoch_lowers_the_loss() {
    let (x, y) = separable(64, 2);
    let cfg = MlpConfig {
        input_dim: 3,
        hidden_dims: vec![8],
        max_epochs: 1,
        seed: 1,
        ..MlpConfig::default()
    };
    let init = MlpModel::init(cfg).unwrap();
    let set = LabeledSet::new(&x, &y).unwrap();
    let examples: Vec<(&[f64], usize)> = (0..y.len()).map(|i| (x.row(i), y[i].code())).collect();
    let before = init.loss(&examples).unwrap();
    let (after_model, _) = train(init, set, set).unwrap();
    assert!(after_model.loss(&examples).unwrap() < before);
}

#[test]
fn xor_is_learned_with_a_hidden_layer() {
    let (x, y) = xor();
    let cfg = MlpConfig {
        input_dim: 2,
        hidden_dims: vec![8],
        learning_rate: 0.05,
        batch_size: 8,
        max_epochs: 400,
        patience: 400,
        l2_lambda: 0.0,
        seed: 7,
        ..MlpConfig::default()
    };
    let set = LabeledSet::new(&x, &y).unwrap();
    let (model, report) = train(MlpModel::init(cfg).unwrap(), set, set).unwrap();
    assert_eq!(accuracy(&model, &x, &y), 1.0, "best epoch {}", report.best_epoch);
    assert!(model.is_finite());
}

#[test]
fn training_is_deterministic() {
    let (x, y) = separable(40, 4);
    let cfg = MlpConfig {
        input_dim: 3,
        hidden_dims: vec![6],
        max_epochs: 5,
        seed: 11,
        ..MlpConfig::default()
    };
    let set = LabeledSet::new(&x, &y).unwrap();
    let (m1, r1) = train(MlpModel::init(cfg.clone()).unwrap(), set, set).unwrap();
    let (m2, r2) = train(MlpModel::init(cfg).unwrap(), set, set).unwrap();
    assert_eq!(r1, r2);
    let bits = |m: &MlpModel| m.parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&m1), bits(&m2));
}

#[test]
fn huge_learning_rate_reports_non_finite_loss() {
    let (x, y) = separable(16, 5);
    let cfg = MlpConfig {
        input_dim: 3,
        hidden_dims: vec![4],
        learning_rate: 1e300,
        max_epochs: 3,
        seed: 2,
        ..MlpConfig::default()
    };
    let set = LabeledSet::new(&x, &y).unwrap();
    let err = train(MlpModel::init(cfg).unwrap(), set, set).unwrap_err();
    assert!(matches!(err, MlpError::NonFiniteLoss { .. }), "{err}");
    assert!(err.to_string().contains("learning rate"));
}

#[test]
fn batch_predict_equals_row_predict() {
    let (x, _) = separable(10, 6);
    let m = MlpModel::init(MlpConfig {
        input_dim: 3,
        hidden_dims: vec![5],
        ..MlpConfig::default()
    })
    .unwrap();
    let batch = m.predict_batch(&x).unwrap();
    let logits = m.predict_logits(&x).unwrap();
    for i in 0..x.rows() {
        assert_eq!(batch[i], m.predict(x.row(i)).unwrap());
        assert_eq!(logits.row(i), m.forward(x.row(i)).unwrap().as_slice());
    }
}

#[test]
fn empty_dev_and_mismatched_dims_are_errors() {
    let (x, y) = separable(10, 6);
    let m = MlpModel::init(MlpConfig::with_input_dim(3)).unwrap();
    let empty = Matrix::zeros(0, 3);
    let train_set = LabeledSet::new(&x, &y).unwrap();
    assert!(train(m.clone(), train_set, LabeledSet::new(&empty, &[]).unwrap()).is_err());
    let wrong = Matrix::zeros(10, 4);
    assert!(train(m, LabeledSet::new(&wrong, &y).unwrap(), train_set).is_err());
    assert!(LabeledSet::new(&x, &y[..3]).is_err());
}
