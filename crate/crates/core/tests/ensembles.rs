use ioexai_core::dataset::{features_for, train_test_split, Field};
use ioexai_core::eval::r_squared;
use ioexai_core::regress::{fit_ensemble, staged_training_loss, training_loss, FitConfig, ModelKind};
use ioexai_core::synth::{synth_generate, ScenarioConfig};
use ioexai_core::Matrix;
use proptest::prelude::*;

fn names(features: &[Field]) -> Vec<String> {
    features.iter().map(|f| f.name().to_string()).collect()
}

#[test]
fn extra_trees_fit_synthetic_training_partition() {
    let ds = synth_generate(&ScenarioConfig::reference(3)).unwrap();
    let ds = train_test_split(&ds, 1544, 662, 3).unwrap();
    for target in [Field::Cqi, Field::DlMbps, Field::UlMbps] {
        let features = features_for(target, true);
        let tr = ds.design(&features, target, &ds.split().unwrap().train);
        let cfg = FitConfig { seed: 17, ..FitConfig::for_kind(ModelKind::ExtraTrees) };
        let m = fit_ensemble(&tr.x, &tr.y, ModelKind::ExtraTrees, &cfg, names(&features), target.name().into())
            .unwrap();
        let p = m.predict_matrix(&tr.x).unwrap();
        let r2 = r_squared(&p, &tr.y).unwrap();
        assert!(r2 >= 0.9, "{} train R² {r2}", target.name());
    }
}

fn fixture() -> (Matrix, Vec<f64>) {
    let rows: Vec<[f64; 3]> = (0..60)
        .map(|i| {
            let t = f64::from(i);
            [t.sin() * 3.0, (0.37 * t).cos(), (t * 7.0) % 5.0]
        })
        .collect();
    let y = rows.iter().map(|r| 2.0 * r[0] - r[1] * r[2] + 0.3 * r[2] * r[2]).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn gradient_boosting_loss_never_increases() {
    let (x, y) = fixture();
    let cfg = FitConfig { n_estimators: 60, seed: 4, ..FitConfig::for_kind(ModelKind::GradientBoosting) };
    let m = fit_ensemble(&x, &y, ModelKind::GradientBoosting, &cfg, names(&[Field::SpeedKmh; 3]), "y".into()).unwrap();
    let staged = staged_training_loss(&m, &x, &y).unwrap();
    assert_eq!(staged.len(), 61);
    for w in staged.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} → {}", w[0], w[1]);
    }
}

#[test]
fn exact_fit_fixtures_reach_zero_loss() {
    let (x, _) = fixture();
    let y: Vec<f64> = x.rows().map(|r| 1.5 * r[0] - 0.5 * r[1] + 2.0 * r[2] + 4.0).collect();
    let cfg = FitConfig::for_kind(ModelKind::Linear);
    let m = fit_ensemble(&x, &y, ModelKind::Linear, &cfg, names(&[Field::SpeedKmh; 3]), "y".into()).unwrap();
    assert!(training_loss(&m.predict_matrix(&x).unwrap(), &y).unwrap() <= 1e-9);

    // distinct inputs, unlimited depth, min leaf 1, no bootstrap: trees interpolate
    let (x, y) = fixture();
    let cfg = FitConfig { n_estimators: 5, seed: 2, ..FitConfig::for_kind(ModelKind::ExtraTrees) };
    let m = fit_ensemble(&x, &y, ModelKind::ExtraTrees, &cfg, names(&[Field::SpeedKmh; 3]), "y".into()).unwrap();
    assert!(training_loss(&m.predict_matrix(&x).unwrap(), &y).unwrap() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn averaging_predictions_stay_within_member_range(seed in 0u64..1000, q in proptest::collection::vec(-4.0f64..4.0, 3)) {
        let (x, y) = fixture();
        for kind in [ModelKind::RandomForest, ModelKind::ExtraTrees] {
            let cfg = FitConfig { n_estimators: 7, seed, ..FitConfig::for_kind(kind) };
            let m = fit_ensemble(&x, &y, kind, &cfg, names(&[Field::SpeedKmh; 3]), "y".into()).unwrap();
            let members: Vec<f64> = m.trees.iter().map(|t| t.predict(&q)).collect();
            let lo = members.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = members.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let p = m.predict(&q).unwrap();
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn fitting_is_deterministic(seed in 0u64..1000, kind_idx in 0usize..5) {
        let (x, y) = fixture();
        let kind = ModelKind::ALL[kind_idx];
        let cfg = FitConfig { n_estimators: 5, seed, ..FitConfig::for_kind(kind) };
        let a = fit_ensemble(&x, &y, kind, &cfg, names(&[Field::SpeedKmh; 3]), "y".into()).unwrap();
        let b = fit_ensemble(&x, &y, kind, &cfg, names(&[Field::SpeedKmh; 3]), "y".into()).unwrap();
        prop_assert_eq!(a, b);
    }
}
