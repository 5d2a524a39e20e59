use ioexai_core::dataset::{train_test_split, Dataset, Field};
use ioexai_core::pipeline::{objective_value, run_pipeline, MobilityMode, PipelineConfig};
use ioexai_core::regress::{training_loss, ModelKind};
use ioexai_core::synth::{synth_generate, ScenarioConfig};
use ioexai_core::Error;

fn reference_dataset(seed: u64) -> Dataset {
    let ds = synth_generate(&ScenarioConfig::reference(seed)).unwrap();
    train_test_split(&ds, 1544, 662, seed).unwrap()
}

#[test]
fn table_scale_run_counts_and_feasibility() {
    let ds = reference_dataset(21);
    let mut cfg = PipelineConfig::new(ModelKind::ExtraTrees);
    cfg.targets = vec![Field::Cqi];
    cfg.explain_cap = Some(150);
    let out = run_pipeline(&ds, &cfg).unwrap();

    assert_eq!(ds.topology.as_ref().unwrap().sites.len(), 8);
    assert_eq!(out.targets[0].features.len(), 8);
    assert_eq!(out.counters.explained_rows, 150);
    assert_eq!(out.counters.coalition_evaluations, 256 * 150);
    assert_eq!(out.counters.link_evaluations, 8 * ds.len());
    out.associations.check_feasibility(&ds, &cfg).unwrap();

    let t = &out.targets[0];
    let recomputed = training_loss(&t.train_predictions, &t.train_targets).unwrap();
    assert!((recomputed - t.training_loss).abs() <= 1e-12);
    assert!(t.test_predictions.iter().all(|p| *p >= 0.0));
    assert_eq!(t.importance.mean_abs_phi.len(), 8);

    let again = run_pipeline(&ds, &cfg).unwrap();
    assert_eq!(again, out);
}

#[test]
fn tight_thresholds_leave_users_unassociated_with_reasons() {
    let ds = reference_dataset(4);
    let mut cfg = PipelineConfig::new(ModelKind::Linear);
    cfg.targets = vec![Field::Cqi];
    cfg.explain_cap = Some(10);
    cfg.omega_dbm = -85.0;
    cfg.h_max_m = 500.0;
    let out = run_pipeline(&ds, &cfg).unwrap();
    let users = &out.associations.users;
    assert!(users.iter().any(|u| !u.rsrp_ok));
    assert!(users.iter().any(|u| !u.mobility_ok));
    for (k, u) in users.iter().enumerate() {
        assert_eq!(u.serving.is_some(), u.rsrp_ok && u.rsrq_ok && u.mobility_ok);
        let total: u8 = out.associations.cells.iter().map(|b| out.associations.z(k, *b)).sum();
        assert!(total <= 1);
    }
    out.associations.check_feasibility(&ds, &cfg).unwrap();

    cfg.mobility = MobilityMode::Literal;
    cfg.h_max_m = 1e9;
    assert!(matches!(run_pipeline(&ds, &cfg), Err(Error::EmptyCohort)));
}

#[test]
fn objective_grows_with_the_cohort() {
    let ds = reference_dataset(9);
    let mut cfg = PipelineConfig::new(ModelKind::GradientBoosting);
    cfg.fit.n_estimators = 20;
    cfg.targets = vec![Field::Cqi];
    cfg.explain_cap = Some(5);
    let mut out = run_pipeline(&ds, &cfg).unwrap();
    let full = objective_value(&out, &ds);
    assert_eq!(full.users, out.associations.n_associated());
    let mut prev = full.predicted;
    // revoking users one at a time never raises the objective
    for k in 0..50 {
        out.associations.users[k].serving = None;
        let v = objective_value(&out, &ds).predicted;
        assert!(v <= prev);
        prev = v;
    }
}
