//! Comparison statistics and the cross-model report.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::{Field, Summary};
use crate::regress::ModelKind;
use crate::shapley::GlobalImportance;
use crate::{Error, Result};

fn check_pair(a: &[f64], b: &[f64], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: b.len(), found: a.len() });
    }
    if a.len() < min_len {
        return Err(Error::InsufficientRows { requested: min_len, available: a.len() });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let m = mean(truth);
    let ss_tot: f64 = truth.iter().map(|t| (t - m) * (t - m)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Undefined("R² of a constant target"));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub percent: f64,
    pub included: usize,
    /// Rows skipped because the true value is zero.
    pub excluded: usize,
}

/// Mean absolute percentage error over the rows with non-zero truth.
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<Mape> {
    check_pair(pred, truth, 1)?;
    let (mut acc, mut included) = (0.0, 0usize);
    for (p, t) in pred.iter().zip(truth) {
        if *t != 0.0 {
            acc += ((t - p) / t).abs();
            included += 1;
        }
    }
    if included == 0 {
        return Err(Error::Undefined("MAPE with every true value zero"));
    }
    Ok(Mape { percent: 100.0 * acc / included as f64, included, excluded: truth.len() - included })
}

/// `(actual − reference) / reference · 100`.
pub fn improvement_rate(actual: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::Domain(alloc::format!("reference value must be positive, got {reference}")));
    }
    Ok((actual - reference) / reference * 100.0)
}

/// Nearest-rank summary of CQI values.
pub fn cqi_distribution(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Empty("CQI values"));
    }
    Summary::of(values).ok_or(Error::NonFinite("CQI values"))
}

/// Pearson product-moment correlation.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined("correlation with a constant input"));
    }
    Ok((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Test-partition predictions of one target within a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSummary {
    pub target: Field,
    pub predictions: Vec<f64>,
    pub truth: Vec<f64>,
    pub importance: Option<GlobalImportance>,
}

/// Everything the report needs from one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub kind: ModelKind,
    pub targets: Vec<TargetSummary>,
    /// Named per-user metric columns used for the correlation table.
    pub link_metrics: Vec<(String, Vec<f64>)>,
}

/// Name that selects the ground truth as the comparison reference.
pub const TRUTH_REFERENCE: &str = "truth";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub run: String,
    pub kind: ModelKind,
    pub target: Field,
    pub r_squared: Option<f64>,
    pub mape: Option<Mape>,
    pub mean_prediction: f64,
    pub mean_truth: f64,
    /// Distribution of predicted CQI, for the CQI target only.
    pub cqi_stats: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub run: String,
    pub kind: ModelKind,
    pub target: Field,
    pub actual: f64,
    pub reference: f64,
    /// `None` when the reference mean is not positive.
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major, `names.len()²` entries; undefined pairs are NaN.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub reference: String,
    pub scores: Vec<ModelScore>,
    pub improvements: Vec<Improvement>,
    pub importance: Vec<(String, Field, GlobalImportance)>,
    pub correlation: Option<CorrelationMatrix>,
    /// Ground-truth CQI distribution of the first run carrying a CQI target.
    pub truth_cqi_stats: Option<Summary>,
}

fn correlation_of(columns: &[(String, Vec<f64>)]) -> CorrelationMatrix {
    let k = columns.len();
    let mut values = alloc::vec![f64::NAN; k * k];
    for i in 0..k {
        for j in 0..k {
            values[i * k + j] = pearson_correlation(&columns[i].1, &columns[j].1).unwrap_or(f64::NAN);
        }
    }
    CorrelationMatrix { names: columns.iter().map(|c| c.0.clone()).collect(), values }
}

/// Scores every (run, target), computes mean-prediction improvement rates
/// against `reference` (a run name, or [`TRUTH_REFERENCE`] for the ground
/// truth) and collects importance and metric correlations.
///
/// Rows are ordered by model kind, then target, then run name.
pub fn build_comparison_report(runs: &[RunSummary], reference: &str) -> Result<ComparisonReport> {
    if runs.is_empty() {
        return Err(Error::Empty("runs"));
    }
    let ref_run = if reference == TRUTH_REFERENCE {
        None
    } else {
        Some(
            runs.iter()
                .find(|r| r.name == reference)
                .ok_or_else(|| Error::MissingReference(reference.to_string()))?,
        )
    };

    let mut order: Vec<(&RunSummary, &TargetSummary)> =
        runs.iter().flat_map(|r| r.targets.iter().map(move |t| (r, t))).collect();
    order.sort_by(|a, b| {
        (a.0.kind, a.1.target, &a.0.name).cmp(&(b.0.kind, b.1.target, &b.0.name))
    });

    let mut scores = Vec::new();
    let mut improvements = Vec::new();
    let mut importance = Vec::new();
    for (run, t) in order {
        if t.predictions.len() != t.truth.len() {
            return Err(Error::Dimension { expected: t.truth.len(), found: t.predictions.len() });
        }
        if t.predictions.is_empty() {
            return Err(Error::Empty("test predictions"));
        }
        let mean_prediction = mean(&t.predictions);
        let mean_truth = mean(&t.truth);
        scores.push(ModelScore {
            run: run.name.clone(),
            kind: run.kind,
            target: t.target,
            r_squared: r_squared(&t.predictions, &t.truth).ok(),
            mape: mape(&t.predictions, &t.truth).ok(),
            mean_prediction,
            mean_truth,
            cqi_stats: if t.target == Field::Cqi { cqi_distribution(&t.predictions).ok() } else { None },
        });

        let reference_mean = match ref_run {
            None => Some(mean_truth),
            Some(r) => r.targets.iter().find(|rt| rt.target == t.target).map(|rt| mean(&rt.predictions)),
        };
        if let Some(reference_mean) = reference_mean {
            improvements.push(Improvement {
                run: run.name.clone(),
                kind: run.kind,
                target: t.target,
                actual: mean_prediction,
                reference: reference_mean,
                percent: improvement_rate(mean_prediction, reference_mean).ok(),
            });
        }
        if let Some(gi) = &t.importance {
            importance.push((run.name.clone(), t.target, gi.clone()));
        }
    }

    let correlation = runs.iter().find(|r| !r.link_metrics.is_empty()).map(|r| correlation_of(&r.link_metrics));
    let truth_cqi_stats = runs
        .iter()
        .flat_map(|r| r.targets.iter())
        .find(|t| t.target == Field::Cqi)
        .and_then(|t| cqi_distribution(&t.truth).ok());

    Ok(ComparisonReport {
        reference: reference.to_string(),
        scores,
        improvements,
        importance,
        correlation,
        truth_cqi_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn r2_examples() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(r_squared(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        assert!(matches!(r_squared(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::Undefined(_))));
        assert!(r_squared(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap().percent, 0.0);
        let m = mape(&[9.0], &[10.0]).unwrap();
        assert!((m.percent - 10.0).abs() < 1e-12);
        let m = mape(&[9.0, 5.0], &[10.0, 0.0]).unwrap();
        assert!((m.percent - 10.0).abs() < 1e-12);
        assert_eq!((m.included, m.excluded), (1, 1));
        assert!(mape(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert!((improvement_rate(8.29, 5.82).unwrap() - 42.44).abs() <= 0.05);
        assert!((improvement_rate(0.09, 0.07).unwrap() - 28.57).abs() <= 0.01);
        assert_eq!(improvement_rate(3.3, 3.3).unwrap(), 0.0);
        assert!(improvement_rate(1.0, 0.0).is_err());
    }

    #[test]
    fn cqi_distribution_examples() {
        let s = cqi_distribution(&[10.0; 7]).unwrap();
        assert_eq!((s.min, s.p25, s.p50, s.p75, s.max, s.mean), (10.0, 10.0, 10.0, 10.0, 10.0, 10.0));
        let v: Vec<f64> = (1..=15).map(f64::from).collect();
        assert_eq!(cqi_distribution(&v).unwrap().p50, 8.0);
        assert!(cqi_distribution(&[]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(pearson_correlation(&a, &a).unwrap(), 1.0);
        assert_eq!(pearson_correlation(&a, &[-1.0, -2.0, -3.0]).unwrap(), -1.0);
        assert!((pearson_correlation(&a, &[1.0, 2.0, 4.0]).unwrap() - 0.9820).abs() <= 1e-4);
        assert!(pearson_correlation(&a, &[2.0, 2.0, 2.0]).is_err());
    }

    fn run(name: &str, kind: ModelKind, pred: &[f64], truth: &[f64]) -> RunSummary {
        RunSummary {
            name: name.into(),
            kind,
            targets: vec![TargetSummary {
                target: Field::DlMbps,
                predictions: pred.to_vec(),
                truth: truth.to_vec(),
                importance: None,
            }],
            link_metrics: vec![],
        }
    }

    #[test]
    fn self_reference_has_zero_improvement() {
        let r = run("et", ModelKind::ExtraTrees, &[1.0, 2.0], &[1.5, 2.5]);
        let rep = build_comparison_report(&[r], "et").unwrap();
        assert_eq!(rep.improvements[0].percent, Some(0.0));
        assert!(build_comparison_report(&[], "et").is_err());
        let r = run("et", ModelKind::ExtraTrees, &[1.0, 2.0], &[1.5, 2.5]);
        assert!(matches!(build_comparison_report(&[r], "nope"), Err(Error::MissingReference(_))));
    }

    #[test]
    fn hand_built_two_run_table() {
        // truth (2, 4, 6, 8): mean 5, SS_tot 20
        let truth = [2.0, 4.0, 6.0, 8.0];
        let a = run("ada", ModelKind::AdaBoostR2, &[3.0, 5.0, 7.0, 9.0], &truth); // mean 6
        let e = run("et", ModelKind::ExtraTrees, &[2.0, 4.0, 6.0, 6.0], &truth); // mean 4.5
        let rep = build_comparison_report(&[e.clone(), a.clone()], TRUTH_REFERENCE).unwrap();
        // ordering by kind: extra_trees before adaboost_r2 in enum order
        assert_eq!(rep.scores[0].run, "et");
        assert_eq!(rep.scores[1].run, "ada");
        // et: SS_res 4 → R² 0.8; MAPE (0+0+0+25)/4 = 6.25
        assert!((rep.scores[0].r_squared.unwrap() - 0.8).abs() < 1e-12);
        assert!((rep.scores[0].mape.unwrap().percent - 6.25).abs() < 1e-12);
        // ada: SS_res 4 → R² 0.8; MAPE (50+25+16.67+12.5)/4 = 26.041666…
        assert!((rep.scores[1].mape.unwrap().percent - 26.041_666_666_666_668).abs() < 1e-9);
        // improvements vs truth mean 5: et −10 %, ada +20 %
        assert!((rep.improvements[0].percent.unwrap() + 10.0).abs() < 1e-12);
        assert!((rep.improvements[1].percent.unwrap() - 20.0).abs() < 1e-12);

        let vs_et = build_comparison_report(&[e, a], "et").unwrap();
        // ada vs et: (6 − 4.5)/4.5 = 33.33 %
        assert!((vs_et.improvements[1].percent.unwrap() - 100.0 / 3.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn improvement_increasing(r in 0.01f64..100.0, d1 in -50.0f64..50.0, d2 in 0.001f64..10.0) {
            prop_assert!(improvement_rate(r + d1 + d2, r).unwrap() > improvement_rate(r + d1, r).unwrap());
        }

        #[test]
        fn r2_affine_invariant(
            truth in proptest::collection::vec(-10.0f64..10.0, 3..20),
            noise in proptest::collection::vec(-1.0f64..1.0, 20),
            scale in 0.1f64..10.0,
            shift in -10.0f64..10.0,
        ) {
            let pred: Vec<f64> = truth.iter().zip(&noise).map(|(t, n)| t + n).collect();
            if let Ok(base) = r_squared(&pred, &truth) {
                let tp: Vec<f64> = pred.iter().map(|v| scale * v + shift).collect();
                let tt: Vec<f64> = truth.iter().map(|v| scale * v + shift).collect();
                let moved = r_squared(&tp, &tt).unwrap();
                prop_assert!((base - moved).abs() <= 1e-6 * (1.0 + base.abs()));
            }
        }

        #[test]
        fn pearson_affine(a in proptest::collection::vec(-10.0f64..10.0, 4..20), b in proptest::collection::vec(-10.0f64..10.0, 20), s in 0.1f64..5.0, c in -5.0f64..5.0) {
            let b = &b[..a.len()];
            if let Ok(r) = pearson_correlation(&a, b) {
                let pos: Vec<f64> = a.iter().map(|v| s * v + c).collect();
                let neg: Vec<f64> = a.iter().map(|v| -s * v + c).collect();
                prop_assert!((pearson_correlation(&pos, b).unwrap() - r).abs() <= 1e-9);
                prop_assert!((pearson_correlation(&neg, b).unwrap() + r).abs() <= 1e-9);
            }
        }
    }
}
