//! Interpretable regression family: tree ensembles and linear least squares.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Matrix, Result};

mod boost;
mod linear;
pub mod tree;

pub use linear::LinearPart;
pub use tree::{fit_tree, Node, Tree};

use tree::{check_training_data, grow, GrowParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    RandomForest,
    ExtraTrees,
    GradientBoosting,
    AdaBoostR2,
    Linear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::RandomForest,
        ModelKind::ExtraTrees,
        ModelKind::GradientBoosting,
        ModelKind::AdaBoostR2,
        ModelKind::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "random_forest",
            ModelKind::ExtraTrees => "extra_trees",
            ModelKind::GradientBoosting => "gradient_boosting",
            ModelKind::AdaBoostR2 => "adaboost_r2",
            ModelKind::Linear => "linear",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_estimators: usize,
    /// `None` grows until leaves are pure or hit `min_samples_leaf`.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Shrinkage for boosting; ignored by the averaging forests.
    pub learning_rate: f64,
    /// Row fraction drawn per tree: bootstrap size for random forests,
    /// sampling without replacement for gradient boosting.
    pub subsample: f64,
    /// Fraction of features considered at each split.
    pub feature_fraction: f64,
    pub seed: u64,
}

impl FitConfig {
    /// Defaults per kind: 100 estimators; unlimited depth for the forests and
    /// depth-3 trees for boosting; shrinkage 0.1 for gradient boosting and
    /// 1.0 for AdaBoost.R2.
    pub fn for_kind(kind: ModelKind) -> Self {
        let boosting = matches!(kind, ModelKind::GradientBoosting | ModelKind::AdaBoostR2);
        Self {
            n_estimators: 100,
            max_depth: if boosting { Some(3) } else { None },
            min_samples_leaf: 1,
            learning_rate: if kind == ModelKind::AdaBoostR2 { 1.0 } else { 0.1 },
            subsample: 1.0,
            feature_fraction: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be at least 1 when set".into()));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("subsample", self.subsample),
            ("feature_fraction", self.feature_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Anything that maps a feature vector to a real prediction.
pub trait Predict {
    fn predict_row(&self, x: &[f64]) -> f64;

    /// Expected input width, when the predictor knows it.
    fn n_features(&self) -> Option<usize> {
        None
    }
}

impl<F: Fn(&[f64]) -> f64> Predict for F {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// A trained regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub kind: ModelKind,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub fit_seed: u64,
    /// Initial prediction of gradient boosting; zero for other kinds.
    pub base_value: f64,
    pub trees: Vec<Tree>,
    /// Learning rate for gradient boosting, `lr·ln(1/β)` for AdaBoost.R2,
    /// 1 for the averaging forests.
    pub tree_weights: Vec<f64>,
    pub linear: Option<LinearPart>,
}

impl EnsembleModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Checks the structural invariants a deserialized model must satisfy.
    pub fn check(&self) -> Result<()> {
        let p = self.n_features();
        if self.trees.len() != self.tree_weights.len() {
            return Err(Error::Dimension { expected: self.trees.len(), found: self.tree_weights.len() });
        }
        match (self.kind, &self.linear) {
            (ModelKind::Linear, Some(l)) if l.coefficients.len() == p => {}
            (ModelKind::Linear, Some(l)) => {
                return Err(Error::Dimension { expected: p, found: l.coefficients.len() })
            }
            (ModelKind::Linear, None) => return Err(Error::Domain("linear model without coefficients".into())),
            (_, Some(_)) => return Err(Error::Domain("tree model carries linear coefficients".into())),
            (_, None) if self.trees.is_empty() => return Err(Error::Empty("ensemble trees")),
            _ => {}
        }
        if let Some(f) = self.trees.iter().filter_map(Tree::max_feature).max() {
            if f >= p {
                return Err(Error::Dimension { expected: p, found: f + 1 });
            }
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension { expected: self.n_features(), found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(self.predict_unchecked(x))
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Linear => self.linear.as_ref().map_or(f64::NAN, |l| l.predict(x)),
            ModelKind::RandomForest | ModelKind::ExtraTrees => {
                let total: f64 = self.tree_weights.iter().sum();
                let s: f64 = self.trees.iter().zip(&self.tree_weights).map(|(t, w)| w * t.predict(x)).sum();
                s / total
            }
            ModelKind::GradientBoosting => {
                self.base_value
                    + self.trees.iter().zip(&self.tree_weights).map(|(t, w)| w * t.predict(x)).sum::<f64>()
            }
            ModelKind::AdaBoostR2 => boost::weighted_median(&self.trees, &self.tree_weights, x),
        }
    }
}

impl Predict for EnsembleModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict_unchecked(x)
    }

    fn n_features(&self) -> Option<usize> {
        Some(self.feature_names.len())
    }
}

/// Fits a model of `kind` on all rows of `x`.
pub fn fit_ensemble(
    x: &Matrix,
    y: &[f64],
    kind: ModelKind,
    cfg: &FitConfig,
    feature_names: Vec<String>,
    target_name: String,
) -> Result<EnsembleModel> {
    check_training_data(x, y)?;
    cfg.validate()?;
    if feature_names.len() != x.n_cols() {
        return Err(Error::Dimension { expected: x.n_cols(), found: feature_names.len() });
    }
    let mut model = EnsembleModel {
        kind,
        feature_names,
        target_name,
        fit_seed: cfg.seed,
        base_value: 0.0,
        trees: Vec::new(),
        tree_weights: Vec::new(),
        linear: None,
    };
    match kind {
        ModelKind::RandomForest | ModelKind::ExtraTrees => {
            model.trees = fit_forest(x, y, kind == ModelKind::ExtraTrees, cfg);
            model.tree_weights = alloc::vec![1.0; model.trees.len()];
        }
        ModelKind::GradientBoosting => {
            let (base, trees) = boost::fit_gradient_boosting(x, y, cfg);
            model.base_value = base;
            model.tree_weights = alloc::vec![cfg.learning_rate; trees.len()];
            model.trees = trees;
        }
        ModelKind::AdaBoostR2 => {
            let (trees, weights) = boost::fit_adaboost_r2(x, y, cfg);
            model.trees = trees;
            model.tree_weights = weights;
        }
        ModelKind::Linear => model.linear = Some(linear::fit_linear(x, y)?),
    }
    Ok(model)
}

/// Random forest: bootstrap rows and exhaustive splits. Extra trees: all
/// rows and one random threshold per feature. Tree `t` is seeded with
/// `derive_seed(cfg.seed, t)`, so trees can be grown in any order.
fn fit_forest(x: &Matrix, y: &[f64], extra: bool, cfg: &FitConfig) -> Vec<Tree> {
    let params = GrowParams::from_config(cfg, extra);
    let n = x.n_rows();
    let draws = if extra { n } else { (libm::round(cfg.subsample * n as f64) as usize).max(1) };
    let build = |t: usize| {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, t as u64));
        let rows: Vec<usize> = if extra {
            (0..n).collect()
        } else {
            (0..draws).map(|_| rng.gen_range(0..n)).collect()
        };
        grow(x, y, rows, &params, &mut rng)
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cfg.n_estimators).into_par_iter().map(build).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.n_estimators).map(build).collect()
    }
}

/// Half mean squared residual: `1/(2K) · Σ (target − prediction)²`.
pub fn training_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Dimension { expected: targets.len(), found: predictions.len() });
    }
    if targets.is_empty() {
        return Err(Error::Empty("loss inputs"));
    }
    let sse: f64 = targets.iter().zip(predictions).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(sse / (2.0 * targets.len() as f64))
}

/// Signed counterpart `1/(2K) · Σ (target − prediction)`. Diagnostic only:
/// it is not bounded below and positive and negative residuals cancel.
pub fn signed_residual_sum(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Dimension { expected: targets.len(), found: predictions.len() });
    }
    if targets.is_empty() {
        return Err(Error::Empty("loss inputs"));
    }
    let s: f64 = targets.iter().zip(predictions).map(|(t, p)| t - p).sum();
    Ok(s / (2.0 * targets.len() as f64))
}

/// Training loss of a gradient-boosting model after 0, 1, …, T rounds.
pub fn staged_training_loss(model: &EnsembleModel, x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if model.kind != ModelKind::GradientBoosting {
        return Err(Error::Domain("staged loss is defined for gradient boosting only".into()));
    }
    check_training_data(x, y)?;
    let mut pred = alloc::vec![model.base_value; y.len()];
    let mut out = Vec::with_capacity(model.trees.len() + 1);
    out.push(training_loss(&pred, y)?);
    for (t, w) in model.trees.iter().zip(&model.tree_weights) {
        for (p, r) in pred.iter_mut().zip(x.rows()) {
            *p += w * t.predict(r);
        }
        out.push(training_loss(&pred, y)?);
    }
    Ok(out)
}
