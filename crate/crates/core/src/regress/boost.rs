//! Boosted tree ensembles.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use super::tree::{grow, GrowParams, Tree};
use super::FitConfig;
use crate::rng::{derive_seed, rng_from_seed};
use crate::Matrix;

/// Least-squares gradient boosting: start from the target mean, then fit
/// each tree to the current residuals and add it scaled by the learning
/// rate. Returns the initial value and the trees.
pub(super) fn fit_gradient_boosting(x: &Matrix, y: &[f64], cfg: &FitConfig) -> (f64, Vec<Tree>) {
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let params = GrowParams::from_config(cfg, false);
    let draws = (libm::round(cfg.subsample * n as f64) as usize).clamp(1, n);

    let mut pred = alloc::vec![base; n];
    let mut residual = alloc::vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for t in 0..cfg.n_estimators {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, t as u64));
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        let rows: Vec<usize> = if draws == n {
            (0..n).collect()
        } else {
            let mut r = index::sample(&mut rng, n, draws).into_vec();
            r.sort_unstable();
            r
        };
        let tree = grow(x, &residual, rows, &params, &mut rng);
        for (p, r) in pred.iter_mut().zip(x.rows()) {
            *p += cfg.learning_rate * tree.predict(r);
        }
        trees.push(tree);
    }
    (base, trees)
}

/// AdaBoost.R2 with the linear loss.
///
/// Each round draws a weighted bootstrap sample, fits a tree, and scores
/// every training row by `L_i = |y_i − ŷ_i| / max_j |y_j − ŷ_j|`. With the
/// weighted mean loss `L̄` and `β = L̄ / (1 − L̄)`, the tree gets weight
/// `lr · ln(1/β)` and sample weights shrink by `β^(lr·(1 − L_i))`. Boosting
/// stops early on a perfect fit or once `L̄ ≥ 0.5`.
pub(super) fn fit_adaboost_r2(x: &Matrix, y: &[f64], cfg: &FitConfig) -> (Vec<Tree>, Vec<f64>) {
    let n = y.len();
    let params = GrowParams::from_config(cfg, false);
    let mut w = alloc::vec![1.0 / n as f64; n];
    let mut cdf = alloc::vec![0.0; n];
    let mut trees = Vec::new();
    let mut weights = Vec::new();
    let mut err = alloc::vec![0.0; n];

    for t in 0..cfg.n_estimators {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, t as u64));
        let mut acc = 0.0;
        for (c, wi) in cdf.iter_mut().zip(&w) {
            acc += wi;
            *c = acc;
        }
        let rows: Vec<usize> = (0..n)
            .map(|_| {
                let u = rng.gen::<f64>() * acc;
                cdf.partition_point(|c| *c <= u).min(n - 1)
            })
            .collect();
        let tree = grow(x, y, rows, &params, &mut rng);

        let mut max_err = 0.0f64;
        for ((e, r), yi) in err.iter_mut().zip(x.rows()).zip(y) {
            *e = (yi - tree.predict(r)).abs();
            max_err = max_err.max(*e);
        }
        if max_err == 0.0 {
            trees.push(tree);
            weights.push(1.0);
            break;
        }
        let avg_loss: f64 = err.iter().zip(&w).map(|(e, wi)| wi * e / max_err).sum();
        if avg_loss >= 0.5 {
            if trees.is_empty() {
                trees.push(tree);
                weights.push(1.0);
            }
            break;
        }
        let beta = avg_loss / (1.0 - avg_loss);
        trees.push(tree);
        weights.push(cfg.learning_rate * libm::log(1.0 / beta));

        let mut total = 0.0;
        for (wi, e) in w.iter_mut().zip(&err) {
            *wi *= libm::pow(beta, cfg.learning_rate * (1.0 - e / max_err));
            total += *wi;
        }
        w.iter_mut().for_each(|wi| *wi /= total);
    }
    (trees, weights)
}

/// Lowest member prediction whose cumulative weight reaches half the total.
pub(super) fn weighted_median(trees: &[Tree], weights: &[f64], x: &[f64]) -> f64 {
    let mut preds: Vec<(f64, f64)> = trees.iter().zip(weights).map(|(t, w)| (t.predict(x), *w)).collect();
    preds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (p, w) in &preds {
        acc += w;
        if acc >= half {
            return *p;
        }
    }
    preds.last().map_or(f64::NAN, |p| p.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn weighted_median_picks_heavy_member() {
        let trees = vec![Tree::leaf(1.0), Tree::leaf(2.0), Tree::leaf(10.0)];
        assert_eq!(weighted_median(&trees, &[1.0, 1.0, 1.0], &[]), 2.0);
        assert_eq!(weighted_median(&trees, &[0.1, 0.1, 5.0], &[]), 10.0);
        assert_eq!(weighted_median(&trees, &[3.0, 1.0, 1.0], &[]), 1.0);
        // exactly half reached at the first member
        assert_eq!(weighted_median(&trees[..2], &[1.0, 1.0], &[]), 1.0);
    }

    #[test]
    fn adaboost_stops_on_perfect_fit() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [0.0, 0.0, 5.0, 5.0];
        let mut cfg = FitConfig::for_kind(super::super::ModelKind::AdaBoostR2);
        cfg.n_estimators = 20;
        cfg.seed = 1;
        let (trees, w) = fit_adaboost_r2(&x, &y, &cfg);
        assert!(!trees.is_empty() && trees.len() <= 20);
        assert_eq!(trees.len(), w.len());
        assert!(w.iter().all(|v| *v > 0.0));
    }
}
