//! Exact Shapley-value attribution.
//!
//! Features are the players. The worth of a coalition `C` is the model
//! output on a hybrid input: features in `C` keep the explained instance's
//! values and the rest are pinned to the background means. Shapley values
//! then follow from the subset form
//!
//! ```text
//! Ψᵢ = Σ_{C ⊆ N∖{i}} |C|!·(|N|−|C|−1)! / |N|! · (v(C ∪ {i}) − v(C))
//! ```
//!
//! evaluated once per subset of `N` (2^|N| model calls per instance).

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::regress::Predict;
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Matrix, Result};

/// Widest feature vector explained by exact enumeration.
pub const MAX_EXACT_FEATURES: usize = 20;

/// Widest feature vector accepted by the exhaustive-permutation oracle.
pub const MAX_EXHAUSTIVE_PERMUTATION_FEATURES: usize = 9;

/// Reference data that defines an "absent" feature.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    rows: Matrix,
    means: Vec<f64>,
}

impl BackgroundSet {
    pub fn new(rows: Matrix) -> Result<Self> {
        if rows.n_rows() == 0 {
            return Err(Error::Empty("background set"));
        }
        let means = rows.column_means();
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("background means"));
        }
        Ok(Self { rows, means })
    }

    /// At most `cap` rows drawn without replacement under `seed`, kept in
    /// their original order. All rows are used when `cap` is not smaller.
    pub fn sampled(rows: &Matrix, cap: usize, seed: u64) -> Result<Self> {
        if cap == 0 || rows.n_rows() <= cap {
            return Self::new(rows.clone());
        }
        let mut idx: Vec<usize> = (0..rows.n_rows()).collect();
        idx.shuffle(&mut rng_from_seed(seed));
        idx.truncate(cap);
        idx.sort_unstable();
        Self::new(rows.select_rows(&idx))
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    /// Worth of the empty coalition: the model at the background means.
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub instance: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Model output on the instance.
    pub prediction: f64,
    pub coalition_evaluations: usize,
}

impl Explanation {
    /// `|base + Σ phi − prediction|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }
}

fn check_inputs<M: Predict + ?Sized>(model: &M, instance: &[f64], bg: &BackgroundSet) -> Result<()> {
    if instance.len() != bg.n_features() {
        return Err(Error::Dimension { expected: bg.n_features(), found: instance.len() });
    }
    if let Some(p) = model.n_features() {
        if p != instance.len() {
            return Err(Error::Dimension { expected: p, found: instance.len() });
        }
    }
    if instance.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("explained instance"));
    }
    Ok(())
}

fn hybrid(instance: &[f64], means: &[f64], mask: u64, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = if mask >> j & 1 == 1 { instance[j] } else { means[j] };
    }
}

/// Worth of `coalition` (a list of feature indices).
pub fn coalition_value<M: Predict + ?Sized>(
    model: &M,
    instance: &[f64],
    coalition: &[usize],
    bg: &BackgroundSet,
) -> Result<f64> {
    check_inputs(model, instance, bg)?;
    let mut x = bg.means().to_vec();
    for &j in coalition {
        if j >= instance.len() {
            return Err(Error::Domain(alloc::format!(
                "coalition member {j} out of range for {} features",
                instance.len()
            )));
        }
        x[j] = instance[j];
    }
    Ok(model.predict_row(&x))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Weight of a coalition of size `c` in an `n`-player game:
/// `c!·(n−c−1)!/n!`, computed as `1 / (n · C(n−1, c))`.
pub fn shapley_weight(n: usize, c: usize) -> Result<f64> {
    if n == 0 || c >= n {
        return Err(Error::Domain(alloc::format!("coalition size {c} invalid for {n} players")));
    }
    Ok(1.0 / (n as f64 * binomial(n - 1, c)))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// The same weight as a reduced fraction `(numerator, denominator)`.
/// Exact for `n ≤ 34`.
pub fn shapley_weight_exact(n: usize, c: usize) -> Result<(u128, u128)> {
    if n == 0 || c >= n || n > 34 {
        return Err(Error::Domain(alloc::format!("coalition size {c} invalid for {n} players")));
    }
    let fact = |k: usize| (1..=k as u128).product::<u128>();
    // c!(n−c−1)!/n! = 1 / (n·C(n−1, c)); build the binomial incrementally.
    let k = c.min(n - 1 - c);
    let mut binom: u128 = 1;
    for i in 0..k {
        binom = binom * (n - 1 - i) as u128 / (i as u128 + 1);
    }
    let den = n as u128 * binom;
    let num = 1u128;
    debug_assert!(n > 20 || fact(c) * fact(n - c - 1) * den == fact(n));
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

/// Exact Shapley values by enumerating every subset of the features.
pub fn shapley_exact<M: Predict + ?Sized>(
    model: &M,
    instance: &[f64],
    bg: &BackgroundSet,
    feature_names: &[String],
) -> Result<Explanation> {
    check_inputs(model, instance, bg)?;
    let n = instance.len();
    if n > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures { features: n, limit: MAX_EXACT_FEATURES });
    }
    if !feature_names.is_empty() && feature_names.len() != n {
        return Err(Error::Dimension { expected: n, found: feature_names.len() });
    }

    let subsets = 1usize << n;
    let mut worth = Vec::with_capacity(subsets);
    let mut x = alloc::vec![0.0; n];
    for mask in 0..subsets as u64 {
        hybrid(instance, bg.means(), mask, &mut x);
        worth.push(model.predict_row(&x));
    }

    let weights: Vec<f64> = if n == 0 {
        Vec::new()
    } else {
        (0..n).map(|c| shapley_weight(n, c)).collect::<Result<_>>()?
    };
    let mut phi = alloc::vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for s in 0..subsets {
            if s & bit == 0 {
                acc += weights[s.count_ones() as usize] * (worth[s | bit] - worth[s]);
            }
        }
        *p = acc;
    }

    Ok(Explanation {
        base_value: worth[0],
        phi,
        instance: instance.to_vec(),
        feature_names: feature_names.to_vec(),
        prediction: worth[subsets - 1],
        coalition_evaluations: subsets,
    })
}

/// Monte-Carlo estimate with per-feature standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationEstimate {
    pub explanation: Explanation,
    pub std_error: Vec<f64>,
    pub permutations: usize,
}

/// Adds the marginal contributions along one ordering to `sum`/`sum_sq`.
fn walk_ordering<M: Predict + ?Sized>(
    model: &M,
    instance: &[f64],
    means: &[f64],
    order: &[usize],
    x: &mut [f64],
    sum: &mut [f64],
    sum_sq: &mut [f64],
) -> usize {
    x.copy_from_slice(means);
    let mut prev = model.predict_row(x);
    for &j in order {
        x[j] = instance[j];
        let cur = model.predict_row(x);
        let d = cur - prev;
        sum[j] += d;
        sum_sq[j] += d * d;
        prev = cur;
    }
    order.len() + 1
}

/// Average marginal contribution over `n_permutations` uniformly drawn
/// feature orderings. Independent of [`shapley_exact`]: it never forms
/// subset weights, only walks orderings.
pub fn shapley_permutation_oracle<M: Predict + ?Sized>(
    model: &M,
    instance: &[f64],
    bg: &BackgroundSet,
    n_permutations: usize,
    seed: u64,
) -> Result<PermutationEstimate> {
    check_inputs(model, instance, bg)?;
    if n_permutations == 0 {
        return Err(Error::Domain("at least one permutation is required".into()));
    }
    let n = instance.len();
    let mut sum = alloc::vec![0.0; n];
    let mut sum_sq = alloc::vec![0.0; n];
    let mut x = alloc::vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut evals = 0;
    for k in 0..n_permutations {
        order.sort_unstable();
        order.shuffle(&mut rng_from_seed(derive_seed(seed, k as u64)));
        evals += walk_ordering(model, instance, bg.means(), &order, &mut x, &mut sum, &mut sum_sq);
    }
    Ok(finish_estimate(model, instance, bg, sum, sum_sq, n_permutations, evals))
}

/// Walks all `n!` orderings; the result is the Shapley value by definition.
pub fn shapley_all_permutations<M: Predict + ?Sized>(
    model: &M,
    instance: &[f64],
    bg: &BackgroundSet,
) -> Result<PermutationEstimate> {
    check_inputs(model, instance, bg)?;
    let n = instance.len();
    if n > MAX_EXHAUSTIVE_PERMUTATION_FEATURES {
        return Err(Error::TooManyFeatures { features: n, limit: MAX_EXHAUSTIVE_PERMUTATION_FEATURES });
    }
    let mut sum = alloc::vec![0.0; n];
    let mut sum_sq = alloc::vec![0.0; n];
    let mut x = alloc::vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut count = 0;
    let mut evals = 0;
    loop {
        evals += walk_ordering(model, instance, bg.means(), &order, &mut x, &mut sum, &mut sum_sq);
        count += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(finish_estimate(model, instance, bg, sum, sum_sq, count, evals))
}

/// Lexicographic successor; false once `v` is the last ordering.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

fn finish_estimate<M: Predict + ?Sized>(
    model: &M,
    instance: &[f64],
    bg: &BackgroundSet,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    m: usize,
    evals: usize,
) -> PermutationEstimate {
    let mf = m as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / mf).collect();
    let std_error = sum_sq
        .iter()
        .zip(&phi)
        .map(|(sq, mean)| {
            if m < 2 {
                return 0.0;
            }
            let var = ((sq / mf - mean * mean) * mf / (mf - 1.0)).max(0.0);
            libm::sqrt(var / mf)
        })
        .collect();
    PermutationEstimate {
        explanation: Explanation {
            base_value: model.predict_row(bg.means()),
            phi,
            instance: instance.to_vec(),
            feature_names: Vec::new(),
            prediction: model.predict_row(instance),
            coalition_evaluations: evals,
        },
        std_error,
        permutations: m,
    }
}

/// Mean absolute Shapley value per feature with the induced ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalImportance {
    pub feature_names: Vec<String>,
    pub mean_abs_phi: Vec<f64>,
    /// Feature indices by descending importance; ties keep index order.
    pub rank: Vec<usize>,
}

impl GlobalImportance {
    pub fn from_explanations(feature_names: Vec<String>, explanations: &[Explanation]) -> Result<Self> {
        if explanations.is_empty() {
            return Err(Error::Empty("explanations"));
        }
        let n = feature_names.len();
        let mut mean_abs_phi = alloc::vec![0.0; n];
        for e in explanations {
            if e.phi.len() != n {
                return Err(Error::Dimension { expected: n, found: e.phi.len() });
            }
            for (m, p) in mean_abs_phi.iter_mut().zip(&e.phi) {
                *m += p.abs();
            }
        }
        let k = explanations.len() as f64;
        mean_abs_phi.iter_mut().for_each(|m| *m /= k);
        let mut rank: Vec<usize> = (0..n).collect();
        rank.sort_by(|&a, &b| mean_abs_phi[b].total_cmp(&mean_abs_phi[a]).then(a.cmp(&b)));
        Ok(Self { feature_names, mean_abs_phi, rank })
    }

    pub fn ranked_names(&self) -> Vec<&str> {
        self.rank.iter().map(|&i| self.feature_names[i].as_str()).collect()
    }
}

/// Explains every row of `x` exactly and aggregates the result.
pub fn global_importance<M: Predict + Sync + ?Sized>(
    model: &M,
    x: &Matrix,
    bg: &BackgroundSet,
    feature_names: &[String],
) -> Result<(GlobalImportance, Vec<Explanation>)> {
    if x.n_rows() == 0 {
        return Err(Error::Empty("rows to explain"));
    }
    if x.n_cols() > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures { features: x.n_cols(), limit: MAX_EXACT_FEATURES });
    }
    let explain = |i: usize| shapley_exact(model, x.row(i), bg, feature_names);
    #[cfg(feature = "parallel")]
    let explanations: Vec<Explanation> = {
        use rayon::prelude::*;
        (0..x.n_rows()).into_par_iter().map(explain).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let explanations: Vec<Explanation> = (0..x.n_rows()).map(explain).collect::<Result<_>>()?;

    let names = if feature_names.is_empty() {
        (0..x.n_cols()).map(|i| alloc::format!("f{i}")).collect()
    } else {
        feature_names.to_vec()
    };
    Ok((GlobalImportance::from_explanations(names, &explanations)?, explanations))
}
