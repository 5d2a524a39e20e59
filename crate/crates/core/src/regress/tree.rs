//! CART regression trees.
//!
//! Nodes are split to maximize the reduction of within-node squared error.
//! The exhaustive search scans every cut point between distinct sorted
//! values; the randomized search (Extra-Trees rule) draws one uniform
//! threshold per candidate feature. Candidates are visited in ascending
//! feature index and ascending threshold and only a strictly better score
//! replaces the incumbent, so ties resolve to the lowest feature and then
//! the lowest threshold.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use super::FitConfig;
use crate::rng::{rng_from_seed, Rng};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64, samples: usize },
}

/// A fitted tree; node 0 is the root. Samples with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Builds a tree from raw nodes, checking child links and acyclicity.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("tree nodes"));
        }
        let mut refs = alloc::vec![0u32; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Split { left, right, threshold, .. } = *n {
                if left >= nodes.len() || right >= nodes.len() || left <= i || right <= i {
                    return Err(Error::Domain(alloc::format!("node {i} has an invalid child link")));
                }
                if threshold.is_nan() {
                    return Err(Error::NonFinite("split threshold"));
                }
                refs[left] += 1;
                refs[right] += 1;
            }
        }
        if refs[0] != 0 || refs[1..].iter().any(|r| *r != 1) {
            return Err(Error::Domain("tree nodes do not form a single tree".into()));
        }
        Ok(Self { nodes })
    }

    pub fn leaf(value: f64) -> Self {
        Self { nodes: alloc::vec![Node::Leaf { value, samples: 1 }] }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = alloc::vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }

    /// Highest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Nodes in preorder (node, then left subtree, then right subtree).
    pub fn preorder(&self) -> Vec<Node> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = alloc::vec![0usize];
        while let Some(i) = stack.pop() {
            out.push(self.nodes[i]);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }
}

/// Growth limits shared by every tree of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub feature_fraction: f64,
    pub randomized: bool,
}

impl GrowParams {
    pub fn from_config(cfg: &FitConfig, randomized: bool) -> Self {
        Self {
            max_depth: cfg.max_depth,
            min_samples_leaf: cfg.min_samples_leaf.max(1),
            feature_fraction: cfg.feature_fraction,
            randomized,
        }
    }
}

pub(crate) fn check_training_data(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.n_rows() == 0 || y.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::Dimension { expected: x.n_rows(), found: y.len() });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("feature matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    Ok(())
}

/// Fits one tree on all rows of `x`, seeded from `cfg.seed`.
pub fn fit_tree(x: &Matrix, y: &[f64], cfg: &FitConfig, randomized_splits: bool) -> Result<Tree> {
    check_training_data(x, y)?;
    cfg.validate()?;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = rng_from_seed(cfg.seed);
    Ok(grow(x, y, rows, &GrowParams::from_config(cfg, randomized_splits), &mut rng))
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Pending {
    slot: usize,
    start: usize,
    end: usize,
    depth: usize,
}

/// Grows a tree over `rows`; duplicated row indices act as sample weights.
pub(crate) fn grow(x: &Matrix, y: &[f64], mut rows: Vec<usize>, p: &GrowParams, rng: &mut Rng) -> Tree {
    let n_features = x.n_cols();
    let n_candidates = if n_features == 0 {
        0
    } else {
        (libm::round(p.feature_fraction * n_features as f64) as usize).clamp(1, n_features)
    };

    let mut nodes = alloc::vec![Node::Leaf { value: 0.0, samples: 0 }];
    let mut stack = alloc::vec![Pending { slot: 0, start: 0, end: rows.len(), depth: 0 }];
    let mut scratch: Vec<usize> = Vec::with_capacity(rows.len());
    let mut features: Vec<usize> = Vec::with_capacity(n_features);

    while let Some(Pending { slot, start, end, depth }) = stack.pop() {
        let node_rows = &rows[start..end];
        let n = node_rows.len();
        let sum: f64 = node_rows.iter().map(|&i| y[i]).sum();
        let mean = sum / n as f64;
        let leaf = Node::Leaf { value: mean, samples: n };

        let constant = node_rows.iter().all(|&i| y[i] == y[node_rows[0]]);
        if constant || n < 2 * p.min_samples_leaf || p.max_depth.is_some_and(|d| depth >= d) {
            nodes[slot] = leaf;
            continue;
        }

        features.clear();
        if n_candidates == n_features {
            features.extend(0..n_features);
        } else {
            features.extend(index::sample(rng, n_features, n_candidates));
            features.sort_unstable();
        }

        let parent_score = sum * sum / n as f64;
        let mut best: Option<Candidate> = None;
        for &f in &features {
            let cand = if p.randomized {
                random_split(x, y, node_rows, f, p.min_samples_leaf, rng)
            } else {
                scratch.clear();
                scratch.extend_from_slice(node_rows);
                best_split(x, y, &mut scratch, f, p.min_samples_leaf)
            };
            if let Some(c) = cand {
                if c.score > parent_score && best.as_ref().map_or(true, |b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }

        let Some(Candidate { feature, threshold, .. }) = best else {
            nodes[slot] = leaf;
            continue;
        };

        // Partition in place: rows going left first, original order kept.
        scratch.clear();
        scratch.extend(rows[start..end].iter().copied().filter(|&i| x.get(i, feature) <= threshold));
        let mid = start + scratch.len();
        scratch.extend(rows[start..end].iter().copied().filter(|&i| x.get(i, feature) > threshold));
        rows[start..end].copy_from_slice(&scratch);

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0, samples: 0 });
        nodes.push(Node::Leaf { value: 0.0, samples: 0 });
        nodes[slot] = Node::Split { feature, threshold, left, right };
        stack.push(Pending { slot: right, start: mid, end, depth: depth + 1 });
        stack.push(Pending { slot: left, start, end: mid, depth: depth + 1 });
    }
    Tree { nodes }
}

/// Exhaustive scan of cut points on feature `f`. `rows` is reordered.
fn best_split(x: &Matrix, y: &[f64], rows: &mut [usize], f: usize, min_leaf: usize) -> Option<Candidate> {
    rows.sort_unstable_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
    let n = rows.len();
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let mut left_sum = 0.0;
    let mut best: Option<Candidate> = None;
    for k in 0..n - 1 {
        left_sum += y[rows[k]];
        let (lo, hi) = (x.get(rows[k], f), x.get(rows[k + 1], f));
        let n_left = k + 1;
        let n_right = n - n_left;
        if lo == hi || n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        let right_sum = total - left_sum;
        let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64;
        if best.as_ref().map_or(true, |b| score > b.score) {
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid < hi { mid } else { lo };
            best = Some(Candidate { feature: f, threshold, score });
        }
    }
    best
}

/// One uniform threshold between the node's min and max of feature `f`.
fn random_split(x: &Matrix, y: &[f64], rows: &[usize], f: usize, min_leaf: usize, rng: &mut Rng) -> Option<Candidate> {
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        let v = x.get(i, f);
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) {
        return None;
    }
    let mut threshold = lo + rng.gen::<f64>() * (hi - lo);
    if threshold >= hi {
        threshold = lo;
    }
    let (mut ls, mut ln, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
    for &i in rows {
        if x.get(i, f) <= threshold {
            ls += y[i];
            ln += 1;
        } else {
            rs += y[i];
            rn += 1;
        }
    }
    if ln < min_leaf || rn < min_leaf {
        return None;
    }
    Some(Candidate { feature: f, threshold, score: ls * ls / ln as f64 + rs * rs / rn as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::ModelKind;
    use alloc::vec;

    fn cfg(depth: Option<usize>) -> FitConfig {
        let mut c = FitConfig::for_kind(ModelKind::RandomForest);
        c.max_depth = depth;
        c
    }

    fn mse(t: &Tree, x: &Matrix, y: &[f64]) -> f64 {
        x.rows().zip(y).map(|(r, v)| (t.predict(r) - v).powi(2)).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn constant_target_is_one_leaf() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let t = fit_tree(&x, &[4.0, 4.0, 4.0], &cfg(None), false).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 4.0, samples: 3 }]);
    }

    #[test]
    fn separable_pair_depth_one() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let t = fit_tree(&x, &[0.0, 1.0], &cfg(Some(1)), false).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.predict(&[0.0]), 0.0);
        assert_eq!(t.predict(&[1.0]), 1.0);
        assert_eq!(t.nodes()[0], Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 });
    }

    /// 20 points, 3 features, deterministic but irregular.
    fn fixture20() -> (Matrix, Vec<f64>) {
        let rows: Vec<[f64; 3]> = (0..20)
            .map(|i| {
                let i = i as f64;
                [(i * 7.0) % 11.0, (i * 3.0) % 5.0, libm::sin(i)]
            })
            .collect();
        let y = rows.iter().map(|r| r[0] * 0.5 - r[1] * r[1] + 3.0 * r[2]).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    /// Exhaustive oracle: every (feature, cut) pair, scored by directly
    /// recomputing both children's sum of squared errors.
    fn oracle_best_sse(x: &Matrix, y: &[f64], rows: &[usize]) -> f64 {
        let sse = |idx: &[usize]| {
            let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>()
        };
        let mut best = sse(rows);
        for f in 0..x.n_cols() {
            let mut vals: Vec<f64> = rows.iter().map(|&i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let l: Vec<usize> = rows.iter().copied().filter(|&i| x.get(i, f) <= t).collect();
                let r: Vec<usize> = rows.iter().copied().filter(|&i| x.get(i, f) > t).collect();
                best = best.min(sse(&l) + sse(&r));
            }
        }
        best
    }

    #[test]
    fn greedy_split_matches_exhaustive_oracle() {
        let (x, y) = fixture20();
        let all: Vec<usize> = (0..20).collect();
        let t = fit_tree(&x, &y, &cfg(Some(1)), false).unwrap();
        let tree_sse = mse(&t, &x, &y) * 20.0;
        assert!((tree_sse - oracle_best_sse(&x, &y, &all)).abs() <= 1e-9);
    }

    #[test]
    fn unlimited_depth_at_least_as_good_as_oracle() {
        let (x, y) = fixture20();
        let all: Vec<usize> = (0..20).collect();
        let t = fit_tree(&x, &y, &cfg(None), false).unwrap();
        let oracle_mse = oracle_best_sse(&x, &y, &all) / 20.0;
        assert!(mse(&t, &x, &y) <= oracle_mse + 1e-12);
        // distinct rows → interpolates exactly
        assert!(mse(&t, &x, &y) <= 1e-24);
    }

    #[test]
    fn tie_break_prefers_lowest_feature() {
        // both features separate y identically
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let t = fit_tree(&x, &[0.0, 1.0], &cfg(Some(1)), false).unwrap();
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn min_leaf_respected() {
        let (x, y) = fixture20();
        let mut c = cfg(None);
        c.min_samples_leaf = 4;
        for randomized in [false, true] {
            let t = fit_tree(&x, &y, &c, randomized).unwrap();
            for n in t.nodes() {
                if let Node::Leaf { samples, .. } = n {
                    assert!(*samples >= 4);
                }
            }
        }
    }

    #[test]
    fn randomized_tree_is_seeded() {
        let (x, y) = fixture20();
        let a = fit_tree(&x, &y, &cfg(None), true).unwrap();
        let b = fit_tree(&x, &y, &cfg(None), true).unwrap();
        assert_eq!(a, b);
        let mut c2 = cfg(None);
        c2.seed = 77;
        assert_ne!(a, fit_tree(&x, &y, &c2, true).unwrap());
    }

    #[test]
    fn bad_input() {
        let x = Matrix::from_rows::<[f64; 1]>(&[]).unwrap();
        assert!(fit_tree(&x, &[], &cfg(None), false).is_err());
        let x = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(fit_tree(&x, &[1.0], &cfg(None), false).is_err());
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(fit_tree(&x, &[1.0, 2.0], &cfg(None), false).is_err());
    }

    #[test]
    fn from_nodes_rejects_bad_links() {
        assert!(Tree::from_nodes(vec![Node::Split { feature: 0, threshold: 0.0, left: 0, right: 1 }]).is_err());
        let ok = vec![
            Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
            Node::Leaf { value: 1.0, samples: 1 },
            Node::Leaf { value: 2.0, samples: 1 },
        ];
        let t = Tree::from_nodes(ok).unwrap();
        assert_eq!(t.predict(&[-1.0]), 1.0);
        assert_eq!(t.preorder().len(), 3);
    }
}
