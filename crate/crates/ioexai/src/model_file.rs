//! Versioned text serialization of trained models.
//!
//! ```text
//! ioexai-model 1
//! kind extra_trees
//! target cqi
//! fit_seed 42
//! base_value 0x0p+0
//! features 2
//! feature speed_kmh
//! feature sinr_db
//! trees 1
//! tree 0x1p+0 3
//! S 1 0x1.4p+3
//! L 0x1.2p+3 10
//! L 0x1.cp+3 12
//! end
//! ```
//!
//! Trees are dumped in preorder, so child links are implicit. Linear models
//! replace the tree section with `linear <intercept> <rank_deficient>`
//! followed by one `coef` line per feature. Every real is a hexadecimal
//! float, which makes the round trip bit-exact.

use std::path::Path;

use ioexai_core::regress::{EnsembleModel, LinearPart, ModelKind, Node, Tree};

use crate::error::{CliError, CliResult};
use crate::hexfloat;

pub const MODEL_MAGIC: &str = "ioexai-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn render(model: &EnsembleModel) -> String {
    let h = hexfloat::format;
    let mut s = format!("{MODEL_MAGIC} {MODEL_FORMAT_VERSION}\n");
    s += &format!("kind {}\n", model.kind);
    s += &format!("target {}\n", model.target_name);
    s += &format!("fit_seed {}\n", model.fit_seed);
    s += &format!("base_value {}\n", h(model.base_value));
    s += &format!("features {}\n", model.feature_names.len());
    for f in &model.feature_names {
        s += &format!("feature {f}\n");
    }
    if let Some(l) = &model.linear {
        s += &format!("linear {} {}\n", h(l.intercept), u8::from(l.rank_deficient));
        for c in &l.coefficients {
            s += &format!("coef {}\n", h(*c));
        }
    } else {
        s += &format!("trees {}\n", model.trees.len());
        for (t, w) in model.trees.iter().zip(&model.tree_weights) {
            let nodes = t.preorder();
            s += &format!("tree {} {}\n", h(*w), nodes.len());
            for n in nodes {
                match n {
                    Node::Split { feature, threshold, .. } => s += &format!("S {feature} {}\n", h(threshold)),
                    Node::Leaf { value, samples } => s += &format!("L {} {samples}\n", h(value)),
                }
            }
        }
    }
    s += "end\n";
    s
}

pub fn save(model: &EnsembleModel, path: &Path) -> CliResult<()> {
    std::fs::write(path, render(model)).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> CliResult<EnsembleModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|e| e.context(path.display()))
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl std::fmt::Display) -> CliError {
        CliError::validation(format!("line {}: {msg}", self.line))
    }

    /// Next line split into its keyword and the remaining fields.
    fn next(&mut self, expect: &str) -> CliResult<(&'a str, Vec<&'a str>)> {
        match self.iter.next() {
            None => Err(CliError::validation(format!("truncated model file: expected `{expect}` after line {}", self.line))),
            Some((i, l)) => {
                self.line = i + 1;
                let mut parts = l.split_whitespace();
                let key = parts.next().unwrap_or("");
                Ok((key, parts.collect()))
            }
        }
    }

    fn keyed(&mut self, key: &str) -> CliResult<Vec<&'a str>> {
        let (k, rest) = self.next(key)?;
        if k != key {
            return Err(self.err(format!("expected `{key}`, found `{k}`")));
        }
        Ok(rest)
    }

    fn one(&mut self, key: &str) -> CliResult<&'a str> {
        let rest = self.keyed(key)?;
        match rest.as_slice() {
            [v] => Ok(v),
            _ => Err(self.err(format!("`{key}` takes exactly one value"))),
        }
    }

    fn one_real(&mut self, key: &str) -> CliResult<f64> {
        let v = self.one(key)?;
        self.real(v)
    }

    fn one_count(&mut self, key: &str) -> CliResult<usize> {
        let v = self.one(key)?;
        self.count(v)
    }

    fn real(&self, v: &str) -> CliResult<f64> {
        hexfloat::parse(v).ok_or_else(|| self.err(format!("`{v}` is not a hexadecimal float")))
    }

    fn count(&self, v: &str) -> CliResult<usize> {
        v.parse().map_err(|_| self.err(format!("`{v}` is not a count")))
    }
}

pub fn parse(text: &str) -> CliResult<EnsembleModel> {
    let mut l = Lines { iter: text.lines().enumerate(), line: 0 };
    let version = l.one(MODEL_MAGIC).map_err(|_| CliError::validation("not a model file (missing header)"))?;
    let version: u32 = version.parse().map_err(|_| l.err(format!("bad format version `{version}`")))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(CliError::validation(format!(
            "model file format version {version} is not supported (this build reads version {MODEL_FORMAT_VERSION})"
        )));
    }
    let kind: ModelKind = l.one("kind")?.parse().map_err(|e: ioexai_core::Error| l.err(e))?;
    let target_name = l.one("target")?.to_string();
    let fit_seed = l.one("fit_seed")?;
    let fit_seed: u64 = fit_seed.parse().map_err(|_| l.err(format!("`{fit_seed}` is not a seed")))?;
    let base_value = l.one_real("base_value")?;
    let p = l.one_count("features")?;
    let mut feature_names = Vec::with_capacity(p);
    for _ in 0..p {
        feature_names.push(l.one("feature")?.to_string());
    }

    let mut model = EnsembleModel {
        kind,
        feature_names,
        target_name,
        fit_seed,
        base_value,
        trees: Vec::new(),
        tree_weights: Vec::new(),
        linear: None,
    };
    if kind == ModelKind::Linear {
        let rest = l.keyed("linear")?;
        let [intercept, flag] = rest.as_slice() else {
            return Err(l.err("`linear` takes an intercept and a rank flag"));
        };
        let intercept = l.real(intercept)?;
        let rank_deficient = match *flag {
            "0" => false,
            "1" => true,
            f => return Err(l.err(format!("rank flag must be 0 or 1, found `{f}`"))),
        };
        let mut coefficients = Vec::with_capacity(p);
        for _ in 0..p {
            coefficients.push(l.one_real("coef")?);
        }
        model.linear = Some(LinearPart { intercept, coefficients, rank_deficient });
    } else {
        let n_trees = l.one_count("trees")?;
        for _ in 0..n_trees {
            let rest = l.keyed("tree")?;
            let [w, n] = rest.as_slice() else {
                return Err(l.err("`tree` takes a weight and a node count"));
            };
            let weight = l.real(w)?;
            let n = l.count(n)?;
            let mut pre = Vec::with_capacity(n);
            for _ in 0..n {
                let (k, rest) = l.next("S or L")?;
                let node = match (k, rest.as_slice()) {
                    ("S", [f, t]) => Node::Split { feature: l.count(f)?, threshold: l.real(t)?, left: 0, right: 0 },
                    ("L", [v, s]) => Node::Leaf { value: l.real(v)?, samples: l.count(s)? },
                    _ => return Err(l.err(format!("expected a node line, found `{k}`"))),
                };
                pre.push(node);
            }
            let tree = link_preorder(pre).map_err(|m| l.err(m))?;
            model.trees.push(tree);
            model.tree_weights.push(weight);
        }
    }
    l.keyed("end")?;
    model.check().map_err(|e| CliError::from(e).context("model file"))?;
    Ok(model)
}

/// Restores child links of a preorder node list.
fn link_preorder(mut nodes: Vec<Node>) -> Result<Tree, String> {
    // Each split waits for its left child, then its right child.
    let mut open: Vec<(usize, bool)> = Vec::new();
    for i in 0..nodes.len() {
        if i > 0 {
            let Some((parent, left_done)) = open.pop() else {
                return Err("tree has nodes after its last leaf".into());
            };
            if let Node::Split { left, right, .. } = &mut nodes[parent] {
                if left_done {
                    *right = i;
                } else {
                    *left = i;
                    open.push((parent, true));
                }
            }
        }
        if matches!(nodes[i], Node::Split { .. }) {
            open.push((i, false));
        }
    }
    if !open.is_empty() {
        return Err("tree ends before every split has two children".into());
    }
    Tree::from_nodes(nodes).map_err(|e| e.to_string())
}
