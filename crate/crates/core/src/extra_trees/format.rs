//! Versioned text model format.
//!
//! ```text
//! gpucost-forest 1
//! kind time
//! n_estimators 128
//! max_features all
//! criterion mse
//! min_samples_split 2
//! max_depth none
//! seed 20210416
//! features threads_per_cta,ctas,...
//! tree 3
//! I 0 0.5 2 10 0.25
//! L 1.5 4 0
//! L 2.25 6 0.1875
//! ...
//! end
//! ```
//!
//! Internal nodes are `I feature threshold right samples impurity`, leaves
//! are `L value samples impurity`, both in pre-order. Numbers use the
//! shortest decimal form that parses back to the same bits.

use std::collections::HashMap;
use std::fmt::Write;

use super::{Criterion, Forest, HyperParams, Tree, TreeError, TreeNode};
use crate::dataset::TargetKind;
use crate::scalar::Scalar;

const MAGIC: &str = "gpucost-forest";
pub const FOREST_FORMAT_VERSION: u32 = 1;
const HEADER_KEYS: [&str; 8] =
    ["kind", "n_estimators", "max_features", "criterion", "min_samples_split", "max_depth", "seed", "features"];

impl<T: Scalar> Forest<T> {
    pub fn serialize(&self) -> String {
        let hp = self.hyper();
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FOREST_FORMAT_VERSION}");
        let _ = writeln!(out, "kind {}", self.target_kind());
        let _ = writeln!(out, "n_estimators {}", hp.n_estimators);
        let _ = writeln!(out, "max_features {}", hp.max_features.as_str());
        let _ = writeln!(out, "criterion {}", hp.criterion.as_str());
        let _ = writeln!(out, "min_samples_split {}", hp.min_samples_split);
        match hp.max_depth {
            Some(d) => writeln!(out, "max_depth {d}"),
            None => writeln!(out, "max_depth none"),
        }
        .ok();
        let _ = writeln!(out, "seed {}", hp.seed);
        let _ = writeln!(out, "features {}", self.feature_names().join(","));
        for tree in self.trees() {
            let _ = writeln!(out, "tree {}", tree.nodes().len());
            for node in tree.nodes() {
                match node {
                    TreeNode::Internal { feature, threshold, right, samples, impurity } => {
                        let _ = writeln!(out, "I {feature} {threshold} {right} {samples} {impurity}");
                    }
                    TreeNode::Leaf { value, samples, impurity } => {
                        let _ = writeln!(out, "L {value} {samples} {impurity}");
                    }
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, TreeError> {
        let corrupt = |msg: String| TreeError::CorruptModel(msg);
        let text = std::str::from_utf8(bytes).map_err(|_| corrupt("not UTF-8".into()))?;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

        let (_, first) = lines.next().ok_or_else(|| corrupt("empty input".into()))?;
        let version = match first.split_once(' ') {
            Some((MAGIC, v)) => v.parse::<u32>().map_err(|_| corrupt(format!("bad version `{v}`")))?,
            _ => return Err(corrupt("missing model header".into())),
        };
        if version > FOREST_FORMAT_VERSION {
            return Err(TreeError::VersionMismatch { found: version, supported: FOREST_FORMAT_VERSION });
        }
        if version == 0 {
            return Err(corrupt("version 0".into()));
        }

        let mut header = HashMap::new();
        for key in HEADER_KEYS {
            let (no, line) = lines.next().ok_or_else(|| corrupt(format!("missing `{key}`")))?;
            let value = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| corrupt(format!("line {no}: expected `{key}`")))?;
            header.insert(key, value);
        }
        let field = |key: &str| header[key];
        let num = |key: &str| field(key).parse::<usize>().map_err(|_| corrupt(format!("bad `{key}`")));
        let hyper = HyperParams {
            n_estimators: num("n_estimators")?,
            max_features: field("max_features").parse()?,
            criterion: field("criterion").parse::<Criterion>()?,
            min_samples_split: num("min_samples_split")?,
            max_depth: match field("max_depth") {
                "none" => None,
                _ => Some(num("max_depth")?),
            },
            seed: field("seed").parse().map_err(|_| corrupt("bad `seed`".into()))?,
        };
        hyper.validate().map_err(|e| corrupt(e.to_string()))?;
        let target_kind: TargetKind = field("kind").parse().map_err(|_| corrupt("bad `kind`".into()))?;
        let feature_names: Vec<String> = field("features").split(',').map(str::to_string).collect();
        if feature_names.iter().any(String::is_empty) {
            return Err(corrupt("empty feature name".into()));
        }

        let mut trees = Vec::with_capacity(hyper.n_estimators);
        loop {
            let (no, line) = lines.next().ok_or_else(|| corrupt("missing `end`".into()))?;
            if line == "end" {
                break;
            }
            let count = line
                .strip_prefix("tree ")
                .and_then(|c| c.parse::<usize>().ok())
                .ok_or_else(|| corrupt(format!("line {no}: expected `tree <nodes>`")))?;
            let mut nodes = Vec::with_capacity(count);
            for _ in 0..count {
                let (no, line) = lines.next().ok_or_else(|| corrupt("truncated tree".into()))?;
                nodes.push(parse_node::<T>(line).ok_or_else(|| corrupt(format!("line {no}: bad node `{line}`")))?);
            }
            check_tree(&nodes, feature_names.len()).map_err(|m| corrupt(format!("tree {}: {m}", trees.len())))?;
            trees.push(Tree::from_nodes(nodes));
        }
        if lines.any(|(_, l)| !l.is_empty()) {
            return Err(corrupt("trailing data after `end`".into()));
        }
        if trees.len() != hyper.n_estimators {
            return Err(corrupt(format!("expected {} trees, found {}", hyper.n_estimators, trees.len())));
        }
        Ok(Forest::from_parts(trees, hyper, feature_names, target_kind))
    }
}

fn parse_node<T: Scalar>(line: &str) -> Option<TreeNode<T>> {
    let parts: Vec<&str> = line.split(' ').collect();
    let real = |s: &str| s.parse::<T>().ok().filter(|v| v.is_finite());
    match parts.as_slice() {
        ["I", feature, threshold, right, samples, impurity] => Some(TreeNode::Internal {
            feature: feature.parse().ok()?,
            threshold: real(threshold)?,
            right: right.parse().ok()?,
            samples: samples.parse().ok()?,
            impurity: real(impurity)?,
        }),
        ["L", value, samples, impurity] => Some(TreeNode::Leaf {
            value: real(value)?,
            samples: samples.parse().ok()?,
            impurity: real(impurity)?,
        }),
        _ => None,
    }
}

/// Every node must be reached exactly once from the root, with left
/// children immediately following their parent.
fn check_tree<T: Scalar>(nodes: &[TreeNode<T>], arity: usize) -> Result<(), String> {
    if nodes.is_empty() {
        return Err("no nodes".into());
    }
    let mut next = 0;
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        if i != next {
            return Err(format!("node {i} out of pre-order"));
        }
        next += 1;
        if let TreeNode::Internal { feature, right, .. } = nodes[i] {
            if feature >= arity {
                return Err(format!("node {i}: feature {feature} out of range"));
            }
            if right <= i + 1 || right >= nodes.len() {
                return Err(format!("node {i}: bad right child {right}"));
            }
            stack.push(right);
            stack.push(i + 1);
        }
    }
    if next != nodes.len() {
        return Err(format!("{} unreachable nodes", nodes.len() - next));
    }
    Ok(())
}
