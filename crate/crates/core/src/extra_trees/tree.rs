use rand::Rng;

use super::criterion::{bounded_mean, impurity};
use super::split::best_random_split;
use super::{HyperParams, TrainingSet};
use crate::scalar::Scalar;

/// A node of a regression tree. Trees are stored in pre-order, so the left
/// child of an internal node always sits at the next index.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T> {
    Internal {
        feature: usize,
        threshold: T,
        /// Index of the right child.
        right: usize,
        samples: usize,
        impurity: T,
    },
    Leaf {
        value: T,
        samples: usize,
        impurity: T,
    },
}

impl<T: Scalar> TreeNode<T> {
    pub fn samples(&self) -> usize {
        match *self {
            TreeNode::Internal { samples, .. } | TreeNode::Leaf { samples, .. } => samples,
        }
    }

    pub fn impurity(&self) -> T {
        match *self {
            TreeNode::Internal { impurity, .. } | TreeNode::Leaf { impurity, .. } => impurity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> Tree<T> {
    /// Wraps a pre-order node list. The caller guarantees the structure.
    pub(crate) fn from_nodes(nodes: Vec<TreeNode<T>>) -> Self {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn predict(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Internal { feature, threshold, right, .. } => {
                    i = if x[feature] <= threshold { i + 1 } else { right };
                }
                TreeNode::Leaf { value, .. } => return value,
            }
        }
    }

    /// Longest root-to-leaf path in edges; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                TreeNode::Internal { right, .. } => {
                    stack.push((i + 1, d + 1));
                    stack.push((right, d + 1));
                }
                TreeNode::Leaf { .. } => max = max.max(d),
            }
        }
        max
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Grows one tree on all rows of `data`.
    pub(crate) fn grow<R: Rng + ?Sized>(data: &TrainingSet<T>, hp: &HyperParams, rng: &mut R) -> Self {
        let n_candidates = hp.max_features.resolve(data.arity());
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut nodes = Vec::new();
        let mut values = Vec::with_capacity(data.len());

        struct Task {
            start: usize,
            end: usize,
            depth: usize,
            /// Internal node waiting for this task's index as its right child.
            parent: Option<usize>,
        }
        let mut stack = vec![Task { start: 0, end: data.len(), depth: 0, parent: None }];

        while let Some(task) = stack.pop() {
            let index = nodes.len();
            if let Some(p) = task.parent {
                if let TreeNode::Internal { right, .. } = &mut nodes[p] {
                    *right = index;
                }
            }
            let samples = &mut order[task.start..task.end];
            values.clear();
            values.extend(samples.iter().map(|&s| data.targets()[s]));
            let n = samples.len();
            let value = bounded_mean(&values);
            let node_impurity = impurity(hp.criterion, &mut values);
            let pure = values.iter().all(|&v| v == values[0]);
            let depth_capped = hp.max_depth.is_some_and(|d| task.depth >= d);

            let split = if pure || depth_capped || n < hp.min_samples_split {
                None
            } else {
                best_random_split(data, samples, n_candidates, hp.criterion, rng).best
            };
            let Some(split) = split else {
                nodes.push(TreeNode::Leaf { value, samples: n, impurity: node_impurity });
                continue;
            };

            let mut mid = 0;
            for k in 0..n {
                if data.value(samples[k], split.feature) <= split.threshold {
                    samples.swap(k, mid);
                    mid += 1;
                }
            }
            debug_assert!(mid > 0 && mid < n);
            nodes.push(TreeNode::Internal {
                feature: split.feature,
                threshold: split.threshold,
                right: usize::MAX,
                samples: n,
                impurity: node_impurity,
            });
            let mid = task.start + mid;
            stack.push(Task { start: mid, end: task.end, depth: task.depth + 1, parent: Some(index) });
            stack.push(Task { start: task.start, end: mid, depth: task.depth + 1, parent: None });
        }
        Tree { nodes }
    }

    /// Impurity decrease credited to each feature, weighted by the fraction
    /// of training samples reaching the split.
    pub(crate) fn impurity_decrease(&self, arity: usize) -> Vec<f64> {
        let mut credit = vec![0.0; arity];
        let total = self.nodes[0].samples() as f64;
        for (i, node) in self.nodes.iter().enumerate() {
            if let TreeNode::Internal { feature, right, samples, impurity, .. } = *node {
                let left = &self.nodes[i + 1];
                let right = &self.nodes[right];
                let n = samples as f64;
                let children = (left.samples() as f64 * left.impurity().to_f64_lossy()
                    + right.samples() as f64 * right.impurity().to_f64_lossy())
                    / n;
                let decrease = (impurity.to_f64_lossy() - children).max(0.0);
                credit[feature] += n / total * decrease;
            }
        }
        credit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TargetKind;
    use crate::extra_trees::{Criterion, MaxFeatures};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hp(criterion: Criterion) -> HyperParams {
        HyperParams { n_estimators: 1, max_features: MaxFeatures::All, criterion, ..Default::default() }
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let ts = TrainingSet::from_rows(&[vec![1.0f64], vec![2.0], vec![3.0]], vec![0.3; 3], TargetKind::Power).unwrap();
        let t = Tree::grow(&ts, &hp(Criterion::Mse), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&[17.0]), 0.3);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn grows_to_purity_and_keeps_preorder() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 7 % 40) as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| (i * i) as f64).collect();
        let ts = TrainingSet::from_rows(&rows, y.clone(), TargetKind::Power).unwrap();
        for criterion in [Criterion::Mse, Criterion::Mae] {
            let t = Tree::grow(&ts, &hp(criterion), &mut ChaCha8Rng::seed_from_u64(5));
            for (r, &target) in rows.iter().zip(&y) {
                assert_eq!(t.predict(r), target);
            }
            assert_eq!(t.leaf_count(), 40);
            for (i, n) in t.nodes().iter().enumerate() {
                if let TreeNode::Internal { right, samples, .. } = *n {
                    assert!(right > i + 1);
                    assert_eq!(t.nodes()[i + 1].samples() + t.nodes()[right].samples(), samples);
                }
            }
        }
    }

    #[test]
    fn depth_and_min_samples_limits() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let ts = TrainingSet::from_rows(&rows, (0..64).map(f64::from).collect(), TargetKind::Power).unwrap();
        let capped = HyperParams { max_depth: Some(3), ..hp(Criterion::Mse) };
        assert!(Tree::grow(&ts, &capped, &mut ChaCha8Rng::seed_from_u64(1)).depth() <= 3);
        let coarse = HyperParams { min_samples_split: 64, ..hp(Criterion::Mse) };
        let t = Tree::grow(&ts, &coarse, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(t.depth(), 1);
    }
}
