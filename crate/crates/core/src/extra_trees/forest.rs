use rayon::prelude::*;

use super::criterion::bounded_mean;
use super::{HyperParams, TrainingSet, Tree, TreeError};
use crate::dataset::TargetKind;
use crate::scalar::Scalar;
use crate::seed::rng_for;

/// A trained ensemble. Immutable once fitted; prediction is reentrant.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest<T> {
    trees: Vec<Tree<T>>,
    hyper: HyperParams,
    feature_names: Vec<String>,
    target_kind: TargetKind,
    avg_depth: f64,
}

/// Normalized mean-decrease-impurity per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub values: Vec<f64>,
    /// No tree has a split; `values` is uniform.
    pub all_leaves: bool,
}

impl FeatureImportance {
    /// Feature indices from most to least important; ties keep index order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        idx
    }
}

impl<T: Scalar> Forest<T> {
    /// Trains `hp.n_estimators` trees on the full training set.
    ///
    /// Tree `i` draws from its own stream derived from `(hp.seed, i)`, so
    /// parallel and sequential training give identical forests.
    pub fn fit(data: &TrainingSet<T>, hp: &HyperParams) -> Result<Self, TreeError> {
        hp.validate()?;
        if data.is_empty() {
            return Err(TreeError::EmptyDataset);
        }
        if !data.all_finite() {
            return Err(TreeError::NonFiniteInput);
        }
        let trees: Vec<Tree<T>> = (0..hp.n_estimators)
            .into_par_iter()
            .map(|i| Tree::grow(data, hp, &mut rng_for(hp.seed, &[i as u64])))
            .collect();
        Ok(Self::from_parts(trees, *hp, data.feature_names().to_vec(), data.target_kind()))
    }

    pub(crate) fn from_parts(trees: Vec<Tree<T>>, hyper: HyperParams, feature_names: Vec<String>, target_kind: TargetKind) -> Self {
        let avg_depth = trees.iter().map(|t| t.depth() as f64).sum::<f64>() / trees.len().max(1) as f64;
        Forest { trees, hyper, feature_names, target_kind, avg_depth }
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn arity(&self) -> usize {
        self.feature_names.len()
    }

    pub fn target_kind(&self) -> TargetKind {
        self.target_kind
    }

    /// Mean over trees of each tree's maximum depth.
    pub fn avg_depth(&self) -> f64 {
        self.avg_depth
    }

    fn check_arity(&self, x: &[T]) -> Result<(), TreeError> {
        if x.len() != self.arity() {
            return Err(TreeError::ArityMismatch { expected: self.arity(), found: x.len() });
        }
        Ok(())
    }

    /// Mean of the per-tree predictions, in training space.
    pub fn predict(&self, x: &[T]) -> Result<T, TreeError> {
        self.check_arity(x)?;
        Ok(bounded_mean(&self.tree_predictions_unchecked(x)))
    }

    /// Prediction mapped back to raw units (exp for time models).
    pub fn predict_raw(&self, x: &[T]) -> Result<T, TreeError> {
        Ok(self.target_kind.invert(self.predict(x)?))
    }

    pub fn tree_predictions(&self, x: &[T]) -> Result<Vec<T>, TreeError> {
        self.check_arity(x)?;
        Ok(self.tree_predictions_unchecked(x))
    }

    fn tree_predictions_unchecked(&self, x: &[T]) -> Vec<T> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    /// Mean decrease in impurity: per-tree credits normalized to one,
    /// averaged over trees, renormalized. A forest without any split gets a
    /// uniform vector and `all_leaves = true`.
    pub fn feature_importance(&self) -> FeatureImportance {
        let arity = self.arity();
        let mut acc = vec![0.0; arity];
        for tree in &self.trees {
            let credit = tree.impurity_decrease(arity);
            let total: f64 = credit.iter().sum();
            if total > 0.0 {
                acc.iter_mut().zip(&credit).for_each(|(a, c)| *a += c / total);
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            FeatureImportance { values: acc.iter().map(|v| v / total).collect(), all_leaves: false }
        } else {
            FeatureImportance { values: vec![1.0 / arity as f64; arity], all_leaves: true }
        }
    }
}
