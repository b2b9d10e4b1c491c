use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{FeatureSampler, Tree, TreeParams};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub features_per_split: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Resample the training set with replacement for every tree.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            features_per_split: 3,
            max_depth: 32,
            min_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Tree `t` draws from its own stream of `seed`, so the ensemble does
    /// not depend on how trees are scheduled across threads.
    pub fn fit<R: AsRef<[f64]> + Sync>(params: &ForestParams, rows: &[R], y: &[bool], seed: u64) -> Self {
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
        };
        let n = rows.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = Rng::derived(seed, t as u64);
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.below(n)).collect()
                } else {
                    (0..n).collect()
                };
                let sampler = FeatureSampler {
                    per_split: params.features_per_split,
                    rng: &mut rng,
                };
                Tree::grow(rows, y, &idx, &tree_params, Some(sampler))
            })
            .collect();
        Self { trees }
    }

    /// Fraction of trees voting Anomalous.
    pub fn prob(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.prob(x) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}
