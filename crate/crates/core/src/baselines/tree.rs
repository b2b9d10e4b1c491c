use serde::{Deserialize, Serialize};

use crate::numerics::Rng;

pub const MAX_TREE_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 32,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Anomalous fraction of the training samples in the leaf.
        prob: f64,
        n: usize,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree with Gini impurity. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// Random feature subset per node. Without one, or when `per_split`
/// covers every feature, nodes consider all features in index order.
pub(crate) struct FeatureSampler<'a> {
    pub per_split: usize,
    pub rng: &'a mut Rng,
}

struct Builder<'a, R> {
    rows: &'a [R],
    y: &'a [bool],
    params: &'a TreeParams,
    dim: usize,
    sampler: Option<FeatureSampler<'a>>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

/// `n·gini` of a node with `pos` positives among `n`.
fn weighted_gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    2.0 * pos as f64 * (n - pos) as f64 / n as f64
}

impl<R: AsRef<[f64]>> Builder<'_, R> {
    fn value(&self, i: usize, f: usize) -> f64 {
        self.rows[i].as_ref()[f]
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match &mut self.sampler {
            Some(s) if s.per_split < self.dim => {
                let mut all: Vec<usize> = (0..self.dim).collect();
                for i in 0..s.per_split {
                    let j = i + s.rng.below(self.dim - i);
                    all.swap(i, j);
                }
                let mut chosen = all[..s.per_split].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..self.dim).collect(),
        }
    }

    /// Lowest weighted impurity over candidate features and midpoints;
    /// ties keep the earlier feature and the lower threshold.
    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.y[i]).count();
        let mut best: Option<Candidate> = None;
        let mut sorted = idx.to_vec();
        for f in self.candidate_features() {
            sorted.sort_by(|&a, &b| self.value(a, f).total_cmp(&self.value(b, f)).then(a.cmp(&b)));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                if self.y[sorted[k]] {
                    left_pos += 1;
                }
                let (lo, hi) = (self.value(sorted[k], f), self.value(sorted[k + 1], f));
                let n_left = k + 1;
                if lo == hi || n_left < self.params.min_leaf || n - n_left < self.params.min_leaf {
                    continue;
                }
                let impurity = weighted_gini(left_pos, n_left) + weighted_gini(total_pos - left_pos, n - n_left);
                if best.is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    // adjacent floats can round the midpoint up to `hi`
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate {
                        impurity,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            prob: pos as f64 / idx.len() as f64,
            n: idx.len(),
        });
        let pure = pos == 0 || pos == idx.len();
        if pure || depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(idx) else {
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.value(i, split.feature) <= split.threshold);
        let left = self.build(&left_idx, depth + 1);
        let right = self.build(&right_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl Tree {
    /// Grows a tree on `rows[idx]` (indices may repeat, as in a bootstrap
    /// sample). `idx` must be non-empty.
    pub(crate) fn grow<R: AsRef<[f64]>>(
        rows: &[R],
        y: &[bool],
        idx: &[usize],
        params: &TreeParams,
        sampler: Option<FeatureSampler<'_>>,
    ) -> Self {
        let mut b = Builder {
            rows,
            y,
            params,
            dim: rows.first().map_or(0, |r| r.as_ref().len()),
            sampler,
            nodes: Vec::new(),
        };
        b.build(idx, 0);
        Tree { nodes: b.nodes }
    }

    pub fn fit<R: AsRef<[f64]>>(params: &TreeParams, rows: &[R], y: &[bool]) -> Self {
        let idx: Vec<usize> = (0..rows.len()).collect();
        Self::grow(rows, y, &idx, params, None)
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { prob, .. } => return *prob,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_line_needs_one_split() {
        let rows: Vec<Vec<f64>> = [0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9].iter().map(|&v| vec![v]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] > 0.5).collect();
        let t = Tree::fit(&TreeParams::default(), &rows, &y);
        assert_eq!(t.depth(), 1);
        match t.nodes[0] {
            Node::Split { threshold, .. } => assert!((threshold - 0.5).abs() < 1e-12),
            _ => panic!("root should split"),
        }
        for (r, &label) in rows.iter().zip(&y) {
            assert_eq!(t.prob(r) > 0.5, label);
        }
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..16).map(|i| i % 2 == 1).collect();
        let t = Tree::fit(&TreeParams { max_depth: 2, min_leaf: 1 }, &rows, &y);
        assert!(t.depth() <= 2);
        let t = Tree::fit(&TreeParams { max_depth: 32, min_leaf: 4 }, &rows, &y);
        assert!(t
            .nodes
            .iter()
            .all(|n| !matches!(n, Node::Leaf { n, .. } if *n < 4)));
    }

    #[test]
    fn identical_features_with_mixed_labels_stay_a_leaf() {
        let rows = vec![vec![1.0], vec![1.0], vec![1.0]];
        let t = Tree::fit(&TreeParams::default(), &rows, &[true, false, true]);
        assert_eq!(t.nodes.len(), 1);
        assert!((t.prob(&[1.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn adjacent_float_midpoint_keeps_upper_value_right() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = Tree::fit(&TreeParams::default(), &[vec![a], vec![b]], &[false, true]);
        assert_eq!(t.prob(&[a]), 0.0);
        assert_eq!(t.prob(&[b]), 1.0);
    }
}
