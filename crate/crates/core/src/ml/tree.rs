//! Greedy regression trees stored in an arena.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{design, FeatureRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureSubset {
    All,
    /// `⌊√d⌋` features drawn afresh at every node.
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub feature_subset: FeatureSubset,
    /// L2 penalty on leaf values: a leaf predicts `Σy / (n + λ)`.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Root split as `(feature, threshold)`, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf(_) => None,
        }
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: TreeParams,
    allowed: &'a [usize],
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let g: f64 = idx.iter().map(|&i| self.y[i]).sum();
        g / (idx.len() as f64 + self.params.lambda)
    }

    fn candidates(&mut self) -> Vec<usize> {
        match self.params.feature_subset {
            FeatureSubset::All => self.allowed.to_vec(),
            FeatureSubset::Sqrt => {
                let d = self.allowed.len();
                let m = ((d as f64).sqrt().floor() as usize).clamp(1, d);
                let mut picked: Vec<usize> = sample(self.rng, d, m)
                    .into_iter()
                    .map(|k| self.allowed[k])
                    .collect();
                picked.sort_unstable();
                picked
            }
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let lambda = self.params.lambda;
        let n = idx.len();
        // with λ = 0 the score differences are shift-invariant; centring
        // avoids cancellation on large price levels
        let shift = if lambda == 0.0 {
            idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64
        } else {
            0.0
        };
        let g: f64 = idx.iter().map(|&i| self.y[i] - shift).sum();
        let parent = g * g / (n as f64 + lambda);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for f in self.candidates() {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut gl = 0.0;
            for k in 0..n - 1 {
                gl += self.y[order[k]] - shift;
                let (nl, nr) = (k + 1, n - k - 1);
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if lo == hi || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let gr = g - gl;
                let score = gl * gl / (nl as f64 + lambda) + gr * gr / (nr as f64 + lambda);
                if best.is_none_or(|(_, _, s)| score > s) {
                    let mut thr = 0.5 * (lo + hi);
                    if thr >= hi {
                        thr = lo;
                    }
                    best = Some((f, thr, score));
                }
            }
        }
        let (f, thr, score) = best?;
        (score - parent > 1e-12 * (parent.abs() + 1.0)).then_some((f, thr))
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(self.leaf_value(idx)));
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a tree on the rows listed in `idx` (duplicates allowed), splitting
/// only on features in `allowed`.
pub(crate) fn grow_tree(
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    params: TreeParams,
    allowed: &[usize],
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut g = Grower {
        x,
        y,
        params,
        allowed,
        rng,
        nodes: Vec::new(),
    };
    g.grow(idx, 0);
    Tree { nodes: g.nodes }
}

/// Fits a single tree on all rows. Split ties keep the lowest feature index,
/// then the lowest threshold.
pub fn fit_tree(rows: &[FeatureRow], params: TreeParams, seed: u64) -> Tree {
    let (x, y) = design(rows);
    fit_tree_xy(&x, &y, params, seed)
}

pub fn fit_tree_xy(x: &[Vec<f64>], y: &[f64], params: TreeParams, seed: u64) -> Tree {
    let d = x.first().map_or(0, Vec::len);
    let allowed: Vec<usize> = (0..d).collect();
    let idx: Vec<usize> = (0..y.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grow_tree(x, y, &idx, params, &allowed, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_samples_leaf: 1,
            feature_subset: FeatureSubset::All,
            lambda: 0.0,
        }
    }

    #[test]
    fn constant_targets_single_leaf() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let t = fit_tree_xy(&x, &[3.0; 10], params(5), 0);
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.predict(&[100.0, 0.0]), 3.0);
    }

    #[test]
    fn depth_zero_is_mean() {
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let t = fit_tree_xy(&x, &[1.0, 2.0, 3.0, 6.0], params(0), 0);
        assert_eq!(t.predict(&[0.0]), 3.0);
    }

    #[test]
    fn separable_feature_found() {
        // feature 1 separates the targets, feature 0 is noise
        let x = vec![
            vec![0.3, 1.0],
            vec![0.1, 2.0],
            vec![0.4, 3.0],
            vec![0.2, 7.0],
            vec![0.5, 8.0],
        ];
        let y = [0.0, 0.0, 0.0, 10.0, 10.0];
        let t = fit_tree_xy(&x, &y, params(1), 0);
        assert_eq!(t.root_split(), Some((1, 5.0)));
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn lambda_shrinks_leaves() {
        let x = vec![vec![0.0], vec![1.0]];
        let t = fit_tree_xy(
            &x,
            &[2.0, 2.0],
            TreeParams {
                lambda: 1.0,
                ..params(0)
            },
            0,
        );
        assert!((t.predict(&[0.0]) - 4.0 / 3.0).abs() < 1e-15);
    }
}
