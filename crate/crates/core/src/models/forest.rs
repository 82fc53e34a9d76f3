//! Bagged multi-output regression trees.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `0` means a third of the input dimension.
    pub max_features: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 32,
            max_depth: 10,
            min_samples_leaf: 5,
            max_features: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Builder<'a, R: Rng> {
    data: &'a Dataset,
    cfg: ForestConfig,
    mtry: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn mean(&self, idx: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.data.target_dim()];
        for &i in idx {
            for (a, y) in m.iter_mut().zip(&self.data.targets[i]) {
                *a += y;
            }
        }
        m.iter_mut().for_each(|a| *a /= idx.len() as f64);
        m
    }

    /// Best `(feature, threshold, score)` where score is the between-group sum of
    /// squares gain, summed over outputs.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let leaf = self.cfg.min_samples_leaf.max(1);
        if n < 2 * leaf {
            return None;
        }
        let dt = self.data.target_dim();
        let mut total = vec![0.0; dt];
        for &i in idx {
            for (t, y) in total.iter_mut().zip(&self.data.targets[i]) {
                *t += y;
            }
        }
        let parent: f64 = total.iter().map(|s| s * s).sum::<f64>() / n as f64;

        let features = sample_indices(self.rng, self.data.input_dim(), self.mtry).into_vec();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        let mut left = vec![0.0; dt];
        for f in features {
            order.sort_by(|&a, &b| self.data.inputs[a][f].total_cmp(&self.data.inputs[b][f]));
            left.iter_mut().for_each(|v| *v = 0.0);
            for pos in 0..n - 1 {
                for (l, y) in left.iter_mut().zip(&self.data.targets[order[pos]]) {
                    *l += y;
                }
                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < leaf || n_right < leaf {
                    continue;
                }
                let x_here = self.data.inputs[order[pos]][f];
                let x_next = self.data.inputs[order[pos + 1]][f];
                if x_here == x_next {
                    continue;
                }
                let score: f64 = left
                    .iter()
                    .zip(&total)
                    .map(|(l, t)| {
                        let r = t - l;
                        l * l / n_left as f64 + r * r / n_right as f64
                    })
                    .sum::<f64>()
                    - parent;
                if score > 1e-12 && best.is_none_or(|b| score > b.2) {
                    best = Some((f, 0.5 * (x_here + x_next), score));
                }
            }
        }
        best.map(|(f, thr, _)| (f, thr))
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: vec![] });
        let split = if depth < self.cfg.max_depth {
            self.best_split(&idx)
        } else {
            None
        };
        match split {
            None => {
                self.nodes[slot] = Node::Leaf {
                    value: self.mean(&idx),
                };
            }
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx
                    .into_iter()
                    .partition(|&i| self.data.inputs[i][feature] <= threshold);
                let left = self.build(l, depth + 1);
                let right = self.build(r, depth + 1);
                self.nodes[slot] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        slot
    }
}

impl RegressionTree {
    pub fn fit<R: Rng>(data: &Dataset, idx: Vec<usize>, cfg: ForestConfig, rng: &mut R) -> Self {
        let d = data.input_dim();
        let mtry = if cfg.max_features == 0 {
            d.div_ceil(3).max(1)
        } else {
            cfg.max_features.min(d)
        };
        let mut b = Builder {
            data,
            cfg,
            mtry,
            rng,
            nodes: Vec::new(),
        };
        b.build(idx, 0);
        Self { nodes: b.nodes }
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
    n_outputs: usize,
}

impl RandomForest {
    pub fn fit<R: Rng>(data: &Dataset, cfg: ForestConfig, rng: &mut R) -> Result<Self> {
        if data.is_empty() || data.input_dim() == 0 || data.target_dim() == 0 {
            return Err(Error::InsufficientData {
                model: "random forest",
                reason: "empty or zero-dimensional dataset".into(),
            });
        }
        let n = data.len();
        let trees = (0..cfg.n_trees.max(1))
            .map(|_| {
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                RegressionTree::fit(data, bootstrap, cfg, rng)
            })
            .collect();
        Ok(Self {
            trees,
            n_outputs: data.target_dim(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_outputs];
        for t in &self.trees {
            for (o, v) in out.iter_mut().zip(t.predict(x)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.trees.len() as f64);
        out
    }
}
