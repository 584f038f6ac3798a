//! Small deterministic random-forest classifier with gini impurity
//! importances, backing the DCI predictor.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features tried per split; 0 means all features (gain-based
    /// selection, as in gradient-boosted reference predictors).
    pub feature_subsample: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 8,
            max_depth: 12,
            min_samples_split: 4,
            feature_subsample: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
    /// Accumulated gini-decrease importance per feature, normalized to sum 1
    /// (all zeros when no split ever improved purity).
    importances: Vec<f64>,
    n_classes: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let mut g = 1.0;
    for &c in counts {
        let p = c as f64 / t;
        g -= p * p;
    }
    g
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = c;
        }
    }
    best
}

struct TreeBuilder<'a> {
    x: &'a Array2<f64>,
    y: &'a [usize],
    n_classes: usize,
    cfg: ForestConfig,
    n_features_per_split: usize,
    n_total: usize,
    nodes: Vec<Node>,
    importances: Vec<f64>,
}

impl TreeBuilder<'_> {
    /// Builds the subtree over `indices`; returns the node id.
    fn build(&mut self, indices: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &i in indices.iter() {
            counts[self.y[i]] += 1;
        }
        let node_gini = gini(&counts, indices.len());
        let make_leaf = |nodes: &mut Vec<Node>| {
            nodes.push(Node::Leaf {
                class: majority(&counts),
            });
            nodes.len() - 1
        };
        if depth >= self.cfg.max_depth
            || indices.len() < self.cfg.min_samples_split
            || node_gini == 0.0
        {
            return make_leaf(&mut self.nodes);
        }

        // sample candidate features without replacement
        let d = self.x.ncols();
        let mut features: Vec<usize> = (0..d).collect();
        for i in 0..self.n_features_per_split.min(d) {
            let j = rng.gen_range(i..d);
            features.swap(i, j);
        }
        features.truncate(self.n_features_per_split.min(d));
        features.sort_unstable(); // deterministic evaluation order

        let mut best: Option<(f64, usize, f64, usize)> = None; // (gain, feature, threshold, left_count)
        let mut sorted = indices.to_vec();
        for &f in &features {
            sorted.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
            let mut left_counts = vec![0usize; self.n_classes];
            let total = sorted.len();
            for split in 1..total {
                left_counts[self.y[sorted[split - 1]]] += 1;
                let prev = self.x[[sorted[split - 1], f]];
                let cur = self.x[[sorted[split], f]];
                if prev == cur {
                    continue;
                }
                let right_counts: Vec<usize> = counts
                    .iter()
                    .zip(&left_counts)
                    .map(|(&c, &l)| c - l)
                    .collect();
                let w_left = split as f64 / total as f64;
                let w_right = 1.0 - w_left;
                let gain = node_gini
                    - w_left * gini(&left_counts, split)
                    - w_right * gini(&right_counts, total - split);
                let threshold = 0.5 * (prev + cur);
                if best.is_none_or(|(g, ..)| gain > g) {
                    best = Some((gain, f, threshold, split));
                }
            }
        }

        let Some((gain, feature, threshold, _)) = best else {
            return make_leaf(&mut self.nodes);
        };
        if gain <= 1e-12 {
            return make_leaf(&mut self.nodes);
        }
        self.importances[feature] += indices.len() as f64 / self.n_total as f64 * gain;

        // partition in place
        let mut left: Vec<usize> = Vec::new();
        let mut right: Vec<usize> = Vec::new();
        for &i in indices.iter() {
            if self.x[[i, feature]] <= threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        let placeholder = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 });
        let left_id = self.build(&mut left, depth + 1, rng);
        let right_id = self.build(&mut right, depth + 1, rng);
        self.nodes[placeholder] = Node::Split {
            feature,
            threshold,
            left: left_id,
            right: right_id,
        };
        placeholder
    }
}

impl Forest {
    /// Fits a bootstrap ensemble on rows of `x` with labels `y`.
    pub fn fit(
        x: &Array2<f64>,
        y: &[usize],
        n_classes: usize,
        cfg: &ForestConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n = x.nrows();
        let d = x.ncols();
        assert_eq!(n, y.len());
        let per_split = if cfg.feature_subsample == 0 {
            d
        } else {
            cfg.feature_subsample
        };
        let mut trees = Vec::with_capacity(cfg.n_trees);
        let mut importances = vec![0.0f64; d];
        for _ in 0..cfg.n_trees {
            let mut indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                x,
                y,
                n_classes,
                cfg: *cfg,
                n_features_per_split: per_split.max(1),
                n_total: n,
                nodes: Vec::new(),
                importances: vec![0.0; d],
            };
            builder.build(&mut indices, 0, rng);
            for (acc, imp) in importances.iter_mut().zip(&builder.importances) {
                *acc += imp / cfg.n_trees as f64;
            }
            trees.push(Tree {
                nodes: builder.nodes,
            });
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            for imp in &mut importances {
                *imp /= total;
            }
        }
        Self {
            trees,
            importances,
            n_classes,
        }
    }

    /// Majority vote across trees; ties break to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(row)] += 1;
        }
        majority(&votes)
    }

    pub fn accuracy(&self, x: &Array2<f64>, y: &[usize]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        let mut correct = 0;
        for (i, &label) in y.iter().enumerate() {
            let row: Vec<f64> = x.row(i).to_vec();
            if self.predict(&row) == label {
                correct += 1;
            }
        }
        correct as f64 / y.len() as f64
    }

    /// Normalized feature importances (sum 1, or all zeros when the forest
    /// never split).
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toy_problem(n: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<usize>) {
        // class = quantized first feature; second feature is noise
        let mut x = Array2::<f64>::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = rng.gen_range(0..4usize);
            x[[i, 0]] = c as f64 + rng.gen_range(-0.2..0.2);
            x[[i, 1]] = rng.gen_range(-1.0..1.0);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn forest_learns_a_separable_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x, y) = toy_problem(400, &mut rng);
        let forest = Forest::fit(&x, &y, 4, &ForestConfig::default(), &mut rng);
        assert!(forest.accuracy(&x, &y) > 0.95);
        // importance concentrates on the informative feature
        assert!(forest.importances()[0] > 0.9);
    }

    #[test]
    fn forest_is_deterministic_under_a_fixed_seed() {
        let mut data_rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y) = toy_problem(200, &mut data_rng);
        let mut rng_a = ChaCha8Rng::seed_from_u64(2);
        let mut rng_b = ChaCha8Rng::seed_from_u64(2);
        let fa = Forest::fit(&x, &y, 4, &ForestConfig::default(), &mut rng_a);
        let fb = Forest::fit(&x, &y, 4, &ForestConfig::default(), &mut rng_b);
        assert_eq!(fa.importances(), fb.importances());
        for i in 0..x.nrows() {
            let row: Vec<f64> = x.row(i).to_vec();
            assert_eq!(fa.predict(&row), fb.predict(&row));
        }
    }

    #[test]
    fn constant_features_give_zero_importance() {
        let x = Array2::<f64>::zeros((50, 3));
        let y: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let forest = Forest::fit(&x, &y, 2, &ForestConfig::default(), &mut rng);
        assert!(forest.importances().iter().all(|&v| v == 0.0));
    }
}
