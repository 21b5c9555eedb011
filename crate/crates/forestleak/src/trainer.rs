//! Greedy CART forest training with per-node feature subsampling and
//! optional bootstrap, producing forests with exact per-node counts.
//!
//! Split scoring is weighted Gini impurity compared in exact integer
//! arithmetic, so training is bit-reproducible across platforms. Candidate
//! thresholds are midpoints between consecutive distinct observed values
//! (0.5 for binary attributes). Ties break toward the lowest feature index,
//! then the lowest threshold.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data_model::Dataset;
use crate::forest::{Forest, Node, NodeKind, Tree};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxFeatures {
    All,
    /// Ceil of the square root of the attribute count.
    Sqrt,
    Count(usize),
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(&self, m: usize) -> Result<usize, TrainError> {
        let value = match *self {
            MaxFeatures::All => m,
            MaxFeatures::Sqrt => (m as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(c) => c,
            MaxFeatures::Fraction(f) => {
                if !(0.0..=1.0).contains(&f) {
                    return Err(TrainError::BadParams(format!("fraction {f} out of [0, 1]")));
                }
                (f * m as f64).ceil() as usize
            }
        };
        if value == 0 || value > m {
            return Err(TrainError::BadParams(format!(
                "max_features resolves to {value}, expected 1..={m}"
            )));
        }
        Ok(value)
    }
}

#[derive(Debug, Clone)]
pub struct TrainParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub seed: u64,
    /// Attribute indices the trainer must not split on.
    pub masked_features: Vec<usize>,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            n_trees: 10,
            max_depth: None,
            bootstrap: false,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            seed: 0,
            masked_features: Vec::new(),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tree as u64 + 1)))
}

/// Draws `n` indices uniformly with replacement from `0..n`.
pub fn bootstrap_sample(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bootstrap_with(n, &mut rng)
}

fn bootstrap_with(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Weighted Gini impurity of a two-way split, as an exact fraction
/// `num / den` scaled by the node size; smaller is purer.
struct SplitScore {
    num: i128,
    den: i128,
}

impl SplitScore {
    fn of(left: &[u64], right: &[u64]) -> Self {
        let part = |counts: &[u64]| -> (i128, i128) {
            let n: i128 = counts.iter().map(|&c| c as i128).sum();
            let sq: i128 = counts.iter().map(|&c| (c as i128) * (c as i128)).sum();
            (n * n - sq, n)
        };
        let (a_l, n_l) = part(left);
        let (a_r, n_r) = part(right);
        SplitScore { num: a_l * n_r + a_r * n_l, den: n_l * n_r }
    }

    fn better_than(&self, other: &SplitScore) -> bool {
        self.num * other.den < other.num * self.den
    }

    /// Strictly purer than an unsplit node with the given counts.
    fn improves(&self, counts: &[u64]) -> bool {
        let n: i128 = counts.iter().map(|&c| c as i128).sum();
        let sq: i128 = counts.iter().map(|&c| (c as i128) * (c as i128)).sum();
        self.num * n < (n * n - sq) * self.den
    }
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    params: &'a TrainParams,
    allowed: Vec<usize>,
    per_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn class_counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.data.schema.n_classes];
        for &r in rows {
            counts[self.data.labels[r]] += 1;
        }
        counts
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node { id, kind: NodeKind::Leaf, counts: counts.clone() });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < self.params.min_samples_split {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, &counts) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.data.rows[r][feature].as_f64() <= threshold);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id].kind = NodeKind::Internal { feature, threshold, left, right };
        id
    }

    /// Draws a fresh feature subset and returns the purest improving split,
    /// scanning features and thresholds in ascending order so ties resolve
    /// deterministically.
    fn best_split(&mut self, rows: &[usize], counts: &[u64]) -> Option<(usize, f64)> {
        let mut pool = self.allowed.clone();
        pool.shuffle(&mut self.rng);
        pool.truncate(self.per_split.min(pool.len()));
        pool.sort_unstable();

        let n_classes = self.data.schema.n_classes;
        let mut best: Option<(SplitScore, usize, f64)> = None;
        for &feature in &pool {
            let mut by_value: Vec<(f64, usize)> = rows
                .iter()
                .map(|&r| (self.data.rows[r][feature].as_f64(), self.data.labels[r]))
                .collect();
            by_value.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0u64; n_classes];
            let mut right = counts.to_vec();
            let mut i = 0;
            while i < by_value.len() {
                let value = by_value[i].0;
                while i < by_value.len() && by_value[i].0 == value {
                    left[by_value[i].1] += 1;
                    right[by_value[i].1] -= 1;
                    i += 1;
                }
                if i == by_value.len() {
                    break;
                }
                let threshold = (value + by_value[i].0) / 2.0;
                let score = SplitScore::of(&left, &right);
                let take = match &best {
                    None => score.improves(counts),
                    Some((cur, _, _)) => score.better_than(cur),
                };
                if take {
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Trains a forest of greedy CART trees. Node counts record the training
/// rows reaching each node: the bootstrap multiset when bootstrap is on,
/// the full training set otherwise.
pub fn train_forest(train: &Dataset, params: &TrainParams) -> Result<Forest, TrainError> {
    if train.n_rows() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    if params.n_trees == 0 {
        return Err(TrainError::BadParams("n_trees must be at least 1".into()));
    }
    let m = train.schema.n_attributes();
    let per_split = params.max_features.resolve(m)?;
    let allowed: Vec<usize> =
        (0..m).filter(|i| !params.masked_features.contains(i)).collect();
    if allowed.is_empty() {
        return Err(TrainError::BadParams("every feature is masked".into()));
    }

    let n = train.n_rows();
    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = tree_rng(params.seed, t);
        let rows: Vec<usize> =
            if params.bootstrap { bootstrap_with(n, &mut rng) } else { (0..n).collect() };
        let mut builder = TreeBuilder {
            data: train,
            params,
            allowed: allowed.clone(),
            per_split,
            rng,
            nodes: Vec::new(),
        };
        let root = builder.build(rows, 0);
        let tree = Tree::new(builder.nodes, root, train.schema.n_classes)
            .expect("trainer produced a malformed tree");
        trees.push(tree);
    }
    let forest = Forest::new(trees, train.schema.clone(), n, params.bootstrap)
        .expect("trainer produced an invalid forest");
    debug_assert!(crate::forest::validate_forest(&forest).is_empty());
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Attribute, AttributeKind, AttributeSchema, Value};
    use crate::forest::{fixtures, validate_forest, NodeKind};

    #[test]
    fn bootstrap_of_one_is_forced() {
        assert_eq!(bootstrap_sample(1, 42), vec![0]);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        assert_eq!(bootstrap_sample(50, 9), bootstrap_sample(50, 9));
    }

    #[test]
    fn bootstrap_miss_rate_matches_binomial() {
        // P(index 0 never drawn in 100 draws) = (99/100)^100.
        let expected = 0.99f64.powi(100);
        let mut misses = 0usize;
        for seed in 0..10_000u64 {
            if !bootstrap_sample(100, seed).contains(&0) {
                misses += 1;
            }
        }
        let observed = misses as f64 / 10_000.0;
        assert!(
            (observed - expected).abs() < 0.02,
            "observed {observed}, expected {expected}"
        );
    }

    #[test]
    fn masked_trainer_separates_the_toy_table() {
        let ds = fixtures::toy_dataset();
        let params = TrainParams {
            n_trees: 1,
            max_features: MaxFeatures::All,
            masked_features: vec![0],
            ..Default::default()
        };
        let forest = train_forest(&ds, &params).unwrap();
        assert!(validate_forest(&forest).is_empty());
        assert_eq!(forest.accuracy(&ds), 1.0);
        for node in &forest.trees[0].nodes {
            if let NodeKind::Internal { feature, .. } = node.kind {
                assert_ne!(feature, 0, "masked feature used");
            }
        }
    }

    #[test]
    fn pure_dataset_trains_to_single_leaves() {
        let schema = AttributeSchema::new(
            vec![Attribute { name: "b".into(), kind: AttributeKind::Binary }],
            vec![],
            2,
        )
        .unwrap();
        let ds = crate::data_model::Dataset::new(
            schema,
            vec![vec![Value::Int(0)], vec![Value::Int(1)], vec![Value::Int(0)]],
            vec![0, 0, 0],
            "c",
        )
        .unwrap();
        let forest = train_forest(
            &ds,
            &TrainParams { n_trees: 3, max_features: MaxFeatures::All, ..Default::default() },
        )
        .unwrap();
        for tree in &forest.trees {
            assert_eq!(tree.nodes.len(), 1);
            assert_eq!(tree.nodes[0].counts, vec![3, 0]);
        }
    }

    fn synthetic(n: usize, m: usize, seed: u64) -> crate::data_model::Dataset {
        use rand::Rng;
        let schema = AttributeSchema::new(
            (0..m).map(|i| Attribute { name: format!("a{i}"), kind: AttributeKind::Binary }).collect(),
            vec![],
            2,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<Value>> = (0..n)
            .map(|_| (0..m).map(|_| Value::Int(rng.random_range(0..2))).collect())
            .collect();
        let labels: Vec<usize> = rows
            .iter()
            .map(|r| {
                let ones: i64 = r.iter().map(|v| v.as_int().unwrap()).sum();
                usize::from(ones * 2 > m as i64)
            })
            .collect();
        crate::data_model::Dataset::new(schema, rows, labels, "c").unwrap()
    }

    #[test]
    fn without_bootstrap_root_counts_equal_the_label_histogram() {
        let ds = synthetic(60, 6, 5);
        let forest = train_forest(&ds, &TrainParams { n_trees: 4, seed: 11, ..Default::default() })
            .unwrap();
        let histogram: Vec<u64> = ds.class_counts().iter().map(|&c| c as u64).collect();
        for tree in &forest.trees {
            assert_eq!(tree.nodes[tree.root].counts, histogram);
        }
        assert!(validate_forest(&forest).is_empty());
    }

    #[test]
    fn bootstrap_forest_still_validates() {
        let ds = synthetic(40, 5, 6);
        let forest = train_forest(
            &ds,
            &TrainParams { n_trees: 5, bootstrap: true, seed: 3, ..Default::default() },
        )
        .unwrap();
        assert!(validate_forest(&forest).is_empty());
        assert!(forest.bagging);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let ds = synthetic(50, 6, 7);
        let params =
            TrainParams { n_trees: 6, bootstrap: true, seed: 1234, ..Default::default() };
        let a = train_forest(&ds, &params).unwrap();
        let b = train_forest(&ds, &params).unwrap();
        assert_eq!(a, b);
    }

    /// Independent float re-scoring: with the full feature set sampled, the
    /// chosen split at each node must minimize weighted Gini globally.
    #[test]
    fn chosen_splits_are_gini_optimal_within_the_pool() {
        let ds = synthetic(30, 4, 8);
        let forest = train_forest(
            &ds,
            &TrainParams { n_trees: 2, max_features: MaxFeatures::All, seed: 2, ..Default::default() },
        )
        .unwrap();

        let gini = |counts: &[u64]| {
            let n: f64 = counts.iter().map(|&c| c as f64).sum();
            if n == 0.0 {
                return 0.0;
            }
            1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
        };
        let weighted = |rows: &[usize], feature: usize, threshold: f64| {
            let mut left = vec![0u64; 2];
            let mut right = vec![0u64; 2];
            for &r in rows {
                if ds.rows[r][feature].as_f64() <= threshold {
                    left[ds.labels[r]] += 1;
                } else {
                    right[ds.labels[r]] += 1;
                }
            }
            let nl: f64 = left.iter().sum::<u64>() as f64;
            let nr: f64 = right.iter().sum::<u64>() as f64;
            nl * gini(&left) + nr * gini(&right)
        };

        for tree in &forest.trees {
            // Reconstruct the rows reaching each node by routing.
            let mut reach: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
            for r in 0..ds.n_rows() {
                let mut v = tree.root;
                loop {
                    reach[v].push(r);
                    match tree.nodes[v].kind {
                        NodeKind::Leaf => break,
                        NodeKind::Internal { feature, threshold, left, right } => {
                            v = if ds.rows[r][feature].as_f64() <= threshold { left } else { right };
                        }
                    }
                }
            }
            for node in &tree.nodes {
                if let NodeKind::Internal { feature, threshold, .. } = node.kind {
                    let rows = &reach[node.id];
                    let chosen = weighted(rows, feature, threshold);
                    for f in 0..4 {
                        for t in [0.5] {
                            assert!(
                                chosen <= weighted(rows, f, t) + 1e-9,
                                "node {} split ({feature}, {threshold}) beaten by ({f}, {t})",
                                node.id
                            );
                        }
                    }
                }
            }
        }
    }
}
