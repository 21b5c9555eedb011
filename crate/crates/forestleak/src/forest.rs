//! Forests of decision trees carrying per-node class counts.
//!
//! The split convention is fixed: an example with `value <= threshold` on the
//! node's attribute descends to the left child, otherwise to the right.
//! Binary attributes split at 0.5. Counts are exact integers; anything
//! fractional is rejected at import rather than rounded.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{AttributeKind, AttributeSchema, Dataset, Value};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("structural error in tree {tree}: {detail}")]
    Structure { tree: usize, detail: String },
    #[error("count error in tree {tree}: {detail}")]
    Counts { tree: usize, detail: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid forest: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Internal { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf,
}

/// A tree node together with the per-class count of training examples that
/// passed through it.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub counts: Vec<u64>,
}

impl Node {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub root: usize,
    /// Internal node ids indexed by depth; the flow encoding branches once
    /// per depth level.
    pub depth_index: Vec<Vec<usize>>,
    /// Set when internal counts were absent in the source and were derived
    /// by summing leaves upward.
    pub derived_internal_counts: bool,
}

impl Tree {
    /// Builds a tree and checks that the nodes form a single rooted binary
    /// tree with well-formed counts vectors.
    pub fn new(nodes: Vec<Node>, root: usize, n_classes: usize) -> Result<Self, ForestError> {
        Self::build(nodes, root, n_classes, false)
    }

    fn build(
        mut nodes: Vec<Node>,
        root: usize,
        n_classes: usize,
        derive_missing_counts: bool,
    ) -> Result<Self, ForestError> {
        let err = |detail: String| ForestError::Structure { tree: 0, detail };
        let n = nodes.len();
        if root >= n {
            return Err(err(format!("root {root} out of range")));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(err(format!("node at position {i} has id {}", node.id)));
            }
            if let NodeKind::Internal { left, right, .. } = node.kind {
                if left >= n || right >= n {
                    return Err(err(format!("node {i} child out of range")));
                }
                if left == right || left == i || right == i {
                    return Err(err(format!("node {i} has degenerate children")));
                }
            }
        }
        let mut parent = vec![usize::MAX; n];
        for node in &nodes {
            if let NodeKind::Internal { left, right, .. } = node.kind {
                for child in [left, right] {
                    if parent[child] != usize::MAX {
                        return Err(err(format!("node {child} has two parents")));
                    }
                    parent[child] = node.id;
                }
            }
        }
        if parent[root] != usize::MAX {
            return Err(err("root has a parent".into()));
        }
        // Walk from the root; every node must be reached exactly once.
        let mut depth = vec![usize::MAX; n];
        let mut stack = vec![(root, 0usize)];
        let mut visited = 0usize;
        while let Some((v, d)) = stack.pop() {
            if depth[v] != usize::MAX {
                return Err(err(format!("node {v} reachable twice (cycle)")));
            }
            depth[v] = d;
            visited += 1;
            if let NodeKind::Internal { left, right, .. } = nodes[v].kind {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        if visited != n {
            return Err(err(format!("{} of {n} nodes reachable from root", visited)));
        }
        if derive_missing_counts {
            derive_counts(&mut nodes, root, n_classes)?;
        }
        for node in &nodes {
            if node.counts.len() != n_classes {
                return Err(ForestError::Counts {
                    tree: 0,
                    detail: format!(
                        "node {} has {} count entries, expected {n_classes}",
                        node.id,
                        node.counts.len()
                    ),
                });
            }
        }
        let max_depth = depth.iter().copied().max().unwrap_or(0);
        let mut depth_index = vec![Vec::new(); max_depth + 1];
        for node in &nodes {
            if !node.is_leaf() {
                depth_index[depth[node.id]].push(node.id);
            }
        }
        while depth_index.last().is_some_and(Vec::is_empty) {
            depth_index.pop();
        }
        Ok(Tree { nodes, root, depth_index, derived_internal_counts: derive_missing_counts })
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn leaf_ids(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect()
    }

    /// Routes a row to its leaf id.
    pub fn route(&self, row: &[Value]) -> usize {
        let mut v = self.root;
        loop {
            match self.nodes[v].kind {
                NodeKind::Leaf => return v,
                NodeKind::Internal { feature, threshold, left, right } => {
                    v = if row[feature].as_f64() <= threshold { left } else { right };
                }
            }
        }
    }

    /// Majority class of a leaf, ties broken toward the lowest class index.
    pub fn leaf_class(&self, leaf: usize) -> usize {
        let counts = &self.nodes[leaf].counts;
        let mut best = 0usize;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        best
    }
}

fn derive_counts(nodes: &mut [Node], root: usize, n_classes: usize) -> Result<(), ForestError> {
    fn fill(nodes: &mut [Node], v: usize, n_classes: usize) -> Result<Vec<u64>, ForestError> {
        match nodes[v].kind {
            NodeKind::Leaf => {
                if nodes[v].counts.len() != n_classes {
                    return Err(ForestError::Counts {
                        tree: 0,
                        detail: format!("leaf {v} is missing counts"),
                    });
                }
                Ok(nodes[v].counts.clone())
            }
            NodeKind::Internal { left, right, .. } => {
                let l = fill(nodes, left, n_classes)?;
                let r = fill(nodes, right, n_classes)?;
                let sum: Vec<u64> = l.iter().zip(&r).map(|(a, b)| a + b).collect();
                if nodes[v].counts.is_empty() {
                    nodes[v].counts = sum.clone();
                }
                Ok(sum)
            }
        }
    }
    fill(nodes, root, n_classes).map(|_| ())
}

/// A trained forest: trees, the attribute schema they split over, the
/// training-set size, and whether bootstrap sampling was used.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub schema: AttributeSchema,
    pub n_examples: usize,
    pub bagging: bool,
}

impl Forest {
    pub fn new(
        trees: Vec<Tree>,
        schema: AttributeSchema,
        n_examples: usize,
        bagging: bool,
    ) -> Result<Self, ForestError> {
        schema.validate().map_err(|e| ForestError::Schema(e.to_string()))?;
        for (t, tree) in trees.iter().enumerate() {
            for node in &tree.nodes {
                if node.counts.len() != schema.n_classes {
                    return Err(ForestError::Counts {
                        tree: t,
                        detail: format!("node {} counts length mismatch", node.id),
                    });
                }
                if let NodeKind::Internal { feature, .. } = node.kind {
                    if feature >= schema.n_attributes() {
                        return Err(ForestError::Structure {
                            tree: t,
                            detail: format!(
                                "node {} splits on feature {feature}, schema has {}",
                                node.id,
                                schema.n_attributes()
                            ),
                        });
                    }
                }
            }
        }
        Ok(Forest { trees, schema, n_examples, bagging })
    }

    /// Routes a row through every tree and takes the plurality vote over the
    /// leaf classes, ties broken toward the lowest class index.
    pub fn classify(&self, row: &[Value]) -> usize {
        let mut votes = vec![0usize; self.schema.n_classes];
        for tree in &self.trees {
            let leaf = tree.route(row);
            votes[tree.leaf_class(leaf)] += 1;
        }
        let mut best = 0usize;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best
    }

    pub fn accuracy(&self, dataset: &Dataset) -> f64 {
        let hits = dataset
            .rows
            .iter()
            .zip(&dataset.labels)
            .filter(|(row, &label)| self.classify(row) == label)
            .count();
        hits as f64 / dataset.n_rows() as f64
    }
}

/// Split conditions accumulated along a root-to-node path: `positive` holds
/// (attribute, threshold) pairs that must satisfy `value > threshold`,
/// `negative` those that must satisfy `value <= threshold`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitSets {
    pub positive: Vec<(usize, f64)>,
    pub negative: Vec<(usize, f64)>,
}

/// Walks the path from the root of `tree` to `node`, collecting the split
/// conditions. The root carries empty sets; a left edge appends its split to
/// `negative`, a right edge to `positive`.
pub fn derive_split_sets(tree: &Tree, node: usize) -> Result<SplitSets, ForestError> {
    if node >= tree.nodes.len() {
        return Err(ForestError::UnknownNode(node));
    }
    let mut parent: Vec<Option<(usize, bool)>> = vec![None; tree.nodes.len()];
    for n in &tree.nodes {
        if let NodeKind::Internal { left, right, .. } = n.kind {
            parent[left] = Some((n.id, false));
            parent[right] = Some((n.id, true));
        }
    }
    let mut sets = SplitSets::default();
    let mut v = node;
    while let Some((p, went_right)) = parent[v] {
        if let NodeKind::Internal { feature, threshold, .. } = tree.nodes[p].kind {
            if went_right {
                sets.positive.push((feature, threshold));
            } else {
                sets.negative.push((feature, threshold));
            }
        }
        v = p;
    }
    sets.positive.reverse();
    sets.negative.reverse();
    Ok(sets)
}

/// One entry of a validation report, locating the violated invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub tree: usize,
    pub node: Option<usize>,
    pub class: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tree {}", self.tree)?;
        if let Some(v) = self.node {
            write!(f, ", node {v}")?;
        }
        if let Some(c) = self.class {
            write!(f, ", class {c}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal remarks, e.g. that internal counts were derived from leaves.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks both count invariants on every tree: each internal node's counts
/// equal the sum of its children's, and each tree's leaf counts total the
/// forest's `n_examples`.
pub fn validate_forest(forest: &Forest) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (t, tree) in forest.trees.iter().enumerate() {
        if tree.derived_internal_counts {
            report.notes.push(format!("tree {t}: internal counts derived from leaves"));
        }
        for node in &tree.nodes {
            if let NodeKind::Internal { left, right, .. } = node.kind {
                for c in 0..forest.schema.n_classes {
                    let children = tree.nodes[left].counts[c] + tree.nodes[right].counts[c];
                    if node.counts[c] != children {
                        report.violations.push(Violation {
                            tree: t,
                            node: Some(node.id),
                            class: Some(c),
                            detail: format!(
                                "count {} != left + right = {children}",
                                node.counts[c]
                            ),
                        });
                    }
                }
            }
        }
        let leaf_total: u64 = tree.leaves().map(Node::total).sum();
        if leaf_total != forest.n_examples as u64 {
            report.violations.push(Violation {
                tree: t,
                node: None,
                class: None,
                detail: format!(
                    "leaf counts total {leaf_total}, expected {}",
                    forest.n_examples
                ),
            });
        }
    }
    report
}

/// Sorted distinct split values of one numerical attribute across the whole
/// forest, plus the attribute's declared bounds. The attribute can lie in
/// `split_values.len() + 1` distinct intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTable {
    pub split_values: Vec<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
}

impl IntervalTable {
    pub fn interval_count(&self) -> usize {
        self.split_values.len() + 1
    }

    /// Index of the interval a raw value falls in: `i` such that
    /// `split_values[i-1] < value <= split_values[i]`, with the open-ended
    /// intervals at both extremes.
    pub fn interval_index(&self, value: f64) -> usize {
        self.split_values.iter().take_while(|&&s| value > s).count()
    }

    /// Index of a threshold that occurs in the forest; `value <= threshold`
    /// is then equivalent to `interval_index(value) <= position`.
    pub fn threshold_position(&self, threshold: f64) -> Option<usize> {
        self.split_values.iter().position(|&s| s == threshold)
    }

    /// Midpoint of an interval. Open-ended extremes decode to one unit past
    /// the outermost split value so the result re-routes identically.
    pub fn midpoint(&self, index: usize) -> f64 {
        let lower = if index == 0 { self.lower_bound } else { Some(self.split_values[index - 1]) };
        let upper = if index == self.split_values.len() {
            self.upper_bound
        } else {
            Some(self.split_values[index])
        };
        match (lower, upper) {
            (Some(lo), Some(hi)) => (lo + hi) / 2.0,
            (None, Some(hi)) => hi - 1.0,
            (Some(lo), None) => lo + 1.0,
            (None, None) => 0.0,
        }
    }
}

/// Interval tables for every numerical attribute of a forest's schema.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalTables {
    pub per_attribute: BTreeMap<usize, IntervalTable>,
}

impl IntervalTables {
    pub fn is_empty(&self) -> bool {
        self.per_attribute.is_empty()
    }

    pub fn get(&self, attr: usize) -> Option<&IntervalTable> {
        self.per_attribute.get(&attr)
    }
}

/// Collects, per numerical attribute, the sorted deduplicated set of
/// thresholds used anywhere in the forest.
pub fn build_interval_tables(forest: &Forest) -> IntervalTables {
    let mut tables = IntervalTables::default();
    for (i, attr) in forest.schema.attributes.iter().enumerate() {
        if let AttributeKind::Numerical { lower_bound, upper_bound } = attr.kind {
            let mut values: Vec<f64> = forest
                .trees
                .iter()
                .flat_map(|t| t.nodes.iter())
                .filter_map(|n| match n.kind {
                    NodeKind::Internal { feature, threshold, .. } if feature == i => {
                        Some(threshold)
                    }
                    _ => None,
                })
                .collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            if !values.is_empty() {
                tables
                    .per_attribute
                    .insert(i, IntervalTable { split_values: values, lower_bound, upper_bound });
            }
        }
    }
    tables
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    feature: i64,
    #[serde(default)]
    threshold: f64,
    #[serde(default = "minus_one")]
    left: i64,
    #[serde(default = "minus_one")]
    right: i64,
    #[serde(default)]
    counts: Vec<u64>,
}

fn minus_one() -> i64 {
    -1
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    root: usize,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct ForestDoc {
    n_examples: usize,
    bagging: bool,
    trees: Vec<TreeDoc>,
    schema: AttributeSchema,
}

/// Serialises a forest to the native JSON format. Leaves are marked by
/// `"feature": -1`.
pub fn forest_to_json(forest: &Forest) -> String {
    let doc = ForestDoc {
        n_examples: forest.n_examples,
        bagging: forest.bagging,
        schema: forest.schema.clone(),
        trees: forest
            .trees
            .iter()
            .map(|tree| TreeDoc {
                root: tree.root,
                nodes: tree
                    .nodes
                    .iter()
                    .map(|n| match n.kind {
                        NodeKind::Internal { feature, threshold, left, right } => NodeDoc {
                            id: n.id,
                            feature: feature as i64,
                            threshold,
                            left: left as i64,
                            right: right as i64,
                            counts: n.counts.clone(),
                        },
                        NodeKind::Leaf => NodeDoc {
                            id: n.id,
                            feature: -1,
                            threshold: 0.0,
                            left: -1,
                            right: -1,
                            counts: n.counts.clone(),
                        },
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).unwrap()
}

/// Parses the native JSON format. Internal nodes with missing counts get
/// them derived by summing leaves upward; the derivation shows up as a note
/// in later validation reports. Count inconsistencies are rejected.
pub fn forest_from_json(text: &str) -> Result<Forest, ForestError> {
    let doc: ForestDoc = serde_json::from_str(text).map_err(|e| ForestError::Parse(e.to_string()))?;
    let n_classes = doc.schema.n_classes;
    let mut trees = Vec::with_capacity(doc.trees.len());
    let mut any_derived = false;
    for (t, tree_doc) in doc.trees.iter().enumerate() {
        let mut nodes = Vec::with_capacity(tree_doc.nodes.len());
        let mut needs_derivation = false;
        for nd in &tree_doc.nodes {
            let kind = if nd.feature < 0 {
                NodeKind::Leaf
            } else {
                if nd.left < 0 || nd.right < 0 {
                    return Err(ForestError::Structure {
                        tree: t,
                        detail: format!("internal node {} lacks children", nd.id),
                    });
                }
                NodeKind::Internal {
                    feature: nd.feature as usize,
                    threshold: nd.threshold,
                    left: nd.left as usize,
                    right: nd.right as usize,
                }
            };
            if nd.counts.is_empty() && !matches!(kind, NodeKind::Leaf) {
                needs_derivation = true;
            }
            nodes.push(Node { id: nd.id, kind, counts: nd.counts.clone() });
        }
        any_derived |= needs_derivation;
        let tree = Tree::build(nodes, tree_doc.root, n_classes, needs_derivation)
            .map_err(|e| retag_tree_error(e, t))?;
        trees.push(tree);
    }
    let forest = Forest::new(trees, doc.schema, doc.n_examples, doc.bagging)?;
    let report = validate_forest(&forest);
    if !report.is_empty() {
        return Err(ForestError::Invalid(format!(
            "{} count violations, first: {}",
            report.violations.len(),
            report.violations[0]
        )));
    }
    let _ = any_derived;
    Ok(forest)
}

pub fn save_forest(forest: &Forest, path: impl AsRef<Path>) -> Result<(), ForestError> {
    std::fs::write(path, forest_to_json(forest))?;
    Ok(())
}

pub fn load_forest(path: impl AsRef<Path>) -> Result<Forest, ForestError> {
    forest_from_json(&std::fs::read_to_string(path)?)
}

fn retag_tree_error(e: ForestError, t: usize) -> ForestError {
    match e {
        ForestError::Structure { detail, .. } => ForestError::Structure { tree: t, detail },
        ForestError::Counts { detail, .. } => ForestError::Counts { tree: t, detail },
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Array-format import (parallel children/feature/threshold/value arrays)
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct ArrayTreeDoc {
    children_left: Vec<i64>,
    children_right: Vec<i64>,
    feature: Vec<i64>,
    threshold: Vec<f64>,
    /// Per-node per-class counts. Fractional entries are rejected.
    value: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct ArrayForestDoc {
    #[serde(default)]
    bagging: bool,
    trees: Vec<ArrayTreeDoc>,
    schema: AttributeSchema,
}

/// Imports the array-based serialization used by mainstream tree libraries:
/// per tree, parallel arrays `children_left`, `children_right`, `feature`,
/// `threshold` and per-node per-class `value` counts, with leaves marked by
/// child id -1. The root is node 0. Import fails on inconsistent counts
/// rather than repairing them.
pub fn import_array_format(text: &str) -> Result<Forest, ForestError> {
    let doc: ArrayForestDoc =
        serde_json::from_str(text).map_err(|e| ForestError::Parse(e.to_string()))?;
    let n_classes = doc.schema.n_classes;
    let mut trees = Vec::new();
    let mut n_examples: Option<u64> = None;
    for (t, arrays) in doc.trees.iter().enumerate() {
        let n = arrays.children_left.len();
        if [arrays.children_right.len(), arrays.feature.len(), arrays.threshold.len(), arrays.value.len()]
            .iter()
            .any(|&len| len != n)
        {
            return Err(ForestError::Parse(format!("tree {t}: array lengths disagree")));
        }
        if n == 0 {
            return Err(ForestError::Parse(format!("tree {t}: empty arrays")));
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let (l, r) = (arrays.children_left[i], arrays.children_right[i]);
            let kind = match (l, r) {
                (-1, -1) => NodeKind::Leaf,
                (l, r) if l >= 0 && r >= 0 => {
                    if arrays.feature[i] < 0 {
                        return Err(ForestError::Structure {
                            tree: t,
                            detail: format!("internal node {i} has feature -1"),
                        });
                    }
                    NodeKind::Internal {
                        feature: arrays.feature[i] as usize,
                        threshold: arrays.threshold[i],
                        left: l as usize,
                        right: r as usize,
                    }
                }
                _ => {
                    return Err(ForestError::Structure {
                        tree: t,
                        detail: format!("node {i} has exactly one child"),
                    })
                }
            };
            let mut counts = Vec::with_capacity(n_classes);
            for &raw in &arrays.value[i] {
                if raw < 0.0 || raw.fract() != 0.0 {
                    return Err(ForestError::Counts {
                        tree: t,
                        detail: format!("node {i} has fractional or negative count {raw}"),
                    });
                }
                counts.push(raw as u64);
            }
            nodes.push(Node { id: i, kind, counts });
        }
        let tree = Tree::build(nodes, 0, n_classes, false).map_err(|e| retag_tree_error(e, t))?;
        let total: u64 = tree.leaves().map(Node::total).sum();
        match n_examples {
            None => n_examples = Some(total),
            Some(expected) if expected != total => {
                return Err(ForestError::Counts {
                    tree: t,
                    detail: format!("leaf total {total} disagrees with earlier trees ({expected})"),
                });
            }
            _ => {}
        }
        trees.push(tree);
    }
    let forest = Forest::new(
        trees,
        doc.schema,
        n_examples.unwrap_or(0) as usize,
        doc.bagging,
    )?;
    let report = validate_forest(&forest);
    if !report.is_empty() {
        return Err(ForestError::Invalid(format!(
            "{} count violations, first: {}",
            report.violations.len(),
            report.violations[0]
        )));
    }
    Ok(forest)
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// Test/demo helpers that build the small two-tree example forest and its
/// four-row dataset used across the crate.
pub mod fixtures {
    use super::*;
    use crate::data_model::{Attribute, Dataset};

    pub fn toy_schema() -> AttributeSchema {
        AttributeSchema::new(
            (1..=4)
                .map(|i| Attribute { name: format!("f{i}"), kind: AttributeKind::Binary })
                .collect(),
            vec![],
            2,
        )
        .unwrap()
    }

    pub fn toy_dataset() -> Dataset {
        let rows = [[0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0], [1, 0, 1, 1]]
            .iter()
            .map(|r| r.iter().map(|&v| Value::Int(v)).collect())
            .collect();
        Dataset::new(toy_schema(), rows, vec![0, 0, 1, 1], "c").unwrap()
    }

    fn internal(id: usize, feature: usize, left: usize, right: usize, counts: [u64; 2]) -> Node {
        Node {
            id,
            kind: NodeKind::Internal { feature, threshold: 0.5, left, right },
            counts: counts.to_vec(),
        }
    }

    fn leaf(id: usize, counts: [u64; 2]) -> Node {
        Node { id, kind: NodeKind::Leaf, counts: counts.to_vec() }
    }

    /// First tree of the toy forest. Trained without f1: splits f3 then f2;
    /// the leftmost leaf captures both class-0 examples.
    pub fn toy_tree_a() -> Tree {
        let nodes = vec![
            internal(0, 2, 1, 4, [2, 2]), // f3
            internal(1, 1, 2, 3, [2, 1]), // f2
            leaf(2, [2, 0]),
            leaf(3, [0, 1]),
            leaf(4, [0, 1]),
        ];
        Tree::new(nodes, 0, 2).unwrap()
    }

    /// Second tree of the toy forest. Trained without f3; its root split on
    /// f2 leaves exactly one class-1 example on each side, and the deeper
    /// splits pin every remaining attribute of every example.
    pub fn toy_tree_b() -> Tree {
        let nodes = vec![
            internal(0, 1, 1, 8, [2, 2]),  // f2
            internal(1, 0, 2, 5, [2, 1]),  // f1 over {x1, x2, x4}
            internal(2, 3, 3, 4, [1, 0]),  // f4 over {x1}
            leaf(3, [0, 0]),
            leaf(4, [1, 0]),               // x1: f2=0, f1=0, f4=1
            internal(5, 3, 6, 7, [1, 1]),  // f4 over {x2, x4}
            leaf(6, [1, 0]),               // x2: f2=0, f1=1, f4=0
            leaf(7, [0, 1]),               // x4: f2=0, f1=1, f4=1
            internal(8, 0, 9, 12, [0, 1]), // f1 over {x3}
            internal(9, 3, 10, 11, [0, 1]), // f4 over {x3}
            leaf(10, [0, 1]),              // x3: f2=1, f1=0, f4=0
            leaf(11, [0, 0]),
            leaf(12, [0, 0]),
        ];
        Tree::new(nodes, 0, 2).unwrap()
    }

    pub fn toy_forest() -> Forest {
        Forest::new(vec![toy_tree_a(), toy_tree_b()], toy_schema(), 4, false).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn split_sets_at_root_are_empty() {
        let tree = toy_tree_a();
        let sets = derive_split_sets(&tree, tree.root).unwrap();
        assert!(sets.positive.is_empty());
        assert!(sets.negative.is_empty());
    }

    #[test]
    fn split_sets_of_leftmost_leaf() {
        let tree = toy_tree_a();
        let sets = derive_split_sets(&tree, 2).unwrap();
        assert_eq!(sets.negative, vec![(2, 0.5), (1, 0.5)]);
        assert!(sets.positive.is_empty());
    }

    #[test]
    fn split_sets_cover_the_whole_path_of_a_perfect_tree() {
        // Depth-3 perfect binary tree: every leaf accumulates exactly 3 splits.
        let mut nodes = Vec::new();
        for id in 0..7 {
            nodes.push(Node {
                id,
                kind: NodeKind::Internal {
                    feature: id % 3,
                    threshold: 0.5,
                    left: 2 * id + 1,
                    right: 2 * id + 2,
                },
                counts: vec![8, 0],
            });
        }
        // Fix internal counts so each level halves.
        for (id, n) in nodes.iter_mut().enumerate() {
            let depth = (id + 1).ilog2();
            n.counts = vec![8 >> depth, 0];
        }
        for id in 7..15 {
            nodes.push(Node { id, kind: NodeKind::Leaf, counts: vec![1, 0] });
        }
        let tree = Tree::new(nodes, 0, 2).unwrap();
        for leaf in 7..15 {
            let sets = derive_split_sets(&tree, leaf).unwrap();
            assert_eq!(sets.positive.len() + sets.negative.len(), 3);
        }
        assert!(derive_split_sets(&tree, 99).is_err());
    }

    #[test]
    fn any_two_leaves_flip_at_least_one_condition() {
        for tree in [toy_tree_a(), toy_tree_b()] {
            let leaves = tree.leaf_ids();
            for &a in &leaves {
                for &b in &leaves {
                    if a == b {
                        continue;
                    }
                    let sa = derive_split_sets(&tree, a).unwrap();
                    let sb = derive_split_sets(&tree, b).unwrap();
                    let flipped = sa
                        .positive
                        .iter()
                        .any(|p| sb.negative.contains(p))
                        || sa.negative.iter().any(|p| sb.positive.contains(p));
                    assert!(flipped, "leaves {a} and {b} do not conflict");
                }
            }
        }
    }

    #[test]
    fn toy_forest_validates_cleanly() {
        let report = validate_forest(&toy_forest());
        assert!(report.is_empty(), "unexpected violations: {:?}", report.violations);
    }

    #[test]
    fn incremented_leaf_count_yields_parent_and_total_violations() {
        let mut forest = toy_forest();
        forest.trees[0].nodes[2].counts[0] += 1;
        let report = validate_forest(&forest);
        assert_eq!(report.violations.len(), 2);
        assert!(report.violations.iter().any(|v| v.node == Some(1)));
        assert!(report.violations.iter().any(|v| v.node.is_none()));
    }

    #[test]
    fn classify_routes_and_votes() {
        let forest = toy_forest();
        let ds = toy_dataset();
        // Row 1 descends t1's leftmost path and lands in the class-0 leaf.
        assert_eq!(forest.trees[0].route(&ds.rows[0]), 2);
        assert_eq!(forest.classify(&ds.rows[0]), 0);
        // A forest of identical trees votes like a single tree.
        let single = Forest::new(vec![toy_tree_a()], toy_schema(), 4, false).unwrap();
        let triple = Forest::new(
            vec![toy_tree_a(), toy_tree_a(), toy_tree_a()],
            toy_schema(),
            4,
            false,
        )
        .unwrap();
        for row in &ds.rows {
            assert_eq!(single.classify(row), triple.classify(row));
        }
        assert_eq!(forest.accuracy(&ds), 1.0);
    }

    #[test]
    fn majority_vote_breaks_ties_low_and_counts_votes() {
        let votes = [0usize, 1, 1];
        let mut tally = vec![0usize; 2];
        for v in votes {
            tally[v] += 1;
        }
        assert_eq!(tally, vec![1, 2]);
        // Through the public API: three trees voting (0, 1, 1) yield class 1.
        // toy_tree_a routes row 2 to its class-1 leaf; build a forest where
        // two trees see class 1 and one sees class 0.
        let ds = toy_dataset();
        let forest =
            Forest::new(vec![toy_tree_a(), toy_tree_b(), toy_tree_b()], toy_schema(), 4, false)
                .unwrap();
        assert_eq!(forest.classify(&ds.rows[3]), 1);
    }

    #[test]
    fn every_row_reaches_exactly_one_leaf() {
        let forest = toy_forest();
        let ds = toy_dataset();
        for tree in &forest.trees {
            for row in &ds.rows {
                let leaf = tree.route(row);
                assert!(tree.nodes[leaf].is_leaf());
            }
        }
    }

    #[test]
    fn native_json_round_trip_is_identity() {
        let forest = toy_forest();
        let json = forest_to_json(&forest);
        let back = forest_from_json(&json).unwrap();
        assert_eq!(back, forest);
    }

    #[test]
    fn array_import_of_first_toy_tree_validates() {
        let doc = serde_json::json!({
            "bagging": false,
            "schema": {
                "attributes": [
                    {"name": "f1", "kind": "binary"},
                    {"name": "f2", "kind": "binary"},
                    {"name": "f3", "kind": "binary"},
                    {"name": "f4", "kind": "binary"},
                ],
                "groups": [],
                "n_classes": 2,
            },
            "trees": [{
                "children_left":  [1, 2, -1, -1, -1],
                "children_right": [4, 3, -1, -1, -1],
                "feature":        [2, 1, -2, -2, -2],
                "threshold":      [0.5, 0.5, -2.0, -2.0, -2.0],
                "value": [[2.0, 2.0], [2.0, 1.0], [2.0, 0.0], [0.0, 1.0], [0.0, 1.0]],
            }],
        });
        let forest = import_array_format(&doc.to_string()).unwrap();
        assert_eq!(forest.n_examples, 4);
        assert!(validate_forest(&forest).is_empty());
        assert_eq!(forest.trees[0], fixtures::toy_tree_a());
    }

    #[test]
    fn array_import_rejects_self_loops_and_fractions() {
        let self_loop = serde_json::json!({
            "schema": {"attributes": [{"name": "f1", "kind": "binary"}], "groups": [], "n_classes": 1},
            "trees": [{
                "children_left":  [0, -1],
                "children_right": [1, -1],
                "feature":        [0, -2],
                "threshold":      [0.5, 0.0],
                "value": [[2.0], [1.0]],
            }],
        });
        assert!(matches!(
            import_array_format(&self_loop.to_string()),
            Err(ForestError::Structure { .. })
        ));

        let fractional = serde_json::json!({
            "schema": {"attributes": [{"name": "f1", "kind": "binary"}], "groups": [], "n_classes": 1},
            "trees": [{
                "children_left":  [-1],
                "children_right": [-1],
                "feature":        [-2],
                "threshold":      [0.0],
                "value": [[1.5]],
            }],
        });
        assert!(matches!(
            import_array_format(&fractional.to_string()),
            Err(ForestError::Counts { .. })
        ));
    }

    #[test]
    fn interval_tables_collect_sorted_distinct_thresholds() {
        use crate::data_model::Attribute;
        let schema = AttributeSchema::new(
            vec![Attribute {
                name: "x".into(),
                kind: AttributeKind::Numerical { lower_bound: None, upper_bound: None },
            }],
            vec![],
            2,
        )
        .unwrap();
        let tree = |threshold: f64| {
            Tree::new(
                vec![
                    Node {
                        id: 0,
                        kind: NodeKind::Internal { feature: 0, threshold, left: 1, right: 2 },
                        counts: vec![1, 1],
                    },
                    Node { id: 1, kind: NodeKind::Leaf, counts: vec![1, 0] },
                    Node { id: 2, kind: NodeKind::Leaf, counts: vec![0, 1] },
                ],
                0,
                2,
            )
            .unwrap()
        };
        let deep = Tree::new(
            vec![
                Node {
                    id: 0,
                    kind: NodeKind::Internal { feature: 0, threshold: 3.5, left: 1, right: 2 },
                    counts: vec![1, 1],
                },
                Node { id: 1, kind: NodeKind::Leaf, counts: vec![1, 0] },
                Node {
                    id: 2,
                    kind: NodeKind::Internal { feature: 0, threshold: 7.0, left: 3, right: 4 },
                    counts: vec![0, 1],
                },
                Node { id: 3, kind: NodeKind::Leaf, counts: vec![0, 1] },
                Node { id: 4, kind: NodeKind::Leaf, counts: vec![0, 0] },
            ],
            0,
            2,
        )
        .unwrap();
        let forest = Forest::new(vec![tree(3.5), deep], schema.clone(), 2, false).unwrap();
        let tables = build_interval_tables(&forest);
        let table = tables.get(0).unwrap();
        assert_eq!(table.split_values, vec![3.5, 7.0]);
        assert_eq!(table.interval_count(), 3);
        assert_eq!(table.interval_index(2.0), 0);
        assert_eq!(table.interval_index(3.5), 0);
        assert_eq!(table.interval_index(5.0), 1);
        assert_eq!(table.interval_index(8.0), 2);

        let single = Forest::new(vec![tree(3.5)], schema.clone(), 2, false).unwrap();
        assert_eq!(build_interval_tables(&single).get(0).unwrap().interval_count(), 2);

        let binary_only = fixtures::toy_forest();
        assert!(build_interval_tables(&binary_only).is_empty());
    }
}
