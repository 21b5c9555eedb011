//! Reconstruction of a forest's training data as constraint solving.
//!
//! Three encodings are built over the solver: the general occurrence-count
//! model for bagged forests with a maximum-likelihood objective, its
//! simplification for forests trained without bagging (one use per example
//! per tree, classes fixed in advance), and an alternative flow formulation
//! of the no-bagging case routing one unit of flow per example through each
//! tree. Solutions decode back into datasets; partial reconstruction with
//! known attributes and the fixed-assignment benchmark build on the same
//! machinery.

mod benchmark;
mod cp;
mod flow;
mod likelihood;

pub use benchmark::{benchmark_fixed_assignment, BenchmarkResult};
pub use cp::{build_cp_model, build_nobagging_model};
pub use flow::build_flow_model;
pub use likelihood::{likelihood_table, LikelihoodTable, LOG_SCALE};

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::data_model::{AttributeKind, AttributeSchema, Dataset, Value};
use crate::eval::EvalError;
use crate::forest::{
    build_interval_tables, derive_split_sets, validate_forest, Forest, IntervalTable,
    IntervalTables,
};
use crate::solver::{
    Constraint, Model, ModelError, SolveLimits, SolveResult, SolveStatus, VarId,
};

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("forest fails validation: {0}")]
    InvalidForest(String),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("unsupported problem: {0}")]
    BadProblem(String),
    #[error("leaf count {count} cannot be met by {n} examples used at most {b_max} times each")]
    BMaxTooSmall { count: u64, b_max: usize, n: usize },
    #[error("still infeasible with b_max raised to the cap {cap}")]
    BMaxCapExceeded { cap: usize },
    #[error("rejected known attribute value: {0}")]
    BadKnownValue(String),
    #[error("benchmark failed: {0}")]
    Benchmark(String),
    #[error("evaluation error: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    CpBagging,
    CpNoBagging,
    FlowNoBagging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingChoice {
    /// Occurrence-count model when the forest was bagged, otherwise the
    /// no-bagging simplification.
    Auto,
    Cp,
    Flow,
}

/// A reconstruction task: the target forest plus solver-facing settings.
#[derive(Debug, Clone)]
pub struct ReconProblem {
    pub forest: Forest,
    /// Largest per-tree occurrence count modelled for a bagged forest.
    pub b_max: usize,
    /// Retry ceiling for `b_max` when the model comes back infeasible.
    pub b_max_cap: usize,
    pub encoding: EncodingChoice,
    /// (example index, attribute index) -> known value, fixed before solving.
    pub known: BTreeMap<(usize, usize), Value>,
    pub time_limit: Option<Duration>,
    pub workers: usize,
    pub seed: u64,
    /// Default when `None`: off for the occurrence-count encodings, on for
    /// the flow encoding.
    pub symmetry_breaking: Option<bool>,
}

impl ReconProblem {
    pub fn new(forest: Forest) -> Self {
        ReconProblem {
            forest,
            b_max: 7,
            b_max_cap: 12,
            encoding: EncodingChoice::Auto,
            known: BTreeMap::new(),
            time_limit: None,
            workers: 1,
            seed: 0,
            symmetry_breaking: None,
        }
    }

    pub fn limits(&self) -> SolveLimits {
        SolveLimits { time_limit: self.time_limit, workers: self.workers, seed: self.seed }
    }
}

/// A built reconstruction model: the solver model plus the variable maps
/// needed to decode solutions and to inspect occurrence structure.
#[derive(Debug)]
pub struct ReconModel {
    pub model: Model,
    pub encoding: Encoding,
    pub schema: AttributeSchema,
    pub tables: IntervalTables,
    pub n_examples: usize,
    pub b_max: usize,
    /// x[k][i]: attribute value variables (bool or index-domain integer).
    pub x: Vec<Vec<VarId>>,
    /// z[k][c]: class indicators; empty when classes are fixed in advance.
    pub z: Vec<Vec<VarId>>,
    /// Pre-assigned labels for the no-bagging encodings.
    pub fixed_labels: Option<Vec<usize>>,
    /// Occurrence counts y[(t, leaf, k, c)] for the bagged encoding.
    pub y_counts: BTreeMap<(usize, usize, usize, usize), VarId>,
    /// Routing indicators y[(t, node, k)] for the no-bagging encodings
    /// (leaves only in the direct encoding, every node in the flow one).
    pub y_route: BTreeMap<(usize, usize, usize), VarId>,
    /// Leaf-use indicators w[(t, leaf, k)] (bagged encoding).
    pub w: BTreeMap<(usize, usize, usize), VarId>,
    /// Per-tree occurrence totals eta[t][k] (bagged encoding).
    pub eta: Vec<Vec<VarId>>,
    /// Occurrence-count indicators q[t][k][b] (bagged encoding).
    pub q: Vec<Vec<Vec<VarId>>>,
    /// Left-turn indicators lambda[(t, depth, k)] (flow encoding).
    pub lambda: BTreeMap<(usize, usize, usize), VarId>,
    /// Objective coefficients per occurrence count: scaled log-probability
    /// shifted so the most likely count scores 0.
    pub scaled_log: Vec<i64>,
    /// Per-(tree, example) shift removed from the raw scaled logs; adding
    /// `trees * examples * log_shift` to the solver objective recovers the
    /// scaled log-likelihood.
    pub log_shift: i64,
}

impl ReconModel {
    pub fn solve(&self, limits: &SolveLimits) -> SolveResult {
        self.model.solve(limits)
    }
}

// ---------------------------------------------------------------------------
// Attribute variables and split conditions in index space
// ---------------------------------------------------------------------------

/// Index-domain bounds of an attribute variable: {0,1} for binary and
/// one-hot members, domain positions for ordinals, interval indices for
/// numericals.
pub(crate) fn x_domain(
    schema: &AttributeSchema,
    tables: &IntervalTables,
    attr: usize,
) -> (i64, i64) {
    match &schema.attributes[attr].kind {
        AttributeKind::Binary | AttributeKind::OneHotMember { .. } => (0, 1),
        AttributeKind::Ordinal { domain } => (0, domain.len() as i64 - 1),
        AttributeKind::Numerical { .. } => {
            let intervals = tables.get(attr).map_or(1, IntervalTable::interval_count);
            (0, intervals as i64 - 1)
        }
    }
}

/// Number of representable values of `attr` that satisfy `value <= threshold`.
/// The split condition `value <= threshold` is then `index <= rank - 1` and
/// `value > threshold` is `index >= rank`.
pub(crate) fn threshold_rank(
    schema: &AttributeSchema,
    tables: &IntervalTables,
    attr: usize,
    threshold: f64,
) -> i64 {
    match &schema.attributes[attr].kind {
        AttributeKind::Binary | AttributeKind::OneHotMember { .. } => {
            i64::from(threshold >= 0.0) + i64::from(threshold >= 1.0)
        }
        AttributeKind::Ordinal { domain } => {
            domain.iter().filter(|&&d| (d as f64) <= threshold).count() as i64
        }
        AttributeKind::Numerical { .. } => match tables.get(attr) {
            Some(table) => {
                table.split_values.iter().filter(|&&s| s <= threshold).count() as i64
            }
            None => 1,
        },
    }
}

/// The split conditions of a root-to-node path as per-attribute index
/// clamps `(attribute, lo, hi)`. `None` means the path is unsatisfiable (it
/// constrains some attribute to an empty range), so no example can reach
/// the node.
pub(crate) fn path_clamps(
    schema: &AttributeSchema,
    tables: &IntervalTables,
    tree: &crate::forest::Tree,
    node: usize,
) -> Option<Vec<(usize, i64, i64)>> {
    let sets = derive_split_sets(tree, node).expect("node id comes from the tree");
    let mut ranges: BTreeMap<usize, (i64, i64)> = BTreeMap::new();
    let mut clamp = |attr: usize, lo: Option<i64>, hi: Option<i64>| {
        let dom = x_domain(schema, tables, attr);
        let entry = ranges.entry(attr).or_insert(dom);
        if let Some(lo) = lo {
            entry.0 = entry.0.max(lo);
        }
        if let Some(hi) = hi {
            entry.1 = entry.1.min(hi);
        }
    };
    for &(attr, threshold) in &sets.positive {
        let rank = threshold_rank(schema, tables, attr, threshold);
        clamp(attr, Some(rank), None);
    }
    for &(attr, threshold) in &sets.negative {
        let rank = threshold_rank(schema, tables, attr, threshold);
        clamp(attr, None, Some(rank - 1));
    }
    let mut clamps = Vec::with_capacity(ranges.len());
    for (attr, (lo, hi)) in ranges {
        if lo > hi {
            return None;
        }
        let dom = x_domain(schema, tables, attr);
        if (lo, hi) != dom {
            clamps.push((attr, lo, hi));
        }
    }
    Some(clamps)
}

/// Adds the x variables for every example and the one-hot constraints.
pub(crate) fn add_x_vars(
    model: &mut Model,
    schema: &AttributeSchema,
    tables: &IntervalTables,
    n_examples: usize,
) -> Result<Vec<Vec<VarId>>, ModelError> {
    let m = schema.n_attributes();
    let mut x = Vec::with_capacity(n_examples);
    for _ in 0..n_examples {
        let mut row = Vec::with_capacity(m);
        for i in 0..m {
            let (lo, hi) = x_domain(schema, tables, i);
            let var = if (lo, hi) == (0, 1)
                && matches!(
                    schema.attributes[i].kind,
                    AttributeKind::Binary | AttributeKind::OneHotMember { .. }
                ) {
                model.add_bool()
            } else {
                model.add_int(lo, hi)?
            };
            row.push(var);
        }
        for group in &schema.groups {
            model.add_constraint(Constraint::ExactlyOne {
                vars: group.iter().map(|&i| row[i]).collect(),
            })?;
        }
        x.push(row);
    }
    Ok(x)
}

/// Class block sizes for the no-bagging encodings, read off any tree root;
/// errors when the roots disagree (which contradicts training without
/// bagging).
pub(crate) fn fixed_class_blocks(forest: &Forest) -> Result<Vec<usize>, ReconError> {
    let first = &forest.trees[0];
    let histogram: Vec<u64> = first.nodes[first.root].counts.clone();
    for (t, tree) in forest.trees.iter().enumerate().skip(1) {
        if tree.nodes[tree.root].counts != histogram {
            return Err(ReconError::BadProblem(format!(
                "root class histogram of tree {t} disagrees with tree 0; \
                 the forest cannot have been trained on a fixed training set"
            )));
        }
    }
    Ok(histogram.into_iter().map(|c| c as usize).collect())
}

pub(crate) fn block_labels(blocks: &[usize]) -> Vec<usize> {
    let mut labels = Vec::new();
    for (c, &size) in blocks.iter().enumerate() {
        labels.extend(std::iter::repeat(c).take(size));
    }
    labels
}

pub(crate) fn checked_forest(forest: &Forest) -> Result<(), ReconError> {
    let report = validate_forest(forest);
    if !report.is_empty() {
        return Err(ReconError::InvalidForest(format!(
            "{} violations, first: {}",
            report.violations.len(),
            report.violations[0]
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

pub(crate) fn decode_value(
    schema: &AttributeSchema,
    tables: &IntervalTables,
    attr: usize,
    index: i64,
) -> Value {
    match &schema.attributes[attr].kind {
        AttributeKind::Binary | AttributeKind::OneHotMember { .. } => Value::Int(index),
        AttributeKind::Ordinal { domain } => Value::Int(domain[index as usize]),
        AttributeKind::Numerical { lower_bound, upper_bound } => {
            let fallback = IntervalTable {
                split_values: Vec::new(),
                lower_bound: *lower_bound,
                upper_bound: *upper_bound,
            };
            let table = tables.get(attr).unwrap_or(&fallback);
            Value::Real(table.midpoint(index as usize))
        }
    }
}

fn lowest_legal_row(schema: &AttributeSchema, tables: &IntervalTables) -> Vec<Value> {
    let mut row: Vec<Value> =
        (0..schema.n_attributes()).map(|i| decode_value(schema, tables, i, 0)).collect();
    for group in &schema.groups {
        for (pos, &i) in group.iter().enumerate() {
            row[i] = Value::Int(i64::from(pos == 0));
        }
    }
    row
}

/// Examples a bagged solution never uses in any tree. Their attributes are
/// unconstrained; `decode_solution` fills them with the schema's lowest
/// legal values.
pub fn unused_examples(model: &ReconModel, assignment: &[i64]) -> Vec<usize> {
    if model.eta.is_empty() {
        return Vec::new();
    }
    (0..model.n_examples)
        .filter(|&k| model.eta.iter().all(|per_tree| assignment[per_tree[k].index()] == 0))
        .collect()
}

/// Reads a feasible assignment back into a dataset: binary, one-hot and
/// ordinal attributes directly, interval-coded numerical attributes to the
/// midpoint of their interval.
pub fn decode_solution(model: &ReconModel, assignment: &[i64]) -> Dataset {
    let n = model.n_examples;
    let labels: Vec<usize> = match &model.fixed_labels {
        Some(labels) => labels.clone(),
        None => (0..n)
            .map(|k| {
                model.z[k]
                    .iter()
                    .position(|v| assignment[v.index()] == 1)
                    .expect("class indicators sum to one")
            })
            .collect(),
    };
    let unused = unused_examples(model, assignment);
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        if unused.binary_search(&k).is_ok() {
            rows.push(lowest_legal_row(&model.schema, &model.tables));
            continue;
        }
        let row: Vec<Value> = (0..model.schema.n_attributes())
            .map(|i| decode_value(&model.schema, &model.tables, i, assignment[model.x[k][i].index()]))
            .collect();
        rows.push(row);
    }
    Dataset::new(model.schema.clone(), rows, labels, "c")
        .expect("feasible assignments decode to valid datasets")
}

// ---------------------------------------------------------------------------
// Known attributes (partial reconstruction)
// ---------------------------------------------------------------------------

/// Index-space encoding of a raw attribute value.
pub(crate) fn value_index(
    schema: &AttributeSchema,
    tables: &IntervalTables,
    attr: usize,
    value: &Value,
) -> Result<i64, ReconError> {
    let bad = |detail: String| ReconError::BadKnownValue(detail);
    match &schema.attributes[attr].kind {
        AttributeKind::Binary | AttributeKind::OneHotMember { .. } => match value.as_int() {
            Some(v @ (0 | 1)) => Ok(v),
            _ => Err(bad(format!("attribute {attr}: {value} is not 0/1"))),
        },
        AttributeKind::Ordinal { domain } => {
            let v = value
                .as_int()
                .ok_or_else(|| bad(format!("attribute {attr}: {value} is not an integer")))?;
            domain
                .iter()
                .position(|&d| d == v)
                .map(|p| p as i64)
                .ok_or_else(|| bad(format!("attribute {attr}: {v} outside ordinal domain")))
        }
        AttributeKind::Numerical { .. } => {
            let table = tables.get(attr);
            Ok(table.map_or(0, |t| t.interval_index(value.as_f64()) as i64))
        }
    }
}

/// Fixes known attribute values before solving. Fixing a one-hot member to
/// 1 fixes its group siblings to 0; contradictory fixings inside a group
/// are rejected here rather than surfacing as infeasibility.
pub fn fix_known_attributes(
    model: &mut ReconModel,
    known: &BTreeMap<(usize, usize), Value>,
) -> Result<(), ReconError> {
    let schema = model.schema.clone();
    let mut fixes: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for (&(k, i), value) in known {
        if k >= model.n_examples || i >= schema.n_attributes() {
            return Err(ReconError::BadKnownValue(format!(
                "({k}, {i}) outside the {}x{} table",
                model.n_examples,
                schema.n_attributes()
            )));
        }
        let idx = value_index(&schema, &model.tables, i, value)?;
        if let Some(prev) = fixes.insert((k, i), idx) {
            if prev != idx {
                return Err(ReconError::BadKnownValue(format!(
                    "({k}, {i}) fixed to both {prev} and {idx}"
                )));
            }
        }
        // Group propagation.
        if let AttributeKind::OneHotMember { group_id } = schema.attributes[i].kind {
            if idx == 1 {
                for &sibling in &schema.groups[group_id] {
                    if sibling == i {
                        continue;
                    }
                    if let Some(prev) = fixes.insert((k, sibling), 0) {
                        if prev != 0 {
                            return Err(ReconError::BadKnownValue(format!(
                                "one-hot contradiction in group {group_id} of example {k}"
                            )));
                        }
                    }
                }
            }
        }
    }
    // A group whose members are all fixed to 0 contradicts one-hotness.
    for (gid, group) in schema.groups.iter().enumerate() {
        for k in 0..model.n_examples {
            let values: Vec<Option<i64>> =
                group.iter().map(|&i| fixes.get(&(k, i)).copied()).collect();
            if values.iter().all(|v| *v == Some(0)) {
                return Err(ReconError::BadKnownValue(format!(
                    "group {gid} of example {k} has every member fixed to 0"
                )));
            }
            if values.iter().filter(|v| **v == Some(1)).count() > 1 {
                return Err(ReconError::BadKnownValue(format!(
                    "one-hot contradiction in group {gid} of example {k}"
                )));
            }
        }
    }
    for ((k, i), idx) in fixes {
        model
            .model
            .add_constraint(Constraint::LinearEq { terms: vec![(1, model.x[k][i])], rhs: idx })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// End-to-end attack
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct AttackOutcome {
    pub dataset: Option<Dataset>,
    pub result: SolveResult,
    pub encoding: Encoding,
    pub b_max_used: usize,
    pub unused_examples: Vec<usize>,
    /// Occurrence-count histogram over (tree, example) pairs.
    pub occurrence_histogram: BTreeMap<usize, usize>,
    /// Scaled log-likelihood of the occurrence profile (bagged encoding).
    pub scaled_log_likelihood: Option<i64>,
}

/// Selects an encoding from the problem flags, builds it, solves, and
/// decodes. An infeasible bagged model is retried with `b_max` raised by
/// one up to the cap; an unknown outcome is surfaced with no dataset.
pub fn attack(problem: &ReconProblem) -> Result<AttackOutcome, ReconError> {
    let limits = problem.limits();
    if problem.forest.bagging {
        let mut working = problem.clone();
        loop {
            let build = build_cp_model(&working);
            match build {
                Err(ReconError::BMaxTooSmall { .. }) if working.b_max < working.b_max_cap => {
                    working.b_max += 1;
                    continue;
                }
                Err(other) => return Err(other),
                Ok(mut model) => {
                    fix_known_attributes(&mut model, &working.known)?;
                    let result = model.solve(&limits);
                    if result.status == SolveStatus::Infeasible {
                        if working.b_max < working.b_max_cap {
                            working.b_max += 1;
                            continue;
                        }
                        return Err(ReconError::BMaxCapExceeded { cap: working.b_max_cap });
                    }
                    return Ok(finish_outcome(model, result, working.b_max));
                }
            }
        }
    }
    if matches!(problem.encoding, EncodingChoice::Flow) {
        let mut model = build_flow_model(problem)?;
        fix_known_attributes(&mut model, &problem.known)?;
        let result = model.solve(&limits);
        return Ok(finish_outcome(model, result, problem.b_max));
    }
    match problem.symmetry_breaking {
        Some(_) => {
            let mut model = build_nobagging_model(problem)?;
            fix_known_attributes(&mut model, &problem.known)?;
            let result = model.solve(&limits);
            Ok(finish_outcome(model, result, problem.b_max))
        }
        // Staged portfolio: the plain model finds solutions fastest, while
        // the row-ordered model is far better at proving infeasibility.
        // Both verdicts transfer: ordering rows inside a class block
        // neither creates nor removes feasibility.
        None => {
            let start = std::time::Instant::now();
            let stage1_budget = match problem.time_limit {
                Some(t) => (t / 2).min(Duration::from_secs(5)),
                None => Duration::from_secs(5),
            };
            let mut plain = problem.clone();
            plain.symmetry_breaking = Some(false);
            plain.time_limit = Some(stage1_budget);
            let mut model = build_nobagging_model(&plain)?;
            fix_known_attributes(&mut model, &plain.known)?;
            let first = model.solve(&plain.limits());
            if first.status != SolveStatus::Unknown {
                return Ok(finish_outcome(model, first, problem.b_max));
            }
            let mut ordered = problem.clone();
            ordered.symmetry_breaking = Some(true);
            ordered.time_limit = problem.time_limit.map(|t| t.saturating_sub(start.elapsed()));
            let mut model = build_nobagging_model(&ordered)?;
            fix_known_attributes(&mut model, &ordered.known)?;
            let mut result = model.solve(&ordered.limits());
            result.stats.decisions += first.stats.decisions;
            result.stats.propagations += first.stats.propagations;
            result.stats.conflicts += first.stats.conflicts;
            result.stats.restarts += first.stats.restarts;
            result.stats.wall = start.elapsed();
            Ok(finish_outcome(model, result, problem.b_max))
        }
    }
}

fn finish_outcome(model: ReconModel, result: SolveResult, b_max: usize) -> AttackOutcome {
    let (dataset, unused, histogram) = match &result.assignment {
        Some(assignment) if result.has_solution() => {
            let dataset = decode_solution(&model, assignment);
            let unused = unused_examples(&model, assignment);
            let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
            if model.eta.is_empty() {
                // Without bagging every example is used once per tree.
                let trees = model.y_route.keys().map(|&(t, _, _)| t).max().map_or(0, |t| t + 1);
                if trees > 0 {
                    histogram.insert(1, trees * model.n_examples);
                }
            } else {
                for per_tree in &model.eta {
                    for k in 0..model.n_examples {
                        let b = assignment[per_tree[k].index()] as usize;
                        *histogram.entry(b).or_insert(0) += 1;
                    }
                }
            }
            (Some(dataset), unused, histogram)
        }
        _ => (None, Vec::new(), BTreeMap::new()),
    };
    let scaled_log_likelihood = result.objective.map(|obj| {
        let pairs = (model.eta.len() * model.n_examples) as i64;
        obj + pairs * model.log_shift
    });
    AttackOutcome {
        dataset,
        result,
        encoding: model.encoding,
        b_max_used: b_max,
        unused_examples: unused,
        occurrence_histogram: histogram,
        scaled_log_likelihood,
    }
}
