//! Flow formulation of the no-bagging reconstruction: each example carries
//! one unit of flow from every tree root down to a leaf. Per-depth
//! left-turn indicators force the flow integral, split nodes link the flow
//! direction to the attribute values, and node cardinalities are enforced
//! at internal nodes as well as leaves. Within-class symmetry breaking
//! orders rows by binary place value and is on by default here.

use std::collections::BTreeMap;

use crate::data_model::AttributeKind;
use crate::forest::{build_interval_tables, NodeKind};
use crate::solver::{Constraint, Model, VarId};

use super::{
    add_x_vars, block_labels, checked_forest, cp::add_symmetry_breaking, fixed_class_blocks,
    Encoding, ReconError, ReconModel, ReconProblem,
};

pub fn build_flow_model(problem: &ReconProblem) -> Result<ReconModel, ReconError> {
    let forest = &problem.forest;
    if forest.bagging {
        return Err(ReconError::BadProblem("flow model handles the no-bagging case only".into()));
    }
    let binary_only = forest.schema.attributes.iter().all(|a| {
        matches!(a.kind, AttributeKind::Binary | AttributeKind::OneHotMember { .. })
    });
    if !binary_only {
        return Err(ReconError::BadProblem(
            "flow model is stated for binary attributes only".into(),
        ));
    }
    checked_forest(forest)?;
    let n = forest.n_examples;
    let blocks = fixed_class_blocks(forest)?;
    let labels = block_labels(&blocks);

    let tables = build_interval_tables(forest);
    let mut model = Model::new();
    let x = add_x_vars(&mut model, &forest.schema, &tables, n)?;

    let mut y_route: BTreeMap<(usize, usize, usize), VarId> = BTreeMap::new();
    let mut lambda: BTreeMap<(usize, usize, usize), VarId> = BTreeMap::new();

    for (t, tree) in forest.trees.iter().enumerate() {
        for k in 0..n {
            for node in &tree.nodes {
                y_route.insert((t, node.id, k), model.add_bool());
            }
            // Unit flow enters at the root and splits at internal nodes.
            model.add_constraint(Constraint::LinearEq {
                terms: vec![(1, y_route[&(t, tree.root, k)])],
                rhs: 1,
            })?;
            for node in &tree.nodes {
                if let NodeKind::Internal { left, right, .. } = node.kind {
                    model.add_constraint(Constraint::LinearEq {
                        terms: vec![
                            (1, y_route[&(t, node.id, k)]),
                            (-1, y_route[&(t, left, k)]),
                            (-1, y_route[&(t, right, k)]),
                        ],
                        rhs: 0,
                    })?;
                }
            }
            // One direction per depth level, which forces integrality.
            for (d, nodes_at_depth) in tree.depth_index.iter().enumerate() {
                if nodes_at_depth.is_empty() {
                    continue;
                }
                let turn = model.add_bool();
                lambda.insert((t, d, k), turn);
                let mut left_terms: Vec<(i64, VarId)> = Vec::new();
                let mut right_terms: Vec<(i64, VarId)> = Vec::new();
                for &v in nodes_at_depth {
                    if let NodeKind::Internal { left, right, .. } = tree.nodes[v].kind {
                        left_terms.push((1, y_route[&(t, left, k)]));
                        right_terms.push((1, y_route[&(t, right, k)]));
                    }
                }
                left_terms.push((-1, turn));
                model.add_constraint(Constraint::LinearLe { terms: left_terms, rhs: 0 })?;
                right_terms.push((1, turn));
                model.add_constraint(Constraint::LinearLe { terms: right_terms, rhs: 1 })?;
            }
            // Split linking: descending left caps the attribute at 0,
            // descending right forces it to 1.
            for node in &tree.nodes {
                if let NodeKind::Internal { feature, left, right, .. } = node.kind {
                    model.add_constraint(Constraint::LinearLe {
                        terms: vec![(1, x[k][feature]), (1, y_route[&(t, left, k)])],
                        rhs: 1,
                    })?;
                    model.add_constraint(Constraint::LinearLe {
                        terms: vec![(1, y_route[&(t, right, k)]), (-1, x[k][feature])],
                        rhs: 0,
                    })?;
                }
            }
        }
        // Cardinalities at every node, internal ones included; class
        // membership is a fixed constant here.
        for node in &tree.nodes {
            for (c, &count) in node.counts.iter().enumerate() {
                let terms: Vec<(i64, VarId)> = (0..n)
                    .filter(|&k| labels[k] == c)
                    .map(|k| (1, y_route[&(t, node.id, k)]))
                    .collect();
                if terms.is_empty() {
                    if count > 0 {
                        return Err(ReconError::InvalidForest(format!(
                            "tree {t} node {} counts class {c} absent from the root histogram",
                            node.id
                        )));
                    }
                    continue;
                }
                model.add_constraint(Constraint::LinearEq { terms, rhs: count as i64 })?;
            }
        }
    }

    if problem.symmetry_breaking.unwrap_or(true) {
        add_symmetry_breaking(&mut model, &x, &blocks, &forest.schema)?;
    }

    Ok(ReconModel {
        model,
        encoding: Encoding::FlowNoBagging,
        schema: forest.schema.clone(),
        tables,
        n_examples: n,
        b_max: 1,
        x,
        z: Vec::new(),
        fixed_labels: Some(labels),
        y_counts: BTreeMap::new(),
        y_route,
        w: BTreeMap::new(),
        eta: Vec::new(),
        q: Vec::new(),
        lambda,
        scaled_log: Vec::new(),
        log_shift: 0,
    })
}
