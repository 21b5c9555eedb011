//! The two direct constraint encodings: the general occurrence-count model
//! for bagged forests and its simplification for forests trained on the
//! full training set.

use std::collections::BTreeMap;

use crate::forest::build_interval_tables;
use crate::solver::{Constraint, Lit, Model, VarId};

use super::{
    add_x_vars, block_labels, checked_forest, fixed_class_blocks, likelihood_table, path_clamps,
    Encoding, ReconError, ReconModel, ReconProblem,
};

/// Builds the occurrence-count model for a bagged forest.
///
/// Per tree, leaf and example the model carries the number of times the
/// example is counted by the leaf for each class; leaf cardinalities pin
/// those sums, leaf use forces the path conditions onto the example's
/// attributes, and per-tree occurrence totals are channeled into indicator
/// booleans weighted by scaled log-probabilities of the bootstrap
/// occurrence distribution.
pub fn build_cp_model(problem: &ReconProblem) -> Result<ReconModel, ReconError> {
    let forest = &problem.forest;
    if !forest.bagging {
        return Err(ReconError::BadProblem(
            "occurrence-count model expects a bagged forest".into(),
        ));
    }
    checked_forest(forest)?;
    let n = forest.n_examples;
    let n_classes = forest.schema.n_classes;
    let b_max = problem.b_max;
    if b_max < 1 {
        return Err(ReconError::BadProblem("b_max must be at least 1".into()));
    }
    // Structural pre-check: a leaf counting more examples of one class than
    // N examples used b_max times each can ever supply is infeasible before
    // any search.
    for tree in &forest.trees {
        for node in tree.leaves() {
            for &count in &node.counts {
                if count > (n * b_max) as u64 {
                    return Err(ReconError::BMaxTooSmall { count, b_max, n });
                }
            }
        }
    }

    let tables = build_interval_tables(forest);
    let likelihood = likelihood_table(n, b_max);
    let mut model = Model::new();
    let x = add_x_vars(&mut model, &forest.schema, &tables, n)?;

    let mut z: Vec<Vec<VarId>> = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<VarId> = (0..n_classes).map(|_| model.add_bool()).collect();
        model.add_constraint(Constraint::ExactlyOne { vars: row.clone() })?;
        z.push(row);
    }

    let mut y_counts: BTreeMap<(usize, usize, usize, usize), VarId> = BTreeMap::new();
    let mut w: BTreeMap<(usize, usize, usize), VarId> = BTreeMap::new();
    let mut eta: Vec<Vec<VarId>> = Vec::new();
    let mut q: Vec<Vec<Vec<VarId>>> = Vec::new();

    for (t, tree) in forest.trees.iter().enumerate() {
        for leaf in tree.leaves() {
            if leaf.total() == 0 {
                continue;
            }
            let v = leaf.id;
            let clamps = path_clamps(&forest.schema, &tables, tree, v);
            for k in 0..n {
                let w_var = model.add_bool();
                w.insert((t, v, k), w_var);
                let mut per_class: Vec<VarId> = Vec::new();
                for (c, &count) in leaf.counts.iter().enumerate() {
                    if count == 0 {
                        continue;
                    }
                    let y = model.add_int(0, (b_max as u64).min(count) as i64)?;
                    y_counts.insert((t, v, k, c), y);
                    per_class.push(y);
                }
                // Leaf use channeling: w off zeroes the counts, w on demands
                // at least one.
                model.add_constraint(Constraint::Implies {
                    guard: Lit::neg(w_var),
                    clamps: per_class.iter().map(|&y| (y, 0, 0)).collect(),
                })?;
                model.add_constraint(Constraint::ReifiedLinear {
                    guard: Lit::pos(w_var),
                    le: true,
                    terms: per_class.iter().map(|&y| (-1, y)).collect(),
                    rhs: -1,
                })?;
                // Leaf use enforces the path conditions on the attributes.
                match clamps.as_ref() {
                    Some(path) => {
                        if !path.is_empty() {
                            model.add_constraint(Constraint::Implies {
                                guard: Lit::pos(w_var),
                                clamps: path.iter().map(|&(a, lo, hi)| (x[k][a], lo, hi)).collect(),
                            })?;
                        }
                    }
                    // Unsatisfiable path: the leaf can never be used.
                    None => {
                        model.add_constraint(Constraint::LinearEq {
                            terms: vec![(1, w_var)],
                            rhs: 0,
                        })?;
                    }
                }
            }
            // Each leaf captures exactly its recorded number of examples of
            // each class.
            for (c, &count) in leaf.counts.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let terms: Vec<(i64, VarId)> =
                    (0..n).map(|k| (1, y_counts[&(t, v, k, c)])).collect();
                model.add_constraint(Constraint::LinearEq { terms, rhs: count as i64 })?;
            }
        }

        // Occurrence totals and their indicator channeling.
        let mut eta_t = Vec::with_capacity(n);
        let mut q_t = Vec::with_capacity(n);
        for k in 0..n {
            let eta_var = model.add_int(0, b_max as i64)?;
            let mut terms: Vec<(i64, VarId)> = vec![(1, eta_var)];
            for (&(tt, _, kk, _), &y) in y_counts.range((t, 0, 0, 0)..(t + 1, 0, 0, 0)) {
                debug_assert_eq!(tt, t);
                if kk == k {
                    terms.push((-1, y));
                }
            }
            model.add_constraint(Constraint::LinearEq { terms, rhs: 0 })?;
            let indicators: Vec<VarId> = (0..=b_max).map(|_| model.add_bool()).collect();
            model.add_constraint(Constraint::MapDomain {
                int_var: eta_var,
                indicators: indicators.clone(),
            })?;
            eta_t.push(eta_var);
            q_t.push(indicators);
        }
        eta.push(eta_t);
        q.push(q_t);
    }

    // An example not assigned to a class cannot be counted as that class.
    for (k, z_row) in z.iter().enumerate() {
        for (c, &z_var) in z_row.iter().enumerate() {
            let terms: Vec<(i64, VarId)> = y_counts
                .iter()
                .filter(|(&(_, _, kk, cc), _)| kk == k && cc == c)
                .map(|(_, &y)| (1, y))
                .collect();
            if terms.is_empty() {
                continue;
            }
            model.add_constraint(Constraint::ReifiedLinear {
                guard: Lit::neg(z_var),
                le: true,
                terms,
                rhs: 0,
            })?;
        }
    }

    // Maximum log-likelihood of the occurrence profile. Coefficients are
    // shifted so the best per-pair choice scores 0: exactly one indicator
    // per (tree, example) is on, so the shift is a constant offset, and it
    // lets undecided pairs bound to their true best during branch-and-bound.
    let max_coeff = *likelihood.scaled_log_coeffs.iter().max().unwrap();
    let shifted: Vec<i64> =
        likelihood.scaled_log_coeffs.iter().map(|c| c - max_coeff).collect();
    let mut objective: Vec<(i64, VarId)> = Vec::new();
    for q_t in &q {
        for q_tk in q_t {
            for (b, &q_var) in q_tk.iter().enumerate() {
                if shifted[b] != 0 {
                    objective.push((shifted[b], q_var));
                }
            }
        }
    }
    model.set_objective(objective)?;

    Ok(ReconModel {
        model,
        encoding: Encoding::CpBagging,
        schema: forest.schema.clone(),
        tables,
        n_examples: n,
        b_max,
        x,
        z,
        fixed_labels: None,
        y_counts,
        y_route: BTreeMap::new(),
        w,
        eta,
        q,
        lambda: BTreeMap::new(),
        scaled_log: shifted,
        log_shift: max_coeff,
    })
}

/// Builds the simplified model for a forest trained without bagging: every
/// example is used exactly once per tree, classes are fixed in advance in
/// index blocks, and no objective remains, so solving is a feasibility
/// search.
pub fn build_nobagging_model(problem: &ReconProblem) -> Result<ReconModel, ReconError> {
    let forest = &problem.forest;
    if forest.bagging {
        return Err(ReconError::BadProblem(
            "no-bagging model used on a bagged forest".into(),
        ));
    }
    checked_forest(forest)?;
    let n = forest.n_examples;
    let blocks = fixed_class_blocks(forest)?;
    let labels = block_labels(&blocks);
    debug_assert_eq!(labels.len(), n);

    let tables = build_interval_tables(forest);
    let mut model = Model::new();
    let x = add_x_vars(&mut model, &forest.schema, &tables, n)?;

    let mut y_route: BTreeMap<(usize, usize, usize), VarId> = BTreeMap::new();
    for (t, tree) in forest.trees.iter().enumerate() {
        // Candidate leaves per class and their path conditions.
        let mut per_leaf: Vec<(usize, Option<Vec<(usize, i64, i64)>>)> = Vec::new();
        for leaf in tree.leaves() {
            if leaf.total() > 0 {
                per_leaf
                    .push((leaf.id, path_clamps(&forest.schema, &tables, tree, leaf.id)));
            }
        }
        for (k, &class) in labels.iter().enumerate() {
            let mut selectors: Vec<VarId> = Vec::new();
            let mut selector_clamps: Vec<Vec<(VarId, i64, i64)>> = Vec::new();
            for (v, clamps) in &per_leaf {
                if forest.trees[t].nodes[*v].counts[class] == 0 {
                    continue;
                }
                let y = model.add_bool();
                model.set_branch_priority(y, 1);
                y_route.insert((t, *v, k), y);
                match clamps {
                    Some(path) => {
                        selectors.push(y);
                        selector_clamps.push(
                            path.iter().map(|&(a, lo, hi)| (x[k][a], lo, hi)).collect(),
                        );
                    }
                    None => {
                        // Unreachable leaf: never a valid choice.
                        model
                            .add_constraint(Constraint::LinearEq { terms: vec![(1, y)], rhs: 0 })?;
                    }
                }
            }
            if selectors.is_empty() {
                // No reachable leaf can host this example's class.
                model.add_constraint(Constraint::LinearLe { terms: vec![], rhs: -1 })?;
                continue;
            }
            // Each example reaches exactly one leaf per tree, and the open
            // alternatives confine the attributes to their union hull.
            model.add_constraint(Constraint::Choice {
                selectors,
                clamps: selector_clamps,
            })?;
        }
        // Leaf cardinalities per class over that class's block.
        for (v, _) in &per_leaf {
            for (c, &count) in forest.trees[t].nodes[*v].counts.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let terms: Vec<(i64, VarId)> = (0..n)
                    .filter(|&k| labels[k] == c)
                    .map(|k| (1, y_route[&(t, *v, k)]))
                    .collect();
                model.add_constraint(Constraint::LinearEq { terms, rhs: count as i64 })?;
            }
        }
    }

    if problem.symmetry_breaking == Some(true) {
        add_symmetry_breaking(&mut model, &x, &blocks, &forest.schema)?;
    }

    Ok(ReconModel {
        model,
        encoding: Encoding::CpNoBagging,
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
        lambda: BTreeMap::new(),
        scaled_log: Vec::new(),
        log_shift: 0,
    })
}

/// Orders rows within each class block non-decreasingly under binary
/// place-value weighting (the highest attribute index is the most
/// significant), removing within-class permutation symmetry.
pub(super) fn add_symmetry_breaking(
    model: &mut Model,
    x: &[Vec<VarId>],
    blocks: &[usize],
    schema: &crate::data_model::AttributeSchema,
) -> Result<(), ReconError> {
    if !schema.attributes.iter().all(|a| {
        matches!(
            a.kind,
            crate::data_model::AttributeKind::Binary
                | crate::data_model::AttributeKind::OneHotMember { .. }
        )
    }) {
        return Err(ReconError::BadProblem(
            "symmetry breaking is defined for binary attributes only".into(),
        ));
    }
    let mut start = 0usize;
    for &size in blocks {
        for k in start..start + size.saturating_sub(1) {
            let a: Vec<VarId> = x[k].iter().rev().copied().collect();
            let b: Vec<VarId> = x[k + 1].iter().rev().copied().collect();
            model.add_constraint(Constraint::LexLe { a, b })?;
        }
        start += size;
    }
    Ok(())
}
