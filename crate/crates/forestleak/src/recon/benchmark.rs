//! The fixed-assignment benchmark: solve the bagged model with attributes
//! and classes clamped to the ground truth to obtain the best possible
//! guess of the per-leaf occurrence counts, then build the worst
//! reconstruction consistent with those counts. Attributes pinned by the
//! split conditions of used leaves keep their true values; everything else
//! is set to a deliberately wrong but schema-consistent value, so the
//! resulting error is exactly the mean fraction of free attribute units.

use std::collections::{BTreeMap, BTreeSet};

use crate::data_model::{AttributeKind, Dataset, Unit, Value};
use crate::solver::{Constraint, SolveStatus};

use super::{
    build_cp_model, path_clamps, value_index, x_domain, ReconError, ReconProblem,
};

#[derive(Debug)]
pub struct BenchmarkResult {
    /// Binary-level attribute indices pinned for each example by the split
    /// sets of its used leaves.
    pub fixed_attributes: Vec<BTreeSet<usize>>,
    /// Attribute units (groups collapsed) whose value the pins determine.
    pub fixed_units: Vec<Vec<usize>>,
    pub free_units: Vec<Vec<usize>>,
    /// Leaves each example was assigned to: (tree, leaf) pairs.
    pub used_leaves: Vec<Vec<(usize, usize)>>,
    /// The worst consistent reconstruction: truth on fixed units, wrong
    /// everywhere else.
    pub worst_rows: Dataset,
    /// Mean fraction of free units per example.
    pub worst_case_error: f64,
    pub b_max_used: usize,
}

pub fn benchmark_fixed_assignment(
    problem: &ReconProblem,
    ground_truth: &Dataset,
) -> Result<BenchmarkResult, ReconError> {
    let forest = &problem.forest;
    if !forest.bagging {
        return Err(ReconError::BadProblem("benchmark is defined for bagged forests".into()));
    }
    if ground_truth.n_rows() != forest.n_examples {
        return Err(ReconError::Benchmark(format!(
            "ground truth has {} rows, forest counts {}",
            ground_truth.n_rows(),
            forest.n_examples
        )));
    }
    if ground_truth.schema != forest.schema {
        return Err(ReconError::Benchmark("ground truth schema mismatch".into()));
    }

    // Clamp the bagged model to the truth and solve for the most likely
    // occurrence counts; an infeasible clamp retries with a larger b_max
    // (the true bootstrap may exceed the default occurrence ceiling).
    let mut working = problem.clone();
    let (model, assignment) = loop {
        match build_cp_model(&working) {
            Err(ReconError::BMaxTooSmall { .. }) if working.b_max < working.b_max_cap => {
                working.b_max += 1;
                continue;
            }
            Err(other) => return Err(other),
            Ok(mut model) => {
                for (k, row) in ground_truth.rows.iter().enumerate() {
                    for (i, value) in row.iter().enumerate() {
                        let idx = value_index(&model.schema, &model.tables, i, value)?;
                        model.model.add_constraint(Constraint::LinearEq {
                            terms: vec![(1, model.x[k][i])],
                            rhs: idx,
                        })?;
                    }
                    model.model.add_constraint(Constraint::LinearEq {
                        terms: vec![(1, model.z[k][ground_truth.labels[k]])],
                        rhs: 1,
                    })?;
                }
                let result = model.solve(&problem.limits());
                match result.status {
                    SolveStatus::Infeasible if working.b_max < working.b_max_cap => {
                        working.b_max += 1;
                        continue;
                    }
                    SolveStatus::Infeasible => {
                        return Err(ReconError::Benchmark(
                            "clamped model infeasible: forest and ground truth disagree".into(),
                        ))
                    }
                    SolveStatus::Unknown => {
                        return Err(ReconError::Benchmark(
                            "no clamped solution within the time budget".into(),
                        ))
                    }
                    _ => break (model, result.assignment.unwrap()),
                }
            }
        }
    };

    // Used leaves and the per-attribute ranges their paths pin.
    let n = forest.n_examples;
    let mut used_leaves: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (&(t, v, k, _), &y) in &model.y_counts {
        if assignment[y.index()] > 0 && used_leaves[k].last() != Some(&(t, v)) {
            used_leaves[k].push((t, v));
        }
    }
    let mut fixed_attributes: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut ranges: Vec<BTreeMap<usize, (i64, i64)>> = vec![BTreeMap::new(); n];
    for (k, leaves) in used_leaves.iter().enumerate() {
        for &(t, v) in leaves {
            let clamps = path_clamps(&forest.schema, &model.tables, &forest.trees[t], v)
                .expect("a used leaf is reachable");
            for (attr, lo, hi) in clamps {
                fixed_attributes[k].insert(attr);
                let dom = x_domain(&forest.schema, &model.tables, attr);
                let entry = ranges[k].entry(attr).or_insert(dom);
                entry.0 = entry.0.max(lo);
                entry.1 = entry.1.min(hi);
            }
        }
    }

    let units = forest.schema.units();
    let mut fixed_units: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut free_units: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut worst_rows: Vec<Vec<Value>> = Vec::with_capacity(n);
    for k in 0..n {
        let truth = &ground_truth.rows[k];
        let mut row = truth.clone();
        for (ui, unit) in units.iter().enumerate() {
            let determined = unit_is_determined(&forest.schema, unit, &ranges[k]);
            if determined {
                fixed_units[k].push(ui);
                continue;
            }
            free_units[k].push(ui);
            spoil_unit(&forest.schema, &model.tables, unit, &ranges[k], truth, &mut row);
        }
        worst_rows.push(row);
    }
    let worst_case_error = free_units
        .iter()
        .map(|f| f.len() as f64 / units.len() as f64)
        .sum::<f64>()
        / n as f64;
    let worst_rows = Dataset::new(
        forest.schema.clone(),
        worst_rows,
        ground_truth.labels.clone(),
        ground_truth.class_column.clone(),
    )
    .map_err(|e| ReconError::Benchmark(e.to_string()))?;

    Ok(BenchmarkResult {
        fixed_attributes,
        fixed_units,
        free_units,
        used_leaves,
        worst_rows,
        worst_case_error,
        b_max_used: working.b_max,
    })
}

/// Whether the pinned ranges determine the unit's value uniquely.
fn unit_is_determined(
    schema: &crate::data_model::AttributeSchema,
    unit: &Unit,
    ranges: &BTreeMap<usize, (i64, i64)>,
) -> bool {
    match unit {
        Unit::Single(i) => ranges.get(i).is_some_and(|&(lo, hi)| lo == hi),
        Unit::Group { members, .. } => {
            let pinned_one =
                members.iter().any(|i| ranges.get(i).is_some_and(|&(lo, hi)| (lo, hi) == (1, 1)));
            if pinned_one {
                return true;
            }
            let pinned_zero = members
                .iter()
                .filter(|i| ranges.get(i).is_some_and(|&(lo, hi)| (lo, hi) == (0, 0)))
                .count();
            let _ = schema;
            pinned_zero + 1 == members.len()
        }
    }
}

/// Overwrites the unit in `row` with a wrong value that still satisfies
/// every pinned range. The clamps come from paths the true row satisfies,
/// so the truth is always inside the ranges and a wrong in-range choice
/// exists whenever the unit is undetermined.
fn spoil_unit(
    schema: &crate::data_model::AttributeSchema,
    tables: &crate::forest::IntervalTables,
    unit: &Unit,
    ranges: &BTreeMap<usize, (i64, i64)>,
    truth: &[Value],
    row: &mut [Value],
) {
    match unit {
        Unit::Single(i) => {
            let dom = x_domain(schema, tables, *i);
            let (lo, hi) = ranges.get(i).copied().unwrap_or(dom);
            let truth_idx = value_index(schema, tables, *i, &truth[*i])
                .expect("ground truth fits its own schema");
            let wrong = (lo..=hi).find(|&idx| idx != truth_idx).expect("unit is free");
            row[*i] = super::decode_value(schema, tables, *i, wrong);
        }
        Unit::Group { members, .. } => {
            let truth_member =
                members.iter().copied().find(|&i| truth[i] == Value::Int(1)).expect("one-hot row");
            let wrong = members
                .iter()
                .copied()
                .find(|&i| {
                    i != truth_member && ranges.get(&i).map_or(true, |&(_, hi)| hi == 1)
                })
                .expect("unit is free");
            for &i in members {
                row[i] = Value::Int(i64::from(i == wrong));
            }
        }
    }
}
