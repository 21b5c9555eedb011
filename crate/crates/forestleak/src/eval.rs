//! Reconstruction-quality measurement: Manhattan distance matrix, exact
//! minimum-cost bipartite matching, per-attribute error and the random
//! guessing baseline.
//!
//! Distances are computed per binary column (so a one-hot group contributes
//! through each member), while the error metric counts each original
//! attribute once: a group mismatches iff the selected categories differ,
//! ordinal and interval-coded numerical attributes iff their indices differ.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::data_model::{AttributeKind, AttributeSchema, Dataset, Unit, Value};
use crate::forest::IntervalTables;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("datasets disagree: {0}")]
    Mismatch(String),
    #[error("cost matrix is not square")]
    NonSquare,
    #[error("numerical attribute {0} needs an interval table for comparison")]
    MissingIntervalTable(usize),
}

/// Result of aligning a reconstruction with the original dataset.
#[derive(Debug, Clone, Serialize)]
pub struct MatchingReport {
    /// Reconstructed row index -> original row index.
    pub permutation: Vec<usize>,
    /// Mismatched-unit fraction of each matched pair, indexed by
    /// reconstructed row.
    pub per_pair_error: Vec<f64>,
    /// Mean over examples of the per-attribute mismatch fraction.
    pub error: f64,
    pub baseline_error: Option<f64>,
}

fn discrete_index(kind: &AttributeKind, value: &Value) -> i64 {
    match kind {
        AttributeKind::Ordinal { domain } => {
            let v = value.as_int().expect("ordinal values are integers");
            domain.iter().position(|&d| d == v).expect("validated ordinal value") as i64
        }
        _ => value.as_int().expect("discrete values are integers"),
    }
}

fn attr_distance(
    schema: &AttributeSchema,
    tables: Option<&IntervalTables>,
    attr: usize,
    a: &Value,
    b: &Value,
) -> Result<i64, EvalError> {
    let kind = &schema.attributes[attr].kind;
    match kind {
        AttributeKind::Numerical { .. } => {
            let table =
                tables.and_then(|t| t.get(attr)).ok_or(EvalError::MissingIntervalTable(attr))?;
            let ia = table.interval_index(a.as_f64()) as i64;
            let ib = table.interval_index(b.as_f64()) as i64;
            Ok((ia - ib).abs())
        }
        _ => Ok((discrete_index(kind, a) - discrete_index(kind, b)).abs()),
    }
}

/// Manhattan distances over attributes (class labels excluded): entry
/// `(a, b)` compares original row `a` with reconstructed row `b`.
pub fn distance_matrix(
    orig: &Dataset,
    recon: &Dataset,
    tables: Option<&IntervalTables>,
) -> Result<Vec<Vec<i64>>, EvalError> {
    if orig.schema != recon.schema {
        return Err(EvalError::Mismatch("schemas differ".into()));
    }
    if orig.n_rows() != recon.n_rows() {
        return Err(EvalError::Mismatch(format!(
            "{} original rows vs {} reconstructed",
            orig.n_rows(),
            recon.n_rows()
        )));
    }
    let n = orig.n_rows();
    let m = orig.schema.n_attributes();
    let mut matrix = vec![vec![0i64; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut d = 0i64;
            for i in 0..m {
                d += attr_distance(&orig.schema, tables, i, &orig.rows[a][i], &recon.rows[b][i])?;
            }
            matrix[a][b] = d;
        }
    }
    Ok(matrix)
}

/// Exact minimum-cost perfect matching on a square non-negative matrix via
/// the dual-potential augmenting-path method. Among minimum-cost matchings,
/// the lexicographically smallest row-to-column permutation is returned.
pub fn optimal_matching(cost: &[Vec<i64>]) -> Result<(Vec<usize>, i64), EvalError> {
    let n = cost.len();
    if n == 0 || cost.iter().any(|row| row.len() != n) {
        return Err(EvalError::NonSquare);
    }
    let (u, v) = hungarian_potentials(cost);
    // Complementary slackness: every minimum-cost perfect matching uses only
    // edges tight under these optimal potentials.
    let adj: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| cost[i][j] == u[i] + v[j]).collect()).collect();
    let perm = lex_smallest_perfect_matching(&adj, n);
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((perm, total))
}

/// Shortest-augmenting-path assignment; returns optimal dual potentials with
/// `cost[i][j] >= u[i] + v[j]` everywhere and equality along some perfect
/// matching.
fn hungarian_potentials(cost: &[Vec<i64>]) -> (Vec<i64>, Vec<i64>) {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![n; n + 1]; // p[j]: row matched to column j (n = none)
    let mut way = vec![0usize; n + 1];
    for i in 0..n {
        p[n] = i;
        let mut j0 = n;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0][j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == n {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    (u[..n].to_vec(), v[..n].to_vec())
}

const NONE: usize = usize::MAX;

fn augment(
    row: usize,
    adj: &[Vec<usize>],
    frozen_below: usize,
    banned_col: usize,
    visited: &mut [bool],
    col_owner: &mut [usize],
) -> bool {
    for &j in &adj[row] {
        if j == banned_col || visited[j] {
            continue;
        }
        visited[j] = true;
        let owner = col_owner[j];
        if owner == NONE
            || (owner >= frozen_below
                && augment(owner, adj, frozen_below, banned_col, visited, col_owner))
        {
            col_owner[j] = row;
            return true;
        }
    }
    false
}

/// Lexicographically smallest perfect row-to-column matching of a bipartite
/// graph known to contain one: rows are fixed in ascending order, each to
/// its smallest feasible column.
fn lex_smallest_perfect_matching(adj: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut col_owner = vec![NONE; n];
    for i in 0..n {
        let mut visited = vec![false; n];
        let ok = augment(i, adj, 0, NONE, &mut visited, &mut col_owner);
        debug_assert!(ok, "tight subgraph of an optimal assignment must be matchable");
        let _ = ok;
    }
    let mut perm = vec![NONE; n];
    for (j, &i) in col_owner.iter().enumerate() {
        if i != NONE {
            perm[i] = j;
        }
    }

    for i in 0..n {
        let mut candidates: Vec<usize> = adj[i].clone();
        candidates.sort_unstable();
        for j in candidates {
            if j >= perm[i] {
                break;
            }
            let displaced = col_owner[j];
            if displaced < i {
                continue; // column pinned by an earlier row
            }
            // Hand column j to row i; the displaced row must re-seat among
            // the unfrozen columns (row i's former column becomes free).
            let freed = perm[i];
            col_owner[j] = i;
            col_owner[freed] = NONE;
            let mut visited = vec![false; n];
            visited[j] = true;
            if augment(displaced, adj, i + 1, j, &mut visited, &mut col_owner) {
                perm[i] = j;
                for (col, &owner) in col_owner.iter().enumerate() {
                    if owner != NONE && owner > i {
                        perm[owner] = col;
                    }
                }
            } else {
                // A failed augmentation leaves the matching untouched.
                col_owner[freed] = i;
                col_owner[j] = displaced;
            }
        }
    }
    perm
}

/// True when the pair of values disagrees at the unit level.
fn unit_mismatch(
    schema: &AttributeSchema,
    tables: Option<&IntervalTables>,
    unit: &Unit,
    a: &[Value],
    b: &[Value],
) -> Result<bool, EvalError> {
    match unit {
        Unit::Single(i) => Ok(attr_distance(schema, tables, *i, &a[*i], &b[*i])? != 0),
        Unit::Group { members, .. } => {
            let category = |row: &[Value]| {
                members.iter().position(|&i| row[i] == Value::Int(1)).unwrap_or(usize::MAX)
            };
            Ok(category(a) != category(b))
        }
    }
}

fn pair_error(
    schema: &AttributeSchema,
    tables: Option<&IntervalTables>,
    units: &[Unit],
    selected: Option<&[usize]>,
    a: &[Value],
    b: &[Value],
) -> Result<f64, EvalError> {
    let all: Vec<usize>;
    let indices: &[usize] = match selected {
        Some(list) => list,
        None => {
            all = (0..units.len()).collect();
            &all
        }
    };
    let mut mismatches = 0usize;
    for &ui in indices {
        if unit_mismatch(schema, tables, &units[ui], a, b)? {
            mismatches += 1;
        }
    }
    Ok(mismatches as f64 / indices.len() as f64)
}

/// Aligns the reconstruction with the original via optimal matching, then
/// measures the mean fraction of mismatched attribute units.
pub fn reconstruction_error(
    orig: &Dataset,
    recon: &Dataset,
    tables: Option<&IntervalTables>,
) -> Result<MatchingReport, EvalError> {
    reconstruction_error_on_units(orig, recon, tables, None)
}

/// Like [`reconstruction_error`], but the error is measured only over the
/// listed attribute units (the matching still uses all attributes).
pub fn reconstruction_error_on_units(
    orig: &Dataset,
    recon: &Dataset,
    tables: Option<&IntervalTables>,
    units_filter: Option<&[usize]>,
) -> Result<MatchingReport, EvalError> {
    let matrix = distance_matrix(orig, recon, tables)?;
    let (orig_to_recon, _) = optimal_matching(&matrix)?;
    let mut permutation = vec![0usize; orig.n_rows()];
    for (o, &r) in orig_to_recon.iter().enumerate() {
        permutation[r] = o;
    }
    error_with_permutation(orig, recon, tables, &permutation, units_filter)
}

/// Error under a frozen reconstructed-to-original pairing.
pub fn error_with_permutation(
    orig: &Dataset,
    recon: &Dataset,
    tables: Option<&IntervalTables>,
    permutation: &[usize],
    units_filter: Option<&[usize]>,
) -> Result<MatchingReport, EvalError> {
    if permutation.len() != orig.n_rows() {
        return Err(EvalError::Mismatch("permutation length".into()));
    }
    let units = orig.schema.units();
    let mut per_pair_error = Vec::with_capacity(recon.n_rows());
    for (r, &o) in permutation.iter().enumerate() {
        per_pair_error.push(pair_error(
            &orig.schema,
            tables,
            &units,
            units_filter,
            &orig.rows[o],
            &recon.rows[r],
        )?);
    }
    let error = per_pair_error.iter().sum::<f64>() / per_pair_error.len() as f64;
    Ok(MatchingReport {
        permutation: permutation.to_vec(),
        per_pair_error,
        error,
        baseline_error: None,
    })
}

/// Draws a uniform schema-consistent dataset: binary attributes are fair
/// coins, one category per one-hot group, uniform domain values for ordinal
/// attributes and uniform reconstruction intervals for numerical ones.
pub fn random_guess(
    schema: &AttributeSchema,
    labels: &[usize],
    tables: Option<&IntervalTables>,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset, EvalError> {
    let m = schema.n_attributes();
    let mut rows = Vec::with_capacity(labels.len());
    for _ in 0..labels.len() {
        let mut row = vec![Value::Int(0); m];
        for (i, attr) in schema.attributes.iter().enumerate() {
            match &attr.kind {
                AttributeKind::Binary => row[i] = Value::Int(rng.random_range(0..2)),
                AttributeKind::OneHotMember { .. } => {} // handled per group
                AttributeKind::Ordinal { domain } => {
                    row[i] = Value::Int(domain[rng.random_range(0..domain.len())]);
                }
                AttributeKind::Numerical { .. } => {
                    let table =
                        tables.and_then(|t| t.get(i)).ok_or(EvalError::MissingIntervalTable(i))?;
                    let idx = rng.random_range(0..table.interval_count());
                    row[i] = Value::Real(table.midpoint(idx));
                }
            }
        }
        for group in &schema.groups {
            let pick = group[rng.random_range(0..group.len())];
            for &i in group {
                row[i] = Value::Int(i64::from(i == pick));
            }
        }
        rows.push(row);
    }
    Dataset::new(schema.clone(), rows, labels.to_vec(), "c")
        .map_err(|e| EvalError::Mismatch(e.to_string()))
}

/// Mean reconstruction error of an adversary that guesses every attribute
/// uniformly (consistently with the one-hot groups), over `runs` draws.
pub fn random_baseline(
    schema: &AttributeSchema,
    orig: &Dataset,
    runs: usize,
    seed: u64,
    tables: Option<&IntervalTables>,
) -> Result<f64, EvalError> {
    assert!(runs >= 1, "at least one baseline run");
    let mut total = 0.0;
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
        let guess = random_guess(schema, &orig.labels, tables, &mut rng)?;
        total += reconstruction_error(orig, &guess, tables)?.error;
    }
    Ok(total / runs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::fixtures::{toy_dataset, toy_schema};

    fn permute(ds: &Dataset, order: &[usize]) -> Dataset {
        Dataset::new(
            ds.schema.clone(),
            order.iter().map(|&i| ds.rows[i].clone()).collect(),
            order.iter().map(|&i| ds.labels[i]).collect(),
            ds.class_column.clone(),
        )
        .unwrap()
    }

    #[test]
    fn identical_datasets_have_zero_diagonal() {
        let ds = toy_dataset();
        let matrix = distance_matrix(&ds, &ds, None).unwrap();
        for (i, row) in matrix.iter().enumerate() {
            assert_eq!(row[i], 0);
        }
    }

    #[test]
    fn hand_counted_toy_distances() {
        let ds = toy_dataset();
        let matrix = distance_matrix(&ds, &ds, None).unwrap();
        // Rows 1 and 3 (1-based) differ in f2 and f4; rows 3 and 4 differ
        // everywhere; rows 1 and 2 differ in f1 and f4.
        assert_eq!(matrix[0][2], 2);
        assert_eq!(matrix[2][3], 4);
        assert_eq!(matrix[0][1], 2);
    }

    #[test]
    fn identity_favoring_matrix_matches_identity() {
        let matrix = vec![vec![0, 5, 5], vec![7, 0, 9], vec![3, 4, 0]];
        let (perm, cost) = optimal_matching(&matrix).unwrap();
        assert_eq!(perm, vec![0, 1, 2]);
        assert_eq!(cost, 0);
    }

    #[test]
    fn non_square_matrices_are_rejected() {
        assert!(optimal_matching(&[vec![1, 2], vec![3]]).is_err());
    }

    fn for_each_permutation(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == perm.len() {
            f(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            for_each_permutation(perm, k + 1, f);
            perm.swap(k, i);
        }
    }

    fn brute_force_min(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
        let n = cost.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best: Option<(Vec<usize>, i64)> = None;
        for_each_permutation(&mut perm, 0, &mut |p: &[usize]| {
            let c: i64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let replace = match &best {
                None => true,
                Some((bp, bc)) => c < *bc || (c == *bc && p < bp.as_slice()),
            };
            if replace {
                best = Some((p.to_vec(), c));
            }
        });
        best.unwrap()
    }

    #[test]
    fn matching_equals_factorial_brute_force_including_ties() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for round in 0..60 {
            let n = 2 + round % 6;
            // Small cost range on purpose: plenty of ties to break.
            let cost: Vec<Vec<i64>> =
                (0..n).map(|_| (0..n).map(|_| rng.random_range(0..4)).collect()).collect();
            let (perm, total) = optimal_matching(&cost).unwrap();
            let (bperm, btotal) = brute_force_min(&cost);
            assert_eq!(total, btotal, "cost mismatch on {cost:?}");
            assert_eq!(perm, bperm, "tie-break mismatch on {cost:?}");
        }
    }

    #[test]
    fn shuffled_copy_is_recovered_exactly() {
        let ds = toy_dataset();
        let shuffled = permute(&ds, &[2, 0, 3, 1]);
        let report = reconstruction_error(&ds, &shuffled, None).unwrap();
        assert_eq!(report.error, 0.0);
        // permutation[r] is the original index of reconstructed row r.
        assert_eq!(report.permutation, vec![2, 0, 3, 1]);
    }

    #[test]
    fn error_is_permutation_invariant() {
        let ds = toy_dataset();
        let mut recon = ds.clone();
        recon.rows[1][0] = Value::Int(1 - recon.rows[1][0].as_int().unwrap());
        recon.rows[3][2] = Value::Int(1 - recon.rows[3][2].as_int().unwrap());
        let base = reconstruction_error(&ds, &recon, None).unwrap().error;
        for order in [[1usize, 0, 2, 3], [3, 2, 1, 0], [2, 3, 0, 1]] {
            let shuffled = permute(&recon, &order);
            let err = reconstruction_error(&ds, &shuffled, None).unwrap().error;
            assert_eq!(err, base);
        }
    }

    #[test]
    fn complement_of_a_single_row_errs_everywhere() {
        let schema = toy_schema();
        let ds = Dataset::new(
            schema.clone(),
            vec![vec![Value::Int(0), Value::Int(1), Value::Int(0), Value::Int(1)]],
            vec![0],
            "c",
        )
        .unwrap();
        let complement = Dataset::new(
            schema,
            vec![vec![Value::Int(1), Value::Int(0), Value::Int(1), Value::Int(0)]],
            vec![0],
            "c",
        )
        .unwrap();
        let report = reconstruction_error(&ds, &complement, None).unwrap();
        assert_eq!(report.error, 1.0);
    }

    #[test]
    fn correcting_one_cell_never_hurts_under_a_frozen_matching() {
        let ds = toy_dataset();
        let mut recon = permute(&ds, &[1, 0, 3, 2]);
        recon.rows[0][2] = Value::Int(1 - recon.rows[0][2].as_int().unwrap());
        recon.rows[2][1] = Value::Int(1 - recon.rows[2][1].as_int().unwrap());
        let report = reconstruction_error(&ds, &recon, None).unwrap();
        let frozen = report.permutation.clone();
        let before = error_with_permutation(&ds, &recon, None, &frozen, None).unwrap().error;
        // Correct one wrong cell of the matched reconstruction.
        let mut fixed = recon.clone();
        for (r, &o) in frozen.iter().enumerate() {
            for i in 0..4 {
                if fixed.rows[r][i] != ds.rows[o][i] {
                    fixed.rows[r][i] = ds.rows[o][i];
                    break;
                }
            }
        }
        let after = error_with_permutation(&ds, &fixed, None, &frozen, None).unwrap().error;
        assert!(after <= before);
    }

    #[test]
    fn group_aware_error_counts_units_once() {
        use crate::data_model::{Attribute, AttributeSchema};
        let schema = AttributeSchema::new(
            vec![
                Attribute { name: "b".into(), kind: AttributeKind::Binary },
                Attribute { name: "g0".into(), kind: AttributeKind::OneHotMember { group_id: 0 } },
                Attribute { name: "g1".into(), kind: AttributeKind::OneHotMember { group_id: 0 } },
                Attribute { name: "g2".into(), kind: AttributeKind::OneHotMember { group_id: 0 } },
            ],
            vec![vec![1, 2, 3]],
            2,
        )
        .unwrap();
        let row = |b: i64, cat: usize| {
            let mut r = vec![Value::Int(b), Value::Int(0), Value::Int(0), Value::Int(0)];
            r[1 + cat] = Value::Int(1);
            r
        };
        let orig = Dataset::new(schema.clone(), vec![row(0, 0)], vec![0], "c").unwrap();
        // Category differs: one of two units wrong, error 1/2 even though
        // two binary columns changed.
        let recon = Dataset::new(schema.clone(), vec![row(0, 2)], vec![0], "c").unwrap();
        let report = reconstruction_error(&orig, &recon, None).unwrap();
        assert_eq!(report.error, 0.5);
    }

    #[test]
    fn single_binary_baseline_converges_to_half() {
        use crate::data_model::{Attribute, AttributeSchema};
        let schema = AttributeSchema::new(
            vec![Attribute { name: "b".into(), kind: AttributeKind::Binary }],
            vec![],
            2,
        )
        .unwrap();
        let orig = Dataset::new(schema.clone(), vec![vec![Value::Int(1)]], vec![0], "c").unwrap();
        let mean = random_baseline(&schema, &orig, 4000, 5, None).unwrap();
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }
}
