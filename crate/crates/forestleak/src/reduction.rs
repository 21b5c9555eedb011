//! Executable form of the hardness construction: a 3-SAT instance compiles
//! into a forest-with-counts whose reconstruction problem is feasible
//! exactly when the formula is satisfiable, and feasible reconstructions
//! decode back into satisfying assignments. Used as a correctness oracle
//! for the solver and the reconstruction encodings.
//!
//! The construction, for a formula with `V` variables and `L` clauses, uses
//! `M = V + L` binary attributes and `N = 6L + 1` examples. Each clause
//! gets a tree whose root branches on its selector attribute: the left
//! child absorbs the `6L - 6` dummy examples of the other clauses, and the
//! right subtree is a perfect binary tree over the clause's three variables
//! whose seven satisfying leaves count one example each. One auxiliary tree
//! counts the dummies per selector block and forces a single example to
//! carry every selector, which must then reach a satisfying leaf in every
//! clause tree.

use thiserror::Error;

use crate::data_model::{Attribute, AttributeKind, AttributeSchema, Dataset};
use crate::forest::{Forest, Node, NodeKind, Tree};
use crate::recon::ReconProblem;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("invalid instance: {0}")]
    BadInstance(String),
    #[error("dimacs parse error at line {line}: {detail}")]
    Dimacs { line: usize, detail: String },
    #[error("no row carries every selector attribute; the solution cannot encode an assignment")]
    NoSelectorRow,
    #[error("decoded assignment falsifies clause {0}")]
    UnsatisfiedClause(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SatLiteral {
    pub var: usize,
    pub positive: bool,
}

impl SatLiteral {
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        assignment[self.var] == self.positive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeSatInstance {
    pub n_vars: usize,
    pub clauses: Vec<[SatLiteral; 3]>,
}

impl ThreeSatInstance {
    pub fn new(n_vars: usize, clauses: Vec<[SatLiteral; 3]>) -> Result<Self, ReductionError> {
        if n_vars == 0 || clauses.is_empty() {
            return Err(ReductionError::BadInstance(
                "need at least one variable and clause".into(),
            ));
        }
        for (l, clause) in clauses.iter().enumerate() {
            for lit in clause {
                if lit.var >= n_vars {
                    return Err(ReductionError::BadInstance(format!(
                        "clause {l} references variable {} of {n_vars}",
                        lit.var
                    )));
                }
            }
            if clause[0].var == clause[1].var
                || clause[0].var == clause[2].var
                || clause[1].var == clause[2].var
            {
                return Err(ReductionError::BadInstance(format!(
                    "clause {l} repeats a variable; three distinct variables are required"
                )));
            }
        }
        Ok(ThreeSatInstance { n_vars, clauses })
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|lit| lit.satisfied_by(assignment)))
    }

    /// Exhaustive satisfiability check over all 2^V assignments.
    pub fn brute_force_satisfiable(&self) -> Option<Vec<bool>> {
        for bits in 0u64..(1u64 << self.n_vars) {
            let assignment: Vec<bool> = (0..self.n_vars).map(|v| bits >> v & 1 == 1).collect();
            if self.satisfied_by(&assignment) {
                return Some(assignment);
            }
        }
        None
    }
}

/// Compiles the instance into a forest-with-counts plus the reconstruction
/// settings it must be solved under (no bagging, single class).
pub fn encode_3sat(inst: &ThreeSatInstance) -> (Forest, ReconProblem) {
    let v = inst.n_vars;
    let l = inst.clauses.len();
    let n = 6 * l + 1;
    let dummy_count = (6 * l - 6) as u64;

    let mut attributes: Vec<Attribute> = (0..v)
        .map(|i| Attribute { name: format!("u{i}"), kind: AttributeKind::Binary })
        .collect();
    attributes
        .extend((0..l).map(|j| Attribute { name: format!("s{j}"), kind: AttributeKind::Binary }));
    let schema = AttributeSchema::new(attributes, vec![], 1).unwrap();

    let mut trees: Vec<Tree> = Vec::with_capacity(l + 1);
    for (idx, clause) in inst.clauses.iter().enumerate() {
        trees.push(clause_tree(v, idx, clause, dummy_count));
    }
    trees.push(auxiliary_tree(v, l, dummy_count));

    let forest = Forest::new(trees, schema, n, false).expect("construction yields a valid forest");
    debug_assert!(crate::forest::validate_forest(&forest).is_empty());
    let mut problem = ReconProblem::new(forest.clone());
    problem.b_max = 1;
    (forest, problem)
}

/// The tree of one clause: the root branches on the clause's selector; its
/// right subtree is a perfect binary tree over the clause's variables in
/// ascending index order, counting one example at each satisfying leaf.
/// Nodes are numbered root first and dummy leaf second, so leaf-choice
/// enumeration visits small attribute patterns before large ones.
fn clause_tree(v: usize, clause_index: usize, clause: &[SatLiteral; 3], dummies: u64) -> Tree {
    let mut vars: Vec<usize> = clause.iter().map(|lit| lit.var).collect();
    vars.sort_unstable();

    // Ids: 0 root, 1 dummy leaf, then the perfect subtree in preorder.
    let mut nodes: Vec<Node> = Vec::with_capacity(17);
    nodes.push(Node {
        id: 0,
        kind: NodeKind::Internal { feature: v + clause_index, threshold: 0.5, left: 1, right: 2 },
        counts: vec![dummies + 7],
    });
    nodes.push(Node { id: 1, kind: NodeKind::Leaf, counts: vec![dummies] });

    fn build(
        nodes: &mut Vec<Node>,
        vars: &[usize],
        depth: usize,
        assignment: &mut Vec<(usize, bool)>,
        clause: &[SatLiteral; 3],
    ) -> (usize, u64) {
        let id = nodes.len();
        if depth == vars.len() {
            let satisfied = clause.iter().any(|lit| {
                assignment.iter().any(|&(var, value)| var == lit.var && value == lit.positive)
            });
            let count = u64::from(satisfied);
            nodes.push(Node { id, kind: NodeKind::Leaf, counts: vec![count] });
            return (id, count);
        }
        nodes.push(Node { id, kind: NodeKind::Leaf, counts: vec![0] }); // placeholder
        assignment.push((vars[depth], false));
        let (left, left_total) = build(nodes, vars, depth + 1, assignment, clause);
        assignment.pop();
        assignment.push((vars[depth], true));
        let (right, right_total) = build(nodes, vars, depth + 1, assignment, clause);
        assignment.pop();
        nodes[id] = Node {
            id,
            kind: NodeKind::Internal { feature: vars[depth], threshold: 0.5, left, right },
            counts: vec![left_total + right_total],
        };
        (id, left_total + right_total)
    }
    let mut assignment = Vec::new();
    let (_, subtree_total) = build(&mut nodes, &vars, 0, &mut assignment, clause);
    debug_assert_eq!(subtree_total, 7);
    Tree::new(nodes, 0, 1).expect("clause tree is well-formed")
}

/// The auxiliary tree: a right spine branching on the selector attributes
/// in order, numbered top-down. The left leaf under the root counts the
/// dummies of every other clause, the next left leaf counts the first
/// clause's six dummies, deeper left leaves are empty, and the rightmost
/// leaf pins exactly one example that carries every selector. With a
/// single clause the spine ends at the root, whose right leaf holds all
/// seven examples.
fn auxiliary_tree(v: usize, l: usize, dummies: u64) -> Tree {
    let mut nodes: Vec<Node> = Vec::new();
    if l == 1 {
        nodes.push(Node {
            id: 0,
            kind: NodeKind::Internal { feature: v, threshold: 0.5, left: 1, right: 2 },
            counts: vec![7],
        });
        nodes.push(Node { id: 1, kind: NodeKind::Leaf, counts: vec![0] });
        nodes.push(Node { id: 2, kind: NodeKind::Leaf, counts: vec![7] });
        return Tree::new(nodes, 0, 1).expect("auxiliary tree is well-formed");
    }
    let left_count = |depth: usize| -> u64 {
        match depth {
            0 => dummies,
            1 => 6,
            _ => 0,
        }
    };
    // Spine node at depth d has id 2d, its left leaf id 2d + 1; the
    // rightmost leaf is id 2l.
    let mut below_rightmost = 1u64; // the rightmost leaf's count
    let mut totals = vec![0u64; l];
    for depth in (0..l).rev() {
        below_rightmost += left_count(depth);
        totals[depth] = below_rightmost;
    }
    for depth in 0..l {
        let right = if depth == l - 1 { 2 * l } else { 2 * (depth + 1) };
        nodes.push(Node {
            id: 2 * depth,
            kind: NodeKind::Internal {
                feature: v + depth,
                threshold: 0.5,
                left: 2 * depth + 1,
                right,
            },
            counts: vec![totals[depth]],
        });
        nodes.push(Node { id: 2 * depth + 1, kind: NodeKind::Leaf, counts: vec![left_count(depth)] });
    }
    nodes.push(Node { id: 2 * l, kind: NodeKind::Leaf, counts: vec![1] });
    Tree::new(nodes, 0, 1).expect("auxiliary tree is well-formed")
}

/// Reads the encoded assignment out of a feasible reconstruction: the row
/// whose selector attributes are all 1 carries the satisfying assignment in
/// its first `V` attributes. The decoded assignment is checked against
/// every clause before it is returned.
pub fn decode_assignment(
    solution: &Dataset,
    inst: &ThreeSatInstance,
) -> Result<Vec<bool>, ReductionError> {
    let v = inst.n_vars;
    let l = inst.clauses.len();
    let row = solution
        .rows
        .iter()
        .find(|row| (v..v + l).all(|i| row[i].as_int() == Some(1)))
        .ok_or(ReductionError::NoSelectorRow)?;
    let assignment: Vec<bool> = (0..v).map(|i| row[i].as_int() == Some(1)).collect();
    for (idx, clause) in inst.clauses.iter().enumerate() {
        if !clause.iter().any(|lit| lit.satisfied_by(&assignment)) {
            return Err(ReductionError::UnsatisfiedClause(idx));
        }
    }
    Ok(assignment)
}

/// Strict DIMACS CNF reader accepting exactly-three-literal clauses.
pub fn parse_dimacs_3cnf(text: &str) -> Result<ThreeSatInstance, ReductionError> {
    let mut n_vars: Option<usize> = None;
    let mut declared_clauses = 0usize;
    let mut clauses: Vec<[SatLiteral; 3]> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |detail: String| ReductionError::Dimacs { line: lineno + 1, detail };
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p cnf") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(err("malformed problem line".into()));
            }
            n_vars = Some(parts[0].parse().map_err(|e| err(format!("{e}")))?);
            declared_clauses = parts[1].parse().map_err(|e| err(format!("{e}")))?;
            continue;
        }
        let Some(v) = n_vars else {
            return Err(err("clause before the problem line".into()));
        };
        let mut literals = Vec::new();
        let mut terminated = false;
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|e| err(format!("{e}")))?;
            if value == 0 {
                terminated = true;
                break;
            }
            let var = value.unsigned_abs() as usize - 1;
            if var >= v {
                return Err(err(format!("literal {value} out of range")));
            }
            literals.push(SatLiteral { var, positive: value > 0 });
        }
        if !terminated {
            return Err(err("clause not terminated by 0".into()));
        }
        if literals.len() != 3 {
            return Err(err(format!("{} literals; exactly 3 required", literals.len())));
        }
        clauses.push([literals[0], literals[1], literals[2]]);
    }
    let n_vars =
        n_vars.ok_or(ReductionError::Dimacs { line: 0, detail: "missing problem line".into() })?;
    if declared_clauses != clauses.len() {
        return Err(ReductionError::Dimacs {
            line: 0,
            detail: format!("{} clauses declared, {} found", declared_clauses, clauses.len()),
        });
    }
    ThreeSatInstance::new(n_vars, clauses)
}

/// The worked three-clause, four-variable example instance.
pub fn example_instance() -> ThreeSatInstance {
    let lit = |var: usize, positive: bool| SatLiteral { var, positive };
    ThreeSatInstance::new(
        4,
        vec![
            [lit(0, true), lit(1, false), lit(2, false)],
            [lit(0, true), lit(1, true), lit(3, true)],
            [lit(1, false), lit(2, false), lit(3, false)],
        ],
    )
    .unwrap()
}

/// Uniform random instance with three distinct variables per clause.
pub fn random_instance(
    rng: &mut rand_chacha::ChaCha8Rng,
    max_vars: usize,
    max_clauses: usize,
) -> ThreeSatInstance {
    use rand::Rng;
    let v = rng.random_range(3..=max_vars);
    let l = rng.random_range(1..=max_clauses);
    let clauses = (0..l)
        .map(|_| {
            let mut vars: Vec<usize> = (0..v).collect();
            for i in 0..3 {
                let j = rng.random_range(i..vars.len());
                vars.swap(i, j);
            }
            [
                SatLiteral { var: vars[0], positive: rng.random_bool(0.5) },
                SatLiteral { var: vars[1], positive: rng.random_bool(0.5) },
                SatLiteral { var: vars[2], positive: rng.random_bool(0.5) },
            ]
        })
        .collect();
    ThreeSatInstance::new(v, clauses).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{validate_forest, NodeKind};
    use crate::recon::attack;
    use crate::solver::SolveStatus;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_instance_encodes_to_the_documented_shape() {
        let inst = example_instance();
        let (forest, problem) = encode_3sat(&inst);
        assert_eq!(forest.n_examples, 19);
        assert_eq!(forest.schema.n_attributes(), 7);
        assert_eq!(forest.trees.len(), 4);
        assert!(validate_forest(&forest).is_empty());
        assert_eq!(problem.b_max, 1);
        assert!(!forest.bagging);

        // Clause trees: dummy leaf counts 12, and exactly one empty leaf in
        // each perfect subtree.
        for tree in &forest.trees[..3] {
            let root = &tree.nodes[tree.root];
            let NodeKind::Internal { left, .. } = root.kind else { panic!("root splits") };
            assert_eq!(tree.nodes[left].counts, vec![12]);
            let zero_leaves = tree.leaves().filter(|n| n.counts == vec![0]).count();
            assert_eq!(zero_leaves, 1);
            let ones = tree.leaves().filter(|n| n.counts == vec![1]).count();
            assert_eq!(ones, 7);
        }
        // Auxiliary tree: left counts 12 then 6 then 0, rightmost 1.
        let aux = &forest.trees[3];
        let mut v = aux.root;
        let mut left_counts = Vec::new();
        loop {
            match aux.nodes[v].kind {
                NodeKind::Internal { left, right, .. } => {
                    left_counts.push(aux.nodes[left].counts[0]);
                    v = right;
                }
                NodeKind::Leaf => break,
            }
        }
        assert_eq!(left_counts, vec![12, 6, 0]);
        assert_eq!(aux.nodes[v].counts, vec![1]);
    }

    #[test]
    fn single_clause_instances_degenerate_cleanly() {
        let lit = |var: usize, positive: bool| SatLiteral { var, positive };
        let inst =
            ThreeSatInstance::new(3, vec![[lit(0, true), lit(1, true), lit(2, true)]]).unwrap();
        let (forest, _) = encode_3sat(&inst);
        assert_eq!(forest.n_examples, 7);
        assert_eq!(forest.schema.n_attributes(), 4);
        assert!(validate_forest(&forest).is_empty());
        // The dummy leaf of the clause tree is empty.
        let NodeKind::Internal { left, .. } = forest.trees[0].nodes[forest.trees[0].root].kind
        else {
            panic!("root splits")
        };
        assert_eq!(forest.trees[0].nodes[left].counts, vec![0]);
    }

    #[test]
    fn example_instance_solves_and_decodes() {
        let inst = example_instance();
        let (_, problem) = encode_3sat(&inst);
        let outcome = attack(&problem).unwrap();
        assert_eq!(outcome.result.status, SolveStatus::Optimal);
        let assignment = decode_assignment(&outcome.dataset.unwrap(), &inst).unwrap();
        assert!(inst.satisfied_by(&assignment));
        // The documented satisfying assignment also passes.
        assert!(inst.satisfied_by(&[true, false, false, false]));
    }

    #[test]
    fn unsatisfiable_formulas_encode_to_infeasible_problems() {
        // All eight sign patterns over three variables.
        let lit = |var: usize, positive: bool| SatLiteral { var, positive };
        let clauses: Vec<[SatLiteral; 3]> = (0..8u8)
            .map(|bits| [lit(0, bits & 1 != 0), lit(1, bits & 2 != 0), lit(2, bits & 4 != 0)])
            .collect();
        let inst = ThreeSatInstance::new(3, clauses).unwrap();
        assert!(inst.brute_force_satisfiable().is_none());
        let (_, problem) = encode_3sat(&inst);
        let outcome = attack(&problem).unwrap();
        assert_eq!(outcome.result.status, SolveStatus::Infeasible);
        assert!(outcome.dataset.is_none());
    }

    #[test]
    fn random_instances_agree_with_exhaustive_satisfiability() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 6, 8);
            let expected_sat = inst.brute_force_satisfiable().is_some();
            let (_, problem) = encode_3sat(&inst);
            let outcome = attack(&problem).unwrap();
            if expected_sat {
                assert_eq!(outcome.result.status, SolveStatus::Optimal);
                let assignment = decode_assignment(&outcome.dataset.unwrap(), &inst).unwrap();
                assert!(inst.satisfied_by(&assignment));
            } else {
                assert_eq!(outcome.result.status, SolveStatus::Infeasible);
            }
        }
    }

    #[test]
    fn dimacs_round_trips_and_rejects_non_three_clauses() {
        let text = "c example\np cnf 4 3\n1 -2 -3 0\n1 2 4 0\n-2 -3 -4 0\n";
        let inst = parse_dimacs_3cnf(text).unwrap();
        assert_eq!(inst, example_instance());

        let wide = "p cnf 3 1\n1 2 0\n";
        assert!(matches!(parse_dimacs_3cnf(wide), Err(ReductionError::Dimacs { .. })));

        let repeated = "p cnf 3 1\n1 1 2 0\n";
        assert!(matches!(parse_dimacs_3cnf(repeated), Err(ReductionError::BadInstance(_))));
    }
}
