//! A finite-domain constraint solver with branch-and-bound maximization.
//!
//! Variables are booleans or bounded integers; constraints are linear
//! equalities/inequalities, exactly-one over booleans, guarded domain
//! clampings, half-reified linear constraints and domain mapping between an
//! integer and its indicator booleans. Search interleaves bounds propagation
//! with chronological backtracking, Luby restarts and phase saving; an
//! optional integer linear objective is maximized by branch-and-bound on the
//! incumbent. Every returned assignment is re-checked by the independent
//! constraint evaluator before it leaves the solver.

mod search;

use std::fmt::Write as _;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown variable id {0}")]
    UnknownVar(u32),
    #[error("variable {0} is not boolean")]
    NotBool(u32),
    #[error("empty integer domain [{lo}, {hi}]")]
    EmptyDomain { lo: i64, hi: i64 },
    #[error("domain mapping arity mismatch: {indicators} indicators for domain size {domain}")]
    MapArity { indicators: usize, domain: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Opaque variable handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) u32);

impl VarId {
    pub fn index(&self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarKind {
    Bool,
    Int { lo: i64, hi: i64 },
}

impl VarKind {
    pub fn bounds(&self) -> (i64, i64) {
        match *self {
            VarKind::Bool => (0, 1),
            VarKind::Int { lo, hi } => (lo, hi),
        }
    }
}

/// A boolean variable or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lit {
    pub var: VarId,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: VarId) -> Self {
        Lit { var, positive: true }
    }

    pub fn neg(var: VarId) -> Self {
        Lit { var, positive: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `sum(coeff * var) == rhs`
    LinearEq { terms: Vec<(i64, VarId)>, rhs: i64 },
    /// `sum(coeff * var) <= rhs`
    LinearLe { terms: Vec<(i64, VarId)>, rhs: i64 },
    /// Exactly one of the boolean variables is 1.
    ExactlyOne { vars: Vec<VarId> },
    /// If the guard literal holds, every listed variable is clamped into
    /// `[lo, hi]`. A fixing is the special case `lo == hi`.
    Implies { guard: Lit, clamps: Vec<(VarId, i64, i64)> },
    /// Half-reified linear constraint: enforced only when the guard holds.
    ReifiedLinear { guard: Lit, le: bool, terms: Vec<(i64, VarId)>, rhs: i64 },
    /// Channeling `int_var = base + j  <=>  indicators[j] = 1`, where `base`
    /// is the declared lower bound of `int_var`.
    MapDomain { int_var: VarId, indicators: Vec<VarId> },
    /// Exactly one selector holds, and the chosen selector clamps the listed
    /// variables. Beyond the plain exactly-one/implication pair this
    /// propagates the union of the remaining alternatives: a variable every
    /// open alternative clamps is confined to the union of those ranges.
    Choice { selectors: Vec<VarId>, clamps: Vec<Vec<(VarId, i64, i64)>> },
    /// Lexicographic order between two equal-length vectors, most
    /// significant position first: `a <= b`.
    LexLe { a: Vec<VarId>, b: Vec<VarId> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub wall: Duration,
    /// Objective value of each incumbent in the order they were found.
    pub incumbent_objectives: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub assignment: Option<Vec<i64>>,
    pub objective: Option<i64>,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Debug, Clone)]
pub struct SolveLimits {
    pub time_limit: Option<Duration>,
    pub workers: usize,
    pub seed: u64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { time_limit: None, workers: 1, seed: 0 }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Model {
    kinds: Vec<VarKind>,
    constraints: Vec<Constraint>,
    objective: Option<Vec<(i64, VarId)>>,
    priorities: Vec<i32>,
}

impl Model {
    pub fn new() -> Self {
        Model::default()
    }

    pub fn n_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn kind(&self, var: VarId) -> VarKind {
        self.kinds[var.index()]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&[(i64, VarId)]> {
        self.objective.as_deref()
    }

    pub fn add_var(&mut self, kind: VarKind) -> Result<VarId, ModelError> {
        if let VarKind::Int { lo, hi } = kind {
            if lo > hi {
                return Err(ModelError::EmptyDomain { lo, hi });
            }
        }
        let id = VarId(self.kinds.len() as u32);
        self.kinds.push(kind);
        self.priorities.push(0);
        Ok(id)
    }

    /// Branching priority: higher-priority variables are decided first,
    /// before the occurrence-count heuristic applies. Defaults to 0.
    pub fn set_branch_priority(&mut self, var: VarId, priority: i32) {
        self.priorities[var.index()] = priority;
    }

    pub fn branch_priority(&self, var: VarId) -> i32 {
        self.priorities[var.index()]
    }

    pub fn add_bool(&mut self) -> VarId {
        self.add_var(VarKind::Bool).unwrap()
    }

    pub fn add_int(&mut self, lo: i64, hi: i64) -> Result<VarId, ModelError> {
        self.add_var(VarKind::Int { lo, hi })
    }

    fn check_var(&self, var: VarId) -> Result<(), ModelError> {
        if var.index() >= self.kinds.len() {
            return Err(ModelError::UnknownVar(var.0));
        }
        Ok(())
    }

    fn check_bool(&self, var: VarId) -> Result<(), ModelError> {
        self.check_var(var)?;
        if !matches!(self.kinds[var.index()], VarKind::Bool) {
            return Err(ModelError::NotBool(var.0));
        }
        Ok(())
    }

    pub fn add_constraint(&mut self, constraint: Constraint) -> Result<(), ModelError> {
        match &constraint {
            Constraint::LinearEq { terms, .. } | Constraint::LinearLe { terms, .. } => {
                for (_, v) in terms {
                    self.check_var(*v)?;
                }
            }
            Constraint::ExactlyOne { vars } => {
                if vars.is_empty() {
                    return Err(ModelError::Invalid("exactly-one over no variables".into()));
                }
                for v in vars {
                    self.check_bool(*v)?;
                }
            }
            Constraint::Implies { guard, clamps } => {
                self.check_bool(guard.var)?;
                for (v, lo, hi) in clamps {
                    self.check_var(*v)?;
                    if lo > hi {
                        return Err(ModelError::EmptyDomain { lo: *lo, hi: *hi });
                    }
                }
            }
            Constraint::ReifiedLinear { guard, terms, .. } => {
                self.check_bool(guard.var)?;
                for (_, v) in terms {
                    self.check_var(*v)?;
                }
            }
            Constraint::MapDomain { int_var, indicators } => {
                self.check_var(*int_var)?;
                let (lo, hi) = self.kinds[int_var.index()].bounds();
                let domain = (hi - lo + 1) as usize;
                if indicators.len() != domain {
                    return Err(ModelError::MapArity { indicators: indicators.len(), domain });
                }
                for v in indicators {
                    self.check_bool(*v)?;
                }
            }
            Constraint::Choice { selectors, clamps } => {
                if selectors.is_empty() || selectors.len() != clamps.len() {
                    return Err(ModelError::Invalid(
                        "choice needs one clamp list per selector".into(),
                    ));
                }
                for v in selectors {
                    self.check_bool(*v)?;
                }
                for list in clamps {
                    for (v, lo, hi) in list {
                        self.check_var(*v)?;
                        if lo > hi {
                            return Err(ModelError::EmptyDomain { lo: *lo, hi: *hi });
                        }
                    }
                }
            }
            Constraint::LexLe { a, b } => {
                if a.len() != b.len() {
                    return Err(ModelError::Invalid("lex vectors differ in length".into()));
                }
                for v in a.iter().chain(b) {
                    self.check_var(*v)?;
                }
            }
        }
        self.constraints.push(constraint);
        Ok(())
    }

    /// Sets an integer linear objective to maximize.
    pub fn set_objective(&mut self, terms: Vec<(i64, VarId)>) -> Result<(), ModelError> {
        for (_, v) in &terms {
            self.check_var(*v)?;
        }
        self.objective = Some(terms);
        Ok(())
    }

    pub fn eval_objective(&self, assignment: &[i64]) -> Option<i64> {
        self.objective.as_ref().map(|terms| {
            terms.iter().map(|(c, v)| c * assignment[v.index()]).sum()
        })
    }

    /// True when every value lies inside its variable's declared domain.
    pub fn in_domain(&self, assignment: &[i64]) -> bool {
        assignment.len() == self.kinds.len()
            && self.kinds.iter().zip(assignment).all(|(kind, &v)| {
                let (lo, hi) = kind.bounds();
                v >= lo && v <= hi
            })
    }

    /// Evaluates every constraint exactly against a complete assignment and
    /// returns the indices of the violated ones. Independent of the search
    /// machinery; the solver re-checks its own answers through this.
    pub fn verify_assignment(&self, assignment: &[i64]) -> Vec<usize> {
        assert_eq!(
            assignment.len(),
            self.kinds.len(),
            "assignment must cover all variables"
        );
        let value = |v: VarId| assignment[v.index()];
        let lit_holds = |l: Lit| {
            let v = value(l.var);
            if l.positive {
                v == 1
            } else {
                v == 0
            }
        };
        let sum = |terms: &[(i64, VarId)]| -> i128 {
            terms.iter().map(|&(c, v)| c as i128 * value(v) as i128).sum()
        };
        let mut violated = Vec::new();
        for (idx, constraint) in self.constraints.iter().enumerate() {
            let ok = match constraint {
                Constraint::LinearEq { terms, rhs } => sum(terms) == *rhs as i128,
                Constraint::LinearLe { terms, rhs } => sum(terms) <= *rhs as i128,
                Constraint::ExactlyOne { vars } => {
                    vars.iter().filter(|&&v| value(v) == 1).count() == 1
                }
                Constraint::Implies { guard, clamps } => {
                    !lit_holds(*guard)
                        || clamps.iter().all(|&(v, lo, hi)| {
                            let x = value(v);
                            x >= lo && x <= hi
                        })
                }
                Constraint::ReifiedLinear { guard, le, terms, rhs } => {
                    if !lit_holds(*guard) {
                        true
                    } else if *le {
                        sum(terms) <= *rhs as i128
                    } else {
                        sum(terms) == *rhs as i128
                    }
                }
                Constraint::MapDomain { int_var, indicators } => {
                    let (base, _) = self.kinds[int_var.index()].bounds();
                    let x = value(*int_var);
                    indicators.iter().enumerate().all(|(j, &ind)| {
                        let expected = if base + j as i64 == x { 1 } else { 0 };
                        value(ind) == expected
                    })
                }
                Constraint::Choice { selectors, clamps } => {
                    selectors.iter().filter(|&&s| value(s) == 1).count() == 1
                        && selectors.iter().zip(clamps).all(|(&s, list)| {
                            value(s) == 0
                                || list.iter().all(|&(v, lo, hi)| {
                                    let x = value(v);
                                    x >= lo && x <= hi
                                })
                        })
                }
                Constraint::LexLe { a, b } => {
                    let left: Vec<i64> = a.iter().map(|&v| value(v)).collect();
                    let right: Vec<i64> = b.iter().map(|&v| value(v)).collect();
                    left <= right
                }
            };
            if !ok {
                violated.push(idx);
            }
        }
        violated
    }

    pub fn solve(&self, limits: &SolveLimits) -> SolveResult {
        search::solve(self, limits)
    }

    /// Line-oriented debug dump: one variable or constraint per line.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        for (i, kind) in self.kinds.iter().enumerate() {
            match kind {
                VarKind::Bool => writeln!(out, "var v{i} bool").unwrap(),
                VarKind::Int { lo, hi } => writeln!(out, "var v{i} int {lo}..{hi}").unwrap(),
            }
        }
        let fmt_terms = |terms: &[(i64, VarId)]| {
            terms
                .iter()
                .map(|(c, v)| format!("{c}*v{}", v.index()))
                .collect::<Vec<_>>()
                .join(" + ")
        };
        let fmt_lit =
            |l: &Lit| format!("{}v{}", if l.positive { "" } else { "!" }, l.var.index());
        for c in &self.constraints {
            match c {
                Constraint::LinearEq { terms, rhs } => {
                    writeln!(out, "eq {} = {rhs}", fmt_terms(terms)).unwrap()
                }
                Constraint::LinearLe { terms, rhs } => {
                    writeln!(out, "le {} <= {rhs}", fmt_terms(terms)).unwrap()
                }
                Constraint::ExactlyOne { vars } => {
                    let list =
                        vars.iter().map(|v| format!("v{}", v.index())).collect::<Vec<_>>();
                    writeln!(out, "exactly-one {}", list.join(" ")).unwrap()
                }
                Constraint::Implies { guard, clamps } => {
                    let list = clamps
                        .iter()
                        .map(|(v, lo, hi)| format!("v{} in {lo}..{hi}", v.index()))
                        .collect::<Vec<_>>();
                    writeln!(out, "implies {} -> {}", fmt_lit(guard), list.join(", ")).unwrap()
                }
                Constraint::ReifiedLinear { guard, le, terms, rhs } => {
                    let op = if *le { "<=" } else { "=" };
                    writeln!(out, "reified {} -> {} {op} {rhs}", fmt_lit(guard), fmt_terms(terms))
                        .unwrap()
                }
                Constraint::MapDomain { int_var, indicators } => {
                    let list =
                        indicators.iter().map(|v| format!("v{}", v.index())).collect::<Vec<_>>();
                    writeln!(out, "map-domain v{} <-> {}", int_var.index(), list.join(" "))
                        .unwrap()
                }
                Constraint::LexLe { a, b } => {
                    let left = a.iter().map(|v| format!("v{}", v.index())).collect::<Vec<_>>();
                    let right = b.iter().map(|v| format!("v{}", v.index())).collect::<Vec<_>>();
                    writeln!(out, "lex [{}] <= [{}]", left.join(" "), right.join(" ")).unwrap()
                }
                Constraint::Choice { selectors, clamps } => {
                    let alts = selectors
                        .iter()
                        .zip(clamps)
                        .map(|(s, list)| {
                            let body = list
                                .iter()
                                .map(|(v, lo, hi)| format!("v{} in {lo}..{hi}", v.index()))
                                .collect::<Vec<_>>()
                                .join(", ");
                            format!("v{} -> [{}]", s.index(), body)
                        })
                        .collect::<Vec<_>>();
                    writeln!(out, "choice {}", alts.join(" | ")).unwrap()
                }
            }
        }
        if let Some(obj) = &self.objective {
            writeln!(out, "maximize {}", fmt_terms(obj)).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_exactly_one_solves_to_true() {
        let mut m = Model::new();
        let v = m.add_bool();
        m.add_constraint(Constraint::ExactlyOne { vars: vec![v] }).unwrap();
        let result = m.solve(&SolveLimits::default());
        assert_eq!(result.status, SolveStatus::Optimal);
        assert_eq!(result.assignment.unwrap()[v.index()], 1);
    }

    #[test]
    fn contradictory_sums_are_infeasible() {
        let mut m = Model::new();
        let x = m.add_bool();
        let y = m.add_bool();
        m.add_constraint(Constraint::LinearEq { terms: vec![(1, x), (1, y)], rhs: 1 }).unwrap();
        m.add_constraint(Constraint::LinearEq { terms: vec![(1, x), (1, y)], rhs: 2 }).unwrap();
        let result = m.solve(&SolveLimits::default());
        assert_eq!(result.status, SolveStatus::Infeasible);
    }

    #[test]
    fn map_domain_arity_is_checked() {
        let mut m = Model::new();
        let x = m.add_int(0, 7).unwrap();
        let inds: Vec<VarId> = (0..8).map(|_| m.add_bool()).collect();
        m.add_constraint(Constraint::MapDomain { int_var: x, indicators: inds.clone() })
            .unwrap();
        let short: Vec<VarId> = inds[..7].to_vec();
        let err = m
            .add_constraint(Constraint::MapDomain { int_var: x, indicators: short })
            .unwrap_err();
        assert!(matches!(err, ModelError::MapArity { indicators: 7, domain: 8 }));
    }

    #[test]
    fn unknown_vars_are_rejected() {
        let mut m = Model::new();
        let v = m.add_bool();
        let ghost = VarId(99);
        assert!(matches!(
            m.add_constraint(Constraint::LinearLe { terms: vec![(1, ghost)], rhs: 0 }),
            Err(ModelError::UnknownVar(99))
        ));
        assert!(m
            .add_constraint(Constraint::ExactlyOne { vars: vec![v] })
            .is_ok());
    }

    #[test]
    fn verifier_flags_all_zero_exactly_one() {
        let mut m = Model::new();
        let a = m.add_bool();
        let b = m.add_bool();
        m.add_constraint(Constraint::ExactlyOne { vars: vec![a, b] }).unwrap();
        assert_eq!(m.verify_assignment(&[0, 0]), vec![0]);
        assert_eq!(m.verify_assignment(&[1, 0]), Vec::<usize>::new());
    }

    #[test]
    fn dump_is_line_oriented() {
        let mut m = Model::new();
        let x = m.add_int(0, 3).unwrap();
        let b = m.add_bool();
        m.add_constraint(Constraint::LinearLe { terms: vec![(2, x), (-1, b)], rhs: 4 }).unwrap();
        let dump = m.dump_text();
        assert!(dump.contains("var v0 int 0..3"));
        assert!(dump.contains("le 2*v0 + -1*v1 <= 4"));
    }
}
