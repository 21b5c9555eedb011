//! Backtracking search with bounds propagation, conflict-directed
//! backjumping, Luby restarts, phase saving and branch-and-bound on an
//! incumbent objective.
//!
//! Every boolean fixing carries the set of decision levels it depends on;
//! a conflict's dependency set then bounds the deepest decision whose flip
//! can possibly resolve it, so refutations of independent subproblems are
//! not re-derived under irrelevant flips. Constraints touching integer
//! variables fall back to a saturated "all levels" set, which degrades to
//! plain chronological backtracking and stays sound. Several workers can
//! run the same model with perturbed branching orders, sharing the
//! incumbent bound; results are deterministic for a single worker and
//! fixed seed.

use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::time::Instant;

use super::{Constraint, Lit, Model, SolveLimits, SolveResult, SolveStats, SolveStatus, VarKind};

const LUBY_UNIT: u64 = 512;
const TICK_MASK: u64 = 0x1FFF;
/// Dependency sets larger than this saturate to "all levels".
const LEVELS_CAP: usize = 512;

pub(super) fn solve(model: &Model, limits: &SolveLimits) -> SolveResult {
    let start = Instant::now();
    let occ = build_occurrences(model);
    let workers = limits.workers.max(1);
    let shared = Shared { best_obj: AtomicI64::new(i64::MIN), stop: AtomicBool::new(false) };

    let outcomes: Vec<WorkerOutcome> = if workers == 1 {
        vec![Worker::new(model, &occ, limits, 0, &shared, start).run()]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let occ = &occ;
                    let shared = &shared;
                    scope.spawn(move || Worker::new(model, occ, limits, w, shared, start).run())
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };

    combine(model, outcomes, start)
}

struct Shared {
    /// Best objective found by any worker; `i64::MIN` until one exists.
    best_obj: AtomicI64,
    stop: AtomicBool,
}

struct WorkerOutcome {
    exhausted: bool,
    best: Option<(i64, Vec<i64>)>,
    stats: SolveStats,
}

fn combine(model: &Model, outcomes: Vec<WorkerOutcome>, start: Instant) -> SolveResult {
    let exhausted = outcomes.iter().any(|o| o.exhausted);
    let mut winner: Option<&WorkerOutcome> = None;
    for outcome in &outcomes {
        if let Some((obj, _)) = &outcome.best {
            let better = match winner.and_then(|w| w.best.as_ref()) {
                None => true,
                Some((best_obj, _)) => obj > best_obj,
            };
            if better {
                winner = Some(outcome);
            }
        }
    }
    let mut stats = SolveStats::default();
    for outcome in &outcomes {
        stats.decisions += outcome.stats.decisions;
        stats.propagations += outcome.stats.propagations;
        stats.conflicts += outcome.stats.conflicts;
        stats.restarts += outcome.stats.restarts;
    }
    if let Some(w) = winner {
        stats.incumbent_objectives = w.stats.incumbent_objectives.clone();
    }
    stats.wall = start.elapsed();

    match winner {
        Some(outcome) => {
            let (obj, assignment) = outcome.best.clone().unwrap();
            // A solution of a pure feasibility problem is trivially optimal;
            // with an objective, optimality needs an exhausted search.
            let status = if exhausted || model.objective().is_none() {
                SolveStatus::Optimal
            } else {
                SolveStatus::Feasible
            };
            let objective = model.objective().map(|_| obj);
            SolveResult { status, assignment: Some(assignment), objective, stats }
        }
        None => {
            let status = if exhausted { SolveStatus::Infeasible } else { SolveStatus::Unknown };
            SolveResult { status, assignment: None, objective: None, stats }
        }
    }
}

/// Constraint ids waking on each variable's bound changes. The sentinel id
/// `model.n_constraints()` stands for the objective cut.
fn build_occurrences(model: &Model) -> Vec<Vec<u32>> {
    let mut occ = vec![Vec::new(); model.n_vars()];
    let mut add = |var: super::VarId, cid: usize| occ[var.index()].push(cid as u32);
    for (cid, constraint) in model.constraints().iter().enumerate() {
        match constraint {
            Constraint::LinearEq { terms, .. } | Constraint::LinearLe { terms, .. } => {
                for (_, v) in terms {
                    add(*v, cid);
                }
            }
            Constraint::ExactlyOne { vars } => {
                for v in vars {
                    add(*v, cid);
                }
            }
            Constraint::Implies { guard, clamps } => {
                add(guard.var, cid);
                for (v, _, _) in clamps {
                    add(*v, cid);
                }
            }
            Constraint::ReifiedLinear { guard, terms, .. } => {
                add(guard.var, cid);
                for (_, v) in terms {
                    add(*v, cid);
                }
            }
            Constraint::MapDomain { int_var, indicators } => {
                add(*int_var, cid);
                for v in indicators {
                    add(*v, cid);
                }
            }
            Constraint::Choice { selectors, clamps } => {
                for v in selectors {
                    add(*v, cid);
                }
                for list in clamps {
                    for (v, _, _) in list {
                        add(*v, cid);
                    }
                }
            }
            Constraint::LexLe { a, b } => {
                for v in a.iter().chain(b) {
                    add(*v, cid);
                }
            }
        }
    }
    if let Some(obj) = model.objective() {
        let cut_id = model.n_constraints();
        for (_, v) in obj {
            add(*v, cut_id);
        }
    }
    for list in &mut occ {
        list.dedup();
    }
    occ
}

/// A set of decision levels, saturating to `Full` past [`LEVELS_CAP`].
#[derive(Debug, Clone, PartialEq)]
enum Levels {
    Full,
    Set(Vec<u32>),
}

impl Levels {
    fn empty() -> Self {
        Levels::Set(Vec::new())
    }

    fn single(level: u32) -> Self {
        Levels::Set(vec![level])
    }

    fn union_with(&mut self, other: &Levels) {
        match other {
            Levels::Full => *self = Levels::Full,
            Levels::Set(levels) => {
                if let Levels::Set(into) = self {
                    for &l in levels {
                        if let Err(at) = into.binary_search(&l) {
                            into.insert(at, l);
                        }
                    }
                    if into.len() > LEVELS_CAP {
                        *self = Levels::Full;
                    }
                }
            }
        }
    }

    fn remove(&mut self, level: u32) {
        if let Levels::Set(levels) = self {
            if let Ok(at) = levels.binary_search(&level) {
                levels.remove(at);
            }
        }
    }

    fn deepest(&self) -> Option<u32> {
        match self {
            Levels::Full => None,
            Levels::Set(levels) => levels.last().copied(),
        }
    }

    fn is_empty_set(&self) -> bool {
        matches!(self, Levels::Set(levels) if levels.is_empty())
    }

    fn is_full(&self) -> bool {
        matches!(self, Levels::Full)
    }
}

/// A conflict: the decision levels the contradiction depends on. `Full`
/// means "unknown, potentially all of them".
struct Conflict(Levels);

const NO_CULPRIT: u32 = u32::MAX;

struct Decision {
    var: usize,
    value: i64,
    trail_mark: usize,
    flipped: bool,
    /// Union of the dependency sets of every conflict resolved at this
    /// level (minus the level itself); becomes the dependency of the
    /// flipped branch and of the exhaustion of the whole level.
    conflict_acc: Levels,
}

struct Worker<'a> {
    model: &'a Model,
    occ: &'a [Vec<u32>],
    limits: &'a SolveLimits,
    shared: &'a Shared,
    start: Instant,

    lo: Vec<i64>,
    hi: Vec<i64>,
    trail: Vec<(u32, i64, i64)>,
    decisions: Vec<Decision>,
    queue: std::collections::VecDeque<u32>,
    in_queue: Vec<bool>,
    /// Branching order (variable indices) and each variable's position in it.
    order: Vec<u32>,
    pos: Vec<u32>,
    head: usize,
    phase: Vec<bool>,
    /// Dependency levels of each boolean's current fixing; only meaningful
    /// while the variable is fixed.
    dep: Vec<Levels>,
    /// Dependency set of the current inference, set by the propagator when
    /// it can name a precise cause; otherwise computed lazily from the
    /// whole constraint.
    cause: Option<Levels>,
    /// Extra dependencies composed under every cause of the current
    /// constraint (e.g. the guard of a reified constraint).
    cause_base: Levels,
    cause_cid: u32,

    activity: Vec<f64>,
    activity_inc: f64,
    stats: SolveStats,
    best: Option<(i64, Vec<i64>)>,
    /// Lower bound the objective must currently beat (incumbent + 1).
    cut_bound: Option<i64>,
    conflicts_since_restart: u64,
    restart_index: u64,
    restart_budget: u64,
    ticks: u64,
    stopped: bool,
}

impl<'a> Worker<'a> {
    fn new(
        model: &'a Model,
        occ: &'a [Vec<u32>],
        limits: &'a SolveLimits,
        worker_index: usize,
        shared: &'a Shared,
        start: Instant,
    ) -> Self {
        let n = model.n_vars();
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for i in 0..n {
            let (l, h) = model.kind(super::VarId(i as u32)).bounds();
            lo.push(l);
            hi.push(h);
        }
        let order = branching_order(model, occ, limits.seed, worker_index);
        let mut pos = vec![0u32; n];
        for (p, &v) in order.iter().enumerate() {
            pos[v as usize] = p as u32;
        }
        Worker {
            model,
            occ,
            limits,
            shared,
            start,
            lo,
            hi,
            trail: Vec::new(),
            decisions: Vec::new(),
            queue: std::collections::VecDeque::new(),
            in_queue: vec![false; model.n_constraints() + 1],
            order,
            pos,
            head: 0,
            phase: vec![true; n],
            dep: vec![Levels::empty(); n],
            cause: None,
            cause_base: Levels::empty(),
            cause_cid: NO_CULPRIT,
            activity: vec![0.0; n],
            activity_inc: 1.0,
            stats: SolveStats::default(),
            best: None,
            cut_bound: None,
            conflicts_since_restart: 0,
            restart_index: 1,
            restart_budget: LUBY_UNIT,
            ticks: 0,
            stopped: false,
        }
    }

    fn run(mut self) -> WorkerOutcome {
        for cid in 0..self.model.n_constraints() {
            self.enqueue(cid as u32);
        }
        if self.propagate().is_err() {
            if self.stopped {
                return self.finish(false);
            }
            self.shared.stop.store(true, Ordering::SeqCst);
            return self.finish(true);
        }
        loop {
            if self.stopped || self.should_stop() {
                return self.finish(false);
            }
            let outcome = match self.pick_var() {
                Some(var) => {
                    self.stats.decisions += 1;
                    let value =
                        if matches!(self.model.kind(super::VarId(var as u32)), VarKind::Bool) {
                            i64::from(self.phase[var])
                        } else {
                            self.lo[var]
                        };
                    let level = self.decisions.len() as u32;
                    self.decisions.push(Decision {
                        var,
                        value,
                        trail_mark: self.trail.len(),
                        flipped: false,
                        conflict_acc: Levels::empty(),
                    });
                    self.dep[var] = Levels::single(level);
                    match self.assign_decided(var, value) {
                        Ok(()) => self.propagate().err(),
                        Err(conflict) => Some(conflict),
                    }
                }
                None => {
                    // Complete assignment.
                    if !self.record_solution() {
                        return self.finish(false);
                    }
                    Some(Conflict(Levels::Full))
                }
            };
            if let Some(conflict) = outcome {
                if self.stopped {
                    return self.finish(false);
                }
                if !self.backjump(conflict) {
                    self.shared.stop.store(true, Ordering::SeqCst);
                    return self.finish(true);
                }
            }
        }
    }

    fn finish(mut self, exhausted: bool) -> WorkerOutcome {
        self.stats.wall = self.start.elapsed();
        WorkerOutcome { exhausted, best: self.best.take(), stats: self.stats }
    }

    /// Stores the current full assignment as the incumbent. Returns false
    /// when the search is done (feasibility problems stop at the first
    /// solution).
    fn record_solution(&mut self) -> bool {
        let assignment = self.lo.clone();
        let violated = self.model.verify_assignment(&assignment);
        assert!(
            violated.is_empty() && self.model.in_domain(&assignment),
            "solver produced an invalid assignment; violated constraints: {violated:?}"
        );
        match self.model.eval_objective(&assignment) {
            None => {
                self.best = Some((0, assignment));
                self.shared.stop.store(true, Ordering::SeqCst);
                false
            }
            Some(obj) => {
                let improved = self.best.as_ref().map_or(true, |(b, _)| obj > *b);
                if improved {
                    self.best = Some((obj, assignment));
                    self.stats.incumbent_objectives.push(obj);
                    self.shared.best_obj.fetch_max(obj, Ordering::SeqCst);
                }
                self.refresh_cut();
                true
            }
        }
    }

    fn refresh_cut(&mut self) {
        let global = self.shared.best_obj.load(Ordering::SeqCst);
        let local = self.best.as_ref().map_or(i64::MIN, |(b, _)| *b);
        let bound = global.max(local);
        if bound > i64::MIN {
            let new_cut = bound + 1;
            if self.cut_bound != Some(new_cut) {
                self.cut_bound = Some(new_cut);
                self.enqueue(self.model.n_constraints() as u32);
            }
        }
    }

    /// Resolves a conflict: jumps to the deepest decision level in its
    /// dependency set, flips there, or propagates the exhaustion upward.
    /// Returns false when the whole search space is exhausted.
    fn backjump(&mut self, conflict: Conflict) -> bool {
        let mut conflict = conflict.0;
        loop {
            if self.stopped {
                return true;
            }
            self.stats.conflicts += 1;
            self.conflicts_since_restart += 1;
            if self.conflicts_since_restart >= self.restart_budget && self.decisions.len() > 1 {
                self.restart();
                return true;
            }
            // A conflict that depends on no decision refutes the root.
            if conflict.is_empty_set() {
                self.pop_decisions_above(0);
                return false;
            }
            let target = match conflict.deepest() {
                Some(level) => level as usize,
                // Unknown dependencies: chronological, the deepest level.
                None => match self.decisions.len().checked_sub(1) {
                    Some(level) => level,
                    None => return false,
                },
            };
            // Decisions deeper than the target cannot resolve this conflict.
            self.pop_decisions_above(target + 1);
            let Some(decision) = self.decisions.last_mut() else {
                return false;
            };
            conflict.remove(target as u32);
            decision.conflict_acc.union_with(&conflict);
            if decision.flipped {
                // Both branches dead: the whole level fails for its
                // accumulated reasons.
                conflict = decision.conflict_acc.clone();
                let mark = decision.trail_mark;
                self.undo_to(mark);
                self.decisions.pop();
                continue;
            }
            decision.flipped = true;
            let (var, value, mark) = (decision.var, decision.value, decision.trail_mark);
            let flip_dep = decision.conflict_acc.clone();
            self.undo_to(mark);
            self.clear_queue();
            self.dep[var] = flip_dep;
            let flip = if matches!(self.model.kind(super::VarId(var as u32)), VarKind::Bool) {
                self.assign_decided(var, 1 - value)
            } else {
                self.set_lo(var, value + 1).map_err(|culprit| self.culprit_conflict(culprit))
            };
            match flip {
                Err(new_conflict) => {
                    // The flip itself is impossible: the level is exhausted
                    // for the accumulated reasons plus whatever blocked the
                    // complement value.
                    let decision = self.decisions.last().unwrap();
                    let mut both = decision.conflict_acc.clone();
                    both.union_with(&new_conflict.0);
                    let mark = decision.trail_mark;
                    self.undo_to(mark);
                    self.decisions.pop();
                    conflict = both;
                    continue;
                }
                Ok(()) => {
                    if self.cut_bound.is_some() {
                        self.enqueue(self.model.n_constraints() as u32);
                    }
                    match self.propagate() {
                        Ok(()) => return true,
                        Err(new_conflict) => {
                            if self.stopped {
                                return true;
                            }
                            conflict = new_conflict.0;
                            continue;
                        }
                    }
                }
            }
        }
    }

    fn pop_decisions_above(&mut self, keep: usize) {
        while self.decisions.len() > keep {
            let d = self.decisions.pop().unwrap();
            self.undo_to(d.trail_mark);
        }
    }

    /// Assignment of a decided value; failures turn into conflicts against
    /// the existing bound's dependencies.
    fn assign_decided(&mut self, var: usize, value: i64) -> Result<(), Conflict> {
        self.cause = None;
        self.cause_cid = NO_CULPRIT;
        self.assign(var, value).map_err(|culprit| self.culprit_conflict(culprit))
    }

    fn culprit_conflict(&self, culprit: u32) -> Conflict {
        let mut levels = Levels::empty();
        self.union_var_dep(&mut levels, culprit as usize);
        Conflict(levels)
    }

    /// Accumulates the dependency levels of a variable's current bounds.
    fn union_var_dep(&self, acc: &mut Levels, var: usize) {
        if acc.is_full() {
            return;
        }
        match self.model.kind(super::VarId(var as u32)) {
            VarKind::Bool => {
                if self.lo[var] == self.hi[var] {
                    acc.union_with(&self.dep[var]);
                }
            }
            VarKind::Int { lo, hi } => {
                if self.lo[var] != lo || self.hi[var] != hi {
                    *acc = Levels::Full;
                }
            }
        }
    }

    /// Dependency levels of a variable's current bounds.
    fn var_dep(&self, var: usize) -> Levels {
        match self.model.kind(super::VarId(var as u32)) {
            VarKind::Bool => {
                if self.lo[var] == self.hi[var] {
                    self.dep[var].clone()
                } else {
                    Levels::empty()
                }
            }
            // Integer bound changes are not tracked.
            VarKind::Int { lo, hi } => {
                if self.lo[var] == lo && self.hi[var] == hi {
                    Levels::empty()
                } else {
                    Levels::Full
                }
            }
        }
    }

    fn restart(&mut self) {
        let mark = self.decisions[0].trail_mark;
        self.undo_to(mark);
        self.decisions.clear();
        self.clear_queue();
        self.conflicts_since_restart = 0;
        self.restart_index += 1;
        self.restart_budget = LUBY_UNIT * luby(self.restart_index);
        self.stats.restarts += 1;
        self.resort_order();
        if self.cut_bound.is_some() {
            self.enqueue(self.model.n_constraints() as u32);
        }
    }

    /// Re-sorts the branching order by (priority, conflict activity); the
    /// static occurrence score stays as the tie-break.
    fn resort_order(&mut self) {
        let model = self.model;
        let occ = self.occ;
        let activity = &self.activity;
        self.order.sort_by(|&a, &b| {
            let (a, b) = (a as usize, b as usize);
            let key = |i: usize| {
                let var = super::VarId(i as u32);
                let class = u8::from(matches!(model.kind(var), VarKind::Int { .. }));
                (-model.branch_priority(var), class)
            };
            key(a)
                .cmp(&key(b))
                .then(activity[b].total_cmp(&activity[a]))
                .then(occ[b].len().cmp(&occ[a].len()))
                .then(a.cmp(&b))
        });
        for (p, &v) in self.order.iter().enumerate() {
            self.pos[v as usize] = p as u32;
        }
        self.head = 0;
    }

    fn clear_queue(&mut self) {
        while let Some(cid) = self.queue.pop_front() {
            self.in_queue[cid as usize] = false;
        }
    }

    fn should_stop(&mut self) -> bool {
        if self.stopped {
            return true;
        }
        if self.shared.stop.load(Ordering::Relaxed) {
            self.stopped = true;
            return true;
        }
        if let Some(limit) = self.limits.time_limit {
            if self.start.elapsed() >= limit {
                self.stopped = true;
                return true;
            }
        }
        false
    }

    fn tick(&mut self) -> Result<(), ()> {
        if self.stopped {
            return Err(());
        }
        self.ticks += 1;
        if self.ticks & TICK_MASK == 0 && self.should_stop() {
            return Err(());
        }
        Ok(())
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (var, old_lo, old_hi) = self.trail.pop().unwrap();
            let v = var as usize;
            self.lo[v] = old_lo;
            self.hi[v] = old_hi;
            let p = self.pos[v] as usize;
            if p < self.head {
                self.head = p;
            }
        }
    }

    fn pick_var(&mut self) -> Option<usize> {
        while self.head < self.order.len() {
            let v = self.order[self.head] as usize;
            if self.lo[v] != self.hi[v] {
                return Some(v);
            }
            self.head += 1;
        }
        None
    }

    fn enqueue(&mut self, cid: u32) {
        if !self.in_queue[cid as usize] {
            self.in_queue[cid as usize] = true;
            self.queue.push_back(cid);
        }
    }

    fn wake(&mut self, var: usize) {
        let occ = self.occ;
        for &cid in &occ[var] {
            if !self.in_queue[cid as usize] {
                self.in_queue[cid as usize] = true;
                self.queue.push_back(cid);
            }
        }
    }

    /// Dependency set of the current inference: what the propagator set, or
    /// lazily the union over every variable the constraint reads.
    fn current_cause(&mut self) -> Levels {
        if let Some(cause) = &self.cause {
            return cause.clone();
        }
        let mut cause = if self.cause_cid == NO_CULPRIT {
            Levels::Full
        } else {
            self.constraint_dep(self.cause_cid)
        };
        cause.union_with(&self.cause_base.clone());
        self.cause = Some(cause.clone());
        cause
    }

    /// Pins the dependency set of the inferences the propagator is about to
    /// make (combined with the constraint-wide base).
    fn set_cause(&mut self, mut levels: Levels) {
        levels.union_with(&self.cause_base.clone());
        self.cause = Some(levels);
    }

    fn clear_cause(&mut self) {
        self.cause = None;
    }

    /// Dependencies of the terms that restrict the relevant side of a
    /// linear sum: the lower side (minimum) for `upper = true`, the upper
    /// side (maximum) otherwise. Unrestricted variables contribute nothing.
    fn linear_cause(&self, terms: &[(i64, super::VarId)], upper: bool) -> Levels {
        let mut acc = Levels::empty();
        for &(c, v) in terms {
            let i = v.index();
            let (dlo, dhi) = self.model.kind(v).bounds();
            let restrictive = if upper == (c > 0) { self.lo[i] > dlo } else { self.hi[i] < dhi };
            if restrictive {
                self.union_var_dep(&mut acc, i);
                if acc.is_full() {
                    break;
                }
            }
        }
        acc
    }

    fn constraint_dep(&self, cid: u32) -> Levels {
        let model = self.model;
        let mut acc = Levels::empty();
        macro_rules! add {
            ($v:expr) => {
                if acc.is_full() {
                    return Levels::Full;
                } else {
                    self.union_var_dep(&mut acc, $v.index());
                }
            };
        }
        if cid as usize == model.n_constraints() {
            if let Some(obj) = model.objective() {
                for (_, v) in obj {
                    add!(v);
                }
            }
            return acc;
        }
        match &model.constraints()[cid as usize] {
            Constraint::LinearEq { terms, .. } | Constraint::LinearLe { terms, .. } => {
                for (_, v) in terms {
                    add!(v);
                }
            }
            Constraint::ExactlyOne { vars } => {
                for v in vars {
                    add!(v);
                }
            }
            Constraint::Implies { guard, clamps } => {
                add!(guard.var);
                for (v, _, _) in clamps {
                    add!(v);
                }
            }
            Constraint::ReifiedLinear { guard, terms, .. } => {
                add!(guard.var);
                for (_, v) in terms {
                    add!(v);
                }
            }
            Constraint::MapDomain { int_var, indicators } => {
                add!(int_var);
                for v in indicators {
                    add!(v);
                }
            }
            Constraint::Choice { selectors, clamps } => {
                for v in selectors {
                    add!(v);
                }
                for list in clamps {
                    for (v, _, _) in list {
                        add!(v);
                    }
                }
            }
            Constraint::LexLe { a, b } => {
                for v in a.iter().chain(b) {
                    add!(v);
                }
            }
        }
        acc
    }

    /// Records the dependency of a boolean that just became fixed by the
    /// currently propagating constraint.
    fn note_fixed(&mut self, var: usize) {
        let cause = self.current_cause();
        self.dep[var] = cause;
    }

    fn set_lo(&mut self, var: usize, new: i64) -> Result<(), u32> {
        if new <= self.lo[var] {
            return Ok(());
        }
        if new > self.hi[var] {
            return Err(var as u32);
        }
        self.trail.push((var as u32, self.lo[var], self.hi[var]));
        self.lo[var] = new;
        if self.lo[var] == self.hi[var]
            && matches!(self.model.kind(super::VarId(var as u32)), VarKind::Bool)
        {
            self.phase[var] = new == 1;
            if self.cause_cid != NO_CULPRIT {
                self.note_fixed(var);
            }
        }
        self.wake(var);
        Ok(())
    }

    fn set_hi(&mut self, var: usize, new: i64) -> Result<(), u32> {
        if new >= self.hi[var] {
            return Ok(());
        }
        if new < self.lo[var] {
            return Err(var as u32);
        }
        self.trail.push((var as u32, self.lo[var], self.hi[var]));
        self.hi[var] = new;
        if self.lo[var] == self.hi[var]
            && matches!(self.model.kind(super::VarId(var as u32)), VarKind::Bool)
        {
            self.phase[var] = new == 1;
            if self.cause_cid != NO_CULPRIT {
                self.note_fixed(var);
            }
        }
        self.wake(var);
        Ok(())
    }

    fn assign(&mut self, var: usize, value: i64) -> Result<(), u32> {
        self.set_lo(var, value)?;
        self.set_hi(var, value)
    }

    fn lit_true(&self, lit: Lit) -> bool {
        let v = lit.var.index();
        if lit.positive {
            self.lo[v] == 1
        } else {
            self.hi[v] == 0
        }
    }

    fn lit_false(&self, lit: Lit) -> bool {
        let v = lit.var.index();
        if lit.positive {
            self.hi[v] == 0
        } else {
            self.lo[v] == 1
        }
    }

    fn force_lit_false(&mut self, lit: Lit) -> Result<(), u32> {
        let v = lit.var.index();
        if lit.positive {
            self.set_hi(v, 0)
        } else {
            self.set_lo(v, 1)
        }
    }

    fn propagate(&mut self) -> Result<(), Conflict> {
        while let Some(cid) = self.queue.pop_front() {
            self.in_queue[cid as usize] = false;
            self.stats.propagations += 1;
            if self.tick().is_err() {
                return Err(Conflict(Levels::Full));
            }
            self.cause = None;
            self.cause_base = Levels::empty();
            self.cause_cid = cid;
            if let Err(culprit) = self.propagate_one(cid) {
                self.bump_conflict(cid);
                let mut levels = self.current_cause();
                if culprit != NO_CULPRIT {
                    self.union_var_dep(&mut levels, culprit as usize);
                }
                self.cause = None;
                self.cause_cid = NO_CULPRIT;
                return Err(Conflict(levels));
            }
        }
        self.cause = None;
        self.cause_cid = NO_CULPRIT;
        Ok(())
    }

    fn propagate_one(&mut self, cid: u32) -> Result<(), u32> {
        let model = self.model;
        if cid as usize == model.n_constraints() {
            if let (Some(bound), Some(obj)) = (self.cut_bound, model.objective()) {
                self.propagate_ge(obj, bound)?;
            }
            return Ok(());
        }
        match &model.constraints()[cid as usize] {
            Constraint::LinearEq { terms, rhs } => {
                self.propagate_le(terms, *rhs)?;
                self.propagate_ge(terms, *rhs)?;
            }
            Constraint::LinearLe { terms, rhs } => self.propagate_le(terms, *rhs)?,
            Constraint::ExactlyOne { vars } => self.propagate_exactly_one(vars)?,
            Constraint::Implies { guard, clamps } => self.propagate_implies(*guard, clamps)?,
            Constraint::ReifiedLinear { guard, le, terms, rhs } => {
                self.propagate_reified(*guard, *le, terms, *rhs)?
            }
            Constraint::MapDomain { int_var, indicators } => {
                let (base, _) = model.kind(*int_var).bounds();
                self.propagate_map_domain(int_var.index(), base, indicators)?
            }
            Constraint::Choice { selectors, clamps } => self.propagate_choice(selectors, clamps)?,
            Constraint::LexLe { a, b } => self.propagate_lex(a, b)?,
        }
        Ok(())
    }

    /// Conflict-driven activity: variables of a failing constraint gain
    /// weight; restarts re-sort the branching order by it, so repeatedly
    /// conflicting subproblems migrate toward the top of the search tree.
    fn bump_conflict(&mut self, cid: u32) {
        if self.stopped || cid as usize >= self.model.n_constraints() {
            return;
        }
        let model = self.model;
        let inc = self.activity_inc;
        let activity = &mut self.activity;
        let mut bump = |var: super::VarId| {
            activity[var.index()] += inc;
        };
        match &model.constraints()[cid as usize] {
            Constraint::LinearEq { terms, .. } | Constraint::LinearLe { terms, .. } => {
                for (_, v) in terms {
                    bump(*v);
                }
            }
            Constraint::ExactlyOne { vars } => {
                for v in vars {
                    bump(*v);
                }
            }
            Constraint::Implies { guard, clamps } => {
                bump(guard.var);
                for (v, _, _) in clamps {
                    bump(*v);
                }
            }
            Constraint::ReifiedLinear { guard, terms, .. } => {
                bump(guard.var);
                for (_, v) in terms {
                    bump(*v);
                }
            }
            Constraint::MapDomain { int_var, indicators } => {
                bump(*int_var);
                for v in indicators {
                    bump(*v);
                }
            }
            Constraint::Choice { selectors, clamps } => {
                for v in selectors {
                    bump(*v);
                }
                for list in clamps {
                    for (v, _, _) in list {
                        bump(*v);
                    }
                }
            }
            Constraint::LexLe { a, b } => {
                for v in a.iter().chain(b) {
                    bump(*v);
                }
            }
        }
        self.activity_inc /= 0.95;
        if self.activity_inc > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.activity_inc *= 1e-100;
        }
    }

    fn min_sum(&self, terms: &[(i64, super::VarId)]) -> i128 {
        terms
            .iter()
            .map(|&(c, v)| {
                let i = v.index();
                c as i128 * if c > 0 { self.lo[i] } else { self.hi[i] } as i128
            })
            .sum()
    }

    fn max_sum(&self, terms: &[(i64, super::VarId)]) -> i128 {
        terms
            .iter()
            .map(|&(c, v)| {
                let i = v.index();
                c as i128 * if c > 0 { self.hi[i] } else { self.lo[i] } as i128
            })
            .sum()
    }

    /// Bounds propagation for `sum(terms) <= rhs`.
    fn propagate_le(&mut self, terms: &[(i64, super::VarId)], rhs: i64) -> Result<(), u32> {
        self.set_cause(self.linear_cause(terms, true));
        let min = self.min_sum(terms);
        if min > rhs as i128 {
            return Err(NO_CULPRIT);
        }
        let slack = rhs as i128 - min;
        for &(c, v) in terms {
            let i = v.index();
            if c > 0 {
                let new_hi = self.lo[i] as i128 + slack / c as i128;
                if new_hi < self.hi[i] as i128 {
                    self.set_hi(i, new_hi as i64)?;
                }
            } else if c < 0 {
                let new_lo = self.hi[i] as i128 - slack / (-c) as i128;
                if new_lo > self.lo[i] as i128 {
                    self.set_lo(i, new_lo as i64)?;
                }
            }
        }
        Ok(())
    }

    /// Bounds propagation for `sum(terms) >= rhs`.
    fn propagate_ge(&mut self, terms: &[(i64, super::VarId)], rhs: i64) -> Result<(), u32> {
        self.set_cause(self.linear_cause(terms, false));
        let max = self.max_sum(terms);
        if max < rhs as i128 {
            return Err(NO_CULPRIT);
        }
        let slack = max - rhs as i128;
        for &(c, v) in terms {
            let i = v.index();
            if c > 0 {
                let new_lo = self.hi[i] as i128 - slack / c as i128;
                if new_lo > self.lo[i] as i128 {
                    self.set_lo(i, new_lo as i64)?;
                }
            } else if c < 0 {
                let new_hi = self.lo[i] as i128 + slack / (-c) as i128;
                if new_hi < self.hi[i] as i128 {
                    self.set_hi(i, new_hi as i64)?;
                }
            }
        }
        Ok(())
    }

    fn propagate_exactly_one(&mut self, vars: &[super::VarId]) -> Result<(), u32> {
        let mut n_true = 0usize;
        let mut first_true = 0usize;
        let mut n_open = 0usize;
        let mut last_open = 0usize;
        for v in vars {
            let i = v.index();
            if self.lo[i] == 1 {
                if n_true == 1 {
                    let mut cause = Levels::empty();
                    self.union_var_dep(&mut cause, first_true);
                    self.union_var_dep(&mut cause, i);
                    self.set_cause(cause);
                    return Err(NO_CULPRIT);
                }
                n_true = 1;
                first_true = i;
            } else if self.hi[i] == 1 {
                n_open += 1;
                last_open = i;
            }
        }
        if n_true == 1 {
            let mut cause = Levels::empty();
            self.union_var_dep(&mut cause, first_true);
            self.set_cause(cause);
            for v in vars {
                let i = v.index();
                if self.lo[i] != 1 {
                    self.set_hi(i, 0)?;
                }
            }
        } else {
            match n_open {
                0 | 1 => {
                    // Forced or dead: both follow from every other
                    // alternative being off.
                    let mut cause = Levels::empty();
                    for v in vars {
                        let i = v.index();
                        if self.hi[i] == 0 {
                            self.union_var_dep(&mut cause, i);
                        }
                    }
                    self.set_cause(cause);
                    if n_open == 0 {
                        return Err(NO_CULPRIT);
                    }
                    self.set_lo(last_open, 1)?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn propagate_implies(
        &mut self,
        guard: Lit,
        clamps: &[(super::VarId, i64, i64)],
    ) -> Result<(), u32> {
        if self.lit_true(guard) {
            let mut cause = Levels::empty();
            self.union_var_dep(&mut cause, guard.var.index());
            self.set_cause(cause);
            for &(v, lo, hi) in clamps {
                self.set_lo(v.index(), lo)?;
                self.set_hi(v.index(), hi)?;
            }
        } else if !self.lit_false(guard) {
            let blocked = clamps.iter().find(|&&(v, lo, hi)| {
                let i = v.index();
                hi < self.lo[i] || lo > self.hi[i]
            });
            if let Some(&(v, _, _)) = blocked {
                let mut cause = Levels::empty();
                self.union_var_dep(&mut cause, v.index());
                self.set_cause(cause);
                self.force_lit_false(guard)?;
            }
        }
        Ok(())
    }

    fn propagate_reified(
        &mut self,
        guard: Lit,
        le: bool,
        terms: &[(i64, super::VarId)],
        rhs: i64,
    ) -> Result<(), u32> {
        if self.lit_true(guard) {
            let mut base = Levels::empty();
            self.union_var_dep(&mut base, guard.var.index());
            self.cause_base = base;
            self.propagate_le(terms, rhs)?;
            if !le {
                self.propagate_ge(terms, rhs)?;
            }
        } else if !self.lit_false(guard) {
            if self.min_sum(terms) > rhs as i128 {
                self.set_cause(self.linear_cause(terms, true));
                self.force_lit_false(guard)?;
            } else if !le && self.max_sum(terms) < rhs as i128 {
                self.set_cause(self.linear_cause(terms, false));
                self.force_lit_false(guard)?;
            }
        }
        Ok(())
    }

    fn propagate_map_domain(
        &mut self,
        x: usize,
        base: i64,
        indicators: &[super::VarId],
    ) -> Result<(), u32> {
        // Indicators outside the integer's current range are off.
        for (j, v) in indicators.iter().enumerate() {
            let value = base + j as i64;
            if value < self.lo[x] || value > self.hi[x] {
                self.set_hi(v.index(), 0)?;
            }
        }
        let mut true_at = None;
        for (j, v) in indicators.iter().enumerate() {
            if self.lo[v.index()] == 1 {
                if true_at.is_some() {
                    return Err(NO_CULPRIT);
                }
                true_at = Some(j);
            }
        }
        if let Some(j) = true_at {
            self.assign(x, base + j as i64)?;
            for (k, v) in indicators.iter().enumerate() {
                if k != j {
                    self.set_hi(v.index(), 0)?;
                }
            }
            return Ok(());
        }
        // Shrink the integer past leading/trailing false indicators.
        while self.lo[x] <= self.hi[x] {
            let j = (self.lo[x] - base) as usize;
            if self.hi[indicators[j].index()] == 0 {
                self.set_lo(x, self.lo[x] + 1)?;
            } else {
                break;
            }
        }
        while self.hi[x] >= self.lo[x] {
            let j = (self.hi[x] - base) as usize;
            if self.hi[indicators[j].index()] == 0 {
                self.set_hi(x, self.hi[x] - 1)?;
            } else {
                break;
            }
        }
        if self.lo[x] == self.hi[x] {
            let j = (self.lo[x] - base) as usize;
            self.set_lo(indicators[j].index(), 1)?;
            for (k, v) in indicators.iter().enumerate() {
                if k != j {
                    self.set_hi(v.index(), 0)?;
                }
            }
            return Ok(());
        }
        // The integer always takes some value, so exactly one indicator is 1.
        let mut n_open = 0usize;
        let mut last_open = 0usize;
        for v in indicators {
            if self.hi[v.index()] == 1 {
                n_open += 1;
                last_open = v.index();
            }
        }
        match n_open {
            0 => Err(NO_CULPRIT),
            1 => self.set_lo(last_open, 1),
            _ => Ok(()),
        }
    }

    fn propagate_choice(
        &mut self,
        selectors: &[super::VarId],
        clamps: &[Vec<(super::VarId, i64, i64)>],
    ) -> Result<(), u32> {
        // Kill open alternatives whose clamps no longer fit.
        for (s, list) in selectors.iter().zip(clamps) {
            let i = s.index();
            if self.lo[i] == 0 && self.hi[i] == 1 {
                let blocked = list.iter().find(|&&(v, lo, hi)| {
                    let vi = v.index();
                    hi < self.lo[vi] || lo > self.hi[vi]
                });
                if let Some(&(v, _, _)) = blocked {
                    let mut cause = Levels::empty();
                    self.union_var_dep(&mut cause, v.index());
                    self.set_cause(cause);
                    self.set_hi(i, 0)?;
                }
            }
        }
        let mut chosen = None;
        for (j, s) in selectors.iter().enumerate() {
            if self.lo[s.index()] == 1 {
                if let Some(first) = chosen {
                    let first: usize = first;
                    let mut cause = Levels::empty();
                    self.union_var_dep(&mut cause, selectors[first].index());
                    self.union_var_dep(&mut cause, s.index());
                    self.set_cause(cause);
                    return Err(NO_CULPRIT);
                }
                chosen = Some(j);
            }
        }
        if let Some(j) = chosen {
            let mut cause = Levels::empty();
            self.union_var_dep(&mut cause, selectors[j].index());
            self.set_cause(cause);
            for (k, s) in selectors.iter().enumerate() {
                if k != j {
                    self.set_hi(s.index(), 0)?;
                }
            }
            for &(v, lo, hi) in &clamps[j] {
                self.set_lo(v.index(), lo)?;
                self.set_hi(v.index(), hi)?;
            }
            return Ok(());
        }
        let open: Vec<usize> =
            (0..selectors.len()).filter(|&j| self.hi[selectors[j].index()] == 1).collect();
        if open.len() <= 1 {
            // Forced or dead: follows from every other alternative's death.
            let mut cause = Levels::empty();
            for s in selectors {
                let i = s.index();
                if self.hi[i] == 0 {
                    self.union_var_dep(&mut cause, i);
                }
            }
            self.set_cause(cause);
            let Some(&j) = open.first() else {
                return Err(NO_CULPRIT);
            };
            self.set_lo(selectors[j].index(), 1)?;
            for &(v, lo, hi) in &clamps[j] {
                self.set_lo(v.index(), lo)?;
                self.set_hi(v.index(), hi)?;
            }
            return Ok(());
        }
        // Union hull: a variable clamped by every open alternative can only
        // lie in the hull of those ranges, which narrowed because of the
        // dead alternatives.
        let mut hull_cause = Levels::empty();
        for s in selectors {
            let i = s.index();
            if self.hi[i] == 0 {
                self.union_var_dep(&mut hull_cause, i);
            }
        }
        self.set_cause(hull_cause);
        for &(v, first_lo, first_hi) in &clamps[open[0]] {
            let mut union_lo = first_lo;
            let mut union_hi = first_hi;
            let mut everywhere = true;
            for &j in &open[1..] {
                match clamps[j].iter().find(|&&(w, _, _)| w == v) {
                    Some(&(_, lo, hi)) => {
                        union_lo = union_lo.min(lo);
                        union_hi = union_hi.max(hi);
                    }
                    None => {
                        everywhere = false;
                        break;
                    }
                }
            }
            if everywhere {
                let vi = v.index();
                if union_lo > self.lo[vi] {
                    self.set_lo(vi, union_lo)?;
                }
                if union_hi < self.hi[vi] {
                    self.set_hi(vi, union_hi)?;
                }
            }
        }
        Ok(())
    }

    /// Lexicographic `a <= b`, most significant position first: walks the
    /// fixed-equal prefix and enforces `a <= b` pointwise at the first open
    /// position. Dependencies are the prefix fixings, so order violations
    /// conflict early and jump precisely.
    fn propagate_lex(&mut self, a: &[super::VarId], b: &[super::VarId]) -> Result<(), u32> {
        let mut cause = Levels::empty();
        for (va, vb) in a.iter().zip(b) {
            let (ia, ib) = (va.index(), vb.index());
            self.union_var_dep(&mut cause, ia);
            self.union_var_dep(&mut cause, ib);
            let a_fixed = self.lo[ia] == self.hi[ia];
            let b_fixed = self.lo[ib] == self.hi[ib];
            if a_fixed && b_fixed {
                match self.lo[ia].cmp(&self.lo[ib]) {
                    std::cmp::Ordering::Less => return Ok(()),
                    std::cmp::Ordering::Equal => continue,
                    std::cmp::Ordering::Greater => {
                        self.set_cause(cause);
                        return Err(NO_CULPRIT);
                    }
                }
            }
            // First position that is not fixed-equal: enforce a <= b here.
            if self.lo[ia] > self.hi[ib] {
                self.set_cause(cause);
                return Err(NO_CULPRIT);
            }
            self.set_cause(cause);
            self.set_hi(ia, self.hi[ib])?;
            self.set_lo(ib, self.lo[ia])?;
            return Ok(());
        }
        Ok(())
    }
}

/// Branching order: model-assigned priorities first; within a priority
/// level booleans come before integers, booleans by descending
/// constraint-occurrence count and integers by ascending declared domain
/// size; ties break toward the lowest variable index. Workers beyond the
/// first perturb the scores with a seeded hash for portfolio diversity.
fn branching_order(model: &Model, occ: &[Vec<u32>], seed: u64, worker: usize) -> Vec<u32> {
    let n = model.n_vars();
    let mut keys: Vec<(i32, u8, i64, u32)> = Vec::with_capacity(n);
    for i in 0..n {
        let var = super::VarId(i as u32);
        let mut score = occ[i].len() as i64;
        if worker > 0 {
            let h =
                splitmix64(seed ^ (worker as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i as u64);
            score += (h % (score.unsigned_abs() / 2 + 1)) as i64;
        }
        let priority = -model.branch_priority(var);
        match model.kind(var) {
            VarKind::Bool => keys.push((priority, 0, -score, i as u32)),
            VarKind::Int { lo, hi } => keys.push((priority, 1, hi - lo, i as u32)),
        }
    }
    keys.sort();
    keys.into_iter().map(|(_, _, _, i)| i).collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Luby restart sequence: 1, 1, 2, 1, 1, 2, 4, ...
fn luby(i: u64) -> u64 {
    let mut i = i;
    loop {
        let mut k = 1u64;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if (1u64 << k) - 1 == i {
            return 1u64 << (k - 1);
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Constraint, Lit, Model, SolveLimits, SolveStatus, VarId};
    use super::luby;

    #[test]
    fn luby_prefix_matches_reference() {
        let got: Vec<u64> = (1..=15).map(luby).collect();
        assert_eq!(got, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn branch_and_bound_maximizes() {
        // maximize x + 2y + 3z subject to x + y + z <= 2
        let mut m = Model::new();
        let x = m.add_bool();
        let y = m.add_bool();
        let z = m.add_bool();
        m.add_constraint(Constraint::LinearLe { terms: vec![(1, x), (1, y), (1, z)], rhs: 2 })
            .unwrap();
        m.set_objective(vec![(1, x), (2, y), (3, z)]).unwrap();
        let result = m.solve(&SolveLimits::default());
        assert_eq!(result.status, SolveStatus::Optimal);
        assert_eq!(result.objective, Some(5));
        let asg = result.assignment.unwrap();
        assert_eq!((asg[x.index()], asg[y.index()], asg[z.index()]), (0, 1, 1));
        // Incumbents never decrease.
        let incs = &result.stats.incumbent_objectives;
        assert!(incs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn reified_guard_forced_false_by_impossible_inner() {
        let mut m = Model::new();
        let g = m.add_bool();
        let x = m.add_int(3, 5).unwrap();
        // g -> x <= 2 is impossible, so g must be 0.
        m.add_constraint(Constraint::ReifiedLinear {
            guard: Lit::pos(g),
            le: true,
            terms: vec![(1, x)],
            rhs: 2,
        })
        .unwrap();
        m.add_constraint(Constraint::LinearEq { terms: vec![(1, x)], rhs: 4 }).unwrap();
        let result = m.solve(&SolveLimits::default());
        assert_eq!(result.status, SolveStatus::Optimal);
        let asg = result.assignment.unwrap();
        assert_eq!(asg[g.index()], 0);
        assert_eq!(asg[x.index()], 4);
    }

    #[test]
    fn map_domain_channels_both_ways() {
        let mut m = Model::new();
        let x = m.add_int(2, 5).unwrap();
        let inds: Vec<VarId> = (0..4).map(|_| m.add_bool()).collect();
        m.add_constraint(Constraint::MapDomain { int_var: x, indicators: inds.clone() }).unwrap();
        // Forbid 2, 3 and 5 through the indicators; x must become 4.
        for j in [0usize, 1, 3] {
            m.add_constraint(Constraint::LinearEq { terms: vec![(1, inds[j])], rhs: 0 }).unwrap();
        }
        let result = m.solve(&SolveLimits::default());
        assert_eq!(result.status, SolveStatus::Optimal);
        let asg = result.assignment.unwrap();
        assert_eq!(asg[x.index()], 4);
        assert_eq!(asg[inds[2].index()], 1);
    }

    #[test]
    fn choice_propagates_the_union_hull() {
        let mut m = Model::new();
        let a = m.add_bool();
        let b = m.add_bool();
        let x = m.add_bool();
        let y = m.add_bool();
        // Both alternatives force x = 1; they disagree on y.
        m.add_constraint(Constraint::Choice {
            selectors: vec![a, b],
            clamps: vec![vec![(x, 1, 1), (y, 0, 0)], vec![(x, 1, 1), (y, 1, 1)]],
        })
        .unwrap();
        let result = m.solve(&SolveLimits::default());
        assert_eq!(result.status, SolveStatus::Optimal);
        let asg = result.assignment.unwrap();
        assert_eq!(asg[x.index()], 1);
        assert_eq!(asg[a.index()] + asg[b.index()], 1);
    }

    #[test]
    fn fixed_seed_single_worker_is_deterministic() {
        let build = || {
            let mut m = Model::new();
            let vars: Vec<VarId> = (0..12).map(|_| m.add_bool()).collect();
            for chunk in vars.chunks(3) {
                m.add_constraint(Constraint::ExactlyOne { vars: chunk.to_vec() }).unwrap();
            }
            m.add_constraint(Constraint::LinearLe {
                terms: vars.iter().map(|&v| (1, v)).collect(),
                rhs: 4,
            })
            .unwrap();
            m.set_objective(vars.iter().enumerate().map(|(i, &v)| (i as i64, v)).collect())
                .unwrap();
            m
        };
        let limits = SolveLimits { seed: 7, ..Default::default() };
        let a = build().solve(&limits);
        let b = build().solve(&limits);
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective, Some(2 + 5 + 8 + 11));
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.stats.decisions, b.stats.decisions);
        assert_eq!(a.stats.conflicts, b.stats.conflicts);
    }

    #[test]
    fn multi_worker_finds_the_same_optimum() {
        let mut m = Model::new();
        let vars: Vec<VarId> = (0..10).map(|_| m.add_bool()).collect();
        m.add_constraint(Constraint::LinearLe {
            terms: vars.iter().map(|&v| (1, v)).collect(),
            rhs: 5,
        })
        .unwrap();
        m.set_objective(vars.iter().enumerate().map(|(i, &v)| (1 + i as i64, v)).collect())
            .unwrap();
        let single = m.solve(&SolveLimits::default());
        let multi = m.solve(&SolveLimits { workers: 4, seed: 3, ..Default::default() });
        assert_eq!(single.status, SolveStatus::Optimal);
        assert_eq!(multi.status, SolveStatus::Optimal);
        assert_eq!(single.objective, multi.objective);
    }
}
