//! Conflict-driven clause learning over propositional CNF.
//!
//! Two watched literals, first-UIP learning, non-chronological backjumping.
//! Decisions pick the lowest-index unassigned variable and try `false`
//! first, so runs are reproducible.

/// A literal: variable index times two, plus one when negated.
pub type Lit = u32;

pub fn lit(var: usize, positive: bool) -> Lit {
    ((var as u32) << 1) | u32::from(!positive)
}

pub fn var_of(l: Lit) -> usize {
    (l >> 1) as usize
}

pub fn negate(l: Lit) -> Lit {
    l ^ 1
}

fn is_positive(l: Lit) -> bool {
    l & 1 == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatOutcome {
    Sat,
    Unsat,
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct SatSolver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    assign: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    inconsistent: bool,
    pub conflicts: u64,
    pub decisions: u64,
}

impl SatSolver {
    pub fn new(num_vars: usize) -> Self {
        SatSolver {
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * num_vars],
            assign: vec![None; num_vars],
            level: vec![0; num_vars],
            reason: vec![None; num_vars],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            inconsistent: false,
            conflicts: 0,
            decisions: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.assign.len()
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    pub fn value(&self, l: Lit) -> Option<bool> {
        self.assign[var_of(l)].map(|v| v == is_positive(l))
    }

    /// Current assignment of a variable (after `Sat`, every variable is set).
    pub fn var_value(&self, var: usize) -> bool {
        self.assign[var].unwrap_or(false)
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = var_of(l);
        self.assign[v] = Some(is_positive(l));
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Undoes every assignment above `level`.
    pub fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let keep = self.trail_lim[level as usize];
        for l in self.trail.drain(keep..) {
            let v = var_of(l);
            self.assign[v] = None;
            self.reason[v] = None;
        }
        self.trail_lim.truncate(level as usize);
        self.qhead = self.qhead.min(self.trail.len());
    }

    /// Adds a clause; must be called at decision level 0. Returns `false`
    /// once the clause set is known to be unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        assert_eq!(self.decision_level(), 0, "clauses are added at the root");
        if self.inconsistent {
            return false;
        }
        let mut c: Vec<Lit> = Vec::with_capacity(lits.len());
        for &l in lits {
            match self.value(l) {
                Some(true) => return true,
                Some(false) => {}
                None => {
                    if c.contains(&negate(l)) {
                        return true;
                    }
                    if !c.contains(&l) {
                        c.push(l);
                    }
                }
            }
        }
        match c.len() {
            0 => {
                self.inconsistent = true;
                false
            }
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.inconsistent = true;
                }
                !self.inconsistent
            }
            _ => {
                let idx = self.clauses.len();
                self.watches[c[0] as usize].push(idx);
                self.watches[c[1] as usize].push(idx);
                self.clauses.push(c);
                true
            }
        }
    }

    /// Unit propagation; returns a falsified clause on conflict.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = negate(p);
            let watchers = std::mem::take(&mut self.watches[false_lit as usize]);
            let mut kept = Vec::with_capacity(watchers.len());
            let mut conflict = None;
            let mut iter = watchers.into_iter();
            for ci in iter.by_ref() {
                let clause = &mut self.clauses[ci];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                if self.assign[var_of(first)].map(|v| v == is_positive(first)) == Some(true) {
                    kept.push(ci);
                    continue;
                }
                let replacement = (2..clause.len()).find(|&k| {
                    let l = clause[k];
                    self.assign[var_of(l)].map(|v| v == is_positive(l)) != Some(false)
                });
                if let Some(k) = replacement {
                    clause.swap(1, k);
                    let new_watch = clause[1];
                    self.watches[new_watch as usize].push(ci);
                    continue;
                }
                kept.push(ci);
                match self.value(first) {
                    Some(false) => {
                        conflict = Some(ci);
                        break;
                    }
                    _ => self.enqueue(first, Some(ci)),
                }
            }
            kept.extend(iter);
            self.watches[false_lit as usize].extend(kept);
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    /// First-UIP conflict analysis: the learnt clause (asserting literal
    /// first) and the level to jump back to.
    fn analyze(&self, conflict: usize) -> (Vec<Lit>, u32) {
        let mut seen = vec![false; self.num_vars()];
        let mut learnt: Vec<Lit> = vec![0];
        let mut pending = 0usize;
        let mut clause = conflict;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        loop {
            let lits = &self.clauses[clause];
            let start = usize::from(p.is_some());
            for &q in &lits[start..] {
                let v = var_of(q);
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    if self.level[v] == self.decision_level() {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if seen[var_of(self.trail[idx])] {
                    break;
                }
            }
            let lit_p = self.trail[idx];
            seen[var_of(lit_p)] = false;
            pending -= 1;
            p = Some(lit_p);
            if pending == 0 {
                break;
            }
            clause = self.reason[var_of(lit_p)].expect("implied literal has a reason");
        }
        learnt[0] = negate(p.unwrap());
        let mut back = 0;
        if learnt.len() > 1 {
            let (mi, _) = learnt[1..]
                .iter()
                .enumerate()
                .max_by_key(|(_, l)| self.level[var_of(**l)])
                .unwrap();
            learnt.swap(1, mi + 1);
            back = self.level[var_of(learnt[1])];
        }
        (learnt, back)
    }

    fn pick_branch(&self) -> Option<usize> {
        self.assign.iter().position(Option::is_none)
    }

    /// Searches for a satisfying assignment. `budget` counts conflicts and
    /// decisions and is decremented in place.
    pub fn solve(&mut self, budget: &mut u64) -> SatOutcome {
        if self.inconsistent {
            return SatOutcome::Unsat;
        }
        loop {
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                if self.decision_level() == 0 {
                    self.inconsistent = true;
                    return SatOutcome::Unsat;
                }
                if *budget == 0 {
                    return SatOutcome::Exhausted;
                }
                *budget -= 1;
                let (learnt, back) = self.analyze(conflict);
                self.backtrack(back);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let idx = self.clauses.len();
                    self.watches[learnt[0] as usize].push(idx);
                    self.watches[learnt[1] as usize].push(idx);
                    let asserting = learnt[0];
                    self.clauses.push(learnt);
                    self.enqueue(asserting, Some(idx));
                }
                continue;
            }
            let Some(v) = self.pick_branch() else { return SatOutcome::Sat };
            if *budget == 0 {
                return SatOutcome::Exhausted;
            }
            *budget -= 1;
            self.decisions += 1;
            self.trail_lim.push(self.trail.len());
            self.enqueue(lit(v, false), None);
        }
    }
}
