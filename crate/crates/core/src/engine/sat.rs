//! A compact CDCL solver: two watched literals, first-UIP clause learning,
//! VSIDS with phase saving, and Luby restarts. It stays usable after a
//! satisfiable answer, so callers can add blocking clauses and solve again.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Lit(u32);

impl Lit {
    fn from_dimacs(l: i32) -> Self {
        let v = l.unsigned_abs() - 1;
        Lit(v * 2 + (l < 0) as u32)
    }

    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    fn negative(self) -> bool {
        self.0 & 1 == 1
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    True,
    False,
    Unset,
}

fn lit_value(assigns: &[Value], l: Lit) -> Value {
    match (assigns[l.var()], l.negative()) {
        (Value::Unset, _) => Value::Unset,
        (Value::True, false) | (Value::False, true) => Value::True,
        _ => Value::False,
    }
}

/// Max-heap of variables keyed by activity.
#[derive(Debug, Default)]
struct Heap {
    items: Vec<usize>,
    pos: Vec<Option<usize>>,
}

impl Heap {
    fn contains(&self, v: usize) -> bool {
        self.pos[v].is_some()
    }

    fn swap(&mut self, i: usize, j: usize) {
        self.items.swap(i, j);
        self.pos[self.items[i]] = Some(i);
        self.pos[self.items[j]] = Some(j);
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if act[self.items[i]] <= act[self.items[parent]] {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < self.items.len() && act[self.items[l]] > act[self.items[best]] {
                best = l;
            }
            if r < self.items.len() && act[self.items[r]] > act[self.items[best]] {
                best = r;
            }
            if best == i {
                return;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.items.push(v);
        let i = self.items.len() - 1;
        self.pos[v] = Some(i);
        self.up(i, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        if self.items.is_empty() {
            return None;
        }
        let last = self.items.len() - 1;
        self.swap(0, last);
        let v = self.items.pop().unwrap();
        self.pos[v] = None;
        if !self.items.is_empty() {
            self.down(0, act);
        }
        Some(v)
    }
}

fn luby(mut i: u64) -> u64 {
    // i-th element (0-based) of 1,1,2,1,1,2,4,...
    let (mut size, mut seq) = (1u64, 0u32);
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1 << seq
}

#[derive(Debug)]
pub struct Solver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    assigns: Vec<Value>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    var_inc: f64,
    heap: Heap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    ok: bool,
    budget: Option<u64>,
    pub conflicts: u64,
    pub decisions: u64,
}

impl Solver {
    pub fn new(num_vars: u32) -> Self {
        let n = num_vars as usize;
        let mut s = Solver {
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            assigns: vec![Value::Unset; n],
            level: vec![0; n],
            reason: vec![None; n],
            polarity: vec![true; n],
            activity: vec![0.0; n],
            var_inc: 1.0,
            heap: Heap {
                items: Vec::new(),
                pos: vec![None; n],
            },
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: vec![false; n],
            ok: true,
            budget: None,
            conflicts: 0,
            decisions: 0,
        };
        for v in 0..n {
            s.heap.insert(v, &s.activity);
        }
        s
    }

    /// Caps the conflicts a single [`Solver::solve`] call may spend.
    pub fn set_budget(&mut self, budget: Option<u64>) {
        self.budget = budget;
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var();
        self.assigns[v] = if l.negative() { Value::False } else { Value::True };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn backtrack(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.trail_lim[level];
        for i in (start..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var();
            self.polarity[v] = !l.negative();
            self.assigns[v] = Value::Unset;
            self.reason[v] = None;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(level);
        self.qhead = start;
    }

    fn attach(&mut self, lits: Vec<Lit>) -> usize {
        let ci = self.clauses.len();
        self.watches[lits[0].index()].push(ci);
        self.watches[lits[1].index()].push(ci);
        self.clauses.push(lits);
        ci
    }

    /// Adds a clause of DIMACS literals. Returns false once the formula is
    /// known to be unsatisfiable.
    pub fn add_clause(&mut self, dimacs: &[i32]) -> bool {
        if !self.ok {
            return false;
        }
        self.backtrack(0);
        let mut lits: Vec<Lit> = dimacs.iter().map(|l| Lit::from_dimacs(*l)).collect();
        lits.sort_by_key(|l| l.0);
        lits.dedup();
        let mut kept = Vec::with_capacity(lits.len());
        for (i, l) in lits.iter().enumerate() {
            if i + 1 < lits.len() && lits[i + 1] == !*l {
                return true; // tautology
            }
            match lit_value(&self.assigns, *l) {
                Value::True => return true,
                Value::False => {}
                Value::Unset => kept.push(*l),
            }
        }
        match kept.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(kept[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(kept);
            }
        }
        self.ok
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.index()]);
            let (mut i, mut j) = (0, 0);
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                let clause = &mut self.clauses[ci];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                if lit_value(&self.assigns, first) == Value::True {
                    ws[j] = ci;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.len() {
                    if lit_value(&self.assigns, clause[k]) != Value::False {
                        clause.swap(1, k);
                        self.watches[clause[1].index()].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = ci;
                j += 1;
                if lit_value(&self.assigns, first) == Value::False {
                    while i < ws.len() {
                        ws[j] = ws[i];
                        i += 1;
                        j += 1;
                    }
                    conflict = Some(ci);
                } else {
                    self.enqueue(first, Some(ci));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.index()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        if let Some(i) = self.heap.pos[v] {
            self.heap.up(i, &self.activity);
        }
    }

    /// First-UIP learning; returns the learnt clause (asserting literal
    /// first) and the level to backtrack to.
    fn analyze(&mut self, mut confl: usize) -> (Vec<Lit>, usize) {
        let mut learnt = vec![Lit(0)];
        let mut pending = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        loop {
            let start = usize::from(p.is_some());
            for k in start..self.clauses[confl].len() {
                let q = self.clauses[confl][k];
                let v = q.var();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= self.decision_level() {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var()] {
                    break;
                }
            }
            let lit = self.trail[idx];
            self.seen[lit.var()] = false;
            p = Some(lit);
            pending -= 1;
            if pending == 0 {
                break;
            }
            confl = self.reason[lit.var()].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();
        for l in &learnt[1..] {
            self.seen[l.var()] = false;
        }
        let mut back = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var()] > self.level[learnt[best].var()] {
                    best = k;
                }
            }
            learnt.swap(1, best);
            back = self.level[learnt[1].var()];
        }
        (learnt, back)
    }

    /// A satisfying assignment indexed by DIMACS variable (index 0 unused),
    /// or `None` when unsatisfiable.
    pub fn solve(&mut self) -> Result<Option<Vec<bool>>> {
        if !self.ok {
            return Ok(None);
        }
        self.backtrack(0);
        if self.propagate().is_some() {
            self.ok = false;
            return Ok(None);
        }
        let mut spent = 0u64;
        let mut restarts = 0u64;
        let mut until_restart = 100 * luby(0);
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                spent += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Ok(None);
                }
                if let Some(b) = self.budget {
                    if spent > b {
                        self.backtrack(0);
                        return Err(Error::SolverBudgetExceeded { budget: b });
                    }
                }
                let (learnt, back) = self.analyze(confl);
                self.backtrack(back);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let ci = self.attach(learnt);
                    self.enqueue(first, Some(ci));
                }
                self.var_inc /= 0.95;
                until_restart = until_restart.saturating_sub(1);
                if until_restart == 0 {
                    restarts += 1;
                    until_restart = 100 * luby(restarts);
                    self.backtrack(0);
                }
            } else {
                let next = loop {
                    match self.heap.pop(&self.activity) {
                        Some(v) if self.assigns[v] == Value::Unset => break Some(v),
                        Some(_) => continue,
                        None => break None,
                    }
                };
                let Some(v) = next else {
                    let mut model = vec![false; self.assigns.len() + 1];
                    for (v, a) in self.assigns.iter().enumerate() {
                        model[v + 1] = *a == Value::True;
                    }
                    return Ok(Some(model));
                };
                self.decisions += 1;
                self.trail_lim.push(self.trail.len());
                let l = Lit((v as u32) * 2 + (!self.polarity[v]) as u32);
                self.enqueue(l, None);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(num_vars: u32, clauses: &[Vec<i32>]) -> bool {
        (0u32..1 << num_vars).any(|m| {
            clauses.iter().all(|cl| {
                cl.iter().any(|l| {
                    let bit = (m >> (l.unsigned_abs() - 1)) & 1 == 1;
                    bit == (*l > 0)
                })
            })
        })
    }

    fn satisfies(model: &[bool], clauses: &[Vec<i32>]) -> bool {
        clauses
            .iter()
            .all(|cl| cl.iter().any(|l| model[l.unsigned_abs() as usize] == (*l > 0)))
    }

    #[test]
    fn luby_sequence() {
        let seq: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn pigeonhole_is_unsatisfiable() {
        // 5 pigeons, 4 holes
        let (p, h) = (5, 4);
        let var = |i: i32, j: i32| i * h + j + 1;
        let mut s = Solver::new((p * h) as u32);
        for i in 0..p {
            s.add_clause(&(0..h).map(|j| var(i, j)).collect::<Vec<_>>());
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    s.add_clause(&[-var(a, j), -var(b, j)]);
                }
            }
        }
        assert_eq!(s.solve().unwrap(), None);
    }

    #[test]
    fn budget_is_enforced() {
        let (p, h) = (8, 7);
        let var = |i: i32, j: i32| i * h + j + 1;
        let mut s = Solver::new((p * h) as u32);
        for i in 0..p {
            s.add_clause(&(0..h).map(|j| var(i, j)).collect::<Vec<_>>());
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    s.add_clause(&[-var(a, j), -var(b, j)]);
                }
            }
        }
        s.set_budget(Some(10));
        assert_eq!(s.solve(), Err(Error::SolverBudgetExceeded { budget: 10 }));
    }

    #[test]
    fn blocking_clauses_enumerate_all_models() {
        // x1 xor x2 xor x3 has four models
        let clauses = vec![
            vec![1, 2, 3],
            vec![1, -2, -3],
            vec![-1, 2, -3],
            vec![-1, -2, 3],
        ];
        let mut s = Solver::new(3);
        for c in &clauses {
            s.add_clause(c);
        }
        let mut n = 0;
        while let Some(m) = s.solve().unwrap() {
            assert!(satisfies(&m, &clauses));
            n += 1;
            let block: Vec<i32> = (1..=3).map(|v| if m[v as usize] { -v } else { v }).collect();
            s.add_clause(&block);
        }
        assert_eq!(n, 4);
    }

    fn clause_strategy(num_vars: u32) -> impl Strategy<Value = Vec<i32>> {
        prop::collection::vec((1..=num_vars as i32, any::<bool>()), 1..=4)
            .prop_map(|ls| ls.into_iter().map(|(v, s)| if s { v } else { -v }).collect())
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(
            clauses in prop::collection::vec(clause_strategy(10), 1..60)
        ) {
            let mut s = Solver::new(10);
            for c in &clauses {
                s.add_clause(c);
            }
            let answer = s.solve().unwrap();
            prop_assert_eq!(answer.is_some(), brute_force(10, &clauses));
            if let Some(m) = answer {
                prop_assert!(satisfies(&m, &clauses));
            }
        }

        #[test]
        fn model_counts_agree_with_brute_force(
            clauses in prop::collection::vec(clause_strategy(7), 1..20)
        ) {
            let mut s = Solver::new(7);
            for c in &clauses {
                s.add_clause(c);
            }
            let mut n = 0u32;
            while let Some(m) = s.solve().unwrap() {
                prop_assert!(satisfies(&m, &clauses));
                n += 1;
                let block: Vec<i32> = (1..=7).map(|v| if m[v as usize] { -v } else { v }).collect();
                s.add_clause(&block);
            }
            let expected = (0u32..128).filter(|m| clauses.iter().all(|cl| cl.iter().any(|l| {
                ((m >> (l.unsigned_abs() - 1)) & 1 == 1) == (*l > 0)
            }))).count() as u32;
            prop_assert_eq!(n, expected);
        }
    }
}
