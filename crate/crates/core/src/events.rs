//! Finite events over window coordinates and a satisfiability search for them.
//!
//! An event is a disjunction of terms; a term fixes some coordinates and forbids a list of
//! cylinders. Branch sets of locally constant cocycles, their complements and all refinements
//! of those stay in this form.

use crate::error::{Error, Result};
use crate::shift::Cylinder;

/// Fixed coordinates (sorted, consistent) and forbidden cylinders.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    fixed: Vec<(i64, u8)>,
    forbid: Vec<Cylinder>,
}

impl Term {
    pub fn any() -> Self {
        Self { fixed: Vec::new(), forbid: Vec::new() }
    }

    pub fn from_cylinder(c: &Cylinder) -> Self {
        let fixed = c.word().iter().enumerate().map(|(r, &s)| (c.base() + r as i64, s)).collect();
        Self { fixed, forbid: Vec::new() }
    }

    pub fn forbidding(c: &Cylinder) -> Self {
        Self { fixed: Vec::new(), forbid: vec![c.clone()] }
    }

    pub fn fixed(&self) -> &[(i64, u8)] {
        &self.fixed
    }

    pub fn forbidden(&self) -> &[Cylinder] {
        &self.forbid
    }

    fn fixed_at(&self, i: i64) -> Option<u8> {
        self.fixed.binary_search_by_key(&i, |&(j, _)| j).ok().map(|pos| self.fixed[pos].1)
    }

    /// Conjunction; `None` when the result is visibly empty.
    pub fn and(&self, other: &Term) -> Option<Term> {
        let mut fixed = self.fixed.clone();
        for &(i, s) in &other.fixed {
            match fixed.binary_search_by_key(&i, |&(j, _)| j) {
                Ok(pos) if fixed[pos].1 != s => return None,
                Ok(_) => {}
                Err(pos) => fixed.insert(pos, (i, s)),
            }
        }
        let mut t = Term { fixed, forbid: Vec::new() };
        for c in self.forbid.iter().chain(&other.forbid) {
            let mut decided_match = true;
            let mut excluded = false;
            for (r, &s) in c.word().iter().enumerate() {
                match t.fixed_at(c.base() + r as i64) {
                    Some(v) if v != s => {
                        excluded = true;
                        break;
                    }
                    Some(_) => {}
                    None => decided_match = false,
                }
            }
            if excluded {
                continue;
            }
            if decided_match {
                return None;
            }
            if !t.forbid.contains(c) {
                t.forbid.push(c.clone());
            }
        }
        Some(t)
    }

    /// Membership of the window word `word` starting at coordinate `lo`.
    pub fn matches_word(&self, lo: i64, word: &[u8]) -> bool {
        let at = |i: i64| word.get((i - lo) as usize).copied();
        self.fixed.iter().all(|&(i, s)| at(i) == Some(s))
            && self.forbid.iter().all(|c| !c.contains_word(lo, word))
    }
}

/// A finite union of terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    terms: Vec<Term>,
}

impl Event {
    pub fn everything() -> Self {
        Self { terms: vec![Term::any()] }
    }

    pub fn nothing() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// (c_1 ∪ … ∪ c_n) \ (e_1 ∪ … ∪ e_m).
    pub fn union_minus(union: &[Cylinder], exclude: &[Cylinder]) -> Self {
        let mut ex = Term::any();
        for e in exclude {
            ex = ex.and(&Term::forbidding(e)).unwrap_or_else(Term::any);
        }
        let terms = union.iter().filter_map(|c| Term::from_cylinder(c).and(&ex)).collect();
        Self { terms }
    }

    /// Complement of `union_minus(union, exclude)`: (∩ ¬c_i) ∪ e_1 ∪ … ∪ e_m.
    pub fn complement_of(union: &[Cylinder], exclude: &[Cylinder]) -> Self {
        let mut outside = Term::any();
        let mut empty = false;
        for c in union {
            match outside.and(&Term::forbidding(c)) {
                Some(t) => outside = t,
                None => empty = true,
            }
        }
        let mut terms = Vec::new();
        if !empty {
            terms.push(outside);
        }
        terms.extend(exclude.iter().map(Term::from_cylinder));
        Self { terms }
    }

    pub fn and(&self, other: &Event) -> Event {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                if let Some(t) = a.and(b) {
                    if !terms.contains(&t) {
                        terms.push(t);
                    }
                }
            }
        }
        Event { terms }
    }

    pub fn or(&self, other: &Event) -> Event {
        let mut terms = self.terms.clone();
        for t in &other.terms {
            if !terms.contains(t) {
                terms.push(t.clone());
            }
        }
        Event { terms }
    }

    pub fn matches_word(&self, lo: i64, word: &[u8]) -> bool {
        self.terms.iter().any(|t| t.matches_word(lo, word))
    }
}

/// Counts search nodes against a budget.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub limit: u64,
    pub used: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Self { limit, used: 0 }
    }

    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.limit {
            return Err(Error::ClassSearchTimeout { budget: self.limit });
        }
        Ok(())
    }
}

/// Backtracking search with unit propagation over boolean variables.
///
/// A clause lists (variable, symbol) literals and is violated iff every listed variable takes
/// its listed symbol, i.e. it encodes a forbidden pattern.
struct Solver {
    assign: Vec<i8>,
    clauses: Vec<Vec<(usize, u8)>>,
    trail: Vec<usize>,
}

impl Solver {
    fn set(&mut self, v: usize, s: u8) -> bool {
        match self.assign[v] {
            -1 => {
                self.assign[v] = s as i8;
                self.trail.push(v);
                true
            }
            cur => cur == s as i8,
        }
    }

    fn undo(&mut self, to: usize) {
        while self.trail.len() > to {
            let v = self.trail.pop().unwrap();
            self.assign[v] = -1;
        }
    }

    /// Ok(true): satisfied. Ok(false): conflict (assignments since `mark` undone by caller).
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            for ci in 0..self.clauses.len() {
                let mut open = None;
                let mut n_open = 0;
                let mut sat = false;
                for &(v, bad) in &self.clauses[ci] {
                    match self.assign[v] {
                        -1 => {
                            n_open += 1;
                            open = Some((v, bad));
                        }
                        cur if cur != bad as i8 => {
                            sat = true;
                            break;
                        }
                        _ => {}
                    }
                }
                if sat {
                    continue;
                }
                match n_open {
                    0 => return false,
                    1 => {
                        let (v, bad) = open.unwrap();
                        self.set(v, 1 - bad);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn branch_literal(&self) -> Option<(usize, u8)> {
        let mut best: Option<(usize, (usize, u8))> = None;
        for clause in &self.clauses {
            let mut open = Vec::new();
            let mut sat = false;
            for &(v, bad) in clause {
                match self.assign[v] {
                    -1 => open.push((v, bad)),
                    cur if cur != bad as i8 => {
                        sat = true;
                        break;
                    }
                    _ => {}
                }
            }
            if !sat && !open.is_empty() && best.is_none_or(|(n, _)| open.len() < n) {
                best = Some((open.len(), open[0]));
            }
        }
        best.map(|(_, lit)| lit)
    }

    fn solve(&mut self, budget: &mut Budget) -> Result<bool> {
        budget.tick()?;
        let mark = self.trail.len();
        if !self.propagate() {
            self.undo(mark);
            return Ok(false);
        }
        let Some((v, bad)) = self.branch_literal() else {
            return Ok(true);
        };
        for s in [1 - bad, bad] {
            let inner = self.trail.len();
            self.set(v, s);
            if self.solve(budget)? {
                return Ok(true);
            }
            self.undo(inner);
        }
        self.undo(mark);
        Ok(false)
    }
}

/// Window words (lo..=hi) u ∈ t1, v ∈ t2 agreeing on every |j| < m, if any.
pub fn find_term_pair(
    t1: &Term,
    t2: &Term,
    lo: i64,
    hi: i64,
    m: u64,
    budget: &mut Budget,
) -> Result<Option<(Vec<u8>, Vec<u8>)>> {
    let w = (hi - lo + 1) as usize;
    let var_u = |j: i64| (j - lo) as usize;
    let var_v = |j: i64| if j.unsigned_abs() < m { (j - lo) as usize } else { w + (j - lo) as usize };
    let mut solver = Solver { assign: vec![-1; 2 * w], clauses: Vec::new(), trail: Vec::new() };
    for (term, var) in [(t1, &var_u as &dyn Fn(i64) -> usize), (t2, &var_v)] {
        for &(i, s) in term.fixed() {
            if i < lo || i > hi {
                continue;
            }
            if !solver.set(var(i), s) {
                return Ok(None);
            }
        }
        for c in term.forbidden() {
            let (a, b) = c.span().expect("forbidden cylinders are nonempty");
            if a < lo || b > hi {
                continue;
            }
            solver.clauses.push(c.word().iter().enumerate().map(|(r, &s)| (var(c.base() + r as i64), s)).collect());
        }
    }
    solver.trail.clear();
    if !solver.solve(budget)? {
        return Ok(None);
    }
    let value = |v: usize| solver.assign[v].max(0) as u8;
    let u = (lo..=hi).map(|j| value(var_u(j))).collect();
    let v = (lo..=hi).map(|j| value(var_v(j))).collect();
    Ok(Some((u, v)))
}

/// Window words u ∈ e1, v ∈ e2 agreeing on every |j| < m, if any.
pub fn find_pair(
    e1: &Event,
    e2: &Event,
    lo: i64,
    hi: i64,
    m: u64,
    budget: &mut Budget,
) -> Result<Option<(Vec<u8>, Vec<u8>)>> {
    for t1 in e1.terms() {
        for t2 in e2.terms() {
            if let Some(found) = find_term_pair(t1, t2, lo, hi, m, budget)? {
                return Ok(Some(found));
            }
        }
    }
    Ok(None)
}

/// A window word in `e`, if any.
pub fn find_word(e: &Event, lo: i64, hi: i64, budget: &mut Budget) -> Result<Option<Vec<u8>>> {
    Ok(find_pair(e, &Event::everything(), lo, hi, 0, budget)?.map(|(u, _)| u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_words(w: usize) -> impl Iterator<Item = Vec<u8>> {
        (0u32..1 << w).map(move |n| (0..w).map(|r| ((n >> r) & 1) as u8).collect())
    }

    #[test]
    fn term_conjunction_detects_conflicts() {
        let a = Term::from_cylinder(&Cylinder::parse(0, "01").unwrap());
        let b = Term::from_cylinder(&Cylinder::parse(1, "0").unwrap());
        assert!(a.and(&b).is_none());
        let f = Term::forbidding(&Cylinder::parse(0, "01").unwrap());
        assert!(a.and(&f).is_none());
        let g = Term::forbidding(&Cylinder::parse(0, "1").unwrap());
        assert_eq!(a.and(&g).unwrap().forbidden().len(), 0);
    }

    #[test]
    fn search_agrees_with_enumeration() {
        let c1 = Cylinder::parse(-1, "001").unwrap();
        let c2 = Cylinder::parse(0, "01").unwrap();
        let e1 = Event::union_minus(std::slice::from_ref(&c1), &[]);
        let e2 = Event::complement_of(&[c1.clone(), c2.clone()], &[]);
        let (lo, hi) = (-2i64, 2i64);
        for m in 0..=3u64 {
            let mut budget = Budget::new(10_000);
            let found = find_pair(&e1, &e2, lo, hi, m, &mut budget).unwrap();
            let brute = all_words(5).any(|u| {
                e1.matches_word(lo, &u)
                    && all_words(5).any(|v| {
                        e2.matches_word(lo, &v) && (lo..=hi).all(|j| j.unsigned_abs() >= m || u[(j - lo) as usize] == v[(j - lo) as usize])
                    })
            });
            assert_eq!(found.is_some(), brute, "m = {m}");
            if let Some((u, v)) = found {
                assert!(e1.matches_word(lo, &u) && e2.matches_word(lo, &v));
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let e = Event::complement_of(&[Cylinder::parse(0, "1").unwrap()], &[]);
        let mut budget = Budget::new(0);
        assert!(matches!(find_word(&e, 0, 0, &mut budget), Err(Error::ClassSearchTimeout { .. })));
    }
}
