//! Small-step machine for programs with stores and threads.
//!
//! Each thread has at most one call-by-value redex position. A choice
//! names the thread, that position, the rule and, for reads, the store
//! entry. Stores accumulate writes; reads consume an entry, or copy a
//! banged one when the read is bound by `let !`.

mod normalize;
mod run;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::reader::print_term;
use crate::syntax::{
    canonicalize, instantiate, reduce_type_redexes, AddrId, CanonicalProgram, Loc, Path, SyntaxError, Term,
};
use crate::Name;

pub use normalize::{strong_normalize, strong_step, BudgetExceeded};
pub use run::{explore, run, Exploration, RunError, RunOutcome, SchedulerMode, SchedulerPolicy, Trace, TraceEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    Beta,
    LetBang,
    SetWrite,
    GetConsume,
    GetCopy,
    NuAlloc,
}

impl Rule {
    /// Rules that touch neither the store nor other threads.
    pub fn is_local(self) -> bool {
        matches!(self, Rule::Beta | Rule::LetBang | Rule::NuAlloc)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RedexChoice {
    pub thread: usize,
    pub path: Path,
    pub rule: Rule,
    /// Index of the store entry read by `GetConsume` / `GetCopy`.
    pub entry: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("choice is not enabled in this state")]
    InvalidChoice,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MachineState {
    pub program: CanonicalProgram,
    pub steps: usize,
    /// Addresses allocated by `new`, with their regions.
    pub fresh: BTreeMap<u32, Name>,
}

/// Where the next call-by-value step of a thread happens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Focus {
    Value,
    Local(Path, Rule),
    Write(Path, Loc),
    Read(Path, Loc),
    /// `let !x = get(l) in M` at the path of the `let`.
    LetRead(Path, Loc),
    Stuck(Path),
}

fn target_loc(t: &Term) -> Option<&Loc> {
    match t.peel() {
        Term::Loc(l) => Some(l),
        _ => None,
    }
}

/// Call-by-value decomposition `E[Δ]` of a store-free thread.
pub fn focus(t: &Term) -> Focus {
    fn go(t: &Term, path: &mut Vec<u8>) -> Focus {
        let here = |path: &Vec<u8>| Path(path.clone());
        let t = t.peel();
        if t.is_value() {
            return Focus::Value;
        }
        let descend = |bit: u8, child: &Term, path: &mut Vec<u8>| {
            path.push(bit);
            let f = go(child, path);
            path.pop();
            f
        };
        match t {
            Term::App(f, a) => {
                if !f.is_value() {
                    descend(0, f, path)
                } else if !a.is_value() {
                    descend(1, a, path)
                } else if matches!(f.peel(), Term::Lam { .. }) {
                    Focus::Local(here(path), Rule::Beta)
                } else {
                    Focus::Stuck(here(path))
                }
            }
            Term::Bang(inner) => descend(0, inner, path),
            Term::LetBang { bound, .. } => {
                if let Term::Get(target) = bound.peel() {
                    if let Some(l) = target_loc(target) {
                        return Focus::LetRead(here(path), l.clone());
                    }
                }
                if !bound.is_value() {
                    descend(0, bound, path)
                } else if matches!(bound.peel(), Term::Bang(_)) {
                    Focus::Local(here(path), Rule::LetBang)
                } else {
                    Focus::Stuck(here(path))
                }
            }
            Term::Get(target) => match target_loc(target) {
                Some(l) => Focus::Read(here(path), l.clone()),
                None => Focus::Stuck(here(path)),
            },
            Term::Set(target, v) => match target_loc(target) {
                Some(l) if v.is_value() => Focus::Write(here(path), l.clone()),
                _ => Focus::Stuck(here(path)),
            },
            Term::New { .. } => Focus::Local(here(path), Rule::NuAlloc),
            _ => Focus::Stuck(here(path)),
        }
    }
    go(t, &mut Vec::new())
}

/// Rebuilds `t` with the addressed node at `path` replaced by `f(node)`.
pub fn replace_at(t: &Term, path: &[u8], f: &mut dyn FnMut(&Term) -> Term) -> Term {
    match t {
        Term::TyAbs { tvar, body } => Term::TyAbs {
            tvar: tvar.clone(),
            body: Box::new(replace_at(body, path, f)),
        },
        Term::TyApp(inner, ty) => Term::TyApp(Box::new(replace_at(inner, path, f)), ty.clone()),
        _ => match path.split_first() {
            None => f(t),
            Some((&bit, rest)) => {
                let mut t = t.clone();
                let child: &mut Term = match (&mut t, bit) {
                    (Term::Lam { body, .. }, 0) | (Term::New { body, .. }, 0) => body,
                    (Term::Bang(x), 0) | (Term::Store(_, x), 0) | (Term::Set(_, x), 0) => x,
                    (Term::App(a, _), 0) | (Term::Par(a, _), 0) => a,
                    (Term::App(_, b), 1) | (Term::Par(_, b), 1) => b,
                    (Term::LetBang { bound, .. }, 0) => bound,
                    (Term::LetBang { body, .. }, 1) => body,
                    _ => panic!("path does not address a node"),
                };
                *child = replace_at(child, rest, f);
                t
            }
        },
    }
}

fn bang_contents(v: &Term) -> Option<&Term> {
    match v.peel() {
        Term::Bang(inner) => Some(inner),
        _ => None,
    }
}

/// Splits `!^n(P | Q)` and `!^n(r ⇐ V)` into threads and store entries.
fn distribute(t: Term, out: &mut CanonicalProgram) {
    fn has_static(t: &Term) -> bool {
        match t {
            Term::Bang(x) => has_static(x),
            Term::Par(..) | Term::Store(..) => true,
            _ => false,
        }
    }
    fn go(t: &Term, n: usize, out: &mut CanonicalProgram) {
        match t {
            Term::Bang(x) => go(x, n + 1, out),
            Term::Par(a, b) => {
                go(a, n, out);
                go(b, n, out);
            }
            Term::Store(l, v) => out.store.push((l.clone(), (**v).clone())),
            other => out.threads.push(Term::bangs(n, other.clone())),
        }
    }
    if has_static(&t) {
        go(&t, 0, out);
    } else {
        out.threads.push(t);
    }
}

impl MachineState {
    pub fn new(program: &Term) -> Result<MachineState, SyntaxError> {
        let canon = canonicalize(program)?;
        let mut out = CanonicalProgram {
            threads: Vec::new(),
            store: canon.store,
        };
        for t in canon.threads {
            distribute(reduce_type_redexes(&t), &mut out);
        }
        let fresh = BTreeMap::new();
        Ok(MachineState {
            program: out,
            steps: 0,
            fresh,
        })
    }

    pub fn to_term(&self) -> Term {
        self.program.to_term()
    }

    pub fn text(&self) -> String {
        print_term(&self.to_term())
    }

    /// Order-insensitive key for memoization.
    pub fn key(&self) -> String {
        let mut parts: Vec<String> = self
            .program
            .threads
            .iter()
            .map(|t| print_term(&t.erase()))
            .chain(
                self.program
                    .store
                    .iter()
                    .map(|(l, v)| print_term(&Term::store(l.clone(), v.erase()))),
            )
            .collect();
        parts.sort();
        parts.join(" | ")
    }

    fn entries_at<'a>(&'a self, l: &'a Loc) -> impl Iterator<Item = usize> + 'a {
        self.program
            .store
            .iter()
            .enumerate()
            .filter(move |(_, (m, _))| m == l)
            .map(|(i, _)| i)
    }

    /// Every enabled choice, thread by thread.
    pub fn enumerate_redexes(&self) -> Vec<RedexChoice> {
        (0..self.program.threads.len())
            .flat_map(|i| self.thread_redexes(i))
            .collect()
    }

    pub fn thread_redexes(&self, thread: usize) -> Vec<RedexChoice> {
        let choice = |path: Path, rule, entry| RedexChoice {
            thread,
            path,
            rule,
            entry,
        };
        match focus(&self.program.threads[thread]) {
            Focus::Value | Focus::Stuck(_) => vec![],
            Focus::Local(p, rule) => vec![choice(p, rule, None)],
            Focus::Write(p, _) => vec![choice(p, Rule::SetWrite, None)],
            Focus::Read(p, l) => self
                .entries_at(&l)
                .map(|e| choice(p.clone(), Rule::GetConsume, Some(e)))
                .collect(),
            Focus::LetRead(p, l) => {
                let mut out = Vec::new();
                for e in self.entries_at(&l) {
                    out.push(choice(p.child(0), Rule::GetConsume, Some(e)));
                    if bang_contents(&self.program.store[e].1).is_some() {
                        out.push(choice(p.clone(), Rule::GetCopy, Some(e)));
                    }
                }
                out
            }
        }
    }

    pub fn step(&self, c: &RedexChoice) -> Result<MachineState, StepError> {
        if c.thread >= self.program.threads.len() || !self.thread_redexes(c.thread).contains(c) {
            return Err(StepError::InvalidChoice);
        }
        let mut next = self.clone();
        next.steps += 1;
        let thread = &self.program.threads[c.thread];
        let mut written: Option<(Loc, Term)> = None;
        let mut consumed = false;
        let mut fresh_id = None;
        let store = &self.program.store;
        let rewritten = replace_at(thread, &c.path.0, &mut |node| match (c.rule, node) {
            (Rule::Beta, Term::App(f, a)) => match f.peel() {
                Term::Lam { body, .. } => instantiate(body, a),
                _ => unreachable!("focus guarantees an abstraction"),
            },
            (Rule::LetBang, Term::LetBang { bound, body, .. }) => {
                instantiate(body, bang_contents(bound).expect("focus guarantees a bang"))
            }
            (Rule::NuAlloc, Term::New { region, body, .. }) => {
                let id = next.fresh.keys().next_back().map_or(0, |k| k + 1);
                fresh_id = Some((id, region.clone()));
                let loc = Loc::Address {
                    id: AddrId::Fresh(id),
                    region: region.clone(),
                };
                instantiate(body, &Term::Loc(loc))
            }
            (Rule::SetWrite, Term::Set(target, v)) => {
                let l = target_loc(target).expect("focus guarantees a location");
                written = Some((l.clone(), (**v).clone()));
                Term::Unit
            }
            (Rule::GetConsume, Term::Get(_)) => {
                consumed = true;
                store[c.entry.expect("reads name an entry")].1.clone()
            }
            (Rule::GetCopy, Term::LetBang { body, .. }) => {
                let v = &store[c.entry.expect("reads name an entry")].1;
                instantiate(body, bang_contents(v).expect("copy needs a banged entry"))
            }
            _ => unreachable!("rule tag matches the focused node"),
        });
        if let Some((id, r)) = fresh_id {
            next.fresh.insert(id, r);
        }
        if consumed {
            next.program.store.remove(c.entry.expect("reads name an entry"));
        }
        if let Some(entry) = written {
            next.program.store.push(entry);
        }
        let mut pieces = CanonicalProgram::default();
        distribute(reduce_type_redexes(&rewritten), &mut pieces);
        next.program.threads.splice(c.thread..=c.thread, pieces.threads);
        next.program.store.extend(pieces.store);
        Ok(next)
    }

    pub fn is_final(&self) -> bool {
        self.enumerate_redexes().is_empty()
    }

    /// Store entries at a location, in insertion order.
    pub fn values_at(&self, l: &Loc) -> Vec<&Term> {
        self.program
            .store
            .iter()
            .filter(|(m, _)| m == l)
            .map(|(_, v)| v)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ThreadStatus {
    Value,
    Blocked { region: String, path: Path },
    Unclassified { path: Path },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProgressReport {
    pub threads: Vec<ThreadStatus>,
}

impl ProgressReport {
    pub fn values(&self) -> usize {
        self.threads.iter().filter(|t| matches!(t, ThreadStatus::Value)).count()
    }

    pub fn blocked(&self) -> usize {
        self.threads
            .iter()
            .filter(|t| matches!(t, ThreadStatus::Blocked { .. }))
            .count()
    }

    pub fn unclassified(&self) -> usize {
        self.threads
            .iter()
            .filter(|t| matches!(t, ThreadStatus::Unclassified { .. }))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProgressError {
    #[error("the state still has enabled redexes")]
    NotStuck,
    #[error("typable thread {thread} is stuck but neither a value nor blocked on a read")]
    ProgressViolation { thread: usize },
}

/// Partitions the threads of a final state. `typable` asserts the program type-checked.
pub fn classify_stuck(s: &MachineState, typable: bool) -> Result<ProgressReport, ProgressError> {
    if !s.is_final() {
        return Err(ProgressError::NotStuck);
    }
    let mut threads = Vec::new();
    for (i, t) in s.program.threads.iter().enumerate() {
        let status = match focus(t) {
            Focus::Value => ThreadStatus::Value,
            Focus::Read(path, l) => ThreadStatus::Blocked {
                region: l.region().to_string(),
                path,
            },
            Focus::LetRead(path, l) => ThreadStatus::Blocked {
                region: l.region().to_string(),
                path: path.child(0),
            },
            Focus::Stuck(path) | Focus::Local(path, _) | Focus::Write(path, _) => {
                if typable {
                    return Err(ProgressError::ProgressViolation { thread: i });
                }
                ThreadStatus::Unclassified { path }
            }
        };
        threads.push(status);
    }
    Ok(ProgressReport { threads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    fn state(src: &str) -> MachineState {
        MachineState::new(&parse_term(src).unwrap()).unwrap()
    }

    fn rules(s: &MachineState) -> Vec<Rule> {
        s.enumerate_redexes().into_iter().map(|c| c.rule).collect()
    }

    const EXAMPLE2: &str = "(let !x = get(r) in set(r, !x)) | r <= !(\\x. x *)";

    #[test]
    fn example2_offers_copy_and_consume() {
        let s = state(EXAMPLE2);
        let mut r = rules(&s);
        r.sort();
        assert_eq!(r, vec![Rule::GetConsume, Rule::GetCopy]);
    }

    #[test]
    fn example2_copy_path() {
        let s = state(EXAMPLE2);
        let copy = s
            .enumerate_redexes()
            .into_iter()
            .find(|c| c.rule == Rule::GetCopy)
            .unwrap();
        let s1 = s.step(&copy).unwrap();
        let c = s1.enumerate_redexes();
        assert_eq!(c.len(), 1);
        let s2 = s1.step(&c[0]).unwrap();
        let expected = canonicalize(&parse_term("* | r <= !(\\x. x *) | r <= !(\\x. x *)").unwrap()).unwrap();
        assert_eq!(s2.program, expected);
        assert!(s2.is_final());
    }

    #[test]
    fn beta_and_let_bang() {
        let s = state("(\\x. x) *");
        let s1 = s.step(&s.enumerate_redexes()[0]).unwrap();
        assert_eq!(s1.to_term(), Term::Unit);
        let s = state("let !x = !(\\y. y) in !(x x)");
        assert_eq!(rules(&s), vec![Rule::LetBang]);
        let s1 = s.step(&s.enumerate_redexes()[0]).unwrap();
        assert_eq!(s1.to_term(), parse_term("!((\\y. y) (\\y. y))").unwrap());
    }

    #[test]
    fn values_and_blocked_reads_have_no_redex() {
        assert!(state("\\x. x").enumerate_redexes().is_empty());
        assert!(state("get(r)").enumerate_redexes().is_empty());
    }

    #[test]
    fn invalid_choice_is_rejected() {
        let s = state("(\\x. x) *");
        let mut c = s.enumerate_redexes()[0].clone();
        c.rule = Rule::LetBang;
        assert_eq!(s.step(&c), Err(StepError::InvalidChoice));
    }

    #[test]
    fn writes_accumulate() {
        let s = state("set(r, *); set(r, *)");
        let mut cur = s;
        while let Some(c) = cur.enumerate_redexes().first().cloned() {
            cur = cur.step(&c).unwrap();
        }
        assert_eq!(cur.program.store.len(), 2);
    }

    #[test]
    fn parallel_result_is_flattened() {
        let s = state("(\\x. !(x | x)) *");
        let s1 = s.step(&s.enumerate_redexes()[0]).unwrap();
        assert_eq!(s1.program.threads, vec![Term::bang(Term::Unit), Term::bang(Term::Unit)]);
    }

    #[test]
    fn new_allocates_distinct_addresses() {
        let s = state("new a : r in new b : r in set(a, *); set(b, *)");
        let mut cur = s;
        while let Some(c) = cur.enumerate_redexes().first().cloned() {
            cur = cur.step(&c).unwrap();
        }
        let locs: Vec<&Loc> = cur.program.store.iter().map(|(l, _)| l).collect();
        assert_eq!(locs.len(), 2);
        assert_ne!(locs[0], locs[1]);
        assert_eq!(cur.fresh.len(), 2);
    }

    #[test]
    fn progress_classification() {
        let s = state("* | get(r)");
        let rep = classify_stuck(&s, true).unwrap();
        assert_eq!((rep.values(), rep.blocked()), (1, 1));
        let s = state("let !y = (\\x. x) in !(y y)");
        let rep = classify_stuck(&s, false).unwrap();
        assert_eq!(rep.unclassified(), 1);
        assert!(matches!(
            classify_stuck(&s, true),
            Err(ProgressError::ProgressViolation { thread: 0 })
        ));
    }
}
