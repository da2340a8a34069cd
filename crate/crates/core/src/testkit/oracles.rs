//! Per-step property checks over runs and exhaustive explorations.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::complexity::{
    counted_size, digit_cap, lex_compare, mu, multiplier, tower_at_least, tower_cmp, tower_fits, MeasureVector,
};
use crate::depth::check_depth;
use crate::eval::{
    classify_stuck, replace_at, run, MachineState, ProgressError, RunError, SchedulerMode, SchedulerPolicy, Trace,
};
use crate::reader::print_term;
use crate::syntax::{occurrences, revised_depth, RegionDepthContext, Term, VarDepthContext};
use crate::types::{RegionTypeContext, Type, TypedVarContext};
use crate::typing::check;

/// Region contexts a program is judged under; `types` selects typed mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contexts {
    pub depths: RegionDepthContext,
    pub types: Option<RegionTypeContext>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Oracle {
    /// Successors stay well-formed and no deeper.
    DepthNonIncrease,
    /// `μ_n` strictly decreases, right to left.
    MeasureDecrease,
    /// `t_α(μ_α)` strictly decreases where both values fit the digit cap.
    TowerDecrease,
    /// Reduction length is at most the certificate.
    TraceBound,
    /// Successors keep the initial type.
    SubjectReduction,
    /// Stuck typed states are values and blocked reads.
    Progress,
    /// `|P| ≤ 2 Σ ω_i(P)`.
    SizeBound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleViolation {
    pub oracle: Oracle,
    pub program: String,
    pub step: usize,
    pub before: String,
    pub after: Option<String>,
    pub detail: String,
    /// Smallest program found that still violates the oracle.
    pub minimized: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    /// Why the program was not run, if it fails its judgement.
    pub rejected: Option<String>,
    pub steps: usize,
    pub states: usize,
    pub stuck_states: usize,
    pub tower_steps: usize,
    /// The certificate fits the digit cap.
    pub certified: bool,
    pub budget_exhausted: bool,
    pub violations: Vec<OracleViolation>,
}

struct Checker<'a> {
    ctx: &'a Contexts,
    program: String,
    expected: Option<Type>,
    n: u32,
    alpha: u64,
    cap: u64,
    report: OracleReport,
}

impl Checker<'_> {
    fn violation(&mut self, oracle: Oracle, step: usize, before: &Term, after: Option<&Term>, detail: String) {
        if self.report.violations.iter().any(|v| v.oracle == oracle) {
            return;
        }
        self.report.violations.push(OracleViolation {
            oracle,
            program: self.program.clone(),
            step,
            before: print_term(before),
            after: after.map(print_term),
            detail,
            minimized: None,
        });
    }

    fn measure(&self, t: &Term) -> Result<MeasureVector, String> {
        mu(t, &self.ctx.depths, self.n).map_err(|e| e.to_string())
    }

    fn transition(&mut self, step: usize, before: &Term, after: &Term) {
        self.report.steps += 1;
        let r = &self.ctx.depths;
        match check_depth(after, r, &VarDepthContext::new(), 0) {
            Err(e) => self.violation(Oracle::DepthNonIncrease, step, before, Some(after), e.to_string()),
            Ok(_) => {
                let (db, da) = (
                    revised_depth(before, r).unwrap_or(0),
                    revised_depth(after, r).unwrap_or(0),
                );
                if da > db {
                    self.violation(
                        Oracle::DepthNonIncrease,
                        step,
                        before,
                        Some(after),
                        format!("depth {db} became {da}"),
                    );
                }
            }
        }
        match (self.measure(before), self.measure(after)) {
            (Ok(mb), Ok(ma)) => {
                if lex_compare(&ma, &mb) != Ok(Ordering::Less) {
                    self.violation(
                        Oracle::MeasureDecrease,
                        step,
                        before,
                        Some(after),
                        format!("{mb} then {ma}"),
                    );
                }
                if tower_fits(self.alpha, &mb.0, self.cap) && tower_fits(self.alpha, &ma.0, self.cap) {
                    self.report.tower_steps += 1;
                    if tower_cmp(self.alpha, &ma.0, &mb.0) != Ordering::Less {
                        self.violation(
                            Oracle::TowerDecrease,
                            step,
                            before,
                            Some(after),
                            format!("t over {mb} then {ma}"),
                        );
                    }
                }
                let size = counted_size(after, r).unwrap_or(0);
                let bound: u64 = 2 * ma.0.iter().sum::<u64>();
                if size > bound {
                    self.violation(
                        Oracle::SizeBound,
                        step,
                        before,
                        Some(after),
                        format!("size {size} above {bound}"),
                    );
                }
            }
            (Err(e), _) | (_, Err(e)) => self.violation(Oracle::MeasureDecrease, step, before, Some(after), e),
        }
        if let (Some(rt), Some(a)) = (&self.ctx.types, &self.expected) {
            if let Err(e) = check(after, rt, &TypedVarContext::new(), 0, Some(a)) {
                self.violation(Oracle::SubjectReduction, step, before, Some(after), e.to_string());
            }
        }
    }

    fn stuck(&mut self, step: usize, s: &MachineState) {
        self.report.stuck_states += 1;
        if let Err(ProgressError::ProgressViolation { thread }) = classify_stuck(s, self.expected.is_some()) {
            let t = s.to_term();
            self.violation(Oracle::Progress, step, &t, None, format!("thread {thread}"));
        }
    }

    fn bound(&mut self, mu0: &MeasureVector, length: usize, at: &Term) {
        if self.report.certified && !tower_at_least(self.alpha, &mu0.0, length as u64) {
            self.violation(
                Oracle::TraceBound,
                length,
                at,
                None,
                format!("{length} steps exceed t over {mu0}"),
            );
        }
    }
}

fn trace_of(e: RunError) -> Option<Trace> {
    match e {
        RunError::BudgetExceeded { partial, .. } => *partial,
        RunError::Divergent => None,
    }
}

/// Runs `p` under `policy` and checks every oracle on every step taken.
///
/// `budget` bounds the steps of a run, or the states of an exhaustive search,
/// which takes every enabled choice. The first violation of each oracle is
/// reported with a minimized program.
pub fn run_oracles(p: &Term, ctx: &Contexts, policy: &SchedulerPolicy, budget: usize) -> OracleReport {
    let mut report = check_once(p, ctx, policy, budget);
    for v in &mut report.violations {
        let oracle = v.oracle;
        let smaller = minimize(p, &|q| {
            check_once(q, ctx, policy, budget)
                .violations
                .iter()
                .any(|w| w.oracle == oracle)
        });
        v.minimized = Some(print_term(&smaller));
    }
    report
}

fn check_once(p: &Term, ctx: &Contexts, policy: &SchedulerPolicy, budget: usize) -> OracleReport {
    let rejected = |why: String| OracleReport {
        rejected: Some(why),
        ..OracleReport::default()
    };
    if let Err(e) = check_depth(p, &ctx.depths, &VarDepthContext::new(), 0) {
        return rejected(e.to_string());
    }
    let expected = match &ctx.types {
        Some(rt) => match check(p, rt, &TypedVarContext::new(), 0, None) {
            Ok(a) => Some(a),
            Err(e) => return rejected(e.to_string()),
        },
        None => None,
    };
    let s0 = match MachineState::new(p) {
        Ok(s) => s,
        Err(e) => return rejected(e.to_string()),
    };
    let n = revised_depth(p, &ctx.depths).unwrap_or(0);
    let mut c = Checker {
        ctx,
        program: print_term(p),
        expected,
        n,
        alpha: multiplier(n),
        cap: digit_cap(),
        report: OracleReport::default(),
    };
    let mu0 = match c.measure(p) {
        Ok(m) => m,
        Err(e) => return rejected(e),
    };
    c.report.certified = tower_fits(c.alpha, &mu0.0, c.cap);
    if policy.mode == SchedulerMode::Exhaustive {
        exhaustive(&mut c, &s0, &mu0, budget);
    } else {
        let trace = match run(&s0, policy, budget) {
            Ok(out) => out.trace(),
            Err(e) => {
                c.report.budget_exhausted = true;
                trace_of(e)
            }
        };
        let Some(trace) = trace else { return c.report };
        let states = trace.states();
        c.report.states = states.len();
        for (i, w) in states.windows(2).enumerate() {
            c.transition(i + 1, &w[0].to_term(), &w[1].to_term());
        }
        if !c.report.budget_exhausted {
            c.stuck(states.len() - 1, &trace.last);
        }
        c.bound(&mu0, trace.len(), &trace.last.to_term());
    }
    c.report
}

/// Breadth-first search over every enabled choice.
fn exhaustive(c: &mut Checker, s0: &MachineState, mu0: &MeasureVector, budget: usize) {
    let mut succ: HashMap<String, Vec<String>> = HashMap::new();
    let mut queue = VecDeque::from([(s0.clone(), 0usize)]);
    succ.insert(s0.key(), Vec::new());
    while let Some((s, depth)) = queue.pop_front() {
        let before = s.to_term();
        let choices = s.enumerate_redexes();
        if choices.is_empty() {
            c.stuck(depth, &s);
        }
        let mut keys = Vec::new();
        for choice in &choices {
            let next = s.step(choice).expect("enumerated choices are enabled");
            c.transition(depth + 1, &before, &next.to_term());
            let k = next.key();
            keys.push(k.clone());
            if !succ.contains_key(&k) {
                if succ.len() >= budget {
                    c.report.budget_exhausted = true;
                    c.report.states = succ.len();
                    return;
                }
                succ.insert(k, Vec::new());
                queue.push_back((next, depth + 1));
            }
        }
        succ.insert(s.key(), keys);
    }
    c.report.states = succ.len();
    if let Some(longest) = longest_path(&s0.key(), &succ) {
        c.bound(mu0, longest, &s0.to_term());
    }
}

/// Longest path from `root`, or `None` on a cycle.
fn longest_path(root: &str, succ: &HashMap<String, Vec<String>>) -> Option<usize> {
    // None while on the stack.
    let mut memo: HashMap<&str, Option<usize>> = HashMap::new();
    let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
    memo.insert(root, None);
    while let Some(&mut (k, ref mut i)) = stack.last_mut() {
        let next = succ.get(k).and_then(|v| v.get(*i));
        *i += 1;
        match next {
            Some(n) => match memo.get(n.as_str()) {
                Some(None) => return None,
                Some(Some(_)) => {}
                None => {
                    memo.insert(n, None);
                    stack.push((n, 0));
                }
            },
            None => {
                let best = succ
                    .get(k)
                    .into_iter()
                    .flatten()
                    .map(|n| memo[n.as_str()].expect("finished") + 1)
                    .max()
                    .unwrap_or(0);
                memo.insert(k, Some(best));
                stack.pop();
            }
        }
    }
    memo[root]
}

/// Shrinks `p` by replacing subterms with `*` while `keep` holds.
pub fn minimize(p: &Term, keep: &dyn Fn(&Term) -> bool) -> Term {
    let mut cur = p.clone();
    'outer: for _ in 0..200 {
        for occ in occurrences(&cur) {
            if occ.path.0.is_empty() || matches!(cur.at_path(&occ.path), Some(Term::Unit)) {
                continue;
            }
            let cand = replace_at(&cur, &occ.path.0, &mut |_| Term::Unit);
            if cand.size() < cur.size() && keep(&cand) {
                cur = cand;
                continue 'outer;
            }
        }
        break;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    fn untyped(src: &str, r: &[(&str, u32)]) -> (Term, Contexts) {
        let depths = r.iter().map(|(n, d)| ((*n).into(), *d)).collect();
        (parse_term(src).unwrap(), Contexts::untyped(depths))
    }

    #[test]
    fn dup_under_bang_applied_passes() {
        let (p, ctx) = untyped("(\\x. let !y = x in !(y y)) !!*", &[]);
        for policy in [SchedulerPolicy::deterministic(), SchedulerPolicy::exhaustive()] {
            let rep = run_oracles(&p, &ctx, &policy, 1000);
            assert!(rep.rejected.is_none());
            assert!(rep.violations.is_empty(), "{:?}", rep.violations);
            assert!(rep.steps >= 2);
        }
    }

    #[test]
    fn ill_formed_is_rejected() {
        let (p, ctx) = untyped("\\x. let !y = x in !(y !(y z))", &[]);
        let rep = run_oracles(&p, &ctx, &SchedulerPolicy::deterministic(), 100);
        assert!(rep.rejected.is_some());
        assert_eq!(rep.steps, 0);
    }

    #[test]
    fn longest_path_detects_cycles() {
        let g: HashMap<String, Vec<String>> = [("a", vec!["b", "c"]), ("b", vec!["c"]), ("c", vec![])]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
            .collect();
        assert_eq!(longest_path("a", &g), Some(2));
        let mut cyc = g.clone();
        cyc.insert("c".into(), vec!["a".into()]);
        assert_eq!(longest_path("a", &cyc), None);
    }

    #[test]
    fn minimize_keeps_the_property() {
        let p = parse_term("(\\x. x) ((\\y. y) *) | !*").unwrap();
        let small = minimize(&p, &|q| q.size() >= 3);
        assert!(small.size() >= 3 && small.size() < p.size());
    }
}
