//! Scheduling: deterministic and seeded runs, and exhaustive exploration.

use std::collections::HashMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{MachineState, RedexChoice, Rule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedulerMode {
    /// First enabled choice of the first thread that has one.
    Deterministic,
    /// Uniform choice among enabled choices, reproducible from the seed.
    Seeded(u64),
    /// Every interleaving; see [`explore`].
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchedulerPolicy {
    pub mode: SchedulerMode,
    /// When a read may either copy or consume the same entry, take the copy.
    pub prefer_copy: bool,
    /// In exhaustive mode, explore every interleaving of local steps too.
    pub full_interleaving: bool,
}

impl SchedulerPolicy {
    pub fn deterministic() -> SchedulerPolicy {
        SchedulerPolicy {
            mode: SchedulerMode::Deterministic,
            prefer_copy: true,
            full_interleaving: false,
        }
    }

    pub fn seeded(seed: u64) -> SchedulerPolicy {
        SchedulerPolicy {
            mode: SchedulerMode::Seeded(seed),
            ..SchedulerPolicy::deterministic()
        }
    }

    pub fn exhaustive() -> SchedulerPolicy {
        SchedulerPolicy {
            mode: SchedulerMode::Exhaustive,
            ..SchedulerPolicy::deterministic()
        }
    }

    /// Drops the non-preferred rule where copy and consume read the same entry.
    fn filter(&self, choices: Vec<RedexChoice>) -> Vec<RedexChoice> {
        let overlapping = |c: &RedexChoice, other: Rule| {
            choices
                .iter()
                .any(|d| d.thread == c.thread && d.entry == c.entry && d.rule == other)
        };
        let drop = if self.prefer_copy {
            Rule::GetConsume
        } else {
            Rule::GetCopy
        };
        let keep = if self.prefer_copy {
            Rule::GetCopy
        } else {
            Rule::GetConsume
        };
        choices
            .iter()
            .filter(|c| !(c.rule == drop && overlapping(c, keep)))
            .cloned()
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEntry {
    pub step: usize,
    pub rule_tag: Rule,
    pub thread_index: usize,
    pub occurrence_path: String,
    pub program_text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tower: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub initial: MachineState,
    pub entries: Vec<TraceEntry>,
    pub choices: Vec<RedexChoice>,
    pub last: MachineState,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Replays the recorded choices from the initial state.
    pub fn states(&self) -> Vec<MachineState> {
        let mut out = vec![self.initial.clone()];
        for c in &self.choices {
            let next = out.last().expect("nonempty").step(c).expect("recorded choices replay");
            out.push(next);
        }
        out
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("trace entries serialize") + "\n")
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Exploration {
    /// Distinct final states, up to reordering of threads and entries.
    pub finals: Vec<MachineState>,
    pub states_visited: usize,
    /// Longest reduction sequence from the initial state.
    pub longest: usize,
}

#[derive(Clone, Debug)]
pub enum RunOutcome {
    Trace(Trace),
    Tree(Exploration),
}

impl RunOutcome {
    pub fn trace(self) -> Option<Trace> {
        match self {
            RunOutcome::Trace(t) => Some(t),
            RunOutcome::Tree(_) => None,
        }
    }

    pub fn tree(self) -> Option<Exploration> {
        match self {
            RunOutcome::Tree(e) => Some(e),
            RunOutcome::Trace(_) => None,
        }
    }
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum RunError {
    #[error("step budget of {budget} exhausted")]
    BudgetExceeded { budget: usize, partial: Box<Option<Trace>> },
    #[error("reduction revisits a state, so some path diverges")]
    Divergent,
}

/// Steps under `policy` until no choice is enabled.
pub fn run(s: &MachineState, policy: &SchedulerPolicy, budget: usize) -> Result<RunOutcome, RunError> {
    let mut rng = match policy.mode {
        SchedulerMode::Exhaustive => return explore(s, policy, budget).map(RunOutcome::Tree),
        SchedulerMode::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        SchedulerMode::Deterministic => None,
    };
    let mut trace = Trace {
        initial: s.clone(),
        entries: Vec::new(),
        choices: Vec::new(),
        last: s.clone(),
    };
    loop {
        let choices = policy.filter(trace.last.enumerate_redexes());
        if choices.is_empty() {
            return Ok(RunOutcome::Trace(trace));
        }
        if trace.entries.len() >= budget {
            return Err(RunError::BudgetExceeded {
                budget,
                partial: Box::new(Some(trace)),
            });
        }
        let c = match &mut rng {
            Some(rng) => choices[rng.random_range(0..choices.len())].clone(),
            None => choices[0].clone(),
        };
        let next = trace.last.step(&c).expect("enumerated choices are enabled");
        trace.entries.push(TraceEntry {
            step: next.steps,
            rule_tag: c.rule,
            thread_index: c.thread,
            occurrence_path: c.path.to_string(),
            program_text: next.text(),
            measure: None,
            tower: None,
        });
        trace.choices.push(c);
        trace.last = next;
    }
}

struct Frame {
    key: String,
    succ: Vec<MachineState>,
    next: usize,
    best: usize,
}

/// All reachable final states by depth-first search with memoization.
///
/// Unless `full_interleaving` is set, a state where some thread has a local
/// step only follows that step: local steps commute with every other step.
pub fn explore(s: &MachineState, policy: &SchedulerPolicy, budget: usize) -> Result<Exploration, RunError> {
    let successors = |st: &MachineState| -> Vec<MachineState> {
        let choices = st.enumerate_redexes();
        let chosen: Vec<RedexChoice> = if policy.full_interleaving {
            choices
        } else {
            match choices.iter().find(|c| c.rule.is_local()) {
                Some(c) => vec![c.clone()],
                None => choices,
            }
        };
        chosen
            .iter()
            .map(|c| st.step(c).expect("enumerated choices are enabled"))
            .collect()
    };
    // None while a state is on the stack, Some(longest) once finished.
    let mut done: HashMap<String, Option<usize>> = HashMap::new();
    let mut finals: Vec<MachineState> = Vec::new();
    let root_key = s.key();
    done.insert(root_key.clone(), None);
    let mut stack = vec![Frame {
        key: root_key,
        succ: successors(s),
        next: 0,
        best: 0,
    }];
    if stack[0].succ.is_empty() {
        finals.push(s.clone());
    }
    let mut result = 0;
    while let Some(top) = stack.last_mut() {
        if top.next < top.succ.len() {
            let child = top.succ[top.next].clone();
            top.next += 1;
            let key = child.key();
            match done.get(&key) {
                Some(Some(len)) => top.best = top.best.max(len + 1),
                Some(None) => return Err(RunError::Divergent),
                None => {
                    if done.len() >= budget {
                        return Err(RunError::BudgetExceeded {
                            budget,
                            partial: Box::new(None),
                        });
                    }
                    done.insert(key.clone(), None);
                    let succ = successors(&child);
                    if succ.is_empty() {
                        finals.push(child);
                    }
                    stack.push(Frame {
                        key,
                        succ,
                        next: 0,
                        best: 0,
                    });
                }
            }
        } else {
            let frame = stack.pop().expect("nonempty");
            done.insert(frame.key, Some(frame.best));
            match stack.last_mut() {
                Some(parent) => parent.best = parent.best.max(frame.best + 1),
                None => result = frame.best,
            }
        }
    }
    Ok(Exploration {
        finals,
        states_visited: done.len(),
        longest: result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    fn state(src: &str) -> MachineState {
        MachineState::new(&parse_term(src).unwrap()).unwrap()
    }

    #[test]
    fn value_has_empty_trace() {
        let t = run(&state("\\x. x"), &SchedulerPolicy::deterministic(), 10)
            .unwrap()
            .trace()
            .unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn seeded_runs_repeat() {
        let s = state("set(r, *) | set(r, !*) | (let !x = get(r) in !x) | get(r)");
        let a = run(&s, &SchedulerPolicy::seeded(7), 100).unwrap().trace().unwrap();
        let b = run(&s, &SchedulerPolicy::seeded(7), 100).unwrap().trace().unwrap();
        assert_eq!(a.choices, b.choices);
        assert_eq!(a.to_jsonl(), b.to_jsonl());
    }

    #[test]
    fn budget_is_distinct_from_stuck() {
        let omega = state("let !d = !(\\x. let !y = x in y !y) in d !d");
        assert!(matches!(
            run(&omega, &SchedulerPolicy::deterministic(), 20),
            Err(RunError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn exploration_covers_both_read_rules() {
        let s = state("(let !x = get(r) in set(r, !x)) | r <= !(\\x. x *)");
        let e = explore(&s, &SchedulerPolicy::exhaustive(), 1000).unwrap();
        // Copy leaves two entries, consume leaves one.
        let mut sizes: Vec<usize> = e.finals.iter().map(|f| f.program.store.len()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 2]);
        // Consume, let-bang, write.
        assert_eq!(e.longest, 3);
    }

    #[test]
    fn full_interleaving_agrees_on_finals() {
        let s = state("((\\x. x) (set(r, *))) | ((\\y. y) (set(r, !*)))");
        let por = explore(&s, &SchedulerPolicy::exhaustive(), 1000).unwrap();
        let full = explore(
            &s,
            &SchedulerPolicy {
                full_interleaving: true,
                ..SchedulerPolicy::exhaustive()
            },
            1000,
        )
        .unwrap();
        let keys = |e: &Exploration| {
            let mut k: Vec<String> = e.finals.iter().map(|f| f.key()).collect();
            k.sort();
            k.dedup();
            k
        };
        assert_eq!(keys(&por), keys(&full));
        assert!(full.states_visited >= por.states_visited);
    }
}
