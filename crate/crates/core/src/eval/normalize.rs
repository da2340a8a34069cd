//! Strong reduction with the two functional rules.

use std::cell::RefCell;
use std::rc::Rc;

use crate::syntax::{instantiate, Hint, Term};
use crate::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("step budget of {budget} exhausted")]
pub struct BudgetExceeded {
    pub budget: usize,
}

fn bang_contents(t: &Term) -> Option<&Term> {
    match t.peel() {
        Term::Bang(x) => Some(x),
        _ => None,
    }
}

/// Contracts the leftmost-outermost `(λx.M)N` or `let !x = !N in M`, anywhere.
pub fn strong_step(t: &Term) -> Option<Term> {
    match t {
        Term::App(f, a) => {
            if let Term::Lam { body, .. } = f.peel() {
                return Some(instantiate(body, a));
            }
            if let Some(f2) = strong_step(f) {
                return Some(Term::App(Box::new(f2), a.clone()));
            }
            strong_step(a).map(|a2| Term::App(f.clone(), Box::new(a2)))
        }
        Term::LetBang { hint, ann, bound, body } => {
            if let Some(n) = bang_contents(bound) {
                return Some(instantiate(body, n));
            }
            let rebuild = |bound: Term, body: Term| Term::LetBang {
                hint: hint.clone(),
                ann: ann.clone(),
                bound: Box::new(bound),
                body: Box::new(body),
            };
            if let Some(b2) = strong_step(bound) {
                return Some(rebuild(b2, (**body).clone()));
            }
            strong_step(body).map(|m2| rebuild((**bound).clone(), m2))
        }
        Term::Lam { hint, ann, body } => strong_step(body).map(|b| Term::Lam {
            hint: hint.clone(),
            ann: ann.clone(),
            body: Box::new(b),
        }),
        Term::Bang(x) => strong_step(x).map(Term::bang),
        Term::TyAbs { tvar, body } => strong_step(body).map(|b| Term::TyAbs {
            tvar: tvar.clone(),
            body: Box::new(b),
        }),
        Term::TyApp(x, ty) => strong_step(x).map(|x2| Term::TyApp(Box::new(x2), ty.clone())),
        Term::Get(x) => strong_step(x).map(|x2| Term::Get(Box::new(x2))),
        Term::Set(x, v) => {
            if let Some(x2) = strong_step(x) {
                return Some(Term::Set(Box::new(x2), v.clone()));
            }
            strong_step(v).map(|v2| Term::Set(x.clone(), Box::new(v2)))
        }
        Term::New { hint, region, body } => strong_step(body).map(|b| Term::New {
            hint: hint.clone(),
            region: region.clone(),
            body: Box::new(b),
        }),
        Term::Par(a, b) => {
            if let Some(a2) = strong_step(a) {
                return Some(Term::Par(Box::new(a2), b.clone()));
            }
            strong_step(b).map(|b2| Term::Par(a.clone(), Box::new(b2)))
        }
        Term::Store(l, v) => strong_step(v).map(|v2| Term::Store(l.clone(), Box::new(v2))),
        Term::Unit | Term::Bound(_) | Term::Free(_) | Term::Loc(_) => None,
    }
}

/// Normal form of the erasure of `t` within `budget` contractions.
///
/// Evaluates into closures with call-by-need arguments and reads the result
/// back, so the contraction count can be lower than that of iterating
/// [`strong_step`]; both reach the same normal form when one exists.
pub fn strong_normalize(t: &Term, budget: usize) -> Result<Term, BudgetExceeded> {
    let mut m = Nbe { steps: 0, budget };
    let v = m.eval(&None, t)?;
    m.quote(0, &v)
}

type Env<'a> = Option<Rc<Frame<'a>>>;

struct Frame<'a> {
    head: Thunk<'a>,
    tail: Env<'a>,
}

#[derive(Clone)]
struct Thunk<'a>(Rc<RefCell<Suspension<'a>>>);

enum Suspension<'a> {
    Delayed(Env<'a>, &'a Term),
    Forcing,
    Done(Val<'a>),
}

#[derive(Clone)]
enum Val<'a> {
    Lam(Env<'a>, &'a Hint, &'a Term),
    Bang(Thunk<'a>),
    /// A variable bound during read-back, by binder level.
    Level(u32),
    Free(&'a Name),
    App(Rc<Val<'a>>, Thunk<'a>),
    LetBang(Rc<Val<'a>>, Env<'a>, &'a Hint, &'a Term),
    /// A constructor the functional rules do not contract.
    Inert(Env<'a>, &'a Term),
}

fn extend<'a>(env: &Env<'a>, head: Thunk<'a>) -> Env<'a> {
    Some(Rc::new(Frame {
        head,
        tail: env.clone(),
    }))
}

fn lookup<'a>(env: &Env<'a>, i: u32) -> Thunk<'a> {
    let mut cur = env.as_ref().expect("locally closed term");
    for _ in 0..i {
        cur = cur.tail.as_ref().expect("locally closed term");
    }
    cur.head.clone()
}

fn ready(v: Val<'_>) -> Thunk<'_> {
    Thunk(Rc::new(RefCell::new(Suspension::Done(v))))
}

struct Nbe {
    steps: usize,
    budget: usize,
}

impl Nbe {
    fn contract(&mut self) -> Result<(), BudgetExceeded> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(BudgetExceeded { budget: self.budget });
        }
        Ok(())
    }

    fn force<'a>(&mut self, th: &Thunk<'a>) -> Result<Val<'a>, BudgetExceeded> {
        let state = std::mem::replace(&mut *th.0.borrow_mut(), Suspension::Forcing);
        let v = match state {
            Suspension::Done(v) => v,
            Suspension::Delayed(env, t) => self.eval(&env, t)?,
            Suspension::Forcing => unreachable!("no term refers to itself"),
        };
        *th.0.borrow_mut() = Suspension::Done(v.clone());
        Ok(v)
    }

    fn eval<'a>(&mut self, env: &Env<'a>, t: &'a Term) -> Result<Val<'a>, BudgetExceeded> {
        Ok(match t {
            Term::Bound(i) => self.force(&lookup(env, *i))?,
            Term::Free(x) => Val::Free(x),
            Term::Lam { hint, body, .. } => Val::Lam(env.clone(), hint, body),
            Term::App(f, a) => {
                let f = self.eval(env, f)?;
                let a = Thunk(Rc::new(RefCell::new(Suspension::Delayed(env.clone(), a))));
                self.apply(f, a)?
            }
            Term::Bang(x) => Val::Bang(Thunk(Rc::new(RefCell::new(Suspension::Delayed(env.clone(), x))))),
            Term::LetBang { hint, bound, body, .. } => match self.eval(env, bound)? {
                Val::Bang(th) => {
                    self.contract()?;
                    self.eval(&extend(env, th), body)?
                }
                v => Val::LetBang(Rc::new(v), env.clone(), hint, body),
            },
            Term::TyAbs { body, .. } => self.eval(env, body)?,
            Term::TyApp(x, _) => self.eval(env, x)?,
            Term::Unit
            | Term::Loc(_)
            | Term::Get(_)
            | Term::Set(..)
            | Term::Store(..)
            | Term::Par(..)
            | Term::New { .. } => Val::Inert(env.clone(), t),
        })
    }

    fn apply<'a>(&mut self, f: Val<'a>, a: Thunk<'a>) -> Result<Val<'a>, BudgetExceeded> {
        match f {
            Val::Lam(env, _, body) => {
                self.contract()?;
                self.eval(&extend(&env, a), body)
            }
            f => Ok(Val::App(Rc::new(f), a)),
        }
    }

    /// Normal form of `t` under `env` at `level` enclosing binders.
    fn normal<'a>(&mut self, level: u32, env: &Env<'a>, t: &'a Term) -> Result<Term, BudgetExceeded> {
        let v = self.eval(env, t)?;
        self.quote(level, &v)
    }

    fn under<'a>(&mut self, level: u32, env: &Env<'a>, body: &'a Term) -> Result<Term, BudgetExceeded> {
        self.normal(level + 1, &extend(env, ready(Val::Level(level))), body)
    }

    fn quote(&mut self, level: u32, v: &Val<'_>) -> Result<Term, BudgetExceeded> {
        Ok(match v {
            Val::Lam(env, hint, body) => Term::Lam {
                hint: (*hint).clone(),
                ann: None,
                body: Box::new(self.under(level, env, body)?),
            },
            Val::Bang(th) => {
                let inner = self.force(th)?;
                Term::bang(self.quote(level, &inner)?)
            }
            Val::Level(l) => Term::Bound(level - l - 1),
            Val::Free(x) => Term::Free((*x).clone()),
            Val::App(f, a) => {
                let f = self.quote(level, f)?;
                let a = self.force(a)?;
                Term::App(Box::new(f), Box::new(self.quote(level, &a)?))
            }
            Val::LetBang(bound, env, hint, body) => Term::LetBang {
                hint: (*hint).clone(),
                ann: None,
                bound: Box::new(self.quote(level, bound)?),
                body: Box::new(self.under(level, env, body)?),
            },
            Val::Inert(env, t) => match t {
                Term::Unit | Term::Loc(_) => (*t).clone(),
                Term::Get(x) => Term::Get(Box::new(self.normal(level, env, x)?)),
                Term::Set(x, v) => Term::Set(
                    Box::new(self.normal(level, env, x)?),
                    Box::new(self.normal(level, env, v)?),
                ),
                Term::Store(l, v) => Term::Store(l.clone(), Box::new(self.normal(level, env, v)?)),
                Term::Par(a, b) => Term::Par(
                    Box::new(self.normal(level, env, a)?),
                    Box::new(self.normal(level, env, b)?),
                ),
                Term::New { hint, region, body } => Term::New {
                    hint: hint.clone(),
                    region: region.clone(),
                    body: Box::new(self.under(level, env, body)?),
                },
                _ => unreachable!("only inert constructors are suspended"),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    #[test]
    fn reduces_under_binders() {
        let t = parse_term("\\x. !((\\y. y) x)").unwrap();
        assert_eq!(strong_normalize(&t, 10).unwrap(), parse_term("\\x. !x").unwrap());
    }

    #[test]
    fn budget_is_reported() {
        let omega = parse_term("let !d = !(\\x. let !y = x in y !y) in d !d").unwrap();
        assert_eq!(strong_normalize(&omega, 50), Err(BudgetExceeded { budget: 50 }));
    }

    #[test]
    fn outermost_first() {
        // The outer redex discards the inner one.
        let t = parse_term("(\\x. \\y. y) ((\\z. z) *)").unwrap();
        let once = strong_step(&t).unwrap();
        assert_eq!(once, parse_term("\\y. y").unwrap());
    }

    fn iterate(t: &Term, budget: usize) -> Option<Term> {
        let mut cur = t.erase();
        for _ in 0..budget {
            match strong_step(&cur) {
                Some(next) => cur = next,
                None => return Some(cur),
            }
        }
        None
    }

    #[test]
    fn agrees_with_single_steps() {
        for src in [
            "\\x. !((\\y. y) x)",
            "(\\x. \\y. y) ((\\z. z) *)",
            "\\f. let !g = f in !(\\x. g (g x))",
            "let !f = !(\\x. \\y. x) in !(\\z. f z (f z *))",
            "\\x. let !y = x in !(\\w. (\\k. k y) (\\m. m))",
            "(\\x. x) get(r) | r <= !(\\y. (\\z. z) y)",
            "new a : r in set(a, (\\x. x) *)",
            "\\x. (\\y. \\z. y z) x",
        ] {
            let t = parse_term(src).unwrap();
            assert_eq!(strong_normalize(&t, 1000).ok(), iterate(&t, 1000), "{src}");
        }
    }

    #[test]
    fn arithmetic_agrees_with_single_steps() {
        use crate::encodings::{lookup, numeral};
        for (f, args) in [
            ("add", vec![2, 3]),
            ("mult", vec![3, 2]),
            ("pred", vec![3]),
            ("sub", vec![4, 1]),
        ] {
            let t = args
                .iter()
                .fold(lookup(f).unwrap(), |acc, &n| Term::app(acc, numeral(n)));
            assert_eq!(strong_normalize(&t, 100_000).ok(), iterate(&t, 100_000), "{f}");
        }
    }

    #[test]
    fn normal_forms_are_fixed_points() {
        let t = parse_term("\\f. let !g = f in !(\\x. g (g x))").unwrap();
        let nf = strong_normalize(&t, 10).unwrap();
        assert_eq!(strong_step(&nf), None);
        assert_eq!(strong_normalize(&nf, 0), Ok(nf));
    }
}
