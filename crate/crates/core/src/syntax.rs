//! Abstract syntax of programs: terms, stores and parallel composition.
//!
//! Bound variables are de Bruijn indices and free variables are names
//! (locally nameless), so the derived equality on [`Term`] is
//! α-equivalence. Binder names survive only as printing hints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::types::{type_subst, Type};
use crate::Name;

/// Printing hint carried by binders. Never affects equality.
#[derive(Clone, Debug)]
pub struct Hint(pub Name);

impl PartialEq for Hint {
    fn eq(&self, _: &Hint) -> bool {
        true
    }
}

impl Eq for Hint {}

impl Hint {
    pub fn new(name: &str) -> Hint {
        Hint(Arc::from(name))
    }
}

/// Identity of a store address.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AddrId {
    /// Declared in the source program.
    Named(Name),
    /// Generated by `new` at run time.
    Fresh(u32),
}

/// A store location: a region constant or an address tagged with its region.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Loc {
    Region(Name),
    Address { id: AddrId, region: Name },
}

impl Loc {
    pub fn region(&self) -> &Name {
        match self {
            Loc::Region(r) => r,
            Loc::Address { region, .. } => region,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Unit,
    /// de Bruijn index counted outward through `λ`, `let !` (body) and `new`.
    Bound(u32),
    Free(Name),
    Loc(Loc),
    Lam {
        hint: Hint,
        ann: Option<Type>,
        body: Box<Term>,
    },
    App(Box<Term>, Box<Term>),
    Bang(Box<Term>),
    LetBang {
        hint: Hint,
        ann: Option<Type>,
        bound: Box<Term>,
        body: Box<Term>,
    },
    /// `get(·)`; the target is a location or a variable standing for one.
    Get(Box<Term>),
    /// `set(·, V)`.
    Set(Box<Term>, Box<Term>),
    /// Store `r ⇐ V`.
    Store(Loc, Box<Term>),
    Par(Box<Term>, Box<Term>),
    /// `new x:r in M`: allocates a fresh address of region `r`.
    New {
        hint: Hint,
        region: Name,
        body: Box<Term>,
    },
    /// Type abstraction `Λt.M`; erased before evaluation-relevant analyses.
    TyAbs {
        tvar: Name,
        body: Box<Term>,
    },
    /// Type application `M [A]`.
    TyApp(Box<Term>, Type),
}

/// Constructor at an occurrence, annotation nodes excluded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum NodeKind {
    Unit,
    Var,
    Loc,
    Lam,
    App,
    Bang,
    LetBang,
    Get,
    Set,
    Store,
    Par,
    New,
}

/// An address in `{0,1}*`; unary constructors extend with `0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<u8>);

impl Path {
    pub fn root() -> Path {
        Path(Vec::new())
    }

    pub fn child(&self, bit: u8) -> Path {
        let mut v = self.0.clone();
        v.push(bit);
        Path(v)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl serde::Serialize for Path {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub path: Path,
    pub kind: NodeKind,
    pub naive_depth: u32,
    /// Region of the enclosing store, when the path passes under `r ⇐`.
    pub store_region: Option<Name>,
}

/// Region name ↦ depth.
pub type RegionDepthContext = BTreeMap<Name, u32>;

/// Free variable ↦ depth.
pub type VarDepthContext = BTreeMap<Name, u32>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SyntaxError {
    #[error("region `{0}` has no depth in the region context")]
    UnknownRegion(Name),
    #[error("store at {0} is not in a static context")]
    IllPlacedStore(Path),
}

impl Term {
    pub fn lam(hint: &str, body: Term) -> Term {
        Term::Lam {
            hint: Hint::new(hint),
            ann: None,
            body: Box::new(body),
        }
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn bang(t: Term) -> Term {
        Term::Bang(Box::new(t))
    }

    pub fn bangs(n: usize, t: Term) -> Term {
        (0..n).fold(t, |acc, _| Term::bang(acc))
    }

    pub fn let_bang(hint: &str, bound: Term, body: Term) -> Term {
        Term::LetBang {
            hint: Hint::new(hint),
            ann: None,
            bound: Box::new(bound),
            body: Box::new(body),
        }
    }

    pub fn par(a: Term, b: Term) -> Term {
        Term::Par(Box::new(a), Box::new(b))
    }

    pub fn free(name: &str) -> Term {
        Term::Free(Arc::from(name))
    }

    pub fn region(name: &str) -> Term {
        Term::Loc(Loc::Region(Arc::from(name)))
    }

    pub fn store(loc: Loc, v: Term) -> Term {
        Term::Store(loc, Box::new(v))
    }

    /// Builds `λx.M` where `body` refers to `x` as a free name.
    pub fn abstract_lam(name: &str, ann: Option<Type>, body: Term) -> Term {
        Term::Lam {
            hint: Hint::new(name),
            ann,
            body: Box::new(close(&body, name)),
        }
    }

    /// Builds `let !x = N in M` where `body` refers to `x` as a free name.
    pub fn abstract_let(name: &str, ann: Option<Type>, bound: Term, body: Term) -> Term {
        Term::LetBang {
            hint: Hint::new(name),
            ann,
            bound: Box::new(bound),
            body: Box::new(close(&body, name)),
        }
    }

    /// Peels type abstractions and applications.
    pub fn peel(&self) -> &Term {
        let mut cur = self;
        loop {
            match cur {
                Term::TyAbs { body, .. } => cur = body,
                Term::TyApp(inner, _) => cur = inner,
                _ => return cur,
            }
        }
    }

    /// Syntactic values (annotation nodes are transparent).
    pub fn is_value(&self) -> bool {
        match self.peel() {
            Term::Unit | Term::Bound(_) | Term::Free(_) | Term::Loc(_) | Term::Lam { .. } => true,
            Term::Bang(inner) => inner.is_value(),
            _ => false,
        }
    }

    pub fn is_store(&self) -> bool {
        match self {
            Term::Store(..) => true,
            Term::Par(a, b) => a.is_store() && b.is_store(),
            _ => false,
        }
    }

    pub fn kind(&self) -> Option<NodeKind> {
        Some(match self {
            Term::Unit => NodeKind::Unit,
            Term::Bound(_) | Term::Free(_) => NodeKind::Var,
            Term::Loc(_) => NodeKind::Loc,
            Term::Lam { .. } => NodeKind::Lam,
            Term::App(..) => NodeKind::App,
            Term::Bang(_) => NodeKind::Bang,
            Term::LetBang { .. } => NodeKind::LetBang,
            Term::Get(_) => NodeKind::Get,
            Term::Set(..) => NodeKind::Set,
            Term::Store(..) => NodeKind::Store,
            Term::Par(..) => NodeKind::Par,
            Term::New { .. } => NodeKind::New,
            Term::TyAbs { .. } | Term::TyApp(..) => return None,
        })
    }

    /// Addressed children `(bit, child)`, annotation nodes skipped.
    pub fn children(&self) -> Vec<(u8, &Term)> {
        match self {
            Term::Unit | Term::Bound(_) | Term::Free(_) | Term::Loc(_) | Term::Get(_) => vec![],
            Term::Lam { body, .. } | Term::New { body, .. } => vec![(0, body.addressed())],
            Term::Bang(t) | Term::Store(_, t) | Term::Set(_, t) => vec![(0, t.addressed())],
            Term::App(a, b) | Term::Par(a, b) => vec![(0, a.addressed()), (1, b.addressed())],
            Term::LetBang { bound, body, .. } => {
                vec![(0, bound.addressed()), (1, body.addressed())]
            }
            Term::TyAbs { .. } | Term::TyApp(..) => self.addressed().children(),
        }
    }

    /// The node that carries this term's address (annotations peeled).
    pub fn addressed(&self) -> &Term {
        self.peel()
    }

    /// Subterm at an occurrence path.
    pub fn at_path(&self, path: &Path) -> Option<&Term> {
        let mut cur = self.addressed();
        for bit in &path.0 {
            cur = cur.children().into_iter().find(|(b, _)| b == bit)?.1;
        }
        Some(cur)
    }

    /// Drops every annotation: `Λ`, `[A]` and binder types.
    pub fn erase(&self) -> Term {
        match self {
            Term::Unit | Term::Bound(_) | Term::Free(_) | Term::Loc(_) => self.clone(),
            Term::Lam { hint, body, .. } => Term::Lam {
                hint: hint.clone(),
                ann: None,
                body: Box::new(body.erase()),
            },
            Term::App(a, b) => Term::app(a.erase(), b.erase()),
            Term::Bang(t) => Term::bang(t.erase()),
            Term::LetBang { hint, bound, body, .. } => Term::LetBang {
                hint: hint.clone(),
                ann: None,
                bound: Box::new(bound.erase()),
                body: Box::new(body.erase()),
            },
            Term::Get(t) => Term::Get(Box::new(t.erase())),
            Term::Set(t, v) => Term::Set(Box::new(t.erase()), Box::new(v.erase())),
            Term::Store(l, v) => Term::Store(l.clone(), Box::new(v.erase())),
            Term::Par(a, b) => Term::par(a.erase(), b.erase()),
            Term::New { hint, region, body } => Term::New {
                hint: hint.clone(),
                region: region.clone(),
                body: Box::new(body.erase()),
            },
            Term::TyAbs { body, .. } => body.erase(),
            Term::TyApp(t, _) => t.erase(),
        }
    }

    /// Every region named by the term: constants, addresses, stores and `new`.
    pub fn regions(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| match t {
            Term::Loc(l) | Term::Store(l, _) => {
                out.insert(l.region().clone());
            }
            Term::New { region, .. } => {
                out.insert(region.clone());
            }
            _ => {}
        });
        out
    }

    /// Pre-order traversal over every node, annotation nodes and get/set targets included.
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        match self {
            Term::Unit | Term::Bound(_) | Term::Free(_) | Term::Loc(_) => {}
            Term::Lam { body, .. } | Term::New { body, .. } | Term::TyAbs { body, .. } => body.visit(f),
            Term::Bang(t) | Term::Store(_, t) | Term::Get(t) | Term::TyApp(t, _) => t.visit(f),
            Term::App(a, b) | Term::Par(a, b) | Term::Set(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Term::LetBang { bound, body, .. } => {
                bound.visit(f);
                body.visit(f);
            }
        }
    }

    /// Number of annotation-free AST nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        for_each_occurrence(self, |_| n += 1);
        n
    }
}

/// Set of free variables.
pub fn free_vars(term: &Term) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    term.visit(&mut |t| {
        if let Term::Free(x) = t {
            out.insert(x.clone());
        }
    });
    out
}

/// Number of free occurrences of `x`.
pub fn fo_count(x: &str, term: &Term) -> usize {
    let mut n = 0;
    term.visit(&mut |t| {
        if matches!(t, Term::Free(y) if &**y == x) {
            n += 1;
        }
    });
    n
}

/// Number of occurrences of the variable bound `level` binders above `term`.
pub fn bound_count(term: &Term, level: u32) -> usize {
    match term {
        Term::Bound(i) => usize::from(*i == level),
        Term::Unit | Term::Free(_) | Term::Loc(_) => 0,
        Term::Lam { body, .. } | Term::New { body, .. } => bound_count(body, level + 1),
        Term::TyAbs { body, .. } => bound_count(body, level),
        Term::Bang(t) | Term::Store(_, t) | Term::Get(t) | Term::TyApp(t, _) => bound_count(t, level),
        Term::App(a, b) | Term::Par(a, b) | Term::Set(a, b) => bound_count(a, level) + bound_count(b, level),
        Term::LetBang { bound, body, .. } => bound_count(bound, level) + bound_count(body, level + 1),
    }
}

/// True when no de Bruijn index escapes the term.
pub fn is_locally_closed(term: &Term) -> bool {
    fn go(t: &Term, depth: u32) -> bool {
        match t {
            Term::Bound(i) => *i < depth,
            Term::Unit | Term::Free(_) | Term::Loc(_) => true,
            Term::Lam { body, .. } | Term::New { body, .. } => go(body, depth + 1),
            Term::TyAbs { body, .. } => go(body, depth),
            Term::Bang(t) | Term::Store(_, t) | Term::Get(t) | Term::TyApp(t, _) => go(t, depth),
            Term::App(a, b) | Term::Par(a, b) | Term::Set(a, b) => go(a, depth) && go(b, depth),
            Term::LetBang { bound, body, .. } => go(bound, depth) && go(body, depth + 1),
        }
    }
    go(term, 0)
}

/// Adds `delta` to every index at or above `cutoff`.
pub fn shift(term: &Term, delta: i64, cutoff: u32) -> Term {
    map_bound(term, cutoff, &|i, c| {
        if i >= c {
            Term::Bound((i as i64 + delta) as u32)
        } else {
            Term::Bound(i)
        }
    })
}

fn map_bound(term: &Term, cutoff: u32, f: &impl Fn(u32, u32) -> Term) -> Term {
    match term {
        Term::Bound(i) => f(*i, cutoff),
        Term::Unit | Term::Free(_) | Term::Loc(_) => term.clone(),
        Term::Lam { hint, ann, body } => Term::Lam {
            hint: hint.clone(),
            ann: ann.clone(),
            body: Box::new(map_bound(body, cutoff + 1, f)),
        },
        Term::New { hint, region, body } => Term::New {
            hint: hint.clone(),
            region: region.clone(),
            body: Box::new(map_bound(body, cutoff + 1, f)),
        },
        Term::TyAbs { tvar, body } => Term::TyAbs {
            tvar: tvar.clone(),
            body: Box::new(map_bound(body, cutoff, f)),
        },
        Term::TyApp(t, ty) => Term::TyApp(Box::new(map_bound(t, cutoff, f)), ty.clone()),
        Term::Bang(t) => Term::bang(map_bound(t, cutoff, f)),
        Term::Store(l, t) => Term::Store(l.clone(), Box::new(map_bound(t, cutoff, f))),
        Term::Get(t) => Term::Get(Box::new(map_bound(t, cutoff, f))),
        Term::App(a, b) => Term::app(map_bound(a, cutoff, f), map_bound(b, cutoff, f)),
        Term::Par(a, b) => Term::par(map_bound(a, cutoff, f), map_bound(b, cutoff, f)),
        Term::Set(a, b) => Term::Set(Box::new(map_bound(a, cutoff, f)), Box::new(map_bound(b, cutoff, f))),
        Term::LetBang { hint, ann, bound, body } => Term::LetBang {
            hint: hint.clone(),
            ann: ann.clone(),
            bound: Box::new(map_bound(bound, cutoff, f)),
            body: Box::new(map_bound(body, cutoff + 1, f)),
        },
    }
}

/// Contracts a binder: replaces index 0 of `body` by `arg` and lowers the rest.
pub fn instantiate(body: &Term, arg: &Term) -> Term {
    let closed = is_locally_closed(arg);
    map_bound(body, 0, &|i, c| {
        if i == c {
            if closed || c == 0 {
                arg.clone()
            } else {
                shift(arg, c as i64, 0)
            }
        } else if i > c {
            Term::Bound(i - 1)
        } else {
            Term::Bound(i)
        }
    })
}

/// Turns the free name `x` into the index bound by a new enclosing binder.
pub fn close(term: &Term, x: &str) -> Term {
    fn go(t: &Term, x: &str, depth: u32) -> Term {
        match t {
            Term::Free(y) if &**y == x => Term::Bound(depth),
            Term::Bound(i) if *i >= depth => Term::Bound(i + 1),
            Term::Unit | Term::Free(_) | Term::Loc(_) | Term::Bound(_) => t.clone(),
            Term::Lam { hint, ann, body } => Term::Lam {
                hint: hint.clone(),
                ann: ann.clone(),
                body: Box::new(go(body, x, depth + 1)),
            },
            Term::New { hint, region, body } => Term::New {
                hint: hint.clone(),
                region: region.clone(),
                body: Box::new(go(body, x, depth + 1)),
            },
            Term::TyAbs { tvar, body } => Term::TyAbs {
                tvar: tvar.clone(),
                body: Box::new(go(body, x, depth)),
            },
            Term::TyApp(a, ty) => Term::TyApp(Box::new(go(a, x, depth)), ty.clone()),
            Term::Bang(a) => Term::bang(go(a, x, depth)),
            Term::Store(l, a) => Term::Store(l.clone(), Box::new(go(a, x, depth))),
            Term::Get(a) => Term::Get(Box::new(go(a, x, depth))),
            Term::App(a, b) => Term::app(go(a, x, depth), go(b, x, depth)),
            Term::Par(a, b) => Term::par(go(a, x, depth), go(b, x, depth)),
            Term::Set(a, b) => Term::Set(Box::new(go(a, x, depth)), Box::new(go(b, x, depth))),
            Term::LetBang { hint, ann, bound, body } => Term::LetBang {
                hint: hint.clone(),
                ann: ann.clone(),
                bound: Box::new(go(bound, x, depth)),
                body: Box::new(go(body, x, depth + 1)),
            },
        }
    }
    go(term, x, 0)
}

/// `M[V/x]` for a free name `x`. Capture is impossible: bound variables are indices.
pub fn subst(term: &Term, value: &Term, x: &str) -> Term {
    fn go(t: &Term, v: &Term, x: &str, depth: u32, closed: bool) -> Term {
        match t {
            Term::Free(y) if &**y == x => {
                if closed || depth == 0 {
                    v.clone()
                } else {
                    shift(v, depth as i64, 0)
                }
            }
            Term::Unit | Term::Free(_) | Term::Loc(_) | Term::Bound(_) => t.clone(),
            Term::Lam { hint, ann, body } => Term::Lam {
                hint: hint.clone(),
                ann: ann.clone(),
                body: Box::new(go(body, v, x, depth + 1, closed)),
            },
            Term::New { hint, region, body } => Term::New {
                hint: hint.clone(),
                region: region.clone(),
                body: Box::new(go(body, v, x, depth + 1, closed)),
            },
            Term::TyAbs { tvar, body } => Term::TyAbs {
                tvar: tvar.clone(),
                body: Box::new(go(body, v, x, depth, closed)),
            },
            Term::TyApp(a, ty) => Term::TyApp(Box::new(go(a, v, x, depth, closed)), ty.clone()),
            Term::Bang(a) => Term::bang(go(a, v, x, depth, closed)),
            Term::Store(l, a) => Term::Store(l.clone(), Box::new(go(a, v, x, depth, closed))),
            Term::Get(a) => Term::Get(Box::new(go(a, v, x, depth, closed))),
            Term::App(a, b) => Term::app(go(a, v, x, depth, closed), go(b, v, x, depth, closed)),
            Term::Par(a, b) => Term::par(go(a, v, x, depth, closed), go(b, v, x, depth, closed)),
            Term::Set(a, b) => Term::Set(
                Box::new(go(a, v, x, depth, closed)),
                Box::new(go(b, v, x, depth, closed)),
            ),
            Term::LetBang { hint, ann, bound, body } => Term::LetBang {
                hint: hint.clone(),
                ann: ann.clone(),
                bound: Box::new(go(bound, v, x, depth, closed)),
                body: Box::new(go(body, v, x, depth + 1, closed)),
            },
        }
    }
    if fo_count(x, term) == 0 {
        return term.clone();
    }
    go(term, value, x, 0, is_locally_closed(value))
}

/// Substitutes a type for a `Λ`-bound type variable throughout a term's annotations.
pub fn term_type_subst(term: &Term, ty: &Type, tvar: &str) -> Term {
    let sub = |a: &Option<Type>| a.as_ref().map(|a| type_subst(a, ty, tvar));
    match term {
        Term::Unit | Term::Bound(_) | Term::Free(_) | Term::Loc(_) => term.clone(),
        Term::Lam { hint, ann, body } => Term::Lam {
            hint: hint.clone(),
            ann: sub(ann),
            body: Box::new(term_type_subst(body, ty, tvar)),
        },
        Term::LetBang { hint, ann, bound, body } => Term::LetBang {
            hint: hint.clone(),
            ann: sub(ann),
            bound: Box::new(term_type_subst(bound, ty, tvar)),
            body: Box::new(term_type_subst(body, ty, tvar)),
        },
        Term::New { hint, region, body } => Term::New {
            hint: hint.clone(),
            region: region.clone(),
            body: Box::new(term_type_subst(body, ty, tvar)),
        },
        Term::TyAbs { tvar: u, .. } if &**u == tvar => term.clone(),
        Term::TyAbs { tvar: u, body } => {
            let fv = ty.free_vars();
            if fv.contains(u) {
                let mut avoid = fv;
                avoid.insert(tvar.into());
                collect_term_tvars(body, &mut avoid);
                let fresh = crate::types::fresh_name(u, &avoid);
                let renamed = term_type_subst(body, &Type::Var(fresh.clone()), u);
                Term::TyAbs {
                    tvar: fresh,
                    body: Box::new(term_type_subst(&renamed, ty, tvar)),
                }
            } else {
                Term::TyAbs {
                    tvar: u.clone(),
                    body: Box::new(term_type_subst(body, ty, tvar)),
                }
            }
        }
        Term::TyApp(a, b) => Term::TyApp(Box::new(term_type_subst(a, ty, tvar)), type_subst(b, ty, tvar)),
        Term::Bang(a) => Term::bang(term_type_subst(a, ty, tvar)),
        Term::Store(l, a) => Term::Store(l.clone(), Box::new(term_type_subst(a, ty, tvar))),
        Term::Get(a) => Term::Get(Box::new(term_type_subst(a, ty, tvar))),
        Term::App(a, b) => Term::app(term_type_subst(a, ty, tvar), term_type_subst(b, ty, tvar)),
        Term::Par(a, b) => Term::par(term_type_subst(a, ty, tvar), term_type_subst(b, ty, tvar)),
        Term::Set(a, b) => Term::Set(
            Box::new(term_type_subst(a, ty, tvar)),
            Box::new(term_type_subst(b, ty, tvar)),
        ),
    }
}

fn collect_term_tvars(term: &Term, out: &mut BTreeSet<Name>) {
    term.visit(&mut |t| match t {
        Term::TyAbs { tvar, .. } => {
            out.insert(tvar.clone());
        }
        Term::TyApp(_, ty) => out.extend(ty.free_vars()),
        Term::Lam { ann: Some(ty), .. } | Term::LetBang { ann: Some(ty), .. } => out.extend(ty.free_vars()),
        _ => {}
    });
}

/// Contracts every `(Λt.M)[A]` in the term. Erasure is unchanged.
pub fn reduce_type_redexes(term: &Term) -> Term {
    match term {
        Term::TyApp(inner, ty) => {
            let inner = reduce_type_redexes(inner);
            match inner {
                Term::TyAbs { tvar, body } => reduce_type_redexes(&term_type_subst(&body, ty, &tvar)),
                other => Term::TyApp(Box::new(other), ty.clone()),
            }
        }
        Term::Unit | Term::Bound(_) | Term::Free(_) | Term::Loc(_) => term.clone(),
        Term::Lam { hint, ann, body } => Term::Lam {
            hint: hint.clone(),
            ann: ann.clone(),
            body: Box::new(reduce_type_redexes(body)),
        },
        Term::LetBang { hint, ann, bound, body } => Term::LetBang {
            hint: hint.clone(),
            ann: ann.clone(),
            bound: Box::new(reduce_type_redexes(bound)),
            body: Box::new(reduce_type_redexes(body)),
        },
        Term::New { hint, region, body } => Term::New {
            hint: hint.clone(),
            region: region.clone(),
            body: Box::new(reduce_type_redexes(body)),
        },
        Term::TyAbs { tvar, body } => Term::TyAbs {
            tvar: tvar.clone(),
            body: Box::new(reduce_type_redexes(body)),
        },
        Term::Bang(a) => Term::bang(reduce_type_redexes(a)),
        Term::Store(l, a) => Term::Store(l.clone(), Box::new(reduce_type_redexes(a))),
        Term::Get(a) => Term::Get(Box::new(reduce_type_redexes(a))),
        Term::App(a, b) => Term::app(reduce_type_redexes(a), reduce_type_redexes(b)),
        Term::Par(a, b) => Term::par(reduce_type_redexes(a), reduce_type_redexes(b)),
        Term::Set(a, b) => Term::Set(Box::new(reduce_type_redexes(a)), Box::new(reduce_type_redexes(b))),
    }
}

/// Visits every occurrence with its path, naive depth and enclosing store region.
pub fn for_each_occurrence(term: &Term, mut f: impl FnMut(&Occurrence)) {
    fn go(t: &Term, path: &mut Vec<u8>, depth: u32, store: &Option<Name>, f: &mut dyn FnMut(&Occurrence)) {
        let t = t.addressed();
        let kind = t.kind().expect("addressed node is never an annotation");
        f(&Occurrence {
            path: Path(path.clone()),
            kind,
            naive_depth: depth,
            store_region: store.clone(),
        });
        let child_depth = if kind == NodeKind::Bang { depth + 1 } else { depth };
        let inner_store = match t {
            Term::Store(l, _) => Some(l.region().clone()),
            _ => store.clone(),
        };
        for (bit, child) in t.children() {
            path.push(bit);
            go(child, path, child_depth, &inner_store, f);
            path.pop();
        }
    }
    go(term, &mut Vec::new(), 0, &None, &mut f);
}

pub fn occurrences(term: &Term) -> Vec<Occurrence> {
    let mut out = Vec::new();
    for_each_occurrence(term, |o| out.push(o.clone()));
    out
}

/// Maximum number of `!` strictly above any occurrence.
pub fn naive_depth(term: &Term) -> u32 {
    let mut d = 0;
    for_each_occurrence(term, |o| d = d.max(o.naive_depth));
    d
}

/// Checks that `rctx` has a depth for every region the term mentions.
pub fn check_regions_total(term: &Term, rctx: &RegionDepthContext) -> Result<(), SyntaxError> {
    match term.regions().into_iter().find(|r| !rctx.contains_key(r)) {
        Some(r) => Err(SyntaxError::UnknownRegion(r)),
        None => Ok(()),
    }
}

/// Depth of an occurrence, shifted by `R(r)` under a store `r ⇐`.
pub fn revised_depth_of(occ: &Occurrence, rctx: &RegionDepthContext) -> Result<u32, SyntaxError> {
    match &occ.store_region {
        None => Ok(occ.naive_depth),
        Some(r) => rctx
            .get(r)
            .map(|d| d + occ.naive_depth)
            .ok_or_else(|| SyntaxError::UnknownRegion(r.clone())),
    }
}

/// Per-occurrence revised depths paired with the occurrences.
pub fn revised_depths(term: &Term, rctx: &RegionDepthContext) -> Result<Vec<(Occurrence, u32)>, SyntaxError> {
    check_regions_total(term, rctx)?;
    occurrences(term)
        .into_iter()
        .map(|o| {
            let d = revised_depth_of(&o, rctx)?;
            Ok((o, d))
        })
        .collect()
}

/// Maximum revised depth of the program.
pub fn revised_depth(term: &Term, rctx: &RegionDepthContext) -> Result<u32, SyntaxError> {
    Ok(revised_depths(term, rctx)?
        .into_iter()
        .map(|(_, d)| d)
        .max()
        .unwrap_or(0))
}

/// First store found outside a static context, if any.
pub fn misplaced_store(term: &Term) -> Option<Path> {
    fn inside(t: &Term, path: &mut Vec<u8>) -> Option<Path> {
        let t = t.addressed();
        if let Term::Store(..) = t {
            return Some(Path(path.clone()));
        }
        for (bit, child) in t.children() {
            path.push(bit);
            let found = inside(child, path);
            path.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }
    fn top(t: &Term, path: &mut Vec<u8>) -> Option<Path> {
        match t.addressed() {
            Term::Par(a, b) => {
                path.push(0);
                let l = top(a, path);
                path.pop();
                if l.is_some() {
                    return l;
                }
                path.push(1);
                let r = top(b, path);
                path.pop();
                r
            }
            Term::Store(_, v) => {
                path.push(0);
                let r = inside(v, path);
                path.pop();
                r
            }
            other => inside(other, path),
        }
    }
    top(term, &mut Vec::new())
}

pub fn is_well_placed(term: &Term) -> bool {
    misplaced_store(term).is_none()
}

/// A program as a multiset of store-free threads and a bag of store entries.
#[derive(Clone, Debug, Default)]
pub struct CanonicalProgram {
    pub threads: Vec<Term>,
    pub store: Vec<(Loc, Term)>,
}

impl CanonicalProgram {
    /// Reassembles `t1 | … | tn | s1 | … | sm` (right-nested); `*` when empty.
    pub fn to_term(&self) -> Term {
        let parts: Vec<Term> = self
            .threads
            .iter()
            .cloned()
            .chain(self.store.iter().map(|(l, v)| Term::store(l.clone(), v.clone())))
            .collect();
        parts
            .into_iter()
            .rev()
            .reduce(|acc, t| Term::par(t, acc))
            .unwrap_or(Term::Unit)
    }
}

fn multiset_eq<T: PartialEq>(a: &[T], b: &[T]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|x| match (0..b.len()).find(|&j| !used[j] && b[j] == *x) {
        Some(j) => {
            used[j] = true;
            true
        }
        None => false,
    })
}

impl PartialEq for CanonicalProgram {
    fn eq(&self, other: &Self) -> bool {
        multiset_eq(&self.threads, &other.threads) && multiset_eq(&self.store, &other.store)
    }
}

/// Flattens parallel composition into threads and store entries.
pub fn canonicalize(term: &Term) -> Result<CanonicalProgram, SyntaxError> {
    if let Some(p) = misplaced_store(term) {
        return Err(SyntaxError::IllPlacedStore(p));
    }
    let mut out = CanonicalProgram::default();
    flatten_into(term, &mut out);
    Ok(out)
}

/// Flattening without the placement check; callers guarantee well-placement.
pub(crate) fn flatten_into(term: &Term, out: &mut CanonicalProgram) {
    match term {
        Term::Par(a, b) => {
            flatten_into(a, out);
            flatten_into(b, out);
        }
        Term::Store(l, v) => out.store.push((l.clone(), (**v).clone())),
        other => out.threads.push(other.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    fn t(src: &str) -> Term {
        parse_term(src).unwrap()
    }

    fn names(v: &[&str]) -> BTreeSet<Name> {
        v.iter().map(|s| Name::from(*s)).collect()
    }

    #[test]
    fn free_vars_examples() {
        assert!(free_vars(&t("\\x. let !y = x in !(y y)")).is_empty());
        assert_eq!(free_vars(&t("!(y !(y z))")), names(&["y", "z"]));
        assert_eq!(free_vars(&t("let !y = x in !(y y)")), names(&["x"]));
    }

    #[test]
    fn fo_count_examples() {
        assert_eq!(fo_count("y", &t("!(y y)")), 2);
        assert_eq!(fo_count("x", &t("\\x. x")), 0);
        assert_eq!(fo_count("y", &t("!(y !(y z))")), 2);
    }

    #[test]
    fn subst_examples() {
        assert_eq!(subst(&t("!(y y)"), &t("n"), "y"), t("!(n n)"));
        assert_eq!(subst(&t("\\z. z"), &t("n"), "x"), t("\\z. z"));
        assert_eq!(
            subst(&t("let !y = x in !(y y)"), &t("!w"), "x"),
            t("let !y = !w in !(y y)")
        );
    }

    #[test]
    fn subst_under_binder_keeps_bound_names_apart() {
        // Substituting a term mentioning free `y` under λy must not capture it.
        let got = subst(&t("\\y. x y"), &t("y"), "x");
        assert_eq!(got, t("\\z. y z"));
    }

    #[test]
    fn instantiate_shifts_open_arguments() {
        // λz.(λy.λw.y) z  contracts to  λz.λw.z
        let body = match t("\\z. (\\y. \\w. y) z") {
            Term::Lam { body, .. } => *body,
            _ => unreachable!(),
        };
        let (f, a) = match body {
            Term::App(f, a) => (*f, *a),
            _ => unreachable!(),
        };
        let inner = match f {
            Term::Lam { body, .. } => *body,
            _ => unreachable!(),
        };
        let contracted = Term::lam("z", instantiate(&inner, &a));
        assert_eq!(contracted, t("\\z. \\w. z"));
    }

    #[test]
    fn naive_depth_examples() {
        assert_eq!(naive_depth(&t("\\x. let !y = x in !(y y)")), 1);
        assert_eq!(naive_depth(&t("x")), 0);
        assert_eq!(naive_depth(&t("!(!n !(!n) z)")), 3);
    }

    #[test]
    fn dup_under_bang_addresses_and_depths() {
        let occ = occurrences(&t("\\x. let !y = x in !(y y)"));
        let got: Vec<(String, u32)> = occ.iter().map(|o| (o.path.to_string(), o.naive_depth)).collect();
        let expected = [
            ("ε", 0),
            ("0", 0),
            ("00", 0),
            ("01", 0),
            ("010", 1),
            ("0100", 1),
            ("0101", 1),
        ];
        let expected: Vec<(String, u32)> = expected.iter().map(|(p, d)| (p.to_string(), *d)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn declared_region_revised_depths() {
        let p = t("(let !x = get(r) in set(r, !x)) | r <= !(\\x. x *)");
        let mut rctx = RegionDepthContext::new();
        rctx.insert("r".into(), 0);
        let depths: BTreeMap<String, u32> = revised_depths(&p, &rctx)
            .unwrap()
            .into_iter()
            .map(|(o, d)| (o.path.to_string(), d))
            .collect();
        assert_eq!(depths["10"], 0);
        for p in ["100", "1000", "10000", "10001"] {
            assert_eq!(depths[p], 1, "path {p}");
        }
        assert_eq!(depths["0100"], 1);
    }

    #[test]
    fn revised_depth_shifts_store_contents() {
        let mut rctx = RegionDepthContext::new();
        rctx.insert("r".into(), 1);
        assert_eq!(revised_depth(&t("r <= !(\\x. x *)"), &rctx).unwrap(), 2);
        let m = t("\\x. let !y = x in !(y y)");
        assert_eq!(revised_depth(&m, &rctx).unwrap(), naive_depth(&m));
    }

    #[test]
    fn revised_depth_requires_total_context() {
        let err = revised_depth(&t("r <= *"), &RegionDepthContext::new()).unwrap_err();
        assert_eq!(err, SyntaxError::UnknownRegion("r".into()));
    }

    #[test]
    fn canonical_form_ignores_grouping() {
        let a = canonicalize(&t("m | (r <= * | s <= !*)")).unwrap();
        let b = canonicalize(&t("(s <= !* | m) | r <= *")).unwrap();
        assert_eq!(a, b);
        let single = canonicalize(&t("m")).unwrap();
        assert_eq!(single.threads, vec![t("m")]);
        assert!(single.store.is_empty());
    }

    #[test]
    fn store_under_application_is_rejected() {
        // Built by hand: the parser already refuses this shape.
        let bad = Term::app(
            Term::free("m"),
            Term::par(Term::free("n"), Term::store(Loc::Region("r".into()), Term::Unit)),
        );
        assert!(matches!(canonicalize(&bad), Err(SyntaxError::IllPlacedStore(_))));
    }
}
