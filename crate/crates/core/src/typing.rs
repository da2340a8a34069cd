//! Bidirectional checking of annotated programs against the elementary
//! affine type system with regions.
//!
//! `λ` and `let !` binders may carry types, `Λt.M` introduces `∀` and
//! `M [A]` eliminates it. Depth indices are checked alongside types.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::reader::print_type;
use crate::syntax::{bound_count, free_vars, is_locally_closed, Path, RegionDepthContext, Term, VarDepthContext};
use crate::types::{
    compatible, type_subst, wf_region_context, wf_var_context, RegionTypeContext, Type, TypedVarContext, WfError,
};
use crate::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TypeErrorKind {
    AffinityViolation,
    DepthMismatch,
    RegionDepthConflict,
    StoreDepth,
    TypeMismatch,
    EscapingTypeVariable,
    NotAStoreType,
    IllFormedType,
    UnboundVariable,
    MissingAnnotation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub occurrence_path: Path,
    pub expected: Option<String>,
    pub found: Option<String>,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}", self.kind, self.occurrence_path)?;
        match (&self.expected, &self.found) {
            (Some(e), Some(g)) => write!(f, ": expected {e}, found {g}"),
            (Some(e), None) => write!(f, ": expected {e}"),
            (None, Some(g)) => write!(f, ": found {g}"),
            (None, None) => Ok(()),
        }
    }
}

impl std::error::Error for TypeError {}

impl TypeError {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("type errors serialize")
    }
}

#[derive(Clone, Debug)]
enum Entry {
    Var {
        depth: u32,
        ty: Type,
    },
    /// Bound by `new`: an address of the region.
    Addr(Name),
}

struct Checker<'a> {
    r: &'a RegionTypeContext,
    gamma: &'a TypedVarContext,
    env: Vec<(Name, Entry)>,
    path: Vec<u8>,
}

type TResult<T> = Result<T, TypeError>;

fn show(t: &Type) -> String {
    print_type(t)
}

impl Checker<'_> {
    fn err(&self, kind: TypeErrorKind, expected: Option<String>, found: Option<String>) -> TypeError {
        TypeError {
            kind,
            occurrence_path: Path(self.path.clone()),
            expected,
            found,
        }
    }

    fn mismatch(&self, expected: &Type, found: &Type) -> TypeError {
        self.err(TypeErrorKind::TypeMismatch, Some(show(expected)), Some(show(found)))
    }

    fn wf(&self, t: &Type) -> TResult<()> {
        compatible(self.r, t).map_err(|e| self.wf_err(e, t))
    }

    fn wf_err(&self, e: WfError, t: &Type) -> TypeError {
        self.err(TypeErrorKind::IllFormedType, Some(e.to_string()), Some(show(t)))
    }

    fn at<T>(&mut self, bit: u8, f: impl FnOnce(&mut Self) -> TResult<T>) -> TResult<T> {
        self.path.push(bit);
        let r = f(self);
        self.path.pop();
        r
    }

    fn bind<T>(&mut self, name: &Name, e: Entry, f: impl FnOnce(&mut Self) -> TResult<T>) -> TResult<T> {
        self.env.push((name.clone(), e));
        let r = f(self);
        self.env.pop();
        r
    }

    fn region(&self, r: &Name) -> TResult<(u32, Type)> {
        self.r.get(r).cloned().ok_or_else(|| {
            self.err(
                TypeErrorKind::IllFormedType,
                Some(format!("region `{r}` in the region context")),
                None,
            )
        })
    }

    fn free_type_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for (_, ty) in self.r.values() {
            out.extend(ty.free_vars());
        }
        for (_, ty) in self.gamma.values() {
            out.extend(ty.free_vars());
        }
        for (_, e) in &self.env {
            if let Entry::Var { ty, .. } = e {
                out.extend(ty.free_vars());
            }
        }
        out
    }

    fn var(&self, t: &Term, delta: u32) -> TResult<Type> {
        let (name, depth, ty) = match t {
            Term::Bound(i) => {
                let (name, e) = self
                    .env
                    .iter()
                    .rev()
                    .nth(*i as usize)
                    .expect("terms are locally closed");
                match e {
                    Entry::Var { depth, ty } => (name.clone(), *depth, ty.clone()),
                    Entry::Addr(r) => return Ok(Type::Region(r.clone(), Box::new(self.region(r)?.1))),
                }
            }
            Term::Free(x) => match self.gamma.get(x) {
                Some((d, ty)) => (x.clone(), *d, ty.clone()),
                None => return Err(self.err(TypeErrorKind::UnboundVariable, None, Some(x.to_string()))),
            },
            _ => unreachable!("variables only"),
        };
        if depth != delta {
            return Err(self.err(
                TypeErrorKind::DepthMismatch,
                Some(format!("`{name}` at depth {depth}")),
                Some(format!("depth {delta}")),
            ));
        }
        Ok(ty)
    }

    /// Content type of a `get`/`set` target, whose region must sit at `delta`.
    fn target(&mut self, target: &Term, delta: u32) -> TResult<Type> {
        let ty = self.infer(target, delta)?;
        let Type::Region(r, content) = &ty else {
            return Err(self.err(TypeErrorKind::NotAStoreType, Some("Reg_r(A)".into()), Some(show(&ty))));
        };
        let (d, declared) = self.region(r)?;
        if d != delta {
            return Err(self.err(
                TypeErrorKind::RegionDepthConflict,
                Some(format!("region `{r}` at depth {d}")),
                Some(format!("depth {delta}")),
            ));
        }
        if declared != **content {
            return Err(self.mismatch(&declared, content));
        }
        Ok(declared)
    }

    fn affine(&self, hint: &Name, body: &Term) -> TResult<()> {
        if bound_count(body, 0) > 1 {
            return Err(self.err(
                TypeErrorKind::AffinityViolation,
                Some(format!("`{hint}` used at most once")),
                None,
            ));
        }
        Ok(())
    }

    fn infer(&mut self, t: &Term, delta: u32) -> TResult<Type> {
        if self.needs_isolation(t) {
            return self.isolated(|c| c.infer(t, delta));
        }
        match t {
            Term::Unit => Ok(Type::Unit),
            Term::Bound(_) | Term::Free(_) => self.var(t, delta),
            Term::Loc(l) => {
                let (_, a) = self.region(l.region())?;
                Ok(Type::Region(l.region().clone(), Box::new(a)))
            }
            Term::Lam { hint, ann, body } => {
                let Some(a) = ann else {
                    return Err(self.err(
                        TypeErrorKind::MissingAnnotation,
                        Some(format!("a type for `{}`", hint.0)),
                        None,
                    ));
                };
                self.wf(a)?;
                if !a.is_value_type() {
                    return Err(self.wf_err(WfError::BehaviourInValuePosition, a));
                }
                self.affine(&hint.0, body)?;
                let b = self.bind(
                    &hint.0,
                    Entry::Var {
                        depth: delta,
                        ty: a.clone(),
                    },
                    |c| c.at(0, |c| c.infer(body, delta)),
                )?;
                Ok(Type::arrow(a.clone(), b))
            }
            Term::App(f, a) => self.app(f, a, delta, None),
            Term::Bang(m) => Ok(Type::bang(self.at(0, |c| c.infer(m, delta + 1))?)),
            Term::LetBang { .. } => self.let_bang(t, delta, None),
            Term::Get(target) => self.target(target, delta),
            Term::Set(target, v) => {
                let a = self.target(target, delta)?;
                self.at(0, |c| c.check(v, delta, &a))?;
                Ok(Type::Unit)
            }
            Term::Store(l, v) => {
                if delta != 0 {
                    return Err(self.err(
                        TypeErrorKind::StoreDepth,
                        Some("depth 0".into()),
                        Some(format!("depth {delta}")),
                    ));
                }
                let (d, a) = self.region(l.region())?;
                self.at(0, |c| c.check(v, d, &a)).map_err(|e| {
                    if e.kind == TypeErrorKind::TypeMismatch && e.occurrence_path.0.len() == self.path.len() + 1 {
                        TypeError {
                            kind: TypeErrorKind::NotAStoreType,
                            ..e
                        }
                    } else {
                        e
                    }
                })?;
                Ok(Type::Behaviour)
            }
            Term::Par(..) => self.par(t, delta, None),
            Term::New { hint, region, body } => {
                self.region(region)?;
                self.bind(&hint.0, Entry::Addr(region.clone()), |c| {
                    c.at(0, |c| c.infer(body, delta))
                })
            }
            Term::TyAbs { tvar, body } => {
                self.generalizable(tvar)?;
                let a = self.infer(body, delta)?;
                if !a.is_value_type() {
                    return Err(self.wf_err(WfError::BehaviourInValuePosition, &a));
                }
                Ok(Type::Forall(tvar.clone(), Box::new(a)))
            }
            Term::TyApp(m, b) => {
                self.wf(b)?;
                if !b.is_value_type() {
                    return Err(self.wf_err(WfError::BehaviourInValuePosition, b));
                }
                match self.infer(m, delta)? {
                    Type::Forall(v, body) => Ok(type_subst(&body, b, &v)),
                    other => Err(self.err(TypeErrorKind::TypeMismatch, Some("a ∀ type".into()), Some(show(&other)))),
                }
            }
        }
    }

    /// Runs `f` with no variables in scope. Sound for closed subjects by weakening.
    fn isolated<T>(&mut self, f: impl FnOnce(&mut Self) -> TResult<T>) -> TResult<T> {
        static EMPTY: TypedVarContext = TypedVarContext::new();
        let env = std::mem::take(&mut self.env);
        let gamma = std::mem::replace(&mut self.gamma, &EMPTY);
        let r = f(self);
        self.env = env;
        self.gamma = gamma;
        r
    }

    /// A closed `Λt.M` under hypotheses mentioning `t` is checked without them.
    fn needs_isolation(&self, t: &Term) -> bool {
        match t {
            Term::TyAbs { .. } => {
                (!self.env.is_empty() || !self.gamma.is_empty()) && is_locally_closed(t) && free_vars(t).is_empty()
            }
            _ => false,
        }
    }

    fn generalizable(&self, tvar: &Name) -> TResult<()> {
        if self.free_type_vars().contains(tvar) {
            return Err(self.err(TypeErrorKind::EscapingTypeVariable, None, Some(tvar.to_string())));
        }
        Ok(())
    }

    fn app(&mut self, f: &Term, a: &Term, delta: u32, expected: Option<&Type>) -> TResult<Type> {
        // `(λx.M) N` with a bare binder: the argument's type annotates `x`.
        if let Term::Lam { hint, ann: None, body } = f {
            let dom = self.at(1, |c| c.infer(a, delta))?;
            if !dom.is_value_type() {
                return Err(self.wf_err(WfError::BehaviourInValuePosition, &dom));
            }
            return self.at(0, |c| {
                c.affine(&hint.0, body)?;
                c.bind(&hint.0, Entry::Var { depth: delta, ty: dom }, |c| {
                    c.at(0, |c| match expected {
                        Some(e) => c.check(body, delta, e).map(|_| e.clone()),
                        None => c.infer(body, delta),
                    })
                })
            });
        }
        match self.at(0, |c| c.infer(f, delta)) {
            Ok(Type::Arrow(dom, cod)) => {
                self.at(1, |c| c.check(a, delta, &dom))?;
                Ok(*cod)
            }
            Ok(other) => Err(self.err(
                TypeErrorKind::TypeMismatch,
                Some("a function type".into()),
                Some(show(&other)),
            )),
            Err(e) if e.kind == TypeErrorKind::MissingAnnotation => {
                let Some(expected) = expected else { return Err(e) };
                let dom = self.at(1, |c| c.infer(a, delta)).map_err(|_| e.clone())?;
                let fty = Type::arrow(dom, expected.clone());
                self.at(0, |c| c.check(f, delta, &fty))?;
                Ok(expected.clone())
            }
            Err(e) => Err(e),
        }
    }

    fn let_bang(&mut self, t: &Term, delta: u32, expected: Option<&Type>) -> TResult<Type> {
        let Term::LetBang { hint, ann, bound, body } = t else {
            unreachable!()
        };
        let a = match ann {
            Some(a) => {
                self.wf(a)?;
                self.at(0, |c| c.check(bound, delta, &Type::bang(a.clone())))?;
                a.clone()
            }
            None => match self.at(0, |c| c.infer(bound, delta))? {
                Type::Bang(a) => *a,
                other => {
                    return Err(self.err(TypeErrorKind::TypeMismatch, Some("a ! type".into()), Some(show(&other))));
                }
            },
        };
        let entry = Entry::Var {
            depth: delta + 1,
            ty: a,
        };
        self.bind(&hint.0, entry, |c| {
            c.at(1, |c| match expected {
                Some(e) => c.check(body, delta, e).map(|_| e.clone()),
                None => c.infer(body, delta),
            })
        })
    }

    fn par(&mut self, t: &Term, delta: u32, expected: Option<&Type>) -> TResult<Type> {
        // Threads and stores with their paths.
        fn flatten<'t>(t: &'t Term, path: &mut Vec<u8>, out: &mut Vec<(Vec<u8>, &'t Term)>) {
            match t {
                Term::Par(a, b) => {
                    path.push(0);
                    flatten(a, path, out);
                    path.pop();
                    path.push(1);
                    flatten(b, path, out);
                    path.pop();
                }
                other => out.push((path.clone(), other)),
            }
        }
        let mut parts = Vec::new();
        flatten(t, &mut Vec::new(), &mut parts);
        let threads = parts.iter().filter(|(_, p)| !matches!(p, Term::Store(..))).count();
        let base = self.path.len();
        let mut result = Type::Behaviour;
        for (rel, p) in parts {
            self.path.extend(&rel);
            let r = if threads == 1 && !matches!(p, Term::Store(..)) {
                match expected {
                    Some(e) => self.check(p, delta, e).map(|_| e.clone()),
                    None => self.infer(p, delta),
                }
            } else {
                self.infer(p, delta)
            };
            self.path.truncate(base);
            let ty = r?;
            if threads == 1 && !matches!(p, Term::Store(..)) {
                result = ty;
            }
        }
        Ok(result)
    }

    fn check(&mut self, t: &Term, delta: u32, expected: &Type) -> TResult<()> {
        if self.needs_isolation(t) {
            return self.isolated(|c| c.check(t, delta, expected));
        }
        match (t, expected) {
            (Term::Lam { hint, ann, body }, Type::Arrow(dom, cod)) => {
                if let Some(a) = ann {
                    self.wf(a)?;
                    if a != &**dom {
                        return Err(self.mismatch(dom, a));
                    }
                }
                self.affine(&hint.0, body)?;
                let entry = Entry::Var {
                    depth: delta,
                    ty: (**dom).clone(),
                };
                self.bind(&hint.0, entry, |c| c.at(0, |c| c.check(body, delta, cod)))
            }
            (Term::Bang(m), Type::Bang(a)) => self.at(0, |c| c.check(m, delta + 1, a)),
            (Term::TyAbs { tvar, body }, Type::Forall(v, a)) => {
                self.generalizable(tvar)?;
                let a = if tvar == v {
                    (**a).clone()
                } else if expected.free_vars().contains(tvar) {
                    return Err(self.err(TypeErrorKind::EscapingTypeVariable, None, Some(tvar.to_string())));
                } else {
                    type_subst(a, &Type::Var(tvar.clone()), v)
                };
                self.check(body, delta, &a)
            }
            (Term::App(f, a), _) => self
                .app(f, a, delta, Some(expected))
                .and_then(|ty| self.same(expected, &ty)),
            (Term::LetBang { .. }, _) => self.let_bang(t, delta, Some(expected)).map(|_| ()),
            (Term::New { hint, region, body }, _) => {
                self.region(region)?;
                self.bind(&hint.0, Entry::Addr(region.clone()), |c| {
                    c.at(0, |c| c.check(body, delta, expected))
                })
            }
            (Term::Par(..), _) => self
                .par(t, delta, Some(expected))
                .and_then(|ty| self.same(expected, &ty)),
            _ => {
                let found = self.infer(t, delta)?;
                self.same(expected, &found)
            }
        }
    }

    fn same(&self, expected: &Type, found: &Type) -> TResult<()> {
        if expected == found {
            Ok(())
        } else {
            Err(self.mismatch(expected, found))
        }
    }
}

/// Decides `R;Γ ⊢^δ P : α`, synthesizing `α` or checking it against `expected`.
pub fn check(
    p: &Term,
    r: &RegionTypeContext,
    gamma: &TypedVarContext,
    delta: u32,
    expected: Option<&Type>,
) -> Result<Type, TypeError> {
    let mut c = Checker {
        r,
        gamma,
        env: Vec::new(),
        path: Vec::new(),
    };
    wf_region_context(r).map_err(|e| c.err(TypeErrorKind::IllFormedType, Some(e.to_string()), None))?;
    wf_var_context(r, gamma).map_err(|e| c.err(TypeErrorKind::IllFormedType, Some(e.to_string()), None))?;
    match expected {
        Some(e) => {
            c.wf(e)?;
            c.check(p, delta, e).map(|_| e.clone())
        }
        None => c.infer(p, delta),
    }
}

/// Closed programs at depth 0.
pub fn type_of(p: &Term, r: &RegionTypeContext) -> Result<Type, TypeError> {
    check(p, r, &TypedVarContext::new(), 0, None)
}

pub fn region_depths(r: &RegionTypeContext) -> RegionDepthContext {
    r.iter().map(|(k, (d, _))| (k.clone(), *d)).collect()
}

pub fn var_depths(gamma: &TypedVarContext) -> VarDepthContext {
    gamma.iter().map(|(k, (d, _))| (k.clone(), *d)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ValueShape {
    Abstraction,
    Banged,
    Atomic,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("value of type {ty} has the wrong shape")]
pub struct ClassificationMismatch {
    pub ty: String,
}

/// Canonical form of a closed value by its type.
pub fn classify_value(v: &Term, a: &Type) -> Result<ValueShape, ClassificationMismatch> {
    let bad = || ClassificationMismatch { ty: show(a) };
    let v = v.peel();
    match a {
        Type::Forall(_, body) => classify_value(v, body),
        Type::Arrow(..) => match v {
            Term::Lam { .. } => Ok(ValueShape::Abstraction),
            _ => Err(bad()),
        },
        Type::Bang(_) => match v {
            Term::Bang(_) => Ok(ValueShape::Banged),
            _ => Err(bad()),
        },
        Type::Unit => match v {
            Term::Unit => Ok(ValueShape::Atomic),
            _ => Err(bad()),
        },
        Type::Region(..) => match v {
            Term::Loc(_) => Ok(ValueShape::Atomic),
            _ => Err(bad()),
        },
        Type::Var(_) | Type::Behaviour => Ok(ValueShape::Atomic),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{entry, lookup, numeral};
    use crate::reader::{parse, parse_term, parse_type};

    fn ty(s: &str) -> Type {
        parse_type(s).unwrap()
    }

    fn rctx(pairs: &[(&str, u32, &str)]) -> RegionTypeContext {
        pairs.iter().map(|(r, d, a)| (Name::from(*r), (*d, ty(a)))).collect()
    }

    #[test]
    fn deadlock_is_untypable() {
        let t = parse_term("let !y = (\\x. x) in !(y y)").unwrap();
        assert!(type_of(&t, &RegionTypeContext::new()).is_err());
        let t = parse_term("let !y = (\\(x : 1). x) in !(y y)").unwrap();
        let e = type_of(&t, &RegionTypeContext::new()).unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::TypeMismatch);
    }

    #[test]
    fn numerals_have_type_n() {
        for n in 0..5 {
            assert_eq!(type_of(&numeral(n), &RegionTypeContext::new()), Ok(ty("N")));
        }
    }

    #[test]
    fn arithmetic_types() {
        for name in [
            "succ", "add", "mult", "pred", "sub", "int_it", "int_git", "pair", "fst", "snd", "list_it",
        ] {
            let e = entry(name).unwrap();
            let got = check(
                &lookup(name).unwrap(),
                &e.region_types(),
                &TypedVarContext::new(),
                e.depth,
                Some(&e.declared_type()),
            );
            assert!(got.is_ok(), "{name}: {}", got.unwrap_err());
        }
    }

    #[test]
    fn whole_catalog_types() {
        let mut bad = Vec::new();
        for e in crate::encodings::stdlib() {
            let got = check(
                &e.term(),
                &e.region_types(),
                &TypedVarContext::new(),
                e.depth,
                Some(&e.declared_type()),
            );
            if let Err(err) = got {
                bad.push(format!("{}: {err}", e.name));
            }
        }
        assert!(bad.is_empty(), "{bad:#?}");
    }

    #[test]
    fn mult_against_declared_type() {
        let m = lookup("mult").unwrap();
        assert_eq!(type_of(&m, &RegionTypeContext::new()), Ok(ty("N -o N -o N")));
    }

    #[test]
    fn region_reads_need_matching_depth() {
        let r = rctx(&[("r", 1, "!1")]);
        let t = parse_term("!get(r)").unwrap();
        assert_eq!(type_of(&t, &r), Ok(ty("!!1")));
        let e = type_of(&parse_term("get(r)").unwrap(), &r).unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::RegionDepthConflict);
    }

    #[test]
    fn stores_and_threads() {
        let r = rctx(&[("r", 0, "1")]);
        assert_eq!(type_of(&parse_term("!* | r <= *").unwrap(), &r), Ok(ty("!1")));
        assert_eq!(type_of(&parse_term("!* | *").unwrap(), &r), Ok(Type::Behaviour));
        assert_eq!(type_of(&parse_term("r <= *").unwrap(), &r), Ok(Type::Behaviour));
        let e = type_of(&parse_term("r <= !*").unwrap(), &r).unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::NotAStoreType);
    }

    #[test]
    fn escaping_type_variable() {
        let gamma: TypedVarContext = [(Name::from("x"), (0, ty("t")))].into_iter().collect();
        let e = check(
            &parse_term("/\\t. x").unwrap(),
            &RegionTypeContext::new(),
            &gamma,
            0,
            None,
        )
        .unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::EscapingTypeVariable);
    }

    #[test]
    fn program_c_with_corrected_regions() {
        let src =
            "!(let !z = get(r) in !(z *)) | r <= !(\\(y : 1). let !z = get(r') in !(z *)) | r' <= !(\\(y : 1). *)";
        let t = parse_term(src).unwrap();
        let r = rctx(&[("r", 1, "!(1 -o !1)"), ("r'", 2, "!(1 -o 1)")]);
        assert_eq!(type_of(&t, &r), Ok(ty("!!!1")));
        let stated = rctx(&[("r", 1, "!(1 -o 1)"), ("r'", 2, "!(1 -o 1)")]);
        assert!(type_of(&t, &stated).is_err());
    }

    #[test]
    fn new_binds_an_address() {
        let r = rctx(&[("r", 0, "1")]);
        let t = parse_term("new x : r in set(x, *); get(x)").unwrap();
        assert_eq!(type_of(&t, &r), Ok(Type::Unit));
    }

    #[test]
    fn unannotated_lambda_in_checking_position() {
        let t = parse_term("(\\x. x) *").unwrap();
        assert_eq!(
            check(
                &t,
                &RegionTypeContext::new(),
                &TypedVarContext::new(),
                0,
                Some(&Type::Unit)
            ),
            Ok(Type::Unit)
        );
    }

    #[test]
    fn error_json_shape() {
        let e = type_of(&parse_term("\\(x : 1). x x").unwrap(), &RegionTypeContext::new()).unwrap_err();
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["kind"], "AffinityViolation");
        assert_eq!(v["occurrencePath"], "ε");
    }

    #[test]
    fn classification() {
        let id = parse_term("\\x. x").unwrap();
        assert_eq!(classify_value(&id, &ty("1 -o 1")), Ok(ValueShape::Abstraction));
        assert_eq!(
            classify_value(&Term::bang(Term::Unit), &ty("!1")),
            Ok(ValueShape::Banged)
        );
        assert_eq!(classify_value(&Term::Unit, &Type::Unit), Ok(ValueShape::Atomic));
        assert!(classify_value(&Term::Unit, &ty("1 -o 1")).is_err());
    }

    #[test]
    fn update_and_run() {
        let e = entry("update").unwrap();
        let got = check(
            &lookup("update").unwrap(),
            &e.region_types(),
            &TypedVarContext::new(),
            1,
            Some(&e.declared_type()),
        );
        assert!(got.is_ok(), "{}", got.unwrap_err());
        let unit = parse(&entry("run").unwrap().source).unwrap();
        let got = type_of(&unit.body, &unit.region_types().unwrap());
        assert_eq!(got, Ok(ty("!!1")));
    }
}
