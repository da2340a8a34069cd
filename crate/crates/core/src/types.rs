//! Value-types and the behaviour type, with capture-avoiding substitution
//! and the well-formedness judgements relating types to region contexts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::Name;

/// A type of the elementary affine system.
///
/// Equality is α-equivalence on `∀`-bound type variables.
#[derive(Clone, Debug)]
pub enum Type {
    /// The behaviour type given to stores and to parallel threads.
    Behaviour,
    Var(Name),
    Unit,
    /// Affine arrow `A ⊸ α`; the domain is always a value-type.
    Arrow(Box<Type>, Box<Type>),
    Bang(Box<Type>),
    Forall(Name, Box<Type>),
    /// `Reg_r(A)`: addresses of region `r` holding values of type `A`.
    Region(Name, Box<Type>),
}

/// Region typing context: `r ↦ (δ, A)`.
pub type RegionTypeContext = BTreeMap<Name, (u32, Type)>;

/// Typed variable context: `x ↦ (δ, A)`.
pub type TypedVarContext = BTreeMap<Name, (u32, Type)>;

impl Type {
    pub fn arrow(dom: Type, cod: Type) -> Type {
        Type::Arrow(Box::new(dom), Box::new(cod))
    }

    pub fn bang(inner: Type) -> Type {
        Type::Bang(Box::new(inner))
    }

    /// `!^n A`.
    pub fn bangs(n: usize, inner: Type) -> Type {
        (0..n).fold(inner, |acc, _| Type::bang(acc))
    }

    pub fn forall(var: impl Into<Name>, body: Type) -> Type {
        Type::Forall(var.into(), Box::new(body))
    }

    pub fn region(name: impl Into<Name>, content: Type) -> Type {
        Type::Region(name.into(), Box::new(content))
    }

    pub fn var(name: impl Into<Name>) -> Type {
        Type::Var(name.into())
    }

    pub fn is_value_type(&self) -> bool {
        !matches!(self, Type::Behaviour)
    }

    /// Strips leading bangs, returning how many were removed.
    pub fn strip_bangs(&self) -> (usize, &Type) {
        let mut n = 0;
        let mut cur = self;
        while let Type::Bang(inner) = cur {
            n += 1;
            cur = inner;
        }
        (n, cur)
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Type::Behaviour | Type::Unit => {}
            Type::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Type::Arrow(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Type::Bang(a) | Type::Region(_, a) => a.collect_free(bound, out),
            Type::Forall(v, a) => {
                bound.push(v.clone());
                a.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Names of every region mentioned anywhere in the type.
    pub fn regions(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_regions(&mut out);
        out
    }

    fn collect_regions(&self, out: &mut BTreeSet<Name>) {
        match self {
            Type::Behaviour | Type::Unit | Type::Var(_) => {}
            Type::Arrow(a, b) => {
                a.collect_regions(out);
                b.collect_regions(out);
            }
            Type::Bang(a) | Type::Forall(_, a) => a.collect_regions(out),
            Type::Region(r, a) => {
                out.insert(r.clone());
                a.collect_regions(out);
            }
        }
    }

    fn all_var_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            Type::Behaviour | Type::Unit => {}
            Type::Var(v) => {
                out.insert(v.clone());
            }
            Type::Arrow(a, b) => {
                a.all_var_names(out);
                b.all_var_names(out);
            }
            Type::Bang(a) | Type::Region(_, a) => a.all_var_names(out),
            Type::Forall(v, a) => {
                out.insert(v.clone());
                a.all_var_names(out);
            }
        }
    }
}

/// Picks `base`, or `base` with a numeric suffix, avoiding every name in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "t" } else { stem };
    if !avoid.iter().any(|n| &**n == base) {
        return base.into();
    }
    (1..)
        .map(|i| format!("{stem}{i}"))
        .find(|cand| !avoid.iter().any(|n| **n == *cand))
        .expect("unbounded supply")
        .into()
}

/// Capture-avoiding substitution `A[B/t]`.
pub fn type_subst(a: &Type, b: &Type, t: &str) -> Type {
    let fv_b = b.free_vars();
    subst_inner(a, b, t, &fv_b)
}

fn subst_inner(a: &Type, b: &Type, t: &str, fv_b: &BTreeSet<Name>) -> Type {
    match a {
        Type::Behaviour => Type::Behaviour,
        Type::Unit => Type::Unit,
        Type::Var(v) if &**v == t => b.clone(),
        Type::Var(v) => Type::Var(v.clone()),
        Type::Arrow(x, y) => Type::arrow(subst_inner(x, b, t, fv_b), subst_inner(y, b, t, fv_b)),
        Type::Bang(x) => Type::bang(subst_inner(x, b, t, fv_b)),
        Type::Region(r, x) => Type::Region(r.clone(), Box::new(subst_inner(x, b, t, fv_b))),
        Type::Forall(v, _) if &**v == t => a.clone(),
        Type::Forall(v, body) => {
            if !body.free_vars().iter().any(|n| &**n == t) {
                return a.clone();
            }
            if fv_b.contains(v) {
                let mut avoid = fv_b.clone();
                body.all_var_names(&mut avoid);
                avoid.insert(t.into());
                let fresh = fresh_name(v, &avoid);
                let renamed = type_subst(body, &Type::Var(fresh.clone()), v);
                Type::Forall(fresh, Box::new(subst_inner(&renamed, b, t, fv_b)))
            } else {
                Type::Forall(v.clone(), Box::new(subst_inner(body, b, t, fv_b)))
            }
        }
    }
}

fn alpha_eq(a: &Type, b: &Type, env: &mut Vec<(Name, Name)>) -> bool {
    match (a, b) {
        (Type::Behaviour, Type::Behaviour) | (Type::Unit, Type::Unit) => true,
        (Type::Var(x), Type::Var(y)) => {
            for (l, r) in env.iter().rev() {
                if l == x || r == y {
                    return l == x && r == y;
                }
            }
            x == y
        }
        (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) => alpha_eq(a1, b1, env) && alpha_eq(a2, b2, env),
        (Type::Bang(x), Type::Bang(y)) => alpha_eq(x, y, env),
        (Type::Region(r, x), Type::Region(s, y)) => r == s && alpha_eq(x, y, env),
        (Type::Forall(v, x), Type::Forall(w, y)) => {
            env.push((v.clone(), w.clone()));
            let eq = alpha_eq(x, y, env);
            env.pop();
            eq
        }
        _ => false,
    }
}

impl PartialEq for Type {
    fn eq(&self, other: &Type) -> bool {
        alpha_eq(self, other, &mut Vec::new())
    }
}

impl Eq for Type {}

/// A failed premise of the type/context formation rules.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WfError {
    #[error("region `{0}` is not declared in the region context")]
    UnknownRegion(Name),
    #[error("Reg_{region}({found}) disagrees with the declared content type {declared}")]
    RegionContentMismatch { region: Name, declared: Type, found: Type },
    #[error("type variable `{0}` is bound by ∀ but occurs free in the region context")]
    QuantifiedRegionVariable(Name),
    #[error("behaviour type B used where a value-type is required")]
    BehaviourInValuePosition,
}

/// `R ↓ α`: region names used by `α` agree with `R`.
pub fn compatible(rctx: &RegionTypeContext, ty: &Type) -> Result<(), WfError> {
    match ty {
        Type::Var(_) | Type::Unit | Type::Behaviour => Ok(()),
        Type::Arrow(a, b) => {
            if !a.is_value_type() {
                return Err(WfError::BehaviourInValuePosition);
            }
            compatible(rctx, a)?;
            compatible(rctx, b)
        }
        Type::Bang(a) => {
            if !a.is_value_type() {
                return Err(WfError::BehaviourInValuePosition);
            }
            compatible(rctx, a)
        }
        Type::Region(r, a) => match rctx.get(r) {
            None => Err(WfError::UnknownRegion(r.clone())),
            Some((_, declared)) if declared == &**a => Ok(()),
            Some((_, declared)) => Err(WfError::RegionContentMismatch {
                region: r.clone(),
                declared: declared.clone(),
                found: (**a).clone(),
            }),
        },
        Type::Forall(t, a) => {
            if !a.is_value_type() {
                return Err(WfError::BehaviourInValuePosition);
            }
            compatible(rctx, a)?;
            if rctx.values().any(|(_, ty)| ty.free_vars().contains(t)) {
                return Err(WfError::QuantifiedRegionVariable(t.clone()));
            }
            Ok(())
        }
    }
}

/// `R ⊢`: every declared content type is compatible with `R`.
pub fn wf_region_context(rctx: &RegionTypeContext) -> Result<(), WfError> {
    for (_, ty) in rctx.values() {
        if !ty.is_value_type() {
            return Err(WfError::BehaviourInValuePosition);
        }
        compatible(rctx, ty)?;
    }
    Ok(())
}

/// `R ⊢ α`.
pub fn wf_type(rctx: &RegionTypeContext, ty: &Type) -> Result<(), WfError> {
    wf_region_context(rctx)?;
    compatible(rctx, ty)
}

/// `R ⊢ Γ`.
pub fn wf_var_context(rctx: &RegionTypeContext, gamma: &TypedVarContext) -> Result<(), WfError> {
    wf_region_context(rctx)?;
    for (_, ty) in gamma.values() {
        if !ty.is_value_type() {
            return Err(WfError::BehaviourInValuePosition);
        }
        compatible(rctx, ty)?;
    }
    Ok(())
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::reader::print_type(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_to_unit() -> Type {
        Type::arrow(Type::Unit, Type::Unit)
    }

    #[test]
    fn subst_replaces_variable() {
        assert_eq!(type_subst(&Type::var("t"), &Type::Unit, "t"), Type::Unit);
    }

    #[test]
    fn subst_respects_shadowing() {
        let a = Type::forall("t", Type::var("t"));
        assert_eq!(type_subst(&a, &Type::Unit, "t"), a);
    }

    #[test]
    fn subst_under_bang() {
        let a = Type::bang(Type::arrow(Type::var("t"), Type::var("t")));
        let expected = Type::bang(unit_to_unit());
        assert_eq!(type_subst(&a, &Type::Unit, "t"), expected);
    }

    #[test]
    fn subst_avoids_capture() {
        // (∀u. t ⊸ u)[u/t] must not capture the substituted u.
        let a = Type::forall("u", Type::arrow(Type::var("t"), Type::var("u")));
        let got = type_subst(&a, &Type::var("u"), "t");
        match &got {
            Type::Forall(v, body) => {
                assert_ne!(&**v, "u");
                assert_eq!(**body, Type::arrow(Type::var("u"), Type::var(v.clone())));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn alpha_equivalence() {
        let a = Type::forall("t", Type::arrow(Type::var("t"), Type::var("t")));
        let b = Type::forall("u", Type::arrow(Type::var("u"), Type::var("u")));
        assert_eq!(a, b);
        let c = Type::forall("u", Type::arrow(Type::var("u"), Type::var("t")));
        assert_ne!(a, c);
    }

    #[test]
    fn region_type_well_formed_when_content_matches() {
        let mut r = RegionTypeContext::new();
        r.insert("r".into(), (0, unit_to_unit()));
        assert!(wf_type(&r, &Type::region("r", unit_to_unit())).is_ok());
    }

    #[test]
    fn region_type_rejected_on_content_mismatch() {
        let mut r = RegionTypeContext::new();
        r.insert("r".into(), (0, Type::Unit));
        assert!(matches!(
            wf_type(&r, &Type::region("r", unit_to_unit())),
            Err(WfError::RegionContentMismatch { .. })
        ));
    }

    #[test]
    fn self_referential_region_context_is_ill_formed() {
        let mut r = RegionTypeContext::new();
        r.insert("r".into(), (0, Type::region("r", Type::Unit)));
        assert!(wf_type(&r, &Type::Unit).is_err());
    }

    #[test]
    fn unit_in_empty_context() {
        assert!(wf_type(&RegionTypeContext::new(), &Type::Unit).is_ok());
    }
}
