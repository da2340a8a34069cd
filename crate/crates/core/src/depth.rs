//! The depth system: `R;Γ ⊢^δ P`, with derivations, precise failures and
//! inference of region depths.
//!
//! Annotation nodes (`Λ`, `[A]`, binder types) are transparent.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::syntax::{
    bound_count, check_regions_total, misplaced_store, Path, RegionDepthContext, SyntaxError, Term, VarDepthContext,
};
use crate::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum DepthRule {
    Var,
    Region,
    Unit,
    Lam,
    App,
    Bang,
    LetBang,
    Get,
    Set,
    Store,
    Par,
    /// `new x:r in M`: `x` behaves as an address of `r` in `M`.
    New,
}

impl fmt::Display for DepthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One rule instance: the judgement `R;Γ ⊢^δ P|path` it concludes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DepthDerivation {
    pub rule: DepthRule,
    pub delta: u32,
    pub path: Path,
    /// Binder introduced by `λ`, `let !` or `new`, with its depth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binds: Option<(String, Option<u32>)>,
    pub premises: Vec<DepthDerivation>,
}

impl DepthDerivation {
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(DepthDerivation::size).sum::<usize>()
    }

    /// Depth-first list of rule names.
    pub fn rules(&self) -> Vec<DepthRule> {
        let mut out = vec![self.rule];
        for p in &self.premises {
            out.extend(p.rules());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DepthErrorKind {
    AffinityViolation,
    DepthMismatch,
    RegionDepthConflict,
    StoreDepth,
    UnboundVariable,
    UnknownRegion,
    IllPlacedStore,
}

/// A failed premise, located at an occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DepthError {
    #[serde(rename = "rule")]
    pub kind: DepthErrorKind,
    pub occurrence_path: Path,
    pub expected_depth: Option<u32>,
    pub actual_depth: Option<u32>,
    /// Variable or region the premise is about.
    pub name: Option<String>,
}

impl fmt::Display for DepthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}", self.kind, self.occurrence_path)?;
        if let Some(n) = &self.name {
            write!(f, " on `{n}`")?;
        }
        if let (Some(e), Some(a)) = (self.expected_depth, self.actual_depth) {
            write!(f, ": expected depth {e}, found {a}")?;
        }
        Ok(())
    }
}

impl std::error::Error for DepthError {}

impl DepthError {
    fn new(kind: DepthErrorKind, path: &[u8]) -> DepthError {
        DepthError {
            kind,
            occurrence_path: Path(path.to_vec()),
            expected_depth: None,
            actual_depth: None,
            name: None,
        }
    }

    fn depths(mut self, expected: u32, actual: u32) -> DepthError {
        self.expected_depth = Some(expected);
        self.actual_depth = Some(actual);
        self
    }

    fn named(mut self, n: &str) -> DepthError {
        self.name = Some(n.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("depth errors serialize")
    }
}

impl From<SyntaxError> for DepthError {
    fn from(e: SyntaxError) -> DepthError {
        match e {
            SyntaxError::UnknownRegion(r) => DepthError::new(DepthErrorKind::UnknownRegion, &[]).named(&r),
            SyntaxError::IllPlacedStore(p) => DepthError::new(DepthErrorKind::IllPlacedStore, &p.0),
        }
    }
}

#[derive(Clone, Debug)]
enum Entry {
    Var(u32),
    Addr(Name),
}

struct Checker<'a> {
    r: &'a RegionDepthContext,
    gamma: &'a VarDepthContext,
    env: Vec<(Name, Entry)>,
    path: Vec<u8>,
}

type DResult = Result<DepthDerivation, DepthError>;

impl Checker<'_> {
    fn node(&self, rule: DepthRule, delta: u32, premises: Vec<DepthDerivation>) -> DepthDerivation {
        DepthDerivation {
            rule,
            delta,
            path: Path(self.path.clone()),
            binds: None,
            premises,
        }
    }

    fn err(&self, kind: DepthErrorKind) -> DepthError {
        DepthError::new(kind, &self.path)
    }

    fn child(&mut self, bit: u8, t: &Term, delta: u32) -> DResult {
        self.path.push(bit);
        let r = self.term(t, delta);
        self.path.pop();
        r
    }

    fn under(&mut self, name: &Name, e: Entry, bit: u8, t: &Term, delta: u32) -> DResult {
        self.env.push((name.clone(), e));
        let r = self.child(bit, t, delta);
        self.env.pop();
        r
    }

    fn region_depth(&self, r: &Name) -> Result<u32, DepthError> {
        self.r
            .get(r)
            .copied()
            .ok_or_else(|| self.err(DepthErrorKind::UnknownRegion).named(r))
    }

    fn var_depth(&self, t: &Term) -> Result<Result<u32, Name>, DepthError> {
        match t {
            Term::Bound(i) => {
                let (_, e) = self
                    .env
                    .iter()
                    .rev()
                    .nth(*i as usize)
                    .expect("terms are locally closed");
                Ok(match e {
                    Entry::Var(d) => Ok(*d),
                    Entry::Addr(r) => Err(r.clone()),
                })
            }
            Term::Free(x) => self
                .gamma
                .get(x)
                .map(|d| Ok(*d))
                .ok_or_else(|| self.err(DepthErrorKind::UnboundVariable).named(x)),
            _ => unreachable!("called on variables only"),
        }
    }

    fn var_name(&self, t: &Term) -> String {
        match t {
            Term::Bound(i) => self
                .env
                .iter()
                .rev()
                .nth(*i as usize)
                .map_or("?".into(), |(n, _)| n.to_string()),
            Term::Free(x) => x.to_string(),
            _ => String::new(),
        }
    }

    fn region_at(&self, r: &Name, delta: u32) -> Result<(), DepthError> {
        let d = self.region_depth(r)?;
        if d != delta {
            return Err(self.err(DepthErrorKind::RegionDepthConflict).depths(d, delta).named(r));
        }
        Ok(())
    }

    /// Premise for the target of `get`/`set`, judged at `delta`.
    fn target(&mut self, t: &Term, delta: u32) -> Result<Vec<DepthDerivation>, DepthError> {
        match t.peel() {
            Term::Loc(l) => {
                self.region_at(l.region(), delta)?;
                Ok(vec![])
            }
            v @ (Term::Bound(_) | Term::Free(_)) => match self.var_depth(v)? {
                Ok(d) if d == delta => Ok(vec![self.node(DepthRule::Var, delta, vec![])]),
                Ok(d) => Err(self
                    .err(DepthErrorKind::DepthMismatch)
                    .depths(d, delta)
                    .named(&self.var_name(v))),
                Err(r) => {
                    self.region_at(&r, delta)?;
                    Ok(vec![])
                }
            },
            other => Ok(vec![self.term(other, delta)?]),
        }
    }

    fn term(&mut self, t: &Term, delta: u32) -> DResult {
        let t = t.peel();
        match t {
            Term::Unit => Ok(self.node(DepthRule::Unit, delta, vec![])),
            Term::Loc(_) => Ok(self.node(DepthRule::Region, delta, vec![])),
            Term::Bound(_) | Term::Free(_) => match self.var_depth(t)? {
                Ok(d) if d == delta => Ok(self.node(DepthRule::Var, delta, vec![])),
                Ok(d) => Err(self
                    .err(DepthErrorKind::DepthMismatch)
                    .depths(d, delta)
                    .named(&self.var_name(t))),
                Err(_) => Ok(self.node(DepthRule::Region, delta, vec![])),
            },
            Term::Lam { hint, body, .. } => {
                if bound_count(body, 0) > 1 {
                    return Err(self.err(DepthErrorKind::AffinityViolation).named(&hint.0));
                }
                let p = self.under(&hint.0, Entry::Var(delta), 0, body, delta)?;
                let mut n = self.node(DepthRule::Lam, delta, vec![p]);
                n.binds = Some((hint.0.to_string(), Some(delta)));
                Ok(n)
            }
            Term::App(a, b) => {
                let pa = self.child(0, a, delta)?;
                let pb = self.child(1, b, delta)?;
                Ok(self.node(DepthRule::App, delta, vec![pa, pb]))
            }
            Term::Bang(m) => {
                let p = self.child(0, m, delta + 1)?;
                Ok(self.node(DepthRule::Bang, delta, vec![p]))
            }
            Term::LetBang { hint, bound, body, .. } => {
                let pb = self.child(0, bound, delta)?;
                let pm = self.under(&hint.0, Entry::Var(delta + 1), 1, body, delta)?;
                let mut n = self.node(DepthRule::LetBang, delta, vec![pb, pm]);
                n.binds = Some((hint.0.to_string(), Some(delta + 1)));
                Ok(n)
            }
            Term::Get(target) => {
                let ps = self.target(target, delta)?;
                Ok(self.node(DepthRule::Get, delta, ps))
            }
            Term::Set(target, v) => {
                let mut ps = self.target(target, delta)?;
                ps.push(self.child(0, v, delta)?);
                Ok(self.node(DepthRule::Set, delta, ps))
            }
            Term::Store(l, v) => {
                if delta != 0 {
                    return Err(self.err(DepthErrorKind::StoreDepth).depths(0, delta).named(l.region()));
                }
                let d = self.region_depth(l.region())?;
                let p = self.child(0, v, d)?;
                Ok(self.node(DepthRule::Store, delta, vec![p]))
            }
            Term::Par(a, b) => {
                let pa = self.child(0, a, delta)?;
                let pb = self.child(1, b, delta)?;
                Ok(self.node(DepthRule::Par, delta, vec![pa, pb]))
            }
            Term::New { hint, region, body } => {
                self.region_depth(region)?;
                let p = self.under(&hint.0, Entry::Addr(region.clone()), 0, body, delta)?;
                let mut n = self.node(DepthRule::New, delta, vec![p]);
                n.binds = Some((hint.0.to_string(), None));
                Ok(n)
            }
            Term::TyAbs { .. } | Term::TyApp(..) => unreachable!("peeled"),
        }
    }
}

/// Decides `R;Γ ⊢^δ P`.
pub fn check_depth(
    p: &Term,
    r: &RegionDepthContext,
    gamma: &VarDepthContext,
    delta: u32,
) -> Result<DepthDerivation, DepthError> {
    check_regions_total(p, r)?;
    let mut c = Checker {
        r,
        gamma,
        env: Vec::new(),
        path: Vec::new(),
    };
    c.term(p, delta)
}

/// Re-derives the judgement and compares it node by node with `d`.
pub fn replays(d: &DepthDerivation, p: &Term, r: &RegionDepthContext, gamma: &VarDepthContext, delta: u32) -> bool {
    check_depth(p, r, gamma, delta).is_ok_and(|fresh| fresh == *d)
}

/// `R(a) = R(base) + offset`, or `R(a) = offset` without a base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DepthConstraint {
    pub region: String,
    pub base: Option<String>,
    pub offset: u32,
    pub path: Path,
}

impl fmt::Display for DepthConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.base {
            Some(b) => write!(f, "R({}) = R({b}) + {} at {}", self.region, self.offset, self.path),
            None => write!(f, "R({}) = {} at {}", self.region, self.offset, self.path),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InferError {
    #[error("unsatisfiable region depths: {0} conflicts with {1}")]
    Unsatisfiable(Box<DepthConstraint>, Box<DepthConstraint>),
    #[error("store at {0} is not in a static context")]
    IllPlacedStore(Path),
}

/// Constraints from every `get`/`set` whose target is a region or address.
pub fn region_constraints(p: &Term) -> Vec<DepthConstraint> {
    fn go(
        t: &Term,
        env: &mut Vec<Option<Name>>,
        path: &mut Vec<u8>,
        depth: u32,
        store: &Option<Name>,
        out: &mut Vec<DepthConstraint>,
    ) {
        let t = t.peel();
        let target_region = |target: &Term, env: &Vec<Option<Name>>| -> Option<Name> {
            match target.peel() {
                Term::Loc(l) => Some(l.region().clone()),
                Term::Bound(i) => env.iter().rev().nth(*i as usize).cloned().flatten(),
                _ => None,
            }
        };
        if let Term::Get(x) | Term::Set(x, _) = t {
            if let Some(r) = target_region(x, env) {
                out.push(DepthConstraint {
                    region: r.to_string(),
                    base: store.as_ref().map(|s| s.to_string()),
                    offset: depth,
                    path: Path(path.clone()),
                });
            }
        }
        let child_depth = if matches!(t, Term::Bang(_)) { depth + 1 } else { depth };
        let (inner_store, child_depth) = match t {
            Term::Store(l, _) => (Some(l.region().clone()), 0),
            _ => (store.clone(), child_depth),
        };
        for (bit, child) in t.children() {
            let binder = match (t, bit) {
                (Term::Lam { .. }, 0) | (Term::LetBang { .. }, 1) => Some(None),
                (Term::New { region, .. }, 0) => Some(Some(region.clone())),
                _ => None,
            };
            if let Some(b) = &binder {
                env.push(b.clone());
            }
            path.push(bit);
            go(child, env, path, child_depth, &inner_store, out);
            path.pop();
            if binder.is_some() {
                env.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(p, &mut Vec::new(), &mut Vec::new(), 0, &None, &mut out);
    out
}

/// Some `R` satisfying every constraint of `P`; unconstrained regions get depth 0.
pub fn infer_region_depths(p: &Term) -> Result<RegionDepthContext, InferError> {
    if let Some(path) = misplaced_store(p) {
        return Err(InferError::IllPlacedStore(path));
    }
    // Weighted union-find: value(x) = value(parent(x)) + weight(x).
    let regions: Vec<Name> = p.regions().into_iter().collect();
    let idx: BTreeMap<Name, usize> = regions.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
    let n = regions.len();
    // Node n is the constant zero.
    let mut parent: Vec<usize> = (0..=n).collect();
    let mut weight: Vec<i64> = vec![0; n + 1];
    let mut witness: Vec<Option<DepthConstraint>> = vec![None; n + 1];
    fn find(parent: &mut Vec<usize>, weight: &mut Vec<i64>, x: usize) -> (usize, i64) {
        if parent[x] == x {
            return (x, 0);
        }
        let (root, w) = find(parent, weight, parent[x]);
        parent[x] = root;
        weight[x] += w;
        (root, weight[x])
    }
    for c in region_constraints(p) {
        let a = idx[c.region.as_str()];
        let b = c.base.as_ref().map_or(n, |b| idx[b.as_str()]);
        let (ra, wa) = find(&mut parent, &mut weight, a);
        let (rb, wb) = find(&mut parent, &mut weight, b);
        // value(a) - value(b) = offset
        let off = c.offset as i64;
        if ra == rb {
            if wa - wb != off {
                let prior = witness[ra].clone().unwrap_or_else(|| c.clone());
                return Err(InferError::Unsatisfiable(Box::new(prior), Box::new(c)));
            }
            continue;
        }
        // Keep the zero node as a root.
        let (child, root, w) = if ra == n {
            (rb, ra, wa - off - wb)
        } else {
            (ra, rb, off + wb - wa)
        };
        parent[child] = root;
        weight[child] = w;
        if witness[root].is_none() {
            witness[root] = witness[child].clone().or(Some(c.clone()));
        }
    }
    let mut values: Vec<i64> = (0..n).map(|i| find(&mut parent, &mut weight, i).1).collect();
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, &mut weight, i).0).collect();
    // Free components are shifted so their least member sits at 0.
    let mut least: BTreeMap<usize, i64> = BTreeMap::new();
    for i in 0..n {
        if roots[i] != n {
            let e = least.entry(roots[i]).or_insert(values[i]);
            *e = (*e).min(values[i]);
        }
    }
    for i in 0..n {
        if roots[i] != n {
            values[i] -= least[&roots[i]];
        }
    }
    if let Some(i) = (0..n).find(|&i| values[i] < 0) {
        let c = witness[roots[i]].clone().expect("anchored components have a witness");
        return Err(InferError::Unsatisfiable(Box::new(c.clone()), Box::new(c)));
    }
    Ok(regions.into_iter().zip(values).map(|(r, v)| (r, v as u32)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    fn t(src: &str) -> Term {
        parse_term(src).unwrap()
    }

    fn r(pairs: &[(&str, u32)]) -> RegionDepthContext {
        pairs.iter().map(|(n, d)| (Name::from(*n), *d)).collect()
    }

    const DUP_UNDER_BANG: &str = "\\x. let !y = x in !(y y)";
    const PROG_C: &str = "!(let !z = get(r) in !(z *)) | r <= !(\\y. let !z = get(r') in !(z *)) | r' <= !(\\y. *)";
    const PROG_D: &str = "!(let !z = get(r) in !(z *)) | r <= !(\\y. let !z = get(r) in !(z *))";

    #[test]
    fn dup_under_bang_derivable_at_any_depth() {
        for d in 0..4 {
            let der = check_depth(
                &t(DUP_UNDER_BANG),
                &RegionDepthContext::new(),
                &VarDepthContext::new(),
                d,
            )
            .unwrap();
            assert_eq!(
                der.rules(),
                vec![
                    DepthRule::Lam,
                    DepthRule::LetBang,
                    DepthRule::Var,
                    DepthRule::Bang,
                    DepthRule::App,
                    DepthRule::Var,
                    DepthRule::Var
                ]
            );
            assert_eq!(der.premises[0].binds, Some(("y".into(), Some(d + 1))));
        }
    }

    #[test]
    fn too_deep_occurrence() {
        let gamma: VarDepthContext = [(Name::from("z"), 2)].into_iter().collect();
        let e = check_depth(
            &t("\\x. let !y = x in !(y !(y z))"),
            &RegionDepthContext::new(),
            &gamma,
            0,
        )
        .unwrap_err();
        assert_eq!(e.kind, DepthErrorKind::DepthMismatch);
        assert_eq!(e.name.as_deref(), Some("y"));
        assert_eq!((e.expected_depth, e.actual_depth), (Some(1), Some(2)));
        assert_eq!(e.occurrence_path.to_string(), "010100");
    }

    #[test]
    fn affinity() {
        let e = check_depth(&t("\\x. x x"), &RegionDepthContext::new(), &VarDepthContext::new(), 0).unwrap_err();
        assert_eq!(e.kind, DepthErrorKind::AffinityViolation);
    }

    #[test]
    fn program_b_conflicts_for_every_r() {
        for d in 0..3 {
            let e = check_depth(
                &t("\\x. set(r, x); !get(r)"),
                &r(&[("r", d)]),
                &VarDepthContext::new(),
                0,
            )
            .unwrap_err();
            assert_eq!(e.kind, DepthErrorKind::RegionDepthConflict);
        }
    }

    #[test]
    fn store_needs_depth_zero() {
        let e = check_depth(&t("r <= *"), &r(&[("r", 0)]), &VarDepthContext::new(), 1).unwrap_err();
        assert_eq!(e.kind, DepthErrorKind::StoreDepth);
    }

    #[test]
    fn program_c_well_formed() {
        let rc = r(&[("r", 1), ("r'", 2)]);
        assert!(check_depth(&t(PROG_C), &rc, &VarDepthContext::new(), 0).is_ok());
        assert_eq!(infer_region_depths(&t(PROG_C)).unwrap(), rc);
    }

    #[test]
    fn program_d_unsatisfiable() {
        assert!(matches!(
            infer_region_depths(&t(PROG_D)),
            Err(InferError::Unsatisfiable(..))
        ));
        for d in 0..4 {
            assert!(check_depth(&t(PROG_D), &r(&[("r", d)]), &VarDepthContext::new(), 0).is_err());
        }
    }

    #[test]
    fn store_free_infers_empty() {
        assert!(infer_region_depths(&t(DUP_UNDER_BANG)).unwrap().is_empty());
    }

    #[test]
    fn derivation_replays() {
        let rc = r(&[("r", 1), ("r'", 2)]);
        let d = check_depth(&t(PROG_C), &rc, &VarDepthContext::new(), 0).unwrap();
        assert!(replays(&d, &t(PROG_C), &rc, &VarDepthContext::new(), 0));
        assert!(!replays(&d, &t(PROG_C), &rc, &VarDepthContext::new(), 1));
    }

    #[test]
    fn error_json_shape() {
        let e = check_depth(&t("\\x. x x"), &RegionDepthContext::new(), &VarDepthContext::new(), 0).unwrap_err();
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["rule"], "AffinityViolation");
        assert_eq!(v["occurrencePath"], "ε");
    }
}
