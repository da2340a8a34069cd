//! Derivation-directed generation of well-formed and well-typed programs.
//!
//! Every choice follows a rule of the target judgement, so the output passes
//! it by construction: variables are only used at their own depth, `λ`-bound
//! variables at most once, and reads and writes only where the region depth
//! matches.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::{close, Hint, Loc, RegionDepthContext, Term};
use crate::types::{RegionTypeContext, Type};
use crate::Name;

use super::GenConfig;

struct Var {
    name: String,
    depth: u32,
    /// `None` for address variables bound by `new`.
    ty: Option<Type>,
    linear: bool,
    used: bool,
    region: Option<Name>,
}

struct Gen {
    rng: ChaCha8Rng,
    max_depth: u32,
    scope: Vec<Var>,
    fresh: usize,
}

impl Gen {
    fn new(seed: u64, max_depth: u32) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_depth,
            scope: Vec::new(),
            fresh: 0,
        }
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    fn pick<'a, T>(&mut self, xs: &'a [T]) -> Option<&'a T> {
        if xs.is_empty() {
            None
        } else {
            Some(&xs[self.below(xs.len())])
        }
    }

    /// An index drawn with the given weights.
    fn weighted<const N: usize>(&mut self, w: [u32; N]) -> usize {
        WeightedIndex::new(w)
            .expect("some weight is positive")
            .sample(&mut self.rng)
    }

    fn name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    /// Indices of usable variables at `delta` whose type satisfies `ok`.
    fn usable(&self, delta: u32, ok: impl Fn(&Var) -> bool) -> Vec<usize> {
        (0..self.scope.len())
            .filter(|&i| {
                let v = &self.scope[i];
                v.region.is_none() && v.depth == delta && !(v.linear && v.used) && ok(v)
            })
            .collect()
    }

    fn take(&mut self, i: usize) -> Term {
        self.scope[i].used = true;
        Term::free(&self.scope[i].name)
    }

    fn addresses(&self, ok: impl Fn(&Name) -> bool) -> Vec<usize> {
        (0..self.scope.len())
            .filter(|&i| self.scope[i].region.as_ref().is_some_and(&ok))
            .collect()
    }
}

fn lam(name: &str, ann: Option<Type>, body: Term) -> Term {
    Term::abstract_lam(name, ann, body)
}

fn new_in(name: &str, region: &Name, body: Term) -> Term {
    Term::New {
        hint: Hint::new(name),
        region: region.clone(),
        body: Box::new(close(&body, name)),
    }
}

fn region_names(n: usize) -> Vec<Name> {
    (0..n).map(|i| Name::from(format!("r{i}"))).collect()
}

/// Untyped generation against the depth system.
struct Untyped<'a> {
    g: Gen,
    r: &'a RegionDepthContext,
}

impl Untyped<'_> {
    /// Runs `f` with a fresh variable in scope; the result mentions it free.
    fn bind(
        &mut self,
        base: &str,
        depth: u32,
        linear: bool,
        region: Option<Name>,
        f: impl FnOnce(&mut Self) -> Term,
    ) -> (String, Term) {
        let name = self.g.name(base);
        self.g.scope.push(Var {
            name: name.clone(),
            depth,
            ty: None,
            linear,
            used: false,
            region,
        });
        let body = f(self);
        self.g.scope.pop();
        (name, body)
    }

    fn regions_at(&self, delta: u32) -> Vec<Name> {
        self.r
            .iter()
            .filter(|(_, &d)| d == delta)
            .map(|(r, _)| r.clone())
            .collect()
    }

    fn leaf(&mut self, delta: u32) -> Term {
        let vars = self.g.usable(delta, |_| true);
        if !vars.is_empty() && self.g.chance(0.6) {
            let i = *self.g.pick(&vars).expect("nonempty");
            return self.g.take(i);
        }
        let regions: Vec<Name> = self.r.keys().cloned().collect();
        match self.g.below(4) {
            0 if !regions.is_empty() => Term::Loc(Loc::Region(self.g.pick(&regions).expect("nonempty").clone())),
            1 => {
                let (x, body) = self.bind("x", delta, true, None, |u| {
                    let vs = u.g.usable(delta, |_| true);
                    match vs.last() {
                        Some(&i) => u.g.take(i),
                        None => Term::Unit,
                    }
                });
                lam(&x, None, body)
            }
            _ => Term::Unit,
        }
    }

    /// A target for `get`/`set` at `delta`: a region or an address variable.
    fn target(&mut self, delta: u32) -> Option<Term> {
        let regions = self.regions_at(delta);
        let addrs = self.g.addresses(|r| self.r.get(r) == Some(&delta));
        if !addrs.is_empty() && self.g.chance(0.5) {
            let i = *self.g.pick(&addrs).expect("nonempty");
            return Some(Term::free(&self.g.scope[i].name));
        }
        self.g.pick(&regions).map(|r| Term::Loc(Loc::Region(r.clone())))
    }

    fn value(&mut self, delta: u32, size: usize) -> Term {
        if size <= 1 {
            return self.leaf(delta);
        }
        match self.g.below(3) {
            0 if delta < self.g.max_depth => Term::bang(self.value(delta + 1, size - 1)),
            1 => self.lambda(delta, size),
            _ => self.leaf(delta),
        }
    }

    fn lambda(&mut self, delta: u32, size: usize) -> Term {
        let (x, body) = self.bind("x", delta, true, None, |u| u.term(delta, size.saturating_sub(1)));
        lam(&x, None, body)
    }

    fn term(&mut self, delta: u32, size: usize) -> Term {
        if size <= 1 {
            return self.leaf(delta);
        }
        let half = size / 2;
        let deeper = u32::from(delta < self.g.max_depth);
        let stateful = u32::from(!self.r.is_empty());
        // λ, redex, application, !, let, get, set, new, sequence
        match self
            .g
            .weighted([1, 3, 1, 2 * deeper, 3, 2 * stateful, 2 * stateful, stateful, 2])
        {
            0 => self.lambda(delta, size),
            1 => {
                let f = self.lambda(delta, half);
                let a = self.value(delta, size - half - 1);
                Term::app(f, a)
            }
            2 => {
                let f = self.term(delta, half);
                let a = self.term(delta, size - half - 1);
                Term::app(f, a)
            }
            3 => Term::bang(self.term(delta + 1, size - 1)),
            4 => {
                let bound = match self.g.below(3) {
                    0 if delta < self.g.max_depth => Term::bang(self.value(delta + 1, half)),
                    1 => match self.target(delta) {
                        Some(t) => Term::Get(Box::new(t)),
                        None => self.term(delta, half),
                    },
                    _ => self.term(delta, half),
                };
                let (x, body) = self.bind("y", delta + 1, false, None, |u| u.term(delta, size - half - 1));
                Term::abstract_let(&x, None, bound, body)
            }
            5 => match self.target(delta) {
                Some(t) => Term::Get(Box::new(t)),
                None => self.leaf(delta),
            },
            6 => match self.target(delta) {
                Some(t) => {
                    let v = self.value(delta, size - 1);
                    Term::Set(Box::new(t), Box::new(v))
                }
                None => self.leaf(delta),
            },
            7 => {
                let regions: Vec<Name> = self.r.keys().cloned().collect();
                let region = self.g.pick(&regions).expect("nonempty").clone();
                let (x, body) = self.bind("a", delta, false, Some(region.clone()), |u| u.term(delta, size - 1));
                new_in(&x, &region, body)
            }
            _ => {
                // Sequencing `(λz. M) N` with an unused binder.
                let first = self.term(delta, half);
                let then = self.term(delta, size - half - 1);
                let z = self.g.name("z");
                Term::app(lam(&z, None, then), first)
            }
        }
    }
}

/// Untyped well-formed program with its region depths.
pub fn gen_well_formed(cfg: &GenConfig) -> (Term, RegionDepthContext) {
    for attempt in 0.. {
        let mut g = Gen::new(cfg.seed.wrapping_add(attempt << 32), cfg.max_depth);
        let names = region_names(cfg.regions);
        let r: RegionDepthContext = names
            .iter()
            .map(|n| (n.clone(), g.rng.random_range(0..cfg.max_depth.max(1))))
            .collect();
        let mut u = Untyped { g, r: &r };
        let threads = 1 + u.g.below(3);
        let mut parts = Vec::new();
        let per = cfg.max_size / (threads + 1);
        for _ in 0..threads {
            parts.push(u.term(0, per.max(1)));
        }
        for name in &names {
            for _ in 0..u.g.below(cfg.stores.max_per_region() + 1) {
                let d = r[name];
                let v = u.value(d, per.clamp(1, 6));
                parts.push(Term::store(Loc::Region(name.clone()), v));
            }
        }
        let p = assemble(parts);
        if p.size() <= cfg.max_size || attempt >= 64 {
            return (p, r);
        }
    }
    unreachable!()
}

fn assemble(parts: Vec<Term>) -> Term {
    parts.into_iter().reduce(Term::par).unwrap_or(Term::Unit)
}

/// Bangs needed to build a closed inhabitant of `a`.
fn need(a: &Type) -> u32 {
    match a {
        Type::Bang(b) => 1 + need(b),
        Type::Arrow(_, c) => need(c),
        _ => 0,
    }
}

/// Typed generation against the type system.
struct Typed<'a> {
    g: Gen,
    r: &'a RegionTypeContext,
}

impl Typed<'_> {
    fn small_type(&mut self, delta: u32) -> Type {
        let unit = Type::Unit;
        let endo = Type::arrow(Type::Unit, Type::Unit);
        let mut pool = vec![
            unit.clone(),
            endo.clone(),
            Type::bang(unit.clone()),
            Type::bang(endo),
            Type::bangs(2, unit),
        ];
        for (r, (_, a)) in self.r {
            pool.push(Type::region(r.clone(), a.clone()));
        }
        pool.retain(|a| delta + need(a) <= self.g.max_depth);
        self.g.pick(&pool).expect("unit always fits").clone()
    }

    fn var_of(&mut self, delta: u32, a: &Type) -> Option<Term> {
        let vars = self.g.usable(delta, |v| v.ty.as_ref() == Some(a));
        let i = *self.g.pick(&vars)?;
        Some(self.g.take(i))
    }

    /// Runs `f` with a fresh variable in scope; the result mentions it free.
    fn bind(
        &mut self,
        base: &str,
        depth: u32,
        ty: Option<Type>,
        linear: bool,
        region: Option<Name>,
        f: impl FnOnce(&mut Self) -> Term,
    ) -> (String, Term) {
        let name = self.g.name(base);
        self.g.scope.push(Var {
            name: name.clone(),
            depth,
            ty,
            linear,
            used: false,
            region,
        });
        let body = f(self);
        self.g.scope.pop();
        (name, body)
    }

    fn bind_lin(&mut self, delta: u32, a: &Type, f: impl FnOnce(&mut Self) -> Term) -> (String, Term) {
        self.bind("x", delta, Some(a.clone()), true, None, f)
    }

    /// A target of type `Reg_r a` usable at `delta`.
    fn target(&mut self, delta: u32, a: Option<&Type>) -> Option<(Term, Type)> {
        let mut cands: Vec<(Term, Type)> = Vec::new();
        for (r, (d, c)) in self.r {
            if *d == delta && a.is_none_or(|a| a == c) {
                cands.push((Term::Loc(Loc::Region(r.clone())), c.clone()));
            }
        }
        for i in self.g.addresses(|_| true) {
            let region = self.g.scope[i].region.clone().expect("address");
            let (d, c) = &self.r[&region];
            if *d == delta && a.is_none_or(|a| a == c) {
                cands.push((Term::free(&self.g.scope[i].name), c.clone()));
            }
        }
        self.g.pick(&cands).cloned()
    }

    fn leaf(&mut self, delta: u32, a: &Type) -> Term {
        if self.g.chance(0.5) {
            if let Some(v) = self.var_of(delta, a) {
                return v;
            }
        }
        match a {
            Type::Bang(b) => Term::bang(self.leaf(delta + 1, b)),
            Type::Arrow(b, c) => {
                let (x, body) = self.bind_lin(delta, b, |t| t.leaf(delta, c));
                lam(&x, Some((**b).clone()), body)
            }
            Type::Region(r, _) => Term::Loc(Loc::Region(r.clone())),
            _ => Term::Unit,
        }
    }

    fn value(&mut self, delta: u32, a: &Type, size: usize) -> Term {
        if size <= 1 {
            return self.leaf(delta, a);
        }
        match a {
            Type::Bang(b) => Term::bang(self.value(delta + 1, b, size - 1)),
            Type::Arrow(b, c) => {
                let (x, body) = self.bind_lin(delta, b, |t| t.term(delta, c, size - 1));
                lam(&x, Some((**b).clone()), body)
            }
            _ => self.leaf(delta, a),
        }
    }

    fn term(&mut self, delta: u32, a: &Type, size: usize) -> Term {
        if size <= 1 {
            return self.leaf(delta, a);
        }
        let half = size / 2;
        let deeper = u32::from(delta < self.g.max_depth);
        let stateful = u32::from(!self.r.is_empty());
        let unit = u32::from(*a == Type::Unit);
        // value, redex, let, get, set, new, sequence
        match self
            .g
            .weighted([2, 3, 3 * deeper, 2 * stateful, 3 * stateful * unit, stateful, 2])
        {
            0 => self.value(delta, a, size),
            1 => {
                let b = self.small_type(delta);
                let (x, body) = self.bind_lin(delta, &b, |t| t.term(delta, a, half));
                let arg = self.term(delta, &b, size - half - 1);
                Term::app(lam(&x, Some(b), body), arg)
            }
            2 => {
                // Prefer a content type some region at this depth can supply.
                let readable: Vec<Type> = self
                    .r
                    .values()
                    .filter_map(|(d, c)| match c {
                        Type::Bang(b) if *d == delta => Some((**b).clone()),
                        _ => None,
                    })
                    .collect();
                let b = match self.g.pick(&readable) {
                    Some(b) if self.g.chance(0.6) => b.clone(),
                    _ => self.small_type(delta + 1),
                };
                let bound = match self.target(delta, Some(&Type::bang(b.clone()))) {
                    Some((t, _)) if self.g.chance(0.7) => Term::Get(Box::new(t)),
                    _ => self.term(delta, &Type::bang(b.clone()), half),
                };
                let (x, body) = self.bind("y", delta + 1, Some(b.clone()), false, None, |t| {
                    t.term(delta, a, size - half - 1)
                });
                Term::abstract_let(&x, None, bound, body)
            }
            3 => match self.target(delta, Some(a)) {
                Some((t, _)) => Term::Get(Box::new(t)),
                None => self.value(delta, a, size),
            },
            4 => match self.target(delta, None) {
                Some((t, c)) => {
                    let v = self.value(delta, &c, size - 1);
                    Term::Set(Box::new(t), Box::new(v))
                }
                None => Term::Unit,
            },
            5 => {
                let regions: Vec<Name> = self.r.keys().cloned().collect();
                let region = self.g.pick(&regions).expect("nonempty").clone();
                let (x, body) = self.bind("a", delta, None, false, Some(region.clone()), |t| {
                    t.term(delta, a, size - 1)
                });
                new_in(&x, &region, body)
            }
            _ => {
                let first = self.term(delta, &Type::Unit, half);
                let then = self.term(delta, a, size - half - 1);
                let z = self.g.name("z");
                Term::app(lam(&z, Some(Type::Unit), then), first)
            }
        }
    }
}

/// Well-typed annotated program with its region context.
pub fn gen_typed(cfg: &GenConfig) -> (Term, RegionTypeContext) {
    for attempt in 0.. {
        let mut g = Gen::new(cfg.seed.wrapping_add(attempt << 32), cfg.max_depth);
        let contents = [
            Type::Unit,
            Type::bang(Type::Unit),
            Type::arrow(Type::Unit, Type::Unit),
            Type::bang(Type::arrow(Type::Unit, Type::Unit)),
        ];
        let mut r = RegionTypeContext::new();
        for name in region_names(cfg.regions) {
            let fitting: Vec<&Type> = contents.iter().filter(|a| need(a) < cfg.max_depth.max(1)).collect();
            let a = (*g.pick(&fitting).expect("unit fits")).clone();
            let d = g.rng.random_range(0..=cfg.max_depth - need(&a).min(cfg.max_depth));
            r.insert(name, (d, a));
        }
        let mut t = Typed { g, r: &r };
        let threads = 1 + t.g.below(3);
        let per = cfg.max_size / (threads + 1);
        let mut parts = Vec::new();
        for _ in 0..threads {
            let a = if t.g.chance(0.5) { Type::Unit } else { t.small_type(0) };
            parts.push(t.term(0, &a, per.max(1)));
        }
        for (name, (d, a)) in &r {
            for _ in 0..t.g.below(cfg.stores.max_per_region() + 1) {
                let v = t.value(*d, a, per.clamp(1, 6));
                parts.push(Term::store(Loc::Region(name.clone()), v));
            }
        }
        let p = assemble(parts);
        if p.size() <= cfg.max_size || attempt >= 64 {
            return (p, r);
        }
    }
    unreachable!()
}
