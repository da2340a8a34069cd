use std::collections::BTreeSet;

use super::parser::KEYWORDS;
use super::SourceUnit;
use crate::syntax::{free_vars, AddrId, Loc, Term};
use crate::types::Type;

#[derive(Clone, Copy, Debug, Default)]
pub struct PrintOptions {
    /// Use `λ`, `Λ`, `∀`, `⊸` and `⇐` instead of their ASCII spellings.
    pub unicode: bool,
    /// Print library numerals as `#n`.
    pub fold_numerals: bool,
}

impl PrintOptions {
    pub fn ascii() -> PrintOptions {
        PrintOptions {
            unicode: false,
            fold_numerals: true,
        }
    }
}

pub fn print_type(ty: &Type) -> String {
    print_type_with(ty, PrintOptions::ascii())
}

pub fn print_type_with(ty: &Type, opts: PrintOptions) -> String {
    let mut out = String::new();
    ty_top(ty, opts, &mut out);
    out
}

fn nat_type() -> &'static Type {
    use std::sync::OnceLock;
    static N: OnceLock<Type> = OnceLock::new();
    N.get_or_init(|| {
        let t = || Type::var("t");
        let endo = || Type::arrow(t(), t());
        Type::forall("t", Type::arrow(Type::bang(endo()), Type::bang(endo())))
    })
}

/// Recognizes `Pair A B` and `List A` so printed types stay readable.
fn fold_alias(ty: &Type) -> Option<(&'static str, Vec<&Type>)> {
    let Type::Forall(t, body) = ty else { return None };
    let is_t = |x: &Type| matches!(x, Type::Var(v) if v == t);
    let free_of_t = |x: &Type| !x.free_vars().contains(t);
    let Type::Arrow(dom, cod) = &**body else { return None };
    if is_t(cod) {
        if let Type::Arrow(a, rest) = &**dom {
            if let Type::Arrow(b, res) = &**rest {
                if is_t(res) && free_of_t(a) && free_of_t(b) {
                    return Some(("Pair", vec![a, b]));
                }
            }
        }
    }
    if let (Type::Bang(step), Type::Bang(endo)) = (&**dom, &**cod) {
        if let (Type::Arrow(a, rest), Type::Arrow(x, y)) = (&**step, &**endo) {
            if let Type::Arrow(u, v) = &**rest {
                if is_t(u) && is_t(v) && is_t(x) && is_t(y) && free_of_t(a) {
                    return Some(("List", vec![a]));
                }
            }
        }
    }
    None
}

fn ty_top(ty: &Type, o: PrintOptions, out: &mut String) {
    if ty == nat_type() || fold_alias(ty).is_some() {
        return ty_app(ty, o, out);
    }
    match ty {
        Type::Forall(t, body) => {
            out.push_str(if o.unicode { "∀" } else { "forall " });
            out.push_str(t);
            out.push_str(". ");
            ty_top(body, o, out);
        }
        Type::Arrow(a, b) => {
            ty_app(a, o, out);
            out.push_str(if o.unicode { " ⊸ " } else { " -o " });
            ty_top(b, o, out);
        }
        _ => ty_app(ty, o, out),
    }
}

fn ty_app(ty: &Type, o: PrintOptions, out: &mut String) {
    if let Some((name, args)) = fold_alias(ty) {
        out.push_str(name);
        for a in args {
            out.push(' ');
            ty_atom(a, o, out);
        }
        return;
    }
    match ty {
        Type::Bang(a) => {
            out.push('!');
            ty_app(a, o, out);
        }
        Type::Region(r, a) => {
            out.push_str("Reg ");
            out.push_str(r);
            out.push(' ');
            ty_atom(a, o, out);
        }
        _ => ty_atom(ty, o, out),
    }
}

fn ty_atom(ty: &Type, o: PrintOptions, out: &mut String) {
    if ty == nat_type() {
        out.push('N');
        return;
    }
    match ty {
        Type::Unit => out.push('1'),
        Type::Behaviour => out.push('B'),
        Type::Var(v) => out.push_str(v),
        _ => {
            out.push('(');
            ty_top(ty, o, out);
            out.push(')');
        }
    }
}

pub fn print_term(t: &Term) -> String {
    print_term_with(t, PrintOptions::ascii())
}

pub fn print_term_with(t: &Term, opts: PrintOptions) -> String {
    let mut reserved: BTreeSet<String> = free_vars(t).iter().map(|s| s.to_string()).collect();
    t.visit(&mut |n| {
        if let Term::Loc(l) | Term::Store(l, _) = n {
            reserved.insert(l.region().to_string());
            if let Loc::Address {
                id: AddrId::Named(x), ..
            } = l
            {
                reserved.insert(x.to_string());
            }
        }
        if let Term::New { region, .. } = n {
            reserved.insert(region.to_string());
        }
    });
    let mut p = Printer {
        o: opts,
        reserved,
        env: Vec::new(),
        out: String::new(),
    };
    p.program(t, true);
    p.out
}

/// Renders a source unit as declarations followed by the program.
pub fn print_unit(u: &SourceUnit, opts: PrintOptions) -> String {
    let mut out = String::new();
    for r in &u.regions {
        out.push_str("region ");
        out.push_str(&r.name);
        if let Some(d) = r.depth {
            out.push_str(&format!(" : {d}"));
        }
        if let Some(t) = &r.ty {
            out.push_str(" of ");
            out.push_str(&print_type_with(t, opts));
        }
        out.push_str(";\n");
    }
    for a in &u.addresses {
        out.push_str(&format!("address {} : {};\n", a.name, a.region));
    }
    for v in &u.vars {
        out.push_str(&format!("var {} : {}", v.name, v.depth));
        if let Some(t) = &v.ty {
            out.push_str(" of ");
            out.push_str(&print_type_with(t, opts));
        }
        out.push_str(";\n");
    }
    out.push_str(&print_term_with(&u.body, opts));
    out.push('\n');
    out
}

struct Printer {
    o: PrintOptions,
    reserved: BTreeSet<String>,
    env: Vec<String>,
    out: String,
}

fn is_binder(t: &Term) -> bool {
    matches!(
        t,
        Term::Lam { .. } | Term::LetBang { .. } | Term::New { .. } | Term::TyAbs { .. }
    )
}

impl Printer {
    fn fresh(&self, hint: &str) -> String {
        let base = if hint.is_empty() || KEYWORDS.contains(&hint) {
            "x"
        } else {
            hint
        };
        let taken = |s: &str| self.env.iter().any(|e| e == s) || self.reserved.contains(s);
        if !taken(base) {
            return base.to_string();
        }
        let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
        let stem = if stem.is_empty() { "x" } else { stem };
        (1..)
            .map(|i| format!("{stem}{i}"))
            .find(|c| !taken(c))
            .expect("unbounded search")
    }

    fn ty(&mut self, ty: &Type) {
        let s = print_type_with(ty, self.o);
        self.out.push_str(&s);
    }

    fn loc(&mut self, l: &Loc) {
        match l {
            Loc::Region(r) => self.out.push_str(r),
            Loc::Address {
                id: AddrId::Named(x), ..
            } => self.out.push_str(x),
            Loc::Address {
                id: AddrId::Fresh(n),
                region,
            } => self.out.push_str(&format!("${region}.{n}")),
        }
    }

    /// Program level; `tail` says nothing follows up to a closing delimiter.
    fn program(&mut self, t: &Term, tail: bool) {
        match t {
            Term::Par(a, b) => {
                self.thread(a, false);
                self.out.push_str(" | ");
                self.program(b, tail);
            }
            _ => self.thread(t, tail),
        }
    }

    fn thread(&mut self, t: &Term, tail: bool) {
        match t {
            Term::Par(..) => self.parens(t),
            Term::Store(l, v) => {
                self.loc(l);
                self.out.push_str(if self.o.unicode { " ⇐ " } else { " <= " });
                self.expr(v, tail);
            }
            _ => self.expr(t, tail),
        }
    }

    fn parens(&mut self, t: &Term) {
        self.out.push('(');
        self.program(t, true);
        self.out.push(')');
    }

    fn bind(&mut self, hint: &str) -> String {
        let x = self.fresh(hint);
        self.env.push(x.clone());
        x
    }

    fn expr(&mut self, t: &Term, tail: bool) {
        if is_binder(t) && self.numeral(t).is_none() {
            if !tail {
                return self.parens(t);
            }
            return self.binder(t);
        }
        match t {
            Term::Par(..) | Term::Store(..) => self.parens(t),
            _ => self.app(t),
        }
    }

    fn binder(&mut self, t: &Term) {
        match t {
            Term::Lam { hint, ann, body } => {
                self.out.push_str(if self.o.unicode { "λ" } else { "\\" });
                let x = self.bind(&hint.0);
                match ann {
                    Some(a) => {
                        self.out.push_str(&format!("({x} : "));
                        self.ty(a);
                        self.out.push(')');
                    }
                    None => self.out.push_str(&x),
                }
                self.out.push_str(". ");
                self.program(body, true);
                self.env.pop();
            }
            Term::LetBang { hint, ann, bound, body } => {
                self.out.push_str("let !");
                let x = self.fresh(&hint.0);
                match ann {
                    Some(a) => {
                        self.out.push_str(&format!("({x} : "));
                        self.ty(a);
                        self.out.push(')');
                    }
                    None => self.out.push_str(&x),
                }
                self.out.push_str(" = ");
                self.program(bound, true);
                self.out.push_str(" in ");
                self.env.push(x);
                self.program(body, true);
                self.env.pop();
            }
            Term::New { hint, region, body } => {
                self.out.push_str("new ");
                let x = self.bind(&hint.0);
                self.out.push_str(&format!("{x} : {region} in "));
                self.program(body, true);
                self.env.pop();
            }
            Term::TyAbs { tvar, body } => {
                self.out.push_str(if self.o.unicode { "Λ" } else { "/\\" });
                self.out.push_str(tvar);
                self.out.push_str(". ");
                self.program(body, true);
            }
            _ => unreachable!("not a binder"),
        }
    }

    fn app(&mut self, t: &Term) {
        match t {
            Term::App(f, a) => {
                self.app(f);
                self.out.push(' ');
                self.prefix(a);
            }
            Term::TyApp(f, ty) => {
                self.app(f);
                self.out.push_str(" [");
                self.ty(ty);
                self.out.push(']');
            }
            _ => self.prefix(t),
        }
    }

    fn prefix(&mut self, t: &Term) {
        match t {
            Term::Bang(inner) => {
                self.out.push('!');
                self.prefix(inner);
            }
            _ => self.atom(t),
        }
    }

    fn numeral(&self, t: &Term) -> Option<usize> {
        if !self.o.fold_numerals {
            return None;
        }
        crate::encodings::match_numeral(t)
    }

    fn atom(&mut self, t: &Term) {
        if let Some(n) = self.numeral(t) {
            self.out.push_str(&format!("#{n}"));
            return;
        }
        match t {
            Term::Unit => self.out.push('*'),
            Term::Bound(i) => {
                let idx = self.env.len().checked_sub(1 + *i as usize);
                match idx {
                    Some(k) => {
                        let name = self.env[k].clone();
                        self.out.push_str(&name);
                    }
                    None => self.out.push_str(&format!("?{i}")),
                }
            }
            Term::Free(x) => self.out.push_str(x),
            Term::Loc(l) => self.loc(l),
            Term::Get(target) => {
                self.out.push_str("get(");
                self.program(target, true);
                self.out.push(')');
            }
            Term::Set(target, v) => {
                self.out.push_str("set(");
                self.program(target, true);
                self.out.push_str(", ");
                self.program(v, true);
                self.out.push(')');
            }
            _ => self.parens(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    fn roundtrip(s: &str) -> String {
        print_term(&parse_term(s).unwrap())
    }

    #[test]
    fn fixpoints() {
        assert_eq!(roundtrip("!(y y)"), "!(y y)");
        assert_eq!(roundtrip("\\x. \\y. x y"), "\\x. \\y. x y");
        assert_eq!(roundtrip("f !x (g y)"), "f !x (g y)");
        assert_eq!(roundtrip("(\\x. x) | y"), "(\\x. x) | y");
        assert_eq!(roundtrip("(a | b) | c"), "(a | b) | c");
        assert_eq!(roundtrip("a | b | c"), "a | b | c");
    }

    #[test]
    fn shadowed_names_are_renamed() {
        assert_eq!(roundtrip("\\x. \\x. x"), "\\x. \\x1. x1");
        // A binder named like a free variable must not capture it.
        let t = Term::lam("y", Term::app(Term::free("y"), Term::Bound(0)));
        assert_eq!(print_term(&t), "\\y1. y y1");
    }

    #[test]
    fn stores_and_effects() {
        assert_eq!(
            roundtrip("(let !x = get(r) in set(r, !x)) | r <= !(\\x. x *)"),
            "(let !x = get(r) in set(r, !x)) | r <= !(\\x. x *)"
        );
    }

    #[test]
    fn unicode_rendering() {
        let t = parse_term("/\\t. \\(x : t -o t). x").unwrap();
        let opts = PrintOptions {
            unicode: true,
            fold_numerals: true,
        };
        assert_eq!(print_term_with(&t, opts), "Λt. λ(x : t ⊸ t). x");
    }

    #[test]
    fn types_print_with_abbreviations() {
        let ty = crate::reader::parse_type("N -o !Pair 1 N -o List (Reg r N)").unwrap();
        assert_eq!(print_type(&ty), "N -o !Pair 1 N -o List (Reg r N)");
        let ty = crate::reader::parse_type("forall t. t -o !(t -o 1)").unwrap();
        assert_eq!(print_type(&ty), "forall t. t -o !(t -o 1)");
    }

    #[test]
    fn numerals_fold() {
        assert_eq!(roundtrip("#3"), "#3");
        assert_eq!(roundtrip("f #0 #2"), "f #0 #2");
    }
}
