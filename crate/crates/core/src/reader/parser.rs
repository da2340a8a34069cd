use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use super::lexer::{lex, Spanned, Tok};
use super::{AddressDecl, ParseError, RegionDecl, SourceUnit, VarDecl};
use crate::syntax::{misplaced_store, shift, AddrId, Hint, Loc, Term};
use crate::types::{type_subst, Type};
use crate::Name;

pub(crate) const KEYWORDS: &[&str] = &[
    "let", "in", "get", "set", "new", "fun", "region", "address", "var", "type", "def", "of",
];

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every region must be declared.
    Strict,
    /// Unknown names in region position become regions.
    Lenient,
}

#[derive(Clone)]
struct Alias {
    params: Vec<Name>,
    body: Type,
}

const PRELUDE: &str = "\
type N = forall t. !(t -o t) -o !(t -o t);
type Pair a b = forall t. (a -o b -o t) -o t;
type List a = forall t. !(a -o t -o t) -o !(t -o t);
*";

fn prelude() -> &'static BTreeMap<String, Alias> {
    static CELL: OnceLock<BTreeMap<String, Alias>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut p = Parser {
            toks: lex(PRELUDE).expect("prelude lexes"),
            pos: 0,
            mode: Mode::Lenient,
            aliases: BTreeMap::new(),
            defs: BTreeMap::new(),
            regions: BTreeMap::new(),
            addresses: BTreeMap::new(),
            vars: BTreeSet::new(),
            implicit: BTreeSet::new(),
            scope: Vec::new(),
            tscope: Vec::new(),
        };
        p.source_unit().expect("prelude parses");
        p.aliases
    })
}

pub struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    mode: Mode,
    aliases: BTreeMap<String, Alias>,
    defs: BTreeMap<String, Term>,
    regions: BTreeMap<String, ()>,
    addresses: BTreeMap<String, Name>,
    vars: BTreeSet<String>,
    implicit: BTreeSet<String>,
    scope: Vec<String>,
    tscope: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub fn new(src: &str, mode: Mode) -> PResult<Parser> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            mode,
            aliases: prelude().clone(),
            defs: BTreeMap::new(),
            regions: BTreeMap::new(),
            addresses: BTreeMap::new(),
            vars: BTreeSet::new(),
            implicit: BTreeSet::new(),
            scope: Vec::new(),
            tscope: Vec::new(),
        })
    }

    pub fn implicit_regions(&self) -> BTreeSet<String> {
        self.implicit.clone()
    }

    pub fn predeclare(&mut self, regions: BTreeSet<String>) {
        for r in regions {
            self.regions.insert(r, ());
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(ParseError::Syntax {
            line,
            col,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            let found = self.peek().describe();
            self.error(format!("expected {}, found {found}", tok.describe()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            let found = self.peek().describe();
            self.error(format!("expected `{kw}`, found {found}"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected a name, found {}", other.describe())),
        }
    }

    fn nat(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                Ok(n)
            }
            other => self.error(format!("expected a number, found {}", other.describe())),
        }
    }

    fn depth(&mut self) -> PResult<u32> {
        let n = self.nat()?;
        u32::try_from(n).or_else(|_| self.error("depth is too large"))
    }

    // ---- declarations -------------------------------------------------

    pub fn source_unit(&mut self) -> PResult<SourceUnit> {
        let mut regions = Vec::new();
        let mut addresses = Vec::new();
        let mut vars = Vec::new();
        loop {
            if self.is_kw("region") {
                self.bump();
                let (line, col) = self.here();
                let name = self.ident()?;
                if self.regions.contains_key(&name) {
                    return Err(ParseError::DuplicateRegion { name, line, col });
                }
                let depth = if *self.peek() == Tok::Colon {
                    self.bump();
                    Some(self.depth()?)
                } else {
                    None
                };
                // Registered before the content type so it may mention the region.
                self.regions.insert(name.clone(), ());
                let ty = if self.is_kw("of") {
                    self.bump();
                    Some(self.ty()?)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                regions.push(RegionDecl {
                    name: name.into(),
                    depth,
                    ty,
                });
            } else if self.is_kw("address") {
                self.bump();
                let mut names = vec![self.ident()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    names.push(self.ident()?);
                }
                self.expect(Tok::Colon)?;
                let region = self.region_name()?;
                self.expect(Tok::Semi)?;
                for n in names {
                    self.addresses.insert(n.clone(), region.clone());
                    addresses.push(AddressDecl {
                        name: n.into(),
                        region: region.clone(),
                    });
                }
            } else if self.is_kw("var") {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Colon)?;
                let depth = self.depth()?;
                let ty = if self.is_kw("of") {
                    self.bump();
                    Some(self.ty()?)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                self.vars.insert(name.clone());
                vars.push(VarDecl {
                    name: name.into(),
                    depth,
                    ty,
                });
            } else if self.is_kw("type") {
                self.bump();
                let name = self.ident()?;
                let mut params = Vec::new();
                while let Tok::Ident(_) = self.peek() {
                    params.push(self.ident()?);
                }
                self.expect(Tok::Eq)?;
                let saved = self.tscope.len();
                self.tscope.extend(params.iter().cloned());
                let body = self.ty()?;
                self.tscope.truncate(saved);
                self.expect(Tok::Semi)?;
                self.aliases.insert(
                    name,
                    Alias {
                        params: params.into_iter().map(Name::from).collect(),
                        body,
                    },
                );
            } else if self.is_kw("def") {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                let body = self.program(false)?;
                self.expect(Tok::Semi)?;
                self.defs.insert(name, body);
            } else {
                break;
            }
        }
        let start = self.here();
        let body = self.program(true)?;
        if *self.peek() != Tok::Eof {
            let found = self.peek().describe();
            return self.error(format!("unexpected {found}"));
        }
        if let Some(path) = misplaced_store(&body) {
            return Err(ParseError::Syntax {
                line: start.0,
                col: start.1,
                message: format!("store at occurrence {path} is not in a static context"),
            });
        }
        Ok(SourceUnit {
            regions,
            addresses,
            vars,
            body,
        })
    }

    pub fn standalone_type(&mut self) -> PResult<Type> {
        let t = self.ty()?;
        if *self.peek() != Tok::Eof {
            let found = self.peek().describe();
            return self.error(format!("unexpected {found}"));
        }
        Ok(t)
    }

    fn region_name(&mut self) -> PResult<Name> {
        let (line, col) = self.here();
        let name = self.ident()?;
        self.check_region(name, line, col)
    }

    fn check_region(&mut self, name: String, line: usize, col: usize) -> PResult<Name> {
        if !self.regions.contains_key(&name) {
            if self.mode == Mode::Strict {
                return Err(ParseError::UndeclaredRegion { name, line, col });
            }
            self.implicit.insert(name.clone());
        }
        Ok(name.into())
    }

    // ---- types --------------------------------------------------------

    fn ty(&mut self) -> PResult<Type> {
        if *self.peek() == Tok::Forall {
            self.bump();
            let mut vars = vec![self.ident()?];
            while let Tok::Ident(_) = self.peek() {
                vars.push(self.ident()?);
            }
            self.expect(Tok::Dot)?;
            let saved = self.tscope.len();
            self.tscope.extend(vars.iter().cloned());
            let body = self.ty();
            self.tscope.truncate(saved);
            let body = body?;
            return Ok(vars
                .into_iter()
                .rev()
                .fold(body, |acc, v| Type::forall(v.as_str(), acc)));
        }
        let lhs = self.ty_app()?;
        if *self.peek() == Tok::Lolli {
            self.bump();
            let rhs = self.ty()?;
            return Ok(Type::arrow(lhs, rhs));
        }
        Ok(lhs)
    }

    fn starts_ty_atom(&self) -> bool {
        match self.peek() {
            Tok::Nat(1) | Tok::LParen => true,
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()),
            _ => false,
        }
    }

    fn ty_app(&mut self) -> PResult<Type> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Type::bang(self.ty_app()?))
            }
            Tok::Ident(s) if s == "Reg" && !self.tscope.contains(&s) => {
                self.bump();
                let r = self.region_name()?;
                let a = self.ty_atom()?;
                Ok(Type::region(r, a))
            }
            Tok::Ident(s) if !self.tscope.contains(&s) && self.aliases.contains_key(&s) => {
                self.bump();
                let alias = self.aliases[&s].clone();
                let mut args = Vec::new();
                for _ in 0..alias.params.len() {
                    if !self.starts_ty_atom() {
                        return self.error(format!("type `{s}` expects {} argument(s)", alias.params.len()));
                    }
                    args.push(self.ty_atom()?);
                }
                Ok(expand_alias(&alias, &args))
            }
            _ => self.ty_atom(),
        }
    }

    fn ty_atom(&mut self) -> PResult<Type> {
        match self.peek().clone() {
            Tok::Nat(1) => {
                self.bump();
                Ok(Type::Unit)
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(s) if self.tscope.contains(&s) => {
                self.bump();
                Ok(Type::var(s.as_str()))
            }
            Tok::Ident(s) if s == "B" => {
                self.bump();
                Ok(Type::Behaviour)
            }
            Tok::Ident(s) if self.aliases.get(&s).is_some_and(|a| a.params.is_empty()) => {
                self.bump();
                Ok(self.aliases[&s].body.clone())
            }
            Tok::Ident(_) => Ok(Type::var(self.ident()?.as_str())),
            other => self.error(format!("expected a type, found {}", other.describe())),
        }
    }

    // ---- terms --------------------------------------------------------

    /// `thread ('|' thread)*`, nested to the right.
    fn program(&mut self, allow_semi: bool) -> PResult<Term> {
        let first = self.thread(allow_semi)?;
        if *self.peek() == Tok::Bar {
            self.bump();
            let rest = self.program(allow_semi)?;
            return Ok(Term::par(first, rest));
        }
        Ok(first)
    }

    fn thread(&mut self, allow_semi: bool) -> PResult<Term> {
        if *self.peek_at(1) == Tok::StoreArrow {
            let loc = self.store_loc()?;
            self.bump();
            let (line, col) = self.here();
            let value = self.seq(allow_semi)?;
            if !value.is_value() {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    message: "store content must be a value".into(),
                });
            }
            return Ok(Term::store(loc, value));
        }
        self.seq(allow_semi)
    }

    fn store_loc(&mut self) -> PResult<Loc> {
        let (line, col) = self.here();
        match self.bump() {
            Tok::Ident(name) => {
                if let Some(region) = self.addresses.get(&name) {
                    return Ok(Loc::Address {
                        id: AddrId::Named(name.as_str().into()),
                        region: region.clone(),
                    });
                }
                Ok(Loc::Region(self.check_region(name, line, col)?))
            }
            Tok::Fresh(r, n) => Ok(Loc::Address {
                id: AddrId::Fresh(n),
                region: self.check_region(r, line, col)?,
            }),
            other => Err(ParseError::Syntax {
                line,
                col,
                message: format!("expected a region or address, found {}", other.describe()),
            }),
        }
    }

    fn seq(&mut self, allow_semi: bool) -> PResult<Term> {
        let first = self.expr(allow_semi)?;
        if allow_semi && *self.peek() == Tok::Semi {
            self.bump();
            let rest = self.seq(allow_semi)?;
            let lam = Term::Lam {
                hint: Hint::new("z"),
                ann: None,
                body: Box::new(shift(&rest, 1, 0)),
            };
            return Ok(Term::app(lam, first));
        }
        Ok(first)
    }

    fn starts_binder(&self) -> bool {
        matches!(self.peek(), Tok::Lambda | Tok::BigLambda)
            || self.is_kw("fun")
            || self.is_kw("let")
            || self.is_kw("new")
    }

    fn starts_prefix(&self) -> bool {
        match self.peek() {
            Tok::Star | Tok::LParen | Tok::Numeral(_) | Tok::LibRef(_) | Tok::Fresh(..) | Tok::Bang => true,
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()) || s == "get" || s == "set",
            _ => false,
        }
    }

    fn expr(&mut self, allow_semi: bool) -> PResult<Term> {
        if self.starts_binder() {
            return self.binder(allow_semi);
        }
        let mut head = self.prefix()?;
        loop {
            if *self.peek() == Tok::LBracket {
                self.bump();
                let ty = self.ty()?;
                self.expect(Tok::RBracket)?;
                head = Term::TyApp(Box::new(head), ty);
            } else if self.starts_prefix() {
                let arg = self.prefix()?;
                head = Term::app(head, arg);
            } else if self.starts_binder() {
                let arg = self.binder(allow_semi)?;
                head = Term::app(head, arg);
                break;
            } else {
                break;
            }
        }
        Ok(head)
    }

    fn binder_var(&mut self) -> PResult<(String, Option<Type>)> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let x = self.ident()?;
            self.expect(Tok::Colon)?;
            let ty = self.ty()?;
            self.expect(Tok::RParen)?;
            Ok((x, Some(ty)))
        } else {
            Ok((self.ident()?, None))
        }
    }

    fn with_bound<T>(&mut self, x: &str, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        self.scope.push(x.to_string());
        let r = f(self);
        self.scope.pop();
        r
    }

    fn lambda_tail(&mut self, allow_semi: bool, arrow: bool) -> PResult<Term> {
        let mut params = vec![self.binder_var()?];
        while matches!(self.peek(), Tok::Ident(_) | Tok::LParen) {
            params.push(self.binder_var()?);
        }
        if arrow {
            self.expect(Tok::Arrow)?;
        } else {
            self.expect(Tok::Dot)?;
        }
        self.lambda_params(&params, allow_semi)
    }

    fn lambda_params(&mut self, params: &[(String, Option<Type>)], allow_semi: bool) -> PResult<Term> {
        match params.split_first() {
            None => self.program(allow_semi),
            Some(((x, ann), rest)) => {
                let body = self.with_bound(x, |p| p.lambda_params(rest, allow_semi))?;
                Ok(Term::Lam {
                    hint: Hint::new(x),
                    ann: ann.clone(),
                    body: Box::new(body),
                })
            }
        }
    }

    fn binder(&mut self, allow_semi: bool) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Lambda => {
                self.bump();
                self.lambda_tail(allow_semi, false)
            }
            Tok::BigLambda => {
                self.bump();
                let mut vars = vec![self.ident()?];
                while let Tok::Ident(_) = self.peek() {
                    vars.push(self.ident()?);
                }
                self.expect(Tok::Dot)?;
                let saved = self.tscope.len();
                self.tscope.extend(vars.iter().cloned());
                let body = self.program(allow_semi);
                self.tscope.truncate(saved);
                let body = body?;
                Ok(vars.into_iter().rev().fold(body, |acc, v| Term::TyAbs {
                    tvar: v.as_str().into(),
                    body: Box::new(acc),
                }))
            }
            Tok::Ident(kw) if kw == "fun" => {
                self.bump();
                self.lambda_tail(allow_semi, true)
            }
            Tok::Ident(kw) if kw == "let" => {
                self.bump();
                self.expect(Tok::Bang)?;
                let (x, ann) = self.binder_var()?;
                self.expect(Tok::Eq)?;
                let bound = self.program(true)?;
                self.expect_kw("in")?;
                let body = self.with_bound(&x, |p| p.program(allow_semi))?;
                Ok(Term::LetBang {
                    hint: Hint::new(&x),
                    ann,
                    bound: Box::new(bound),
                    body: Box::new(body),
                })
            }
            Tok::Ident(kw) if kw == "new" => {
                self.bump();
                let x = self.ident()?;
                self.expect(Tok::Colon)?;
                let region = self.region_name()?;
                self.expect_kw("in")?;
                let body = self.with_bound(&x, |p| p.program(allow_semi))?;
                Ok(Term::New {
                    hint: Hint::new(&x),
                    region,
                    body: Box::new(body),
                })
            }
            other => self.error(format!("expected a binder, found {}", other.describe())),
        }
    }

    fn prefix(&mut self) -> PResult<Term> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Term::bang(self.prefix()?));
        }
        self.atom()
    }

    fn resolve(&mut self, name: &str) -> Term {
        if let Some(i) = self.scope.iter().rev().position(|y| y == name) {
            return Term::Bound(i as u32);
        }
        if let Some(t) = self.defs.get(name) {
            return t.clone();
        }
        if let Some(region) = self.addresses.get(name) {
            return Term::Loc(Loc::Address {
                id: AddrId::Named(name.into()),
                region: region.clone(),
            });
        }
        if self.regions.contains_key(name) {
            return Term::Loc(Loc::Region(name.into()));
        }
        Term::Free(name.into())
    }

    /// A get/set target: a lone name is read as a region unless bound or declared.
    fn target(&mut self) -> PResult<Term> {
        let lone = matches!(self.peek_at(1), Tok::RParen | Tok::Comma);
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Ident(name) if lone && !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                let t = self.resolve(&name);
                if matches!(t, Term::Free(_)) && !self.vars.contains(&name) {
                    let r = self.check_region(name, line, col)?;
                    return Ok(Term::Loc(Loc::Region(r)));
                }
                Ok(t)
            }
            Tok::Fresh(r, n) if lone => {
                self.bump();
                Ok(Term::Loc(Loc::Address {
                    id: AddrId::Fresh(n),
                    region: self.check_region(r, line, col)?,
                }))
            }
            _ => self.program(true),
        }
    }

    fn atom(&mut self) -> PResult<Term> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Star => {
                self.bump();
                Ok(Term::Unit)
            }
            Tok::LParen => {
                self.bump();
                let t = self.program(true)?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Numeral(n) => {
                self.bump();
                Ok(crate::encodings::numeral(n as usize))
            }
            Tok::LibRef(name) => {
                self.bump();
                crate::encodings::lookup(&name).ok_or(ParseError::Syntax {
                    line,
                    col,
                    message: format!("no library entry named `{name}`"),
                })
            }
            Tok::Fresh(r, n) => {
                self.bump();
                Ok(Term::Loc(Loc::Address {
                    id: AddrId::Fresh(n),
                    region: self.check_region(r, line, col)?,
                }))
            }
            Tok::Ident(kw) if kw == "get" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let target = self.target()?;
                self.expect(Tok::RParen)?;
                Ok(Term::Get(Box::new(target)))
            }
            Tok::Ident(kw) if kw == "set" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let target = self.target()?;
                self.expect(Tok::Comma)?;
                let value = self.program(true)?;
                self.expect(Tok::RParen)?;
                if value.is_value() {
                    return Ok(Term::Set(Box::new(target), Box::new(value)));
                }
                let lam = Term::Lam {
                    hint: Hint::new("z"),
                    ann: None,
                    body: Box::new(Term::Set(Box::new(shift(&target, 1, 0)), Box::new(Term::Bound(0)))),
                };
                Ok(Term::app(lam, value))
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                Ok(self.resolve(&name))
            }
            other => self.error(format!("expected a term, found {}", other.describe())),
        }
    }
}

fn expand_alias(alias: &Alias, args: &[Type]) -> Type {
    // Rename parameters apart first so that simultaneous substitution
    // cannot confuse a parameter with a variable of an argument.
    let mut avoid: BTreeSet<Name> = args.iter().flat_map(|a| a.free_vars()).collect();
    avoid.extend(alias.body.free_vars());
    let mut body = alias.body.clone();
    let mut fresh = Vec::new();
    for p in &alias.params {
        let f = crate::types::fresh_name(&format!("{p}'"), &avoid);
        avoid.insert(f.clone());
        body = type_subst(&body, &Type::Var(f.clone()), p);
        fresh.push(f);
    }
    for (f, a) in fresh.iter().zip(args) {
        body = type_subst(&body, a, f);
    }
    body
}
