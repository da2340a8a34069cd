//! Concrete syntax: lexer, parser, printer and `.eal` source units.
//!
//! A source unit is a sequence of declarations followed by a program body:
//!
//! ```text
//! region r : 0 of !(1 -o 1);     -- region with depth and content type
//! address x, y : r;              -- named addresses of region r
//! var z : 1 of N;                -- free variable with depth and type
//! type Twice a = a -o a;         -- type abbreviation
//! def id = \x. x;                -- term abbreviation, inlined on use
//! (let !x = get(r) in set(r, !x)) | r <= !(\x. x *)
//! ```

mod lexer;
mod parser;
mod printer;

use std::collections::BTreeSet;

use crate::syntax::{RegionDepthContext, Term, VarDepthContext};
use crate::types::{RegionTypeContext, Type, TypedVarContext};
use crate::Name;

pub use printer::{print_term, print_term_with, print_type, print_type_with, print_unit, PrintOptions};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: region `{name}` is declared twice")]
    DuplicateRegion { name: String, line: usize, col: usize },
    #[error("{line}:{col}: region `{name}` is not declared")]
    UndeclaredRegion { name: String, line: usize, col: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionDecl {
    pub name: Name,
    pub depth: Option<u32>,
    pub ty: Option<Type>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddressDecl {
    pub name: Name,
    pub region: Name,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: Name,
    pub depth: u32,
    pub ty: Option<Type>,
}

/// A parsed `.eal` file. Type and term abbreviations are expanded away.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceUnit {
    pub regions: Vec<RegionDecl>,
    pub addresses: Vec<AddressDecl>,
    pub vars: Vec<VarDecl>,
    pub body: Term,
}

impl SourceUnit {
    /// Region depths, when every region declares one.
    pub fn region_depths(&self) -> Option<RegionDepthContext> {
        self.regions
            .iter()
            .map(|r| r.depth.map(|d| (r.name.clone(), d)))
            .collect()
    }

    /// Region typing context, when every region declares depth and type.
    pub fn region_types(&self) -> Option<RegionTypeContext> {
        self.regions
            .iter()
            .map(|r| match (r.depth, &r.ty) {
                (Some(d), Some(t)) => Some((r.name.clone(), (d, t.clone()))),
                _ => None,
            })
            .collect()
    }

    pub fn var_depths(&self) -> VarDepthContext {
        self.vars.iter().map(|v| (v.name.clone(), v.depth)).collect()
    }

    /// Typed variable context, when every variable declares a type.
    pub fn var_types(&self) -> Option<TypedVarContext> {
        self.vars
            .iter()
            .map(|v| v.ty.clone().map(|t| (v.name.clone(), (v.depth, t))))
            .collect()
    }

    pub fn region_names(&self) -> BTreeSet<Name> {
        self.regions.iter().map(|r| r.name.clone()).collect()
    }
}

/// Parses a source unit. Every region used must be declared.
pub fn parse(src: &str) -> Result<SourceUnit, ParseError> {
    parser::Parser::new(src, parser::Mode::Strict)?.source_unit()
}

/// Parses a bare program; names in region position are taken as regions.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = parser::Parser::new(src, parser::Mode::Lenient)?;
    let unit = p.source_unit()?;
    let implicit = p.implicit_regions();
    if implicit.is_empty() {
        return Ok(unit.body);
    }
    // Second pass so that every use of such a name, not just the ones in
    // region position, resolves to the region.
    let mut p = parser::Parser::new(src, parser::Mode::Lenient)?;
    p.predeclare(implicit);
    Ok(p.source_unit()?.body)
}

/// Parses a type using the prelude abbreviations (`N`, `Pair a b`, `List a`).
pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    parser::Parser::new(src, parser::Mode::Lenient)?.standalone_type()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{Hint, Loc};

    #[test]
    fn dup_under_bang_term_shape() {
        let t = parse_term("\\x. let !y = x in !(y y)").unwrap();
        let expected = Term::lam(
            "x",
            Term::let_bang(
                "y",
                Term::Bound(0),
                Term::bang(Term::app(Term::Bound(0), Term::Bound(0))),
            ),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn unit() {
        assert_eq!(parse_term("*").unwrap(), Term::Unit);
    }

    #[test]
    fn declared_region_program_with_declared_region() {
        let u = parse("region r : 0 of !(1 -o 1); (let !x = get(r) in set(r, !x)) | r <= !(\\x. x *)").unwrap();
        assert_eq!(u.region_depths().unwrap().get("r"), Some(&0));
        let r = || Term::Loc(Loc::Region("r".into()));
        let expected = Term::par(
            Term::let_bang(
                "x",
                Term::Get(Box::new(r())),
                Term::Set(Box::new(r()), Box::new(Term::bang(Term::Bound(0)))),
            ),
            Term::store(
                Loc::Region("r".into()),
                Term::bang(Term::lam("x", Term::app(Term::Bound(0), Term::Unit))),
            ),
        );
        assert_eq!(u.body, expected);
    }

    #[test]
    fn fun_arrow_and_backslash_agree() {
        assert_eq!(parse_term("fun x -> x").unwrap(), parse_term("\\x. x").unwrap());
        assert_eq!(parse_term("\\x y. x").unwrap(), parse_term("\\x. \\y. x").unwrap());
    }

    #[test]
    fn application_is_left_associative_and_bang_binds_tighter() {
        let t = parse_term("f !x y").unwrap();
        let expected = Term::app(Term::app(Term::free("f"), Term::bang(Term::free("x"))), Term::free("y"));
        assert_eq!(t, expected);
    }

    #[test]
    fn bar_binds_loosest_and_nests_right() {
        let t = parse_term("a b | c | d").unwrap();
        let expected = Term::par(
            Term::app(Term::free("a"), Term::free("b")),
            Term::par(Term::free("c"), Term::free("d")),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn sequencing_desugars_to_application() {
        let t = parse_term("a; b").unwrap();
        let expected = Term::app(
            Term::Lam {
                hint: Hint::new("z"),
                ann: None,
                body: Box::new(Term::free("b")),
            },
            Term::free("a"),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn set_with_non_value_argument_desugars() {
        let t = parse_term("set(r, f x)").unwrap();
        assert_eq!(t, parse_term("(\\z. set(r, z)) (f x)").unwrap());
    }

    #[test]
    fn duplicate_and_undeclared_regions() {
        assert!(matches!(
            parse("region r : 0; region r : 1; *"),
            Err(ParseError::DuplicateRegion { .. })
        ));
        assert!(matches!(parse("get(r)"), Err(ParseError::UndeclaredRegion { .. })));
    }

    #[test]
    fn syntax_errors_are_located() {
        match parse_term("\\x. (x") {
            Err(ParseError::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 7)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stores_only_in_static_contexts() {
        assert!(parse_term("m (n | r <= *)").is_err());
        assert!(parse_term("\\x. r <= *").is_err());
        assert!(parse_term("m | r <= *").is_ok());
    }

    #[test]
    fn store_content_must_be_a_value() {
        assert!(parse_term("r <= f x").is_err());
    }

    #[test]
    fn annotations_and_type_abstraction() {
        let t = parse_term("/\\t. \\(x : t). x").unwrap();
        match t {
            Term::TyAbs { tvar, body } => {
                assert_eq!(&*tvar, "t");
                assert!(matches!(
                    *body,
                    Term::Lam {
                        ann: Some(Type::Var(_)),
                        ..
                    }
                ));
            }
            other => panic!("unexpected {other:?}"),
        }
        let app = parse_term("n [1] f").unwrap();
        assert_eq!(
            app,
            Term::app(Term::TyApp(Box::new(Term::free("n")), Type::Unit), Term::free("f"))
        );
    }

    #[test]
    fn prelude_types() {
        let n = parse_type("N").unwrap();
        assert_eq!(n, parse_type("forall t. !(t -o t) -o !(t -o t)").unwrap());
        assert_eq!(
            parse_type("Pair 1 1").unwrap(),
            parse_type("forall t. (1 -o 1 -o t) -o t").unwrap()
        );
    }

    #[test]
    fn declarations_and_definitions() {
        let u = parse(
            "region r : 2 of N; address x, y : r; var w : 1 of N; \
             type Twice a = a -o a; def id = \\(z : Twice 1). z; id (w; x)",
        )
        .unwrap();
        assert_eq!(u.addresses.len(), 2);
        assert_eq!(u.vars[0].depth, 1);
        assert_eq!(u.var_types().unwrap()["w"].1, parse_type("N").unwrap());
        match &u.body {
            Term::App(f, _) => assert!(matches!(
                **f,
                Term::Lam {
                    ann: Some(Type::Arrow(..)),
                    ..
                }
            )),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn generated_addresses_parse() {
        let u = parse("region r : 0; $r.4 <= *").unwrap();
        assert!(matches!(
            u.body,
            Term::Store(
                Loc::Address {
                    id: crate::syntax::AddrId::Fresh(4),
                    ..
                },
                _
            )
        ));
    }
}
