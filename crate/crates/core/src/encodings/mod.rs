//! Church encodings: numerals, arithmetic, pairs, coercions, lists and the
//! side-effecting list iteration programs, all as annotated source.
//!
//! Hand-written entries live in `stdlib/*.eal`; the coercion families and
//! the composition / bounded-iteration instances are generated.

mod builders;

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

pub use builders::{bounded_iteration, coerce, compose, list, promote, NatFun};

use crate::eval::{strong_normalize, BudgetExceeded};
use crate::reader::{parse, parse_type, SourceUnit};
use crate::syntax::{Hint, Term};
use crate::types::{RegionTypeContext, Type};

/// Highest index generated for the `S_i` and `C_i` families.
pub const COERCION_CAP: usize = 4;

/// A library entry with the type it is checked against.
#[derive(Clone, Debug)]
pub struct StdlibEntry {
    pub name: String,
    pub source: String,
    /// Declared type, as source text.
    pub type_text: String,
    /// Number of numeral arguments for entries representing `N^k → N`.
    pub arity: Option<usize>,
    /// Bangs on the numeral result (`!^p N`).
    pub result_bangs: usize,
    /// Depth at which the entry is checked.
    pub depth: u32,
    pub description: String,
}

impl StdlibEntry {
    pub fn declared_type(&self) -> Type {
        parse_type(&self.type_text).expect("catalog types parse")
    }

    pub fn unit(&self) -> SourceUnit {
        parse(&self.source).unwrap_or_else(|e| panic!("library entry `{}`: {e}", self.name))
    }

    pub fn term(&self) -> Term {
        lookup(&self.name).expect("catalog entries resolve")
    }

    pub fn region_types(&self) -> RegionTypeContext {
        self.unit().region_types().unwrap_or_default()
    }
}

struct Hand {
    name: &'static str,
    source: &'static str,
    ty: &'static str,
    arity: Option<usize>,
    p: usize,
    depth: u32,
    description: &'static str,
}

const HAND: &[Hand] = &[
    Hand {
        name: "zero",
        source: include_str!("../../stdlib/zero.eal"),
        ty: "N",
        arity: Some(0),
        p: 0,
        depth: 0,
        description: "zero, ignoring the step function",
    },
    Hand {
        name: "succ",
        source: include_str!("../../stdlib/succ.eal"),
        ty: "N -o N",
        arity: Some(1),
        p: 0,
        depth: 0,
        description: "successor",
    },
    Hand {
        name: "add",
        source: include_str!("../../stdlib/add.eal"),
        ty: "N -o N -o N",
        arity: Some(2),
        p: 0,
        depth: 0,
        description: "addition",
    },
    Hand {
        name: "mult",
        source: include_str!("../../stdlib/mult.eal"),
        ty: "N -o N -o N",
        arity: Some(2),
        p: 0,
        depth: 0,
        description: "multiplication",
    },
    Hand {
        name: "int_it",
        source: include_str!("../../stdlib/int_it.eal"),
        ty: "N -o forall t. !(t -o t) -o !t -o !t",
        arity: None,
        p: 0,
        depth: 0,
        description: "iteration f^n(x)",
    },
    Hand {
        name: "int_git",
        source: include_str!("../../stdlib/int_git.eal"),
        ty: "forall t t'. !(t -o t) -o (!(t -o t) -o t') -o N -o t'",
        arity: None,
        p: 0,
        depth: 0,
        description: "generalised iteration exit(step^n)",
    },
    Hand {
        name: "pair",
        source: include_str!("../../stdlib/pair.eal"),
        ty: "forall a b. a -o b -o Pair a b",
        arity: None,
        p: 0,
        depth: 0,
        description: "pair constructor",
    },
    Hand {
        name: "fst",
        source: include_str!("../../stdlib/fst.eal"),
        ty: "forall a b. Pair a b -o a",
        arity: None,
        p: 0,
        depth: 0,
        description: "left projection",
    },
    Hand {
        name: "snd",
        source: include_str!("../../stdlib/snd.eal"),
        ty: "forall a b. Pair a b -o b",
        arity: None,
        p: 0,
        depth: 0,
        description: "right projection",
    },
    Hand {
        name: "pred",
        source: include_str!("../../stdlib/pred.eal"),
        ty: "N -o N",
        arity: Some(1),
        p: 0,
        depth: 0,
        description: "predecessor, with pred 0 = 0",
    },
    Hand {
        name: "sub_banged",
        source: include_str!("../../stdlib/sub_banged.eal"),
        ty: "!N -o N -o !N",
        arity: None,
        p: 1,
        depth: 0,
        description: "positive subtraction on a banged minuend",
    },
    Hand {
        name: "sub",
        source: include_str!("../../stdlib/sub.eal"),
        ty: "N -o N -o !N",
        arity: Some(2),
        p: 1,
        depth: 0,
        description: "positive subtraction",
    },
    Hand {
        name: "list_it",
        source: include_str!("../../stdlib/list_it.eal"),
        ty: "forall u t. !(u -o t -o t) -o List u -o !t -o !t",
        arity: None,
        p: 0,
        depth: 0,
        description: "list iterator",
    },
    Hand {
        name: "update",
        source: include_str!("../../stdlib/update.eal"),
        ty: "!Reg r N -o !1 -o !1",
        arity: None,
        p: 0,
        depth: 1,
        description: "doubles the numeral at an address of region r",
    },
    Hand {
        name: "run",
        source: include_str!("../../stdlib/run.eal"),
        ty: "!!1",
        arity: None,
        p: 0,
        depth: 0,
        description: "update iterated over the addresses x, y, z",
    },
    Hand {
        name: "gen_threads",
        source: include_str!("../../stdlib/gen_threads.eal"),
        ty: "forall t t'. !(t -o t') -o !t -o B",
        arity: None,
        p: 0,
        depth: 0,
        description: "applies f to x in three parallel threads",
    },
    Hand {
        name: "F",
        source: include_str!("../../stdlib/F.eal"),
        ty: "List (!Reg r N) -o !!1",
        arity: None,
        p: 0,
        depth: 0,
        description: "run, parametric in the list of addresses",
    },
    Hand {
        name: "run_threads",
        source: include_str!("../../stdlib/run_threads.eal"),
        ty: "B",
        arity: None,
        p: 0,
        depth: 0,
        description: "three threads each running F over x, y, z",
    },
];

fn bangs(i: usize) -> String {
    "!".repeat(i)
}

fn s_source(i: usize) -> String {
    if i == 0 {
        "@succ".into()
    } else {
        format!("\\(n : {b}N). let !n = n in !(@S_{j} n)", b = bangs(i), j = i - 1)
    }
}

fn c_source(i: usize) -> String {
    if i == 0 {
        "\\(x : N). x".into()
    } else {
        let j = i - 1;
        format!("\\(n : N). @int_it n [{b}N] !@S_{j} !({b}#0)", b = bangs(j))
    }
}

fn generated() -> Vec<StdlibEntry> {
    let mut out = Vec::new();
    for i in 0..=COERCION_CAP {
        out.push(StdlibEntry {
            name: format!("S_{i}"),
            source: s_source(i),
            type_text: format!("{b}N -o {b}N", b = bangs(i)),
            arity: None,
            result_bangs: i,
            depth: 0,
            description: format!("successor under {i} bang(s)"),
        });
    }
    for i in 0..=COERCION_CAP {
        out.push(StdlibEntry {
            name: format!("C_{i}"),
            source: c_source(i),
            type_text: format!("N -o {}N", bangs(i)),
            arity: Some(1),
            result_bangs: i,
            depth: 0,
            description: format!("coercion of a numeral to {i} bang(s)"),
        });
    }
    for (name, ty, arity, p, description) in [
        (
            "compose_example",
            "N -o N -o !!N",
            2,
            2,
            "add (mult x y) (sub x y), by composition",
        ),
        ("bsum_mult", "N -o N -o !!N", 2, 2, "sum of i * x for i from 0 to n"),
        (
            "bprod_falling",
            "N -o N -o !!!N",
            2,
            3,
            "product of x - i for i from 0 to n",
        ),
    ] {
        out.push(StdlibEntry {
            name: name.into(),
            source: String::new(),
            type_text: ty.into(),
            arity: Some(arity),
            result_bangs: p,
            depth: 0,
            description: description.into(),
        });
    }
    out
}

/// The full catalog, hand-written entries first.
pub fn stdlib() -> &'static [StdlibEntry] {
    static CATALOG: OnceLock<Vec<StdlibEntry>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let mut v: Vec<StdlibEntry> = HAND
            .iter()
            .map(|h| StdlibEntry {
                name: h.name.into(),
                source: h.source.into(),
                type_text: h.ty.into(),
                arity: h.arity,
                result_bangs: h.p,
                depth: h.depth,
                description: h.description.into(),
            })
            .collect();
        let mut gen = generated();
        for e in &mut gen {
            if e.source.is_empty() {
                e.source = crate::reader::print_term(&built(&e.name).expect("builder entry"));
            }
        }
        v.extend(gen);
        v
    })
}

pub fn entry(name: &str) -> Option<&'static StdlibEntry> {
    stdlib().iter().find(|e| e.name == name)
}

fn built(name: &str) -> Option<Term> {
    let nat = |name: &str, arity, p| NatFun {
        term: lookup(name).expect("base entry"),
        arity,
        result_bangs: p,
    };
    Some(match name {
        "compose_example" => compose(&nat("add", 2, 0), &[nat("mult", 2, 0), nat("sub", 2, 1)]),
        "bsum_mult" => bounded_iteration(&nat("mult", 2, 0), &lookup("add")?),
        "bprod_falling" => {
            let f = crate::reader::parse_term("\\(i : N). \\(x : N). @sub x i").expect("summand parses");
            bounded_iteration(
                &NatFun {
                    term: f,
                    arity: 2,
                    result_bangs: 1,
                },
                &lookup("mult")?,
            )
        }
        _ => return None,
    })
}

fn source_of(name: &str) -> Option<String> {
    if let Some(h) = HAND.iter().find(|h| h.name == name) {
        return Some(h.source.to_string());
    }
    let family = |prefix: &str| name.strip_prefix(prefix).and_then(|i| i.parse::<usize>().ok());
    if let Some(i) = family("S_") {
        return Some(s_source(i));
    }
    if let Some(i) = family("C_") {
        return Some(c_source(i));
    }
    None
}

/// Resolves a library name to its annotated term.
pub fn lookup(name: &str) -> Option<Term> {
    static CACHE: OnceLock<Mutex<HashMap<String, Term>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache lock").get(name) {
        return Some(t.clone());
    }
    // The lock is released while parsing: sources refer to other entries.
    let term = match source_of(name) {
        Some(src) => {
            parse(&src)
                .unwrap_or_else(|e| panic!("library entry `{name}`: {e}"))
                .body
        }
        None => built(name)?,
    };
    cache.lock().expect("cache lock").insert(name.to_string(), term.clone());
    Some(term)
}

/// The annotated numeral `Λt.λ(f:!(t⊸t)). let !f = f in !(λ(x:t). f (… (f x)))`.
pub fn numeral(n: usize) -> Term {
    let t = || Type::var("t");
    let endo = || Type::arrow(t(), t());
    // Under λf, let !f, λx: f is index 1 and x is index 0.
    let body = (0..n).fold(Term::Bound(0), |acc, _| Term::app(Term::Bound(1), acc));
    let inner = Term::Lam {
        hint: Hint::new("x"),
        ann: Some(t()),
        body: Box::new(body),
    };
    let let_f = Term::LetBang {
        hint: Hint::new("f"),
        ann: None,
        bound: Box::new(Term::Bound(0)),
        body: Box::new(Term::bang(inner)),
    };
    Term::TyAbs {
        tvar: "t".into(),
        body: Box::new(Term::Lam {
            hint: Hint::new("f"),
            ann: Some(Type::bang(endo())),
            body: Box::new(let_f),
        }),
    }
}

/// Exact match against [`numeral`], used to print `#n`.
pub fn match_numeral(t: &Term) -> Option<usize> {
    let Term::TyAbs { body, .. } = t else { return None };
    let Term::Lam { body, .. } = &**body else { return None };
    let Term::LetBang { body, .. } = &**body else {
        return None;
    };
    let Term::Bang(inner) = &**body else { return None };
    let Term::Lam { body, .. } = &**inner else { return None };
    let n = count_applications(body, 1, 0)?;
    (numeral(n) == *t).then_some(n)
}

fn count_applications(t: &Term, f: u32, x: u32) -> Option<usize> {
    let mut n = 0;
    let mut cur = t;
    loop {
        match cur {
            Term::Bound(i) if *i == x => return Some(n),
            Term::App(g, a) if **g == Term::Bound(f) => {
                n += 1;
                cur = a;
            }
            _ => return None,
        }
    }
}

/// Shape of an erased normal form: `λf. let !f = f in !(λx. fⁿ x)`, or `λf. !(λx. x)`.
pub fn match_erased_numeral(t: &Term) -> Option<usize> {
    let Term::Lam { body, .. } = t else { return None };
    match &**body {
        Term::LetBang { bound, body, .. } if **bound == Term::Bound(0) => {
            let Term::Bang(inner) = &**body else { return None };
            let Term::Lam { body, .. } = &**inner else { return None };
            count_applications(body, 1, 0)
        }
        Term::Bang(inner) => match &**inner {
            Term::Lam { body, .. } if **body == Term::Bound(0) => Some(0),
            _ => None,
        },
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("normal form is not a numeral")]
    NotANumeral,
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// Default step budget for strong normalization in decoding.
pub const DECODE_BUDGET: usize = 5_000_000;

/// Stack for decoding: unary normal forms nest as deep as their value.
const DECODE_STACK: usize = 1 << 30;

/// Strongly normalizes and reads back a numeral under `bangs` leading bangs.
pub fn decode_banged(t: &Term, bangs: usize) -> Result<usize, DecodeError> {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(DECODE_STACK)
            .spawn_scoped(s, || read_numeral(t, bangs))
            .expect("decoder thread starts")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

fn read_numeral(t: &Term, bangs: usize) -> Result<usize, DecodeError> {
    let nf = strong_normalize(t, DECODE_BUDGET)?;
    let mut cur = &nf;
    for _ in 0..bangs {
        match cur {
            Term::Bang(inner) => cur = inner,
            _ => return Err(DecodeError::NotANumeral),
        }
    }
    match_erased_numeral(cur).ok_or(DecodeError::NotANumeral)
}

pub fn decode(t: &Term) -> Result<usize, DecodeError> {
    decode_banged(t, 0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub inputs: Vec<usize>,
    pub expected: usize,
    pub got: Result<usize, DecodeError>,
}

#[derive(Clone, Debug)]
pub struct RepresentationReport {
    pub samples: Vec<Sample>,
}

impl RepresentationReport {
    pub fn passed(&self) -> bool {
        self.samples.iter().all(|s| s.got.as_ref() == Ok(&s.expected))
    }

    pub fn failures(&self) -> Vec<&Sample> {
        self.samples
            .iter()
            .filter(|s| s.got.as_ref() != Ok(&s.expected))
            .collect()
    }
}

/// Applies `f` to numerals for each sample and compares the decoded result with `host`.
pub fn verify_representation(
    f: &Term,
    result_bangs: usize,
    host: impl Fn(&[usize]) -> usize,
    samples: &[Vec<usize>],
) -> RepresentationReport {
    let samples = samples
        .iter()
        .map(|inputs| {
            let app = inputs.iter().fold(f.clone(), |acc, &n| Term::app(acc, numeral(n)));
            Sample {
                inputs: inputs.clone(),
                expected: host(inputs),
                got: decode_banged(&app, result_bangs),
            }
        })
        .collect();
    RepresentationReport { samples }
}

/// All tuples of `arity` naturals in `0..=max`.
pub fn grid(arity: usize, max: usize) -> Vec<Vec<usize>> {
    (0..arity).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter()
            .flat_map(|v| {
                (0..=max).map(move |n| {
                    let mut w = v.clone();
                    w.push(n);
                    w
                })
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    #[test]
    fn numerals_decode() {
        for n in 0..=16 {
            assert_eq!(decode(&numeral(n)), Ok(n));
            assert_eq!(match_numeral(&numeral(n)), Some(n));
        }
    }

    #[test]
    fn numeral_is_normal() {
        let n3 = numeral(3).erase();
        assert_eq!(strong_normalize(&n3, 100).unwrap(), n3);
    }

    #[test]
    fn zero_shapes_both_decode() {
        assert_eq!(decode(&lookup("zero").unwrap()), Ok(0));
        assert_eq!(decode(&numeral(0)), Ok(0));
    }

    #[test]
    fn non_numerals_are_rejected() {
        assert_eq!(decode(&parse_term("\\x. x").unwrap()), Err(DecodeError::NotANumeral));
    }

    #[test]
    fn small_arithmetic() {
        let app = |f: &str, args: &[usize]| {
            args.iter()
                .fold(lookup(f).unwrap(), |acc, &n| Term::app(acc, numeral(n)))
        };
        assert_eq!(decode(&app("succ", &[0])), Ok(1));
        assert_eq!(decode(&app("mult", &[2, 3])), Ok(6));
        assert_eq!(decode(&app("add", &[2, 3])), Ok(5));
        assert_eq!(decode(&app("pred", &[0])), Ok(0));
        assert_eq!(decode(&app("pred", &[4])), Ok(3));
        assert_eq!(decode_banged(&app("sub", &[3, 5]), 1), Ok(0));
        assert_eq!(decode_banged(&app("sub", &[5, 3]), 1), Ok(2));
    }

    #[test]
    fn grid_enumerates_tuples() {
        assert_eq!(grid(2, 1), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(grid(0, 5), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn catalog_names_are_unique_and_resolve() {
        let mut names: Vec<&str> = stdlib().iter().map(|e| e.name.as_str()).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
        for e in stdlib() {
            assert!(lookup(&e.name).is_some(), "{}", e.name);
        }
    }

    fn check_rep(name: &str, host: impl Fn(&[usize]) -> usize, samples: &[Vec<usize>]) {
        let e = entry(name).unwrap();
        let r = verify_representation(&e.term(), e.result_bangs, host, samples);
        assert!(r.passed(), "{name}: {:?}", r.failures());
    }

    #[test]
    fn coercions_preserve_value() {
        for i in 0..=COERCION_CAP {
            check_rep(&format!("C_{i}"), |v| v[0], &grid(1, 4));
        }
    }

    #[test]
    fn composed_entry() {
        check_rep(
            "compose_example",
            |v| v[0] * v[1] + v[0].saturating_sub(v[1]),
            &grid(2, 4),
        );
    }

    #[test]
    fn bounded_sum_entry() {
        check_rep("bsum_mult", |v| (0..=v[0]).map(|i| i * v[1]).sum(), &grid(2, 4));
    }

    #[test]
    fn bounded_product_entry() {
        check_rep(
            "bprod_falling",
            |v| (0..=v[0]).map(|i| v[1].saturating_sub(i)).product(),
            &grid(2, 4),
        );
    }
}
