//! Generic constructions: promotion, coercion, composition, bounded
//! iteration and list literals.
//!
//! Each builder writes a source skeleton whose holes are free variables
//! named `hole_*`, then substitutes the (closed) argument terms.

use crate::reader::{parse_term, print_type};
use crate::syntax::{subst, Term};
use crate::types::Type;

/// A closed term representing a function `N^arity → N` with result type `!^result_bangs N`.
#[derive(Clone, Debug)]
pub struct NatFun {
    pub term: Term,
    pub arity: usize,
    pub result_bangs: usize,
}

fn b(n: usize) -> String {
    "!".repeat(n)
}

fn fill(src: &str, holes: &[(&str, &Term)]) -> Term {
    let skeleton = parse_term(src).unwrap_or_else(|e| panic!("builder skeleton `{src}`: {e}"));
    holes.iter().fold(skeleton, |acc, (name, t)| subst(&acc, t, name))
}

fn vars(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|j| format!("{prefix}{j}")).collect()
}

/// `T^i = λ(x⃗ : !^i N). let !x⃗ = x⃗ in !(T^{i-1} x⃗)`, of type `(!^i N)^k ⊸ !^{p+i} N`.
pub fn promote(t: &Term, k: usize, i: usize) -> Term {
    if i == 0 {
        return t.clone();
    }
    let inner = promote(t, k, i - 1);
    let xs = vars("x", k);
    let mut src = String::new();
    for x in &xs {
        src += &format!("\\({x} : {}N). ", b(i));
    }
    for x in &xs {
        src += &format!("let !{x} = {x} in ");
    }
    src += "!(hole_t";
    for x in &xs {
        src += &format!(" {x}");
    }
    src += ")";
    fill(&src, &[("hole_t", &inner)])
}

/// `λ(y⃗ : N). t (C_{l_1} y_1) … (C_{l_k} y_k)`.
pub fn coerce(t: &Term, levels: &[usize]) -> Term {
    let ys = vars("y", levels.len());
    let mut src = String::new();
    for y in &ys {
        src += &format!("\\({y} : N). ");
    }
    src += "hole_t";
    for (y, l) in ys.iter().zip(levels) {
        src += &format!(" (@C_{l} {y})");
    }
    fill(&src, &[("hole_t", t)])
}

/// `x ↦ g(f_1(x), …, f_m(x))` with result type `!^{p+q+1} N`, where `g` has
/// result `!^p N` and `q` is the largest result exponent among the `f_i`.
pub fn compose(g: &NatFun, fs: &[NatFun]) -> Term {
    assert_eq!(
        g.arity,
        fs.len(),
        "outer arity must match the number of inner functions"
    );
    let k = fs.first().map_or(0, |f| f.arity);
    assert!(fs.iter().all(|f| f.arity == k), "inner functions must share an arity");
    let q = fs.iter().map(|f| f.result_bangs).max().unwrap_or(0);
    let aligned: Vec<Term> = fs
        .iter()
        .map(|f| {
            let d = q - f.result_bangs;
            coerce(&promote(&f.term, k, d), &vec![d; k])
        })
        .collect();
    let outer = promote(&g.term, g.arity, q + 1);
    let xs = vars("x", k);
    let names: Vec<String> = (0..fs.len()).map(|i| format!("hole_f{i}")).collect();
    let mut src = String::new();
    for x in &xs {
        src += &format!("\\({x} : !N). ");
    }
    for x in &xs {
        src += &format!("let !{x} = {x} in ");
    }
    src += "hole_g";
    for n in &names {
        src += &format!(" !({n}");
        for x in &xs {
            src += &format!(" {x}");
        }
        src += ")";
    }
    let mut holes: Vec<(&str, &Term)> = vec![("hole_g", &outer)];
    holes.extend(names.iter().map(String::as_str).zip(aligned.iter()));
    let banged = fill(&src, &holes);
    coerce(&banged, &vec![1; k])
}

/// `(n, x⃗) ↦ f(0, x⃗) ⊕ f(1, x⃗) ⊕ … ⊕ f(n, x⃗)` where `⊕` is `g : N ⊸ N ⊸ N`.
///
/// The result type is `!^{p+2} N` for `f` with result `!^p N` and arity `k + 1`.
pub fn bounded_iteration(f: &NatFun, g: &Term) -> Term {
    assert!(f.arity >= 1, "the summand takes the index as its first argument");
    let k = f.arity - 1;
    let p = f.result_bangs;
    let acc = format!("{}N", b(p + 1));
    let state = format!("(Pair (!N) ({acc}))");
    let gp = promote(g, 2, p + 1);
    let xs = vars("x", k);
    let inner: Vec<String> = vars("w", k);
    let lets = |out: &mut String| {
        for (w, x) in inner.iter().zip(&xs) {
            *out += &format!("let !{w} = {x} in ");
        }
    };
    let args = inner.iter().map(|w| format!(" {w}")).collect::<String>();
    let mut step = format!("!(\\(z : {state}). ");
    lets(&mut step);
    step += &format!(
        "z [{state}] (\\(a : !N). \\(c0 : {acc}). let !c = a in \
         @pair [!N] [{acc}] !(@succ c) (hole_g !(hole_f (@succ c){args}) c0)))"
    );
    let mut exit = format!("\\(h : !({state} -o {state})). let !h = h in !(");
    lets(&mut exit);
    exit += &format!("@snd [!N] [{acc}] (h (@pair [!N] [{acc}] !#0 !(hole_f #0{args}))))");
    let ys = vars("y", k);
    let mut src = String::from("\\(n : N). ");
    for y in &ys {
        src += &format!("\\({y} : N). ");
    }
    for (x, y) in xs.iter().zip(&ys) {
        src += &format!("let !{x} = @C_2 {y} in ");
    }
    src += &format!("@int_git [{state}] [{}N] ({step}) ({exit}) n", b(p + 2));
    fill(&src, &[("hole_f", &f.term), ("hole_g", &gp)])
}

/// `Λt. λ(f : !(A ⊸ t ⊸ t)). let !f = f in !(λ(z : t). f e_1 (… (f e_n z)))`.
pub fn list(elems: &[Term], elem_ty: &Type) -> Term {
    let a = print_type(elem_ty);
    let names = vars("hole_e", elems.len());
    let mut body = "z".to_string();
    for n in names.iter().rev() {
        body = format!("f {n} ({body})");
    }
    let src = format!("/\\t. \\(f : !(({a}) -o t -o t)). let !f = f in !(\\(z : t). {body})");
    let holes: Vec<(&str, &Term)> = names.iter().map(String::as_str).zip(elems).collect();
    fill(&src, &holes)
}
