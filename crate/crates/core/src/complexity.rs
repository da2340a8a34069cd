//! Occurrence measures, tower functions and bound certificates.

use std::cmp::Ordering;
use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::depth::{check_depth, DepthError};
use crate::eval::Trace;
use crate::syntax::{revised_depths, NodeKind, RegionDepthContext, SyntaxError, Term, VarDepthContext};

/// Default bound on the decimal digits of an exact tower value.
pub const DEFAULT_DIGIT_CAP: u64 = 1_000_000;

/// Digit cap from `EAL_DIGIT_CAP`, else [`DEFAULT_DIGIT_CAP`].
pub fn digit_cap() -> u64 {
    static CAP: OnceLock<u64> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("EAL_DIGIT_CAP")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_DIGIT_CAP)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ComplexityError {
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("padding {n} is below the program depth {depth}")]
    PaddingTooSmall { n: u32, depth: u32 },
    #[error("measure vectors of lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("not well-formed: {0}")]
    NotWellFormed(Box<DepthError>),
}

impl From<SyntaxError> for ComplexityError {
    fn from(e: SyntaxError) -> Self {
        match e {
            SyntaxError::UnknownRegion(r) => ComplexityError::UnknownRegion(r.to_string()),
            other => ComplexityError::NotWellFormed(Box::new(other.into())),
        }
    }
}

/// Weight of a node in the measure: parallel composition and stores are free,
/// a write counts twice.
pub fn weight(kind: NodeKind) -> u64 {
    match kind {
        NodeKind::Par | NodeKind::Store => 0,
        NodeKind::Set => 2,
        _ => 1,
    }
}

/// Weighted occurrence counts per revised depth, without the `+2`.
fn counts(p: &Term, r: &RegionDepthContext) -> Result<Vec<u64>, ComplexityError> {
    let mut out = Vec::new();
    for (occ, d) in revised_depths(p, r)? {
        let d = d as usize;
        if out.len() <= d {
            out.resize(d + 1, 0);
        }
        out[d] += weight(occ.kind);
    }
    Ok(out)
}

/// `ω_i(P)`: weighted occurrences at revised depth `i`, plus 2.
pub fn omega(p: &Term, r: &RegionDepthContext, i: u32) -> Result<u64, ComplexityError> {
    Ok(counts(p, r)?.get(i as usize).copied().unwrap_or(0) + 2)
}

/// Total weighted size of a program.
pub fn counted_size(p: &Term, r: &RegionDepthContext) -> Result<u64, ComplexityError> {
    Ok(counts(p, r)?.iter().sum())
}

/// `(ω_n, …, ω_0)`, most significant entry last.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct MeasureVector(pub Vec<u64>);

impl MeasureVector {
    pub fn n(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    /// `ω_i`.
    pub fn at(&self, i: usize) -> u64 {
        self.0[self.0.len() - 1 - i]
    }
}

impl fmt::Display for MeasureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// `μ_n(P)`.
pub fn mu(p: &Term, r: &RegionDepthContext, n: u32) -> Result<MeasureVector, ComplexityError> {
    let c = counts(p, r)?;
    let depth = c.len().saturating_sub(1) as u32;
    if depth > n {
        return Err(ComplexityError::PaddingTooSmall { n, depth });
    }
    Ok(MeasureVector(
        (0..=n as usize)
            .rev()
            .map(|i| c.get(i).copied().unwrap_or(0) + 2)
            .collect(),
    ))
}

/// Lexicographic order read from the right: `ω_0` decides first.
pub fn lex_compare(a: &MeasureVector, b: &MeasureVector) -> Result<Ordering, ComplexityError> {
    if a.0.len() != b.0.len() {
        return Err(ComplexityError::LengthMismatch(a.0.len(), b.0.len()));
    }
    Ok(a.0.iter().rev().cmp(b.0.iter().rev()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TowerValue {
    Exact(BigUint),
    /// More than `digit_cap` decimal digits.
    TooLarge {
        digit_cap: u64,
    },
}

impl TowerValue {
    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            TowerValue::Exact(v) => Some(v),
            TowerValue::TooLarge { .. } => None,
        }
    }
}

impl fmt::Display for TowerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TowerValue::Exact(v) => write!(f, "{v}"),
            TowerValue::TooLarge { .. } => f.write_str("TooLarge"),
        }
    }
}

/// `t_α(x1, …, xn) = (α·x1)^(2^t_α(x2, …, xn))`, `t_α() = 0`, under the default cap.
pub fn tower(alpha: u64, v: &[u64]) -> TowerValue {
    tower_with_cap(alpha, v, digit_cap())
}

pub fn tower_with_cap(alpha: u64, v: &[u64], cap: u64) -> TowerValue {
    let Some((&x1, rest)) = v.split_first() else {
        return TowerValue::Exact(BigUint::zero());
    };
    let base = BigUint::from(alpha) * BigUint::from(x1);
    let k = match tower_with_cap(alpha, rest, cap) {
        TowerValue::Exact(k) => k,
        too_large => return too_large,
    };
    power_of_power(&base, &k, cap)
}

/// Whether `base^(2^k)` has fewer than `cap` decimal digits.
fn fits(base: &BigUint, k: u64, cap: u64) -> bool {
    base <= &BigUint::one() || (k < 64 && (1u64 << k) as f64 * log10(base) < cap as f64)
}

/// `base^(2^k)` by `k` squarings, unless it has more than `cap` digits.
fn power_of_power(base: &BigUint, k: &BigUint, cap: u64) -> TowerValue {
    match k.to_u64().filter(|&k| fits(base, k, cap)) {
        Some(k) => {
            let mut acc = base.clone();
            for _ in 0..k {
                acc = &acc * &acc;
            }
            TowerValue::Exact(acc)
        }
        None => TowerValue::TooLarge { digit_cap: cap },
    }
}

/// Whether `t_α(v)` has fewer than `cap` digits, without evaluating it.
pub fn tower_fits(alpha: u64, v: &[u64], cap: u64) -> bool {
    let Some((&x1, rest)) = v.split_first() else {
        return true;
    };
    let base = BigUint::from(alpha) * BigUint::from(x1);
    // An exponent of 2^64 or more never fits, so the tail needs 20 digits at most.
    match tower_with_cap(alpha, rest, 20) {
        TowerValue::Exact(k) => k.to_u64().is_some_and(|k| fits(&base, k, cap)),
        TowerValue::TooLarge { .. } => false,
    }
}

/// Whether `t_α(v) ≥ bound`, without evaluating large towers.
pub fn tower_at_least(alpha: u64, v: &[u64], bound: u64) -> bool {
    let Some((&x1, rest)) = v.split_first() else {
        return bound == 0;
    };
    let base = BigUint::from(alpha) * BigUint::from(x1);
    let bound = BigUint::from(bound);
    match tower_with_cap(alpha, rest, 20) {
        TowerValue::Exact(k) => match k.to_u64() {
            Some(k) => raise(base, k, &bound).is_none_or(|t| t >= bound),
            None => true,
        },
        TowerValue::TooLarge { .. } => true,
    }
}

fn log10(x: &BigUint) -> f64 {
    let bits = x.bits();
    // Keep the top 53 bits for an f64 mantissa.
    let shift = bits.saturating_sub(53);
    let top = (x >> shift).to_f64().expect("53 bits fit");
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Digit cap for the inner levels of [`tower_cmp`].
const CMP_CAP: u64 = 1_000;

/// Compares `t_α(v)` with `t_α(w)` without evaluating them.
///
/// `log2 log2 t_α(x1, x̄) = t_α(x̄) + log2 log2(α·x1)`, so the heads only
/// matter when the tails are close.
pub fn tower_cmp(alpha: u64, v: &[u64], w: &[u64]) -> Ordering {
    let (Some((&x, xs)), Some((&y, ys))) = (v.split_first(), w.split_first()) else {
        return v.len().cmp(&w.len());
    };
    let bx = BigUint::from(alpha) * BigUint::from(x);
    let by = BigUint::from(alpha) * BigUint::from(y);
    let (tx, ty) = (tower_with_cap(alpha, xs, CMP_CAP), tower_with_cap(alpha, ys, CMP_CAP));
    let (TowerValue::Exact(tx), TowerValue::Exact(ty)) = (tx, ty) else {
        // At least one tail exceeds 10^1000; distinct tails dwarf the heads.
        return match tower_cmp(alpha, xs, ys) {
            Ordering::Equal => bx.cmp(&by),
            o => o,
        };
    };
    let d = BigInt::from(tx) - BigInt::from(ty);
    // Compare bx^(2^d) with by, or by^(2^-d) with bx.
    let (a, b, e, flip) = match d.to_i64() {
        Some(d) if d >= 0 => (bx, by, d as u64, false),
        Some(d) => (by, bx, d.unsigned_abs(), true),
        None => {
            return if d > BigInt::zero() {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
    };
    let o = raise(a, e, &b).map_or(Ordering::Greater, |l| l.cmp(&b));
    if flip {
        o.reverse()
    } else {
        o
    }
}

/// `a^(2^e)` when it does not exceed `bound` by more than one squaring, else `None`.
fn raise(a: BigUint, e: u64, bound: &BigUint) -> Option<BigUint> {
    let mut acc = a;
    for _ in 0..e {
        if acc > *bound {
            return None;
        }
        acc = &acc * &acc;
    }
    Some(acc)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundCertificate {
    pub alpha: u32,
    pub mu: MeasureVector,
    pub tower: TowerValue,
}

impl Serialize for TowerValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TowerValue::Exact(v) => s.collect_str(v),
            TowerValue::TooLarge { .. } => s.serialize_str("TooLarge"),
        }
    }
}

/// Tower multiplier for depth `α`; depth 0 uses 1.
pub fn multiplier(alpha: u32) -> u64 {
    u64::from(alpha.max(1))
}

/// `α = d(P)`, `μ_α(P)` and `t_α(μ_α(P))` for a well-formed closed program.
pub fn certificate(p: &Term, r: &RegionDepthContext) -> Result<BoundCertificate, ComplexityError> {
    certificate_with_cap(p, r, digit_cap())
}

pub fn certificate_with_cap(p: &Term, r: &RegionDepthContext, cap: u64) -> Result<BoundCertificate, ComplexityError> {
    check_depth(p, r, &VarDepthContext::new(), 0).map_err(|e| ComplexityError::NotWellFormed(Box::new(e)))?;
    let alpha = crate::syntax::revised_depth(p, r)?;
    let mu = mu(p, r, alpha)?;
    let tower = tower_with_cap(multiplier(alpha), &mu.0, cap);
    Ok(BoundCertificate { alpha, mu, tower })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// `μ_n` did not strictly decrease.
    Measure,
    /// Both towers were exact and did not strictly decrease.
    Tower,
    /// The program outgrew the padding depth.
    Depth,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Index of the step, counted from 1.
    pub step: usize,
    pub kind: ViolationKind,
    pub before: Option<MeasureVector>,
    pub after: Option<MeasureVector>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonotonicityReport {
    pub n: u32,
    pub steps_checked: usize,
    /// Steps whose towers were both exact.
    pub tower_steps: usize,
    pub violation: Option<Violation>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks strict decrease of `μ_n` and, where exact, of `t_n` along `trace`,
/// with `n` the depth of the initial program.
pub fn monitor(trace: &Trace, r: &RegionDepthContext) -> Result<MonotonicityReport, ComplexityError> {
    let states: Vec<Term> = trace.states().iter().map(|s| s.to_term()).collect();
    monitor_terms(&states, r, digit_cap())
}

/// As [`monitor`], on an explicit sequence of programs.
pub fn monitor_terms(states: &[Term], r: &RegionDepthContext, cap: u64) -> Result<MonotonicityReport, ComplexityError> {
    let Some(first) = states.first() else {
        return Ok(MonotonicityReport {
            n: 0,
            steps_checked: 0,
            tower_steps: 0,
            violation: None,
        });
    };
    let n = crate::syntax::revised_depth(first, r)?;
    let alpha = multiplier(n);
    let mut report = MonotonicityReport {
        n,
        steps_checked: 0,
        tower_steps: 0,
        violation: None,
    };
    let mut prev = mu(first, r, n)?;
    let mut prev_fits = tower_fits(alpha, &prev.0, cap);
    for (i, next) in states.iter().enumerate().skip(1) {
        report.steps_checked = i;
        let cur = match mu(next, r, n) {
            Ok(m) => m,
            Err(ComplexityError::PaddingTooSmall { .. }) => {
                report.violation = Some(Violation {
                    step: i,
                    kind: ViolationKind::Depth,
                    before: Some(prev),
                    after: None,
                });
                return Ok(report);
            }
            Err(e) => return Err(e),
        };
        if lex_compare(&cur, &prev)? != Ordering::Less {
            report.violation = Some(Violation {
                step: i,
                kind: ViolationKind::Measure,
                before: Some(prev),
                after: Some(cur),
            });
            return Ok(report);
        }
        let cur_fits = tower_fits(alpha, &cur.0, cap);
        if prev_fits && cur_fits {
            report.tower_steps += 1;
            if tower_cmp(alpha, &cur.0, &prev.0) != Ordering::Less {
                report.violation = Some(Violation {
                    step: i,
                    kind: ViolationKind::Tower,
                    before: Some(prev),
                    after: Some(cur),
                });
                return Ok(report);
            }
        }
        prev = cur;
        prev_fits = cur_fits;
    }
    Ok(report)
}

/// Fills the `measure` and `tower` fields of every trace entry.
pub fn annotate(trace: &mut Trace, r: &RegionDepthContext) -> Result<(), ComplexityError> {
    let states = trace.states();
    let n = crate::syntax::revised_depth(&states[0].to_term(), r)?;
    for (entry, state) in trace.entries.iter_mut().zip(states.iter().skip(1)) {
        let t = state.to_term();
        let depth = crate::syntax::revised_depth(&t, r)?;
        let m = mu(&t, r, n.max(depth))?;
        entry.tower = Some(tower(multiplier(n.max(depth)), &m.0).to_string());
        entry.measure = Some(m.0);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::parse_term;

    fn big(n: u64) -> TowerValue {
        TowerValue::Exact(BigUint::from(n))
    }

    fn dup_under_bang() -> Term {
        parse_term("\\x. let !y = x in !(y y)").unwrap()
    }

    #[test]
    fn omega_of_dup_under_bang() {
        let r = RegionDepthContext::new();
        assert_eq!(omega(&dup_under_bang(), &r, 0), Ok(6));
        assert_eq!(omega(&dup_under_bang(), &r, 1), Ok(5));
        assert_eq!(omega(&dup_under_bang(), &r, 7), Ok(2));
    }

    #[test]
    fn set_counts_twice() {
        let r: RegionDepthContext = [("r".into(), 0)].into_iter().collect();
        assert_eq!(omega(&parse_term("set(r, *)").unwrap(), &r, 0), Ok(5));
    }

    #[test]
    fn mu_pads_and_rejects() {
        let r = RegionDepthContext::new();
        assert_eq!(mu(&dup_under_bang(), &r, 1), Ok(MeasureVector(vec![5, 6])));
        assert_eq!(mu(&dup_under_bang(), &r, 3), Ok(MeasureVector(vec![2, 2, 5, 6])));
        assert_eq!(mu(&parse_term("*").unwrap(), &r, 0), Ok(MeasureVector(vec![3])));
        assert_eq!(
            mu(&dup_under_bang(), &r, 0),
            Err(ComplexityError::PaddingTooSmall { n: 0, depth: 1 })
        );
    }

    #[test]
    fn rightmost_is_most_significant() {
        let v = |x: &[u64]| MeasureVector(x.to_vec());
        assert_eq!(lex_compare(&v(&[9, 3]), &v(&[2, 4])), Ok(Ordering::Less));
        assert_eq!(lex_compare(&v(&[2, 6]), &v(&[5, 6])), Ok(Ordering::Less));
        assert_eq!(lex_compare(&v(&[5, 6]), &v(&[5, 6])), Ok(Ordering::Equal));
        assert_eq!(
            lex_compare(&v(&[5]), &v(&[5, 6])),
            Err(ComplexityError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn small_towers() {
        assert_eq!(tower(3, &[]), big(0));
        assert_eq!(tower(2, &[3]), big(6));
        assert_eq!(tower(1, &[2, 2]), big(16));
        assert_eq!(
            tower(1, &[3, 2, 2]),
            TowerValue::Exact(BigUint::from(3u32).pow(1 << 16))
        );
        assert_eq!(
            tower_with_cap(1, &[2, 2, 2, 2], 1_000_000),
            TowerValue::TooLarge { digit_cap: 1_000_000 }
        );
    }

    #[test]
    fn fits_and_lower_bounds_agree_with_exact_values() {
        for v in [vec![], vec![2], vec![2, 2], vec![3, 2, 2], vec![2, 2, 2, 2], vec![9, 5]] {
            let exact = tower_with_cap(1, &v, 100_000);
            assert_eq!(tower_fits(1, &v, 100_000), exact.exact().is_some(), "{v:?}");
            if let Some(t) = exact.exact() {
                for b in [0u64, 1, 15, 16, 17, 1 << 40] {
                    assert_eq!(tower_at_least(1, &v, b), *t >= BigUint::from(b), "{v:?} {b}");
                }
            }
        }
        assert!(tower_at_least(1, &[2, 2, 2, 2], u64::MAX));
    }

    #[test]
    fn tower_cmp_agrees_with_exact_values() {
        let vs: Vec<Vec<u64>> = vec![
            vec![],
            vec![2],
            vec![9],
            vec![2, 2],
            vec![3, 2],
            vec![4, 2],
            vec![2, 3],
            vec![16],
            vec![2, 2, 2],
            vec![81],
            vec![9, 2],
        ];
        for a in &vs {
            for b in &vs {
                let (x, y) = (tower(1, a), tower(1, b));
                let expected = x.exact().unwrap().cmp(y.exact().unwrap());
                assert_eq!(tower_cmp(1, a, b), expected, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn dup_under_bang_certificate() {
        let c = certificate(&dup_under_bang(), &RegionDepthContext::new()).unwrap();
        assert_eq!(c.alpha, 1);
        assert_eq!(c.mu, MeasureVector(vec![5, 6]));
        assert_eq!(c.tower, TowerValue::Exact(BigUint::from(5u32).pow(64)));
    }

    #[test]
    fn ill_formed_has_no_certificate() {
        let p = parse_term("\\x. let !y = x in !(y !(y z))").unwrap();
        assert!(matches!(
            certificate(&p, &RegionDepthContext::new()),
            Err(ComplexityError::NotWellFormed(_))
        ));
    }

    #[test]
    fn repeated_state_fails_monitor() {
        let r = RegionDepthContext::new();
        let a = parse_term("(\\x. x) *").unwrap();
        let b = parse_term("*").unwrap();
        let ok = monitor_terms(&[a.clone(), b.clone()], &r, 1000).unwrap();
        assert!(ok.passed());
        assert_eq!(ok.tower_steps, 1);
        let bad = monitor_terms(&[a, b.clone(), b], &r, 1000).unwrap();
        assert_eq!(bad.violation.unwrap().step, 2);
        assert!(monitor_terms(&[], &r, 1000).unwrap().passed());
    }
}
