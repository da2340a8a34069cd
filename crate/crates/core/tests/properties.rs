use std::cmp::Ordering;

use num_bigint::BigUint;
use proptest::prelude::*;

use eal_core::complexity::{counted_size, lex_compare, mu, omega, tower, tower_cmp, MeasureVector};
use eal_core::depth::{check_depth, replays};
use eal_core::eval::{run, strong_normalize, strong_step, MachineState, RunOutcome, SchedulerPolicy};
use eal_core::reader::{parse_term, print_term};
use eal_core::syntax::{revised_depth, shift, Term, VarDepthContext};
use eal_core::testkit::{gen_typed, gen_well_formed, run_oracles, Contexts, GenConfig};
use eal_core::typing::region_depths;

fn config(seed: u64) -> GenConfig {
    GenConfig {
        seed,
        ..GenConfig::default()
    }
}

fn exact(alpha: u64, v: &[u64]) -> BigUint {
    tower(alpha, v).exact().expect("small tower").clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reduction_keeps_depth_measure_and_size_bounds(seed in any::<u64>(), sched in any::<u64>()) {
        let (p, r) = gen_well_formed(&config(seed));
        let report = run_oracles(&p, &Contexts::untyped(r), &SchedulerPolicy::seeded(sched), 5000);
        prop_assert!(report.rejected.is_none(), "{:?}", report.rejected);
        prop_assert!(report.violations.is_empty(), "{:#?}", report.violations);
    }

    #[test]
    fn typed_reduction_keeps_the_type(seed in any::<u64>(), sched in any::<u64>()) {
        let (p, rt) = gen_typed(&config(seed));
        let report = run_oracles(&p, &Contexts::typed(rt), &SchedulerPolicy::seeded(sched), 5000);
        prop_assert!(report.rejected.is_none(), "{:?}", report.rejected);
        prop_assert!(report.violations.is_empty(), "{:#?}", report.violations);
    }

    #[test]
    fn derivations_replay(seed in any::<u64>()) {
        let (p, r) = gen_well_formed(&config(seed));
        let gamma = VarDepthContext::new();
        let d = check_depth(&p, &r, &gamma, 0).expect("generated well-formed");
        prop_assert!(replays(&d, &p, &r, &gamma, 0));
        let (p, rt) = gen_typed(&config(seed));
        prop_assert!(check_depth(&p.erase(), &region_depths(&rt), &gamma, 0).is_ok());
    }

    #[test]
    fn size_is_at_most_twice_the_occurrences(seed in any::<u64>()) {
        let (p, r) = gen_well_formed(&config(seed));
        let d = revised_depth(&p, &r).expect("declared regions");
        let total: u64 = (0..=d).map(|i| omega(&p, &r, i).expect("declared regions")).sum();
        prop_assert!(counted_size(&p, &r).expect("declared regions") <= 2 * total);
    }

    #[test]
    fn seeded_runs_are_reproducible(seed in any::<u64>(), sched in any::<u64>()) {
        let (p, _) = gen_well_formed(&config(seed));
        let s = MachineState::new(&p).expect("closed program");
        let policy = SchedulerPolicy::seeded(sched);
        let a = run(&s, &policy, 5000).ok().and_then(RunOutcome::trace).map(|t| t.to_jsonl());
        let b = run(&s, &policy, 5000).ok().and_then(RunOutcome::trace).map(|t| t.to_jsonl());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn printing_round_trips_without_regions(seed in any::<u64>()) {
        let cfg = GenConfig { regions: 0, stores: eal_core::testkit::StoreSeeding::Empty, ..config(seed) };
        for p in [gen_well_formed(&cfg).0, gen_typed(&cfg).0] {
            let printed = print_term(&p);
            prop_assert_eq!(parse_term(&printed).ok(), Some(p), "{}", printed);
        }
    }

    #[test]
    fn normalization_matches_single_steps(seed in any::<u64>()) {
        let cfg = GenConfig { regions: 0, stores: eal_core::testkit::StoreSeeding::Empty, ..config(seed) };
        let p = gen_well_formed(&cfg).0.erase();
        let mut cur = p.clone();
        let mut steps = 0;
        while let Some(next) = strong_step(&cur) {
            cur = next;
            steps += 1;
            prop_assume!(steps < 2000);
        }
        prop_assert_eq!(strong_normalize(&p, 10_000).ok(), Some(cur));
    }

    #[test]
    fn measure_order_is_right_to_left(a in prop::collection::vec(0u64..5, 1..5), b in prop::collection::vec(0u64..5, 1..5)) {
        prop_assume!(a.len() == b.len());
        let (va, vb) = (MeasureVector(a.clone()), MeasureVector(b.clone()));
        let mut ra = a.clone();
        ra.reverse();
        let mut rb = b.clone();
        rb.reverse();
        prop_assert_eq!(lex_compare(&va, &vb).unwrap(), ra.cmp(&rb));
        prop_assert_eq!(lex_compare(&vb, &va).unwrap(), rb.cmp(&ra));
    }

    #[test]
    fn shift_lemma(alpha in 1u64..4, beta in 2u64..7, x in 2u64..7, x1 in 2u64..7, rest in prop::collection::vec(2u64..7, 0..2)) {
        let mut v = vec![beta * x, x1];
        let mut w = vec![x, beta * x1];
        v.extend(&rest);
        w.extend(&rest);
        prop_assert_ne!(tower_cmp(alpha, &v, &w), Ordering::Greater, "{:?} vs {:?}", v, w);
    }

    #[test]
    fn tower_order_matches_exact_values(alpha in 1u64..4, v in prop::collection::vec(1u64..6, 0..3), w in prop::collection::vec(1u64..6, 0..3)) {
        prop_assume!(v.len() == w.len());
        prop_assume!(v.len() < 2 || (v[1] * alpha <= 4 && w[1] * alpha <= 4));
        prop_assert_eq!(tower_cmp(alpha, &v, &w), exact(alpha, &v).cmp(&exact(alpha, &w)));
    }

    #[test]
    fn shifting_up_and_down_is_identity(seed in any::<u64>(), k in 1i64..4) {
        let p = gen_well_formed(&config(seed)).0;
        prop_assert_eq!(shift(&shift(&p, k, 0), -k, 0), p);
    }

    #[test]
    fn erasure_is_idempotent(seed in any::<u64>()) {
        let p = gen_typed(&config(seed)).0;
        let e = p.erase();
        prop_assert_eq!(e.erase(), e);
    }

    #[test]
    fn measure_has_requested_length(seed in any::<u64>(), extra in 0u32..3) {
        let (p, r) = gen_well_formed(&config(seed));
        let d = revised_depth(&p, &r).expect("declared regions");
        let m = mu(&p, &r, d + extra).expect("padding above depth");
        prop_assert_eq!(m.n(), (d + extra) as usize);
        prop_assert!((d + 1..=d + extra).all(|i| m.at(i as usize) == 2));
    }
}

#[test]
fn unit_is_its_own_normal_form() {
    assert_eq!(strong_normalize(&Term::Unit, 0), Ok(Term::Unit));
}
