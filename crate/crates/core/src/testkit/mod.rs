//! Program generators and the property oracles run over their reductions.

mod gen;
mod oracles;

use rayon::prelude::*;
use serde::Serialize;

pub use gen::{gen_typed, gen_well_formed};
pub use oracles::{minimize, run_oracles, Contexts, Oracle, OracleReport, OracleViolation};

use crate::eval::SchedulerPolicy;
use crate::typing::region_depths;

/// How many stores each region starts with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StoreSeeding {
    Empty,
    /// Between 0 and the given number of stores per region.
    UpTo(usize),
}

impl StoreSeeding {
    pub fn max_per_region(self) -> usize {
        match self {
            StoreSeeding::Empty => 0,
            StoreSeeding::UpTo(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GenConfig {
    pub seed: u64,
    pub max_size: usize,
    pub max_depth: u32,
    pub regions: usize,
    pub stores: StoreSeeding,
    pub typed: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            max_size: 40,
            max_depth: 4,
            regions: 2,
            stores: StoreSeeding::UpTo(1),
            typed: false,
        }
    }
}

impl GenConfig {
    /// The configuration for the `i`-th program of a batch.
    pub fn nth(&self, i: u64) -> GenConfig {
        GenConfig {
            seed: self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i),
            ..self.clone()
        }
    }
}

/// Aggregate of a fuzzing batch.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FuzzSummary {
    pub programs: usize,
    pub runs: usize,
    pub steps: usize,
    pub stuck_states: usize,
    pub tower_steps: usize,
    pub certified_runs: usize,
    pub budget_exhausted: usize,
    pub rejected: usize,
    pub violations: Vec<OracleViolation>,
}

impl FuzzSummary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.rejected == 0
    }

    fn absorb(&mut self, r: &OracleReport) {
        self.runs += 1;
        self.steps += r.steps;
        self.stuck_states += r.stuck_states;
        self.tower_steps += r.tower_steps;
        self.certified_runs += usize::from(r.certified);
        self.budget_exhausted += usize::from(r.budget_exhausted);
        self.rejected += usize::from(r.rejected.is_some());
        self.violations.extend(r.violations.iter().cloned());
    }

    fn merge(mut self, other: FuzzSummary) -> FuzzSummary {
        self.programs += other.programs;
        self.runs += other.runs;
        self.steps += other.steps;
        self.stuck_states += other.stuck_states;
        self.tower_steps += other.tower_steps;
        self.certified_runs += other.certified_runs;
        self.budget_exhausted += other.budget_exhausted;
        self.rejected += other.rejected;
        self.violations.extend(other.violations);
        self
    }
}

/// Generates `count` programs from `cfg` and runs the oracles under each policy, in parallel.
pub fn fuzz(cfg: &GenConfig, count: usize, policies: &[SchedulerPolicy], budget: usize) -> FuzzSummary {
    let mut summary = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let c = cfg.nth(i);
            let (p, ctx) = if c.typed {
                let (p, rt) = gen_typed(&c);
                (p, Contexts::typed(rt))
            } else {
                let (p, r) = gen_well_formed(&c);
                (p, Contexts::untyped(r))
            };
            let mut s = FuzzSummary {
                programs: 1,
                ..FuzzSummary::default()
            };
            for policy in policies {
                s.absorb(&run_oracles(&p, &ctx, policy, budget));
            }
            s
        })
        .reduce(FuzzSummary::default, FuzzSummary::merge);
    summary.violations.sort_by(|a, b| a.program.cmp(&b.program));
    summary
}

impl Contexts {
    pub fn untyped(depths: crate::syntax::RegionDepthContext) -> Contexts {
        Contexts { depths, types: None }
    }

    pub fn typed(types: crate::types::RegionTypeContext) -> Contexts {
        Contexts {
            depths: region_depths(&types),
            types: Some(types),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::check_depth;
    use crate::syntax::VarDepthContext;
    use crate::types::TypedVarContext;
    use crate::typing::check;

    #[test]
    fn generators_hit_their_judgements() {
        for i in 0..300 {
            let cfg = GenConfig::default().nth(i);
            let (p, r) = gen_well_formed(&cfg);
            assert!(
                check_depth(&p, &r, &VarDepthContext::new(), 0).is_ok(),
                "{}",
                crate::reader::print_term(&p)
            );
            let (p, rt) = gen_typed(&cfg);
            let got = check(&p, &rt, &TypedVarContext::new(), 0, None);
            assert!(got.is_ok(), "{}: {}", crate::reader::print_term(&p), got.unwrap_err());
            assert!(check_depth(&p.erase(), &region_depths(&rt), &VarDepthContext::new(), 0).is_ok());
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = GenConfig {
            seed: 11,
            ..GenConfig::default()
        };
        assert_eq!(gen_well_formed(&cfg), gen_well_formed(&cfg));
        assert_eq!(gen_typed(&cfg), gen_typed(&cfg));
    }

    #[test]
    fn no_regions_means_no_stores() {
        let cfg = GenConfig {
            regions: 0,
            ..GenConfig::default()
        };
        for i in 0..50 {
            let (p, r) = gen_well_formed(&cfg.nth(i));
            assert!(r.is_empty());
            assert!(p.regions().is_empty());
        }
    }

    #[test]
    fn small_batch_is_clean() {
        let s = fuzz(
            &GenConfig::default(),
            40,
            &[SchedulerPolicy::seeded(1), SchedulerPolicy::exhaustive()],
            2000,
        );
        assert!(s.passed(), "{:#?}", s.violations);
        let s = fuzz(
            &GenConfig {
                typed: true,
                ..GenConfig::default()
            },
            40,
            &[SchedulerPolicy::seeded(1), SchedulerPolicy::exhaustive()],
            2000,
        );
        assert!(s.passed(), "{:#?}", s.violations);
    }
}
