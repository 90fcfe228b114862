//! Closed-form expectations, Monte Carlo checks, schedules, FLOPs accounting
//! and layered reduction runs.

mod bench;
mod expectation;
mod flops;
mod layered;
mod schedule;

pub use bench::{bench_complete_graph, loglog_slope, BenchPoint};
pub use expectation::{expectation_bipartite, expectation_cgsm, simulate_optimal_match_rate, SimMethod};
pub use flops::{flops_estimate, BranchConfig, FlopsReport, LayerFlops, MacCounting, ModelConfig};
pub use layered::{
    layered_reduction_run, orthogonal_map, LayerRecord, LayeredRun, LayeredRunConfig, ReductionReport,
    TokenSource,
};
pub use schedule::{effective_r, halving_schedule, ScheduleConfig};

use crate::error::{Error, Result};
use crate::matching::MatchPlan;
use crate::numerics::SimilarityMatrix;

/// Sum of `d[i][j]` over the plan's pairs.
pub fn objective(d: &SimilarityMatrix, plan: &MatchPlan) -> Result<f64> {
    if plan.n() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            found: plan.n(),
        });
    }
    plan.pairs().iter().try_fold(0.0, |acc, &(i, j)| {
        if i >= d.n() || j >= d.n() {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                n: d.n(),
            });
        }
        Ok(acc + d.get(i, j))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn objective_sums_pairs() {
        let d = cases::case2();
        let plan = MatchPlan::new(4, vec![(1, 0), (3, 2)]).unwrap();
        assert!((objective(&d, &plan).unwrap() - 1.3).abs() < 1e-12);
        assert_eq!(objective(&d, &MatchPlan::empty(4)).unwrap(), 0.0);
        assert!(objective(&d, &MatchPlan::empty(5)).is_err());
    }
}
