//! Reference matchers used for comparison and as verification oracles.

mod exhaustive;
mod kmeans;

pub use exhaustive::{exhaustive_optimal, EXHAUSTIVE_MAX_N, EXHAUSTIVE_MAX_R};
pub use kmeans::{kmeans_match, stacks_to_plan};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::matching::{check_reduction, MatchPlan};
use crate::numerics::{stable_argsort_desc, SimilarityMatrix};

/// Alternating split: even indices propose, odd indices receive. The `r`
/// proposers with the largest best-edge become sources.
pub fn bipartite_soft_match(d: &SimilarityMatrix, r: usize) -> Result<MatchPlan> {
    let n = d.n();
    check_reduction(r, n)?;
    let side_a: Vec<usize> = (0..n).step_by(2).collect();
    let side_b: Vec<usize> = (1..n).step_by(2).collect();

    let mut best = Vec::with_capacity(side_a.len());
    for &a in &side_a {
        let mut arg = side_b[0];
        for &b in &side_b[1..] {
            if d.get(a, b) > d.get(a, arg) {
                arg = b;
            }
        }
        best.push((arg, d.get(a, arg)));
    }
    let scores: Vec<f64> = best.iter().map(|b| b.1).collect();
    let order = stable_argsort_desc(&scores);
    let pairs = order.as_slice()[..r]
        .iter()
        .map(|&k| (side_a[k], best[k].0))
        .collect();
    MatchPlan::new(n, pairs)
}

/// Sequential greedy: repeatedly takes the largest remaining feasible entry.
/// `O(r·n²)`.
pub fn greedy_match(d: &SimilarityMatrix, r: usize) -> Result<MatchPlan> {
    let n = d.n();
    check_reduction(r, n)?;
    let mut is_source = vec![false; n];
    let mut is_dest = vec![false; n];
    let mut pairs = Vec::with_capacity(r);
    for _ in 0..r {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| !is_source[i] && !is_dest[i]) {
            for j in (0..n).filter(|&j| j != i && !is_source[j]) {
                let s = d.get(i, j);
                if best.is_none_or(|(_, _, b)| s > b) {
                    best = Some((i, j, s));
                }
            }
        }
        let (i, j, _) = best.expect("feasible pair exists while r <= n/2");
        is_source[i] = true;
        is_dest[j] = true;
        pairs.push((i, j));
    }
    MatchPlan::new(n, pairs)
}

/// `r` distinct random sources, each sent to a uniformly random non-source.
pub fn random_match(n: usize, r: usize, seed: u64) -> Result<MatchPlan> {
    check_reduction(r, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = sample(&mut rng, n, r).into_vec();
    let mut is_source = vec![false; n];
    for &s in &sources {
        is_source[s] = true;
    }
    let others: Vec<usize> = (0..n).filter(|&i| !is_source[i]).collect();
    let pairs = sources
        .into_iter()
        .map(|s| (s, others[rng.random_range(0..others.len())]))
        .collect();
    MatchPlan::new(n, pairs)
}
