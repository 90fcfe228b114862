use crate::error::{Error, Result};
use crate::matching::{check_reduction, MatchPlan};
use crate::numerics::SimilarityMatrix;

pub const EXHAUSTIVE_MAX_N: usize = 12;
pub const EXHAUSTIVE_MAX_R: usize = 4;

/// Enumerates every feasible pair set of size `r` (distinct sources,
/// destinations outside the source set) and returns a maximizer of the summed
/// similarity. The first maximizer in lexicographic enumeration order wins.
pub fn exhaustive_optimal(d: &SimilarityMatrix, r: usize) -> Result<(MatchPlan, f64)> {
    let n = d.n();
    if n > EXHAUSTIVE_MAX_N || r > EXHAUSTIVE_MAX_R {
        return Err(Error::InstanceTooLarge { n, r });
    }
    check_reduction(r, n)?;

    let mut best: Option<(Vec<(usize, usize)>, f64)> = None;
    let mut sources = Vec::with_capacity(r);
    for_each_subset(n, r, 0, &mut sources, &mut |sources| {
        let others: Vec<usize> = (0..n).filter(|i| !sources.contains(i)).collect();
        // odometer over others^r
        let mut digits = vec![0usize; r];
        loop {
            let value: f64 = sources
                .iter()
                .zip(&digits)
                .map(|(&s, &k)| d.get(s, others[k]))
                .sum();
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                let pairs = sources
                    .iter()
                    .zip(&digits)
                    .map(|(&s, &k)| (s, others[k]))
                    .collect();
                best = Some((pairs, value));
            }
            let mut pos = r;
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < others.len() {
                    break;
                }
                digits[pos] = 0;
            }
        }
    });

    let (pairs, value) = best.expect("at least one feasible plan");
    Ok((MatchPlan::new(n, pairs)?, value))
}

fn for_each_subset(n: usize, k: usize, start: usize, current: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if current.len() == k {
        f(current);
        return;
    }
    for i in start..n {
        current.push(i);
        for_each_subset(n, k, i + 1, current, f);
        current.pop();
    }
}
