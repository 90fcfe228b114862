use serde::{Deserialize, Serialize};

use super::plan::{EnsembleMode, MatchPlan, ReductionOptions};
use crate::error::{Error, Result};
use crate::numerics::{softmax, TokenMatrix};

/// Partition of `0..n` into groups that each collapse to one output token.
///
/// Members are sorted ascending within a group; groups are ordered by their
/// smallest member, which is also the output row order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackSet {
    n: usize,
    groups: Vec<Vec<usize>>,
}

impl StackSet {
    /// Normalizes ordering and checks that `groups` partitions `0..n`.
    pub fn from_groups(n: usize, mut groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for g in groups.iter_mut() {
            if g.is_empty() {
                return Err(Error::InvalidPlan("empty stack".into()));
            }
            g.sort_unstable();
            for &i in g.iter() {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, n });
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPlan(format!("token {i} in two stacks")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPlan(format!("token {missing} not in any stack")));
        }
        groups.sort_unstable_by_key(|g| g[0]);
        Ok(Self { n, groups })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            groups: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the plan graph, untouched tokens as singletons.
pub fn build_stacks(plan: &MatchPlan) -> StackSet {
    let n = plan.n();
    let mut parent: Vec<usize> = (0..n).collect();
    for &(s, d) in plan.pairs() {
        let (a, b) = (find(&mut parent, s), find(&mut parent, d));
        if a != b {
            // keep the smaller index as root so group order falls out directly
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    StackSet { n, groups }
}

/// Collapses each stack to one token by averaging or by
/// importance-softmax weighting.
pub fn ensemble_stacks(
    tokens: &TokenMatrix,
    stacks: &StackSet,
    opts: &ReductionOptions,
) -> Result<TokenMatrix> {
    let n = tokens.n_tokens();
    if stacks.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: stacks.n(),
        });
    }
    let importance = opts.checked_importance(n)?;
    let dim = tokens.dim();
    let mut out = Vec::with_capacity(stacks.len() * dim);
    for group in stacks.groups() {
        let weights = match (opts.ensemble_mode, importance) {
            (EnsembleMode::ImportanceSoftmax, Some(imp)) => {
                let local: Vec<f64> = group.iter().map(|&i| imp[i]).collect();
                softmax(&local)?
            }
            _ => vec![1.0 / group.len() as f64; group.len()],
        };
        let mut acc = vec![0.0; dim];
        for (&i, w) in group.iter().zip(&weights) {
            for (a, v) in acc.iter_mut().zip(tokens.row(i)) {
                *a += w * v;
            }
        }
        out.extend(acc);
    }
    TokenMatrix::new(stacks.len(), dim, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shared_destination_forms_one_stack() {
        let plan = MatchPlan::new(4, vec![(1, 3), (2, 3)]).unwrap();
        let s = build_stacks(&plan);
        assert_eq!(s.groups(), &[vec![0], vec![1, 2, 3]]);
    }

    #[test]
    fn single_pair() {
        let plan = MatchPlan::new(3, vec![(0, 2)]).unwrap();
        assert_eq!(build_stacks(&plan).groups(), &[vec![0, 2], vec![1]]);
    }

    #[test]
    fn case2_stacks() {
        let plan = MatchPlan::new(4, vec![(0, 2), (1, 3)]).unwrap();
        assert_eq!(build_stacks(&plan).groups(), &[vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn stack_count_is_n_minus_r() {
        let plan = MatchPlan::new(7, vec![(6, 0), (5, 0), (3, 4)]).unwrap();
        let s = build_stacks(&plan);
        assert_eq!(s.len(), 4);
        assert_eq!(s.groups(), &[vec![0, 5, 6], vec![1], vec![2], vec![3, 4]]);
    }

    #[test]
    fn average_and_weighted_agree_on_equal_importance() {
        let t = TokenMatrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap();
        let s = StackSet::from_groups(2, vec![vec![0, 1]]).unwrap();
        let avg = ensemble_stacks(&t, &s, &ReductionOptions::default()).unwrap();
        let w = ensemble_stacks(&t, &s, &ReductionOptions::guided(vec![0.3, 0.3])).unwrap();
        assert_eq!(avg.row(0), &[1.0, 2.0]);
        assert_abs_diff_eq!(w.row(0)[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.row(0)[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_weights() {
        let t = TokenMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let s = StackSet::from_groups(2, vec![vec![0, 1]]).unwrap();
        let out = ensemble_stacks(&t, &s, &ReductionOptions::guided(vec![0.0, 3f64.ln()])).unwrap();
        assert_abs_diff_eq!(out.row(0)[0], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(out.row(0)[1], 0.75, epsilon = 1e-9);
    }

    #[test]
    fn singletons_are_identity() {
        let t = TokenMatrix::from_rows(&[[1.0, -2.0], [3.5, 0.25], [7.0, 8.0]]).unwrap();
        let out = ensemble_stacks(&t, &StackSet::singletons(3), &ReductionOptions::default()).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn ensemble_errors() {
        let t = TokenMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let s = StackSet::singletons(3);
        assert!(matches!(
            ensemble_stacks(&t, &s, &Default::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let s = StackSet::singletons(2);
        assert!(matches!(
            ensemble_stacks(&t, &s, &ReductionOptions::guided(vec![1.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn from_groups_rejects_non_partitions() {
        assert!(StackSet::from_groups(3, vec![vec![0, 1]]).is_err());
        assert!(StackSet::from_groups(2, vec![vec![0, 1], vec![1]]).is_err());
        let s = StackSet::from_groups(3, vec![vec![2, 1], vec![0]]).unwrap();
        assert_eq!(s.groups(), &[vec![0], vec![1, 2]]);
    }
}
