use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::mask::PriorityMaskedSimilarity;
use crate::error::{Error, Result};
use crate::numerics::stable_argsort_desc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EnsembleMode {
    #[default]
    Average,
    /// Weighted sum with `softmax(importance)` restricted to each stack.
    ImportanceSoftmax,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReductionOptions {
    pub importance: Option<Vec<f64>>,
    pub ensemble_mode: EnsembleMode,
    /// Tokens that never take part in matching (class/cross tokens).
    pub protected: BTreeSet<usize>,
}

impl ReductionOptions {
    pub fn guided(importance: Vec<f64>) -> Self {
        Self {
            importance: Some(importance),
            ensemble_mode: EnsembleMode::ImportanceSoftmax,
            protected: BTreeSet::new(),
        }
    }

    pub fn with_protected(mut self, protected: impl IntoIterator<Item = usize>) -> Self {
        self.protected.extend(protected);
        self
    }

    pub(crate) fn checked_importance(&self, n: usize) -> Result<Option<&[f64]>> {
        match &self.importance {
            None if self.ensemble_mode == EnsembleMode::ImportanceSoftmax => Err(Error::MissingImportance),
            None => Ok(None),
            Some(v) if v.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            }),
            Some(v) => match v.iter().position(|x| !x.is_finite()) {
                Some(pos) => Err(Error::NonFinite(pos)),
                None => Ok(Some(v)),
            },
        }
    }
}

/// `r` source → destination pairs over `n` tokens in original index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPlan {
    n: usize,
    pairs: Vec<(usize, usize)>,
    degenerate_fallbacks: usize,
}

impl MatchPlan {
    /// Validates distinct sources, disjoint source/destination sets and
    /// index bounds.
    pub fn new(n: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let plan = Self {
            n,
            pairs,
            degenerate_fallbacks: 0,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            pairs: Vec::new(),
            degenerate_fallbacks: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut sources = BTreeSet::new();
        for &(s, d) in &self.pairs {
            for idx in [s, d] {
                if idx >= self.n {
                    return Err(Error::IndexOutOfRange {
                        index: idx,
                        n: self.n,
                    });
                }
            }
            if s == d {
                return Err(Error::InvalidPlan(format!("token {s} paired with itself")));
            }
            if !sources.insert(s) {
                return Err(Error::InvalidPlan(format!("token {s} is a source twice")));
            }
        }
        if let Some(&(_, d)) = self.pairs.iter().find(|(_, d)| sources.contains(d)) {
            return Err(Error::InvalidPlan(format!(
                "token {d} is both a source and a destination"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn degenerate_fallbacks(&self) -> usize {
        self.degenerate_fallbacks
    }

    pub fn sources(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn destinations(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }
}

pub(crate) fn check_reduction(r: usize, available: usize) -> Result<()> {
    let max = available / 2;
    if r > max {
        return Err(Error::ReductionTooLarge { r, available, max });
    }
    Ok(())
}

/// Picks `r` sources by (masked row maximum − importance) and routes each to
/// its best non-source destination.
///
/// A source whose masked row is empty over the candidates falls back to the
/// unmasked similarity and is counted in `degenerate_fallbacks`.
pub fn select_match_plan(
    pm: &PriorityMaskedSimilarity<'_>,
    r: usize,
    opts: &ReductionOptions,
) -> Result<MatchPlan> {
    let n = pm.n();
    if let Some(&index) = opts.protected.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index, n });
    }
    check_reduction(r, n - opts.protected.len())?;
    let importance = opts.checked_importance(n)?;
    if r == 0 {
        return Ok(MatchPlan::empty(n));
    }

    let mut blocked = vec![false; n];
    for &p in &opts.protected {
        blocked[p] = true;
    }

    let mut score = vec![f64::NEG_INFINITY; n];
    for i in (0..n).filter(|&i| !blocked[i]) {
        let best = (0..n)
            .filter(|&j| !blocked[j])
            .map(|j| pm.masked(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
        score[i] = match importance {
            Some(imp) => best - imp[i],
            None => best,
        };
    }
    // Protected tokens must never be picked even if every candidate is −∞.
    let order = stable_argsort_desc(&score);
    let sources: Vec<usize> = order
        .as_slice()
        .iter()
        .copied()
        .filter(|&i| !blocked[i])
        .take(r)
        .collect();
    for &s in &sources {
        blocked[s] = true;
    }

    let base = pm.base();
    let mut fallbacks = 0;
    let mut pairs = Vec::with_capacity(r);
    for &i in &sources {
        let candidates = (0..n).filter(|&j| !blocked[j]);
        let mut dest = argmax(candidates.clone().map(|j| (j, pm.masked(i, j))));
        if dest.is_none() {
            fallbacks += 1;
            dest = argmax(candidates.map(|j| (j, base.get(i, j))));
        }
        let j = dest.expect("at least one destination candidate remains");
        pairs.push((i, j));
    }
    Ok(MatchPlan {
        n,
        pairs,
        degenerate_fallbacks: fallbacks,
    })
}

/// First index with the largest finite value.
fn argmax(values: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in values {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::matching::priority_mask;
    use crate::numerics::SimilarityMatrix;

    fn pair_set(plan: &MatchPlan) -> BTreeSet<(usize, usize)> {
        plan.pairs().iter().copied().collect()
    }

    #[test]
    fn case2_plan() {
        let d = cases::case2();
        let plan = select_match_plan(&priority_mask(&d).unwrap(), 2, &Default::default()).unwrap();
        assert_eq!(pair_set(&plan), BTreeSet::from([(0, 2), (1, 3)]));
        assert_eq!(plan.degenerate_fallbacks(), 0);
    }

    #[test]
    fn case1_plan() {
        let d = cases::case1();
        let plan = select_match_plan(&priority_mask(&d).unwrap(), 2, &Default::default()).unwrap();
        assert_eq!(pair_set(&plan), BTreeSet::from([(1, 2), (0, 3)]));
    }

    #[test]
    fn importance_demotes_token() {
        // Brute-force re-ranking of score = masked row max - I over case2:
        // masked maxima are T1 0.9, T3 0.7, T2 0.8, T4 -inf.
        let masked_max = [0.9, 0.8, 0.7, f64::NEG_INFINITY];
        let imp = [10.0, 0.0, 0.0, 0.0];
        let mut expected: Vec<usize> = (0..4).collect();
        expected.sort_by(|&a, &b| {
            (masked_max[b] - imp[b])
                .partial_cmp(&(masked_max[a] - imp[a]))
                .unwrap()
        });
        let expected: BTreeSet<usize> = expected[..2].iter().copied().collect();

        let d = cases::case2();
        let opts = ReductionOptions {
            importance: Some(imp.to_vec()),
            ..Default::default()
        };
        let plan = select_match_plan(&priority_mask(&d).unwrap(), 2, &opts).unwrap();
        assert_eq!(plan.sources(), expected);
        assert_eq!(plan.sources(), BTreeSet::from([1, 2]));
    }

    #[test]
    fn bound_and_importance_errors() {
        let d = cases::case2();
        let pm = priority_mask(&d).unwrap();
        assert!(matches!(
            select_match_plan(&pm, 3, &Default::default()),
            Err(Error::ReductionTooLarge {
                r: 3,
                available: 4,
                max: 2
            })
        ));
        let opts = ReductionOptions {
            ensemble_mode: EnsembleMode::ImportanceSoftmax,
            ..Default::default()
        };
        assert_eq!(select_match_plan(&pm, 1, &opts), Err(Error::MissingImportance));
        let opts = ReductionOptions::guided(vec![0.0; 3]);
        assert!(matches!(
            select_match_plan(&pm, 1, &opts),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 3
            })
        ));
        let opts = ReductionOptions::default().with_protected([0]);
        assert!(matches!(
            select_match_plan(&pm, 2, &opts),
            Err(Error::ReductionTooLarge { .. })
        ));
    }

    #[test]
    fn protected_tokens_never_paired() {
        let d = cases::case2();
        let pm = priority_mask(&d).unwrap();
        let opts = ReductionOptions::default().with_protected([0]);
        let plan = select_match_plan(&pm, 1, &opts).unwrap();
        assert!(plan.pairs().iter().all(|&(s, t)| s != 0 && t != 0));
        // T2 -> T4 (0.8) is the best remaining masked edge.
        assert_eq!(plan.pairs(), &[(1, 3)]);
    }

    #[test]
    fn fallback_when_masked_row_is_empty() {
        // Row order 0,1,2,3 and column order 3,2,1,0, so token 1 can only
        // reach token 0 through the mask. Sources tie at score 0 and resolve
        // to {0, 1}; token 1 then has no unmasked non-source candidate.
        let mut entries = vec![0.0; 16];
        entries[3] = 0.9; // (0,3)
        entries[4 + 2] = 0.8; // (1,2)
        entries[2 * 4 + 1] = 0.7; // (2,1)
        entries[3 * 4] = 0.6; // (3,0)
        let d = SimilarityMatrix::new(4, entries, true).unwrap();
        let pm = priority_mask(&d).unwrap();
        assert_eq!(pm.row_order().as_slice(), &[0, 1, 2, 3]);
        assert_eq!(pm.col_order().as_slice(), &[3, 2, 1, 0]);
        let plan = select_match_plan(&pm, 2, &Default::default()).unwrap();
        assert_eq!(plan.pairs(), &[(0, 2), (1, 2)]);
        assert_eq!(plan.degenerate_fallbacks(), 1);
    }

    #[test]
    fn r_zero_is_empty() {
        let d = cases::case1();
        let plan = select_match_plan(&priority_mask(&d).unwrap(), 0, &Default::default()).unwrap();
        assert_eq!(plan.r(), 0);
    }

    #[test]
    fn plan_validation() {
        assert!(MatchPlan::new(3, vec![(0, 1), (1, 2)]).is_err());
        assert!(MatchPlan::new(3, vec![(0, 0)]).is_err());
        assert!(MatchPlan::new(3, vec![(0, 3)]).is_err());
        assert!(MatchPlan::new(3, vec![(0, 2), (0, 1)]).is_err());
        assert!(MatchPlan::new(4, vec![(0, 2), (1, 2)]).is_ok());
    }
}
