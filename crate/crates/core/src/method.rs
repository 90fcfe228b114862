use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::objective;
use crate::baselines::{
    bipartite_soft_match, exhaustive_optimal, greedy_match, kmeans_match, random_match, stacks_to_plan,
};
use crate::error::{Error, Result};
use crate::matching::{
    build_stacks, priority_mask, select_match_plan, EnsembleMode, Keys, MatchPlan, ReductionOptions, StackSet,
};

/// Every matcher the crate ships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "cgsm")]
    CompleteGraph,
    #[serde(rename = "cgsm-guided")]
    CrossGuided,
    Bipartite,
    Greedy,
    #[serde(rename = "kmeans")]
    KMeans,
    Random,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::CompleteGraph,
        Method::CrossGuided,
        Method::Bipartite,
        Method::Greedy,
        Method::KMeans,
        Method::Random,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CompleteGraph => "cgsm",
            Method::CrossGuided => "cgsm-guided",
            Method::Bipartite => "bipartite",
            Method::Greedy => "greedy",
            Method::KMeans => "kmeans",
            Method::Random => "random",
            Method::Oracle => "oracle",
        }
    }

    /// Whether protected indices are honoured.
    pub fn supports_protection(self) -> bool {
        matches!(self, Method::CompleteGraph | Method::CrossGuided)
    }

    /// Options this method actually uses for selection and ensembling.
    pub fn effective_options(self, opts: &ReductionOptions) -> Result<ReductionOptions> {
        match self {
            Method::CrossGuided => {
                let importance = opts.importance.clone().ok_or(Error::MissingImportance)?;
                Ok(ReductionOptions {
                    importance: Some(importance),
                    ensemble_mode: EnsembleMode::ImportanceSoftmax,
                    protected: opts.protected.clone(),
                })
            }
            _ if !opts.protected.is_empty() && !self.supports_protection() => Err(Error::InvalidPlan(
                format!("{} does not support protected tokens", self.name()),
            )),
            _ => Ok(ReductionOptions {
                importance: None,
                ensemble_mode: EnsembleMode::Average,
                protected: opts.protected.clone(),
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatcherSettings {
    pub seed: u64,
    pub kmeans_iterations: usize,
}

impl Default for MatcherSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            kmeans_iterations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub plan: MatchPlan,
    pub stacks: StackSet,
    pub objective: f64,
}

/// Runs `method` on `keys`, returning its plan, stacks and objective.
/// K-means plans send each cluster member to the cluster medoid.
pub fn run_matcher(
    method: Method,
    keys: Keys<'_>,
    r: usize,
    opts: &ReductionOptions,
    settings: &MatcherSettings,
) -> Result<MatchOutcome> {
    let opts = method.effective_options(opts)?;
    let d = keys.similarity()?;
    let (plan, stacks) = match method {
        Method::CompleteGraph | Method::CrossGuided => {
            let plan = select_match_plan(&priority_mask(&d)?, r, &opts)?;
            let stacks = build_stacks(&plan);
            (plan, stacks)
        }
        Method::KMeans => {
            let Keys::Embeddings(k) = keys else {
                return Err(Error::KeysRequired);
            };
            let stacks = kmeans_match(k, r, settings.kmeans_iterations, settings.seed)?;
            (stacks_to_plan(&stacks, &d)?, stacks)
        }
        _ => {
            let plan = match method {
                Method::Bipartite => bipartite_soft_match(&d, r)?,
                Method::Greedy => greedy_match(&d, r)?,
                Method::Random => random_match(d.n(), r, settings.seed)?,
                Method::Oracle => exhaustive_optimal(&d, r)?.0,
                _ => unreachable!(),
            };
            let stacks = build_stacks(&plan);
            (plan, stacks)
        }
    };
    let objective = objective(&d, &plan)?;
    Ok(MatchOutcome {
        plan,
        stacks,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::numerics::TokenMatrix;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("tome".parse::<Method>().is_err());
    }

    #[test]
    fn every_method_on_case2() {
        let d = cases::case2();
        let keys = TokenMatrix::from_rows(&[[1.0, 0.1], [0.2, 1.0], [0.9, 0.0], [0.0, 1.0]]).unwrap();
        for m in Method::ALL {
            let opts = ReductionOptions {
                importance: Some(vec![0.0; 4]),
                ..Default::default()
            };
            let out = match m {
                Method::KMeans => run_matcher(m, Keys::Embeddings(&keys), 2, &opts, &Default::default()),
                _ => run_matcher(m, Keys::Similarity(&d), 2, &opts, &Default::default()),
            }
            .unwrap();
            assert_eq!(out.stacks.len(), 2, "{m}");
            assert_eq!(out.plan.r(), 2, "{m}");
        }
    }

    #[test]
    fn requirements() {
        let d = cases::case1();
        let none = ReductionOptions::default();
        assert_eq!(
            run_matcher(
                Method::CrossGuided,
                Keys::Similarity(&d),
                1,
                &none,
                &Default::default()
            ),
            Err(Error::MissingImportance)
        );
        assert_eq!(
            run_matcher(
                Method::KMeans,
                Keys::Similarity(&d),
                1,
                &none,
                &Default::default()
            ),
            Err(Error::KeysRequired)
        );
        let protected = ReductionOptions::default().with_protected([0]);
        assert!(run_matcher(
            Method::Greedy,
            Keys::Similarity(&d),
            1,
            &protected,
            &Default::default()
        )
        .is_err());
        assert!(run_matcher(
            Method::CompleteGraph,
            Keys::Similarity(&d),
            1,
            &protected,
            &Default::default()
        )
        .is_ok());
    }
}
