//! Complete-graph soft matching and its cross-guided variant.
//!
//! The pipeline is: cosine similarity between keys, priority ranking of rows
//! and columns by their maximum similarity, the dependency mask, source and
//! destination selection, union of pairs into stacks, and ensembling.

mod mask;
mod plan;
mod stacks;

pub use mask::{priority_mask, PriorityMaskedSimilarity};
pub use plan::{select_match_plan, EnsembleMode, MatchPlan, ReductionOptions};
pub use stacks::{build_stacks, ensemble_stacks, StackSet};

pub(crate) use plan::check_reduction;

use std::borrow::Cow;

use crate::analysis::objective;
use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity_matrix, SimilarityMatrix, TokenMatrix};

/// Where matching similarities come from.
#[derive(Debug, Clone, Copy)]
pub enum Keys<'a> {
    Embeddings(&'a TokenMatrix),
    Similarity(&'a SimilarityMatrix),
}

impl<'a> Keys<'a> {
    pub fn n(&self) -> usize {
        match self {
            Keys::Embeddings(k) => k.n_tokens(),
            Keys::Similarity(d) => d.n(),
        }
    }

    pub fn similarity(&self) -> Result<Cow<'a, SimilarityMatrix>> {
        match *self {
            Keys::Embeddings(k) => cosine_similarity_matrix(k).map(Cow::Owned),
            Keys::Similarity(d) => Ok(Cow::Borrowed(d)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub tokens: TokenMatrix,
    pub plan: MatchPlan,
    pub stacks: StackSet,
    /// Sum of unmasked similarity over plan pairs.
    pub objective: f64,
}

/// End-to-end reduction of `tokens` by `r` using complete-graph matching
/// (cross-guided when `opts` carries importance scores).
pub fn reduce_tokens(
    tokens: &TokenMatrix,
    keys: Keys<'_>,
    r: usize,
    opts: &ReductionOptions,
) -> Result<Reduction> {
    if keys.n() != tokens.n_tokens() {
        return Err(Error::DimensionMismatch {
            expected: tokens.n_tokens(),
            found: keys.n(),
        });
    }
    let d = keys.similarity()?;
    let pm = priority_mask(&d)?;
    let plan = select_match_plan(&pm, r, opts)?;
    let stacks = build_stacks(&plan);
    let reduced = ensemble_stacks(tokens, &stacks, opts)?;
    let objective = objective(&d, &plan)?;
    Ok(Reduction {
        tokens: reduced,
        plan,
        stacks,
        objective,
    })
}
