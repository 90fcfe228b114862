//! Token matching for transformer token reduction.
//!
//! The core matcher is complete-graph soft matching: every token may merge
//! into any other, with priority ranks and a dependency mask keeping source
//! and destination sets disjoint so the whole plan is computed in one pass.
//! Cross-modal importance scores can demote salient tokens and weight the
//! merge. Baseline matchers, a brute-force oracle, closed-form expectation
//! analysis, reduction schedules and a FLOPs model round out the crate.
//!
//! ```
//! use cgmatch::{cases, reduce_tokens, Keys, TokenMatrix};
//!
//! let d = cases::case2();
//! let tokens = TokenMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
//! let out = reduce_tokens(&tokens, Keys::Similarity(&d), 2, &Default::default()).unwrap();
//! assert!((out.objective - 1.7).abs() < 1e-12);
//! assert_eq!(out.tokens.n_tokens(), 2);
//! ```

pub mod analysis;
pub mod baselines;
pub mod cases;
pub mod error;
pub mod format;
pub mod guidance;
pub mod matching;
pub mod method;
pub mod numerics;

pub use error::{Error, Result};
pub use matching::{
    build_stacks, ensemble_stacks, priority_mask, reduce_tokens, select_match_plan, EnsembleMode, Keys,
    MatchPlan, PriorityMaskedSimilarity, Reduction, ReductionOptions, StackSet,
};
pub use method::{run_matcher, MatchOutcome, MatcherSettings, Method};
pub use numerics::{Matrix, Permutation, SimilarityMatrix, TokenMatrix};
