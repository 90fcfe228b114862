//! The two four-token instances used as worked examples throughout the tests
//! and docs. Token `T_k` is index `k - 1`.
//!
//! `case2` is `case1` inverted: every off-diagonal entry is `1 - s`.

use crate::numerics::SimilarityMatrix;

/// Upper triangle `(s12, s13, s14, s23, s24, s34)`.
pub const CASE1_UPPER: [f64; 6] = [0.4, 0.1, 0.5, 0.6, 0.2, 0.3];
pub const CASE2_UPPER: [f64; 6] = [0.6, 0.9, 0.5, 0.4, 0.8, 0.7];

/// Optimal objectives for `r = 2`.
pub const CASE1_OPTIMUM: f64 = 1.1;
pub const CASE2_OPTIMUM: f64 = 1.7;

pub fn case1() -> SimilarityMatrix {
    SimilarityMatrix::from_upper_triangle(4, &CASE1_UPPER).expect("static case")
}

pub fn case2() -> SimilarityMatrix {
    SimilarityMatrix::from_upper_triangle(4, &CASE2_UPPER).expect("static case")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case2_is_inverted_case1() {
        for (a, b) in CASE1_UPPER.iter().zip(CASE2_UPPER) {
            assert!((1.0 - a - b).abs() < 1e-12);
        }
    }
}
