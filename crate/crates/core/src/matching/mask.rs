use crate::error::{Error, Result};
use crate::numerics::{stable_argsort_desc, Permutation, SimilarityMatrix};

/// Similarity matrix with the priority dependency mask applied lazily in
/// original index space.
///
/// Rows are ranked by their maximum similarity (descending, stable) and so
/// are columns. Entry `(i, j)` survives the mask only when row `i` ranks
/// strictly ahead of column `j`; this is the strict upper triangle of the
/// physically sorted matrix.
#[derive(Debug, Clone)]
pub struct PriorityMaskedSimilarity<'a> {
    base: &'a SimilarityMatrix,
    row_order: Permutation,
    col_order: Permutation,
    row_rank: Vec<usize>,
    col_rank: Vec<usize>,
}

impl<'a> PriorityMaskedSimilarity<'a> {
    pub fn base(&self) -> &'a SimilarityMatrix {
        self.base
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// Token indices in row-priority order (highest first).
    pub fn row_order(&self) -> &Permutation {
        &self.row_order
    }

    pub fn col_order(&self) -> &Permutation {
        &self.col_order
    }

    pub fn row_rank(&self) -> &[usize] {
        &self.row_rank
    }

    pub fn col_rank(&self) -> &[usize] {
        &self.col_rank
    }

    #[inline]
    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        i == j || self.row_rank[i] >= self.col_rank[j]
    }

    #[inline]
    pub fn masked(&self, i: usize, j: usize) -> f64 {
        if self.is_masked(i, j) {
            f64::NEG_INFINITY
        } else {
            self.base.get(i, j)
        }
    }
}

pub fn priority_mask(d: &SimilarityMatrix) -> Result<PriorityMaskedSimilarity<'_>> {
    let n = d.n();
    if n < 2 {
        return Err(Error::TooFewTokens(n));
    }
    let mut row_max = vec![f64::NEG_INFINITY; n];
    let mut col_max = vec![f64::NEG_INFINITY; n];
    for (i, rm) in row_max.iter_mut().enumerate() {
        for (j, cm) in col_max.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let s = d.get(i, j);
            if s > *rm {
                *rm = s;
            }
            if s > *cm {
                *cm = s;
            }
        }
    }
    let row_order = stable_argsort_desc(&row_max);
    let col_order = stable_argsort_desc(&col_max);
    let row_rank = row_order.ranks();
    let col_rank = col_order.ranks();
    Ok(PriorityMaskedSimilarity {
        base: d,
        row_order,
        col_order,
        row_rank,
        col_rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn case2_row_priority() {
        let d = cases::case2();
        let pm = priority_mask(&d).unwrap();
        // T1, T3, T2, T4
        assert_eq!(pm.row_order().as_slice(), &[0, 2, 1, 3]);
    }

    #[test]
    fn symmetric_ranks_coincide() {
        for d in [cases::case1(), cases::case2()] {
            let pm = priority_mask(&d).unwrap();
            assert_eq!(pm.row_rank(), pm.col_rank());
        }
    }

    #[test]
    fn two_by_two_single_finite_entry() {
        let d = SimilarityMatrix::from_upper_triangle(2, &[0.3]).unwrap();
        let pm = priority_mask(&d).unwrap();
        // tie on maxima -> token 0 has priority
        assert_eq!(pm.masked(0, 1), 0.3);
        assert_eq!(pm.masked(1, 0), f64::NEG_INFINITY);
        assert_eq!(pm.masked(0, 0), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_single_token() {
        let d = SimilarityMatrix::new(1, vec![0.0], true).unwrap();
        assert!(matches!(priority_mask(&d), Err(Error::TooFewTokens(1))));
    }

    #[test]
    fn matches_physically_sorted_lower_triangle_mask() {
        // Asymmetric so row and column orders differ.
        let n = 5;
        let entries: Vec<f64> = (0..n * n).map(|k| ((k * 37 % 23) as f64) / 23.0 - 0.5).collect();
        let d = SimilarityMatrix::new(n, entries, true).unwrap();
        let pm = priority_mask(&d).unwrap();
        let rows = pm.row_order().as_slice();
        let cols = pm.col_order().as_slice();
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                let sorted = d.get(i, j) + if a >= b { f64::NEG_INFINITY } else { 0.0 };
                let sorted = if i == j { f64::NEG_INFINITY } else { sorted };
                assert_eq!(pm.masked(i, j), sorted, "a={a} b={b}");
            }
        }
    }
}
