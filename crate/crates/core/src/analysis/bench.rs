use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::layered::TokenSource;
use crate::error::{Error, Result};
use crate::matching::{build_stacks, priority_mask, select_match_plan, ReductionOptions};
use crate::numerics::cosine_similarity_matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub n: usize,
    pub r: usize,
    pub best_us: f64,
    pub median_us: f64,
}

/// Wall time of complete-graph matching (similarity, mask, plan, stacks) on
/// synthetic Gaussian keys with `r = ⌊n/4⌋`.
pub fn bench_complete_graph(sizes: &[usize], dim: usize, reps: usize, seed: u64) -> Result<Vec<BenchPoint>> {
    if reps == 0 || dim == 0 {
        return Err(Error::InvalidShape("bench needs positive reps and dim".into()));
    }
    let opts = ReductionOptions::default();
    sizes
        .iter()
        .map(|&n| {
            let keys = TokenSource::Synthetic {
                n_tokens: n,
                dim,
                seed,
            }
            .materialize()?;
            let r = n / 4;
            let mut samples = Vec::with_capacity(reps);
            for _ in 0..reps {
                let t0 = Instant::now();
                let d = cosine_similarity_matrix(&keys)?;
                let plan = select_match_plan(&priority_mask(&d)?, r, &opts)?;
                std::hint::black_box(build_stacks(&plan));
                samples.push(t0.elapsed().as_secs_f64() * 1e6);
            }
            samples.sort_by(f64::total_cmp);
            Ok(BenchPoint {
                n,
                r,
                best_us: samples[0],
                median_us: samples[samples.len() / 2],
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let quad: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&x| (x, 3.0 * x * x)).collect();
        assert!((loglog_slope(&quad).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[(1.0, 1.0)]).is_none());
        assert!(loglog_slope(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 2.0)]).is_none());
    }

    #[test]
    fn bench_runs() {
        let pts = bench_complete_graph(&[16, 32], 8, 3, 0).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|p| p.best_us <= p.median_us));
        assert_eq!(pts[1].r, 8);
    }
}
