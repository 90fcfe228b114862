use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(n: usize, layers: usize, r: usize) -> Result<()> {
    if layers == 0 {
        return Err(Error::InvalidSchedule("layer count must be positive".into()));
    }
    match layers.checked_mul(r).and_then(|total| n.checked_sub(total)) {
        Some(rest) if rest >= 1 => Ok(()),
        _ => Err(Error::InvalidSchedule(format!(
            "{n} tokens cannot lose {r} per layer over {layers} layers"
        ))),
    }
}

/// Tokens entering layer `l` (1-based) of a constant-`r` schedule.
fn tokens_at(n: usize, r: usize, l: usize) -> usize {
    n - (l - 1) * r
}

/// Expected probability that a complete-graph source finds its optimal
/// destination, averaged over layers:
/// `1/L Σ_l (N − l·r) / (N + (1 − l)·r − 1)`.
pub fn expectation_cgsm(n: usize, layers: usize, r: usize) -> Result<f64> {
    check(n, layers, r)?;
    let sum: f64 = (1..=layers)
        .map(|l| {
            let m = tokens_at(n, r, l);
            (m - r) as f64 / (m - 1) as f64
        })
        .sum();
    Ok(sum / layers as f64)
}

/// Same quantity for alternating bipartite matching:
/// `1/L Σ_l ⌊(N + (1 − l)·r)/2⌋ / (N + (1 − l)·r − 1)`.
pub fn expectation_bipartite(n: usize, layers: usize, r: usize) -> Result<f64> {
    check(n, layers, r)?;
    let sum: f64 = (1..=layers)
        .map(|l| {
            let m = tokens_at(n, r, l);
            (m / 2) as f64 / (m - 1) as f64
        })
        .sum();
    Ok(sum / layers as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimMethod {
    CompleteGraph,
    Bipartite,
}

/// Monte Carlo estimate of the optimal-match probability under the uniform
/// model: each source draws its optimal destination uniformly among the
/// other `m − 1` tokens and succeeds if it lands in the destination set.
///
/// Per layer the success fraction is computed separately and the layers are
/// averaged with equal weight, mirroring the closed forms. Trial `t` draws
/// from ChaCha stream `t` of `seed`; counts are integers, so the result does
/// not depend on how trials are scheduled across threads.
pub fn simulate_optimal_match_rate(
    n: usize,
    layers: usize,
    r: usize,
    trials: u64,
    seed: u64,
    method: SimMethod,
) -> Result<f64> {
    check(n, layers, r)?;
    if trials == 0 {
        return Err(Error::InvalidSchedule("need at least one trial".into()));
    }
    // (sources drawing, destination set size, tokens) per layer
    let plan: Vec<(usize, usize, usize)> = (1..=layers)
        .map(|l| {
            let m = tokens_at(n, r, l);
            match method {
                SimMethod::CompleteGraph => (r, m - r, m),
                SimMethod::Bipartite => (m.div_ceil(2), m / 2, m),
            }
        })
        .collect();

    let hits = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; layers],
            |mut acc, trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(trial);
                for (slot, &(draws, dest, m)) in acc.iter_mut().zip(&plan) {
                    for _ in 0..draws {
                        // index among the m − 1 other tokens; the first
                        // `dest` of them form the destination set
                        if rng.random_range(0..m - 1) < dest {
                            *slot += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; layers],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let mean = hits
        .iter()
        .zip(&plan)
        .map(|(&h, &(draws, _, _))| h as f64 / (draws as u64 * trials) as f64)
        .sum::<f64>()
        / layers as f64;
    Ok(mean)
}
