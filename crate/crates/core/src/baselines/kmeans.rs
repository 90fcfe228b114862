use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matching::{MatchPlan, StackSet};
use crate::numerics::{dot, l2_norm, SimilarityMatrix, TokenMatrix, NORM_EPS};

/// Spherical k-means into `n − r` clusters under cosine distance.
///
/// Centroids start from the first `n − r` tokens of a seeded shuffle. An
/// empty cluster takes the point farthest from its own centroid among
/// clusters with at least two members, so every cluster stays populated.
pub fn kmeans_match(keys: &TokenMatrix, r: usize, iterations: usize, seed: u64) -> Result<StackSet> {
    let n = keys.n_tokens();
    if r + 1 > n {
        return Err(Error::ReductionTooLarge {
            r,
            available: n,
            max: n.saturating_sub(1),
        });
    }
    if iterations == 0 {
        return Err(Error::InvalidShape("k-means needs at least one iteration".into()));
    }
    if r == 0 {
        return Ok(StackSet::singletons(n));
    }
    let k = n - r;
    let dim = keys.dim();
    let unit: Vec<Vec<f64>> = keys
        .rows()
        .map(|row| {
            let norm = l2_norm(row).max(NORM_EPS);
            row.iter().map(|v| v / norm).collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut centroids: Vec<Vec<f64>> = order[..k].iter().map(|&i| unit[i].clone()).collect();
    let mut assign = vec![0usize; n];

    for _ in 0..iterations {
        let changed = assign_points(&unit, &centroids, &mut assign);
        reseed_empty(&unit, &centroids, &mut assign, k);
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let mut acc = vec![0.0; dim];
            for (i, _) in assign.iter().enumerate().filter(|(_, &a)| a == c) {
                for (a, v) in acc.iter_mut().zip(&unit[i]) {
                    *a += v;
                }
            }
            let norm = l2_norm(&acc).max(NORM_EPS);
            *centroid = acc.into_iter().map(|v| v / norm).collect();
        }
        if !changed {
            break;
        }
    }

    let mut groups = vec![Vec::new(); k];
    for (i, &c) in assign.iter().enumerate() {
        groups[c].push(i);
    }
    StackSet::from_groups(n, groups)
}

fn distance(a: &[f64], centroid: &[f64]) -> f64 {
    1.0 - dot(a, centroid)
}

/// Nearest-centroid assignment, lowest cluster index on ties.
fn assign_points(unit: &[Vec<f64>], centroids: &[Vec<f64>], assign: &mut [usize]) -> bool {
    let mut changed = false;
    for (i, point) in unit.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = distance(point, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if assign[i] != best {
            assign[i] = best;
            changed = true;
        }
    }
    changed
}

fn reseed_empty(unit: &[Vec<f64>], centroids: &[Vec<f64>], assign: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..unit.len())
            .filter(|&i| sizes[assign[i]] >= 2)
            .max_by(|&a, &b| {
                let da = distance(&unit[a], &centroids[assign[a]]);
                let db = distance(&unit[b], &centroids[assign[b]]);
                // farthest first, lowest index on ties
                da.partial_cmp(&db)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .expect("fewer clusters than points");
        assign[donor] = empty;
    }
}

/// Turns stacks into a plan by sending every member to its stack's medoid
/// (largest summed similarity to the other members, lowest index on ties).
pub fn stacks_to_plan(stacks: &StackSet, d: &SimilarityMatrix) -> Result<MatchPlan> {
    if stacks.n() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            found: stacks.n(),
        });
    }
    let mut pairs = Vec::new();
    for group in stacks.groups() {
        let mut medoid = group[0];
        let mut best = f64::NEG_INFINITY;
        for &c in group {
            let s: f64 = group.iter().filter(|&&o| o != c).map(|&o| d.get(o, c)).sum();
            if s > best {
                best = s;
                medoid = c;
            }
        }
        pairs.extend(group.iter().filter(|&&o| o != medoid).map(|&o| (o, medoid)));
    }
    pairs.sort_unstable();
    MatchPlan::new(d.n(), pairs)
}
