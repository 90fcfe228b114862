use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schedule::ScheduleConfig;
use crate::error::{Error, Result};
use crate::matching::{ensemble_stacks, Keys, ReductionOptions};
use crate::method::{run_matcher, MatcherSettings, Method};
use crate::numerics::{cosine, dot, Matrix, TokenMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenSource {
    /// i.i.d. standard normal tokens.
    Synthetic {
        n_tokens: usize,
        dim: usize,
        seed: u64,
    },
    Provided(TokenMatrix),
}

impl TokenSource {
    pub fn materialize(&self) -> Result<TokenMatrix> {
        match self {
            TokenSource::Synthetic { n_tokens, dim, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let data = (0..n_tokens * dim)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                TokenMatrix::new(*n_tokens, *dim, data)
            }
            TokenSource::Provided(t) => Ok(t.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredRunConfig {
    pub method: Method,
    pub schedule: ScheduleConfig,
    /// Leading rows that are never merged. They keep their positions across
    /// layers because output stacks are ordered by smallest member.
    pub protect_prefix: usize,
    pub seed: u64,
    pub kmeans_iterations: usize,
    pub record_timing: bool,
}

impl LayeredRunConfig {
    pub fn new(method: Method, schedule: ScheduleConfig) -> Self {
        Self {
            method,
            schedule,
            protect_prefix: 0,
            seed: 0,
            kmeans_iterations: 10,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer: usize,
    pub tokens_in: usize,
    pub r: usize,
    pub tokens_out: usize,
    pub objective: f64,
    pub degenerate_fallbacks: usize,
    pub elapsed_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub method: Method,
    pub seed: u64,
    pub layers: Vec<LayerRecord>,
    pub final_tokens: usize,
    pub total_objective: f64,
    pub mean_objective_per_pair: f64,
    pub total_fallbacks: usize,
    pub elapsed_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredRun {
    pub report: ReductionReport,
    pub tokens: TokenMatrix,
}

/// Seeded orthogonal `dim × dim` map via Gram-Schmidt on a Gaussian matrix.
pub fn orthogonal_map(dim: usize, seed: u64, layer: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64 + 1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for b in &basis {
            let p = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Matrix::new(dim, dim, basis.concat()).expect("finite basis")
}

/// Applies the schedule layer by layer: keys are the tokens seen through a
/// per-layer orthogonal map, the chosen matcher runs with the effective `r`,
/// and stacks are ensembled into the next layer's tokens.
///
/// For `CrossGuided`, row 0 acts as the cross token: it is always protected
/// and importance is its cosine with every key.
pub fn layered_reduction_run(source: &TokenSource, cfg: &LayeredRunConfig) -> Result<LayeredRun> {
    cfg.schedule.validate()?;
    let mut tokens = source.materialize()?;
    if tokens.n_tokens() != cfg.schedule.n0 {
        return Err(Error::InvalidSchedule(format!(
            "schedule expects {} tokens, source has {}",
            cfg.schedule.n0,
            tokens.n_tokens()
        )));
    }
    let protect = if cfg.method == Method::CrossGuided {
        cfg.protect_prefix.max(1)
    } else {
        cfg.protect_prefix
    };

    let started = Instant::now();
    let mut records = Vec::with_capacity(cfg.schedule.layers);
    for (layer, &r_nominal) in cfg.schedule.r_per_layer.iter().enumerate() {
        let n = tokens.n_tokens();
        let available = n.saturating_sub(protect);
        let r = r_nominal.min(available / 2);
        if r == 0 {
            records.push(LayerRecord {
                layer,
                tokens_in: n,
                r: 0,
                tokens_out: n,
                objective: 0.0,
                degenerate_fallbacks: 0,
                elapsed_us: cfg.record_timing.then_some(0),
            });
            continue;
        }
        let keys = tokens.matmul(&orthogonal_map(tokens.dim(), cfg.seed, layer))?;
        let mut opts = ReductionOptions::default().with_protected(0..protect);
        if cfg.method == Method::CrossGuided {
            let cross = keys.row(0);
            opts.importance = Some(keys.rows().map(|k| cosine(cross, k)).collect());
        }
        let settings = MatcherSettings {
            seed: cfg.seed.wrapping_add(layer as u64),
            kmeans_iterations: cfg.kmeans_iterations,
        };
        let t0 = Instant::now();
        let outcome = run_matcher(cfg.method, Keys::Embeddings(&keys), r, &opts, &settings)?;
        let elapsed = t0.elapsed().as_micros() as u64;
        let ensemble = cfg.method.effective_options(&opts)?;
        tokens = ensemble_stacks(&tokens, &outcome.stacks, &ensemble)?;
        records.push(LayerRecord {
            layer,
            tokens_in: n,
            r,
            tokens_out: tokens.n_tokens(),
            objective: outcome.objective,
            degenerate_fallbacks: outcome.plan.degenerate_fallbacks(),
            elapsed_us: cfg.record_timing.then_some(elapsed),
        });
    }

    let total_objective: f64 = records.iter().map(|l| l.objective).sum();
    let pairs: usize = records.iter().map(|l| l.r).sum();
    let report = ReductionReport {
        method: cfg.method,
        seed: cfg.seed,
        final_tokens: tokens.n_tokens(),
        total_objective,
        mean_objective_per_pair: if pairs > 0 {
            total_objective / pairs as f64
        } else {
            0.0
        },
        total_fallbacks: records.iter().map(|l| l.degenerate_fallbacks).sum(),
        elapsed_us: cfg.record_timing.then(|| started.elapsed().as_micros() as u64),
        layers: records,
    };
    Ok(LayeredRun { report, tokens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::halving_schedule;

    #[test]
    fn orthogonal_map_is_orthogonal() {
        let q = orthogonal_map(6, 3, 2);
        for i in 0..6 {
            for j in 0..6 {
                let d: f64 = (0..6).map(|k| q.get(i, k) * q.get(j, k)).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_schedule_is_identity() {
        let source = TokenSource::Synthetic {
            n_tokens: 12,
            dim: 4,
            seed: 5,
        };
        let schedule = ScheduleConfig::new(12, vec![0; 3]).unwrap();
        let run =
            layered_reduction_run(&source, &LayeredRunConfig::new(Method::CompleteGraph, schedule)).unwrap();
        assert_eq!(run.tokens, source.materialize().unwrap());
        assert_eq!(run.report.final_tokens, 12);
    }

    #[test]
    fn halving_schedule_final_count_uses_effective_r() {
        let source = TokenSource::Synthetic {
            n_tokens: 100,
            dim: 16,
            seed: 1,
        };
        let schedule = halving_schedule(100, 12).unwrap();
        for method in [
            Method::CompleteGraph,
            Method::Bipartite,
            Method::Greedy,
            Method::Random,
            Method::KMeans,
        ] {
            let run =
                layered_reduction_run(&source, &LayeredRunConfig::new(method, schedule.clone())).unwrap();
            assert_eq!(
                run.report.final_tokens,
                schedule.effective_final_tokens(),
                "{method}"
            );
            assert_eq!(run.report.final_tokens, 6);
            let counts: Vec<usize> = run.report.layers.iter().map(|l| l.tokens_out).collect();
            assert!(counts.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn guided_run_keeps_cross_token() {
        let source = TokenSource::Synthetic {
            n_tokens: 30,
            dim: 8,
            seed: 2,
        };
        let schedule = ScheduleConfig::constant(30, 4, 4).unwrap();
        let original = source.materialize().unwrap();
        let run =
            layered_reduction_run(&source, &LayeredRunConfig::new(Method::CrossGuided, schedule)).unwrap();
        assert_eq!(run.tokens.row(0), original.row(0));
        assert_eq!(run.report.final_tokens, 14);
    }

    #[test]
    fn deterministic_reports() {
        let source = TokenSource::Synthetic {
            n_tokens: 64,
            dim: 8,
            seed: 9,
        };
        let mut cfg = LayeredRunConfig::new(Method::Random, ScheduleConfig::constant(64, 5, 6).unwrap());
        cfg.seed = 4;
        let a = layered_reduction_run(&source, &cfg).unwrap();
        let b = layered_reduction_run(&source, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn source_size_must_match() {
        let source = TokenSource::Synthetic {
            n_tokens: 10,
            dim: 2,
            seed: 0,
        };
        let cfg = LayeredRunConfig::new(Method::Greedy, ScheduleConfig::constant(11, 2, 1).unwrap());
        assert!(layered_reduction_run(&source, &cfg).is_err());
    }
}
