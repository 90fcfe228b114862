//! Cross-modal guidance: importance of each token with respect to a cross
//! token, the Jensen-Shannon alignment loss between the projected vision and
//! language cross tokens, the total-loss combiner, and cross-token
//! initialization.
//!
//! Everything is forward-only. [`js_divergence_grad`] exists so the loss can
//! be checked against finite differences; no optimizer lives here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cosine, softmax, Matrix, TokenMatrix};

/// Floor applied inside every logarithm of the KL terms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Scale of the random cross-token initializers.
pub const INIT_SCALE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Vision,
    Language,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossToken {
    pub vector: Vec<f64>,
    pub layer_index: usize,
    pub modality: Modality,
}

impl CrossToken {
    pub fn new(vector: Vec<f64>, layer_index: usize, modality: Modality) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(pos) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self {
            vector,
            layer_index,
            modality,
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Query and key weights of one attention layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionProjection {
    pub w_query: Matrix,
    pub w_key: Matrix,
}

impl AttentionProjection {
    pub fn new(w_query: Matrix, w_key: Matrix) -> Result<Self> {
        for w in [&w_query, &w_key] {
            if w.rows() != w.cols() {
                return Err(Error::InvalidShape(format!(
                    "attention projection must be square, got {}x{}",
                    w.rows(),
                    w.cols()
                )));
            }
        }
        if w_query.rows() != w_key.rows() {
            return Err(Error::DimensionMismatch {
                expected: w_query.rows(),
                found: w_key.rows(),
            });
        }
        Ok(Self { w_query, w_key })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            w_query: Matrix::identity(dim),
            w_key: Matrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_query.rows()
    }
}

/// Detached projections of the two modalities into a shared space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub w_vision: Matrix,
    pub w_language: Matrix,
}

impl ProjectionPair {
    pub fn new(w_vision: Matrix, w_language: Matrix) -> Result<Self> {
        if w_vision.cols() != w_language.cols() {
            return Err(Error::DimensionMismatch {
                expected: w_vision.cols(),
                found: w_language.cols(),
            });
        }
        Ok(Self { w_vision, w_language })
    }

    /// The same pair with the modalities exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            w_vision: self.w_language.clone(),
            w_language: self.w_vision.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    pub layer_count: usize,
}

impl LossConfig {
    /// `alpha = 10^exponent`.
    pub fn power_of_ten(exponent: i32, layer_count: usize) -> Self {
        Self {
            alpha: 10f64.powi(exponent),
            layer_count,
        }
    }
}

/// How importance scores are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ImportanceSource {
    /// Cosine between the cross token's query and each token's key.
    #[default]
    CrossToken,
    /// Experimental: mean over queries `j` of `cos(Q_j, K_i)`.
    AttentionReuse,
}

/// `I_i = cos(cross · W_q, T_i · W_k)`.
pub fn cross_importance(
    cross: &CrossToken,
    proj: &AttentionProjection,
    tokens: &TokenMatrix,
) -> Result<Vec<f64>> {
    let d = proj.dim();
    if cross.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: cross.dim(),
        });
    }
    let query = proj.w_query.left_mul(&cross.vector);
    let keys = tokens.matmul(&proj.w_key)?;
    Ok(keys.rows().map(|k| cosine(&query, k)).collect())
}

/// `I_i = mean_j cos(T_j · W_q, T_i · W_k)`, reusing the layer's own
/// query/key products instead of a cross token.
pub fn attention_reuse_importance(proj: &AttentionProjection, tokens: &TokenMatrix) -> Result<Vec<f64>> {
    let queries = tokens.matmul(&proj.w_query)?;
    let keys = tokens.matmul(&proj.w_key)?;
    let n = tokens.n_tokens() as f64;
    Ok(keys
        .rows()
        .map(|k| queries.rows().map(|q| cosine(q, k)).sum::<f64>() / n)
        .collect())
}

fn project(cross: &CrossToken, w: &Matrix) -> Result<Vec<f64>> {
    if cross.dim() != w.rows() {
        return Err(Error::DimensionMismatch {
            expected: w.rows(),
            found: cross.dim(),
        });
    }
    Ok(w.left_mul(&cross.vector))
}

fn distributions(cv: &CrossToken, cl: &CrossToken, pp: &ProjectionPair) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = softmax(&project(cv, &pp.w_vision)?)?;
    let q = softmax(&project(cl, &pp.w_language)?)?;
    Ok((p, q))
}

fn kl(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x * (x.max(LOG_FLOOR).ln() - y.max(LOG_FLOOR).ln()))
        .sum()
}

/// Jensen-Shannon divergence between two probability vectors, mixture taken
/// in distribution space. Natural log, so bounded by `ln 2`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

/// Alignment loss between the vision and language cross tokens of a layer.
/// Each projected vector is mapped to a distribution with softmax.
pub fn js_divergence_loss(cv: &CrossToken, cl: &CrossToken, pp: &ProjectionPair) -> Result<f64> {
    let (p, q) = distributions(cv, cl, pp)?;
    Ok(js_divergence(&p, &q))
}

/// Analytic gradient of [`js_divergence_loss`] with respect to the two cross
/// token vectors (log floor ignored).
pub fn js_divergence_grad(
    cv: &CrossToken,
    cl: &CrossToken,
    pp: &ProjectionPair,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (p, q) = distributions(cv, cl, pp)?;
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    // dJS/dp_k = ½ ln(p_k / m_k); chain through softmax then the projection.
    let logit_grad = |dist: &[f64]| -> Vec<f64> {
        let g: Vec<f64> = dist
            .iter()
            .zip(&m)
            .map(|(x, mk)| 0.5 * (x.ln() - mk.ln()))
            .collect();
        let mean: f64 = dist.iter().zip(&g).map(|(x, gk)| x * gk).sum();
        dist.iter().zip(&g).map(|(x, gk)| x * (gk - mean)).collect()
    };
    let back = |w: &Matrix, ga: &[f64]| -> Vec<f64> {
        (0..w.rows())
            .map(|i| (0..w.cols()).map(|k| w.get(i, k) * ga[k]).sum())
            .collect()
    };
    Ok((
        back(&pp.w_vision, &logit_grad(&p)),
        back(&pp.w_language, &logit_grad(&q)),
    ))
}

/// `original + alpha · Σ per_layer_js`.
pub fn total_loss(original_loss: f64, cfg: &LossConfig, per_layer_js: &[f64]) -> Result<f64> {
    if per_layer_js.len() != cfg.layer_count {
        return Err(Error::LengthMismatch {
            expected: cfg.layer_count,
            found: per_layer_js.len(),
        });
    }
    if let Some(pos) = per_layer_js.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite(pos));
    }
    Ok(original_loss + cfg.alpha * per_layer_js.iter().sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitStrategy {
    Zero,
    NormalRandom,
    UniformRandom,
    /// Copy of a reference token, e.g. the class token.
    Informative,
}

pub fn init_cross_token(
    strategy: InitStrategy,
    dim: usize,
    reference: Option<&[f64]>,
    seed: u64,
    layer_index: usize,
    modality: Modality,
) -> Result<CrossToken> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vector = match strategy {
        InitStrategy::Zero => vec![0.0; dim],
        InitStrategy::NormalRandom => (0..dim)
            .map(|_| INIT_SCALE * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        InitStrategy::UniformRandom => (0..dim)
            .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
            .collect(),
        InitStrategy::Informative => {
            let r = reference.ok_or(Error::MissingReference)?;
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            r.to_vec()
        }
    };
    CrossToken::new(vector, layer_index, modality)
}
