use serde::{Deserialize, Serialize};

use super::schedule::{halving_schedule, ScheduleConfig};
use crate::error::{Error, Result};

/// How a multiply-accumulate is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacCounting {
    /// One MAC = one FLOP, the convention of common model profilers.
    #[default]
    Single,
    /// One MAC = two FLOPs.
    Double,
}

impl MacCounting {
    fn factor(self) -> f64 {
        match self {
            MacCounting::Single => 1.0,
            MacCounting::Double => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    pub name: String,
    pub layers: usize,
    pub width: usize,
    /// Tokens entering the first layer, class/cross tokens included.
    pub tokens: usize,
    pub mlp_ratio: f64,
    pub reduced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub branches: Vec<BranchConfig>,
    #[serde(default)]
    pub mac_counting: MacCounting,
}

impl ModelConfig {
    /// Dual-encoder CLIP-style model: ViT-B/16 vision tower at 197 tokens
    /// and a 12-layer, 512-wide text tower at 77 tokens.
    pub fn clip_like() -> Self {
        Self {
            branches: vec![
                BranchConfig {
                    name: "vision".into(),
                    layers: 12,
                    width: 768,
                    tokens: 197,
                    mlp_ratio: 4.0,
                    reduced: true,
                },
                BranchConfig {
                    name: "text".into(),
                    layers: 12,
                    width: 512,
                    tokens: 77,
                    mlp_ratio: 4.0,
                    reduced: false,
                },
            ],
            mac_counting: MacCounting::Single,
        }
    }

    fn validate(&self) -> Result<()> {
        for b in &self.branches {
            if b.width == 0 || b.tokens == 0 || !(b.mlp_ratio > 0.0 && b.mlp_ratio.is_finite()) {
                return Err(Error::InvalidShape(format!(
                    "branch {:?} needs positive width, tokens and mlp_ratio",
                    b.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFlops {
    pub branch: String,
    pub layer: usize,
    pub attention_flops: f64,
    pub mlp_flops: f64,
    pub tokens_at_attention: usize,
    pub tokens_at_mlp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub per_layer: Vec<LayerFlops>,
    pub total: f64,
    pub baseline_total: f64,
    pub reduction_fraction: f64,
}

impl FlopsReport {
    pub fn total_gflops(&self) -> f64 {
        self.total / 1e9
    }

    pub fn baseline_gflops(&self) -> f64 {
        self.baseline_total / 1e9
    }
}

fn layer_cost(tokens_attn: usize, tokens_mlp: usize, b: &BranchConfig, mac: f64) -> (f64, f64) {
    let d = b.width as f64;
    let na = tokens_attn as f64;
    let nm = tokens_mlp as f64;
    // QKV + output projections, then scores and weighted values
    let attention = mac * (4.0 * na * d * d + 2.0 * na * na * d);
    // two linear layers of widths d -> ratio·d -> d
    let mlp = mac * 2.0 * b.mlp_ratio * nm * d * d;
    (attention, mlp)
}

/// Matrix-multiply cost of one forward pass. Reduction happens between
/// attention and MLP, so a layer's MLP already sees `n − r_l` tokens.
///
/// `schedules` is aligned with `model.branches`. A reduced branch without a
/// schedule gets [`halving_schedule`]; unreduced branches must pass `None`.
/// Nominal schedules are clamped with `effective_r` per layer.
pub fn flops_estimate(model: &ModelConfig, schedules: &[Option<ScheduleConfig>]) -> Result<FlopsReport> {
    model.validate()?;
    if !schedules.is_empty() && schedules.len() != model.branches.len() {
        return Err(Error::InvalidSchedule(format!(
            "{} schedules for {} branches",
            schedules.len(),
            model.branches.len()
        )));
    }
    let mac = model.mac_counting.factor();
    let mut per_layer = Vec::new();
    let mut total = 0.0;
    let mut baseline_total = 0.0;

    for (idx, b) in model.branches.iter().enumerate() {
        let given = schedules.get(idx).cloned().flatten();
        let schedule = match (b.reduced, given) {
            (false, Some(_)) => {
                return Err(Error::InvalidSchedule(format!(
                    "branch {:?} is not reduced but has a schedule",
                    b.name
                )))
            }
            (false, None) => None,
            (true, Some(s)) => Some(s),
            (true, None) if b.layers == 0 => None,
            (true, None) => Some(halving_schedule(b.tokens, b.layers)?),
        };
        let effective = match &schedule {
            Some(s) => {
                s.validate()?;
                if s.n0 != b.tokens || s.layers != b.layers {
                    return Err(Error::InvalidSchedule(format!(
                        "schedule ({} tokens, {} layers) does not fit branch {:?} ({}, {})",
                        s.n0, s.layers, b.name, b.tokens, b.layers
                    )));
                }
                s.effective_r_per_layer()
            }
            None => vec![0; b.layers],
        };

        let mut n = b.tokens;
        for (layer, r) in effective.into_iter().enumerate() {
            let (attention, mlp) = layer_cost(n, n - r, b, mac);
            let (base_a, base_m) = layer_cost(b.tokens, b.tokens, b, mac);
            total += attention + mlp;
            baseline_total += base_a + base_m;
            per_layer.push(LayerFlops {
                branch: b.name.clone(),
                layer,
                attention_flops: attention,
                mlp_flops: mlp,
                tokens_at_attention: n,
                tokens_at_mlp: n - r,
            });
            n -= r;
        }
    }

    let reduction_fraction = if baseline_total > 0.0 {
        1.0 - total / baseline_total
    } else {
        0.0
    };
    Ok(FlopsReport {
        per_layer,
        total,
        baseline_total,
        reduction_fraction,
    })
}
