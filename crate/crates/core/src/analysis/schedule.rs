use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `min(r, ⌊n_remaining / 2⌋)`.
pub fn effective_r(n_remaining: usize, r: usize) -> usize {
    r.min(n_remaining / 2)
}

/// Per-layer reduction counts for one branch.
///
/// `r_per_layer` holds the nominal counts. Matchers can only remove half of
/// the tokens they see, so runs apply [`effective_r`] on the running count;
/// see [`ScheduleConfig::effective_r_per_layer`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub n0: usize,
    pub layers: usize,
    pub r_per_layer: Vec<usize>,
}

impl ScheduleConfig {
    pub fn new(n0: usize, r_per_layer: Vec<usize>) -> Result<Self> {
        let s = Self {
            n0,
            layers: r_per_layer.len(),
            r_per_layer,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(n0: usize, layers: usize, r: usize) -> Result<Self> {
        Self::new(n0, vec![r; layers])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::InvalidSchedule("no tokens".into()));
        }
        if self.r_per_layer.len() != self.layers {
            return Err(Error::InvalidSchedule(format!(
                "{} reduction counts for {} layers",
                self.r_per_layer.len(),
                self.layers
            )));
        }
        let total: usize = self.r_per_layer.iter().sum();
        if total >= self.n0 {
            return Err(Error::InvalidSchedule(format!(
                "removing {total} of {} tokens leaves none",
                self.n0
            )));
        }
        Ok(())
    }

    /// Tokens left after every nominal reduction.
    pub fn final_tokens(&self) -> usize {
        self.n0 - self.r_per_layer.iter().sum::<usize>()
    }

    /// Reduction counts after clamping each layer to half its input.
    pub fn effective_r_per_layer(&self) -> Vec<usize> {
        let mut remaining = self.n0;
        self.r_per_layer
            .iter()
            .map(|&r| {
                let e = if remaining >= 2 {
                    effective_r(remaining, r)
                } else {
                    0
                };
                remaining -= e;
                e
            })
            .collect()
    }

    /// Token count entering each layer plus the final count, under the
    /// effective schedule.
    pub fn effective_token_counts(&self) -> Vec<usize> {
        let mut counts = vec![self.n0];
        for e in self.effective_r_per_layer() {
            counts.push(counts.last().unwrap() - e);
        }
        counts
    }

    pub fn effective_final_tokens(&self) -> usize {
        *self.effective_token_counts().last().unwrap()
    }
}

/// `r = ⌊n0 / L⌋` at every layer, leaving `n0 − L·r` tokens.
pub fn halving_schedule(n0: usize, layers: usize) -> Result<ScheduleConfig> {
    if layers == 0 || n0 <= layers {
        return Err(Error::InvalidSchedule(format!(
            "need more tokens than layers, got n0={n0}, L={layers}"
        )));
    }
    ScheduleConfig::constant(n0, layers, n0 / layers)
}
