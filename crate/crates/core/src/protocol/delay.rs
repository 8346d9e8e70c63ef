use alloc::vec::Vec;

use crate::rng;

use super::EngineError;

/// How a per-link delay in `[0, τ̄]` is drawn.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", content = "param", rename_all = "snake_case"))]
pub enum DelayDistribution {
    /// Uniform integer on `[0, τ̄]`.
    Uniform,
    /// Always the same delay.
    Constant(usize),
    /// Relative weights for delays `0..=τ̄`.
    Weighted(Vec<f64>),
}

/// Bounded, symmetric link delays.
///
/// The delay of undirected link `{i, j}` at round `k` is a pure function of
/// `(seed, k, {i, j})`, so both directions of a link always share it.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    tau_bar: usize,
    seed: u64,
    distribution: DelayDistribution,
    cumulative: Vec<f64>,
}

impl DelayModel {
    pub fn new(
        tau_bar: usize,
        seed: u64,
        distribution: DelayDistribution,
    ) -> Result<Self, EngineError> {
        let cumulative = match &distribution {
            DelayDistribution::Uniform => Vec::new(),
            DelayDistribution::Constant(r) => {
                if *r > tau_bar {
                    return Err(EngineError::InvalidDelay("constant delay exceeds tau_bar"));
                }
                Vec::new()
            }
            DelayDistribution::Weighted(w) => {
                if w.len() != tau_bar + 1 {
                    return Err(EngineError::InvalidDelay(
                        "weighted delay needs exactly tau_bar + 1 weights",
                    ));
                }
                if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(EngineError::InvalidDelay("delay weights must be nonnegative"));
                }
                let total: f64 = w.iter().sum();
                if total <= 0.0 {
                    return Err(EngineError::InvalidDelay("delay weights sum to zero"));
                }
                let mut acc = 0.0;
                w.iter()
                    .map(|v| {
                        acc += v / total;
                        acc
                    })
                    .collect()
            }
        };
        Ok(Self {
            tau_bar,
            seed,
            distribution,
            cumulative,
        })
    }

    pub fn uniform(tau_bar: usize, seed: u64) -> Self {
        Self {
            tau_bar,
            seed,
            distribution: DelayDistribution::Uniform,
            cumulative: Vec::new(),
        }
    }

    /// No delays at all (`τ̄ = 0`).
    pub fn none() -> Self {
        Self::uniform(0, 0)
    }

    pub fn tau_bar(&self) -> usize {
        self.tau_bar
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn distribution(&self) -> &DelayDistribution {
        &self.distribution
    }

    /// Delay of the link identified by `pair_key` for payloads stamped `round`.
    pub fn sample(&self, round: u64, pair_key: u64) -> usize {
        if self.tau_bar == 0 {
            return 0;
        }
        let u = rng::counter_unit(self.seed, rng::STREAM_DELAY, round, pair_key);
        match &self.distribution {
            DelayDistribution::Uniform => {
                let r = (u * (self.tau_bar + 1) as f64) as usize;
                r.min(self.tau_bar)
            }
            DelayDistribution::Constant(r) => *r,
            DelayDistribution::Weighted(_) => self
                .cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(self.tau_bar),
        }
    }
}
