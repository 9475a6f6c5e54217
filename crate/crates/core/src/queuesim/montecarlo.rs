//! Seeded simulation: the additive-channel reduction and plug-in entropy.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{run_trace, FeedbackView, FnPolicy, QueueError};
use crate::dist::{Pmf, Tau};

/// Draws from a [`Pmf`] (the stored part; truncated mass is ignored).
pub struct PmfSampler(WeightedIndex<f64>);

impl PmfSampler {
    pub fn new(p: &Pmf<f64>) -> Result<Self, QueueError> {
        WeightedIndex::new(p.probs().iter().copied())
            .map(PmfSampler)
            .map_err(|e| QueueError::Invalid(e.to_string()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.0.sample(rng) as u64
    }
}

/// The RNG of trial `trial` under `seed`: one ChaCha8 stream per trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Offsets `X_i` of the policy `a_i = c_{i-1} + X_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XSchedule {
    Fixed(Vec<u64>),
    /// `packets` offsets drawn uniformly from `0..=max` per trial.
    Uniform { max: u64, packets: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub tau: Tau,
    pub trials: u64,
    pub seed: u64,
    pub packets_checked: u64,
    /// Largest `|(d_i - d_{i-1}) - (W_i(X_i) + S_i)|` seen, in slots.
    pub max_discrepancy: u64,
}

/// Checks `d_i - d_{i-1} = (X_i - (S_{i-1} - τ)+)+ + S_i` (with `S_0 = 0`)
/// and `b_i - d_{i-1} = (X_i - (S_{i-1} - τ)+)+` on simulated queues driven
/// by `a_i = c_{i-1} + X_i`.
pub fn reduction_check(
    schedule: &XSchedule,
    service: &Pmf<f64>,
    tau: Tau,
    trials: u64,
    seed: u64,
) -> Result<ReductionReport, QueueError> {
    let sampler = PmfSampler::new(service)?;
    let mut worst = 0u64;
    let mut checked = 0u64;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let xs: Vec<u64> = match schedule {
            XSchedule::Fixed(v) => v.clone(),
            XSchedule::Uniform { max, packets } => (0..*packets).map(|_| rng.gen_range(0..=*max)).collect(),
        };
        let s: Vec<u64> = (0..xs.len()).map(|_| sampler.sample(&mut rng)).collect();
        let policy = FnPolicy(|_, i, fb: &FeedbackView<'_>| fb.last_c() + xs[i]);
        let t = run_trace(&policy, 0, &s, tau)?;
        let mut prev_d = 0u64;
        let mut prev_s = 0u64;
        for i in 0..xs.len() {
            let clip = prev_s - tau.clip(prev_s);
            let w = xs[i].saturating_sub(clip);
            let dd = t.d[i] - prev_d;
            worst = worst.max(dd.abs_diff(w + s[i])).max(t.w[i].abs_diff(w));
            prev_d = t.d[i];
            prev_s = s[i];
            checked += 1;
        }
    }
    Ok(ReductionReport { tau, trials, seed, packets_checked: checked, max_discrepancy: worst })
}

pub const MIN_PLUGIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginEstimate {
    pub samples: usize,
    pub distinct: usize,
    /// Empirical-frequency entropy (nats).
    pub plugin_nats: f64,
    /// Miller–Madow bias term `(K - 1) / 2N`, reported separately.
    pub miller_madow_correction: f64,
    pub corrected_nats: f64,
}

pub fn plugin_entropy_estimate(samples: &[u64]) -> Result<PluginEstimate, QueueError> {
    if samples.len() < MIN_PLUGIN_SAMPLES {
        return Err(QueueError::TooFewSamples { needed: MIN_PLUGIN_SAMPLES, got: samples.len() });
    }
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_default() += 1;
    }
    let n = samples.len() as f64;
    let plugin: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    let k = counts.len();
    let mm = (k as f64 - 1.0) / (2.0 * n);
    Ok(PluginEstimate {
        samples: samples.len(),
        distinct: k,
        plugin_nats: plugin,
        miller_madow_correction: mm,
        corrected_nats: plugin + mm,
    })
}
