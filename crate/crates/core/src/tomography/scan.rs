use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratemodel::Network;
use crate::tomography::counts::{synth_counts, CountsRecord};
use crate::tomography::sampler::{bayes_estimate, PosteriorSummary, SamplerConfig};
use crate::tomography::state::{werner_fidelity, TwoQubitState};

/// Werner-like source quality of one channel: mixing `p` toward the pair
/// state with relative phase `phase` (π gives the singlet).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelNoise {
    pub p: f64,
    #[serde(default = "default_phase")]
    pub phase: f64,
}

fn default_phase() -> f64 {
    std::f64::consts::PI
}

impl ChannelNoise {
    pub fn werner(p: f64) -> Self {
        Self { p, phase: default_phase() }
    }

    pub fn state(&self) -> Result<TwoQubitState> {
        TwoQubitState::noisy_pair(self.p, self.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub default: ChannelNoise,
    #[serde(default)]
    pub per_channel: BTreeMap<usize, ChannelNoise>,
    /// Synthetic coincidences per basis and channel.
    pub pairs_per_basis: u64,
}

impl NoiseModel {
    pub fn uniform(p: f64, pairs_per_basis: u64) -> Self {
        Self {
            default: ChannelNoise::werner(p),
            per_channel: BTreeMap::new(),
            pairs_per_basis,
        }
    }

    pub fn with_channel(mut self, channel: usize, noise: ChannelNoise) -> Self {
        self.per_channel.insert(channel, noise);
        self
    }

    pub fn for_channel(&self, channel: usize) -> ChannelNoise {
        self.per_channel.get(&channel).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFidelity {
    pub channel: usize,
    pub noise: ChannelNoise,
    /// Fidelity of the generating state.
    pub true_fidelity: f64,
    pub counts: CountsRecord,
    pub posterior: PosteriorSummary,
}

/// SplitMix64 finalizer, used to give each channel its own stream.
fn derive_seed(seed: u64, channel: usize) -> u64 {
    let mut z = seed.wrapping_add((channel as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Synthesizes counts for each channel from the noise model and estimates
/// its fidelity. Channels run in parallel; each one is deterministic from
/// `seed` and its index, so results do not depend on thread scheduling.
pub fn link_fidelity_scan(
    network: &Network,
    channels: &[usize],
    noise: &NoiseModel,
    config: &SamplerConfig,
    seed: u64,
) -> Result<Vec<ChannelFidelity>> {
    config.validate()?;
    for &c in channels {
        network.channel(c)?;
        let n = noise.for_channel(c);
        if !(0.0..=1.0).contains(&n.p) {
            return Err(Error::Domain(format!("channel {c}: mixing parameter {} outside [0, 1]", n.p)));
        }
    }
    channels
        .par_iter()
        .map(|&channel| {
            let n = noise.for_channel(channel);
            let state = n.state()?;
            let s = derive_seed(seed, channel);
            let counts = synth_counts(&state, noise.pairs_per_basis, s)?;
            let posterior = bayes_estimate(&counts, config, s.rotate_left(17))?;
            Ok(ChannelFidelity {
                channel,
                noise: n,
                true_fidelity: if n.phase == default_phase() {
                    werner_fidelity(n.p)
                } else {
                    state.singlet_fidelity()
                },
                counts,
                posterior,
            })
        })
        .collect()
}

/// `channel,p,phase,true_fidelity,fidelity_mean,fidelity_std,ess,converged`
pub fn format_scan(rows: &[ChannelFidelity]) -> String {
    let mut out = String::from("channel,p,phase,true_fidelity,fidelity_mean,fidelity_std,ess,converged\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.0},{}\n",
            r.channel,
            r.noise.p,
            r.noise.phase,
            r.true_fidelity,
            r.posterior.fidelity_mean,
            r.posterior.fidelity_std,
            r.posterior.effective_sample_size,
            r.posterior.converged
        ));
    }
    out
}
