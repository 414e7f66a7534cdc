use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomography::counts::{log_likelihood_from_probabilities, CountsRecord};
use crate::tomography::state::{singlet_vector, Basis, CVector4, TwoQubitState};

/// Markov-chain settings for [`bayes_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub burn_in: usize,
    /// Retained samples after thinning.
    pub samples: usize,
    pub thin: usize,
    /// Initial mixing weight of the fresh Gaussian draw in each proposal.
    pub initial_step: f64,
    /// Columns of the 4×K Gaussian factor.
    pub ancilla_dim: usize,
    /// Step adaptation happens every this many burn-in iterations.
    pub adapt_interval: usize,
    /// Below this effective sample size the run is flagged.
    pub min_ess: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            burn_in: 20_000,
            samples: 4_000,
            thin: 50,
            initial_step: 0.1,
            ancilla_dim: 16,
            adapt_interval: 500,
            min_ess: 200.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::Config("sampler needs at least 2 retained samples".into()));
        }
        if self.thin == 0 || self.ancilla_dim == 0 || self.adapt_interval == 0 {
            return Err(Error::Config("thin, ancilla_dim and adapt_interval must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return Err(Error::Config(format!("initial_step {} outside (0, 1]", self.initial_step)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
    pub sample_count: usize,
    pub effective_sample_size: f64,
    pub acceptance_rate: f64,
    pub final_step: f64,
    /// False when the effective sample size fell below the configured floor.
    pub converged: bool,
    pub diagnostics: Vec<String>,
}

/// 4×K complex factor, row-major.
#[derive(Clone)]
struct Factor {
    k: usize,
    entries: Vec<Complex64>,
}

impl Factor {
    fn gaussian(k: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            k,
            entries: (0..4 * k).map(|_| complex_normal(rng)).collect(),
        }
    }

    fn trace(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `‖G†ψ‖²`, which is `⟨ψ|GG†|ψ⟩`.
    fn weight(&self, psi: &CVector4) -> f64 {
        (0..self.k)
            .map(|j| {
                (0..4)
                    .map(|i| psi[i].conj() * self.entries[i * self.k + j])
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum()
    }

    fn state(&self) -> Result<TwoQubitState> {
        let mut rho = Matrix4::<Complex64>::zeros();
        for a in 0..4 {
            for b in 0..4 {
                rho[(a, b)] = (0..self.k)
                    .map(|j| self.entries[a * self.k + j] * self.entries[b * self.k + j].conj())
                    .sum();
            }
        }
        let t = self.trace();
        TwoQubitState::new(rho / Complex64::new(t, 0.0))
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

struct Model {
    projectors: [[CVector4; 4]; 2],
    singlet: CVector4,
    counts: CountsRecord,
}

impl Model {
    fn new(counts: &CountsRecord) -> Self {
        Self {
            projectors: [Basis::HV.projector_vectors(), Basis::DA.projector_vectors()],
            singlet: singlet_vector(),
            counts: *counts,
        }
    }

    fn log_likelihood(&self, g: &Factor) -> f64 {
        let t = g.trace();
        let mut probs = [[0.0; 4]; 2];
        for (row, vectors) in probs.iter_mut().zip(&self.projectors) {
            for (p, v) in row.iter_mut().zip(vectors) {
                *p = g.weight(v) / t;
            }
        }
        log_likelihood_from_probabilities(&probs, &self.counts)
    }

    fn fidelity(&self, g: &Factor) -> f64 {
        g.weight(&self.singlet) / g.trace()
    }
}

struct ChainStats {
    accepted: usize,
    proposed: usize,
    step: f64,
}

/// Runs the chain and calls `visit` on every retained factor.
///
/// Proposals are `√(1−β²)·G + β·ξ` with fresh Gaussian `ξ`. They leave the
/// Gaussian prior invariant, so acceptance depends on the likelihood ratio
/// alone. `β` is rescaled during burn-in toward 15–35 % acceptance and then
/// held fixed.
fn run_chain(
    counts: &CountsRecord,
    config: &SamplerConfig,
    seed: u64,
    mut visit: impl FnMut(&Model, &Factor) -> Result<()>,
) -> Result<ChainStats> {
    config.validate()?;
    let model = Model::new(counts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = Factor::gaussian(config.ancilla_dim, &mut rng);
    let mut current_ll = model.log_likelihood(&current);
    let mut step = config.initial_step;
    let mut window_accepted = 0usize;
    let mut stats = ChainStats {
        accepted: 0,
        proposed: 0,
        step,
    };
    let total = config.burn_in + config.samples * config.thin;
    let mut proposal = current.clone();
    for it in 0..total {
        let keep = (1.0 - step * step).sqrt();
        for (p, c) in proposal.entries.iter_mut().zip(&current.entries) {
            *p = c * keep + complex_normal(&mut rng) * step;
        }
        let ll = model.log_likelihood(&proposal);
        let u: f64 = rng.random();
        let accept = u.ln() < ll - current_ll;
        if accept {
            std::mem::swap(&mut current, &mut proposal);
            current_ll = ll;
        }
        if it < config.burn_in {
            window_accepted += accept as usize;
            if (it + 1) % config.adapt_interval == 0 {
                let rate = window_accepted as f64 / config.adapt_interval as f64;
                if rate > 0.35 {
                    step = (step * 1.2).min(1.0);
                } else if rate < 0.15 {
                    step *= 0.8;
                }
                window_accepted = 0;
            }
        } else {
            stats.proposed += 1;
            stats.accepted += accept as usize;
            if (it - config.burn_in + 1) % config.thin == 0 {
                visit(&model, &current)?;
            }
        }
    }
    stats.step = step;
    Ok(stats)
}

/// Posterior mean singlet fidelity under the Gaussian-factor prior
/// `ρ = GG†/tr(GG†)`, `G` a 4×K standard complex Gaussian matrix.
///
/// A small effective sample size is reported in the summary, not raised.
pub fn bayes_estimate(counts: &CountsRecord, config: &SamplerConfig, seed: u64) -> Result<PosteriorSummary> {
    let mut trace = Vec::with_capacity(config.samples);
    let stats = run_chain(counts, config, seed, |model, g| {
        trace.push(model.fidelity(g));
        Ok(())
    })?;
    let n = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / n;
    let var = trace.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let ess = effective_sample_size(&trace);
    let acceptance_rate = stats.accepted as f64 / stats.proposed.max(1) as f64;
    let converged = ess >= config.min_ess;
    let mut diagnostics = vec![format!(
        "acceptance {:.3} at step {:.4}, ESS {:.0} of {}",
        acceptance_rate,
        stats.step,
        ess,
        trace.len()
    )];
    if !converged {
        diagnostics.push(format!(
            "effective sample size {ess:.0} below {:.0}; chain may not have converged",
            config.min_ess
        ));
    }
    Ok(PosteriorSummary {
        fidelity_mean: mean.clamp(0.0, 1.0),
        fidelity_std: var.max(0.0).sqrt(),
        sample_count: trace.len(),
        effective_sample_size: ess,
        acceptance_rate,
        final_step: stats.step,
        converged,
        diagnostics,
    })
}

/// The retained states of the chain `bayes_estimate` would run.
pub fn posterior_samples(counts: &CountsRecord, config: &SamplerConfig, seed: u64) -> Result<Vec<TwoQubitState>> {
    let mut out = Vec::with_capacity(config.samples);
    run_chain(counts, config, seed, |_, g| {
        out.push(g.state()?);
        Ok(())
    })?;
    Ok(out)
}

/// Independent draws from the prior, for checking the zero-data limit.
pub fn prior_samples(ancilla_dim: usize, count: usize, seed: u64) -> Result<Vec<TwoQubitState>> {
    if ancilla_dim == 0 {
        return Err(Error::Config("ancilla_dim must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Factor::gaussian(ancilla_dim, &mut rng).state())
        .collect()
}

/// Geyer initial-positive-sequence estimate.
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let mean = chain.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = chain.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut sum = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    // Γ₀ includes ρ(0) = 1, so τ = 2·Σ Γ − 1.
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}
