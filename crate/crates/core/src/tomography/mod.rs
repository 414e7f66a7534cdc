//! Two-basis polarization tomography with Bayesian mean estimation.

mod counts;
mod sampler;
mod scan;
mod state;

pub use counts::{log_likelihood, log_likelihood_from_probabilities, synth_counts, visibility, CountsRecord, PROBABILITY_FLOOR};
pub use sampler::{
    bayes_estimate, effective_sample_size, posterior_samples, prior_samples, PosteriorSummary, SamplerConfig,
};
pub use scan::{format_scan, link_fidelity_scan, ChannelFidelity, ChannelNoise, NoiseModel};
pub use state::{outcome_probabilities, phased_pair_vector, singlet_vector, werner_fidelity, Basis, CVector4, TwoQubitState};
