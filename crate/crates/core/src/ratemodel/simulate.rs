use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratemodel::{Allocation, Network, User};

/// `1 / (2·√(2 ln 2))`
const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5;

/// Detection times of one receiver, in ps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserStream {
    pub user: String,
    pub times: Vec<u64>,
}

/// Simulated detections for every user of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimetagStream {
    pub duration_ps: u64,
    pub seed: u64,
    pub streams: Vec<UserStream>,
}

impl TimetagStream {
    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 * 1e-12
    }

    pub fn stream(&self, user: &str) -> Option<&UserStream> {
        self.streams.iter().find(|s| s.user == user)
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only fails for non-positive or non-finite means.
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

struct Jitter {
    normal: Option<Normal<f64>>,
}

impl Jitter {
    fn new(user: &User) -> Self {
        let sigma = user.detector.jitter_fwhm * FWHM_TO_SIGMA;
        Self {
            normal: (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma")),
        }
    }

    fn apply(&self, rng: &mut ChaCha8Rng, t: u64, duration: u64) -> u64 {
        match &self.normal {
            None => t,
            Some(n) => {
                let shifted = t as f64 + n.sample(rng);
                shifted.round().clamp(0.0, duration as f64) as u64
            }
        }
    }
}

/// Monte Carlo detection record for `allocation`.
///
/// Pairs of each assigned channel arrive as a homogeneous Poisson process.
/// Each photon reaches its detector with probability `η·T` and finds the gate
/// open with probability equal to the duty cycle; on synchronized links the
/// two gates open together. The four detection outcomes of a pair thin the
/// pair process into independent Poisson processes, so only detected photons
/// are generated. Dark counts are independent Poisson processes at
/// `dark_rate·duty`. Fully determined by `seed`.
pub fn simulate_timetags(
    network: &Network,
    allocation: &Allocation,
    duration_s: f64,
    seed: u64,
) -> Result<TimetagStream> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::Domain(format!("duration must be positive, got {duration_s}")));
    }
    allocation.validate(network)?;
    let duration_ps = (duration_s * 1e12).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let index_of = |name: &str| network.users.iter().position(|u| u.name == name);
    let jitters: Vec<Jitter> = network.users.iter().map(Jitter::new).collect();
    let mut times: Vec<Vec<u64>> = vec![Vec::new(); network.users.len()];

    for (channel, link) in allocation.iter() {
        let flux = network.channel_flux(channel)?;
        let (iu, iv) = match (index_of(link.first()), index_of(link.second())) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Config(format!("link {link} references an unknown user"))),
        };
        let (u, v) = (&network.users[iu], &network.users[iv]);
        let reach_u = u.detector.efficiency * network.transmission(u);
        let reach_v = v.detector.efficiency * network.transmission(v);
        let open_both = network
            .gating
            .joint_duty(u.detector.duty_cycle, v.detector.duty_cycle);
        let p_both = open_both * reach_u * reach_v;
        let p_u_only = u.detector.duty_cycle * reach_u - p_both;
        let p_v_only = v.detector.duty_cycle * reach_v - p_both;

        let both = poisson_count(&mut rng, flux * p_both * duration_s);
        for _ in 0..both {
            let t = rng.random_range(0..=duration_ps);
            times[iu].push(jitters[iu].apply(&mut rng, t, duration_ps));
            times[iv].push(jitters[iv].apply(&mut rng, t, duration_ps));
        }
        for (idx, p) in [(iu, p_u_only), (iv, p_v_only)] {
            let n = poisson_count(&mut rng, flux * p.max(0.0) * duration_s);
            for _ in 0..n {
                let t = rng.random_range(0..=duration_ps);
                times[idx].push(jitters[idx].apply(&mut rng, t, duration_ps));
            }
        }
    }

    for (idx, user) in network.users.iter().enumerate() {
        let mean = user.detector.dark_rate * user.detector.duty_cycle * duration_s;
        let n = poisson_count(&mut rng, mean);
        for _ in 0..n {
            times[idx].push(rng.random_range(0..=duration_ps));
        }
    }

    let streams = network
        .users
        .iter()
        .zip(times)
        .map(|(user, mut t)| {
            t.sort_unstable();
            UserStream {
                user: user.name.clone(),
                times: t,
            }
        })
        .collect();
    Ok(TimetagStream {
        duration_ps,
        seed,
        streams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardware::{Detector, WssModel};
    use crate::ratemodel::{singles_rate, GatingMode, Link, DEFAULT_WINDOW_PS};
    use crate::spectrum::{carve_grid, BiphotonSpectrum};

    fn network(efficiency: f64) -> Network {
        let spectrum = BiphotonSpectrum::new(320.0, 12.0, 2.0e5).unwrap();
        let mut a = Detector::snspd(efficiency);
        a.dark_rate = 50.0;
        let mut c = Detector::gated_apd(efficiency);
        c.dark_rate = 500.0;
        Network {
            channels: carve_grid(&spectrum, 24.0, 4).unwrap(),
            spectrum,
            wss: WssModel::testbed(),
            users: vec![User::new("Alice", a), User::new("Bob", a), User::new("Charlie", c)],
            gating: GatingMode::Synchronized,
            coincidence_window_ps: DEFAULT_WINDOW_PS,
        }
    }

    fn allocation() -> Allocation {
        [
            (1, Link::new("Alice", "Bob").unwrap()),
            (2, Link::new("Alice", "Charlie").unwrap()),
            (3, Link::new("Bob", "Charlie").unwrap()),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn fwhm_conversion() {
        assert!((FWHM_TO_SIGMA * 2.0 * (2.0 * 2f64.ln()).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blind_detectors_see_only_darks() {
        let net = network(0.0);
        let tags = simulate_timetags(&net, &allocation(), 1.0, 3).unwrap();
        // 50, 50 and 500·0.1 counts/s of darks
        let total: usize = tags.streams.iter().map(|s| s.times.len()).sum();
        assert!((80..=230).contains(&total), "{total}");
        let none = simulate_timetags(
            &Network {
                users: net
                    .users
                    .iter()
                    .map(|u| {
                        let mut u = u.clone();
                        u.detector.dark_rate = 0.0;
                        u
                    })
                    .collect(),
                ..net.clone()
            },
            &allocation(),
            1.0,
            3,
        )
        .unwrap();
        assert!(none.streams.iter().all(|s| s.times.is_empty()));
    }

    #[test]
    fn same_seed_same_stream() {
        let net = network(0.5);
        let a = simulate_timetags(&net, &allocation(), 0.1, 42).unwrap();
        let b = simulate_timetags(&net, &allocation(), 0.1, 42).unwrap();
        let c = simulate_timetags(&net, &allocation(), 0.1, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn streams_sorted_and_bounded() {
        let net = network(0.8);
        let tags = simulate_timetags(&net, &allocation(), 0.05, 1).unwrap();
        for s in &tags.streams {
            assert!(s.times.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.times.iter().all(|&t| t <= tags.duration_ps));
        }
    }

    #[test]
    fn singles_mean_matches_prediction() {
        let net = network(0.6);
        let alloc = allocation();
        let duration = 0.02;
        let seeds = 100u64;
        for user in ["Alice", "Charlie"] {
            let predicted = singles_rate(&net, user, &alloc).unwrap();
            let total: usize = (0..seeds)
                .map(|seed| {
                    simulate_timetags(&net, &alloc, duration, seed)
                        .unwrap()
                        .stream(user)
                        .unwrap()
                        .times
                        .len()
                })
                .sum();
            let expected = predicted * duration * seeds as f64;
            let sigma = expected.sqrt();
            assert!(
                (total as f64 - expected).abs() < 3.0 * sigma,
                "{user}: {total} vs {expected} ± {sigma}"
            );
        }
    }

    #[test]
    fn rejects_bad_duration() {
        assert!(simulate_timetags(&network(0.5), &allocation(), 0.0, 1).is_err());
    }
}
