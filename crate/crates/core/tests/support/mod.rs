//! Shared fixtures and brute-force oracles for integration tests.
#![allow(dead_code)]

use flexnet_core::hardware::{Detector, WssModel};
use flexnet_core::ratemodel::{GatingMode, Link, Network, User};
use flexnet_core::spectrum::{carve_grid, BiphotonSpectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NAMES: [&str; 4] = ["Alice", "Bob", "Charlie", "Dave"];

/// Four users with the lab's detector mix on twelve 24 GHz channels.
pub fn lab_network() -> Network {
    let spectrum = BiphotonSpectrum::new(320.0, 12.0, 1.7e6).unwrap();
    Network {
        channels: carve_grid(&spectrum, 24.0, 12).unwrap(),
        spectrum,
        wss: WssModel::testbed(),
        users: vec![
            User::new("Alice", Detector::snspd(0.85)),
            User::new("Bob", Detector::snspd(0.85)),
            User::new("Charlie", Detector::gated_apd(0.2)),
            User::new("Dave", Detector::gated_apd(0.1)),
        ],
        gating: GatingMode::Synchronized,
        coincidence_window_ps: 1024.0,
    }
}

pub struct Instance {
    pub network: Network,
    pub links: Vec<Link>,
    pub channels: Vec<usize>,
}

/// Random network with up to `max_channels` channels and a random subset of
/// at most `max_links` links.
pub fn random_instance(seed: u64, max_channels: usize, max_links: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_channels = rng.random_range(1..=max_channels);
    let spectrum = BiphotonSpectrum::new(
        rng.random_range(80.0..600.0),
        rng.random_range(0.0..15.0),
        rng.random_range(1e4..1e7),
    )
    .unwrap();
    let width = rng.random_range(5.0..(250.0 / n_channels as f64).max(6.0));
    let users: Vec<User> = NAMES
        .iter()
        .map(|name| {
            let mut d = if rng.random_bool(0.5) {
                Detector::snspd(rng.random_range(0.05..0.95))
            } else {
                Detector::gated_apd(rng.random_range(0.05..0.5))
            };
            d.duty_cycle = rng.random_range(0.05..=1.0);
            let mut u = User::new(*name, d);
            u.path_loss = rng.random_range(0.0..8.0);
            u
        })
        .collect();
    let network = Network {
        channels: carve_grid(&spectrum, width, n_channels).unwrap(),
        spectrum,
        wss: WssModel::testbed(),
        users,
        gating: if rng.random_bool(0.5) {
            GatingMode::Synchronized
        } else {
            GatingMode::Independent
        },
        coincidence_window_ps: 1024.0,
    };
    let mut all = network.links();
    let n_links = rng.random_range(1..=max_links.min(all.len()));
    while all.len() > n_links {
        let i = rng.random_range(0..all.len());
        all.remove(i);
    }
    Instance {
        channels: (1..=n_channels).collect(),
        links: all,
        network,
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Goal {
    /// Minimize max/min over links, all links must carry a positive rate.
    Ratio,
    /// Maximize the minimum rate.
    Floor,
}

impl Goal {
    pub fn value(self, rates: &[f64]) -> Option<f64> {
        let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let max = rates.iter().copied().fold(0.0, f64::max);
        match self {
            Goal::Ratio => (min > 0.0).then(|| max / min),
            Goal::Floor => Some(min),
        }
    }

    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Goal::Ratio => a < b,
            Goal::Floor => a > b,
        }
    }
}

fn keep_best(goal: Goal, best: &mut Option<f64>, rates: &[f64]) {
    if let Some(v) = goal.value(rates) {
        if best.is_none_or(|b| goal.better(v, b)) {
            *best = Some(v);
        }
    }
}

/// Best objective value over every map channel → link-or-idle.
pub fn brute_force_partition(goal: Goal, gains: &[f64], fluxes: &[f64]) -> Option<f64> {
    let options = gains.len() + 1;
    let total = options.pow(fluxes.len() as u32);
    let mut best = None;
    let mut rates = vec![0.0; gains.len()];
    for code in 0..total {
        rates.iter_mut().for_each(|r| *r = 0.0);
        let mut rest = code;
        for &f in fluxes {
            let slot = rest % options;
            rest /= options;
            if slot > 0 {
                rates[slot - 1] += f;
            }
        }
        for (r, g) in rates.iter_mut().zip(gains) {
            *r *= g;
        }
        keep_best(goal, &mut best, &rates);
    }
    best
}

/// Best objective value over every bijection group → link.
pub fn brute_force_bijection(goal: Goal, gains: &[f64], fluxes: &[f64]) -> Option<f64> {
    fn walk(goal: Goal, g: usize, used: &mut Vec<bool>, gains: &[f64], fluxes: &[f64], rates: &mut Vec<f64>, best: &mut Option<f64>) {
        if g == fluxes.len() {
            keep_best(goal, best, rates);
            return;
        }
        for l in 0..gains.len() {
            if !used[l] {
                used[l] = true;
                rates[l] = gains[l] * fluxes[g];
                walk(goal, g + 1, used, gains, fluxes, rates, best);
                used[l] = false;
            }
        }
    }
    let mut best = None;
    walk(goal, 0, &mut vec![false; gains.len()], gains, fluxes, &mut vec![0.0; gains.len()], &mut best);
    best
}

pub fn same_value(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-300),
        _ => false,
    }
}
