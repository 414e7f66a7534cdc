mod support;

use flexnet_core::allocator::{enumerate_fixed, fixed_groups, optimize_flex, FlexOptions, Objective};
use flexnet_core::ratemodel::Network;
use rayon::prelude::*;
use support::{brute_force_bijection, brute_force_partition, random_instance, same_value, Goal};

const INSTANCES: u64 = 300;

fn objective(goal: Goal) -> Objective {
    match goal {
        Goal::Ratio => Objective::Equalize,
        Goal::Floor => Objective::MaxMin,
    }
}

/// Returns a description of every instance where the search missed the optimum.
fn flex_misses(goal: Goal) -> Vec<String> {
    (0..INSTANCES)
        .into_par_iter()
        .filter_map(|seed| {
            let inst = random_instance(seed, 10, 4);
            let net = &inst.network;
            let gains: Vec<f64> = inst.links.iter().map(|l| net.link_gain(l).unwrap()).collect();
            let fluxes: Vec<f64> = inst.channels.iter().map(|&c| net.channel_flux(c).unwrap()).collect();
            let oracle = brute_force_partition(goal, &gains, &fluxes);
            let options = FlexOptions {
                candidate_links: Some(inst.links.clone()),
                ..FlexOptions::default()
            };
            let plan = optimize_flex(net, &inst.channels, &objective(goal), &options).unwrap();
            plan.check_invariants().unwrap();
            (!same_value(plan.objective_value, oracle)).then(|| {
                format!(
                    "seed {seed}: {} channels, {} links, search {:?}, oracle {:?}",
                    fluxes.len(),
                    gains.len(),
                    plan.objective_value,
                    oracle
                )
            })
        })
        .collect()
}

#[test]
fn flex_equalize_matches_partition_oracle() {
    let misses = flex_misses(Goal::Ratio);
    assert!(misses.is_empty(), "{misses:#?}");
}

#[test]
fn flex_max_min_matches_partition_oracle() {
    let misses = flex_misses(Goal::Floor);
    assert!(misses.is_empty(), "{misses:#?}");
}

fn trimmed(mut net: Network, users: usize, group_size: usize) -> Network {
    net.users.truncate(users);
    let links = users * (users - 1) / 2;
    net.channels.truncate(links * group_size);
    net
}

#[test]
fn enumerate_fixed_matches_bijection_oracle() {
    let mut checked = 0;
    for seed in 0..INSTANCES {
        let base = random_instance(1000 + seed, 10, 4).network;
        let users = 2 + (seed % 3) as usize;
        let group_size = 1 + (seed % 2) as usize;
        let links = users * (users - 1) / 2;
        if base.channels.len() < links * group_size {
            continue;
        }
        let net = trimmed(base, users, group_size);
        let groups = fixed_groups(&net, group_size).unwrap();
        let gains: Vec<f64> = net.links().iter().map(|l| net.link_gain(l).unwrap()).collect();
        let fluxes: Vec<f64> = groups
            .iter()
            .map(|g| g.channels.iter().map(|&c| net.channel_flux(c).unwrap()).sum())
            .collect();
        for goal in [Goal::Ratio, Goal::Floor] {
            let plan = enumerate_fixed(&net, &groups, &objective(goal)).unwrap();
            plan.check_invariants().unwrap();
            let oracle = brute_force_bijection(goal, &gains, &fluxes);
            assert!(
                same_value(plan.objective_value, oracle),
                "seed {seed}: {:?} vs {oracle:?}",
                plan.objective_value
            );
            checked += 1;
        }
    }
    assert!(checked >= 100, "only {checked} instances were large enough");
}

#[test]
fn feasibility_of_the_weakest_link_on_the_lab_network() {
    use flexnet_core::allocator::feasibility;
    use flexnet_core::ratemodel::Link;

    let net = support::lab_network();
    let cd = Link::new("Charlie", "Dave").unwrap();
    let channels: Vec<usize> = (1..=12).collect();
    let seven = feasibility(&net, &cd, &channels, Some(7)).unwrap();
    let all = feasibility(&net, &cd, &channels, None).unwrap();
    // gain times the summed flux of channels 1 to 7, computed independently
    let gain = net.link_gain(&cd).unwrap();
    let oracle: f64 = (1..=7).map(|c| net.channel_flux(c).unwrap()).sum::<f64>() * gain;
    assert!((seven - oracle).abs() <= 1e-9 * oracle);
    assert!((seven - 318.16).abs() < 0.01, "{seven}");
    assert!(all > seven);

    // seven channels lift CD above the equalized floor but not to the max-min floor
    let options = FlexOptions::default().with_drop(true);
    let maxmin = optimize_flex(&net, &channels, &Objective::MaxMin, &options).unwrap();
    let floor = maxmin.objective_value.unwrap();
    assert!(seven < floor, "{seven} vs max-min floor {floor}");
    let equalized = optimize_flex(&net, &channels, &Objective::Equalize, &options).unwrap();
    let lowest = equalized
        .active_links
        .iter()
        .map(|l| equalized.predicted.coincidence(l))
        .fold(f64::INFINITY, f64::min);
    assert!(seven > lowest, "{seven} vs equalized floor {lowest}");
}
