use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::allocator::objective::{compare_keys, Scorer};
use crate::allocator::{AllocationPlan, Objective};
use crate::error::{Error, Result};
use crate::ratemodel::{Allocation, Link, Network};

/// Factorial enumeration is limited to this many groups (8! = 40 320).
pub const MAX_ENUMERATED_GROUPS: usize = 8;

/// Contiguous channels that move together on a fixed grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelGroup {
    pub channels: Vec<usize>,
}

/// Merges the network's channels into contiguous groups of `group_size`,
/// counted from the center out.
pub fn fixed_groups(network: &Network, group_size: usize) -> Result<Vec<ChannelGroup>> {
    if group_size == 0 {
        return Err(Error::Constraint("group size must be at least 1".into()));
    }
    let mut indices: Vec<usize> = network.channels.iter().map(|c| c.index).collect();
    indices.sort_unstable();
    if indices.len() % group_size != 0 {
        return Err(Error::Constraint(format!(
            "{} channels do not split into groups of {group_size}",
            indices.len()
        )));
    }
    Ok(indices
        .chunks(group_size)
        .map(|c| ChannelGroup { channels: c.to_vec() })
        .collect())
}

fn group_fluxes(network: &Network, groups: &[ChannelGroup]) -> Result<Vec<f64>> {
    groups
        .iter()
        .map(|g| {
            g.channels
                .iter()
                .map(|&c| network.channel_flux(c))
                .sum::<Result<f64>>()
        })
        .collect()
}

fn check_counts(groups: &[ChannelGroup], links: &[Link]) -> Result<()> {
    if groups.len() != links.len() {
        return Err(Error::Constraint(format!(
            "fixed grid needs one group per link: {} groups for {} links",
            groups.len(),
            links.len()
        )));
    }
    Ok(())
}

fn allocation_for(groups: &[ChannelGroup], links: &[Link], perm: &[usize]) -> Allocation {
    groups
        .iter()
        .zip(perm)
        .flat_map(|(g, &l)| g.channels.iter().map(move |&c| (c, links[l].clone())))
        .collect()
}

/// Group `i` to the `i`-th link in alphabetical order.
pub fn alphabetical_fixed(network: &Network, groups: &[ChannelGroup]) -> Result<AllocationPlan> {
    let links = network.links();
    check_counts(groups, &links)?;
    let perm: Vec<usize> = (0..links.len()).collect();
    AllocationPlan::build(
        network,
        allocation_for(groups, &links, &perm),
        links.iter().cloned().collect(),
        Vec::new(),
        Objective::Equalize,
        vec!["alphabetical assignment, groups counted from the center out".into()],
    )
}

/// Next permutation in lexicographic order; false after the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Best bijection for `gains[link] · fluxes[group]` and the number tried.
pub(crate) fn best_bijection(scorer: &Scorer, gains: &[f64], fluxes: &[f64]) -> (Vec<usize>, usize) {
    let n = fluxes.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rates = vec![0.0; n];
    let mut best: Option<(Vec<f64>, Vec<usize>)> = None;
    let mut evaluated = 0;
    loop {
        for (g, &l) in perm.iter().enumerate() {
            rates[l] = gains[l] * fluxes[g];
        }
        evaluated += 1;
        let key = scorer.key(&rates);
        if best
            .as_ref()
            .is_none_or(|(k, _)| compare_keys(&key, k) == Ordering::Less)
        {
            best = Some((key, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    (best.map(|(_, p)| p).unwrap_or_default(), evaluated)
}

/// Exhaustively assigns groups to links, one each, and keeps the best
/// assignment; ties go to the lexicographically smallest.
pub fn enumerate_fixed(network: &Network, groups: &[ChannelGroup], objective: &Objective) -> Result<AllocationPlan> {
    objective.validate()?;
    let links = network.links();
    check_counts(groups, &links)?;
    if groups.len() > MAX_ENUMERATED_GROUPS {
        return Err(Error::Size(format!(
            "{} groups exceed the enumeration bound of {MAX_ENUMERATED_GROUPS}; use optimize_flex",
            groups.len()
        )));
    }
    let fluxes = group_fluxes(network, groups)?;
    let gains = links
        .iter()
        .map(|l| network.link_gain(l))
        .collect::<Result<Vec<f64>>>()?;
    let scorer = Scorer::new(objective, &links);
    let (perm, evaluated) = best_bijection(&scorer, &gains, &fluxes);
    let mut rates = vec![0.0; links.len()];
    for (g, &l) in perm.iter().enumerate() {
        rates[l] = gains[l] * fluxes[g];
    }
    let mut diagnostics = vec![format!("evaluated {evaluated} assignments")];
    diagnostics.extend(scorer.describe_shortfall(&rates, &links));
    AllocationPlan::build(
        network,
        allocation_for(groups, &links, &perm),
        links.iter().cloned().collect::<BTreeSet<_>>(),
        Vec::new(),
        objective.clone(),
        diagnostics,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardware::{Detector, WssModel};
    use crate::ratemodel::{GatingMode, User};
    use crate::spectrum::{carve_grid, BiphotonSpectrum};

    #[test]
    fn permutations_in_order() {
        let mut p = vec![0, 1, 2];
        let mut seen = vec![p.clone()];
        while next_permutation(&mut p) {
            seen.push(p.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[1], vec![0, 2, 1]);
        assert_eq!(seen[5], vec![2, 1, 0]);
        let mut single = vec![0];
        assert!(!next_permutation(&mut single));
    }

    #[test]
    fn six_groups_enumerate_720() {
        let scorer = Scorer::new(&Objective::Equalize, &[]);
        let gains = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let fluxes = [6.0, 5.0, 4.0, 3.0, 2.0, 1.0];
        let (perm, n) = best_bijection(&scorer, &gains, &fluxes);
        assert_eq!(n, 720);
        // flux·gain = 6 for every link when the brightest group goes to the weakest link
        assert_eq!(perm, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn ties_take_smallest_assignment() {
        let scorer = Scorer::new(&Objective::Equalize, &[]);
        let (perm, _) = best_bijection(&scorer, &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(perm, vec![0, 1]);
    }

    fn two_users(eff_a: f64, eff_b: f64) -> Network {
        let spectrum = BiphotonSpectrum::new(320.0, 12.0, 1e6).unwrap();
        Network {
            channels: carve_grid(&spectrum, 24.0, 2).unwrap(),
            spectrum,
            wss: WssModel::testbed(),
            users: vec![
                User::new("Alice", Detector::snspd(eff_a)),
                User::new("Bob", Detector::snspd(eff_b)),
            ],
            gating: GatingMode::Synchronized,
            coincidence_window_ps: 1024.0,
        }
    }

    #[test]
    fn single_link_single_group() {
        let net = two_users(0.8, 0.8);
        let groups = fixed_groups(&net, 2).unwrap();
        assert_eq!(groups.len(), 1);
        let plan = alphabetical_fixed(&net, &groups).unwrap();
        let link = Link::new("Alice", "Bob").unwrap();
        assert_eq!(plan.allocation.channels_of(&link).collect::<Vec<_>>(), vec![1, 2]);
        plan.check_invariants().unwrap();
    }

    #[test]
    fn mismatched_groups_rejected() {
        let net = two_users(0.8, 0.8);
        let groups = fixed_groups(&net, 1).unwrap();
        assert!(matches!(alphabetical_fixed(&net, &groups), Err(Error::Constraint(_))));
        assert!(matches!(
            enumerate_fixed(&net, &groups, &Objective::Equalize),
            Err(Error::Constraint(_))
        ));
        assert!(fixed_groups(&net, 3).is_err());
    }
}
