//! Channel-to-link assignment under fixed-grid and full-flex policies.

mod fixed;
mod flex;
mod objective;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratemodel::{predict_report, Allocation, Link, Network, RateReport};

pub use fixed::{alphabetical_fixed, enumerate_fixed, fixed_groups, ChannelGroup, MAX_ENUMERATED_GROUPS};
pub use flex::{optimize_flex, FlexOptions, DEFAULT_DROP_FRACTION};
pub use objective::{LinkTarget, Objective};

/// How the spectrum may be partitioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridPolicy {
    /// Channels merged into contiguous groups of `group_size`, one per link.
    FixedGrid { group_size: usize },
    /// Any channel to any link; channels may idle and links may be dropped.
    FullFlex,
}

/// An allocation together with its predicted performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub allocation: Allocation,
    pub active_links: BTreeSet<Link>,
    pub dropped_links: Vec<Link>,
    pub objective: Objective,
    /// `None` when the objective is undefined for this allocation.
    pub objective_value: Option<f64>,
    pub predicted: RateReport,
    pub diagnostics: Vec<String>,
}

impl AllocationPlan {
    pub(crate) fn build(
        network: &Network,
        allocation: Allocation,
        active_links: BTreeSet<Link>,
        dropped_links: Vec<Link>,
        objective: Objective,
        mut diagnostics: Vec<String>,
    ) -> Result<Self> {
        let predicted = predict_report(network, &allocation)?;
        let objective_value = recompute_objective(&objective, &predicted, &active_links);
        if objective_value.is_none() {
            diagnostics.push(format!(
                "{} objective is undefined: some active link has no rate",
                objective.name()
            ));
        }
        Ok(Self {
            allocation,
            active_links,
            dropped_links,
            objective,
            objective_value,
            predicted,
            diagnostics,
        })
    }

    /// Re-derives the objective from the predicted report.
    pub fn recompute_objective(&self) -> Option<f64> {
        recompute_objective(&self.objective, &self.predicted, &self.active_links)
    }

    /// Dropped links hold no channels and every assignment targets an
    /// active link.
    pub fn check_invariants(&self) -> Result<()> {
        for (channel, link) in self.allocation.iter() {
            if !self.active_links.contains(link) {
                return Err(Error::Constraint(format!(
                    "channel {channel} assigned to inactive link {link}"
                )));
            }
        }
        for link in &self.dropped_links {
            if self.allocation.channels_of(link).next().is_some() {
                return Err(Error::Constraint(format!("dropped link {link} holds channels")));
            }
        }
        Ok(())
    }

    pub fn balance_score(&self) -> Result<f64> {
        balance_score(&self.predicted, &self.active_links)
    }
}

fn recompute_objective(objective: &Objective, report: &RateReport, active: &BTreeSet<Link>) -> Option<f64> {
    let links: Vec<Link> = active.iter().cloned().collect();
    let rates: Vec<f64> = links.iter().map(|l| report.coincidence(l)).collect();
    objective.evaluate(&links, &rates)
}

/// Max/min coincidence rate over `active_links`.
pub fn balance_score(report: &RateReport, active_links: &BTreeSet<Link>) -> Result<f64> {
    if active_links.is_empty() {
        return Err(Error::Undefined("balance score needs at least one active link".into()));
    }
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for link in active_links {
        let rate = report.coincidence(link);
        if rate <= 0.0 {
            return Err(Error::Undefined(format!("active link {link} has zero rate")));
        }
        min = min.min(rate);
        max = max.max(rate);
    }
    Ok(max / min)
}

/// Coincidence rate `link` would reach with the `best` highest-flux channels
/// among `channels` (all of them when `best` is `None`).
pub fn feasibility(network: &Network, link: &Link, channels: &[usize], best: Option<usize>) -> Result<f64> {
    let gain = network.link_gain(link)?;
    let mut fluxes = channels
        .iter()
        .map(|&c| network.channel_flux(c))
        .collect::<Result<Vec<f64>>>()?;
    fluxes.sort_by(|a, b| b.total_cmp(a));
    let k = best.unwrap_or(fluxes.len()).min(fluxes.len());
    Ok(gain * fluxes[..k].iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratemodel::{BalanceMetrics, LinkRates};
    use std::collections::BTreeMap;

    fn report(rates: &[(Link, f64)]) -> RateReport {
        RateReport {
            singles: BTreeMap::new(),
            links: rates
                .iter()
                .map(|(l, r)| LinkRates {
                    link: l.clone(),
                    channels: vec![],
                    coincidence: *r,
                    accidental: 0.0,
                    car: None,
                })
                .collect(),
            balance: BalanceMetrics {
                active_links: 0,
                min_rate: 0.0,
                max_rate: 0.0,
                total_rate: 0.0,
                balance_score: None,
            },
        }
    }

    #[test]
    fn balance_examples() {
        let ab = Link::new("A", "B").unwrap();
        let ac = Link::new("A", "C").unwrap();
        let bc = Link::new("B", "C").unwrap();
        let all: BTreeSet<Link> = [ab.clone(), ac.clone(), bc.clone()].into_iter().collect();
        let equal = report(&[(ab.clone(), 5.0), (ac.clone(), 5.0), (bc.clone(), 5.0)]);
        assert_eq!(balance_score(&equal, &all).unwrap(), 1.0);
        let spread = report(&[(ab.clone(), 100.0), (ac.clone(), 50.0), (bc.clone(), 50.0)]);
        assert_eq!(balance_score(&spread, &all).unwrap(), 2.0);
        let dead = report(&[(ab.clone(), 100.0), (ac.clone(), 0.0), (bc.clone(), 50.0)]);
        assert!(matches!(balance_score(&dead, &all), Err(Error::Undefined(_))));
        // an inactive zero-rate link does not matter
        let active: BTreeSet<Link> = [ab, bc].into_iter().collect();
        assert_eq!(balance_score(&dead, &active).unwrap(), 2.0);
        assert!(balance_score(&dead, &BTreeSet::new()).is_err());
    }
}
