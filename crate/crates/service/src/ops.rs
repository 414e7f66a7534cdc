//! Operations shared by the command line and the API, so both return the
//! same numbers for the same scenario.

use std::ops::RangeInclusive;

use flexnet_core::allocator::{
    alphabetical_fixed, enumerate_fixed, fixed_groups, optimize_flex, AllocationPlan, Objective,
};
use flexnet_core::hardware::{crossover_users, loss_table, LossRow};
use flexnet_core::ratemodel::{count_coincidences, predict_report, simulate_timetags, Allocation, Link, RateReport};
use flexnet_core::tomography::{link_fidelity_scan, ChannelFidelity, SamplerConfig};
use flexnet_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::scenario::{PlanPolicy, Scenario};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OpError {
    /// The request does not fit the scenario.
    #[error("{0}")]
    Invalid(String),
    /// No plan satisfies the policy's hard constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl From<CoreError> for OpError {
    fn from(e: CoreError) -> Self {
        OpError::Invalid(e.to_string())
    }
}

fn plan_error(e: CoreError) -> OpError {
    match e {
        CoreError::Constraint(_) | CoreError::Size(_) => OpError::Infeasible(e.to_string()),
        other => other.into(),
    }
}

/// Overrides of the scenario's `[plan]` section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanRequest {
    pub policy: Option<PlanPolicy>,
    pub objective: Option<Objective>,
    pub allow_drop: Option<bool>,
    pub drop_fraction: Option<f64>,
    pub group_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanOutcome {
    pub policy: PlanPolicy,
    /// False when the objective is undefined or a target is out of reach.
    pub feasible: bool,
    pub balance_score: Option<f64>,
    pub plan: AllocationPlan,
}

pub fn plan(scenario: &Scenario, request: &PlanRequest) -> Result<PlanOutcome, OpError> {
    let network = scenario.network()?;
    let policy = request.policy.unwrap_or(scenario.plan.policy);
    let objective = request.objective.clone().unwrap_or_else(|| scenario.plan.objective.clone());
    let mut options = scenario.flex_options();
    if let Some(d) = request.allow_drop {
        options.allow_drop = d;
    }
    if let Some(f) = request.drop_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(OpError::Invalid(format!("drop_fraction must lie in [0, 1], got {f}")));
        }
        options.drop_fraction = f;
    }
    let group_size = request.group_size.unwrap_or(scenario.plan.group_size);
    let plan = match policy {
        PlanPolicy::Alphabetical => {
            let groups = fixed_groups(&network, group_size).map_err(plan_error)?;
            alphabetical_fixed(&network, &groups).map_err(plan_error)?
        }
        PlanPolicy::FixedGrid => {
            let groups = fixed_groups(&network, group_size).map_err(plan_error)?;
            enumerate_fixed(&network, &groups, &objective).map_err(plan_error)?
        }
        PlanPolicy::FullFlex => {
            let channels: Vec<usize> = network.channels.iter().map(|c| c.index).collect();
            optimize_flex(&network, &channels, &objective, &options).map_err(plan_error)?
        }
    };
    let feasible = plan.objective_value.is_some()
        && !plan.diagnostics.iter().any(|d| d.starts_with("targets unreachable"));
    Ok(PlanOutcome {
        policy,
        feasible,
        balance_score: plan.balance_score().ok(),
        plan,
    })
}

pub fn predict(scenario: &Scenario, allocation: &Allocation) -> Result<RateReport, OpError> {
    Ok(predict_report(&scenario.network()?, allocation)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinglesResult {
    pub user: String,
    pub counts: u64,
    pub rate: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkResult {
    pub link: Link,
    pub delay_ps: i64,
    pub peak_count: u64,
    pub rate: f64,
    /// True plus accidental coincidences expected in the peak bin.
    pub predicted: f64,
    pub histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub seed: u64,
    pub duration_s: f64,
    pub window_ps: f64,
    pub singles: Vec<SinglesResult>,
    pub links: Vec<LinkResult>,
}

/// Monte Carlo run of `allocation`, counted with the scenario's offsets
/// and window.
pub fn simulate(
    scenario: &Scenario,
    allocation: &Allocation,
    seed: u64,
    duration_s: f64,
) -> Result<SimulationResult, OpError> {
    let network = scenario.network()?;
    let report = predict_report(&network, allocation)?;
    let tags = simulate_timetags(&network, allocation, duration_s, seed)?;
    let window = scenario.rates.window_ps;
    let counted = count_coincidences(&tags, window, &scenario.offsets(), scenario.rates.histogram_span_ps)?;
    let singles = tags
        .streams
        .iter()
        .map(|s| SinglesResult {
            user: s.user.clone(),
            counts: s.times.len() as u64,
            rate: s.times.len() as f64 / duration_s,
            predicted: report.singles[&s.user],
        })
        .collect();
    let links = counted
        .links
        .into_iter()
        .map(|h| {
            let expected = report.link(&h.link).map_or(0.0, |l| l.coincidence + l.accidental);
            LinkResult {
                delay_ps: h.delay_ps,
                peak_count: h.peak_count,
                rate: h.rate,
                predicted: expected,
                histogram: h.bins,
                link: h.link,
            }
        })
        .collect();
    Ok(SimulationResult {
        seed,
        duration_s,
        window_ps: window,
        singles,
        links,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossComparison {
    pub rows: Vec<LossRow>,
    /// Smallest user count at which the worst DWDM path loses more than
    /// the switch.
    pub crossover_users: usize,
}

pub fn compare_loss(scenario: &Scenario, users: RangeInclusive<usize>) -> Result<LossComparison, OpError> {
    Ok(LossComparison {
        rows: loss_table(&scenario.wss, &scenario.dwdm, users)?,
        crossover_users: crossover_users(&scenario.wss, &scenario.dwdm)?,
    })
}

/// Parses `a..b` (inclusive) or a single count.
pub fn parse_user_range(text: &str) -> Result<RangeInclusive<usize>, OpError> {
    let bad = || OpError::Invalid(format!("expected a user range like 2..16, got {text:?}"));
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (text.trim(), text.trim()),
    };
    let lo: usize = lo.parse().map_err(|_| bad())?;
    let hi: usize = hi.parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanRequest {
    /// Channels to scan; every channel when absent.
    pub channels: Option<Vec<usize>>,
    /// Replaces the scenario's sampler settings.
    pub sampler: Option<SamplerConfig>,
}

pub fn fidelity_scan(scenario: &Scenario, request: &ScanRequest, seed: u64) -> Result<Vec<ChannelFidelity>, OpError> {
    let network = scenario.network()?;
    let channels = match &request.channels {
        Some(c) if c.is_empty() => return Err(OpError::Invalid("channel list is empty".into())),
        Some(c) => c.clone(),
        None => network.channels.iter().map(|c| c.index).collect(),
    };
    let sampler = request.sampler.as_ref().unwrap_or(&scenario.tomography.sampler);
    Ok(link_fidelity_scan(&network, &channels, &scenario.noise_model(), sampler, seed)?)
}

/// Per-link singles and rates in a fixed-width text table.
pub fn format_report(report: &RateReport) -> String {
    let mut out = String::from("user        singles/s\n");
    for (user, rate) in &report.singles {
        out.push_str(&format!("{user:<10} {rate:>10.1}\n"));
    }
    out.push_str("\nlink              channels          coinc/s     acc/s        CAR\n");
    for l in &report.links {
        let channels = l.channels.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let car = l.car.map_or("-".to_string(), |c| format!("{c:.1}"));
        out.push_str(&format!(
            "{:<17} {:<14} {:>10.2} {:>9.3} {:>10}\n",
            l.link.to_string(),
            if channels.is_empty() { "-".into() } else { channels },
            l.coincidence,
            l.accidental,
            car
        ));
    }
    match report.balance.balance_score {
        Some(b) => out.push_str(&format!("\nbalance score {b:.3} over {} active links\n", report.balance.active_links)),
        None => out.push_str(&format!("\nbalance score undefined ({} active links)\n", report.balance.active_links)),
    }
    out
}

pub fn format_simulation(result: &SimulationResult) -> String {
    let mut out = format!("seed {} over {} s\n\nuser          counts     rate/s  predicted/s\n", result.seed, result.duration_s);
    for s in &result.singles {
        out.push_str(&format!("{:<10} {:>10} {:>10.1} {:>12.1}\n", s.user, s.counts, s.rate, s.predicted));
    }
    out.push_str("\nlink              delay/ns   peak     rate/s  predicted/s\n");
    for l in &result.links {
        out.push_str(&format!(
            "{:<17} {:>8.1} {:>6} {:>10.2} {:>12.2}\n",
            l.link.to_string(),
            l.delay_ps as f64 / 1000.0,
            l.peak_count,
            l.rate,
            l.predicted
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::paper_default;

    #[test]
    fn user_ranges() {
        assert_eq!(parse_user_range("2..16").unwrap(), 2..=16);
        assert_eq!(parse_user_range("2..=16").unwrap(), 2..=16);
        assert_eq!(parse_user_range("4").unwrap(), 4..=4);
        assert!(parse_user_range("9..3").is_err());
        assert!(parse_user_range("a..b").is_err());
    }

    #[test]
    fn loss_comparison_on_default() {
        let table = compare_loss(&paper_default(), 2..=16).unwrap();
        assert_eq!(table.rows.len(), 15);
        assert!((table.rows.last().unwrap().dwdm_worst - 60.6).abs() < 1e-9);
        assert_eq!(table.crossover_users, 5);
    }

    #[test]
    fn empty_allocation_predicts_zero_rates() {
        let report = predict(&paper_default(), &Allocation::new()).unwrap();
        assert!(report.links.iter().all(|l| l.coincidence == 0.0));
        assert_eq!(report.balance.active_links, 0);
    }

    #[test]
    fn fixed_grid_that_cannot_split_is_infeasible() {
        let request = PlanRequest {
            policy: Some(PlanPolicy::FixedGrid),
            group_size: Some(5),
            ..PlanRequest::default()
        };
        assert!(matches!(plan(&paper_default(), &request), Err(OpError::Infeasible(_))));
    }

    #[test]
    fn unknown_scan_channel_is_invalid() {
        let request = ScanRequest {
            channels: Some(vec![40]),
            sampler: None,
        };
        assert!(matches!(
            fidelity_scan(&paper_default(), &request, 1),
            Err(OpError::Invalid(_))
        ));
    }
}
