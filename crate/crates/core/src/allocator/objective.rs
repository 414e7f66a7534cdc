use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratemodel::Link;

/// Target rate for one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTarget {
    pub link: Link,
    /// Coincidences per second.
    pub rate: f64,
}

/// Quality-of-service goal for an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Objective {
    /// Minimize max/min rate over active links.
    Equalize,
    /// Maximize the smallest active-link rate.
    MaxMin,
    /// Minimize the largest relative shortfall against per-link targets.
    WeightedTargets { targets: Vec<LinkTarget> },
    /// Maximize one link's rate while holding others above floors.
    Premium { link: Link, floors: Vec<LinkTarget> },
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        let targets = match self {
            Objective::WeightedTargets { targets } => targets,
            Objective::Premium { floors, .. } => floors,
            _ => return Ok(()),
        };
        for t in targets {
            if !(t.rate > 0.0 && t.rate.is_finite()) {
                return Err(Error::Domain(format!("target for {} must be positive", t.link)));
            }
        }
        Ok(())
    }

    /// True when a larger objective value is better.
    pub fn maximizes(&self) -> bool {
        matches!(self, Objective::MaxMin | Objective::Premium { .. })
    }

    /// True when the objective sets a target or floor on `link`, or
    /// singles it out for premium service.
    pub fn targets_link(&self, link: &Link) -> bool {
        match self {
            Objective::WeightedTargets { targets } => targets.iter().any(|t| &t.link == link),
            Objective::Premium { link: premium, floors } => {
                premium == link || floors.iter().any(|t| &t.link == link)
            }
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Equalize => "equalize",
            Objective::MaxMin => "max-min",
            Objective::WeightedTargets { .. } => "weighted-targets",
            Objective::Premium { .. } => "premium",
        }
    }

    /// Objective value for per-link `rates` of the active `links`; `None`
    /// when undefined (equalize with a zero-rate or no active link).
    pub fn evaluate(&self, links: &[Link], rates: &[f64]) -> Option<f64> {
        Scorer::new(self, links).value(rates)
    }
}

/// Objective bound to a fixed list of links, evaluated on rate vectors.
pub(crate) struct Scorer {
    kind: Kind,
}

enum Kind {
    Equalize,
    MaxMin,
    Weighted { targets: Vec<Option<f64>> },
    Premium { index: Option<usize>, floors: Vec<Option<f64>> },
}

fn lookup(links: &[Link], targets: &[LinkTarget]) -> Vec<Option<f64>> {
    links
        .iter()
        .map(|l| targets.iter().find(|t| &t.link == l).map(|t| t.rate))
        .collect()
}

impl Scorer {
    pub(crate) fn new(objective: &Objective, links: &[Link]) -> Self {
        let kind = match objective {
            Objective::Equalize => Kind::Equalize,
            Objective::MaxMin => Kind::MaxMin,
            Objective::WeightedTargets { targets } => Kind::Weighted {
                targets: lookup(links, targets),
            },
            Objective::Premium { link, floors } => Kind::Premium {
                index: links.iter().position(|l| l == link),
                floors: lookup(links, floors),
            },
        };
        Self { kind }
    }

    pub(crate) fn value(&self, rates: &[f64]) -> Option<f64> {
        match &self.kind {
            Kind::Equalize => {
                let (min, max) = min_max(rates)?;
                (min > 0.0).then(|| max / min)
            }
            Kind::MaxMin => min_max(rates).map(|(min, _)| min),
            Kind::Weighted { targets } => Some(
                shortfalls(rates, targets).fold(0.0, f64::max),
            ),
            Kind::Premium { index, .. } => Some(index.map_or(0.0, |i| rates[i])),
        }
    }

    /// Lexicographic key, smaller is better. The first component decides the
    /// objective; later ones break plateaus so local moves keep progressing.
    pub(crate) fn key(&self, rates: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Equalize => {
                let positive: Vec<f64> = rates.iter().copied().filter(|&r| r > 0.0).collect();
                let zeros = (rates.len() - positive.len()) as f64;
                let ratio = min_max(&positive).map_or(f64::INFINITY, |(lo, hi)| hi / lo);
                let mean = positive.iter().map(|r| r.ln()).sum::<f64>() / positive.len().max(1) as f64;
                let spread = positive.iter().map(|r| (r.ln() - mean).powi(2)).sum::<f64>();
                vec![zeros, ratio, spread]
            }
            Kind::MaxMin => {
                let mut sorted: Vec<f64> = rates.iter().map(|r| -r).collect();
                sorted.sort_by(|a, b| b.total_cmp(a));
                sorted
            }
            Kind::Weighted { targets } => {
                let worst = shortfalls(rates, targets).fold(0.0, f64::max);
                let total: f64 = shortfalls(rates, targets).sum();
                let headroom = rates
                    .iter()
                    .zip(targets)
                    .filter_map(|(r, t)| t.map(|t| r / t))
                    .fold(f64::INFINITY, f64::min);
                vec![worst, total, -headroom]
            }
            Kind::Premium { index, floors } => {
                let deficit: f64 = shortfalls(rates, floors).sum();
                vec![deficit, -index.map_or(0.0, |i| rates[i])]
            }
        }
    }

    /// Lower bound, as a key prefix, on the key of any completion where each
    /// link ends between `current` and `upper`. `open` channels remain.
    pub(crate) fn bound(&self, current: &[f64], upper: &[f64], open: usize) -> Vec<f64> {
        match &self.kind {
            Kind::Equalize => {
                let zeros = current.iter().filter(|&&r| r <= 0.0).count();
                let zeros_lb = zeros.saturating_sub(open) as f64;
                if zeros_lb > 0.0 {
                    return vec![zeros_lb];
                }
                let hi = current.iter().copied().fold(0.0, f64::max);
                let lo = upper.iter().copied().fold(f64::INFINITY, f64::min);
                let ratio = if lo > 0.0 { (hi / lo).max(1.0) } else { f64::INFINITY };
                vec![0.0, ratio]
            }
            Kind::MaxMin => vec![-upper.iter().copied().fold(f64::INFINITY, f64::min)],
            // nothing to aim for: every completion has the same key
            Kind::Weighted { targets } if targets.iter().all(Option::is_none) => {
                vec![0.0, 0.0, f64::NEG_INFINITY]
            }
            Kind::Weighted { targets } => vec![shortfalls(upper, targets).fold(0.0, f64::max)],
            Kind::Premium { index: None, floors } if floors.iter().all(Option::is_none) => vec![0.0, 0.0],
            Kind::Premium { index, floors } => {
                vec![shortfalls(upper, floors).sum(), -index.map_or(0.0, |i| upper[i])]
            }
        }
    }

    /// Rank of how urgently each link needs another channel; the smallest
    /// is served first during greedy seeding.
    pub(crate) fn need(&self, rates: &[f64], link: usize) -> f64 {
        match &self.kind {
            Kind::Equalize | Kind::MaxMin => rates[link],
            Kind::Weighted { targets } => targets[link].map_or(f64::INFINITY, |t| rates[link] / t),
            Kind::Premium { index, floors } => match floors[link] {
                Some(f) if rates[link] < f => rates[link] / f - 1.0,
                _ if Some(link) == *index => 0.0,
                _ => f64::INFINITY,
            },
        }
    }

    pub(crate) fn describe_shortfall(&self, rates: &[f64], links: &[Link]) -> Option<String> {
        match &self.kind {
            Kind::Weighted { targets } | Kind::Premium { floors: targets, .. } => {
                let unmet: Vec<String> = links
                    .iter()
                    .zip(rates.iter().zip(targets))
                    .filter_map(|(l, (r, t))| match t {
                        Some(t) if r < t => Some(format!("{l} at {r:.3} of {t:.3} /s")),
                        _ => None,
                    })
                    .collect();
                (!unmet.is_empty()).then(|| format!("targets unreachable: {}", unmet.join("; ")))
            }
            _ => None,
        }
    }
}

fn min_max(rates: &[f64]) -> Option<(f64, f64)> {
    if rates.is_empty() {
        return None;
    }
    Some(rates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
        (lo.min(r), hi.max(r))
    }))
}

fn shortfalls<'a>(rates: &'a [f64], targets: &'a [Option<f64>]) -> impl Iterator<Item = f64> + 'a {
    rates
        .iter()
        .zip(targets)
        .filter_map(|(r, t)| t.map(|t| ((t - r) / t).max(0.0)))
}

const REL_TOL: f64 = 1e-12;

fn component_cmp(a: f64, b: f64) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    let scale = a.abs().max(b.abs());
    if scale.is_finite() && (a - b).abs() <= REL_TOL * scale {
        return Ordering::Equal;
    }
    a.total_cmp(&b)
}

/// Lexicographic comparison of keys with a relative tolerance per component.
pub(crate) fn compare_keys(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match component_cmp(*x, *y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}
