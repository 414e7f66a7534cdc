use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::objective::{compare_keys, Scorer};
use crate::allocator::{feasibility, AllocationPlan, Objective};
use crate::error::{Error, Result};
use crate::ratemodel::{Allocation, Link, Network};

/// Links whose best achievable rate is below this fraction of the median
/// are dropped when dropping is allowed.
pub const DEFAULT_DROP_FRACTION: f64 = 0.5;

const KICK_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexOptions {
    pub allow_drop: bool,
    #[serde(default = "default_drop_fraction")]
    pub drop_fraction: f64,
    /// Links eligible for channels; every network link when `None`.
    #[serde(default)]
    pub candidate_links: Option<Vec<Link>>,
    /// Number of perturb-and-descend restarts after the first local optimum.
    #[serde(default = "default_kick_budget")]
    pub kick_budget: usize,
    /// Node limit of the branch-and-bound pass that follows local search.
    #[serde(default = "default_exact_node_budget")]
    pub exact_node_budget: usize,
}

fn default_drop_fraction() -> f64 {
    DEFAULT_DROP_FRACTION
}

fn default_kick_budget() -> usize {
    2_000
}

fn default_exact_node_budget() -> usize {
    2_000_000
}

impl Default for FlexOptions {
    fn default() -> Self {
        Self {
            allow_drop: false,
            drop_fraction: DEFAULT_DROP_FRACTION,
            candidate_links: None,
            kick_budget: default_kick_budget(),
            exact_node_budget: default_exact_node_budget(),
        }
    }
}

impl FlexOptions {
    pub fn with_drop(mut self, allow: bool) -> Self {
        self.allow_drop = allow;
        self
    }
}

/// Search state: owner of every channel and the resulting link rates.
#[derive(Clone)]
struct State {
    owner: Vec<Option<usize>>,
    rates: Vec<f64>,
}

struct Problem<'a> {
    scorer: &'a Scorer,
    gains: &'a [f64],
    fluxes: &'a [f64],
}

impl Problem<'_> {
    fn rates_of(&self, owner: &[Option<usize>]) -> Vec<f64> {
        let mut rates = vec![0.0; self.gains.len()];
        for (c, o) in owner.iter().enumerate() {
            if let Some(l) = o {
                rates[*l] += self.fluxes[c];
            }
        }
        for (r, g) in rates.iter_mut().zip(self.gains) {
            *r *= g;
        }
        rates
    }

    fn state(&self, owner: Vec<Option<usize>>) -> State {
        State {
            rates: self.rates_of(&owner),
            owner,
        }
    }

    fn key(&self, s: &State) -> Vec<f64> {
        self.scorer.key(&s.rates)
    }

    /// Repeatedly serve the link in greatest need with the brightest
    /// remaining channel.
    fn greedy(&self) -> State {
        let mut order: Vec<usize> = (0..self.fluxes.len()).collect();
        order.sort_by(|&a, &b| self.fluxes[b].total_cmp(&self.fluxes[a]).then(a.cmp(&b)));
        let mut owner = vec![None; self.fluxes.len()];
        let mut rates = vec![0.0; self.gains.len()];
        for c in order {
            let link = (0..self.gains.len())
                .min_by(|&a, &b| {
                    self.scorer
                        .need(&rates, a)
                        .total_cmp(&self.scorer.need(&rates, b))
                        .then(a.cmp(&b))
                })
                .expect("at least one link");
            owner[c] = Some(link);
            rates[link] += self.gains[link] * self.fluxes[c];
        }
        self.state(owner)
    }

    fn shifted(&self, rates: &[f64], changes: &[(usize, Option<usize>, Option<usize>)]) -> Vec<f64> {
        let mut r = rates.to_vec();
        for &(c, from, to) in changes {
            if let Some(l) = from {
                r[l] -= self.gains[l] * self.fluxes[c];
            }
            if let Some(l) = to {
                r[l] += self.gains[l] * self.fluxes[c];
            }
        }
        for x in &mut r {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        r
    }

    /// Best-improvement descent over single-channel moves (including
    /// unassignment) and pairwise swaps. Ties go to the first move found
    /// scanning channels by index, then links in order.
    fn descend(&self, mut s: State) -> State {
        let links = self.gains.len();
        let channels = self.fluxes.len();
        loop {
            let mut best_key = self.key(&s);
            let mut best_move: Option<Vec<(usize, Option<usize>, Option<usize>)>> = None;
            for c in 0..channels {
                let from = s.owner[c];
                for to in std::iter::once(None).chain((0..links).map(Some)) {
                    if to == from {
                        continue;
                    }
                    let change = [(c, from, to)];
                    let key = self.scorer.key(&self.shifted(&s.rates, &change));
                    if compare_keys(&key, &best_key) == Ordering::Less {
                        best_key = key;
                        best_move = Some(change.to_vec());
                    }
                }
            }
            for c1 in 0..channels {
                for c2 in c1 + 1..channels {
                    let (o1, o2) = (s.owner[c1], s.owner[c2]);
                    if o1 == o2 {
                        continue;
                    }
                    let change = [(c1, o1, o2), (c2, o2, o1)];
                    let key = self.scorer.key(&self.shifted(&s.rates, &change));
                    if compare_keys(&key, &best_key) == Ordering::Less {
                        best_key = key;
                        best_move = Some(change.to_vec());
                    }
                }
            }
            match best_move {
                None => return s,
                Some(changes) => {
                    for (c, _, to) in changes {
                        s.owner[c] = to;
                    }
                    s.rates = self.rates_of(&s.owner);
                }
            }
        }
    }

    /// Escapes local optima. First every single forced reassignment of the
    /// incumbent is descended from; then, with the remaining budget, random
    /// reassignments of two to four channels. A strictly better optimum
    /// replaces the incumbent. The kick sequence comes from a fixed seed, so
    /// the result is still deterministic.
    fn perturb(&self, mut best: State, budget: usize) -> State {
        let links = self.gains.len();
        let channels = self.fluxes.len();
        let mut used = 0;
        'sweep: loop {
            let best_key = self.key(&best);
            for c in 0..channels {
                for to in std::iter::once(None).chain((0..links).map(Some)) {
                    if to == best.owner[c] {
                        continue;
                    }
                    if used >= budget {
                        return best;
                    }
                    used += 1;
                    let mut owner = best.owner.clone();
                    owner[c] = to;
                    let trial = self.descend(self.state(owner));
                    if compare_keys(&self.key(&trial), &best_key) == Ordering::Less {
                        best = trial;
                        continue 'sweep;
                    }
                }
            }
            break;
        }
        if channels < 2 {
            return best;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(KICK_SEED);
        let mut best_key = self.key(&best);
        while used < budget {
            used += 1;
            let mut owner = best.owner.clone();
            let size = rng.random_range(2..=4.min(channels));
            for _ in 0..size {
                let c = rng.random_range(0..channels);
                let to = rng.random_range(0..=links);
                owner[c] = (to < links).then_some(to);
            }
            let trial = self.descend(self.state(owner));
            let key = self.key(&trial);
            if compare_keys(&key, &best_key) == Ordering::Less {
                best = trial;
                best_key = key;
            }
        }
        best
    }

    /// Depth-first branch and bound over every channel → link-or-idle map,
    /// seeded with `incumbent`. Returns the best state found and whether the
    /// search finished within `node_budget` nodes, in which case it is
    /// optimal.
    fn exact(&self, incumbent: State, node_budget: usize) -> (State, bool) {
        let mut order: Vec<usize> = (0..self.fluxes.len()).collect();
        order.sort_by(|&a, &b| self.fluxes[b].total_cmp(&self.fluxes[a]).then(a.cmp(&b)));
        let mut suffix = vec![0.0; order.len() + 1];
        for k in (0..order.len()).rev() {
            suffix[k] = suffix[k + 1] + self.fluxes[order[k]];
        }
        let mut search = Exact {
            problem: self,
            order,
            suffix,
            best_key: self.key(&incumbent),
            best: incumbent,
            nodes: 0,
            budget: node_budget,
        };
        let owner = vec![None; self.fluxes.len()];
        let rates = vec![0.0; self.gains.len()];
        let complete = search.visit(0, owner, rates);
        (search.best, complete)
    }
}

struct Exact<'p, 'a> {
    problem: &'p Problem<'a>,
    order: Vec<usize>,
    suffix: Vec<f64>,
    best: State,
    best_key: Vec<f64>,
    nodes: usize,
    budget: usize,
}

impl Exact<'_, '_> {
    /// False once the node budget runs out.
    fn visit(&mut self, depth: usize, mut owner: Vec<Option<usize>>, rates: Vec<f64>) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        let p = self.problem;
        if depth == self.order.len() {
            let key = p.scorer.key(&rates);
            if compare_keys(&key, &self.best_key) == Ordering::Less {
                self.best = p.state(owner);
                self.best_key = self.problem.key(&self.best);
            }
            return true;
        }
        let upper: Vec<f64> = rates
            .iter()
            .zip(p.gains)
            .map(|(r, g)| r + g * self.suffix[depth])
            .collect();
        let bound = p.scorer.bound(&rates, &upper, self.order.len() - depth);
        let prefix = &self.best_key[..bound.len().min(self.best_key.len())];
        match compare_keys(&bound, prefix) {
            Ordering::Greater => return true,
            // a bound as long as the key that ties it leaves nothing to gain
            Ordering::Equal if bound.len() >= self.best_key.len() => return true,
            _ => {}
        }
        let c = self.order[depth];
        let preferred = self.best.owner[c];
        let choices = std::iter::once(preferred)
            .chain((0..p.gains.len()).map(Some))
            .chain(std::iter::once(None));
        let mut tried: Vec<Option<usize>> = Vec::with_capacity(p.gains.len() + 1);
        for to in choices {
            if tried.contains(&to) {
                continue;
            }
            tried.push(to);
            let mut next = rates.clone();
            if let Some(l) = to {
                next[l] += p.gains[l] * p.fluxes[c];
            }
            owner[c] = to;
            if !self.visit(depth + 1, owner.clone(), next) {
                return false;
            }
        }
        true
    }
}

/// Optimizes a channel assignment with no grid restriction.
///
/// With dropping allowed, links whose best achievable rate (all `channels`
/// granted) is below `drop_fraction` times the median over candidate links
/// are removed first. The remaining links are seeded greedily, refined by
/// local search with perturbation restarts, and then handed to a bounded
/// branch-and-bound pass that either proves the plan optimal or says in the
/// diagnostics that it stopped early. Deterministic for identical inputs.
pub fn optimize_flex(
    network: &Network,
    channels: &[usize],
    objective: &Objective,
    options: &FlexOptions,
) -> Result<AllocationPlan> {
    objective.validate()?;
    if channels.is_empty() {
        return Err(Error::Domain("optimize_flex needs at least one channel".into()));
    }
    let mut channels = channels.to_vec();
    channels.sort_unstable();
    channels.dedup();
    let candidates: Vec<Link> = match &options.candidate_links {
        Some(links) => {
            let mut l = links.clone();
            l.sort();
            l.dedup();
            l
        }
        None => network.links(),
    };
    if candidates.is_empty() {
        return Err(Error::Domain("optimize_flex needs at least one link".into()));
    }

    let mut diagnostics = Vec::new();
    let mut dropped = Vec::new();
    let mut active = candidates.clone();
    if options.allow_drop {
        let best: Vec<f64> = candidates
            .iter()
            .map(|l| feasibility(network, l, &channels, None))
            .collect::<Result<_>>()?;
        let threshold = options.drop_fraction * median(&best);
        let (keep, drop): (Vec<_>, Vec<_>) = candidates
            .iter()
            .cloned()
            .zip(best)
            .partition(|(_, b)| *b >= threshold);
        for (link, b) in &drop {
            diagnostics.push(format!(
                "dropped {link}: best achievable {b:.4} /s is below {threshold:.4} /s"
            ));
        }
        dropped = drop.into_iter().map(|(l, _)| l).collect::<Vec<_>>();
        let orphaned: Vec<String> = dropped
            .iter()
            .filter(|l| objective.targets_link(l))
            .map(|l| format!("{l} carries a target but was dropped"))
            .collect();
        if !orphaned.is_empty() {
            diagnostics.push(format!("targets unreachable: {}", orphaned.join("; ")));
        }
        active = keep.into_iter().map(|(l, _)| l).collect();
    }

    let gains: Vec<f64> = active
        .iter()
        .map(|l| network.link_gain(l))
        .collect::<Result<_>>()?;
    let fluxes: Vec<f64> = channels
        .iter()
        .map(|&c| network.channel_flux(c))
        .collect::<Result<_>>()?;
    let scorer = Scorer::new(objective, &active);
    let problem = Problem {
        scorer: &scorer,
        gains: &gains,
        fluxes: &fluxes,
    };
    let seeded = problem.greedy();
    let local = problem.descend(seeded);
    let kicked = problem.perturb(local, options.kick_budget);
    let (result, proven) = problem.exact(kicked, options.exact_node_budget);
    diagnostics.push(if proven {
        "search complete: plan is optimal for the objective".to_string()
    } else {
        format!(
            "exact search stopped after {} nodes: plan is a local optimum",
            options.exact_node_budget
        )
    });

    diagnostics.extend(scorer.describe_shortfall(&result.rates, &active));
    let allocation: Allocation = result
        .owner
        .iter()
        .zip(&channels)
        .filter_map(|(o, &c)| o.map(|l| (c, active[l].clone())))
        .collect();
    AllocationPlan::build(
        network,
        allocation,
        active.into_iter().collect::<BTreeSet<_>>(),
        dropped,
        objective.clone(),
        diagnostics,
    )
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
