//! Singles, coincidence and accidental rates for a channel allocation, plus a
//! Monte Carlo time-tag simulator and coincidence counter that cross-check
//! the analytic model.

mod coincidence;
mod export;
mod simulate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardware::{db_to_transmission, Detector, WssModel};
use crate::spectrum::{channel_flux, BiphotonSpectrum, Channel};

pub use coincidence::{
    combined_histogram, count_coincidences, CoincidenceReport, CombinedHistogram, LinkHistogram,
};
pub use export::{read_timetags_binary, write_histograms_text, write_timetags_binary, write_timetags_text};
pub use simulate::{simulate_timetags, TimetagStream, UserStream};

/// Default coincidence window (ps).
pub const DEFAULT_WINDOW_PS: f64 = 1024.0;
/// Default half-span of coincidence histograms (ps).
pub const DEFAULT_HISTOGRAM_SPAN_PS: f64 = 60_000.0;

/// A receiver at the end of one switch port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub name: String,
    pub detector: Detector,
    /// Everything between source and detector except the switch itself (dB).
    #[serde(default)]
    pub path_loss: f64,
}

impl User {
    pub fn new(name: impl Into<String>, detector: Detector) -> Self {
        Self {
            name: name.into(),
            detector,
            path_loss: 0.0,
        }
    }
}

/// Unordered pair of distinct users, stored in canonical (sorted) order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(String, String)", into = "(String, String)")]
pub struct Link {
    first: String,
    second: String,
}

impl Link {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { first: a, second: b }),
            std::cmp::Ordering::Greater => Ok(Self { first: b, second: a }),
            std::cmp::Ordering::Equal => Err(Error::Config(format!("link endpoints must differ, got {a} twice"))),
        }
    }

    /// Lexicographically first endpoint; receives the signal slice.
    pub fn first(&self) -> &str {
        &self.first
    }

    pub fn second(&self) -> &str {
        &self.second
    }

    pub fn contains(&self, user: &str) -> bool {
        self.first == user || self.second == user
    }

    /// Initials, e.g. `AB` for Alice–Bob.
    pub fn short_label(&self) -> String {
        let initial = |s: &str| s.chars().next().map(String::from).unwrap_or_default();
        format!("{}{}", initial(&self.first), initial(&self.second))
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.second)
    }
}

impl TryFrom<(String, String)> for Link {
    type Error = Error;
    fn try_from((a, b): (String, String)) -> Result<Self> {
        Link::new(a, b)
    }
}

impl From<Link> for (String, String) {
    fn from(link: Link) -> Self {
        (link.first, link.second)
    }
}

/// How gated detectors on the two ends of a link share their gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatingMode {
    /// All gates driven by one clock: joint open fraction is the smaller duty.
    #[default]
    Synchronized,
    /// Gates are uncorrelated: joint open fraction is the product.
    Independent,
}

impl GatingMode {
    pub fn joint_duty(self, a: f64, b: f64) -> f64 {
        match self {
            GatingMode::Synchronized => a.min(b),
            GatingMode::Independent => a * b,
        }
    }
}

/// Source, switch, and receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spectrum: BiphotonSpectrum,
    pub channels: Vec<Channel>,
    pub wss: WssModel,
    pub users: Vec<User>,
    #[serde(default)]
    pub gating: GatingMode,
    pub coincidence_window_ps: f64,
}

impl Network {
    pub fn user(&self, name: &str) -> Result<&User> {
        self.users
            .iter()
            .find(|u| u.name == name)
            .ok_or_else(|| Error::Config(format!("unknown user {name}")))
    }

    pub fn channel(&self, index: usize) -> Result<&Channel> {
        self.channels
            .iter()
            .find(|c| c.index == index)
            .ok_or_else(|| Error::Config(format!("unknown channel {index}")))
    }

    /// Every two-party link, in alphabetical order.
    pub fn links(&self) -> Vec<Link> {
        let mut names: Vec<&str> = self.users.iter().map(|u| u.name.as_str()).collect();
        names.sort_unstable();
        let mut links = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                if let Ok(link) = Link::new(*a, *b) {
                    links.push(link);
                }
            }
        }
        links
    }

    /// Source-to-detector power transmission including the switch.
    pub fn transmission(&self, user: &User) -> f64 {
        db_to_transmission(self.wss.insertion_loss + user.path_loss)
    }

    /// Probability that a photon routed to `user` is detected while the
    /// gate is open, times the gate duty.
    pub fn detection_probability(&self, user: &User) -> f64 {
        user.detector.efficiency * user.detector.duty_cycle * self.transmission(user)
    }

    /// Coincidences per routed pair on `link`: `η_u η_v T_u T_v G`.
    pub fn link_gain(&self, link: &Link) -> Result<f64> {
        let u = self.user(link.first())?;
        let v = self.user(link.second())?;
        let gating = self
            .gating
            .joint_duty(u.detector.duty_cycle, v.detector.duty_cycle);
        Ok(u.detector.efficiency
            * v.detector.efficiency
            * self.transmission(u)
            * self.transmission(v)
            * gating)
    }

    pub fn channel_flux(&self, index: usize) -> Result<f64> {
        Ok(channel_flux(&self.spectrum, self.channel(index)?))
    }

    /// Fluxes of all channels, in `channels` order.
    pub fn channel_fluxes(&self) -> Vec<f64> {
        self.channels
            .iter()
            .map(|c| channel_flux(&self.spectrum, c))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.spectrum.validate()?;
        self.wss.validate()?;
        let mut seen = BTreeSet::new();
        for user in &self.users {
            user.detector
                .validate()
                .map_err(|e| Error::Config(format!("user {}: {e}", user.name)))?;
            if !(user.path_loss >= 0.0) {
                return Err(Error::Config(format!("user {}: negative path loss", user.name)));
            }
            if !seen.insert(user.name.as_str()) {
                return Err(Error::Config(format!("duplicate user {}", user.name)));
            }
        }
        if !(self.coincidence_window_ps > 0.0) {
            return Err(Error::Config("coincidence window must be positive".into()));
        }
        Ok(())
    }
}

/// Channel index to link; unassigned channels are absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    assignments: BTreeMap<usize, Link>,
}

impl Allocation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assigns `channel` to `link`, returning the previous owner.
    pub fn assign(&mut self, channel: usize, link: Link) -> Option<Link> {
        self.assignments.insert(channel, link)
    }

    pub fn unassign(&mut self, channel: usize) -> Option<Link> {
        self.assignments.remove(&channel)
    }

    pub fn link_of(&self, channel: usize) -> Option<&Link> {
        self.assignments.get(&channel)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Link)> {
        self.assignments.iter().map(|(c, l)| (*c, l))
    }

    pub fn channels_of<'a>(&'a self, link: &'a Link) -> impl Iterator<Item = usize> + 'a {
        self.assignments
            .iter()
            .filter(move |(_, l)| *l == link)
            .map(|(c, _)| *c)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    /// Links holding at least one channel.
    pub fn active_links(&self) -> BTreeSet<Link> {
        self.assignments.values().cloned().collect()
    }

    /// All referenced channels and users must exist in `network`.
    pub fn validate(&self, network: &Network) -> Result<()> {
        for (channel, link) in &self.assignments {
            network.channel(*channel)?;
            network.user(link.first())?;
            network.user(link.second())?;
        }
        Ok(())
    }
}

impl FromIterator<(usize, Link)> for Allocation {
    fn from_iter<T: IntoIterator<Item = (usize, Link)>>(iter: T) -> Self {
        Self {
            assignments: iter.into_iter().collect(),
        }
    }
}

/// Predicted rates of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRates {
    pub link: Link,
    pub channels: Vec<usize>,
    /// True pair coincidences per second.
    pub coincidence: f64,
    /// Accidental coincidences per second in one window.
    pub accidental: f64,
    /// Coincidence-to-accidental ratio; absent when no accidentals.
    pub car: Option<f64>,
}

/// Spread of coincidence rates over links holding channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceMetrics {
    pub active_links: usize,
    pub min_rate: f64,
    pub max_rate: f64,
    pub total_rate: f64,
    /// `max / min`, absent when there is no active link or one has zero rate.
    pub balance_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub singles: BTreeMap<String, f64>,
    pub links: Vec<LinkRates>,
    pub balance: BalanceMetrics,
}

impl RateReport {
    pub fn link(&self, link: &Link) -> Option<&LinkRates> {
        self.links.iter().find(|l| &l.link == link)
    }

    pub fn coincidence(&self, link: &Link) -> f64 {
        self.link(link).map_or(0.0, |l| l.coincidence)
    }
}

fn user_singles(network: &Network, user: &User, allocation: &Allocation) -> Result<f64> {
    let mut routed = 0.0;
    for (channel, link) in allocation.iter() {
        if link.contains(&user.name) {
            routed += network.channel_flux(channel)?;
        }
    }
    Ok(user.detector.dark_rate * user.detector.duty_cycle + routed * network.detection_probability(user))
}

/// Detection rate at `user`, dark counts included.
pub fn singles_rate(network: &Network, user: &str, allocation: &Allocation) -> Result<f64> {
    allocation.validate(network)?;
    user_singles(network, network.user(user)?, allocation)
}

/// True coincidence rate of `link` under `allocation`.
pub fn coincidence_rate(network: &Network, link: &Link, allocation: &Allocation) -> Result<f64> {
    allocation.validate(network)?;
    let gain = network.link_gain(link)?;
    let mut flux = 0.0;
    for channel in allocation.channels_of(link) {
        flux += network.channel_flux(channel)?;
    }
    Ok(flux * gain)
}

/// Random-overlap coincidences per second for singles `s_u`, `s_v`.
pub fn accidental_rate(s_u: f64, s_v: f64, window_ps: f64) -> f64 {
    s_u * s_v * window_ps * 1e-12
}

/// Balance metrics over `rates` (one entry per active link).
pub fn balance_metrics(rates: &[f64]) -> BalanceMetrics {
    if rates.is_empty() {
        return BalanceMetrics {
            active_links: 0,
            min_rate: 0.0,
            max_rate: 0.0,
            total_rate: 0.0,
            balance_score: None,
        };
    }
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    BalanceMetrics {
        active_links: rates.len(),
        min_rate: min,
        max_rate: max,
        total_rate: rates.iter().sum(),
        balance_score: (min > 0.0).then(|| max / min),
    }
}

/// Full analytic report for every link of the network.
pub fn predict_report(network: &Network, allocation: &Allocation) -> Result<RateReport> {
    allocation.validate(network)?;
    let mut singles = BTreeMap::new();
    for user in &network.users {
        singles.insert(user.name.clone(), user_singles(network, user, allocation)?);
    }
    let mut links = Vec::new();
    for link in network.links() {
        let channels: Vec<usize> = allocation.channels_of(&link).collect();
        let coincidence = coincidence_rate(network, &link, allocation)?;
        let accidental = accidental_rate(
            singles[link.first()],
            singles[link.second()],
            network.coincidence_window_ps,
        );
        links.push(LinkRates {
            link,
            channels,
            coincidence,
            accidental,
            car: (accidental > 0.0).then(|| coincidence / accidental),
        });
    }
    let active: Vec<f64> = links
        .iter()
        .filter(|l| !l.channels.is_empty())
        .map(|l| l.coincidence)
        .collect();
    Ok(RateReport {
        singles,
        balance: balance_metrics(&active),
        links,
    })
}
