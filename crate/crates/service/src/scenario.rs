//! Scenario files: one TOML document describing the network, the planning
//! goal, and the defaults of every randomized run.
//!
//! Parsing is two-step. The file is first read into loosely typed
//! `*File` structs in which required values are optional, so that a missing
//! value becomes a field-annotated validation error instead of a bare parse
//! failure. [`Scenario::from_file`] then checks everything and reports all
//! problems together.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use flexnet_core::allocator::{FlexOptions, Objective, DEFAULT_DROP_FRACTION};
use flexnet_core::hardware::{Detector, DwdmModel, WssModel};
use flexnet_core::ratemodel::{
    Allocation, GatingMode, Link, Network, User, DEFAULT_HISTOGRAM_SPAN_PS, DEFAULT_WINDOW_PS,
};
use flexnet_core::spectrum::{carve_grid, validate_grid, BiphotonSpectrum, Channel};
use flexnet_core::tomography::{ChannelNoise, NoiseModel, SamplerConfig};
use serde::{Deserialize, Serialize};

/// The four-user testbed, bundled with the binary.
pub const PAPER_DEFAULT_TOML: &str = include_str!("../scenarios/paper-default.toml");

pub fn paper_default() -> Scenario {
    parse_scenario(PAPER_DEFAULT_TOML).expect("bundled scenario is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Width of each slice (GHz).
    pub slice_width: f64,
    pub channel_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSpec {
    pub gating: GatingMode,
    pub window_ps: f64,
    /// Half-width of the coincidence histograms.
    pub histogram_span_ps: f64,
}

impl Default for RatesSpec {
    fn default() -> Self {
        Self {
            gating: GatingMode::Synchronized,
            window_ps: DEFAULT_WINDOW_PS,
            histogram_span_ps: DEFAULT_HISTOGRAM_SPAN_PS,
        }
    }
}

/// Detector preset that fills in whatever the file leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Snspd,
    GatedApd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<DetectorKind>,
    pub efficiency: f64,
    pub duty_cycle: f64,
    pub dark_rate: f64,
    pub jitter_fwhm: f64,
}

impl DetectorSpec {
    pub fn detector(&self) -> Detector {
        Detector {
            efficiency: self.efficiency,
            duty_cycle: self.duty_cycle,
            dark_rate: self.dark_rate,
            jitter_fwhm: self.jitter_fwhm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserSpec {
    pub name: String,
    /// Electronic delay added to this user's time tags (ps).
    pub offset_ps: i64,
    pub path_loss: f64,
    pub detector: DetectorSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanPolicy {
    /// Fixed grid, group `i` to the `i`-th link alphabetically.
    Alphabetical,
    /// Fixed grid, best bijection of groups to links.
    FixedGrid,
    #[default]
    FullFlex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSpec {
    pub policy: PlanPolicy,
    /// Channels per group on the fixed grid.
    pub group_size: usize,
    pub objective: Objective,
    pub allow_drop: bool,
    pub drop_fraction: f64,
}

impl Default for PlanSpec {
    fn default() -> Self {
        Self {
            policy: PlanPolicy::FullFlex,
            group_size: 2,
            objective: Objective::Equalize,
            allow_drop: false,
            drop_fraction: DEFAULT_DROP_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub channel: usize,
    pub link: Link,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub simulate: u64,
    pub tomography: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            simulate: 1,
            tomography: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub duration_s: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { duration_s: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelNoiseSpec {
    pub channel: usize,
    pub p: f64,
    #[serde(default = "pi")]
    pub phase: f64,
}

fn pi() -> f64 {
    std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographySpec {
    pub pairs_per_basis: u64,
    /// Werner mixing parameter of every channel without an override.
    pub p: f64,
    pub phase: f64,
    pub channels: Vec<ChannelNoiseSpec>,
    pub sampler: SamplerConfig,
}

impl Default for TomographySpec {
    fn default() -> Self {
        Self {
            pairs_per_basis: 10_000,
            p: 0.97,
            phase: pi(),
            channels: Vec::new(),
            sampler: SamplerConfig::default(),
        }
    }
}

/// A validated scenario. Serializes to the same TOML shape it is read from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub spectrum: BiphotonSpectrum,
    pub grid: GridSpec,
    pub wss: WssModel,
    pub dwdm: DwdmModel,
    pub rates: RatesSpec,
    pub users: Vec<UserSpec>,
    pub plan: PlanSpec,
    /// Stored channel assignment; `None` means nothing is routed yet.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Vec<Assignment>>,
    pub seeds: Seeds,
    pub simulation: SimulationSpec,
    pub tomography: TomographySpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFile {
    pub first_null_detuning: Option<f64>,
    pub stopband_halfwidth: Option<f64>,
    pub total_pair_flux: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub slice_width: Option<f64>,
    pub channel_count: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorFile {
    pub kind: Option<DetectorKind>,
    pub efficiency: Option<f64>,
    pub duty_cycle: Option<f64>,
    pub dark_rate: Option<f64>,
    pub jitter_fwhm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserFile {
    pub name: Option<String>,
    #[serde(default)]
    pub offset_ps: i64,
    #[serde(default)]
    pub path_loss: f64,
    pub detector: Option<DetectorFile>,
}

/// Scenario as written, before validation.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub spectrum: Option<SpectrumFile>,
    pub grid: Option<GridFile>,
    pub wss: Option<WssModel>,
    pub dwdm: Option<DwdmModel>,
    #[serde(default)]
    pub rates: RatesSpec,
    #[serde(default)]
    pub users: Vec<UserFile>,
    #[serde(default)]
    pub plan: PlanSpec,
    pub allocation: Option<Vec<Assignment>>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub tomography: TomographySpec,
}

/// One validation failure, located by a dotted field path such as
/// `users[2].detector.efficiency`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario: {}", join_fields(.0))]
    Invalid(Vec<FieldError>),
}

fn join_fields(errors: &[FieldError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// 1-based line and column of byte `offset` in `text`.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| position(text, s.start));
        ScenarioError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    Scenario::from_file(file).map_err(ScenarioError::Invalid)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

#[derive(Default)]
struct Errors(Vec<FieldError>);

impl Errors {
    fn push(&mut self, field: impl Into<String>, message: impl fmt::Display) {
        self.0.push(FieldError {
            field: field.into(),
            message: message.to_string(),
        });
    }

    fn require<T>(&mut self, field: &str, value: Option<T>) -> Option<T> {
        if value.is_none() {
            self.push(field, "required");
        }
        value
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn resolve_detector(path: &str, file: &DetectorFile, errors: &mut Errors) -> Option<DetectorSpec> {
    let efficiency = errors.require(&format!("{path}.efficiency"), file.efficiency)?;
    let preset = match file.kind {
        Some(DetectorKind::Snspd) => Detector::snspd(efficiency),
        Some(DetectorKind::GatedApd) => Detector::gated_apd(efficiency),
        None => Detector {
            efficiency,
            duty_cycle: 1.0,
            dark_rate: 0.0,
            jitter_fwhm: 0.0,
        },
    };
    let spec = DetectorSpec {
        kind: file.kind,
        efficiency,
        duty_cycle: file.duty_cycle.unwrap_or(preset.duty_cycle),
        dark_rate: file.dark_rate.unwrap_or(preset.dark_rate),
        jitter_fwhm: file.jitter_fwhm.unwrap_or(preset.jitter_fwhm),
    };
    if let Err(e) = spec.detector().validate() {
        errors.push(path, e);
        return None;
    }
    Some(spec)
}

impl Scenario {
    /// Validates a parsed file, collecting every problem before failing.
    pub fn from_file(file: ScenarioFile) -> Result<Scenario, Vec<FieldError>> {
        let mut errors = Errors::default();

        let name = match file.name {
            Some(n) if !n.trim().is_empty() => Some(n),
            Some(_) => {
                errors.push("name", "must not be empty");
                None
            }
            None => errors.require("name", None),
        };
        if let Some(n) = &name {
            if !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                errors.push("name", "use letters, digits, '-' and '_' only");
            }
        }

        let spectrum = match file.spectrum {
            None => {
                errors.push("spectrum", "required section");
                None
            }
            Some(s) => {
                let a = errors.require("spectrum.first_null_detuning", s.first_null_detuning);
                let b = s.stopband_halfwidth.unwrap_or(0.0);
                let f = errors.require("spectrum.total_pair_flux", s.total_pair_flux);
                match (a, f) {
                    (Some(a), Some(f)) => BiphotonSpectrum::new(a, b, f)
                        .map_err(|e| errors.push("spectrum", e))
                        .ok(),
                    _ => None,
                }
            }
        };

        let wss = file.wss.unwrap_or_else(WssModel::testbed);
        if let Err(e) = wss.validate() {
            errors.push("wss", e);
        }
        let dwdm = file.dwdm.unwrap_or_default();
        if let Err(e) = dwdm.validate() {
            errors.push("dwdm", e);
        }

        let grid = match file.grid {
            None => {
                errors.push("grid", "required section");
                None
            }
            Some(g) => {
                let w = errors.require("grid.slice_width", g.slice_width);
                let n = errors.require("grid.channel_count", g.channel_count);
                if let Some(w) = w.filter(|w| !positive(*w)) {
                    errors.push("grid.slice_width", format!("must be positive, got {w}"));
                }
                if n == Some(0) {
                    errors.push("grid.channel_count", "must be at least 1");
                }
                match (w, n) {
                    (Some(w), Some(n)) if positive(w) && n > 0 => Some(GridSpec {
                        slice_width: w,
                        channel_count: n,
                    }),
                    _ => None,
                }
            }
        };
        if let (Some(s), Some(g)) = (&spectrum, &grid) {
            match carve_grid(s, g.slice_width, g.channel_count) {
                Err(e) => errors.push("grid", e),
                Ok(channels) => {
                    if let Err(violations) = validate_grid(&channels, &wss) {
                        for v in violations {
                            errors.push("grid", v);
                        }
                    }
                }
            }
        }
        let channel_count = grid.map(|g| g.channel_count);
        let channel_exists = |c: usize| channel_count.is_none_or(|n| (1..=n).contains(&c));

        let rates = file.rates;
        if !positive(rates.window_ps) {
            errors.push("rates.window_ps", format!("must be positive, got {}", rates.window_ps));
        }
        if !positive(rates.histogram_span_ps) {
            errors.push(
                "rates.histogram_span_ps",
                format!("must be positive, got {}", rates.histogram_span_ps),
            );
        }

        if file.users.len() < 2 {
            errors.push("users", format!("need at least two users, got {}", file.users.len()));
        } else if file.users.len() > wss.port_count {
            errors.push(
                "users",
                format!("{} users exceed the {} switch ports", file.users.len(), wss.port_count),
            );
        }
        let mut users = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, u) in file.users.iter().enumerate() {
            let path = format!("users[{i}]");
            let name = match &u.name {
                None => errors.require(&format!("{path}.name"), None),
                Some(n) if n.trim().is_empty() => {
                    errors.push(format!("{path}.name"), "must not be empty");
                    None
                }
                Some(n) if !seen.insert(n.clone()) => {
                    errors.push(format!("{path}.name"), format!("duplicate user {n}"));
                    None
                }
                Some(n) => Some(n.clone()),
            };
            if !(u.path_loss >= 0.0 && u.path_loss.is_finite()) {
                errors.push(format!("{path}.path_loss"), format!("must be non-negative, got {}", u.path_loss));
            }
            let detector = match &u.detector {
                None => errors.require(&format!("{path}.detector"), None),
                Some(d) => resolve_detector(&format!("{path}.detector"), d, &mut errors),
            };
            if let (Some(name), Some(detector)) = (name, detector) {
                users.push(UserSpec {
                    name,
                    offset_ps: u.offset_ps,
                    path_loss: u.path_loss,
                    detector,
                });
            }
        }
        let known = |name: &str| file.users.iter().any(|u| u.name.as_deref() == Some(name));
        let check_link = |errors: &mut Errors, path: String, link: &Link| {
            for end in [link.first(), link.second()] {
                if !known(end) {
                    errors.push(path.clone(), format!("unknown user {end}"));
                }
            }
        };

        let plan = file.plan;
        if plan.group_size == 0 {
            errors.push("plan.group_size", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&plan.drop_fraction) {
            errors.push("plan.drop_fraction", format!("must lie in [0, 1], got {}", plan.drop_fraction));
        }
        if let Err(e) = plan.objective.validate() {
            errors.push("plan.objective", e);
        }
        match &plan.objective {
            Objective::WeightedTargets { targets } => {
                for (j, t) in targets.iter().enumerate() {
                    check_link(&mut errors, format!("plan.objective.targets[{j}].link"), &t.link);
                }
            }
            Objective::Premium { link, floors } => {
                check_link(&mut errors, "plan.objective.link".into(), link);
                for (j, t) in floors.iter().enumerate() {
                    check_link(&mut errors, format!("plan.objective.floors[{j}].link"), &t.link);
                }
            }
            _ => {}
        }

        if let Some(assignments) = &file.allocation {
            let mut taken = BTreeSet::new();
            for (i, a) in assignments.iter().enumerate() {
                if !channel_exists(a.channel) {
                    errors.push(format!("allocation[{i}].channel"), format!("no channel {}", a.channel));
                } else if !taken.insert(a.channel) {
                    errors.push(
                        format!("allocation[{i}].channel"),
                        format!("channel {} assigned twice", a.channel),
                    );
                }
                check_link(&mut errors, format!("allocation[{i}].link"), &a.link);
            }
        }

        // TOML integers are signed 64-bit.
        for (field, seed) in [("seeds.simulate", file.seeds.simulate), ("seeds.tomography", file.seeds.tomography)] {
            if seed > i64::MAX as u64 {
                errors.push(field, "must fit in a signed 64-bit integer");
            }
        }
        if !positive(file.simulation.duration_s) {
            errors.push(
                "simulation.duration_s",
                format!("must be positive, got {}", file.simulation.duration_s),
            );
        }

        let tomo = file.tomography;
        if !(0.0..=1.0).contains(&tomo.p) {
            errors.push("tomography.p", format!("must lie in [0, 1], got {}", tomo.p));
        }
        if !tomo.phase.is_finite() {
            errors.push("tomography.phase", "must be finite");
        }
        for (i, c) in tomo.channels.iter().enumerate() {
            if !channel_exists(c.channel) {
                errors.push(format!("tomography.channels[{i}].channel"), format!("no channel {}", c.channel));
            }
            if !(0.0..=1.0).contains(&c.p) {
                errors.push(format!("tomography.channels[{i}].p"), format!("must lie in [0, 1], got {}", c.p));
            }
        }
        if let Err(e) = tomo.sampler.validate() {
            errors.push("tomography.sampler", e);
        }

        match (name, spectrum, grid) {
            (Some(name), Some(spectrum), Some(grid)) if errors.0.is_empty() => Ok(Scenario {
                name,
                spectrum,
                grid,
                wss,
                dwdm,
                rates,
                users,
                plan,
                allocation: file.allocation,
                seeds: file.seeds,
                simulation: file.simulation,
                tomography: tomo,
            }),
            _ => Err(errors.0),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn channels(&self) -> flexnet_core::Result<Vec<Channel>> {
        carve_grid(&self.spectrum, self.grid.slice_width, self.grid.channel_count)
    }

    pub fn network(&self) -> flexnet_core::Result<Network> {
        let network = Network {
            spectrum: self.spectrum,
            channels: self.channels()?,
            wss: self.wss,
            users: self
                .users
                .iter()
                .map(|u| User {
                    name: u.name.clone(),
                    detector: u.detector.detector(),
                    path_loss: u.path_loss,
                })
                .collect(),
            gating: self.rates.gating,
            coincidence_window_ps: self.rates.window_ps,
        };
        network.validate()?;
        Ok(network)
    }

    pub fn offsets(&self) -> BTreeMap<String, i64> {
        self.users.iter().map(|u| (u.name.clone(), u.offset_ps)).collect()
    }

    /// The stored assignment, empty when none is stored.
    pub fn allocation(&self) -> Allocation {
        assignments_to_allocation(self.allocation.as_deref().unwrap_or(&[]))
    }

    pub fn flex_options(&self) -> FlexOptions {
        FlexOptions {
            allow_drop: self.plan.allow_drop,
            drop_fraction: self.plan.drop_fraction,
            ..FlexOptions::default()
        }
    }

    pub fn noise_model(&self) -> NoiseModel {
        let mut model = NoiseModel::uniform(self.tomography.p, self.tomography.pairs_per_basis);
        model.default.phase = self.tomography.phase;
        for c in &self.tomography.channels {
            model = model.with_channel(c.channel, ChannelNoise { p: c.p, phase: c.phase });
        }
        model
    }
}

pub fn assignments_to_allocation(assignments: &[Assignment]) -> Allocation {
    assignments.iter().map(|a| (a.channel, a.link.clone())).collect()
}

pub fn allocation_to_assignments(allocation: &Allocation) -> Vec<Assignment> {
    allocation
        .iter()
        .map(|(channel, link)| Assignment {
            channel,
            link: link.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_is_the_lab_testbed() {
        let s = paper_default();
        assert_eq!(s.users.len(), 4);
        assert_eq!(s.grid.channel_count, 12);
        let net = s.network().unwrap();
        assert_eq!(net.channels.len(), 12);
        let alice = net.user("Alice").unwrap();
        assert_eq!(alice.detector.efficiency, 0.85);
        assert_eq!(alice.detector.duty_cycle, 1.0);
        let dave = net.user("Dave").unwrap();
        assert_eq!(dave.detector.efficiency, 0.1);
        assert_eq!(dave.detector.duty_cycle, 0.1);
        assert_eq!(net.coincidence_window_ps, 1024.0);
        assert!(s.offsets().values().all(|o| o % 10_000 == 0));
        assert_eq!(s.allocation().len(), 12);
    }

    #[test]
    fn round_trip_is_identity() {
        let s = paper_default();
        let again = parse_scenario(&s.to_toml()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn missing_efficiency_names_the_field() {
        let text = PAPER_DEFAULT_TOML.replacen("efficiency = 0.2\n", "", 1);
        let err = parse_scenario(&text).unwrap_err();
        let ScenarioError::Invalid(fields) = err else {
            panic!("expected validation error, got {err:?}");
        };
        assert_eq!(
            fields,
            vec![FieldError {
                field: "users[2].detector.efficiency".into(),
                message: "required".into(),
            }]
        );
    }

    #[test]
    fn all_problems_reported_together() {
        let text = r#"
            [grid]
            slice_width = 3.0
            channel_count = 4
            [[users]]
            name = "A"
            [users.detector]
            efficiency = 1.5
        "#;
        let ScenarioError::Invalid(fields) = parse_scenario(text).unwrap_err() else {
            panic!("expected validation error");
        };
        let paths: Vec<&str> = fields.iter().map(|f| f.field.as_str()).collect();
        for expected in ["name", "spectrum", "users", "users[0].detector"] {
            assert!(paths.contains(&expected), "{expected} missing from {paths:?}");
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_scenario("name = \"x\"\n[spectrum]\nfirst_null_detuning = \"wide\"\n").unwrap_err();
        match err {
            ScenarioError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let err = parse_scenario("name = \"x\"\ncolour = 3\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn allocation_references_are_checked() {
        let text = format!(
            "{PAPER_DEFAULT_TOML}\n[[allocation]]\nchannel = 13\nlink = [\"Alice\", \"Eve\"]\n"
        );
        let ScenarioError::Invalid(fields) = parse_scenario(&text).unwrap_err() else {
            panic!("expected validation error");
        };
        let paths: Vec<&str> = fields.iter().map(|f| f.field.as_str()).collect();
        assert!(paths.contains(&"allocation[12].channel"), "{paths:?}");
        assert!(paths.contains(&"allocation[12].link"), "{paths:?}");
    }

    #[test]
    fn off_grid_slices_rejected() {
        let text = PAPER_DEFAULT_TOML.replace("slice_width = 24.0", "slice_width = 22.0");
        let ScenarioError::Invalid(fields) = parse_scenario(&text).unwrap_err() else {
            panic!("expected validation error");
        };
        assert!(fields.iter().all(|f| f.field == "grid"));
        assert!(!fields.is_empty());
    }

    #[test]
    fn presets_fill_missing_detector_fields() {
        let file = DetectorFile {
            kind: Some(DetectorKind::GatedApd),
            efficiency: Some(0.3),
            dark_rate: Some(10.0),
            ..DetectorFile::default()
        };
        let spec = resolve_detector("d", &file, &mut Errors::default()).unwrap();
        assert_eq!(spec.duty_cycle, 0.1);
        assert_eq!(spec.dark_rate, 10.0);
    }

    #[test]
    fn position_is_one_based() {
        assert_eq!(position("ab\ncd", 0), (1, 1));
        assert_eq!(position("ab\ncd", 4), (2, 2));
    }
}
