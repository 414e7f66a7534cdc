//! Receivers, the wavelength-selective switch, and the passive DWDM-tree
//! alternative it replaces.
//!
//! All losses are in dB and add along a path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    /// Detection probability for a photon reaching the detector.
    pub efficiency: f64,
    /// Fraction of time the detector is armed; 1 for free-running.
    pub duty_cycle: f64,
    /// Dark counts per second while armed.
    pub dark_rate: f64,
    /// Timing jitter, full width at half maximum (ps).
    pub jitter_fwhm: f64,
}

impl Detector {
    /// Free-running superconducting nanowire detector.
    pub fn snspd(efficiency: f64) -> Self {
        Self {
            efficiency,
            duty_cycle: 1.0,
            dark_rate: 100.0,
            jitter_fwhm: 50.0,
        }
    }

    /// InGaAs avalanche photodiode on a 20 MHz, 10 % duty gate.
    pub fn gated_apd(efficiency: f64) -> Self {
        Self {
            efficiency,
            duty_cycle: 0.1,
            dark_rate: 2000.0,
            jitter_fwhm: 250.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Domain(format!("efficiency {} outside [0, 1]", self.efficiency)));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::Domain(format!("duty cycle {} outside (0, 1]", self.duty_cycle)));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::Domain(format!("dark rate {} is negative", self.dark_rate)));
        }
        if !(self.jitter_fwhm >= 0.0 && self.jitter_fwhm.is_finite()) {
            return Err(Error::Domain(format!("jitter {} is negative", self.jitter_fwhm)));
        }
        Ok(())
    }
}

/// Wavelength-selective switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WssModel {
    pub port_count: usize,
    /// Insertion loss, identical for every port and slice (dB).
    pub insertion_loss: f64,
    /// Narrowest passband the switch can shape (GHz).
    pub resolution: f64,
    /// Pitch of addressable slice edges (GHz).
    pub addressability: f64,
    /// Optical bandwidth available for allocation (GHz).
    pub total_bandwidth: f64,
}

impl WssModel {
    /// The four-port device of the tabletop testbed.
    pub fn testbed() -> Self {
        Self {
            port_count: 4,
            insertion_loss: 4.5,
            resolution: 20.0,
            addressability: 4.0,
            total_bandwidth: 9600.0,
        }
    }

    /// A current commercial 20-port C-band unit.
    pub fn commercial_20_port() -> Self {
        Self {
            port_count: 20,
            insertion_loss: 4.5,
            resolution: 6.25,
            addressability: 6.25,
            total_bandwidth: 4800.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.port_count < 1 {
            return Err(Error::Domain("WSS needs at least one port".into()));
        }
        if !(self.insertion_loss >= 0.0) {
            return Err(Error::Domain(format!("insertion loss {} is negative", self.insertion_loss)));
        }
        if !(self.addressability > 0.0 && self.resolution >= self.addressability) {
            return Err(Error::Domain(format!(
                "need resolution ({}) >= addressability ({}) > 0",
                self.resolution, self.addressability
            )));
        }
        if !(self.total_bandwidth >= 0.0) {
            return Err(Error::Domain(format!("bandwidth {} is negative", self.total_bandwidth)));
        }
        Ok(())
    }
}

/// Which filter traversals make up the best-case DWDM path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BestCasePath {
    #[default]
    TwoTransmissions,
    ReflectionTransmission,
}

/// Tree of fixed add/drop filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwdmModel {
    /// Loss per filter reflection (dB).
    pub reflection_loss: f64,
    /// Loss per filter transmission (dB).
    pub transmission_loss: f64,
    #[serde(default)]
    pub best_case: BestCasePath,
}

impl Default for DwdmModel {
    fn default() -> Self {
        Self {
            reflection_loss: 0.25,
            transmission_loss: 0.6,
            best_case: BestCasePath::TwoTransmissions,
        }
    }
}

impl DwdmModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.reflection_loss >= 0.0 && self.transmission_loss >= 0.0) {
            return Err(Error::Domain("DWDM losses must be non-negative".into()));
        }
        Ok(())
    }
}

fn check_users(n_users: usize) -> Result<()> {
    if n_users < 2 {
        return Err(Error::Domain(format!(
            "{n_users} user(s) cannot form a two-party link"
        )));
    }
    Ok(())
}

/// Filters needed for a fully connected DWDM tree, `2n² − 3n`.
pub fn dwdm_filter_count(n_users: usize) -> Result<usize> {
    check_users(n_users)?;
    Ok(2 * n_users * n_users - 3 * n_users)
}

/// Worst-case band: `n² − n` reflections and one transmission.
pub fn dwdm_worst_loss(model: &DwdmModel, n_users: usize) -> Result<f64> {
    check_users(n_users)?;
    let reflections = (n_users * n_users - n_users) as f64;
    Ok(reflections * model.reflection_loss + model.transmission_loss)
}

/// Best-case band passes through two filters; independent of `n_users`.
pub fn dwdm_best_loss(model: &DwdmModel, n_users: usize) -> Result<f64> {
    check_users(n_users)?;
    Ok(match model.best_case {
        BestCasePath::TwoTransmissions => 2.0 * model.transmission_loss,
        BestCasePath::ReflectionTransmission => model.reflection_loss + model.transmission_loss,
    })
}

/// Smallest network size at which the DWDM worst case loses more than the
/// switch.
pub fn crossover_users(wss: &WssModel, dwdm: &DwdmModel) -> Result<usize> {
    if !(dwdm.reflection_loss > 0.0) {
        return Err(Error::Domain(
            "with lossless reflections the DWDM worst case never exceeds the WSS".into(),
        ));
    }
    let mut n = 2;
    loop {
        if dwdm_worst_loss(dwdm, n)? > wss.insertion_loss {
            return Ok(n);
        }
        n += 1;
    }
}

/// Largest `n` whose `n(n−1)` slices fit in the switch bandwidth and ports.
pub fn fully_connected_capacity(wss: &WssModel, slice_width: f64) -> Result<usize> {
    if !(slice_width >= wss.resolution) {
        return Err(Error::Constraint(format!(
            "slice width {slice_width} GHz is below the {} GHz resolution",
            wss.resolution
        )));
    }
    let fits = |n: usize| (n * n.saturating_sub(1)) as f64 * slice_width <= wss.total_bandwidth;
    let mut n = 1;
    while n < wss.port_count && fits(n + 1) {
        n += 1;
    }
    Ok(n)
}

/// One row of the WSS vs DWDM loss comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub users: usize,
    pub wss_loss: f64,
    pub dwdm_best: f64,
    pub dwdm_worst: f64,
}

pub fn loss_table(
    wss: &WssModel,
    dwdm: &DwdmModel,
    users: impl IntoIterator<Item = usize>,
) -> Result<Vec<LossRow>> {
    let rows = users
        .into_iter()
        .map(|n| {
            Ok(LossRow {
                users: n,
                wss_loss: wss.insertion_loss,
                dwdm_best: dwdm_best_loss(dwdm, n)?,
                dwdm_worst: dwdm_worst_loss(dwdm, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Domain("empty user range".into()));
    }
    Ok(rows)
}

/// Renders a loss table as delimiter-separated text with a header line.
pub fn format_loss_table(rows: &[LossRow], delimiter: char) -> String {
    let d = delimiter;
    let mut out = format!("users{d}wss_db{d}dwdm_best_db{d}dwdm_worst_db\n");
    for r in rows {
        out.push_str(&format!(
            "{}{d}{:.2}{d}{:.2}{d}{:.2}\n",
            r.users, r.wss_loss, r.dwdm_best, r.dwdm_worst
        ));
    }
    out
}

/// `10^(−dB/10)`
pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn filter_counts() {
        assert_eq!(dwdm_filter_count(20).unwrap(), 740);
        assert_eq!(dwdm_filter_count(2).unwrap(), 2);
        assert_eq!(dwdm_filter_count(4).unwrap(), 20);
        assert!(matches!(dwdm_filter_count(1), Err(Error::Domain(_))));
    }

    #[test]
    fn worst_case_loss() {
        let d = DwdmModel::default();
        assert!(close(dwdm_worst_loss(&d, 16).unwrap(), 60.6));
        assert!(close(dwdm_worst_loss(&d, 2).unwrap(), 1.1));
        let lossless = DwdmModel {
            reflection_loss: 0.0,
            transmission_loss: 0.0,
            ..Default::default()
        };
        for n in 2..30 {
            assert_eq!(dwdm_worst_loss(&lossless, n).unwrap(), 0.0);
        }
        assert!(dwdm_worst_loss(&d, 0).is_err());
    }

    #[test]
    fn best_case_loss() {
        let d = DwdmModel::default();
        assert!(close(dwdm_best_loss(&d, 2).unwrap(), 1.2));
        assert!(close(dwdm_best_loss(&d, 17).unwrap(), 1.2));
        let alt = DwdmModel {
            best_case: BestCasePath::ReflectionTransmission,
            ..d
        };
        assert!(close(dwdm_best_loss(&alt, 5).unwrap(), 0.85));
        let free = DwdmModel {
            transmission_loss: 0.0,
            ..d
        };
        assert_eq!(dwdm_best_loss(&free, 8).unwrap(), 0.0);
    }

    #[test]
    fn crossover() {
        let d = DwdmModel::default();
        let wss = WssModel::testbed();
        assert!(close(dwdm_worst_loss(&d, 4).unwrap(), 3.6));
        assert!(close(dwdm_worst_loss(&d, 5).unwrap(), 5.6));
        assert_eq!(crossover_users(&wss, &d).unwrap(), 5);
        let ideal = WssModel {
            insertion_loss: 0.0,
            ..wss
        };
        assert_eq!(crossover_users(&ideal, &d).unwrap(), 2);
        let lossy = WssModel {
            insertion_loss: 60.6,
            ..wss
        };
        assert_eq!(crossover_users(&lossy, &d).unwrap(), 17);
        let no_reflection = DwdmModel {
            reflection_loss: 0.0,
            ..d
        };
        assert!(crossover_users(&wss, &no_reflection).is_err());
    }

    #[test]
    fn capacity() {
        let wss = WssModel::commercial_20_port();
        assert_eq!(fully_connected_capacity(&wss, 12.5).unwrap(), 20);
        assert_eq!(fully_connected_capacity(&wss, 25.0).unwrap(), 14);
        let two_port = WssModel {
            port_count: 2,
            total_bandwidth: 1e9,
            ..wss
        };
        assert_eq!(fully_connected_capacity(&two_port, 12.5).unwrap(), 2);
        assert!(matches!(
            fully_connected_capacity(&wss, 5.0),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn table() {
        let rows = loss_table(&WssModel::testbed(), &DwdmModel::default(), 2..=16).unwrap();
        assert_eq!(rows.len(), 15);
        assert!(close(rows.last().unwrap().dwdm_worst, 60.6));
        assert!(rows.iter().all(|r| r.wss_loss == 4.5));
        assert!(rows.windows(2).all(|w| w[1].dwdm_worst > w[0].dwdm_worst));
        assert!(loss_table(&WssModel::testbed(), &DwdmModel::default(), 3..3).is_err());
        let text = format_loss_table(&rows, ',');
        assert_eq!(text.lines().count(), 16);
        assert_eq!(text.lines().last().unwrap(), "16,4.50,1.20,60.60");
    }

    #[test]
    fn detector_ranges() {
        assert!(Detector::snspd(0.85).validate().is_ok());
        assert!(Detector::gated_apd(1.2).validate().is_err());
        let mut d = Detector::gated_apd(0.2);
        d.duty_cycle = 0.0;
        assert!(d.validate().is_err());
        assert!(WssModel::testbed().validate().is_ok());
        let bad = WssModel {
            resolution: 2.0,
            ..WssModel::testbed()
        };
        assert!(bad.validate().is_err());
    }
}
