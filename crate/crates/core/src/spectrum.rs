//! Biphoton spectral density and the energy-matched channel grid.
//!
//! Frequencies are detunings in GHz from spectral degeneracy (half the pump
//! frequency). A signal photon at `+d` pairs with an idler at `-d`, so energy
//! matching is a point reflection about zero detuning.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardware::WssModel;

/// Step of the composite midpoint rule used for all flux integrals.
pub const QUADRATURE_STEP_GHZ: f64 = 0.1;

/// `sinc²` biphoton spectrum with a central stopband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiphotonSpectrum {
    /// Detuning at which the density first reaches zero (GHz).
    pub first_null_detuning: f64,
    /// Half-width of the blocked region around degeneracy (GHz).
    pub stopband_halfwidth: f64,
    /// Pairs per second emitted into the full spectrum.
    pub total_pair_flux: f64,
}

impl BiphotonSpectrum {
    pub fn new(first_null_detuning: f64, stopband_halfwidth: f64, total_pair_flux: f64) -> Result<Self> {
        let spectrum = Self {
            first_null_detuning,
            stopband_halfwidth,
            total_pair_flux,
        };
        spectrum.validate()?;
        Ok(spectrum)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.first_null_detuning > 0.0 && self.first_null_detuning.is_finite()) {
            return Err(Error::Domain(format!(
                "first_null_detuning must be positive, got {}",
                self.first_null_detuning
            )));
        }
        if !(self.stopband_halfwidth >= 0.0 && self.stopband_halfwidth.is_finite()) {
            return Err(Error::Domain(format!(
                "stopband_halfwidth must be non-negative, got {}",
                self.stopband_halfwidth
            )));
        }
        if !(self.total_pair_flux >= 0.0 && self.total_pair_flux.is_finite()) {
            return Err(Error::Domain(format!(
                "total_pair_flux must be non-negative, got {}",
                self.total_pair_flux
            )));
        }
        Ok(())
    }

    /// Relative spectral density, `sinc²(π·d/d₀)`, in `[0, 1]`.
    pub fn density(&self, detuning: f64) -> f64 {
        spectral_density(self, detuning)
    }

    /// Integral of the density over all positive detunings.
    ///
    /// `∫₀^∞ sinc²(πx/a) dx = a/2`.
    pub fn half_spectrum_integral(&self) -> f64 {
        self.first_null_detuning / 2.0
    }
}

/// Relative spectral density at `detuning`.
pub fn spectral_density(spectrum: &BiphotonSpectrum, detuning: f64) -> f64 {
    let x = PI * detuning / spectrum.first_null_detuning;
    if x.abs() < 1e-8 {
        // sinc(x)² ≈ 1 − x²/3 near the origin
        return 1.0 - x * x / 3.0;
    }
    let s = x.sin() / x;
    s * s
}

/// A contiguous band of detunings `[lower, upper]` in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSlice {
    pub lower: f64,
    pub upper: f64,
}

impl SpectralSlice {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::Domain(format!("slice bounds out of order: [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// The energy-matched partner slice.
    pub fn mirrored(&self) -> Self {
        Self {
            lower: -self.upper,
            upper: -self.lower,
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Energy-matched pair of slices, the unit of allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    /// 1-based, 1 is innermost.
    pub index: usize,
    pub signal: SpectralSlice,
    pub idler: SpectralSlice,
}

impl Channel {
    /// Builds a channel from its signal slice; the idler is the mirror image.
    pub fn from_signal(index: usize, signal: SpectralSlice) -> Self {
        Self {
            index,
            signal,
            idler: signal.mirrored(),
        }
    }

    /// `idler.lower = −signal.upper` and `idler.upper = −signal.lower`.
    pub fn is_energy_matched(&self) -> bool {
        self.idler.lower == -self.signal.upper && self.idler.upper == -self.signal.lower
    }

    /// Neither slice overlaps the stopband `(-h, h)`.
    pub fn clears_stopband(&self, stopband_halfwidth: f64) -> bool {
        self.signal.lower >= stopband_halfwidth && self.idler.upper <= -stopband_halfwidth
    }
}

/// Carves `channel_count` contiguous channels of width `slice_width` outward
/// from the stopband edge.
pub fn carve_grid(spectrum: &BiphotonSpectrum, slice_width: f64, channel_count: usize) -> Result<Vec<Channel>> {
    if !(slice_width > 0.0 && slice_width.is_finite()) {
        return Err(Error::Domain(format!("slice width must be positive, got {slice_width}")));
    }
    if channel_count == 0 {
        return Err(Error::Domain("channel count must be at least 1".into()));
    }
    let start = spectrum.stopband_halfwidth;
    Ok((1..=channel_count)
        .map(|i| {
            let signal = SpectralSlice {
                lower: start + (i - 1) as f64 * slice_width,
                upper: start + i as f64 * slice_width,
            };
            Channel::from_signal(i, signal)
        })
        .collect())
}

/// Composite midpoint integral of the density over `[lower, upper]`.
pub fn integrate_density(spectrum: &BiphotonSpectrum, lower: f64, upper: f64) -> f64 {
    if upper <= lower {
        return 0.0;
    }
    let steps = ((upper - lower) / QUADRATURE_STEP_GHZ).ceil().max(1.0) as usize;
    let h = (upper - lower) / steps as f64;
    (0..steps)
        .map(|k| spectral_density(spectrum, lower + (k as f64 + 0.5) * h))
        .sum::<f64>()
        * h
}

/// Pair flux carried by a channel (pairs/s).
pub fn channel_flux(spectrum: &BiphotonSpectrum, channel: &Channel) -> f64 {
    slice_flux(spectrum, &channel.signal)
}

/// Pair flux whose signal photon falls in `slice`.
pub fn slice_flux(spectrum: &BiphotonSpectrum, slice: &SpectralSlice) -> f64 {
    spectrum.total_pair_flux * integrate_density(spectrum, slice.lower, slice.upper)
        / spectrum.half_spectrum_integral()
}

/// Why a slice cannot be programmed on a given switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridViolation {
    /// The slice is narrower than the switch resolution.
    BelowResolution { channel: usize, width: f64, resolution: f64 },
    /// A slice edge does not land on the addressable pixel grid.
    OffGrid { channel: usize, boundary: f64, addressability: f64 },
}

impl std::fmt::Display for GridViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridViolation::BelowResolution { channel, width, resolution } => write!(
                f,
                "channel {channel}: slice width {width} GHz is below the {resolution} GHz resolution"
            ),
            GridViolation::OffGrid { channel, boundary, addressability } => write!(
                f,
                "channel {channel}: boundary {boundary} GHz is not a multiple of {addressability} GHz"
            ),
        }
    }
}

fn on_grid(value: f64, pitch: f64) -> bool {
    let ratio = value / pitch;
    (ratio - ratio.round()).abs() < 1e-9 * ratio.abs().max(1.0)
}

/// Checks every slice against the switch resolution and pixel pitch and
/// returns all violations found.
pub fn validate_grid(channels: &[Channel], wss: &WssModel) -> std::result::Result<(), Vec<GridViolation>> {
    let mut violations = Vec::new();
    for channel in channels {
        for slice in [&channel.signal, &channel.idler] {
            if slice.width() < wss.resolution - 1e-9 {
                violations.push(GridViolation::BelowResolution {
                    channel: channel.index,
                    width: slice.width(),
                    resolution: wss.resolution,
                });
            }
            for boundary in [slice.lower, slice.upper] {
                if !on_grid(boundary, wss.addressability) {
                    violations.push(GridViolation::OffGrid {
                        channel: channel.index,
                        boundary,
                        addressability: wss.addressability,
                    });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_spectrum() -> BiphotonSpectrum {
        BiphotonSpectrum::new(320.0, 12.0, 1.0e6).unwrap()
    }

    #[test]
    fn density_at_origin_and_null() {
        let s = default_spectrum();
        assert_eq!(spectral_density(&s, 0.0), 1.0);
        assert!(spectral_density(&s, 320.0).abs() < 1e-30);
    }

    #[test]
    fn density_at_half_null() {
        let s = default_spectrum();
        let expected = (2.0 / PI) * (2.0 / PI);
        assert!((spectral_density(&s, 160.0) - expected).abs() < 1e-12);
        assert!((expected - 0.4053).abs() < 1e-4);
    }

    #[test]
    fn default_grid_first_channel() {
        let s = default_spectrum();
        let grid = carve_grid(&s, 24.0, 12).unwrap();
        assert_eq!(grid.len(), 12);
        assert_eq!(grid[0].signal, SpectralSlice { lower: 12.0, upper: 36.0 });
        assert_eq!(grid[0].idler, SpectralSlice { lower: -36.0, upper: -12.0 });
        assert_eq!(grid[11].signal.upper, 300.0);
    }

    #[test]
    fn degenerate_grid() {
        let s = BiphotonSpectrum::new(320.0, 0.0, 1.0).unwrap();
        let grid = carve_grid(&s, 100.0, 1).unwrap();
        assert_eq!(grid[0].signal, SpectralSlice { lower: 0.0, upper: 100.0 });
        assert_eq!(grid[0].idler, SpectralSlice { lower: -100.0, upper: 0.0 });
    }

    #[test]
    fn carve_grid_rejects_bad_arguments() {
        let s = default_spectrum();
        assert!(carve_grid(&s, 0.0, 3).is_err());
        assert!(carve_grid(&s, 24.0, 0).is_err());
    }

    #[test]
    fn spectrum_invariants_enforced() {
        assert!(BiphotonSpectrum::new(0.0, 0.0, 1.0).is_err());
        assert!(BiphotonSpectrum::new(10.0, -1.0, 1.0).is_err());
        assert!(BiphotonSpectrum::new(10.0, 0.0, -1.0).is_err());
        assert!(SpectralSlice::new(3.0, 3.0).is_err());
    }

    #[test]
    fn wide_slice_carries_total_flux() {
        let s = BiphotonSpectrum::new(320.0, 0.0, 1.0e6).unwrap();
        let ch = Channel::from_signal(1, SpectralSlice::new(0.0, 50.0 * 320.0).unwrap());
        let flux = channel_flux(&s, &ch);
        assert!(flux <= 1.0e6 * (1.0 + 1e-9));
        assert!(flux >= 0.99e6, "{flux}");
    }

    fn wss(resolution: f64, addressability: f64) -> WssModel {
        WssModel {
            port_count: 4,
            insertion_loss: 4.5,
            resolution,
            addressability,
            total_bandwidth: 9600.0,
        }
    }

    #[test]
    fn default_grid_is_programmable() {
        let grid = carve_grid(&default_spectrum(), 24.0, 12).unwrap();
        assert!(validate_grid(&grid, &wss(20.0, 4.0)).is_ok());
    }

    #[test]
    fn narrow_slice_is_flagged() {
        let s = BiphotonSpectrum::new(320.0, 12.0, 1.0).unwrap();
        let grid = carve_grid(&s, 10.0, 1).unwrap();
        let violations = validate_grid(&grid, &wss(20.0, 2.0)).unwrap_err();
        // both the signal and idler slice are too narrow
        assert_eq!(violations.len(), 2);
        assert!(violations.iter().all(|v| matches!(v, GridViolation::BelowResolution { .. })));
    }

    #[test]
    fn off_grid_boundary_is_flagged() {
        let ch = Channel::from_signal(1, SpectralSlice::new(13.0, 37.0).unwrap());
        let violations = validate_grid(&[ch], &wss(20.0, 4.0)).unwrap_err();
        // 13, 37, -37, -13: all four edges miss the 4 GHz pitch
        assert_eq!(violations.len(), 4);
        assert!(violations
            .iter()
            .all(|v| matches!(v, GridViolation::OffGrid { .. })));
    }

    #[test]
    fn all_violations_reported() {
        let ch = Channel::from_signal(3, SpectralSlice::new(13.0, 23.0).unwrap());
        let violations = validate_grid(&[ch], &wss(20.0, 4.0)).unwrap_err();
        assert_eq!(violations.len(), 6);
    }
}
