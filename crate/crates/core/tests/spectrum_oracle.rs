use flexnet_core::spectrum::{carve_grid, channel_flux, spectral_density, BiphotonSpectrum, SpectralSlice, slice_flux};

/// Fraction of the one-sided pair flux in each default channel, from an
/// adaptive Gauss–Kronrod integration of sinc² at 1e-13 relative accuracy.
const REFERENCE_FRACTIONS: [f64; 12] = [
    0.1470237346629079,
    0.13902866125062183,
    0.12647715090767248,
    0.11043483957938305,
    0.09221726929268079,
    0.0732423770329843,
    0.05487721138312486,
    0.038298545544720605,
    0.024384477679843513,
    0.013649181998996566,
    0.006226500003379423,
    0.0019010584525437127,
];

#[test]
fn default_grid_matches_reference_quadrature() {
    let sp = BiphotonSpectrum::new(320.0, 12.0, 1.0).unwrap();
    let grid = carve_grid(&sp, 24.0, 12).unwrap();
    for (c, expected) in grid.iter().zip(REFERENCE_FRACTIONS) {
        let got = channel_flux(&sp, c);
        assert!((got - expected).abs() <= 1e-6 * expected, "channel {}: {got} vs {expected}", c.index);
    }
    assert!(channel_flux(&sp, &grid[0]) > channel_flux(&sp, &grid[11]));
}

#[test]
fn half_null_density() {
    let sp = BiphotonSpectrum::new(320.0, 12.0, 1.0).unwrap();
    assert!((spectral_density(&sp, 160.0) - 0.40528473456935116).abs() < 1e-12);
}

#[test]
fn wide_slice_collects_nearly_everything() {
    // ∫₀^{50a} sinc² / (a/2) = 0.99797 by the same reference integration
    let sp = BiphotonSpectrum::new(320.0, 0.0, 2.5e6).unwrap();
    let wide = SpectralSlice::new(0.0, 50.0 * 320.0).unwrap();
    let f = slice_flux(&sp, &wide);
    assert!(f >= 0.99 * sp.total_pair_flux);
    assert!((f / sp.total_pair_flux - 0.997973617386091).abs() < 1e-6);
}
