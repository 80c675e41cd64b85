//! Hartree atomic units internally; conversions to laboratory units live here.

/// One atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 0.024_188_843_265_857;
/// One hartree in electron volts.
pub const HARTREE_EV: f64 = 27.211_386_245_988;
/// One hartree in wavenumbers (cm^-1).
pub const HARTREE_CM: f64 = 219_474.631_363_2;
/// Intensity (W/cm^2) of a field with unit amplitude in atomic units, I = eps0 c F^2 / 2.
pub const AU_INTENSITY_W_CM2: f64 = 3.509_45e16;
/// hc in hartree * nm: photon energy (hartree) = HC_HARTREE_NM / wavelength(nm).
pub const HC_HARTREE_NM: f64 = 45.563_352_529;
/// Deuteron mass in electron masses.
pub const DEUTERON_MASS: f64 = 3_670.482_967_88;
/// Nuclear reduced mass of D2 / D2+ used by default.
pub const D2_REDUCED_MASS: f64 = 1835.24;

pub fn fs_to_au(t_fs: f64) -> f64 {
    t_fs / AU_TIME_FS
}

pub fn au_to_fs(t_au: f64) -> f64 {
    t_au * AU_TIME_FS
}

/// Carrier angular frequency (a.u.) for a wavelength in nm.
pub fn wavelength_to_omega(lambda_nm: f64) -> f64 {
    HC_HARTREE_NM / lambda_nm
}

/// Period in fs of an angular frequency given in a.u.
pub fn period_fs(omega_au: f64) -> f64 {
    au_to_fs(std::f64::consts::TAU / omega_au)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_time() {
        assert!((au_to_fs(fs_to_au(293.0)) - 293.0).abs() < 1e-12);
    }

    #[test]
    fn carrier_790nm() {
        // 790 nm photon is 1.569 eV
        let w = wavelength_to_omega(790.0);
        assert!((w * HARTREE_EV - 1.5694).abs() < 1e-3);
        // optical period ~2.64 fs
        assert!((period_fs(w) - 2.635).abs() < 0.01);
    }
}
