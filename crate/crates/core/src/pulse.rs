//! Gaussian-envelope laser pulses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{fs_to_au, wavelength_to_omega, AU_INTENSITY_W_CM2};

/// Peak field (a.u.) from cycle-averaged intensity, inverting `I = eps0 c F0^2 / 2`.
pub fn intensity_to_field(intensity_w_cm2: f64) -> f64 {
    (intensity_w_cm2.max(0.0) / AU_INTENSITY_W_CM2).sqrt()
}

/// `F(t) = F0 cos(w (t - tau) + phi) exp(-2 ln2 (t - tau)^2 / W^2)`.
///
/// W is the FWHM of the intensity envelope: the field envelope is `F0 / sqrt(2)`
/// at `t = tau +- W/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserPulse {
    pub intensity_w_cm2: f64,
    pub wavelength_nm: f64,
    pub center_fs: f64,
    pub fwhm_fs: f64,
    pub carrier_phase: f64,
    // cached atomic-unit quantities
    amplitude: f64,
    omega: f64,
    center: f64,
    fwhm: f64,
    sign: f64,
}

impl LaserPulse {
    pub fn new(intensity_w_cm2: f64, wavelength_nm: f64, center_fs: f64, fwhm_fs: f64) -> Result<Self> {
        if !(intensity_w_cm2 >= 0.0) || !intensity_w_cm2.is_finite() {
            return Err(Error::param("intensity", format!("must be >= 0, got {intensity_w_cm2}")));
        }
        if !(wavelength_nm > 0.0) {
            return Err(Error::param("wavelength", format!("must be positive, got {wavelength_nm}")));
        }
        if !(fwhm_fs > 0.0) {
            return Err(Error::param("fwhm", format!("must be positive, got {fwhm_fs}")));
        }
        if !center_fs.is_finite() {
            return Err(Error::param("tau", "must be finite"));
        }
        Ok(Self {
            intensity_w_cm2,
            wavelength_nm,
            center_fs,
            fwhm_fs,
            carrier_phase: 0.0,
            amplitude: intensity_to_field(intensity_w_cm2),
            omega: wavelength_to_omega(wavelength_nm),
            center: fs_to_au(center_fs),
            fwhm: fs_to_au(fwhm_fs),
            sign: 1.0,
        })
    }

    pub fn with_carrier_phase(mut self, phase: f64) -> Self {
        self.carrier_phase = phase;
        self
    }

    /// Same pulse re-centred at `center_fs`.
    pub fn centered_at(self, center_fs: f64) -> Self {
        Self { center_fs, center: fs_to_au(center_fs), ..self }
    }

    /// The pulse with `F0 -> -F0`.
    pub fn negated(self) -> Self {
        Self { sign: -self.sign, ..self }
    }

    pub fn with_intensity(self, intensity_w_cm2: f64) -> Self {
        Self { intensity_w_cm2, amplitude: intensity_to_field(intensity_w_cm2), ..self }
    }

    /// Signed peak field F0 in a.u.
    pub fn amplitude(&self) -> f64 {
        self.sign * self.amplitude
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn center_au(&self) -> f64 {
        self.center
    }

    pub fn fwhm_au(&self) -> f64 {
        self.fwhm
    }

    pub fn envelope(&self, t_au: f64) -> f64 {
        let x = (t_au - self.center) / self.fwhm;
        (-2.0 * std::f64::consts::LN_2 * x * x).exp()
    }

    pub fn field_at(&self, t_au: f64) -> f64 {
        self.amplitude() * (self.omega * (t_au - self.center) + self.carrier_phase).cos() * self.envelope(t_au)
    }

    /// `[tau - k W, tau + k W]` in a.u.
    pub fn window_au(&self, half_widths: f64) -> (f64, f64) {
        (self.center - half_widths * self.fwhm, self.center + half_widths * self.fwhm)
    }
}

/// Sum of the fields of all pulses at `t_au`.
pub fn total_field(pulses: &[LaserPulse], t_au: f64) -> f64 {
    pulses.iter().map(|p| p.field_at(t_au)).sum()
}
