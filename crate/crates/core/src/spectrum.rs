//! Beat spectra of uniformly sampled yield signals.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{au_to_fs, fs_to_au};

/// Fewest samples accepted by [`beat_spectrum`].
pub const MIN_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n == 1 => vec![1.0],
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub window: Window,
    /// Transform length is the next power of two at or above `zero_pad * n`.
    pub zero_pad: usize,
    pub remove_mean: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { window: Window::Hann, zero_pad: 4, remove_mean: true }
    }
}

/// One-sided magnitude spectrum `|X_k|`, `k = 0..=fft_size/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub frequencies_au: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fft_size: usize,
    pub n_samples: usize,
    pub spacing_fs: f64,
    pub options: SpectrumOptions,
    /// Sum of the window weights, for amplitude normalisation.
    pub window_sum: f64,
}

impl SpectralDensity {
    /// Beat periods `2 pi / omega` in fs (infinite at zero frequency).
    pub fn periods_fs(&self) -> Vec<f64> {
        self.frequencies_au.iter().map(|&w| if w > 0.0 { au_to_fs(2.0 * PI / w) } else { f64::INFINITY }).collect()
    }

    /// Spacing of the padded frequency grid (a.u.).
    pub fn bin_width_au(&self) -> f64 {
        2.0 * PI / (self.fft_size as f64 * fs_to_au(self.spacing_fs))
    }

    /// Frequency resolution of the unpadded record, `2 pi / (N dt)` (a.u.).
    pub fn resolution_au(&self) -> f64 {
        2.0 * PI / (self.n_samples as f64 * fs_to_au(self.spacing_fs))
    }

    /// Magnitude scaled so a cosine of amplitude A peaks at about A.
    pub fn amplitudes(&self) -> Vec<f64> {
        let s = 2.0 / self.window_sum;
        self.magnitudes.iter().map(|m| m * s).collect()
    }

    /// Largest magnitude within `half_width` (a.u.) of `omega`.
    pub fn max_near(&self, omega: f64, half_width: f64) -> f64 {
        self.frequencies_au
            .iter()
            .zip(&self.magnitudes)
            .filter(|(w, _)| (*w - omega).abs() <= half_width)
            .map(|(_, m)| *m)
            .fold(0.0, f64::max)
    }

    /// Local maxima above `rel_threshold` times the global maximum (excluding DC),
    /// strongest first.
    pub fn peaks(&self, rel_threshold: f64) -> Vec<Peak> {
        let m = &self.magnitudes;
        let top = m.iter().skip(1).cloned().fold(0.0, f64::max);
        let mut out: Vec<Peak> = (1..m.len().saturating_sub(1))
            .filter(|&k| m[k] > m[k - 1] && m[k] >= m[k + 1] && m[k] >= rel_threshold * top && m[k] > 0.0)
            .map(|k| Peak { index: k, frequency_au: self.frequencies_au[k], magnitude: m[k] })
            .collect();
        out.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub frequency_au: f64,
    pub magnitude: f64,
}

/// Mean-removed, windowed, zero-padded FFT magnitude of `values` sampled at `times_fs`.
pub fn beat_spectrum(times_fs: &[f64], values: &[f64], options: &SpectrumOptions) -> Result<SpectralDensity> {
    let n = values.len();
    if times_fs.len() != n {
        return Err(Error::Series(format!("{} times for {} values", times_fs.len(), n)));
    }
    if n < MIN_SAMPLES {
        return Err(Error::Series(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Series("non-finite sample".into()));
    }
    let dt = times_fs[1] - times_fs[0];
    if !(dt > 0.0) {
        return Err(Error::Series("times must increase".into()));
    }
    let tol = 1e-6 * dt.abs() * n as f64;
    if times_fs.iter().enumerate().any(|(i, t)| (t - times_fs[0] - i as f64 * dt).abs() > tol.max(1e-9)) {
        return Err(Error::Series("samples are not uniformly spaced".into()));
    }
    if options.zero_pad == 0 {
        return Err(Error::param("zero_pad", "must be >= 1"));
    }

    let mean = if options.remove_mean { values.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let w = options.window.weights(n);
    let fft_size = (n * options.zero_pad).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    for (b, (v, wi)) in buf.iter_mut().zip(values.iter().zip(&w)) {
        *b = Complex64::new((v - mean) * wi, 0.0);
    }
    FftPlanner::new().plan_fft_forward(fft_size).process(&mut buf);

    let dw = 2.0 * PI / (fft_size as f64 * fs_to_au(dt));
    let half = fft_size / 2 + 1;
    Ok(SpectralDensity {
        frequencies_au: (0..half).map(|k| k as f64 * dw).collect(),
        magnitudes: buf[..half].iter().map(|c| c.norm()).collect(),
        fft_size,
        n_samples: n,
        spacing_fs: dt,
        options: *options,
        window_sum: w.iter().sum(),
    })
}
