//! Uniform radial grid, complex channel fields and the two-channel state.
//!
//! Fields are stored as point samples normalised with the grid spacing, so
//! `sum |psi_j|^2 dr` is the probability. Momentum-space fields use the
//! unitary convention
//!
//! ```text
//! phi(k_m) = dr / sqrt(2 pi) * sum_j psi_j exp(-i k_m (R_j - r_min))
//! ```
//!
//! with `k_m` in FFT order (zero frequency first, negative frequencies in the
//! upper half), which makes `sum |phi|^2 dk == sum |psi|^2 dr`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_min: f64,
    r_max: f64,
    n_points: usize,
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_min > 0.0) || !r_min.is_finite() {
            return Err(Error::InvalidGrid(format!("r_min must be positive, got {r_min}")));
        }
        if !(r_max > r_min) || !r_max.is_finite() {
            return Err(Error::InvalidGrid(format!("r_max ({r_max}) must exceed r_min ({r_min})")));
        }
        if n_points < MIN_POINTS || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n_points must be a power of two >= {MIN_POINTS}, got {n_points}")));
        }
        Ok(Self { r_min, r_max, n_points })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / self.n_points as f64
    }

    pub fn dk(&self) -> f64 {
        TAU / (self.n_points as f64 * self.dr())
    }

    /// Position of sample `i`; the last sample sits one spacing below `r_max`.
    pub fn r(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.dr()
    }

    pub fn r_values(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.r(i)).collect()
    }

    /// Momentum of FFT bin `m` (FFT ordering).
    pub fn k(&self, m: usize) -> f64 {
        let n = self.n_points;
        let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
        signed * self.dk()
    }

    pub fn k_values(&self) -> Vec<f64> {
        (0..self.n_points).map(|m| self.k(m)).collect()
    }

    /// Index of the sample nearest to `r`, clamped to the grid.
    pub fn index_of(&self, r: f64) -> usize {
        let i = ((r - self.r_min) / self.dr()).round();
        i.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self { r_min: 0.1, r_max: 40.0, n_points: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelField {
    grid: RadialGrid,
    amplitudes: Vec<Complex64>,
}

impl ChannelField {
    pub fn zeros(grid: RadialGrid) -> Self {
        Self { grid, amplitudes: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_amplitudes(grid: RadialGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} amplitudes for a {}-point grid", amplitudes.len(), grid.len())));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = (0..grid.len()).map(|i| f(grid.r(i))).collect();
        Self { grid, amplitudes }
    }

    pub fn from_real(grid: RadialGrid, values: &[f64]) -> Result<Self> {
        Self::from_amplitudes(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dr()
    }

    /// `<self|other> = sum conj(self) * other * dr`
    pub fn inner_product(&self, other: &ChannelField) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.dr())
    }

    pub fn expectation_position(&self) -> Result<f64> {
        let norm: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        let moment: f64 = self.amplitudes.iter().enumerate().map(|(i, a)| a.norm_sqr() * self.grid.r(i)).sum();
        Ok(moment / norm)
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
    }

    /// Rescale to unit norm; fails on the zero field.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_squared();
        if n <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        self.scale(Complex64::new(1.0 / n.sqrt(), 0.0));
        Ok(())
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: Complex64, other: &ChannelField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        self.amplitudes.iter_mut().zip(&other.amplitudes).for_each(|(a, b)| *a += factor * b);
        Ok(())
    }

    pub fn to_momentum(&self) -> MomentumField {
        let n = self.grid.len();
        let mut buf = self.amplitudes.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = self.grid.dr() / (2.0 * PI).sqrt();
        buf.iter_mut().for_each(|a| *a *= scale);
        MomentumField { grid: self.grid, amplitudes: buf }
    }
}

/// A channel field in the momentum representation (FFT ordering).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumField {
    grid: RadialGrid,
    amplitudes: Vec<Complex64>,
}

impl MomentumField {
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dk()
    }

    pub fn from_momentum(&self) -> ChannelField {
        let n = self.grid.len();
        let mut buf = self.amplitudes.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        // inverse of dr/sqrt(2pi) * DFT is sqrt(2pi)/(n dr) * IDFT
        let scale = (2.0 * PI).sqrt() / (n as f64 * self.grid.dr());
        buf.iter_mut().for_each(|a| *a *= scale);
        ChannelField { grid: self.grid, amplitudes: buf }
    }
}

/// Nuclear wavefunction on the gerade (bound) and ungerade (repulsive) surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoChannelState {
    pub g: ChannelField,
    pub u: ChannelField,
}

impl TwoChannelState {
    pub fn new(g: ChannelField, u: ChannelField) -> Result<Self> {
        if g.grid != u.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self { g, u })
    }

    /// Places `g` on the gerade surface with an empty ungerade channel.
    pub fn on_gerade(g: ChannelField) -> Self {
        let u = ChannelField::zeros(g.grid);
        Self { g, u }
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self { g: ChannelField::zeros(grid), u: ChannelField::zeros(grid) }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.g.grid
    }

    pub fn norm_squared(&self) -> f64 {
        self.g.norm_squared() + self.u.norm_squared()
    }

    pub fn populations(&self) -> (f64, f64) {
        (self.g.norm_squared(), self.u.norm_squared())
    }

    pub fn is_finite(&self) -> bool {
        self.g.amplitudes.iter().chain(&self.u.amplitudes).all(|a| a.re.is_finite() && a.im.is_finite())
    }
}
