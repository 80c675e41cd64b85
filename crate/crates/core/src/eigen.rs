//! Bound vibrational states of a single well by Fourier-grid Hamiltonian
//! diagonalisation, plus the spectral descriptors derived from them.

use faer::{Mat, Side};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ChannelField, RadialGrid, TwoChannelState};

/// Eigenvalues at or above this energy count as continuum.
pub const BOUND_THRESHOLD: f64 = -1e-6;

/// Number of levels (n = 0..=8) entering the anharmonic fit.
pub const FIT_LEVELS: usize = 9;

#[derive(Debug, Clone)]
pub struct VibrationalBasis {
    grid: RadialGrid,
    energies: Vec<f64>,
    // real eigenfunctions, dr-normalised
    states: Vec<Vec<f64>>,
    truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstants {
    pub omega_e: f64,
    pub omega_e_x_e: f64,
    pub d_e: f64,
    /// RMS deviation of the quadratic fit (hartree).
    pub residual: f64,
}

/// Kinetic energy `k^2 / 2 mu` on the FFT-ordered momentum grid.
pub fn kinetic_spectrum(grid: &RadialGrid, mass: f64) -> Vec<f64> {
    grid.k_values().into_iter().map(|k| k * k / (2.0 * mass)).collect()
}

/// First row of the Fourier-grid kinetic matrix, `T_ij = row[(i - j) mod n]`.
fn kinetic_row(grid: &RadialGrid, mass: f64) -> Vec<f64> {
    let n = grid.len();
    let mut buf: Vec<Complex64> = kinetic_spectrum(grid, mass).into_iter().map(|t| Complex64::new(t, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

/// `(T + V) psi` with the kinetic term applied spectrally.
pub fn apply_hamiltonian(grid: &RadialGrid, potential: &[f64], mass: f64, psi: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = psi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (b, t) in buf.iter_mut().zip(kinetic_spectrum(grid, mass)) {
        *b *= t / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().zip(psi).zip(potential).map(|((b, p), v)| b.re + v * p).collect()
}

/// Lowest `count` bound eigenpairs of `T + V` on the grid.
///
/// If the well supports fewer than `count` states all of them are returned and
/// [`VibrationalBasis::truncated`] is set.
pub fn solve_bound_states(grid: &RadialGrid, potential: &[f64], mass: f64, count: usize) -> Result<VibrationalBasis> {
    let n = grid.len();
    if potential.len() != n {
        return Err(Error::GridMismatch);
    }
    if !(mass > 0.0) {
        return Err(Error::param("reduced_mass", "must be positive"));
    }
    let row = kinetic_row(grid, mass);
    let h = Mat::<f64>::from_fn(n, n, |i, j| {
        let t = row[(i + n - j) % n];
        if i == j {
            t + potential[i]
        } else {
            t
        }
    });
    let eig = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = eig.S();
    let vectors = eig.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let bound: Vec<usize> = order.into_iter().filter(|&i| values[i] < BOUND_THRESHOLD).collect();
    let truncated = bound.len() < count;
    if truncated {
        log::debug!("requested {count} bound states, the well supports {}", bound.len());
    }

    let scale = 1.0 / grid.dr().sqrt();
    let mut energies = Vec::new();
    let mut states = Vec::new();
    for &col in bound.iter().take(count) {
        let mut psi: Vec<f64> = (0..n).map(|i| vectors[(i, col)] * scale).collect();
        fix_phase(&mut psi);
        energies.push(values[col]);
        states.push(psi);
    }
    Ok(VibrationalBasis { grid: *grid, energies, states, truncated })
}

/// Makes the leftmost lobe of a real eigenfunction positive.
fn fix_phase(psi: &mut [f64]) {
    let peak = psi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if let Some(first) = psi.iter().find(|p| p.abs() > 1e-3 * peak) {
        if *first < 0.0 {
            psi.iter_mut().for_each(|p| *p = -*p);
        }
    }
}

impl VibrationalBasis {
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, n: usize) -> Result<f64> {
        self.energies.get(n).copied().ok_or(Error::IndexOutOfRange { index: n, len: self.len() })
    }

    /// True when fewer bound states exist than were requested.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn state_values(&self, n: usize) -> &[f64] {
        &self.states[n]
    }

    pub fn state(&self, n: usize) -> Result<ChannelField> {
        let v = self.states.get(n).ok_or(Error::IndexOutOfRange { index: n, len: self.len() })?;
        ChannelField::from_real(self.grid, v)
    }

    /// The first `count` states.
    pub fn truncate(&self, count: usize) -> Self {
        let count = count.min(self.len());
        Self {
            grid: self.grid,
            energies: self.energies[..count].to_vec(),
            states: self.states[..count].to_vec(),
            truncated: self.truncated,
        }
    }

    /// `<n|field>` for every basis state.
    pub fn project_field(&self, field: &ChannelField) -> Result<Vec<Complex64>> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let dr = self.grid.dr();
        let amps = field.amplitudes();
        Ok(self.states.iter().map(|psi| psi.iter().zip(amps).map(|(p, a)| a * *p).sum::<Complex64>() * dr).collect())
    }

    /// Bound-state coefficients `a_n = <n|psi_g>` of a two-channel state.
    pub fn project(&self, state: &TwoChannelState) -> Result<Vec<Complex64>> {
        self.project_field(&state.g)
    }

    /// `sum_n c_n |n>` on the grid.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> ChannelField {
        let mut amps = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (c, psi) in coeffs.iter().zip(&self.states) {
            amps.iter_mut().zip(psi).for_each(|(a, p)| *a += c * p);
        }
        ChannelField::from_amplitudes(self.grid, amps).expect("basis length matches grid")
    }

    /// `(E_n - E_m) / hbar` in atomic units.
    pub fn beat_frequency(&self, n: usize, m: usize) -> Result<f64> {
        Ok(self.energy(n)? - self.energy(m)?)
    }

    /// `<n| f(R) |m>` for all pairs, symmetric.
    #[allow(clippy::needless_range_loop)]
    pub fn matrix_elements(&self, f: &[f64]) -> Result<Vec<Vec<f64>>> {
        if f.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        let dr = self.grid.dr();
        let k = self.len();
        let weighted: Vec<Vec<f64>> =
            self.states.iter().map(|psi| psi.iter().zip(f).map(|(p, v)| p * v).collect()).collect();
        let mut out = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let v = weighted[i].iter().zip(&self.states[j]).map(|(a, b)| a * b).sum::<f64>() * dr;
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        Ok(out)
    }

    pub fn fit_anharmonic(&self) -> Result<SpectralConstants> {
        fit_anharmonic_levels(&self.energies)
    }
}

/// Least-squares fit of `E_n = -D_e + w (n+1/2) - wx (n+1/2)^2` over n = 0..=8
/// (or all levels when fewer are given; at least five are required).
pub fn fit_anharmonic_levels(energies: &[f64]) -> Result<SpectralConstants> {
    if energies.len() < 5 {
        return Err(Error::TooFewStates { needed: 5, found: energies.len() });
    }
    let levels = &energies[..energies.len().min(FIT_LEVELS)];
    // normal equations for the basis (1, v, v^2)
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (n, &e) in levels.iter().enumerate() {
        let v = n as f64 + 0.5;
        let row = [1.0, v, v * v];
        for i in 0..3 {
            atb[i] += row[i] * e;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let c = solve3(ata, atb);
    let residual = (levels
        .iter()
        .enumerate()
        .map(|(n, &e)| {
            let v = n as f64 + 0.5;
            (c[0] + c[1] * v + c[2] * v * v - e).powi(2)
        })
        .sum::<f64>()
        / levels.len() as f64)
        .sqrt();
    Ok(SpectralConstants { omega_e: c[1], omega_e_x_e: -c[2], d_e: -c[0], residual })
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    let mut x = [0.0; 3];
    for (k, xk) in x.iter_mut().enumerate() {
        let mut m = a;
        for i in 0..3 {
            m[i][k] = b[i];
        }
        *xk = det(&m) / d;
    }
    x
}
