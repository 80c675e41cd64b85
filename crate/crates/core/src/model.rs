//! Second-order impulse model of the control pulse.
//!
//! The intermediate u-state continuum is collapsed onto a single energy `E_bar`
//! (closure), leaving the g-well couplings `d2[n][m] = <n| d(R)^2 |m>`. A
//! half-cycle square impulse of amplitude `F0` and duration `W'` maps the
//! interaction-picture amplitudes as
//!
//! ```text
//! a_n -> a_n (1 - i k_nn) - i k_{n,n-1} a_{n-1} e^{i(E_n - E_{n-1}) t}
//!                         - i k_{n,n+1} a_{n+1} e^{i(E_n - E_{n+1}) t}
//! k_{n,m} = F0^2 d2[n][m] / (E_m - E_bar) * (e^{i (E_n - E_m) W'} - 1) / (i (E_n - E_m))
//! ```
//!
//! with `t` the impulse start. A Gaussian pulse is treated as a train of such
//! impulses, one per half-cycle, each carrying the same `integral F^2 dt` as the
//! half-cycle it replaces.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{SpectralConstants, VibrationalBasis};
use crate::error::{Error, Result};
use crate::pulse::LaserPulse;
use crate::scan::{chessboard_contrast, PopulationMap, CONTRAST_MAX_LEVEL};
use crate::units::{au_to_fs, fs_to_au};

/// Symmetric matrix of `<n| d^2 |m>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    d2: Vec<Vec<f64>>,
}

impl CouplingMatrix {
    pub fn from_rows(d2: Vec<Vec<f64>>) -> Result<Self> {
        let n = d2.len();
        if d2.iter().any(|r| r.len() != n) {
            return Err(Error::param("d2", "matrix must be square"));
        }
        Ok(Self { d2 })
    }

    pub fn len(&self) -> usize {
        self.d2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d2.is_empty()
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.d2[n][m]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.d2
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.d2[n][n]).collect()
    }

    /// `min |d2[n][n+-1]| / max |d2[n][n+-3]|` over the neighbours that exist.
    pub fn selection_ratio(&self, n: usize) -> Option<f64> {
        let k = self.len();
        let near: Vec<f64> = [n.checked_sub(1), Some(n + 1)]
            .into_iter()
            .flatten()
            .filter(|&m| m < k)
            .map(|m| self.d2[n][m].abs())
            .collect();
        let far: Vec<f64> = [n.checked_sub(3), Some(n + 3)]
            .into_iter()
            .flatten()
            .filter(|&m| m < k)
            .map(|m| self.d2[n][m].abs())
            .collect();
        if near.is_empty() || far.is_empty() || n >= k {
            return None;
        }
        let far_max = far.iter().cloned().fold(0.0, f64::max);
        Some(near.iter().cloned().fold(f64::INFINITY, f64::min) / far_max)
    }
}

/// `<n| d^2 |m>` over the first `n_max` basis states.
pub fn coupling_matrix(basis: &VibrationalBasis, dipole: &[f64], n_max: usize) -> Result<CouplingMatrix> {
    if dipole.len() != basis.grid().len() {
        return Err(Error::GridMismatch);
    }
    let d2: Vec<f64> = dipole.iter().map(|d| d * d).collect();
    CouplingMatrix::from_rows(basis.truncate(n_max).matrix_elements(&d2)?)
}

/// `(e^{i x W} - 1) / (i x)`, tending to `W` as `x -> 0`.
fn phase_integral(x: f64, w: f64) -> Complex64 {
    let xw = x * w;
    if xw.abs() < 1e-6 {
        // series to second order
        Complex64::new(w * (1.0 - xw * xw / 6.0), w * xw / 2.0)
    } else {
        (Complex64::from_polar(1.0, xw) - 1.0) / Complex64::new(0.0, x)
    }
}

/// Full impulse coupling `k_{n,m}`.
pub fn kappa(
    n: usize,
    m: usize,
    f0: f64,
    w_prime: f64,
    energies: &[f64],
    d2: &CouplingMatrix,
    e_bar: f64,
) -> Result<Complex64> {
    let denom = intermediate_gap(n, m, energies, d2, e_bar)?;
    Ok(f0 * f0 * d2.get(n, m) / denom * phase_integral(energies[n] - energies[m], w_prime))
}

/// Short-impulse limit `F0^2 W' d2[n][m] / (E_m - E_bar)`.
pub fn kappa_short(
    n: usize,
    m: usize,
    f0: f64,
    w_prime: f64,
    energies: &[f64],
    d2: &CouplingMatrix,
    e_bar: f64,
) -> Result<f64> {
    let denom = intermediate_gap(n, m, energies, d2, e_bar)?;
    Ok(f0 * f0 * w_prime * d2.get(n, m) / denom)
}

fn intermediate_gap(n: usize, m: usize, energies: &[f64], d2: &CouplingMatrix, e_bar: f64) -> Result<f64> {
    let len = energies.len().min(d2.len());
    for idx in [n, m] {
        if idx >= len {
            return Err(Error::IndexOutOfRange { index: idx, len });
        }
    }
    let denom = energies[m] - e_bar;
    if !(denom < 0.0) {
        return Err(Error::UnboundIntermediate { index: m, energy: energies[m], closure: e_bar });
    }
    Ok(denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaMatrix {
    pub kappa: Vec<Vec<Complex64>>,
    pub f0: f64,
    pub w_prime: f64,
    pub e_bar: f64,
}

impl KappaMatrix {
    pub fn new(energies: &[f64], d2: &CouplingMatrix, f0: f64, w_prime: f64, e_bar: f64) -> Result<Self> {
        let k = energies.len().min(d2.len());
        let kappa = (0..k)
            .map(|n| (0..k).map(|m| kappa(n, m, f0, w_prime, energies, d2, e_bar)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kappa, f0, w_prime, e_bar })
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// The same impulse with peak field `f0`.
    pub fn with_field(&self, f0: f64) -> Self {
        let s = if self.f0 == 0.0 { 0.0 } else { (f0 / self.f0).powi(2) };
        Self { kappa: self.kappa.iter().map(|r| r.iter().map(|k| k * s).collect()).collect(), f0, ..*self }
    }
}

/// One impulse starting at `t` (a.u.) applied to interaction-picture amplitudes.
pub fn apply_impulse(a: &[Complex64], t: f64, kappa: &KappaMatrix, energies: &[f64]) -> Vec<Complex64> {
    let k = a.len().min(kappa.len()).min(energies.len());
    let i = Complex64::new(0.0, 1.0);
    let mut out = a.to_vec();
    for n in 0..k {
        let mut v = a[n] * (1.0 - i * kappa.kappa[n][n]);
        if n > 0 {
            v -= i * kappa.kappa[n][n - 1] * a[n - 1] * Complex64::from_polar(1.0, (energies[n] - energies[n - 1]) * t);
        }
        if n + 1 < k {
            v -= i * kappa.kappa[n][n + 1] * a[n + 1] * Complex64::from_polar(1.0, (energies[n] - energies[n + 1]) * t);
        }
        out[n] = v;
    }
    out
}

/// Half-cycle square impulses standing in for a Gaussian pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseTrain {
    /// Duration of each impulse, `pi / omega` (a.u.).
    pub w_prime: f64,
    /// `(start time, amplitude)` in a.u., time ordered.
    pub impulses: Vec<(f64, f64)>,
}

impl ImpulseTrain {
    /// Impulses centred on the carrier extrema within `tau +- half_widths * W`.
    /// Each amplitude is `F_env / sqrt(2)`, matching the half-cycle's `integral F^2 dt`.
    pub fn from_pulse(pulse: &LaserPulse, half_widths: f64) -> Self {
        let w = pulse.omega();
        let w_prime = PI / w;
        let tau = pulse.center_au();
        let half = half_widths * pulse.fwhm_au();
        let k_lo = ((-half * w + pulse.carrier_phase) / PI).ceil() as i64;
        let k_hi = ((half * w + pulse.carrier_phase) / PI).floor() as i64;
        let impulses = (k_lo..=k_hi)
            .map(|k| {
                let tk = tau + (k as f64 * PI - pulse.carrier_phase) / w;
                (tk - 0.5 * w_prime, pulse.amplitude().abs() * pulse.envelope(tk) / SQRT_2)
            })
            .collect();
        Self { w_prime, impulses }
    }

    /// `sum_k F_k^2 W'`, the train's second-order strength.
    pub fn fluence(&self) -> f64 {
        self.impulses.iter().map(|(_, f)| f * f).sum::<f64>() * self.w_prime
    }
}

/// Coupling data and closure energy for a truncated basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeModel {
    pub coupling: CouplingMatrix,
    pub energies: Vec<f64>,
    pub e_bar: f64,
}

/// Amplitude and phase of one state after the pulse, relative to free evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    pub n: usize,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceTimes {
    /// `pi / (2 w_e x_e)` in fs.
    pub fractional_revival_fs: f64,
    /// `pi / w_e` in fs.
    pub parity_flip_interval_fs: f64,
}

pub fn predict_interference_times(c: &SpectralConstants) -> InterferenceTimes {
    InterferenceTimes {
        fractional_revival_fs: au_to_fs(PI / (2.0 * c.omega_e_x_e)),
        parity_flip_interval_fs: au_to_fs(PI / c.omega_e),
    }
}

/// Per-level check of the destructive-interference conditions at one delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceDiagnostic {
    pub n: usize,
    /// `k_nn - (E_n - E_{n-1}) tau - pi/2`, wrapped to (-pi, pi].
    pub phase_mismatch: f64,
    /// `(|k_{n,n-1} a_{n-1}| + |k_{n,n+1} a_{n+1}|) / |a_n (1 - i k_nn)|`.
    pub balance: f64,
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

impl PerturbativeModel {
    pub fn new(basis: &VibrationalBasis, dipole: &[f64], n_max: usize, e_bar: f64) -> Result<Self> {
        let coupling = coupling_matrix(basis, dipole, n_max)?;
        let energies = basis.energies()[..coupling.len()].to_vec();
        if let Some((index, &energy)) = energies.iter().enumerate().find(|(_, &e)| e >= e_bar) {
            return Err(Error::UnboundIntermediate { index, energy, closure: e_bar });
        }
        Ok(Self { coupling, energies, e_bar })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn kappa_matrix(&self, f0: f64, w_prime: f64) -> Result<KappaMatrix> {
        KappaMatrix::new(&self.energies, &self.coupling, f0, w_prime, self.e_bar)
    }

    /// Composes the impulse maps of `pulse` on interaction-picture amplitudes.
    pub fn apply_pulse(&self, a: &[Complex64], pulse: &LaserPulse, half_widths: f64) -> Result<Vec<Complex64>> {
        let train = ImpulseTrain::from_pulse(pulse, half_widths);
        let unit = self.kappa_matrix(1.0, train.w_prime)?;
        let mut a: Vec<Complex64> = a.iter().take(self.len()).copied().collect();
        for &(t, f) in &train.impulses {
            a = apply_impulse(&a, t, &unit.with_field(f), &self.energies);
        }
        Ok(a)
    }

    /// Final amplitudes and phases starting from the single level `n0`.
    pub fn clock_phases(&self, n0: usize, pulse: &LaserPulse, half_widths: f64) -> Result<Vec<Clock>> {
        if n0 >= self.len() {
            return Err(Error::IndexOutOfRange { index: n0, len: self.len() });
        }
        let mut a = vec![Complex64::new(0.0, 0.0); self.len()];
        a[n0] = Complex64::new(1.0, 0.0);
        let a = self.apply_pulse(&a, pulse, half_widths)?;
        Ok(a.iter()
            .enumerate()
            .map(|(n, c)| Clock { n, amplitude: c.norm(), phase: if c.norm() > 0.0 { c.arg() } else { 0.0 } })
            .collect())
    }

    /// Whole-pulse kappa: each element summed over the impulse train.
    pub fn effective_kappa(&self, pulse: &LaserPulse, half_widths: f64) -> Result<KappaMatrix> {
        let train = ImpulseTrain::from_pulse(pulse, half_widths);
        let unit = self.kappa_matrix(1.0, train.w_prime)?;
        let s: f64 = train.impulses.iter().map(|(_, f)| f * f).sum();
        let mut k = unit.with_field(s.sqrt());
        k.f0 = pulse.amplitude().abs();
        Ok(k)
    }

    /// Phase and magnitude conditions for levels `2..=6` at delay `tau_fs`,
    /// for interaction-picture amplitudes `a`.
    pub fn diagnostics(&self, a: &[Complex64], kappa: &KappaMatrix, tau_fs: f64) -> Vec<InterferenceDiagnostic> {
        let tau = fs_to_au(tau_fs);
        let e = &self.energies;
        let k = &kappa.kappa;
        (2..=6)
            .filter(|&n| n + 1 < self.len().min(a.len()))
            .map(|n| {
                let own = a[n].norm() * (Complex64::new(1.0, 0.0) - Complex64::new(0.0, 1.0) * k[n][n]).norm();
                let side = k[n][n - 1].norm() * a[n - 1].norm() + k[n][n + 1].norm() * a[n + 1].norm();
                InterferenceDiagnostic {
                    n,
                    phase_mismatch: wrap(k[n][n].re - (e[n] - e[n - 1]) * tau - FRAC_PI_2),
                    balance: if own > 0.0 { side / own } else { f64::INFINITY },
                }
            })
            .collect()
    }

    /// Delay in `[lo_fs, hi_fs]` minimising `sum_n wrap((E_{n+1} - E_{n-1}) tau)^2`
    /// over `n = 2..=6`, i.e. where the two neighbour terms share a phase.
    pub fn phase_condition_time(&self, lo_fs: f64, hi_fs: f64, step_fs: f64) -> Result<f64> {
        if self.len() < 8 {
            return Err(Error::TooFewStates { needed: 8, found: self.len() });
        }
        if !(step_fs > 0.0) || !(hi_fs > lo_fs) {
            return Err(Error::param("search", "need lo < hi and step > 0"));
        }
        let e = &self.energies;
        let cost = |t_fs: f64| {
            let t = fs_to_au(t_fs);
            (2..=6).map(|n| wrap((e[n + 1] - e[n - 1]) * t).powi(2)).sum::<f64>()
        };
        let steps = ((hi_fs - lo_fs) / step_fs).floor() as usize;
        let best = (0..=steps)
            .map(|i| lo_fs + i as f64 * step_fs)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .unwrap_or(lo_fs);
        Ok(best)
    }
}

/// Full-versus-model comparison at one control delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub tau_fs: f64,
    pub transfer_full: Vec<f64>,
    pub transfer_model: Vec<f64>,
    pub contrast_full: Option<f64>,
    pub contrast_model: Option<f64>,
}

impl ComparisonRow {
    /// Largest `|model - full| / |full|` over states with `|full| > threshold`.
    pub fn max_relative_error(&self, threshold: f64) -> Option<f64> {
        self.transfer_full
            .iter()
            .zip(&self.transfer_model)
            .filter(|(f, _)| f.abs() > threshold)
            .map(|(f, m)| (m - f).abs() / f.abs())
            .reduce(f64::max)
    }

    /// Signed parity of the transfer, `(sum_even - sum_odd) / sum |dp|` over `n <= 8`.
    pub fn transfer_parity(transfers: &[f64]) -> Option<f64> {
        let mut signed = 0.0;
        let mut total = 0.0;
        for (n, d) in transfers.iter().enumerate().take(CONTRAST_MAX_LEVEL + 1) {
            signed += if n % 2 == 0 { *d } else { -*d };
            total += d.abs();
        }
        (total > 0.0).then(|| signed / total)
    }
}

/// Compares each completed row of a full scan with the model applied to the
/// same initial amplitudes (at t = 0).
pub fn compare_with_full(
    model: &PerturbativeModel,
    initial: &[Complex64],
    full: &PopulationMap,
    template: &LaserPulse,
    half_widths: f64,
) -> Result<Vec<ComparisonRow>> {
    let k = model.len().min(initial.len());
    let p0: Vec<f64> = initial[..k].iter().map(|c| c.norm_sqr()).collect();
    full.completed()
        .map(|row| {
            let a = model.apply_pulse(&initial[..k], &template.centered_at(row.tau_fs), half_widths)?;
            let pm: Vec<f64> = a.iter().map(|c| c.norm_sqr()).collect();
            let transfer_full: Vec<f64> =
                (0..k).map(|n| row.populations.get(n).copied().unwrap_or(0.0) - p0[n]).collect();
            let transfer_model: Vec<f64> = (0..k).map(|n| pm[n] - p0[n]).collect();
            Ok(ComparisonRow {
                tau_fs: row.tau_fs,
                contrast_full: chessboard_contrast(&row.populations).ok(),
                contrast_model: chessboard_contrast(&pm).ok(),
                transfer_full,
                transfer_model,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<f64>, CouplingMatrix) {
        let e: Vec<f64> = (0..6).map(|n| -0.1 + 0.007 * n as f64 - 0.00014 * (n * n) as f64).collect();
        let d2 = (0..6)
            .map(|n| {
                (0..6)
                    .map(|m| match (n as i64 - m as i64).abs() {
                        0 => 1.0 + 0.2 * n as f64,
                        1 => 0.3,
                        2 => 0.02,
                        _ => 0.001,
                    })
                    .collect()
            })
            .collect();
        (e, CouplingMatrix::from_rows(d2).unwrap())
    }

    #[test]
    fn diagonal_kappa_is_negative_and_even_in_field() {
        let (e, d2) = toy();
        for n in 0..6 {
            let k = kappa(n, n, 0.03, 54.0, &e, &d2, 0.0).unwrap();
            assert!(k.re < 0.0);
            assert!(k.im.abs() < 1e-15);
            assert_eq!(k, kappa(n, n, -0.03, 54.0, &e, &d2, 0.0).unwrap());
            let expected = 0.03f64.powi(2) * 54.0 * d2.get(n, n) / e[n];
            assert!((k.re - expected).abs() < 1e-15);
        }
        assert_eq!(kappa(2, 3, 0.0, 54.0, &e, &d2, 0.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn short_impulse_limit() {
        let (e, d2) = toy();
        // (E_n - E_m) W' = 0.1 -> relative difference below 1 %
        let w = 0.1 / (e[3] - e[2]);
        let full = kappa(3, 2, 0.02, w, &e, &d2, 0.0).unwrap();
        let short = kappa_short(3, 2, 0.02, w, &e, &d2, 0.0).unwrap();
        assert!((full.norm() - short.abs()).abs() / short.abs() < 0.01);
        // and the difference shrinks with W'
        let err = |w: f64| {
            (kappa(3, 2, 0.02, w, &e, &d2, 0.0).unwrap() - kappa_short(3, 2, 0.02, w, &e, &d2, 0.0).unwrap()).norm() / w
        };
        assert!(err(1.0) < 0.6 * err(2.0));
    }

    #[test]
    fn unbound_intermediate_is_rejected() {
        let (mut e, d2) = toy();
        e[4] = 0.001;
        assert!(matches!(kappa(3, 4, 0.02, 50.0, &e, &d2, 0.0), Err(Error::UnboundIntermediate { index: 4, .. })));
        assert!(kappa(3, 2, 0.02, 50.0, &e, &d2, -0.095).is_err());
    }

    #[test]
    fn impulse_is_nearest_neighbour() {
        let (e, d2) = toy();
        let k = KappaMatrix::new(&e, &d2, 0.03, 54.0, 0.0).unwrap();
        let mut a = vec![Complex64::new(0.0, 0.0); 6];
        a[3] = Complex64::new(1.0, 0.0);
        let b = apply_impulse(&a, 1234.0, &k, &e);
        for (n, c) in b.iter().enumerate() {
            assert_eq!(c.norm() > 0.0, (2..=4).contains(&n), "level {n}");
        }
        // phase advance of the parent
        assert!(b[3].arg() > 0.0);
        let zero = KappaMatrix::new(&e, &d2, 0.0, 54.0, 0.0).unwrap();
        assert_eq!(apply_impulse(&a, 10.0, &zero, &e), a);
    }

    #[test]
    fn train_matches_field_fluence() {
        let p = LaserPulse::new(5e13, 790.0, 293.0, 5.0).unwrap();
        let train = ImpulseTrain::from_pulse(&p, 5.0);
        let (t0, t1) = p.window_au(5.0);
        let n = 200_000;
        let dt = (t1 - t0) / n as f64;
        let exact: f64 = (0..n).map(|i| p.field_at(t0 + (i as f64 + 0.5) * dt).powi(2)).sum::<f64>() * dt;
        assert!((train.fluence() - exact).abs() < 1e-3 * exact);
        assert!(train.impulses.windows(2).all(|w| (w[1].0 - w[0].0 - train.w_prime).abs() < 1e-9));
    }

    #[test]
    fn interference_times_scale() {
        let c = SpectralConstants { omega_e: 0.0074, omega_e_x_e: 0.00014, d_e: 0.1, residual: 0.0 };
        let t = predict_interference_times(&c);
        let t2 = predict_interference_times(&SpectralConstants { omega_e_x_e: 0.00028, ..c });
        assert!((t.fractional_revival_fs / t2.fractional_revival_fs - 2.0).abs() < 1e-12);
        assert!((t.parity_flip_interval_fs - au_to_fs(PI / 0.0074)).abs() < 1e-12);
    }

    #[test]
    fn wrap_range() {
        for x in [-10.0, -PI, -0.1, 0.0, 3.0, PI, 7.0, 100.0] {
            let y = wrap(x);
            assert!(y > -PI - 1e-12 && y <= PI + 1e-12);
            assert!(((x - y) / (2.0 * PI) - ((x - y) / (2.0 * PI)).round()).abs() < 1e-9);
        }
    }
}
