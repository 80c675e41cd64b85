//! Symmetric split-operator propagation on the coupled g/u surfaces.
//!
//! One step of length `dt` at time `t` applies
//!
//! ```text
//! exp(-i T dt/2) exp(-i H_e dt/2) exp(-i V dt) exp(-i H_e dt/2) exp(-i T dt/2)
//! ```
//!
//! where `V = F(t + dt/2) d(R) sigma_x` couples the channels pointwise and its
//! exponential is the exact 2x2 rotation `cos(F d dt) - i sigma_x sin(F d dt)`.
//! Consecutive kinetic half steps are fused inside [`SplitOperator::run`].

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::eigen::{kinetic_spectrum, VibrationalBasis};
use crate::error::{Error, Result};
use crate::grid::{RadialGrid, TwoChannelState};
use crate::molecule::SampledCurves;
use crate::pulse::{total_field, LaserPulse};
use crate::units::{au_to_fs, fs_to_au};

/// Time step the absorber strength is quoted for; the per-step mask exponent
/// scales with `dt / ABSORBER_REFERENCE_DT` so absorption per unit time is fixed.
pub const ABSORBER_REFERENCE_DT: f64 = 0.5;

const FINITE_CHECK_INTERVAL: usize = 256;

/// Potentials, dipole and nuclear mass sampled on one grid.
#[derive(Debug, Clone)]
pub struct SampledOperators {
    pub grid: RadialGrid,
    pub v_g: Vec<f64>,
    pub v_u: Vec<f64>,
    pub dipole: Vec<f64>,
    pub mass: f64,
}

impl SampledOperators {
    pub fn new(curves: &SampledCurves, mass: f64) -> Result<Self> {
        Self::from_parts(curves.grid, curves.v_g.clone(), curves.v_u.clone(), curves.dipole.clone(), mass)
    }

    pub fn from_parts(grid: RadialGrid, v_g: Vec<f64>, v_u: Vec<f64>, dipole: Vec<f64>, mass: f64) -> Result<Self> {
        let n = grid.len();
        if v_g.len() != n || v_u.len() != n || dipole.len() != n {
            return Err(Error::GridMismatch);
        }
        if !(mass > 0.0) {
            return Err(Error::param("reduced_mass", "must be positive"));
        }
        Ok(Self { grid, v_g, v_u, dipole, mass })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub dt_au: f64,
    pub t_start_fs: f64,
    pub t_end_fs: f64,
    pub absorber_fraction: f64,
    pub absorber_strength: f64,
    pub record_stride: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            dt_au: 0.5,
            t_start_fs: 0.0,
            t_end_fs: 0.0,
            absorber_fraction: 0.1,
            absorber_strength: 0.125,
            record_stride: 100,
        }
    }
}

impl PropagationConfig {
    pub fn span(t_start_fs: f64, t_end_fs: f64) -> Self {
        Self { t_start_fs, t_end_fs, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_au > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt_au)));
        }
        if !(self.t_end_fs >= self.t_start_fs) {
            return Err(Error::param("t_end", "must not precede t_start"));
        }
        if !(0.0..0.5).contains(&self.absorber_fraction) {
            return Err(Error::param("absorber_fraction", "must lie in [0, 0.5)"));
        }
        if !(self.absorber_strength >= 0.0) {
            return Err(Error::param("absorber_strength", "must be >= 0"));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be >= 1"));
        }
        Ok(())
    }

    /// Number of steps and the step actually used so the run ends exactly at `t_end`.
    pub fn steps(&self) -> (usize, f64) {
        let span = fs_to_au(self.t_end_fs - self.t_start_fs);
        let n = (span / self.dt_au).round() as usize;
        if n == 0 {
            (0, self.dt_au)
        } else {
            (n, span / n as f64)
        }
    }
}

/// Smooth `cos^p` mask over the outermost part of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorber {
    pub fraction: f64,
    pub strength: f64,
}

impl Absorber {
    /// Per-step mask values from the first absorbing index to the grid end.
    fn mask(&self, grid: &RadialGrid, dt: f64) -> (usize, Vec<f64>) {
        let n = grid.len();
        if self.fraction <= 0.0 || self.strength <= 0.0 {
            return (n, Vec::new());
        }
        let width = self.fraction * (grid.r_max() - grid.r_min());
        let start_r = grid.r_max() - width;
        let start = (0..n).find(|&i| grid.r(i) >= start_r).unwrap_or(n);
        let power = self.strength * dt / ABSORBER_REFERENCE_DT;
        let mask = (start..n).map(|i| (FRAC_PI_2 * (grid.r(i) - start_r) / width).cos().max(0.0).powf(power)).collect();
        (start, mask)
    }
}

/// Observables handed to observers every `record_stride` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t_au: f64,
    pub norm: f64,
    /// `<R>` of the g channel, `None` when it is empty.
    pub mean_r: Option<f64>,
    pub pop_g: f64,
    pub pop_u: f64,
    /// Norm removed by the absorber so far.
    pub absorbed: f64,
}

impl Sample {
    pub fn t_fs(&self) -> f64 {
        au_to_fs(self.t_au)
    }
}

/// Callback receiving every recorded sample with the current state.
pub type Observer<'a> = &'a mut dyn FnMut(&Sample, &TwoChannelState);

/// Precomputed propagator for a fixed grid, operators and step.
pub struct SplitOperator {
    grid: RadialGrid,
    dt: f64,
    kin_half: Vec<Complex64>,
    kin_full: Vec<Complex64>,
    pot_half_g: Vec<Complex64>,
    pot_half_u: Vec<Complex64>,
    dipole_dt: Vec<f64>,
    mask_start: usize,
    mask: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl SplitOperator {
    pub fn new(ops: &SampledOperators, dt: f64, absorber: Option<Absorber>) -> Self {
        let grid = ops.grid;
        let n = grid.len();
        let inv_n = 1.0 / n as f64;
        let kinetic = kinetic_spectrum(&grid, ops.mass);
        let phase = |e: f64, t: f64| Complex64::from_polar(1.0, -e * t);
        let kin_half = kinetic.iter().map(|&t| phase(t, 0.5 * dt) * inv_n).collect();
        let kin_full = kinetic.iter().map(|&t| phase(t, dt) * inv_n).collect();
        let pot_half_g = ops.v_g.iter().map(|&v| phase(v, 0.5 * dt)).collect();
        let pot_half_u = ops.v_u.iter().map(|&v| phase(v, 0.5 * dt)).collect();
        let dipole_dt = ops.dipole.iter().map(|d| d * dt).collect();
        let (mask_start, mask) = match absorber {
            Some(a) => a.mask(&grid, dt),
            None => (n, Vec::new()),
        };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            dt,
            kin_half,
            kin_full,
            pot_half_g,
            pot_half_u,
            dipole_dt,
            mask_start,
            mask,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&mut self, field: &mut [Complex64], full: bool) {
        self.forward.process_with_scratch(field, &mut self.scratch);
        let phases = if full { &self.kin_full } else { &self.kin_half };
        field.iter_mut().zip(phases).for_each(|(a, p)| *a *= p);
        self.inverse.process_with_scratch(field, &mut self.scratch);
    }

    /// `exp(-i H_e dt/2) exp(-i V dt) exp(-i H_e dt/2)`, diagonal in R.
    fn potential_and_coupling(&self, state: &mut TwoChannelState, field: f64) {
        let g = state.g.amplitudes_mut();
        let u = state.u.amplitudes_mut();
        if field == 0.0 {
            for j in 0..g.len() {
                let pg = self.pot_half_g[j];
                let pu = self.pot_half_u[j];
                g[j] *= pg * pg;
                u[j] *= pu * pu;
            }
            return;
        }
        for j in 0..g.len() {
            let pg = self.pot_half_g[j];
            let pu = self.pot_half_u[j];
            let a = g[j] * pg;
            let b = u[j] * pu;
            let (s, c) = (field * self.dipole_dt[j]).sin_cos();
            let mis = Complex64::new(0.0, -s);
            g[j] = (a * c + b * mis) * pg;
            u[j] = (a * mis + b * c) * pu;
        }
    }

    fn absorb(&self, state: &mut TwoChannelState) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        let mut removed = 0.0;
        let start = self.mask_start;
        for ch in [state.g.amplitudes_mut(), state.u.amplitudes_mut()] {
            for (a, m) in ch[start..].iter_mut().zip(&self.mask) {
                let before = a.norm_sqr();
                *a *= *m;
                removed += before - a.norm_sqr();
            }
        }
        removed * self.grid.dr()
    }

    /// One full symmetric step with coupling field `field_mid`; no absorber.
    pub fn step(&mut self, state: &mut TwoChannelState, field_mid: f64) {
        self.kinetic(state.g.amplitudes_mut(), false);
        self.kinetic(state.u.amplitudes_mut(), false);
        self.potential_and_coupling(state, field_mid);
        self.kinetic(state.g.amplitudes_mut(), false);
        self.kinetic(state.u.amplitudes_mut(), false);
    }

    /// Runs `n_steps` from `t0` (a.u.), fusing adjacent kinetic half steps and
    /// masking after each potential step. Returns the absorbed norm.
    pub fn run(
        &mut self,
        state: &mut TwoChannelState,
        t0: f64,
        n_steps: usize,
        field: &dyn Fn(f64) -> f64,
        record_stride: usize,
        mut observer: Option<Observer<'_>>,
    ) -> Result<f64> {
        if state.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let stride = record_stride.max(1);
        let mut absorbed = 0.0;
        if let Some(obs) = observer.as_mut() {
            obs(&sample(state, t0, absorbed), state);
        }
        if n_steps == 0 {
            return Ok(0.0);
        }
        // the u channel stays exactly zero until a non-zero field couples into it
        let mut u_live = state.u.amplitudes().iter().any(|a| a.norm_sqr() > 0.0);

        self.kinetic(state.g.amplitudes_mut(), false);
        if u_live {
            self.kinetic(state.u.amplitudes_mut(), false);
        }
        for i in 0..n_steps {
            let f = field(t0 + (i as f64 + 0.5) * self.dt);
            u_live |= f != 0.0;
            self.potential_and_coupling(state, f);
            absorbed += self.absorb(state);

            let last = i + 1 == n_steps;
            let record = (i + 1) % stride == 0 || last;
            if record {
                self.kinetic(state.g.amplitudes_mut(), false);
                if u_live {
                    self.kinetic(state.u.amplitudes_mut(), false);
                }
                if !state.is_finite() {
                    return Err(Error::NonFinite { step: i + 1, time_au: t0 + (i + 1) as f64 * self.dt });
                }
                if let Some(obs) = observer.as_mut() {
                    obs(&sample(state, t0 + (i + 1) as f64 * self.dt, absorbed), state);
                }
                if !last {
                    self.kinetic(state.g.amplitudes_mut(), false);
                    if u_live {
                        self.kinetic(state.u.amplitudes_mut(), false);
                    }
                }
            } else {
                self.kinetic(state.g.amplitudes_mut(), true);
                if u_live {
                    self.kinetic(state.u.amplitudes_mut(), true);
                }
                if (i + 1) % FINITE_CHECK_INTERVAL == 0 && !state.g.amplitudes()[0].norm_sqr().is_finite() {
                    return Err(Error::NonFinite { step: i + 1, time_au: t0 + (i + 1) as f64 * self.dt });
                }
            }
        }
        Ok(absorbed)
    }
}

fn sample(state: &TwoChannelState, t_au: f64, absorbed: f64) -> Sample {
    let (pop_g, pop_u) = state.populations();
    Sample { t_au, norm: pop_g + pop_u, mean_r: state.g.expectation_position().ok(), pop_g, pop_u, absorbed }
}

/// A single symmetric step at time `t` (a.u.) without absorber.
pub fn split_step(
    state: &TwoChannelState,
    t: f64,
    dt: f64,
    ops: &SampledOperators,
    pulses: &[LaserPulse],
) -> TwoChannelState {
    let mut out = state.clone();
    SplitOperator::new(ops, dt, None).step(&mut out, total_field(pulses, t + 0.5 * dt));
    out
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: TwoChannelState,
    pub absorbed_flux: f64,
    pub steps: usize,
}

/// Propagates over `[t_start, t_end]` of `config` under the summed pulse fields.
pub fn propagate(
    state: TwoChannelState,
    pulses: &[LaserPulse],
    config: &PropagationConfig,
    ops: &SampledOperators,
    observer: Option<Observer<'_>>,
) -> Result<Propagation> {
    config.validate()?;
    let (n_steps, dt) = config.steps();
    let absorber = Absorber { fraction: config.absorber_fraction, strength: config.absorber_strength };
    let mut prop = SplitOperator::new(ops, dt, Some(absorber));
    let mut state = state;
    let field = |t: f64| total_field(pulses, t);
    let absorbed =
        prop.run(&mut state, fs_to_au(config.t_start_fs), n_steps, &field, config.record_stride, observer)?;
    Ok(Propagation { state, absorbed_flux: absorbed, steps: n_steps })
}

/// Where the lost norm went.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissociationLedger {
    pub u_population: f64,
    pub g_continuum_population: f64,
    pub absorbed_flux: f64,
}

impl DissociationLedger {
    pub fn new(state: &TwoChannelState, basis: &VibrationalBasis, absorbed_flux: f64) -> Result<Self> {
        let bound = bound_population(state, basis)?;
        let (pop_g, pop_u) = state.populations();
        Ok(Self { u_population: pop_u, g_continuum_population: (pop_g - bound).max(0.0), absorbed_flux })
    }

    pub fn total(&self) -> f64 {
        self.u_population + self.g_continuum_population + self.absorbed_flux
    }
}

/// `sum_n |<n|psi_g>|^2` over the basis.
pub fn bound_population(state: &TwoChannelState, basis: &VibrationalBasis) -> Result<f64> {
    Ok(basis.project(state)?.iter().map(|a| a.norm_sqr()).sum())
}

/// Dissociation yield: initial norm minus the remaining bound population.
pub fn dissociation_yield(state: &TwoChannelState, basis: &VibrationalBasis, initial_norm: f64) -> Result<f64> {
    Ok((initial_norm - bound_population(state, basis)?).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ChannelField;

    fn flat_ops(grid: RadialGrid, dipole: f64, mass: f64) -> SampledOperators {
        let n = grid.len();
        SampledOperators::from_parts(grid, vec![0.0; n], vec![0.0; n], vec![dipole; n], mass).unwrap()
    }

    #[test]
    fn coupling_step_is_a_rabi_rotation() {
        let grid = RadialGrid::new(0.5, 10.0, 256).unwrap();
        // T and H_e switched off: infinite mass, flat potentials
        let ops = flat_ops(grid, 1.3, 1e300);
        let g = ChannelField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        let state = TwoChannelState::on_gerade(g);
        let pulse = LaserPulse::new(5e13, 790.0, 0.0, 5.0).unwrap();
        let dt = 0.7;
        let t = -0.5 * dt;
        let out = split_step(&state, t, dt, &ops, &[pulse]);
        let theta = pulse.field_at(0.0) * 1.3 * dt;
        for j in 0..grid.len() {
            assert!((out.g.amplitudes()[j] - Complex64::new(theta.cos(), 0.0)).norm() < 1e-14);
            assert!((out.u.amplitudes()[j] - Complex64::new(0.0, -theta.sin())).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_duration_is_identity() {
        let grid = RadialGrid::new(0.5, 10.0, 256).unwrap();
        let ops = flat_ops(grid, 1.0, 1000.0);
        let g = ChannelField::from_fn(grid, |r| Complex64::new((-(r - 4.0).powi(2)).exp(), 0.0));
        let state = TwoChannelState::on_gerade(g);
        let cfg = PropagationConfig::span(10.0, 10.0);
        let out = propagate(state.clone(), &[], &cfg, &ops, None).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.state, state);
    }

    #[test]
    fn fused_run_matches_repeated_steps() {
        let grid = RadialGrid::new(0.5, 12.0, 256).unwrap();
        let n = grid.len();
        let v: Vec<f64> = grid.r_values().iter().map(|r| 0.02 * (r - 4.0).powi(2)).collect();
        let ops =
            SampledOperators::from_parts(grid, v.clone(), v.iter().map(|x| x + 0.1).collect(), vec![1.0; n], 50.0)
                .unwrap();
        let g = ChannelField::from_fn(grid, |r| Complex64::new((-(r - 3.0).powi(2)).exp(), 0.0));
        let state = TwoChannelState::on_gerade(g);
        let pulse = LaserPulse::new(1e14, 790.0, 0.5, 1.0).unwrap();
        let dt = 0.5;
        let mut stepped = state.clone();
        let mut op = SplitOperator::new(&ops, dt, None);
        for i in 0..200 {
            let t = i as f64 * dt;
            op.step(&mut stepped, pulse.field_at(t + 0.5 * dt));
        }
        let mut fused = state;
        let field = |t: f64| pulse.field_at(t);
        SplitOperator::new(&ops, dt, None).run(&mut fused, 0.0, 200, &field, 37, None).unwrap();
        for (a, b) in stepped.g.amplitudes().iter().zip(fused.g.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        for (a, b) in stepped.u.amplitudes().iter().zip(fused.u.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn absorber_accounts_for_lost_norm() {
        let grid = RadialGrid::new(0.5, 20.0, 512).unwrap();
        let ops = flat_ops(grid, 1.0, 100.0);
        // outgoing packet heading into the absorber
        let g = ChannelField::from_fn(grid, |r| Complex64::from_polar((-(r - 12.0).powi(2)).exp(), 6.0 * r));
        let mut state = TwoChannelState::on_gerade(g);
        state.g.normalize().unwrap();
        let mut worst: f64 = 0.0;
        let mut obs = |s: &Sample, _: &TwoChannelState| worst = worst.max((s.norm + s.absorbed - 1.0).abs());
        let cfg = PropagationConfig { record_stride: 10, ..PropagationConfig::span(0.0, 20.0) };
        let out = propagate(state, &[], &cfg, &ops, Some(&mut obs)).unwrap();
        assert!(out.absorbed_flux > 0.5, "{}", out.absorbed_flux);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn config_validation() {
        assert!(PropagationConfig { dt_au: 0.0, ..Default::default() }.validate().is_err());
        assert!(PropagationConfig { absorber_fraction: 0.5, ..Default::default() }.validate().is_err());
        assert!(PropagationConfig::span(10.0, 5.0).validate().is_err());
        assert!(PropagationConfig::span(0.0, 5.0).validate().is_ok());
    }
}
