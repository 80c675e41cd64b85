//! Control-delay and probe-delay scans.
//!
//! Between pulses the bound part of the wavepacket evolves analytically,
//! `c_n(t) = c_n(t0) exp(-i E_n (t - t0))`; only the window `tau +- 5 W` around
//! each pulse is propagated on the grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::VibrationalBasis;
use crate::error::{Error, Result};
use crate::grid::{ChannelField, TwoChannelState};
use crate::parallel::{CancelToken, Executor};
use crate::propagator::{Absorber, SampledOperators, SplitOperator};
use crate::pulse::LaserPulse;

/// Highest level entering the parity contrast.
pub const CONTRAST_MAX_LEVEL: usize = 8;

/// Inclusive, uniformly spaced range of delays in fs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRange {
    pub start_fs: f64,
    pub end_fs: f64,
    pub step_fs: f64,
}

impl ScanRange {
    pub fn new(start_fs: f64, end_fs: f64, step_fs: f64) -> Result<Self> {
        let r = Self { start_fs, end_fs, step_fs };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_fs > 0.0) || !self.step_fs.is_finite() {
            return Err(Error::param("step", format!("must be positive, got {}", self.step_fs)));
        }
        if !(self.end_fs >= self.start_fs) || !self.start_fs.is_finite() || !self.end_fs.is_finite() {
            return Err(Error::param("range", "end must not precede start"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.end_fs - self.start_fs) / self.step_fs + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start_fs + i as f64 * self.step_fs
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

/// Numerical settings shared by every scan row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub dt_au: f64,
    pub absorber_fraction: f64,
    pub absorber_strength: f64,
    /// Pulse window half-width in units of the FWHM.
    pub window_half_widths: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { dt_au: 0.5, absorber_fraction: 0.1, absorber_strength: 0.125, window_half_widths: 5.0 }
    }
}

impl ScanSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_au > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(0.0..0.5).contains(&self.absorber_fraction) {
            return Err(Error::param("absorber_fraction", "must lie in [0, 0.5)"));
        }
        if !(self.absorber_strength >= 0.0) {
            return Err(Error::param("absorber_strength", "must be >= 0"));
        }
        if !(self.window_half_widths > 0.0) {
            return Err(Error::param("window_half_widths", "must be positive"));
        }
        Ok(())
    }

    fn absorber(&self) -> Absorber {
        Absorber { fraction: self.absorber_fraction, strength: self.absorber_strength }
    }
}

/// Read-only inputs of a scan.
#[derive(Clone, Copy)]
pub struct ScanContext<'a> {
    pub basis: &'a VibrationalBasis,
    pub ops: &'a SampledOperators,
    pub settings: ScanSettings,
}

impl<'a> ScanContext<'a> {
    pub fn new(basis: &'a VibrationalBasis, ops: &'a SampledOperators, settings: ScanSettings) -> Result<Self> {
        settings.validate()?;
        if basis.grid() != &ops.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self { basis, ops, settings })
    }

    /// Propagates `state` over `[t0, t1]` (a.u.) under `pulse`, returning the
    /// final state and the norm removed by the absorber.
    pub fn run_window(
        &self,
        state: TwoChannelState,
        t0: f64,
        t1: f64,
        pulse: &LaserPulse,
    ) -> Result<(TwoChannelState, f64)> {
        self.run_window_field(state, t0, t1, &|t: f64| pulse.field_at(t))
    }

    /// As [`Self::run_window`] under an arbitrary field.
    pub fn run_window_field(
        &self,
        mut state: TwoChannelState,
        t0: f64,
        t1: f64,
        field: &dyn Fn(f64) -> f64,
    ) -> Result<(TwoChannelState, f64)> {
        let span = t1 - t0;
        let n = (span / self.settings.dt_au).round().max(0.0) as usize;
        if n == 0 {
            return Ok((state, 0.0));
        }
        let dt = span / n as f64;
        let mut prop = SplitOperator::new(self.ops, dt, Some(self.settings.absorber()));
        let absorbed = prop.run(&mut state, t0, n, field, n, None)?;
        Ok((state, absorbed))
    }

    fn window(&self, pulse: &LaserPulse) -> (f64, f64) {
        pulse.window_au(self.settings.window_half_widths)
    }
}

/// Bound-state amplitudes (Schrodinger picture) at a reference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPacket {
    pub t_au: f64,
    pub coefficients: Vec<Complex64>,
}

impl BoundPacket {
    pub fn new(t_au: f64, coefficients: Vec<Complex64>) -> Self {
        Self { t_au, coefficients }
    }

    /// Field-free evolution to `t_au`.
    pub fn at(&self, t_au: f64, energies: &[f64]) -> Vec<Complex64> {
        let dt = t_au - self.t_au;
        self.coefficients.iter().zip(energies).map(|(c, e)| c * Complex64::from_polar(1.0, -e * dt)).collect()
    }

    pub fn norm_squared(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// A row that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub index: usize,
    pub delay_fs: f64,
    pub message: String,
    pub numerical: bool,
}

impl RowFailure {
    fn new(index: usize, delay_fs: f64, err: &Error) -> Self {
        Self { index, delay_fs, message: err.to_string(), numerical: err.is_numerical() }
    }

    fn cancelled(index: usize, delay_fs: f64) -> Self {
        Self { index, delay_fs, message: "cancelled".into(), numerical: false }
    }

    pub fn is_cancelled(&self) -> bool {
        self.message == "cancelled"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub tau_fs: f64,
    /// `|a_n|^2` for every bound state after the pulse.
    pub populations: Vec<f64>,
    /// Norm lost from the bound manifold during the control window.
    pub yield_: f64,
    pub contrast: Option<f64>,
    /// Post-pulse bound amplitudes at the end of the window.
    pub packet: BoundPacket,
}

/// Final vibrational populations against control delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMap {
    pub n_states: usize,
    pub rows: Vec<std::result::Result<ControlRow, RowFailure>>,
}

impl PopulationMap {
    pub fn tau_values(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match r {
                Ok(row) => row.tau_fs,
                Err(f) => f.delay_fs,
            })
            .collect()
    }

    pub fn completed(&self) -> impl Iterator<Item = &ControlRow> {
        self.rows.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &RowFailure> {
        self.rows.iter().filter_map(|r| r.as_ref().err())
    }

    /// Completed row closest to `tau_fs`.
    pub fn row_near(&self, tau_fs: f64) -> Option<&ControlRow> {
        self.completed().min_by(|a, b| (a.tau_fs - tau_fs).abs().total_cmp(&(b.tau_fs - tau_fs).abs()))
    }
}

/// `(sum_even - sum_odd) / (sum_even + sum_odd)` over levels `n <= 8`.
pub fn chessboard_contrast(populations: &[f64]) -> Result<f64> {
    let mut even = 0.0;
    let mut odd = 0.0;
    for (n, &p) in populations.iter().enumerate().take(CONTRAST_MAX_LEVEL + 1) {
        if n % 2 == 0 {
            even += p;
        } else {
            odd += p;
        }
    }
    let total = even + odd;
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok((even - odd) / total)
}

/// One control row: analytic evolution of `initial` to the pulse window,
/// grid propagation through it, projection onto the basis.
pub fn control_row(ctx: &ScanContext, initial: &BoundPacket, pulse: &LaserPulse) -> Result<ControlRow> {
    let (ws, we) = ctx.window(pulse);
    let ws = ws.max(initial.t_au);
    let energies = ctx.basis.energies();
    let c0 = initial.at(ws, energies);
    let norm0: f64 = c0.iter().map(|c| c.norm_sqr()).sum();
    let state = TwoChannelState::on_gerade(ctx.basis.synthesize(&c0));
    let (state, _) = ctx.run_window(state, ws, we.max(ws), pulse)?;
    let b = ctx.basis.project(&state)?;
    let populations: Vec<f64> = b.iter().map(|c| c.norm_sqr()).collect();
    let remaining: f64 = populations.iter().sum();
    Ok(ControlRow {
        tau_fs: pulse.center_fs,
        contrast: chessboard_contrast(&populations).ok(),
        yield_: (norm0 - remaining).max(0.0),
        populations,
        packet: BoundPacket::new(we.max(ws), b),
    })
}

/// Runs `control_row` for every delay in `range`; failing rows are recorded
/// and the scan continues.
pub fn control_scan(
    ctx: &ScanContext,
    initial: &BoundPacket,
    template: &LaserPulse,
    range: &ScanRange,
    executor: &Executor,
    cancel: Option<&CancelToken>,
) -> Result<PopulationMap> {
    range.validate()?;
    if initial.coefficients.len() != ctx.basis.len() {
        return Err(Error::param("initial", "coefficient count differs from basis size"));
    }
    let rows = executor.map(range.len(), |i| {
        let tau = range.value(i);
        if cancel.is_some_and(|c| !c.admit()) {
            return Err(RowFailure::cancelled(i, tau));
        }
        control_row(ctx, initial, &template.centered_at(tau)).map_err(|e| RowFailure::new(i, tau, &e))
    });
    Ok(PopulationMap { n_states: ctx.basis.len(), rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMethod {
    /// One grid propagation per probe delay.
    Direct,
    /// Bound-to-bound probe propagator computed once and reused for every delay.
    Transfer,
}

/// Probe-induced dissociation yield against probe delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldSeries {
    pub tau_prime_fs: Vec<f64>,
    /// Total bound-norm loss minus the control-epoch loss; NaN where the row failed.
    pub yields: Vec<f64>,
    /// Bound norm already lost before the probe (control-epoch background).
    pub control_yield: f64,
    pub failures: Vec<RowFailure>,
}

impl YieldSeries {
    /// Control-epoch plus probe-epoch yield.
    pub fn total_yields(&self) -> Vec<f64> {
        self.yields.iter().map(|y| y + self.control_yield).collect()
    }

    pub fn spacing_fs(&self) -> Option<f64> {
        (self.tau_prime_fs.len() > 1).then(|| self.tau_prime_fs[1] - self.tau_prime_fs[0])
    }
}

/// Matrix `M[m][n] = <m| U_probe |n>` for a probe centred at t = 0.
#[derive(Debug, Clone)]
pub struct ProbeTransfer {
    pub half_window_au: f64,
    pub matrix: Vec<Vec<Complex64>>,
}

impl ProbeTransfer {
    pub fn compute(ctx: &ScanContext, template: &LaserPulse, executor: &Executor) -> Result<Self> {
        let pulse = template.centered_at(0.0);
        let (t0, t1) = ctx.window(&pulse);
        let k = ctx.basis.len();
        let columns = executor.map(k, |n| -> Result<Vec<Complex64>> {
            let state = TwoChannelState::on_gerade(ctx.basis.state(n)?);
            let (state, _) = ctx.run_window(state, t0, t1, &pulse)?;
            ctx.basis.project(&state)
        });
        let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
        let matrix = (0..k).map(|m| (0..k).map(|n| columns[n][m]).collect()).collect();
        Ok(Self { half_window_au: t1, matrix })
    }

    /// Bound amplitudes after the probe, given those at the window start.
    pub fn apply(&self, c: &[Complex64]) -> Vec<Complex64> {
        self.matrix.iter().map(|row| row.iter().zip(c).map(|(m, x)| m * x).sum()).collect()
    }
}

/// Inputs of a probe-delay scan.
#[derive(Debug, Clone)]
pub struct ProbeSetup {
    /// Bound amplitudes before the control pulse.
    pub initial: BoundPacket,
    pub control: Option<LaserPulse>,
    pub probe: LaserPulse,
    pub range: ScanRange,
    pub method: ProbeMethod,
}

/// Probe yield for each delay in the setup's range.
///
/// Rows whose probe window overlaps the control window are propagated through
/// both pulses together; the reported yield is always the total bound-norm loss
/// minus the control-epoch loss.
pub fn probe_scan(
    ctx: &ScanContext,
    setup: &ProbeSetup,
    executor: &Executor,
    cancel: Option<&CancelToken>,
) -> Result<YieldSeries> {
    probe_scan_with(ctx, setup, None, executor, cancel)
}

/// As [`probe_scan`], reusing a transfer matrix computed for the same probe
/// template and settings.
pub fn probe_scan_with(
    ctx: &ScanContext,
    setup: &ProbeSetup,
    transfer: Option<&ProbeTransfer>,
    executor: &Executor,
    cancel: Option<&CancelToken>,
) -> Result<YieldSeries> {
    let ProbeSetup { initial, control, probe, range, method } = setup;
    range.validate()?;
    if initial.coefficients.len() != ctx.basis.len() {
        return Err(Error::param("initial", "coefficient count differs from basis size"));
    }
    let energies = ctx.basis.energies();
    let norm0 = initial.norm_squared();
    let (after, control_yield, control_window) = match control {
        Some(c) => {
            if range.start_fs <= c.center_fs {
                return Err(Error::param(
                    "tau_prime",
                    format!("probe delays must follow the control pulse at {} fs", c.center_fs),
                ));
            }
            let row = control_row(ctx, initial, c)?;
            let (ws, we) = ctx.window(c);
            (row.packet, row.yield_, Some((ws.max(initial.t_au), we)))
        }
        None => (initial.clone(), 0.0, None),
    };
    let computed;
    let transfer = match (method, transfer) {
        (ProbeMethod::Direct, _) => None,
        (ProbeMethod::Transfer, Some(t)) => Some(t),
        (ProbeMethod::Transfer, None) => {
            computed = ProbeTransfer::compute(ctx, probe, executor)?;
            Some(&computed)
        }
    };
    let rows = executor.map(range.len(), |i| -> std::result::Result<f64, RowFailure> {
        let tp = range.value(i);
        if cancel.is_some_and(|c| !c.admit()) {
            return Err(RowFailure::cancelled(i, tp));
        }
        let pulse = probe.centered_at(tp);
        let (t0, t1) = ctx.window(&pulse);
        let fail = |e: Error| RowFailure::new(i, tp, &e);
        let remaining_amps = match (control_window, control) {
            (Some((cs, ce)), Some(c)) if t0 < ce => {
                // overlapping pulses: one propagation through both
                let start = cs.min(t0);
                let c0 = initial.at(start, energies);
                let state = TwoChannelState::on_gerade(ctx.basis.synthesize(&c0));
                let field = |t: f64| c.field_at(t) + pulse.field_at(t);
                ctx.run_window_field(state, start, t1.max(ce), &field)
                    .and_then(|(s, _)| ctx.basis.project(&s))
                    .map_err(fail)?
            }
            _ => {
                let c = after.at(t0, energies);
                match transfer {
                    Some(tr) => tr.apply(&c),
                    None => {
                        let state = TwoChannelState::on_gerade(ctx.basis.synthesize(&c));
                        ctx.run_window(state, t0, t1, &pulse).and_then(|(s, _)| ctx.basis.project(&s)).map_err(fail)?
                    }
                }
            }
        };
        let remaining: f64 = remaining_amps.iter().map(|a| a.norm_sqr()).sum();
        Ok((norm0 - remaining - control_yield).max(0.0))
    });
    let mut yields = Vec::with_capacity(rows.len());
    let mut failures = Vec::new();
    for r in rows {
        match r {
            Ok(y) => yields.push(y),
            Err(f) => {
                yields.push(f64::NAN);
                failures.push(f);
            }
        }
    }
    Ok(YieldSeries { tau_prime_fs: range.values(), yields, control_yield, failures })
}

/// Field-free bound packet at t = 0 from a grid wavefunction.
pub fn packet_from_field(basis: &VibrationalBasis, field: &ChannelField) -> Result<BoundPacket> {
    Ok(BoundPacket::new(0.0, basis.project_field(field)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_arithmetic() {
        let r = ScanRange::new(0.0, 650.0, 1.0).unwrap();
        assert_eq!(r.len(), 651);
        assert_eq!(r.value(650), 650.0);
        assert_eq!(ScanRange::new(280.0, 320.0, 1.0).unwrap().len(), 41);
        assert_eq!(ScanRange::new(5.0, 5.0, 1.0).unwrap().len(), 1);
        assert_eq!(ScanRange::new(0.0, 1.0, 0.3).unwrap().values().len(), 4);
        assert!(ScanRange::new(0.0, 1.0, 0.0).is_err());
        assert!(ScanRange::new(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn contrast_limits() {
        assert_eq!(chessboard_contrast(&[0.2, 0.0, 0.5, 0.0, 0.1]).unwrap(), 1.0);
        assert_eq!(chessboard_contrast(&[0.0, 0.3, 0.0, 0.4]).unwrap(), -1.0);
        assert!(chessboard_contrast(&[0.0; 10]).is_err());
        // levels above 8 are ignored
        let mut p = vec![0.0; 12];
        p[2] = 0.5;
        p[9] = 0.5;
        assert_eq!(chessboard_contrast(&p).unwrap(), 1.0);
    }

    #[test]
    fn packet_evolution_is_a_phase() {
        let e = [-0.1, -0.05];
        let p = BoundPacket::new(10.0, vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let q = p.at(110.0, &e);
        assert!((q[0] - Complex64::from_polar(0.6, 10.0)).norm() < 1e-14);
        assert!((BoundPacket::new(110.0, q).norm_squared() - 1.0).abs() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn contrast_bounded(p in proptest::collection::vec(0.0f64..1.0, 1..20)) {
            if let Ok(c) = chessboard_contrast(&p) {
                proptest::prop_assert!((-1.0..=1.0).contains(&c));
            }
        }
    }
}
