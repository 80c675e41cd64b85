//! End-to-end runs behind each CLI subcommand: build the system from a
//! configuration, compute, write tables and a manifest into the output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::config::RunConfig;
use crate::eigen::{solve_bound_states, VibrationalBasis};
use crate::error::{Error, Result};
use crate::grid::TwoChannelState;
use crate::model::{compare_with_full, predict_interference_times, ComparisonRow, PerturbativeModel};
use crate::molecule::PotentialCurveSet;
use crate::output::{self, ClockRow, RowStatus, RunManifest, TraceRow};
use crate::parallel::{CancelToken, Executor};
use crate::propagator::{bound_population, propagate, Sample, SampledOperators};
use crate::pump::{PumpSpec, PumpedState};
use crate::scan::{control_scan, probe_scan, BoundPacket, ProbeSetup, ScanContext};
use crate::spectrum::beat_spectrum;

/// Upper bound on requested eigenstates; every bound level below it is kept.
const MAX_BOUND_STATES: usize = 256;

/// Manifest file name inside the output directory.
pub const MANIFEST: &str = "manifest.json";

/// Curves, operators, bound basis and initial packet for one configuration.
pub struct Simulation {
    pub config: RunConfig,
    pub curves: PotentialCurveSet,
    pub ops: SampledOperators,
    pub basis: VibrationalBasis,
    pub pump: PumpedState,
}

impl Simulation {
    pub fn build(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let curves = match &config.molecule.curves {
            Some(p) => PotentialCurveSet::load_path(p)?,
            None => PotentialCurveSet::bundled(),
        };
        let grid = config.radial_grid()?;
        let sampled = curves.sample_on_grid(&grid);
        let mass = config.molecule.reduced_mass;
        let basis = solve_bound_states(&grid, &sampled.v_g, mass, MAX_BOUND_STATES)?;
        if basis.len() < config.basis.states {
            return Err(Error::TooFewStates { needed: config.basis.states, found: basis.len() });
        }
        let weight = match &config.pump.weight_file {
            Some(p) => Some(output::read_weight(&std::fs::read_to_string(p)?, &grid)?),
            None => None,
        };
        let spec = PumpSpec { mode: config.pump.mode, ground: config.neutral_ground()?, weight };
        let pump = spec.prepare(&basis, mass)?;
        let ops = SampledOperators::new(&sampled, mass)?;
        log::info!("{} bound states, E0 = {:.6} hartree", basis.len(), basis.energies()[0]);
        Ok(Self { config, curves, ops, basis, pump })
    }

    pub fn context(&self) -> Result<ScanContext<'_>> {
        ScanContext::new(&self.basis, &self.ops, self.config.scan_settings())
    }

    /// Bound part of the pumped state at t = 0.
    pub fn initial_packet(&self) -> BoundPacket {
        BoundPacket::new(0.0, self.pump.coefficients.clone())
    }

    pub fn model(&self) -> Result<PerturbativeModel> {
        PerturbativeModel::new(
            &self.basis,
            &self.ops.dipole,
            self.config.basis.states,
            self.config.model.closure_energy,
        )
    }
}

struct Recorder<'a> {
    command: &'static str,
    config: &'a RunConfig,
    dir: PathBuf,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl<'a> Recorder<'a> {
    fn new(command: &'static str, config: &'a RunConfig) -> Result<Self> {
        let dir = config.output.dir.clone();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { command, config, dir, started: Instant::now(), outputs: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.create_at(self.dir.join(name))
    }

    /// The command's main table, honouring `output.file`.
    fn create_primary(&mut self, name: &str) -> Result<BufWriter<File>> {
        match self.config.output.file.clone() {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                self.create_at(p)
            }
            None => self.create(name),
        }
    }

    fn create_at(&mut self, path: PathBuf) -> Result<BufWriter<File>> {
        self.outputs.push(path.clone());
        Ok(BufWriter::new(File::create(path)?))
    }

    /// Writes the manifest even when the table could not be written, then
    /// reports the write error.
    fn finish_scan(
        self,
        written: Result<()>,
        sha: &str,
        workers: usize,
        rows_total: usize,
        status: Vec<RowStatus>,
        mut summary: serde_json::Value,
    ) -> Result<RunManifest> {
        match written {
            Ok(()) => self.finish(sha, workers, rows_total, status, summary),
            Err(e) => {
                summary["error"] = json!(e.to_string());
                if let Err(m) = self.finish(sha, workers, rows_total, status, summary) {
                    log::error!("manifest not written: {m}");
                }
                Err(e)
            }
        }
    }

    fn finish(
        self,
        sha: &str,
        workers: usize,
        rows_total: usize,
        status: Vec<RowStatus>,
        summary: serde_json::Value,
    ) -> Result<RunManifest> {
        let cancelled = status.iter().any(|s| s.status == "cancelled");
        let manifest = RunManifest {
            command: self.command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: self.config.clone(),
            curves_sha256: sha.into(),
            workers,
            elapsed_s: self.started.elapsed().as_secs_f64(),
            rows_total,
            rows_completed: rows_total - status.len(),
            row_status: status,
            cancelled,
            outputs: self.outputs,
            summary,
        };
        manifest.write(&self.dir.join(MANIFEST))?;
        Ok(manifest)
    }
}

/// Bound-state energies and beat periods (`eigen.csv`).
pub fn run_eigen(sim: &Simulation) -> Result<RunManifest> {
    let mut rec = Recorder::new("eigen", &sim.config)?;
    output::write_eigen(rec.create_primary("eigen.csv")?, &sim.basis)?;
    let fit = sim.basis.fit_anharmonic().ok();
    let summary = json!({
        "bound_states": sim.basis.len(),
        "spectral_constants": fit,
        "initial_populations": sim.pump.populations(),
    });
    rec.finish(sim.curves.sha256(), 1, 0, Vec::new(), summary)
}

/// Single propagation under the configured pulses (`propagate.csv`).
pub fn run_propagate(sim: &Simulation) -> Result<RunManifest> {
    let cfg = &sim.config;
    let pulses = [&cfg.control, &cfg.probe].into_iter().flatten().map(|p| p.pulse()).collect::<Result<Vec<_>>>()?;
    let mut rec = Recorder::new("propagate", cfg)?;
    let bound0 = bound_population(&sim.pump.state, &sim.basis)?;
    let mut rows = Vec::new();
    let mut err = None;
    let mut obs = |s: &Sample, state: &TwoChannelState| match bound_population(state, &sim.basis) {
        Ok(b) => rows.push(TraceRow::new(s, (bound0 - b).max(0.0))),
        Err(e) => err = err.take().or(Some(e)),
    };
    let result = propagate(sim.pump.state.clone(), &pulses, &cfg.propagation_config(), &sim.ops, Some(&mut obs))?;
    if let Some(e) = err {
        return Err(e);
    }
    output::write_trace(rec.create_primary("propagate.csv")?, &rows)?;
    let final_bound = bound_population(&result.state, &sim.basis)?;
    let summary = json!({
        "steps": result.steps,
        "absorbed": result.absorbed_flux,
        "final_norm": result.state.norm_squared(),
        "dissociation_yield": (bound0 - final_bound).max(0.0),
    });
    rec.finish(sim.curves.sha256(), 1, 0, Vec::new(), summary)
}

/// Control-delay scan (`scan_control.csv`).
pub fn run_scan_control(sim: &Simulation, executor: &Executor, cancel: Option<&CancelToken>) -> Result<RunManifest> {
    let cfg = &sim.config;
    let template = cfg.require_control()?.pulse()?;
    let range = cfg.control_scan.range()?;
    let ctx = sim.context()?;
    let mut rec = Recorder::new("scan-control", cfg)?;
    let map = control_scan(&ctx, &sim.initial_packet(), &template, &range, executor, cancel)?;
    let written =
        rec.create_primary("scan_control.csv").and_then(|w| output::write_population_map(w, &map, cfg.basis.states));
    let status: Vec<RowStatus> = map.failures().map(RowStatus::from).collect();
    for s in status.iter().filter(|s| s.status != "cancelled") {
        log::warn!("row {} (tau = {} fs) failed: {}", s.index, s.delay_fs, s.message);
    }
    let summary = json!({ "initial_populations": sim.pump.populations() });
    rec.finish_scan(written, sim.curves.sha256(), executor.workers(), range.len(), status, summary)
}

/// Probe-delay scan after the control pulse (`scan_probe.csv`).
pub fn run_scan_probe(sim: &Simulation, executor: &Executor, cancel: Option<&CancelToken>) -> Result<RunManifest> {
    let cfg = &sim.config;
    let probe = cfg.require_probe()?.pulse()?;
    let control = cfg.control.as_ref().map(|c| c.pulse()).transpose()?;
    let setup = ProbeSetup {
        initial: sim.initial_packet(),
        control,
        probe,
        range: cfg.probe_scan.range()?,
        method: cfg.probe_scan.method,
    };
    let ctx = sim.context()?;
    let mut rec = Recorder::new("scan-probe", cfg)?;
    let series = probe_scan(&ctx, &setup, executor, cancel)?;
    let written = rec.create_primary("scan_probe.csv").and_then(|w| output::write_yield_series(w, &series));
    let status: Vec<RowStatus> = series.failures.iter().map(RowStatus::from).collect();
    let summary = json!({ "control_yield": series.control_yield });
    rec.finish_scan(written, sim.curves.sha256(), executor.workers(), setup.range.len(), status, summary)
}

/// Beat spectrum of a probe table (`spectrum.csv`). Needs no eigen solve.
pub fn run_spectrum(config: &RunConfig, input: &Path) -> Result<RunManifest> {
    let (t, y) = output::read_yield_series(File::open(input)?, config.spectrum.total_yield)?;
    let mut rec = Recorder::new("spectrum", config)?;
    let s = beat_spectrum(&t, &y, &config.spectrum.options())?;
    output::write_spectrum(rec.create_primary("spectrum.csv")?, &s)?;
    let peaks: Vec<_> = s
        .peaks(0.1)
        .iter()
        .take(10)
        .map(|p| json!({ "omega_au": p.frequency_au, "period_fs": crate::units::period_fs(p.frequency_au), "magnitude": p.magnitude }))
        .collect();
    let summary = json!({
        "input": input,
        "samples": s.n_samples,
        "fft_size": s.fft_size,
        "resolution_au": s.resolution_au(),
        "peaks": peaks,
    });
    rec.finish("", 1, 0, Vec::new(), summary)
}

/// Perturbative model tables: couplings, clock phases and, when a full scan
/// is given, the model-versus-propagation comparison.
pub fn run_model(sim: &Simulation) -> Result<RunManifest> {
    let cfg = &sim.config;
    let model = sim.model()?;
    let hw = cfg.propagation.window_half_widths;
    let mut rec = Recorder::new("model", cfg)?;
    output::write_coupling(rec.create_primary("coupling.csv")?, &model.coupling)?;

    let fit = sim.basis.fit_anharmonic()?;
    let times = predict_interference_times(&fit);
    let phase_time =
        model.phase_condition_time(0.5 * times.fractional_revival_fs, 1.5 * times.fractional_revival_fs, 0.01)?;
    let ratios: Vec<Option<f64>> = (2..=6).map(|n| model.coupling.selection_ratio(n)).collect();
    let mut summary = json!({
        "states": model.len(),
        "closure_energy": model.e_bar,
        "spectral_constants": fit,
        "predicted": times,
        "phase_condition_fs": phase_time,
        "selection_ratios_n2_to_n6": ratios,
    });

    if let Some(control) = &cfg.control {
        let template = control.pulse()?;
        let mut clocks = Vec::new();
        for &tau in &cfg.model.clock_delays {
            for &n0 in &cfg.model.clock_parents {
                let pulse = template.centered_at(tau);
                for c in model.clock_phases(n0, &pulse, hw)? {
                    clocks.push(ClockRow::new(tau, n0, &c));
                }
            }
        }
        output::write_clocks(rec.create("clocks.csv")?, &clocks)?;

        let a = &sim.pump.coefficients[..model.len()];
        let mut diagnostics = Vec::new();
        for &tau in &cfg.model.clock_delays {
            let kappa = model.effective_kappa(&template.centered_at(tau), hw)?;
            diagnostics.push(json!({ "tau_fs": tau, "levels": model.diagnostics(a, &kappa, tau) }));
        }
        summary["interference_diagnostics"] = json!(diagnostics);

        if let Some(path) = &cfg.model.compare {
            let full = output::read_population_map(File::open(path)?)?;
            let rows = compare_with_full(&model, &sim.pump.coefficients, &full, &template, hw)?;
            output::write_comparison(rec.create("comparison.csv")?, &rows)?;
            let worst = rows.iter().filter_map(|r| r.max_relative_error(1e-4)).fold(0.0, f64::max);
            let parity_agree = rows
                .iter()
                .filter(|r| {
                    let f = ComparisonRow::transfer_parity(&r.transfer_full);
                    let m = ComparisonRow::transfer_parity(&r.transfer_model);
                    matches!((f, m), (Some(f), Some(m)) if f.signum() == m.signum())
                })
                .count();
            summary["comparison"] = json!({
                "rows": rows.len(),
                "max_relative_error": worst,
                "parity_sign_agreement": parity_agree,
            });
        }
    } else if cfg.model.compare.is_some() {
        return Err(Error::Config { line: None, msg: "model comparison needs a [control] section".into() });
    }
    rec.finish(sim.curves.sha256(), 1, 0, Vec::new(), summary)
}
