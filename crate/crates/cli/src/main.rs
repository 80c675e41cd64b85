use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use vibchess::config::{parse_config, PulseSection, RunConfig};
use vibchess::output::RunManifest;
use vibchess::parallel::{CancelToken, Executor, WORKERS_ENV};
use vibchess::run::{self, Simulation};
use vibchess::scan::ProbeMethod;
use vibchess::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_INTERRUPTED: u8 = 130;

#[derive(Parser)]
#[command(name = "vibchess", version, about = "Vibrational wavepacket control of D2+ with ultrashort pulses")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for tables and the manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Curve table `R V_g V_u d` (atomic units) replacing the bundled H2+ curves.
    #[arg(long, global = true)]
    curves: Option<PathBuf>,

    /// Path of the command's main CSV.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for scans (default: VIBCHESS_WORKERS, then the config, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Time step in atomic units.
    #[arg(long, global = true, allow_hyphen_values = true)]
    dt: Option<f64>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Stop admitting scan rows after this many.
    #[arg(long, global = true, hide = true)]
    stop_after: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct PulseArgs {
    /// Peak intensity in W/cm^2.
    #[arg(long, allow_hyphen_values = true)]
    intensity: Option<f64>,
    /// Central wavelength in nm.
    #[arg(long, allow_hyphen_values = true)]
    wavelength: Option<f64>,
    /// Intensity FWHM in fs.
    #[arg(long, allow_hyphen_values = true)]
    fwhm: Option<f64>,
    /// Pulse centre in fs.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Carrier-envelope phase in rad.
    #[arg(long, allow_hyphen_values = true)]
    carrier_phase: Option<f64>,
}

#[derive(Args, Default)]
struct RangeArgs {
    /// First delay in fs.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<f64>,
    /// Last delay in fs (inclusive).
    #[arg(long, allow_hyphen_values = true)]
    end: Option<f64>,
    /// Delay step in fs.
    #[arg(long, allow_hyphen_values = true)]
    step: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Bound levels of the ion and their beat periods.
    Eigen,
    /// One propagation under the control (and probe) pulse.
    Propagate {
        #[command(flatten)]
        pulse: PulseArgs,
        /// End of the propagation in fs.
        #[arg(long, allow_hyphen_values = true)]
        t_end: Option<f64>,
    },
    /// Final vibrational populations against control delay.
    ScanControl {
        #[command(flatten)]
        pulse: PulseArgs,
        #[command(flatten)]
        range: RangeArgs,
    },
    /// Probe dissociation yield against probe delay; pulse flags set the probe.
    ScanProbe {
        #[command(flatten)]
        pulse: PulseArgs,
        #[command(flatten)]
        range: RangeArgs,
        /// Control pulse centre in fs.
        #[arg(long)]
        control_tau: Option<f64>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Beat spectrum of a probe-scan table.
    Spectrum {
        /// Probe table (default: scan_probe.csv in the output directory).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Analyse the yield including the control-epoch background.
        #[arg(long)]
        total: bool,
    },
    /// Perturbative model tables; compares with a full scan when given one.
    Model {
        #[command(flatten)]
        pulse: PulseArgs,
        /// scan_control.csv from a full propagation run.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Direct,
    Transfer,
}

fn apply_pulse(section: &mut Option<PulseSection>, name: &str, a: &PulseArgs) -> anyhow::Result<()> {
    let any = a.intensity.is_some()
        || a.wavelength.is_some()
        || a.fwhm.is_some()
        || a.tau.is_some()
        || a.carrier_phase.is_some();
    if !any {
        return Ok(());
    }
    let p = match section {
        Some(p) => p,
        None => {
            let i = a.intensity.ok_or_else(|| Error::Config {
                line: None,
                msg: format!("no [{name}] section: --intensity is required"),
            })?;
            section.insert(PulseSection::new(i, 0.0))
        }
    };
    if let Some(x) = a.intensity {
        p.intensity = x;
    }
    if let Some(x) = a.wavelength {
        p.wavelength = x;
    }
    if let Some(x) = a.fwhm {
        p.fwhm = x;
    }
    if let Some(x) = a.tau {
        p.tau = x;
    }
    if let Some(x) = a.carrier_phase {
        p.carrier_phase = x;
    }
    Ok(())
}

fn apply_range(start: &mut f64, end: &mut f64, step: &mut f64, r: &RangeArgs) {
    if let Some(x) = r.start {
        *start = x;
    }
    if let Some(x) = r.end {
        *end = x;
    }
    if let Some(x) = r.step {
        *step = x;
    }
}

fn check_pulse(p: &Option<PulseSection>, name: &str) -> anyhow::Result<()> {
    if let Some(p) = p {
        p.pulse().with_context(|| format!("[{name}] pulse"))?;
    }
    Ok(())
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(c) = &cli.curves {
        cfg.molecule.curves = Some(c.clone());
    }
    if cli.out.is_some() {
        cfg.output.file = cli.out.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(dt) = cli.dt {
        cfg.propagation.dt = dt;
    }
    match &cli.command {
        Command::Eigen => {}
        Command::Spectrum { total, .. } => {
            if *total {
                cfg.spectrum.total_yield = true;
            }
        }
        Command::Propagate { pulse, t_end } => {
            apply_pulse(&mut cfg.control, "control", pulse)?;
            if let Some(t) = t_end {
                cfg.propagation.t_end = *t;
            }
        }
        Command::ScanControl { pulse, range } => {
            apply_pulse(&mut cfg.control, "control", pulse)?;
            let s = &mut cfg.control_scan;
            apply_range(&mut s.start, &mut s.end, &mut s.step, range);
        }
        Command::ScanProbe { pulse, range, control_tau, method } => {
            apply_pulse(&mut cfg.probe, "probe", pulse)?;
            if let Some(t) = control_tau {
                let c = cfg.control.as_mut().ok_or_else(|| Error::Config {
                    line: None,
                    msg: "--control-tau needs a [control] section".into(),
                })?;
                c.tau = *t;
            }
            let s = &mut cfg.probe_scan;
            apply_range(&mut s.start, &mut s.end, &mut s.step, range);
            if let Some(m) = method {
                s.method = match m {
                    MethodArg::Direct => ProbeMethod::Direct,
                    MethodArg::Transfer => ProbeMethod::Transfer,
                };
            }
        }
        Command::Model { pulse, compare } => {
            apply_pulse(&mut cfg.control, "control", pulse)?;
            if compare.is_some() {
                cfg.model.compare = compare.clone();
            }
        }
    }
    cfg.validate()?;
    check_pulse(&cfg.control, "control")?;
    check_pulse(&cfg.probe, "probe")?;
    Ok(cfg)
}

fn executor(cfg: &RunConfig, flag: Option<usize>) -> Executor {
    match flag {
        Some(n) => Executor::new(n),
        None => cfg.executor(),
    }
}

fn execute(cli: &Cli, cancel: &CancelToken) -> anyhow::Result<RunManifest> {
    let cfg = load_config(cli)?;
    if let Command::Spectrum { input, .. } = &cli.command {
        let input = input.clone().unwrap_or_else(|| cfg.output.dir.join("scan_probe.csv"));
        return Ok(run::run_spectrum(&cfg, &input)?);
    }
    let exec = executor(&cfg, cli.workers);
    let sim = Simulation::build(cfg)?;
    let manifest = match &cli.command {
        Command::Eigen => run::run_eigen(&sim)?,
        Command::Propagate { .. } => run::run_propagate(&sim)?,
        Command::ScanControl { .. } => run::run_scan_control(&sim, &exec, Some(cancel))?,
        Command::ScanProbe { .. } => run::run_scan_probe(&sim, &exec, Some(cancel))?,
        Command::Model { .. } => run::run_model(&sim)?,
        Command::Spectrum { .. } => unreachable!("handled above"),
    };
    Ok(manifest)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    log::debug!("{WORKERS_ENV} = {:?}", std::env::var(WORKERS_ENV).ok());

    let cancel = match cli.stop_after {
        Some(n) => CancelToken::with_row_limit(n),
        None => CancelToken::new(),
    };
    let handler = cancel.clone();
    if let Err(e) = ctrlc::set_handler(move || {
        eprintln!("interrupt: finishing rows in flight");
        handler.cancel();
    }) {
        log::warn!("cannot install interrupt handler: {e}");
    }

    match execute(&cli, &cancel) {
        Ok(m) => {
            for p in &m.outputs {
                println!("{}", p.display());
            }
            let numerical = m.row_status.iter().filter(|s| s.status == "numerical_failure").count();
            let failed = m.row_status.iter().filter(|s| s.status == "failed").count();
            if numerical + failed > 0 {
                eprintln!("{} of {} rows failed; see the manifest", numerical + failed, m.rows_total);
            }
            if m.cancelled {
                eprintln!("cancelled after {} of {} rows", m.rows_completed, m.rows_total);
                ExitCode::from(EXIT_INTERRUPTED)
            } else if numerical > 0 {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
