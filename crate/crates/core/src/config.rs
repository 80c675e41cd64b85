//! TOML run configuration.
//!
//! Physical values may be bare numbers in the default unit of their key
//! (fs, W/cm^2, nm, hartree, bohr; the time step in a.u.) or strings with an
//! explicit unit such as `"5 fs"`, `"5e13 W/cm2"` or `"3115 cm-1"`.

use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::molecule::MorseCurve;
use crate::propagator::PropagationConfig;
use crate::pulse::LaserPulse;
use crate::pump::PumpMode;
use crate::scan::{ProbeMethod, ScanRange, ScanSettings};
use crate::spectrum::{SpectrumOptions, Window};
use crate::units::{AU_TIME_FS, D2_REDUCED_MASS, HARTREE_CM, HARTREE_EV};

#[derive(Debug, Clone, Copy)]
enum Dim {
    Time,
    StepTime,
    Intensity,
    Wavelength,
    Energy,
    Length,
}

impl Dim {
    fn units(self) -> &'static str {
        match self {
            Dim::Time => "fs, as, ps, au",
            Dim::StepTime => "au, fs, as",
            Dim::Intensity => "W/cm2, TW/cm2, PW/cm2",
            Dim::Wavelength => "nm, um",
            Dim::Energy => "hartree, au, eV, cm-1",
            Dim::Length => "bohr, au, angstrom",
        }
    }

    /// Value in the key's default unit.
    fn convert(self, x: f64, unit: &str) -> Option<f64> {
        let u = unit.to_ascii_lowercase().replace(['^', ' '], "");
        let factor = match (self, u.as_str()) {
            (Dim::Time, "fs") | (Dim::StepTime, "au" | "a.u.") => 1.0,
            (Dim::Time, "as") => 1e-3,
            (Dim::Time, "ps") => 1e3,
            (Dim::Time, "au" | "a.u.") => AU_TIME_FS,
            (Dim::StepTime, "fs") => 1.0 / AU_TIME_FS,
            (Dim::StepTime, "as") => 1e-3 / AU_TIME_FS,
            (Dim::Intensity, "w/cm2") => 1.0,
            (Dim::Intensity, "tw/cm2") => 1e12,
            (Dim::Intensity, "pw/cm2") => 1e15,
            (Dim::Wavelength, "nm") => 1.0,
            (Dim::Wavelength, "um" | "µm") => 1e3,
            (Dim::Energy, "hartree" | "au" | "a.u." | "eh") => 1.0,
            (Dim::Energy, "ev") => 1.0 / HARTREE_EV,
            (Dim::Energy, "cm-1" | "1/cm") => 1.0 / HARTREE_CM,
            (Dim::Length, "bohr" | "au" | "a.u.") => 1.0,
            (Dim::Length, "angstrom" | "a" | "å") => 1.0 / 0.529_177_210_903,
            _ => return None,
        };
        Some(x * factor)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sign {
    Any,
    NonNegative,
    Positive,
}

fn quantity<'de, D: Deserializer<'de>>(d: D, dim: Dim, sign: Sign) -> std::result::Result<f64, D::Error> {
    use serde::de::Error as _;
    let v = match Raw::deserialize(d)? {
        Raw::Num(x) => x,
        Raw::Text(s) => {
            let s = s.trim();
            let split = s
                .char_indices()
                .find(|&(i, c)| {
                    c.is_alphabetic()
                        && !(matches!(c, 'e' | 'E')
                            && s[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+'))
                })
                .map(|(i, _)| i)
                .unwrap_or(s.len());
            let (num, unit) = s.split_at(split);
            let x: f64 =
                num.trim().parse().map_err(|_| D::Error::custom(format!("cannot read a number from `{s}`")))?;
            let unit = unit.trim();
            if unit.is_empty() {
                x
            } else {
                dim.convert(x, unit).ok_or_else(|| {
                    D::Error::custom(format!("unknown unit `{unit}` (expected one of: {})", dim.units()))
                })?
            }
        }
    };
    if !v.is_finite() {
        return Err(D::Error::custom("value must be finite"));
    }
    match sign {
        Sign::Positive if v <= 0.0 => Err(D::Error::custom(format!("must be positive, got {v}"))),
        Sign::NonNegative if v < 0.0 => Err(D::Error::custom(format!("must be >= 0, got {v}"))),
        _ => Ok(v),
    }
}

macro_rules! quantity_fn {
    ($name:ident, $dim:expr, $sign:expr) => {
        fn $name<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
            quantity(d, $dim, $sign)
        }
    };
}

quantity_fn!(time_fs, Dim::Time, Sign::Any);
quantity_fn!(pos_time_fs, Dim::Time, Sign::Positive);
quantity_fn!(step_au, Dim::StepTime, Sign::Positive);
quantity_fn!(intensity, Dim::Intensity, Sign::NonNegative);
quantity_fn!(wavelength, Dim::Wavelength, Sign::Positive);
quantity_fn!(energy, Dim::Energy, Sign::Any);
quantity_fn!(pos_energy, Dim::Energy, Sign::Positive);
quantity_fn!(length, Dim::Length, Sign::NonNegative);
quantity_fn!(pos_length, Dim::Length, Sign::Positive);

fn time_list_fs<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    struct Q(f64);
    impl<'de> Deserialize<'de> for Q {
        fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
            time_fs(d).map(Q)
        }
    }
    Ok(Vec::<Q>::deserialize(d)?.into_iter().map(|q| q.0).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoleculeSection {
    /// Curve table; the bundled H2+ curves when absent.
    pub curves: Option<PathBuf>,
    pub reduced_mass: f64,
    pub label: String,
}

impl Default for MoleculeSection {
    fn default() -> Self {
        Self { curves: None, reduced_mass: D2_REDUCED_MASS, label: "D2+".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(deserialize_with = "length")]
    pub r_min: f64,
    #[serde(deserialize_with = "pos_length")]
    pub r_max: f64,
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = RadialGrid::default();
        Self { r_min: g.r_min(), r_max: g.r_max(), points: g.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSection {
    /// Levels reported in population tables and used by the model.
    pub states: usize,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self { states: 14 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub mode: PumpMode,
    /// Two columns `R w(R)` (bohr, arbitrary), linearly interpolated, zero outside.
    pub weight_file: Option<PathBuf>,
    #[serde(deserialize_with = "pos_energy")]
    pub neutral_depth: f64,
    #[serde(deserialize_with = "pos_energy")]
    pub neutral_omega: f64,
    #[serde(deserialize_with = "pos_length")]
    pub neutral_r_e: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        Self {
            mode: PumpMode::FranckCondon,
            weight_file: None,
            neutral_depth: 0.1745,
            neutral_omega: 3115.0 / HARTREE_CM,
            neutral_r_e: 1.40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSection {
    /// Time step in a.u.
    #[serde(deserialize_with = "step_au")]
    pub dt: f64,
    #[serde(deserialize_with = "time_fs")]
    pub t_start: f64,
    #[serde(deserialize_with = "time_fs")]
    pub t_end: f64,
    pub absorber_fraction: f64,
    pub absorber_strength: f64,
    pub record_stride: usize,
    pub window_half_widths: f64,
}

impl Default for PropagationSection {
    fn default() -> Self {
        let p = PropagationConfig::default();
        let s = ScanSettings::default();
        Self {
            dt: p.dt_au,
            t_start: 0.0,
            t_end: 650.0,
            absorber_fraction: p.absorber_fraction,
            absorber_strength: p.absorber_strength,
            record_stride: p.record_stride,
            window_half_widths: s.window_half_widths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    #[serde(deserialize_with = "intensity")]
    pub intensity: f64,
    #[serde(deserialize_with = "wavelength", default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(deserialize_with = "pos_time_fs", default = "default_fwhm")]
    pub fwhm: f64,
    #[serde(deserialize_with = "time_fs", default)]
    pub tau: f64,
    #[serde(default)]
    pub carrier_phase: f64,
}

fn default_wavelength() -> f64 {
    790.0
}

fn default_fwhm() -> f64 {
    5.0
}

impl PulseSection {
    pub fn new(intensity: f64, tau: f64) -> Self {
        Self { intensity, wavelength: default_wavelength(), fwhm: default_fwhm(), tau, carrier_phase: 0.0 }
    }

    pub fn pulse(&self) -> Result<LaserPulse> {
        Ok(LaserPulse::new(self.intensity, self.wavelength, self.tau, self.fwhm)?
            .with_carrier_phase(self.carrier_phase))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangeSection {
    #[serde(deserialize_with = "time_fs")]
    pub start: f64,
    #[serde(deserialize_with = "time_fs")]
    pub end: f64,
    #[serde(deserialize_with = "pos_time_fs")]
    pub step: f64,
}

impl RangeSection {
    pub fn range(&self) -> Result<ScanRange> {
        ScanRange::new(self.start, self.end, self.step)
    }
}

impl Default for RangeSection {
    fn default() -> Self {
        Self { start: 0.0, end: 650.0, step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeScanSection {
    #[serde(deserialize_with = "time_fs")]
    pub start: f64,
    #[serde(deserialize_with = "time_fs")]
    pub end: f64,
    #[serde(deserialize_with = "pos_time_fs")]
    pub step: f64,
    pub method: ProbeMethod,
}

impl Default for ProbeScanSection {
    fn default() -> Self {
        Self { start: 310.0, end: 4000.0, step: 1.0, method: ProbeMethod::Transfer }
    }
}

impl ProbeScanSection {
    pub fn range(&self) -> Result<ScanRange> {
        ScanRange::new(self.start, self.end, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub window: Window,
    pub zero_pad: usize,
    pub remove_mean: bool,
    /// Yield column analysed: probe-epoch only, or including the control background.
    pub total_yield: bool,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        let o = SpectrumOptions::default();
        Self { window: o.window, zero_pad: o.zero_pad, remove_mean: o.remove_mean, total_yield: false }
    }
}

impl SpectrumSection {
    pub fn options(&self) -> SpectrumOptions {
        SpectrumOptions { window: self.window, zero_pad: self.zero_pad, remove_mean: self.remove_mean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Closure energy of the intermediate continuum (hartree, 0 = u threshold).
    #[serde(deserialize_with = "energy")]
    pub closure_energy: f64,
    pub clock_parents: Vec<usize>,
    #[serde(deserialize_with = "time_list_fs")]
    pub clock_delays: Vec<f64>,
    /// Full-propagation population map to compare against.
    pub compare: Option<PathBuf>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { closure_energy: 0.0, clock_parents: vec![3, 4, 5], clock_delays: vec![293.0, 306.0], compare: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Path of the command's main table; defaults to its standard name in `dir`.
    pub file: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workers: Option<usize>,
    #[serde(default)]
    pub molecule: MoleculeSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub pump: PumpSection,
    #[serde(default)]
    pub propagation: PropagationSection,
    pub control: Option<PulseSection>,
    pub probe: Option<PulseSection>,
    #[serde(default)]
    pub control_scan: RangeSection,
    #[serde(default)]
    pub probe_scan: ProbeScanSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]` (`""` for top-level keys).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(h) = t.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        if current == section {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Parses and validates a configuration; errors carry the offending line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        let mut msg = e.message().trim().to_string();
        // value errors carry only a span; name the key written on that line
        let key = line
            .and_then(|l| text.lines().nth(l - 1))
            .and_then(|l| l.split_once('='))
            .map(|(k, _)| k.trim())
            .filter(|k| !k.is_empty() && !k.starts_with('[') && !msg.contains(k));
        if let Some(k) = key {
            msg = format!("{k}: {msg}");
        }
        Error::Config { line, msg }
    })?;
    cfg.validate_in(Some(text))?;
    Ok(cfg)
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { line: None, msg: format!("cannot read {}: {e}", path.display()) })?;
        parse_config(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_in(None)
    }

    fn validate_in(&self, text: Option<&str>) -> Result<()> {
        let err = |section: &str, key: &str, msg: String| Error::Config {
            line: text.and_then(|t| locate(t, section, key)),
            msg: format!("{}{key}: {msg}", if section.is_empty() { String::new() } else { format!("{section}.") }),
        };
        if self.workers == Some(0) {
            return Err(err("", "workers", "must be >= 1".into()));
        }
        if !(self.molecule.reduced_mass > 0.0) {
            return Err(err("molecule", "reduced_mass", "must be positive".into()));
        }
        if let Err(e) = self.radial_grid() {
            return Err(err("grid", "points", e.to_string()));
        }
        if self.basis.states < 2 {
            return Err(err("basis", "states", "need at least 2 states".into()));
        }
        let p = &self.propagation;
        if !(p.dt > 0.0) {
            return Err(err("propagation", "dt", "must be positive".into()));
        }
        if !(self.control_scan.step > 0.0) {
            return Err(err("control_scan", "step", "must be positive".into()));
        }
        if !(self.probe_scan.step > 0.0) {
            return Err(err("probe_scan", "step", "must be positive".into()));
        }
        if !(0.0..0.5).contains(&p.absorber_fraction) {
            return Err(err("propagation", "absorber_fraction", "must lie in [0, 0.5)".into()));
        }
        if !(p.absorber_strength >= 0.0) {
            return Err(err("propagation", "absorber_strength", "must be >= 0".into()));
        }
        if p.record_stride == 0 {
            return Err(err("propagation", "record_stride", "must be >= 1".into()));
        }
        if !(p.window_half_widths > 0.0) {
            return Err(err("propagation", "window_half_widths", "must be positive".into()));
        }
        if p.t_end < p.t_start {
            return Err(err("propagation", "t_end", "must not precede t_start".into()));
        }
        if self.control_scan.end < self.control_scan.start {
            return Err(err("control_scan", "end", "must not precede start".into()));
        }
        if self.probe_scan.end < self.probe_scan.start {
            return Err(err("probe_scan", "end", "must not precede start".into()));
        }
        if self.spectrum.zero_pad == 0 {
            return Err(err("spectrum", "zero_pad", "must be >= 1".into()));
        }
        if self.pump.mode == PumpMode::Weighted && self.pump.weight_file.is_none() {
            return Err(err("pump", "mode", "weighted mode needs weight_file".into()));
        }
        Ok(())
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.r_min, self.grid.r_max, self.grid.points)
    }

    pub fn neutral_ground(&self) -> Result<MorseCurve> {
        MorseCurve::from_spectroscopic(
            self.pump.neutral_depth,
            self.pump.neutral_omega,
            self.pump.neutral_r_e,
            self.molecule.reduced_mass,
        )
    }

    pub fn propagation_config(&self) -> PropagationConfig {
        let p = &self.propagation;
        PropagationConfig {
            dt_au: p.dt,
            t_start_fs: p.t_start,
            t_end_fs: p.t_end,
            absorber_fraction: p.absorber_fraction,
            absorber_strength: p.absorber_strength,
            record_stride: p.record_stride,
        }
    }

    pub fn scan_settings(&self) -> ScanSettings {
        let p = &self.propagation;
        ScanSettings {
            dt_au: p.dt,
            absorber_fraction: p.absorber_fraction,
            absorber_strength: p.absorber_strength,
            window_half_widths: p.window_half_widths,
        }
    }

    pub fn require_control(&self) -> Result<&PulseSection> {
        self.control.as_ref().ok_or_else(|| missing("control"))
    }

    pub fn require_probe(&self) -> Result<&PulseSection> {
        self.probe.as_ref().ok_or_else(|| missing("probe"))
    }

    /// Workers: `VIBCHESS_WORKERS` if set, else the config value, else all cores.
    pub fn executor(&self) -> crate::parallel::Executor {
        use crate::parallel::{Executor, WORKERS_ENV};
        match (std::env::var(WORKERS_ENV).ok(), self.workers) {
            (Some(_), _) | (None, None) => Executor::from_env(),
            (None, Some(n)) => Executor::new(n),
        }
    }
}

fn missing(section: &str) -> Error {
    Error::Config { line: None, msg: format!("missing required section [{section}]") }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("[molecule]\ncurves = \"curves.dat\"\n\n[control]\nintensity = 5e13\n").unwrap();
        assert_eq!(c.grid.points, 2048);
        assert_eq!(c.propagation.dt, 0.5);
        let p = c.require_control().unwrap();
        assert_eq!((p.wavelength, p.fwhm, p.tau), (790.0, 5.0, 0.0));
        assert!(c.require_probe().is_err());
        assert_eq!(c.molecule.curves.as_deref(), Some(std::path::Path::new("curves.dat")));
    }

    #[test]
    fn units_are_converted() {
        let c = parse_config(
            "[control]\nintensity = \"50 TW/cm2\"\nwavelength = \"0.79 um\"\nfwhm = \"5000 as\"\ntau = \"0.293 ps\"\n\
             [propagation]\ndt = \"0.0121 fs\"\n[pump]\nneutral_omega = \"3115 cm-1\"\nneutral_depth = \"4.748 eV\"\n",
        )
        .unwrap();
        let p = c.control.unwrap();
        assert!((p.intensity - 5e13).abs() < 1.0);
        assert!((p.wavelength - 790.0).abs() < 1e-9);
        assert!((p.fwhm - 5.0).abs() < 1e-12);
        assert!((p.tau - 293.0).abs() < 1e-9);
        assert!((c.propagation.dt - 0.0121 / AU_TIME_FS).abs() < 1e-12);
        assert!((c.pump.neutral_omega - 3115.0 / HARTREE_CM).abs() < 1e-15);
        assert!((c.pump.neutral_depth - 0.1745).abs() < 1e-4);
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = parse_config("[grid]\npoints = 512\n\n[control]\nintensity = 1e13\nfwhm = -5\n").unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::Config { line: Some(6), .. }), "{msg}");
        assert!(msg.contains("positive") && msg.contains("fwhm"), "{msg}");

        let e = parse_config("[control]\nintensity = 1e13\nfhwm = 5\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(3), .. }));
        assert!(e.to_string().contains("fhwm"));

        let e = parse_config("[control]\nintensity = \"5 furlongs\"\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(2), .. }));
        assert!(e.to_string().contains("furlongs"));

        let e = parse_config("[propagation]\nabsorber_fraction = 0.7\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(2), .. }));
        assert!(e.to_string().contains("absorber_fraction"));

        let e = parse_config("[grid]\nr_min = 5.0\nr_max = 2.0\n").unwrap_err();
        assert!(e.to_string().contains("grid"));

        let e = parse_config("[nonsense]\nx = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(1), .. }));
    }

    #[test]
    fn config_round_trips_through_serde() {
        let c =
            parse_config("workers = 3\n[control]\nintensity = 5e13\ntau = 293\n[probe]\nintensity = 4e14\n").unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
    }

    #[test]
    fn full_delay_scan_config_parses() {
        let text = "[control]\nintensity = 5e13\nwavelength = 790\nfwhm = 5\n\n[control_scan]\nstart = 0\nend = 650\nstep = 1\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.control_scan.range().unwrap().len(), 651);
    }
}
