//! CSV tables, the run manifest and auxiliary input files.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::eigen::VibrationalBasis;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::model::{Clock, ComparisonRow, CouplingMatrix};
use crate::propagator::Sample;
use crate::scan::{BoundPacket, ControlRow, PopulationMap, RowFailure, YieldSeries};
use crate::spectrum::SpectralDensity;
use crate::units::{period_fs, AU_TIME_FS, HARTREE_EV};

fn writer(out: impl Write) -> csv::Writer<impl Write> {
    csv::WriterBuilder::new().from_writer(out)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `n, energy, energy_ev, period_dn1_fs, period_dn2_fs` for every bound state.
pub fn write_eigen(out: impl Write, basis: &VibrationalBasis) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["n", "energy_hartree", "energy_ev", "period_dn1_fs", "period_dn2_fs"])?;
    let e = basis.energies();
    for n in 0..e.len() {
        let beat = |m: usize| e.get(m).map(|em| period_fs(em - e[n]));
        w.write_record([n.to_string(), num(e[n]), num(e[n] * HARTREE_EV), opt(beat(n + 1)), opt(beat(n + 2))])?;
    }
    w.flush()?;
    Ok(())
}

/// One propagation sample with the dissociation yield at that time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_fs: f64,
    pub norm: f64,
    #[serde(rename = "mean_R")]
    pub mean_r: Option<f64>,
    pub pop_g: f64,
    pub pop_u: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

impl TraceRow {
    pub fn new(s: &Sample, yield_: f64) -> Self {
        Self { t_fs: s.t_fs(), norm: s.norm, mean_r: s.mean_r, pop_g: s.pop_g, pop_u: s.pop_u, yield_ }
    }
}

pub fn write_trace(out: impl Write, rows: &[TraceRow]) -> Result<()> {
    let mut w = writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(input: impl Read) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// `tau_fs, pop_n0..pop_n{K-1}, yield, contrast`; failed rows carry NaN and
/// cancelled rows are left out.
pub fn write_population_map(out: impl Write, map: &PopulationMap, states: usize) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["tau_fs".to_string()];
    header.extend((0..states).map(|n| format!("pop_n{n}")));
    header.extend(["yield".to_string(), "contrast".to_string()]);
    w.write_record(&header)?;
    for row in &map.rows {
        let mut rec = Vec::with_capacity(states + 3);
        match row {
            Ok(r) => {
                rec.push(num(r.tau_fs));
                rec.extend((0..states).map(|n| num(r.populations.get(n).copied().unwrap_or(0.0))));
                rec.push(num(r.yield_));
                rec.push(opt(r.contrast));
            }
            Err(f) if f.is_cancelled() => continue,
            Err(f) => {
                rec.push(num(f.delay_fs));
                rec.extend(std::iter::repeat_n("NaN".to_string(), states + 2));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a population table back; rows with non-finite populations become failures.
pub fn read_population_map(input: impl Read) -> Result<PopulationMap> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let pops: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.starts_with("pop_n")).map(|(i, _)| i).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(tau_col), Some(yield_col)) = (col("tau_fs"), col("yield")) else {
        return Err(Error::Series("population table needs tau_fs and yield columns".into()));
    };
    if pops.is_empty() {
        return Err(Error::Series("population table has no pop_n columns".into()));
    }
    let contrast_col = col("contrast");
    let parse = |s: &str, line: usize| -> Result<f64> {
        s.trim().parse::<f64>().map_err(|_| Error::Series(format!("line {line}: cannot parse `{s}`")))
    };
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let tau = parse(&rec[tau_col], line)?;
        let populations = pops.iter().map(|&c| parse(&rec[c], line)).collect::<Result<Vec<f64>>>()?;
        if populations.iter().any(|p| !p.is_finite()) {
            rows.push(Err(RowFailure {
                index: i,
                delay_fs: tau,
                message: "failed in source run".into(),
                numerical: true,
            }));
            continue;
        }
        let contrast =
            contrast_col.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()).map(|s| parse(s, line)).transpose()?;
        rows.push(Ok(ControlRow {
            tau_fs: tau,
            yield_: parse(&rec[yield_col], line)?,
            contrast,
            packet: BoundPacket::new(f64::NAN, Vec::new()),
            populations,
        }));
    }
    Ok(PopulationMap { n_states: pops.len(), rows })
}

/// `tau_prime_fs, yield, total_yield`.
pub fn write_yield_series(out: impl Write, series: &YieldSeries) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["tau_prime_fs", "yield", "total_yield"])?;
    for ((t, y), total) in series.tau_prime_fs.iter().zip(&series.yields).zip(series.total_yields()) {
        w.write_record([num(*t), num(*y), num(total)])?;
    }
    w.flush()?;
    Ok(())
}

/// Delays and the chosen yield column of a probe table.
pub fn read_yield_series(input: impl Read, total: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let want = if total { "total_yield" } else { "yield" };
    let t_col = header.iter().position(|h| h == "tau_prime_fs");
    let y_col = header.iter().position(|h| h == want);
    let (Some(t_col), Some(y_col)) = (t_col, y_col) else {
        return Err(Error::Series(format!("probe table needs tau_prime_fs and {want} columns")));
    };
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let p = |c: usize| {
            rec[c]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Series(format!("line {}: cannot parse `{}`", i + 2, &rec[c])))
        };
        t.push(p(t_col)?);
        y.push(p(y_col)?);
    }
    Ok((t, y))
}

/// `omega_au, frequency_thz, period_fs, magnitude, amplitude` over the one-sided spectrum.
pub fn write_spectrum(out: impl Write, s: &SpectralDensity) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["omega_au", "frequency_thz", "period_fs", "magnitude", "amplitude"])?;
    let periods = s.periods_fs();
    for (((om, m), a), p) in s.frequencies_au.iter().zip(&s.magnitudes).zip(s.amplitudes()).zip(periods) {
        let thz = om / (2.0 * std::f64::consts::PI * AU_TIME_FS) * 1e3;
        w.write_record([num(*om), num(thz), if p.is_finite() { num(p) } else { String::new() }, num(*m), num(a)])?;
    }
    w.flush()?;
    Ok(())
}

/// Square matrix with header `n, m0..m{K-1}`.
pub fn write_coupling(out: impl Write, d2: &CouplingMatrix) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["n".to_string()];
    header.extend((0..d2.len()).map(|m| format!("m{m}")));
    w.write_record(&header)?;
    for (n, row) in d2.rows().iter().enumerate() {
        let mut rec = vec![n.to_string()];
        rec.extend(row.iter().map(|x| num(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Clock diagram entries for one parent level and delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockRow {
    pub tau_fs: f64,
    pub parent: usize,
    pub n: usize,
    pub amplitude: f64,
    pub phase_rad: f64,
}

impl ClockRow {
    pub fn new(tau_fs: f64, parent: usize, c: &Clock) -> Self {
        Self { tau_fs, parent, n: c.n, amplitude: c.amplitude, phase_rad: c.phase }
    }
}

pub fn write_clocks(out: impl Write, rows: &[ClockRow]) -> Result<()> {
    let mut w = writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `tau_fs, n, transfer_full, transfer_model, contrast_full, contrast_model`.
pub fn write_comparison(out: impl Write, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["tau_fs", "n", "transfer_full", "transfer_model", "contrast_full", "contrast_model"])?;
    for r in rows {
        for (n, (f, m)) in r.transfer_full.iter().zip(&r.transfer_model).enumerate() {
            w.write_record([
                num(r.tau_fs),
                n.to_string(),
                num(*f),
                num(*m),
                opt(r.contrast_full),
                opt(r.contrast_model),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Weight samples `R w(R)` (whitespace separated, `#` comments) interpolated
/// linearly onto `grid`, zero outside the tabulated range.
pub fn read_weight(text: &str, grid: &RadialGrid) -> Result<Vec<f64>> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::CurveData { row: Some(i + 1), msg: "unreadable weight sample".into() })?;
        if cols.len() != 2 || cols.iter().any(|x| !x.is_finite()) {
            return Err(Error::CurveData { row: Some(i + 1), msg: "expected two finite columns `R w`".into() });
        }
        pts.push((cols[0], cols[1]));
    }
    if pts.len() < 2 {
        return Err(Error::CurveData { row: None, msg: "weight table needs at least two rows".into() });
    }
    if pts.windows(2).any(|p| p[1].0 <= p[0].0) {
        return Err(Error::CurveData { row: None, msg: "weight R values must increase".into() });
    }
    Ok(grid
        .r_values()
        .iter()
        .map(|&r| {
            let k = pts.partition_point(|p| p.0 <= r);
            if k == 0 || k == pts.len() && r > pts[k - 1].0 {
                return 0.0;
            }
            if k == pts.len() {
                return pts[k - 1].1;
            }
            let ((r0, w0), (r1, w1)) = (pts[k - 1], pts[k]);
            w0 + (w1 - w0) * (r - r0) / (r1 - r0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowStatus {
    pub index: usize,
    pub delay_fs: f64,
    pub status: String,
    pub message: String,
}

impl From<&RowFailure> for RowStatus {
    fn from(f: &RowFailure) -> Self {
        let status = if f.is_cancelled() {
            "cancelled"
        } else if f.numerical {
            "numerical_failure"
        } else {
            "failed"
        };
        Self { index: f.index, delay_fs: f.delay_fs, status: status.into(), message: f.message.clone() }
    }
}

/// Record of one CLI run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub curves_sha256: String,
    pub workers: usize,
    pub elapsed_s: f64,
    pub rows_total: usize,
    pub rows_completed: usize,
    /// Rows that failed or were cancelled; absent rows completed.
    pub row_status: Vec<RowStatus>,
    pub cancelled: bool,
    pub outputs: Vec<PathBuf>,
    /// Command-specific results.
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }
}
