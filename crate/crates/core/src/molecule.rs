//! Born-Oppenheimer curves of the two lowest electronic states of the
//! hydrogen molecular ion and the g-u transition dipole.
//!
//! The bundled table (`data/h2plus_bo.dat`) is the exact clamped-nuclei
//! solution for R = 0.2..20 bohr in 0.05 bohr steps, produced by
//! `tools/h2plus_curves.py`. Electronic curves are isotope independent; the
//! isotope only enters through the nuclear reduced mass.

use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::spline::CubicSpline;
use crate::units::D2_REDUCED_MASS;

pub const BUNDLED_CURVES: &str = include_str!("../data/h2plus_bo.dat");

const MIN_ROWS: usize = 50;
// tolerance for the v_u >= v_g ordering at near-degenerate large R
const ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MoleculeParams {
    pub reduced_mass: f64,
    pub label: String,
}

impl MoleculeParams {
    pub fn new(reduced_mass: f64, label: impl Into<String>) -> Result<Self> {
        if !(reduced_mass > 0.0) {
            return Err(Error::param("reduced_mass", "must be positive"));
        }
        Ok(Self { reduced_mass, label: label.into() })
    }

    pub fn d2_plus() -> Self {
        Self { reduced_mass: D2_REDUCED_MASS, label: "D2+".into() }
    }
}

impl Default for MoleculeParams {
    fn default() -> Self {
        Self::d2_plus()
    }
}

/// Tabulated curves with the common dissociation limit shifted to zero.
#[derive(Debug, Clone)]
pub struct PotentialCurveSet {
    r: Vec<f64>,
    v_g: Vec<f64>,
    v_u: Vec<f64>,
    dipole: Vec<f64>,
    energy_shift: f64,
    sha256: String,
    spline_g: CubicSpline,
    spline_u: CubicSpline,
    spline_d: CubicSpline,
}

/// Curves and dipole evaluated on a grid.
#[derive(Debug, Clone)]
pub struct SampledCurves {
    pub grid: RadialGrid,
    pub v_g: Vec<f64>,
    pub v_u: Vec<f64>,
    pub dipole: Vec<f64>,
}

impl PotentialCurveSet {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CURVES).expect("bundled curve table is valid")
    }

    /// Reads the whitespace-separated `R V_g V_u d` table; `#` starts a comment line.
    pub fn load(mut source: impl Read) -> Result<Self> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    pub fn load_path(path: &std::path::Path) -> Result<Self> {
        Self::load(std::fs::File::open(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Vec::new();
        let mut v_g = Vec::new();
        let mut v_u = Vec::new();
        let mut dipole = Vec::new();
        let mut rows = Vec::new();

        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(curve_err(lineno, format!("expected 4 columns, found {}", cols.len())));
            }
            let mut vals = [0.0f64; 4];
            for (v, c) in vals.iter_mut().zip(&cols) {
                *v = c.parse().map_err(|_| curve_err(lineno, format!("cannot parse `{c}`")))?;
                if !v.is_finite() {
                    return Err(curve_err(lineno, "non-finite value".into()));
                }
            }
            if let Some(&prev) = r.last() {
                if vals[0] <= prev {
                    return Err(curve_err(lineno, "R is not strictly increasing".into()));
                }
            }
            if vals[2] < vals[1] - ORDER_TOL {
                return Err(curve_err(lineno, "V_u lies below V_g".into()));
            }
            r.push(vals[0]);
            v_g.push(vals[1]);
            v_u.push(vals[2]);
            dipole.push(vals[3]);
            rows.push(lineno);
        }

        if r.len() < MIN_ROWS {
            return Err(Error::CurveData {
                row: None,
                msg: format!("insufficient samples: {} rows, need at least {MIN_ROWS}", r.len()),
            });
        }
        if r[0] <= 0.0 {
            return Err(curve_err(rows[0], "R must be positive".into()));
        }

        // local minima of v_g, ignoring the flat tail at the last two rows
        let minima = (1..v_g.len() - 1).filter(|&i| v_g[i] < v_g[i - 1] && v_g[i] <= v_g[i + 1]).count();
        if minima != 1 {
            return Err(Error::CurveData { row: None, msg: format!("V_g has {minima} local minima, expected one") });
        }
        let last = r.len() - 1;
        let ratio = dipole[last] / (0.5 * r[last]);
        if (ratio - 1.0).abs() > 0.05 {
            return Err(curve_err(rows[last], format!("dipole is {ratio:.3} x R/2 at the largest R")));
        }

        let energy_shift = 0.5 * (v_g[last] + v_u[last]);
        v_g.iter_mut().chain(v_u.iter_mut()).for_each(|v| *v -= energy_shift);

        let sha256 = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        let spline_g = CubicSpline::natural(&r, &v_g);
        let spline_u = CubicSpline::natural(&r, &v_u);
        let spline_d = CubicSpline::natural(&r, &dipole);
        Ok(Self { r, v_g, v_u, dipole, energy_shift, sha256, spline_g, spline_u, spline_d })
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn v_g(&self) -> &[f64] {
        &self.v_g
    }

    pub fn v_u(&self) -> &[f64] {
        &self.v_u
    }

    pub fn dipole(&self) -> &[f64] {
        &self.dipole
    }

    /// Constant subtracted from the file energies to put the limit at zero.
    pub fn energy_shift(&self) -> f64 {
        self.energy_shift
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    /// Depth of the gerade well below the dissociation limit.
    pub fn well_depth(&self) -> f64 {
        -self.v_g.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `(v_g, v_u, d)` at `r`. Beyond the table the curves are zero and the
    /// dipole is `R/2`; below it the innermost row is held.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let lo = self.r[0];
        let hi = self.r[self.r.len() - 1];
        if r > hi {
            (0.0, 0.0, 0.5 * r)
        } else if r < lo {
            (self.v_g[0], self.v_u[0], self.dipole[0])
        } else {
            (self.spline_g.eval(r), self.spline_u.eval(r), self.spline_d.eval(r))
        }
    }

    pub fn sample_on_grid(&self, grid: &RadialGrid) -> SampledCurves {
        let n = grid.len();
        let mut out = SampledCurves {
            grid: *grid,
            v_g: Vec::with_capacity(n),
            v_u: Vec::with_capacity(n),
            dipole: Vec::with_capacity(n),
        };
        for r in grid.r_values() {
            let (g, u, d) = self.eval(r);
            out.v_g.push(g);
            out.v_u.push(u);
            out.dipole.push(d);
        }
        out
    }
}

fn curve_err(row: usize, msg: String) -> Error {
    Error::CurveData { row: Some(row), msg }
}

/// `V(R) = D_e (1 - exp(-a (R - R_e)))^2 - D_e`, zero at dissociation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorseCurve {
    pub well_depth: f64,
    pub width: f64,
    pub r_e: f64,
}

impl MorseCurve {
    pub fn new(well_depth: f64, width: f64, r_e: f64) -> Result<Self> {
        for (name, v) in [("well_depth", well_depth), ("width", width), ("r_e", r_e)] {
            if !(v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(Self { well_depth, width, r_e })
    }

    /// Morse fit to the neutral D2 X state: R_e = 1.40 bohr, D_e = 0.1745 hartree,
    /// width chosen so that omega_e = 3115 cm^-1 with the D2 reduced mass.
    pub fn d2_ground() -> Self {
        Self::from_spectroscopic(0.1745, 3115.0 / crate::units::HARTREE_CM, 1.40, D2_REDUCED_MASS)
            .expect("constants are positive")
    }

    /// Morse curve with well depth `D_e`, harmonic frequency `omega_e` (a.u.)
    /// and equilibrium distance `r_e` for nuclear reduced mass `mass`.
    pub fn from_spectroscopic(well_depth: f64, omega_e: f64, r_e: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !(omega_e > 0.0) || !(well_depth > 0.0) {
            return Err(Error::param("morse", "depth, frequency and mass must be positive"));
        }
        Self::new(well_depth, omega_e * (mass / (2.0 * well_depth)).sqrt(), r_e)
    }

    pub fn value(&self, r: f64) -> f64 {
        let x = 1.0 - (-self.width * (r - self.r_e)).exp();
        self.well_depth * (x * x - 1.0)
    }

    pub fn sample(&self, grid: &RadialGrid) -> Vec<f64> {
        grid.r_values().into_iter().map(|r| self.value(r)).collect()
    }

    /// Harmonic frequency omega_e (a.u.).
    pub fn omega_e(&self, mass: f64) -> f64 {
        self.width * (2.0 * self.well_depth / mass).sqrt()
    }

    /// Anharmonic constant omega_e x_e (a.u.).
    pub fn omega_e_x_e(&self, mass: f64) -> f64 {
        let w = self.omega_e(mass);
        w * w / (4.0 * self.well_depth)
    }

    /// Closed-form level `E_n = -D_e + w (n+1/2) - w x (n+1/2)^2`.
    pub fn eigenvalue(&self, n: usize, mass: f64) -> f64 {
        let v = n as f64 + 0.5;
        -self.well_depth + self.omega_e(mass) * v - self.omega_e_x_e(mass) * v * v
    }

    pub fn bound_state_count(&self, mass: f64) -> usize {
        let lambda = (2.0 * mass * self.well_depth).sqrt() / self.width;
        (lambda - 0.5).floor() as usize + 1
    }

    /// Analytic ground vibrational state sampled on the grid, unit-normalised.
    pub fn ground_state(&self, grid: &RadialGrid, mass: f64) -> Vec<f64> {
        let lambda = (2.0 * mass * self.well_depth).sqrt() / self.width;
        let log_psi: Vec<f64> = grid
            .r_values()
            .into_iter()
            .map(|r| {
                let z = 2.0 * lambda * (-self.width * (r - self.r_e)).exp();
                (lambda - 0.5) * z.ln() - 0.5 * z
            })
            .collect();
        let top = log_psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut psi: Vec<f64> = log_psi.iter().map(|l| (l - top).exp()).collect();
        let norm = (psi.iter().map(|p| p * p).sum::<f64>() * grid.dr()).sqrt();
        psi.iter_mut().for_each(|p| *p /= norm);
        psi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_table(rows: usize) -> String {
        let mut s = String::from("# synthetic\n");
        for i in 0..rows {
            let r = 0.5 + 0.2 * i as f64;
            let m = MorseCurve::new(0.1, 0.7, 2.0).unwrap();
            s.push_str(&format!("{r} {} {} {}\n", m.value(r), (-r).exp(), 0.5 * r));
        }
        s
    }

    #[test]
    fn bundled_table_well_depth() {
        let c = PotentialCurveSet::bundled();
        // 2.79 eV literature well depth
        assert!((c.well_depth() - 0.1026).abs() < 1e-3, "{}", c.well_depth());
        assert!((c.well_depth() * crate::units::HARTREE_EV - 2.79).abs() < 0.01);
        let last = c.r().len() - 1;
        assert!(c.v_u()[last].abs() < 1e-4);
        assert!(c.v_g().iter().zip(c.v_u()).all(|(g, u)| u >= &(g - ORDER_TOL)));
        assert_eq!(c.sha256().len(), 64);
    }

    #[test]
    fn rejects_short_tables() {
        let err = PotentialCurveSet::parse("1 0 1 0.5\n2 -1 1 1\n3 0 1 1.5\n").unwrap_err();
        assert!(err.to_string().contains("insufficient samples"), "{err}");
    }

    #[test]
    fn rejects_inverted_curves_with_row() {
        let mut lines: Vec<String> = synthetic_table(60).lines().map(String::from).collect();
        let cols: Vec<f64> = lines[10].split_whitespace().map(|c| c.parse().unwrap()).collect();
        lines[10] = format!("{} {} {} {}", cols[0], cols[1], cols[1] - 0.5, cols[3]);
        let err = PotentialCurveSet::parse(&lines.join("\n")).unwrap_err();
        match err {
            Error::CurveData { row: Some(11), ref msg } => assert!(msg.contains("V_u")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_non_monotone_and_nan() {
        let mut lines: Vec<String> = synthetic_table(60).lines().map(String::from).collect();
        lines[5] = lines[4].clone();
        assert!(matches!(PotentialCurveSet::parse(&lines.join("\n")), Err(Error::CurveData { row: Some(6), .. })));
        let mut lines: Vec<String> = synthetic_table(60).lines().map(String::from).collect();
        lines[7] = "1.9 NaN 0.1 0.9".into();
        assert!(matches!(PotentialCurveSet::parse(&lines.join("\n")), Err(Error::CurveData { row: Some(8), .. })));
    }

    #[test]
    fn interpolation_hits_knots_and_extrapolates() {
        let c = PotentialCurveSet::bundled();
        for i in (0..c.r().len()).step_by(17) {
            let (g, u, d) = c.eval(c.r()[i]);
            assert!((g - c.v_g()[i]).abs() < 1e-10);
            assert!((u - c.v_u()[i]).abs() < 1e-10);
            assert!((d - c.dipole()[i]).abs() < 1e-10);
        }
        assert_eq!(c.eval(25.0), (0.0, 0.0, 12.5));
        let grid = RadialGrid::default();
        let s = c.sample_on_grid(&grid);
        assert_eq!(s.v_g.len(), 2048);
        let far = grid.index_of(30.0);
        assert_eq!(s.v_g[far], 0.0);
        assert!((s.dipole[far] - 0.5 * grid.r(far)).abs() < 1e-12);
    }

    #[test]
    fn ungerade_is_repulsive_outside_the_well() {
        // The exact 2p sigma_u curve has a 6e-5 hartree van der Waals well at 12.55 bohr,
        // so monotonicity holds from the g-well minimum out to ~12 bohr.
        let c = PotentialCurveSet::bundled();
        let grid = RadialGrid::default();
        let s = c.sample_on_grid(&grid);
        let (i0, i1) = (grid.index_of(2.0), grid.index_of(12.0));
        assert!(s.v_u[i0..i1].windows(2).all(|w| w[1] < w[0]));
        let vdw = (0..c.r().len()).min_by(|&a, &b| c.v_u()[a].total_cmp(&c.v_u()[b])).unwrap();
        assert!((c.r()[vdw] - 12.55).abs() < 0.1);
    }

    #[test]
    fn dipole_asymptote() {
        let c = PotentialCurveSet::bundled();
        let last = c.r().len() - 1;
        assert!((c.dipole()[last] / (0.5 * c.r()[last]) - 1.0).abs() < 0.05);
    }

    #[test]
    fn morse_values() {
        let m = MorseCurve::new(0.103, 0.72, 2.0).unwrap();
        assert!((m.value(2.0) + 0.103).abs() < 1e-15);
        assert!(m.value(200.0).abs() < 1e-15);
        assert!(MorseCurve::new(0.1, -1.0, 2.0).is_err());
    }

    #[test]
    fn d2_morse_fit() {
        let m = MorseCurve::d2_ground();
        assert!((m.omega_e(D2_REDUCED_MASS) * crate::units::HARTREE_CM - 3115.0).abs() < 1e-6);
        let grid = RadialGrid::default();
        let psi = m.ground_state(&grid, D2_REDUCED_MASS);
        let norm: f64 = psi.iter().map(|p| p * p).sum::<f64>() * grid.dr();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(MoleculeParams::new(0.0, "x").is_err());
        assert!(MoleculeParams::new(1835.24, "D2+").is_ok());
    }
}
