//! Initial ionic wavepacket from the neutral ground state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::VibrationalBasis;
use crate::error::{Error, Result};
use crate::grid::{ChannelField, TwoChannelState};
use crate::molecule::MorseCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpMode {
    FranckCondon,
    Weighted,
}

/// Neutral ground-state source plus an optional R-dependent ionization weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSpec {
    pub mode: PumpMode,
    pub ground: MorseCurve,
    pub weight: Option<Vec<f64>>,
}

impl Default for PumpSpec {
    fn default() -> Self {
        Self { mode: PumpMode::FranckCondon, ground: MorseCurve::d2_ground(), weight: None }
    }
}

impl PumpSpec {
    /// Builds the neutral ground state on the basis grid and pumps it.
    pub fn prepare(&self, basis: &VibrationalBasis, neutral_mass: f64) -> Result<PumpedState> {
        let grid = *basis.grid();
        let ground = ChannelField::from_real(grid, &self.ground.ground_state(&grid, neutral_mass))?;
        let weight = match self.mode {
            PumpMode::FranckCondon => None,
            PumpMode::Weighted => Some(
                self.weight
                    .as_deref()
                    .ok_or_else(|| Error::param("pump.weight", "weighted mode needs weight samples"))?,
            ),
        };
        franck_condon_pump(&ground, basis, weight)
    }
}

#[derive(Debug, Clone)]
pub struct PumpedState {
    pub state: TwoChannelState,
    pub coefficients: Vec<Complex64>,
}

impl PumpedState {
    pub fn populations(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Places `ground` (optionally times `weight`) on the g channel, normalised,
/// and projects it onto the ionic basis.
pub fn franck_condon_pump(
    ground: &ChannelField,
    basis: &VibrationalBasis,
    weight: Option<&[f64]>,
) -> Result<PumpedState> {
    if ground.grid() != basis.grid() {
        return Err(Error::GridMismatch);
    }
    let mut g = ground.clone();
    if let Some(w) = weight {
        if w.len() != g.grid().len() {
            return Err(Error::GridMismatch);
        }
        if !w.iter().any(|&x| x > 0.0) {
            return Err(Error::DegenerateWeight);
        }
        for (a, &x) in g.amplitudes_mut().iter_mut().zip(w) {
            *a *= x.max(0.0);
        }
    }
    g.normalize()?;
    let state = TwoChannelState::on_gerade(g);
    let coefficients = basis.project(&state)?;
    Ok(PumpedState { state, coefficients })
}
