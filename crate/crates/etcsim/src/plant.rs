//! Switched three-tank water network plant.
//!
//! The model is a linearized switched integrator: tank level deviations
//! ξ = h − h_ref evolve as ξ̇ = A·ξ + B_ϑ·(input term), where ϑ selects
//! between the two pump modes. The identified A is zero, so levels move
//! along straight lines between command changes and integration over a
//! hold interval is exact, not a solver approximation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallmat::Matrix;
use thiserror::Error;

/// Pump configuration the hybrid controller switches between.
///
/// The strong mode runs both pumps and is active while the tanks are being
/// brought up to the reference; the weak mode runs only the assistant pump
/// for efficient steady-state regulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Mode 1: assistant pump only.
    WeakPump,
    /// Mode 2: assistant and powerful pump together.
    BothPumps,
}

impl Mode {
    /// Conventional 1-based index used in logs and reports.
    pub fn index(self) -> usize {
        match self {
            Mode::WeakPump => 1,
            Mode::BothPumps => 2,
        }
    }
}

/// How valve commands enter the level dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputCoupling {
    /// ξ̇ = A·ξ + B_ϑ·(v − ᾱ_ϑ): commands act as deviations from the
    /// equilibrium open levels, so v = ᾱ_ϑ holds ξ = 0 stationary.
    Deviation,
    /// ξ̇ = A·ξ + B_ϑ·v: commands enter the dynamics unshifted.
    Direct,
}

/// Identified plant constants for both pump modes.
#[derive(Debug, Clone)]
pub struct PlantModel {
    /// Drift matrix, zero for the identified water network.
    pub a: Matrix,
    /// Input matrix in weak-pump mode (m per second per degree).
    pub b1: Matrix,
    /// Input matrix in both-pumps mode.
    pub b2: Matrix,
    /// Equilibrium valve open levels in weak-pump mode (degrees).
    pub alpha_bar_1: Vec<f64>,
    /// Equilibrium valve open levels in both-pumps mode.
    pub alpha_bar_2: Vec<f64>,
    /// Reference water levels h′ (m).
    pub h_ref: Vec<f64>,
    /// Low water levels ẖ that force the switch back to both pumps (m).
    pub h_low: Vec<f64>,
    /// Command coupling used by `step`.
    pub coupling: InputCoupling,
}

/// Plant state: level deviations, active mode, and elapsed time.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    /// Level deviations ξ = h − h_ref in meters.
    pub xi: Vec<f64>,
    pub mode: Mode,
    /// Elapsed simulation time in seconds.
    pub time: f64,
}

/// Additive Gaussian measurement noise on the level sensors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-component standard deviation in meters.
    pub sensor_std: f64,
}

/// Seeded sensor noise stream; one per simulation run.
#[derive(Debug, Clone)]
pub struct SensorNoise {
    config: NoiseConfig,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("step duration must be positive, got {0}")]
    NonPositiveStep(f64),
}

impl PlantModel {
    /// The identified three-tank water network with its two pump modes.
    pub fn water_network(coupling: InputCoupling) -> Self {
        let b1 = Matrix::from_rows(&[
            &[0.1436e-5, -0.0170e-5, -0.0164e-5],
            &[-0.0098e-5, 0.1060e-5, -0.0100e-5],
            &[-0.0139e-5, -0.0139e-5, 0.1492e-5],
        ]);
        let b2 = Matrix::from_rows(&[
            &[0.7666e-5, -0.0493e-5, -0.0457e-5],
            &[-0.0274e-5, 0.5848e-5, -0.0279e-5],
            &[-0.0393e-5, -0.0432e-5, 0.7865e-5],
        ]);
        PlantModel {
            a: Matrix::zeros(3, 3),
            b1,
            b2,
            alpha_bar_1: vec![503.5950, 422.4378, 428.5839],
            alpha_bar_2: vec![84.5099, 68.2069, 72.8442],
            h_ref: vec![0.06; 3],
            h_low: vec![0.03; 3],
            coupling,
        }
    }

    /// Number of tanks.
    pub fn n(&self) -> usize {
        self.h_ref.len()
    }

    /// Input matrix for the given mode.
    pub fn b(&self, mode: Mode) -> &Matrix {
        match mode {
            Mode::WeakPump => &self.b1,
            Mode::BothPumps => &self.b2,
        }
    }

    /// Equilibrium open levels for the given mode.
    pub fn alpha_bar(&self, mode: Mode) -> &[f64] {
        match mode {
            Mode::WeakPump => &self.alpha_bar_1,
            Mode::BothPumps => &self.alpha_bar_2,
        }
    }

    /// Level deviation slopes ξ̇ under command v in the given mode.
    pub fn slope(&self, xi: &[f64], mode: Mode, v: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = match self.coupling {
            InputCoupling::Deviation => {
                v.iter().zip(self.alpha_bar(mode)).map(|(vj, aj)| vj - aj).collect()
            }
            InputCoupling::Direct => v.to_vec(),
        };
        let drift = self.a.mul_vec(xi);
        let forced = self.b(mode).mul_vec(&shifted);
        drift.iter().zip(forced.iter()).map(|(d, f)| d + f).collect()
    }
}

/// Advances the plant by `dt` seconds under the held command `v`.
///
/// With the zero drift matrix the update ξ⁺ = ξ + ξ̇·dt is exact for any
/// dt. Levels are clipped at the physical floor h = 0: a tank that runs
/// empty stays empty until its slope turns positive, and since commands are
/// held constant over the step the clip is exact per component.
pub fn step(
    state: &PlantState,
    v: &[f64],
    dt: f64,
    model: &PlantModel,
) -> Result<PlantState, PlantError> {
    if dt <= 0.0 {
        return Err(PlantError::NonPositiveStep(dt));
    }
    let slopes = model.slope(&state.xi, state.mode, v);
    let xi = state
        .xi
        .iter()
        .zip(slopes.iter())
        .zip(model.h_ref.iter())
        .map(|((x, s), h_ref)| (x + s * dt).max(-h_ref))
        .collect();
    Ok(PlantState { xi, mode: state.mode, time: state.time + dt })
}

impl SensorNoise {
    pub fn new(config: NoiseConfig, rng: ChaCha8Rng) -> Self {
        assert!(config.sensor_std >= 0.0, "sensor noise std must be nonnegative");
        SensorNoise { config, rng }
    }

    /// Draws one Gaussian sample by the Box–Muller transform, consuming two
    /// uniform draws so the stream position is input-independent.
    fn gaussian(&mut self) -> f64 {
        let u1: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = self.rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Returns the measured deviations ξ + w with per-component Gaussian noise.
///
/// Samples are consumed from the run's dedicated noise stream even when
/// sensor_std is zero, so enabling or disabling noise never shifts any other
/// random stream of the run.
pub fn sense(state: &PlantState, noise: &mut SensorNoise) -> Vec<f64> {
    state
        .xi
        .iter()
        .map(|x| {
            let w = noise.gaussian();
            x + w * noise.config.sensor_std
        })
        .collect()
}
