//! Switched state-feedback controller and the hybrid mode automaton.
//!
//! The controller computes v = S(−K_ϑ·ξ̂ + ᾱ_ϑ), where S models the valve
//! hardware: commands quantize down to 10 degree detents and saturate at
//! the fully-closed and fully-open stops. The automaton moves between the
//! two pump modes: it leaves both-pumps mode once the commanded open levels
//! fall below the low-pressure floor (the tanks are full enough), and
//! returns to it if any tank drains to its low level.

use serde::{Deserialize, Serialize};
use smallmat::{is_hurwitz, Matrix};
use thiserror::Error;

use crate::plant::{Mode, PlantModel};

/// Combined open level (degrees, 1-norm of the command) below which
/// both-pumps mode would over-pressure the pipe network.
pub const MIN_COMBINED_OPEN_LEVEL: f64 = 180.0;

/// Valve command ceiling in degrees.
pub const VALVE_FULL_OPEN: f64 = 360.0;

/// Feedback gains and equilibrium open levels for both modes.
#[derive(Debug, Clone)]
pub struct ControllerGains {
    pub k1: Matrix,
    pub k2: Matrix,
    pub alpha_bar_1: Vec<f64>,
    pub alpha_bar_2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("closed loop -B{mode}*K{mode} is not Hurwitz; gains do not stabilize the plant")]
    NotStabilizing { mode: usize },
}

impl ControllerGains {
    /// Designed gains for the three-tank water network.
    pub fn water_network() -> Self {
        ControllerGains {
            k1: Matrix::from_rows(&[
                &[99950.0, 3029.0, 872.0],
                &[-3014.0, 99940.0, -1679.0],
                &[-922.0, 1652.0, 99982.0],
            ]),
            k2: Matrix::from_rows(&[
                &[9998.5, 167.1, 41.0],
                &[-166.6, 9997.9, -116.0],
                &[-43.0, 115.3, 9999.2],
            ]),
            alpha_bar_1: vec![503.5950, 422.4378, 428.5839],
            alpha_bar_2: vec![84.5099, 68.2069, 72.8442],
        }
    }

    pub fn k(&self, mode: Mode) -> &Matrix {
        match mode {
            Mode::WeakPump => &self.k1,
            Mode::BothPumps => &self.k2,
        }
    }

    pub fn alpha_bar(&self, mode: Mode) -> &[f64] {
        match mode {
            Mode::WeakPump => &self.alpha_bar_1,
            Mode::BothPumps => &self.alpha_bar_2,
        }
    }

    /// Verifies that −B₁K₁ and −B₂K₂ have all eigenvalues in the open left
    /// half plane. Run once when a scenario loads its gains.
    pub fn validate_stabilizing(&self, model: &PlantModel) -> Result<(), ControlError> {
        if !is_hurwitz(&-&(&model.b1 * &self.k1)) {
            return Err(ControlError::NotStabilizing { mode: 1 });
        }
        if !is_hurwitz(&-&(&model.b2 * &self.k2)) {
            return Err(ControlError::NotStabilizing { mode: 2 });
        }
        Ok(())
    }
}

/// Valve hardware map: quantize down to 10 degree detents, then saturate
/// into [0, 360] degrees. Idempotent and componentwise monotone.
pub fn saturate_quantize(s: &[f64]) -> Vec<f64> {
    s.iter()
        .map(|&sj| (10.0 * (sj / 10.0).floor()).clamp(0.0, VALVE_FULL_OPEN))
        .collect()
}

/// Feedback law v = S(−K_ϑ·ξ̂ + ᾱ_ϑ) on the held state.
pub fn compute_input(xi_hat: &[f64], mode: Mode, gains: &ControllerGains) -> Vec<f64> {
    let raw = gains.k(mode).mul_vec(xi_hat);
    let shifted: Vec<f64> =
        raw.iter().zip(gains.alpha_bar(mode)).map(|(r, a)| -r + a).collect();
    saturate_quantize(&shifted)
}

/// Mode automaton with its switch history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAutomaton {
    pub mode: Mode,
    pub switch_count: usize,
    /// Times of every switch, strictly increasing.
    pub switch_times: Vec<f64>,
}

impl ModeAutomaton {
    pub fn new(initial: Mode) -> Self {
        ModeAutomaton { mode: initial, switch_count: 0, switch_times: Vec::new() }
    }
}

/// Evaluates the mode guards once and applies at most one transition.
///
/// Weak-pump mode ends when any tank deviation reaches its low-level floor
/// (ξ_j ≤ ẖ_j − h′_j, boundary included). Both-pumps mode ends when the
/// candidate command's combined open level drops strictly below 180
/// degrees, meaning the tanks are full enough that sustained strong
/// pumping would violate the pressure constraint.
///
/// `v_candidate` must be the both-pumps command S(−K₂ξ + ᾱ₂) for the same
/// `xi` passed here; it is only inspected in both-pumps mode.
pub fn update_mode(
    automaton: &ModeAutomaton,
    xi: &[f64],
    v_candidate: &[f64],
    time: f64,
    model: &PlantModel,
) -> ModeAutomaton {
    let next_mode = match automaton.mode {
        Mode::WeakPump => {
            let low_hit = xi
                .iter()
                .zip(model.h_low.iter().zip(model.h_ref.iter()))
                .any(|(x, (lo, hr))| *x <= lo - hr);
            if low_hit {
                Mode::BothPumps
            } else {
                Mode::WeakPump
            }
        }
        Mode::BothPumps => {
            let combined: f64 = v_candidate.iter().map(|v| v.abs()).sum();
            if combined < MIN_COMBINED_OPEN_LEVEL {
                Mode::WeakPump
            } else {
                Mode::BothPumps
            }
        }
    };
    if next_mode == automaton.mode {
        automaton.clone()
    } else {
        if let Some(&last) = automaton.switch_times.last() {
            assert!(time > last, "switch times must be strictly increasing");
        }
        let mut switch_times = automaton.switch_times.clone();
        switch_times.push(time);
        ModeAutomaton { mode: next_mode, switch_count: automaton.switch_count + 1, switch_times }
    }
}
