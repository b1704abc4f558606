//! Lowering of gate lists to X90 pulses with tracked virtual-Z frames.
//!
//! A Z rotation is never played: it advances the qubit's frame `F`, and every
//! later X90 is emitted at `θ_if = F`. Because the mixer output carries phase
//! `-θ_if`, that pulse rotates about the axis at angle `-F`, and
//! `R_{-F}(π/2) = Z(-F)·X90·Z(F)` makes the emitted sequence equal to the gate
//! list followed by `Z(F_final)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use super::gates::{rotation, rz, wrap_angle, Gate, Unitary};
use crate::error::{Error, Result};
use crate::signals::{deg_to_rad, normalize_deg, phase_steps, rad_to_deg, PhaseMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoweredQubit {
    /// IF phase of each X90 pulse, in degrees `[0, 360)`.
    pub pulses: Vec<f64>,
    /// Residual virtual Z after the last pulse, in `(-π, π]`.
    pub final_frame_rad: f64,
}

/// Incremental frame tracker behind [`lower`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTracker {
    mode: PhaseMode,
    /// Frame in 45° steps (quantized mode).
    steps: i64,
    /// Frame in radians (free mode).
    rad: f64,
}

impl FrameTracker {
    pub fn new(mode: PhaseMode) -> Self {
        Self { mode, steps: 0, rad: 0.0 }
    }

    fn rotate(&mut self, angle_rad: f64) -> Result<()> {
        match self.mode {
            PhaseMode::Quantized => {
                let deg = angle_rad.to_degrees();
                let k = phase_steps(deg).ok_or(Error::UnquantizedPhase { theta_deg: deg })?;
                self.steps = (self.steps + k).rem_euclid(8);
            }
            PhaseMode::Free => self.rad = wrap_angle(self.rad + angle_rad),
        }
        Ok(())
    }

    /// Current IF phase for a pulse, in degrees `[0, 360)`.
    pub fn theta_deg(&self) -> f64 {
        match self.mode {
            PhaseMode::Quantized => 45.0 * self.steps as f64,
            PhaseMode::Free => rad_to_deg(self.rad),
        }
    }

    pub fn frame_rad(&self) -> f64 {
        match self.mode {
            PhaseMode::Quantized => wrap_angle(self.steps as f64 * FRAC_PI_4),
            PhaseMode::Free => self.rad,
        }
    }

    /// Applies one gate, calling `emit` with the IF phase of each X90 it produces.
    pub fn apply(&mut self, gate: Gate, mut emit: impl FnMut(f64)) -> Result<()> {
        match gate {
            Gate::X90 => emit(self.theta_deg()),
            Gate::X180 => {
                emit(self.theta_deg());
                emit(self.theta_deg());
            }
            Gate::Z(phi) => self.rotate(phi)?,
            Gate::S => self.rotate(FRAC_PI_2)?,
            Gate::Sdg => self.rotate(-FRAC_PI_2)?,
            Gate::T => self.rotate(FRAC_PI_4)?,
            Gate::Tdg => self.rotate(-FRAC_PI_4)?,
            Gate::H => {
                self.rotate(FRAC_PI_2)?;
                emit(self.theta_deg());
                self.rotate(FRAC_PI_2)?;
            }
        }
        Ok(())
    }
}

/// Lowers a time-ordered gate list.
pub fn lower(gates: &[Gate], mode: PhaseMode) -> Result<LoweredQubit> {
    let mut tracker = FrameTracker::new(mode);
    let mut pulses = Vec::new();
    for &g in gates {
        tracker.apply(g, |theta| pulses.push(theta))?;
    }
    Ok(LoweredQubit {
        pulses,
        final_frame_rad: tracker.frame_rad(),
    })
}

/// Drive-axis angle of a pulse emitted at `theta_if_deg`.
pub fn drive_axis_rad(theta_if_deg: f64) -> f64 {
    -deg_to_rad(normalize_deg(theta_if_deg))
}

/// `R_φ(π/2)` for a pulse at `theta_if_deg`.
pub fn pulse_unitary(theta_if_deg: f64) -> Unitary {
    rotation(drive_axis_rad(theta_if_deg), FRAC_PI_2)
}

/// Operator implemented by the pulses followed by the residual frame.
pub fn lowered_unitary(lq: &LoweredQubit) -> Unitary {
    let pulses = lq
        .pulses
        .iter()
        .fold(Unitary::identity(), |u, &theta| pulse_unitary(theta) * u);
    rz(lq.final_frame_rad) * pulses
}
