//! Plays a schedule through the shared IF line, one mixer per qubit.

use rayon::prelude::*;

use super::schedule::{Schedule, ScheduleMode};
use crate::error::{Error, Result};
use crate::mixer::{baseband_output, BitTimeline, MixerConfig};
use crate::qubit::{auto_dt, propagate, DensityMatrix, QubitParams};
use crate::signals::{make_if_program, CycleSpec, Envelope, EnvelopeShape, IfProgram, PhaseMode};

/// Hardware a schedule runs on. All mixers share one IF line and so one
/// pulse amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionSetup {
    pub qubits: Vec<QubitParams>,
    pub mixers: Vec<MixerConfig>,
    pub f_if_hz: f64,
    pub cycle_period_s: f64,
    pub shape: EnvelopeShape,
    /// Pulse duration (at most one cycle).
    pub tau_s: f64,
    pub a_if: f64,
    pub samples_per_cycle: usize,
}

/// IF program realizing the schedule's cycles.
pub fn if_program(schedule: &Schedule, setup: &ExecutionSetup) -> Result<IfProgram> {
    let env = Envelope::new(setup.shape, setup.tau_s, setup.a_if)?;
    let cycles = schedule
        .cycles
        .iter()
        .map(|c| CycleSpec::pulse(c.theta_if_deg, env))
        .collect();
    let mode = match schedule.mode {
        ScheduleMode::Free => PhaseMode::Free,
        _ => PhaseMode::Quantized,
    };
    make_if_program(setup.f_if_hz, setup.cycle_period_s, cycles, mode)
}

/// Final state of every qubit after the schedule, starting from `|0⟩`.
pub fn execute(schedule: &Schedule, setup: &ExecutionSetup) -> Result<Vec<DensityMatrix>> {
    let n = schedule.n_qubits;
    for len in [setup.qubits.len(), setup.mixers.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let prog = if_program(schedule, setup)?;
    (0..n)
        .into_par_iter()
        .map(|q| {
            let bits = BitTimeline::new(schedule.cycles.iter().map(|c| c.fired.contains(&q)).collect());
            let drive = baseband_output(&setup.mixers[q], &prog, &bits, setup.samples_per_cycle)?;
            if drive.is_empty() {
                return Ok(DensityMatrix::ground());
            }
            let dt = auto_dt(&setup.qubits[q], &drive, f64::INFINITY);
            Ok(propagate(&setup.qubits[q], &drive, &DensityMatrix::ground(), dt, false)?.final_state)
        })
        .collect()
}
