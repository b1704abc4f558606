//! Gate programs: lowering to virtual-Z pulses, TDM scheduling and execution.

pub mod execute;
pub mod gates;
pub mod lower;
pub mod schedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gates::{equivalent, ideal_unitary, Gate, Unitary};
pub use lower::{lower, lowered_unitary, LoweredQubit};
pub use schedule::{parallelism_stats, schedule, ParallelismStats, Schedule, ScheduleMode, SyncPolicy};

use crate::error::{invalid, Result};
use crate::signals::PhaseMode;

/// One gate list per qubit, in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub qubits: Vec<Vec<Gate>>,
}

impl Program {
    pub fn new(qubits: Vec<Vec<Gate>>) -> Result<Self> {
        if qubits.is_empty() {
            return Err(invalid("a program needs at least one qubit"));
        }
        Ok(Self { qubits })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Program = serde_json::from_str(s)?;
        Self::new(p.qubits)
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn lower_all(&self, mode: PhaseMode) -> Result<Vec<LoweredQubit>> {
        self.qubits.par_iter().map(|g| lower(g, mode)).collect()
    }

    /// Every qubit runs the same gate list.
    pub fn uniform(n_qubits: usize, gates: &[Gate]) -> Result<Self> {
        Self::new(vec![gates.to_vec(); n_qubits])
    }

    /// `pulses` X90s per qubit with a uniformly random `Z(k·π/4)` between consecutive ones.
    pub fn random(n_qubits: usize, pulses: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qubits = (0..n_qubits)
            .map(|_| {
                let mut gates = Vec::with_capacity(2 * pulses);
                for i in 0..pulses {
                    if i > 0 {
                        gates.push(Gate::z_steps(rng.gen_range(0..8)));
                    }
                    gates.push(Gate::X90);
                }
                gates
            })
            .collect();
        Self::new(qubits)
    }
}

/// Phase discipline the lowering needs for a schedule mode.
pub fn phase_mode_for(mode: ScheduleMode) -> PhaseMode {
    match mode {
        ScheduleMode::Free => PhaseMode::Free,
        _ => PhaseMode::Quantized,
    }
}

/// Lowers and schedules a program.
pub fn compile(program: &Program, mode: ScheduleMode, sync: SyncPolicy) -> Result<(Vec<LoweredQubit>, Schedule)> {
    let lowered = program.lower_all(phase_mode_for(mode))?;
    let s = schedule(&lowered, mode, sync)?;
    Ok((lowered, s))
}

/// Excited population of `U|0⟩` for the ideal gate list.
pub fn ideal_p1(gates: &[Gate]) -> f64 {
    ideal_unitary(gates)[(1, 0)].norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn program_json_round_trip() {
        let p = Program::from_json(r#"{"qubits": [["X90", "T", "X90"], ["H", "Z(pi/2)"]]}"#).unwrap();
        assert_eq!(p.qubits[1], vec![Gate::H, Gate::z(std::f64::consts::FRAC_PI_2)]);
        let back = Program::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(Program::from_json(r#"{"qubits": []}"#).is_err());
        assert!(Program::from_json(r#"{"qubits": [["Q"]]}"#).is_err());
    }

    #[test]
    fn random_program_is_seeded() {
        let a = Program::random(4, 10, 7).unwrap();
        assert_eq!(a, Program::random(4, 10, 7).unwrap());
        assert_ne!(a, Program::random(4, 10, 8).unwrap());
        assert_eq!(a.qubits[0].len(), 19);
    }

    #[test]
    fn uniform_workload_parallelism_is_n() {
        let p = Program::uniform(16, &[Gate::X90, Gate::T, Gate::X90, Gate::H]).unwrap();
        let (_, s) = compile(&p, ScheduleMode::Quantized45, SyncPolicy::Asap).unwrap();
        assert_eq!(parallelism_stats(&s).mean_fired, 16.0);
    }

    #[test]
    fn ideal_population_of_hadamard_is_half() {
        assert!((ideal_p1(&[Gate::H]) - 0.5).abs() < 1e-15);
        assert!((ideal_p1(&[Gate::X180]) - 1.0).abs() < 1e-15);
    }
}
