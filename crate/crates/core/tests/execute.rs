use std::f64::consts::FRAC_PI_2;

use qcvz_core::calibration::{calibrate_pulse, Fixed, PulseSetup};
use qcvz_core::compiler::execute::{execute, if_program, ExecutionSetup};
use qcvz_core::compiler::{compile, ideal_p1, Gate, Program, ScheduleMode, SyncPolicy};
use qcvz_core::demux::ChannelTone;
use qcvz_core::mixer::{MixerConfig, Nonlinearity};
use qcvz_core::qubit::QubitParams;
use qcvz_core::signals::EnvelopeShape;
use qcvz_core::Error;

const F_IF: f64 = 3.5e9;
const TAU: f64 = 20e-9;

fn setup(n: usize, residual: f64) -> ExecutionSetup {
    let mixers: Vec<MixerConfig> = (0..n)
        .map(|k| {
            let ch = ChannelTone {
                freq_hz: 8.0e9 + 0.05e9 * k as f64,
                amp_phi0: 0.5,
                phase_rad: 0.0,
            };
            MixerConfig::new(ch, 40e6, 30.0, Nonlinearity::SineSaturating, 60.0)
                .and_then(|m| m.with_residual(residual))
                .unwrap()
        })
        .collect();
    let qubits: Vec<QubitParams> = mixers
        .iter()
        .map(|m| QubitParams::closed(m.channel.freq_hz - F_IF).unwrap())
        .collect();
    let ps = PulseSetup {
        f_if_hz: F_IF,
        shape: EnvelopeShape::Triangular,
        theta_if_deg: 0.0,
    };
    let half = calibrate_pulse(&qubits[0], &mixers[0], FRAC_PI_2, Fixed::Duration(TAU), &ps).unwrap();
    ExecutionSetup {
        qubits,
        mixers,
        f_if_hz: F_IF,
        cycle_period_s: TAU,
        shape: EnvelopeShape::Triangular,
        tau_s: TAU,
        a_if: half.a_if,
        samples_per_cycle: 64,
    }
}

fn worst_error(program: &Program, mode: ScheduleMode, sync: SyncPolicy, s: &ExecutionSetup) -> f64 {
    let (_, sched) = compile(program, mode, sync).unwrap();
    let finals = execute(&sched, s).unwrap();
    finals
        .iter()
        .zip(&program.qubits)
        .map(|(rho, g)| (rho.p1() - ideal_p1(g)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn random_programs_match_ideal_populations() {
    let s = setup(4, 0.0);
    let alphabet = [Gate::X90, Gate::X180, Gate::H, Gate::S, Gate::T, Gate::Tdg, Gate::Sdg, Gate::z_steps(3)];
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as usize
    };
    for _ in 0..4 {
        let qubits: Vec<Vec<Gate>> = (0..4)
            .map(|_| (0..1 + next() % 6).map(|_| alphabet[next() % alphabet.len()]).collect())
            .collect();
        let program = Program::new(qubits).unwrap();
        for (mode, sync) in [
            (ScheduleMode::Quantized45, SyncPolicy::Asap),
            (ScheduleMode::Rolling45, SyncPolicy::Layered),
            (ScheduleMode::Free, SyncPolicy::Asap),
        ] {
            let err = worst_error(&program, mode, sync, &s);
            assert!(err < 1e-3, "{mode} {sync:?}: {err} for {:?}", program.qubits);
        }
    }
}

#[test]
fn idle_qubit_stays_in_ground_state_with_ideal_switch() {
    let s = setup(2, 0.0);
    let program = Program::new(vec![vec![Gate::H, Gate::X90], vec![]]).unwrap();
    let (_, sched) = compile(&program, ScheduleMode::Quantized45, SyncPolicy::Asap).unwrap();
    let finals = execute(&sched, &s).unwrap();
    assert!(finals[1].p1() < 1e-15);
}

#[test]
fn off_state_leakage_disturbs_idle_qubits() {
    let program = Program::new(vec![vec![Gate::X90; 8], vec![]]).unwrap();
    let (_, sched) = compile(&program, ScheduleMode::Quantized45, SyncPolicy::Asap).unwrap();
    let leaky = execute(&sched, &setup(2, 0.05)).unwrap();
    // Eight off-state π/2 pulses at 5 % amplitude rotate by about 8·0.05·π/2.
    let expected = (8.0 * 0.05 * FRAC_PI_2 / 2.0).sin().powi(2);
    assert!((leaky[1].p1() - expected).abs() < 1e-3, "{} vs {expected}", leaky[1].p1());
}

#[test]
fn if_program_follows_schedule_phases() {
    let s = setup(3, 0.0);
    let program = Program::new(vec![
        vec![Gate::X90, Gate::X90],
        vec![Gate::X90, Gate::T, Gate::X90, Gate::S, Gate::X90],
        vec![Gate::X90, Gate::H, Gate::X90],
    ])
    .unwrap();
    let (_, sched) = compile(&program, ScheduleMode::Rolling45, SyncPolicy::Asap).unwrap();
    let prog = if_program(&sched, &s).unwrap();
    assert_eq!(prog.cycles.len(), 9);
    for (c, spec) in sched.cycles.iter().zip(&prog.cycles) {
        assert_eq!(spec.theta_if_deg, c.theta_if_deg);
    }
}

#[test]
fn mismatched_hardware_is_rejected() {
    let s = setup(2, 0.0);
    let program = Program::uniform(3, &[Gate::X90]).unwrap();
    let (_, sched) = compile(&program, ScheduleMode::Quantized45, SyncPolicy::Asap).unwrap();
    assert!(matches!(execute(&sched, &s), Err(Error::LengthMismatch { .. })));
}
